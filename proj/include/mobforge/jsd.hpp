#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mobforge {

// Jensen-Shannon divergence, base 2, between two count vectors of equal
// length (normalized internally). Throws Error(BinningMismatch) on a length
// mismatch and Error(EmptyDistribution) when either total is zero.
double jsd(std::span<const double> p, std::span<const double> q);
double jsd(std::span<const std::uint64_t> p, std::span<const std::uint64_t> q);

// Categorical form: supports are unioned first.
double jsd(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

}  // namespace mobforge
