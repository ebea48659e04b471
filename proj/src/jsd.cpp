#include "mobforge/jsd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mobforge/error.hpp"

namespace mobforge {

namespace {

double half_kl_term(double x, double m) { return x > 0.0 ? x * std::log2(x / m) : 0.0; }

template <class T>
double jsd_impl(std::span<const T> p, std::span<const T> q) {
    if (p.size() != q.size())
        throw Error(ErrorCode::BinningMismatch,
                    "histograms have " + std::to_string(p.size()) + " and " + std::to_string(q.size()) + " bins");
    double tp = 0.0, tq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        tp += static_cast<double>(p[i]);
        tq += static_cast<double>(q[i]);
    }
    if (!(tp > 0.0) || !(tq > 0.0)) throw Error(ErrorCode::EmptyDistribution, "histogram total is zero");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = static_cast<double>(p[i]) / tp;
        const double b = static_cast<double>(q[i]) / tq;
        if (a == b) continue;  // contributes exactly zero, and keeps jsd(P,P) == 0
        const double m = 0.5 * (a + b);
        sum += half_kl_term(a, m) + half_kl_term(b, m);
    }
    return std::clamp(0.5 * sum, 0.0, 1.0);
}

}  // namespace

double jsd(std::span<const double> p, std::span<const double> q) { return jsd_impl(p, q); }
double jsd(std::span<const std::uint64_t> p, std::span<const std::uint64_t> q) { return jsd_impl(p, q); }

double jsd(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
    std::vector<double> a, b;
    auto ip = p.begin();
    auto iq = q.begin();
    while (ip != p.end() || iq != q.end()) {
        if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
            a.push_back(ip->second);
            b.push_back(0.0);
            ++ip;
        } else if (ip == p.end() || iq->first < ip->first) {
            a.push_back(0.0);
            b.push_back(iq->second);
            ++iq;
        } else {
            a.push_back(ip->second);
            b.push_back(iq->second);
            ++ip;
            ++iq;
        }
    }
    return jsd(std::span<const double>(a), std::span<const double>(b));
}

}  // namespace mobforge
