#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/domain.hpp"
#include "mobforge/gateway.hpp"
#include "mobforge/stats.hpp"

namespace mobforge {

std::optional<Dimension> parse_dimension(std::string_view name);
// Throws Error(UnknownDimension).
Dimension require_dimension(std::string_view name);
const std::vector<Dimension>& default_dimension_order();

// Ordered (dimension, value index) pairs, root first.
struct CohortKey {
    std::vector<std::pair<Dimension, std::size_t>> parts;

    bool empty() const { return parts.empty(); }
    bool has(Dimension d) const;
    bool matches(const IndividualProfile& p) const;
    CohortKey with(Dimension d, std::size_t value) const;
    // "occupation=Students, age_band=18-25"; "all" for the root.
    std::string label() const;

    friend bool operator==(const CohortKey&, const CohortKey&) = default;
    friend auto operator<=>(const CohortKey&, const CohortKey&) = default;
};

nlohmann::json key_to_json(const CohortKey& key);
CohortKey key_from_json(const nlohmann::json& j);

struct Cohort {
    CohortKey key;
    std::vector<std::string> members;  // sorted
};

// Exact partition of the given persons (all profiles when `members` is
// omitted) by value combination over `dims`; empty cohorts are omitted and
// the result is ordered by value indices.
std::vector<Cohort> partition(const Dataset& dataset, std::span<const Dimension> dims, const CohortKey& base = {});
std::vector<Cohort> partition(const Dataset& dataset, std::span<const std::string> members,
                              std::span<const Dimension> dims, const CohortKey& base = {});
std::vector<Cohort> partition(const Dataset& dataset, const std::vector<std::string>& dim_names);

struct GateConfig {
    int split_threshold = 7;
    int max_attempts = 2;  // re-prompts on an unparseable rating, then fatal
    double temperature = 0.0;
};

struct GateResult {
    int score = 1;
    bool split = false;
    std::string rationale;
    std::string transcript_id;
};

// Largest pairwise JSD among the candidates' start-time and distance
// histograms (candidates without trips are skipped; 0 with fewer than two).
double gate_max_jsd(const std::vector<CohortStats>& candidates);
int replay_gate_score(double max_jsd);
// First integer 1..10, preferring one after the word "rating".
std::optional<int> parse_rating(std::string_view text);

GateResult segmentation_gate(const CohortStats& parent, const CohortKey& key,
                             const std::vector<CohortStats>& candidates, Dimension dim, Gateway& gateway,
                             const GateConfig& config = {});

struct CohortConfig {
    std::vector<Dimension> dimensions = default_dimension_order();
    std::size_t min_cohort_size = 30;
    int max_depth = 4;
    GateConfig gate;
    LogBinning binning;
    int workers = 1;
};

struct GateRecord {
    Dimension dimension;
    std::size_t child_count = 0;
    bool size_ok = false;
    std::optional<GateResult> result;  // absent when the size guard ruled the split out
};

struct CohortNode {
    int id = 0;
    int parent = -1;
    int depth = 0;
    CohortKey key;
    std::vector<std::string> members;
    CohortStats stats;
    std::optional<Dimension> split_dimension;
    std::vector<int> children;
    std::vector<GateRecord> gates;

    bool leaf() const { return children.empty(); }
};

struct CohortTree {
    std::vector<CohortNode> nodes;  // nodes[0] is the root; ids are indices

    const CohortNode& root() const { return nodes.front(); }
    std::vector<int> leaves() const;
    // Deepest node whose key matches the profile.
    int locate(const IndividualProfile& profile) const;
};

CohortTree refine_hierarchy(const Dataset& dataset, Gateway& gateway, const CohortConfig& config);

void write_tree_ndjson(std::ostream& out, const CohortTree& tree, const nlohmann::json* meta = nullptr);
void write_tree_ndjson(const std::string& path, const CohortTree& tree, const nlohmann::json* meta = nullptr);
CohortTree read_tree_ndjson(std::istream& in);
CohortTree read_tree_ndjson(const std::string& path);

}  // namespace mobforge
