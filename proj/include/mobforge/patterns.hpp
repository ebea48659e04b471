#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mobforge/cohort.hpp"
#include "mobforge/gateway.hpp"
#include "mobforge/stats.hpp"

namespace mobforge {

struct EvalScores {
    double group_inference_accuracy = 0.0;
    double masked_completion_score = 0.0;
    std::size_t evaluated = 0;  // holdout diaries scored
};

struct MobilityPattern {
    int node_id = 0;
    int parent = -1;
    CohortKey cohort_key;
    std::string label;
    CohortStats stats;
    std::string narrative;
    int revision = 0;
    std::optional<EvalScores> eval_scores;
    std::vector<std::string> train_members;
    std::vector<std::string> holdout_members;
    std::vector<std::string> transcript_ids;
};

struct PatternConfig {
    double holdout_fraction = 0.2;
    std::size_t eval_min_trajectories = 20;
    std::size_t eval_max_trajectories = 100;
    double revision_threshold = 0.5;
    int max_revision_rounds = 2;
    int time_tolerance_min = 60;
    double distance_tolerance = 0.5;
    double temperature = 0.2;
    std::uint64_t seed = 1;
    int workers = 1;
    // Skip narrative extraction and self-evaluation: the pattern is the raw
    // statistics digest only.
    bool raw_digest_only = false;
};

// Deterministic narrative the replay backend writes for one dimension.
std::string replay_narrative(const CohortKey& key, const CohortStats& stats, Dimension dim);

// One extraction call per key dimension, responses joined in key order.
// `failure_examples` is appended to the statistics slot on revision rounds.
MobilityPattern extract_patterns(const CohortKey& key, const CohortStats& stats, Gateway& gateway,
                                 const PatternConfig& config = {}, const std::string& failure_examples = {});

// Text of a pattern as shown to the model (label, highlights, narrative).
std::string pattern_summary(const MobilityPattern& p);

enum class MaskField { ArriveTime, Purpose, Mode, DistanceM };
std::string_view mask_field_name(MaskField f);

struct Mask {
    std::size_t point = 0;
    MaskField field = MaskField::Purpose;
};

struct MaskedDiary {
    TravelDiary base;
    std::vector<Mask> masks;
};

// Diary as listed in prompts; masked fields render as [MASK_k] (1-based).
std::string render_diary(const TravelDiary& diary, std::span<const Mask> masks = {});

// Replay classifier: argmin over patterns of JSD(start hours) + JSD(distance
// bins) between the diary and the cohort, first index on ties. Patterns
// without trips are skipped; npos when none qualify.
std::size_t nearest_cohort(const TravelDiary& diary, std::span<const MobilityPattern> patterns);

struct GroupInference {
    std::optional<std::size_t> predicted;  // index into patterns; absent when unmatchable
    std::string rationale;
};

// Matches a label from the GROUP line, else the longest label found anywhere.
std::optional<std::size_t> match_group_label(std::string_view response, std::span<const MobilityPattern> patterns);

GroupInference infer_group(const TravelDiary& anonymized, std::span<const MobilityPattern> patterns, Gateway& gateway,
                           const PatternConfig& config = {});

struct MaskedCompletion {
    TravelDiary filled;
    std::vector<double> field_scores;  // per mask, 0 or 1
    double score = 0.0;                // mean of field_scores
};

// Throws Error(InvalidSpec) when masks are empty or out of range.
MaskedCompletion complete_masked(const MaskedDiary& masked, const MobilityPattern& pattern, Gateway& gateway,
                                 const PatternConfig& config = {});

// Holdout diaries per pattern (same order as `patterns`). Patterns with no
// holdout diaries keep eval_scores unset.
std::vector<MobilityPattern> self_evaluate(std::vector<MobilityPattern> patterns,
                                           const std::vector<std::vector<TravelDiary>>& holdout, Gateway& gateway,
                                           const PatternConfig& config = {});

// Splits each leaf 80/20 (seeded), summarizes training members for every
// node, extracts patterns and self-evaluates the leaves. One pattern per tree
// node, indexed by node id.
std::vector<MobilityPattern> build_patterns(const Dataset& dataset, const CohortTree& tree, Gateway& gateway,
                                            const PatternConfig& config, const LogBinning& binning = {});

// Pattern of the deepest tree node matching the profile that has one.
const MobilityPattern& lookup_pattern(const CohortTree& tree, std::span<const MobilityPattern> patterns,
                                      const IndividualProfile& profile);

nlohmann::json pattern_to_json(const MobilityPattern& p);
MobilityPattern pattern_from_json(const nlohmann::json& j);
void write_patterns_ndjson(const std::string& path, std::span<const MobilityPattern> patterns,
                           const nlohmann::json* meta = nullptr);
std::vector<MobilityPattern> read_patterns_ndjson(const std::string& path);

}  // namespace mobforge
