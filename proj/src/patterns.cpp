#include "mobforge/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/parallel.hpp"

namespace mobforge {

using nlohmann::json;

namespace {

std::string group_profile_text(const CohortKey& key, const CohortStats& stats) {
    std::string out = key.empty() ? "the whole surveyed population" : key.label();
    out += " (" + std::to_string(stats.member_count) + " people)";
    return out;
}

template <class T>
void seeded_shuffle(std::vector<T>& v, CounterRng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

std::string diary_day_line(const TravelDiary& d) {
    return "Date: " + d.date.iso() + " (" + std::string(day_type_name(day_type_of(d.date))) + ")";
}

std::string value_text(const TrajectoryPoint& p, MaskField f) {
    switch (f) {
        case MaskField::ArriveTime: return format_clock(p.arrive_time);
        case MaskField::Purpose: return std::string(name_of(p.purpose));
        case MaskField::Mode: return std::string(name_of(p.mode));
        case MaskField::DistanceM: return std::to_string(std::lround(p.distance_m));
    }
    return {};
}

// Parses "MASK_k: value" lines; later lines override earlier ones.
std::map<std::size_t, std::string> parse_mask_lines(std::string_view text) {
    std::map<std::size_t, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = std::string(trim(line));
        while (!t.empty() && (t.front() == '-' || t.front() == '*' || t.front() == '`')) t.erase(0, 1);
        t = std::string(trim(t));
        if (!starts_with_icase(t, "MASK_")) continue;
        std::size_t i = 5, k = 0;
        bool digits = false;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) {
            k = k * 10 + static_cast<std::size_t>(t[i] - '0');
            ++i;
            digits = true;
        }
        if (!digits) continue;
        while (i < t.size() && (t[i] == ']' || t[i] == ' ')) ++i;
        if (i >= t.size() || t[i] != ':') continue;
        auto value = std::string(trim(std::string_view(t).substr(i + 1)));
        while (!value.empty() && (value.back() == '`' || value.back() == '.')) value.pop_back();
        out[k] = std::string(trim(value));
    }
    return out;
}

double field_score(const TrajectoryPoint& truth, MaskField f, const std::string& value, const PatternConfig& cfg,
                   TrajectoryPoint& filled) {
    switch (f) {
        case MaskField::ArriveTime: {
            auto t = parse_clock(value);
            if (!t) return 0.0;
            filled.arrive_time = *t;
            return std::abs(*t - truth.arrive_time) <= cfg.time_tolerance_min ? 1.0 : 0.0;
        }
        case MaskField::Purpose: {
            auto p = parse_vocab<Purpose>(value);
            if (!p) return 0.0;
            filled.purpose = *p;
            return *p == truth.purpose ? 1.0 : 0.0;
        }
        case MaskField::Mode: {
            auto m = parse_vocab<TravelMode>(value);
            if (!m) return 0.0;
            filled.mode = *m;
            return *m == truth.mode ? 1.0 : 0.0;
        }
        case MaskField::DistanceM: {
            std::string digits;
            for (char c : value) {
                if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') digits.push_back(c);
                else if (!digits.empty()) break;
            }
            if (digits.empty()) return 0.0;
            const double d = std::stod(digits);
            filled.distance_m = d;
            if (truth.distance_m == 0.0) return d == 0.0 ? 1.0 : 0.0;
            return std::abs(d - truth.distance_m) <= cfg.distance_tolerance * truth.distance_m ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

std::string replay_mask_value(const MobilityPattern& pat, const TrajectoryPoint& p, MaskField f) {
    const auto& s = pat.stats.all;
    switch (f) {
        case MaskField::ArriveTime: {
            const auto h = modal_index(s.start_time_hist);
            return h == static_cast<std::size_t>(-1) ? "12:00" : format_clock(static_cast<int>(h) * 60 + 30);
        }
        case MaskField::Purpose: {
            const auto i = modal_index(s.purpose_freq);
            return std::string(name_of(from_index<Purpose>(i == static_cast<std::size_t>(-1) ? kPurposes - 1 : i)));
        }
        case MaskField::Mode: {
            const auto i = modal_index(s.mode_freq);
            return std::string(name_of(from_index<TravelMode>(i == static_cast<std::size_t>(-1) ? kModes - 1 : i)));
        }
        case MaskField::DistanceM: {
            double m = median_of_bins(s.distance_by_purpose[index_of(p.purpose)], pat.stats.distance_binning);
            if (m < 0) m = median_of_bins(s.distance_hist, pat.stats.distance_binning);
            return std::to_string(std::lround(std::max(0.0, m)));
        }
    }
    return {};
}

}  // namespace

std::string replay_narrative(const CohortKey& key, const CohortStats& stats, Dimension dim) {
    std::string value;
    for (const auto& [d, v] : key.parts)
        if (d == dim) value = CohortKey{{{d, v}}}.label();
    return "Dimension " + (value.empty() ? std::string(name_of(dim)) : value) + ":\n" +
           stats_highlights(stats.all, stats.distance_binning);
}

MobilityPattern extract_patterns(const CohortKey& key, const CohortStats& stats, Gateway& gateway,
                                 const PatternConfig& config, const std::string& failure_examples) {
    if (stats.member_count == 0) throw Error(ErrorCode::EmptyCohort, "no members in " + key.label());
    MobilityPattern p;
    p.cohort_key = key;
    p.label = key.label();
    p.stats = stats;
    if (config.raw_digest_only) {
        p.narrative = describe_stats(stats);
        return p;
    }
    std::string digest = describe_stats(stats);
    if (!failure_examples.empty()) digest += "\n\nObservations the current patterns did not explain:\n" + failure_examples;
    std::vector<std::string> parts;
    for (const auto& [dim, value] : key.parts) {
        LlmRequest req;
        req.template_id = TemplateId::PatternExtraction;
        req.slots = {group_profile_text(key, stats), digest, std::string(name_of(dim))};
        req.params.temperature = config.temperature;
        const Dimension d = dim;
        req.replay = [&key, &stats, d](CounterRng&) { return replay_narrative(key, stats, d); };
        auto c = gateway.complete(req);
        parts.push_back(c.text);
        p.transcript_ids.push_back(c.transcript.request_hash);
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) p.narrative += "\n\n";
        p.narrative += parts[i];
    }
    return p;
}

std::string pattern_summary(const MobilityPattern& p) {
    std::string out = "Group '" + p.label + "':\n" + stats_highlights(p.stats.all, p.stats.distance_binning);
    if (!p.narrative.empty()) out += "\n" + p.narrative;
    return out;
}

std::string_view mask_field_name(MaskField f) {
    switch (f) {
        case MaskField::ArriveTime: return "arrive_time";
        case MaskField::Purpose: return "purpose";
        case MaskField::Mode: return "mode";
        case MaskField::DistanceM: return "distance_m";
    }
    return "";
}

std::string render_diary(const TravelDiary& diary, std::span<const Mask> masks) {
    std::string out = diary_day_line(diary);
    for (std::size_t i = 0; i < diary.points.size(); ++i) {
        const auto& p = diary.points[i];
        auto field = [&](MaskField f) {
            for (std::size_t k = 0; k < masks.size(); ++k)
                if (masks[k].point == i && masks[k].field == f) return "[MASK_" + std::to_string(k + 1) + "]";
            return value_text(p, f);
        };
        out += "\n" + std::to_string(i + 1) + ". arrive " + field(MaskField::ArriveTime) + " after a " +
               std::to_string(p.duration_min) + "-minute trip, purpose " + field(MaskField::Purpose) + ", mode " +
               field(MaskField::Mode) + ", distance " + field(MaskField::DistanceM) + " m";
    }
    if (diary.points.empty()) out += "\nno trips";
    return out;
}

std::size_t nearest_cohort(const TravelDiary& diary, std::span<const MobilityPattern> patterns) {
    std::size_t best = static_cast<std::size_t>(-1);
    double best_score = 0.0;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const auto& s = patterns[i].stats;
        if (s.all.trips() == 0 || diary.points.empty()) continue;
        Counts hours(kHours), dist(s.distance_binning.size());
        for (const auto& p : diary.points) {
            ++hours[static_cast<std::size_t>(std::clamp(p.depart_time(), 0, kMinutesPerDay - 1) / 60)];
            ++dist[s.distance_binning.index(p.distance_m)];
        }
        const double score = jsd(std::span<const std::uint64_t>(hours), std::span<const std::uint64_t>(s.all.start_time_hist)) +
                             jsd(std::span<const std::uint64_t>(dist), std::span<const std::uint64_t>(s.all.distance_hist));
        if (best == static_cast<std::size_t>(-1) || score < best_score) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

std::optional<std::size_t> match_group_label(std::string_view response, std::span<const MobilityPattern> patterns) {
    std::istringstream in{std::string(response)};
    std::string line;
    std::optional<std::string> named;
    while (std::getline(in, line)) {
        auto t = trim(line);
        while (!t.empty() && (t.front() == '*' || t.front() == '`' || t.front() == '-')) t.remove_prefix(1);
        t = trim(t);
        if (starts_with_icase(t, "GROUP:")) named = std::string(trim(t.substr(6)));
    }
    if (named) {
        std::string v = *named;
        while (!v.empty() && (v.back() == '`' || v.back() == '*' || v.back() == '.')) v.pop_back();
        if (v.size() >= 2 && (v.front() == '\'' || v.front() == '"') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
        for (std::size_t i = 0; i < patterns.size(); ++i)
            if (detail::iequals_trimmed(v, patterns[i].label)) return i;
    }
    const auto lower = to_lower(response);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const auto label = to_lower(patterns[i].label);
        if (label.empty() || lower.find(label) == std::string::npos) continue;
        if (!best || label.size() > patterns[*best].label.size()) best = i;
    }
    return best;
}

GroupInference infer_group(const TravelDiary& anonymized, std::span<const MobilityPattern> patterns, Gateway& gateway,
                           const PatternConfig& config) {
    if (patterns.empty()) throw Error(ErrorCode::InvalidSpec, "infer_group needs at least one pattern");
    TravelDiary diary = anonymized;
    diary.person_id.clear();
    diary.provenance.clear();
    std::string summaries;
    for (const auto& p : patterns) summaries += (summaries.empty() ? "" : "\n\n") + pattern_summary(p);
    LlmRequest req;
    req.template_id = TemplateId::PatternsUpdateStep1;
    req.slots = {summaries, render_diary(diary)};
    req.params.temperature = config.temperature;
    req.replay = [&diary, patterns](CounterRng&) {
        const auto i = nearest_cohort(diary, patterns);
        if (i == static_cast<std::size_t>(-1)) return std::string("No group fits this trajectory.");
        return "The trajectory's start times and trip distances are closest to this group.\nGROUP: " + patterns[i].label;
    };
    auto c = gateway.complete(req);
    return {match_group_label(c.text, patterns), c.text};
}

MaskedCompletion complete_masked(const MaskedDiary& masked, const MobilityPattern& pattern, Gateway& gateway,
                                 const PatternConfig& config) {
    if (masked.masks.empty()) throw Error(ErrorCode::InvalidSpec, "masked diary has no masks");
    for (const auto& m : masked.masks)
        if (m.point >= masked.base.points.size()) throw Error(ErrorCode::InvalidSpec, "mask points past the diary end");
    TravelDiary anon = masked.base;
    anon.person_id.clear();
    LlmRequest req;
    req.template_id = TemplateId::PatternsUpdateStep2;
    req.slots = {pattern_summary(pattern), render_diary(anon, masked.masks)};
    req.params.temperature = config.temperature;
    req.replay = [&masked, &pattern](CounterRng&) {
        std::string out;
        for (std::size_t k = 0; k < masked.masks.size(); ++k) {
            const auto& m = masked.masks[k];
            out += "MASK_" + std::to_string(k + 1) + ": " + replay_mask_value(pattern, masked.base.points[m.point], m.field) + "\n";
        }
        return out;
    };
    const auto c = gateway.complete(req);
    const auto values = parse_mask_lines(c.text);
    MaskedCompletion out;
    out.filled = masked.base;
    for (std::size_t k = 0; k < masked.masks.size(); ++k) {
        const auto& m = masked.masks[k];
        auto it = values.find(k + 1);
        const double s = it == values.end()
                             ? 0.0
                             : field_score(masked.base.points[m.point], m.field, it->second, config, out.filled.points[m.point]);
        out.field_scores.push_back(s);
    }
    out.score = std::accumulate(out.field_scores.begin(), out.field_scores.end(), 0.0) /
                static_cast<double>(out.field_scores.size());
    return out;
}

std::vector<MobilityPattern> self_evaluate(std::vector<MobilityPattern> patterns,
                                           const std::vector<std::vector<TravelDiary>>& holdout, Gateway& gateway,
                                           const PatternConfig& config) {
    if (holdout.size() != patterns.size()) throw Error(ErrorCode::InvalidSpec, "one holdout set per pattern expected");
    const std::vector<MobilityPattern> snapshot = patterns;
    parallel_for(patterns.size(), config.workers, [&](std::size_t i) {
        std::vector<TravelDiary> cases;
        for (const auto& d : holdout[i])
            if (!d.points.empty()) cases.push_back(d);
        if (cases.empty()) return;
        CounterRng pick(mix_seed(config.seed, std::string_view("holdout/" + patterns[i].label)));
        seeded_shuffle(cases, pick);
        const auto limit = std::max(config.eval_min_trajectories, config.eval_max_trajectories);
        if (cases.size() > limit) cases.resize(limit);

        std::vector<Mask> masks;
        for (const auto& d : cases) {
            CounterRng r(mix_seed(config.seed, std::string_view("mask/" + d.person_id + "/" + d.date.iso())));
            masks.push_back({static_cast<std::size_t>(r.uniform_int(d.points.size())),
                             static_cast<MaskField>(r.uniform_int(std::uint64_t{4}))});
        }

        std::vector<MobilityPattern> view = snapshot;
        MobilityPattern& self = patterns[i];
        for (int round = 0;; ++round) {
            view[i] = self;
            std::size_t correct = 0;
            double masked_sum = 0.0;
            std::vector<std::string> failures;
            for (std::size_t k = 0; k < cases.size(); ++k) {
                const auto g = infer_group(cases[k], view, gateway, config);
                if (g.predicted && *g.predicted == i) ++correct;
                else if (failures.size() < 3)
                    failures.push_back("misattributed trajectory:\n" + render_diary(cases[k]));
                const Mask one[] = {masks[k]};
                const auto m = complete_masked({cases[k], {one[0]}}, self, gateway, config);
                masked_sum += m.score;
                if (m.score < 1.0 && failures.size() < 6)
                    failures.push_back("mis-filled " + std::string(mask_field_name(masks[k].field)) + " (true value " +
                                       value_text(cases[k].points[masks[k].point], masks[k].field) + ") in:\n" +
                                       render_diary(cases[k]));
            }
            const double n = static_cast<double>(cases.size());
            self.eval_scores = EvalScores{static_cast<double>(correct) / n, masked_sum / n, cases.size()};
            const bool low = self.eval_scores->group_inference_accuracy < config.revision_threshold ||
                             self.eval_scores->masked_completion_score < config.revision_threshold;
            if (!low || round >= config.max_revision_rounds) break;
            std::string examples;
            for (const auto& f : failures) examples += (examples.empty() ? "" : "\n\n") + f;
            auto revised = extract_patterns(self.cohort_key, self.stats, gateway, config, examples);
            self.narrative = std::move(revised.narrative);
            self.transcript_ids.insert(self.transcript_ids.end(), revised.transcript_ids.begin(),
                                       revised.transcript_ids.end());
            ++self.revision;
        }
    });
    return patterns;
}

std::vector<MobilityPattern> build_patterns(const Dataset& dataset, const CohortTree& tree, Gateway& gateway,
                                            const PatternConfig& config, const LogBinning& binning) {
    const auto n = tree.nodes.size();
    std::vector<std::vector<std::string>> train(n), hold(n);
    for (int leaf : tree.leaves()) {
        const auto& node = tree.nodes[static_cast<std::size_t>(leaf)];
        std::vector<std::string> ids = node.members;
        CounterRng rng(mix_seed(config.seed, std::string_view("split/" + node.key.label())));
        seeded_shuffle(ids, rng);
        auto k = static_cast<std::size_t>(std::floor(static_cast<double>(ids.size()) * config.holdout_fraction));
        if (k >= ids.size()) k = ids.size() - 1;
        hold[leaf].assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
        train[leaf].assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
        std::sort(hold[leaf].begin(), hold[leaf].end());
        std::sort(train[leaf].begin(), train[leaf].end());
        const std::set<std::string> t(train[leaf].begin(), train[leaf].end());
        for (const auto& h : hold[leaf])
            if (t.count(h)) throw Error(ErrorCode::HoldoutViolation, h + " is in both training and holdout sets");
        for (int up = tree.nodes[static_cast<std::size_t>(leaf)].parent; up >= 0; up = tree.nodes[static_cast<std::size_t>(up)].parent) {
            train[up].insert(train[up].end(), train[leaf].begin(), train[leaf].end());
            hold[up].insert(hold[up].end(), hold[leaf].begin(), hold[leaf].end());
        }
    }
    std::vector<MobilityPattern> patterns(n);
    parallel_for(n, config.workers, [&](std::size_t i) {
        auto& ids = train[i];
        std::sort(ids.begin(), ids.end());
        std::sort(hold[i].begin(), hold[i].end());
        const auto stats = summarize(dataset, ids, binning);
        patterns[i] = extract_patterns(tree.nodes[i].key, stats, gateway, config);
        patterns[i].node_id = static_cast<int>(i);
        patterns[i].parent = tree.nodes[i].parent;
        patterns[i].train_members = ids;
        patterns[i].holdout_members = hold[i];
    });
    if (config.raw_digest_only) return patterns;

    const auto leaves = tree.leaves();
    std::vector<MobilityPattern> leaf_patterns;
    std::vector<std::vector<TravelDiary>> holdout;
    for (int leaf : leaves) {
        leaf_patterns.push_back(patterns[static_cast<std::size_t>(leaf)]);
        const std::set<std::string> ids(hold[leaf].begin(), hold[leaf].end());
        std::vector<TravelDiary> diaries;
        for (const auto& d : dataset.diaries)
            if (ids.count(d.person_id)) diaries.push_back(d);
        holdout.push_back(std::move(diaries));
    }
    auto evaluated = self_evaluate(std::move(leaf_patterns), holdout, gateway, config);
    for (std::size_t k = 0; k < leaves.size(); ++k) patterns[static_cast<std::size_t>(leaves[k])] = std::move(evaluated[k]);
    return patterns;
}

const MobilityPattern& lookup_pattern(const CohortTree& tree, std::span<const MobilityPattern> patterns,
                                      const IndividualProfile& profile) {
    for (int node = tree.locate(profile); node >= 0; node = tree.nodes[static_cast<std::size_t>(node)].parent) {
        for (const auto& p : patterns)
            if (p.node_id == node) return p;
    }
    throw Error(ErrorCode::MissingContext, "no pattern covers profile " + profile.person_id);
}

json pattern_to_json(const MobilityPattern& p) {
    json scores = nullptr;
    if (p.eval_scores)
        scores = {{"group_inference_accuracy", p.eval_scores->group_inference_accuracy},
                  {"masked_completion_score", p.eval_scores->masked_completion_score},
                  {"evaluated", p.eval_scores->evaluated}};
    return json{{"node_id", p.node_id},
                {"parent", p.parent < 0 ? json(nullptr) : json(p.parent)},
                {"cohort_key", key_to_json(p.cohort_key)},
                {"label", p.label},
                {"revision", p.revision},
                {"eval_scores", scores},
                {"narrative", p.narrative},
                {"stats_digest", describe_stats(p.stats)},
                {"stats", stats_to_json(p.stats)},
                {"train_members", p.train_members},
                {"holdout_members", p.holdout_members},
                {"transcript_ids", p.transcript_ids}};
}

MobilityPattern pattern_from_json(const json& j) {
    MobilityPattern p;
    try {
        p.node_id = j.at("node_id").get<int>();
        p.parent = j.at("parent").is_null() ? -1 : j.at("parent").get<int>();
        p.cohort_key = key_from_json(j.at("cohort_key"));
        p.label = j.at("label").get<std::string>();
        p.revision = j.at("revision").get<int>();
        if (!j.at("eval_scores").is_null()) {
            const auto& s = j.at("eval_scores");
            p.eval_scores = EvalScores{s.at("group_inference_accuracy").get<double>(),
                                       s.at("masked_completion_score").get<double>(), s.at("evaluated").get<std::size_t>()};
        }
        p.narrative = j.at("narrative").get<std::string>();
        p.stats = stats_from_json(j.at("stats"));
        p.train_members = j.value("train_members", std::vector<std::string>{});
        p.holdout_members = j.value("holdout_members", std::vector<std::string>{});
        p.transcript_ids = j.value("transcript_ids", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, std::string("malformed pattern: ") + e.what());
    }
    return p;
}

void write_patterns_ndjson(const std::string& path, std::span<const MobilityPattern> patterns, const json* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    if (meta) out << json{{"_meta", *meta}}.dump() << '\n';
    for (const auto& p : patterns) out << pattern_to_json(p).dump() << '\n';
}

std::vector<MobilityPattern> read_patterns_ndjson(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<MobilityPattern> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw RowError(ErrorCode::MalformedRow, n, e.what());
        }
        if (j.contains("_meta")) continue;
        out.push_back(pattern_from_json(j));
    }
    return out;
}

}  // namespace mobforge
