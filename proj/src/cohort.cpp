#include "mobforge/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/jsd.hpp"
#include "mobforge/parallel.hpp"

namespace mobforge {

using nlohmann::json;

namespace {

std::optional<std::size_t> parse_dimension_value(Dimension d, std::string_view text) {
    auto idx = [](auto v) -> std::optional<std::size_t> {
        if (!v) return std::nullopt;
        return index_of(*v);
    };
    switch (d) {
        case Dimension::Occupation: return idx(parse_vocab<Occupation>(text));
        case Dimension::AgeBand: return idx(parse_vocab<AgeBand>(text));
        case Dimension::Income: return idx(parse_vocab<Income>(text));
        case Dimension::Gender: return idx(parse_vocab<Gender>(text));
        case Dimension::OwnsCar:
            if (detail::iequals_trimmed(text, "Yes")) return 0;
            if (detail::iequals_trimmed(text, "No")) return 1;
            return std::nullopt;
        case Dimension::Education: return idx(parse_vocab<Education>(text));
        case Dimension::Housing: return idx(parse_vocab<Housing>(text));
        case Dimension::PrimaryMode: return idx(parse_vocab<TravelMode>(text));
    }
    return std::nullopt;
}

std::string dimension_value_name(Dimension d, std::size_t v) {
    IndividualProfile p;
    switch (d) {
        case Dimension::Occupation: p.occupation = from_index<Occupation>(v); break;
        case Dimension::AgeBand: p.age_band = from_index<AgeBand>(v); break;
        case Dimension::Income: p.income = from_index<Income>(v); break;
        case Dimension::Gender: p.gender = from_index<Gender>(v); break;
        case Dimension::OwnsCar: p.owns_car = v == 0; break;
        case Dimension::Education: p.education = from_index<Education>(v); break;
        case Dimension::Housing: p.housing = from_index<Housing>(v); break;
        case Dimension::PrimaryMode: p.primary_mode = from_index<TravelMode>(v); break;
    }
    return p.value_name(d);
}

std::string gate_slot_key(const CohortKey& key) {
    return key.empty() ? "none yet (the whole surveyed population)" : key.label();
}

}  // namespace

std::optional<Dimension> parse_dimension(std::string_view name) { return parse_vocab<Dimension>(name); }

Dimension require_dimension(std::string_view name) {
    auto d = parse_dimension(name);
    if (!d)
        throw Error(ErrorCode::UnknownDimension,
                    "'" + std::string(name) + "' is not one of {" + vocab_listing<Dimension>() + "}");
    return *d;
}

const std::vector<Dimension>& default_dimension_order() {
    static const std::vector<Dimension> order{Dimension::Occupation, Dimension::AgeBand,   Dimension::Income,
                                              Dimension::Gender,     Dimension::OwnsCar,   Dimension::Education,
                                              Dimension::Housing,    Dimension::PrimaryMode};
    return order;
}

bool CohortKey::has(Dimension d) const {
    return std::any_of(parts.begin(), parts.end(), [&](const auto& p) { return p.first == d; });
}

bool CohortKey::matches(const IndividualProfile& p) const {
    return std::all_of(parts.begin(), parts.end(), [&](const auto& kv) { return p.value_index(kv.first) == kv.second; });
}

CohortKey CohortKey::with(Dimension d, std::size_t value) const {
    CohortKey k = *this;
    k.parts.emplace_back(d, value);
    return k;
}

std::string CohortKey::label() const {
    if (parts.empty()) return "all";
    std::string out;
    for (const auto& [d, v] : parts) {
        if (!out.empty()) out += ", ";
        out += std::string(name_of(d)) + "=" + dimension_value_name(d, v);
    }
    return out;
}

json key_to_json(const CohortKey& key) {
    json arr = json::array();
    for (const auto& [d, v] : key.parts) arr.push_back({{"dimension", name_of(d)}, {"value", dimension_value_name(d, v)}});
    return arr;
}

CohortKey key_from_json(const json& j) {
    CohortKey key;
    for (const auto& part : j) {
        const auto d = require_dimension(part.at("dimension").get<std::string>());
        const auto value = part.at("value").get<std::string>();
        auto v = parse_dimension_value(d, value);
        if (!v) throw Error(ErrorCode::InvalidSpec, "'" + value + "' is not a value of " + std::string(name_of(d)));
        if (key.has(d)) throw Error(ErrorCode::InvalidSpec, "dimension " + std::string(name_of(d)) + " repeated in key");
        key.parts.emplace_back(d, *v);
    }
    return key;
}

std::vector<Cohort> partition(const Dataset& dataset, std::span<const std::string> members,
                              std::span<const Dimension> dims, const CohortKey& base) {
    if (dims.empty()) throw Error(ErrorCode::UnknownDimension, "no dimensions given");
    std::map<std::vector<std::size_t>, std::vector<std::string>> groups;
    for (const auto& id : members) {
        auto it = dataset.profiles.find(id);
        if (it == dataset.profiles.end()) throw Error(ErrorCode::UnknownPersonId, id);
        std::vector<std::size_t> values;
        for (auto d : dims) values.push_back(it->second.value_index(d));
        groups[values].push_back(id);
    }
    std::vector<Cohort> out;
    for (auto& [values, ids] : groups) {
        Cohort c;
        c.key = base;
        for (std::size_t i = 0; i < dims.size(); ++i) c.key.parts.emplace_back(dims[i], values[i]);
        std::sort(ids.begin(), ids.end());
        c.members = std::move(ids);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Cohort> partition(const Dataset& dataset, std::span<const Dimension> dims, const CohortKey& base) {
    std::vector<std::string> all;
    for (const auto& [id, p] : dataset.profiles)
        if (base.matches(p)) all.push_back(id);
    return partition(dataset, all, dims, base);
}

std::vector<Cohort> partition(const Dataset& dataset, const std::vector<std::string>& dim_names) {
    std::vector<Dimension> dims;
    for (const auto& n : dim_names) dims.push_back(require_dimension(n));
    std::set<Dimension> distinct(dims.begin(), dims.end());
    if (distinct.size() != dims.size()) throw Error(ErrorCode::InvalidSpec, "dimensions must be distinct");
    return partition(dataset, std::span<const Dimension>(dims));
}

double gate_max_jsd(const std::vector<CohortStats>& candidates) {
    double best = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].all.trips() == 0) continue;
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            if (candidates[j].all.trips() == 0) continue;
            best = std::max(best, jsd(std::span<const std::uint64_t>(candidates[i].all.start_time_hist),
                                      std::span<const std::uint64_t>(candidates[j].all.start_time_hist)));
            best = std::max(best, jsd(std::span<const std::uint64_t>(candidates[i].all.distance_hist),
                                      std::span<const std::uint64_t>(candidates[j].all.distance_hist)));
        }
    }
    return best;
}

int replay_gate_score(double max_jsd) {
    return static_cast<int>(std::lround(1.0 + 9.0 * std::min(1.0, std::max(0.0, max_jsd) / 0.3)));
}

std::optional<int> parse_rating(std::string_view text) {
    auto first_in_range = [&](std::size_t from) -> std::optional<int> {
        for (std::size_t i = from; i < text.size();) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            const bool decimal = j + 1 < text.size() && text[j] == '.' && std::isdigit(static_cast<unsigned char>(text[j + 1]));
            if (j - i <= 2 && !decimal) {
                const int v = std::stoi(std::string(text.substr(i, j - i)));
                if (v >= 1 && v <= 10) return v;
            }
            i = j;
            while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
        }
        return std::nullopt;
    };
    const auto lower = to_lower(text);
    for (auto pos = lower.rfind("rating"); pos != std::string::npos; pos = pos ? lower.rfind("rating", pos - 1) : std::string::npos) {
        if (auto v = first_in_range(pos + 6)) return v;
        if (pos == 0) break;
    }
    return first_in_range(0);
}

GateResult segmentation_gate(const CohortStats& parent, const CohortKey& key,
                             const std::vector<CohortStats>& candidates, Dimension dim, Gateway& gateway,
                             const GateConfig& config) {
    LlmRequest req;
    req.template_id = TemplateId::InitialGroupDivision;
    req.slots = {describe_stats(parent), gate_slot_key(key), std::string(name_of(dim))};
    req.params.temperature = config.temperature;
    req.replay = [&candidates](CounterRng&) {
        const double m = gate_max_jsd(candidates);
        return "Largest pairwise divergence of start-time and distance distributions across the candidate "
               "subgroups: " +
               format_double(std::round(m * 1e6) / 1e6) + ".\nRATING: " + std::to_string(replay_gate_score(m));
    };
    for (int attempt = 0; attempt < std::max(1, config.max_attempts); ++attempt) {
        auto c = gateway.complete(req);
        if (auto score = parse_rating(c.text)) {
            return {*score, *score >= config.split_threshold, c.text, c.transcript.request_hash};
        }
        req.feedback = "Your previous answer contained no rating. Reply with a line `RATING: <integer from 1 to 10>`.";
    }
    throw Error(ErrorCode::UnparseableScore, "no rating 1..10 in the response for dimension " + std::string(name_of(dim)));
}

std::vector<int> CohortTree::leaves() const {
    std::vector<int> out;
    for (const auto& n : nodes)
        if (n.leaf()) out.push_back(n.id);
    return out;
}

int CohortTree::locate(const IndividualProfile& profile) const {
    int at = 0;
    while (true) {
        int next = -1;
        for (int c : nodes[at].children) {
            if (nodes[c].key.matches(profile)) {
                next = c;
                break;
            }
        }
        if (next < 0) return at;
        at = next;
    }
}

CohortTree refine_hierarchy(const Dataset& dataset, Gateway& gateway, const CohortConfig& config) {
    CohortTree tree;
    CohortNode root;
    for (const auto& [id, p] : dataset.profiles) root.members.push_back(id);
    root.stats = summarize(dataset, root.members, config.binning);
    tree.nodes.push_back(std::move(root));

    struct Expansion {
        std::vector<GateRecord> gates;
        std::optional<Dimension> dim;
        std::vector<Cohort> children;
        std::vector<CohortStats> stats;
    };

    std::vector<int> frontier{0};
    for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
        std::vector<Expansion> results(frontier.size());
        parallel_for(frontier.size(), config.workers, [&](std::size_t i) {
            const CohortNode& node = tree.nodes[static_cast<std::size_t>(frontier[i])];
            Expansion& ex = results[i];
            for (Dimension d : config.dimensions) {
                if (node.key.has(d)) continue;
                const Dimension one[] = {d};
                auto children = partition(dataset, node.members, one, node.key);
                if (children.size() < 2) continue;  // constant within the node: nothing to split
                GateRecord rec{d, children.size(), true, std::nullopt};
                rec.size_ok = std::all_of(children.begin(), children.end(),
                                          [&](const Cohort& c) { return c.members.size() >= config.min_cohort_size; });
                if (!rec.size_ok) {
                    ex.gates.push_back(std::move(rec));
                    continue;
                }
                std::vector<CohortStats> stats;
                for (const auto& c : children) stats.push_back(summarize(dataset, c.members, config.binning));
                rec.result = segmentation_gate(node.stats, node.key, stats, d, gateway, config.gate);
                const bool split = rec.result->split;
                ex.gates.push_back(std::move(rec));
                if (split) {
                    ex.dim = d;
                    ex.children = std::move(children);
                    ex.stats = std::move(stats);
                    break;
                }
            }
        });
        std::vector<int> next;
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            const int parent = frontier[i];
            auto& ex = results[i];
            tree.nodes[static_cast<std::size_t>(parent)].gates = std::move(ex.gates);
            if (!ex.dim) continue;
            tree.nodes[static_cast<std::size_t>(parent)].split_dimension = ex.dim;
            for (std::size_t c = 0; c < ex.children.size(); ++c) {
                CohortNode child;
                child.id = static_cast<int>(tree.nodes.size());
                child.parent = parent;
                child.depth = depth + 1;
                child.key = std::move(ex.children[c].key);
                child.members = std::move(ex.children[c].members);
                child.stats = std::move(ex.stats[c]);
                tree.nodes[static_cast<std::size_t>(parent)].children.push_back(child.id);
                next.push_back(child.id);
                tree.nodes.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }
    return tree;
}

void write_tree_ndjson(std::ostream& out, const CohortTree& tree, const json* meta) {
    if (meta) out << json{{"_meta", *meta}}.dump() << '\n';
    for (const auto& n : tree.nodes) {
        json gates = json::array();
        for (const auto& g : n.gates) {
            json r{{"dimension", name_of(g.dimension)}, {"child_count", g.child_count}, {"size_ok", g.size_ok}};
            if (g.result) {
                r["score"] = g.result->score;
                r["split"] = g.result->split;
                r["rationale"] = g.result->rationale;
                r["transcript_id"] = g.result->transcript_id;
            }
            gates.push_back(std::move(r));
        }
        json j{{"id", n.id},
               {"parent", n.parent < 0 ? json(nullptr) : json(n.parent)},
               {"depth", n.depth},
               {"key", key_to_json(n.key)},
               {"label", n.key.label()},
               {"member_count", n.members.size()},
               {"members", n.members},
               {"split_dimension", n.split_dimension ? json(name_of(*n.split_dimension)) : json(nullptr)},
               {"children", n.children},
               {"gates", gates},
               {"stats", stats_to_json(n.stats)}};
        out << j.dump() << '\n';
    }
}

void write_tree_ndjson(const std::string& path, const CohortTree& tree, const json* meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    write_tree_ndjson(out, tree, meta);
}

CohortTree read_tree_ndjson(std::istream& in) {
    CohortTree tree;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            if (j.contains("_meta")) continue;
            CohortNode node;
            node.id = j.at("id").get<int>();
            node.parent = j.at("parent").is_null() ? -1 : j.at("parent").get<int>();
            node.depth = j.at("depth").get<int>();
            node.key = key_from_json(j.at("key"));
            node.members = j.at("members").get<std::vector<std::string>>();
            if (!j.at("split_dimension").is_null())
                node.split_dimension = require_dimension(j.at("split_dimension").get<std::string>());
            node.children = j.at("children").get<std::vector<int>>();
            for (const auto& g : j.at("gates")) {
                GateRecord r{require_dimension(g.at("dimension").get<std::string>()), g.at("child_count").get<std::size_t>(),
                             g.at("size_ok").get<bool>(), std::nullopt};
                if (g.contains("score"))
                    r.result = GateResult{g.at("score").get<int>(), g.at("split").get<bool>(),
                                          g.at("rationale").get<std::string>(), g.value("transcript_id", "")};
                node.gates.push_back(std::move(r));
            }
            node.stats = stats_from_json(j.at("stats"));
            if (node.id != static_cast<int>(tree.nodes.size()))
                throw RowError(ErrorCode::MalformedRow, n, "cohort node ids must be consecutive from 0");
            tree.nodes.push_back(std::move(node));
        } catch (const json::exception& e) {
            throw RowError(ErrorCode::MalformedRow, n, std::string("cohort tree: ") + e.what());
        }
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::EmptySource, "cohort tree file has no nodes");
    return tree;
}

CohortTree read_tree_ndjson(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_tree_ndjson(in);
}

}  // namespace mobforge
