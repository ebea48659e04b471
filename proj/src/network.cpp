#include "mobforge/network.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <mutex>
#include <queue>

#include "mobforge/csv.hpp"
#include "mobforge/error.hpp"
#include "mobforge/format.hpp"
#include "mobforge/rng.hpp"

namespace mobforge {

namespace {

constexpr double kTieEpsilonM = 1e-9;

template <class T>
T parse_number(const csv::Row& row, std::size_t col, const char* what) {
    if (col >= row.fields.size()) throw RowError(ErrorCode::MalformedRow, row.line, std::string("missing ") + what);
    const auto text = trim(row.fields[col]);
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size())
        throw RowError(ErrorCode::MalformedRow, row.line, std::string(what) + " '" + std::string(text) + "' is not a number");
    return v;
}

std::size_t require_column(const csv::Table& t, std::string_view name, const char* source) {
    auto c = t.column(name);
    if (!c) throw Error(ErrorCode::MalformedRow, std::string(source) + " has no '" + std::string(name) + "' column");
    return *c;
}

}  // namespace

void RoadNetwork::add_node(NodeId id, GeoCoord coord) {
    if (index_.count(id)) throw Error(ErrorCode::InvalidSpec, "duplicate node id " + std::to_string(id));
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    coords_.push_back(coord);
    adj_.emplace_back();
}

void RoadNetwork::add_edge(NodeId u, NodeId v, double length_m, bool oneway) {
    auto iu = index_.find(u);
    auto iv = index_.find(v);
    if (iu == index_.end() || iv == index_.end())
        throw Error(ErrorCode::DanglingEdge, "(" + std::to_string(u) + ", " + std::to_string(v) + ")");
    if (!(length_m > 0.0) || !std::isfinite(length_m))
        throw Error(ErrorCode::NonPositiveLength,
                    "(" + std::to_string(u) + ", " + std::to_string(v) + ") length " + format_double(length_m));
    adj_[iu->second].push_back({iv->second, length_m});
    if (!oneway) adj_[iv->second].push_back({iu->second, length_m});
    edges_.push_back({u, v, length_m, oneway});
}

std::size_t RoadNetwork::index(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownNode, std::to_string(id));
    return it->second;
}

std::vector<double> shortest_distances(const RoadNetwork& net, std::size_t source) {
    std::vector<double> dist(net.node_count(), kUnreachable);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (const auto& a : net.arcs(u)) {
            const double nd = d + a.length_m;
            if (nd < dist[a.to]) {
                dist[a.to] = nd;
                heap.emplace(nd, a.to);
            }
        }
    }
    return dist;
}

std::map<NodeId, double> shortest_dist(const RoadNetwork& net, NodeId origin) {
    const auto d = shortest_distances(net, net.index(origin));
    std::map<NodeId, double> out;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] != kUnreachable) out.emplace(net.id_at(i), d[i]);
    return out;
}

NodeId snap(const RoadNetwork& net, GeoCoord coord, double radius_m) {
    if (net.node_count() == 0) throw Error(ErrorCode::Unsnappable, "network has no nodes");
    std::size_t best = 0;
    double best_d = kUnreachable;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
        const double d = haversine_m(coord, net.coord_at(i));
        if (d < best_d - kTieEpsilonM || (std::abs(d - best_d) <= kTieEpsilonM && net.id_at(i) < net.id_at(best))) {
            best = i;
            best_d = std::min(d, best_d);
        }
    }
    if (best_d > radius_m)
        throw Error(ErrorCode::Unsnappable, format_coord(coord) + " is " + format_double(std::round(best_d)) +
                                                " m from the nearest node (radius " + format_double(radius_m) + " m)");
    return net.id_at(best);
}

void PoiIndex::add(const RoadNetwork& net, PoiId id, GeoCoord coord, PoiCategory category, double snap_radius_m) {
    if (pois.count(id)) throw Error(ErrorCode::InvalidSpec, "duplicate poi id " + std::to_string(id));
    NodeId node = 0;
    try {
        node = snap(net, coord, snap_radius_m);
    } catch (const Error& e) {
        throw Error(ErrorCode::PoiUnsnappable, std::to_string(id) + ": " + e.detail());
    }
    pois.emplace(id, Poi{id, coord, category, node});
    auto& ids = by_category[index_of(category)];
    ids.insert(std::upper_bound(ids.begin(), ids.end(), id), id);
}

LoadedNetwork load_network(std::istream& nodes, std::istream& edges, std::istream& pois, double snap_radius_m,
                           bool lenient_pois) {
    LoadedNetwork out;
    const auto nt = csv::parse(nodes);
    {
        const auto c_id = require_column(nt, "node_id", "nodes");
        const auto c_lat = require_column(nt, "lat", "nodes");
        const auto c_lon = require_column(nt, "lon", "nodes");
        for (const auto& r : nt.rows) {
            const GeoCoord c{parse_number<double>(r, c_lat, "lat"), parse_number<double>(r, c_lon, "lon")};
            if (!coord_in_range(c)) throw RowError(ErrorCode::MalformedRow, r.line, "coordinate out of range");
            try {
                out.network.add_node(parse_number<NodeId>(r, c_id, "node_id"), c);
            } catch (const RowError&) {
                throw;
            } catch (const Error& e) {
                throw RowError(e.code(), r.line, e.detail());
            }
        }
    }
    const auto et = csv::parse(edges);
    {
        const auto c_u = require_column(et, "from_node", "edges");
        const auto c_v = require_column(et, "to_node", "edges");
        const auto c_len = require_column(et, "length_m", "edges");
        const auto c_one = et.column("oneway");
        for (const auto& r : et.rows) {
            bool oneway = false;
            if (c_one && *c_one < r.fields.size() && !trim(r.fields[*c_one]).empty()) {
                const auto v = trim(r.fields[*c_one]);
                if (v != "0" && v != "1") throw RowError(ErrorCode::MalformedRow, r.line, "oneway must be 0 or 1");
                oneway = v == "1";
            }
            out.network.add_edge(parse_number<NodeId>(r, c_u, "from_node"), parse_number<NodeId>(r, c_v, "to_node"),
                                 parse_number<double>(r, c_len, "length_m"), oneway);
        }
    }
    const auto pt = csv::parse(pois);
    {
        const auto c_id = require_column(pt, "poi_id", "pois");
        const auto c_lat = require_column(pt, "lat", "pois");
        const auto c_lon = require_column(pt, "lon", "pois");
        const auto c_cat = require_column(pt, "category", "pois");
        for (const auto& r : pt.rows) {
            const auto id = parse_number<PoiId>(r, c_id, "poi_id");
            const GeoCoord c{parse_number<double>(r, c_lat, "lat"), parse_number<double>(r, c_lon, "lon")};
            const auto cat = c_cat < r.fields.size() ? parse_vocab<PoiCategory>(r.fields[c_cat]) : std::nullopt;
            if (!cat)
                throw RowError(ErrorCode::MalformedRow, r.line,
                               "category not in {" + vocab_listing<PoiCategory>() + "}");
            try {
                out.pois.add(out.network, id, c, *cat, snap_radius_m);
            } catch (const Error& e) {
                if (!lenient_pois || e.code() != ErrorCode::PoiUnsnappable) throw;
                out.report.rejected_pois.push_back("poi " + e.detail());
            }
        }
    }
    return out;
}

LoadedNetwork load_network(const std::string& nodes_path, const std::string& edges_path, const std::string& pois_path,
                           double snap_radius_m, bool lenient_pois) {
    std::ifstream n(nodes_path), e(edges_path), p(pois_path);
    if (!n) throw Error(ErrorCode::IoError, "cannot open " + nodes_path);
    if (!e) throw Error(ErrorCode::IoError, "cannot open " + edges_path);
    if (!p) throw Error(ErrorCode::IoError, "cannot open " + pois_path);
    return load_network(n, e, p, snap_radius_m, lenient_pois);
}

void write_network(const LoadedNetwork& n, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream nodes(dir + "/nodes.csv"), edges(dir + "/edges.csv"), pois(dir + "/pois.csv");
    if (!nodes || !edges || !pois) throw Error(ErrorCode::IoError, "cannot write network files under " + dir);
    csv::write_row(nodes, {"node_id", "lat", "lon"});
    for (std::size_t i = 0; i < n.network.node_count(); ++i) {
        const auto& c = n.network.coord_at(i);
        csv::write_row(nodes, {std::to_string(n.network.id_at(i)), format_double(c.lat), format_double(c.lon)});
    }
    csv::write_row(edges, {"from_node", "to_node", "length_m", "oneway"});
    for (const auto& e : n.network.edges())
        csv::write_row(edges, {std::to_string(e.from), std::to_string(e.to), format_double(e.length_m), e.oneway ? "1" : "0"});
    csv::write_row(pois, {"poi_id", "lat", "lon", "category"});
    for (const auto& [id, p] : n.pois.pois)
        csv::write_row(pois, {std::to_string(id), format_double(p.coord.lat), format_double(p.coord.lon),
                              std::string(name_of(p.category))});
}

SpatialAnchor::SpatialAnchor(std::shared_ptr<const LoadedNetwork> network, double snap_radius_m)
    : net_(std::move(network)), snap_radius_m_(snap_radius_m) {}

NodeId SpatialAnchor::snap(GeoCoord coord) const { return mobforge::snap(net_->network, coord, snap_radius_m_); }

std::shared_ptr<const std::vector<double>> SpatialAnchor::distances_from(NodeId origin) const {
    const auto idx = net_->network.index(origin);
    {
        std::shared_lock lock(mu_);
        if (auto it = cache_.find(idx); it != cache_.end()) return it->second;
    }
    auto d = std::make_shared<const std::vector<double>>(shortest_distances(net_->network, idx));
    std::unique_lock lock(mu_);
    return cache_.emplace(idx, std::move(d)).first->second;
}

double SpatialAnchor::distance(NodeId from, NodeId to) const {
    return (*distances_from(from))[net_->network.index(to)];
}

AnchorResult SpatialAnchor::anchor(NodeId origin, std::span<const PoiCategory> categories, double target_d) const {
    const auto dist = distances_from(origin);
    bool any = false;
    const Poi* best = nullptr;
    double best_err = 0.0, best_dist = 0.0;
    for (auto cat : categories) {
        for (PoiId id : net_->pois.of(cat)) {
            any = true;
            const Poi& p = net_->pois.pois.at(id);
            const double d = (*dist)[net_->network.index(p.node)];
            if (d == kUnreachable) continue;
            const double err = std::abs(d - target_d);
            if (!best || err < best_err || (err == best_err && id < best->id)) {
                best = &p;
                best_err = err;
                best_dist = d;
            }
        }
    }
    std::string names;
    for (auto cat : categories) names += (names.empty() ? "" : "|") + std::string(name_of(cat));
    if (!any) throw Error(ErrorCode::NoPoiOfCategory, names);
    if (!best) throw Error(ErrorCode::NoReachablePoi, names + " from node " + std::to_string(origin));
    return {best->id, best->node, net_->network.coord(best->node), best_dist};
}

AnchorResult SpatialAnchor::anchor(NodeId origin, PoiCategory category, double target_d) const {
    const PoiCategory one[] = {category};
    return anchor(origin, one, target_d);
}

AnchorResult SpatialAnchor::anchor(GeoCoord origin, PoiCategory category, double target_d) const {
    return anchor(snap(origin), category, target_d);
}

std::size_t SpatialAnchor::cached_origins() const {
    std::shared_lock lock(mu_);
    return cache_.size();
}

LoadedNetwork make_grid_network(const GridSpec& spec) {
    if (spec.rows < 1 || spec.cols < 1 || !(spec.spacing_m > 0))
        throw Error(ErrorCode::InvalidSpec, "grid needs rows, cols >= 1 and spacing > 0");
    LoadedNetwork out;
    const LocalProjection proj{spec.center};
    auto id_of = [&](int r, int c) { return static_cast<NodeId>(r) * spec.cols + c + 1; };
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            const double x = (c - (spec.cols - 1) / 2.0) * spec.spacing_m;
            const double y = (r - (spec.rows - 1) / 2.0) * spec.spacing_m;
            out.network.add_node(id_of(r, c), proj.unproject(x, y));
        }
    }
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            if (c + 1 < spec.cols) out.network.add_edge(id_of(r, c), id_of(r, c + 1), spec.spacing_m);
            if (r + 1 < spec.rows) out.network.add_edge(id_of(r, c), id_of(r + 1, c), spec.spacing_m);
        }
    }
    CounterRng rng(mix_seed(spec.seed, std::string_view("grid-pois")));
    const auto n = out.network.node_count();
    std::vector<std::pair<PoiCategory, std::size_t>> placed;
    for (std::size_t k = 0; k < vocab_size<PoiCategory>; ++k) {
        const auto count = static_cast<std::size_t>(std::max(0, spec.pois_per_category[k]));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = 0; i < std::min(count, n); ++i) {
            const auto j = i + rng.uniform_int(n - i);
            std::swap(order[i], order[j]);
            placed.emplace_back(from_index<PoiCategory>(k), order[i]);
        }
    }
    for (std::size_t i = placed.size(); i > 1; --i) std::swap(placed[i - 1], placed[rng.uniform_int(i)]);
    PoiId next = 1;
    for (const auto& [cat, node] : placed) {
        const auto& c = out.network.coord_at(node);
        out.pois.pois.emplace(next, Poi{next, c, cat, out.network.id_at(node)});
        out.pois.by_category[index_of(cat)].push_back(next);
        ++next;
    }
    for (auto& ids : out.pois.by_category) std::sort(ids.begin(), ids.end());
    return out;
}

}  // namespace mobforge
