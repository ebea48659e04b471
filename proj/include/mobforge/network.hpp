#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mobforge/geo.hpp"
#include "mobforge/vocab.hpp"

namespace mobforge {

using NodeId = std::int64_t;
using PoiId = std::int64_t;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

class RoadNetwork {
public:
    struct Arc {
        std::size_t to;  // dense index
        double length_m;
    };
    struct Edge {
        NodeId from;
        NodeId to;
        double length_m;
        bool oneway;
    };

    // Throws Error(InvalidSpec) on a duplicate id.
    void add_node(NodeId id, GeoCoord coord);
    // Throws DanglingEdge / NonPositiveLength.
    void add_edge(NodeId u, NodeId v, double length_m, bool oneway = false);

    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    bool contains(NodeId id) const { return index_.count(id) != 0; }
    // Dense index of a node id; throws Error(UnknownNode).
    std::size_t index(NodeId id) const;
    NodeId id_at(std::size_t index) const { return ids_[index]; }
    const GeoCoord& coord_at(std::size_t index) const { return coords_[index]; }
    const GeoCoord& coord(NodeId id) const { return coords_[index(id)]; }
    const std::vector<Arc>& arcs(std::size_t index) const { return adj_[index]; }

private:
    std::vector<NodeId> ids_;
    std::vector<GeoCoord> coords_;
    std::vector<std::vector<Arc>> adj_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<Edge> edges_;
};

// Dijkstra from a dense index; unreachable entries are kUnreachable.
std::vector<double> shortest_distances(const RoadNetwork& net, std::size_t source);
// By id; unreachable nodes are absent. Throws Error(UnknownNode).
std::map<NodeId, double> shortest_dist(const RoadNetwork& net, NodeId origin);

// Nearest node by great-circle distance, ties (within 1e-9 m) to the smallest
// id. Throws Error(Unsnappable) beyond `radius_m`.
NodeId snap(const RoadNetwork& net, GeoCoord coord, double radius_m);

struct Poi {
    PoiId id = 0;
    GeoCoord coord;
    PoiCategory category = PoiCategory::Shop;
    NodeId node = 0;
};

struct PoiIndex {
    std::map<PoiId, Poi> pois;
    std::array<std::vector<PoiId>, vocab_size<PoiCategory>> by_category;  // ascending ids

    // Throws Error(PoiUnsnappable) or Error(InvalidSpec) on a duplicate id.
    void add(const RoadNetwork& net, PoiId id, GeoCoord coord, PoiCategory category, double snap_radius_m);
    const std::vector<PoiId>& of(PoiCategory c) const { return by_category[index_of(c)]; }
};

struct NetworkLoadReport {
    std::vector<std::string> rejected_pois;  // "poi <id>: <reason>"
};

struct LoadedNetwork {
    RoadNetwork network;
    PoiIndex pois;
    NetworkLoadReport report;
};

// CSV sources: nodes (node_id, lat, lon), edges (from_node, to_node, length_m,
// oneway), pois (poi_id, lat, lon, category). With `lenient_pois`, POIs that
// cannot be snapped are reported and skipped instead of raising.
LoadedNetwork load_network(std::istream& nodes, std::istream& edges, std::istream& pois, double snap_radius_m = 500.0,
                           bool lenient_pois = true);
LoadedNetwork load_network(const std::string& nodes_path, const std::string& edges_path,
                           const std::string& pois_path, double snap_radius_m = 500.0, bool lenient_pois = true);
void write_network(const LoadedNetwork& n, const std::string& dir);

struct AnchorResult {
    PoiId poi = 0;
    NodeId node = 0;
    GeoCoord location;
    double network_distance_m = 0.0;
};

// Immutable network plus a per-origin shortest-path cache that is safe for
// concurrent use.
class SpatialAnchor {
public:
    SpatialAnchor(std::shared_ptr<const LoadedNetwork> network, double snap_radius_m = 500.0);

    const RoadNetwork& network() const { return net_->network; }
    const PoiIndex& pois() const { return net_->pois; }
    double snap_radius_m() const { return snap_radius_m_; }

    NodeId snap(GeoCoord coord) const;
    // Distances from the node (dense-indexed); computed once per origin.
    std::shared_ptr<const std::vector<double>> distances_from(NodeId origin) const;
    double distance(NodeId from, NodeId to) const;

    // Minimizes |network distance - target_d| over reachable POIs of the
    // categories, ties to the smallest POI id. Throws NoPoiOfCategory,
    // NoReachablePoi, Unsnappable.
    AnchorResult anchor(NodeId origin, std::span<const PoiCategory> categories, double target_d) const;
    AnchorResult anchor(NodeId origin, PoiCategory category, double target_d) const;
    AnchorResult anchor(GeoCoord origin, PoiCategory category, double target_d) const;

    std::size_t cached_origins() const;

private:
    std::shared_ptr<const LoadedNetwork> net_;
    double snap_radius_m_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::size_t, std::shared_ptr<const std::vector<double>>> cache_;
};

// n x m grid with `spacing_m` between neighbours, centered on `center`.
// Node ids are row-major from 1; POIs sit on nodes drawn by a seeded sampler
// and get ids in shuffled order.
struct GridSpec {
    int rows = 31;
    int cols = 31;
    double spacing_m = 100.0;
    GeoCoord center{22.5431, 114.0579};
    std::array<int, vocab_size<PoiCategory>> pois_per_category{40, 40, 40, 40, 40, 40};
    std::uint64_t seed = 1;
};

LoadedNetwork make_grid_network(const GridSpec& spec);

}  // namespace mobforge
