#pragma once

#include <cstdint>
#include <istream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evoforage/genome.hpp"

namespace evoforage {

class EmptyGraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Simple undirected unweighted graph over arbitrary integer node ids.
/// Nodes are stored in ascending id order; edges as index pairs (u < v).
class GraphView {
public:
    GraphView() = default;
    /// Self-loops are dropped; parallel and antiparallel pairs collapse.
    static GraphView from_edges(const std::vector<std::pair<int, int>>& id_pairs);

    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return edges_.empty(); }
    const std::vector<int>& ids() const { return ids_; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& neighbors(std::size_t i) const { return adj_[i]; }
    std::size_t degree(std::size_t i) const { return adj_[i].size(); }

private:
    std::vector<int> ids_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> adj_;
};

/// Community label per node index, contiguous from 0.
using Partition = std::vector<int>;

/// Enabled connections, direction dropped, isolated nodes omitted.
/// Throws EmptyGraphError when the genome has no enabled connection.
GraphView to_graph(const Genome& g);

/// Newman modularity of `partition`. Throws EmptyGraphError on zero edges.
double modularity(const GraphView& graph, const Partition& partition);

inline constexpr int kLouvainRestarts = 10;

/// Louvain local-move + aggregation. Visit order is ascending id shuffled by
/// `seed`; gain ties go to the smallest community id. The first pass uses
/// `seed` itself, the other kLouvainRestarts - 1 passes derived seeds, and
/// the partition with the highest Q wins (earliest on ties).
Partition louvain(const GraphView& graph, std::uint64_t seed);

/// Mean inverse shortest-path length over ordered pairs; unreachable pairs
/// contribute 0. Sources are processed in parallel (OpenMP).
double global_efficiency(const GraphView& graph);
/// Single-threaded reference for global_efficiency; bit-identical result.
double global_efficiency_serial(const GraphView& graph);

/// min/max of (modularity clamped to [0, 1], efficiency); 0 when both are 0.
double nc_ratio(double modularity, double efficiency);

struct ComplexityReport {
    int n_s = 0;
    double modularity = 0.0;
    double efficiency = 0.0;
    double n_c = 0.0;
    friend bool operator==(const ComplexityReport&, const ComplexityReport&) = default;
};

ComplexityReport complexity_report(const Genome& g, std::uint64_t seed);
/// Same metrics for an arbitrary graph; `n_s` is supplied by the caller.
ComplexityReport complexity_report(const GraphView& graph, int n_s, std::uint64_t seed);

/// Reads "u v" pairs, one per line; blank lines and '#' comments are skipped.
std::vector<std::pair<int, int>> read_edge_list(std::istream& in);

}  // namespace evoforage
