#include "evoforage/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>

#include "evoforage/rng.hpp"

namespace evoforage {

GraphView GraphView::from_edges(const std::vector<std::pair<int, int>>& id_pairs) {
    GraphView g;
    std::set<int> ids;
    for (const auto& [u, v] : id_pairs) {
        if (u == v) continue;
        ids.insert(u);
        ids.insert(v);
    }
    g.ids_.assign(ids.begin(), ids.end());
    std::unordered_map<int, int> index;
    for (std::size_t i = 0; i < g.ids_.size(); ++i) index[g.ids_[i]] = static_cast<int>(i);

    std::set<std::pair<int, int>> unique;
    for (const auto& [u, v] : id_pairs) {
        if (u == v) continue;
        const int a = index[u], b = index[v];
        unique.emplace(std::min(a, b), std::max(a, b));
    }
    g.edges_.assign(unique.begin(), unique.end());
    g.adj_.assign(g.ids_.size(), {});
    for (const auto& [a, b] : g.edges_) {
        g.adj_[a].push_back(b);
        g.adj_[b].push_back(a);
    }
    for (auto& nbrs : g.adj_) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

GraphView to_graph(const Genome& g) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& c : g.conns)
        if (c.enabled) pairs.emplace_back(c.from, c.to);
    if (pairs.empty()) throw EmptyGraphError("genome has no enabled connections");
    return GraphView::from_edges(pairs);
}

double modularity(const GraphView& graph, const Partition& partition) {
    if (graph.empty()) throw EmptyGraphError("modularity of a graph without edges");
    if (partition.size() != graph.node_count()) throw std::invalid_argument("partition does not cover the graph");
    const int k = partition.empty() ? 0 : *std::max_element(partition.begin(), partition.end()) + 1;
    std::vector<double> intra(static_cast<std::size_t>(k), 0.0), degree(static_cast<std::size_t>(k), 0.0);
    for (const auto& [a, b] : graph.edges())
        if (partition[a] == partition[b]) intra[partition[a]] += 1.0;
    for (std::size_t i = 0; i < graph.node_count(); ++i) degree[partition[i]] += static_cast<double>(graph.degree(i));
    const double m = static_cast<double>(graph.edge_count());
    double q = 0.0;
    for (int c = 0; c < k; ++c) {
        const double share = degree[c] / (2.0 * m);
        q += intra[c] / m - share * share;
    }
    return q;
}

namespace {

// Weighted graph used inside Louvain; self-loop weights count once in the
// adjacency list and twice in the node strength.
struct WeightedGraph {
    std::vector<std::vector<std::pair<int, double>>> adj;
    std::vector<double> self_loop;

    std::size_t size() const { return adj.size(); }
    double strength(std::size_t i) const {
        double s = 2.0 * self_loop[i];
        for (const auto& [_, w] : adj[i]) s += w;
        return s;
    }
};

// One round of local moving. Returns the community of every node (not yet
// contiguous) and whether any node moved.
bool local_moving(const WeightedGraph& g, std::vector<int>& comm, std::uint64_t seed) {
    const std::size_t n = g.size();
    double total = 0.0;
    std::vector<double> k(n), tot(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        k[i] = g.strength(i);
        total += k[i];
        tot[comm[i]] += k[i];
    }
    if (total <= 0.0) return false;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    constexpr double kEps = 1e-12;
    std::map<int, double> links;
    bool any_move = false;
    bool moved = true;
    while (moved) {
        moved = false;
        for (int i : order) {
            const int own = comm[i];
            links.clear();
            links[own] = 0.0;
            for (const auto& [j, w] : g.adj[i]) links[comm[j]] += w;
            tot[own] -= k[i];
            int best = own;
            double best_gain = links[own] - tot[own] * k[i] / total;
            for (const auto& [c, w] : links) {
                if (c == own) continue;
                const double gain = w - tot[c] * k[i] / total;
                if (gain > best_gain + kEps) {
                    best = c;
                    best_gain = gain;
                }
            }
            tot[best] += k[i];
            if (best != own) {
                comm[i] = best;
                moved = true;
                any_move = true;
            }
        }
    }
    return any_move;
}

int relabel(std::vector<int>& comm) {
    std::unordered_map<int, int> label;
    for (int& c : comm) {
        auto [it, _] = label.try_emplace(c, static_cast<int>(label.size()));
        c = it->second;
    }
    return static_cast<int>(label.size());
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<int>& comm, int n_comm) {
    WeightedGraph out;
    out.adj.assign(static_cast<std::size_t>(n_comm), {});
    out.self_loop.assign(static_cast<std::size_t>(n_comm), 0.0);
    std::vector<std::map<int, double>> acc(static_cast<std::size_t>(n_comm));
    for (std::size_t i = 0; i < g.size(); ++i) {
        const int ci = comm[i];
        out.self_loop[ci] += g.self_loop[i];
        for (const auto& [j, w] : g.adj[i]) {
            const int cj = comm[j];
            if (ci == cj)
                out.self_loop[ci] += 0.5 * w;  // each internal edge is seen from both ends
            else
                acc[ci][cj] += w;
        }
    }
    for (int c = 0; c < n_comm; ++c)
        for (const auto& [d, w] : acc[c]) out.adj[c].emplace_back(d, w);
    return out;
}

Partition louvain_pass(const GraphView& graph, std::uint64_t seed) {
    WeightedGraph base;
    base.adj.resize(graph.node_count());
    base.self_loop.assign(graph.node_count(), 0.0);
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        for (int j : graph.neighbors(i)) base.adj[i].emplace_back(j, 1.0);
    WeightedGraph level = base;

    Partition membership(graph.node_count());
    std::iota(membership.begin(), membership.end(), 0);

    for (std::uint64_t depth = 0;; ++depth) {
        std::vector<int> comm(level.size());
        std::iota(comm.begin(), comm.end(), 0);
        const bool moved = local_moving(level, comm, derive_seed(seed, {tag("louvain"), depth}));
        const int n_comm = relabel(comm);
        for (int& m : membership) m = comm[m];
        if (!moved || n_comm == static_cast<int>(level.size())) break;
        level = aggregate(level, comm, n_comm);
    }
    relabel(membership);
    return membership;
}

}  // namespace

Partition louvain(const GraphView& graph, std::uint64_t seed) {
    if (graph.empty()) throw EmptyGraphError("louvain on a graph without edges");
    Partition best = louvain_pass(graph, seed);
    double best_q = modularity(graph, best);
    for (int r = 1; r < kLouvainRestarts; ++r) {
        Partition p = louvain_pass(graph, derive_seed(seed, {tag("louvain-restart"), static_cast<std::uint64_t>(r)}));
        const double q = modularity(graph, p);
        if (q > best_q + 1e-12) {
            best = std::move(p);
            best_q = q;
        }
    }
    return best;
}

namespace {

double source_efficiency(const GraphView& graph, std::size_t source, std::vector<int>& dist, std::vector<int>& queue) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[source] = 0;
    std::size_t head = 0;
    queue.clear();
    queue.push_back(static_cast<int>(source));
    double sum = 0.0;
    while (head < queue.size()) {
        const int u = queue[head++];
        for (int v : graph.neighbors(static_cast<std::size_t>(u))) {
            if (dist[v] >= 0) continue;
            dist[v] = dist[u] + 1;
            sum += 1.0 / dist[v];
            queue.push_back(v);
        }
    }
    return sum;
}

double finish_efficiency(const std::vector<double>& per_source) {
    const auto n = static_cast<double>(per_source.size());
    double total = 0.0;
    for (double s : per_source) total += s;
    return total / (n * (n - 1.0));
}

}  // namespace

double global_efficiency_serial(const GraphView& graph) {
    const std::size_t n = graph.node_count();
    if (n < 2) throw std::invalid_argument("global efficiency needs at least two nodes");
    std::vector<double> per_source(n);
    std::vector<int> dist(n), queue;
    queue.reserve(n);
    for (std::size_t s = 0; s < n; ++s) per_source[s] = source_efficiency(graph, s, dist, queue);
    return finish_efficiency(per_source);
}

double global_efficiency(const GraphView& graph) {
    const std::size_t n = graph.node_count();
    if (n < 2) throw std::invalid_argument("global efficiency needs at least two nodes");
    std::vector<double> per_source(n);
#pragma omp parallel
    {
        std::vector<int> dist(n), queue;
        queue.reserve(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(n); ++s)
            per_source[static_cast<std::size_t>(s)] = source_efficiency(graph, static_cast<std::size_t>(s), dist, queue);
    }
    // Fixed-order reduction keeps the result independent of the thread count.
    return finish_efficiency(per_source);
}

double nc_ratio(double modularity, double efficiency) {
    const double m = std::clamp(modularity, 0.0, 1.0);
    const double e = std::clamp(efficiency, 0.0, 1.0);
    const double hi = std::max(m, e);
    if (hi <= 0.0) return 0.0;
    return std::min(m, e) / hi;
}

ComplexityReport complexity_report(const GraphView& graph, int n_s, std::uint64_t seed) {
    ComplexityReport r;
    r.n_s = n_s;
    if (graph.empty()) return r;
    r.modularity = modularity(graph, louvain(graph, seed));
    r.efficiency = global_efficiency(graph);
    r.n_c = nc_ratio(r.modularity, r.efficiency);
    return r;
}

ComplexityReport complexity_report(const Genome& g, std::uint64_t seed) {
    const int n_s = ann_size(g);
    try {
        return complexity_report(to_graph(g), n_s, seed);
    } catch (const EmptyGraphError&) {
        return ComplexityReport{n_s, 0.0, 0.0, 0.0};
    }
}

std::vector<std::pair<int, int>> read_edge_list(std::istream& in) {
    std::vector<std::pair<int, int>> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int u = 0, v = 0;
        if (!(ls >> u)) continue;
        std::string rest;
        if (!(ls >> v) || (ls >> rest))
            throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": expected two integers");
        pairs.emplace_back(u, v);
    }
    return pairs;
}

}  // namespace evoforage
