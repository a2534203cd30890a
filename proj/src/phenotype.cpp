#include "evoforage/phenotype.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <unordered_map>

namespace evoforage {

namespace {

struct RawEdge {
    int from;
    int to;
    double weight;
};

}  // namespace

Phenotype Phenotype::build(const Genome& g, Variant variant) {
    Phenotype p;
    p.variant_ = variant;

    // Compute nodes and their biases, keyed by id.
    std::map<int, std::pair<Activation, double>> compute;
    double output_bias_sum = 0.0;
    int output_count = 0;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::hidden) compute[n.id] = {n.activation, n.bias};
        if (n.kind == NodeKind::output) {
            if (variant == Variant::actor) compute[n.id] = {Activation::identity, n.bias};
            output_bias_sum += n.bias;
            ++output_count;
        }
    }
    if (variant == Variant::critic)
        compute[kValueNodeId] = {Activation::identity, output_count ? output_bias_sum / output_count : 0.0};

    // Enabled edges, re-targeted and merged for the critic.
    std::vector<RawEdge> edges;
    std::map<std::pair<int, int>, std::size_t> merged;
    for (const auto& c : g.conns) {
        if (!c.enabled) continue;
        const NodeGene* to = g.find_node(c.to);
        const NodeGene* from = g.find_node(c.from);
        if (!to || !from) throw GenomeError("connection references a missing node");
        int target = c.to;
        if (variant == Variant::critic && to->kind == NodeKind::output) target = kValueNodeId;
        if (variant == Variant::critic && from->kind == NodeKind::output)
            throw GenomeError("critic derivation: edge leaves an output node");
        auto [it, inserted] = merged.try_emplace({c.from, target}, edges.size());
        if (inserted)
            edges.push_back({c.from, target, c.weight});
        else
            edges[it->second].weight += c.weight;
    }

    // Topological order over compute nodes, smallest ready id first.
    std::unordered_map<int, int> indeg;
    std::unordered_map<int, std::vector<int>> succ;
    for (const auto& [id, _] : compute) indeg[id] = 0;
    for (const auto& e : edges) {
        if (!compute.contains(e.from)) continue;  // input source
        ++indeg[e.to];
        succ[e.from].push_back(e.to);
    }
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (const auto& [id, d] : indeg)
        if (d == 0) ready.push(id);
    std::vector<int> order;
    order.reserve(compute.size());
    while (!ready.empty()) {
        const int id = ready.top();
        ready.pop();
        order.push_back(id);
        for (int s : succ[id])
            if (--indeg[s] == 0) ready.push(s);
    }
    if (order.size() != compute.size()) throw GenomeError("cycle detected among enabled connections");

    std::unordered_map<int, int> position;
    for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = static_cast<int>(k);

    const int n_edges = static_cast<int>(edges.size());
    p.initial_.resize(edges.size() + order.size());
    p.edge_labels_.reserve(edges.size());
    for (int e = 0; e < n_edges; ++e) {
        p.initial_[static_cast<std::size_t>(e)] = edges[static_cast<std::size_t>(e)].weight;
        p.edge_labels_.emplace_back(edges[static_cast<std::size_t>(e)].from, edges[static_cast<std::size_t>(e)].to);
    }

    std::vector<std::vector<int>> incoming(order.size());
    std::vector<std::vector<std::pair<int, int>>> by_input(kNumInputs);
    for (int e = 0; e < n_edges; ++e) {
        const auto& edge = edges[static_cast<std::size_t>(e)];
        const int tgt = position.at(edge.to);
        if (compute.contains(edge.from))
            incoming[static_cast<std::size_t>(tgt)].push_back(e);
        else
            by_input.at(static_cast<std::size_t>(edge.from)).emplace_back(tgt, e);
    }

    p.nodes_.reserve(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& [act, bias] = compute.at(order[k]);
        const int bias_param = n_edges + static_cast<int>(k);
        p.initial_[static_cast<std::size_t>(bias_param)] = bias;
        ComputeNode node{order[k], act, bias_param, static_cast<int>(p.internal_src_.size()), 0};
        for (int e : incoming[k]) {
            p.internal_src_.push_back(position.at(edges[static_cast<std::size_t>(e)].from));
            p.internal_param_.push_back(e);
        }
        node.edge_end = static_cast<int>(p.internal_src_.size());
        p.nodes_.push_back(node);
    }

    p.input_begin_.assign(kNumInputs + 1, 0);
    for (int i = 0; i < kNumInputs; ++i) {
        p.input_begin_[static_cast<std::size_t>(i)] = static_cast<int>(p.input_target_.size());
        for (const auto& [tgt, e] : by_input[static_cast<std::size_t>(i)]) {
            p.input_target_.push_back(tgt);
            p.input_param_.push_back(e);
        }
    }
    p.input_begin_[kNumInputs] = static_cast<int>(p.input_target_.size());

    if (variant == Variant::actor) {
        for (int o = 0; o < kNumOutputs; ++o) p.outputs_.push_back(position.at(kFirstOutputId + o));
    } else {
        p.outputs_.push_back(position.at(kValueNodeId));
    }
    return p;
}

std::vector<int> Phenotype::evaluation_order() const {
    std::vector<int> ids;
    ids.reserve(nodes_.size());
    for (const auto& n : nodes_) ids.push_back(n.id);
    return ids;
}

std::vector<int> Phenotype::bias_labels() const { return evaluation_order(); }

void SparseInput::assign(std::span<const double> obs) {
    if (obs.size() != static_cast<std::size_t>(kNumInputs)) throw std::invalid_argument("observation must have 243 values");
    index.clear();
    value.clear();
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i] == 0.0) continue;
        index.push_back(static_cast<std::uint8_t>(i));
        value.push_back(obs[i]);
    }
}

std::span<const double> Phenotype::forward(std::span<const double> params, std::span<const double> obs,
                                           ForwardCache& cache) const {
    cache.input.assign(obs);
    return forward(params, cache.input, cache);
}

std::span<const double> Phenotype::forward(std::span<const double> params, const SparseInput& in,
                                           ForwardCache& cache) const {
    if (params.size() != initial_.size()) throw std::invalid_argument("parameter vector does not match phenotype");
    const std::size_t n = nodes_.size();
    cache.acc.resize(n);
    cache.post.resize(n);
    for (std::size_t k = 0; k < n; ++k) cache.acc[k] = params[nodes_[k].bias_param];

    for (std::size_t t = 0; t < in.index.size(); ++t) {
        const int i = in.index[t];
        const double x = in.value[t];
        for (int e = input_begin_[i]; e < input_begin_[i + 1]; ++e)
            cache.acc[input_target_[e]] += params[input_param_[e]] * x;
    }

    for (std::size_t k = 0; k < n; ++k) {
        const ComputeNode& node = nodes_[k];
        double s = cache.acc[k];
        for (int e = node.edge_begin; e < node.edge_end; ++e) s += params[internal_param_[e]] * cache.post[internal_src_[e]];
        if (!std::isfinite(s)) throw NumericError("non-finite activation at node " + std::to_string(node.id));
        cache.acc[k] = s;
        cache.post[k] = node.activation == Activation::tanh ? std::tanh(s) : s;
    }

    cache.out.resize(outputs_.size());
    for (std::size_t j = 0; j < outputs_.size(); ++j) cache.out[j] = cache.post[outputs_[j]];
    return cache.out;
}

void Phenotype::backward(std::span<const double> params, std::span<const double> obs, std::span<const double> d_out,
                         ForwardCache& cache, std::span<double> grad) const {
    cache.input.assign(obs);
    backward(params, cache.input, d_out, cache, grad);
}

void Phenotype::backward(std::span<const double> params, const SparseInput& in, std::span<const double> d_out,
                         ForwardCache& cache, std::span<double> grad) const {
    const std::size_t n = nodes_.size();
    cache.delta.assign(n, 0.0);
    for (std::size_t j = 0; j < outputs_.size(); ++j) cache.delta[outputs_[j]] += d_out[j];

    for (std::size_t k = n; k-- > 0;) {
        const ComputeNode& node = nodes_[k];
        double d = cache.delta[k];
        if (node.activation == Activation::tanh) d *= 1.0 - cache.post[k] * cache.post[k];
        cache.delta[k] = d;
        if (d == 0.0) continue;
        grad[node.bias_param] += d;
        for (int e = node.edge_begin; e < node.edge_end; ++e) {
            const int src = internal_src_[e];
            const int prm = internal_param_[e];
            grad[prm] += d * cache.post[src];
            cache.delta[src] += d * params[prm];
        }
    }

    for (std::size_t t = 0; t < in.index.size(); ++t) {
        const int i = in.index[t];
        const double x = in.value[t];
        for (int e = input_begin_[i]; e < input_begin_[i + 1]; ++e) grad[input_param_[e]] += cache.delta[input_target_[e]] * x;
    }
}

}  // namespace evoforage
