#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evoforage/genome.hpp"

namespace evoforage {

enum class Variant : std::uint8_t { actor, critic };

/// Node id given to the critic's single value node.
inline constexpr int kValueNodeId = -1;

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nonzero entries of an observation, ascending by input index.
struct SparseInput {
    std::vector<std::uint8_t> index;
    std::vector<double> value;

    void assign(std::span<const double> obs);
};

/// Scratch buffers for one forward/backward pass. Reusable across calls.
struct ForwardCache {
    SparseInput input;
    std::vector<double> acc;    // pre-activation per compute node
    std::vector<double> post;   // post-activation per compute node
    std::vector<double> delta;  // d loss / d pre-activation (backward only)
    std::vector<double> out;
};

/// Executable feedforward network compiled from a genome. Parameters live in
/// a flat vector: one entry per edge, then one bias per compute node. The
/// phenotype itself is immutable; callers pass the parameter vector so the
/// learner can train a copy without touching the genome.
class Phenotype {
public:
    static Phenotype build(const Genome& g, Variant variant);

    Variant variant() const { return variant_; }
    std::size_t num_params() const { return initial_.size(); }
    std::size_t num_edges() const { return edge_labels_.size(); }
    std::size_t num_outputs() const { return outputs_.size(); }
    const std::vector<double>& initial_params() const { return initial_; }

    /// Compute node ids (inputs excluded) in evaluation order.
    std::vector<int> evaluation_order() const;
    /// (from, to) of each edge parameter, in parameter order.
    const std::vector<std::pair<int, int>>& edge_labels() const { return edge_labels_; }
    /// Node id owning each bias parameter, in parameter order.
    std::vector<int> bias_labels() const;

    /// Returns the output vector (5 logits or 1 value). Throws NumericError if
    /// any node pre-activation is non-finite.
    std::span<const double> forward(std::span<const double> params, std::span<const double> obs,
                                    ForwardCache& cache) const;
    std::span<const double> forward(std::span<const double> params, const SparseInput& in, ForwardCache& cache) const;
    std::span<const double> forward(std::span<const double> obs, ForwardCache& cache) const {
        return forward(initial_, obs, cache);
    }

    /// Accumulates d loss / d params into `grad`, given d loss / d outputs.
    /// `cache` must hold the forward pass for the same params and obs.
    void backward(std::span<const double> params, std::span<const double> obs, std::span<const double> d_out,
                  ForwardCache& cache, std::span<double> grad) const;
    void backward(std::span<const double> params, const SparseInput& in, std::span<const double> d_out,
                  ForwardCache& cache, std::span<double> grad) const;

private:
    struct ComputeNode {
        int id;
        Activation activation;
        int bias_param;
        int edge_begin;  // internal edges [edge_begin, edge_end)
        int edge_end;
    };

    Variant variant_ = Variant::actor;
    std::vector<ComputeNode> nodes_;
    // Edges whose source is another compute node, grouped by target.
    std::vector<int> internal_src_;
    std::vector<int> internal_param_;
    // Edges whose source is an input, grouped by input index (CSR).
    std::vector<int> input_begin_;
    std::vector<int> input_target_;
    std::vector<int> input_param_;
    std::vector<int> outputs_;  // compute node indices
    std::vector<double> initial_;
    std::vector<std::pair<int, int>> edge_labels_;
};

}  // namespace evoforage
