#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoforage/rng.hpp"

namespace evoforage {

inline constexpr int kNumInputs = 243;
inline constexpr int kNumOutputs = 5;
inline constexpr int kFirstOutputId = kNumInputs;                 // 243..247
inline constexpr int kFirstHiddenId = kNumInputs + kNumOutputs;   // 248..
inline constexpr int kInitialAnnSize = 254;
inline constexpr int kGenomeFormatVersion = 1;

enum class NodeKind : std::uint8_t { input, hidden, output };
enum class Activation : std::uint8_t { identity, tanh };

struct NodeGene {
    int id = 0;
    NodeKind kind = NodeKind::input;
    double bias = 0.0;  // unused for inputs
    Activation activation = Activation::identity;
    friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct ConnGene {
    std::int64_t innovation = 0;
    int from = 0;
    int to = 0;
    double weight = 0.0;
    bool enabled = true;
    friend bool operator==(const ConnGene&, const ConnGene&) = default;
};

/// Evolvable PPO settings.
struct HyperParams {
    double learning_rate = 3e-4;
    double clip_epsilon = 0.2;
    double discount_gamma = 0.99;
    double gae_lambda = 0.95;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    int ppo_epochs = 4;
    int minibatch_size = 64;

    friend bool operator==(const HyperParams&, const HyperParams&) = default;

    static HyperParams sample(Rng& rng);
    HyperParams mutated(double rate, Rng& rng) const;
    bool in_range() const;
};

/// Nodes are kept sorted by id, connections by innovation number.
struct Genome {
    std::uint64_t genome_id = 0;
    std::vector<NodeGene> nodes;
    std::vector<ConnGene> conns;
    HyperParams hyper;

    friend bool operator==(const Genome&, const Genome&) = default;

    const NodeGene* find_node(int id) const;
    int count(NodeKind kind) const;
    int enabled_connection_count() const;
};

class GenomeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hands out innovation numbers for (from, to) pairs and node ids for edge
/// splits. Equal keys always map to equal numbers within one registry.
class InnovationRegistry {
public:
    InnovationRegistry() = default;
    InnovationRegistry(const InnovationRegistry& other);
    InnovationRegistry& operator=(const InnovationRegistry& other);

    std::int64_t connection(int from, int to);
    /// Node id for the `occurrence`-th split of connection `innovation`.
    int split_node(std::int64_t innovation, int occurrence);

    nlohmann::json to_json() const;
    static InnovationRegistry from_json(const nlohmann::json& j);

private:
    mutable std::mutex mutex_;
    std::map<std::pair<int, int>, std::int64_t> conn_;
    std::map<std::pair<std::int64_t, int>, int> split_;
    std::int64_t next_innovation_ = 0;
    int next_node_ = kFirstHiddenId + 1;  // kFirstHiddenId is the initial hidden node
};

struct MutationRates {
    double weight = 0.1;
    double node_add = 0.5;
    double node_delete = 0.0;
    double conn_add = 0.5;
    double conn_delete = 0.5;
    double hyper = 0.1;

    void validate() const;
};

/// 243 inputs -> 1 hidden -> 5 outputs, fully connected layer to layer.
Genome initial_genome(Rng& rng, InnovationRegistry& registry, std::uint64_t genome_id);

/// Enabled connections plus non-input nodes.
int ann_size(const Genome& g);

/// True when the directed graph over all connection genes (enabled or not) is acyclic.
bool is_acyclic(const Genome& g);

/// Throws GenomeError if any structural invariant is violated.
void validate(const Genome& g);

Genome mutate(const Genome& g, const MutationRates& rates, Rng& rng, InnovationRegistry& registry);

// Individual structural operators, exposed for testing. Each returns false if
// it could not apply.
bool mutate_add_node(Genome& g, Rng& rng, InnovationRegistry& registry);
bool mutate_add_connection(Genome& g, Rng& rng, InnovationRegistry& registry);
bool mutate_delete_connection(Genome& g, Rng& rng);
bool mutate_delete_node(Genome& g, Rng& rng);
void mutate_weights(Genome& g, double rate, Rng& rng);
/// Removes hidden nodes with no enabled incident connection (and their disabled genes).
int prune_disconnected(Genome& g);

/// `fitter` supplies disjoint and excess genes. The child gets `child_id`.
Genome crossover(const Genome& fitter, const Genome& other, Rng& rng, std::uint64_t child_id);

/// Lossless structured-text encoding (reals as hex floats).
nlohmann::json to_json(const Genome& g);
Genome genome_from_json(const nlohmann::json& j);
std::string serialize(const Genome& g);
Genome deserialize(const std::string& text);

/// Stable 64-bit content hash over every gene field.
std::uint64_t genome_hash(const Genome& g);

std::string hex_double(double v);
double parse_hex_double(const std::string& s);

}  // namespace evoforage
