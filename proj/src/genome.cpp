#include "evoforage/genome.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace evoforage {

namespace {

constexpr std::array<int, 4> kMinibatchSizes = {32, 64, 128, 256};

constexpr double kLogLrLo = -5.0, kLogLrHi = -2.0;
constexpr double kClipLo = 0.1, kClipHi = 0.3;
constexpr double kGammaLo = 0.9, kGammaHi = 0.999;
constexpr double kLambdaLo = 0.9, kLambdaHi = 1.0;
constexpr double kEntropyLo = 0.0, kEntropyHi = 0.05;
constexpr double kValueLo = 0.25, kValueHi = 1.0;
constexpr int kEpochsLo = 1, kEpochsHi = 10;

// Relative std of hyper-parameter perturbations, in units of the range width.
constexpr double kHyperStep = 0.1;
constexpr double kWeightPerturbStd = 0.5;
constexpr double kWeightRedrawProb = 0.1;

double perturb(double v, double lo, double hi, Rng& rng) {
    return std::clamp(v + rng.normal() * kHyperStep * (hi - lo), lo, hi);
}

int minibatch_index(int size) {
    const auto it = std::find(kMinibatchSizes.begin(), kMinibatchSizes.end(), size);
    return it == kMinibatchSizes.end() ? 1 : static_cast<int>(it - kMinibatchSizes.begin());
}

void insert_conn(Genome& g, ConnGene c) {
    auto it = std::lower_bound(g.conns.begin(), g.conns.end(), c.innovation,
                               [](const ConnGene& a, std::int64_t inn) { return a.innovation < inn; });
    if (it != g.conns.end() && it->innovation == c.innovation)
        throw GenomeError("duplicate innovation " + std::to_string(c.innovation));
    g.conns.insert(it, c);
}

void insert_node(Genome& g, NodeGene n) {
    auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), n.id,
                               [](const NodeGene& a, int id) { return a.id < id; });
    if (it != g.nodes.end() && it->id == n.id) throw GenomeError("duplicate node id " + std::to_string(n.id));
    g.nodes.insert(it, n);
}

double mutate_value(double v, Rng& rng) {
    if (rng.bernoulli(kWeightRedrawProb)) return rng.normal();
    return v + kWeightPerturbStd * rng.normal();
}

}  // namespace

// --- HyperParams -----------------------------------------------------------

HyperParams HyperParams::sample(Rng& rng) {
    HyperParams h;
    h.learning_rate = std::pow(10.0, rng.uniform(kLogLrLo, kLogLrHi));
    h.clip_epsilon = rng.uniform(kClipLo, kClipHi);
    h.discount_gamma = rng.uniform(kGammaLo, kGammaHi);
    h.gae_lambda = rng.uniform(kLambdaLo, kLambdaHi);
    h.entropy_coef = rng.uniform(kEntropyLo, kEntropyHi);
    h.value_coef = rng.uniform(kValueLo, kValueHi);
    h.ppo_epochs = kEpochsLo + static_cast<int>(rng.below(kEpochsHi - kEpochsLo + 1));
    h.minibatch_size = kMinibatchSizes[rng.below(kMinibatchSizes.size())];
    return h;
}

HyperParams HyperParams::mutated(double rate, Rng& rng) const {
    HyperParams h = *this;
    if (rng.bernoulli(rate))
        h.learning_rate = std::pow(10.0, perturb(std::log10(learning_rate), kLogLrLo, kLogLrHi, rng));
    if (rng.bernoulli(rate)) h.clip_epsilon = perturb(clip_epsilon, kClipLo, kClipHi, rng);
    if (rng.bernoulli(rate)) h.discount_gamma = perturb(discount_gamma, kGammaLo, kGammaHi, rng);
    if (rng.bernoulli(rate)) h.gae_lambda = perturb(gae_lambda, kLambdaLo, kLambdaHi, rng);
    if (rng.bernoulli(rate)) h.entropy_coef = perturb(entropy_coef, kEntropyLo, kEntropyHi, rng);
    if (rng.bernoulli(rate)) h.value_coef = perturb(value_coef, kValueLo, kValueHi, rng);
    if (rng.bernoulli(rate)) {
        const double e = ppo_epochs + rng.normal() * kHyperStep * (kEpochsHi - kEpochsLo);
        h.ppo_epochs = std::clamp(static_cast<int>(std::lround(e)), kEpochsLo, kEpochsHi);
    }
    if (rng.bernoulli(rate)) {
        const double i = minibatch_index(minibatch_size) + rng.normal();
        h.minibatch_size = kMinibatchSizes[static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(i)), 0, 3))];
    }
    return h;
}

bool HyperParams::in_range() const {
    const double log_lr = std::log10(learning_rate);
    return log_lr >= kLogLrLo - 1e-12 && log_lr <= kLogLrHi + 1e-12 && clip_epsilon >= kClipLo &&
           clip_epsilon <= kClipHi && discount_gamma >= kGammaLo && discount_gamma <= kGammaHi &&
           gae_lambda >= kLambdaLo && gae_lambda <= kLambdaHi && entropy_coef >= kEntropyLo &&
           entropy_coef <= kEntropyHi && value_coef >= kValueLo && value_coef <= kValueHi &&
           ppo_epochs >= kEpochsLo && ppo_epochs <= kEpochsHi &&
           std::find(kMinibatchSizes.begin(), kMinibatchSizes.end(), minibatch_size) != kMinibatchSizes.end();
}

// --- Genome ----------------------------------------------------------------

const NodeGene* Genome::find_node(int id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id, [](const NodeGene& a, int v) { return a.id < v; });
    return (it != nodes.end() && it->id == id) ? &*it : nullptr;
}

int Genome::count(NodeKind kind) const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [&](const NodeGene& n) { return n.kind == kind; }));
}

int Genome::enabled_connection_count() const {
    return static_cast<int>(std::count_if(conns.begin(), conns.end(), [](const ConnGene& c) { return c.enabled; }));
}

// --- InnovationRegistry ----------------------------------------------------

InnovationRegistry::InnovationRegistry(const InnovationRegistry& other) {
    std::lock_guard lock(other.mutex_);
    conn_ = other.conn_;
    split_ = other.split_;
    next_innovation_ = other.next_innovation_;
    next_node_ = other.next_node_;
}

InnovationRegistry& InnovationRegistry::operator=(const InnovationRegistry& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    conn_ = other.conn_;
    split_ = other.split_;
    next_innovation_ = other.next_innovation_;
    next_node_ = other.next_node_;
    return *this;
}

std::int64_t InnovationRegistry::connection(int from, int to) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = conn_.try_emplace({from, to}, next_innovation_);
    if (inserted) ++next_innovation_;
    return it->second;
}

int InnovationRegistry::split_node(std::int64_t innovation, int occurrence) {
    std::lock_guard lock(mutex_);
    auto [it, inserted] = split_.try_emplace({innovation, occurrence}, next_node_);
    if (inserted) ++next_node_;
    return it->second;
}

nlohmann::json InnovationRegistry::to_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json conns = nlohmann::json::array();
    for (const auto& [key, inn] : conn_) conns.push_back({key.first, key.second, inn});
    nlohmann::json splits = nlohmann::json::array();
    for (const auto& [key, node] : split_) splits.push_back({key.first, key.second, node});
    return {{"next_innovation", next_innovation_}, {"next_node", next_node_}, {"connections", conns}, {"splits", splits}};
}

InnovationRegistry InnovationRegistry::from_json(const nlohmann::json& j) {
    InnovationRegistry r;
    r.next_innovation_ = j.at("next_innovation").get<std::int64_t>();
    r.next_node_ = j.at("next_node").get<int>();
    for (const auto& e : j.at("connections")) r.conn_[{e[0].get<int>(), e[1].get<int>()}] = e[2].get<std::int64_t>();
    for (const auto& e : j.at("splits")) r.split_[{e[0].get<std::int64_t>(), e[1].get<int>()}] = e[2].get<int>();
    return r;
}

void MutationRates::validate() const {
    for (double r : {weight, node_add, node_delete, conn_add, conn_delete, hyper})
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("mutation rates must lie in [0, 1]");
}

// --- construction and accounting -------------------------------------------

Genome initial_genome(Rng& rng, InnovationRegistry& registry, std::uint64_t genome_id) {
    Genome g;
    g.genome_id = genome_id;
    g.nodes.reserve(kNumInputs + kNumOutputs + 1);
    for (int i = 0; i < kNumInputs; ++i) g.nodes.push_back({i, NodeKind::input, 0.0, Activation::identity});
    for (int o = 0; o < kNumOutputs; ++o)
        g.nodes.push_back({kFirstOutputId + o, NodeKind::output, rng.normal(), Activation::identity});
    g.nodes.push_back({kFirstHiddenId, NodeKind::hidden, rng.normal(), Activation::tanh});

    g.conns.reserve(kNumInputs + kNumOutputs);
    for (int i = 0; i < kNumInputs; ++i)
        g.conns.push_back({registry.connection(i, kFirstHiddenId), i, kFirstHiddenId, rng.normal(), true});
    for (int o = 0; o < kNumOutputs; ++o)
        g.conns.push_back({registry.connection(kFirstHiddenId, kFirstOutputId + o), kFirstHiddenId, kFirstOutputId + o,
                           rng.normal(), true});
    std::sort(g.conns.begin(), g.conns.end(), [](const ConnGene& a, const ConnGene& b) { return a.innovation < b.innovation; });
    g.hyper = HyperParams::sample(rng);
    return g;
}

int ann_size(const Genome& g) {
    return g.enabled_connection_count() + static_cast<int>(g.nodes.size()) - g.count(NodeKind::input);
}

bool is_acyclic(const Genome& g) {
    std::unordered_map<int, int> index;
    index.reserve(g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i].id] = static_cast<int>(i);
    std::vector<std::vector<int>> out(g.nodes.size());
    std::vector<int> indeg(g.nodes.size(), 0);
    for (const auto& c : g.conns) {
        auto f = index.find(c.from), t = index.find(c.to);
        if (f == index.end() || t == index.end()) return false;
        out[static_cast<std::size_t>(f->second)].push_back(t->second);
        ++indeg[static_cast<std::size_t>(t->second)];
    }
    std::vector<int> stack;
    for (std::size_t i = 0; i < indeg.size(); ++i)
        if (indeg[i] == 0) stack.push_back(static_cast<int>(i));
    std::size_t visited = 0;
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        ++visited;
        for (int m : out[static_cast<std::size_t>(n)])
            if (--indeg[static_cast<std::size_t>(m)] == 0) stack.push_back(m);
    }
    return visited == g.nodes.size();
}

void validate(const Genome& g) {
    int inputs = 0, outputs = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        if (i > 0 && g.nodes[i - 1].id >= n.id) throw GenomeError("node ids not strictly increasing");
        switch (n.kind) {
            case NodeKind::input:
                if (n.id < 0 || n.id >= kNumInputs) throw GenomeError("input node id out of range");
                ++inputs;
                break;
            case NodeKind::output:
                if (n.id < kFirstOutputId || n.id >= kFirstHiddenId) throw GenomeError("output node id out of range");
                ++outputs;
                break;
            case NodeKind::hidden:
                if (n.id < kFirstHiddenId) throw GenomeError("hidden node id out of range");
                break;
        }
        if (!std::isfinite(n.bias)) throw GenomeError("non-finite bias");
    }
    if (inputs != kNumInputs || outputs != kNumOutputs) throw GenomeError("genome must have 243 inputs and 5 outputs");

    std::set<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < g.conns.size(); ++i) {
        const auto& c = g.conns[i];
        if (i > 0 && g.conns[i - 1].innovation >= c.innovation) throw GenomeError("innovations not strictly increasing");
        if (c.from == c.to) throw GenomeError("self-loop connection");
        const NodeGene* f = g.find_node(c.from);
        const NodeGene* t = g.find_node(c.to);
        if (!f || !t) throw GenomeError("connection references a missing node");
        if (t->kind == NodeKind::input) throw GenomeError("connection into an input node");
        if (!pairs.emplace(c.from, c.to).second) throw GenomeError("duplicate connection pair");
        if (!std::isfinite(c.weight)) throw GenomeError("non-finite weight");
    }
    if (!is_acyclic(g)) throw GenomeError("connection graph contains a cycle");
    if (!g.hyper.in_range()) throw GenomeError("hyper-parameters out of range");
}

// --- mutation ----------------------------------------------------------------

void mutate_weights(Genome& g, double rate, Rng& rng) {
    for (auto& c : g.conns)
        if (rng.bernoulli(rate)) c.weight = mutate_value(c.weight, rng);
    for (auto& n : g.nodes)
        if (n.kind != NodeKind::input && rng.bernoulli(rate)) n.bias = mutate_value(n.bias, rng);
}

bool mutate_add_node(Genome& g, Rng& rng, InnovationRegistry& registry) {
    std::vector<std::size_t> enabled;
    for (std::size_t i = 0; i < g.conns.size(); ++i)
        if (g.conns[i].enabled) enabled.push_back(i);
    if (enabled.empty()) return false;
    ConnGene& split = g.conns[enabled[rng.below(enabled.size())]];
    split.enabled = false;
    const ConnGene old = split;

    int occurrence = 0;
    int node_id = registry.split_node(old.innovation, occurrence);
    while (g.find_node(node_id)) node_id = registry.split_node(old.innovation, ++occurrence);

    insert_node(g, {node_id, NodeKind::hidden, 0.0, Activation::tanh});
    insert_conn(g, {registry.connection(old.from, node_id), old.from, node_id, 1.0, true});
    insert_conn(g, {registry.connection(node_id, old.to), node_id, old.to, old.weight, true});
    return true;
}

bool mutate_add_connection(Genome& g, Rng& rng, InnovationRegistry& registry) {
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i].id] = i;
    std::vector<std::vector<std::size_t>> out(g.nodes.size());
    for (const auto& c : g.conns) out[index[c.from]].push_back(index[c.to]);

    // For every admissible target, the admissible sources are the inputs and
    // hidden nodes that are neither downstream of it nor already linked to it.
    struct Bucket {
        std::size_t target;
        std::vector<std::size_t> sources;
    };
    std::vector<Bucket> buckets;
    std::size_t total = 0;
    std::vector<char> blocked(g.nodes.size());
    for (std::size_t t = 0; t < g.nodes.size(); ++t) {
        if (g.nodes[t].kind == NodeKind::input) continue;
        std::fill(blocked.begin(), blocked.end(), 0);
        std::vector<std::size_t> stack{t};
        blocked[t] = 1;
        while (!stack.empty()) {
            const auto n = stack.back();
            stack.pop_back();
            for (auto m : out[n])
                if (!blocked[m]) {
                    blocked[m] = 1;
                    stack.push_back(m);
                }
        }
        for (const auto& c : g.conns)
            if (c.to == g.nodes[t].id) blocked[index[c.from]] = 1;
        Bucket b{t, {}};
        for (std::size_t s = 0; s < g.nodes.size(); ++s)
            if (!blocked[s] && g.nodes[s].kind != NodeKind::output) b.sources.push_back(s);
        total += b.sources.size();
        if (!b.sources.empty()) buckets.push_back(std::move(b));
    }
    if (total == 0) return false;
    auto pick = rng.below(total);
    for (const auto& b : buckets) {
        if (pick >= b.sources.size()) {
            pick -= b.sources.size();
            continue;
        }
        const int from = g.nodes[b.sources[pick]].id;
        const int to = g.nodes[b.target].id;
        insert_conn(g, {registry.connection(from, to), from, to, rng.normal(), true});
        return true;
    }
    return false;
}

int prune_disconnected(Genome& g) {
    std::unordered_set<int> live;
    for (const auto& c : g.conns)
        if (c.enabled) {
            live.insert(c.from);
            live.insert(c.to);
        }
    std::unordered_set<int> dead;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::hidden && !live.contains(n.id)) dead.insert(n.id);
    if (dead.empty()) return 0;
    std::erase_if(g.nodes, [&](const NodeGene& n) { return dead.contains(n.id); });
    std::erase_if(g.conns, [&](const ConnGene& c) { return dead.contains(c.from) || dead.contains(c.to); });
    return static_cast<int>(dead.size());
}

bool mutate_delete_connection(Genome& g, Rng& rng) {
    std::vector<std::size_t> enabled;
    for (std::size_t i = 0; i < g.conns.size(); ++i)
        if (g.conns[i].enabled) enabled.push_back(i);
    if (enabled.empty()) return false;
    g.conns.erase(g.conns.begin() + static_cast<std::ptrdiff_t>(enabled[rng.below(enabled.size())]));
    prune_disconnected(g);
    return true;
}

bool mutate_delete_node(Genome& g, Rng& rng) {
    std::vector<int> hidden;
    for (const auto& n : g.nodes)
        if (n.kind == NodeKind::hidden) hidden.push_back(n.id);
    if (hidden.empty()) return false;
    const int victim = hidden[rng.below(hidden.size())];
    std::erase_if(g.nodes, [&](const NodeGene& n) { return n.id == victim; });
    std::erase_if(g.conns, [&](const ConnGene& c) { return c.from == victim || c.to == victim; });
    return true;
}

Genome mutate(const Genome& g, const MutationRates& rates, Rng& rng, InnovationRegistry& registry) {
    Genome child = g;
    mutate_weights(child, rates.weight, rng);
    child.hyper = child.hyper.mutated(rates.hyper, rng);
    // Every structural operator gets exactly one draw, whether or not it fires.
    const bool add_node = rng.bernoulli(rates.node_add);
    const bool add_conn = rng.bernoulli(rates.conn_add);
    const bool del_conn = rng.bernoulli(rates.conn_delete);
    const bool del_node = rng.bernoulli(rates.node_delete);
    if (add_node) mutate_add_node(child, rng, registry);
    if (add_conn) mutate_add_connection(child, rng, registry);
    if (del_conn) mutate_delete_connection(child, rng);
    if (del_node) mutate_delete_node(child, rng);
    validate(child);
    return child;
}

// --- crossover ---------------------------------------------------------------

Genome crossover(const Genome& fitter, const Genome& other, Rng& rng, std::uint64_t child_id) {
    Genome child;
    child.genome_id = child_id;
    child.nodes.reserve(fitter.nodes.size());
    for (const auto& n : fitter.nodes) {
        const NodeGene* m = other.find_node(n.id);
        child.nodes.push_back((m && m->kind == n.kind && rng.bernoulli(0.5)) ? *m : n);
    }
    child.conns.reserve(fitter.conns.size());
    auto oit = other.conns.begin();
    for (const auto& c : fitter.conns) {
        while (oit != other.conns.end() && oit->innovation < c.innovation) ++oit;
        const bool matching = oit != other.conns.end() && oit->innovation == c.innovation;
        child.conns.push_back((matching && rng.bernoulli(0.5)) ? *oit : c);
    }
    const HyperParams& a = fitter.hyper;
    const HyperParams& b = other.hyper;
    auto pick = [&](auto x, auto y) { return rng.bernoulli(0.5) ? y : x; };
    child.hyper.learning_rate = pick(a.learning_rate, b.learning_rate);
    child.hyper.clip_epsilon = pick(a.clip_epsilon, b.clip_epsilon);
    child.hyper.discount_gamma = pick(a.discount_gamma, b.discount_gamma);
    child.hyper.gae_lambda = pick(a.gae_lambda, b.gae_lambda);
    child.hyper.entropy_coef = pick(a.entropy_coef, b.entropy_coef);
    child.hyper.value_coef = pick(a.value_coef, b.value_coef);
    child.hyper.ppo_epochs = pick(a.ppo_epochs, b.ppo_epochs);
    child.hyper.minibatch_size = pick(a.minibatch_size, b.minibatch_size);
    validate(child);
    return child;
}

// --- serialization -----------------------------------------------------------

std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw GenomeError("malformed real: '" + s + "'");
    return v;
}

namespace {

const char* kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::input: return "input";
        case NodeKind::hidden: return "hidden";
        case NodeKind::output: return "output";
    }
    return "?";
}

NodeKind parse_kind(const std::string& s) {
    if (s == "input") return NodeKind::input;
    if (s == "hidden") return NodeKind::hidden;
    if (s == "output") return NodeKind::output;
    throw GenomeError("unknown node kind '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const Genome& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : g.nodes)
        nodes.push_back({n.id, kind_name(n.kind), hex_double(n.bias), n.activation == Activation::tanh ? "tanh" : "identity"});
    nlohmann::json conns = nlohmann::json::array();
    for (const auto& c : g.conns) conns.push_back({c.innovation, c.from, c.to, hex_double(c.weight), c.enabled});
    const auto& h = g.hyper;
    return {
        {"format_version", kGenomeFormatVersion},
        {"genome_id", g.genome_id},
        {"hyper",
         {{"learning_rate", hex_double(h.learning_rate)},
          {"clip_epsilon", hex_double(h.clip_epsilon)},
          {"discount_gamma", hex_double(h.discount_gamma)},
          {"gae_lambda", hex_double(h.gae_lambda)},
          {"entropy_coef", hex_double(h.entropy_coef)},
          {"value_coef", hex_double(h.value_coef)},
          {"ppo_epochs", h.ppo_epochs},
          {"minibatch_size", h.minibatch_size}}},
        {"nodes", nodes},
        {"conns", conns},
    };
}

Genome genome_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != kGenomeFormatVersion)
        throw GenomeError("unsupported genome format version");
    Genome g;
    g.genome_id = j.at("genome_id").get<std::uint64_t>();
    const auto& h = j.at("hyper");
    auto real = [](const nlohmann::json& v) { return parse_hex_double(v.get<std::string>()); };
    g.hyper.learning_rate = real(h.at("learning_rate"));
    g.hyper.clip_epsilon = real(h.at("clip_epsilon"));
    g.hyper.discount_gamma = real(h.at("discount_gamma"));
    g.hyper.gae_lambda = real(h.at("gae_lambda"));
    g.hyper.entropy_coef = real(h.at("entropy_coef"));
    g.hyper.value_coef = real(h.at("value_coef"));
    g.hyper.ppo_epochs = h.at("ppo_epochs").get<int>();
    g.hyper.minibatch_size = h.at("minibatch_size").get<int>();
    for (const auto& n : j.at("nodes"))
        g.nodes.push_back({n[0].get<int>(), parse_kind(n[1].get<std::string>()), real(n[2]),
                           n[3].get<std::string>() == "tanh" ? Activation::tanh : Activation::identity});
    for (const auto& c : j.at("conns"))
        g.conns.push_back({c[0].get<std::int64_t>(), c[1].get<int>(), c[2].get<int>(), real(c[3]), c[4].get<bool>()});
    validate(g);
    return g;
}

std::string serialize(const Genome& g) { return to_json(g).dump(); }

Genome deserialize(const std::string& text) { return genome_from_json(nlohmann::json::parse(text)); }

std::uint64_t genome_hash(const Genome& g) {
    std::uint64_t h = mix64(g.genome_id);
    auto feed = [&](std::uint64_t v) { h = mix64(h ^ v); };
    for (const auto& n : g.nodes) {
        feed(static_cast<std::uint64_t>(n.id));
        feed(static_cast<std::uint64_t>(n.kind));
        feed(std::bit_cast<std::uint64_t>(n.bias));
        feed(static_cast<std::uint64_t>(n.activation));
    }
    for (const auto& c : g.conns) {
        feed(static_cast<std::uint64_t>(c.innovation));
        feed(static_cast<std::uint64_t>(c.from));
        feed(static_cast<std::uint64_t>(c.to));
        feed(std::bit_cast<std::uint64_t>(c.weight));
        feed(c.enabled ? 1u : 0u);
    }
    const auto& p = g.hyper;
    for (double v : {p.learning_rate, p.clip_epsilon, p.discount_gamma, p.gae_lambda, p.entropy_coef, p.value_coef})
        feed(std::bit_cast<std::uint64_t>(v));
    feed(static_cast<std::uint64_t>(p.ppo_epochs));
    feed(static_cast<std::uint64_t>(p.minibatch_size));
    return h;
}

}  // namespace evoforage
