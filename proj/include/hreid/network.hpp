#pragma once

#include <cstdint>
#include <vector>

namespace hreid {

struct NetworkSpec {
    int input_dim = 0;
    std::vector<int> hidden_layers;  // non-empty
    int embedding_dim = 0;
    int num_classes = 0;  // 0 = embedding-only (leaf)

    void validate() const;
    bool operator==(const NetworkSpec&) const = default;
};

struct CostModel {
    std::uint64_t flops = 0;        // one forward pass, 1 MAC = 2 FLOPs
    std::uint64_t param_bytes = 0;  // 4 bytes per weight/bias
};

// Fully-connected layer, weights row-major [out x in].
struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> w;
    std::vector<double> b;

    std::vector<double> apply(const std::vector<double>& x) const;
    bool operator==(const DenseLayer&) const = default;
};

// ReLU stack -> linear embedding projection -> linear classification head.
// The last hidden activation is the handoff passed to a routed child network.
struct Network {
    NetworkSpec spec;
    std::vector<DenseLayer> hidden;
    DenseLayer embed;
    DenseLayer head;  // unused when num_classes == 0
    bool body_frozen = false;

    bool has_head() const { return spec.num_classes > 0; }
    bool operator==(const Network&) const = default;
};

struct ForwardResult {
    std::vector<double> embedding;
    std::vector<double> logits;  // empty when no head
    std::vector<double> hidden;  // last hidden activation
};

// Glorot-uniform initialization, deterministic for a fixed seed.
Network make_network(const NetworkSpec& spec, std::uint64_t seed);

ForwardResult forward(const Network& net, const std::vector<double>& input);

CostModel cost_of(const NetworkSpec& spec);

// FNV over the raw bits of every body parameter (hidden + embedding layers).
std::uint64_t body_fingerprint(const Network& net);
std::uint64_t weights_fingerprint(const Network& net);

}  // namespace hreid
