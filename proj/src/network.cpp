#include "hreid/network.hpp"

#include <cmath>
#include <cstring>

#include "hreid/errors.hpp"
#include "hreid/rng.hpp"

namespace hreid {

void NetworkSpec::validate() const {
    if (input_dim <= 0) throw ValidationError("network spec: input_dim must be positive");
    if (hidden_layers.empty()) throw ValidationError("network spec: at least one hidden layer required");
    for (int w : hidden_layers)
        if (w <= 0) throw ValidationError("network spec: hidden widths must be positive");
    if (embedding_dim <= 0) throw ValidationError("network spec: embedding_dim must be positive");
    if (num_classes < 0) throw ValidationError("network spec: num_classes must be >= 0");
    if (num_classes == 1) throw ValidationError("network spec: a classification head needs >= 2 classes");
}

std::vector<double> DenseLayer::apply(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
        double acc = b[static_cast<std::size_t>(r)];
        const double* wr = &w[static_cast<std::size_t>(r) * static_cast<std::size_t>(in)];
        for (int c = 0; c < in; ++c) acc += wr[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

namespace {

DenseLayer init_layer(int in, int out, Rng& rng) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    l.b.assign(static_cast<std::size_t>(out), 0.0);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& v : l.w) v = rng.uniform(-bound, bound);
    return l;
}

DenseLayer zero_layer(int in, int out) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.w.assign(static_cast<std::size_t>(in) * static_cast<std::size_t>(out), 0.0);
    l.b.assign(static_cast<std::size_t>(out), 0.0);
    return l;
}

}  // namespace

Network make_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec = spec;
    Rng rng(seed);
    int prev = spec.input_dim;
    for (int width : spec.hidden_layers) {
        net.hidden.push_back(init_layer(prev, width, rng));
        prev = width;
    }
    net.embed = init_layer(prev, spec.embedding_dim, rng);
    // the head trains alone on a frozen body (convex), so it starts at zero
    if (spec.num_classes > 0) net.head = zero_layer(spec.embedding_dim, spec.num_classes);
    return net;
}

ForwardResult forward(const Network& net, const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != net.spec.input_dim)
        throw ValidationError("forward: input dimension " + std::to_string(input.size()) +
                              " does not match spec input_dim " + std::to_string(net.spec.input_dim));
    ForwardResult r;
    std::vector<double> x = input;
    for (const auto& layer : net.hidden) {
        x = layer.apply(x);
        for (auto& v : x) v = v > 0.0 ? v : 0.0;
    }
    r.hidden = x;
    r.embedding = net.embed.apply(x);
    if (net.has_head()) r.logits = net.head.apply(r.embedding);
    return r;
}

CostModel cost_of(const NetworkSpec& spec) {
    spec.validate();
    CostModel c;
    std::uint64_t prev = static_cast<std::uint64_t>(spec.input_dim);
    auto add_pair = [&](std::uint64_t fan_out) {
        c.flops += 2 * prev * fan_out;
        c.param_bytes += 4 * (prev * fan_out + fan_out);
        prev = fan_out;
    };
    for (int w : spec.hidden_layers) add_pair(static_cast<std::uint64_t>(w));
    add_pair(static_cast<std::uint64_t>(spec.embedding_dim));
    if (spec.num_classes > 0) add_pair(static_cast<std::uint64_t>(spec.num_classes));
    return c;
}

namespace {

void hash_doubles(std::uint64_t& h, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
}

}  // namespace

std::uint64_t body_fingerprint(const Network& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& l : net.hidden) {
        hash_doubles(h, l.w);
        hash_doubles(h, l.b);
    }
    hash_doubles(h, net.embed.w);
    hash_doubles(h, net.embed.b);
    return h;
}

std::uint64_t weights_fingerprint(const Network& net) {
    std::uint64_t h = body_fingerprint(net);
    hash_doubles(h, net.head.w);
    hash_doubles(h, net.head.b);
    return h;
}

}  // namespace hreid
