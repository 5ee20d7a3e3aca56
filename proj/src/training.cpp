#include "hreid/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hreid/errors.hpp"
#include "hreid/losses.hpp"
#include "hreid/rng.hpp"

namespace hreid {

void TripletConfig::validate() const {
    if (identities_per_batch < 2)
        throw ValidationError("triplet config: P must be >= 2 (batch-hard needs a negative per anchor)");
    if (images_per_identity < 2)
        throw ValidationError("triplet config: K must be >= 2 (batch-hard needs a positive per anchor)");
    if (margin <= 0.0) throw ValidationError("triplet config: margin must be positive");
    if (learning_rate <= 0.0) throw ValidationError("triplet config: learning_rate must be positive");
    if (lr_decay_factor <= 0.0) throw ValidationError("triplet config: lr_decay_factor must be positive");
    if (lr_decay_every <= 0) throw ValidationError("triplet config: lr_decay_every must be positive");
    if (max_epochs <= 0) throw ValidationError("triplet config: max_epochs must be positive");
    if (saturation_patience <= 0) throw ValidationError("triplet config: saturation_patience must be positive");
}

void HeadConfig::validate() const {
    if (epochs <= 0) throw ValidationError("head config: epochs must be positive");
    if (batch_size <= 0) throw ValidationError("head config: batch_size must be positive");
    if (learning_rate <= 0.0) throw ValidationError("head config: learning_rate must be positive");
}

namespace {

constexpr double kMinImprovement = 1e-4;

// per-sample activation tape for backprop through the body
struct Tape {
    std::vector<std::vector<double>> post;  // post-ReLU activation per hidden layer
    std::vector<double> embedding;
};

void forward_tape(const Network& net, const std::vector<double>& input, Tape& tape) {
    tape.post.clear();
    const std::vector<double>* x = &input;
    for (const auto& layer : net.hidden) {
        std::vector<double> y = layer.apply(*x);
        for (auto& v : y) v = v > 0.0 ? v : 0.0;
        tape.post.push_back(std::move(y));
        x = &tape.post.back();
    }
    tape.embedding = net.embed.apply(*x);
}

struct LayerGrad {
    std::vector<double> w;
    std::vector<double> b;
};

struct BodyGrad {
    std::vector<LayerGrad> hidden;
    LayerGrad embed;

    explicit BodyGrad(const Network& net) {
        for (const auto& l : net.hidden)
            hidden.push_back({std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
        embed = {std::vector<double>(net.embed.w.size(), 0.0), std::vector<double>(net.embed.b.size(), 0.0)};
    }
};

void accumulate_layer(LayerGrad& g, const DenseLayer& l, const std::vector<double>& input,
                      const std::vector<double>& delta) {
    for (int r = 0; r < l.out; ++r) {
        const double dr = delta[static_cast<std::size_t>(r)];
        if (dr == 0.0) continue;
        double* gw = &g.w[static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in)];
        for (int c = 0; c < l.in; ++c) gw[c] += dr * input[static_cast<std::size_t>(c)];
        g.b[static_cast<std::size_t>(r)] += dr;
    }
}

std::vector<double> backprop_layer(const DenseLayer& l, const std::vector<double>& delta) {
    std::vector<double> out(static_cast<std::size_t>(l.in), 0.0);
    for (int r = 0; r < l.out; ++r) {
        const double dr = delta[static_cast<std::size_t>(r)];
        if (dr == 0.0) continue;
        const double* wr = &l.w[static_cast<std::size_t>(r) * static_cast<std::size_t>(l.in)];
        for (int c = 0; c < l.in; ++c) out[static_cast<std::size_t>(c)] += dr * wr[c];
    }
    return out;
}

// backprop d(loss)/d(embedding) into the body gradient accumulator
void backward_from_embedding(const Network& net, const std::vector<double>& input, const Tape& tape,
                             const std::vector<double>& d_embedding, BodyGrad& grads) {
    const std::vector<double>& last = tape.post.empty() ? input : tape.post.back();
    accumulate_layer(grads.embed, net.embed, last, d_embedding);
    std::vector<double> delta = backprop_layer(net.embed, d_embedding);
    for (int li = static_cast<int>(net.hidden.size()) - 1; li >= 0; --li) {
        const auto& post = tape.post[static_cast<std::size_t>(li)];
        for (std::size_t k = 0; k < delta.size(); ++k)
            if (post[k] <= 0.0) delta[k] = 0.0;  // ReLU mask
        const std::vector<double>& layer_in =
            li == 0 ? input : tape.post[static_cast<std::size_t>(li - 1)];
        accumulate_layer(grads.hidden[static_cast<std::size_t>(li)], net.hidden[static_cast<std::size_t>(li)],
                         layer_in, delta);
        if (li > 0) delta = backprop_layer(net.hidden[static_cast<std::size_t>(li)], delta);
    }
}

void sgd_step(DenseLayer& l, const LayerGrad& g, double lr) {
    for (std::size_t i = 0; i < l.w.size(); ++i) l.w[i] -= lr * g.w[i];
    for (std::size_t i = 0; i < l.b.size(); ++i) l.b[i] -= lr * g.b[i];
}

}  // namespace

TrainStats train_embedding(Network& net, const std::vector<TrainSample>& samples,
                           const TripletConfig& config) {
    config.validate();
    if (net.body_frozen) throw ValidationError("train_embedding: body is frozen");
    for (const auto& s : samples)
        if (static_cast<int>(s.input.size()) != net.spec.input_dim)
            throw ValidationError("train_embedding: sample input dimension mismatch");

    // identity -> sample indices, keyed in sorted order for stable batching
    std::map<std::string, std::vector<std::size_t>> by_identity;
    for (std::size_t i = 0; i < samples.size(); ++i) by_identity[samples[i].identity].push_back(i);
    if (by_identity.size() < 2)
        throw ValidationError("train_embedding: dataset has fewer than 2 identities");

    std::vector<std::string> identities;
    identities.reserve(by_identity.size());
    for (const auto& [id, _] : by_identity) identities.push_back(id);

    const int P = config.identities_per_batch;
    const int K = config.images_per_identity;
    Rng rng(config.seed);

    TrainStats stats;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = config.learning_rate /
                          std::pow(config.lr_decay_factor, static_cast<double>(epoch / config.lr_decay_every));
        rng.shuffle(identities);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < identities.size(); start += static_cast<std::size_t>(P)) {
            std::vector<std::string> chunk(identities.begin() + static_cast<std::ptrdiff_t>(start),
                                           identities.begin() +
                                               static_cast<std::ptrdiff_t>(std::min(
                                                   start + static_cast<std::size_t>(P), identities.size())));
            // a lone remainder identity cannot form a valid batch; it gets
            // its turn after the next shuffle
            if (chunk.size() < 2 && identities.size() > chunk.size()) continue;
            // fewer identities than P overall: pad by sampling with replacement
            while (static_cast<int>(chunk.size()) < P && identities.size() < static_cast<std::size_t>(P))
                chunk.push_back(identities[static_cast<std::size_t>(rng.below(identities.size()))]);

            std::vector<std::size_t> batch;
            for (const auto& id : chunk) {
                const auto& pool = by_identity[id];
                if (pool.size() >= static_cast<std::size_t>(K)) {
                    std::vector<std::size_t> idx(pool.size());
                    std::iota(idx.begin(), idx.end(), 0);
                    rng.shuffle(idx);
                    for (int k = 0; k < K; ++k) batch.push_back(pool[idx[static_cast<std::size_t>(k)]]);
                } else {
                    for (int k = 0; k < K; ++k)
                        batch.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))]);
                }
            }

            std::vector<Tape> tapes(batch.size());
            std::vector<std::vector<double>> embeddings(batch.size());
            std::vector<std::string> labels(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                forward_tape(net, samples[batch[i]].input, tapes[i]);
                embeddings[i] = tapes[i].embedding;
                labels[i] = samples[batch[i]].identity;
            }
            const TripletBatchResult tl = triplet_loss_batch_hard(embeddings, labels, config.margin);
            if (!std::isfinite(tl.loss))
                throw std::runtime_error("train_embedding: loss diverged (non-finite)");

            BodyGrad grads(net);
            for (std::size_t i = 0; i < batch.size(); ++i)
                backward_from_embedding(net, samples[batch[i]].input, tapes[i], tl.grad[i], grads);
            for (std::size_t li = 0; li < net.hidden.size(); ++li)
                sgd_step(net.hidden[li], grads.hidden[li], lr);
            sgd_step(net.embed, grads.embed, lr);

            epoch_loss += tl.loss;
            ++batches;
        }
        if (batches == 0) throw ValidationError("train_embedding: no trainable batch could be formed");
        epoch_loss /= static_cast<double>(batches);
        stats.epochs_run = epoch + 1;
        stats.final_loss = epoch_loss;

        if (epoch_loss < best - kMinImprovement) {
            best = epoch_loss;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= config.saturation_patience) {
                stats.saturated = true;
                break;
            }
        }
    }
    return stats;
}

TrainStats train_classifier_head(Network& net, const std::vector<TrainSample>& samples,
                                 const HeadConfig& config) {
    config.validate();
    if (!net.has_head()) throw ValidationError("train_classifier_head: network has no classification head");
    for (const auto& s : samples) {
        if (s.label < 0 || s.label >= net.spec.num_classes)
            throw ValidationError("train_classifier_head: label " + std::to_string(s.label) +
                                  " does not match num_classes " + std::to_string(net.spec.num_classes));
        if (static_cast<int>(s.input.size()) != net.spec.input_dim)
            throw ValidationError("train_classifier_head: sample input dimension mismatch");
    }
    if (samples.empty()) throw ValidationError("train_classifier_head: no samples");

    // body is frozen during this phase, so embeddings can be computed once
    std::vector<std::vector<double>> embeddings(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        embeddings[i] = forward(net, samples[i].input).embedding;

    Rng rng(config.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    TrainStats stats;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            LayerGrad g{std::vector<double>(net.head.w.size(), 0.0), std::vector<double>(net.head.b.size(), 0.0)};
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t s = order[i];
                const std::vector<double> logits = net.head.apply(embeddings[s]);
                const CrossEntropyResult ce = softmax_cross_entropy(logits, samples[s].label);
                batch_loss += ce.loss;
                accumulate_layer(g, net.head, embeddings[s], ce.grad);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto& v : g.w) v *= scale;
            for (auto& v : g.b) v *= scale;
            sgd_step(net.head, g, config.learning_rate);
            epoch_loss += batch_loss * scale;
            ++batches;
        }
        stats.epochs_run = epoch + 1;
        stats.final_loss = epoch_loss / static_cast<double>(batches);
    }
    net.body_frozen = true;
    return stats;
}

namespace {

std::vector<TrainSample> materialize(const Dataset& train, const InputFn& input_of, int label_attr) {
    std::vector<TrainSample> out;
    out.reserve(train.samples.size());
    for (const auto& s : train.samples) {
        if (s.split != Split::train) continue;
        TrainSample t;
        t.input = input_of(s);
        t.identity = s.identity_id;
        if (label_attr >= 0) t.label = s.attribute_values[static_cast<std::size_t>(label_attr)];
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TrainStats train_embedding(Network& net, const Dataset& train, const InputFn& input_of,
                           const TripletConfig& config) {
    return train_embedding(net, materialize(train, input_of, -1), config);
}

TrainStats train_classifier_head(Network& net, const Dataset& train, const InputFn& input_of,
                                 const std::string& attribute, const HeadConfig& config) {
    const int idx = train.schema.index_of(attribute);
    if (idx < 0) throw ValidationError("train_classifier_head: unknown attribute " + attribute);
    const int n_values = static_cast<int>(train.schema.attributes[static_cast<std::size_t>(idx)].values.size());
    if (n_values != net.spec.num_classes)
        throw ValidationError("train_classifier_head: attribute '" + attribute + "' has " +
                              std::to_string(n_values) + " values but network head expects " +
                              std::to_string(net.spec.num_classes));
    return train_classifier_head(net, materialize(train, input_of, idx), config);
}

}  // namespace hreid
