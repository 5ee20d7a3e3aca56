#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hreid/dataset.hpp"
#include "hreid/network.hpp"

namespace hreid {

struct TripletConfig {
    int identities_per_batch = 8;  // P
    int images_per_identity = 4;   // K
    double margin = 0.3;
    double learning_rate = 0.01;
    double lr_decay_factor = 10.0;
    int lr_decay_every = 100;  // epochs
    int max_epochs = 100;
    int saturation_patience = 15;
    std::uint64_t seed = 0;

    void validate() const;
};

struct HeadConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;

    void validate() const;
};

// One training example: the node-local input vector (raw features at the
// root, the parent's hidden activation below it), its identity, and the
// attribute label the node classifies (-1 when unused).
struct TrainSample {
    std::vector<double> input;
    std::string identity;
    int label = -1;
};

struct TrainStats {
    int epochs_run = 0;
    double final_loss = 0.0;
    bool saturated = false;
};

// SGD on batch-hard triplet loss with P*K batches. Updates body weights
// (hidden stack + embedding projection) only; stops at max_epochs or when
// the epoch loss stops improving by 1e-4 for saturation_patience epochs.
TrainStats train_embedding(Network& net, const std::vector<TrainSample>& samples,
                           const TripletConfig& config);

// Cross-entropy on the classification head with the body frozen; body
// parameters are bit-identical before and after.
TrainStats train_classifier_head(Network& net, const std::vector<TrainSample>& samples,
                                 const HeadConfig& config);

// Dataset-facing wrappers; input_of maps a sample to the node-local input.
using InputFn = std::function<std::vector<double>(const Sample&)>;

TrainStats train_embedding(Network& net, const Dataset& train, const InputFn& input_of,
                           const TripletConfig& config);
TrainStats train_classifier_head(Network& net, const Dataset& train, const InputFn& input_of,
                                 const std::string& attribute, const HeadConfig& config);

}  // namespace hreid
