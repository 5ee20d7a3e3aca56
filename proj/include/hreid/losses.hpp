#pragma once

#include <string>
#include <vector>

namespace hreid {

enum class AnchorStatus { invalid, inactive, active };

struct TripletBatchResult {
    double loss = 0.0;
    // d(loss)/d(embedding), same shape as the input batch
    std::vector<std::vector<double>> grad;
    // per anchor: invalid (no positive or no negative), or hinge state
    std::vector<AnchorStatus> anchors;
};

// Batch-hard triplet loss: per valid anchor, hinge over the farthest
// same-identity and the nearest different-identity sample in the batch,
// averaged over valid anchors. Euclidean distances on raw embeddings.
// Throws ValidationError if the batch holds fewer than 2 identities or no
// anchor has both a positive and a negative.
TripletBatchResult triplet_loss_batch_hard(const std::vector<std::vector<double>>& embeddings,
                                           const std::vector<std::string>& identity_labels,
                                           double margin);

struct CrossEntropyResult {
    double loss = 0.0;
    std::vector<double> grad;  // d(loss)/d(logits)
};

CrossEntropyResult softmax_cross_entropy(const std::vector<double>& logits, int label);

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace hreid
