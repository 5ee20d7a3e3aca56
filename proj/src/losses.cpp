#include "hreid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hreid/errors.hpp"

namespace hreid {

double euclidean_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

TripletBatchResult triplet_loss_batch_hard(const std::vector<std::vector<double>>& embeddings,
                                           const std::vector<std::string>& identity_labels,
                                           double margin) {
    const std::size_t n = embeddings.size();
    if (n != identity_labels.size())
        throw ValidationError("triplet loss: embeddings/labels size mismatch");
    std::set<std::string> distinct(identity_labels.begin(), identity_labels.end());
    if (distinct.size() < 2)
        throw ValidationError("triplet loss: batch must contain at least 2 identities");

    TripletBatchResult res;
    res.grad.assign(n, std::vector<double>(n ? embeddings[0].size() : 0, 0.0));
    res.anchors.assign(n, AnchorStatus::invalid);

    struct Pick {
        std::size_t anchor, pos, neg;
        double d_pos, d_neg;
    };
    std::vector<Pick> active;
    std::size_t valid_anchors = 0;

    for (std::size_t a = 0; a < n; ++a) {
        double d_pos = -1.0, d_neg = -1.0;
        std::size_t hardest_pos = 0, hardest_neg = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) continue;
            const double d = euclidean_distance(embeddings[a], embeddings[j]);
            if (identity_labels[j] == identity_labels[a]) {
                if (d > d_pos) {
                    d_pos = d;
                    hardest_pos = j;
                }
            } else {
                if (d_neg < 0.0 || d < d_neg) {
                    d_neg = d;
                    hardest_neg = j;
                }
            }
        }
        if (d_pos < 0.0 || d_neg < 0.0) continue;  // no positive or no negative
        ++valid_anchors;
        const double hinge = margin + d_pos - d_neg;
        if (hinge > 0.0) {
            res.loss += hinge;
            res.anchors[a] = AnchorStatus::active;
            active.push_back({a, hardest_pos, hardest_neg, d_pos, d_neg});
        } else {
            res.anchors[a] = AnchorStatus::inactive;
        }
    }

    if (valid_anchors == 0)
        throw ValidationError("triplet loss: no anchor has both a positive and a negative");

    res.loss /= static_cast<double>(valid_anchors);
    const double scale = 1.0 / static_cast<double>(valid_anchors);
    for (const auto& p : active) {
        // hinge = margin + d(a, pos) - d(a, neg); subgradient 0 at zero distance
        if (p.d_pos > 1e-12) {
            for (std::size_t k = 0; k < embeddings[p.anchor].size(); ++k) {
                const double g = scale * (embeddings[p.anchor][k] - embeddings[p.pos][k]) / p.d_pos;
                res.grad[p.anchor][k] += g;
                res.grad[p.pos][k] -= g;
            }
        }
        if (p.d_neg > 1e-12) {
            for (std::size_t k = 0; k < embeddings[p.anchor].size(); ++k) {
                const double g = scale * (embeddings[p.anchor][k] - embeddings[p.neg][k]) / p.d_neg;
                res.grad[p.anchor][k] -= g;
                res.grad[p.neg][k] += g;
            }
        }
    }
    return res;
}

CrossEntropyResult softmax_cross_entropy(const std::vector<double>& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw ValidationError("cross entropy: label out of range");
    CrossEntropyResult res;
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    res.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        res.grad[i] = std::exp(logits[i] - zmax);
        denom += res.grad[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) res.grad[i] /= denom;
    res.loss = -std::log(res.grad[static_cast<std::size_t>(label)]);
    res.grad[static_cast<std::size_t>(label)] -= 1.0;
    return res;
}

}  // namespace hreid
