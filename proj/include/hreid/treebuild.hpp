#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hreid/dataset.hpp"
#include "hreid/network.hpp"
#include "hreid/training.hpp"

namespace hreid {

// ---------------------------------------------------------------------------
// attribute difficulty (linear evaluation protocol)

struct ProbeConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 0.01;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct DifficultyEntry {
    std::string attribute;
    double validation_error = 0.0;
};

struct DifficultyRank {
    // ascending by validation error, ties broken lexicographically
    std::vector<DifficultyEntry> entries;

    // position in the rank, or -1 when excluded
    int rank_of(const std::string& attribute) const;
};

// Trains a linear classifier per attribute on raw features over a seeded
// 80/20 split of the train samples and ranks attributes by validation error.
// Attributes with fewer than 2 observed values are excluded with a diagnostic.
DifficultyRank rank_attribute_difficulty(const Dataset& train, const ProbeConfig& config,
                                         std::vector<std::string>* diagnostics = nullptr);

// Linear probe for one attribute; returns the validation error.
double linear_probe_error(const Dataset& train, const std::string& attribute,
                          const ProbeConfig& config);

// ---------------------------------------------------------------------------
// attribute correlations

struct CorrelationRow {
    std::vector<double> probabilities;  // one per attribute value
    bool supported = false;             // false when the conditioned subset is empty
};

struct CorrelationTable {
    std::vector<Condition> path_conditions;
    std::map<std::string, CorrelationRow> rows;
};

// Conditional value probabilities Pr(k = v | path conditions), counted over
// train samples that satisfy the conditions and carry a label for k.
CorrelationTable correlation_table(const Dataset& train, const std::vector<Condition>& conditions,
                                   const std::set<std::string>& candidates);

// ---------------------------------------------------------------------------
// hierarchy structure

struct BuildConfig {
    double weak_band_low = 0.3;
    double weak_band_high = 0.7;
    int min_node_samples = 50;  // paper-scale value is 300
    int max_depth = 5;          // maximum nodes on a root-leaf path
    int arch_depth_min = 1;
    int arch_depth_max = 3;
    double arch_stop_threshold = 5e-6;  // accuracy per byte
    int hidden_width = 24;
    int embedding_dim = 16;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const BuildConfig&) const = default;
};

struct HierarchyNode {
    std::string node_id;
    std::vector<Condition> conditions;        // path from the root
    std::optional<std::string> attribute;     // nullopt = leaf
    Network network;
    std::vector<std::unique_ptr<HierarchyNode>> children;  // one per attribute value
    int train_subset_size = 0;
    bool degraded = false;  // made a leaf because its subset was untrainable

    bool is_leaf() const { return !attribute.has_value(); }
};

enum class HierarchyKind { hierarchical, flat, random_tree };

std::string hierarchy_kind_name(HierarchyKind k);
HierarchyKind parse_hierarchy_kind(const std::string& s);

struct Hierarchy {
    AttributeSchema schema;
    int feature_dim = 0;
    BuildConfig config;
    HierarchyKind kind = HierarchyKind::hierarchical;
    std::uint64_t tree_seed = 0;  // random-tree draw seed
    bool trained = false;
    std::unique_ptr<HierarchyNode> root;

    Hierarchy clone() const;
};

// Weakly-correlated candidate selection: eligible attributes are unidentified,
// supported, and have max conditional value-probability <= weak_band_high
// (for binary attributes this is exactly membership of both values in
// [1 - weak_band_high, weak_band_high]). Returns the best-ranked candidate.
std::optional<std::string> select_next_attribute(const DifficultyRank& rank,
                                                 const CorrelationTable& table,
                                                 const std::set<std::string>& identified,
                                                 const BuildConfig& config);

struct BuildLog;

// Recursive structure derivation: root takes the top-ranked attribute, every
// deeper node recomputes correlations on its conditioned subset and applies
// select_next_attribute. A node becomes a leaf when no candidate remains, the
// path reaches max_depth nodes, or its subset drops below min_node_samples.
Hierarchy build_structure(const Dataset& train, const BuildConfig& config,
                          std::vector<std::string>* diagnostics = nullptr, BuildLog* log = nullptr);

// Ablation: identical stopping rules, attribute picked uniformly at random
// from the unidentified set (rank and correlations ignored).
Hierarchy build_random_tree(const Dataset& train, const BuildConfig& config, std::uint64_t tree_seed,
                            BuildLog* log = nullptr);

// Single-node baseline carrying one embedding network over the full gallery.
Hierarchy make_flat_hierarchy(const AttributeSchema& schema, int feature_dim,
                              const std::vector<int>& hidden_layers, int embedding_dim,
                              const BuildConfig& config);

// ---------------------------------------------------------------------------
// per-node architecture search

struct ArchCandidate {
    int layers = 0;
    double accuracy = 0.0;           // mean of reID mAP and attribute accuracy
    std::uint64_t memory_bytes = 0;  // CostModel param_bytes
    std::optional<double> delta_ad;  // toward the next candidate
};

struct ArchSearchRecord {
    std::string node_id;
    std::vector<ArchCandidate> candidates;
    int selected_layers = 0;
    std::string note;
};

// Pure diminishing-returns rule on an (accuracy, memory) curve: grows while
// delta_ad stays at or above the threshold, selects the depth before the
// first drop. Returns an index into the curve.
std::size_t select_depth_from_curve(const std::vector<std::pair<double, std::uint64_t>>& curve,
                                    double threshold);

struct TrainParams {
    TripletConfig triplet;
    HeadConfig head;
};

// Grows hidden-layer count one at a time with quick-trained candidates scored
// on a held-out 20% of the node subset.
NetworkSpec search_architecture(const std::vector<TrainSample>& node_samples, int input_dim,
                                int num_classes, const BuildConfig& config,
                                const TrainParams& params, std::uint64_t seed,
                                ArchSearchRecord* record = nullptr);

// ---------------------------------------------------------------------------
// root-down training

struct NodeLogEntry {
    std::string node_id;
    std::vector<Condition> conditions;
    int subset_size = 0;
    std::optional<std::string> chosen_attribute;
    CorrelationTable correlation;  // empty for random trees
    ArchSearchRecord arch;
    double triplet_loss = 0.0;
    int triplet_epochs = 0;
    double head_accuracy_train = -1.0;
};

struct BuildLog {
    DifficultyRank rank;
    std::vector<NodeLogEntry> nodes;
};

struct HierarchyTrainOptions {
    // <= 0 runs the architecture search; otherwise every node gets this many
    // hidden layers of config.hidden_width
    int fixed_layers = 0;
};

// Trains the skeleton root-down: triplet phase on each node's conditioned
// subset, then a frozen-body cross-entropy head phase at internal nodes.
// Children consume the parent's hidden activations; ancestors are final
// (and therefore frozen) before any descendant trains.
void train_hierarchy(Hierarchy& hierarchy, const Dataset& train, const TrainParams& params,
                     const HierarchyTrainOptions& options = {}, BuildLog* log = nullptr,
                     std::vector<std::string>* diagnostics = nullptr);

}  // namespace hreid
