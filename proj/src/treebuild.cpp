#include "hreid/treebuild.hpp"

#include <algorithm>
#include <numeric>

#include "hreid/errors.hpp"
#include "hreid/losses.hpp"
#include "hreid/rng.hpp"

namespace hreid {

int DifficultyRank::rank_of(const std::string& attribute) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].attribute == attribute) return static_cast<int>(i);
    return -1;
}

double linear_probe_error(const Dataset& train, const std::string& attribute,
                          const ProbeConfig& config) {
    const int attr_idx = train.schema.index_of(attribute);
    if (attr_idx < 0) throw ValidationError("probe: unknown attribute " + attribute);
    const int n_classes =
        static_cast<int>(train.schema.attributes[static_cast<std::size_t>(attr_idx)].values.size());

    std::vector<const Sample*> labeled;
    for (const auto& s : train.samples)
        if (s.split == Split::train && s.attribute_values[static_cast<std::size_t>(attr_idx)] != kUnlabeled)
            labeled.push_back(&s);
    if (labeled.size() < 5) throw ValidationError("probe: too few labeled samples for " + attribute);

    Rng rng(derive_seed(config.seed, "probe:" + attribute));

    // the validation split is by identity: all of an identity's images share
    // its attribute values, so an image-level split would let the classifier
    // score by recognizing identities instead of the attribute
    std::map<std::string, std::vector<std::size_t>> by_identity;
    for (std::size_t i = 0; i < labeled.size(); ++i) by_identity[labeled[i]->identity_id].push_back(i);
    std::vector<std::string> identities;
    for (const auto& [id, _] : by_identity) identities.push_back(id);
    rng.shuffle(identities);
    const std::size_t n_val_ids = std::max<std::size_t>(
        1, static_cast<std::size_t>(config.holdout_fraction * static_cast<double>(identities.size())));
    std::vector<std::size_t> order;
    std::size_t n_train = 0;
    for (std::size_t k = 0; k < identities.size() - n_val_ids; ++k)
        for (std::size_t i : by_identity[identities[k]]) {
            order.push_back(i);
            ++n_train;
        }
    for (std::size_t k = identities.size() - n_val_ids; k < identities.size(); ++k)
        for (std::size_t i : by_identity[identities[k]]) order.push_back(i);
    const std::size_t n_val = order.size() - n_train;
    if (n_val == 0 || n_train == 0)
        throw ValidationError("probe: not enough identities to split for " + attribute);

    const int d = train.feature_dim;
    std::vector<double> w(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(d), 0.0);
    std::vector<double> b(static_cast<std::size_t>(n_classes), 0.0);

    auto logits_of = [&](const Sample& s) {
        std::vector<double> z(static_cast<std::size_t>(n_classes));
        for (int r = 0; r < n_classes; ++r) {
            double acc = b[static_cast<std::size_t>(r)];
            const double* wr = &w[static_cast<std::size_t>(r) * static_cast<std::size_t>(d)];
            for (int c = 0; c < d; ++c) acc += wr[c] * static_cast<double>(s.features[static_cast<std::size_t>(c)]);
            z[static_cast<std::size_t>(r)] = acc;
        }
        return z;
    };

    std::vector<std::size_t> train_order(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train_order);
        for (std::size_t start = 0; start < train_order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(train_order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const Sample& s = *labeled[train_order[i]];
                const int label = s.attribute_values[static_cast<std::size_t>(attr_idx)];
                const CrossEntropyResult ce = softmax_cross_entropy(logits_of(s), label);
                for (int r = 0; r < n_classes; ++r) {
                    const double g = ce.grad[static_cast<std::size_t>(r)];
                    double* gwr = &gw[static_cast<std::size_t>(r) * static_cast<std::size_t>(d)];
                    for (int c = 0; c < d; ++c)
                        gwr[c] += g * static_cast<double>(s.features[static_cast<std::size_t>(c)]);
                    gb[static_cast<std::size_t>(r)] += g;
                }
            }
            const double scale = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * gw[i];
            for (std::size_t i = 0; i < b.size(); ++i) b[i] -= scale * gb[i];
        }
    }

    std::size_t wrong = 0;
    for (std::size_t i = n_train; i < order.size(); ++i) {
        const Sample& s = *labeled[order[i]];
        const auto z = logits_of(s);
        const int pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        if (pred != s.attribute_values[static_cast<std::size_t>(attr_idx)]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(n_val);
}

DifficultyRank rank_attribute_difficulty(const Dataset& train, const ProbeConfig& config,
                                         std::vector<std::string>* diagnostics) {
    DifficultyRank rank;
    for (const auto& attr : train.schema.attributes) {
        const auto counts = attribute_histogram(split_subset(train, Split::train), attr.name);
        const int observed = static_cast<int>(std::count_if(
            counts.begin(), counts.end(), [](std::int64_t c) { return c > 0; }));
        if (observed < 2) {
            if (diagnostics)
                diagnostics->push_back("attribute '" + attr.name +
                                       "' has fewer than 2 observed values; excluded from rank");
            continue;
        }
        rank.entries.push_back({attr.name, linear_probe_error(train, attr.name, config)});
    }
    std::sort(rank.entries.begin(), rank.entries.end(), [](const DifficultyEntry& a, const DifficultyEntry& b) {
        if (a.validation_error != b.validation_error) return a.validation_error < b.validation_error;
        return a.attribute < b.attribute;
    });
    return rank;
}

CorrelationTable correlation_table(const Dataset& train, const std::vector<Condition>& conditions,
                                   const std::set<std::string>& candidates) {
    CorrelationTable table;
    table.path_conditions = conditions;
    const Dataset subset = filter_by_conditions(split_subset(train, Split::train), conditions);
    for (const auto& name : candidates) {
        const int idx = train.schema.index_of(name);
        if (idx < 0) throw ValidationError("correlation_table: unknown attribute " + name);
        const auto& def = train.schema.attributes[static_cast<std::size_t>(idx)];
        CorrelationRow row;
        row.probabilities.assign(def.values.size(), 0.0);
        std::int64_t total = 0;
        std::vector<std::int64_t> counts(def.values.size(), 0);
        for (const auto& s : subset.samples) {
            const int v = s.attribute_values[static_cast<std::size_t>(idx)];
            if (v == kUnlabeled) continue;
            ++counts[static_cast<std::size_t>(v)];
            ++total;
        }
        row.supported = total > 0;
        if (row.supported)
            for (std::size_t v = 0; v < counts.size(); ++v)
                row.probabilities[v] = static_cast<double>(counts[v]) / static_cast<double>(total);
        table.rows[name] = std::move(row);
    }
    return table;
}

void BuildConfig::validate() const {
    if (!(0.0 < weak_band_low && weak_band_low < weak_band_high && weak_band_high < 1.0))
        throw ValidationError("build config: need 0 < weak_band_low < weak_band_high < 1");
    if (min_node_samples < 0) throw ValidationError("build config: min_node_samples must be >= 0");
    if (max_depth < 1) throw ValidationError("build config: max_depth must be >= 1");
    if (arch_depth_min < 1 || arch_depth_max < arch_depth_min)
        throw ValidationError("build config: need 1 <= arch_depth_min <= arch_depth_max");
    if (arch_stop_threshold < 0) throw ValidationError("build config: arch_stop_threshold must be >= 0");
    if (hidden_width <= 0) throw ValidationError("build config: hidden_width must be positive");
    if (embedding_dim <= 0) throw ValidationError("build config: embedding_dim must be positive");
}

std::string hierarchy_kind_name(HierarchyKind k) {
    switch (k) {
        case HierarchyKind::hierarchical: return "hierarchical";
        case HierarchyKind::flat: return "flat";
        case HierarchyKind::random_tree: return "random_tree";
    }
    return "?";
}

HierarchyKind parse_hierarchy_kind(const std::string& s) {
    if (s == "hierarchical") return HierarchyKind::hierarchical;
    if (s == "flat") return HierarchyKind::flat;
    if (s == "random_tree") return HierarchyKind::random_tree;
    throw ValidationError("unknown hierarchy kind: " + s);
}

namespace {

std::unique_ptr<HierarchyNode> clone_node(const HierarchyNode& n) {
    auto out = std::make_unique<HierarchyNode>();
    out->node_id = n.node_id;
    out->conditions = n.conditions;
    out->attribute = n.attribute;
    out->network = n.network;
    out->train_subset_size = n.train_subset_size;
    out->degraded = n.degraded;
    for (const auto& c : n.children) out->children.push_back(clone_node(*c));
    return out;
}

}  // namespace

Hierarchy Hierarchy::clone() const {
    Hierarchy h;
    h.schema = schema;
    h.feature_dim = feature_dim;
    h.config = config;
    h.kind = kind;
    h.tree_seed = tree_seed;
    h.trained = trained;
    if (root) h.root = clone_node(*root);
    return h;
}

std::optional<std::string> select_next_attribute(const DifficultyRank& rank,
                                                 const CorrelationTable& table,
                                                 const std::set<std::string>& identified,
                                                 const BuildConfig& config) {
    std::optional<std::string> best;
    int best_rank = -1;
    for (const auto& [name, row] : table.rows) {
        if (identified.count(name)) continue;
        if (!row.supported) continue;
        const double max_p = *std::max_element(row.probabilities.begin(), row.probabilities.end());
        if (max_p > config.weak_band_high) continue;  // strongly (inversely) correlated: prunable
        const int r = rank.rank_of(name);
        if (r < 0) continue;  // excluded from the difficulty rank
        if (best_rank < 0 || r < best_rank) {
            best_rank = r;
            best = name;
        }
    }
    return best;
}

namespace {

struct StructureBuilder {
    const Dataset& train;
    const BuildConfig& config;
    const DifficultyRank* rank = nullptr;  // null for random trees
    Rng* rng = nullptr;                    // set for random trees
    BuildLog* log = nullptr;

    std::unique_ptr<HierarchyNode> build(const std::string& node_id, std::vector<Condition> conditions,
                                         const Dataset& subset, std::set<std::string> identified) {
        auto node = std::make_unique<HierarchyNode>();
        node->node_id = node_id;
        node->conditions = conditions;
        node->train_subset_size = static_cast<int>(subset.samples.size());

        NodeLogEntry* entry = nullptr;
        if (log) {
            log->nodes.push_back({});
            entry = &log->nodes.back();
            entry->node_id = node_id;
            entry->conditions = conditions;
            entry->subset_size = node->train_subset_size;
        }

        const int path_nodes = static_cast<int>(conditions.size()) + 1;
        const bool can_split = node->train_subset_size >= config.min_node_samples &&
                               path_nodes < config.max_depth;
        std::optional<std::string> chosen;
        if (can_split) {
            if (rng) {
                // random ablation: uniform over unidentified attributes
                std::vector<std::string> pool;
                for (const auto& a : train.schema.attributes)
                    if (!identified.count(a.name)) pool.push_back(a.name);
                if (!pool.empty()) chosen = pool[static_cast<std::size_t>(rng->below(pool.size()))];
            } else if (conditions.empty()) {
                // the easiest attribute sits at the root
                if (!rank->entries.empty()) chosen = rank->entries.front().attribute;
            } else {
                std::set<std::string> candidates;
                for (const auto& a : train.schema.attributes)
                    if (!identified.count(a.name)) candidates.insert(a.name);
                const CorrelationTable table = correlation_table(train, conditions, candidates);
                if (entry) entry->correlation = table;
                chosen = select_next_attribute(*rank, table, identified, config);
            }
        }
        if (entry) entry->chosen_attribute = chosen;
        if (!chosen) return node;

        node->attribute = chosen;
        identified.insert(*chosen);
        const auto& def = train.schema.at(*chosen);
        for (int v = 0; v < static_cast<int>(def.values.size()); ++v) {
            std::vector<Condition> child_conditions = conditions;
            child_conditions.push_back({*chosen, v});
            const Dataset child_subset = filter_by_conditions(subset, {{*chosen, v}});
            node->children.push_back(build(node_id + "." + std::to_string(v), std::move(child_conditions),
                                           child_subset, identified));
        }
        return node;
    }
};

Dataset train_split_or_throw(const Dataset& dataset) {
    Dataset train = split_subset(dataset, Split::train);
    if (train.samples.empty()) throw ValidationError("empty train split");
    return train;
}

}  // namespace

Hierarchy build_structure(const Dataset& dataset, const BuildConfig& config,
                          std::vector<std::string>* diagnostics, BuildLog* log) {
    config.validate();
    const Dataset train = train_split_or_throw(dataset);

    ProbeConfig probe;
    probe.seed = derive_seed(config.seed, "probe");
    const DifficultyRank rank = rank_attribute_difficulty(train, probe, diagnostics);
    if (log) log->rank = rank;

    Hierarchy h;
    h.schema = dataset.schema;
    h.feature_dim = dataset.feature_dim;
    h.config = config;
    h.kind = HierarchyKind::hierarchical;
    StructureBuilder builder{train, config, &rank, nullptr, log};
    h.root = builder.build("n0", {}, train, {});
    return h;
}

Hierarchy build_random_tree(const Dataset& dataset, const BuildConfig& config, std::uint64_t tree_seed,
                            BuildLog* log) {
    config.validate();
    const Dataset train = train_split_or_throw(dataset);

    Rng rng(derive_seed(tree_seed, "random-tree"));
    Hierarchy h;
    h.schema = dataset.schema;
    h.feature_dim = dataset.feature_dim;
    h.config = config;
    h.kind = HierarchyKind::random_tree;
    h.tree_seed = tree_seed;
    StructureBuilder builder{train, config, nullptr, &rng, log};
    h.root = builder.build("n0", {}, train, {});
    return h;
}

Hierarchy make_flat_hierarchy(const AttributeSchema& schema, int feature_dim,
                              const std::vector<int>& hidden_layers, int embedding_dim,
                              const BuildConfig& config) {
    NetworkSpec spec;
    spec.input_dim = feature_dim;
    spec.hidden_layers = hidden_layers;
    spec.embedding_dim = embedding_dim;
    spec.num_classes = 0;
    spec.validate();

    Hierarchy h;
    h.schema = schema;
    h.feature_dim = feature_dim;
    h.config = config;
    h.kind = HierarchyKind::flat;
    h.root = std::make_unique<HierarchyNode>();
    h.root->node_id = "n0";
    h.root->network.spec = spec;  // spec pre-assigned; weights set by training
    return h;
}

}  // namespace hreid
