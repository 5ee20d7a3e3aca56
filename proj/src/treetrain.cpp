#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "hreid/errors.hpp"
#include "hreid/evalkit.hpp"
#include "hreid/losses.hpp"
#include "hreid/rng.hpp"
#include "hreid/treebuild.hpp"

namespace hreid {

std::size_t select_depth_from_curve(const std::vector<std::pair<double, std::uint64_t>>& curve,
                                    double threshold) {
    if (curve.empty()) throw ValidationError("select_depth_from_curve: empty curve");
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const double da = curve[i + 1].first - curve[i].first;
        const double dm = static_cast<double>(curve[i + 1].second) - static_cast<double>(curve[i].second);
        if (dm <= 0.0) throw ValidationError("select_depth_from_curve: memory must strictly increase");
        if (da / dm < threshold) return i;
    }
    return curve.size() - 1;
}

namespace {

int count_identities(const std::vector<TrainSample>& samples) {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.identity);
    return static_cast<int>(ids.size());
}

// holdout mAP: each holdout sample with at least one same-identity peer
// queries the rest of the holdout
std::optional<double> holdout_map(const Network& net, const std::vector<TrainSample>& holdout) {
    std::vector<std::vector<double>> emb(holdout.size());
    for (std::size_t i = 0; i < holdout.size(); ++i) emb[i] = forward(net, holdout[i].input).embedding;

    double ap_sum = 0.0;
    int n_queries = 0;
    for (std::size_t q = 0; q < holdout.size(); ++q) {
        std::int64_t relevant = 0;
        for (std::size_t j = 0; j < holdout.size(); ++j)
            if (j != q && holdout[j].identity == holdout[q].identity) ++relevant;
        if (relevant == 0) continue;
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t j = 0; j < holdout.size(); ++j)
            if (j != q) ranked.emplace_back(euclidean_distance(emb[q], emb[j]), j);
        std::sort(ranked.begin(), ranked.end());
        std::vector<char> flags;
        flags.reserve(ranked.size());
        for (const auto& [d, j] : ranked) flags.push_back(holdout[j].identity == holdout[q].identity ? 1 : 0);
        ap_sum += average_precision(flags, relevant);
        ++n_queries;
    }
    if (n_queries == 0) return std::nullopt;
    return ap_sum / static_cast<double>(n_queries);
}

std::optional<double> holdout_accuracy(const Network& net, const std::vector<TrainSample>& holdout) {
    if (!net.has_head()) return std::nullopt;
    std::size_t correct = 0, total = 0;
    for (const auto& s : holdout) {
        if (s.label < 0) continue;
        const auto logits = forward(net, s.input).logits;
        const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (pred == s.label) ++correct;
        ++total;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(total);
}

NetworkSpec spec_for_depth(int input_dim, int layers, int num_classes, const BuildConfig& config) {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_layers.assign(static_cast<std::size_t>(layers), config.hidden_width);
    spec.embedding_dim = config.embedding_dim;
    spec.num_classes = num_classes;
    return spec;
}

}  // namespace

NetworkSpec search_architecture(const std::vector<TrainSample>& node_samples, int input_dim,
                                int num_classes, const BuildConfig& config, const TrainParams& params,
                                std::uint64_t seed, ArchSearchRecord* record) {
    config.validate();
    const NetworkSpec smallest = spec_for_depth(input_dim, config.arch_depth_min, num_classes, config);

    auto fallback = [&](const std::string& why) {
        if (record) {
            record->selected_layers = config.arch_depth_min;
            record->note = why;
        }
        return smallest;
    };

    if (config.arch_depth_min == config.arch_depth_max) return fallback("single candidate depth");
    if (node_samples.size() < 10) return fallback("too few samples for a search holdout");

    Rng rng(derive_seed(seed, "arch-split"));
    std::vector<std::size_t> order(node_samples.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t n_hold = std::max<std::size_t>(1, node_samples.size() / 5);
    std::vector<TrainSample> fit, hold;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < order.size() - n_hold ? fit : hold).push_back(node_samples[order[i]]);
    if (count_identities(fit) < 2) return fallback("degenerate identity distribution in search split");

    // quick-train budget: a quarter of the full schedule
    TrainParams quick = params;
    quick.triplet.max_epochs = std::max(5, params.triplet.max_epochs / 4);
    quick.head.epochs = std::max(5, params.head.epochs / 4);

    std::vector<ArchCandidate> candidates;
    std::size_t selected = 0;
    bool stopped = false;
    for (int layers = config.arch_depth_min; layers <= config.arch_depth_max; ++layers) {
        const NetworkSpec spec = spec_for_depth(input_dim, layers, num_classes, config);
        Network net = make_network(spec, derive_seed(seed, "arch-init"));
        TripletConfig tcfg = quick.triplet;
        tcfg.seed = derive_seed(seed, "arch-triplet");
        train_embedding(net, fit, tcfg);
        if (num_classes > 0) {
            HeadConfig hcfg = quick.head;
            hcfg.seed = derive_seed(seed, "arch-head");
            train_classifier_head(net, fit, hcfg);
        }

        const auto acc = holdout_accuracy(net, hold);
        const auto map = holdout_map(net, hold);
        if (!acc && !map) return fallback("holdout too degenerate to score candidates");
        double a = 0.0;
        int terms = 0;
        if (map) {
            a += *map;
            ++terms;
        }
        if (acc) {
            a += *acc;
            ++terms;
        }
        a /= static_cast<double>(terms);

        ArchCandidate cand;
        cand.layers = layers;
        cand.accuracy = a;
        cand.memory_bytes = cost_of(spec).param_bytes;
        candidates.push_back(cand);

        const std::size_t i = candidates.size() - 1;
        if (i > 0) {
            const double da = candidates[i].accuracy - candidates[i - 1].accuracy;
            const double dm = static_cast<double>(candidates[i].memory_bytes) -
                              static_cast<double>(candidates[i - 1].memory_bytes);
            candidates[i - 1].delta_ad = da / dm;
            if (da / dm < config.arch_stop_threshold) {
                selected = i - 1;  // the depth before diminishing returns
                stopped = true;
                break;
            }
        }
        selected = i;
    }
    (void)stopped;

    if (record) {
        record->candidates = candidates;
        record->selected_layers = candidates[selected].layers;
    }
    return spec_for_depth(input_dim, candidates[selected].layers, num_classes, config);
}

namespace {

struct NodeBatch {
    std::vector<const Sample*> samples;
    std::vector<std::vector<double>> inputs;
};

class HierarchyTrainer {
public:
    HierarchyTrainer(Hierarchy& h, const TrainParams& params, const HierarchyTrainOptions& options,
                     BuildLog* log, std::vector<std::string>* diagnostics)
        : h_(h), params_(params), options_(options), log_(log), diagnostics_(diagnostics) {}

    void run(const Dataset& train) {
        NodeBatch batch;
        for (const auto& s : train.samples) {
            batch.samples.push_back(&s);
            batch.inputs.push_back(features_as_double(s));
        }
        visit(*h_.root, batch);
        h_.trained = true;
    }

private:
    NodeLogEntry& log_entry(const std::string& node_id) {
        for (auto& e : log_->nodes)
            if (e.node_id == node_id) return e;
        log_->nodes.push_back({});
        log_->nodes.back().node_id = node_id;
        return log_->nodes.back();
    }

    void note(const std::string& msg) {
        if (diagnostics_) diagnostics_->push_back(msg);
    }

    void visit(HierarchyNode& node, const NodeBatch& batch) {
        std::set<std::string> ids;
        for (const Sample* s : batch.samples) ids.insert(s->identity_id);
        node.train_subset_size = static_cast<int>(batch.samples.size());

        if (ids.size() < 2) {
            // untrainable: degrade to a pass-through leaf with an
            // initialized but untrained embedding
            node.children.clear();
            node.attribute.reset();
            node.degraded = true;
            const int input_dim = batch.inputs.empty() ? input_dim_of(node) : static_cast<int>(batch.inputs[0].size());
            const NetworkSpec spec = spec_for_depth(input_dim, h_.config.arch_depth_min, 0, h_.config);
            node.network = make_network(spec, derive_seed(h_.config.seed, node.node_id + ":init"));
            note("node " + node.node_id + " degraded to pass-through leaf (fewer than 2 identities)");
            return;
        }

        const int attr_idx = node.is_leaf() ? -1 : h_.schema.index_of(*node.attribute);
        const int num_classes =
            node.is_leaf() ? 0
                           : static_cast<int>(h_.schema.attributes[static_cast<std::size_t>(attr_idx)].values.size());
        const int input_dim = static_cast<int>(batch.inputs[0].size());

        std::vector<TrainSample> train_samples(batch.samples.size());
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            train_samples[i].input = batch.inputs[i];
            train_samples[i].identity = batch.samples[i]->identity_id;
            train_samples[i].label =
                attr_idx < 0 ? -1 : batch.samples[i]->attribute_values[static_cast<std::size_t>(attr_idx)];
        }

        NetworkSpec spec;
        ArchSearchRecord arch;
        arch.node_id = node.node_id;
        if (!node.network.spec.hidden_layers.empty()) {
            spec = node.network.spec;  // pre-assigned (flat baseline)
            arch.selected_layers = static_cast<int>(spec.hidden_layers.size());
            arch.note = "pre-assigned spec";
        } else if (options_.fixed_layers > 0) {
            spec = spec_for_depth(input_dim, options_.fixed_layers, num_classes, h_.config);
            arch.selected_layers = options_.fixed_layers;
            arch.note = "fixed layer count";
        } else {
            spec = search_architecture(train_samples, input_dim, num_classes, h_.config, params_,
                                       derive_seed(h_.config.seed, node.node_id + ":arch"), &arch);
        }

        Network net = make_network(spec, derive_seed(h_.config.seed, node.node_id + ":init"));
        TripletConfig tcfg = params_.triplet;
        tcfg.seed = derive_seed(h_.config.seed, node.node_id + ":triplet");
        const TrainStats tstats = train_embedding(net, train_samples, tcfg);

        double head_acc = -1.0;
        if (num_classes > 0) {
            HeadConfig hcfg = params_.head;
            hcfg.seed = derive_seed(h_.config.seed, node.node_id + ":head");
            train_classifier_head(net, train_samples, hcfg);
            std::size_t correct = 0;
            for (const auto& ts : train_samples) {
                const auto logits = forward(net, ts.input).logits;
                const int pred =
                    static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
                if (pred == ts.label) ++correct;
            }
            head_acc = static_cast<double>(correct) / static_cast<double>(train_samples.size());
        }
        node.network = std::move(net);

        if (log_) {
            NodeLogEntry& e = log_entry(node.node_id);
            e.conditions = node.conditions;
            e.subset_size = node.train_subset_size;
            e.chosen_attribute = node.attribute;
            e.arch = arch;
            e.triplet_loss = tstats.final_loss;
            e.triplet_epochs = tstats.epochs_run;
            e.head_accuracy_train = head_acc;
        }

        if (node.is_leaf()) return;

        // hand each child the hidden activations of its conditioned subset;
        // this node is final from here on, so ancestors of the child stay
        // frozen by construction
        for (std::size_t v = 0; v < node.children.size(); ++v) {
            NodeBatch child_batch;
            for (std::size_t i = 0; i < batch.samples.size(); ++i) {
                if (batch.samples[i]->attribute_values[static_cast<std::size_t>(attr_idx)] !=
                    static_cast<int>(v))
                    continue;
                child_batch.samples.push_back(batch.samples[i]);
                child_batch.inputs.push_back(forward(node.network, batch.inputs[i]).hidden);
            }
            visit(*node.children[v], child_batch);
        }
    }

    int input_dim_of(const HierarchyNode& node) const {
        return node.conditions.empty() ? h_.feature_dim : h_.config.hidden_width;
    }

    Hierarchy& h_;
    const TrainParams& params_;
    const HierarchyTrainOptions& options_;
    BuildLog* log_;
    std::vector<std::string>* diagnostics_;
};

}  // namespace

void train_hierarchy(Hierarchy& hierarchy, const Dataset& train, const TrainParams& params,
                     const HierarchyTrainOptions& options, BuildLog* log,
                     std::vector<std::string>* diagnostics) {
    if (!hierarchy.root) throw ValidationError("train_hierarchy: hierarchy has no root");
    hierarchy.config.validate();
    params.triplet.validate();
    params.head.validate();
    const Dataset train_ds = split_subset(train, Split::train);
    if (train_ds.samples.empty()) throw ValidationError("train_hierarchy: empty train split");
    std::set<std::string> ids;
    for (const auto& s : train_ds.samples) ids.insert(s.identity_id);
    if (ids.size() < 2) throw ValidationError("train_hierarchy: fewer than 2 identities in the train split");

    BuildLog scratch;
    HierarchyTrainer trainer(hierarchy, params, options, log ? log : &scratch, diagnostics);
    trainer.run(train_ds);
}

}  // namespace hreid
