#include "hreid/engine.hpp"

#include <algorithm>

#include "hreid/errors.hpp"
#include "hreid/losses.hpp"

namespace hreid {

std::string attribute_source_name(AttributeSource s) {
    return s == AttributeSource::ground_truth ? "ground_truth" : "predicted";
}

AttributeSource parse_attribute_source(const std::string& s) {
    if (s == "ground_truth") return AttributeSource::ground_truth;
    if (s == "predicted") return AttributeSource::predicted;
    throw ValidationError("unknown attribute source: " + s);
}

namespace {

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return best;
}

// walk the tree from the root; decide() picks the child index at each
// internal node from the forward result of that node
template <class DecideFn>
RouteTrace walk(const Hierarchy& h, const std::vector<double>& features, DecideFn&& decide) {
    if (!h.root) throw ValidationError("route: hierarchy has no root");
    RouteTrace trace;
    const HierarchyNode* node = h.root.get();
    std::vector<double> x = features;
    for (;;) {
        if (static_cast<int>(x.size()) != node->network.spec.input_dim)
            throw ValidationError("route: input dimension " + std::to_string(x.size()) +
                                  " does not match node " + node->node_id);
        trace.node_ids.push_back(node->node_id);
        const ForwardResult fr = forward(node->network, x);
        trace.flops_spent += cost_of(node->network.spec).flops;
        if (node->is_leaf()) {
            trace.leaf_embedding = fr.embedding;
            return trace;
        }
        const int child = decide(*node, fr);
        trace.decisions.push_back({*node->attribute, child, fr.logits});
        x = fr.hidden;
        node = node->children[static_cast<std::size_t>(child)].get();
    }
}

}  // namespace

RouteTrace route(const Hierarchy& hierarchy, const std::vector<double>& features) {
    return walk(hierarchy, features,
                [](const HierarchyNode&, const ForwardResult& fr) { return argmax_lowest(fr.logits); });
}

const std::vector<GalleryEntry>* GalleryIndex::find(const std::string& leaf_id) const {
    for (const auto& [id, entries] : leaves)
        if (id == leaf_id) return &entries;
    return nullptr;
}

std::size_t GalleryIndex::total_entries() const {
    std::size_t n = 0;
    for (const auto& [id, entries] : leaves) n += entries.size();
    return n;
}

namespace {

void collect_leaf_ids(const HierarchyNode& node, std::vector<std::string>& out) {
    if (node.is_leaf()) {
        out.push_back(node.node_id);
        return;
    }
    for (const auto& c : node.children) collect_leaf_ids(*c, out);
}

const HierarchyNode* find_node(const HierarchyNode& node, const std::string& id) {
    if (node.node_id == id) return &node;
    for (const auto& c : node.children)
        if (const HierarchyNode* f = find_node(*c, id)) return f;
    return nullptr;
}

}  // namespace

GalleryIndex index_gallery(const Hierarchy& hierarchy, const Dataset& gallery, AttributeSource source,
                           std::vector<std::string>* diagnostics) {
    if (!hierarchy.trained) throw ValidationError("index_gallery: hierarchy is not trained");
    GalleryIndex index;
    index.source = source;
    std::vector<std::string> leaf_ids;
    collect_leaf_ids(*hierarchy.root, leaf_ids);
    for (const auto& id : leaf_ids) index.leaves.emplace_back(id, std::vector<GalleryEntry>{});

    auto slot = [&](const std::string& leaf_id) -> std::vector<GalleryEntry>& {
        for (auto& [id, entries] : index.leaves)
            if (id == leaf_id) return entries;
        throw std::runtime_error("index_gallery: unknown leaf " + leaf_id);
    };

    for (const auto& s : gallery.samples) {
        if (s.split != Split::gallery) continue;
        const std::vector<double> features = features_as_double(s);
        bool used_prediction = false;
        RouteTrace trace;
        if (source == AttributeSource::predicted) {
            trace = route(hierarchy, features);
        } else {
            trace = walk(hierarchy, features, [&](const HierarchyNode& node, const ForwardResult& fr) {
                const int attr_idx = gallery.schema.index_of(*node.attribute);
                const int label = s.attribute_values[static_cast<std::size_t>(attr_idx)];
                if (label == kUnlabeled) {
                    used_prediction = true;
                    return argmax_lowest(fr.logits);
                }
                return label;
            });
            if (used_prediction) {
                ++index.predicted_fallbacks;
                if (diagnostics)
                    diagnostics->push_back("gallery sample " + s.sample_id +
                                           " missing labels; routed by prediction");
            }
        }
        slot(trace.node_ids.back()).push_back({s.sample_id, s.identity_id, s.camera_id, trace.leaf_embedding});
    }
    return index;
}

namespace {

std::vector<Match> rank_entries(const std::vector<const GalleryEntry*>& candidates,
                                const std::vector<double>& emb, int top_k) {
    std::vector<Match> matches;
    matches.reserve(candidates.size());
    for (const GalleryEntry* e : candidates)
        matches.push_back({e->sample_id, euclidean_distance(emb, e->embedding)});
    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.sample_id < b.sample_id;
    });
    if (static_cast<int>(matches.size()) > top_k) matches.resize(static_cast<std::size_t>(top_k));
    return matches;
}

}  // namespace

QueryResult query(const Hierarchy& hierarchy, const GalleryIndex& index, const std::string& query_id,
                  const std::vector<double>& features, int top_k) {
    if (top_k < 1) throw ValidationError("query: top_k must be >= 1");
    if (!hierarchy.trained) throw ValidationError("query: hierarchy is not trained");

    QueryResult result;
    result.query_id = query_id;
    result.route = route(hierarchy, features);

    const std::string leaf_id = result.route.node_ids.back();
    std::vector<const GalleryEntry*> candidates;
    const std::vector<GalleryEntry>* partition = index.find(leaf_id);
    if (partition && !partition->empty()) {
        for (const auto& e : *partition) candidates.push_back(&e);
        result.searched_node = leaf_id;
    } else {
        // empty arrival partition: union of partitions under the nearest
        // ancestor with a non-empty subtree
        for (auto it = result.route.node_ids.rbegin() + 1; it != result.route.node_ids.rend(); ++it) {
            const HierarchyNode* anc = find_node(*hierarchy.root, *it);
            std::vector<std::string> subtree_leaves;
            collect_leaf_ids(*anc, subtree_leaves);
            for (const auto& lid : subtree_leaves) {
                const std::vector<GalleryEntry>* part = index.find(lid);
                if (part)
                    for (const auto& e : *part) candidates.push_back(&e);
            }
            if (!candidates.empty()) {
                result.fallback_used = true;
                result.searched_node = *it;
                break;
            }
        }
        if (candidates.empty()) {
            // entirely empty gallery
            result.fallback_used = true;
            result.searched_node = hierarchy.root->node_id;
        }
    }

    result.distances_computed = candidates.size();
    result.matches = rank_entries(candidates, result.route.leaf_embedding, top_k);
    return result;
}

std::vector<GalleryEntry> embed_gallery(const Network& net, const Dataset& gallery) {
    std::vector<GalleryEntry> out;
    for (const auto& s : gallery.samples) {
        if (s.split != Split::gallery) continue;
        out.push_back({s.sample_id, s.identity_id, s.camera_id, forward(net, features_as_double(s)).embedding});
    }
    return out;
}

QueryResult flat_query(const Network& net, const std::vector<GalleryEntry>& gallery_embeddings,
                       const std::string& query_id, const std::vector<double>& features, int top_k) {
    if (top_k < 1) throw ValidationError("flat_query: top_k must be >= 1");
    QueryResult result;
    result.query_id = query_id;
    const ForwardResult fr = forward(net, features);
    result.route.node_ids.push_back("flat");
    result.route.leaf_embedding = fr.embedding;
    result.route.flops_spent = cost_of(net.spec).flops;
    result.searched_node = "flat";
    std::vector<const GalleryEntry*> candidates;
    candidates.reserve(gallery_embeddings.size());
    for (const auto& e : gallery_embeddings) candidates.push_back(&e);
    result.distances_computed = candidates.size();
    result.matches = rank_entries(candidates, fr.embedding, top_k);
    return result;
}

}  // namespace hreid
