#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hreid/dataset.hpp"
#include "hreid/network.hpp"
#include "hreid/treebuild.hpp"

namespace hreid {

struct RouteDecision {
    std::string attribute;
    int value_index = 0;
    std::vector<double> logits;
};

struct RouteTrace {
    std::vector<std::string> node_ids;  // root -> leaf
    std::vector<RouteDecision> decisions;
    std::vector<double> leaf_embedding;
    std::uint64_t flops_spent = 0;
};

// Argmax descent: each internal node classifies its attribute and forwards
// its hidden activation to the selected child. Ties go to the lowest value
// index.
RouteTrace route(const Hierarchy& hierarchy, const std::vector<double>& features);

enum class AttributeSource { ground_truth, predicted };

std::string attribute_source_name(AttributeSource s);
AttributeSource parse_attribute_source(const std::string& s);

struct GalleryEntry {
    std::string sample_id;
    std::string identity_id;
    std::string camera_id;
    std::vector<double> embedding;
};

struct GalleryIndex {
    AttributeSource source = AttributeSource::predicted;
    // one entry per leaf in depth-first order; empty partitions included
    std::vector<std::pair<std::string, std::vector<GalleryEntry>>> leaves;
    int predicted_fallbacks = 0;  // ground_truth samples with missing labels

    const std::vector<GalleryEntry>* find(const std::string& leaf_id) const;
    std::size_t total_entries() const;
};

// Files every gallery-split sample under one leaf. predicted follows argmax
// routing; ground_truth follows the labeled attribute values (embeddings are
// still computed along the walked path), falling back to the predicted
// decision at nodes where the label is missing.
GalleryIndex index_gallery(const Hierarchy& hierarchy, const Dataset& gallery, AttributeSource source,
                           std::vector<std::string>* diagnostics = nullptr);

struct Match {
    std::string sample_id;
    double distance = 0.0;
};

struct QueryResult {
    std::string query_id;
    std::vector<Match> matches;  // ascending distance, ties by sample_id
    std::uint64_t distances_computed = 0;
    RouteTrace route;
    bool fallback_used = false;
    std::string searched_node;  // leaf, or the ancestor used for fallback
};

// Routes the query and ranks only the arrival leaf's partition. An empty
// partition falls back to the union of partitions under the nearest ancestor
// with a non-empty subtree.
QueryResult query(const Hierarchy& hierarchy, const GalleryIndex& index, const std::string& query_id,
                  const std::vector<double>& features, int top_k);

// Embeds all gallery-split samples with one network (flat baseline).
std::vector<GalleryEntry> embed_gallery(const Network& net, const Dataset& gallery);

// Euclidean ranking against the entire gallery.
QueryResult flat_query(const Network& net, const std::vector<GalleryEntry>& gallery_embeddings,
                       const std::string& query_id, const std::vector<double>& features, int top_k);

}  // namespace hreid
