#pragma once

#include <string>
#include <vector>

#include "hreid/evalkit.hpp"
#include "hreid/model_io.hpp"
#include "hreid/runconfig.hpp"

namespace hreid {

// Synthesizes (in memory) or loads the dataset the config names.
Dataset obtain_dataset(const RunConfig& config, std::vector<std::string>* warnings = nullptr);

enum class ModelKind { structured, random_tree, flat };

struct ModelBundle {
    Hierarchy hierarchy;
    BuildLog log;
    std::vector<std::string> diagnostics;
};

// Structure derivation + per-node architecture search + root-down training.
// random_seed only applies to ModelKind::random_tree; fixed_layers <= 0 runs
// the architecture search.
ModelBundle build_and_train(const RunConfig& config, const Dataset& dataset, ModelKind kind,
                            std::uint64_t random_seed = 0, int fixed_layers = 0);

struct EvalOutcome {
    GalleryIndex index;
    std::vector<QueryResult> results;  // full-depth rankings
    Metrics metrics;
    WorstCaseCost cost;
    std::uint64_t split_fp = 0;
    std::vector<std::string> diagnostics;
};

// Indexes the gallery split, runs every query-split sample at full ranking
// depth, and computes the metrics. jobs > 1 parallelizes the query loop
// without changing any output byte.
EvalOutcome evaluate_hierarchy(const RunConfig& config, const Hierarchy& hierarchy,
                               const Dataset& dataset, AttributeSource source, int jobs = 1);

MethodResult to_method_result(const std::string& method, const Hierarchy& hierarchy,
                              const EvalOutcome& outcome);

// JSON-lines dump of query results, truncated to top_k matches per query.
std::string query_results_jsonl(const std::vector<QueryResult>& results, int top_k);

std::string gallery_index_to_json(const GalleryIndex& index);
GalleryIndex gallery_index_from_json(const std::string& text);

// Combined JSON report; one section per attribute source that was evaluated.
std::string report_json(const std::vector<std::pair<std::string, CompareReport>>& sections);

}  // namespace hreid
