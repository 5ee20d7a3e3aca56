#include "hreid/pipeline.hpp"

#include <algorithm>
#include <thread>

#include "hreid/errors.hpp"
#include "json.hpp"

namespace hreid {

Dataset obtain_dataset(const RunConfig& config, std::vector<std::string>* warnings) {
    config.validate();
    if (config.synth) return generate(*config.synth);
    return load_dataset_dir(*config.dataset_dir, {}, warnings);
}

ModelBundle build_and_train(const RunConfig& config, const Dataset& dataset, ModelKind kind,
                            std::uint64_t random_seed, int fixed_layers) {
    ModelBundle bundle;
    switch (kind) {
        case ModelKind::structured:
            bundle.hierarchy = build_structure(dataset, config.build, &bundle.diagnostics, &bundle.log);
            break;
        case ModelKind::random_tree:
            bundle.hierarchy = build_random_tree(dataset, config.build, random_seed, &bundle.log);
            break;
        case ModelKind::flat:
            bundle.hierarchy = make_flat_hierarchy(dataset.schema, dataset.feature_dim,
                                                   config.flat.hidden_layers, config.flat.embedding_dim,
                                                   config.build);
            break;
    }
    TrainParams params{config.triplet, config.head};
    HierarchyTrainOptions options;
    options.fixed_layers = fixed_layers;
    train_hierarchy(bundle.hierarchy, dataset, params, options, &bundle.log, &bundle.diagnostics);
    return bundle;
}

EvalOutcome evaluate_hierarchy(const RunConfig& config, const Hierarchy& hierarchy,
                               const Dataset& dataset, AttributeSource source, int jobs) {
    if (hierarchy.feature_dim != dataset.feature_dim)
        throw ValidationError("evaluate: model feature_dim " + std::to_string(hierarchy.feature_dim) +
                              " does not match dataset feature_dim " +
                              std::to_string(dataset.feature_dim));
    if (!(hierarchy.schema == dataset.schema))
        throw ValidationError("evaluate: model schema does not match dataset schema");

    EvalOutcome out;
    out.index = index_gallery(hierarchy, dataset, source, &out.diagnostics);
    out.split_fp = split_fingerprint(dataset);

    std::vector<const Sample*> queries;
    for (const auto& s : dataset.samples)
        if (s.split == Split::query) queries.push_back(&s);
    if (queries.empty()) throw ValidationError("evaluate: dataset has no query split");

    const int gallery_size = static_cast<int>(out.index.total_entries());
    const int full_depth = std::max(1, gallery_size);

    out.results.resize(queries.size());
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            out.results[i] = query(hierarchy, out.index, queries[i]->sample_id,
                                   features_as_double(*queries[i]), full_depth);
    };
    const int n_jobs = std::max(1, jobs);
    if (n_jobs == 1 || queries.size() < 2) {
        run_range(0, queries.size());
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (queries.size() + static_cast<std::size_t>(n_jobs) - 1) /
                                  static_cast<std::size_t>(n_jobs);
        for (std::size_t lo = 0; lo < queries.size(); lo += chunk)
            workers.emplace_back(run_range, lo, std::min(queries.size(), lo + chunk));
        for (auto& w : workers) w.join();
    }

    const InfoMap qinfo = info_map(dataset, Split::query);
    const InfoMap ginfo = info_map(dataset, Split::gallery);
    MetricOptions mopts{config.eval.same_camera_exclusion};
    out.metrics.rank1 = rank1(out.results, qinfo, ginfo, mopts, &out.diagnostics);
    out.metrics.map_score = mean_average_precision(out.results, qinfo, ginfo, mopts, &out.diagnostics);
    double dist_sum = 0.0, flop_sum = 0.0;
    for (const auto& r : out.results) {
        dist_sum += static_cast<double>(r.distances_computed);
        flop_sum += static_cast<double>(r.route.flops_spent);
    }
    out.metrics.mean_distances_per_query = dist_sum / static_cast<double>(out.results.size());
    out.metrics.mean_flops_per_query = flop_sum / static_cast<double>(out.results.size());
    out.cost = worst_case_cost(hierarchy);
    return out;
}

MethodResult to_method_result(const std::string& method, const Hierarchy& hierarchy,
                              const EvalOutcome& outcome) {
    MethodResult r;
    r.method = method;
    r.kind = hierarchy.kind;
    r.model_bytes = outcome.cost.bytes;
    r.worst_case_flops = outcome.cost.flops;
    r.metrics = outcome.metrics;
    r.split_fingerprint = outcome.split_fp;
    return r;
}

std::string query_results_jsonl(const std::vector<QueryResult>& results, int top_k) {
    std::string out;
    for (const auto& r : results) {
        nlohmann::json j;
        j["query_id"] = r.query_id;
        nlohmann::json matches = nlohmann::json::array();
        const std::size_t n = std::min(r.matches.size(), static_cast<std::size_t>(std::max(1, top_k)));
        for (std::size_t i = 0; i < n; ++i)
            matches.push_back({{"sample_id", r.matches[i].sample_id}, {"distance", r.matches[i].distance}});
        j["matches"] = std::move(matches);
        j["distances_computed"] = r.distances_computed;
        j["fallback_used"] = r.fallback_used;
        j["searched_node"] = r.searched_node;
        nlohmann::json route;
        route["nodes"] = r.route.node_ids;
        nlohmann::json decisions = nlohmann::json::array();
        for (const auto& d : r.route.decisions)
            decisions.push_back({{"attribute", d.attribute}, {"value_index", d.value_index}});
        route["decisions"] = std::move(decisions);
        route["flops"] = r.route.flops_spent;
        j["route"] = std::move(route);
        out += j.dump();
        out += '\n';
    }
    return out;
}

GalleryIndex gallery_index_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("index file: JSON parse failure: ") + e.what());
    }
    GalleryIndex index;
    index.source = parse_attribute_source(j.at("attribute_source").get<std::string>());
    index.predicted_fallbacks = j.at("predicted_fallbacks").get<int>();
    for (const auto& jl : j.at("leaves")) {
        std::vector<GalleryEntry> entries;
        for (const auto& je : jl.at("entries"))
            entries.push_back({je.at("sample_id").get<std::string>(),
                               je.at("identity_id").get<std::string>(),
                               je.at("camera_id").get<std::string>(),
                               je.at("embedding").get<std::vector<double>>()});
        index.leaves.emplace_back(jl.at("leaf").get<std::string>(), std::move(entries));
    }
    return index;
}

std::string report_json(const std::vector<std::pair<std::string, CompareReport>>& sections) {
    nlohmann::json j;
    for (const auto& [source, report] : sections) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : report.rows) {
            nlohmann::json jr;
            jr["method"] = r.method;
            jr["model_bytes"] = r.model_bytes;
            jr["worst_case_flops"] = r.worst_case_flops;
            jr["rank1"] = r.metrics.rank1;
            jr["map"] = r.metrics.map_score;
            jr["mean_distances"] = r.metrics.mean_distances_per_query;
            jr["mean_flops"] = r.metrics.mean_flops_per_query;
            jr["reduction_vs_flat_bytes"] = r.reduction_bytes ? nlohmann::json(*r.reduction_bytes)
                                                              : nlohmann::json(nullptr);
            jr["reduction_vs_flat_flops"] = r.reduction_flops ? nlohmann::json(*r.reduction_flops)
                                                              : nlohmann::json(nullptr);
            jr["reduction_vs_flat_distances"] = r.reduction_distances
                                                    ? nlohmann::json(*r.reduction_distances)
                                                    : nlohmann::json(nullptr);
            rows.push_back(std::move(jr));
        }
        j[source] = {{"rows", std::move(rows)}, {"notes", report.notes}};
    }
    return j.dump(2);
}

std::string gallery_index_to_json(const GalleryIndex& index) {
    nlohmann::json j;
    j["attribute_source"] = attribute_source_name(index.source);
    j["predicted_fallbacks"] = index.predicted_fallbacks;
    nlohmann::json leaves = nlohmann::json::array();
    for (const auto& [leaf_id, entries] : index.leaves) {
        nlohmann::json je = nlohmann::json::array();
        for (const auto& e : entries)
            je.push_back({{"sample_id", e.sample_id},
                          {"identity_id", e.identity_id},
                          {"camera_id", e.camera_id},
                          {"embedding", e.embedding}});
        leaves.push_back({{"leaf", leaf_id}, {"entries", std::move(je)}});
    }
    j["leaves"] = std::move(leaves);
    return j.dump();
}

}  // namespace hreid
