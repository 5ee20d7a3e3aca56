#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hreid/engine.hpp"
#include "hreid/treebuild.hpp"

namespace hreid {

struct Metrics {
    double rank1 = 0.0;
    double map_score = 0.0;
    double mean_distances_per_query = 0.0;
    double mean_flops_per_query = 0.0;
};

struct SampleInfo {
    std::string identity_id;
    std::string camera_id;
};

// sample_id -> identity/camera, for queries and for the full gallery
using InfoMap = std::map<std::string, SampleInfo>;

InfoMap info_map(const Dataset& dataset, Split split);

struct MetricOptions {
    // standard protocol: gallery images sharing the query's identity AND
    // camera are removed before ranking
    bool same_camera_exclusion = false;
};

// Fraction of queries whose top-ranked match shares the query identity.
// Queries with zero returned matches count as misses (with a diagnostic).
double rank1(const std::vector<QueryResult>& results, const InfoMap& queries, const InfoMap& gallery,
             const MetricOptions& opts = {}, std::vector<std::string>* diagnostics = nullptr);

// AP per query over the returned ranking, normalized by the number of
// relevant items in the whole gallery; relevant items excluded by the
// partitioning therefore count as misses. Queries with no relevant gallery
// item anywhere are excluded from the mean (with a diagnostic).
double mean_average_precision(const std::vector<QueryResult>& results, const InfoMap& queries,
                              const InfoMap& gallery, const MetricOptions& opts = {},
                              std::vector<std::string>* diagnostics = nullptr);

// Shared AP primitive: relevance flags in rank order plus the denominator.
double average_precision(const std::vector<char>& relevant_at_rank, std::int64_t total_relevant);

// Maximal root-leaf path sums, computed separately for FLOPs and bytes (the
// two maxima may come from different paths).
struct WorstCaseCost {
    std::uint64_t flops = 0;
    std::uint64_t bytes = 0;
};

WorstCaseCost worst_case_cost(const Hierarchy& hierarchy);

// ---------------------------------------------------------------------------
// cross-method comparison

struct MethodResult {
    std::string method;  // "hierarchical", "flat", "random_tree:<seed>"
    HierarchyKind kind = HierarchyKind::hierarchical;
    std::uint64_t model_bytes = 0;
    std::uint64_t worst_case_flops = 0;
    Metrics metrics;
    std::uint64_t split_fingerprint = 0;  // guards against mismatched gallery/query splits
};

struct ReportRow {
    std::string method;
    std::uint64_t model_bytes = 0;
    std::uint64_t worst_case_flops = 0;
    Metrics metrics;
    // 1 - method/flat, present when a flat baseline row exists
    std::optional<double> reduction_bytes;
    std::optional<double> reduction_flops;
    std::optional<double> reduction_distances;
};

struct CompareReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> notes;
};

// One row per method; random-tree results are aggregated into a mean row with
// the per-seed rows appended after it. Reductions are computed against the
// flat baseline as 1 - value/flat.
CompareReport compare(const std::vector<MethodResult>& methods);

std::string report_csv(const CompareReport& report);
std::string report_text(const CompareReport& report);

std::uint64_t split_fingerprint(const Dataset& dataset);

}  // namespace hreid
