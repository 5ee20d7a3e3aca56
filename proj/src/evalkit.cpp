#include "hreid/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "hreid/errors.hpp"

namespace hreid {

InfoMap info_map(const Dataset& dataset, Split split) {
    InfoMap m;
    for (const auto& s : dataset.samples)
        if (s.split == split) m[s.sample_id] = {s.identity_id, s.camera_id};
    return m;
}

namespace {

const SampleInfo& info_or_throw(const InfoMap& m, const std::string& id, const char* what) {
    const auto it = m.find(id);
    if (it == m.end()) throw ValidationError(std::string(what) + " sample not found: " + id);
    return it->second;
}

// same-camera exclusion removes gallery items sharing both identity and
// camera with the query; filtering a sorted ranking preserves its order
std::vector<const Match*> effective_ranking(const QueryResult& r, const SampleInfo& q,
                                            const InfoMap& gallery, const MetricOptions& opts) {
    std::vector<const Match*> out;
    out.reserve(r.matches.size());
    for (const auto& m : r.matches) {
        const SampleInfo& g = info_or_throw(gallery, m.sample_id, "gallery");
        if (opts.same_camera_exclusion && g.identity_id == q.identity_id && g.camera_id == q.camera_id)
            continue;
        out.push_back(&m);
    }
    return out;
}

}  // namespace

double rank1(const std::vector<QueryResult>& results, const InfoMap& queries, const InfoMap& gallery,
             const MetricOptions& opts, std::vector<std::string>* diagnostics) {
    if (results.empty()) throw ValidationError("rank1: no query results");
    std::size_t hits = 0;
    for (const auto& r : results) {
        const SampleInfo& q = info_or_throw(queries, r.query_id, "query");
        const auto ranking = effective_ranking(r, q, gallery, opts);
        if (ranking.empty()) {
            if (diagnostics)
                diagnostics->push_back("query " + r.query_id + " returned no matches; counted as a miss");
            continue;
        }
        if (info_or_throw(gallery, ranking.front()->sample_id, "gallery").identity_id == q.identity_id)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double average_precision(const std::vector<char>& relevant_at_rank, std::int64_t total_relevant) {
    if (total_relevant <= 0) throw ValidationError("average_precision: no relevant items");
    double sum = 0.0;
    std::int64_t seen = 0;
    for (std::size_t r = 0; r < relevant_at_rank.size(); ++r) {
        if (relevant_at_rank[r]) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

double mean_average_precision(const std::vector<QueryResult>& results, const InfoMap& queries,
                              const InfoMap& gallery, const MetricOptions& opts,
                              std::vector<std::string>* diagnostics) {
    if (results.empty()) throw ValidationError("mean_average_precision: no query results");
    double ap_sum = 0.0;
    std::size_t counted = 0;
    for (const auto& r : results) {
        const SampleInfo& q = info_or_throw(queries, r.query_id, "query");
        // the denominator counts every relevant gallery item, including the
        // ones a wrong routing decision kept out of the searched partition
        std::int64_t total_relevant = 0;
        for (const auto& [gid, g] : gallery) {
            if (g.identity_id != q.identity_id) continue;
            if (opts.same_camera_exclusion && g.camera_id == q.camera_id) continue;
            ++total_relevant;
        }
        if (total_relevant == 0) {
            if (diagnostics)
                diagnostics->push_back("query " + r.query_id +
                                       " has no relevant gallery item; excluded from mAP");
            continue;
        }
        const auto ranking = effective_ranking(r, q, gallery, opts);
        std::vector<char> flags;
        flags.reserve(ranking.size());
        for (const Match* m : ranking)
            flags.push_back(info_or_throw(gallery, m->sample_id, "gallery").identity_id == q.identity_id ? 1
                                                                                                         : 0);
        ap_sum += average_precision(flags, total_relevant);
        ++counted;
    }
    if (counted == 0) throw ValidationError("mean_average_precision: every query lacked relevant items");
    return ap_sum / static_cast<double>(counted);
}

namespace {

void max_path_costs(const HierarchyNode& node, std::uint64_t flops, std::uint64_t bytes,
                    WorstCaseCost& out) {
    const CostModel c = cost_of(node.network.spec);
    flops += c.flops;
    bytes += c.param_bytes;
    if (node.is_leaf()) {
        out.flops = std::max(out.flops, flops);
        out.bytes = std::max(out.bytes, bytes);
        return;
    }
    for (const auto& child : node.children) max_path_costs(*child, flops, bytes, out);
}

}  // namespace

WorstCaseCost worst_case_cost(const Hierarchy& hierarchy) {
    if (!hierarchy.root) throw ValidationError("worst_case_cost: hierarchy has no root");
    WorstCaseCost out;
    max_path_costs(*hierarchy.root, 0, 0, out);
    return out;
}

std::uint64_t split_fingerprint(const Dataset& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& s : dataset.samples)
        if (s.split == Split::gallery) feed("g:" + s.sample_id);
    for (const auto& s : dataset.samples)
        if (s.split == Split::query) feed("q:" + s.sample_id);
    return h;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_fixed(double v, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

ReportRow make_row(const std::string& method, std::uint64_t bytes, std::uint64_t flops, const Metrics& m,
                   const MethodResult* flat) {
    ReportRow row;
    row.method = method;
    row.model_bytes = bytes;
    row.worst_case_flops = flops;
    row.metrics = m;
    if (flat) {
        row.reduction_bytes = 1.0 - static_cast<double>(bytes) / static_cast<double>(flat->model_bytes);
        row.reduction_flops =
            1.0 - static_cast<double>(flops) / static_cast<double>(flat->worst_case_flops);
        row.reduction_distances =
            1.0 - m.mean_distances_per_query / flat->metrics.mean_distances_per_query;
    }
    return row;
}

}  // namespace

CompareReport compare(const std::vector<MethodResult>& methods) {
    if (methods.empty()) throw ValidationError("compare: no methods");
    for (std::size_t i = 1; i < methods.size(); ++i)
        if (methods[i].split_fingerprint != methods[0].split_fingerprint)
            throw ValidationError("compare: method '" + methods[i].method +
                                  "' was evaluated on a different gallery/query split");

    const MethodResult* flat = nullptr;
    for (const auto& m : methods)
        if (m.kind == HierarchyKind::flat) flat = &m;

    CompareReport report;
    std::vector<const MethodResult*> randoms;
    for (const auto& m : methods) {
        if (m.kind == HierarchyKind::random_tree)
            randoms.push_back(&m);
        else
            report.rows.push_back(make_row(m.method, m.model_bytes, m.worst_case_flops, m.metrics, flat));
    }
    if (!randoms.empty()) {
        // aggregate row first (mean over seeds), per-seed rows appended
        double bytes = 0, flops = 0;
        Metrics mean;
        for (const MethodResult* r : randoms) {
            bytes += static_cast<double>(r->model_bytes);
            flops += static_cast<double>(r->worst_case_flops);
            mean.rank1 += r->metrics.rank1;
            mean.map_score += r->metrics.map_score;
            mean.mean_distances_per_query += r->metrics.mean_distances_per_query;
            mean.mean_flops_per_query += r->metrics.mean_flops_per_query;
        }
        const double n = static_cast<double>(randoms.size());
        mean.rank1 /= n;
        mean.map_score /= n;
        mean.mean_distances_per_query /= n;
        mean.mean_flops_per_query /= n;
        report.rows.push_back(make_row("random_tree_mean",
                                       static_cast<std::uint64_t>(std::llround(bytes / n)),
                                       static_cast<std::uint64_t>(std::llround(flops / n)), mean, flat));
        for (const MethodResult* r : randoms)
            report.rows.push_back(make_row(r->method, r->model_bytes, r->worst_case_flops, r->metrics, flat));
    }
    report.notes.push_back(
        "mAP counts relevant gallery items excluded by partitioning against the denominator");
    if (!flat) report.notes.push_back("no flat baseline given; reduction columns omitted");
    return report;
}

std::string report_csv(const CompareReport& report) {
    std::string out =
        "method,model_bytes,worst_case_flops,rank1,map,mean_distances,mean_flops,"
        "reduction_vs_flat_bytes,reduction_vs_flat_flops,reduction_vs_flat_distances\n";
    for (const auto& r : report.rows) {
        out += r.method;
        out += ',' + std::to_string(r.model_bytes);
        out += ',' + std::to_string(r.worst_case_flops);
        out += ',' + fmt_double(r.metrics.rank1);
        out += ',' + fmt_double(r.metrics.map_score);
        out += ',' + fmt_double(r.metrics.mean_distances_per_query);
        out += ',' + fmt_double(r.metrics.mean_flops_per_query);
        out += ',' + (r.reduction_bytes ? fmt_double(*r.reduction_bytes) : std::string());
        out += ',' + (r.reduction_flops ? fmt_double(*r.reduction_flops) : std::string());
        out += ',' + (r.reduction_distances ? fmt_double(*r.reduction_distances) : std::string());
        out += '\n';
    }
    return out;
}

std::string report_text(const CompareReport& report) {
    std::ostringstream os;
    os << "method                 model_bytes  worst_flops   rank-1     mAP   mean_dist  red_bytes  red_flops\n";
    for (const auto& r : report.rows) {
        std::string name = r.method;
        if (name.size() < 22) name.resize(22, ' ');
        os << name << "  " << r.model_bytes << '\t' << r.worst_case_flops << '\t'
           << fmt_fixed(r.metrics.rank1, 4) << "  " << fmt_fixed(r.metrics.map_score, 4) << "  "
           << fmt_fixed(r.metrics.mean_distances_per_query, 1) << '\t'
           << (r.reduction_bytes ? fmt_fixed(*r.reduction_bytes * 100.0, 1) + "%" : std::string("-")) << '\t'
           << (r.reduction_flops ? fmt_fixed(*r.reduction_flops * 100.0, 1) + "%" : std::string("-"))
           << '\n';
    }
    for (const auto& n : report.notes) os << "note: " << n << '\n';
    return os.str();
}

}  // namespace hreid
