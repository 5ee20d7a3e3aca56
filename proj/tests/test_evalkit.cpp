#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "hreid/errors.hpp"
#include "hreid/evalkit.hpp"
#include "hreid/rng.hpp"
#include "oracles.hpp"

using namespace hreid;

namespace {

QueryResult make_result(const std::string& qid, std::vector<std::string> ranked_gallery) {
    QueryResult r;
    r.query_id = qid;
    double d = 1.0;
    for (auto& g : ranked_gallery) {
        r.matches.push_back({g, d});
        d += 1.0;
    }
    r.distances_computed = r.matches.size();
    return r;
}

InfoMap as_info(const std::map<std::string, std::string>& identities) {
    InfoMap m;
    for (const auto& [id, identity] : identities) m[id] = {identity, "c0"};
    return m;
}

}  // namespace

TEST_CASE("rank1 fixed cases") {
    const InfoMap gallery = as_info({{"g0", "A"}, {"g1", "B"}, {"g2", "C"}, {"g3", "D"}});

    SUBCASE("every query's duplicate ranks first: 1.0") {
        const InfoMap queries = as_info({{"q0", "A"}, {"q1", "B"}});
        const std::vector<QueryResult> results = {make_result("q0", {"g0", "g1"}),
                                                  make_result("q1", {"g1", "g0"})};
        CHECK(rank1(results, queries, gallery) == 1.0);
    }
    SUBCASE("exactly 3 of 4 correct at rank 1: 0.75") {
        const InfoMap queries = as_info({{"q0", "A"}, {"q1", "B"}, {"q2", "C"}, {"q3", "D"}});
        const std::vector<QueryResult> results = {
            make_result("q0", {"g0"}), make_result("q1", {"g1"}), make_result("q2", {"g2"}),
            make_result("q3", {"g0"})  // wrong identity at rank 1
        };
        CHECK(rank1(results, queries, gallery) == 0.75);
    }
    SUBCASE("a query with zero matches counts as a miss, with a diagnostic") {
        const InfoMap queries = as_info({{"q0", "A"}, {"q1", "B"}});
        std::vector<QueryResult> results = {make_result("q0", {"g0"}), make_result("q1", {})};
        std::vector<std::string> diag;
        CHECK(rank1(results, queries, gallery, {}, &diag) == 0.5);
        REQUIRE(diag.size() == 1);
        CHECK(diag[0].find("q1") != std::string::npos);
    }
}

TEST_CASE("average precision and mAP fixed cases") {
    SUBCASE("relevant at ranks 1 and 3 of 2 total: AP = 0.83333...") {
        const double ap = average_precision({1, 0, 1, 0}, 2);
        CHECK(std::abs(ap - (1.0 / 1.0 + 2.0 / 3.0) / 2.0) <= 1e-9);
    }
    SUBCASE("all relevant items ranked first: AP = 1.0") {
        CHECK(average_precision({1, 1, 0, 0}, 2) == 1.0);
    }
    SUBCASE("the single relevant item excluded by wrong routing: AP = 0") {
        // the relevant gallery item exists but never appears in the ranking
        const InfoMap gallery = as_info({{"g0", "A"}, {"g1", "B"}});
        const InfoMap queries = as_info({{"q0", "A"}});
        const std::vector<QueryResult> results = {make_result("q0", {"g1"})};
        CHECK(mean_average_precision(results, queries, gallery) == 0.0);
    }
    SUBCASE("a query with no relevant gallery item is excluded with a diagnostic") {
        const InfoMap gallery = as_info({{"g0", "A"}});
        const InfoMap queries = as_info({{"q0", "A"}, {"q1", "Z"}});
        const std::vector<QueryResult> results = {make_result("q0", {"g0"}), make_result("q1", {"g0"})};
        std::vector<std::string> diag;
        CHECK(mean_average_precision(results, queries, gallery, {}, &diag) == 1.0);
        REQUIRE(diag.size() == 1);
        CHECK(diag[0].find("q1") != std::string::npos);
    }
}

TEST_CASE("rank1 and mAP match the brute-force oracles on random fixtures") {
    Rng rng(909);
    for (int fixture = 0; fixture < 30; ++fixture) {
        const int n_gallery = 5 + static_cast<int>(rng.below(30));
        const int n_ids = 2 + static_cast<int>(rng.below(6));
        oracle::RankedFixture f;
        InfoMap gallery, queries;
        std::vector<std::string> gallery_ids;
        for (int g = 0; g < n_gallery; ++g) {
            const std::string gid = "g" + std::to_string(g);
            const std::string identity = "id" + std::to_string(rng.below(static_cast<std::uint64_t>(n_ids)));
            f.gallery_identity[gid] = identity;
            gallery[gid] = {identity, "c0"};
            gallery_ids.push_back(gid);
        }
        const int n_queries = 3 + static_cast<int>(rng.below(10));
        std::vector<QueryResult> results;
        for (int q = 0; q < n_queries; ++q) {
            const std::string qid = "q" + std::to_string(q);
            std::string identity;
            do {  // keep every query answerable so the oracle means align
                identity = "id" + std::to_string(rng.below(static_cast<std::uint64_t>(n_ids)));
                bool any = false;
                for (const auto& [g, gi] : f.gallery_identity) any = any || gi == identity;
                if (any) break;
            } while (true);
            f.query_identity[qid] = identity;
            queries[qid] = {identity, "c0"};
            std::vector<std::string> ranking = gallery_ids;
            rng.shuffle(ranking);
            // sometimes rank only a partition, as hierarchical search does
            if (rng.below(2)) ranking.resize(1 + rng.below(ranking.size()));
            f.rankings.emplace_back(qid, ranking);
            results.push_back(make_result(qid, ranking));
        }
        CHECK(rank1(results, queries, gallery) == doctest::Approx(oracle::rank1(f)).epsilon(1e-12));
        CHECK(mean_average_precision(results, queries, gallery) ==
              doctest::Approx(oracle::mean_ap(f)).epsilon(1e-12));
    }
}

TEST_CASE("mAP equals rank1 when every query has exactly one relevant item and full rankings") {
    Rng rng(910);
    for (int fixture = 0; fixture < 10; ++fixture) {
        InfoMap gallery, queries;
        std::vector<std::string> gallery_ids;
        const int n = 6;
        for (int g = 0; g < n; ++g) {
            const std::string gid = "g" + std::to_string(g);
            gallery[gid] = {"id" + std::to_string(g), "c0"};  // unique identities
            gallery_ids.push_back(gid);
        }
        std::vector<QueryResult> results;
        for (int q = 0; q < 4; ++q) {
            const std::string qid = "q" + std::to_string(q);
            queries[qid] = {"id" + std::to_string(q), "c0"};
            std::vector<std::string> ranking = gallery_ids;
            rng.shuffle(ranking);
            // full-depth ranking; exactly one relevant item somewhere in it
            QueryResult r = make_result(qid, ranking);
            results.push_back(r);
        }
        const double r1 = rank1(results, queries, gallery);
        const double map = mean_average_precision(results, queries, gallery);
        CHECK(map <= 1.0);
        if (r1 == 1.0) CHECK(map == 1.0);
        // with a single relevant item AP = 1/rank, so mAP = rank1 only when
        // every hit is at rank 1; check the exact relationship instead
        double expect = 0.0;
        for (const auto& r : results) {
            for (std::size_t k = 0; k < r.matches.size(); ++k) {
                if (gallery.at(r.matches[k].sample_id).identity_id == queries.at(r.query_id).identity_id) {
                    expect += 1.0 / static_cast<double>(k + 1);
                    break;
                }
            }
        }
        CHECK(map == doctest::Approx(expect / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("same-camera exclusion removes same-identity same-camera items before ranking") {
    InfoMap gallery;
    gallery["g0"] = {"A", "c1"};  // same identity, same camera as the query: excluded
    gallery["g1"] = {"B", "c1"};
    gallery["g2"] = {"A", "c2"};  // same identity, other camera: stays
    InfoMap queries;
    queries["q0"] = {"A", "c1"};

    const std::vector<QueryResult> results = {make_result("q0", {"g0", "g1", "g2"})};
    MetricOptions opts;
    opts.same_camera_exclusion = true;
    // without exclusion rank-1 hits g0; with it the ranking starts at g1
    CHECK(rank1(results, queries, gallery) == 1.0);
    CHECK(rank1(results, queries, gallery, opts) == 0.0);
    // mAP denominator shrinks to the cross-camera relevant item
    CHECK(mean_average_precision(results, queries, gallery, opts) ==
          doctest::Approx(1.0 / 2.0).epsilon(1e-12));
}

namespace {

Hierarchy cost_fixture() {
    // root with two children whose specs differ so the flops-max path and
    // the bytes-max path diverge: the wide child is bias-heavy (more bytes),
    // the deep child is product-heavy (more flops)
    Hierarchy h;
    h.feature_dim = 1;
    h.trained = true;
    auto root = std::make_unique<HierarchyNode>();
    root->node_id = "n0";
    root->attribute = "x";
    root->network.spec = {1, {1}, 1, 2};

    auto a = std::make_unique<HierarchyNode>();
    a->node_id = "n0.0";
    a->network.spec = {1, {100}, 1, 0};  // flops 400, bytes 1204
    auto b = std::make_unique<HierarchyNode>();
    b->node_id = "n0.1";
    b->network.spec = {1, {14, 14}, 1, 0};  // flops 448, bytes 1012
    root->children.push_back(std::move(a));
    root->children.push_back(std::move(b));
    h.root = std::move(root);
    h.schema.attributes = {{"x", {"0", "1"}}};
    return h;
}

}  // namespace

TEST_CASE("worst_case_cost") {
    SUBCASE("single node reports its own cost") {
        Hierarchy h;
        h.feature_dim = 8;
        h.trained = true;
        h.root = std::make_unique<HierarchyNode>();
        h.root->node_id = "n0";
        h.root->network.spec = {8, {4}, 2, 0};
        const WorstCaseCost c = worst_case_cost(h);
        CHECK(c.flops == cost_of(h.root->network.spec).flops);
        CHECK(c.bytes == cost_of(h.root->network.spec).param_bytes);
    }
    SUBCASE("the worst path is root plus the costlier child") {
        // the rule from the 3-node example (root 100, children 50/80 -> 180)
        // applied to real specs: flops(root) + max(flops(a), flops(b))
        const Hierarchy h = cost_fixture();
        const std::uint64_t root_f = cost_of(h.root->network.spec).flops;
        const std::uint64_t a_f = cost_of(h.root->children[0]->network.spec).flops;
        const std::uint64_t b_f = cost_of(h.root->children[1]->network.spec).flops;
        const WorstCaseCost c = worst_case_cost(h);
        CHECK(c.flops == root_f + std::max(a_f, b_f));
    }
    SUBCASE("flops and bytes maxima may come from different paths") {
        const Hierarchy h = cost_fixture();
        const auto a = cost_of(h.root->children[0]->network.spec);
        const auto b = cost_of(h.root->children[1]->network.spec);
        REQUIRE(b.flops > a.flops);              // the deep child wins on flops
        REQUIRE(a.param_bytes > b.param_bytes);  // the wide child wins on bytes
        const auto root_c = cost_of(h.root->network.spec);
        const WorstCaseCost c = worst_case_cost(h);
        CHECK(c.flops == root_c.flops + b.flops);
        CHECK(c.bytes == root_c.param_bytes + a.param_bytes);
    }
    SUBCASE("adding a node to the longest path never decreases either figure") {
        Hierarchy h = cost_fixture();
        const WorstCaseCost before = worst_case_cost(h);
        auto& wide = h.root->children[0];
        wide->attribute = "x";
        auto leaf = std::make_unique<HierarchyNode>();
        leaf->node_id = "n0.0.0";
        leaf->network.spec = {2, {2}, 2, 0};
        wide->children.push_back(std::move(leaf));
        auto leaf2 = std::make_unique<HierarchyNode>();
        leaf2->node_id = "n0.0.1";
        leaf2->network.spec = {2, {2}, 2, 0};
        wide->children.push_back(std::move(leaf2));
        const WorstCaseCost after = worst_case_cost(h);
        CHECK(after.flops >= before.flops);
        CHECK(after.bytes >= before.bytes);
    }
}

namespace {

MethodResult mk_method(const std::string& name, HierarchyKind kind, std::uint64_t bytes,
                       std::uint64_t flops, double r1, double map, double dist) {
    MethodResult m;
    m.method = name;
    m.kind = kind;
    m.model_bytes = bytes;
    m.worst_case_flops = flops;
    m.metrics = {r1, map, dist, static_cast<double>(flops)};
    m.split_fingerprint = 7;
    return m;
}

}  // namespace

TEST_CASE("compare") {
    SUBCASE("reduction arithmetic matches the 1 - ours/baseline convention") {
        // 14 MB vs 528 MB -> 97.3% smaller; 14 vs 77 -> 81.8%
        const std::vector<MethodResult> methods = {
            mk_method("hierarchical", HierarchyKind::hierarchical, 14, 100, 0.8, 0.7, 10.0),
            mk_method("flat", HierarchyKind::flat, 528, 1000, 0.85, 0.75, 100.0),
        };
        const CompareReport rep = compare(methods);
        REQUIRE(rep.rows.size() == 2);
        CHECK(*rep.rows[0].reduction_bytes == doctest::Approx(1.0 - 14.0 / 528.0).epsilon(1e-12));
        CHECK(std::abs(*rep.rows[0].reduction_bytes - 0.973) < 5e-4);

        const std::vector<MethodResult> methods2 = {
            mk_method("hierarchical", HierarchyKind::hierarchical, 14, 100, 0.8, 0.7, 10.0),
            mk_method("flat", HierarchyKind::flat, 77, 1000, 0.85, 0.75, 100.0),
        };
        CHECK(*compare(methods2).rows[0].reduction_bytes ==
              doctest::Approx(1.0 - 14.0 / 77.0).epsilon(1e-12));
    }
    SUBCASE("a method compared with itself reduces by 0% on every column") {
        const std::vector<MethodResult> methods = {
            mk_method("flat", HierarchyKind::flat, 100, 1000, 0.9, 0.8, 50.0),
        };
        const CompareReport rep = compare(methods);
        CHECK(*rep.rows[0].reduction_bytes == 0.0);
        CHECK(*rep.rows[0].reduction_flops == 0.0);
        CHECK(*rep.rows[0].reduction_distances == 0.0);
    }
    SUBCASE("random-tree rows aggregate into a mean row with per-seed rows appended") {
        const std::vector<MethodResult> methods = {
            mk_method("hierarchical", HierarchyKind::hierarchical, 10, 100, 0.9, 0.8, 10.0),
            mk_method("flat", HierarchyKind::flat, 100, 1000, 0.9, 0.8, 100.0),
            mk_method("random_tree:1", HierarchyKind::random_tree, 20, 200, 0.6, 0.5, 30.0),
            mk_method("random_tree:2", HierarchyKind::random_tree, 40, 400, 0.8, 0.7, 50.0),
        };
        const CompareReport rep = compare(methods);
        REQUIRE(rep.rows.size() == 5);
        CHECK(rep.rows[2].method == "random_tree_mean");
        CHECK(rep.rows[2].model_bytes == 30);
        CHECK(rep.rows[2].worst_case_flops == 300);
        CHECK(rep.rows[2].metrics.rank1 == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(rep.rows[3].method == "random_tree:1");
        CHECK(rep.rows[4].method == "random_tree:2");
        const std::string csv = report_csv(rep);
        CHECK(csv.find("random_tree_mean") != std::string::npos);
        CHECK(csv.rfind("method,model_bytes,worst_case_flops,rank1,map,mean_distances,mean_flops", 0) == 0);
    }
    SUBCASE("mismatched gallery/query splits are rejected") {
        std::vector<MethodResult> methods = {
            mk_method("hierarchical", HierarchyKind::hierarchical, 10, 100, 0.9, 0.8, 10.0),
            mk_method("flat", HierarchyKind::flat, 100, 1000, 0.9, 0.8, 100.0),
        };
        methods[1].split_fingerprint = 8;
        CHECK_THROWS_AS(compare(methods), ValidationError);
    }
}
