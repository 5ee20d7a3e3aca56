#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "hreid/errors.hpp"
#include "hreid/losses.hpp"
#include "hreid/network.hpp"
#include "hreid/rng.hpp"
#include "hreid/training.hpp"
#include "oracles.hpp"

using namespace hreid;

TEST_CASE("forward shape contract and zero-weight case") {
    NetworkSpec spec{8, {16}, 4, 2};
    Network net = make_network(spec, 1);

    SUBCASE("output lengths (4, 2, 16)") {
        const ForwardResult r = forward(net, std::vector<double>(8, 0.5));
        CHECK(r.embedding.size() == 4);
        CHECK(r.logits.size() == 2);
        CHECK(r.hidden.size() == 16);
    }
    SUBCASE("all-zero weights and biases give a zero embedding") {
        for (auto& l : net.hidden) {
            std::fill(l.w.begin(), l.w.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
        std::fill(net.embed.w.begin(), net.embed.w.end(), 0.0);
        std::fill(net.embed.b.begin(), net.embed.b.end(), 0.0);
        const ForwardResult r = forward(net, {1, 2, 3, 4, 5, 6, 7, 8});
        for (double v : r.embedding) CHECK(v == 0.0);
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(forward(net, std::vector<double>(7, 0.0)), ValidationError);
    }
}

TEST_CASE("forward matches a hand-computed two-layer fixture") {
    // input 2 -> hidden [2] -> embedding 2, every weight set by hand
    NetworkSpec spec{2, {2}, 2, 0};
    Network net = make_network(spec, 1);
    net.hidden[0].w = {1.0, -1.0,   // h0 = relu( x0 - x1 + 0.5)
                       0.5, 0.25};  // h1 = relu(.5 x0 + .25 x1 - 1)
    net.hidden[0].b = {0.5, -1.0};
    net.embed.w = {2.0, 1.0,    // e0 = 2 h0 + h1 + 0.1
                   -1.0, 3.0};  // e1 = -h0 + 3 h1 - 0.2
    net.embed.b = {0.1, -0.2};

    const ForwardResult r = forward(net, {2.0, 1.0});
    // h = relu([2-1+0.5, 1+0.25-1]) = [1.5, 0.25]
    CHECK(r.hidden[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(r.hidden[1] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(r.embedding[0] == doctest::Approx(2 * 1.5 + 0.25 + 0.1).epsilon(1e-6));
    CHECK(r.embedding[1] == doctest::Approx(-1.5 + 3 * 0.25 - 0.2).epsilon(1e-6));

    // forward is pure: repeated calls agree bit-for-bit
    const ForwardResult r2 = forward(net, {2.0, 1.0});
    CHECK(r.embedding == r2.embedding);
    CHECK(r.hidden == r2.hidden);
}

TEST_CASE("cost_of follows the 2*fan_in*fan_out convention") {
    SUBCASE("worked example: flops 80, param bytes 184") {
        const CostModel c = cost_of({8, {4}, 2, 0});
        CHECK(c.flops == 80);
        CHECK(c.param_bytes == 184);
    }
    SUBCASE("doubling a hidden width strictly increases both fields") {
        const CostModel small = cost_of({8, {4}, 2, 0});
        const CostModel big = cost_of({8, {8}, 2, 0});
        CHECK(big.flops > small.flops);
        CHECK(big.param_bytes > small.param_bytes);
    }
    SUBCASE("the head adds exactly 2 * embedding_dim * classes flops") {
        const CostModel without = cost_of({8, {4}, 2, 0});
        const CostModel with = cost_of({8, {4}, 2, 2});
        CHECK(with.flops - without.flops == 2 * 2 * 2);
    }
}

TEST_CASE("triplet loss fixed cases") {
    SUBCASE("all embeddings identical: loss equals the margin") {
        const std::vector<std::vector<double>> emb(4, {1.0, 2.0});
        const auto r = triplet_loss_batch_hard(emb, {"a", "a", "b", "b"}, 0.3);
        CHECK(r.loss == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("well-separated clusters: loss 0") {
        const std::vector<std::vector<double>> emb = {{0, 0}, {0.1, 0}, {100, 0}, {100.1, 0}};
        const auto r = triplet_loss_batch_hard(emb, {"a", "a", "b", "b"}, 1.0);
        CHECK(r.loss == 0.0);
        for (const auto& g : r.grad)
            for (double v : g) CHECK(v == 0.0);
    }
    SUBCASE("1-D batch (A,A,B,B) at (0,1,2,5) matches the brute-force oracle") {
        const std::vector<std::vector<double>> emb = {{0.0}, {1.0}, {2.0}, {5.0}};
        const std::vector<std::string> ids = {"A", "A", "B", "B"};
        const auto r = triplet_loss_batch_hard(emb, ids, 1.0);
        const auto o = oracle::triplet_batch_hard(emb, ids, 1.0);
        REQUIRE(o.has_value());
        CHECK(r.loss == doctest::Approx(o->loss).epsilon(1e-12));
    }
    SUBCASE("single identity is an error, not a silent zero") {
        const std::vector<std::vector<double>> emb = {{0.0}, {1.0}};
        CHECK_THROWS_AS(triplet_loss_batch_hard(emb, {"a", "a"}, 0.3), ValidationError);
    }
    SUBCASE("no valid anchor is an error") {
        // two singleton identities: every anchor lacks a positive
        const std::vector<std::vector<double>> emb = {{0.0}, {1.0}};
        CHECK_THROWS_AS(triplet_loss_batch_hard(emb, {"a", "b"}, 0.3), ValidationError);
    }
}

namespace {

struct RandomBatch {
    std::vector<std::vector<double>> emb;
    std::vector<std::string> ids;
};

// random batch with >= 2 identities and >= 2 samples for at least one of them
RandomBatch random_batch(Rng& rng, int max_size) {
    for (;;) {
        const int n = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_size - 2)));
        const int dim = 1 + static_cast<int>(rng.below(4));
        const int n_ids = 2 + static_cast<int>(rng.below(3));
        RandomBatch b;
        for (int i = 0; i < n; ++i) {
            std::vector<double> e(static_cast<std::size_t>(dim));
            for (auto& v : e) v = rng.uniform(-2.0, 2.0);
            b.emb.push_back(std::move(e));
            b.ids.push_back("id" + std::to_string(rng.below(static_cast<std::uint64_t>(n_ids))));
        }
        std::map<std::string, int> counts;
        for (const auto& id : b.ids) ++counts[id];
        bool has_pair = false;
        for (const auto& [id, c] : counts)
            if (c >= 2) has_pair = true;
        if (counts.size() >= 2 && has_pair) return b;
    }
}

}  // namespace

TEST_CASE("triplet loss equals the brute-force oracle on random batches <= 12") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const RandomBatch b = random_batch(rng, 12);
        const auto o = oracle::triplet_batch_hard(b.emb, b.ids, 0.5);
        REQUIRE(o.has_value());
        const auto r = triplet_loss_batch_hard(b.emb, b.ids, 0.5);
        CHECK(r.loss == doctest::Approx(o->loss).epsilon(1e-12));
        std::vector<int> active;
        for (std::size_t i = 0; i < r.anchors.size(); ++i)
            if (r.anchors[i] == AnchorStatus::active) active.push_back(static_cast<int>(i));
        CHECK(active == o->active);
    }
}

namespace {

// central finite differences on the triplet loss wrt one embedding component
double triplet_fd(const std::vector<std::vector<double>>& emb, const std::vector<std::string>& ids,
                  double margin, std::size_t i, std::size_t k, double h) {
    auto lo = emb, hi = emb;
    lo[i][k] -= h;
    hi[i][k] += h;
    return (triplet_loss_batch_hard(hi, ids, margin).loss -
            triplet_loss_batch_hard(lo, ids, margin).loss) /
           (2 * h);
}

bool hinge_has_slack(const std::vector<std::vector<double>>& emb, const std::vector<std::string>& ids,
                     double margin, double slack) {
    // every anchor's hinge must sit away from zero, and the hard pair picks
    // must be strict so the FD step cannot switch them
    for (std::size_t a = 0; a < emb.size(); ++a) {
        std::vector<double> pos, neg;
        for (std::size_t j = 0; j < emb.size(); ++j) {
            if (j == a) continue;
            (ids[j] == ids[a] ? pos : neg).push_back(oracle::dist(emb[a], emb[j]));
        }
        if (pos.empty() || neg.empty()) continue;
        std::sort(pos.begin(), pos.end());
        std::sort(neg.begin(), neg.end());
        const double hinge = margin + pos.back() - neg.front();
        if (std::abs(hinge) < slack) return false;
        if (pos.size() > 1 && pos.back() - pos[pos.size() - 2] < slack) return false;
        if (neg.size() > 1 && neg[1] - neg.front() < slack) return false;
        if (pos.back() < slack) return false;  // zero-distance kink
    }
    return true;
}

}  // namespace

TEST_CASE("triplet gradient matches central finite differences away from kinks") {
    Rng rng(777);
    int checked = 0;
    while (checked < 25) {
        const RandomBatch b = random_batch(rng, 8);
        if (!hinge_has_slack(b.emb, b.ids, 0.5, 1e-2)) continue;
        const auto r = triplet_loss_batch_hard(b.emb, b.ids, 0.5);
        if (r.loss == 0.0) continue;  // all-inactive batches have zero gradient everywhere
        ++checked;
        for (std::size_t i = 0; i < b.emb.size(); ++i) {
            for (std::size_t k = 0; k < b.emb[i].size(); ++k) {
                const double fd = triplet_fd(b.emb, b.ids, 0.5, i, k, 1e-6);
                const double an = r.grad[i][k];
                CHECK(std::abs(an - fd) <= 1e-4 * std::max({std::abs(an), std::abs(fd), 1e-3}));
            }
        }
    }
}

TEST_CASE("cross-entropy gradient matches central finite differences") {
    Rng rng(778);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        std::vector<double> logits(static_cast<std::size_t>(n));
        for (auto& v : logits) v = rng.uniform(-3.0, 3.0);
        const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const auto r = softmax_cross_entropy(logits, label);
        for (std::size_t k = 0; k < logits.size(); ++k) {
            auto lo = logits, hi = logits;
            lo[k] -= 1e-6;
            hi[k] += 1e-6;
            const double fd = (softmax_cross_entropy(hi, label).loss -
                               softmax_cross_entropy(lo, label).loss) /
                              2e-6;
            CHECK(std::abs(r.grad[k] - fd) <= 1e-4 * std::max({std::abs(r.grad[k]), std::abs(fd), 1e-3}));
        }
        // softmax probabilities recovered from the gradient sum to 1
        double sum = 0;
        for (std::size_t k = 0; k < logits.size(); ++k)
            sum += r.grad[k] + (static_cast<int>(k) == label ? 1.0 : 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

namespace {

// two identities in well-separated input clusters
std::vector<TrainSample> separable_pair(int per_id, double gap, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TrainSample> out;
    for (int i = 0; i < per_id; ++i) {
        TrainSample a;
        a.input = {rng.normal() * 0.1, rng.normal() * 0.1, -gap / 2 + rng.normal() * 0.1};
        a.identity = "a";
        a.label = 0;
        out.push_back(a);
        TrainSample b;
        b.input = {rng.normal() * 0.1, rng.normal() * 0.1, gap / 2 + rng.normal() * 0.1};
        b.identity = "b";
        b.label = 1;
        out.push_back(b);
    }
    return out;
}

}  // namespace

TEST_CASE("train_embedding drives the triplet loss to zero on separable data") {
    Network net = make_network({3, {8}, 4, 0}, 11);
    TripletConfig cfg;
    cfg.identities_per_batch = 2;
    cfg.images_per_identity = 4;
    cfg.max_epochs = 200;
    cfg.saturation_patience = 200;  // run the full budget
    cfg.seed = 5;
    const auto samples = separable_pair(8, 4.0, 3);
    const TrainStats stats = train_embedding(net, samples, cfg);
    CHECK(stats.final_loss < 0.05);
}

TEST_CASE("train_embedding validation and determinism") {
    SUBCASE("P = 1 rejected") {
        TripletConfig cfg;
        cfg.identities_per_batch = 1;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
    }
    SUBCASE("fewer than 2 identities rejected") {
        Network net = make_network({3, {4}, 2, 0}, 1);
        std::vector<TrainSample> samples(4);
        for (auto& s : samples) {
            s.input = {0, 0, 0};
            s.identity = "only";
        }
        TripletConfig cfg;
        CHECK_THROWS_AS(train_embedding(net, samples, cfg), ValidationError);
    }
    SUBCASE("same seed twice gives identical final weights") {
        TripletConfig cfg;
        cfg.identities_per_batch = 2;
        cfg.images_per_identity = 2;
        cfg.max_epochs = 20;
        cfg.seed = 9;
        const auto samples = separable_pair(6, 2.0, 4);
        Network a = make_network({3, {8}, 4, 0}, 2);
        Network b = make_network({3, {8}, 4, 0}, 2);
        train_embedding(a, samples, cfg);
        train_embedding(b, samples, cfg);
        CHECK(a == b);
    }
}

TEST_CASE("train_classifier_head freezes the body and fits separable classes") {
    Network net = make_network({3, {8}, 4, 2}, 21);
    const auto samples = separable_pair(20, 4.0, 6);

    TripletConfig tcfg;
    tcfg.identities_per_batch = 2;
    tcfg.images_per_identity = 4;
    tcfg.max_epochs = 60;
    tcfg.seed = 13;
    train_embedding(net, samples, tcfg);

    const std::uint64_t body_before = body_fingerprint(net);
    HeadConfig hcfg;
    hcfg.epochs = 100;
    hcfg.seed = 14;
    train_classifier_head(net, samples, hcfg);

    CHECK(body_fingerprint(net) == body_before);
    CHECK(net.body_frozen);

    std::size_t correct = 0;
    for (const auto& s : samples) {
        const auto logits = forward(net, s.input).logits;
        if ((logits[1] > logits[0]) == (s.label == 1)) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(samples.size()) >= 0.95);
}

TEST_CASE("train_classifier_head rejects a class-count mismatch") {
    Network net = make_network({3, {4}, 2, 2}, 1);
    std::vector<TrainSample> samples = separable_pair(4, 2.0, 8);
    samples[0].label = 3;  // pretends the attribute had 4 values
    HeadConfig cfg;
    CHECK_THROWS_AS(train_classifier_head(net, samples, cfg), ValidationError);
}
