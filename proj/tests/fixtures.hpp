#pragma once

#include <string>
#include <vector>

#include "hreid/dataset.hpp"
#include "hreid/synth.hpp"

namespace fixtures {

using hreid::AttributeSchema;
using hreid::Dataset;
using hreid::Sample;
using hreid::Split;

inline AttributeSchema gender_dress_schema() {
    AttributeSchema s;
    s.attributes = {{"gender", {"male", "female"}}, {"dress", {"no", "yes"}}};
    return s;
}

inline Sample make_sample(const std::string& id, const std::string& identity, Split split,
                          std::vector<int> attrs, std::vector<float> features,
                          const std::string& camera = "c0") {
    Sample s;
    s.sample_id = id;
    s.identity_id = identity;
    s.camera_id = camera;
    s.split = split;
    s.attribute_values = std::move(attrs);
    s.features = std::move(features);
    return s;
}

// six samples, three female, two of those wearing dresses
inline Dataset gender_dress_fixture() {
    Dataset ds;
    ds.schema = gender_dress_schema();
    ds.feature_dim = 2;
    ds.samples = {
        make_sample("s0", "a", Split::train, {0, 0}, {0.f, 0.f}),
        make_sample("s1", "a", Split::train, {1, 1}, {1.f, 0.f}),
        make_sample("s2", "b", Split::train, {1, 0}, {2.f, 0.f}),
        make_sample("s3", "b", Split::train, {0, 0}, {3.f, 0.f}),
        make_sample("s4", "c", Split::train, {1, 1}, {4.f, 0.f}),
        make_sample("s5", "c", Split::train, {0, 0}, {5.f, 0.f}),
    };
    return ds;
}

inline hreid::SynthConfig two_attribute_synth(double sep_a, double sep_b, std::uint64_t seed,
                                              int n_identities = 60, int images = 20) {
    hreid::SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_identities = n_identities;
    cfg.images_per_identity = images;
    cfg.feature_dim = 8;
    cfg.noise_sigma = 1.0;
    cfg.train_fraction = 0.6;
    cfg.gallery_fraction = 0.3;
    cfg.query_fraction = 0.1;
    cfg.attributes = {
        {"alpha", {"a0", "a1"}, sep_a, {}},
        {"beta", {"b0", "b1"}, sep_b, {}},
    };
    return cfg;
}

}  // namespace fixtures
