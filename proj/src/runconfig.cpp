#include "hreid/runconfig.hpp"

#include <algorithm>
#include <fstream>

#include "hreid/errors.hpp"
#include "hreid/rng.hpp"
#include "json.hpp"

namespace hreid {

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end())
            throw ValidationError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

SynthConfig parse_synth(const json& j) {
    expect_keys(j,
                {"n_identities", "images_per_identity", "feature_dim", "noise_sigma", "train_fraction",
                 "gallery_fraction", "query_fraction", "attributes"},
                "synth");
    SynthConfig s;
    read_field(j, "n_identities", s.n_identities);
    read_field(j, "images_per_identity", s.images_per_identity);
    read_field(j, "feature_dim", s.feature_dim);
    read_field(j, "noise_sigma", s.noise_sigma);
    read_field(j, "train_fraction", s.train_fraction);
    read_field(j, "gallery_fraction", s.gallery_fraction);
    read_field(j, "query_fraction", s.query_fraction);
    if (!j.contains("attributes") || !j.at("attributes").is_array())
        throw ValidationError("config: synth.attributes must be an array");
    for (const auto& ja : j.at("attributes")) {
        expect_keys(ja, {"name", "values", "separation", "correlation_with_previous"}, "synth.attributes[]");
        SynthAttribute a;
        a.name = ja.at("name").get<std::string>();
        a.values = ja.at("values").get<std::vector<std::string>>();
        read_field(ja, "separation", a.separation);
        if (ja.contains("correlation_with_previous"))
            a.correlation_with_previous = ja.at("correlation_with_previous").get<double>();
        s.attributes.push_back(std::move(a));
    }
    return s;
}

json synth_to_json(const SynthConfig& s) {
    json j;
    j["n_identities"] = s.n_identities;
    j["images_per_identity"] = s.images_per_identity;
    j["feature_dim"] = s.feature_dim;
    j["noise_sigma"] = s.noise_sigma;
    j["train_fraction"] = s.train_fraction;
    j["gallery_fraction"] = s.gallery_fraction;
    j["query_fraction"] = s.query_fraction;
    j["attributes"] = json::array();
    for (const auto& a : s.attributes) {
        json ja{{"name", a.name}, {"values", a.values}, {"separation", a.separation}};
        if (a.correlation_with_previous) ja["correlation_with_previous"] = *a.correlation_with_previous;
        j["attributes"].push_back(std::move(ja));
    }
    return j;
}

BuildConfig parse_build(const json& j) {
    expect_keys(j,
                {"weak_band_low", "weak_band_high", "min_node_samples", "max_depth", "arch_depth_min",
                 "arch_depth_max", "arch_stop_threshold", "hidden_width", "embedding_dim"},
                "build");
    BuildConfig b;
    read_field(j, "weak_band_low", b.weak_band_low);
    read_field(j, "weak_band_high", b.weak_band_high);
    read_field(j, "min_node_samples", b.min_node_samples);
    read_field(j, "max_depth", b.max_depth);
    read_field(j, "arch_depth_min", b.arch_depth_min);
    read_field(j, "arch_depth_max", b.arch_depth_max);
    read_field(j, "arch_stop_threshold", b.arch_stop_threshold);
    read_field(j, "hidden_width", b.hidden_width);
    read_field(j, "embedding_dim", b.embedding_dim);
    return b;
}

TripletConfig parse_triplet(const json& j) {
    expect_keys(j,
                {"identities_per_batch", "images_per_identity", "margin", "learning_rate",
                 "lr_decay_factor", "lr_decay_every", "max_epochs", "saturation_patience"},
                "triplet");
    TripletConfig t;
    read_field(j, "identities_per_batch", t.identities_per_batch);
    read_field(j, "images_per_identity", t.images_per_identity);
    read_field(j, "margin", t.margin);
    read_field(j, "learning_rate", t.learning_rate);
    read_field(j, "lr_decay_factor", t.lr_decay_factor);
    read_field(j, "lr_decay_every", t.lr_decay_every);
    read_field(j, "max_epochs", t.max_epochs);
    read_field(j, "saturation_patience", t.saturation_patience);
    return t;
}

HeadConfig parse_head(const json& j) {
    expect_keys(j, {"epochs", "batch_size", "learning_rate"}, "head");
    HeadConfig h;
    read_field(j, "epochs", h.epochs);
    read_field(j, "batch_size", h.batch_size);
    read_field(j, "learning_rate", h.learning_rate);
    return h;
}

FlatConfig parse_flat(const json& j) {
    expect_keys(j, {"hidden_layers", "embedding_dim"}, "flat");
    FlatConfig f;
    read_field(j, "hidden_layers", f.hidden_layers);
    read_field(j, "embedding_dim", f.embedding_dim);
    return f;
}

EvalConfig parse_eval(const json& j) {
    expect_keys(j, {"attribute_source", "same_camera_exclusion", "top_k", "random_tree_seeds"}, "eval");
    EvalConfig e;
    if (j.contains("attribute_source"))
        e.attribute_source = parse_attribute_source(j.at("attribute_source").get<std::string>());
    read_field(j, "same_camera_exclusion", e.same_camera_exclusion);
    read_field(j, "top_k", e.top_k);
    read_field(j, "random_tree_seeds", e.random_tree_seeds);
    return e;
}

}  // namespace

void RunConfig::validate() const {
    if (static_cast<bool>(synth) == dataset_dir.has_value())
        throw ValidationError("config: exactly one of 'synth' and 'dataset_dir' must be set");
    if (synth) synth->validate();
    build.validate();
    triplet.validate();
    head.validate();
    if (flat.hidden_layers.empty())
        throw ValidationError("config: flat.hidden_layers must not be empty");
    for (int w : flat.hidden_layers)
        if (w <= 0) throw ValidationError("config: flat.hidden_layers must be positive");
    if (flat.embedding_dim <= 0) throw ValidationError("config: flat.embedding_dim must be positive");
    if (eval.top_k < 1) throw ValidationError("config: eval.top_k must be >= 1");
    if (eval.random_tree_seeds < 1) throw ValidationError("config: eval.random_tree_seeds must be >= 1");
}

void RunConfig::reseed() {
    if (synth) synth->seed = derive_seed(seed, "synth");
    build.seed = derive_seed(seed, "build");
    triplet.seed = derive_seed(seed, "triplet");
    head.seed = derive_seed(seed, "head");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: JSON parse failure: ") + e.what());
    }
    expect_keys(j, {"seed", "synth", "dataset_dir", "build", "triplet", "head", "flat", "eval"}, "config");
    RunConfig c;
    read_field(j, "seed", c.seed);
    if (j.contains("synth")) c.synth = parse_synth(j.at("synth"));
    if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
    if (j.contains("build")) c.build = parse_build(j.at("build"));
    if (j.contains("triplet")) c.triplet = parse_triplet(j.at("triplet"));
    if (j.contains("head")) c.head = parse_head(j.at("head"));
    if (j.contains("flat")) c.flat = parse_flat(j.at("flat"));
    if (j.contains("eval")) c.eval = parse_eval(j.at("eval"));
    c.reseed();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    if (c.synth) j["synth"] = synth_to_json(*c.synth);
    if (c.dataset_dir) j["dataset_dir"] = c.dataset_dir->string();
    j["build"] = {{"weak_band_low", c.build.weak_band_low},
                  {"weak_band_high", c.build.weak_band_high},
                  {"min_node_samples", c.build.min_node_samples},
                  {"max_depth", c.build.max_depth},
                  {"arch_depth_min", c.build.arch_depth_min},
                  {"arch_depth_max", c.build.arch_depth_max},
                  {"arch_stop_threshold", c.build.arch_stop_threshold},
                  {"hidden_width", c.build.hidden_width},
                  {"embedding_dim", c.build.embedding_dim}};
    j["triplet"] = {{"identities_per_batch", c.triplet.identities_per_batch},
                    {"images_per_identity", c.triplet.images_per_identity},
                    {"margin", c.triplet.margin},
                    {"learning_rate", c.triplet.learning_rate},
                    {"lr_decay_factor", c.triplet.lr_decay_factor},
                    {"lr_decay_every", c.triplet.lr_decay_every},
                    {"max_epochs", c.triplet.max_epochs},
                    {"saturation_patience", c.triplet.saturation_patience}};
    j["head"] = {{"epochs", c.head.epochs},
                 {"batch_size", c.head.batch_size},
                 {"learning_rate", c.head.learning_rate}};
    j["flat"] = {{"hidden_layers", c.flat.hidden_layers}, {"embedding_dim", c.flat.embedding_dim}};
    j["eval"] = {{"attribute_source", attribute_source_name(c.eval.attribute_source)},
                 {"same_camera_exclusion", c.eval.same_camera_exclusion},
                 {"top_k", c.eval.top_k},
                 {"random_tree_seeds", c.eval.random_tree_seeds}};
    return j.dump(2);
}

RunConfig default_run_config() {
    RunConfig c;
    c.seed = 42;
    SynthConfig s;
    s.n_identities = 100;
    s.images_per_identity = 50;
    s.feature_dim = 32;
    s.noise_sigma = 1.0;
    s.train_fraction = 0.5;
    s.gallery_fraction = 0.4;
    s.query_fraction = 0.1;
    // three easy independent attributes carry the routing; the other three
    // ride a strong correlation chain off "shape" and get pruned
    s.attributes = {
        {"shade", {"dark", "light"}, 5.5, {}},
        {"size", {"small", "large"}, 5.0, {}},
        {"shape", {"round", "angular"}, 4.5, {}},
        {"trim", {"plain", "fancy"}, 1.5, 0.9},
        {"marking", {"solid", "striped"}, 1.2, 0.9},
        {"finish", {"matte", "gloss"}, 1.0, 0.9},
    };
    c.synth = std::move(s);
    // desk-scale step budgets: one annealing step for the triplet phase, and
    // a converged convex head (the 100-epoch head schedule assumes far more
    // batches per epoch than these subsets provide)
    c.triplet.max_epochs = 250;
    c.triplet.saturation_patience = 20;
    c.head.epochs = 400;
    c.reseed();
    return c;
}

}  // namespace hreid
