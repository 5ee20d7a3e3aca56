#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hreid/engine.hpp"
#include "hreid/synth.hpp"
#include "hreid/training.hpp"
#include "hreid/treebuild.hpp"

namespace hreid {

struct FlatConfig {
    std::vector<int> hidden_layers = {128, 128, 128};
    int embedding_dim = 16;
};

struct EvalConfig {
    AttributeSource attribute_source = AttributeSource::predicted;
    bool same_camera_exclusion = false;
    int top_k = 10;
    int random_tree_seeds = 5;
};

// One JSON document drives every subcommand. A single global seed expands
// into per-component seeds through derive_seed with stable tags; explicit
// per-component seeds are rejected at parse time.
struct RunConfig {
    std::uint64_t seed = 1;
    std::optional<SynthConfig> synth;               // exactly one of synth /
    std::optional<std::filesystem::path> dataset_dir;  // dataset_dir is set
    BuildConfig build;
    TripletConfig triplet;
    HeadConfig head;
    FlatConfig flat;
    EvalConfig eval;

    void validate() const;
    // seed expansion, applied after parsing and after --seed overrides
    void reseed();
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// The configuration the acceptance experiments run on; shipped as
// configs/default.json.
RunConfig default_run_config();

}  // namespace hreid
