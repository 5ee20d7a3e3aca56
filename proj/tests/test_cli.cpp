// End-to-end checks against the installed CLI binary (path injected by the
// build as HREID_BIN).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hreid/model_io.hpp"
#include "hreid/runconfig.hpp"

using namespace hreid;
namespace fs = std::filesystem;

namespace {

struct RunOutcome {
    int exit_code = -1;
    std::string output;
};

RunOutcome run_cli(const std::string& args, const fs::path& workdir) {
    const fs::path log = workdir / "cli_output.txt";
    const std::string cmd = "cd " + workdir.string() + " && " + HREID_BIN + " " + args + " > " +
                            log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunOutcome out;
    out.exit_code = WEXITSTATUS(status);
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    out.output = ss.str();
    return out;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("hreid_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig small_config() {
    RunConfig cfg;
    cfg.seed = 5;
    SynthConfig s;
    s.n_identities = 24;
    s.images_per_identity = 12;
    s.feature_dim = 8;
    s.noise_sigma = 1.0;
    s.train_fraction = 0.5;
    s.gallery_fraction = 0.35;
    s.query_fraction = 0.15;
    s.attributes = {
        {"one", {"a", "b"}, 3.5, {}},
        {"two", {"a", "b"}, 3.0, {}},
    };
    cfg.synth = s;
    cfg.build.min_node_samples = 20;
    cfg.build.max_depth = 3;
    cfg.build.hidden_width = 8;
    cfg.build.embedding_dim = 4;
    cfg.build.arch_depth_max = 2;
    cfg.triplet.max_epochs = 20;
    cfg.triplet.saturation_patience = 8;
    cfg.head.epochs = 25;
    cfg.eval.random_tree_seeds = 2;
    cfg.reseed();
    return cfg;
}

void write_config(const fs::path& path, const RunConfig& cfg) {
    std::ofstream out(path);
    out << run_config_to_json(cfg) << "\n";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("synth writes the three dataset files, byte-identically across runs") {
    const fs::path dir = fresh_dir("synth");
    write_config(dir / "cfg.json", small_config());

    const RunOutcome first = run_cli("synth --config cfg.json --out data_a", dir);
    CHECK(first.exit_code == 0);
    for (const char* f : {"manifest.csv", "schema.json", "features.bin"})
        CHECK(fs::exists(dir / "data_a" / f));

    const RunOutcome second = run_cli("synth --config cfg.json --out data_b", dir);
    CHECK(second.exit_code == 0);
    for (const char* f : {"manifest.csv", "schema.json", "features.bin"})
        CHECK(slurp(dir / "data_a" / f) == slurp(dir / "data_b" / f));
}

TEST_CASE("missing config file exits 2 and names the path") {
    const fs::path dir = fresh_dir("noconfig");
    const RunOutcome r = run_cli("synth --config nope.json --out data", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("nope.json") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected before any side effect") {
    const fs::path dir = fresh_dir("badkey");
    std::ofstream(dir / "cfg.json") << R"({"seed": 1, "mystery": true})";
    const RunOutcome r = run_cli("synth --config cfg.json --out data", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("mystery") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "data"));
}

TEST_CASE("build trains and writes a loadable model plus the search log") {
    const fs::path dir = fresh_dir("build");
    write_config(dir / "cfg.json", small_config());
    const RunOutcome r = run_cli("build --config cfg.json --out run --fixed-layers 1", dir);
    CHECK(r.exit_code == 0);
    REQUIRE(fs::exists(dir / "run" / "model.json"));
    REQUIRE(fs::exists(dir / "run" / "build_log.json"));
    const Hierarchy h = load_hierarchy(dir / "run" / "model.json");
    CHECK(h.trained);
    CHECK(h.kind == HierarchyKind::hierarchical);
}

TEST_CASE("build --random-seed produces the random-tree ablation") {
    const fs::path dir = fresh_dir("random");
    write_config(dir / "cfg.json", small_config());
    const RunOutcome r = run_cli("build --config cfg.json --out run --random-seed 3 --fixed-layers 1", dir);
    CHECK(r.exit_code == 0);
    const Hierarchy h = load_hierarchy(dir / "run" / "model.json");
    CHECK(h.kind == HierarchyKind::random_tree);
    CHECK(h.tree_seed == 3);
}

TEST_CASE("a dataset with one identity exits 2 citing the identity count") {
    const fs::path dir = fresh_dir("oneident");
    RunConfig cfg = small_config();
    cfg.synth->n_identities = 1;
    write_config(dir / "cfg.json", cfg);
    const RunOutcome r = run_cli("build --config cfg.json --out run --fixed-layers 1", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("fewer than 2 identities") != std::string::npos);
}

TEST_CASE("index and query run against a built model") {
    const fs::path dir = fresh_dir("query");
    write_config(dir / "cfg.json", small_config());
    REQUIRE(run_cli("build --config cfg.json --out run --fixed-layers 1", dir).exit_code == 0);

    const RunOutcome idx = run_cli("index run/model.json --config cfg.json --out index.json", dir);
    CHECK(idx.exit_code == 0);
    CHECK(fs::exists(dir / "index.json"));

    const RunOutcome q =
        run_cli("query run/model.json --config cfg.json --index index.json --out results.jsonl --top-k 3",
                dir);
    CHECK(q.exit_code == 0);
    const std::string jsonl = slurp(dir / "results.jsonl");
    CHECK(jsonl.find("\"query_id\"") != std::string::npos);
    CHECK(jsonl.find("\"distances_computed\"") != std::string::npos);

    // without --index the in-memory index gives the same bytes
    const RunOutcome q2 =
        run_cli("query run/model.json --config cfg.json --out results2.jsonl --top-k 3", dir);
    CHECK(q2.exit_code == 0);
    CHECK(slurp(dir / "results.jsonl") == slurp(dir / "results2.jsonl"));
}

TEST_CASE("eval emits identical reports for identical inputs and honors both sources") {
    const fs::path dir = fresh_dir("eval");
    write_config(dir / "cfg.json", small_config());
    REQUIRE(run_cli("build --config cfg.json --out run --fixed-layers 1", dir).exit_code == 0);

    CHECK(run_cli("eval run/model.json --config cfg.json --out rep_a", dir).exit_code == 0);
    CHECK(run_cli("eval run/model.json --config cfg.json --out rep_b", dir).exit_code == 0);
    for (const char* f : {"report.csv", "report.json", "report.txt"}) {
        REQUIRE(fs::exists(dir / "rep_a" / f));
        CHECK(slurp(dir / "rep_a" / f) == slurp(dir / "rep_b" / f));
    }

    const RunOutcome both =
        run_cli("eval run/model.json --config cfg.json --out rep_both --attribute-source both "
                "--dump-queries",
                dir);
    CHECK(both.exit_code == 0);
    const std::string json = slurp(dir / "rep_both" / "report.json");
    CHECK(json.find("\"predicted\"") != std::string::npos);
    CHECK(json.find("\"ground_truth\"") != std::string::npos);
    CHECK(fs::exists(dir / "rep_both" / "queries_hierarchical_predicted.jsonl"));
    CHECK(fs::exists(dir / "rep_both" / "queries_hierarchical_ground_truth.jsonl"));
}

TEST_CASE("report runs the full comparison: hierarchical, flat, and random-tree rows") {
    const fs::path dir = fresh_dir("report");
    RunConfig cfg = small_config();
    cfg.triplet.max_epochs = 12;
    cfg.head.epochs = 15;
    write_config(dir / "cfg.json", cfg);
    const RunOutcome r = run_cli("report --config cfg.json --out rep", dir);
    CHECK(r.exit_code == 0);
    const std::string csv = slurp(dir / "rep" / "report.csv");
    CHECK(csv.find("hierarchical,") != std::string::npos);
    CHECK(csv.find("flat,") != std::string::npos);
    CHECK(csv.find("random_tree_mean,") != std::string::npos);
    CHECK(csv.find("random_tree:1,") != std::string::npos);
    CHECK(csv.find("random_tree:2,") != std::string::npos);
    CHECK(fs::exists(dir / "rep" / "models" / "hierarchical.json"));
    CHECK(fs::exists(dir / "rep" / "models" / "flat.json"));
    CHECK(fs::exists(dir / "rep" / "models" / "random_tree_1.json"));
}

TEST_CASE("the shipped default config parses to the built-in defaults") {
    const fs::path shipped = fs::path(HREID_SOURCE_DIR) / "configs" / "default.json";
    REQUIRE(fs::exists(shipped));
    const RunConfig parsed = load_run_config(shipped);
    const RunConfig builtin = default_run_config();
    CHECK(run_config_to_json(parsed) == run_config_to_json(builtin));
}
