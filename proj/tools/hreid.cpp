// hreid: hierarchical re-identification pipeline driver.
//
// Subcommands: synth, build, train (alias of build), index, query, eval,
// report. Exit codes: 0 success, 2 validation error, 1 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hreid/errors.hpp"
#include "hreid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hreid;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    int jobs = 1;
};

RunConfig load_config(const CommonArgs& args) {
    if (!fs::exists(args.config_path))
        throw ValidationError("config file not found: " + args.config_path);
    RunConfig cfg = load_run_config(args.config_path);
    if (args.has_seed_override) {
        cfg.seed = args.seed_override;
        cfg.reseed();
    }
    return cfg;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failure on " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::string method_name(const Hierarchy& h) {
    if (h.kind == HierarchyKind::random_tree)
        return "random_tree:" + std::to_string(h.tree_seed);
    return hierarchy_kind_name(h.kind);
}

int cmd_synth(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    if (!cfg.synth) throw ValidationError("synth: config has no 'synth' section");
    const Dataset ds = generate(*cfg.synth);
    fs::create_directories(args.out_path);
    const DatasetPaths paths = write_dataset(ds, args.out_path);
    std::cout << "wrote " << paths.manifest.string() << ", " << paths.schema.string() << ", "
              << paths.features.string() << " (" << ds.samples.size() << " samples)\n";
    return 0;
}

int cmd_build(const CommonArgs& args, bool random_tree, std::uint64_t random_seed, int fixed_layers) {
    RunConfig cfg = load_config(args);
    std::vector<std::string> warnings;
    const Dataset ds = obtain_dataset(cfg, &warnings);
    print_warnings(warnings);

    const ModelKind kind = random_tree ? ModelKind::random_tree : ModelKind::structured;
    ModelBundle bundle = build_and_train(cfg, ds, kind, random_seed, fixed_layers);
    print_warnings(bundle.diagnostics);

    fs::create_directories(args.out_path);
    const fs::path dir(args.out_path);
    save_hierarchy(bundle.hierarchy, dir / "model.json");
    write_text_file(dir / "build_log.json", build_log_to_json(bundle.log));
    std::cout << "wrote " << (dir / "model.json").string() << " ("
              << hierarchy_kind_name(bundle.hierarchy.kind) << ")\n";
    return 0;
}

int cmd_index(const CommonArgs& args, const std::string& model_path, const std::string& source_name) {
    RunConfig cfg = load_config(args);
    if (!source_name.empty()) cfg.eval.attribute_source = parse_attribute_source(source_name);
    const Hierarchy model = load_hierarchy(model_path);
    std::vector<std::string> warnings;
    const Dataset ds = obtain_dataset(cfg, &warnings);
    print_warnings(warnings);

    std::vector<std::string> diagnostics;
    const GalleryIndex index = index_gallery(model, ds, cfg.eval.attribute_source, &diagnostics);
    print_warnings(diagnostics);
    write_text_file(args.out_path, gallery_index_to_json(index));
    std::cout << "indexed " << index.total_entries() << " gallery samples into " << index.leaves.size()
              << " partitions\n";
    return 0;
}

int cmd_query(const CommonArgs& args, const std::string& model_path, const std::string& index_path,
              const std::string& source_name, int top_k) {
    RunConfig cfg = load_config(args);
    if (!source_name.empty()) cfg.eval.attribute_source = parse_attribute_source(source_name);
    if (top_k > 0) cfg.eval.top_k = top_k;
    const Hierarchy model = load_hierarchy(model_path);
    std::vector<std::string> warnings;
    const Dataset ds = obtain_dataset(cfg, &warnings);
    print_warnings(warnings);

    GalleryIndex index;
    if (!index_path.empty())
        index = gallery_index_from_json(read_text_file(index_path));
    else
        index = index_gallery(model, ds, cfg.eval.attribute_source);

    std::vector<QueryResult> results;
    for (const auto& s : ds.samples) {
        if (s.split != Split::query) continue;
        results.push_back(query(model, index, s.sample_id, features_as_double(s), cfg.eval.top_k));
    }
    write_text_file(args.out_path, query_results_jsonl(results, cfg.eval.top_k));
    std::cout << "ran " << results.size() << " queries\n";
    return 0;
}

struct EvaluatedMethod {
    std::string name;
    MethodResult result;
    std::vector<QueryResult> results;
};

void write_reports(const fs::path& dir, const std::vector<std::pair<std::string, CompareReport>>& sections) {
    std::string csv, text;
    for (const auto& [source, report] : sections) {
        if (sections.size() > 1) text += "attribute source: " + source + "\n";
        csv += report_csv(report);
        text += report_text(report);
        text += "\n";
    }
    write_text_file(dir / "report.csv", csv);
    write_text_file(dir / "report.txt", text);
    write_text_file(dir / "report.json", report_json(sections));
    std::cout << text;
}

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& model_paths,
             const std::string& source_name, int top_k, bool dump_queries) {
    RunConfig cfg = load_config(args);
    if (top_k > 0) cfg.eval.top_k = top_k;
    std::vector<AttributeSource> sources;
    if (source_name == "both")
        sources = {AttributeSource::predicted, AttributeSource::ground_truth};
    else if (!source_name.empty())
        sources = {parse_attribute_source(source_name)};
    else
        sources = {cfg.eval.attribute_source};

    std::vector<std::string> warnings;
    const Dataset ds = obtain_dataset(cfg, &warnings);
    print_warnings(warnings);

    std::vector<Hierarchy> models;
    for (const auto& p : model_paths) models.push_back(load_hierarchy(p));

    fs::create_directories(args.out_path);
    const fs::path dir(args.out_path);

    std::vector<std::pair<std::string, CompareReport>> sections;
    for (const AttributeSource source : sources) {
        std::vector<MethodResult> method_results;
        for (const auto& model : models) {
            EvalOutcome outcome = evaluate_hierarchy(cfg, model, ds, source, args.jobs);
            print_warnings(outcome.diagnostics);
            const std::string name = method_name(model);
            method_results.push_back(to_method_result(name, model, outcome));
            if (dump_queries) {
                std::string fname = "queries_" + name + "_" + attribute_source_name(source) + ".jsonl";
                for (auto& c : fname)
                    if (c == ':') c = '_';
                write_text_file(dir / fname, query_results_jsonl(outcome.results, cfg.eval.top_k));
            }
        }
        sections.emplace_back(attribute_source_name(source), compare(method_results));
    }
    write_reports(dir, sections);
    return 0;
}

int cmd_report(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    std::vector<std::string> warnings;
    const Dataset ds = obtain_dataset(cfg, &warnings);
    print_warnings(warnings);

    fs::create_directories(fs::path(args.out_path) / "models");
    const fs::path dir(args.out_path);

    std::vector<MethodResult> method_results;
    auto run_method = [&](ModelKind kind, std::uint64_t random_seed, const std::string& file_stem) {
        ModelBundle bundle = build_and_train(cfg, ds, kind, random_seed);
        print_warnings(bundle.diagnostics);
        save_hierarchy(bundle.hierarchy, dir / "models" / (file_stem + ".json"));
        write_text_file(dir / "models" / (file_stem + "_build_log.json"), build_log_to_json(bundle.log));
        EvalOutcome outcome =
            evaluate_hierarchy(cfg, bundle.hierarchy, ds, cfg.eval.attribute_source, args.jobs);
        print_warnings(outcome.diagnostics);
        method_results.push_back(to_method_result(method_name(bundle.hierarchy), bundle.hierarchy, outcome));
    };

    run_method(ModelKind::structured, 0, "hierarchical");
    run_method(ModelKind::flat, 0, "flat");
    for (int k = 1; k <= cfg.eval.random_tree_seeds; ++k)
        run_method(ModelKind::random_tree, static_cast<std::uint64_t>(k), "random_tree_" + std::to_string(k));

    std::vector<std::pair<std::string, CompareReport>> sections;
    sections.emplace_back(attribute_source_name(cfg.eval.attribute_source), compare(method_results));
    write_reports(dir, sections);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical object re-identification pipeline"};
    app.require_subcommand(1);

    CommonArgs common;
    bool random_tree = false;
    std::uint64_t random_seed = 0;
    int fixed_layers = 0;
    std::string model_path, index_path, source_name;
    std::vector<std::string> model_paths;
    int top_k = 0;
    bool dump_queries = false;

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", common.config_path, "run configuration (JSON)")->required();
        auto* out = cmd->add_option("--out", common.out_path, "output path");
        if (needs_out) out->required();
        cmd->add_option("--seed", common.seed_override, "override the config's global seed")
            ->each([&](const std::string&) { common.has_seed_override = true; });
        cmd->add_option("--jobs", common.jobs, "parallel query evaluation")->check(CLI::PositiveNumber);
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, true);

    CLI::App* build = app.add_subcommand("build", "derive, size, and train a hierarchy");
    add_common(build, true);
    build->add_option("--random-seed", random_seed, "build the random-tree ablation with this seed")
        ->each([&](const std::string&) { random_tree = true; });
    build->add_option("--fixed-layers", fixed_layers, "skip the architecture search");

    CLI::App* train = app.add_subcommand("train", "alias of build");
    add_common(train, true);
    train->add_option("--random-seed", random_seed)->each([&](const std::string&) { random_tree = true; });
    train->add_option("--fixed-layers", fixed_layers);

    CLI::App* index = app.add_subcommand("index", "partition the gallery with a trained model");
    index->add_option("model", model_path, "model file")->required();
    add_common(index, true);
    index->add_option("--attribute-source", source_name)->check(CLI::IsMember({"predicted", "ground_truth"}));

    CLI::App* query_cmd = app.add_subcommand("query", "rank the query split against the gallery");
    query_cmd->add_option("model", model_path, "model file")->required();
    add_common(query_cmd, true);
    query_cmd->add_option("--index", index_path, "reuse a saved gallery index");
    query_cmd->add_option("--attribute-source", source_name)
        ->check(CLI::IsMember({"predicted", "ground_truth"}));
    query_cmd->add_option("--top-k", top_k)->check(CLI::PositiveNumber);

    CLI::App* eval = app.add_subcommand("eval", "evaluate one or more models and emit reports");
    eval->add_option("models", model_paths, "model files")->required();
    add_common(eval, true);
    eval->add_option("--attribute-source", source_name)
        ->check(CLI::IsMember({"predicted", "ground_truth", "both"}));
    eval->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
    eval->add_flag("--dump-queries", dump_queries, "write per-query JSONL files");

    CLI::App* report = app.add_subcommand("report", "full comparison: hierarchical vs flat vs random trees");
    add_common(report, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(common);
        if (build->parsed()) return cmd_build(common, random_tree, random_seed, fixed_layers);
        if (train->parsed()) return cmd_build(common, random_tree, random_seed, fixed_layers);
        if (index->parsed()) return cmd_index(common, model_path, source_name);
        if (query_cmd->parsed()) return cmd_query(common, model_path, index_path, source_name, top_k);
        if (eval->parsed()) return cmd_eval(common, model_paths, source_name, top_k, dump_queries);
        if (report->parsed()) return cmd_report(common);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
