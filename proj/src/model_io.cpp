#include "hreid/model_io.hpp"

#include <fstream>

#include "hreid/errors.hpp"
#include "json.hpp"

namespace hreid {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json schema_to_json(const AttributeSchema& schema) {
    json out = json::array();
    for (const auto& a : schema.attributes) out.push_back({{"name", a.name}, {"values", a.values}});
    return out;
}

AttributeSchema schema_from_json(const json& j) {
    AttributeSchema schema;
    for (const auto& ja : j) {
        AttributeDef def;
        def.name = ja.at("name").get<std::string>();
        for (const auto& v : ja.at("values")) def.values.push_back(v.get<std::string>());
        schema.attributes.push_back(std::move(def));
    }
    schema.validate();
    return schema;
}

json config_to_json(const BuildConfig& c) {
    return json{{"weak_band_low", c.weak_band_low},
                {"weak_band_high", c.weak_band_high},
                {"min_node_samples", c.min_node_samples},
                {"max_depth", c.max_depth},
                {"arch_depth_min", c.arch_depth_min},
                {"arch_depth_max", c.arch_depth_max},
                {"arch_stop_threshold", c.arch_stop_threshold},
                {"hidden_width", c.hidden_width},
                {"embedding_dim", c.embedding_dim},
                {"seed", c.seed}};
}

BuildConfig config_from_json(const json& j) {
    BuildConfig c;
    c.weak_band_low = j.at("weak_band_low").get<double>();
    c.weak_band_high = j.at("weak_band_high").get<double>();
    c.min_node_samples = j.at("min_node_samples").get<int>();
    c.max_depth = j.at("max_depth").get<int>();
    c.arch_depth_min = j.at("arch_depth_min").get<int>();
    c.arch_depth_max = j.at("arch_depth_max").get<int>();
    c.arch_stop_threshold = j.at("arch_stop_threshold").get<double>();
    c.hidden_width = j.at("hidden_width").get<int>();
    c.embedding_dim = j.at("embedding_dim").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

json layer_to_json(const DenseLayer& l) {
    return json{{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}};
}

DenseLayer layer_from_json(const json& j) {
    DenseLayer l;
    l.in = j.at("in").get<int>();
    l.out = j.at("out").get<int>();
    l.w = j.at("w").get<std::vector<double>>();
    l.b = j.at("b").get<std::vector<double>>();
    if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
        l.b.size() != static_cast<std::size_t>(l.out))
        throw ValidationError("model file: layer shape inconsistent with its weights");
    return l;
}

json network_to_json(const Network& n) {
    json j;
    j["spec"] = {{"input_dim", n.spec.input_dim},
                 {"hidden_layers", n.spec.hidden_layers},
                 {"embedding_dim", n.spec.embedding_dim},
                 {"num_classes", n.spec.num_classes}};
    j["hidden"] = json::array();
    for (const auto& l : n.hidden) j["hidden"].push_back(layer_to_json(l));
    j["embed"] = layer_to_json(n.embed);
    j["head"] = n.spec.num_classes > 0 ? layer_to_json(n.head) : json(nullptr);
    j["body_frozen"] = n.body_frozen;
    return j;
}

Network network_from_json(const json& j) {
    Network n;
    const json& js = j.at("spec");
    n.spec.input_dim = js.at("input_dim").get<int>();
    n.spec.hidden_layers = js.at("hidden_layers").get<std::vector<int>>();
    n.spec.embedding_dim = js.at("embedding_dim").get<int>();
    n.spec.num_classes = js.at("num_classes").get<int>();
    for (const auto& jl : j.at("hidden")) n.hidden.push_back(layer_from_json(jl));
    n.embed = layer_from_json(j.at("embed"));
    if (!j.at("head").is_null()) n.head = layer_from_json(j.at("head"));
    n.body_frozen = j.at("body_frozen").get<bool>();
    return n;
}

json conditions_to_json(const std::vector<Condition>& conds) {
    json out = json::array();
    for (const auto& c : conds) out.push_back({{"attribute", c.attribute}, {"value_index", c.value_index}});
    return out;
}

std::vector<Condition> conditions_from_json(const json& j) {
    std::vector<Condition> out;
    for (const auto& jc : j)
        out.push_back({jc.at("attribute").get<std::string>(), jc.at("value_index").get<int>()});
    return out;
}

json node_to_json(const HierarchyNode& node) {
    json j;
    j["node_id"] = node.node_id;
    j["conditions"] = conditions_to_json(node.conditions);
    j["attribute"] = node.attribute ? json(*node.attribute) : json(nullptr);
    j["train_subset_size"] = node.train_subset_size;
    j["degraded"] = node.degraded;
    j["network"] = network_to_json(node.network);
    j["children"] = json::array();
    for (const auto& c : node.children) j["children"].push_back(node_to_json(*c));
    return j;
}

std::unique_ptr<HierarchyNode> node_from_json(const json& j) {
    auto node = std::make_unique<HierarchyNode>();
    node->node_id = j.at("node_id").get<std::string>();
    node->conditions = conditions_from_json(j.at("conditions"));
    if (!j.at("attribute").is_null()) node->attribute = j.at("attribute").get<std::string>();
    node->train_subset_size = j.at("train_subset_size").get<int>();
    node->degraded = j.at("degraded").get<bool>();
    node->network = network_from_json(j.at("network"));
    for (const auto& jc : j.at("children")) node->children.push_back(node_from_json(jc));
    if (node->attribute && node->children.empty())
        throw ValidationError("model file: internal node " + node->node_id + " has no children");
    if (!node->attribute && !node->children.empty())
        throw ValidationError("model file: leaf node " + node->node_id + " has children");
    return node;
}

}  // namespace

std::string hierarchy_to_json(const Hierarchy& h) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = hierarchy_kind_name(h.kind);
    j["tree_seed"] = h.tree_seed;
    j["feature_dim"] = h.feature_dim;
    j["trained"] = h.trained;
    j["schema"] = schema_to_json(h.schema);
    j["build_config"] = config_to_json(h.config);
    j["root"] = h.root ? node_to_json(*h.root) : json(nullptr);
    return j.dump();
}

Hierarchy hierarchy_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model file: JSON parse failure: ") + e.what());
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion)
        throw ValidationError("model file: unsupported format version");
    Hierarchy h;
    h.kind = parse_hierarchy_kind(j.at("kind").get<std::string>());
    h.tree_seed = j.at("tree_seed").get<std::uint64_t>();
    h.feature_dim = j.at("feature_dim").get<int>();
    h.trained = j.at("trained").get<bool>();
    h.schema = schema_from_json(j.at("schema"));
    h.config = config_from_json(j.at("build_config"));
    if (!j.at("root").is_null()) h.root = node_from_json(j.at("root"));
    return h;
}

void save_hierarchy(const Hierarchy& hierarchy, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path.string());
    out << hierarchy_to_json(hierarchy) << "\n";
    if (!out) throw IoError("write failure on model file: " + path.string());
}

Hierarchy load_hierarchy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hierarchy_from_json(text);
}

namespace {

json arch_to_json(const ArchSearchRecord& a) {
    json jc = json::array();
    for (const auto& c : a.candidates) {
        json j{{"layers", c.layers}, {"accuracy", c.accuracy}, {"memory_bytes", c.memory_bytes}};
        j["delta_ad"] = c.delta_ad ? json(*c.delta_ad) : json(nullptr);
        jc.push_back(std::move(j));
    }
    return json{{"node_id", a.node_id},
                {"candidates", std::move(jc)},
                {"selected_layers", a.selected_layers},
                {"note", a.note}};
}

}  // namespace

std::string build_log_to_json(const BuildLog& log) {
    json j;
    j["difficulty_rank"] = json::array();
    for (const auto& e : log.rank.entries)
        j["difficulty_rank"].push_back(
            {{"attribute", e.attribute}, {"validation_error", e.validation_error}});
    j["nodes"] = json::array();
    for (const auto& n : log.nodes) {
        json jn;
        jn["node_id"] = n.node_id;
        jn["conditions"] = conditions_to_json(n.conditions);
        jn["subset_size"] = n.subset_size;
        jn["chosen_attribute"] = n.chosen_attribute ? json(*n.chosen_attribute) : json(nullptr);
        json rows = json::object();
        for (const auto& [name, row] : n.correlation.rows)
            rows[name] = row.supported ? json(row.probabilities) : json(nullptr);
        jn["correlation"] = std::move(rows);
        jn["arch"] = arch_to_json(n.arch);
        jn["triplet_loss"] = n.triplet_loss;
        jn["triplet_epochs"] = n.triplet_epochs;
        jn["head_accuracy_train"] = n.head_accuracy_train;
        j["nodes"].push_back(std::move(jn));
    }
    return j.dump(2);
}

namespace {

bool nodes_equal(const HierarchyNode& a, const HierarchyNode& b) {
    if (a.node_id != b.node_id || a.conditions != b.conditions || a.attribute != b.attribute ||
        a.train_subset_size != b.train_subset_size || a.degraded != b.degraded || a.network != b.network)
        return false;
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!nodes_equal(*a.children[i], *b.children[i])) return false;
    return true;
}

}  // namespace

bool hierarchies_equal(const Hierarchy& a, const Hierarchy& b) {
    if (a.schema != b.schema || a.feature_dim != b.feature_dim || a.kind != b.kind ||
        a.tree_seed != b.tree_seed || a.trained != b.trained || !(a.config == b.config))
        return false;
    if (static_cast<bool>(a.root) != static_cast<bool>(b.root)) return false;
    if (a.root && !nodes_equal(*a.root, *b.root)) return false;
    return true;
}

}  // namespace hreid
