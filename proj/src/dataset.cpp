#include "hreid/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hreid/errors.hpp"
#include "json.hpp"

namespace hreid {

namespace {

constexpr char kMagic[6] = {'H', 'R', 'E', 'I', 'D', '1'};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    write_u32_le(os, v);
}

float read_f32_le(std::istream& is) {
    std::uint32_t v = read_u32_le(is);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

int AttributeSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == name) return static_cast<int>(i);
    return -1;
}

const AttributeDef& AttributeSchema::at(const std::string& name) const {
    const int i = index_of(name);
    if (i < 0) throw ValidationError("unknown attribute: " + name);
    return attributes[static_cast<std::size_t>(i)];
}

void AttributeSchema::validate() const {
    std::set<std::string> names;
    for (const auto& attr : attributes) {
        if (attr.name.empty()) throw ValidationError("attribute with empty name");
        if (!names.insert(attr.name).second)
            throw ValidationError("duplicate attribute name: " + attr.name);
        if (attr.values.size() < 2)
            throw ValidationError("attribute '" + attr.name + "' needs at least 2 values");
        std::set<std::string> vals;
        for (const auto& v : attr.values) {
            if (v.empty() || v == "?")
                throw ValidationError("attribute '" + attr.name + "' has a reserved/empty value name");
            if (v.find(',') != std::string::npos)
                throw ValidationError("attribute value '" + v + "' contains a comma");
            if (!vals.insert(v).second)
                throw ValidationError("attribute '" + attr.name + "' has duplicate value: " + v);
        }
        if (attr.name.find(',') != std::string::npos)
            throw ValidationError("attribute name '" + attr.name + "' contains a comma");
    }
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "gallery") return Split::gallery;
    if (s == "query") return Split::query;
    throw ValidationError("unknown split: '" + s + "'");
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::gallery: return "gallery";
        case Split::query: return "query";
    }
    return "?";
}

namespace {

AttributeSchema parse_schema_json(const nlohmann::json& j, int& feature_dim) {
    if (!j.is_object()) throw ValidationError("schema JSON: expected object");
    for (const auto& [key, _] : j.items()) {
        if (key != "feature_dim" && key != "attributes")
            throw ValidationError("schema JSON: unknown key '" + key + "'");
    }
    if (!j.contains("feature_dim") || !j["feature_dim"].is_number_integer())
        throw ValidationError("schema JSON: missing integer 'feature_dim'");
    feature_dim = j["feature_dim"].get<int>();
    if (feature_dim <= 0) throw ValidationError("schema JSON: feature_dim must be positive");
    if (!j.contains("attributes") || !j["attributes"].is_array())
        throw ValidationError("schema JSON: missing array 'attributes'");
    AttributeSchema schema;
    for (const auto& ja : j["attributes"]) {
        for (const auto& [key, _] : ja.items()) {
            if (key != "name" && key != "values")
                throw ValidationError("schema JSON: unknown attribute key '" + key + "'");
        }
        AttributeDef def;
        def.name = ja.at("name").get<std::string>();
        for (const auto& jv : ja.at("values")) def.values.push_back(jv.get<std::string>());
        schema.attributes.push_back(std::move(def));
    }
    schema.validate();
    return schema;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& features_path,
                     const std::filesystem::path& schema_path,
                     const LoadOptions& opts,
                     std::vector<std::string>* warnings) {
    // schema
    std::ifstream schema_in(schema_path);
    if (!schema_in) throw IoError("cannot open schema file: " + schema_path.string());
    nlohmann::json schema_json;
    try {
        schema_in >> schema_json;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("schema JSON parse failure in " + schema_path.string() + ": " + e.what());
    }
    Dataset ds;
    ds.schema = parse_schema_json(schema_json, ds.feature_dim);

    // manifest
    std::ifstream man(manifest_path);
    if (!man) throw IoError("cannot open manifest: " + manifest_path.string());
    std::string line;
    if (!std::getline(man, line)) throw ValidationError("manifest is empty: " + manifest_path.string());
    const auto header = split_csv_line(strip_cr(line));
    std::vector<std::string> expected = {"sample_id", "identity_id", "camera_id", "split"};
    for (const auto& attr : ds.schema.attributes) expected.push_back("attr_" + attr.name);
    if (header != expected) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw ValidationError("malformed manifest header; expected columns: " + want);
    }

    std::unordered_set<std::string> seen_ids;
    std::size_t line_no = 1;
    while (std::getline(man, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != expected.size())
            throw ValidationError("manifest line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(expected.size()) + " cells, got " +
                                  std::to_string(cells.size()));
        Sample s;
        s.sample_id = cells[0];
        s.identity_id = cells[1];
        s.camera_id = cells[2];
        s.split = parse_split(cells[3]);
        if (s.sample_id.empty())
            throw ValidationError("manifest line " + std::to_string(line_no) + ": empty sample_id");
        if (!seen_ids.insert(s.sample_id).second)
            throw ValidationError("duplicate sample_id: " + s.sample_id);
        s.attribute_values.resize(ds.schema.attributes.size(), kUnlabeled);
        for (std::size_t a = 0; a < ds.schema.attributes.size(); ++a) {
            const std::string& cell = cells[4 + a];
            const auto& def = ds.schema.attributes[a];
            if (cell == "?") {
                if (s.split == Split::train)
                    throw ValidationError("sample " + s.sample_id +
                                          ": train samples must be fully labeled (attribute '" +
                                          def.name + "' is '?')");
                continue;
            }
            const auto it = std::find(def.values.begin(), def.values.end(), cell);
            if (it == def.values.end())
                throw ValidationError("sample " + s.sample_id + ": unknown attribute value '" + cell +
                                      "' for attribute '" + def.name + "'");
            s.attribute_values[a] = static_cast<int>(it - def.values.begin());
        }
        ds.samples.push_back(std::move(s));
    }

    // features
    std::ifstream feat(features_path, std::ios::binary);
    if (!feat) throw IoError("cannot open feature file: " + features_path.string());
    char magic[6];
    feat.read(magic, 6);
    if (!feat || std::memcmp(magic, kMagic, 6) != 0)
        throw ValidationError("feature file magic mismatch (expected HREID1): " + features_path.string());
    const std::uint32_t rows = read_u32_le(feat);
    const std::uint32_t dim = read_u32_le(feat);
    if (!feat) throw ValidationError("feature file truncated header: " + features_path.string());
    if (static_cast<int>(dim) != ds.feature_dim)
        throw ValidationError("feature dimension mismatch: schema declares " +
                              std::to_string(ds.feature_dim) + ", feature file has " +
                              std::to_string(dim));
    if (rows != ds.samples.size())
        throw ValidationError("row count mismatch: manifest has " + std::to_string(ds.samples.size()) +
                              " rows, feature file declares " + std::to_string(rows));
    for (auto& s : ds.samples) {
        s.features.resize(dim);
        for (std::uint32_t k = 0; k < dim; ++k) s.features[k] = read_f32_le(feat);
        if (!feat) throw ValidationError("feature file truncated at sample " + s.sample_id);
    }
    feat.peek();
    if (!feat.eof()) throw ValidationError("feature file has trailing bytes: " + features_path.string());

    // query identities must be answerable
    std::unordered_set<std::string> gallery_ids;
    for (const auto& s : ds.samples)
        if (s.split == Split::gallery) gallery_ids.insert(s.identity_id);
    std::set<std::string> orphaned;
    for (const auto& s : ds.samples)
        if (s.split == Split::query && !gallery_ids.count(s.identity_id)) orphaned.insert(s.identity_id);
    for (const auto& id : orphaned) {
        const std::string msg = "query identity '" + id + "' has no gallery image";
        if (opts.strict_query_coverage) throw ValidationError(msg);
        if (warnings) warnings->push_back(msg);
    }

    return ds;
}

Dataset load_dataset_dir(const std::filesystem::path& dir,
                         const LoadOptions& opts,
                         std::vector<std::string>* warnings) {
    return load_dataset(dir / "manifest.csv", dir / "features.bin", dir / "schema.json", opts, warnings);
}

DatasetPaths write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(out_dir, ec))
        throw IoError("not a writable directory: " + out_dir.string());

    DatasetPaths paths{out_dir / "manifest.csv", out_dir / "schema.json", out_dir / "features.bin"};

    {
        nlohmann::json j;
        j["feature_dim"] = dataset.feature_dim;
        j["attributes"] = nlohmann::json::array();
        for (const auto& attr : dataset.schema.attributes)
            j["attributes"].push_back({{"name", attr.name}, {"values", attr.values}});
        std::ofstream out(paths.schema);
        if (!out) throw IoError("cannot write " + paths.schema.string());
        out << j.dump(2) << "\n";
        if (!out) throw IoError("write failure on " + paths.schema.string());
    }
    {
        std::ofstream out(paths.manifest);
        if (!out) throw IoError("cannot write " + paths.manifest.string());
        out << "sample_id,identity_id,camera_id,split";
        for (const auto& attr : dataset.schema.attributes) out << ",attr_" << attr.name;
        out << "\n";
        for (const auto& s : dataset.samples) {
            out << s.sample_id << ',' << s.identity_id << ',' << s.camera_id << ','
                << split_name(s.split);
            for (std::size_t a = 0; a < dataset.schema.attributes.size(); ++a) {
                const int v = s.attribute_values[a];
                out << ',';
                if (v == kUnlabeled)
                    out << '?';
                else
                    out << dataset.schema.attributes[a].values[static_cast<std::size_t>(v)];
            }
            out << "\n";
        }
        if (!out) throw IoError("write failure on " + paths.manifest.string());
    }
    {
        std::ofstream out(paths.features, std::ios::binary);
        if (!out) throw IoError("cannot write " + paths.features.string());
        out.write(kMagic, 6);
        write_u32_le(out, static_cast<std::uint32_t>(dataset.samples.size()));
        write_u32_le(out, static_cast<std::uint32_t>(dataset.feature_dim));
        for (const auto& s : dataset.samples)
            for (float f : s.features) write_f32_le(out, f);
        if (!out) throw IoError("write failure on " + paths.features.string());
    }
    return paths;
}

Dataset filter_by_conditions(const Dataset& dataset, const std::vector<Condition>& conditions) {
    // resolve names up front so bad conditions fail even on empty data
    std::vector<std::pair<std::size_t, int>> resolved;
    resolved.reserve(conditions.size());
    for (const auto& c : conditions) {
        const int idx = dataset.schema.index_of(c.attribute);
        if (idx < 0) throw ValidationError("filter on unknown attribute: " + c.attribute);
        const auto& def = dataset.schema.attributes[static_cast<std::size_t>(idx)];
        if (c.value_index < 0 || c.value_index >= static_cast<int>(def.values.size()))
            throw ValidationError("condition value index " + std::to_string(c.value_index) +
                                  " out of range for attribute '" + c.attribute + "'");
        resolved.emplace_back(static_cast<std::size_t>(idx), c.value_index);
    }
    Dataset out;
    out.schema = dataset.schema;
    out.feature_dim = dataset.feature_dim;
    for (const auto& s : dataset.samples) {
        bool ok = true;
        for (const auto& [a, v] : resolved) {
            if (s.attribute_values[a] != v) {
                ok = false;
                break;
            }
        }
        if (ok) out.samples.push_back(s);
    }
    return out;
}

std::vector<std::int64_t> attribute_histogram(const Dataset& dataset, const std::string& attribute) {
    const int idx = dataset.schema.index_of(attribute);
    if (idx < 0) throw ValidationError("unknown attribute: " + attribute);
    const auto& def = dataset.schema.attributes[static_cast<std::size_t>(idx)];
    std::vector<std::int64_t> counts(def.values.size(), 0);
    for (const auto& s : dataset.samples) {
        const int v = s.attribute_values[static_cast<std::size_t>(idx)];
        if (v != kUnlabeled) ++counts[static_cast<std::size_t>(v)];
    }
    return counts;
}

Dataset split_subset(const Dataset& dataset, Split split) {
    Dataset out;
    out.schema = dataset.schema;
    out.feature_dim = dataset.feature_dim;
    for (const auto& s : dataset.samples)
        if (s.split == split) out.samples.push_back(s);
    return out;
}

std::vector<double> features_as_double(const Sample& s) {
    return std::vector<double>(s.features.begin(), s.features.end());
}

}  // namespace hreid
