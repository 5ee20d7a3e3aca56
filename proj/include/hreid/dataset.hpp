#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hreid {

constexpr int kUnlabeled = -1;

struct AttributeDef {
    std::string name;
    std::vector<std::string> values;  // >= 2 values

    bool operator==(const AttributeDef&) const = default;
};

struct AttributeSchema {
    std::vector<AttributeDef> attributes;

    // index into attributes, or -1 if not present
    int index_of(const std::string& name) const;
    const AttributeDef& at(const std::string& name) const;  // throws ValidationError
    void validate() const;

    bool operator==(const AttributeSchema&) const = default;
};

enum class Split { train, gallery, query };

Split parse_split(const std::string& s);
std::string split_name(Split s);

struct Sample {
    std::string sample_id;
    std::string identity_id;
    std::string camera_id;
    Split split = Split::train;
    std::vector<int> attribute_values;  // aligned with schema order; kUnlabeled = missing
    std::vector<float> features;

    bool operator==(const Sample&) const = default;
};

struct Condition {
    std::string attribute;
    int value_index = 0;

    bool operator==(const Condition&) const = default;
};

struct Dataset {
    AttributeSchema schema;
    int feature_dim = 0;
    std::vector<Sample> samples;

    bool operator==(const Dataset&) const = default;
};

struct LoadOptions {
    // when true, a query identity missing from the gallery is an error
    // instead of a warning
    bool strict_query_coverage = false;
};

struct DatasetPaths {
    std::filesystem::path manifest;
    std::filesystem::path schema;
    std::filesystem::path features;
};

// Manifest CSV + schema JSON + HREID1 feature file. Feature rows bind to
// manifest rows positionally.
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& features_path,
                     const std::filesystem::path& schema_path,
                     const LoadOptions& opts = {},
                     std::vector<std::string>* warnings = nullptr);

// Convention: <dir>/manifest.csv, <dir>/schema.json, <dir>/features.bin
Dataset load_dataset_dir(const std::filesystem::path& dir,
                         const LoadOptions& opts = {},
                         std::vector<std::string>* warnings = nullptr);

// Writes the three files into an existing directory; load_dataset on the
// result reproduces the dataset exactly.
DatasetPaths write_dataset(const Dataset& dataset, const std::filesystem::path& out_dir);

// Sub-dataset of samples whose labels satisfy every condition. Order
// preserved; schema and feature_dim unchanged. A sample with a missing label
// for a conditioned attribute does not satisfy the condition.
Dataset filter_by_conditions(const Dataset& dataset, const std::vector<Condition>& conditions);

// Counts per value over samples carrying a label for the attribute.
std::vector<std::int64_t> attribute_histogram(const Dataset& dataset, const std::string& attribute);

// Samples belonging to one split, order preserved.
Dataset split_subset(const Dataset& dataset, Split split);

std::vector<double> features_as_double(const Sample& s);

}  // namespace hreid
