#pragma once

#include <filesystem>
#include <string>

#include "hreid/treebuild.hpp"

namespace hreid {

// Single-document JSON model format, version 1. Weights serialize with
// shortest round-trip decimals, so save -> load -> save is byte-stable and
// load(save(h)) reproduces every parameter bit.
std::string hierarchy_to_json(const Hierarchy& hierarchy);
Hierarchy hierarchy_from_json(const std::string& text);

void save_hierarchy(const Hierarchy& hierarchy, const std::filesystem::path& path);
Hierarchy load_hierarchy(const std::filesystem::path& path);

// Structure + per-node audit trail written next to the model by the CLI.
std::string build_log_to_json(const BuildLog& log);

bool hierarchies_equal(const Hierarchy& a, const Hierarchy& b);

}  // namespace hreid
