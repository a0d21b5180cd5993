#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "isqn/experiment.hpp"

namespace isqn {

inline constexpr const char* kManifestName = "manifest.json";

struct ManifestCell {
  std::string label;
  std::string axis_value;
  std::vector<std::uint64_t> seeds;
  std::string axis;
};

struct Manifest {
  std::string env;
  std::string baseline;
  std::vector<ManifestCell> cells;
  std::map<std::pair<std::string, std::uint64_t>, RunRecord> runs;
};

std::filesystem::path run_csv_path(const std::filesystem::path& dir, const std::string& cell,
                                   std::uint64_t seed);
Manifest read_manifest(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir, const Manifest& manifest);

/// Manifest entries for the given cells, in the cells' order.
std::vector<ManifestCell> cells_of(const Manifest& manifest, const std::vector<CellSpec>& cells);

/// Per-cell AUC statistics recomputed from the run CSVs on disk.
Summary summarize(const std::filesystem::path& dir, const Manifest& manifest,
                  const std::vector<ManifestCell>& cells);

}  // namespace isqn
