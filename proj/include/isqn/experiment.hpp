#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isqn/mdp.hpp"
#include "isqn/records.hpp"
#include "isqn/train_config.hpp"

namespace isqn {

inline constexpr const char* kEnvPrefix = "ISQN_";

struct CellSpec {
  std::string label;
  /// Keys set on the cell line, in canonical order, for the config echo.
  std::map<std::string, std::string> overrides;
  TrainConfig train;
};

struct DatasetSpec {
  std::size_t size = 10000;
  double coverage = 0.1;
  /// Behaviour policy: ε-greedy on the exact optimal Q.
  double epsilon = 0.5;
};

struct ExperimentSpec {
  std::string env = "chain";
  std::string encoder = "onehot";
  std::vector<std::uint64_t> seeds;
  std::size_t epochs = 10;
  std::filesystem::path out = "out";
  bool offline = false;
  DatasetSpec dataset;
  std::string baseline = "TB";
  std::size_t workers = 1;
  std::string ablate_axis;
  std::vector<std::string> ablate_values;
  std::vector<CellSpec> cells;
  /// Every top-level key with its effective value, defaults included.
  std::map<std::string, std::string> resolved;

  void validate() const;
  /// `key = value` lines for every resolved key and cell.
  std::string resolved_text() const;
};

/// Parses the flat `key = value` format. `environment` supplies overrides for
/// top-level keys (ISQN_EPOCHS=3 overrides `epochs`). Errors carry
/// `source:line:` prefixes.
ExperimentSpec parse_experiment(const std::string& text, const std::string& source,
                                const std::map<std::string, std::string>& environment = {});
ExperimentSpec load_experiment(const std::filesystem::path& path, bool use_environment = true);

/// Reads every ISQN_* variable from the process environment.
std::map<std::string, std::string> process_environment();

/// Applies `key = value` to a cell's training config (same keys as the
/// top level plus `mode`, `K`, `P` and `width`).
void apply_cell_key(TrainConfig& config, const std::string& key, const std::string& value);

TabularMdp resolve_env(const std::string& env);
FeatureEncoder resolve_encoder(const std::string& encoder, std::size_t n_states);

/// Outcome of one (cell, seed) run.
struct RunRecord {
  std::string cell;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string message;
  double auc = 0.0;
};

struct RunOptions {
  /// Skip (cell, seed) pairs already recorded in the manifest.
  bool resume = true;
  /// Receives one line per finished run.
  std::function<void(const std::string&)> progress;
};

struct SummaryRow {
  std::string cell;
  std::string axis_value;
  AucReport report;
  /// IQM and CI divided by the baseline cell's IQM; raw when it is absent or
  /// not positive.
  double normalized_iqm = 0.0;
  double normalized_lo = 0.0;
  double normalized_hi = 0.0;
  bool normalized = false;
};

struct Summary {
  std::string env;
  std::string baseline;
  bool baseline_present = false;
  std::vector<SummaryRow> rows;
  std::vector<std::string> missing;
  std::vector<std::string> warnings;
  bool any_diverged = false;
};

/// Runs every (cell, seed) pair and writes per-run CSVs, per-cell AUC
/// reports, the manifest, the config echo and the summary.
Summary run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Expands each non-baseline cell over the ablation axis values and runs the
/// result. Rows carry the axis value.
Summary ablate_experiment(const ExperimentSpec& spec, const std::string& axis,
                          const std::vector<std::string>& values, const RunOptions& options = {});

/// Rebuilds the summary from the CSVs listed in `dir`'s manifest and writes
/// report.json, report.txt and one joined CSV per metric column.
Summary report_directory(const std::filesystem::path& dir);

std::string summary_json(const Summary& summary);
std::string summary_table(const Summary& summary);

}  // namespace isqn
