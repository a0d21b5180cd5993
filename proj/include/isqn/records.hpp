#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace isqn {

/// One CSV row per epoch. Optional cells are written empty.
struct MetricsRow {
  std::size_t epoch = 0;
  double ret = 0.0;
  double norm_return = 0.0;
  std::optional<double> loss;
  std::optional<double> churn;
  std::optional<double> cos_tb;
  std::optional<double> cos_tf;
  std::optional<std::size_t> srank;
  std::optional<double> dormant;
  std::size_t params_online = 0;
  std::size_t params_total = 0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "epoch,return,norm_return,loss,churn,cos_tb,cos_tf,srank,dormant,params_online,params_total";

/// Doubles are written with 17 significant digits so that reading the file
/// back reproduces every value exactly.
std::string metrics_csv_text(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source = "csv");
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct SeedAuc {
  std::uint64_t seed = 0;
  double auc = 0.0;
  bool diverged = false;

  bool operator==(const SeedAuc&) const = default;
};

struct AucReport {
  std::string cell;
  std::string env;
  std::vector<SeedAuc> runs;
  double iqm = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool plain_mean = false;
  bool degenerate_ci = false;

  bool operator==(const AucReport&) const = default;
};

std::string auc_report_json(const AucReport& report);
AucReport parse_auc_report(const std::string& text);

/// Shortest-round-trip rendering with 17 significant digits.
std::string format_double(double value);

}  // namespace isqn
