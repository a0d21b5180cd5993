#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "experiment_internal.hpp"
#include "isqn/errors.hpp"
#include "isqn/stats.hpp"
#include "json.hpp"

namespace isqn {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::filesystem::path run_csv_path(const std::filesystem::path& dir, const std::string& cell,
                                   std::uint64_t seed) {
  return dir / cell / ("seed_" + std::to_string(seed) + ".csv");
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  if (!std::filesystem::exists(path)) throw ConfigError("no runs found in " + dir.string());
  try {
    const json doc = json::parse(read_text(path));
    Manifest m;
    m.env = doc.at("env").get<std::string>();
    m.baseline = doc.at("baseline").get<std::string>();
    for (const json& c : doc.at("cells")) {
      m.cells.push_back({c.at("label").get<std::string>(), c.at("axis_value").get<std::string>(),
                         c.at("seeds").get<std::vector<std::uint64_t>>(), c.at("axis").get<std::string>()});
    }
    for (const json& r : doc.at("runs")) {
      RunRecord rec;
      rec.cell = r.at("cell").get<std::string>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.diverged = r.at("diverged").get<bool>();
      rec.message = r.at("message").get<std::string>();
      rec.auc = r.at("auc").get<double>();
      m.runs[{rec.cell, rec.seed}] = rec;
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed manifest: " + e.what());
  }
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  json doc;
  doc["env"] = m.env;
  doc["baseline"] = m.baseline;
  json cells = json::array();
  for (const auto& c : m.cells) {
    cells.push_back({{"label", c.label}, {"axis", c.axis}, {"axis_value", c.axis_value}, {"seeds", c.seeds}});
  }
  doc["cells"] = std::move(cells);
  json runs = json::array();
  for (const auto& [key, r] : m.runs) {
    runs.push_back({{"cell", r.cell}, {"seed", r.seed}, {"diverged", r.diverged}, {"message", r.message},
                    {"auc", r.auc}});
  }
  doc["runs"] = std::move(runs);
  write_text(dir / kManifestName, doc.dump(2) + "\n");
}

std::vector<ManifestCell> cells_of(const Manifest& manifest, const std::vector<CellSpec>& cells) {
  std::vector<ManifestCell> out;
  for (const CellSpec& c : cells) {
    auto it = std::find_if(manifest.cells.begin(), manifest.cells.end(),
                           [&](const ManifestCell& m) { return m.label == c.label; });
    if (it != manifest.cells.end()) out.push_back(*it);
  }
  return out;
}

Summary summarize(const std::filesystem::path& dir, const Manifest& manifest,
                  const std::vector<ManifestCell>& cells) {
  Summary s;
  s.env = manifest.env;
  s.baseline = manifest.baseline;
  for (const ManifestCell& cell : cells) {
    SummaryRow row;
    row.cell = cell.label;
    row.axis_value = cell.axis_value;
    row.report.cell = cell.label;
    row.report.env = manifest.env;
    std::vector<double> aucs;
    for (std::uint64_t seed : cell.seeds) {
      const auto path = run_csv_path(dir, cell.label, seed);
      auto it = manifest.runs.find({cell.label, seed});
      if (it == manifest.runs.end() || !std::filesystem::exists(path)) {
        s.missing.push_back(cell.label + "/seed_" + std::to_string(seed));
        continue;
      }
      double a = 0.0;
      for (const MetricsRow& r : read_metrics_csv(path)) a += r.norm_return;
      row.report.runs.push_back({seed, a, it->second.diverged});
      s.any_diverged |= it->second.diverged;
      aucs.push_back(a);
    }
    if (!aucs.empty()) {
      const IqmResult point = iqm(aucs);
      const ConfidenceInterval ci = stratified_bootstrap_ci({aucs});
      row.report.iqm = point.value;
      row.report.plain_mean = point.plain_mean;
      row.report.ci_lo = std::min(ci.lo, point.value);
      row.report.ci_hi = std::max(ci.hi, point.value);
      row.report.degenerate_ci = ci.degenerate;
    }
    s.rows.push_back(std::move(row));
  }
  const auto base = std::find_if(s.rows.begin(), s.rows.end(), [&](const SummaryRow& r) {
    return r.cell == s.baseline && !r.report.runs.empty();
  });
  s.baseline_present = base != s.rows.end() && base->report.iqm > 0.0;
  const double scale = s.baseline_present ? base->report.iqm : 1.0;
  if (!s.baseline_present) {
    s.warnings.push_back("baseline cell '" + s.baseline + "' absent or not positive; reporting raw IQM AUC");
  }
  for (SummaryRow& r : s.rows) {
    r.normalized = s.baseline_present;
    r.normalized_iqm = r.report.iqm / scale;
    r.normalized_lo = r.report.ci_lo / scale;
    r.normalized_hi = r.report.ci_hi / scale;
  }
  for (const SummaryRow& r : s.rows) {
    if (r.report.plain_mean && !r.report.runs.empty()) {
      s.warnings.push_back("cell '" + r.cell + "' has fewer than 4 runs; IQM is a plain mean");
    }
    if (r.report.degenerate_ci) s.warnings.push_back("cell '" + r.cell + "' has a degenerate CI");
  }
  return s;
}

std::string summary_json(const Summary& s) {
  json doc;
  doc["env"] = s.env;
  doc["baseline"] = s.baseline;
  doc["baseline_present"] = s.baseline_present;
  json rows = json::array();
  for (const SummaryRow& r : s.rows) {
    std::size_t diverged = 0;
    for (const auto& run : r.report.runs) diverged += run.diverged;
    rows.push_back({{"cell", r.cell},
                    {"axis_value", r.axis_value},
                    {"runs", r.report.runs.size()},
                    {"diverged", diverged},
                    {"iqm_auc", r.report.iqm},
                    {"ci_lo", r.report.ci_lo},
                    {"ci_hi", r.report.ci_hi},
                    {"normalized", r.normalized},
                    {"normalized_iqm_auc", r.normalized_iqm},
                    {"normalized_ci_lo", r.normalized_lo},
                    {"normalized_ci_hi", r.normalized_hi}});
  }
  doc["rows"] = std::move(rows);
  doc["missing"] = s.missing;
  doc["warnings"] = s.warnings;
  doc["any_diverged"] = s.any_diverged;
  return doc.dump(2) + "\n";
}

std::string summary_table(const Summary& s) {
  std::size_t w = 4;
  for (const auto& r : s.rows) w = std::max(w, r.cell.size());
  std::string out = fmt::format("env: {}   baseline: {}{}\n", s.env, s.baseline,
                                s.baseline_present ? "" : " (absent, raw values)");
  out += fmt::format("{:<{}}  {:>6}  {:>4}  {:>10}  {:>21}  {:>10}  {:>21}\n", "cell", w, "axis", "runs",
                     "IQM AUC", "95% CI", "norm IQM", "norm 95% CI");
  for (const auto& r : s.rows) {
    out += fmt::format("{:<{}}  {:>6}  {:>4}  {:>10.4f}  [{:>9.4f}, {:>9.4f}]  {:>10.4f}  [{:>9.4f}, {:>9.4f}]\n",
                       r.cell, w, r.axis_value.empty() ? "-" : r.axis_value, r.report.runs.size(),
                       r.report.iqm, r.report.ci_lo, r.report.ci_hi, r.normalized_iqm, r.normalized_lo,
                       r.normalized_hi);
  }
  for (const auto& m : s.missing) out += "missing: " + m + "\n";
  for (const auto& m : s.warnings) out += "warning: " + m + "\n";
  return out;
}

Summary report_directory(const std::filesystem::path& dir) {
  const Manifest manifest = read_manifest(dir);
  if (manifest.runs.empty()) throw ConfigError("no runs found in " + dir.string());
  Summary s = summarize(dir, manifest, manifest.cells);
  write_text(dir / "report.json", summary_json(s));
  write_text(dir / "report.txt", summary_table(s));

  // One joined time series per metric column: epoch followed by cell/seed columns.
  static const char* kColumns[] = {"return", "norm_return", "loss", "churn", "cos_tb",
                                   "cos_tf", "srank", "dormant"};
  std::vector<std::string> names;
  std::vector<std::vector<MetricsRow>> series;
  for (const ManifestCell& cell : manifest.cells) {
    for (std::uint64_t seed : cell.seeds) {
      const auto path = run_csv_path(dir, cell.label, seed);
      if (!manifest.runs.count({cell.label, seed}) || !std::filesystem::exists(path)) continue;
      names.push_back(cell.label + "/seed_" + std::to_string(seed));
      series.push_back(read_metrics_csv(path));
    }
  }
  std::size_t epochs = 0;
  for (const auto& rows : series) epochs = std::max(epochs, rows.size());
  for (const char* column : kColumns) {
    std::string text = "epoch";
    for (const auto& n : names) text += "," + n;
    text += "\n";
    for (std::size_t e = 0; e < epochs; ++e) {
      text += std::to_string(e + 1);
      for (const auto& rows : series) {
        text += ',';
        if (e >= rows.size()) continue;
        const MetricsRow& r = rows[e];
        const std::string col = column;
        std::optional<double> v;
        if (col == "return") v = r.ret;
        else if (col == "norm_return") v = r.norm_return;
        else if (col == "loss") v = r.loss;
        else if (col == "churn") v = r.churn;
        else if (col == "cos_tb") v = r.cos_tb;
        else if (col == "cos_tf") v = r.cos_tf;
        else if (col == "srank" && r.srank) v = static_cast<double>(*r.srank);
        else if (col == "dormant") v = r.dormant;
        if (v) text += format_double(*v);
      }
      text += "\n";
    }
    write_text(dir / (std::string("metrics_") + column + ".csv"), text);
  }
  return s;
}

}  // namespace isqn
