#include "isqn/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "isqn/errors.hpp"
#include "json.hpp"

namespace isqn {

using nlohmann::json;

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

namespace {

void put(std::string& out, const std::optional<double>& v) {
  out += ',';
  if (v) {
    if (!std::isfinite(*v)) throw NumericError("metrics row holds a non-finite value");
    out += format_double(*v);
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + cell + "' is not a number");
  }
}

std::size_t parse_count(const std::string& cell, const std::string& where) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size()) {
    throw ConfigError(where + ": '" + cell + "' is not a count");
  }
  return v;
}

std::optional<double> parse_optional(const std::string& cell, const std::string& where) {
  if (cell.empty()) return std::nullopt;
  return parse_double(cell, where);
}

}  // namespace

std::string metrics_csv_text(const std::vector<MetricsRow>& rows) {
  std::string out = kMetricsHeader;
  out += '\n';
  for (const MetricsRow& r : rows) {
    if (!std::isfinite(r.ret) || !std::isfinite(r.norm_return)) {
      throw NumericError("metrics row holds a non-finite return");
    }
    out += std::to_string(r.epoch);
    out += ',' + format_double(r.ret);
    out += ',' + format_double(r.norm_return);
    put(out, r.loss);
    put(out, r.churn);
    put(out, r.cos_tb);
    put(out, r.cos_tf);
    out += ',';
    if (r.srank) out += std::to_string(*r.srank);
    put(out, r.dormant);
    out += ',' + std::to_string(r.params_online);
    out += ',' + std::to_string(r.params_total);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  const std::string text = metrics_csv_text(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ConfigError(source + ":1: unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto c = split(line);
    if (c.size() != 11) throw ConfigError(where + ": expected 11 columns, got " + std::to_string(c.size()));
    MetricsRow r;
    r.epoch = parse_count(c[0], where);
    r.ret = parse_double(c[1], where);
    r.norm_return = parse_double(c[2], where);
    r.loss = parse_optional(c[3], where);
    r.churn = parse_optional(c[4], where);
    r.cos_tb = parse_optional(c[5], where);
    r.cos_tf = parse_optional(c[6], where);
    if (!c[7].empty()) r.srank = parse_count(c[7], where);
    r.dormant = parse_optional(c[8], where);
    r.params_online = parse_count(c[9], where);
    r.params_total = parse_count(c[10], where);
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_metrics_csv(buf.str(), path.string());
}

std::string auc_report_json(const AucReport& report) {
  json doc;
  doc["cell"] = report.cell;
  doc["env"] = report.env;
  json runs = json::array();
  for (const SeedAuc& r : report.runs) {
    runs.push_back({{"seed", r.seed}, {"auc", r.auc}, {"diverged", r.diverged}});
  }
  doc["runs"] = std::move(runs);
  doc["iqm"] = report.iqm;
  doc["ci_lo"] = report.ci_lo;
  doc["ci_hi"] = report.ci_hi;
  doc["plain_mean"] = report.plain_mean;
  doc["degenerate_ci"] = report.degenerate_ci;
  return doc.dump(2) + "\n";
}

AucReport parse_auc_report(const std::string& text) {
  try {
    const json doc = json::parse(text);
    AucReport r;
    r.cell = doc.at("cell").get<std::string>();
    r.env = doc.at("env").get<std::string>();
    for (const json& run : doc.at("runs")) {
      r.runs.push_back({run.at("seed").get<std::uint64_t>(), run.at("auc").get<double>(),
                        run.at("diverged").get<bool>()});
    }
    r.iqm = doc.at("iqm").get<double>();
    r.ci_lo = doc.at("ci_lo").get<double>();
    r.ci_hi = doc.at("ci_hi").get<double>();
    r.plain_mean = doc.at("plain_mean").get<bool>();
    r.degenerate_ci = doc.at("degenerate_ci").get<bool>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed AUC report: ") + e.what());
  }
}

}  // namespace isqn
