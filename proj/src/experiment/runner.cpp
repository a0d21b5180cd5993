#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "experiment_internal.hpp"
#include "isqn/errors.hpp"
#include "isqn/offline.hpp"
#include "isqn/rng.hpp"
#include "isqn/train.hpp"

namespace isqn {

namespace {

struct Job {
  const CellSpec* cell;
  std::uint64_t seed;
};

RunRecord execute(const ExperimentSpec& spec, const TabularMdp& mdp, const FeatureEncoder& encoder,
                  const Job& job, const std::filesystem::path& dir) {
  TrainConfig config = job.cell->train;
  config.seed = job.seed;
  config.total_steps = spec.epochs * config.epoch_steps;
  TrainResult result = [&] {
    if (!spec.offline) return train_online(mdp, encoder, config);
    Rng data_rng = Rng::stream(job.seed, "dataset");
    const Matrix behaviour = epsilon_greedy_policy(value_iteration(mdp), spec.dataset.epsilon);
    const OfflineDataset data = generate_offline(mdp, behaviour, spec.dataset.size, spec.dataset.coverage,
                                                 config.horizon, data_rng, "epsilon-greedy optimal");
    return train_offline(mdp, data, encoder, config);
  }();
  const auto cell_dir = dir / job.cell->label;
  std::filesystem::create_directories(cell_dir);
  write_metrics_csv(run_csv_path(dir, job.cell->label, job.seed), result.rows);
  RunRecord record;
  record.cell = job.cell->label;
  record.seed = job.seed;
  record.diverged = result.diverged;
  record.message = result.message;
  for (const auto& row : result.rows) record.auc += row.norm_return;
  return record;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

Summary run_cells(const ExperimentSpec& spec, const std::vector<CellSpec>& cells,
                  const std::vector<std::string>& axis_values, const std::string& axis,
                  const RunOptions& options, const std::string& summary_stem) {
  const TabularMdp mdp = resolve_env(spec.env);
  const FeatureEncoder encoder = resolve_encoder(spec.encoder, mdp.n_states());
  const std::filesystem::path dir = spec.out;
  std::filesystem::create_directories(dir);
  write_text(dir / "config.resolved", spec.resolved_text());

  Manifest manifest;
  if (options.resume && std::filesystem::exists(dir / kManifestName)) {
    manifest = read_manifest(dir);
  }
  manifest.env = spec.env;
  manifest.baseline = spec.baseline;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    ManifestCell mc{cells[i].label, axis_values[i], spec.seeds, axis_values[i].empty() ? "" : axis};
    auto it = std::find_if(manifest.cells.begin(), manifest.cells.end(),
                           [&](const ManifestCell& c) { return c.label == mc.label; });
    if (it == manifest.cells.end()) {
      manifest.cells.push_back(mc);
    } else {
      *it = mc;
    }
  }

  std::vector<Job> jobs;
  for (const CellSpec& cell : cells) {
    for (std::uint64_t seed : spec.seeds) {
      const bool done = manifest.runs.count({cell.label, seed}) &&
                        std::filesystem::exists(run_csv_path(dir, cell.label, seed));
      if (!done) jobs.push_back({&cell, seed});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        RunRecord r = execute(spec, mdp, encoder, jobs[i], dir);
        std::lock_guard<std::mutex> guard(lock);
        manifest.runs[{r.cell, r.seed}] = r;
        if (options.progress) {
          options.progress(r.cell + " seed " + std::to_string(r.seed) +
                           (r.diverged ? " diverged: " + r.message : " done"));
        }
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!failure) failure = std::current_exception();
        next.store(jobs.size());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(spec.workers, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  write_manifest(dir, manifest);
  Summary summary = summarize(dir, manifest, cells_of(manifest, cells));
  for (const SummaryRow& row : summary.rows) {
    write_text(dir / row.cell / "auc.json", auc_report_json(row.report));
  }
  write_text(dir / (summary_stem + ".json"), summary_json(summary));
  write_text(dir / (summary_stem + ".txt"), summary_table(summary));
  return summary;
}

}  // namespace

Summary run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
  spec.validate();
  std::vector<std::string> axis_values(spec.cells.size());
  return run_cells(spec, spec.cells, axis_values, "", options, "summary");
}

Summary ablate_experiment(const ExperimentSpec& spec, const std::string& axis,
                          const std::vector<std::string>& values, const RunOptions& options) {
  spec.validate();
  if (axis != "K" && axis != "T" && axis != "width") throw ConfigError("ablation axis must be K, T or width");
  if (values.empty()) throw ConfigError("ablation needs at least one axis value");
  std::vector<CellSpec> cells;
  std::vector<std::string> axis_values;
  for (const CellSpec& base : spec.cells) {
    if (base.label == spec.baseline) {
      cells.push_back(base);
      axis_values.emplace_back();
      continue;
    }
    for (const std::string& v : values) {
      CellSpec cell = base;
      cell.label = base.label + "@" + axis + "=" + v;
      cell.overrides[axis] = v;
      apply_cell_key(cell.train, axis, v);
      TrainConfig probe = cell.train;
      probe.net.input_dim = 1;
      probe.net.n_actions = 2;
      probe.validate();
      cells.push_back(std::move(cell));
      axis_values.push_back(v);
    }
  }
  return run_cells(spec, cells, axis_values, axis, options, "ablation_" + axis);
}

}  // namespace isqn
