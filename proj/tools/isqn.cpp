#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "isqn/errors.hpp"
#include "isqn/experiment.hpp"
#include "isqn/mdp.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kDiverged = 2 };

struct Flags {
  std::string seeds;
  std::string out;
  std::size_t workers = 0;
  bool resume = true;
};

isqn::ExperimentSpec load_with_flags(const std::string& path, const Flags& flags) {
  auto env = isqn::process_environment();
  const std::string prefix = isqn::kEnvPrefix;
  if (!flags.seeds.empty()) env[prefix + "SEEDS"] = flags.seeds;
  if (!flags.out.empty()) env[prefix + "OUT"] = flags.out;
  if (flags.workers > 0) env[prefix + "WORKERS"] = std::to_string(flags.workers);
  std::ifstream in(path);
  if (!in) throw isqn::ConfigError("cannot read experiment file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return isqn::parse_experiment(buf.str(), path, env);
}

int finish(const isqn::Summary& summary) {
  std::cout << isqn::summary_table(summary);
  return summary.any_diverged ? kDiverged : kOk;
}

void print_oracle(const std::string& source) {
  const isqn::TabularMdp mdp = isqn::resolve_env(source);
  const isqn::Matrix q = isqn::value_iteration(mdp);
  const auto greedy = isqn::greedy_actions(q);
  std::cout << fmt::format("# {}: {} states, {} actions, gamma {}\n", mdp.name(), mdp.n_states(),
                           mdp.n_actions(), mdp.gamma());
  std::cout << "state";
  for (std::size_t a = 0; a < mdp.n_actions(); ++a) std::cout << ",q" << a;
  std::cout << ",greedy\n";
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    std::cout << s;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) std::cout << fmt::format(",{:.10f}", q(s, a));
    std::cout << ',' << greedy[s] << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iterated shared Q-network experiments"};
  app.require_subcommand(1);
  Flags flags;
  auto add_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seeds", flags.seeds, "seed list or range, e.g. 0-19 or 1,4,9");
    cmd->add_option("--workers", flags.workers, "parallel runs")->check(CLI::PositiveNumber);
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_flag("--resume,!--no-resume", flags.resume, "skip runs recorded in the manifest (default on)");
  };

  std::string spec_path;
  auto* run = app.add_subcommand("run", "run every cell and seed of an experiment file");
  run->add_option("spec", spec_path, "experiment file")->required();
  add_flags(run);

  std::string axis;
  std::vector<std::string> values;
  auto* ablate = app.add_subcommand("ablate", "sweep one axis over the non-baseline cells");
  ablate->add_option("spec", spec_path, "experiment file")->required();
  ablate->add_option("--axis", axis, "K, T or width")->check(CLI::IsMember({"K", "T", "width"}));
  ablate->add_option("--values", values, "axis values (default: ablate.values)")->delimiter(',');
  add_flags(ablate);

  std::string dir;
  auto* report = app.add_subcommand("report", "rebuild the comparison report of an output directory");
  report->add_option("dir", dir, "output directory")->required();

  std::string mdp_source;
  auto* oracle = app.add_subcommand("oracle", "print the value-iteration Q* table");
  oracle->add_option("mdp", mdp_source, "MDP json file, chain or gridworld")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  isqn::RunOptions options;
  options.progress = [](const std::string& line) { std::cerr << line << '\n'; };
  try {
    if (*run) {
      options.resume = flags.resume;
      return finish(isqn::run_experiment(load_with_flags(spec_path, flags), options));
    }
    if (*ablate) {
      options.resume = flags.resume;
      const isqn::ExperimentSpec spec = load_with_flags(spec_path, flags);
      const std::string a = axis.empty() ? spec.ablate_axis : axis;
      const auto v = values.empty() ? spec.ablate_values : values;
      if (a.empty()) throw isqn::ConfigError("no ablation axis: pass --axis or set ablate.axis");
      return finish(isqn::ablate_experiment(spec, a, v, options));
    }
    if (*report) {
      const isqn::Summary s = isqn::report_directory(dir);
      std::cout << isqn::summary_table(s);
      return s.any_diverged ? kDiverged : kOk;
    }
    print_oracle(mdp_source);
    return kOk;
  } catch (const isqn::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const isqn::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const isqn::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
}
