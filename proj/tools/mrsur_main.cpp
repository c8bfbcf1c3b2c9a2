// Benchmark CLI: sequential multi-fidelity designs on the bundled testbeds.
//
//   mrsur run-1d         --reps 20 --budget 13.5 --strategy mrsur --out out_1d
//   mrsur run-oscillator --strategy "sur-fixed(0.1)" --out out_osc
//   mrsur run-toy        --out out_toy
//   mrsur pareto         --config toy.cfg --out out_pareto
//
// Any config key can be overridden with --set key=value; see README.md for
// the key reference.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrsur/mrsur.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<double> budget;
  std::optional<std::string> strategy;
  std::optional<int> batch_size;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key=value config file");
  cmd->add_option("--seed", args.seed, "master seed");
  cmd->add_option("--reps", args.reps, "number of repetitions");
  cmd->add_option("--budget", args.budget, "total evaluation budget (cost units)");
  cmd->add_option("--strategy", args.strategy,
                  "mrsur | sur-fixed(<delta>) | mrsur-batch(<q>)");
  cmd->add_option("--batch-size", args.batch_size, "batch size for mrsur-batch");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--set", args.overrides, "extra key=value overrides")
      ->take_all();
}

mrsur::ExperimentConfig resolve(mrsur::TestbedId id, const CommonArgs& args) {
  mrsur::ExperimentConfig cfg = args.config_path.empty()
                                    ? mrsur::default_config(id)
                                    : mrsur::load_config_file(args.config_path, id);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw mrsur::ConfigError("--set expects key=value");
    mrsur::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed) cfg.seed = *args.seed;
  if (args.reps) cfg.reps = *args.reps;
  if (args.budget) cfg.budget = *args.budget;
  if (args.strategy) cfg.strategy = mrsur::parse_strategy(*args.strategy);
  if (args.batch_size) cfg.strategy.batch_size = *args.batch_size;
  if (args.out) cfg.out_dir = *args.out;
  return cfg;
}

int run_testbed(mrsur::TestbedId id, const CommonArgs& args) {
  const mrsur::ExperimentConfig cfg = resolve(id, args);
  std::cerr << "running " << mrsur::strategy_name(cfg.strategy) << ", reps=" << cfg.reps
            << ", budget=" << cfg.budget << " -> " << cfg.out_dir << "\n";
  mrsur::ExperimentRunner runner(cfg);
  const std::vector<mrsur::RunRecord> records = runner.run();
  mrsur::export_results(records, cfg, cfg.out_dir);
  const mrsur::MedianCurve curve =
      mrsur::aggregate_median(records, mrsur::default_cost_grid(records));
  if (!curve.cost.empty()) {
    std::cout << "final cost " << curve.cost.back() << ", median error "
              << curve.median_error.back() << "\n";
  }
  std::cout << "results written to " << cfg.out_dir << "\n";
  return 0;
}

int run_pareto(const CommonArgs& args, const std::string& testbed_name) {
  mrsur::TestbedId id = mrsur::TestbedId::toy;
  if (testbed_name == "forrester") id = mrsur::TestbedId::forrester;
  else if (testbed_name == "oscillator") id = mrsur::TestbedId::oscillator;
  else if (testbed_name == "toy") id = mrsur::TestbedId::toy;
  else throw mrsur::ConfigError("unknown testbed '" + testbed_name + "'");
  const mrsur::ExperimentConfig cfg = resolve(id, args);
  mrsur::ExperimentRunner runner(cfg);
  const mrsur::CriterionField field = runner.initial_field(0);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream os(std::filesystem::path(cfg.out_dir) / "criterion_field.csv",
                   std::ios::binary);
  os.precision(17);
  mrsur::to_csv(field, os);
  const mrsur::CandidateRecord& best = field.records[field.best];
  std::cout.precision(10);
  std::cout << "H = " << field.H << "\n";
  std::cout << "selected: delta = " << best.candidate.points[0].delta << ", u =";
  const mrsur::Point natural(
      cfg.u_box.from_unit(best.candidate.points[0].u), best.candidate.points[0].delta);
  for (int j = 0; j < natural.u.size(); ++j) std::cout << " " << natural.u[j];
  std::cout << " (cost " << best.candidate.cost << ", G " << best.G << ", rate "
            << best.rate << ", on front: " << (best.on_pareto ? "yes" : "no") << ")\n";
  std::cout << "field written to " << cfg.out_dir << "/criterion_field.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware sequential design benchmarks for multi-fidelity simulators"};
  app.require_subcommand(1);

  CommonArgs a1, a2, a3, a4;
  std::string pareto_testbed = "toy";

  CLI::App* run1d = app.add_subcommand("run-1d", "two-level 1-D exceedance benchmark");
  add_common(run1d, a1);
  CLI::App* runosc =
      app.add_subcommand("run-oscillator", "random damped oscillator benchmark");
  add_common(runosc, a2);
  CLI::App* runtoy = app.add_subcommand("run-toy", "sampled-GP toy benchmark");
  add_common(runtoy, a3);
  CLI::App* pareto = app.add_subcommand(
      "pareto", "criterion field + Pareto front at the initial design");
  add_common(pareto, a4);
  pareto->add_option("--testbed", pareto_testbed, "forrester | oscillator | toy");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run1d->parsed()) return run_testbed(mrsur::TestbedId::forrester, a1);
    if (runosc->parsed()) return run_testbed(mrsur::TestbedId::oscillator, a2);
    if (runtoy->parsed()) return run_testbed(mrsur::TestbedId::toy, a3);
    if (pareto->parsed()) return run_pareto(a4, pareto_testbed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
