#ifndef MRSUR_HARNESS_HPP
#define MRSUR_HARNESS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mrsur/criteria.hpp"
#include "mrsur/dataset.hpp"
#include "mrsur/design.hpp"
#include "mrsur/errors.hpp"
#include "mrsur/inference.hpp"
#include "mrsur/mf_models.hpp"
#include "mrsur/rng.hpp"
#include "mrsur/testbeds.hpp"

// End-to-end experiment orchestration: initial nested design, MAP plug-in
// model fitting, the sequential loop (fixed-level SUR, MR-SUR, batch MR-SUR),
// repetitions, error metrics against a reference, and CSV export.

namespace mrsur {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class TestbedId { forrester, oscillator, toy };

enum class StrategyKind { mrsur, sur_fixed, mrsur_batch };

struct Strategy {
  StrategyKind kind = StrategyKind::mrsur;
  double fixed_level = 0.0;  // sur-fixed(delta)
  int batch_size = 1;        // mrsur-batch(q)
};

inline Strategy parse_strategy(const std::string& text) {
  Strategy s;
  auto arg_of = [&](const std::string& prefix) -> std::optional<std::string> {
    if (text.rfind(prefix + "(", 0) == 0 && text.back() == ')') {
      return text.substr(prefix.size() + 1, text.size() - prefix.size() - 2);
    }
    if (text == prefix) return std::string();
    return std::nullopt;
  };
  if (auto a = arg_of("mrsur-batch")) {
    s.kind = StrategyKind::mrsur_batch;
    s.batch_size = a->empty() ? 5 : std::stoi(*a);
    if (s.batch_size < 1) throw ConfigError("strategy: batch size must be >= 1");
    return s;
  }
  if (auto a = arg_of("sur-fixed")) {
    if (a->empty()) throw ConfigError("strategy: sur-fixed needs a level, e.g. sur-fixed(0.1)");
    s.kind = StrategyKind::sur_fixed;
    s.fixed_level = std::stod(*a);
    return s;
  }
  if (auto a = arg_of("mrsur")) {
    (void)a;
    s.kind = StrategyKind::mrsur;
    return s;
  }
  throw ConfigError("unknown strategy '" + text + "'");
}

inline std::string strategy_name(const Strategy& s) {
  std::ostringstream os;
  os.precision(17);
  switch (s.kind) {
    case StrategyKind::mrsur:
      return "mrsur";
    case StrategyKind::sur_fixed:
      os << "sur-fixed(" << s.fixed_level << ")";
      return os.str();
    case StrategyKind::mrsur_batch:
      os << "mrsur-batch(" << s.batch_size << ")";
      return os.str();
  }
  return "mrsur";
}

struct ExperimentConfig {
  TestbedId testbed = TestbedId::forrester;
  std::string model = "ar";       // "ar" | "additive" (toy always uses the fixed toy prior)
  std::vector<double> levels;     // fidelity values, lowest fidelity first
  std::vector<double> candidate_levels;  // defaults to levels
  CostModel cost;
  std::vector<int> init_sizes;    // aligned with levels; zero entries allowed as a tail
  Strategy strategy;
  double budget = 0.0;
  int reps = 1;
  std::uint64_t seed = 1;
  int nodes = 0;                  // 0: 500 in 1-D, 2000 otherwise
  std::string node_kind = "mc";   // "mc" | "grid"
  std::uint64_t nodes_seed = 9001;
  int mcmc_init = 10000;
  int mcmc_update = 2000;
  int mcmc_warmup = 200;
  int map_evals = 0;              // 0: inference default
  int grid = 0;                   // candidate grid points per dimension; 0: 101 (1-D) / 11
  int local_steps = 20;           // halvings of the local refinement
  Box u_box;
  double z_crit = 0.0;
  double delta_ref = 0.0;
  int threads = 0;                // 0: hardware concurrency
  std::string out_dir = "out";
  int max_iters = 100000;
  bool dump_fields = false;       // store the per-iteration criterion field of rep 0
  int maximin_factor = 100;       // maximin move budget = factor * total design size
  bool verbose = false;
  // oscillator
  double t_end = 30.0;
  double s_intensity = 1e-3;
  int reference_samples = 600;
  std::uint64_t reference_seed = 4242;
  // toy
  int toy_grid = 201;
  double toy_noise_sd = 0.4;

  int dim() const { return static_cast<int>(u_box.dim()); }
};

inline ExperimentConfig default_config(TestbedId id) {
  ExperimentConfig c;
  c.testbed = id;
  switch (id) {
    case TestbedId::forrester: {
      c.model = "ar";
      c.levels = {1.0, 2.0};
      c.cost = CostModel::table_model({1.0, 2.0}, {0.25, 1.0});
      c.init_sizes = {6, 3};
      c.budget = 13.5;
      c.reps = 20;
      c.nodes = 500;
      c.grid = 101;
      c.u_box = Box::unit(1);
      c.z_crit = 10.0;
      c.delta_ref = 2.0;
      c.mcmc_init = 6000;
      c.mcmc_update = 600;
      c.out_dir = "out_forrester";
      break;
    }
    case TestbedId::oscillator: {
      c.model = "additive";
      c.levels = {1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 1.0 / 6.0, 0.1, 0.05, 0.02, 0.01};
      c.cost = CostModel::affine_model(0.0098, 0.0208);
      c.init_sizes = {180, 60, 20, 10, 5, 0, 0, 0, 0, 0};
      c.budget = 20.0;
      c.reps = 8;
      c.nodes = 2000;
      c.grid = 11;
      Eigen::VectorXd lo(2), hi(2);
      lo << 0.5, 0.01;
      hi << 10.0, 0.5;
      c.u_box = Box(lo, hi);
      c.z_crit = -3.0;
      c.delta_ref = 0.01;
      c.out_dir = "out_oscillator";
      break;
    }
    case TestbedId::toy: {
      c.model = "additive";
      c.levels = {1.0, 0.5, 0.2, 0.1};
      c.cost = CostModel::table_model({1.0, 0.5, 0.2, 0.1}, {1.0, 2.0, 5.0, 10.0});
      c.init_sizes = {12, 6, 6, 3};
      c.budget = 120.0;
      c.reps = 1;
      c.nodes = 201;
      c.node_kind = "grid";
      c.grid = 201;
      Eigen::VectorXd lo(1), hi(1);
      lo << -0.5;
      hi << 0.5;
      c.u_box = Box(lo, hi);
      c.z_crit = 0.0;
      c.delta_ref = 0.0;
      c.dump_fields = true;
      c.out_dir = "out_toy";
      break;
    }
  }
  c.candidate_levels = c.levels;
  return c;
}

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

inline Box parse_box(const std::string& s) {
  std::vector<double> lo, hi;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto sep = tok.find(':');
    if (sep == std::string::npos) throw ConfigError("u_box entries must be lo:hi");
    lo.push_back(std::stod(tok.substr(0, sep)));
    hi.push_back(std::stod(tok.substr(sep + 1)));
  }
  Eigen::VectorXd l(lo.size()), h(hi.size());
  for (std::size_t j = 0; j < lo.size(); ++j) {
    l[j] = lo[j];
    h[j] = hi[j];
  }
  return Box(l, h);
}

inline CostModel parse_cost(const std::string& s, const std::vector<double>& levels) {
  if (s.rfind("affine:", 0) == 0) {
    const auto v = parse_double_list(s.substr(7));
    if (v.size() != 2) throw ConfigError("costs: affine form needs a,b");
    return CostModel::affine_model(v[0], v[1]);
  }
  if (s.rfind("table:", 0) == 0) {
    const auto v = parse_double_list(s.substr(6));
    if (v.size() != levels.size()) throw ConfigError("costs: table size must match levels");
    return CostModel::table_model(levels, v);
  }
  throw ConfigError("costs must be 'affine:a,b' or 'table:c1,c2,...'");
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  const auto b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Applies one "key = value" override.
inline void apply_override(ExperimentConfig& c, const std::string& key,
                           const std::string& value) {
  if (key == "testbed") {
    if (value == "forrester") c.testbed = TestbedId::forrester;
    else if (value == "oscillator") c.testbed = TestbedId::oscillator;
    else if (value == "toy") c.testbed = TestbedId::toy;
    else throw ConfigError("unknown testbed '" + value + "'");
  } else if (key == "model") {
    if (value != "ar" && value != "additive") throw ConfigError("model must be ar|additive");
    c.model = value;
  } else if (key == "levels") {
    c.levels = detail::parse_double_list(value);
  } else if (key == "candidate_levels") {
    c.candidate_levels = detail::parse_double_list(value);
  } else if (key == "costs") {
    c.cost = detail::parse_cost(value, c.levels);
  } else if (key == "init_sizes") {
    c.init_sizes = detail::parse_int_list(value);
  } else if (key == "strategy") {
    c.strategy = parse_strategy(value);
  } else if (key == "budget") {
    c.budget = std::stod(value);
  } else if (key == "reps") {
    c.reps = std::stoi(value);
  } else if (key == "seed") {
    c.seed = std::stoull(value);
  } else if (key == "nodes") {
    c.nodes = std::stoi(value);
  } else if (key == "node_kind") {
    if (value != "mc" && value != "grid") throw ConfigError("node_kind must be mc|grid");
    c.node_kind = value;
  } else if (key == "nodes_seed") {
    c.nodes_seed = std::stoull(value);
  } else if (key == "mcmc_init") {
    c.mcmc_init = std::stoi(value);
  } else if (key == "mcmc_update") {
    c.mcmc_update = std::stoi(value);
  } else if (key == "mcmc_warmup") {
    c.mcmc_warmup = std::stoi(value);
  } else if (key == "map_evals") {
    c.map_evals = std::stoi(value);
  } else if (key == "grid") {
    c.grid = std::stoi(value);
  } else if (key == "local_steps") {
    c.local_steps = std::stoi(value);
  } else if (key == "u_box") {
    c.u_box = detail::parse_box(value);
  } else if (key == "z_crit") {
    c.z_crit = std::stod(value);
  } else if (key == "delta_ref") {
    c.delta_ref = std::stod(value);
  } else if (key == "threads") {
    c.threads = std::stoi(value);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "max_iters") {
    c.max_iters = std::stoi(value);
  } else if (key == "dump_fields") {
    c.dump_fields = (value == "1" || value == "true");
  } else if (key == "maximin_factor") {
    c.maximin_factor = std::stoi(value);
  } else if (key == "verbose") {
    c.verbose = (value == "1" || value == "true");
  } else if (key == "batch_size") {
    c.strategy.batch_size = std::stoi(value);
  } else if (key == "t_end") {
    c.t_end = std::stod(value);
  } else if (key == "s_intensity") {
    c.s_intensity = std::stod(value);
  } else if (key == "reference_samples") {
    c.reference_samples = std::stoi(value);
  } else if (key == "reference_seed") {
    c.reference_seed = std::stoull(value);
  } else if (key == "toy_grid") {
    c.toy_grid = std::stoi(value);
  } else if (key == "toy_noise_sd") {
    c.toy_noise_sd = std::stod(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// Flat key = value file; '#' starts a comment.  "testbed" is applied first so
// later keys override that testbed's defaults.
inline ExperimentConfig load_config_file(const std::string& path,
                                         std::optional<TestbedId> forced = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    kv.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  TestbedId id = forced.value_or(TestbedId::forrester);
  for (const auto& [k, v] : kv) {
    if (k == "testbed" && !forced) {
      ExperimentConfig probe;
      apply_override(probe, k, v);
      id = probe.testbed;
    }
  }
  ExperimentConfig cfg = default_config(id);
  for (const auto& [k, v] : kv) {
    if (k == "testbed") continue;
    apply_override(cfg, k, v);
  }
  return cfg;
}

inline std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto list = [&](const auto& v) {
    std::ostringstream s;
    s.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
  };
  os << "testbed = "
     << (c.testbed == TestbedId::forrester
             ? "forrester"
             : (c.testbed == TestbedId::oscillator ? "oscillator" : "toy"))
     << "\n";
  os << "model = " << c.model << "\n";
  os << "levels = " << list(c.levels) << "\n";
  os << "candidate_levels = " << list(c.candidate_levels) << "\n";
  if (c.cost.kind == CostModel::Kind::affine) {
    os << "costs = affine:" << c.cost.a << "," << c.cost.b << "\n";
  } else {
    os << "costs = table:" << list(c.cost.costs) << "\n";
  }
  os << "init_sizes = " << list(c.init_sizes) << "\n";
  os << "strategy = " << strategy_name(c.strategy) << "\n";
  os << "budget = " << c.budget << "\n";
  os << "reps = " << c.reps << "\n";
  os << "seed = " << c.seed << "\n";
  os << "nodes = " << c.nodes << "\n";
  os << "node_kind = " << c.node_kind << "\n";
  os << "nodes_seed = " << c.nodes_seed << "\n";
  os << "mcmc_init = " << c.mcmc_init << "\n";
  os << "mcmc_update = " << c.mcmc_update << "\n";
  os << "mcmc_warmup = " << c.mcmc_warmup << "\n";
  os << "map_evals = " << c.map_evals << "\n";
  os << "grid = " << c.grid << "\n";
  os << "local_steps = " << c.local_steps << "\n";
  {
    std::ostringstream s;
    s.precision(17);
    for (int j = 0; j < c.dim(); ++j) {
      s << (j ? "," : "") << c.u_box.lo[j] << ":" << c.u_box.hi[j];
    }
    os << "u_box = " << s.str() << "\n";
  }
  os << "z_crit = " << c.z_crit << "\n";
  os << "delta_ref = " << c.delta_ref << "\n";
  os << "max_iters = " << c.max_iters << "\n";
  os << "dump_fields = " << (c.dump_fields ? 1 : 0) << "\n";
  os << "maximin_factor = " << c.maximin_factor << "\n";
  if (c.testbed == TestbedId::oscillator) {
    os << "t_end = " << c.t_end << "\n";
    os << "s_intensity = " << c.s_intensity << "\n";
    os << "reference_samples = " << c.reference_samples << "\n";
    os << "reference_seed = " << c.reference_seed << "\n";
  }
  if (c.testbed == TestbedId::toy) {
    os << "toy_grid = " << c.toy_grid << "\n";
    os << "toy_noise_sd = " << c.toy_noise_sd << "\n";
  }
  os << "rep_seeds =";
  for (int r = 0; r < c.reps; ++r) os << (r ? "," : " ") << mix_seed(c.seed, r);
  os << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Run records, error metric, aggregation
// ---------------------------------------------------------------------------

struct IterationRow {
  int iter = 0;                 // 0 = state after the initial design
  std::vector<Point> selected;  // natural coordinates; empty at iter 0
  double level = std::numeric_limits<double>::quiet_NaN();
  double cost_increment = 0.0;
  double c_n = 0.0;  // cumulative evaluation cost
  double H = 0.0;
  double error = 0.0;
  double wall_ms = 0.0;
};

struct RunRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  std::vector<IterationRow> rows;
  std::map<double, int> selection_counts;  // sequential selections per level
  std::vector<CriterionField> fields;      // populated when dump_fields is on
};

// Weighted L2 distance between the estimate and the reference on a common
// node set.
inline double error_metric(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                           const Eigen::VectorXd& weights) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < estimate.size(); ++i) {
    const double d = estimate[i] - truth[i];
    s += weights[i] * d * d;
  }
  return std::sqrt(s);
}

struct MedianCurve {
  std::vector<double> cost;
  std::vector<double> median_error;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Per cost-grid value: the median across repetitions of the error at the last
// iteration whose cumulative cost does not exceed it.
inline MedianCurve aggregate_median(const std::vector<RunRecord>& records,
                                    const std::vector<double>& cost_grid) {
  MedianCurve curve;
  curve.cost = cost_grid;
  curve.median_error.reserve(cost_grid.size());
  for (double c : cost_grid) {
    std::vector<double> errs;
    errs.reserve(records.size());
    for (const RunRecord& r : records) {
      double e = r.rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : r.rows.front().error;
      for (const IterationRow& row : r.rows) {
        if (row.c_n <= c + 1e-12) e = row.error;
        else break;
      }
      errs.push_back(e);
    }
    curve.median_error.push_back(detail::median_of(std::move(errs)));
  }
  return curve;
}

// Sorted union of every run's cumulative costs; the natural grid for the
// exact step curves.
inline std::vector<double> default_cost_grid(const std::vector<RunRecord>& records) {
  std::vector<double> grid;
  for (const RunRecord& r : records) {
    for (const IterationRow& row : r.rows) grid.push_back(row.c_n);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig cfg,
                            const Eigen::VectorXd* precomputed_truth = nullptr)
      : cfg_(std::move(cfg)) {
    validate();
    build_nodes();
    if (precomputed_truth) {
      shared_truth_ = *precomputed_truth;
    } else if (cfg_.testbed != TestbedId::toy) {
      shared_truth_ = compute_reference();
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  const IntegrationNodes& nodes() const { return nodes_; }
  const Eigen::VectorXd& reference() const { return shared_truth_; }

  // Reference values of the quantity of interest at the integration nodes
  // (truth indicator for the analytic testbeds, Monte Carlo estimate at the
  // reference level for the oscillator).
  Eigen::VectorXd compute_reference() const {
    const int N = static_cast<int>(nodes_.nodes.size());
    Eigen::VectorXd truth(N);
    if (cfg_.testbed == TestbedId::forrester) {
      for (int i = 0; i < N; ++i) {
        const double u = cfg_.u_box.from_unit(nodes_.nodes[i].u)[0];
        truth[i] = forrester_hf(u) > cfg_.z_crit ? 1.0 : 0.0;
      }
      return truth;
    }
    if (cfg_.testbed == TestbedId::oscillator) {
      const int M = cfg_.reference_samples;
      std::atomic<int> next{0};
      auto worker = [&]() {
        for (int i = next.fetch_add(1); i < N; i = next.fetch_add(1)) {
          const Eigen::VectorXd u = cfg_.u_box.from_unit(nodes_.nodes[i].u);
          OscillatorConfig oc;
          oc.omega0 = u[0];
          oc.zeta = u[1];
          oc.delta = cfg_.delta_ref;
          oc.t_end = cfg_.t_end;
          oc.spectral_intensity = cfg_.s_intensity;
          int hits = 0;
          for (int j = 0; j < M; ++j) {
            if (oscillator_response(oc, mix_seed(cfg_.reference_seed, i, j)) > cfg_.z_crit) {
              ++hits;
            }
          }
          truth[i] = static_cast<double>(hits) / M;
        }
      };
      std::vector<std::thread> pool;
      for (int t = 0; t < hardware_threads(); ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
      return truth;
    }
    throw Error("compute_reference: toy truth is per repetition");
  }

  std::vector<RunRecord> run() const {
    std::vector<RunRecord> records(cfg_.reps);
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto worker = [&]() {
      for (int r = next.fetch_add(1); r < cfg_.reps; r = next.fetch_add(1)) {
        try {
          records[r] = run_one(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    };
    const int T = std::min(hardware_threads(), cfg_.reps);
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return records;
  }

  // Criterion field at the initial design of one repetition over the full
  // candidate grid (no budget filter); used by the `pareto` subcommand.
  CriterionField initial_field(int rep = 0) const {
    RepContext ctx = make_rep(rep);
    PosteriorState st = fit_state(ctx);
    CriterionEvaluator ev(st, ctx.noise, cfg_.z_crit, nodes_);
    return evaluate_criterion_field(ev, make_candidates(cfg_.candidate_levels, 1));
  }

 private:
  struct RepContext {
    int rep = 0;
    std::uint64_t rep_seed = 0;
    Dataset data;
    Eigen::VectorXd truth;          // node-aligned reference for this repetition
    std::optional<ToyGpPath> path;  // toy only
    ModelFamily family;             // mcmc-driven testbeds
    bool use_mcmc = true;
    Eigen::VectorXd theta;          // current MAP
    NoiseModel noise;               // noise model in force (from theta or fixed)
    GpSpec gp;                      // prior in force
    int obs_counter = 0;
    int iter = 0;
  };

  int hardware_threads() const {
    if (cfg_.threads > 0) return cfg_.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 2 : static_cast<int>(hc);
  }

  void validate() {
    if (cfg_.levels.empty()) throw ConfigError("levels must be nonempty");
    if (cfg_.candidate_levels.empty()) cfg_.candidate_levels = cfg_.levels;
    if (cfg_.init_sizes.empty()) throw ConfigError("init_sizes must be nonempty");
    if (cfg_.init_sizes.size() > cfg_.levels.size()) {
      throw ConfigError("init_sizes longer than levels");
    }
    if (cfg_.reps < 1) throw ConfigError("reps must be >= 1");
    if (cfg_.strategy.kind == StrategyKind::sur_fixed) {
      detail::find_level(cfg_.levels, cfg_.strategy.fixed_level, "config strategy");
    }
    if (cfg_.nodes <= 0) cfg_.nodes = cfg_.dim() == 1 ? 500 : 2000;
    if (cfg_.grid <= 0) cfg_.grid = cfg_.dim() == 1 ? 101 : 11;
    double init_cost = 0.0;
    for (std::size_t s = 0; s < cfg_.init_sizes.size(); ++s) {
      init_cost += cfg_.init_sizes[s] * cost_eval(cfg_.cost, cfg_.levels[s]);
    }
    if (cfg_.budget < init_cost - 1e-9) {
      throw ConfigError("budget is below the initial design cost");
    }
  }

  void build_nodes() {
    const int d = cfg_.dim();
    nodes_.nodes.clear();
    if (cfg_.node_kind == "grid") {
      // Regular grid with N points per dimension (1-D) or near-N total.
      int per_dim = d == 1 ? cfg_.nodes
                           : std::max(2, static_cast<int>(std::round(
                                             std::pow(cfg_.nodes, 1.0 / d))));
      std::vector<int> idx(d, 0);
      while (true) {
        Eigen::VectorXd u(d);
        for (int j = 0; j < d; ++j) {
          u[j] = per_dim == 1 ? 0.5 : static_cast<double>(idx[j]) / (per_dim - 1);
        }
        nodes_.nodes.emplace_back(u, cfg_.delta_ref);
        int j = d - 1;
        while (j >= 0 && ++idx[j] == per_dim) idx[j--] = 0;
        if (j < 0) break;
      }
    } else {
      std::mt19937_64 rng = make_rng(cfg_.nodes_seed);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int i = 0; i < cfg_.nodes; ++i) {
        Eigen::VectorXd u(d);
        for (int j = 0; j < d; ++j) u[j] = unif(rng);
        nodes_.nodes.emplace_back(u, cfg_.delta_ref);
      }
    }
    const int N = static_cast<int>(nodes_.nodes.size());
    nodes_.weights = Eigen::VectorXd::Constant(N, 1.0 / N);
  }

  // --- simulators (natural coordinates in, response out) -------------------

  double simulate(RepContext& ctx, const Point& natural) const {
    const std::uint64_t s = mix_seed(ctx.rep_seed, 2000000 + ctx.obs_counter++);
    switch (cfg_.testbed) {
      case TestbedId::forrester: {
        const int lev = detail::find_level(cfg_.levels, natural.delta, "simulate");
        return lev == 0 ? forrester_lf(natural.u[0]) : forrester_hf(natural.u[0]);
      }
      case TestbedId::oscillator: {
        OscillatorConfig oc;
        oc.omega0 = natural.u[0];
        oc.zeta = natural.u[1];
        oc.delta = natural.delta;
        oc.t_end = cfg_.t_end;
        oc.spectral_intensity = cfg_.s_intensity;
        return oscillator_response(oc, s);
      }
      case TestbedId::toy: {
        std::mt19937_64 rng = make_rng(s);
        return ctx.path->observe(natural.u[0], natural.delta, rng);
      }
    }
    throw Error("simulate: unreachable");
  }

  // Toy observations happen at the snapped grid coordinate; record that.
  Point snap_for_model(const RepContext& ctx, const Point& natural) const {
    if (cfg_.testbed != TestbedId::toy) return natural;
    Point p = natural;
    p.u[0] = ctx.path->snap_u(natural.u[0]);
    return p;
  }

  Point to_normalized(const Point& natural) const {
    Eigen::VectorXd t =
        (natural.u - cfg_.u_box.lo).array() / (cfg_.u_box.hi - cfg_.u_box.lo).array();
    return Point(t, natural.delta);
  }
  Point to_natural(const Point& normalized) const {
    return Point(cfg_.u_box.from_unit(normalized.u), normalized.delta);
  }

  // --- per-repetition setup -------------------------------------------------

  RepContext make_rep(int rep) const {
    RepContext ctx;
    ctx.rep = rep;
    ctx.rep_seed = mix_seed(cfg_.seed, rep);

    if (cfg_.testbed == TestbedId::toy) {
      std::vector<double> grid_u(cfg_.toy_grid);
      for (int i = 0; i < cfg_.toy_grid; ++i) {
        grid_u[i] = cfg_.u_box.lo[0] +
                    (cfg_.u_box.hi[0] - cfg_.u_box.lo[0]) *
                        (cfg_.toy_grid == 1 ? 0.5
                                            : static_cast<double>(i) / (cfg_.toy_grid - 1));
      }
      std::vector<double> path_levels = cfg_.levels;
      path_levels.push_back(cfg_.delta_ref);  // include the ideal level
      ctx.path = toy_gp_sampler(toy_model(), grid_u, path_levels, cfg_.toy_noise_sd,
                                mix_seed(ctx.rep_seed, 3));
      ctx.use_mcmc = false;
      // Truth: exceedance indicator of the sampled ideal-level path.
      const int N = static_cast<int>(nodes_.nodes.size());
      ctx.truth.resize(N);
      for (int i = 0; i < N; ++i) {
        const double u = cfg_.u_box.from_unit(nodes_.nodes[i].u)[0];
        ctx.truth[i] = ctx.path->value(u, cfg_.delta_ref) > cfg_.z_crit ? 1.0 : 0.0;
      }
    } else {
      ctx.truth = shared_truth_;
      ctx.use_mcmc = true;
    }

    // Initial nested design with maximin polish, then simulate level by level.
    std::vector<int> sizes;
    for (int n : cfg_.init_sizes) {
      if (n > 0) sizes.push_back(n);
    }
    NestedDesign design = nlhs(sizes, cfg_.dim(), mix_seed(ctx.rep_seed, 1));
    int total = 0;
    for (int n : sizes) total += n;
    design = maximin_improve(design, cfg_.maximin_factor * total, mix_seed(ctx.rep_seed, 2));

    for (std::size_t s = 0; s < sizes.size(); ++s) {
      for (const auto& up : design.level_points(static_cast<int>(s) + 1)) {
        Point natural(cfg_.u_box.from_unit(up), cfg_.levels[s]);
        natural = snap_for_model(ctx, natural);
        const double z = simulate(ctx, natural);
        ctx.data.add(to_normalized(natural), z, cost_eval(cfg_.cost, natural.delta));
      }
    }

    if (cfg_.testbed == TestbedId::toy) {
      AdditiveModel m = toy_model();
      // The model works on normalized coordinates; rescale the lengthscales.
      const double span = cfg_.u_box.hi[0] - cfg_.u_box.lo[0];
      m.base.lengthscales /= span;
      m.err_correlation.lengthscales /= span;
      ctx.gp = gp_spec(m, MeanHandling::profiled);
      std::vector<double> noise_levels = cfg_.levels;
      noise_levels.push_back(cfg_.delta_ref);
      Eigen::VectorXd lam(noise_levels.size());
      lam.setConstant(cfg_.toy_noise_sd * cfg_.toy_noise_sd);
      lam[lam.size() - 1] = 0.0;  // the ideal level is noise-free
      ctx.noise = NoiseModel{noise_levels, lam};
    } else if (cfg_.model == "ar") {
      ctx.family = make_ar_family(cfg_.levels, cfg_.dim(), NoiseModel::zero(cfg_.levels));
      ctx.theta = prior_mode(ctx.family.priors);
    } else {
      const Eigen::VectorXd z = ctx.data.response_vector();
      const double mean = z.mean();
      const double var =
          z.size() > 1 ? (z.array() - mean).square().sum() / (z.size() - 1) : 1.0;
      ctx.family = make_additive_family(cfg_.levels, cfg_.dim(), var);
      ctx.theta = prior_mode(ctx.family.priors);
    }
    return ctx;
  }

  // MCMC + MAP plug-in (or the fixed toy prior), then the GP fit.
  PosteriorState fit_state(RepContext& ctx, int chain_len = -1) const {
    if (ctx.use_mcmc) {
      const int len = chain_len < 0 ? cfg_.mcmc_init : chain_len;
      auto lp = [&](const Eigen::VectorXd& th) {
        return log_posterior(ctx.family, ctx.data, th);
      };
      if (len > 0) {
        MhOptions mo;
        mo.warmup = std::min(cfg_.mcmc_warmup, std::max(1, len / 5));
        Eigen::VectorXd init = ctx.theta;
        if (!std::isfinite(lp(init))) init = prior_mode(ctx.family.priors);
        const Chain chain =
            adaptive_mh(lp, init, len, mix_seed(ctx.rep_seed, 1000 + ctx.iter), mo);
        MapOptions mapo;
        mapo.max_evals = cfg_.map_evals;
        ctx.theta = map_estimate(chain, lp, mapo);
      }
      BuiltModel bm = ctx.family.build(ctx.theta);
      ctx.gp = std::move(bm.gp);
      ctx.noise = std::move(bm.noise);
    }
    Eigen::VectorXd noise(ctx.data.size());
    for (int i = 0; i < ctx.data.size(); ++i) {
      noise[i] = noise_at(ctx.noise, ctx.data.points[i]);
    }
    return fit(ctx.gp, ctx.data.points, ctx.data.response_vector(), noise);
  }

  // Candidate batches on the normalized grid at the given levels; for q > 1
  // candidates are assembled later by greedy extension, so this returns the
  // singleton grid.
  std::vector<CandidateBatch> make_candidates(const std::vector<double>& levels,
                                              int /*q*/) const {
    std::vector<CandidateBatch> out;
    const int d = cfg_.dim();
    const int P = cfg_.grid;
    for (double lev : levels) {
      const double cost = cost_eval(cfg_.cost, lev);
      std::vector<int> idx(d, 0);
      while (true) {
        Eigen::VectorXd u(d);
        for (int j = 0; j < d; ++j) {
          u[j] = P == 1 ? 0.5 : static_cast<double>(idx[j]) / (P - 1);
        }
        CandidateBatch cb;
        cb.points = {Point(u, lev)};
        cb.cost = cost;
        out.push_back(std::move(cb));
        int j = d - 1;
        while (j >= 0 && ++idx[j] == P) idx[j--] = 0;
        if (j < 0) break;
      }
    }
    return out;
  }

  std::vector<double> allowed_levels(double remaining, int q) const {
    std::vector<double> lv;
    std::vector<double> base;
    if (cfg_.strategy.kind == StrategyKind::sur_fixed) {
      base = {cfg_.strategy.fixed_level};
    } else {
      base = cfg_.candidate_levels;
    }
    for (double lev : base) {
      if (q * cost_eval(cfg_.cost, lev) <= remaining + 1e-9) lv.push_back(lev);
    }
    return lv;
  }

  // Greedy batch construction at one level followed by joint refinement.
  std::pair<CandidateBatch, double> build_batch(const CriterionEvaluator& ev, double lev,
                                                int q) const {
    const int d = cfg_.dim();
    const double cost = cost_eval(cfg_.cost, lev);
    std::vector<CandidateBatch> grid = make_candidates({lev}, 1);
    std::vector<QueryCache> grid_qc;
    grid_qc.reserve(grid.size());
    for (const CandidateBatch& cb : grid) grid_qc.push_back(ev.query(cb.points[0]));

    std::vector<Point> batch;
    std::vector<QueryCache> batch_qc;
    for (int round = 0; round < q; ++round) {
      double best_g = -std::numeric_limits<double>::infinity();
      int best_i = 0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        std::vector<QueryCache> trial = batch_qc;
        trial.push_back(grid_qc[i]);
        const double g = ev.JG(std::move(trial)).second;
        if (g > best_g) {
          best_g = g;
          best_i = static_cast<int>(i);
        }
      }
      batch.push_back(grid[best_i].points[0]);
      batch_qc.push_back(grid_qc[best_i]);
    }
    // Joint refinement over the stacked coordinates at the fixed level.
    double gain = ev.JG(batch).second;
    if (cfg_.local_steps > 0) {
      Eigen::VectorXd x(q * d), steps(q * d);
      for (int l = 0; l < q; ++l) {
        for (int j = 0; j < d; ++j) {
          x[l * d + j] = batch[l].u[j];
          steps[l * d + j] = cfg_.grid > 1 ? 1.0 / (cfg_.grid - 1) : 0.5;
        }
      }
      Box unit = Box::unit(q * d);
      auto f = [&](const Eigen::VectorXd& v) {
        std::vector<Point> trial(q);
        for (int l = 0; l < q; ++l) {
          trial[l] = Point(v.segment(l * d, d), lev);
        }
        return ev.JG(trial).second;
      };
      double refined = gain;
      Eigen::VectorXd xr = coordinate_maximize(f, x, steps, cfg_.local_steps,
                                               60 * q * d, &unit, &refined);
      if (refined >= gain) {
        gain = refined;
        for (int l = 0; l < q; ++l) batch[l] = Point(xr.segment(l * d, d), lev);
      }
    }
    CandidateBatch cb;
    cb.points = std::move(batch);
    cb.cost = cost;
    return {std::move(cb), gain};
  }

  RunRecord run_one(int rep) const {
    RepContext ctx = make_rep(rep);
    RunRecord rec;
    rec.rep = rep;
    rec.seed = ctx.rep_seed;
    const bool keep_fields = cfg_.dump_fields && rep == 0;

    try {
      using clock = std::chrono::steady_clock;
      auto t0 = clock::now();
      PosteriorState st = fit_state(ctx);
      auto evaluator = std::make_unique<CriterionEvaluator>(st, ctx.noise, cfg_.z_crit,
                                                            nodes_);
      IterationRow row0;
      row0.iter = 0;
      row0.c_n = ctx.data.total_cost;
      row0.H = evaluator->H();
      row0.error = error_metric(evaluator->node_excursion_probs(), ctx.truth,
                                nodes_.weights);
      row0.wall_ms =
          std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      rec.rows.push_back(row0);

      const int q = cfg_.strategy.kind == StrategyKind::mrsur_batch
                        ? cfg_.strategy.batch_size
                        : 1;
      while (ctx.iter < cfg_.max_iters) {
        const double remaining = cfg_.budget - ctx.data.total_cost;
        const std::vector<double> levels = allowed_levels(remaining, q);
        if (levels.empty()) break;
        ++ctx.iter;
        t0 = clock::now();

        CandidateBatch selected;
        if (q == 1) {
          CriterionField field =
              evaluate_criterion_field(*evaluator, make_candidates(levels, 1));
          selected = field.records[field.best].candidate;
          if (cfg_.local_steps > 0) {
            const double lev = selected.points[0].delta;
            Box unit = Box::unit(cfg_.dim());
            auto f = [&](const Eigen::VectorXd& u) {
              return evaluator->JG({Point(u, lev)}).second;
            };
            Eigen::VectorXd steps = Eigen::VectorXd::Constant(
                cfg_.dim(), cfg_.grid > 1 ? 1.0 / (cfg_.grid - 1) : 0.5);
            double g0 = field.records[field.best].G, g1 = g0;
            Eigen::VectorXd u = coordinate_maximize(f, selected.points[0].u, steps,
                                                    cfg_.local_steps,
                                                    60 * cfg_.dim(), &unit, &g1);
            if (g1 >= g0) selected.points[0] = Point(u, lev);
          }
          if (keep_fields) rec.fields.push_back(std::move(field));
        } else {
          // One batch per level; pick the best gain-per-cost (cost of one
          // synchronous batch, i.e. C(level)).
          double best_rate = -std::numeric_limits<double>::infinity();
          bool have = false;
          for (double lev : levels) {
            auto [cb, gain] = build_batch(*evaluator, lev, q);
            const double rate = gain / cb.cost;
            if (!have || rate > best_rate ||
                (rate == best_rate && (cb.cost < selected.cost ||
                                       (cb.cost == selected.cost &&
                                        batch_less(cb.points, selected.points))))) {
              best_rate = rate;
              selected = std::move(cb);
              have = true;
            }
          }
        }

        // Simulate the batch and charge each evaluation.
        double increment = 0.0;
        std::vector<Point> natural_sel;
        for (const Point& p : selected.points) {
          Point natural = snap_for_model(ctx, to_natural(p));
          const double z = simulate(ctx, natural);
          const double c = cost_eval(cfg_.cost, natural.delta);
          ctx.data.add(to_normalized(natural), z, c);
          increment += c;
          natural_sel.push_back(std::move(natural));
        }
        rec.selection_counts[selected.points[0].delta] +=
            static_cast<int>(selected.points.size());

        st = fit_state(ctx, cfg_.mcmc_update);
        evaluator =
            std::make_unique<CriterionEvaluator>(st, ctx.noise, cfg_.z_crit, nodes_);

        IterationRow row;
        row.iter = ctx.iter;
        row.selected = std::move(natural_sel);
        row.level = selected.points[0].delta;
        row.cost_increment = increment;
        row.c_n = ctx.data.total_cost;
        row.H = evaluator->H();
        row.error = error_metric(evaluator->node_excursion_probs(), ctx.truth,
                                 nodes_.weights);
        row.wall_ms =
            std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        rec.rows.push_back(std::move(row));
        if (cfg_.verbose) {
          std::ostringstream msg;
          msg << strategy_name(cfg_.strategy) << " rep " << rep << " iter " << ctx.iter
              << " level " << selected.points[0].delta << " c_n "
              << ctx.data.total_cost << " err " << rec.rows.back().error << "\n";
          std::fputs(msg.str().c_str(), stderr);
        }
      }
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "rep " << rep << " iteration " << ctx.iter << ": " << e.what();
      throw Error(msg.str());
    }
    return rec;
  }

  ExperimentConfig cfg_;
  IntegrationNodes nodes_;
  Eigen::VectorXd shared_truth_;
};

inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  return ExperimentRunner(cfg).run();
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace detail {

inline void open_out(std::ofstream& os, const std::filesystem::path& p) {
  os.open(p, std::ios::binary);  // '\n' endings on every platform
  if (!os) throw IoError("cannot write " + p.string());
  os.precision(17);
}

}  // namespace detail

// Writes runs.csv, median.csv, selections.csv, timing.csv, config.echo and
// pareto_iter_<k>.csv for any stored criterion fields.  Every file except
// timing.csv is reproduced byte for byte by a rerun with the same config.
inline void export_results(const std::vector<RunRecord>& records,
                           const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
  const int d = cfg.dim();

  {
    std::ofstream os;
    detail::open_out(os, fs::path(dir) / "runs.csv");
    os << "rep,iter,member,delta";
    for (int j = 1; j <= d; ++j) os << ",u" << j;
    os << ",cost_increment,c_n,H,error\n";
    for (const RunRecord& r : records) {
      for (const IterationRow& row : r.rows) {
        const int members = std::max<std::size_t>(row.selected.size(), 1);
        for (int m = 0; m < members; ++m) {
          os << r.rep << "," << row.iter << "," << m << ",";
          if (m < static_cast<int>(row.selected.size())) {
            os << row.selected[m].delta;
            for (int j = 0; j < d; ++j) os << "," << row.selected[m].u[j];
          } else {
            for (int j = 0; j <= d; ++j) os << (j ? "," : "");
          }
          os << "," << (m == 0 ? row.cost_increment : 0.0) << "," << row.c_n << ","
             << row.H << "," << row.error << "\n";
        }
      }
    }
  }

  {
    std::ofstream os;
    detail::open_out(os, fs::path(dir) / "median.csv");
    os << "cost,median_error\n";
    const MedianCurve curve = aggregate_median(records, default_cost_grid(records));
    for (std::size_t i = 0; i < curve.cost.size(); ++i) {
      os << curve.cost[i] << "," << curve.median_error[i] << "\n";
    }
  }

  {
    std::ofstream os;
    detail::open_out(os, fs::path(dir) / "selections.csv");
    os << "rep";
    for (double lev : cfg.levels) os << ",n_" << lev;
    os << ",final_cost\n";
    for (const RunRecord& r : records) {
      os << r.rep;
      for (double lev : cfg.levels) {
        int count = 0;
        for (const auto& [l, c] : r.selection_counts) {
          if (std::fabs(l - lev) <= 1e-9 * std::max(1.0, std::fabs(lev))) count = c;
        }
        os << "," << count;
      }
      os << "," << (r.rows.empty() ? 0.0 : r.rows.back().c_n) << "\n";
    }
  }

  {
    std::ofstream os;
    detail::open_out(os, fs::path(dir) / "timing.csv");
    os << "rep,iter,wall_ms\n";
    for (const RunRecord& r : records) {
      for (const IterationRow& row : r.rows) {
        os << r.rep << "," << row.iter << "," << row.wall_ms << "\n";
      }
    }
  }

  {
    std::ofstream os;
    detail::open_out(os, fs::path(dir) / "config.echo");
    os << echo_config(cfg);
  }

  for (const RunRecord& r : records) {
    for (std::size_t k = 0; k < r.fields.size(); ++k) {
      std::ofstream os;
      detail::open_out(os, fs::path(dir) / ("pareto_iter_" + std::to_string(k + 1) +
                                            ".csv"));
      to_csv(r.fields[k], os);
    }
  }
}

// Minimal reader for runs.csv used by the round-trip checks: returns records
// with (iter, c_n, error) rebuilt per repetition.
inline std::vector<RunRecord> parse_runs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty runs.csv");
  std::map<int, RunRecord> by_rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    const int rep = std::stoi(cells[0]);
    const int member = std::stoi(cells[2]);
    if (member != 0) continue;
    IterationRow row;
    row.iter = std::stoi(cells[1]);
    const std::size_t n = cells.size();
    row.cost_increment = std::stod(cells[n - 4]);
    row.c_n = std::stod(cells[n - 3]);
    row.H = std::stod(cells[n - 2]);
    row.error = std::stod(cells[n - 1]);
    by_rep[rep].rep = rep;
    by_rep[rep].rows.push_back(row);
  }
  std::vector<RunRecord> out;
  for (auto& [rep, rec] : by_rep) out.push_back(std::move(rec));
  return out;
}

}  // namespace mrsur

#endif  // MRSUR_HARNESS_HPP
