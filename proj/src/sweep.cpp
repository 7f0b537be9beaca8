#include "qtopo/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace qtopo {

std::vector<std::string> validation_errors(const SweepConfig& cfg) {
  std::vector<std::string> errs;
  if (cfg.d_min < 2) errs.emplace_back("d_min must be >= 2");
  if (cfg.d_max < cfg.d_min) errs.emplace_back("d_max must be >= d_min");
  if (!(cfg.p_link >= 0.0 && cfg.p_link <= 1.0)) errs.emplace_back("p_link must lie in [0, 1]");
  if (cfg.tau.empty()) errs.emplace_back("at least one tau is required");
  if (!(cfg.dt > 0.0)) errs.emplace_back("dt must be positive");
  if (cfg.subsample.empty()) errs.emplace_back("at least one subsample divisor is required");
  if (cfg.trials < 1) errs.emplace_back("trials must be >= 1");
  if (!(cfg.hbar > 0.0)) errs.emplace_back("hbar must be positive");
  if (!(cfg.rtol > 0.0 && cfg.rtol < 1.0)) errs.emplace_back("rtol must lie in (0, 1)");
  if (!(cfg.residual_tol > 0.0)) errs.emplace_back("residual_tol must be positive");
  if (cfg.jobs < 1) errs.emplace_back("jobs must be >= 1");
  for (std::size_t s : cfg.subsample) {
    if (s < 1) errs.emplace_back("subsample divisors must be >= 1");
  }
  if (cfg.dt > 0.0) {
    for (double tau : cfg.tau) {
      std::ostringstream t;
      t << tau;
      if (!(tau > 0.0)) {
        errs.push_back("tau " + t.str() + " must be positive");
        continue;
      }
      std::size_t n = 0;
      try {
        n = steps_for(tau, cfg.dt);
      } catch (const std::invalid_argument&) {
        std::ostringstream msg;
        msg << "dt " << cfg.dt << " does not divide tau " << tau;
        errs.push_back(msg.str());
        continue;
      }
      for (std::size_t s : cfg.subsample) {
        if (s >= 1 && n % s != 0) {
          errs.push_back("subsample divisor " + std::to_string(s) + " does not divide n_s = " +
                         std::to_string(n) + " for tau " + t.str());
        }
      }
    }
  }
  return errs;
}

void validate(const SweepConfig& cfg) {
  const auto errs = validation_errors(cfg);
  if (errs.empty()) return;
  std::string msg = "invalid sweep configuration:";
  for (const auto& e : errs) msg += "\n  - " + e;
  throw ConfigError(msg);
}

nlohmann::json config_to_json(const SweepConfig& cfg) {
  return {{"seed", cfg.seed},         {"d_min", cfg.d_min},
          {"d_max", cfg.d_max},       {"p_link", cfg.p_link},
          {"tau", cfg.tau},           {"dt", cfg.dt},
          {"subsample", cfg.subsample}, {"trials", cfg.trials},
          {"hbar", cfg.hbar},         {"rtol", cfg.rtol},         {"residual_tol", cfg.residual_tol},
          {"admissible_class", to_string(cfg.admissible)}, {"jobs", cfg.jobs},
          {"timing", cfg.timing}};
}

SweepConfig config_from_json(const nlohmann::json& j, SweepConfig base) {
  if (!j.is_object()) throw ConfigError("sweep config must be a JSON object");
  std::vector<std::string> errs;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "d_min") base.d_min = value.get<std::size_t>();
      else if (key == "d_max") base.d_max = value.get<std::size_t>();
      else if (key == "p_link") base.p_link = value.get<double>();
      else if (key == "tau") base.tau = value.is_array() ? value.get<std::vector<double>>() : std::vector<double>{value.get<double>()};
      else if (key == "dt") base.dt = value.get<double>();
      else if (key == "subsample") base.subsample = value.is_array() ? value.get<std::vector<std::size_t>>() : std::vector<std::size_t>{value.get<std::size_t>()};
      else if (key == "trials") base.trials = value.get<std::size_t>();
      else if (key == "hbar") base.hbar = value.get<double>();
      else if (key == "rtol") base.rtol = value.get<double>();
      else if (key == "residual_tol") base.residual_tol = value.get<double>();
      else if (key == "admissible_class") base.admissible = admissible_class_from_string(value.get<std::string>());
      else if (key == "jobs") base.jobs = value.get<std::size_t>();
      else if (key == "timing") base.timing = value.get<bool>();
      else errs.push_back("unknown key '" + key + "'");
    } catch (const std::exception& e) {
      errs.push_back("key '" + key + "': " + e.what());
    }
  }
  if (!errs.empty()) {
    std::string msg = "invalid sweep config JSON:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return base;
}

std::uint64_t trial_stream(std::size_t d, std::size_t trial) {
  return (static_cast<std::uint64_t>(d) << 32) ^ static_cast<std::uint64_t>(trial);
}

TrialInstance make_trial(const SweepConfig& cfg, std::size_t d, std::size_t trial) {
  SeededRng rng(cfg.seed, trial_stream(d, trial));
  AdjacencyMatrix a = erdos_renyi(d, cfg.p_link, rng);
  const std::size_t start = 1 + rng.index(d);
  return {std::move(a), start};
}

std::string to_string(SweepKind k) { return k == SweepKind::solvability ? "solvability" : "error"; }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct TrialOutcome {
  bool solvable = false;
  std::optional<double> epsilon;
  double wall_ms = 0.0;
};

struct TrialRecord {
  // [tau index][divisor index]
  std::vector<std::vector<TrialOutcome>> outcomes;
  std::string failure;
};

TrialRecord run_trial(const SweepConfig& cfg, std::size_t d, std::size_t trial) {
  TrialRecord rec;
  try {
    const TrialInstance inst = make_trial(cfg, d, trial);
    const HermitianMatrix h = inst.adjacency.hamiltonian();
    const AdmissibleMatrix truth = inst.adjacency.admissible();
    const bool zero_truth = inst.adjacency.edge_count() == 0;
    const DensityOperator rho0 = basis_density(d, inst.start);
    const SolveOptions solve{cfg.rtol, cfg.residual_tol, cfg.admissible};
    for (double tau : cfg.tau) {
      const Trajectory traj = sample_trajectory(h, rho0, tau, cfg.dt, cfg.hbar);
      const ComplexMatrix q = build_q(traj.front(), traj.back(), cfg.hbar);
      std::vector<TrialOutcome> row;
      for (std::size_t div : cfg.subsample) {
        const auto t0 = std::chrono::steady_clock::now();
        const HermitianMatrix p = build_p_trapezoid(traj, div);
        const IdentificationReport r = solve_commutator(p, q, solve);
        if (!std::isfinite(r.residual)) {
          throw std::runtime_error("non-finite residual");
        }
        TrialOutcome o;
        o.solvable = r.solvability() == 1;
        if (o.solvable && !zero_truth) o.epsilon = relative_error(r.estimate, truth);
        o.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.push_back(o);
      }
      rec.outcomes.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    rec.failure = "d=" + std::to_string(d) + " trial=" + std::to_string(trial) + ": " + e.what();
  }
  return rec;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg, SweepKind kind) {
  validate(cfg);
  SweepResult result;
  result.kind = kind;
  result.config = cfg;

  const std::size_t n_d = cfg.d_max - cfg.d_min + 1;
  const std::size_t total = n_d * cfg.trials;
  std::vector<TrialRecord> records(total);

  // Work items are claimed in index order; each result lands in its own slot,
  // so the reduction below is independent of scheduling.
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      records[i] = run_trial(cfg, cfg.d_min + i / cfg.trials, i % cfg.trials);
    }
  };
  const std::size_t n_threads = std::min(cfg.jobs, total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t di = 0; di < n_d; ++di) {
    const std::size_t d = cfg.d_min + di;
    const auto first = records.begin() + static_cast<std::ptrdiff_t>(di * cfg.trials);
    const auto last = first + static_cast<std::ptrdiff_t>(cfg.trials);
    bool failed = false;
    for (auto it = first; it != last; ++it) {
      if (!it->failure.empty()) {
        result.failures.push_back(it->failure);
        failed = true;
      }
    }
    if (failed) continue;
    for (std::size_t ti = 0; ti < cfg.tau.size(); ++ti) {
      const std::size_t n_s = steps_for(cfg.tau[ti], cfg.dt);
      for (std::size_t si = 0; si < cfg.subsample.size(); ++si) {
        SweepCell cell;
        cell.d = d;
        cell.tau = cfg.tau[ti];
        cell.n_tilde = n_s / cfg.subsample[si];
        cell.trials = cfg.trials;
        cell.seed = cfg.seed;
        std::size_t solved = 0;
        std::vector<double> eps;
        double wall = 0.0;
        for (auto it = first; it != last; ++it) {
          const TrialOutcome& o = it->outcomes[ti][si];
          solved += o.solvable ? 1 : 0;
          if (o.epsilon) eps.push_back(*o.epsilon);
          wall += o.wall_ms;
        }
        cell.solvability_mean = static_cast<double>(solved) / static_cast<double>(cfg.trials);
        cell.eps_count = eps.size();
        if (!eps.empty()) {
          cell.eps_median = quantile(eps, 0.5);
          cell.eps_q1 = quantile(eps, 0.25);
          cell.eps_q3 = quantile(eps, 0.75);
        }
        cell.wall_ms = cfg.timing ? wall : 0.0;
        result.cells.push_back(cell);
      }
    }
  }

  for (double tau : cfg.tau) {
    const std::size_t n_s = steps_for(tau, cfg.dt);
    for (std::size_t div : cfg.subsample) {
      CriticalSize c{tau, n_s / div, std::nullopt, std::nullopt};
      for (const auto& cell : result.cells) {
        if (cell.tau != tau || cell.n_tilde != n_s / div) continue;
        if (cell.solvability_mean == 1.0) c.last_fully_solvable = cell.d;
        if (cell.solvability_mean == 0.0 && !c.first_unsolvable) c.first_unsolvable = cell.d;
      }
      result.critical.push_back(c);
    }
  }
  return result;
}

SweepResult run_solvability_sweep(const SweepConfig& cfg) {
  return run_sweep(cfg, SweepKind::solvability);
}

SweepResult run_error_sweep(const SweepConfig& cfg) { return run_sweep(cfg, SweepKind::error); }

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt_json(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << kSweepCsvHeader << '\n';
  for (const auto& c : r.cells) {
    out << c.d << ',' << fmt(c.tau) << ',' << c.n_tilde << ',' << c.trials << ','
        << fmt(c.solvability_mean) << ',' << fmt(c.eps_median) << ',' << fmt(c.eps_q1) << ','
        << fmt(c.eps_q3) << ',' << fmt(c.wall_ms) << ',' << c.seed << '\n';
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_sweep_csv(out, r);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json sweep_to_json(const SweepResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"d", c.d},
                     {"tau", c.tau},
                     {"n_tilde", c.n_tilde},
                     {"trials", c.trials},
                     {"solvability_mean", c.solvability_mean},
                     {"eps_median", opt_json(c.eps_median)},
                     {"eps_q1", opt_json(c.eps_q1)},
                     {"eps_q3", opt_json(c.eps_q3)},
                     {"eps_count", c.eps_count},
                     {"wall_ms", c.wall_ms}});
  }
  nlohmann::json critical = nlohmann::json::array();
  for (const auto& c : r.critical) {
    critical.push_back({{"tau", c.tau},
                        {"n_tilde", c.n_tilde},
                        {"last_fully_solvable_d", opt_json(c.last_fully_solvable)},
                        {"first_unsolvable_d", opt_json(c.first_unsolvable)}});
  }
  return {{"kind", to_string(r.kind)},
          {"seed", r.config.seed},
          {"config", config_to_json(r.config)},
          {"trial_seed_rule",
           "engine seed = splitmix64(seed ^ splitmix64((d << 32) ^ trial)); shared by all (tau, n_tilde)"},
          {"cells", cells},
          {"critical_size", critical},
          {"failures", r.failures}};
}

}  // namespace qtopo
