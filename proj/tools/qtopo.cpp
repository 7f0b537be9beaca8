// qtopo: command-line front end.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
// (sweeps flush the CSV of completed cells first).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtopo/dynamics.hpp"
#include "qtopo/identify.hpp"
#include "qtopo/matrix_io.hpp"
#include "qtopo/netmodel.hpp"
#include "qtopo/partialinfo.hpp"
#include "qtopo/plot.hpp"
#include "qtopo/sweep.hpp"

namespace fs = std::filesystem;
using namespace qtopo;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// Numerical failure raised from a command body.
struct NumericalExit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_dir(const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string hamiltonian, adjacency, many_body, rho0;
  std::size_t d = 0;
  double p_link = 0.5;
  std::size_t start = 0;
  double tau = 3.0;
  double dt = 0.01;
};

int run_simulate(const SimulateArgs& a, std::uint64_t seed, double hbar, const fs::path& out_dir) {
  const int sources = !a.hamiltonian.empty() + !a.adjacency.empty() + !a.many_body.empty() + (a.d > 0);
  if (sources != 1) {
    throw ConfigError("simulate: give exactly one of --hamiltonian, --adjacency, --many-body, --d");
  }
  ensure_dir(out_dir);
  nlohmann::json meta{{"seed", seed}, {"tau", a.tau}, {"dt", a.dt}, {"hbar", hbar}};
  HermitianMatrix h;
  SeededRng rng(seed);
  if (!a.hamiltonian.empty()) {
    h = HermitianMatrix(read_matrix_file(a.hamiltonian));
    meta["hamiltonian_file"] = a.hamiltonian;
  } else if (!a.adjacency.empty()) {
    const AdjacencyMatrix adj(read_matrix_file(a.adjacency).real());
    h = adj.hamiltonian();
    meta["adjacency_file"] = a.adjacency;
    write_matrix_file(out_dir / "truth.json", adj.admissible().matrix());
  } else if (!a.many_body.empty()) {
    const AssembledHamiltonian parts = assemble_hamiltonian(read_many_body_file(a.many_body));
    h = parts.total();
    meta["many_body_file"] = a.many_body;
    write_matrix_file(out_dir / "h0.json", parts.h0.matrix());
    write_matrix_file(out_dir / "h_int.json", parts.h_int.matrix());
  } else {
    const AdjacencyMatrix adj = erdos_renyi(a.d, a.p_link, rng);
    h = adj.hamiltonian();
    meta["erdos_renyi"] = {{"d", a.d}, {"p_link", a.p_link}, {"edges", adj.edge_count()}};
    write_matrix_file(out_dir / "truth.json", adj.admissible().matrix());
  }
  write_matrix_file(out_dir / "hamiltonian.json", h.matrix());

  DensityOperator rho0;
  if (!a.rho0.empty()) {
    rho0 = DensityOperator(read_matrix_file(a.rho0));
    meta["rho0_file"] = a.rho0;
  } else {
    const std::size_t k = a.start > 0 ? a.start : (a.d > 0 ? 1 + rng.index(h.dim()) : 1);
    rho0 = basis_density(h.dim(), k);
    meta["start"] = k;
  }
  const Trajectory traj = sample_trajectory(h, rho0, a.tau, a.dt, hbar);
  write_trajectory_csv(out_dir / "trajectory.csv", traj);
  meta["dim"] = h.dim();
  meta["n_steps"] = traj.n_steps();
  write_json_file(out_dir / "simulate.json", meta);
  std::cout << "wrote " << (out_dir / "trajectory.csv").string() << " (d = " << h.dim()
            << ", n_s = " << traj.n_steps() << ")\n";
  return 0;
}

// ---------------------------------------------------------------- identify

struct IdentifyArgs {
  std::string trajectory, known_h0, truth, cls = "hermitian";
  std::size_t subsample = 1;
};

int run_identify(const IdentifyArgs& a, double hbar, double rtol, const fs::path& out_dir) {
  const Trajectory traj = read_trajectory_csv(a.trajectory);
  IdentifyOptions opts;
  opts.subsample = a.subsample;
  opts.hbar = hbar;
  opts.solve.rank_rtol = rtol;
  opts.solve.admissible = admissible_class_from_string(a.cls);
  if (!a.known_h0.empty()) opts.known_h0 = HermitianMatrix(read_matrix_file(a.known_h0));
  if (!a.truth.empty()) opts.truth = AdmissibleMatrix(read_matrix_file(a.truth));
  const IdentificationReport r = identify_topology(traj, opts);
  ensure_dir(out_dir);
  const nlohmann::json params{{"trajectory", a.trajectory}, {"subsample", a.subsample},
                              {"n_tilde", traj.n_steps() / a.subsample}, {"hbar", hbar},
                              {"rtol", rtol}, {"admissible_class", a.cls},
                              {"known_h0", a.known_h0}, {"truth", a.truth}};
  write_json_file(out_dir / "report.json", report_to_json(r, {{"parameters", params}}));
  std::cout << "outcome " << to_string(r.outcome) << ", rank " << r.rank << "/" << r.required_rank
            << ", residual " << r.residual;
  if (r.epsilon) std::cout << ", epsilon " << *r.epsilon;
  std::cout << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t d_min = 2, d_max = 12, trials = 100, jobs = 1;
  double p_link = 0.5, dt = 0.01, rtol = kDefaultRankRtol, residual_tol = 1e-6, hbar = 1.0;
  std::vector<double> tau;
  std::vector<std::size_t> subsample;
  std::string cls = "hermitian";
  bool extended = false;
  bool timing = false;
};

SweepConfig resolve_sweep(const SweepArgs& a, const CLI::App& app) {
  SweepConfig cfg;
  if (!a.config.empty()) cfg = config_from_json(read_json_file(a.config), cfg);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--seed")) cfg.seed = a.seed;
  if (given("--d-min")) cfg.d_min = a.d_min;
  if (a.extended) cfg.d_max = 30;
  if (given("--d-max")) cfg.d_max = a.d_max;
  if (given("--p-link")) cfg.p_link = a.p_link;
  if (given("--tau")) cfg.tau = a.tau;
  if (given("--dt")) cfg.dt = a.dt;
  if (given("--subsample")) cfg.subsample = a.subsample;
  if (given("--trials")) cfg.trials = a.trials;
  if (given("--rtol")) cfg.rtol = a.rtol;
  if (given("--residual-tol")) cfg.residual_tol = a.residual_tol;
  if (given("--hbar")) cfg.hbar = a.hbar;
  if (given("--class")) cfg.admissible = admissible_class_from_string(a.cls);
  if (given("--jobs")) cfg.jobs = a.jobs;
  if (a.timing) cfg.timing = true;
  validate(cfg);
  return cfg;
}

int run_sweep_cmd(const SweepConfig& cfg, SweepKind kind, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const SweepResult r = run_sweep(cfg, kind);
  const std::string stem = "sweep_" + to_string(kind);
  write_sweep_csv(out_dir / (stem + ".csv"), r);
  write_json_file(out_dir / (stem + ".json"), sweep_to_json(r));
  if (!r.failures.empty()) {
    for (const auto& f : r.failures) std::cerr << "trial failed: " << f << "\n";
    throw NumericalExit(std::to_string(r.failures.size()) +
                        " trial(s) failed; CSV holds the completed cells only");
  }
  if (!r.cells.empty()) {
    emit_plot(out_dir / (stem + ".csv"),
              kind == SweepKind::solvability ? PlotKind::solvability : PlotKind::error,
              out_dir / (stem + ".svg"));
  }
  for (const auto& c : r.cells) {
    std::printf("d=%2zu tau=%g n=%5zu  s=%.2f  eps_med=%s\n", c.d, c.tau, c.n_tilde, c.solvability_mean,
                c.eps_median ? std::to_string(*c.eps_median).c_str() : "-");
  }
  for (const auto& c : r.critical) {
    std::printf("tau=%g n=%zu: last d with s=1: %s, first d with s=0: %s\n", c.tau, c.n_tilde,
                c.last_fully_solvable ? std::to_string(*c.last_fully_solvable).c_str() : "none",
                c.first_unsolvable ? std::to_string(*c.first_unsolvable).c_str() : "none");
  }
  return 0;
}

// ---------------------------------------------------------------- observability

struct ObservabilityArgs {
  std::string hamiltonian, report;
};

HermitianMatrix hamiltonian_from(const std::string& hamiltonian, const std::string& report) {
  if (hamiltonian.empty() == report.empty()) {
    throw ConfigError("give exactly one of --hamiltonian or --report");
  }
  if (!hamiltonian.empty()) return HermitianMatrix(read_matrix_file(hamiltonian));
  // A-posteriori check on a full-information estimate.
  return HermitianMatrix(matrix_from_json(read_json_file(report).at("estimate")));
}

int run_observability(const ObservabilityArgs& a, double hbar, double rtol) {
  const HermitianMatrix h = hamiltonian_from(a.hamiltonian, a.report);
  const ObservabilityReport r = observability_rank(diagonal_selector(h.dim()), liouvillian(h, hbar), rtol);
  const bool zero_diag = h.matrix().diagonal().cwiseAbs().maxCoeff() == 0.0 && max_abs(h.matrix()) > 0.0;
  nlohmann::json j{{"rank", r.rank},
                   {"required_rank", r.required_rank},
                   {"observable", r.observable},
                   {"rank_tolerance", r.tolerance},
                   {"sigma_min_retained", r.sigma_min_retained},
                   {"sigma_max_discarded", r.sigma_max_discarded}};
  if (zero_diag) {
    j["note"] = "zero-diagonal H: vec(H) lies in the kernels of both L and C, so the pair is never observable";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- partial-identify

struct PartialArgs {
  std::string hamiltonian, batch;
  bool exact = false;
  double step = 1e-2;
  double sample_step = 0.0;
};

int run_partial(const PartialArgs& a, double hbar, double rtol, const fs::path& out_dir) {
  if (a.hamiltonian.empty() == a.batch.empty()) {
    throw ConfigError("partial-identify: give exactly one of --hamiltonian or --batch");
  }
  if (a.exact && a.hamiltonian.empty()) throw ConfigError("partial-identify: --exact needs --hamiltonian");
  ensure_dir(out_dir);
  std::optional<HermitianMatrix> truth;
  DerivativeStacks stacks;
  InitialStateBatch batch;
  std::size_t d = 0;
  if (!a.hamiltonian.empty()) {
    truth = HermitianMatrix(read_matrix_file(a.hamiltonian));
    d = truth->dim();
    batch = physical_batch(d);
  }
  const OutputSelector c = diagonal_selector(d > 0 ? d : 1);
  if (a.exact) {
    stacks = exact_derivative_stacks(c, liouvillian(*truth, hbar), batch.lambda0, d * d);
  } else {
    SampledOutputs outputs;
    if (truth) {
      const double h = a.sample_step > 0.0 ? a.sample_step : a.step;
      const auto ratio = static_cast<std::size_t>(std::llround(a.step / h));
      const std::size_t half = 2 * ((d * d + 1) / 2) * std::max<std::size_t>(ratio, 1);
      outputs = sample_outputs(*truth, c, batch.lambda0, h, half, hbar);
      write_output_batch(out_dir / "batch", outputs, batch, {{"hbar", hbar}});
    } else {
      std::tie(outputs, batch) = read_output_batch(a.batch);
      d = batch.dim;
    }
    stacks = estimate_derivative_stacks(outputs, d * d, a.step);
  }
  check_invertible(batch, rtol);
  for (const auto& w : stacks.warnings) std::cerr << "warning: " << w << "\n";

  const LiouvillianReconstruction rec = reconstruct_liouvillian(stacks, batch.lambda0, rtol, hbar);
  nlohmann::json j{{"dim", d},
                   {"mode", a.exact ? "exact" : "finite_difference"},
                   {"observability_rank", rec.rank},
                   {"required_rank", rec.required_rank},
                   {"warnings", stacks.warnings}};
  if (!a.exact) j["step"] = a.step;
  if (!rec.ok()) {
    j["failure"] = rec.failure;
    write_json_file(out_dir / "partial_report.json", j);
    throw NumericalExit(rec.failure);
  }
  j["stack_residual"] = rec.residual;
  const HamiltonianExtraction ex = extract_hamiltonian(*rec.l, hbar);
  j["extraction_residual"] = ex.residual;
  j["estimate"] = matrix_to_json(ex.h.matrix());
  if (truth) {
    const auto n = static_cast<Eigen::Index>(d);
    const ComplexMatrix traceless =
        truth->matrix() - (truth->matrix().trace() / static_cast<double>(d)) * ComplexMatrix::Identity(n, n);
    j["error_vs_traceless_truth"] = spectral_norm(ex.h.matrix() - traceless);
  }
  write_json_file(out_dir / "partial_report.json", j);
  std::cout << "reconstructed H (traceless) with rank " << rec.rank << "/" << rec.required_rank;
  if (j.contains("error_vs_traceless_truth")) std::cout << ", error " << j["error_vs_traceless_truth"].get<double>();
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------- decompose

int run_decompose(std::size_t d, std::size_t k, std::size_t j) {
  const auto terms = physical_decomposition(d, k, j);
  const auto n = static_cast<Eigen::Index>(d);
  ComplexMatrix sum = ComplexMatrix::Zero(n, n);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : terms) {
    sum += t.coefficient * t.state.matrix();
    out.push_back({{"coefficient", {{"re", t.coefficient.real()}, {"im", t.coefficient.imag()}}},
                   {"state", matrix_to_json(t.state.matrix())}});
  }
  ComplexMatrix target = ComplexMatrix::Zero(n, n);
  target(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j - 1)) = 1.0;
  std::cout << nlohmann::json{{"d", d}, {"k", k}, {"j", j}, {"terms", out},
                              {"max_abs_error", max_abs(sum - target)}}.dump(2)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtopo: reconstruct quantum-network Hamiltonians from trajectories"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  double hbar = 1.0;
  double rtol = kDefaultRankRtol;
  std::string out_dir = ".";

  auto common = [&](CLI::App* sub, bool with_seed) {
    if (with_seed) sub->add_option("--seed", seed, "master seed");
    sub->add_option("--hbar", hbar, "reduced Planck constant")->check(CLI::PositiveNumber);
    sub->add_option("--rtol", rtol, "relative rank tolerance")->check(CLI::PositiveNumber);
  };

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "sample a trajectory rho_t on [0, tau]");
  common(simulate, true);
  simulate->add_option("--hamiltonian", sim.hamiltonian, "Hamiltonian matrix JSON");
  simulate->add_option("--adjacency", sim.adjacency, "adjacency matrix JSON (quantum walk H = A)");
  simulate->add_option("--many-body", sim.many_body, "many-body specification JSON");
  simulate->add_option("--d", sim.d, "random Erdos-Renyi network of this size");
  simulate->add_option("--p-link", sim.p_link, "link probability for --d");
  simulate->add_option("--start", sim.start, "basis start state (1-based)");
  simulate->add_option("--rho0", sim.rho0, "initial density matrix JSON");
  simulate->add_option("--tau", sim.tau, "trajectory length");
  simulate->add_option("--dt", sim.dt, "sampling interval");
  simulate->add_option("--out-dir", out_dir, "output directory");

  IdentifyArgs idf;
  auto* identify = app.add_subcommand("identify", "full-information reconstruction from a trajectory");
  common(identify, false);
  identify->add_option("--trajectory", idf.trajectory, "trajectory CSV")->required();
  identify->add_option("--subsample", idf.subsample, "keep every n-th sample");
  identify->add_option("--known-h0", idf.known_h0, "known node Hamiltonian (matrix JSON)");
  identify->add_option("--truth", idf.truth, "ground truth for the relative error");
  identify->add_option("--class", idf.cls, "admissible class: hermitian | real_symmetric");
  identify->add_option("--out-dir", out_dir, "output directory");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Erdos-Renyi benchmark sweeps");
  sweep->require_subcommand(1);
  std::vector<std::pair<CLI::App*, SweepKind>> sweep_kinds;
  for (const auto& [name, kind] : {std::pair{"solvability", SweepKind::solvability},
                                   std::pair{"error", SweepKind::error}}) {
    auto* s = sweep->add_subcommand(name, std::string("mean ") + (kind == SweepKind::solvability
                                                                      ? "solvability rate"
                                                                      : "relative error") + " per (d, tau, n)");
    s->add_option("--config", sw.config, "sweep config JSON (flags override it)");
    s->add_option("--seed", sw.seed, "master seed");
    s->add_option("--d-min", sw.d_min, "smallest network size");
    s->add_option("--d-max", sw.d_max, "largest network size");
    s->add_option("--p-link", sw.p_link, "link probability");
    s->add_option("--tau", sw.tau, "trajectory length (repeatable)");
    s->add_option("--dt", sw.dt, "sampling interval");
    s->add_option("--subsample", sw.subsample, "n_tilde = n_s / divisor (repeatable)");
    s->add_option("--trials", sw.trials, "networks per cell");
    s->add_option("--rtol", sw.rtol, "relative rank tolerance");
    s->add_option("--residual-tol", sw.residual_tol, "relative residual above which a trial is inconsistent");
    s->add_option("--hbar", sw.hbar, "reduced Planck constant");
    s->add_option("--class", sw.cls, "admissible class: hermitian | real_symmetric");
    s->add_option("--jobs", sw.jobs, "worker threads");
    s->add_option("--out-dir", out_dir, "output directory");
    s->add_flag("--extended", sw.extended, "sweep d up to 30");
    s->add_flag("--timing", sw.timing, "record wall time (output no longer byte-reproducible)");
    sweep_kinds.emplace_back(s, kind);
  }

  ObservabilityArgs obs;
  auto* observability = app.add_subcommand("observability", "rank test of (diagonal selector, L)");
  common(observability, false);
  observability->add_option("--hamiltonian", obs.hamiltonian, "Hamiltonian matrix JSON");
  observability->add_option("--report", obs.report, "report.json from identify (a-posteriori check)");

  PartialArgs part;
  auto* partial = app.add_subcommand("partial-identify", "reconstruct H from population outputs only");
  common(partial, false);
  partial->add_option("--hamiltonian", part.hamiltonian, "simulate the output batch from this H");
  partial->add_option("--batch", part.batch, "read an output batch directory");
  partial->add_flag("--exact", part.exact, "use exact derivative stacks (oracle)");
  partial->add_option("--step", part.step, "finite-difference step")->check(CLI::PositiveNumber);
  partial->add_option("--sample-step", part.sample_step, "output sampling interval (default: step)");
  partial->add_option("--out-dir", out_dir, "output directory");

  std::size_t dd = 2, dk = 1, dj = 2;
  auto* decompose = app.add_subcommand("decompose", "write |k><j| as a combination of physical states");
  decompose->add_option("--d", dd, "dimension")->required();
  decompose->add_option("--k", dk, "row index (1-based)")->required();
  decompose->add_option("--j", dj, "column index (1-based)")->required();

  std::string plot_csv, plot_kind = "solvability", plot_out;
  auto* plot = app.add_subcommand("plot", "render a sweep CSV as SVG");
  plot->add_option("--csv", plot_csv, "sweep CSV")->required();
  plot->add_option("--kind", plot_kind, "solvability | error");
  plot->add_option("--out", plot_out, "SVG path (default: CSV path with .svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(sim, seed, hbar, out_dir);
    if (*identify) return run_identify(idf, hbar, rtol, out_dir);
    for (const auto& [sub, kind] : sweep_kinds) {
      if (*sub) return run_sweep_cmd(resolve_sweep(sw, *sub), kind, out_dir);
    }
    if (*observability) return run_observability(obs, hbar, rtol);
    if (*partial) return run_partial(part, hbar, rtol, out_dir);
    if (*decompose) return run_decompose(dd, dk, dj);
    if (*plot) {
      const fs::path out = plot_out.empty() ? fs::path(plot_csv).replace_extension(".svg") : fs::path(plot_out);
      emit_plot(plot_csv, plot_kind_from_string(plot_kind), out);
      std::cout << "wrote " << out.string() << "\n";
      return 0;
    }
  } catch (const NumericalExit& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
