// Erdos-Renyi benchmark sweeps: for every network size d, `trials` random
// quantum walks with a random basis start state are identified for every
// trajectory length tau and every sampling density n_tilde = n_s / divisor.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qtopo/identify.hpp"
#include "qtopo/netmodel.hpp"

namespace qtopo {

/// Invalid configuration. The message lists every problem found.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A trial failed numerically; cells completed before the failure are kept.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  std::uint64_t seed = 1;
  std::size_t d_min = 2;
  std::size_t d_max = 12;
  double p_link = 0.5;
  std::vector<double> tau{3.0};
  double dt = 0.01;
  /// n_tilde = n_s / divisor for each entry.
  std::vector<std::size_t> subsample{1};
  std::size_t trials = 100;
  double hbar = 1.0;
  double rtol = kDefaultRankRtol;
  /// Relative residual above which a full-rank trial counts as inconsistent
  /// (not solvable). Trapezoid P makes the real_symmetric system slightly
  /// overdetermined, so that class needs a looser value than the default.
  double residual_tol = 1e-6;
  AdmissibleClass admissible = AdmissibleClass::hermitian;
  std::size_t jobs = 1;
  /// Record wall time per cell. Off by default: timings break byte-identical
  /// reruns.
  bool timing = false;
};

/// Every violated invariant, empty when the config is valid.
std::vector<std::string> validation_errors(const SweepConfig& cfg);
/// Throws ConfigError listing all of validation_errors(cfg).
void validate(const SweepConfig& cfg);

nlohmann::json config_to_json(const SweepConfig& cfg);
/// Unknown keys are rejected so that typos do not silently fall back to
/// defaults. Missing keys keep the values already in `base`.
SweepConfig config_from_json(const nlohmann::json& j, SweepConfig base = {});

/// Random stream of trial `trial` at size d. The network and the start node
/// depend only on (seed, d, trial), so every (tau, n_tilde) cell sees the same
/// instances and cells can be compared trial by trial.
std::uint64_t trial_stream(std::size_t d, std::size_t trial);

struct TrialInstance {
  AdjacencyMatrix adjacency;
  std::size_t start = 1;  // 1-based basis state
};

TrialInstance make_trial(const SweepConfig& cfg, std::size_t d, std::size_t trial);

struct SweepCell {
  std::size_t d = 0;
  double tau = 0.0;
  std::size_t n_tilde = 0;
  std::size_t trials = 0;
  double solvability_mean = 0.0;
  /// Quantiles of epsilon over solvable trials with a nonzero ground truth;
  /// absent when there are none.
  std::optional<double> eps_median;
  std::optional<double> eps_q1;
  std::optional<double> eps_q3;
  std::size_t eps_count = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

struct CriticalSize {
  double tau = 0.0;
  std::size_t n_tilde = 0;
  /// Largest d on the grid with mean solvability exactly 1.
  std::optional<std::size_t> last_fully_solvable;
  /// Smallest d on the grid with mean solvability exactly 0.
  std::optional<std::size_t> first_unsolvable;
};

enum class SweepKind { solvability, error };

std::string to_string(SweepKind k);

struct SweepResult {
  SweepKind kind = SweepKind::solvability;
  SweepConfig config;
  /// Ordered by d, then tau (config order), then divisor (config order).
  std::vector<SweepCell> cells;
  std::vector<CriticalSize> critical;
  /// Per-trial failures (empty on success).
  std::vector<std::string> failures;
};

/// Mean solvability per cell (epsilon statistics are filled in as well).
SweepResult run_solvability_sweep(const SweepConfig& cfg);
/// Epsilon statistics over solvable trials per cell.
SweepResult run_error_sweep(const SweepConfig& cfg);

/// Both runners return the cells that completed even when trials failed;
/// callers check `failures`.
SweepResult run_sweep(const SweepConfig& cfg, SweepKind kind);

/// Linear-interpolation quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);

inline constexpr const char* kSweepCsvHeader =
    "d,tau,n_tilde,trials,solvability_mean,eps_median,eps_q1,eps_q3,wall_ms,seed";

void write_sweep_csv(std::ostream& out, const SweepResult& r);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& r);
/// Resolved config, seed, cells and critical-size estimates.
nlohmann::json sweep_to_json(const SweepResult& r);

}  // namespace qtopo
