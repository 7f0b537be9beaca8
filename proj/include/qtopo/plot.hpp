// Plain-text SVG rendering of sweep CSVs: x = d, y = mean solvability or
// median epsilon (log scale), one polyline per (tau, n_tilde).

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace qtopo {

enum class PlotKind { solvability, error };

PlotKind plot_kind_from_string(const std::string& name);

struct SweepRow {
  std::size_t d = 0;
  double tau = 0.0;
  std::size_t n_tilde = 0;
  double solvability_mean = 0.0;
  double eps_median = 0.0;  // NaN when absent
};

/// Parses a sweep CSV. Throws std::invalid_argument on a malformed file.
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// SVG document for the rows. Throws std::invalid_argument when there is
/// nothing to plot (no rows, or no finite positive epsilon for the error kind).
std::string render_plot(const std::vector<SweepRow>& rows, PlotKind kind);

/// read_sweep_csv + render_plot; the file is only written on success.
void emit_plot(const std::filesystem::path& csv, PlotKind kind, const std::filesystem::path& svg);

}  // namespace qtopo
