#pragma once

// Run post-processing and artifact writers (CSV, JSON report, SVG, diagnostics text).

#include <string>
#include <vector>

#include "bubble/equilibrium.hpp"
#include "bubble/simulate.hpp"

namespace bubble {

// Forward quantities of the t* = 0 cohort under an equilibrium, plus the two J cross-checks.
struct RunResult {
    const Equilibrium* eq = nullptr;
    ControlledPaths paths;
    PricePaths prices;
    std::vector<double> wealth;
    PathStats stats;
    Estimate objective_entry0;
    Estimate wealth_objective;
    double tower = 0.0;  // entry-weighted E[Y0]
};

RunResult analyze(const Equilibrium& eq);

void write_flows_csv(const std::string& path, const Equilibrium& eq);
void write_stats_csv(const std::string& path, const PathStats& stats);
// The first `count` paths plus the two plotted samples.
void write_paths_csv(const std::string& path, const RunResult& run, std::size_t count);
void write_report_json(const std::string& path, const RunResult& run);
void write_residuals(const std::string& path, const FixedPointReport& report);
void write_plots_svg(const std::string& path, const RunResult& run);
// Versioned columnar dump of the regression coefficients of every family.
void write_coefficients(const std::string& path, const std::vector<BsdeFamily>& families);

struct SweepPoint {
    std::string value;
    double J = 0.0;
    double se = 0.0;
    double tau_bar = 0.0;
    double concavity = 0.0;
    bool converged = false;
    int iterations = 0;
};

// One row per swept value.
void write_sweep_csv(const std::string& path, const std::string& param,
                     const std::vector<SweepPoint>& points);
// Combined flows keyed by swept value: value, t, theta_bar, mu_bar, zeta.
void write_sweep_flows_csv(const std::string& path, const std::vector<std::string>& values,
                           const std::vector<Equilibrium>& runs);

std::string hex_hash(std::uint64_t h);

}  // namespace bubble
