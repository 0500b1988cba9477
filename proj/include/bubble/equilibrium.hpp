#pragma once

// Damped Picard iteration on the mean flows (theta_bar, mu_bar, tau_bar).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bubble/bsde.hpp"
#include "bubble/flows.hpp"
#include "bubble/simulate.hpp"

namespace bubble {

struct ForwardResponse {
    MeanFlows flows;
    std::vector<PolicyField> policies;  // one per entry grid point
    std::vector<double> cost;           // per path, entry-weighted objective sample
    long control_evals = 0;
    long clamp_hits = 0;
};

// Simulates every entry cohort under its family's feedback and aggregates the entered mass.
ForwardResponse forward_response(const std::vector<BsdeFamily>& families, const EntryGrid& entry,
                                 const MeanFlows& flows, const PathBundle& bundle,
                                 const Scenario& s);

// Entry-weighted means at step i: sum_j w_j 1{e_j <= i} m_j / sum_j w_j 1{e_j <= i}.
std::vector<double> entry_weighted_mean(const std::vector<std::vector<double>>& cohort_means,
                                        const EntryGrid& entry, int n_steps);

// max(sup|d theta| / max(1, sup|theta|), sup|d mu| / max(1, sup|mu|)) + |d tau_bar| / T
double flow_residual(const MeanFlows& current, const MeanFlows& response, double T);

// (1 - lambda) current + lambda response, with tau_bar recomputed from the damped mu_bar.
MeanFlows damp(const MeanFlows& current, const MeanFlows& response, double lambda,
               const TimeGrid& grid, const Scenario& s);

struct FixedPointReport {
    int iterations = 0;
    int best_iteration = 0;
    std::vector<double> residuals;
    std::vector<double> tau_history;
    bool converged = false;
    double clamp_rate = 0.0;
    double wall_seconds = 0.0;
    int regression_fits = 0;
    int regression_fallbacks = 0;
    int winsorized = 0;
    std::vector<std::string> warnings;
};

struct Equilibrium {
    Scenario scenario;
    TimeGrid grid;
    EntryGrid entry;
    MeanFlows flows;                    // the iterate whose best response was closest
    MeanFlows response;                 // its best response
    std::vector<BsdeFamily> families;   // solved under `flows`
    std::vector<PolicyField> policies;
    PathBundle bundle;
    Estimate objective;                 // entry-weighted conditional objective J
    FixedPointReport report;
};

struct PicardOptions {
    std::optional<MeanFlows> initial;
    std::function<void(int iteration, double residual, double tau_bar)> on_iteration;
};

Equilibrium picard_solve(const Scenario& s, const PicardOptions& opt = {});

// BSDE families for every entry grid point under fixed flows.
std::vector<BsdeFamily> solve_families(const MeanFlows& flows, const NoiseCube& cube,
                                       const EntryGrid& entry, const Scenario& s);

// Monte Carlo mean of running plus terminal cost for one cohort.
Estimate conditional_objective(const PolicyField& policy, const MeanFlows& flows,
                               const PathBundle& bundle, const Scenario& s);

// Entry-weighted E[Y0] of the families (tower-property counterpart of the objective).
double tower_value(const std::vector<BsdeFamily>& families, const EntryGrid& entry,
                   const NoiseCube& cube);

}  // namespace bubble
