#pragma once

// Backward solver for the pre-/post-burst Brownian BSDE system of the bubble riding game.
//
// Regressions run on reference states X_{i+1} = X_i + abar(t_i, X_i) dt + sigma dW_i started at
// iota at the entry step. The drift only decides where the fits are accurate; reference_drift
// follows the mean flows and mean-reverts at the unclamped LQ feedback gain, which puts the
// states where the controlled population is without depending on the previous iterate. Each step's
// target is the fitted Y_{i+1} read at the driftless successor X_i + sigma dW_i, so the BSDE
// itself stays the one of the weak (driftless) formulation; Z comes from that regression. The
// conditional mean in the Y update is taken along the controlled successor X_i + a dt + sigma dW_i
// and the driver loses a z / sigma in exchange. Both are the same BSDE as dt -> 0, but the explicit
// driftless update turns the quadratic part of Y negative once dt |z'| / (2 kappa sigma) nears 1
// (kappa = 0.1, c = 10, 100 steps), while the controlled one keeps it positive.
//
// Post-burst: Y1_t(eta) = X_eta * L(eta) + V1(t, X_t) where L(eta) = beta*gamma at eta ^ tau_bar
// and V1 solves the BSDE with terminal c X_T^2 and driver h1. Neither depends on eta, so a
// single backward pass yields the whole eta-indexed family.
//
// Pre-burst: Y0_t = X_{t ^ tau_bar} * L + Yhat0_t with L = beta*gamma(tau_bar). The first term is
// the martingale E[X_{tau_bar} L | F_t]; it contributes sigma*L to Z0 before tau_bar. Yhat0 has
// terminal c X_T^2, driver h0 and the exogenous-burst coupling k_t (Y1_t(t) - Y0_t), stepped
// implicitly in its own Y term.

#include <functional>
#include <span>
#include <vector>

#include "bubble/flows.hpp"
#include "bubble/kernels.hpp"
#include "bubble/regression.hpp"
#include "bubble/scenario.hpp"
#include "bubble/stochastics.hpp"

namespace bubble {

// Projection of z onto A' = [-2 kappa sigma a_hi, -2 kappa sigma a_lo].
double project_z(double z, const Scenario& s);
// clamp(-z / (2 kappa sigma), a_lo, a_hi)
double optimal_control(double z, const Scenario& s);

// (z|A')^2 / (4 kappa sigma^2) - z (z|A') / (2 kappa sigma^2) + phi x^2 - x delta theta_bar
double hamiltonian_h1(double x, double theta_bar, double z, const Scenario& s);
// h1 - x b(t) while before the endogenous burst
double hamiltonian_h0(double t, double x, double theta_bar, bool before_burst, double z,
                      const Scenario& s);

// Step-major copies of a bundle's Brownian increments and their running sums.
struct NoiseCube {
    std::size_t n_paths = 0;
    int n_steps = 0;
    double dt = 0.0;
    std::vector<double> dw;    // n_steps rows of n_paths
    std::vector<double> w;     // n_steps + 1 rows, W_0 = 0
    std::vector<double> iota;

    static NoiseCube from(const PathBundle& b, Exec exec = Exec::parallel);
    std::span<const double> dw_row(int i) const { return {dw.data() + i * n_paths, n_paths}; }
    std::span<const double> w_row(int i) const { return {w.data() + i * n_paths, n_paths}; }
};

// Drift of the reference states; empty means driftless.
using StateDrift = std::function<double(int step, double x)>;

// Reference states for a cohort entering at entry_step, step-major (rows before entry are 0).
std::vector<double> reference_states(const NoiseCube& cube, double sigma, int entry_step,
                                     const StateDrift& drift, Exec exec = Exec::parallel);
inline std::vector<double> driftless_states(const NoiseCube& cube, double sigma, int entry_step,
                                            Exec exec = Exec::parallel) {
    return reference_states(cube, sigma, entry_step, {}, exec);
}

// Affine-in-Y driver: Y_i = (E[Y_{i+1}|X_i] + dt * value) / (1 + dt * rate).
struct DriverTerm {
    double value = 0.0;
    double rate = 0.0;
};
using Driver = std::function<DriverTerm(int step, double x, double z)>;

struct BackwardOptions {
    int degree = 2;
    double winsor_q = 0.0;
    Exec exec = Exec::parallel;
};

struct BackwardSolution {
    int start = 0;
    std::vector<PolyFit> value;  // fitted Y_i(x), i in [start, n]
    std::vector<PolyFit> z;      // fitted Z_i(x), i in [start, n)
    std::vector<double> start_values;  // per-path Y at the start step
    RegressionStats stats;
    int winsorized = 0;
};

using Terminal = std::function<double(double x)>;
// Feedback control a(step, x, z) used for the conditional mean of the Y update; empty means none.
using ControlDrift = std::function<double(int step, double x, double z)>;

// Generic backward recursion on given step-major states; Z targets are read at x + sigma dW.
BackwardSolution backward_solve(const NoiseCube& cube, std::span<const double> states, int start,
                                double sigma, const Terminal& terminal, const Driver& driver,
                                const BackwardOptions& opt, const ControlDrift& control = {});

struct PostBurstSolution {
    int start = 0;               // max(eta, entry)
    int eta_step = 0;
    double eta_loss = 0.0;       // beta*gamma at tau* = t_eta ^ tau_bar (0 if not yet entered)
    std::vector<PolyFit> value;  // V1
    std::vector<PolyFit> z;      // Z1
    RegressionStats stats;
    int winsorized = 0;
};

PostBurstSolution solve_post_burst(int eta_step, int entry_step, const MeanFlows& flows,
                                   const NoiseCube& cube, const Scenario& s,
                                   const StateDrift& drift = {});

struct PreBurstSolution {
    int entry_step = 0;
    int burst_step = 0;
    double burst_loss = 0.0;     // L
    std::vector<PolyFit> value;  // Yhat0
    std::vector<PolyFit> z;      // full Z0, sigma*L included before tau_bar
    RegressionStats stats;
    int winsorized = 0;
};

// diag_y1[i] is the x-dependent part of Y1_{t_i}(t_i): x*L(t_i) + V1_i(x) before tau_bar and
// V1_i(x) from tau_bar on (the X_{tau_bar} L part then matches the one carried by Y0).
PreBurstSolution solve_pre_burst(const MeanFlows& flows, const std::vector<PolyFit>& diag_y1,
                                 int entry_step, const NoiseCube& cube, const Scenario& s,
                                 const StateDrift& drift = {});

struct BsdeFamily {
    int entry_step = 0;
    int burst_step = 0;
    double burst_loss = 0.0;
    double sigma = 1.0;
    std::vector<PolyFit> y0, z0;
    std::vector<PolyFit> y1, z1;
    std::vector<PolyFit> diag_y1;
    std::vector<double> eta_loss;  // L(eta) per grid index
    RegressionStats stats;
    int winsorized = 0;

    // Full Y0 at step i given the current state and the state held at tau_bar (if passed).
    double y0_value(int i, double x, double x_at_burst) const;
    // Full Y1_{t_i}(eta) for i >= eta.
    double y1_value(int eta, int i, double x, double x_at_eta) const;
    // Jump U_t = Y1_t(t) - Y0_t before tau_bar.
    double jump(int i, double x) const;
};

// g_i = A_i / kappa where A solves A' = A^2/kappa - phi + k_t (A - A1) 1{t < tau_bar}, A(T) = c,
// with A1 the same equation without the k_t term: the x^2 coefficient of the unclamped value
// function, which does not depend on theta_bar. Capped at 1/dt.
std::vector<double> feedback_gain(int burst_step, const TimeGrid& grid, const Scenario& s);

// abar(i, x) = theta_bar_i - g_i (x - mu_bar_i).
StateDrift reference_drift(const MeanFlows& flows, const TimeGrid& grid, const Scenario& s);

BsdeFamily solve_family(const MeanFlows& flows, const NoiseCube& cube, int entry_step,
                        const Scenario& s);

// Mean over paths of Y0 at the entry step, X = iota: the tower-property value E[Y_0].
double expected_initial_value(const BsdeFamily& family, const NoiseCube& cube);

}  // namespace bubble
