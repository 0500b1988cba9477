#pragma once

// Forward Monte Carlo of the controlled population: inventories, trading rates, prices, wealth.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "bubble/bsde.hpp"
#include "bubble/flows.hpp"
#include "bubble/kernels.hpp"
#include "bubble/scenario.hpp"
#include "bubble/stochastics.hpp"

namespace bubble {

enum class Branch { exogenous, endogenous, no_burst };
const char* branch_name(Branch b);

// Feedback controls of one entry cohort.
struct PolicyField {
    int entry_step = 0;
    int burst_step = 0;
    std::vector<PolyFit> z_pre;
    std::vector<PolyFit> z_post;  // shared by every burst index eta (see bsde.hpp)

    static PolicyField from_family(const BsdeFamily& f);

    // Sets *clamped when the unconstrained minimiser left A.
    double pre(int i, double x, const Scenario& s, bool* clamped = nullptr) const;
    double post(int i, double x, const Scenario& s, bool* clamped = nullptr) const;
};

// Path-major trajectories of one cohort on n_steps + 1 grid points.
struct ControlledPaths {
    std::size_t n_paths = 0;
    int n_steps = 0;
    int entry_step = 0;
    std::vector<double> x;
    std::vector<double> a;  // a at the last grid point is 0 (no control acts at T)
    std::vector<int> exo_step;    // snapped exogenous burst index, n_steps + 1 if after T
    std::vector<int> burst_step;  // i* = min(tau_bar index, exo_step)
    std::vector<Branch> branch;
    std::vector<double> cost;     // realised objective per path
    long control_evals = 0;
    long clamp_hits = 0;

    double x_at(std::size_t p, int i) const { return x[p * (n_steps + 1) + i]; }
    double a_at(std::size_t p, int i) const { return a[p * (n_steps + 1) + i]; }
};

// Euler-Maruyama with the feedback control; zero state and control before entry. The running
// cost is accumulated along the way, so cost[p] is the conditional objective sample.
ControlledPaths simulate_paths(const PolicyField& policy, const MeanFlows& flows,
                               const PathBundle& bundle, const Scenario& s,
                               Exec exec = Exec::parallel);

// Reference serial implementation used to test the kernel above.
ControlledPaths simulate_paths_reference(const PolicyField& policy, const MeanFlows& flows,
                                         const PathBundle& bundle, const Scenario& s);

struct PricePaths {
    std::vector<double> fundamental;  // Q, path-major
    std::vector<double> price;        // P
};

// Q_{i+1} = Q_i + delta theta_bar_i dt + sigma0 dW0_i, Q_0 = P0; P = Q + gamma(t) before the
// burst and Q + (1 - beta) gamma(tau*) from it on.
PricePaths simulate_price(const ControlledPaths& paths, const MeanFlows& flows,
                          const PathBundle& bundle, const Scenario& s, Exec exec = Exec::parallel);

// Self-financing wealth with V_0 = 0; the burst removes X_{tau*} beta gamma(tau*).
std::vector<double> simulate_wealth(const ControlledPaths& paths, const PricePaths& prices,
                                    const MeanFlows& flows, const PathBundle& bundle,
                                    const Scenario& s, Exec exec = Exec::parallel);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

Estimate mean_estimate(const std::vector<double>& samples);

// -(V_T - V_0) + sum phi X^2 dt + c X_T^2 per path.
std::vector<double> wealth_objective_samples(const ControlledPaths& paths,
                                             const std::vector<double>& wealth, const Scenario& s);

inline constexpr std::array<double, 5> kQuantileLevels{0.05, 0.25, 0.50, 0.75, 0.95};

struct Bands {
    std::size_t count = 0;
    std::vector<double> mean_x;
    std::vector<double> mean_a;
    std::array<std::vector<double>, 5> qx;
};

struct PathStats {
    std::vector<double> t;
    Bands all;
    std::array<Bands, 3> by_branch;  // indexed by Branch
    double concavity = 0.0;
    std::size_t sample_exogenous = static_cast<std::size_t>(-1);
    std::size_t sample_endogenous = static_cast<std::size_t>(-1);
    Estimate objective;
};

PathStats summarize(const ControlledPaths& paths, const MeanFlows& flows, const Scenario& s);

// Fraction of negative second differences of the mean inventory on [0, tau_bar), computed from
// mu_bar_0 + sum theta_bar dt (the population mean without the sampling noise of mean dW).
// NaN when fewer than three pre-burst points exist.
double concavity_diagnostic(const std::vector<double>& theta_bar, int burst_step);

}  // namespace bubble
