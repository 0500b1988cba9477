#pragma once

#include <vector>

#include "bubble/scenario.hpp"

namespace bubble {

struct TimeGrid {
    int n_steps = 0;
    double T = 0.0;
    double dt = 0.0;

    TimeGrid() = default;
    TimeGrid(int n, double horizon) : n_steps(n), T(horizon), dt(horizon / n) {}
    static TimeGrid from(const Scenario& s) { return {s.numerics.n_steps, s.model.T}; }

    double t(int i) const { return i == n_steps ? T : i * dt; }
    // Smallest grid index whose time is >= time (clamped to [0, n_steps]).
    int snap_up(double time) const;
    int nearest(double time) const;
};

// Entry-weighted interaction state on the grid (n_steps + 1 points each).
struct MeanFlows {
    std::vector<double> theta_bar;
    std::vector<double> mu_bar;
    double tau_bar = 0.0;
    int burst_step = 0;  // grid index of tau_bar

    // theta = 0, mu = mean initial inventory, tau_bar = T.
    static MeanFlows initial(const Scenario& s, const TimeGrid& grid);
};

// First grid time t_i > 0 at which min_{j<=i} mu_bar_j <= zeta(t_i); the last index if never.
int endogenous_burst_step(const std::vector<double>& mu_bar, const TimeGrid& grid, const Scenario& s);
double endogenous_burst(const std::vector<double>& mu_bar, const TimeGrid& grid, const Scenario& s);

// Discretised entry law: an atom at 0 plus midpoint nodes on (0, eta], snapped to the grid.
struct EntryGrid {
    std::vector<double> times;
    std::vector<int> steps;
    std::vector<double> weights;

    std::size_t size() const { return steps.size(); }
    // Mass of cohorts entered by grid index i.
    double entered_mass(int i) const;
};

EntryGrid make_entry_grid(const Scenario& s, const TimeGrid& grid);

}  // namespace bubble
