#include "bubble/flows.hpp"

#include <algorithm>
#include <cmath>

namespace bubble {

int TimeGrid::snap_up(double time) const {
    if (!(time > 0.0)) return 0;
    if (time >= T) return n_steps;
    const int i = static_cast<int>(std::ceil(time / dt - 1e-9));
    return std::clamp(i, 0, n_steps);
}

int TimeGrid::nearest(double time) const {
    const int i = static_cast<int>(std::lround(time / dt));
    return std::clamp(i, 0, n_steps);
}

MeanFlows MeanFlows::initial(const Scenario& s, const TimeGrid& grid) {
    MeanFlows f;
    f.theta_bar.assign(grid.n_steps + 1, 0.0);
    f.mu_bar.assign(grid.n_steps + 1, s.init.mean);
    f.burst_step = grid.n_steps;
    f.tau_bar = grid.T;
    return f;
}

int endogenous_burst_step(const std::vector<double>& mu_bar, const TimeGrid& grid, const Scenario& s) {
    double running_min = mu_bar.empty() ? 0.0 : mu_bar[0];
    const int last = std::min<int>(grid.n_steps, static_cast<int>(mu_bar.size()) - 1);
    for (int i = 1; i <= last; ++i) {
        running_min = std::min(running_min, mu_bar[i]);
        if (running_min <= threshold(grid.t(i), s)) return i;
    }
    return grid.n_steps;
}

double endogenous_burst(const std::vector<double>& mu_bar, const TimeGrid& grid, const Scenario& s) {
    return grid.t(endogenous_burst_step(mu_bar, grid, s));
}

double EntryGrid::entered_mass(int i) const {
    double m = 0.0;
    for (std::size_t j = 0; j < steps.size(); ++j)
        if (steps[j] <= i) m += weights[j];
    return m;
}

EntryGrid make_entry_grid(const Scenario& s, const TimeGrid& grid) {
    EntryGrid g;
    g.times.push_back(0.0);
    g.steps.push_back(0);
    if (s.entry.kind == EntryKind::fixed || s.entry.n_entry_grid <= 1) {
        g.weights.push_back(1.0);
        return g;
    }
    g.weights.push_back(s.entry.p0);
    const int m = s.entry.n_entry_grid - 1;
    const double w = (1.0 - s.entry.p0) / m;
    for (int j = 1; j <= m; ++j) {
        const double t = (j - 0.5) * s.entry.eta / m;
        g.times.push_back(t);
        g.steps.push_back(grid.nearest(t));
        g.weights.push_back(w);
    }
    return g;
}

}  // namespace bubble
