#include "bubble/equilibrium.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bubble {

std::vector<double> entry_weighted_mean(const std::vector<std::vector<double>>& cohort_means,
                                        const EntryGrid& entry, int n_steps) {
    if (cohort_means.size() != entry.size())
        throw std::invalid_argument("entry_weighted_mean: one mean curve per entry point expected");
    std::vector<double> out(n_steps + 1, 0.0);
    for (int i = 0; i <= n_steps; ++i) {
        double num = 0.0, mass = 0.0;
        for (std::size_t j = 0; j < entry.size(); ++j) {
            if (entry.steps[j] > i) continue;
            num += entry.weights[j] * cohort_means[j][i];
            mass += entry.weights[j];
        }
        out[i] = mass > 0.0 ? num / mass : 0.0;
    }
    return out;
}

ForwardResponse forward_response(const std::vector<BsdeFamily>& families, const EntryGrid& entry,
                                 const MeanFlows& flows, const PathBundle& bundle,
                                 const Scenario& s) {
    const TimeGrid grid = TimeGrid::from(s);
    const int n = grid.n_steps;
    const std::size_t N = bundle.n_paths;
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    ForwardResponse out;
    out.cost.assign(N, 0.0);
    std::vector<std::vector<double>> mean_a(entry.size()), mean_x(entry.size());

    for (std::size_t j = 0; j < entry.size(); ++j) {
        out.policies.push_back(PolicyField::from_family(families[j]));
        const auto paths = simulate_paths(out.policies.back(), flows, bundle, s);
        mean_a[j].resize(n1);
        mean_x[j].resize(n1);
        for (int i = 0; i <= n; ++i) {
            mean_a[j][i] = block_sum(N, Exec::parallel, [&](std::size_t p) { return paths.a[p * n1 + i]; }) / N;
            mean_x[j][i] = block_sum(N, Exec::parallel, [&](std::size_t p) { return paths.x[p * n1 + i]; }) / N;
        }
        for (std::size_t p = 0; p < N; ++p) out.cost[p] += entry.weights[j] * paths.cost[p];
        out.control_evals += paths.control_evals;
        out.clamp_hits += paths.clamp_hits;
    }

    out.flows.theta_bar = entry_weighted_mean(mean_a, entry, n);
    if (n >= 1) out.flows.theta_bar[n] = out.flows.theta_bar[n - 1];
    out.flows.mu_bar = entry_weighted_mean(mean_x, entry, n);
    out.flows.burst_step = endogenous_burst_step(out.flows.mu_bar, grid, s);
    out.flows.tau_bar = grid.t(out.flows.burst_step);
    return out;
}

namespace {

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

double flow_residual(const MeanFlows& current, const MeanFlows& response, double T) {
    const double dtheta =
        sup_diff(current.theta_bar, response.theta_bar) / std::max(1.0, sup_abs(current.theta_bar));
    const double dmu = sup_diff(current.mu_bar, response.mu_bar) / std::max(1.0, sup_abs(current.mu_bar));
    return std::max(dtheta, dmu) + std::abs(current.tau_bar - response.tau_bar) / T;
}

MeanFlows damp(const MeanFlows& current, const MeanFlows& response, double lambda,
               const TimeGrid& grid, const Scenario& s) {
    MeanFlows out = current;
    for (std::size_t i = 0; i < out.theta_bar.size(); ++i) {
        out.theta_bar[i] = (1.0 - lambda) * current.theta_bar[i] + lambda * response.theta_bar[i];
        out.mu_bar[i] = (1.0 - lambda) * current.mu_bar[i] + lambda * response.mu_bar[i];
    }
    out.burst_step = endogenous_burst_step(out.mu_bar, grid, s);
    out.tau_bar = grid.t(out.burst_step);
    return out;
}

std::vector<BsdeFamily> solve_families(const MeanFlows& flows, const NoiseCube& cube,
                                       const EntryGrid& entry, const Scenario& s) {
    std::vector<BsdeFamily> out;
    out.reserve(entry.size());
    for (std::size_t j = 0; j < entry.size(); ++j) {
        // Cohorts sharing a snapped entry step share a family.
        if (j > 0 && entry.steps[j] == entry.steps[j - 1]) {
            out.push_back(out.back());
            continue;
        }
        out.push_back(solve_family(flows, cube, entry.steps[j], s));
    }
    return out;
}

Estimate conditional_objective(const PolicyField& policy, const MeanFlows& flows,
                               const PathBundle& bundle, const Scenario& s) {
    return mean_estimate(simulate_paths(policy, flows, bundle, s).cost);
}

double tower_value(const std::vector<BsdeFamily>& families, const EntryGrid& entry,
                   const NoiseCube& cube) {
    double v = 0.0;
    for (std::size_t j = 0; j < entry.size(); ++j)
        v += entry.weights[j] * expected_initial_value(families[j], cube);
    return v;
}

Equilibrium picard_solve(const Scenario& s, const PicardOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    Equilibrium eq;
    eq.scenario = s;
    eq.grid = TimeGrid::from(s);
    eq.entry = make_entry_grid(s, eq.grid);
    eq.report.warnings = s.validate();
    const double lambda = s.numerics.damping;

    PathBundle bundle = sample_bundle(s, Seed{s.numerics.seed});
    NoiseCube cube = NoiseCube::from(bundle);
    MeanFlows flows = opt.initial ? *opt.initial : MeanFlows::initial(s, eq.grid);
    if (static_cast<int>(flows.theta_bar.size()) != eq.grid.n_steps + 1)
        throw std::invalid_argument("picard_solve: initial flows do not match the grid");
    flows.burst_step = endogenous_burst_step(flows.mu_bar, eq.grid, s);
    flows.tau_bar = eq.grid.t(flows.burst_step);

    double best = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= s.numerics.max_iter; ++it) {
        if (s.numerics.redraw_paths && it > 1) {
            bundle = sample_bundle(s, Seed{s.numerics.seed + static_cast<std::uint64_t>(it - 1)});
            cube = NoiseCube::from(bundle);
        }
        auto families = solve_families(flows, cube, eq.entry, s);
        auto response = forward_response(families, eq.entry, flows, bundle, s);
        const double r = flow_residual(flows, response.flows, s.model.T);
        eq.report.residuals.push_back(r);
        eq.report.tau_history.push_back(flows.tau_bar);
        eq.report.iterations = it;
        for (const auto& f : families) {
            eq.report.regression_fits += f.stats.fits;
            eq.report.regression_fallbacks += f.stats.fallbacks;
            eq.report.winsorized += f.winsorized;
        }
        if (opt.on_iteration) opt.on_iteration(it, r, flows.tau_bar);

        const bool done = r < s.numerics.tol;
        if (r < best || done) {
            best = r;
            eq.report.best_iteration = it;
            eq.flows = flows;
            eq.response = response.flows;
            eq.families = std::move(families);
            eq.policies = std::move(response.policies);
            eq.objective = mean_estimate(response.cost);
            eq.bundle = bundle;
            eq.report.clamp_rate = response.control_evals > 0
                                       ? static_cast<double>(response.clamp_hits) / response.control_evals
                                       : 0.0;
        }
        if (done) {
            eq.report.converged = true;
            break;
        }
        flows = damp(flows, response.flows, lambda, eq.grid, s);
    }

    if (eq.report.clamp_rate > 0.01) {
        std::ostringstream w;
        w << "control clamped to A on " << 100.0 * eq.report.clamp_rate << "% of evaluations";
        eq.report.warnings.push_back(w.str());
    }
    if (eq.report.regression_fallbacks > 0)
        eq.report.warnings.push_back(std::to_string(eq.report.regression_fallbacks) +
                                     " regressions fell back to a lower degree");
    if (eq.report.winsorized > 0)
        eq.report.warnings.push_back(std::to_string(eq.report.winsorized) +
                                     " per-path BSDE values were winsorized");
    if (!eq.report.converged)
        eq.report.warnings.push_back("fixed point not reached; best iterate returned");
    eq.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return eq;
}

}  // namespace bubble
