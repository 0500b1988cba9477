#include "bubble/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bubble {

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::exogenous: return "exogenous";
        case Branch::endogenous: return "endogenous";
        case Branch::no_burst: return "no_burst";
    }
    return "?";
}

PolicyField PolicyField::from_family(const BsdeFamily& f) {
    return {f.entry_step, f.burst_step, f.z0, f.z1};
}

namespace {

double control_from(const PolyFit& zfit, double x, const Scenario& s, bool* clamped) {
    const double z = zfit(x);
    const double raw = -z / (2.0 * s.model.kappa * s.model.sigma);
    if (clamped) *clamped = raw < s.model.a_lo || raw > s.model.a_hi;
    return optimal_control(z, s);
}

struct PathContext {
    const PolicyField& policy;
    const MeanFlows& flows;
    const PathBundle& bundle;
    const Scenario& s;
    TimeGrid grid;
    int n;

    int exo_step(std::size_t p) const {
        const double tau = bundle.tau_exo[p];
        return tau <= grid.T ? grid.snap_up(tau) : n + 1;
    }
    Branch branch(int exo, int b) const {
        if (exo < b) return Branch::exogenous;
        if (b < n) return Branch::endogenous;
        return Branch::no_burst;
    }
};

void prepare(ControlledPaths& out, const PolicyField& policy, const PathBundle& bundle, int n) {
    if (static_cast<int>(bundle.n_steps) != n)
        throw std::invalid_argument("simulate_paths: bundle does not match the grid");
    out.n_paths = bundle.n_paths;
    out.n_steps = n;
    out.entry_step = policy.entry_step;
    const std::size_t cells = bundle.n_paths * static_cast<std::size_t>(n + 1);
    out.x.assign(cells, 0.0);
    out.a.assign(cells, 0.0);
    out.exo_step.assign(bundle.n_paths, 0);
    out.burst_step.assign(bundle.n_paths, 0);
    out.branch.assign(bundle.n_paths, Branch::no_burst);
    out.cost.assign(bundle.n_paths, 0.0);
}

// Pre or post control at step i; shared by the kernel and the reference loop.
double step_control(const PathContext& c, int i, int istar, double x, bool* clamped) {
    return i < istar ? control_from(c.policy.z_pre[i], x, c.s, clamped)
                     : control_from(c.policy.z_post[i], x, c.s, clamped);
}

}  // namespace

double PolicyField::pre(int i, double x, const Scenario& s, bool* clamped) const {
    return control_from(z_pre[i], x, s, clamped);
}

double PolicyField::post(int i, double x, const Scenario& s, bool* clamped) const {
    return control_from(z_post[i], x, s, clamped);
}

ControlledPaths simulate_paths(const PolicyField& policy, const MeanFlows& flows,
                               const PathBundle& bundle, const Scenario& s, Exec exec) {
    const PathContext c{policy, flows, bundle, s, TimeGrid::from(s), s.numerics.n_steps};
    const int n = c.n;
    ControlledPaths out;
    prepare(out, policy, bundle, n);
    const int e = policy.entry_step;
    const int b = flows.burst_step;
    const double dt = c.grid.dt;
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    std::vector<long> clamps(bundle.n_paths, 0);

    for_each_path(bundle.n_paths, exec, [&](std::size_t p) {
        double* xr = out.x.data() + p * n1;
        double* ar = out.a.data() + p * n1;
        const int exo = c.exo_step(p);
        const int istar = std::min(b, exo);
        out.exo_step[p] = exo;
        out.burst_step[p] = istar;
        out.branch[p] = c.branch(exo, b);
        double X = bundle.iota[p];
        double cost = 0.0;
        long hits = 0;
        for (int i = e; i < n; ++i) {
            bool clamped = false;
            const double a = step_control(c, i, istar, X, &clamped);
            hits += clamped;
            const double t = c.grid.t(i);
            cost += dt * running_cost(t, X, flows.theta_bar[i], a, i < istar, s);
            xr[i] = X;
            ar[i] = a;
            X += a * dt + s.model.sigma * bundle.dw(p, i);
        }
        xr[n] = X;
        cost += xr[istar] * burst_loss(c.grid.t(istar), s);
        cost += s.model.c * xr[n] * xr[n];
        out.cost[p] = cost;
        clamps[p] = hits;
    });
    out.control_evals = static_cast<long>(bundle.n_paths) * std::max(0, n - e);
    for (long h : clamps) out.clamp_hits += h;
    return out;
}

ControlledPaths simulate_paths_reference(const PolicyField& policy, const MeanFlows& flows,
                                         const PathBundle& bundle, const Scenario& s) {
    const PathContext c{policy, flows, bundle, s, TimeGrid::from(s), s.numerics.n_steps};
    const int n = c.n;
    ControlledPaths out;
    prepare(out, policy, bundle, n);
    const int e = policy.entry_step;
    const int b = flows.burst_step;
    const double dt = c.grid.dt;
    const std::size_t N = bundle.n_paths;
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;

    // Time-outer loop over a state vector, the textbook form of the scheme.
    std::vector<double> X(bundle.iota);
    for (std::size_t p = 0; p < N; ++p) {
        out.exo_step[p] = c.exo_step(p);
        out.burst_step[p] = std::min(b, out.exo_step[p]);
        out.branch[p] = c.branch(out.exo_step[p], b);
    }
    for (int i = e; i < n; ++i) {
        const double t = c.grid.t(i);
        for (std::size_t p = 0; p < N; ++p) {
            bool clamped = false;
            const double a = step_control(c, i, out.burst_step[p], X[p], &clamped);
            out.clamp_hits += clamped;
            out.cost[p] += dt * running_cost(t, X[p], flows.theta_bar[i], a, i < out.burst_step[p], s);
            out.x[p * n1 + i] = X[p];
            out.a[p * n1 + i] = a;
            X[p] += a * dt + s.model.sigma * bundle.dw(p, i);
        }
    }
    for (std::size_t p = 0; p < N; ++p) {
        out.x[p * n1 + n] = X[p];
        const double xs = out.x[p * n1 + out.burst_step[p]];
        out.cost[p] += xs * burst_loss(c.grid.t(out.burst_step[p]), s);
        out.cost[p] += s.model.c * X[p] * X[p];
    }
    out.control_evals = static_cast<long>(N) * std::max(0, n - e);
    return out;
}

PricePaths simulate_price(const ControlledPaths& paths, const MeanFlows& flows,
                          const PathBundle& bundle, const Scenario& s, Exec exec) {
    const int n = paths.n_steps;
    const TimeGrid grid = TimeGrid::from(s);
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    PricePaths out;
    out.fundamental.assign(paths.n_paths * n1, 0.0);
    out.price.assign(paths.n_paths * n1, 0.0);
    for_each_path(paths.n_paths, exec, [&](std::size_t p) {
        double* q = out.fundamental.data() + p * n1;
        double* pr = out.price.data() + p * n1;
        const int istar = paths.burst_step[p];
        const double left = (1.0 - loss_amplitude(grid.t(istar), s)) * bubble_component(grid.t(istar), s);
        q[0] = s.model.P0;
        for (int i = 0; i < n; ++i)
            q[i + 1] = q[i] + s.model.delta * flows.theta_bar[i] * grid.dt + s.model.sigma0 * bundle.dw0(p, i);
        for (int i = 0; i <= n; ++i)
            pr[i] = q[i] + (i < istar ? bubble_component(grid.t(i), s) : left);
    });
    return out;
}

std::vector<double> simulate_wealth(const ControlledPaths& paths, const PricePaths& prices,
                                    const MeanFlows& flows, const PathBundle& bundle,
                                    const Scenario& s, Exec exec) {
    const int n = paths.n_steps;
    const int e = paths.entry_step;
    const TimeGrid grid = TimeGrid::from(s);
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    std::vector<double> v(paths.n_paths * n1, 0.0);
    for_each_path(paths.n_paths, exec, [&](std::size_t p) {
        double* vr = v.data() + p * n1;
        const double* xr = paths.x.data() + p * n1;
        const double* ar = paths.a.data() + p * n1;
        const double* pr = prices.price.data() + p * n1;
        const int istar = paths.burst_step[p];
        const double jump = istar >= e ? xr[istar] * burst_loss(grid.t(istar), s) : 0.0;
        double V = istar == e ? -jump : 0.0;
        vr[e] = V;
        for (int i = e; i < n; ++i) {
            const double trend = i < istar ? bubble_trend(grid.t(i), s) : 0.0;
            V += (-s.model.kappa * ar[i] * ar[i] + xr[i] * (trend + s.model.delta * flows.theta_bar[i])) * grid.dt;
            V += s.model.sigma0 * xr[i] * bundle.dw0(p, i) + s.model.sigma * pr[i] * bundle.dw(p, i);
            if (i + 1 == istar) V -= jump;
            vr[i + 1] = V;
        }
    });
    return v;
}

Estimate mean_estimate(const std::vector<double>& samples) {
    if (samples.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    const std::size_t n = samples.size();
    const double mean = block_sum(n, Exec::serial, [&](std::size_t p) { return samples[p]; }) / n;
    if (n < 2) return {mean, 0.0};
    const double ss =
        block_sum(n, Exec::serial, [&](std::size_t p) { return (samples[p] - mean) * (samples[p] - mean); });
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

std::vector<double> wealth_objective_samples(const ControlledPaths& paths,
                                             const std::vector<double>& wealth, const Scenario& s) {
    const int n = paths.n_steps;
    const std::size_t n1 = static_cast<std::size_t>(n) + 1;
    const double dt = s.model.T / n;
    std::vector<double> out(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        double pen = 0.0;
        for (int i = paths.entry_step; i < n; ++i) pen += s.model.phi * paths.x[p * n1 + i] * paths.x[p * n1 + i] * dt;
        const double xT = paths.x[p * n1 + n];
        out[p] = -(wealth[p * n1 + n] - wealth[p * n1 + 0]) + pen + s.model.c * xT * xT;
    }
    return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * (v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

Bands bands_for(const ControlledPaths& paths, const std::vector<std::size_t>& members) {
    const int n = paths.n_steps;
    Bands b;
    b.count = members.size();
    b.mean_x.assign(n + 1, std::numeric_limits<double>::quiet_NaN());
    b.mean_a = b.mean_x;
    for (auto& q : b.qx) q = b.mean_x;
    if (members.empty()) return b;
    std::vector<double> col(members.size());
    for (int i = 0; i <= n; ++i) {
        double sx = 0.0, sa = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            col[k] = paths.x_at(members[k], i);
            sx += col[k];
            sa += paths.a_at(members[k], i);
        }
        b.mean_x[i] = sx / members.size();
        b.mean_a[i] = sa / members.size();
        std::sort(col.begin(), col.end());
        for (std::size_t q = 0; q < kQuantileLevels.size(); ++q)
            b.qx[q][i] = quantile_sorted(col, kQuantileLevels[q]);
    }
    return b;
}

}  // namespace

PathStats summarize(const ControlledPaths& paths, const MeanFlows& flows, const Scenario& s) {
    const TimeGrid grid = TimeGrid::from(s);
    PathStats st;
    for (int i = 0; i <= paths.n_steps; ++i) st.t.push_back(grid.t(i));

    std::vector<std::size_t> everyone(paths.n_paths);
    std::array<std::vector<std::size_t>, 3> members;
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        everyone[p] = p;
        members[static_cast<int>(paths.branch[p])].push_back(p);
    }
    st.all = bands_for(paths, everyone);
    for (int k = 0; k < 3; ++k) st.by_branch[k] = bands_for(paths, members[k]);
    st.concavity = concavity_diagnostic(flows.theta_bar, flows.burst_step);
    st.objective = mean_estimate(paths.cost);

    // Exogenous sample: tau closest to the branch median.
    const auto& exo = members[static_cast<int>(Branch::exogenous)];
    if (!exo.empty()) {
        std::vector<double> taus;
        for (auto p : exo) taus.push_back(paths.exo_step[p]);
        std::sort(taus.begin(), taus.end());
        const double med = quantile_sorted(taus, 0.5);
        double best = std::numeric_limits<double>::infinity();
        for (auto p : exo) {
            const double d = std::abs(paths.exo_step[p] - med);
            if (d < best) { best = d; st.sample_exogenous = p; }
        }
    }
    // Endogenous (or no-burst) sample: nearest to that branch's mean trajectory.
    int pick = static_cast<int>(Branch::endogenous);
    if (members[pick].empty()) pick = static_cast<int>(Branch::no_burst);
    double best = std::numeric_limits<double>::infinity();
    for (auto p : members[pick]) {
        double d = 0.0;
        for (int i = 0; i <= paths.n_steps; ++i) {
            const double r = paths.x_at(p, i) - st.by_branch[pick].mean_x[i];
            d += r * r;
        }
        if (d < best) { best = d; st.sample_endogenous = p; }
    }
    return st;
}

double concavity_diagnostic(const std::vector<double>& theta_bar, int burst_step) {
    const int last = std::min<int>(burst_step - 2, static_cast<int>(theta_bar.size()) - 1);
    int total = 0, negative = 0;
    for (int i = 1; i <= last; ++i) {
        ++total;
        negative += theta_bar[i] - theta_bar[i - 1] < 0.0;
    }
    return total > 0 ? static_cast<double>(negative) / total : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace bubble
