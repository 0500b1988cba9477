#include "bubble/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace bubble {

double project_z(double z, const Scenario& s) {
    const double k = 2.0 * s.model.kappa * s.model.sigma;
    return std::clamp(z, -k * s.model.a_hi, -k * s.model.a_lo);
}

double optimal_control(double z, const Scenario& s) {
    const double a = -z / (2.0 * s.model.kappa * s.model.sigma);
    return std::clamp(a, s.model.a_lo, s.model.a_hi);
}

double hamiltonian_h1(double x, double theta_bar, double z, const Scenario& s) {
    const auto& m = s.model;
    const double zp = project_z(z, s);
    const double s2 = m.sigma * m.sigma;
    return zp * zp / (4.0 * m.kappa * s2) - z * zp / (2.0 * m.kappa * s2) + m.phi * x * x -
           x * m.delta * theta_bar;
}

double hamiltonian_h0(double t, double x, double theta_bar, bool before_burst, double z,
                      const Scenario& s) {
    const double h = hamiltonian_h1(x, theta_bar, z, s);
    return before_burst ? h - x * bubble_trend(t, s) : h;
}

NoiseCube NoiseCube::from(const PathBundle& b, Exec exec) {
    NoiseCube c;
    c.n_paths = b.n_paths;
    c.n_steps = static_cast<int>(b.n_steps);
    c.dt = b.dt;
    c.iota = b.iota;
    const std::size_t N = b.n_paths;
    const std::size_t n = b.n_steps;
    c.dw.resize(N * n);
    c.w.assign(N * (n + 1), 0.0);
    for_each_path(N, exec, [&](std::size_t p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = b.dW[p * n + i];
            c.dw[i * N + p] = d;
            acc += d;
            c.w[(i + 1) * N + p] = acc;
        }
    });
    return c;
}

std::vector<double> reference_states(const NoiseCube& cube, double sigma, int entry_step,
                                     const StateDrift& drift, Exec exec) {
    const std::size_t N = cube.n_paths;
    const int n = cube.n_steps;
    const double dt = cube.dt;
    std::vector<double> x(N * (n + 1), 0.0);
    for_each_path(N, exec, [&](std::size_t p) {
        double X = cube.iota[p];
        x[entry_step * N + p] = X;
        for (int i = entry_step; i < n; ++i) {
            if (drift) X += drift(i, X) * dt;
            X += sigma * cube.dw[i * N + p];
            x[(i + 1) * N + p] = X;
        }
    });
    return x;
}

namespace {

// Clips values to their [q, 1-q] empirical quantiles; returns how many were moved.
int winsorize(std::vector<double>& v, double q) {
    if (!(q > 0.0) || v.size() < 3) return 0;
    std::vector<double> sorted = v;
    const std::size_t n = v.size();
    const auto lo_k = static_cast<std::size_t>(std::floor(q * (n - 1)));
    const auto hi_k = static_cast<std::size_t>(std::ceil((1.0 - q) * (n - 1)));
    std::nth_element(sorted.begin(), sorted.begin() + lo_k, sorted.end());
    const double lo = sorted[lo_k];
    std::nth_element(sorted.begin(), sorted.begin() + hi_k, sorted.end());
    const double hi = sorted[hi_k];
    int moved = 0;
    for (double& x : v) {
        if (x < lo) { x = lo; ++moved; }
        else if (x > hi) { x = hi; ++moved; }
    }
    return moved;
}

}  // namespace

BackwardSolution backward_solve(const NoiseCube& cube, std::span<const double> states, int start,
                                double sigma, const Terminal& terminal, const Driver& driver,
                                const BackwardOptions& opt, const ControlDrift& control) {
    const std::size_t N = cube.n_paths;
    const int n = cube.n_steps;
    if (states.size() != N * (n + 1)) throw std::invalid_argument("backward_solve: size mismatch");
    if (start < 0 || start > n) throw std::invalid_argument("backward_solve: start out of range");

    BackwardSolution out;
    out.start = start;
    out.value.resize(n + 1);
    out.z.resize(n + 1);
    const double dt = cube.dt;
    const double inv_sigma = 1.0 / sigma;
    auto row = [&](int i) { return states.subspan(static_cast<std::size_t>(i) * N, N); };

    // Y_i(x) from the step's fits, so Y_{i+1} can be read off the simulated states.
    auto step_value = [&](int i, double x, const PolyFit& ey, const PolyFit& zf) {
        const double z = zf(x);
        const DriverTerm d = driver(i, x, z);
        const double a = control ? control(i, x, z) : 0.0;
        return (ey(x) + dt * (d.value - a * z * inv_sigma)) / (1.0 + dt * d.rate);
    };
    PolyFit later_y, later_z;
    auto value_at = [&](int i, double x) {
        return i == n ? terminal(x) : step_value(i, x, later_y, later_z);
    };

    std::vector<double> y(N);
    {
        const auto xn = row(n);
        for_each_path(N, opt.exec, [&](std::size_t p) { y[p] = terminal(xn[p]); });
        out.value[n] = condexp(y, xn, opt.degree, &out.stats, opt.exec);
        out.z[n] = {out.value[n].center, out.value[n].scale, {0.0}};
    }

    std::vector<double> target(N);
    for (int i = n - 1; i >= start; --i) {
        const auto x = row(i);
        const auto dw = cube.dw_row(i);
        for_each_path(N, opt.exec, [&](std::size_t p) { target[p] = value_at(i + 1, x[p] + sigma * dw[p]); });
        out.winsorized += winsorize(target, opt.winsor_q);
        const StepFit fit = martingale_regression(target, x, dw, dt, opt.degree, &out.stats, opt.exec);
        PolyFit ey = fit.y;
        if (control) {
            // Conditional mean along the controlled successor; the -a z / sigma term in step_value
            // takes the drift back out. Keeps the quadratic part of Y positive for any a dt.
            for_each_path(N, opt.exec, [&](std::size_t p) {
                const double a = control(i, x[p], fit.z(x[p]));
                target[p] = value_at(i + 1, x[p] + a * dt + sigma * dw[p]);
            });
            out.winsorized += winsorize(target, opt.winsor_q);
            ey = martingale_regression(target, x, dw, dt, opt.degree, &out.stats, opt.exec).y;
        }
        for_each_path(N, opt.exec, [&](std::size_t p) { y[p] = step_value(i, x[p], ey, fit.z); });
        out.value[i] = condexp(y, x, opt.degree, &out.stats, opt.exec);
        out.z[i] = fit.z;
        later_y = std::move(ey);
        later_z = fit.z;
    }
    out.start_values = y;
    return out;
}

namespace {

BackwardOptions options_for(const Scenario& s) {
    return {s.numerics.basis_degree, s.numerics.winsor_q, Exec::parallel};
}

Terminal terminal_penalty(const Scenario& s) {
    const double c = s.model.c;
    return [c](double x) { return c * x * x; };
}

PostBurstSolution post_burst_on_states(int eta_step, int entry_step, const std::vector<double>& x,
                                       const MeanFlows& flows,
                                       const NoiseCube& cube, const Scenario& s) {
    const TimeGrid grid(cube.n_steps, s.model.T);
    PostBurstSolution out;
    out.eta_step = eta_step;
    out.start = std::max(eta_step, entry_step);
    out.eta_loss =
        eta_step >= entry_step ? burst_loss(grid.t(std::min(eta_step, flows.burst_step)), s) : 0.0;
    const Driver h1 = [&](int i, double xi, double z) {
        return DriverTerm{hamiltonian_h1(xi, flows.theta_bar[i], z, s), 0.0};
    };
    const ControlDrift control = [&](int, double, double z) { return optimal_control(z, s); };
    auto sol = backward_solve(cube, x, out.start, s.model.sigma, terminal_penalty(s), h1, options_for(s),
                              control);
    out.value = std::move(sol.value);
    out.z = std::move(sol.z);
    out.stats = sol.stats;
    out.winsorized = sol.winsorized;
    return out;
}

PreBurstSolution pre_burst_on_states(const MeanFlows& flows, const std::vector<PolyFit>& diag_y1,
                                     int entry_step, const std::vector<double>& x,
                                     const NoiseCube& cube,
                                     const Scenario& s) {
    const TimeGrid grid(cube.n_steps, s.model.T);
    const int b = flows.burst_step;
    PreBurstSolution out;
    out.entry_step = entry_step;
    out.burst_step = b;
    out.burst_loss = entry_step <= b ? burst_loss(grid.t(b), s) : 0.0;
    const double L = out.burst_loss;
    const double sigma_l = s.model.sigma * L;

    // Before tau_bar the part X_{t^tau_bar} L adds sigma*L to Z and moves into the coupling
    // difference. From tau_bar on Y0 and Y1 coincide and the coupling vanishes.
    const Driver h0 = [&](int i, double xi, double zhat) {
        const double t = grid.t(i);
        if (i >= b) return DriverTerm{hamiltonian_h1(xi, flows.theta_bar[i], zhat, s), 0.0};
        const double z = zhat + sigma_l;
        const double k = exo_intensity(t, s);
        const double gap = diag_y1[i](xi) - xi * L;
        return DriverTerm{hamiltonian_h0(t, xi, flows.theta_bar[i], true, z, s) + k * gap, k};
    };
    const ControlDrift control = [&](int i, double, double zhat) {
        return optimal_control(i < b ? zhat + sigma_l : zhat, s);
    };
    auto sol = backward_solve(cube, x, entry_step, s.model.sigma, terminal_penalty(s), h0, options_for(s),
                              control);
    out.value = std::move(sol.value);
    out.z = std::move(sol.z);
    for (int i = entry_step; i < std::min(b, cube.n_steps); ++i) out.z[i].add_constant(sigma_l);
    out.stats = sol.stats;
    out.winsorized = sol.winsorized;
    return out;
}

std::vector<PolyFit> diagonal_of(const PostBurstSolution& post, const MeanFlows& flows,
                                 const TimeGrid& grid, const Scenario& s) {
    std::vector<PolyFit> diag = post.value;
    for (int i = post.start; i < std::min(flows.burst_step, grid.n_steps + 1); ++i)
        diag[i].add_linear(burst_loss(grid.t(i), s));
    return diag;
}

}  // namespace

PostBurstSolution solve_post_burst(int eta_step, int entry_step, const MeanFlows& flows,
                                   const NoiseCube& cube, const Scenario& s, const StateDrift& drift) {
    const auto x = reference_states(cube, s.model.sigma, entry_step, drift);
    return post_burst_on_states(eta_step, entry_step, x, flows, cube, s);
}

PreBurstSolution solve_pre_burst(const MeanFlows& flows, const std::vector<PolyFit>& diag_y1,
                                 int entry_step, const NoiseCube& cube, const Scenario& s,
                                 const StateDrift& drift) {
    if (static_cast<int>(diag_y1.size()) != cube.n_steps + 1)
        throw std::invalid_argument("solve_pre_burst: diag_y1 must cover the grid");
    const auto x = reference_states(cube, s.model.sigma, entry_step, drift);
    return pre_burst_on_states(flows, diag_y1, entry_step, x, cube, s);
}

std::vector<double> feedback_gain(int burst_step, const TimeGrid& grid, const Scenario& s) {
    const double kappa = s.model.kappa;
    const double phi = s.model.phi;
    const int n = grid.n_steps;
    constexpr int sub = 20;
    const double h = grid.dt / sub;
    std::vector<double> g(n + 1);
    double a1 = s.model.c;
    double a0 = s.model.c;
    auto post = [&](double a) { return a * a / kappa - phi; };
    auto pre = [&](double t, double a, double b1) { return post(a) + exo_intensity(t, s) * (a - b1); };
    for (int i = n; i >= 0; --i) {
        if (i >= burst_step) a0 = a1;
        g[i] = std::min((i < burst_step ? a0 : a1) / kappa, 1.0 / grid.dt);
        if (i == 0) break;
        // RK4 backwards over [t_{i-1}, t_i]; A1 drives the pre-burst equation.
        double t = grid.t(i);
        for (int k = 0; k < sub; ++k, t -= h) {
            const double k1 = post(a1), q1 = pre(t, a0, a1);
            const double a1m = a1 - 0.5 * h * k1, a0m = a0 - 0.5 * h * q1;
            const double k2 = post(a1m), q2 = pre(t - 0.5 * h, a0m, a1m);
            const double a1m2 = a1 - 0.5 * h * k2, a0m2 = a0 - 0.5 * h * q2;
            const double k3 = post(a1m2), q3 = pre(t - 0.5 * h, a0m2, a1m2);
            const double a1e = a1 - h * k3, a0e = a0 - h * q3;
            const double k4 = post(a1e), q4 = pre(t - h, a0e, a1e);
            a1 -= h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
            a0 -= h / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4);
        }
    }
    return g;
}

StateDrift reference_drift(const MeanFlows& flows, const TimeGrid& grid, const Scenario& s) {
    auto gain = std::make_shared<const std::vector<double>>(feedback_gain(flows.burst_step, grid, s));
    auto theta = std::make_shared<const std::vector<double>>(flows.theta_bar);
    auto mu = std::make_shared<const std::vector<double>>(flows.mu_bar);
    return [gain, theta, mu](int i, double x) { return (*theta)[i] - (*gain)[i] * (x - (*mu)[i]); };
}

double BsdeFamily::y0_value(int i, double x, double x_at_burst) const {
    const double held = i < burst_step ? x : x_at_burst;
    return held * burst_loss + y0[i](x);
}

double BsdeFamily::y1_value(int eta, int i, double x, double x_at_eta) const {
    return x_at_eta * eta_loss[eta] + y1[i](x);
}

double BsdeFamily::jump(int i, double x) const {
    if (i >= burst_step) return 0.0;
    return diag_y1[i](x) - (x * burst_loss + y0[i](x));
}

BsdeFamily solve_family(const MeanFlows& flows, const NoiseCube& cube, int entry_step,
                        const Scenario& s) {
    const TimeGrid grid(cube.n_steps, s.model.T);
    const int n = grid.n_steps;
    if (entry_step < 0 || entry_step > n) throw std::invalid_argument("solve_family: bad entry step");
    if (static_cast<int>(flows.theta_bar.size()) != n + 1)
        throw std::invalid_argument("solve_family: flows do not match the grid");

    const StateDrift drift = reference_drift(flows, grid, s);
    const auto x = reference_states(cube, s.model.sigma, entry_step, drift);
    BsdeFamily f;
    f.entry_step = entry_step;
    f.burst_step = flows.burst_step;
    f.sigma = s.model.sigma;

    auto post = post_burst_on_states(entry_step, entry_step, x, flows, cube, s);
    f.diag_y1 = diagonal_of(post, flows, grid, s);
    f.eta_loss.assign(n + 1, 0.0);
    for (int eta = entry_step; eta <= n; ++eta)
        f.eta_loss[eta] = burst_loss(grid.t(std::min(eta, flows.burst_step)), s);
    f.stats = post.stats;
    f.winsorized = post.winsorized;

    if (entry_step < flows.burst_step) {
        auto pre = pre_burst_on_states(flows, f.diag_y1, entry_step, x, cube, s);
        f.burst_loss = pre.burst_loss;
        f.y0 = std::move(pre.value);
        f.z0 = std::move(pre.z);
        f.stats.fits += pre.stats.fits;
        f.stats.fallbacks += pre.stats.fallbacks;
        f.winsorized += pre.winsorized;
    } else {
        // Entered at or after tau_bar: nothing distinguishes the two regimes any more.
        f.burst_loss = entry_step == flows.burst_step ? burst_loss(grid.t(entry_step), s) : 0.0;
        f.y0 = post.value;
        f.z0 = post.z;
    }
    f.y1 = std::move(post.value);
    f.z1 = std::move(post.z);
    return f;
}

double expected_initial_value(const BsdeFamily& family, const NoiseCube& cube) {
    const int e = family.entry_step;
    const double total = block_sum(cube.n_paths, Exec::parallel, [&](std::size_t p) {
        const double x = cube.iota[p];
        return family.y0_value(e, x, x);
    });
    return total / static_cast<double>(cube.n_paths);
}

}  // namespace bubble
