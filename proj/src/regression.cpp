#include "bubble/regression.hpp"

#include <cmath>
#include <stdexcept>

namespace bubble {

namespace {

constexpr double kMinRcond = 1e-12;

struct Standardisation {
    double center = 0.0;
    double scale = 1.0;
    bool degenerate = false;
};

Standardisation standardise(std::span<const double> states, Exec exec) {
    const std::size_t n = states.size();
    const double mean = block_sum(n, exec, [&](std::size_t p) { return states[p]; }) / n;
    const double var =
        block_sum(n, exec, [&](std::size_t p) { return (states[p] - mean) * (states[p] - mean); }) / n;
    const double sd = std::sqrt(var);
    Standardisation st{mean, sd > 0.0 ? sd : 1.0, false};
    st.degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    return st;
}

bool solve(const NormalEquations& ne, Eigen::VectorXd& out) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ne.gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > kMinRcond)) return false;
    // rcond() skips exactly zero pivots, so check them directly
    const auto d = ldlt.vectorD().cwiseAbs();
    if (!(d.minCoeff() > kMinRcond * d.maxCoeff())) return false;
    out = ldlt.solve(ne.rhs);
    return out.allFinite();
}

}  // namespace

double PolyFit::operator()(double x) const {
    const double u = (x - center) / scale;
    double acc = 0.0;
    for (auto it = coef.rbegin(); it != coef.rend(); ++it) acc = acc * u + *it;
    return acc;
}

double PolyFit::derivative(double x) const {
    const double u = (x - center) / scale;
    double acc = 0.0;
    for (int k = degree(); k >= 1; --k) acc = acc * u + k * coef[k];
    return acc / scale;
}

void PolyFit::add_constant(double c) {
    if (coef.empty()) coef.push_back(0.0);
    coef[0] += c;
}

void PolyFit::add_linear(double slope) {
    if (coef.size() < 2) coef.resize(2, 0.0);
    coef[0] += slope * center;
    coef[1] += slope * scale;
}

std::vector<double> PolyFit::raw_coefficients() const {
    // sum_k c_k ((x - m)/s)^k expanded binomially
    const int d = degree();
    std::vector<double> raw(std::max(d + 1, 1), 0.0);
    for (int k = 0; k <= d; ++k) {
        const double ck = coef[k] / std::pow(scale, k);
        double binom = 1.0;
        for (int j = 0; j <= k; ++j) {
            raw[j] += ck * binom * std::pow(-center, k - j);
            binom = binom * (k - j) / (j + 1);
        }
    }
    return raw;
}

PolyFit condexp(std::span<const double> values, std::span<const double> states, int degree,
                RegressionStats* stats, Exec exec) {
    if (values.size() != states.size() || values.empty())
        throw std::invalid_argument("condexp: size mismatch");
    const std::size_t n = states.size();
    const auto st = standardise(states, exec);
    PolyFit fit{st.center, st.scale, {}};
    if (stats) ++stats->fits;

    int d = st.degenerate ? 0 : std::min<int>(degree, static_cast<int>(n) - 1);
    std::vector<double> design;
    for (; d >= 0; --d) {
        const std::size_t cols = static_cast<std::size_t>(d) + 1;
        design.assign(n * cols, 0.0);
        for_each_path(n, exec, [&](std::size_t p) {
            const double u = (states[p] - st.center) / st.scale;
            double pw = 1.0;
            for (std::size_t k = 0; k < cols; ++k, pw *= u) design[p * cols + k] = pw;
        });
        Eigen::VectorXd c;
        if (solve(accumulate_normal_equations(design, cols, values, exec), c)) {
            fit.coef.assign(c.data(), c.data() + c.size());
            break;
        }
    }
    if (fit.coef.empty())
        throw std::runtime_error("condexp: regression failed even at degree 0");
    if (stats && fit.degree() < degree && !st.degenerate) ++stats->fallbacks;
    if (stats && st.degenerate && degree > 0) ++stats->fallbacks;
    return fit;
}

StepFit martingale_regression(std::span<const double> y_next, std::span<const double> states,
                              std::span<const double> dw, double dt, int degree,
                              RegressionStats* stats, Exec exec) {
    if (y_next.size() != states.size() || dw.size() != states.size() || states.empty())
        throw std::invalid_argument("martingale_regression: size mismatch");
    const std::size_t n = states.size();
    const auto st = standardise(states, exec);
    const double sqdt = std::sqrt(dt);
    const double vscale = std::sqrt(2.0) * dt;
    if (stats) ++stats->fits;

    StepFit out;
    out.y = {st.center, st.scale, {}};
    out.z = {st.center, st.scale, {}};
    int d = st.degenerate ? 0 : std::min<int>(degree, static_cast<int>(n / 3) - 1);
    std::vector<double> design;
    for (; d >= 0; --d) {
        const std::size_t terms = static_cast<std::size_t>(d) + 1;
        const std::size_t cols = 3 * terms;
        design.assign(n * cols, 0.0);
        for_each_path(n, exec, [&](std::size_t p) {
            const double u = (states[p] - st.center) / st.scale;
            const double w = dw[p] / sqdt;
            const double v = (dw[p] * dw[p] - dt) / vscale;
            double pw = 1.0;
            double* row = design.data() + p * cols;
            for (std::size_t k = 0; k < terms; ++k, pw *= u) {
                row[3 * k] = pw;
                row[3 * k + 1] = pw * w;
                row[3 * k + 2] = pw * v;
            }
        });
        Eigen::VectorXd c;
        if (solve(accumulate_normal_equations(design, cols, y_next, exec), c)) {
            out.y.coef.resize(terms);
            out.z.coef.resize(terms);
            for (std::size_t k = 0; k < terms; ++k) {
                out.y.coef[k] = c[3 * k];
                out.z.coef[k] = c[3 * k + 1] / sqdt;
            }
            break;
        }
    }
    if (out.y.coef.empty())
        throw std::runtime_error("martingale_regression: regression failed even at degree 0");
    if (stats && out.y.degree() < degree) ++stats->fallbacks;
    return out;
}

}  // namespace bubble
