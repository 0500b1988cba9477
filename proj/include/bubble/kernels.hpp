#pragma once

// Data-parallel building blocks. Every kernel has a serial form and an OpenMP form;
// the parallel forms partition work into fixed-size blocks and combine partial results
// in block order, so outputs do not depend on the thread count.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bubble {

enum class Exec { serial, parallel };

inline constexpr std::size_t kReduceBlock = 2048;

int thread_count();
void set_thread_count(int n);
// Applies BUBBLE_THREADS from the environment if set; returns the resulting count.
int apply_thread_env();

template <class F>
void for_each_path(std::size_t n, Exec exec, F&& body) {
    if (exec == Exec::serial) {
        for (std::size_t p = 0; p < n; ++p) body(p);
        return;
    }
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < count; ++p) body(static_cast<std::size_t>(p));
}

// Sums body(p) over p in [0,n). Block partials are combined in block order in both modes.
template <class F>
double block_sum(std::size_t n, Exec exec, F&& body) {
    const std::size_t n_blocks = (n + kReduceBlock - 1) / kReduceBlock;
    std::vector<double> partial(n_blocks, 0.0);
    auto run_block = [&](std::size_t b) {
        const std::size_t lo = b * kReduceBlock;
        const std::size_t hi = std::min(n, lo + kReduceBlock);
        double acc = 0.0;
        for (std::size_t p = lo; p < hi; ++p) acc += body(p);
        partial[b] = acc;
    };
    for_each_path(n_blocks, exec, run_block);
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

// Normal equations G = F^T F and r = F^T y for a row-major design F (n rows, m columns).
struct NormalEquations {
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
};

// Blocked accumulation; identical results for Exec::serial and Exec::parallel.
NormalEquations accumulate_normal_equations(std::span<const double> design, std::size_t cols,
                                            std::span<const double> target, Exec exec);

// Plain single-pass loop, kept as the reference the blocked kernel is tested against.
NormalEquations accumulate_normal_equations_reference(std::span<const double> design,
                                                      std::size_t cols,
                                                      std::span<const double> target);

}  // namespace bubble
