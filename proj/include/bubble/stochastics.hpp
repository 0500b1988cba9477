#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bubble/kernels.hpp"
#include "bubble/scenario.hpp"

namespace bubble {

struct Seed {
    std::uint64_t value = 0;
};

// Sentinel for "no exogenous burst": tau = +infinity.
inline constexpr double kNoBurst = std::numeric_limits<double>::infinity();

// All randomness of one Monte Carlo run. Matrices are path-major (row = path).
struct PathBundle {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    double dt = 0.0;
    std::vector<double> dW;    // inventory noise increments, each ~ N(0, dt)
    std::vector<double> dW0;   // fundamental price noise increments
    std::vector<double> iota;  // initial inventories
    std::vector<double> tau_exo;

    double dw(std::size_t path, std::size_t step) const { return dW[path * n_steps + step]; }
    double dw0(std::size_t path, std::size_t step) const { return dW0[path * n_steps + step]; }

    bool operator==(const PathBundle&) const = default;
};

// Independent per-(seed, path, stream) generator; the basis of scheduling-independent sampling.
std::mt19937_64 substream(Seed seed, std::uint64_t index, std::uint64_t stream);

PathBundle sample_bundle(const Scenario& s, Seed seed, Exec exec = Exec::parallel);

// Inverse-transform draws for k_t = k t: tau = sqrt(2E/k), E ~ Exp(1); k = 0 gives kNoBurst.
// Draw i uses the same substream as path i of sample_bundle.
std::vector<double> sample_exogenous(double k, std::size_t n, Seed seed, Exec exec = Exec::parallel);
// Same, for the scenario's intensity (linear or piecewise constant).
std::vector<double> sample_exogenous(const Scenario& s, std::size_t n, Seed seed,
                                     Exec exec = Exec::parallel);

// Binary cache: "BBLB" magic, u32 version, u64 seed, u64 scenario hash, u64 paths, u64 steps,
// f64 dt, then row-major f64 blocks dW, dW0, iota, tau_exo.
void save_bundle(const std::string& path, const PathBundle& b, Seed seed, std::uint64_t hash);
// Throws std::runtime_error on a malformed file or a (seed, hash) mismatch.
PathBundle load_bundle(const std::string& path, Seed seed, std::uint64_t hash);
std::string bundle_cache_name(Seed seed, std::uint64_t hash);

}  // namespace bubble
