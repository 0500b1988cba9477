#include "bubble/stochastics.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bubble {

namespace {

constexpr std::uint64_t kStreamInventory = 0;
constexpr std::uint64_t kStreamPrice = 1;
constexpr std::uint64_t kStreamBurst = 2;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit_exponential(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return -std::log1p(-u(rng));
}

// Smallest t with cumulative intensity >= e, for a piecewise-constant table.
double invert_piecewise(const std::vector<Knot>& tab, double e) {
    double acc = 0.0;
    for (std::size_t j = 0; j < tab.size(); ++j) {
        const double rate = tab[j].v;
        const bool last = j + 1 == tab.size();
        const double width = last ? kNoBurst : tab[j + 1].t - tab[j].t;
        if (rate > 0.0) {
            const double need = (e - acc) / rate;
            if (need <= width) return tab[j].t + need;
        }
        if (last) break;
        acc += rate * width;
    }
    return kNoBurst;
}

double draw_burst(const Scenario* s, double k, std::mt19937_64& rng) {
    const double e = unit_exponential(rng);
    if (s && !s->burst.k_table.empty()) return invert_piecewise(s->burst.k_table, e);
    if (k <= 0.0) return kNoBurst;
    return std::sqrt(2.0 * e / k);
}

std::vector<double> sample_bursts(const Scenario* s, double k, std::size_t n, Seed seed, Exec exec) {
    std::vector<double> out(n);
    for_each_path(n, exec, [&](std::size_t p) {
        auto rng = substream(seed, p, kStreamBurst);
        out[p] = draw_burst(s, k, rng);
    });
    return out;
}

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("bundle cache: truncated file");
    return v;
}

constexpr char kMagic[4] = {'B', 'B', 'L', 'B'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::mt19937_64 substream(Seed seed, std::uint64_t index, std::uint64_t stream) {
    const std::uint64_t a = splitmix64(seed.value ^ splitmix64(stream + 0x5bd1e995ULL));
    const std::uint64_t b = splitmix64(a ^ splitmix64(index));
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return std::mt19937_64(seq);
}

PathBundle sample_bundle(const Scenario& s, Seed seed, Exec exec) {
    const auto& num = s.numerics;
    if (num.n_paths <= 0 || num.n_steps <= 0)
        throw std::invalid_argument("sample_bundle: sizes must be positive");
    PathBundle b;
    b.n_paths = static_cast<std::size_t>(num.n_paths);
    b.n_steps = static_cast<std::size_t>(num.n_steps);
    b.dt = s.model.T / static_cast<double>(num.n_steps);
    b.dW.resize(b.n_paths * b.n_steps);
    b.dW0.resize(b.n_paths * b.n_steps);
    b.iota.resize(b.n_paths);
    const double sd = std::sqrt(b.dt);
    const std::size_t n = b.n_steps;

    auto draw_path = [&](std::size_t p) {
        auto rng = substream(seed, p, kStreamInventory);
        std::normal_distribution<double> z(0.0, 1.0);
        double iota = s.init.mean + s.init.std * z(rng);
        if (s.init.truncate_at_zero)
            while (iota < 0.0) iota = s.init.mean + s.init.std * z(rng);
        b.iota[p] = iota;
        for (std::size_t i = 0; i < n; ++i) b.dW[p * n + i] = sd * z(rng);
        auto rng0 = substream(seed, p, kStreamPrice);
        std::normal_distribution<double> z0(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) b.dW0[p * n + i] = sd * z0(rng0);
    };

    if (!num.antithetic) {
        for_each_path(b.n_paths, exec, draw_path);
    } else {
        // Even paths draw; odd paths mirror their partner.
        const std::size_t pairs = (b.n_paths + 1) / 2;
        for_each_path(pairs, exec, [&](std::size_t q) {
            const std::size_t p = 2 * q;
            draw_path(p);
            if (p + 1 >= b.n_paths) return;
            for (std::size_t i = 0; i < n; ++i) {
                b.dW[(p + 1) * n + i] = -b.dW[p * n + i];
                b.dW0[(p + 1) * n + i] = -b.dW0[p * n + i];
            }
            const double mirrored = 2.0 * s.init.mean - b.iota[p];
            b.iota[p + 1] = (s.init.truncate_at_zero && mirrored < 0.0) ? b.iota[p] : mirrored;
        });
    }
    b.tau_exo = sample_bursts(&s, s.burst.k, b.n_paths, seed, exec);
    return b;
}

std::vector<double> sample_exogenous(double k, std::size_t n, Seed seed, Exec exec) {
    return sample_bursts(nullptr, k, n, seed, exec);
}

std::vector<double> sample_exogenous(const Scenario& s, std::size_t n, Seed seed, Exec exec) {
    return sample_bursts(&s, s.burst.k, n, seed, exec);
}

std::string bundle_cache_name(Seed seed, std::uint64_t hash) {
    std::ostringstream name;
    name << "bundle_" << std::hex << hash << "_" << std::dec << seed.value << ".bin";
    return name.str();
}

void save_bundle(const std::string& path, const PathBundle& b, Seed seed, std::uint64_t hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("bundle cache: cannot write '" + path + "'");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, seed.value);
    write_pod(out, hash);
    write_pod(out, static_cast<std::uint64_t>(b.n_paths));
    write_pod(out, static_cast<std::uint64_t>(b.n_steps));
    write_pod(out, b.dt);
    for (const auto* v : {&b.dW, &b.dW0, &b.iota, &b.tau_exo})
        out.write(reinterpret_cast<const char*>(v->data()),
                  static_cast<std::streamsize>(v->size() * sizeof(double)));
}

PathBundle load_bundle(const std::string& path, Seed seed, std::uint64_t hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("bundle cache: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bundle cache: bad magic");
    if (read_pod<std::uint32_t>(in) != kVersion) throw std::runtime_error("bundle cache: unsupported version");
    if (read_pod<std::uint64_t>(in) != seed.value || read_pod<std::uint64_t>(in) != hash)
        throw std::runtime_error("bundle cache: seed or scenario hash mismatch");
    PathBundle b;
    b.n_paths = read_pod<std::uint64_t>(in);
    b.n_steps = read_pod<std::uint64_t>(in);
    b.dt = read_pod<double>(in);
    const std::size_t cells = b.n_paths * b.n_steps;
    auto read_block = [&](std::vector<double>& v, std::size_t count) {
        v.resize(count);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("bundle cache: truncated file");
    };
    read_block(b.dW, cells);
    read_block(b.dW0, cells);
    read_block(b.iota, b.n_paths);
    read_block(b.tau_exo, b.n_paths);
    return b;
}

}  // namespace bubble
