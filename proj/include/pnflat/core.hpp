#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"

namespace pnflat {

inline constexpr double pi = std::numbers::pi;

struct ElasticParams {
    double nu = 0.0;
    double shear_modulus = 0.5;
    double beta = 1.0;
    bool kernel_positive = true;
};

// Open interval (2/3, 3/2); endpoints within 1e-12 count as the endpoint (1 - 1/3 rounds above 2/3).
inline bool beta_in_positive_range(double beta) { return beta > 2.0 / 3.0 + 1e-12 && beta < 1.5 - 1e-12; }

inline ElasticParams make_elastic_params(double nu, double G = 0.5) {
    if (!(nu >= -1.0)) throw ValidationError("nu must be >= -1, got " + std::to_string(nu));
    if (!(nu <= 0.5)) throw ValidationError("nu must be <= 1/2, got " + std::to_string(nu));
    if (!(G > 0.0)) throw ValidationError("shear modulus G must be > 0, got " + std::to_string(G));
    ElasticParams p;
    p.nu = nu;
    p.shear_modulus = G;
    p.beta = 1.0 - nu;
    p.kernel_positive = beta_in_positive_range(p.beta);
    return p;
}

inline ElasticParams params_from_beta(double beta, double G = 0.5) {
    return make_elastic_params(1.0 - beta, G);
}

enum class PotentialKind { sinusoidal, user_supplied };

struct MisfitPotential {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::function<double(double)> second_deriv;
    PotentialKind kind = PotentialKind::user_supplied;
    bool validated = false;

    double operator()(double u) const { return value(u); }
    static constexpr double well_minus = -1.0;
    static constexpr double well_plus = 1.0;
};

// Dense sampling check of W(x) > max(W(-1), W(1)) on (-1,1) and W''(+-1) > 0.
inline void validate_potential(const MisfitPotential& W, int samples = 1000) {
    const double wmax = std::max(W.value(-1.0), W.value(1.0));
    for (int i = 1; i <= samples; ++i) {
        const double x = -1.0 + 2.0 * i / (samples + 1.0);
        if (!(W.value(x) > wmax))
            throw ValidationError("potential: W(" + std::to_string(x) + ") <= well value");
    }
    if (!(W.second_deriv(-1.0) > 0.0) || !(W.second_deriv(1.0) > 0.0))
        throw ValidationError("potential: W''(+-1) must be positive");
}

inline MisfitPotential make_potential(std::function<double(double)> w, std::function<double(double)> dw,
                                      std::function<double(double)> d2w) {
    MisfitPotential W{std::move(w), std::move(dw), std::move(d2w), PotentialKind::user_supplied, false};
    validate_potential(W);
    W.validated = true;
    return W;
}

// No well checks; for degenerate probes (W' = 0, W'' = const).
inline MisfitPotential make_unchecked_potential(std::function<double(double)> w,
                                                std::function<double(double)> dw,
                                                std::function<double(double)> d2w) {
    return MisfitPotential{std::move(w), std::move(dw), std::move(d2w), PotentialKind::user_supplied, false};
}

inline MisfitPotential sinusoidal_potential() {
    MisfitPotential W{[](double u) { return (1.0 + std::cos(pi * u)) / (pi * pi); },
                      [](double u) { return -std::sin(pi * u) / pi; },
                      [](double u) { return -std::cos(pi * u); }, PotentialKind::sinusoidal, false};
    validate_potential(W);
    W.validated = true;
    return W;
}

// W(u) = (1-u^2)^2/4.
inline MisfitPotential double_well_potential() {
    return make_potential([](double u) { return 0.25 * (1 - u * u) * (1 - u * u); },
                          [](double u) { return u * u * u - u; },
                          [](double u) { return 3 * u * u - 1; });
}

struct Grid1D {
    double L = 0;
    int n = 0;
    double h = 0;

    Grid1D() = default;
    Grid1D(double half_width, int count) : L(half_width), n(count), h(2 * half_width / count) {
        if (count < 8 || count % 2) throw ValidationError("Grid1D: n must be even and >= 8");
        if (!(half_width > 0)) throw ValidationError("Grid1D: half width must be positive");
    }
    double x(int j) const { return -L + j * h; }
    std::vector<double> nodes() const {
        std::vector<double> v(n);
        for (int j = 0; j < n; ++j) v[j] = x(j);
        return v;
    }
    // Index of the node x = 0.
    int center() const { return n / 2; }
};

struct Grid2D {
    double L1 = 0, L2 = 0;
    int n1 = 0, n2 = 0;

    Grid2D() = default;
    Grid2D(double l1, double l2, int m1, int m2) : L1(l1), L2(l2), n1(m1), n2(m2) {
        if (m1 < 8 || m2 < 8 || m1 % 2 || m2 % 2) throw ValidationError("Grid2D: counts must be even and >= 8");
        if (!(l1 > 0 && l2 > 0)) throw ValidationError("Grid2D: periods must be positive");
    }
    double h1() const { return L1 / n1; }
    double h2() const { return L2 / n2; }
    double x1(int i) const { return -0.5 * L1 + i * h1(); }
    double x2(int j) const { return -0.5 * L2 + j * h2(); }
    double k1(int i) const { return 2 * pi * mode_index(i, n1) / L1; }
    double k2(int j) const { return 2 * pi * mode_index(j, n2) / L2; }
    std::size_t size() const { return std::size_t(n1) * n2; }
    std::size_t idx(int i, int j) const { return std::size_t(i) * n2 + j; }
    double cell_area() const { return h1() * h2(); }
    bool same_as(const Grid2D& o) const { return L1 == o.L1 && L2 == o.L2 && n1 == o.n1 && n2 == o.n2; }
};

// Samples on a periodic cell, row-major with x1 as the slow index.
struct SpectralField2D {
    Grid2D grid;
    std::vector<double> samples;
    static constexpr const char* fourier_convention =
        "forward exp(-i k.x); inverse exp(+i k.x) with 1/(n1 n2)";

    SpectralField2D() = default;
    explicit SpectralField2D(const Grid2D& g, double fill = 0.0) : grid(g), samples(g.size(), fill) {}
    SpectralField2D(const Grid2D& g, std::vector<double> s) : grid(g), samples(std::move(s)) {
        if (samples.size() != g.size()) throw ValidationError("SpectralField2D: sample count mismatch");
        for (double v : samples)
            if (!std::isfinite(v)) throw ValidationError("SpectralField2D: non-finite sample");
    }

    template <class F>
    static SpectralField2D from_function(const Grid2D& g, F&& f) {
        SpectralField2D u(g);
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) u.samples[g.idx(i, j)] = f(g.x1(i), g.x2(j));
        return u;
    }

    double& at(int i, int j) { return samples[grid.idx(i, j)]; }
    double at(int i, int j) const { return samples[grid.idx(i, j)]; }

    std::vector<cplx> forward() const {
        FFT2 f(grid.n1, grid.n2);
        std::vector<cplx> in(samples.begin(), samples.end()), out;
        f.forward_full(in, out);
        return out;
    }

    static SpectralField2D inverse(const Grid2D& g, const std::vector<cplx>& spec) {
        FFT2 f(g.n1, g.n2);
        std::vector<cplx> out;
        f.inverse_full(spec, out);
        SpectralField2D u(g);
        for (std::size_t i = 0; i < out.size(); ++i) u.samples[i] = out[i].real();
        return u;
    }

    double mean() const {
        double s = 0;
        for (double v : samples) s += v;
        return s / samples.size();
    }
    double sup_norm() const {
        double m = 0;
        for (double v : samples) m = std::max(m, std::abs(v));
        return m;
    }
};

}  // namespace pnflat
