#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace pnflat {

struct GaussRule {
    std::vector<double> x, w;  // on [-1, 1]
};

// Legendre roots by Newton from the Chebyshev-like initial guess.
inline GaussRule gauss_legendre(int n) {
    if (n < 1) throw ValidationError("gauss_legendre: order must be >= 1");
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    // returns (P_n(z), P_n'(z))
    auto legendre = [n](double z) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        return std::pair<double, double>{p1, n * (z * p1 - p0) / (z * z - 1)};
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = legendre(z);
            const double dz = p / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const double dp = legendre(z).second;
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = 2 / ((1 - z * z) * dp * dp);
    }
    return r;
}

template <class F>
double integrate(const GaussRule& g, F&& f, double a, double b) {
    const double c = 0.5 * (a + b), s = 0.5 * (b - a);
    double acc = 0;
    for (std::size_t i = 0; i < g.x.size(); ++i) acc += g.w[i] * f(c + s * g.x[i]);
    return acc * s;
}

// Composite rule with `panels` equal subintervals.
template <class F>
double integrate(const GaussRule& g, F&& f, double a, double b, int panels) {
    const double d = (b - a) / panels;
    double acc = 0;
    for (int p = 0; p < panels; ++p) acc += integrate(g, f, a + p * d, a + (p + 1) * d);
    return acc;
}

}  // namespace pnflat
