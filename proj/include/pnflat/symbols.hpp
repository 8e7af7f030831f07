#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "core.hpp"
#include "kernel.hpp"

namespace pnflat {

struct SymbolContext {
    ElasticParams params;
};

inline Eigen::Matrix2d d2n_matrix(const Vec2& k, const SymbolContext& ctx) {
    const double r = k.norm();
    if (r == 0) throw DomainError("d2n_matrix: k = 0 (zero mode is handled by the caller)");
    const double nu = ctx.params.nu, G = ctx.params.shear_modulus;
    const double k1 = k[0], k2 = k[1];
    Eigen::Matrix2d A;
    A(0, 0) = k2 * k2 / r + k1 * k1 / ((1 - nu) * r);
    A(1, 1) = k1 * k1 / r + k2 * k2 / ((1 - nu) * r);
    A(0, 1) = A(1, 0) = nu * k1 * k2 / ((1 - nu) * r);
    return 2 * G * A;
}

inline double u2_ratio(const Vec2& k, const SymbolContext& ctx) {
    if (k.norm() == 0) throw DomainError("u2_ratio: k = 0");
    const double nu = ctx.params.nu;
    return -nu * k[0] * k[1] / ((1 - nu) * k[0] * k[0] + k[1] * k[1]);
}

inline double scalar_symbol(double k1, double k2, double beta) {
    const double q = k1 * k1 + k2 * k2;
    if (q == 0) return 0.0;
    return q * std::sqrt(q) / (beta * k1 * k1 + k2 * k2);
}

inline double scalar_symbol(const Vec2& k, const SymbolContext& ctx) {
    return scalar_symbol(k[0], k[1], ctx.params.beta);
}

// Symbol of the operator in the rescaled coordinates (x1/sqrt(beta), x2).
inline double scalar_symbol_bar(double k1, double k2, double beta) {
    const double q = k1 * k1 + k2 * k2;
    if (q == 0) return 0.0;
    const double a = k1 * k1 / beta + k2 * k2;
    return a * std::sqrt(a) / (std::sqrt(beta) * q);
}

inline double effective_beta(double alpha, const SymbolContext& ctx) {
    if (!(std::abs(alpha) < pi / 2)) throw DomainError("effective_beta: alpha must lie in (-pi/2, pi/2)");
    const double c = std::cos(alpha), s = std::sin(alpha);
    return ctx.params.beta * c * c + s * s;
}

// m(k) on the half spectrum n1 x (n2/2+1) of a grid.
inline std::vector<double> symbol_table_half(const Grid2D& g, double beta, bool barred = false) {
    const int nh = g.n2 / 2 + 1;
    std::vector<double> m(std::size_t(g.n1) * nh);
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < nh; ++j)
            m[std::size_t(i) * nh + j] =
                barred ? scalar_symbol_bar(g.k1(i), g.k2(j), beta) : scalar_symbol(g.k1(i), g.k2(j), beta);
    return m;
}

}  // namespace pnflat
