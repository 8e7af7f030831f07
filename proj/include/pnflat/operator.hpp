#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "core.hpp"
#include "kernel.hpp"
#include "profile_type.hpp"
#include "quadrature.hpp"
#include "symbols.hpp"

namespace pnflat {

// ---------------------------------------------------------------- spectral

inline std::vector<double> apply_multiplier(const std::vector<double>& samples, const std::vector<double>& mult_half,
                                            FFT2& fft) {
    std::vector<cplx> spec;
    fft.forward(samples, spec);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= mult_half[i];
    std::vector<double> out;
    fft.inverse(spec, out);
    return out;
}

inline SpectralField2D apply_spectral(const SpectralField2D& u, const SymbolContext& ctx) {
    FFT2 fft(u.grid.n1, u.grid.n2);
    return SpectralField2D(u.grid,
                           apply_multiplier(u.samples, symbol_table_half(u.grid, ctx.params.beta), fft));
}

// ---------------------------------------------------------------- quadrature

struct QuadratureScheme {
    double epsilon = 0.02;
    double R_cut = 40.0;
    int n_radial = 16;            // Gauss-Legendre order per geometric panel
    int n_angular = 256;          // trapezoid nodes on [0, pi)
    double tail_decay_exponent = 3.0;
    // Limit of u(x+y) + u(x-y) as |y| -> inf. When unset the pair sum at R_cut is taken as converged.
    std::optional<double> far_pair_sum;
    double tolerance = 1e-6;
    static constexpr double C_d = 1.0 / (2.0 * pi);

    void validate() const {
        if (!(epsilon > 0 && epsilon < R_cut)) throw ValidationError("QuadratureScheme: need 0 < epsilon < R_cut");
        if (n_radial < 8 || n_angular < 8) throw ValidationError("QuadratureScheme: counts must be >= 8");
    }
};

struct QuadratureResult {
    double value;
    double richardson_defect;
};

// -(1/4pi) int (u(x+y) + u(x-y) - 2u(x)) K(y) dy in polar coordinates.
inline QuadratureResult apply_quadrature_detailed(const std::function<double(const Vec2&)>& u, const Vec2& x,
                                                  const KernelEval& ke, const QuadratureScheme& qs) {
    qs.validate();
    const double u0 = u(x);
    if (!std::isfinite(u0)) throw NumericalError("apply_quadrature: non-finite sample of u", u0);
    const GaussRule g = gauss_legendre(qs.n_radial);
    const int na = qs.n_angular;
    const double dtheta = pi / na;

    std::vector<double> kang(na);
    for (int a = 0; a < na; ++a) {
        kang[a] = kernel_unbarred_angular(a * dtheta, ke);
    }

    // int_{r0}^{r1} d2(r, theta) / r^2 dr over angles, times 2 for the y -> -y half.
    auto ring = [&](double r0, double r1) {
        double acc = 0;
        for (int a = 0; a < na; ++a) {
            const Vec2 e(std::cos(a * dtheta), std::sin(a * dtheta));
            auto f = [&](double r) {
                const double d2 = u(x + r * e) + u(x - r * e) - 2 * u0;
                if (!std::isfinite(d2)) throw NumericalError("apply_quadrature: non-finite sample of u", d2);
                return d2 / (r * r);
            };
            double s = 0, lo = r0;
            while (lo < r1) {
                const double hi = std::min(2 * lo, r1);
                s += integrate(g, f, lo, hi);
                lo = hi;
            }
            acc += kang[a] * s * dtheta;
        }
        return 2 * acc;
    };

    const double e = qs.epsilon;
    const double main = ring(e, qs.R_cut);
    const double i1 = main, i2 = main + ring(e / 2, e), i3 = i2 + ring(e / 4, e / 2);
    const double rich1 = 2 * i2 - i1, rich2 = 2 * i3 - i2;
    const double defect = std::abs(rich1 - rich2);
    const double scale = std::max(1.0, std::abs(rich2));
    if (defect > 10 * qs.tolerance * scale)
        throw NumericalError("apply_quadrature: Richardson estimates disagree", defect);

    // Far field: constant part exactly, remainder with the declared decay.
    const double R = qs.R_cut;
    double tail = 0;
    for (int a = 0; a < na; ++a) {
        const Vec2 ev(std::cos(a * dtheta), std::sin(a * dtheta));
        const double pair = u(x + R * ev) + u(x - R * ev);
        const double far = qs.far_pair_sum.value_or(pair);
        tail += kang[a] * ((far - 2 * u0) + (pair - far) / (qs.tail_decay_exponent + 1)) * dtheta;
    }
    tail *= 2 / R;

    const double integral = rich2 + tail;
    return {-integral / (4 * pi), defect / (4 * pi)};
}

inline double apply_quadrature(const std::function<double(const Vec2&)>& u, const Vec2& x, const KernelEval& ke,
                               const QuadratureScheme& qs) {
    return apply_quadrature_detailed(u, x, ke, qs).value;
}

// ---------------------------------------------------------------- 1D half-Laplacian

// (-Delta)^{1/2} on a truncated uniform grid. Interior offsets use the weights 2/(pi h m^2)
// on odd m; beyond the grid the profile is continued by its far state - c/y (y measured from
// the tail center), summed as explicit terms plus an integral and an end correction.
class HalfLaplacian1D {
public:
    HalfLaplacian1D(const Grid1D& g, double c, double center = 0.0, double far_minus = -1.0,
                    double far_plus = 1.0, int explicit_terms = 32)
        : grid_(g), c_(c), center_(center), fm_(far_minus), fp_(far_plus), K_(explicit_terms) {
        const int n = g.n;
        const double h = g.h;
        w_.assign(n, 0.0);
        for (int m = 1; m < n; m += 2) w_[m] = 2.0 / (pi * h * double(m) * m);
        diag_.assign(n, 0.0);
        b_.assign(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double inner = 0;
            for (int m = 1; m < n; m += 2) {
                if (i + m < n) inner += w_[m];
                if (i - m >= 0) inner += w_[m];
            }
            const double t0 = tails(i, 0.0), t1 = tails(i, 1.0);
            diag_[i] = inner + (t1 - t0);
            b_[i] = t0;
        }
    }

    const Grid1D& grid() const { return grid_; }
    double tail_coefficient() const { return c_; }

    std::vector<double> apply(const std::vector<double>& phi) const {
        const int n = grid_.n;
        std::vector<double> out(n);
        for (int i = 0; i < n; ++i) {
            double s = diag_[i] * phi[i] + b_[i];
            for (int m = 1; m < n; m += 2) {
                if (i + m < n) s -= w_[m] * phi[i + m];
                if (i - m >= 0) s -= w_[m] * phi[i - m];
            }
            out[i] = s;
        }
        return out;
    }

    // Jacobian of apply (affine map: apply(phi) = M phi + b).
    Eigen::MatrixXd matrix() const {
        const int n = grid_.n;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            M(i, i) = diag_[i];
            for (int m = 1; m < n; m += 2) {
                if (i + m < n) M(i, i + m) = -w_[m];
                if (i - m >= 0) M(i, i - m) = -w_[m];
            }
        }
        return M;
    }

    const std::vector<double>& affine_part() const { return b_; }

private:
    double tail_value(double y) const {
        const double s = y - center_;
        return (s > 0 ? fp_ : fm_) - c_ / s;
    }

    // int_Y^inf dy / (y (y - x)^2), Y > max(x, 0)
    static double J(double x, double Y) {
        const double t = x / Y;
        if (std::abs(t) < 0.1) {
            double s = 0, p = 1;
            for (int k = 0; k < 40; ++k) {
                s += (k + 1.0) / (k + 2.0) * p;
                p *= t;
            }
            return s / (Y * Y);
        }
        return std::log1p(-t) / (x * x) + 1.0 / (x * (Y - x));
    }

    // Contribution of the virtual nodes on both sides, for the value phi_i = p.
    double tails(int i, double p) const {
        const int n = grid_.n;
        const double h = grid_.h, xi = grid_.x(i) - center_;
        double total = 0;
        for (int side : {1, -1}) {
            int m0 = side > 0 ? n - i : i + 1;
            if (m0 % 2 == 0) ++m0;
            double s = 0;
            for (int k = 0; k < K_; ++k) {
                const double m = m0 + 2.0 * k;
                s += 2.0 / (pi * h * m * m) * (p - tail_value(grid_.x(i) + side * m * h));
            }
            const double a = m0 + 2.0 * K_ - 1.0;
            const double Y = xi + side * a * h;
            double I;
            if (side > 0)
                I = ((p - fp_) / (Y - xi) + c_ * J(xi, Y)) / pi;
            else
                I = -((fm_ - p) / (-Y + xi) + c_ * J(-xi, -Y)) / pi;
            auto G = [&](double sm) {
                return 2.0 / (pi * h * sm * sm) * (p - tail_value(grid_.x(i) + side * sm * h));
            };
            const double d = 1e-3;
            s += I + (G(a + d) - G(a - d)) / (2 * d) / 12.0;
            total += s;
        }
        return total;
    }

    Grid1D grid_;
    double c_, center_, fm_, fp_;
    int K_;
    std::vector<double> w_, diag_, b_;
};

inline std::vector<double> halflap_1d(const Profile1D& phi) {
    if (!phi.tail_coefficient) throw ConfigurationError("halflap_1d: profile has no tail coefficient");
    HalfLaplacian1D op(phi.grid, *phi.tail_coefficient, phi.tail_center, phi.far_minus, phi.far_plus);
    return op.apply(phi.values);
}

}  // namespace pnflat
