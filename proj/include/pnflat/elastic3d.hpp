#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "core.hpp"
#include "operator.hpp"
#include "solver2d.hpp"
#include "symbols.hpp"

namespace pnflat {

// Full-spectrum Fourier coefficients of the slip-plane traces u1(., ., 0+), u2(., ., 0+).
struct BoundaryData {
    Grid2D grid;
    std::vector<cplx> u1_hat, u2_hat;
};

inline BoundaryData boundary_data(const SpectralField2D& u1, const SpectralField2D& u2) {
    if (!u1.grid.same_as(u2.grid)) throw ValidationError("boundary_data: grids differ");
    return {u1.grid, u1.forward(), u2.forward()};
}

// Traces of a reduced 2D field: u1 = perturbation, u2 from the u2_ratio elimination (mode by mode).
inline BoundaryData lift_traces(const Field2D& f, const ElasticParams& p) {
    const Grid2D& g = f.grid();
    BoundaryData bd{g, f.perturbation.forward(), {}};
    bd.u2_hat.assign(g.size(), cplx(0, 0));
    const SymbolContext ctx{p};
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if (i == 0 && j == 0) continue;
            const std::size_t k = g.idx(i, j);
            bd.u2_hat[k] = u2_ratio(Vec2(g.k1(i), g.k2(j)), ctx) * bd.u1_hat[k];
        }
    return bd;
}

// Per-mode coefficients; index 0 is the lower half-space (x3 < 0), 1 the upper.
struct ModeCoeffs {
    cplx A[2], B[2], C[2], D[2], E[2], F[2];
};

struct HalfSpaceField {
    Grid2D grid;
    ElasticParams params;
    std::vector<ModeCoeffs> coeffs;  // full spectrum; the k = 0 entry is unused
    cplx rigid_u1{0, 0}, rigid_u2{0, 0};
    bool rigid_offset = false;  // nonzero k = 0 trace, kept as a rigid translation
    double nyquist_dropped = 0;  // largest trace amplitude on the Nyquist lines (not extended)
    bool nyquist(int i, int j) const { return (grid.n1 % 2 == 0 && 2 * i == grid.n1) || (grid.n2 % 2 == 0 && 2 * j == grid.n2); }
    double kappa(int i, int j) const { return std::hypot(grid.k1(i), grid.k2(j)); }
};

inline ModeCoeffs extend_mode(double k1, double k2, cplx u1, cplx u2, double nu) {
    const double r = std::hypot(k1, k2);
    if (r == 0) throw DomainError("extend_mode: k = 0");
    ModeCoeffs c;
    c.A[0] = -u1;
    c.E[0] = -u2;
    c.D[0] = -cplx(0, 1) * (k1 * c.A[0] + k2 * c.E[0]) / (2 * r * (1 - nu));
    c.B[0] = cplx(0, k1 / r) * c.D[0];
    c.F[0] = cplx(0, k2 / r) * c.D[0];
    c.C[0] = (2 * nu - 1) * c.D[0];
    c.A[1] = -c.A[0];
    c.B[1] = -c.B[0];
    c.C[1] = c.C[0];
    c.D[1] = c.D[0];
    c.E[1] = -c.E[0];
    c.F[1] = -c.F[0];
    return c;
}

inline HalfSpaceField extend(const BoundaryData& bd, const ElasticParams& p) {
    if (!(p.nu >= -1 && p.nu <= 0.5)) throw ValidationError("extend: nu must lie in [-1, 1/2]");
    const Grid2D& g = bd.grid;
    if (bd.u1_hat.size() != g.size() || bd.u2_hat.size() != g.size())
        throw ValidationError("extend: coefficient arrays do not match the grid");
    HalfSpaceField hs;
    hs.grid = g;
    hs.params = p;
    hs.coeffs.resize(g.size());
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const std::size_t k = g.idx(i, j);
            if (i == 0 && j == 0) {
                hs.rigid_u1 = bd.u1_hat[k];
                hs.rigid_u2 = bd.u2_hat[k];
                hs.rigid_offset = std::abs(bd.u1_hat[k]) + std::abs(bd.u2_hat[k]) > 0;
                continue;
            }
            if (hs.nyquist(i, j)) {
                hs.nyquist_dropped = std::max({hs.nyquist_dropped, std::abs(bd.u1_hat[k]), std::abs(bd.u2_hat[k])});
                continue;
            }
            hs.coeffs[k] = extend_mode(g.k1(i), g.k2(j), bd.u1_hat[k], bd.u2_hat[k], p.nu);
        }
    return hs;
}

namespace detail {

// f = (P + s Q r x) e^{s r x} with s = +1 below the plane, -1 above; value and two derivatives.
struct Mode3 {
    cplx f, df, d2f;
};

inline Mode3 mode_eval(cplx P, cplx Q, double r, double x, int s) {
    const double e = std::exp(s * r * x);
    return {(P + double(s) * Q * r * x) * e, double(s) * r * (P + Q + double(s) * Q * r * x) * e,
            r * r * (P + 2.0 * Q + double(s) * Q * r * x) * e};
}

inline int side_index(double x3, int side) {
    if (x3 > 0) return 1;
    if (x3 < 0) return 0;
    if (side == 0) throw ValidationError("x3 = 0 needs an explicit side (+1 or -1)");
    return side > 0 ? 1 : 0;
}

}  // namespace detail

struct Displacement {
    std::vector<cplx> u1, u2, u3;
};

// Coefficients of u(., ., x3); at x3 = 0 the side (+1 / -1) selects the trace.
inline Displacement evaluate_displacement(const HalfSpaceField& hs, double x3, int side = 0) {
    const int h = detail::side_index(x3, side), s = h == 1 ? -1 : 1;
    const Grid2D& g = hs.grid;
    Displacement d;
    d.u1.assign(g.size(), 0);
    d.u2.assign(g.size(), 0);
    d.u3.assign(g.size(), 0);
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const std::size_t k = g.idx(i, j);
            if (i == 0 && j == 0) {
                d.u1[k] = h == 1 ? hs.rigid_u1 : -hs.rigid_u1;
                d.u2[k] = h == 1 ? hs.rigid_u2 : -hs.rigid_u2;
                continue;
            }
            const ModeCoeffs& c = hs.coeffs[k];
            const double r = hs.kappa(i, j);
            d.u1[k] = detail::mode_eval(c.A[h], c.B[h], r, x3, s).f;
            d.u2[k] = detail::mode_eval(c.E[h], c.F[h], r, x3, s).f;
            d.u3[k] = detail::mode_eval(c.C[h], c.D[h], r, x3, s).f;
        }
    return d;
}

// Residuals of the three transformed Lame equations for one mode at x3.
inline Eigen::Vector3cd lame_mode_residual(const ModeCoeffs& c, double k1, double k2, double nu, double x3) {
    const int h = x3 > 0 ? 1 : 0, s = h == 1 ? -1 : 1;
    const double r = std::hypot(k1, k2);
    const auto u1 = detail::mode_eval(c.A[h], c.B[h], r, x3, s);
    const auto u2 = detail::mode_eval(c.E[h], c.F[h], r, x3, s);
    const auto u3 = detail::mode_eval(c.C[h], c.D[h], r, x3, s);
    const cplx I(0, 1);
    Eigen::Vector3cd res;
    res[0] = (1 - 2 * nu) * u1.d2f - ((2 - 2 * nu) * k1 * k1 + (1 - 2 * nu) * k2 * k2) * u1.f + I * k1 * u3.df -
             k1 * k2 * u2.f;
    res[1] = (2 - 2 * nu) * u3.d2f - (1 - 2 * nu) * r * r * u3.f + I * k1 * u1.df + I * k2 * u2.df;
    res[2] = (1 - 2 * nu) * u2.d2f - ((2 - 2 * nu) * k2 * k2 + (1 - 2 * nu) * k1 * k1) * u2.f + I * k2 * u3.df -
             k1 * k2 * u1.f;
    return res;
}

// Max over modes and samples of the Lame residual, relative to |k|^2 x (largest coefficient) x envelope.
inline double lame_residual(const HalfSpaceField& hs, const std::vector<double>& x3_samples) {
    const Grid2D& g = hs.grid;
    double worst = 0;
    for (double x3 : x3_samples) {
        if (x3 == 0) throw ValidationError("lame_residual: samples must be off the slip plane");
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) {
                if (i == 0 && j == 0) continue;
                const ModeCoeffs& c = hs.coeffs[g.idx(i, j)];
                const int h = x3 > 0 ? 1 : 0;
                const double scale = std::max({std::abs(c.A[h]), std::abs(c.B[h]), std::abs(c.C[h]),
                                               std::abs(c.D[h]), std::abs(c.E[h]), std::abs(c.F[h])});
                if (scale == 0) continue;
                const double r = hs.kappa(i, j);
                const double env = r * r * scale * (1 + r * std::abs(x3)) * std::exp(-r * std::abs(x3));
                const auto res = lame_mode_residual(c, g.k1(i), g.k2(j), hs.params.nu, x3);
                if (env > 0) worst = std::max(worst, res.cwiseAbs().maxCoeff() / env);
            }
    }
    return worst;
}

struct Traction {
    // Per side (index 0: x3 = 0-, 1: x3 = 0+), full spectrum.
    std::vector<cplx> s13[2], s23[2], s33[2];
    std::vector<cplx> s13_sum() const {
        std::vector<cplx> out(s13[0].size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = s13[0][k] + s13[1][k];
        return out;
    }
    std::vector<cplx> s23_sum() const {
        std::vector<cplx> out(s23[0].size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = s23[0][k] + s23[1][k];
        return out;
    }
};

// sigma = 2G eps + (2 nu G / (1 - 2 nu)) tr(eps) I, per mode at x3 = 0-/0+.
inline Traction traction(const HalfSpaceField& hs) {
    const double nu = hs.params.nu, G = hs.params.shear_modulus;
    if (!(1 - 2 * nu > 0)) throw DomainError("traction: nu = 1/2 makes the constitutive law singular");
    const double lam = 2 * nu * G / (1 - 2 * nu);
    const Grid2D& g = hs.grid;
    Traction t;
    for (int h = 0; h < 2; ++h) {
        t.s13[h].assign(g.size(), 0);
        t.s23[h].assign(g.size(), 0);
        t.s33[h].assign(g.size(), 0);
    }
    const cplx I(0, 1);
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if (i == 0 && j == 0) continue;
            const std::size_t k = g.idx(i, j);
            const ModeCoeffs& c = hs.coeffs[k];
            const double r = hs.kappa(i, j), k1 = g.k1(i), k2 = g.k2(j);
            for (int h = 0; h < 2; ++h) {
                const int s = h == 1 ? -1 : 1;
                const auto u1 = detail::mode_eval(c.A[h], c.B[h], r, 0.0, s);
                const auto u2 = detail::mode_eval(c.E[h], c.F[h], r, 0.0, s);
                const auto u3 = detail::mode_eval(c.C[h], c.D[h], r, 0.0, s);
                t.s13[h][k] = G * (u1.df + I * k1 * u3.f);
                t.s23[h][k] = G * (u2.df + I * k2 * u3.f);
                t.s33[h][k] = 2 * G * u3.df + lam * (I * k1 * u1.f + I * k2 * u2.f + u3.df);
            }
        }
    return t;
}

struct RoundTrip {
    double d2n_defect = 0;      // max |sigma13+ + sigma13- + (A u)_1|, same for 23, relative to max(1, |A||u|)
    double sigma33_jump = 0;    // max |sigma33+ - sigma33-|
    double hermitian_defect = 0;
};

inline RoundTrip traction_round_trip(const HalfSpaceField& hs, const BoundaryData& bd) {
    const Traction t = traction(hs);
    const Grid2D& g = hs.grid;
    const SymbolContext ctx{hs.params};
    RoundTrip rt;
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            if ((i == 0 && j == 0) || hs.nyquist(i, j)) continue;
            const std::size_t k = g.idx(i, j);
            const Eigen::Matrix2d A = d2n_matrix(Vec2(g.k1(i), g.k2(j)), ctx);
            const Eigen::Vector2cd u(bd.u1_hat[k], bd.u2_hat[k]);
            const Eigen::Vector2cd Au = A.cast<cplx>() * u;
            const Eigen::Vector2cd s(t.s13[0][k] + t.s13[1][k], t.s23[0][k] + t.s23[1][k]);
            const double scale = std::max(1.0, A.norm() * u.norm());
            rt.d2n_defect = std::max(rt.d2n_defect, (s + Au).norm() / scale);
            rt.sigma33_jump = std::max(rt.sigma33_jump, std::abs(t.s33[1][k] - t.s33[0][k]) / scale);
            const std::size_t km = g.idx((g.n1 - i) % g.n1, (g.n2 - j) % g.n2);
            rt.hermitian_defect =
                std::max(rt.hermitian_defect, std::abs(t.s13[1][k] - std::conj(t.s13[1][km])) / scale);
        }
    return rt;
}

namespace detail {

inline std::vector<double> real_inverse(const Grid2D& g, const std::vector<cplx>& spec, double* imag_max = nullptr) {
    FFT2 fft(g.n1, g.n2);
    std::vector<cplx> out;
    fft.inverse_full(spec, out);
    std::vector<double> r(out.size());
    double im = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        r[k] = out[k].real();
        im = std::max(im, std::abs(out[k].imag()));
    }
    if (imag_max) *imag_max = im;
    return r;
}

}  // namespace detail

// Physical-space tractions at 0+ (per side) and the combined sigma13; imaginary residue reported.
struct PhysicalTraction {
    std::vector<double> s13_plus, s23_plus, s13_sum, s23_sum;
    double imag_max = 0;
};

inline PhysicalTraction physical_traction(const HalfSpaceField& hs) {
    const Traction t = traction(hs);
    PhysicalTraction p;
    double im[4];
    p.s13_plus = detail::real_inverse(hs.grid, t.s13[1], &im[0]);
    p.s23_plus = detail::real_inverse(hs.grid, t.s23[1], &im[1]);
    p.s13_sum = detail::real_inverse(hs.grid, t.s13_sum(), &im[2]);
    p.s23_sum = detail::real_inverse(hs.grid, t.s23_sum(), &im[3]);
    p.imag_max = std::max({im[0], im[1], im[2], im[3]});
    return p;
}

// Combined sigma13 of an x2-invariant straight background: -(2G/beta) (-Delta)^{1/2} phi.
inline std::vector<double> straight_background_traction(const Profile1D& phi, const ElasticParams& p) {
    auto hl = halflap_1d(phi);
    for (double& v : hl) v *= -2 * p.shear_modulus / p.beta;
    return hl;
}

// sup | sigma13+ + sigma13- - W'(u1+) | on the grid; the optional background adds its analytic traction and trace.
inline double boundary_residual(const HalfSpaceField& hs, const MisfitPotential& W,
                                const Profile1D* background = nullptr) {
    const Grid2D& g = hs.grid;
    const PhysicalTraction pt = physical_traction(hs);
    const Displacement tr = evaluate_displacement(hs, 0.0, +1);
    const std::vector<double> u1 = detail::real_inverse(g, tr.u1);
    std::vector<double> bg_t;
    if (background) {
        if (background->grid.n != g.n1) throw ValidationError("boundary_residual: background grid mismatch");
        bg_t = straight_background_traction(*background, hs.params);
    }
    double m = 0;
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const std::size_t k = g.idx(i, j);
            double s = pt.s13_sum[k], u = u1[k];
            if (background) {
                s += bg_t[i];
                u += background->values[i];
            }
            m = std::max(m, std::abs(s - W.deriv(u)));
        }
    return m;
}

}  // namespace pnflat
