#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "core.hpp"

namespace pnflat {

struct Profile1D {
    Grid1D grid;
    std::vector<double> values;
    double far_minus = -1.0, far_plus = 1.0;
    double beta_tilde = 1.0;
    std::optional<double> tail_coefficient;  // phi ~ +-1 -+ c/|x - tail_center|
    double tail_center = 0.0;
    double residual = 0.0;                   // interior-half sup residual when solved
    bool tail_warning = false;

    double operator[](int j) const { return values[j]; }

    // Four-point Lagrange interpolation on the grid, tail model outside.
    double eval(double x) const {
        const double xl = grid.x(0), xr = grid.x(grid.n - 1);
        if (x < xl || x > xr) {
            const double c = tail_coefficient.value_or(0.0);
            const double y = x - tail_center;
            return (y > 0 ? far_plus : far_minus) - c / y;
        }
        const double s = (x - xl) / grid.h;
        const int j = std::clamp(int(std::floor(s)) - 1, 0, grid.n - 4);
        const double t = s - j;  // position relative to node j, in [0, 3]
        const double w0 = -(t - 1) * (t - 2) * (t - 3) / 6, w1 = t * (t - 2) * (t - 3) / 2;
        const double w2 = -t * (t - 1) * (t - 3) / 2, w3 = t * (t - 1) * (t - 2) / 6;
        return w0 * values[j] + w1 * values[j + 1] + w2 * values[j + 2] + w3 * values[j + 3];
    }
};

}  // namespace pnflat
