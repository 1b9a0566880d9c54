#pragma once

// Independent reference computations used only by the tests.

#include <willmore/lattice.hpp>

#include <cmath>
#include <complex>
#include <functional>
#include <random>

namespace oracle {

using willmore::cplx;

struct LatticeSums {
    cplx wp, zeta, wp1;
};

// Symmetric box sums over |m|,|n| <= N of the absolutely convergent Weierstrass series.
inline LatticeSums box_sums(cplx omega, cplx z, int N)
{
    cplx wp = 1.0 / (z * z);
    cplx zeta = 1.0 / z;
    cplx wp1 = -2.0 / (z * z * z);
    for (int m = -N; m <= N; ++m) {
        for (int n = -N; n <= N; ++n) {
            if (m == 0 && n == 0)
                continue;
            const cplx g = double(m) + double(n) * omega;
            const cplx d = z - g;
            const cplx ig = 1.0 / g;
            wp += 1.0 / (d * d) - ig * ig;
            zeta += 1.0 / d + ig + z * ig * ig;
            wp1 += -2.0 / (d * d * d);
        }
    }
    return {wp, zeta, wp1};
}

// The box truncation error has an asymptotic expansion in N^-2, N^-3, ...;
// two Richardson steps over N, 2N, 4N remove the leading two terms.
inline LatticeSums lattice_sums(cplx omega, cplx z, int N = 40)
{
    const LatticeSums a = box_sums(omega, z, N);
    const LatticeSums b = box_sums(omega, z, 2 * N);
    const LatticeSums c = box_sums(omega, z, 4 * N);
    auto extrapolate = [](cplx x, cplx y, cplx w) {
        const cplx r1 = (4.0 * y - x) / 3.0;
        const cplx r2 = (4.0 * w - y) / 3.0;
        return (8.0 * r2 - r1) / 7.0;
    };
    return {extrapolate(a.wp, b.wp, c.wp), extrapolate(a.zeta, b.zeta, c.zeta), extrapolate(a.wp1, b.wp1, c.wp1)};
}

// g2 = 60 sum' g^-4, g3 = 140 sum' g^-6 over the box |m|,|n| <= N.
inline std::pair<cplx, cplx> eisenstein(cplx omega, int N)
{
    cplx s4 = 0.0, s6 = 0.0;
    for (int m = -N; m <= N; ++m) {
        for (int n = -N; n <= N; ++n) {
            if (m == 0 && n == 0)
                continue;
            const cplx ig = 1.0 / (double(m) + double(n) * omega);
            const cplx ig2 = ig * ig;
            s4 += ig2 * ig2;
            s6 += ig2 * ig2 * ig2;
        }
    }
    return {60.0 * s4, 140.0 * s6};
}

// Trapezoidal rule on a circle: (1/2 pi i) * contour integral of f around c.
inline cplx contour_residue(const std::function<cplx(cplx)>& f, cplx c, double r, int n = 256)
{
    cplx sum = 0.0;
    for (int j = 0; j < n; ++j) {
        const double t = 2.0 * willmore::kPi * j / n;
        const cplx e(std::cos(t), std::sin(t));
        sum += f(c + r * e) * r * e;
    }
    return sum / double(n);
}

// Roots of 4t^3 - g2 t - g3 by Durand-Kerner.
inline std::array<cplx, 3> cubic_roots(cplx g2, cplx g3)
{
    std::array<cplx, 3> r = {cplx(0.4, 0.9), cplx(0.4, 0.9) * cplx(0.4, 0.9),
                             cplx(0.4, 0.9) * cplx(0.4, 0.9) * cplx(0.4, 0.9)};
    auto p = [&](cplx t) { return t * t * t - 0.25 * g2 * t - 0.25 * g3; };
    for (int it = 0; it < 500; ++it)
        for (int i = 0; i < 3; ++i) {
            cplx den = 1.0;
            for (int j = 0; j < 3; ++j)
                if (j != i)
                    den *= r[i] - r[j];
            r[i] -= p(r[i]) / den;
        }
    return r;
}

inline cplx random_point(std::mt19937_64& rng, cplx omega)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) + u(rng) * omega;
}

} // namespace oracle
