#include "willmore/lattice.hpp"

#include "willmore/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace willmore {

cplx ModularTransform::apply(cplx w) const
{
    cplx r = (static_cast<double>(a) * w + static_cast<double>(b))
             / (static_cast<double>(c) * w + static_cast<double>(d));
    if (reflected)
        r = -std::conj(r);
    return r;
}

ConformalClass::ConformalClass(cplx omega) : omega_(omega)
{
    if (!(omega.imag() > 0.0)) {
        std::ostringstream os;
        os << "Im(omega) must be positive, got " << omega;
        throw Error(ErrorKind::NonPositiveImaginaryPart, os.str());
    }
}

bool ConformalClass::in_moduli_set(double tol) const
{
    const double a = omega_.real();
    return a >= -tol && a <= 0.5 + tol && std::norm(omega_) >= 1.0 - tol;
}

Canonicalization canonicalize(cplx omega, int max_iterations)
{
    ConformalClass input(omega);
    ModularTransform m;
    cplx w = input.omega();

    auto left_multiply = [&m](long a, long b, long c, long d) {
        ModularTransform r;
        r.a = a * m.a + b * m.c;
        r.b = a * m.b + b * m.d;
        r.c = c * m.a + d * m.c;
        r.d = c * m.b + d * m.d;
        m = r;
    };

    bool done = false;
    for (int it = 0; it < max_iterations; ++it) {
        const long k = -static_cast<long>(std::floor(w.real() + 0.5));
        if (k != 0) {
            w += static_cast<double>(k);
            left_multiply(1, k, 0, 1);
        }
        if (std::norm(w) < 1.0 - 1e-14) {
            w = -1.0 / w;
            left_multiply(0, -1, 1, 0);
            continue;
        }
        done = true;
        break;
    }
    if (!done)
        throw Error(ErrorKind::ReductionCycle, "modular reduction did not terminate");

    // Recompute from the integer word to avoid accumulated drift.
    w = m.apply(input.omega());
    if (w.real() < 0.0) {
        w = -std::conj(w);
        m.reflected = true;
    }
    if (w.real() < 0.0)
        w = cplx(0.0, w.imag());
    return {ConformalClass(w), m};
}

Lattice::Lattice(cplx omega) : omega_(ConformalClass(omega).omega())
{
    cplx u(1.0, 0.0);
    cplx v = omega_;
    if (std::norm(v) < std::norm(u))
        std::swap(u, v);
    for (int it = 0; it < 1000; ++it) {
        const double mu = std::round((v * std::conj(u)).real() / std::norm(u));
        v -= mu * u;
        if (std::norm(v) < std::norm(u))
            std::swap(u, v);
        else
            break;
    }
    if ((v / u).imag() < 0.0)
        v = -v;
    reduced_ = {u, v};
    min_period_ = std::abs(u);
}

std::array<double, 2> Lattice::coordinates(cplx z) const
{
    const double t = z.imag() / omega_.imag();
    const double s = z.real() - t * omega_.real();
    return {s, t};
}

cplx Lattice::reduce(cplx z) const
{
    auto [s, t] = coordinates(z);
    const double fs = std::floor(s);
    const double ft = std::floor(t);
    cplx r = z - fs - ft * omega_;
    auto [rs, rt] = coordinates(r);
    if (rs >= 1.0 || rs < 0.0)
        r -= std::floor(rs);
    if (rt >= 1.0 || rt < 0.0)
        r -= std::floor(rt) * omega_;
    return r;
}

cplx Lattice::reduce_centered(cplx z) const
{
    auto [s, t] = coordinates(z);
    const double fs = std::floor(s + 0.5);
    const double ft = std::floor(t + 0.5);
    return z - fs - ft * omega_;
}

cplx Lattice::nearest_difference(cplx z) const
{
    const cplx u = reduced_[0];
    const cplx v = reduced_[1];
    const double im = (v / u).imag();
    const cplx zu = z / u;
    const cplx vu = v / u;
    const double t = zu.imag() / im;
    const double s = zu.real() - t * vu.real();
    const double s0 = std::round(s);
    const double t0 = std::round(t);
    cplx best = z;
    double best_norm = std::numeric_limits<double>::infinity();
    for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
            const cplx cand = z - (s0 + di) * u - (t0 + dj) * v;
            const double nrm = std::norm(cand);
            if (nrm < best_norm) {
                best_norm = nrm;
                best = cand;
            }
        }
    }
    return best;
}

bool Lattice::is_lattice_vector(cplx z, double tol) const
{
    return std::abs(nearest_difference(z)) <= tol * std::max(1.0, std::abs(z));
}

cplx TorusMap::inverse(cplx w) const
{
    const double y = w.imag() / sigma.imag();
    const double x = w.real() - y * sigma.real();
    return {x, y};
}

} // namespace willmore
