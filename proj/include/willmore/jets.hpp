#pragma once

#include "willmore/lattice.hpp"

namespace willmore {

/// A point of R^4 written as a pair of complex numbers (x1 + i x2, x3 + i x4).
struct C2 {
    cplx a = 0.0;
    cplx b = 0.0;

    C2& operator+=(const C2& o) { a += o.a; b += o.b; return *this; }
    C2& operator-=(const C2& o) { a -= o.a; b -= o.b; return *this; }
    C2& operator*=(cplx s) { a *= s; b *= s; return *this; }
    friend C2 operator+(C2 x, const C2& y) { return x += y; }
    friend C2 operator-(C2 x, const C2& y) { return x -= y; }
    friend C2 operator-(const C2& x) { return {-x.a, -x.b}; }
    friend C2 operator*(cplx s, C2 x) { return x *= s; }
    friend C2 operator*(C2 x, cplx s) { return x *= s; }
    friend C2 operator/(C2 x, cplx s) { return x *= (1.0 / s); }

    [[nodiscard]] std::array<double, 4> real() const { return {a.real(), a.imag(), b.real(), b.imag()}; }
};

/// Euclidean inner product of R^4.
inline double dot(const C2& x, const C2& y) { return (std::conj(x.a) * y.a + std::conj(x.b) * y.b).real(); }
inline double norm2(const C2& x) { return std::norm(x.a) + std::norm(x.b); }

/// Holomorphic C^2-valued function with two derivatives.
struct HoloJet2 {
    C2 g, g1, g2;
};

/// Wirtinger derivatives of a C^2-valued map of one complex variable:
/// f, d f, dbar f, d^2 f, d dbar f, dbar^2 f.
struct WirtingerJet {
    C2 f, fz, fzb, fzz, fzzb, fzbzb;
};

/// Value plus first and second partials with respect to two real parameters.
struct SurfaceJet {
    C2 F, F1, F2, F11, F12, F22;
};

/// Partials with respect to u = Re z and v = Im z.
inline SurfaceJet to_real_jet(const WirtingerJet& w)
{
    const cplx i(0.0, 1.0);
    SurfaceJet j;
    j.F = w.f;
    j.F1 = w.fz + w.fzb;
    j.F2 = i * (w.fz - w.fzb);
    j.F11 = w.fzz + 2.0 * w.fzzb + w.fzbzb;
    j.F22 = -w.fzz + 2.0 * w.fzzb - w.fzbzb;
    j.F12 = i * (w.fzz - w.fzbzb);
    return j;
}

/// Re-expresses (u, v) partials in coordinates (s, t) with z = s + t * omega.
inline SurfaceJet affine_chain(const SurfaceJet& uv, cplx omega)
{
    const double a = omega.real(), b = omega.imag();
    SurfaceJet j;
    j.F = uv.F;
    j.F1 = uv.F1;
    j.F2 = a * uv.F1 + b * uv.F2;
    j.F11 = uv.F11;
    j.F12 = a * uv.F11 + b * uv.F12;
    j.F22 = (a * a) * uv.F11 + (2.0 * a * b) * uv.F12 + (b * b) * uv.F22;
    return j;
}

/// Complex bilinear pairing <dF, dF> = sum over real components of (d x_k)^2,
/// expressed through the complex components.
inline cplx conformality_pairing(const WirtingerJet& w)
{
    return w.fz.a * std::conj(w.fzb.a) + w.fz.b * std::conj(w.fzb.b);
}

/// |dF|^2 = sum over real components of |d x_k|^2.
inline double wirtinger_norm2(const WirtingerJet& w)
{
    return 0.5 * (norm2(w.fz) + norm2(w.fzb));
}

/// Inversion x -> x / |x|^2 applied to a real jet.
inline SurfaceJet invert_jet(const SurfaceJet& x)
{
    const C2& X = x.F;
    const double r2 = norm2(X);
    const double r4 = r2 * r2;
    auto DI = [&](const C2& v) { return v / r2 - (2.0 * dot(X, v) / r4) * X; };
    auto D2I = [&](const C2& v, const C2& w) {
        const double xv = dot(X, v), xw = dot(X, w), vw = dot(v, w);
        return (-2.0 / r4) * (xv * w + xw * v + vw * X) + (8.0 * xv * xw / (r4 * r2)) * X;
    };
    SurfaceJet j;
    j.F = X / r2;
    j.F1 = DI(x.F1);
    j.F2 = DI(x.F2);
    j.F11 = DI(x.F11) + D2I(x.F1, x.F1);
    j.F12 = DI(x.F12) + D2I(x.F1, x.F2);
    j.F22 = DI(x.F22) + D2I(x.F2, x.F2);
    return j;
}

} // namespace willmore
