#pragma once

#include <array>
#include <complex>

namespace willmore {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Integer Möbius transform w -> (a w + b) / (c w + d), optionally followed by
/// the reflection w -> -conj(w).
struct ModularTransform {
    long a = 1, b = 0, c = 0, d = 1;
    bool reflected = false;

    [[nodiscard]] cplx apply(cplx w) const;
    [[nodiscard]] long determinant() const { return a * d - b * c; }
};

/// Teichmüller parameter of a torus C/(Z + omega Z); Im(omega) > 0.
class ConformalClass {
public:
    explicit ConformalClass(cplx omega);

    [[nodiscard]] cplx omega() const noexcept { return omega_; }
    [[nodiscard]] bool in_moduli_set(double tol = 1e-12) const;

    friend bool operator==(const ConformalClass&, const ConformalClass&) = default;

private:
    cplx omega_;
};

struct Canonicalization {
    ConformalClass cls;
    ModularTransform transform;   // omega' = transform.apply(omega)
};

/// Reduces omega to the moduli set {a+ib : b>0, 0<=a<=1/2, a^2+b^2>=1}.
/// Throws NonPositiveImaginaryPart or ReductionCycle.
Canonicalization canonicalize(cplx omega, int max_iterations = 1000);

/// Lattice Z*w1 + Z*w2 with w1 = 1, w2 = omega.
class Lattice {
public:
    explicit Lattice(cplx omega);
    explicit Lattice(const ConformalClass& cls) : Lattice(cls.omega()) {}

    [[nodiscard]] cplx omega() const noexcept { return omega_; }
    [[nodiscard]] std::array<cplx, 2> generators() const noexcept { return {cplx(1.0, 0.0), omega_}; }

    /// Real coordinates (s, t) with z = s + t * omega.
    [[nodiscard]] std::array<double, 2> coordinates(cplx z) const;
    [[nodiscard]] cplx point(double s, double t) const { return s + t * omega_; }

    /// Representative of z in the parallelogram {s + t omega : s, t in [0, 1)}.
    [[nodiscard]] cplx reduce(cplx z) const;
    /// Representative with s, t in [-1/2, 1/2).
    [[nodiscard]] cplx reduce_centered(cplx z) const;

    /// Shortest representative of z modulo the lattice (nearest lattice point
    /// subtracted).
    [[nodiscard]] cplx nearest_difference(cplx z) const;
    [[nodiscard]] double torus_distance(cplx z1, cplx z2) const { return std::abs(nearest_difference(z1 - z2)); }

    /// Length of the shortest nonzero lattice vector.
    [[nodiscard]] double min_period() const noexcept { return min_period_; }
    /// Reduced (Lagrange-Gauss) basis of the same lattice.
    [[nodiscard]] std::array<cplx, 2> reduced_basis() const noexcept { return reduced_; }

    [[nodiscard]] bool is_lattice_vector(cplx z, double tol = 1e-9) const;

private:
    cplx omega_;
    std::array<cplx, 2> reduced_;
    double min_period_;
};

/// The real-linear map (x, y) -> x + sigma y from the reference torus
/// C/(Z + iZ) onto C/(Z + sigma Z).
struct TorusMap {
    cplx sigma;

    /// Image of the representative p = (x, y) in [0,1)^2.
    [[nodiscard]] cplx apply(double x, double y) const { return x + sigma * y; }
    [[nodiscard]] cplx apply(cplx p) const { return apply(p.real(), p.imag()); }
    /// Preimage in reference coordinates (x + iy).
    [[nodiscard]] cplx inverse(cplx w) const;
};

} // namespace willmore
