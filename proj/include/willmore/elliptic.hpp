#pragma once

#include "willmore/lattice.hpp"

#include <array>
#include <vector>

namespace willmore {

/// zeta, wp and wp' at one point, sharing a single lattice reduction.
struct WeierstrassValues {
    cplx zeta;
    cplx wp;
    cplx wp1;
};

/// Weierstrass functions of the lattice Z + omega Z.
///
/// Evaluation reduces the argument into the centred period parallelogram of
/// the Lagrange-Gauss reduced basis and sums the row-wise closed forms
/// sum_m (u + m)^-2 = pi^2 / sin^2(pi u) over the few rows that matter. The
/// reduced basis has Im(tau) >= sqrt(3)/2, so eight rows on each side reach
/// double precision.
class EllipticKernel {
public:
    struct Options {
        /// Pole-exclusion radius as a fraction of the shortest period.
        double pole_exclusion = 1e-6;
    };

    explicit EllipticKernel(const Lattice& lattice) : EllipticKernel(lattice, Options{}) {}
    EllipticKernel(const Lattice& lattice, Options options);

    [[nodiscard]] const Lattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] const Options& options() const noexcept { return options_; }
    [[nodiscard]] double pole_exclusion_radius() const noexcept { return exclusion_radius_; }

    [[nodiscard]] cplx g2() const noexcept { return g2_; }
    [[nodiscard]] cplx g3() const noexcept { return g3_; }
    [[nodiscard]] cplx discriminant() const noexcept { return g2_ * g2_ * g2_ - 27.0 * g3_ * g3_; }

    /// Additive quasi-periods (eta_1, eta_2) of zeta along omega_1 = 1 and omega_2 = omega.
    [[nodiscard]] std::array<cplx, 2> quasi_periods() const noexcept { return eta_; }
    /// zeta(z + gamma) - zeta(z) for a lattice vector gamma.
    [[nodiscard]] cplx quasi_period(cplx gamma) const;

    [[nodiscard]] cplx wp(cplx z) const { return values(z).wp; }
    [[nodiscard]] cplx wp_prime(cplx z) const { return values(z).wp1; }
    [[nodiscard]] cplx zeta(cplx z) const { return values(z).zeta; }
    /// Throws PoleAtInput when z lies within the exclusion radius of a lattice point.
    [[nodiscard]] WeierstrassValues values(cplx z) const;

    /// wp'' = 6 wp^2 - g2/2.
    [[nodiscard]] cplx wp_second(cplx wp_value) const { return 6.0 * wp_value * wp_value - 0.5 * g2_; }

    /// (e1, e2, e3) = wp at 1/2, (1+omega)/2 and omega/2.
    [[nodiscard]] std::array<cplx, 3> half_period_values() const noexcept { return e_; }
    /// The three nonzero half-periods in the same order as half_period_values().
    [[nodiscard]] std::array<cplx, 3> half_periods() const;

private:
    Lattice lattice_;
    Options options_;
    double exclusion_radius_;
    cplx scale_;                 // reduced basis = scale * (1, tau)
    cplx tau_;
    std::vector<cplx> qpow_;     // q^n, n = 0..rows
    cplx g2e_;                   // eta_1 of the (1, tau) lattice
    cplx g2_, g3_;
    std::array<cplx, 2> eta_;
    std::array<cplx, 3> e_;
};

/// Invariants (g2, g3) of a kernel.
inline std::array<cplx, 2> invariants(const EllipticKernel& kernel) { return {kernel.g2(), kernel.g3()}; }

} // namespace willmore
