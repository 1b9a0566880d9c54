#pragma once

#include "willmore/jets.hpp"

#include <vector>

namespace willmore {

/// Disc in parameter coordinates around which quadrature tiles are refined.
struct RefinementSite {
    double s = 0.0;
    double t = 0.0;
    double radius = 0.0;
};

/// A doubly periodic map [0,1)^2 -> R^4 with second-order jets.
class Surface {
public:
    virtual ~Surface() = default;

    /// Jet at parameter (s, t); partials are with respect to s and t.
    [[nodiscard]] virtual SurfaceJet jet(double s, double t) const = 0;
    [[nodiscard]] virtual std::vector<RefinementSite> refinement_sites() const { return {}; }
    /// omega such that the map is meant to be conformal in z = s + t * omega.
    [[nodiscard]] virtual cplx conformal_modulus() const { return {0.0, 1.0}; }
};

/// Smallest singular value of the real map (s, t) -> z = s + t * omega.
inline double affine_min_singular(cplx omega)
{
    const double a = omega.real(), b = omega.imag();
    // Singular values of [[1, a], [0, b]].
    const double tr = 1.0 + a * a + b * b;
    const double det = b;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det * det));
    return std::sqrt(0.5 * (tr - disc));
}

} // namespace willmore
