#pragma once

#include "willmore/immersion.hpp"
#include "willmore/surface.hpp"

#include <functional>
#include <vector>

namespace willmore {

/// Symmetric 2x2 matrix stored as (m11, m12, m22).
using Sym2 = std::array<double, 3>;

struct MetricSample {
    cplx point;
    double conformal_factor_sq = 0.0;   // mean of the diagonal entries
    Sym2 metric{};
    double anisotropy = 0.0;            // |g11 - g22 - 2i g12| / (g11 + g22)
};

/// First fundamental form of a jet in its own parameters.
MetricSample metric_from_jet(const SurfaceJet& jet, cplx point = 0.0);

/// Metric in (u, v) with z = u + iv. Throws DegeneratePoint.
MetricSample pullback_metric(const PairImmersion& imm, cplx z);

/// Mean curvature vector (trace of the second fundamental form) from a jet,
/// via the normal parts of the second partials. Throws DegeneratePoint.
C2 mean_curvature(const SurfaceJet& jet);

/// lambda^-2 * Laplacian of the map from the analytic Wirtinger jet.
C2 mean_curvature(const PairImmersion& imm, cplx z);

/// Same quantity from a five-point Laplacian and central first differences.
C2 mean_curvature_fd(const PairImmersion& imm, cplx z, double h = 1e-4);

/// Mean curvature for the target metric lambda^2 g_euc with lambda = 2 / (1 + |x|^2),
/// written in flat coordinates: lambda^-2 (H - 2 lambda^-1 (grad lambda)^perp).
C2 sphere_gauge_mean_curvature(const SurfaceJet& jet);

/// Pointwise densities with respect to the jet's parameters.
struct CurvatureSample {
    C2 H;
    double area = 0.0;        // sqrt(det g)
    double gauss = 0.0;       // K sqrt(det g)
    double willmore = 0.0;    // |H|^2 sqrt(det g) / 4
    double second_form_sq = 0.0;   // |A|^2 (pointwise, not a density)
    bool degenerate = false;  // rank test of the differential failed
};

CurvatureSample curvature(const SurfaceJet& jet);

/// |<dF, dF>| / |dF|^2 for a jet in (s, t) when z = s + t * omega is the conformal coordinate.
double conformality_residual(const SurfaceJet& jet, cplx omega);

struct EnergyOptions {
    int grid_n = 512;                 // quadrature points per side at level 0
    int refine_levels = 3;
    double energy_fraction = 1e-3;    // refine tiles holding more than this share of W or of the total |K dmu|
    std::size_t max_tiles = 4'000'000;
    int threads = 0;
};

struct EnergyReport {
    double willmore_energy = 0.0;
    double total_gauss_curvature = 0.0;
    double area = 0.0;
    double max_conformality_residual = 0.0;
    double error_indicator = 0.0;        // sum over the last split of |parent - children|
    double gauss_error_indicator = 0.0;
    int grid_n = 0;
    int refine_levels = 0;
    std::size_t tiles = 0;
    std::size_t degenerate_samples = 0;
    std::vector<double> level_energies;
    std::vector<double> level_indicators;
};

/// Tiled 8-point Gauss-Legendre quadrature of |H|^2 / 4 dmu and K dmu over [0,1)^2
/// with dyadic refinement. Throws RefinementBudgetExceeded.
EnergyReport willmore_energy(const Surface& surface, const EnergyOptions& options = {});

struct ModulusReport {
    cplx estimated_modulus;
    cplx canonical_modulus;
    double residual = 0.0;   // relative discrete divergence norm
    int iterations = 0;
    int grid_n = 0;
};

struct ModulusOptions {
    int grid_n = 256;
    double tolerance = 1e-10;
    int max_iterations = 20000;
};

/// Teichmueller parameter of the torus [0,1)^2 with the given metric field, from the
/// periods of a discrete harmonic one-form. Throws NonPositiveDefiniteMetric or SolverDivergence.
ModulusReport estimate_modulus(const std::function<Sym2(double, double)>& metric, const ModulusOptions& options = {});

} // namespace willmore
