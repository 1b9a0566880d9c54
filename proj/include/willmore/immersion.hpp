#pragma once

#include "willmore/meromorphic.hpp"
#include "willmore/surface.hpp"

#include <cstdint>
#include <optional>

namespace willmore {

/// Local data at a pole of f or h: G_i(w) = w^order * (component_i(center + w) + offset_i)
/// is holomorphic on the chart disc.
struct PoleChart {
    cplx center;
    int order = 1;
    double radius = 0.0;
    std::array<LaurentChart, 2> component;
};

/// phi = conj(w)^order * G / |G|^2 with its Wirtinger derivatives; order 0 is plain inversion.
WirtingerJet invert_holomorphic(const HoloJet2& G, cplx w, int order);

/// The map z -> (f(z), h(z)) + offset into C^2 = R^4, optionally composed
/// with the inversion x -> x / |x|^2.
class PairImmersion : public Surface {
public:
    PairImmersion(MeromorphicBlock f, MeromorphicBlock h, bool inverted, C2 offset);

    [[nodiscard]] const MeromorphicBlock& f() const noexcept { return f_; }
    [[nodiscard]] const MeromorphicBlock& h() const noexcept { return h_; }
    [[nodiscard]] bool inverted() const noexcept { return inverted_; }
    [[nodiscard]] const C2& offset() const noexcept { return offset_; }
    [[nodiscard]] const Lattice& lattice() const noexcept { return f_.kernel().lattice(); }
    [[nodiscard]] const std::vector<PoleChart>& charts() const noexcept { return charts_; }
    /// Distinct poles of f or h.
    [[nodiscard]] std::vector<cplx> poles() const;
    [[nodiscard]] const std::vector<BranchPoint>& branch_points_f() const noexcept { return branch_f_; }
    [[nodiscard]] const std::vector<BranchPoint>& branch_points_h() const noexcept { return branch_h_; }

    /// (f + c1, h + c2) with two derivatives; throws PoleAtInput at poles.
    [[nodiscard]] HoloJet2 holomorphic_jet(cplx z) const;

    [[nodiscard]] C2 evaluate(cplx z) const { return wirtinger(z).f; }
    /// Wirtinger jet of the map, using the pole chart when z lies in one.
    [[nodiscard]] WirtingerJet wirtinger(cplx z) const;
    /// Plain formula I((f, h) + offset); not valid at poles.
    [[nodiscard]] WirtingerJet wirtinger_direct(cplx z) const;
    /// Regularised chart formula (inverted maps only).
    [[nodiscard]] WirtingerJet wirtinger_in_chart(cplx z, std::size_t chart) const;
    /// Index of the chart containing z, if any.
    [[nodiscard]] std::optional<std::size_t> chart_at(cplx z) const;

    [[nodiscard]] SurfaceJet jet(double s, double t) const override;
    [[nodiscard]] std::vector<RefinementSite> refinement_sites() const override;
    [[nodiscard]] cplx conformal_modulus() const override { return lattice().omega(); }

    [[nodiscard]] PairImmersion with_inversion(bool inverted, C2 offset) const;

private:
    MeromorphicBlock f_, h_;
    bool inverted_;
    C2 offset_;
    std::vector<PoleChart> charts_;
    std::vector<BranchPoint> branch_f_, branch_h_;
};

struct BuildOptions {
    double min_pole_separation = 0.15;    // fraction of the shortest period
    double branch_separation = 0.05;      // between branch sets of f and h
    int max_retries = 100;
    int offset_candidates = 16;
};

/// A conformal Willmore torus with one point of density k, k >= 3.
/// Throws RetryExhausted when no admissible translation is found.
PairImmersion build_willmore_torus(const ConformalClass& omega, int k, std::uint64_t seed, BuildOptions options = {});

/// Chooses an R^4 offset from a seeded ball of radius 1 keeping (f, h) + offset away from 0.
C2 choose_generic_offset(const MeromorphicBlock& f, const MeromorphicBlock& h, std::uint64_t seed, int candidates = 16);

/// z -> (scale * wp(z) + shift, 0).
struct DoubleCover {
    std::shared_ptr<const EllipticKernel> kernel;
    cplx scale = 1.0;
    cplx shift = 0.0;

    [[nodiscard]] MeromorphicBlock block() const;
    [[nodiscard]] std::vector<BranchPoint> branch_points() const;
    /// The map as an (uninverted) pair.
    [[nodiscard]] PairImmersion pair() const;
    /// Inversion of the pair after moving the image plane to distance c2 from 0;
    /// the image is a round 2-sphere covered twice.
    [[nodiscard]] PairImmersion inverted(cplx c2 = 1.0) const;
};

DoubleCover build_double_cover(const ConformalClass& omega);

struct DensityReport {
    C2 point;
    int density = 0;
    double min_singular_value = 0.0;   // smallest singular value of the differential at the poles
    std::vector<cplx> preimages;
};

/// Verifies that every pole maps to 0 with full rank and no other point does.
/// Throws UnexpectedPreimage.
DensityReport density_report(const PairImmersion& imm, int grid = 64, double threshold = 1e-2);

/// Inversion regularity at the poles, agreement of chart and direct formulas,
/// and conformality on a grid of cell centres.
struct RegularityReport {
    double max_pole_value = 0.0;          // |phi(p)|
    double max_pole_fz = 0.0;             // |dz phi(p)|
    double min_pole_fzb = 0.0;            // |dzbar phi(p)|
    double chart_value_mismatch = 0.0;    // relative, on circles inside each chart
    double chart_derivative_mismatch = 0.0;
    double max_conformality_residual = 0.0;
    double min_singular_value = 0.0;
    int grid = 0;
    std::size_t poles = 0;
};
RegularityReport regularity_report(const PairImmersion& imm, int grid = 256);

/// Smallest and largest singular values of the real 4x2 differential in (u, v).
std::array<double, 2> singular_values(const WirtingerJet& w);

} // namespace willmore
