#pragma once

#include "willmore/geometry.hpp"
#include "willmore/immersion.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace willmore {

/// Smooth radial cutoff: 1 for r <= 2 delta, 0 for r >= 3 delta.
/// Returns the value and the first two derivatives in r.
std::array<double, 3> smooth_cutoff(double r, double delta);

/// Which local branch of p -> A_sigma p multiplies the cutoff on a branch ball.
enum class ChartBranch {
    Centered,    // A_sigma (p - b_j), vanishing at the branch point
    Canonical,   // A_sigma p on the representative near b_j in [0,1)^2
};

/// The family p -> ((wp_sigma - alpha)^-1 (A_sigma p), eps * phi_sigma(p)) on the
/// reference torus C / (Z + iZ), with A_sigma(x + iy) = x + sigma y.
class PerturbationFamily {
public:
    [[nodiscard]] const ConformalClass& base_class() const noexcept { return omega_; }
    [[nodiscard]] cplx alpha() const noexcept { return alpha_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
    [[nodiscard]] cplx sigma() const noexcept { return sigma_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] ChartBranch chart_branch() const noexcept { return chart_branch_; }
    /// Number of times delta was halved to meet the packing condition.
    [[nodiscard]] int delta_halvings() const noexcept { return halvings_; }

    /// (wp_sigma - alpha)^-1 on C / (Z + sigma Z).
    [[nodiscard]] const MeromorphicBlock& block() const noexcept { return *block_; }
    /// Poles and branch points in reference coordinates, reduced to [0,1)^2.
    [[nodiscard]] const std::vector<cplx>& poles() const noexcept { return poles_; }
    [[nodiscard]] const std::vector<cplx>& branch_points() const noexcept { return branch_; }

    [[nodiscard]] cplx to_z(cplx p) const { return p.real() + sigma_ * p.imag(); }
    [[nodiscard]] cplx to_p(cplx z) const;

    /// Same alpha and delta at another (sigma, epsilon). Throws ChartPackingFailure.
    [[nodiscard]] PerturbationFamily with(cplx sigma, double epsilon) const;

    /// Uninverted map and its (x, y) jet. Throws PoleAtInput at poles.
    [[nodiscard]] C2 map(cplx p) const { return jet(p).F; }
    [[nodiscard]] SurfaceJet jet(cplx p) const;
    /// The cutoff term phi_sigma (without eps) as a complex-valued (x, y) jet.
    [[nodiscard]] std::array<cplx, 6> phi_jet(cplx p) const;
    /// Index of the branch ball of radius 3 delta containing p, or -1.
    [[nodiscard]] int branch_ball(cplx p) const;
    [[nodiscard]] int pole_ball(cplx p) const;

    /// lambda_{sigma,eps}(p); infinite at branch points when eps = 0 and at poles.
    [[nodiscard]] double lambda(cplx p) const;
    /// lambda times the pullback metric in (x, y), extended smoothly into poles and branch points.
    [[nodiscard]] Sym2 regularized_metric(cplx p) const;
    /// A_sigma^* g_euc in (x, y).
    [[nodiscard]] Sym2 flat_metric() const;

private:
    friend PerturbationFamily build_family(const ConformalClass&, std::optional<cplx>, std::optional<double>,
                                           std::uint64_t, ChartBranch);
    PerturbationFamily() = default;
    void locate();
    [[nodiscard]] std::string packing_violation() const;

    ConformalClass omega_{cplx(0, 1)};
    cplx alpha_ = 0.0;
    double delta_ = 0.0;
    double epsilon_ = 0.0;
    cplx sigma_ = 0.0;
    std::uint64_t seed_ = 0;
    ChartBranch chart_branch_ = ChartBranch::Centered;
    int halvings_ = 0;
    std::shared_ptr<const EllipticKernel> kernel_;
    std::optional<MeromorphicBlock> block_;
    std::vector<cplx> poles_, branch_;
    std::vector<cplx> branch_rep_;   // representative in [0,1)^2 used by the canonical branch
};

/// Builds the family at sigma = omega, eps = 0. alpha defaults to the candidate value whose
/// preimages are farthest from the branch points; delta defaults to a quarter of the
/// smallest distance between poles and branch points, capped at 0.1, halved up to six
/// times until the 3 delta balls are disjoint. Throws CriticalValue or ChartPackingFailure.
PerturbationFamily build_family(const ConformalClass& omega, std::optional<cplx> alpha = std::nullopt,
                                std::optional<double> delta = std::nullopt, std::uint64_t seed = 0,
                                ChartBranch branch = ChartBranch::Centered);

/// The perturbed map, optionally inverted after adding offset, as a surface in reference coordinates.
class PerturbedSurface : public Surface {
public:
    PerturbedSurface(PerturbationFamily family, bool inverted, C2 offset);

    [[nodiscard]] const PerturbationFamily& family() const noexcept { return family_; }
    [[nodiscard]] bool inverted() const noexcept { return inverted_; }
    [[nodiscard]] const C2& offset() const noexcept { return offset_; }

    [[nodiscard]] SurfaceJet jet(double s, double t) const override;
    [[nodiscard]] std::vector<RefinementSite> refinement_sites() const override;
    [[nodiscard]] cplx conformal_modulus() const override { return family_.sigma(); }

private:
    PerturbationFamily family_;
    bool inverted_;
    C2 offset_;
    PairImmersion pair_;
};

/// Offset from a seeded unit ball maximising the distance of the image to 0.
C2 choose_perturbation_offset(const PerturbationFamily& family, int candidates = 16);

/// Smallest singular value of the differential over an n x n grid (cell centres).
double min_singular_value(const Surface& surface, int n);

/// Teichmueller parameter of the regularised metric.
ModulusReport tau(const PerturbationFamily& family, int grid_n = 256);

struct NewtonStep {
    cplx sigma;
    cplx tau;
    double residual = 0.0;
};

struct ConstraintSolution {
    cplx sigma;
    cplx tau;
    double residual = 0.0;   // |tau(sigma, eps) - omega|
    std::vector<NewtonStep> trace;
};

struct ConstraintOptions {
    int grid_n = 256;
    double tolerance = 1e-9;
    int max_iterations = 20;
    double fd_step = 1e-4;
};

/// Solves tau(sigma, eps) = omega by finite-difference Newton with Broyden updates.
/// Throws NewtonDivergence with the trace in the message.
ConstraintSolution solve_conformal_constraint(const PerturbationFamily& family, double epsilon, cplx initial_sigma,
                                              const ConstraintOptions& options = {});

struct SweepRow {
    double epsilon = 0.0;
    cplx sigma;
    double tau_residual = 0.0;
    double willmore_energy = 0.0;
    double energy_error_indicator = 0.0;
    double excess_energy = 0.0;             // W of the uninverted map over the branch balls
    double excess_error_indicator = 0.0;
    double min_singular_value = 0.0;
    std::vector<NewtonStep> trace;
};

struct SweepOptions {
    int modulus_grid = 256;
    int energy_grid = 256;
    int refine_levels = 3;
    int singular_value_grid = 256;
    double newton_tolerance = 1e-9;
    bool parallel = false;   // seed every solve from omega instead of the previous sigma
};

/// For each eps (descending): constraint solve, energy of the inverted map and of the
/// uninverted excess. Throws InvalidArgument for an unsorted list.
std::vector<SweepRow> energy_sweep(const PerturbationFamily& family, const std::vector<double>& epsilons,
                                   const SweepOptions& options = {});

/// Willmore energy of the uninverted map over the squares of side 6 delta around the branch points.
EnergyReport excess_energy(const PerturbationFamily& family, int grid_n, int refine_levels);

} // namespace willmore
