#pragma once

#include "willmore/elliptic.hpp"

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace willmore {

/// Value and the first three complex derivatives of a holomorphic function.
using Jet3 = std::array<cplx, 4>;

enum class PrimitiveKind {
    ZetaDiff,         // zeta(z - p) - zeta(z - q)
    WpTranslate,      // wp(z - p)
    WpPrimeTranslate, // wp'(z - p)
    Constant,         // 1
};

struct Term {
    PrimitiveKind kind = PrimitiveKind::Constant;
    cplx coef = 0.0;
    cplx p = 0.0;   // representatives are kept as given; reducing them would
    cplx q = 0.0;   // change a ZetaDiff by a quasi-period constant
};

/// Pole of a block; principal[j] is the coefficient of (z - location)^-(j+1).
struct PoleDatum {
    cplx location;   // reduced into the fundamental parallelogram
    int order = 1;
    std::vector<cplx> principal;

    [[nodiscard]] cplx residue() const { return principal.empty() ? cplx(0.0) : principal[0]; }
};

/// Taylor data of the regular part of a block at one of its poles.
struct LaurentChart {
    cplx center;
    double radius = 0.0;           // radius of validity used by callers
    std::vector<cplx> principal;   // as in PoleDatum
    std::vector<cplx> taylor;      // regular part: sum_n taylor[n] (z - center)^n

    /// Jet of the regular part at center + w.
    [[nodiscard]] Jet3 regular_jet(cplx w) const;
};

/// Doubly periodic meromorphic function built from translated zeta
/// differences, wp translates, wp' translates and a constant.
class MeromorphicBlock {
public:
    MeromorphicBlock(std::shared_ptr<const EllipticKernel> kernel, std::vector<Term> terms);

    [[nodiscard]] const EllipticKernel& kernel() const noexcept { return *kernel_; }
    [[nodiscard]] const std::shared_ptr<const EllipticKernel>& kernel_ptr() const noexcept { return kernel_; }
    [[nodiscard]] const std::vector<Term>& terms() const noexcept { return terms_; }
    [[nodiscard]] const std::vector<PoleDatum>& poles() const noexcept { return poles_; }
    /// Number of poles counted with multiplicity.
    [[nodiscard]] int degree() const noexcept;

    [[nodiscard]] cplx evaluate(cplx z) const { return jet(z, 0)[0]; }
    [[nodiscard]] cplx derivative(cplx z) const { return jet(z, 1)[1]; }
    /// Derivatives up to max_order (<= 3); higher entries are left zero.
    [[nodiscard]] Jet3 jet(cplx z, int max_order = 3) const;

    /// Index into poles() of the pole at z (mod the lattice) or -1.
    [[nodiscard]] int pole_index(cplx z, double tol = 1e-9) const;

    /// Principal part plus Taylor coefficients of the regular part at a pole,
    /// computed by a discrete Cauchy integral on a circle of radius 2*radius.
    [[nodiscard]] LaurentChart laurent_chart(std::size_t pole, double radius, int samples = 64) const;
    /// Same at an arbitrary center; the principal part is empty unless center is a pole.
    [[nodiscard]] LaurentChart local_chart(cplx center, double radius, int samples = 64) const;

    /// z -> block(z - v).
    [[nodiscard]] MeromorphicBlock translated(cplx v) const;
    /// z -> s * block(z) + t.
    [[nodiscard]] MeromorphicBlock affine(cplx s, cplx t) const;

private:
    void build_ledger();

    std::shared_ptr<const EllipticKernel> kernel_;
    std::vector<Term> terms_;
    std::vector<cplx> shifts_;                 // distinct translation points
    std::vector<std::array<int, 2>> term_shift_;
    std::vector<PoleDatum> poles_;
};

/// Sum_j r_j zeta(z - p_j) with sum r_j = 0.
/// Throws ResiduesDoNotSumToZero, DuplicatePoles or InvalidArgument.
MeromorphicBlock make_simple_pole_function(std::shared_ptr<const EllipticKernel> kernel,
                                           const std::vector<std::pair<cplx, cplx>>& poles);

/// 1 / (wp - alpha) in zeta-difference form. Throws CriticalValue when alpha is a branch value.
MeromorphicBlock make_inverse_wp(std::shared_ptr<const EllipticKernel> kernel, cplx alpha,
                                 double critical_tol = 1e-8);

/// The block wp(z) itself.
MeromorphicBlock make_wp(std::shared_ptr<const EllipticKernel> kernel);

/// 1 / (block - c), re-expressed in zeta-difference form. Throws NonSimpleZero.
MeromorphicBlock invert_after_shift(const MeromorphicBlock& block, cplx c);

struct ZeroInfo {
    cplx location;
    int multiplicity = 1;
};

/// All zeros of a doubly periodic meromorphic g in the fundamental
/// parallelogram, located by per-cell winding numbers and Newton polishing.
/// g_and_derivative returns (g(z), g'(z)); poles lists every pole of g.
std::vector<ZeroInfo> find_zeros(const Lattice& lattice,
                                 const std::function<std::array<cplx, 2>(cplx)>& g_and_derivative,
                                 const std::vector<PoleDatum>& poles, int grid = 16);

/// Zeros of block - c.
std::vector<ZeroInfo> solve(const MeromorphicBlock& block, cplx c);

struct BranchPoint {
    cplx location;
    int order = 1;
};

/// Zeros of block' plus poles of order >= 2, sorted lexicographically.
std::vector<BranchPoint> branch_points(const MeromorphicBlock& block);

/// (1 / 2 pi i) times the integral of the block over a circle around p.
/// radius <= 0 picks half the distance to the nearest other pole (at most 0.05 min period).
/// Throws ContourHitsPole when another pole lies within the circle.
cplx residue(const MeromorphicBlock& block, cplx p, double radius = 0.0, int samples = 512);

/// (1 / 2 pi i) integral of g'/g over the boundary of xi + I: zeros minus poles.
/// xi is chosen to keep the listed points away from the boundary.
int argument_principle_count(const Lattice& lattice, const std::function<std::array<cplx, 2>(cplx)>& g_and_derivative,
                             const std::vector<cplx>& avoid, int samples_per_side = 2048);

/// Offset xi maximising the distance of the given points to the boundary of xi + I
/// over a fixed 32-point candidate set.
cplx boundary_avoiding_offset(const Lattice& lattice, const std::vector<cplx>& points);

} // namespace willmore
