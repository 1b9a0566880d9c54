#pragma once

#include "willmore/meromorphic.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace willmore {

/// C^4 vectors for the coefficient systems, with the bilinear pairing <z, w> = sum z_j w_j.
using C4 = std::array<cplx, 4>;

cplx pairing(const C4& z, const C4& w);

/// Elliptic functions with poles at p1, p2:
/// wp_l = wp(. - p_l) - wp(p_{3-l} - p_l) and w = zeta(. - p1) - zeta(. - p2).
///
/// The ten products in the order of elements() span only an eight dimensional space:
///   w^2     = wp_1 + wp_2 - 2 zeta(u) w + 3 wp(u) - zeta(u)^2,
///   wp_1 wp_2 = wp'(u) w + wp''(u) / 2 + wp'(u) zeta(u),   u = p1 - p2.
/// Expansions use the reduced basis [wp_1^2, wp_2^2, wp_1 w, wp_2 w, wp_1, wp_2, w, 1].
class FunctionBasis {
public:
    static constexpr int kSize = 10;
    static constexpr int kReducedSize = 8;
    enum Element { P1Sq, P2Sq, P1W, P2W, P1, P2, WSq, P1P2, W, One };

    /// Throws IllConditionedBasis when p1 and p2 are closer than 1e-3 of the shortest period.
    FunctionBasis(std::shared_ptr<const EllipticKernel> kernel, cplx p1, cplx p2);

    [[nodiscard]] const EllipticKernel& kernel() const noexcept { return *kernel_; }
    [[nodiscard]] const std::shared_ptr<const EllipticKernel>& kernel_ptr() const noexcept { return kernel_; }
    [[nodiscard]] cplx p1() const noexcept { return p1_; }
    [[nodiscard]] cplx p2() const noexcept { return p2_; }

    [[nodiscard]] static const std::array<std::string, kSize>& names();
    /// Position of each reduced element in the full list.
    [[nodiscard]] static const std::array<int, kReducedSize>& reduced_elements();

    /// (wp_1, wp_2, w) at z.
    [[nodiscard]] std::array<cplx, 3> generators(cplx z) const;
    [[nodiscard]] std::array<cplx, kSize> elements(cplx z) const;
    /// Derivatives (wp_1', wp_2', w').
    [[nodiscard]] std::array<cplx, 3> generator_derivatives(cplx z) const;

    /// Rewrites coefficients on the full list as coefficients on the reduced basis.
    [[nodiscard]] std::array<cplx, kReducedSize> fold(const std::array<cplx, kSize>& full) const;
    /// The fold constants (-2 zeta(u), 3 wp(u) - zeta(u)^2, wp'(u), wp''(u)/2 + wp'(u) zeta(u)).
    [[nodiscard]] std::array<cplx, 4> fold_constants() const noexcept { return fold_; }

    /// Sample point in the fundamental parallelogram at least margin * min period from p1, p2.
    [[nodiscard]] std::vector<cplx> sample_points(int count, std::uint64_t seed, double margin = 0.05) const;

private:
    std::shared_ptr<const EllipticKernel> kernel_;
    cplx p1_, p2_;
    cplx shift1_, shift2_;   // wp(p2 - p1), wp(p1 - p2)
    std::array<cplx, 4> fold_;
};

struct Expansion {
    std::array<cplx, FunctionBasis::kReducedSize> reduced{};
    /// Reduced coefficients placed in the full order; the w^2 and wp_1 wp_2 slots are zero (folded).
    std::array<cplx, FunctionBasis::kSize> coefficients{};
    double residual = 0.0;          // relative RMS misfit
    double gram_condition = 0.0;    // of the column-scaled reduced sample matrix
    int samples = 0;
};

/// Least-squares fit (QR) of sample_fn on the reduced basis. samples >= 4 * 8.
/// Throws IllConditionedBasis or InvalidArgument.
Expansion expand_in_basis(const std::function<cplx(cplx)>& sample_fn, const FunctionBasis& basis, int samples = 64,
                          std::uint64_t seed = 0);

/// Condition number of the Gram matrix of the column-scaled sample matrix and its numerical rank.
struct GramReport {
    double condition = 0.0;
    int rank = 0;
    std::vector<double> singular_values;   // of the scaled sample matrix, descending
};
GramReport gram_report(const FunctionBasis& basis, bool reduced, int samples = 200, std::uint64_t seed = 0);

/// Pairings of the coefficient vectors in dz f = a wp_1 + b wp_2 + c w + d.
struct CoefficientSystem {
    C4 a{}, b{}, c{}, d{};
    cplx aa, bb, ab, ac, bc, ad, bd, cd, dd, cc;

    static CoefficientSystem from(const C4& a, const C4& b, const C4& c, const C4& d);
};

struct NamedValue {
    std::string name;
    double value = 0.0;
};

struct ConformalityReport {
    CoefficientSystem system;
    /// |<a,a>|, |<b,b>|, |<a,c>|, |<b,c>|, |2<a,d> + <c,c>|, |2<b,d> + <c,c>| and the two
    /// remaining reduced coefficients (w and 1), which involve <a,b>, <c,d>, <d,d>.
    std::vector<NamedValue> equations;
    double max_equation = 0.0;
    /// Largest coefficient of the least-squares fit of sampled <dz f, dz f> on the reduced basis.
    double sampled_residual = 0.0;
    double pointwise_residual = 0.0; // RMS |<dz f, dz f>| / RMS sum |dz f_j|^2
    bool equations_hold = false;
    bool conformal = false;
    bool consistent = false;         // equations_hold == conformal
};

ConformalityReport verify_conformality_system(const C4& a, const C4& b, const C4& c, const C4& d,
                                              const FunctionBasis& basis, double tolerance = 1e-8, int samples = 200,
                                              std::uint64_t seed = 0);

/// dz f = (h_1', -i h_1', h_2', -i h_2') / 2 with h_l = alpha_l w + beta_l, the form forced when <a,b> = 0.
/// Branch points of w are located numerically and dz f is evaluated there.
struct BranchWitness {
    std::vector<cplx> branch_points;   // zeros of w'
    double max_abs_fz = 0.0;           // max over branch points of |dz f|
    double min_abs_fz_elsewhere = 0.0; // min over a sample grid away from branch points and poles
};
BranchWitness ab_zero_witness(const FunctionBasis& basis, cplx alpha1, cplx alpha2);

struct BranchSystemReport {
    C4 a{}, b{}, d{};
    std::vector<NamedValue> pairings;   // <a,a>, <a,b>, <b,b>, <a,d>, <b,d>, <d,d>
    double max_pairing = 0.0;
    /// Largest coefficient of the fit of sampled <dz f, dz f> on [wp'^2, wp' wp, wp^2, wp', wp, 1].
    double sampled_residual = 0.0;
    double pointwise_residual = 0.0;
    bool equations_hold = false;
    bool conformal = false;
    bool consistent = false;
    /// max_k |Re(period of dz f along omega_k)|; zero for a real doubly periodic primitive.
    double period_defect = 0.0;
    /// Conformal with imaginary periods, and then dz f = a wp' with f = 2 Re(a wp) + const.
    bool double_cover = false;
    int degree = 0;                     // poles of wp with multiplicity, by the argument principle
    std::vector<BranchPoint> branch_points;
};

/// Checks dz f = a wp' + b wp + d on the kernel. Throws InvalidArgument when a = 0.
BranchSystemReport verify_branch_system(const C4& a, const C4& b, const C4& d,
                                        std::shared_ptr<const EllipticKernel> kernel, double tolerance = 1e-8,
                                        int samples = 200, std::uint64_t seed = 0);

struct PeriodReport {
    int k = 1;
    cplx xi;
    cplx sigma;                 // common value of the integral of wp_l over [xi, xi + omega_k]
    double l_mismatch = 0.0;    // |integral of wp_1 - integral of wp_2|
};

/// Integrates wp_1 and wp_2 along [xi, xi + omega_k] (k = 1, 2). Without xi, the segment is
/// placed midway between the poles. Throws PathHitsPole or InvalidArgument.
PeriodReport period_integrals(const FunctionBasis& basis, int k, std::optional<cplx> xi = std::nullopt);

/// The unique d with Re(s sigma_k + d omega_k) = 0 for k = 1, 2.
cplx forced_d(cplx s, cplx sigma1, cplx sigma2, cplx omega);

struct PoleOrderEntry {
    std::string element;
    std::array<int, 2> expected{};       // pole order at p1, p2 (0 = no pole)
    std::array<double, 2> slope{};       // estimated growth order, negative for zeros
    std::array<cplx, 2> leading{};       // r^m f(p + r) at the smallest radius for m = expected
    bool matches = false;
};

/// Log-log growth of each element over radii 1e-2 .. 1e-4 around p1 and p2.
std::vector<PoleOrderEntry> pole_order_audit(const FunctionBasis& basis);

} // namespace willmore
