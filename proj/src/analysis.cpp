#include "willmore/analysis.hpp"

#include "willmore/errors.hpp"
#include "willmore/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace willmore {

namespace {

double norm_sq(const C4& v)
{
    double s = 0;
    for (cplx x : v)
        s += std::norm(x);
    return s;
}

double rms(const std::vector<double>& v)
{
    double s = 0;
    for (double x : v)
        s += x * x;
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

Eigen::MatrixXcd sample_matrix(const FunctionBasis& basis, const std::vector<cplx>& pts, bool reduced)
{
    const auto& idx = FunctionBasis::reduced_elements();
    const int cols = reduced ? FunctionBasis::kReducedSize : FunctionBasis::kSize;
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(pts.size()), cols);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto e = basis.elements(pts[i]);
        for (int j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), j) = e[static_cast<std::size_t>(reduced ? idx[static_cast<std::size_t>(j)] : j)];
    }
    return m;
}

// Columns scaled to unit norm; returns the scales.
Eigen::VectorXd equilibrate(Eigen::MatrixXcd& m)
{
    Eigen::VectorXd s(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        s(j) = m.col(j).norm();
        if (s(j) > 0)
            m.col(j) /= s(j);
    }
    return s;
}

struct Fit {
    Eigen::VectorXcd coef;
    double condition = 0.0;
    double residual = 0.0;
};

// Least squares on an equilibrated sample matrix.
Fit fit(Eigen::MatrixXcd m, const Eigen::VectorXcd& y)
{
    const Eigen::MatrixXcd raw = m;
    const Eigen::VectorXd scale = equilibrate(m);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    Fit f;
    f.condition = sv(sv.size() - 1) > 0 ? std::pow(sv(0) / sv(sv.size() - 1), 2) : INFINITY;
    if (!(f.condition < 1e14))
        throw Error(ErrorKind::IllConditionedBasis, "Gram condition number " + std::to_string(f.condition));
    const Eigen::VectorXcd x = m.colPivHouseholderQr().solve(y);
    f.coef = x;
    for (Eigen::Index j = 0; j < x.size(); ++j)
        f.coef(j) = scale(j) > 0 ? x(j) / scale(j) : cplx(0.0);
    const double ny = y.norm();
    const double misfit = (raw * f.coef - y).norm();
    f.residual = ny > 0 ? misfit / ny : misfit;
    return f;
}

// Uniform points of the fundamental parallelogram away from the given poles.
std::vector<cplx> sample_avoiding(const Lattice& lat, const std::vector<cplx>& poles, int count, std::uint64_t seed,
                                  double margin)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<cplx> pts;
    pts.reserve(static_cast<std::size_t>(count));
    const double r = margin * lat.min_period();
    while (static_cast<int>(pts.size()) < count) {
        const double s = u(rng), t = u(rng);
        const cplx z = lat.point(s, t);
        bool ok = true;
        for (cplx p : poles)
            ok = ok && lat.torus_distance(z, p) >= r;
        if (ok)
            pts.push_back(z);
    }
    return pts;
}

// Adaptive 8-point Gauss-Legendre integral of f over [a, b].
cplx segment_integral(const std::function<cplx(cplx)>& f, cplx a, cplx b, int depth = 0)
{
    auto panel = [&](cplx x0, cplx x1) {
        cplx s = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            s += kGaussWeights[i] * f(x0 + kGaussNodes[i] * (x1 - x0));
        return s * (x1 - x0);
    };
    const cplx m = 0.5 * (a + b);
    const cplx whole = panel(a, b);
    const cplx halves = panel(a, m) + panel(m, b);
    if (depth >= 30 || std::abs(whole - halves) <= 1e-14 * (1.0 + std::abs(halves)))
        return halves;
    return segment_integral(f, a, m, depth + 1) + segment_integral(f, m, b, depth + 1);
}

} // namespace

cplx pairing(const C4& z, const C4& w)
{
    cplx s = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
        s += z[j] * w[j];
    return s;
}

FunctionBasis::FunctionBasis(std::shared_ptr<const EllipticKernel> kernel, cplx p1, cplx p2)
    : kernel_(std::move(kernel)), p1_(p1), p2_(p2)
{
    if (!kernel_)
        throw Error(ErrorKind::InvalidArgument, "basis without kernel");
    const Lattice& lat = kernel_->lattice();
    if (lat.torus_distance(p1, p2) < 1e-3 * lat.min_period())
        throw Error(ErrorKind::IllConditionedBasis, "p1 and p2 coincide on the torus");
    const cplx u = p1 - p2;
    const WeierstrassValues v = kernel_->values(u);
    shift1_ = kernel_->wp(p2 - p1);
    shift2_ = v.wp;
    fold_ = {-2.0 * v.zeta, 3.0 * v.wp - v.zeta * v.zeta, v.wp1,
             0.5 * kernel_->wp_second(v.wp) + v.wp1 * v.zeta};
}

const std::array<std::string, FunctionBasis::kSize>& FunctionBasis::names()
{
    static const std::array<std::string, kSize> n = {"wp1^2", "wp2^2", "wp1*w", "wp2*w", "wp1",
                                                     "wp2",   "w^2",   "wp1*wp2", "w",   "1"};
    return n;
}

const std::array<int, FunctionBasis::kReducedSize>& FunctionBasis::reduced_elements()
{
    static const std::array<int, kReducedSize> r = {P1Sq, P2Sq, P1W, P2W, P1, P2, W, One};
    return r;
}

std::array<cplx, 3> FunctionBasis::generators(cplx z) const
{
    const WeierstrassValues v1 = kernel_->values(z - p1_);
    const WeierstrassValues v2 = kernel_->values(z - p2_);
    return {v1.wp - shift1_, v2.wp - shift2_, v1.zeta - v2.zeta};
}

std::array<cplx, 3> FunctionBasis::generator_derivatives(cplx z) const
{
    const WeierstrassValues v1 = kernel_->values(z - p1_);
    const WeierstrassValues v2 = kernel_->values(z - p2_);
    return {v1.wp1, v2.wp1, v2.wp - v1.wp};
}

std::array<cplx, FunctionBasis::kSize> FunctionBasis::elements(cplx z) const
{
    const auto [q1, q2, w] = generators(z);
    return {q1 * q1, q2 * q2, q1 * w, q2 * w, q1, q2, w * w, q1 * q2, w, 1.0};
}

std::array<cplx, FunctionBasis::kReducedSize> FunctionBasis::fold(const std::array<cplx, kSize>& c) const
{
    return {c[P1Sq],
            c[P2Sq],
            c[P1W],
            c[P2W],
            c[P1] + c[WSq],
            c[P2] + c[WSq],
            c[W] + fold_[0] * c[WSq] + fold_[2] * c[P1P2],
            c[One] + fold_[1] * c[WSq] + fold_[3] * c[P1P2]};
}

std::vector<cplx> FunctionBasis::sample_points(int count, std::uint64_t seed, double margin) const
{
    return sample_avoiding(kernel_->lattice(), {p1_, p2_}, count, seed, margin);
}

Expansion expand_in_basis(const std::function<cplx(cplx)>& sample_fn, const FunctionBasis& basis, int samples,
                          std::uint64_t seed)
{
    if (samples < 4 * FunctionBasis::kReducedSize)
        throw Error(ErrorKind::InvalidArgument, "expansion needs at least 32 samples");
    const std::vector<cplx> pts = basis.sample_points(samples, seed);
    Eigen::VectorXcd y(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = sample_fn(pts[i]);
    const Fit f = fit(sample_matrix(basis, pts, true), y);
    Expansion e;
    e.samples = samples;
    e.gram_condition = f.condition;
    e.residual = f.residual;
    const auto& idx = FunctionBasis::reduced_elements();
    for (std::size_t j = 0; j < idx.size(); ++j) {
        e.reduced[j] = f.coef(static_cast<Eigen::Index>(j));
        e.coefficients[static_cast<std::size_t>(idx[j])] = e.reduced[j];
    }
    return e;
}

GramReport gram_report(const FunctionBasis& basis, bool reduced, int samples, std::uint64_t seed)
{
    Eigen::MatrixXcd m = sample_matrix(basis, basis.sample_points(samples, seed), reduced);
    equilibrate(m);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const auto& sv = svd.singularValues();
    GramReport r;
    for (Eigen::Index j = 0; j < sv.size(); ++j) {
        r.singular_values.push_back(sv(j));
        if (sv(j) > 1e-10 * sv(0))
            ++r.rank;
    }
    const double smin = sv(sv.size() - 1);
    r.condition = smin > 0 ? std::pow(sv(0) / smin, 2) : INFINITY;
    return r;
}

CoefficientSystem CoefficientSystem::from(const C4& a, const C4& b, const C4& c, const C4& d)
{
    CoefficientSystem s;
    s.a = a;
    s.b = b;
    s.c = c;
    s.d = d;
    s.aa = pairing(a, a);
    s.bb = pairing(b, b);
    s.ab = pairing(a, b);
    s.ac = pairing(a, c);
    s.bc = pairing(b, c);
    s.ad = pairing(a, d);
    s.bd = pairing(b, d);
    s.cd = pairing(c, d);
    s.dd = pairing(d, d);
    s.cc = pairing(c, c);
    return s;
}

ConformalityReport verify_conformality_system(const C4& a, const C4& b, const C4& c, const C4& d,
                                              const FunctionBasis& basis, double tolerance, int samples,
                                              std::uint64_t seed)
{
    ConformalityReport r;
    r.system = CoefficientSystem::from(a, b, c, d);
    const CoefficientSystem& s = r.system;
    // Coefficients of <dz f, dz f> on the full list, then folded onto the reduced basis.
    const std::array<cplx, FunctionBasis::kSize> full = {s.aa,          s.bb, 2.0 * s.ac, 2.0 * s.bc, 2.0 * s.ad,
                                                         2.0 * s.bd,    s.cc, 2.0 * s.ab, 2.0 * s.cd, s.dd};
    const auto red = basis.fold(full);
    static const std::array<std::string, FunctionBasis::kReducedSize> names = {
        "<a,a>", "<b,b>", "2<a,c>", "2<b,c>", "2<a,d>+<c,c>", "2<b,d>+<c,c>", "w coefficient", "constant"};
    for (std::size_t j = 0; j < red.size(); ++j) {
        r.equations.push_back({names[j], std::abs(red[j])});
        r.max_equation = std::max(r.max_equation, std::abs(red[j]));
    }

    auto dzf = [&](cplx z) {
        const auto [q1, q2, w] = basis.generators(z);
        C4 fz{};
        for (std::size_t j = 0; j < 4; ++j)
            fz[j] = a[j] * q1 + b[j] * q2 + c[j] * w + d[j];
        return fz;
    };
    const Expansion e = expand_in_basis([&](cplx z) { const C4 fz = dzf(z); return pairing(fz, fz); }, basis,
                                        samples, seed);
    for (cplx x : e.reduced)
        r.sampled_residual = std::max(r.sampled_residual, std::abs(x));
    std::vector<double> num, den;
    for (cplx z : basis.sample_points(samples, seed)) {
        const C4 fz = dzf(z);
        num.push_back(std::abs(pairing(fz, fz)));
        den.push_back(norm_sq(fz));
    }
    const double dn = rms(den);
    r.pointwise_residual = dn > 0 ? rms(num) / dn : 0.0;
    const double scale = std::max(1.0, norm_sq(a) + norm_sq(b) + norm_sq(c) + norm_sq(d));
    r.equations_hold = r.max_equation <= tolerance * scale;
    r.conformal = r.sampled_residual <= tolerance * scale;
    r.consistent = r.equations_hold == r.conformal;
    return r;
}

BranchWitness ab_zero_witness(const FunctionBasis& basis, cplx alpha1, cplx alpha2)
{
    const Lattice& lat = basis.kernel().lattice();
    // w' = wp(. - p2) - wp(. - p1): double poles with leading coefficients -1 at p1 and +1 at p2.
    std::vector<PoleDatum> poles(2);
    poles[0].location = lat.reduce(basis.p1());
    poles[0].order = 2;
    poles[0].principal = {0.0, -1.0};
    poles[1].location = lat.reduce(basis.p2());
    poles[1].order = 2;
    poles[1].principal = {0.0, 1.0};
    const EllipticKernel& k = basis.kernel();
    auto g = [&](cplx z) -> std::array<cplx, 2> {
        const WeierstrassValues v1 = k.values(z - basis.p1());
        const WeierstrassValues v2 = k.values(z - basis.p2());
        return {v2.wp - v1.wp, v2.wp1 - v1.wp1};
    };
    auto fz_norm = [&](cplx z) {
        const cplx wd = basis.generator_derivatives(z)[2];
        // |(h1', -i h1', h2', -i h2') / 2| with h_l' = alpha_l w'.
        return std::abs(wd) * std::sqrt(0.5 * (std::norm(alpha1) + std::norm(alpha2)));
    };

    BranchWitness out;
    for (const ZeroInfo& z : find_zeros(lat, g, poles)) {
        for (int m = 0; m < z.multiplicity; ++m)
            out.branch_points.push_back(z.location);
        out.max_abs_fz = std::max(out.max_abs_fz, fz_norm(z.location));
    }
    double mn = INFINITY;
    const double margin = 0.05 * lat.min_period();
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) {
            const cplx z = lat.point((i + 0.5) / 32, (j + 0.5) / 32);
            bool skip = lat.torus_distance(z, basis.p1()) < margin || lat.torus_distance(z, basis.p2()) < margin;
            for (cplx b : out.branch_points)
                skip = skip || lat.torus_distance(z, b) < margin;
            if (!skip)
                mn = std::min(mn, fz_norm(z));
        }
    out.min_abs_fz_elsewhere = mn;
    return out;
}

BranchSystemReport verify_branch_system(const C4& a, const C4& b, const C4& d,
                                        std::shared_ptr<const EllipticKernel> kernel, double tolerance, int samples,
                                        std::uint64_t seed)
{
    if (norm_sq(a) == 0.0)
        throw Error(ErrorKind::InvalidArgument, "branch system needs a != 0");
    BranchSystemReport r;
    r.a = a;
    r.b = b;
    r.d = d;
    const std::array<std::pair<const char*, cplx>, 6> prs = {{{"<a,a>", pairing(a, a)},
                                                              {"<a,b>", pairing(a, b)},
                                                              {"<b,b>", pairing(b, b)},
                                                              {"<a,d>", pairing(a, d)},
                                                              {"<b,d>", pairing(b, d)},
                                                              {"<d,d>", pairing(d, d)}}};
    for (const auto& [n, v] : prs) {
        r.pairings.push_back({n, std::abs(v)});
        r.max_pairing = std::max(r.max_pairing, std::abs(v));
    }

    const Lattice& lat = kernel->lattice();
    const std::vector<cplx> pts = sample_avoiding(lat, {0.0}, samples, seed, 0.05);
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(pts.size()), 6);
    Eigen::VectorXcd y(m.rows());
    std::vector<double> num, den;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const WeierstrassValues v = kernel->values(pts[i]);
        const auto row = static_cast<Eigen::Index>(i);
        m.row(row) << v.wp1 * v.wp1, v.wp1 * v.wp, v.wp * v.wp, v.wp1, v.wp, 1.0;
        C4 fz{};
        for (std::size_t j = 0; j < 4; ++j)
            fz[j] = a[j] * v.wp1 + b[j] * v.wp + d[j];
        y(row) = pairing(fz, fz);
        num.push_back(std::abs(y(row)));
        den.push_back(norm_sq(fz));
    }
    const Fit f = fit(m, y);
    for (Eigen::Index j = 0; j < f.coef.size(); ++j)
        r.sampled_residual = std::max(r.sampled_residual, std::abs(f.coef(j)));
    const double dn = rms(den);
    r.pointwise_residual = dn > 0 ? rms(num) / dn : 0.0;
    const double scale = std::max(1.0, norm_sq(a) + norm_sq(b) + norm_sq(d));
    r.equations_hold = r.max_pairing <= tolerance * scale;
    r.conformal = r.sampled_residual <= tolerance * scale;
    r.consistent = r.equations_hold == r.conformal;

    // Periods along omega_k: wp' integrates to 0 and wp to -eta_k.
    const auto eta = kernel->quasi_periods();
    const std::array<cplx, 2> om = lat.generators();
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < 4; ++j)
            r.period_defect = std::max(r.period_defect, std::abs((-b[j] * eta[k] + d[j] * om[k]).real()));
    r.double_cover = r.conformal && r.period_defect <= tolerance * scale;

    const MeromorphicBlock wp = make_wp(kernel);
    // Preimage count of a value away from the branch values.
    cplx target(0.3, 0.7);
    for (cplx e : kernel->half_period_values())
        if (std::abs(target - e) < 1e-2)
            target += cplx(0.1, 0.05);
    for (const ZeroInfo& z : solve(wp, target))
        r.degree += z.multiplicity;
    r.branch_points = branch_points(wp);
    return r;
}

PeriodReport period_integrals(const FunctionBasis& basis, int k, std::optional<cplx> xi)
{
    if (k != 1 && k != 2)
        throw Error(ErrorKind::InvalidArgument, "period index must be 1 or 2");
    const Lattice& lat = basis.kernel().lattice();
    const cplx omega_k = k == 1 ? cplx(1.0) : lat.omega();
    PeriodReport r;
    r.k = k;
    if (xi) {
        r.xi = *xi;
    } else {
        // Transverse coordinate of each pole; the segment goes through the middle of the widest gap.
        std::vector<double> c;
        for (cplx p : {basis.p1(), basis.p2()}) {
            const auto st = lat.coordinates(p);
            const double v = k == 1 ? st[1] : st[0];
            c.push_back(v - std::floor(v));
        }
        std::sort(c.begin(), c.end());
        const double g_inner = c[1] - c[0], g_wrap = 1.0 - g_inner;
        const double mid = g_inner >= g_wrap ? 0.5 * (c[0] + c[1]) : c[1] + 0.5 * g_wrap;
        r.xi = k == 1 ? lat.point(0.0, mid) : lat.point(mid, 0.0);
    }
    // Distance from the segment to the nearest pole translate.
    const double clearance = 1e-3 * lat.min_period();
    for (cplx p : {basis.p1(), basis.p2()})
        for (int i = 0; i <= 256; ++i) {
            const cplx z = r.xi + (i / 256.0) * omega_k;
            if (lat.torus_distance(z, p) < clearance + std::abs(omega_k) / 512.0) {
                // Fine check on the nearby stretch.
                const double t0 = std::max(0.0, (i - 1) / 256.0), t1 = std::min(1.0, (i + 1) / 256.0);
                for (int m = 0; m <= 64; ++m)
                    if (lat.torus_distance(r.xi + (t0 + (t1 - t0) * m / 64.0) * omega_k, p) < clearance)
                        throw Error(ErrorKind::PathHitsPole, "segment passes a pole");
            }
        }
    const cplx a = r.xi, b = r.xi + omega_k;
    const cplx i1 = segment_integral([&](cplx z) { return basis.generators(z)[0]; }, a, b);
    const cplx i2 = segment_integral([&](cplx z) { return basis.generators(z)[1]; }, a, b);
    r.sigma = 0.5 * (i1 + i2);
    r.l_mismatch = std::abs(i1 - i2);
    return r;
}

cplx forced_d(cplx s, cplx sigma1, cplx sigma2, cplx omega)
{
    if (omega.imag() == 0.0)
        throw Error(ErrorKind::InvalidArgument, "omega must not be real");
    const double x = -(s * sigma1).real();
    const double y = (x * omega.real() + (s * sigma2).real()) / omega.imag();
    return {x, y};
}

std::vector<PoleOrderEntry> pole_order_audit(const FunctionBasis& basis)
{
    static const std::array<std::array<int, 2>, FunctionBasis::kSize> ledger = {
        {{4, 0}, {0, 4}, {3, 0}, {0, 3}, {2, 0}, {0, 2}, {2, 2}, {1, 1}, {1, 1}, {0, 0}}};
    constexpr int kAngles = 16;
    constexpr double r1 = 1e-2, r2 = 1e-4;
    std::vector<PoleOrderEntry> out(FunctionBasis::kSize);
    for (std::size_t e = 0; e < out.size(); ++e) {
        out[e].element = FunctionBasis::names()[e];
        out[e].expected = ledger[e];
    }
    const std::array<cplx, 2> centers = {basis.p1(), basis.p2()};
    for (std::size_t l = 0; l < 2; ++l) {
        std::array<std::array<double, FunctionBasis::kSize>, 2> mean_log{};
        std::array<cplx, FunctionBasis::kSize> lead{};
        for (int q = 0; q < kAngles; ++q) {
            const double th = 2 * kPi * (q + 0.25) / kAngles;
            const cplx dir = std::polar(1.0, th);
            const auto f1 = basis.elements(centers[l] + r1 * dir);
            const auto f2 = basis.elements(centers[l] + r2 * dir);
            for (std::size_t e = 0; e < FunctionBasis::kSize; ++e) {
                mean_log[0][e] += std::log(std::abs(f1[e])) / kAngles;
                mean_log[1][e] += std::log(std::abs(f2[e])) / kAngles;
                // Fourier coefficient of (z - p)^-m at radius r2.
                const int m = ledger[e][l];
                lead[e] += f2[e] * std::pow(r2 * dir, m) / static_cast<double>(kAngles);
            }
        }
        for (std::size_t e = 0; e < FunctionBasis::kSize; ++e) {
            out[e].slope[l] = (mean_log[1][e] - mean_log[0][e]) / std::log(r1 / r2);
            out[e].leading[l] = lead[e];
        }
    }
    for (PoleOrderEntry& e : out) {
        e.matches = true;
        for (std::size_t l = 0; l < 2; ++l) {
            const double s = e.slope[l];
            e.matches = e.matches && (e.expected[l] > 0 ? std::abs(s - e.expected[l]) < 0.05 : s < 0.05);
        }
    }
    return out;
}

} // namespace willmore
