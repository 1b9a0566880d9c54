#include "willmore/perturbation.hpp"

#include "willmore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace willmore {

namespace {

const Lattice& reference_lattice()
{
    static const Lattice lat(cplx(0.0, 1.0));
    return lat;
}

double ref_distance(cplx a, cplx b) { return reference_lattice().torus_distance(a, b); }

cplx ref_reduce(cplx p)
{
    double x = p.real() - std::floor(p.real()), y = p.imag() - std::floor(p.imag());
    if (x > 1.0 - 1e-9)
        x = 0.0;
    if (y > 1.0 - 1e-9)
        y = 0.0;
    return {x, y};
}

std::string describe(cplx z)
{
    std::ostringstream os;
    os << z;
    return os.str();
}

// Cutoff jets in (x, y) from the radial profile; q is p minus the centre.
std::array<double, 6> radial_jet(cplx q, double delta)
{
    const double r = std::abs(q);
    const auto [h, h1, h2] = smooth_cutoff(r, delta);
    std::array<double, 6> e{h, 0, 0, 0, 0, 0};
    if (h1 == 0.0 && h2 == 0.0)
        return e;
    const double x = q.real(), y = q.imag(), r2 = r * r, r3 = r2 * r;
    e[1] = h1 * x / r;
    e[2] = h1 * y / r;
    e[3] = h2 * x * x / r2 + h1 * y * y / r3;
    e[4] = (h2 - h1 / r) * x * y / r2;
    e[5] = h2 * y * y / r2 + h1 * x * x / r3;
    return e;
}

double min_sv_of(const SurfaceJet& j)
{
    const double a = norm2(j.F1), c = norm2(j.F2), b = dot(j.F1, j.F2);
    const double tr = a + c, det = a * c - b * b;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    return std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
}

// Restriction of a surface to the square of side 2 * half centred at c, rescaled to [0,1)^2.
class SquarePatch : public Surface {
public:
    SquarePatch(const Surface& base, cplx c, double half, cplx omega)
        : base_(base), c_(c), half_(half), omega_(omega)
    {}
    SurfaceJet jet(double s, double t) const override
    {
        const double d = 2.0 * half_;
        SurfaceJet j = base_.jet(c_.real() - half_ + d * s, c_.imag() - half_ + d * t);
        j.F1 *= d;
        j.F2 *= d;
        j.F11 *= d * d;
        j.F12 *= d * d;
        j.F22 *= d * d;
        return j;
    }
    cplx conformal_modulus() const override { return omega_; }

private:
    const Surface& base_;
    cplx c_;
    double half_;
    cplx omega_;
};

} // namespace

std::array<double, 3> smooth_cutoff(double r, double delta)
{
    // Logistic composition of exp(-1/u) steps: S(u) = 1 / (1 + exp(-g)), g = 1/(1-u) - 1/u.
    const double u = 3.0 - r / delta;
    if (u >= 1.0)
        return {1.0, 0.0, 0.0};
    if (u <= 0.0)
        return {0.0, 0.0, 0.0};
    const double v = 1.0 - u;
    const double g = 1.0 / v - 1.0 / u;
    const double g1 = 1.0 / (v * v) + 1.0 / (u * u);
    const double g2 = 2.0 / (v * v * v) - 2.0 / (u * u * u);
    const double s = g >= 0.0 ? 1.0 / (1.0 + std::exp(-g)) : std::exp(g) / (1.0 + std::exp(g));
    const double ds = s * (1.0 - s);
    const double S1 = ds * g1;
    const double S2 = ds * (1.0 - 2.0 * s) * g1 * g1 + ds * g2;
    // du/dr = -1/delta
    return {s, -S1 / delta, S2 / (delta * delta)};
}

cplx PerturbationFamily::to_p(cplx z) const
{
    const double y = z.imag() / sigma_.imag();
    return {z.real() - sigma_.real() * y, y};
}

Sym2 PerturbationFamily::flat_metric() const { return {1.0, sigma_.real(), std::norm(sigma_)}; }

void PerturbationFamily::locate()
{
    kernel_ = std::make_shared<const EllipticKernel>(Lattice(sigma_));
    block_ = make_inverse_wp(kernel_, alpha_);
    poles_.clear();
    for (const auto& p : block_->poles())
        poles_.push_back(ref_reduce(to_p(p.location)));
    branch_.clear();
    branch_rep_.clear();
    for (const auto& b : willmore::branch_points(*block_)) {
        branch_.push_back(ref_reduce(to_p(b.location)));
        branch_rep_.push_back(branch_.back());
    }
}

std::string PerturbationFamily::packing_violation() const
{
    if (3.0 * delta_ >= 0.5)
        return "3 delta >= 1/2";
    std::vector<cplx> centres = poles_;
    centres.insert(centres.end(), branch_.begin(), branch_.end());
    for (std::size_t i = 0; i < centres.size(); ++i)
        for (std::size_t j = i + 1; j < centres.size(); ++j)
            if (ref_distance(centres[i], centres[j]) <= 6.0 * delta_)
                return "balls around " + describe(centres[i]) + " and " + describe(centres[j]) + " overlap";
    // Pole charts of the inverted map, as sized by PairImmersion, must stay off the branch balls.
    const Lattice& lat = kernel_->lattice();
    const double smin = affine_min_singular(sigma_);
    for (const auto& p : block_->poles()) {
        double d = lat.min_period();
        for (const auto& q : block_->poles())
            if (lat.torus_distance(p.location, q.location) > 1e-9)
                d = std::min(d, lat.torus_distance(p.location, q.location));
        for (cplx b : branch_)
            d = std::min(d, lat.torus_distance(p.location, to_z(b)));
        const double chart_p = 0.1 * d / smin;
        const cplx pp = ref_reduce(to_p(p.location));
        for (cplx b : branch_)
            if (ref_distance(pp, b) <= 3.0 * delta_ + chart_p)
                return "pole chart at " + describe(pp) + " meets the ball around " + describe(b);
    }
    return {};
}

PerturbationFamily PerturbationFamily::with(cplx sigma, double epsilon) const
{
    if (!(sigma.imag() > 0.0))
        throw Error(ErrorKind::NonPositiveImaginaryPart, "sigma = " + describe(sigma));
    if (!(epsilon >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "epsilon must be >= 0");
    PerturbationFamily f = *this;
    f.epsilon_ = epsilon;
    if (sigma != sigma_) {
        f.sigma_ = sigma;
        f.locate();
        // Keep the canonical representatives of the base family.
        for (std::size_t j = 0; j < f.branch_.size(); ++j) {
            std::size_t best = 0;
            for (std::size_t k = 0; k < branch_.size(); ++k)
                if (ref_distance(f.branch_[j], branch_[k]) < ref_distance(f.branch_[j], branch_[best]))
                    best = k;
            f.branch_rep_[j] = branch_rep_[best] + reference_lattice().nearest_difference(f.branch_[j] - branch_rep_[best]);
        }
        if (const std::string why = f.packing_violation(); !why.empty())
            throw Error(ErrorKind::ChartPackingFailure, "sigma = " + describe(sigma) + ": " + why);
    }
    return f;
}

int PerturbationFamily::branch_ball(cplx p) const
{
    for (std::size_t j = 0; j < branch_.size(); ++j)
        if (ref_distance(p, branch_[j]) < 3.0 * delta_)
            return static_cast<int>(j);
    return -1;
}

int PerturbationFamily::pole_ball(cplx p) const
{
    for (std::size_t j = 0; j < poles_.size(); ++j)
        if (ref_distance(p, poles_[j]) < 3.0 * delta_)
            return static_cast<int>(j);
    return -1;
}

std::array<cplx, 6> PerturbationFamily::phi_jet(cplx p) const
{
    const int j = branch_ball(p);
    if (j < 0)
        return {};
    const cplx q = reference_lattice().nearest_difference(p - branch_[static_cast<std::size_t>(j)]);
    const auto e = radial_jet(q, delta_);
    cplx L = to_z(q);
    if (chart_branch_ == ChartBranch::Canonical)
        L += to_z(branch_rep_[static_cast<std::size_t>(j)]);
    const cplx s = sigma_;
    return {e[0] * L,
            e[1] * L + e[0],
            e[2] * L + e[0] * s,
            e[3] * L + 2.0 * e[1],
            e[4] * L + e[1] * s + e[2],
            e[5] * L + 2.0 * e[2] * s};
}

SurfaceJet PerturbationFamily::jet(cplx p) const
{
    const Jet3 J = block_->jet(to_z(p), 2);
    const cplx s = sigma_;
    SurfaceJet out;
    out.F.a = J[0];
    out.F1.a = J[1];
    out.F2.a = s * J[1];
    out.F11.a = J[2];
    out.F12.a = s * J[2];
    out.F22.a = s * s * J[2];
    if (epsilon_ > 0.0) {
        const auto ph = phi_jet(p);
        out.F.b = epsilon_ * ph[0];
        out.F1.b = epsilon_ * ph[1];
        out.F2.b = epsilon_ * ph[2];
        out.F11.b = epsilon_ * ph[3];
        out.F12.b = epsilon_ * ph[4];
        out.F22.b = epsilon_ * ph[5];
    }
    return out;
}

double PerturbationFamily::lambda(cplx p) const
{
    double lam = 1.0;
    if (const int j = branch_ball(p); j >= 0) {
        const double eta = smooth_cutoff(ref_distance(p, branch_[static_cast<std::size_t>(j)]), delta_)[0];
        const double d2 = std::norm(block_->derivative(to_z(p))) + epsilon_ * epsilon_;
        lam += eta * (1.0 / d2 - 1.0);
    } else if (const int i = pole_ball(p); i >= 0) {
        const double eta = smooth_cutoff(ref_distance(p, poles_[static_cast<std::size_t>(i)]), delta_)[0];
        lam += eta * (1.0 / std::norm(block_->derivative(to_z(p))) - 1.0);
    }
    return lam;
}

Sym2 PerturbationFamily::regularized_metric(cplx p) const
{
    const Sym2 flat = flat_metric();
    auto scaled = [&](double w) { return Sym2{w * flat[0], w * flat[1], w * flat[2]}; };
    if (const int j = branch_ball(p); j >= 0) {
        const double eta = smooth_cutoff(ref_distance(p, branch_[static_cast<std::size_t>(j)]), delta_)[0];
        // On the inner ball the pullback is (|F'|^2 + eps^2) A^* g_euc and lambda cancels it.
        if (eta == 1.0)
            return flat;
        const SurfaceJet J = jet(p);
        const double d2 = std::norm(J.F1.a) + epsilon_ * epsilon_;
        const double lam = 1.0 + eta * (1.0 / d2 - 1.0);
        return {lam * norm2(J.F1), lam * dot(J.F1, J.F2), lam * norm2(J.F2)};
    }
    if (const int i = pole_ball(p); i >= 0) {
        const double eta = smooth_cutoff(ref_distance(p, poles_[static_cast<std::size_t>(i)]), delta_)[0];
        if (eta == 1.0)
            return flat;
        return scaled(eta + (1.0 - eta) * std::norm(block_->derivative(to_z(p))));
    }
    return scaled(std::norm(block_->derivative(to_z(p))));
}

PerturbationFamily build_family(const ConformalClass& omega, std::optional<cplx> alpha, std::optional<double> delta,
                                std::uint64_t seed, ChartBranch branch)
{
    PerturbationFamily f;
    f.omega_ = omega;
    f.sigma_ = omega.omega();
    f.seed_ = seed;
    f.chart_branch_ = branch;
    if (alpha) {
        f.alpha_ = *alpha;
    } else {
        // Candidates on the 1/8 grid; preimages are +-p since wp is even.
        const EllipticKernel k{Lattice(omega)};
        const std::array<cplx, 4> half{cplx(0, 0), cplx(0.5, 0), cplx(0, 0.5), cplx(0.5, 0.5)};
        double best_score = -1.0, best_slope = -1.0;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                const cplx p(i / 8.0, j / 8.0);
                double score = ref_distance(p, -p);
                for (cplx b : half)
                    score = std::min({score, ref_distance(p, b), ref_distance(-p, b)});
                if (score < 1e-9)
                    continue;
                const WeierstrassValues v = k.values(f.to_z(p));
                const double slope = std::abs(v.wp1);
                if (score > best_score + 1e-12 || (std::abs(score - best_score) <= 1e-12 && slope > best_slope)) {
                    best_score = score;
                    best_slope = slope;
                    f.alpha_ = v.wp;
                }
            }
    }
    f.locate();

    if (delta) {
        if (!(*delta > 0.0))
            throw Error(ErrorKind::InvalidArgument, "delta must be positive");
        f.delta_ = *delta;
    } else {
        std::vector<cplx> centres = f.poles_;
        centres.insert(centres.end(), f.branch_.begin(), f.branch_.end());
        double d = 1.0;
        for (std::size_t i = 0; i < centres.size(); ++i)
            for (std::size_t j = i + 1; j < centres.size(); ++j)
                d = std::min(d, ref_distance(centres[i], centres[j]));
        f.delta_ = std::min(0.25 * d, 0.1);
    }
    std::string why = f.packing_violation();
    while (!why.empty() && f.halvings_ < 6) {
        f.delta_ *= 0.5;
        ++f.halvings_;
        why = f.packing_violation();
    }
    if (!why.empty())
        throw Error(ErrorKind::ChartPackingFailure, why + " (delta = " + std::to_string(f.delta_) + ")");
    return f;
}

PerturbedSurface::PerturbedSurface(PerturbationFamily family, bool inverted, C2 offset)
    : family_(std::move(family)), inverted_(inverted), offset_(offset),
      pair_(family_.block(), MeromorphicBlock(family_.block().kernel_ptr(), {}), inverted, offset)
{}

SurfaceJet PerturbedSurface::jet(double s, double t) const
{
    const cplx p(s, t);
    if (family_.epsilon() > 0.0 && family_.branch_ball(p) >= 0) {
        SurfaceJet J = family_.jet(p);
        J.F += offset_;
        return inverted_ ? invert_jet(J) : J;
    }
    return pair_.jet(s, t);
}

std::vector<RefinementSite> PerturbedSurface::refinement_sites() const
{
    std::vector<RefinementSite> out = pair_.refinement_sites();
    for (cplx b : family_.branch_points())
        out.push_back({b.real(), b.imag(), 3.0 * family_.delta()});
    return out;
}

C2 choose_perturbation_offset(const PerturbationFamily& family, int candidates)
{
    std::vector<C2> image;
    const int n = 32;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cplx p((i + 0.5) / n, (j + 0.5) / n);
            bool near = false;
            for (cplx q : family.poles())
                near = near || ref_distance(p, q) < 0.02;
            if (!near)
                image.push_back(family.map(p));
        }
    std::mt19937_64 rng(family.seed() ^ 0x5bd1e995ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    C2 best{};
    double best_d = -1.0;
    for (int c = 0; c < candidates;) {
        const C2 x{cplx(u(rng), u(rng)), cplx(u(rng), u(rng))};
        if (norm2(x) > 1.0)
            continue;
        ++c;
        double d = 1e300;
        for (const C2& y : image)
            d = std::min(d, norm2(y + x));
        if (d > best_d) {
            best_d = d;
            best = x;
        }
    }
    return best;
}

double min_singular_value(const Surface& surface, int n)
{
    double m = 1e300;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m = std::min(m, min_sv_of(surface.jet((i + 0.5) / n, (j + 0.5) / n)));
    return m;
}

ModulusReport tau(const PerturbationFamily& family, int grid_n)
{
    ModulusOptions opt;
    opt.grid_n = grid_n;
    return estimate_modulus([&](double x, double y) { return family.regularized_metric(cplx(x, y)); }, opt);
}

ConstraintSolution solve_conformal_constraint(const PerturbationFamily& family, double epsilon, cplx initial_sigma,
                                              const ConstraintOptions& options)
{
    const cplx omega = family.base_class().omega();
    ConstraintSolution sol;
    auto eval = [&](cplx s) { return tau(family.with(s, epsilon), options.grid_n).estimated_modulus; };
    auto fail = [&](const std::string& why) {
        std::ostringstream os;
        os << why << "; trace:";
        for (const auto& st : sol.trace)
            os << " (" << st.sigma << " -> " << st.residual << ")";
        throw Error(ErrorKind::NewtonDivergence, os.str());
    };

    cplx sigma = initial_sigma;
    cplx t = eval(sigma);
    cplx r = t - omega;
    sol.trace.push_back({sigma, t, std::abs(r)});
    if (std::abs(r) <= options.tolerance) {
        sol.sigma = sigma;
        sol.tau = t;
        sol.residual = std::abs(r);
        return sol;
    }
    // Jacobian of (Re, Im) tau in (Re, Im) sigma by forward differences.
    const double h = options.fd_step;
    const cplx cx = (eval(sigma + h) - t) / h, cy = (eval(sigma + cplx(0, h)) - t) / h;
    double J[2][2] = {{cx.real(), cy.real()}, {cx.imag(), cy.imag()}};
    const double r0 = std::abs(r);
    int increases = 0;
    for (int it = 0; it < options.max_iterations; ++it) {
        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        if (std::abs(det) < 1e-14)
            fail("singular Jacobian");
        const double dx = -(J[1][1] * r.real() - J[0][1] * r.imag()) / det;
        const double dy = -(-J[1][0] * r.real() + J[0][0] * r.imag()) / det;
        const cplx step(dx, dy);
        sigma += step;
        if (!(sigma.imag() > 0.0))
            fail("sigma left the upper half plane");
        cplx t_new;
        try {
            t_new = eval(sigma);
        } catch (const Error& e) {
            fail(std::string("evaluation failed: ") + e.what());
        }
        const cplx r_new = t_new - omega;
        sol.trace.push_back({sigma, t_new, std::abs(r_new)});
        if (std::abs(r_new) <= options.tolerance) {
            sol.sigma = sigma;
            sol.tau = t_new;
            sol.residual = std::abs(r_new);
            return sol;
        }
        if (std::abs(r_new) > std::abs(r))
            ++increases;
        if (increases >= 3 || std::abs(r_new) > 10.0 * r0)
            fail("residual not decreasing");
        // Broyden update with y = r_new - r and s = step.
        const cplx y = r_new - r;
        const double ss = dx * dx + dy * dy;
        const double u0 = y.real() - (J[0][0] * dx + J[0][1] * dy);
        const double u1 = y.imag() - (J[1][0] * dx + J[1][1] * dy);
        J[0][0] += u0 * dx / ss;
        J[0][1] += u0 * dy / ss;
        J[1][0] += u1 * dx / ss;
        J[1][1] += u1 * dy / ss;
        r = r_new;
    }
    fail("iteration limit reached");
    return sol;
}

EnergyReport excess_energy(const PerturbationFamily& family, int grid_n, int refine_levels)
{
    const PerturbedSurface flat(family, false, C2{});
    EnergyReport total;
    total.grid_n = grid_n;
    total.refine_levels = refine_levels;
    for (cplx b : family.branch_points()) {
        const SquarePatch patch(flat, b, 3.0 * family.delta(), family.sigma());
        const EnergyReport r = willmore_energy(patch, {grid_n, refine_levels});
        total.willmore_energy += r.willmore_energy;
        total.error_indicator += r.error_indicator;
        total.total_gauss_curvature += r.total_gauss_curvature;
        total.gauss_error_indicator += r.gauss_error_indicator;
        total.area += r.area;
        total.tiles += r.tiles;
        total.degenerate_samples += r.degenerate_samples;
        total.max_conformality_residual = std::max(total.max_conformality_residual, r.max_conformality_residual);
    }
    return total;
}

std::vector<SweepRow> energy_sweep(const PerturbationFamily& family, const std::vector<double>& epsilons,
                                   const SweepOptions& options)
{
    for (std::size_t i = 1; i < epsilons.size(); ++i)
        if (!(epsilons[i] < epsilons[i - 1]))
            throw Error(ErrorKind::InvalidArgument, "epsilons must be strictly descending");
    const cplx omega = family.base_class().omega();
    std::vector<SweepRow> rows;
    cplx seed_sigma = omega;
    for (double eps : epsilons) {
        ConstraintOptions copt;
        copt.grid_n = options.modulus_grid;
        copt.tolerance = options.newton_tolerance;
        const ConstraintSolution sol = solve_conformal_constraint(family, eps, options.parallel ? omega : seed_sigma, copt);
        seed_sigma = sol.sigma;
        const PerturbationFamily fam = family.with(sol.sigma, eps);
        const PerturbedSurface surf(fam, true, choose_perturbation_offset(fam));
        const EnergyReport w = willmore_energy(surf, {options.energy_grid, options.refine_levels});
        const EnergyReport ex = excess_energy(fam, 64, options.refine_levels);
        SweepRow row;
        row.epsilon = eps;
        row.sigma = sol.sigma;
        row.tau_residual = sol.residual;
        row.willmore_energy = w.willmore_energy;
        row.energy_error_indicator = w.error_indicator;
        row.excess_energy = ex.willmore_energy;
        row.excess_error_indicator = ex.error_indicator;
        row.min_singular_value = min_singular_value(surf, options.singular_value_grid);
        row.trace = sol.trace;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace willmore
