#include "oracles.hpp"

#include <willmore/errors.hpp>
#include <willmore/perturbation.hpp>

#include <doctest.h>

using namespace willmore;

namespace {

const Lattice kRef{cplx(0, 1)};

double sv_min(const SurfaceJet& j)
{
    const double a = norm2(j.F1), c = norm2(j.F2), b = dot(j.F1, j.F2);
    const double tr = a + c, det = a * c - b * b;
    return std::sqrt(std::max(0.0, 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4 * det)))));
}

double sym_dist(const Sym2& a, const Sym2& b)
{
    return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

const PerturbationFamily& base()
{
    static const PerturbationFamily f = build_family(ConformalClass(cplx(0.3, 1.1)), std::nullopt, std::nullopt, 1);
    return f;
}

} // namespace

TEST_CASE("smooth cutoff")
{
    const double d = 0.05;
    CHECK(smooth_cutoff(0.0, d)[0] == 1.0);
    CHECK(smooth_cutoff(2 * d, d)[0] == 1.0);
    CHECK(smooth_cutoff(3 * d, d)[0] == 0.0);
    CHECK(smooth_cutoff(0.2, d)[0] == 0.0);
    for (double r = 2.05 * d; r < 2.96 * d; r += 0.1 * d) {
        const double h = 1e-6;
        const auto c = smooth_cutoff(r, d);
        const auto p = smooth_cutoff(r + h, d), m = smooth_cutoff(r - h, d);
        CHECK(c[0] > 0.0);
        CHECK(c[0] < 1.0);
        CHECK(c[1] <= 0.0);
        CHECK(c[1] == doctest::Approx((p[0] - m[0]) / (2 * h)).epsilon(1e-6));
        CHECK(c[2] == doctest::Approx((p[1] - m[1]) / (2 * h)).epsilon(1e-5));
    }
    // All derivatives vanish at the ends of the transition.
    for (double r : {2.0 * d + 1e-4 * d, 3.0 * d - 1e-4 * d}) {
        const auto c = smooth_cutoff(r, d);
        CHECK(std::abs(c[1]) < 1e-100);
        CHECK(std::abs(c[2]) < 1e-100);
    }
}

TEST_CASE("family structure")
{
    SUBCASE("alpha = 1 on the square lattice")
    {
        const PerturbationFamily f = build_family(ConformalClass(cplx(0, 1)), cplx(1.0), std::nullopt);
        CHECK(f.poles().size() == 2);
        REQUIRE(f.branch_points().size() == 4);
        for (cplx e : {cplx(0, 0), cplx(0.5, 0), cplx(0, 0.5), cplx(0.5, 0.5)}) {
            double best = 1;
            for (cplx b : f.branch_points())
                best = std::min(best, kRef.torus_distance(b, e));
            CHECK(best < 1e-9);
        }
        // Under A_sigma these are the half periods of Z + sigma Z.
        const cplx s = f.sigma();
        const Lattice lat(s);
        for (cplx e : {cplx(0), cplx(0.5), 0.5 * s, 0.5 * (1.0 + s)}) {
            double best = 1;
            for (cplx b : f.branch_points())
                best = std::min(best, lat.torus_distance(f.to_z(b), e));
            CHECK(best < 1e-9);
        }
        for (cplx p : f.poles())
            CHECK(std::abs(1.0 / f.block().kernel().wp_prime(f.to_z(p))) < 1e6);
    }
    SUBCASE("critical value")
    {
        const EllipticKernel k{Lattice(cplx(0, 1))};
        try {
            (void)build_family(ConformalClass(cplx(0, 1)), k.half_period_values()[0]);
            FAIL("expected CriticalValue");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::CriticalValue);
        }
    }
    SUBCASE("default alpha and delta satisfy the packing condition")
    {
        const PerturbationFamily& f = base();
        std::vector<cplx> c = f.poles();
        c.insert(c.end(), f.branch_points().begin(), f.branch_points().end());
        REQUIRE(c.size() == 6);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = i + 1; j < c.size(); ++j)
                CHECK(kRef.torus_distance(c[i], c[j]) > 6 * f.delta());
        CHECK(f.delta() <= 0.1);
        // Two simple preimages with nonvanishing derivative of wp.
        for (cplx p : f.poles())
            CHECK(std::abs(f.block().kernel().wp_prime(f.to_z(p))) > 1e-3);
    }
    SUBCASE("packing failure")
    {
        try {
            (void)build_family(ConformalClass(cplx(0, 1)), cplx(1e8), 0.1);
            FAIL("expected ChartPackingFailure");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ChartPackingFailure);
        }
    }
}

TEST_CASE("perturbed map jets")
{
    const PerturbationFamily f = base().with(base().sigma(), 0.1);
    const double d = f.delta();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 40; ++i) {
        // Points spread over a branch ball, including the annulus.
        const cplx b = f.branch_points()[static_cast<std::size_t>(i % 4)];
        const cplx p = b + std::polar(3.2 * d * u(rng), 2 * kPi * u(rng));
        const double h = 1e-6;
        const SurfaceJet j = f.jet(p);
        const SurfaceJet jx = f.jet(p + h), jmx = f.jet(p - h), jy = f.jet(p + cplx(0, h)), jmy = f.jet(p - cplx(0, h));
        auto close = [](const C2& a, const C2& b, double scale) { return std::sqrt(norm2(a - b)) <= 1e-6 * scale; };
        const double s1 = std::sqrt(norm2(j.F1)) + std::sqrt(norm2(j.F2)) + 1e-3;
        const double s2 = std::sqrt(norm2(j.F11)) + std::sqrt(norm2(j.F12)) + std::sqrt(norm2(j.F22)) + 1e-3;
        CHECK(close((jx.F - jmx.F) / (2 * h), j.F1, s1));
        CHECK(close((jy.F - jmy.F) / (2 * h), j.F2, s1));
        CHECK(close((jx.F1 - jmx.F1) / (2 * h), j.F11, s2));
        CHECK(close((jy.F1 - jmy.F1) / (2 * h), j.F12, s2));
        CHECK(close((jy.F2 - jmy.F2) / (2 * h), j.F22, s2));
    }
}

TEST_CASE("support, degeneracy and immersivity")
{
    const PerturbationFamily f0 = base();
    const PerturbationFamily f1 = base().with(base().sigma(), 0.1);
    for (cplx b : f0.branch_points())
        CHECK(sv_min(f0.jet(b)) < 1e-12);
    std::mt19937_64 rng(5);
    const double smin = affine_min_singular(f1.sigma());
    double c = 1e300;
    for (int i = 0; i < 400; ++i) {
        const cplx p = oracle::random_point(rng, cplx(0, 1));
        bool near_pole = false;
        for (cplx q : f1.poles())
            near_pole = near_pole || kRef.torus_distance(p, q) < 0.02;
        if (near_pole)
            continue;
        if (f1.branch_ball(p) < 0) {
            CHECK(f1.map(p).b == cplx(0.0));
        } else {
            const cplx b = f1.branch_points()[static_cast<std::size_t>(f1.branch_ball(p))];
            if (kRef.torus_distance(p, b) < 2 * f1.delta())
                c = std::min(c, sv_min(f1.jet(p)) / f1.epsilon());
        }
    }
    for (cplx b : f1.branch_points()) {
        const double s = sv_min(f1.jet(b)) / f1.epsilon();
        c = std::min(c, s);
        CHECK(s >= smin * (1 - 1e-9));
    }
    CHECK(c >= smin * (1 - 1e-9));

    const PerturbedSurface inv(f1, true, choose_perturbation_offset(f1));
    CHECK(min_singular_value(inv, 64) > 0.0);
}

TEST_CASE("regularised metric")
{
    const PerturbationFamily& f0 = base();
    const Sym2 flat = f0.flat_metric();
    // Positive definite everywhere at eps = 0, including at poles and branch points.
    std::vector<cplx> pts = f0.poles();
    pts.insert(pts.end(), f0.branch_points().begin(), f0.branch_points().end());
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            pts.push_back(cplx((i + 0.5) / 32, (j + 0.5) / 32));
    for (cplx p : pts) {
        const Sym2 m = f0.regularized_metric(p);
        CHECK(m[0] > 0.0);
        CHECK(m[0] * m[2] - m[1] * m[1] > 0.0);
    }
    // Outside the branch balls the metric is a multiple of A^* g_euc.
    const PerturbationFamily f1 = f0.with(f0.sigma(), 0.1);
    for (cplx p : pts) {
        if (f1.branch_ball(p) >= 0)
            continue;
        const Sym2 m = f1.regularized_metric(p);
        const double w = m[0] / flat[0];
        CHECK(std::abs(m[1] - w * flat[1]) <= 1e-10 * m[0]);
        CHECK(std::abs(m[2] - w * flat[2]) <= 1e-10 * m[2]);
    }
    // Continuity in eps: the sup distance to the eps = 0 field shrinks at least linearly.
    std::vector<double> dist;
    for (double e : {0.2, 0.1, 0.05, 0.025}) {
        const PerturbationFamily fe = f0.with(f0.sigma(), e);
        double m = 0;
        for (cplx p : pts)
            m = std::max(m, sym_dist(fe.regularized_metric(p), f0.regularized_metric(p)));
        dist.push_back(m);
    }
    for (std::size_t i = 1; i < dist.size(); ++i)
        CHECK(dist[i] <= 0.55 * dist[i - 1]);
}

TEST_CASE("uninverted map is minimal outside the annuli")
{
    const PerturbationFamily f = base().with(base().sigma(), 0.1);
    std::mt19937_64 rng(6);
    int checked = 0;
    for (int i = 0; i < 400; ++i) {
        const cplx p = oracle::random_point(rng, cplx(0, 1));
        bool skip = false;
        for (cplx q : f.poles())
            skip = skip || kRef.torus_distance(p, q) < 0.02;
        if (const int j = f.branch_ball(p); j >= 0) {
            const double r = kRef.torus_distance(p, f.branch_points()[static_cast<std::size_t>(j)]);
            skip = skip || r > 2 * f.delta();
        }
        if (skip)
            continue;
        const CurvatureSample c = curvature(f.jet(p));
        CHECK(c.willmore <= 1e-8);
        ++checked;
    }
    CHECK(checked > 300);
}

TEST_CASE("tau")
{
    const PerturbationFamily& f0 = base();
    const cplx s = f0.sigma();
    CHECK(std::abs(tau(f0, 64).estimated_modulus - s) < 1e-3);
    const PerturbationFamily shifted = f0.with(s + cplx(0.01, -0.02), 0.0);
    CHECK(std::abs(tau(shifted, 64).estimated_modulus - shifted.sigma()) < 1e-3);

    std::vector<double> err;
    for (double e : {0.2, 0.1, 0.05})
        err.push_back(std::abs(tau(f0.with(s, e), 64).estimated_modulus - s));
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);

    const double h = 1e-3;
    const PerturbationFamily fe = f0.with(s, 0.1);
    const cplx t0 = tau(fe, 64).estimated_modulus;
    for (cplx dir : {cplx(1, 0), cplx(0, 1)}) {
        const cplx t1 = tau(f0.with(s + h * dir, 0.1), 64).estimated_modulus;
        CHECK(std::abs(t1 - t0) <= 5.0 * h);
    }
}

TEST_CASE("conformal constraint")
{
    const PerturbationFamily& f0 = base();
    ConstraintOptions opt;
    opt.grid_n = 64;
    const ConstraintSolution z = solve_conformal_constraint(f0, 0.0, f0.sigma(), opt);
    CHECK(z.trace.size() == 1);
    CHECK(std::abs(z.sigma - f0.sigma()) == 0.0);

    const ConstraintSolution s = solve_conformal_constraint(f0, 0.05, f0.sigma(), opt);
    CHECK(s.residual <= 1e-3);
    CHECK(std::abs(s.sigma - f0.sigma()) < 0.05);
    const cplx t = tau(f0.with(s.sigma, 0.05), 64).estimated_modulus;
    CHECK(std::abs(t - f0.sigma()) <= 1e-3);
}

TEST_CASE("energy decomposition")
{
    const PerturbationFamily f = base().with(base().sigma(), 0.1);
    const PerturbedSurface inv(f, true, choose_perturbation_offset(f));
    const EnergyReport w = willmore_energy(inv, {128, 2});
    const EnergyReport ex = excess_energy(f, 32, 2);
    CHECK(w.willmore_energy > 8 * kPi);
    CHECK(std::abs(w.willmore_energy - 8 * kPi - ex.willmore_energy)
          <= 10 * (w.error_indicator + ex.error_indicator) + 1e-3 * w.willmore_energy);
}

TEST_CASE("sweep input validation")
{
    try {
        (void)energy_sweep(base(), {0.05, 0.1});
        FAIL("expected InvalidArgument");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
}
