#include "oracles.hpp"

#include <willmore/analysis.hpp>
#include <willmore/errors.hpp>

#include <doctest.h>

using namespace willmore;

namespace {

const cplx I(0.0, 1.0);

std::shared_ptr<const EllipticKernel> kernel_at(cplx omega)
{
    return std::make_shared<const EllipticKernel>(Lattice(omega));
}

FunctionBasis generic_basis()
{
    return FunctionBasis(kernel_at(cplx(0.5, 1.2)), cplx(0.21, 0.33), cplx(0.64, 0.87));
}

C4 random_c4(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    C4 v;
    for (cplx& x : v)
        x = cplx(n(rng), n(rng));
    return v;
}

cplx bilinear(const C4& x, const C4& y)
{
    cplx s = 0.0;
    for (int j = 0; j < 4; ++j)
        s += x[j] * y[j];
    return s;
}

cplx conformality_fn(const FunctionBasis& fb, const C4& a, const C4& b, const C4& c, const C4& d, cplx z)
{
    const auto g = fb.generators(z);
    C4 fz;
    for (int j = 0; j < 4; ++j)
        fz[j] = a[j] * g[0] + b[j] * g[1] + c[j] * g[2] + d[j];
    return bilinear(fz, fz);
}

} // namespace

TEST_CASE("basis elements")
{
    const FunctionBasis fb = generic_basis();
    const EllipticKernel& k = fb.kernel();
    // wp_l has a simple zero at p_{3-l}.
    const double h = 1e-5;
    const double slope = std::abs(k.wp_prime(fb.p1() - fb.p2()));
    CHECK(std::abs(fb.generators(fb.p2() + h)[0]) < 1.01 * slope * h);
    CHECK(std::abs(fb.generators(fb.p1() + h)[1]) < 1.01 * slope * h);
    CHECK(std::abs(k.wp(fb.p2() - fb.p1()) - k.wp(fb.p1() - fb.p2())) < 1e-12);

    std::mt19937_64 rng(1);
    for (cplx z : fb.sample_points(20, 3)) {
        const auto g = fb.generators(z);
        for (cplx period : {cplx(1.0), k.lattice().omega()}) {
            const auto h = fb.generators(z + period);
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(h[j] - g[j]) < 1e-10 * (1 + std::abs(g[j])));
        }
        // Against truncated lattice sums.
        const auto s1 = oracle::lattice_sums(k.lattice().omega(), z - fb.p1());
        const auto s2 = oracle::lattice_sums(k.lattice().omega(), z - fb.p2());
        const auto q1 = oracle::lattice_sums(k.lattice().omega(), fb.p2() - fb.p1());
        CHECK(std::abs(g[0] - (s1.wp - q1.wp)) < 1e-8 * (1 + std::abs(g[0])));
        CHECK(std::abs(g[2] - (s1.zeta - s2.zeta)) < 1e-8 * (1 + std::abs(g[2])));
    }

    SUBCASE("fold relations hold pointwise")
    {
        const auto f = fb.fold_constants();
        for (cplx z : fb.sample_points(50, 4)) {
            const auto e = fb.elements(z);
            const double s = 1 + std::abs(e[FunctionBasis::WSq]) + std::abs(e[FunctionBasis::P1P2]);
            CHECK(std::abs(e[FunctionBasis::WSq] - (e[FunctionBasis::P1] + e[FunctionBasis::P2] + f[0] * e[FunctionBasis::W] + f[1]))
                  < 1e-10 * s);
            CHECK(std::abs(e[FunctionBasis::P1P2] - (f[2] * e[FunctionBasis::W] + f[3])) < 1e-10 * s);
        }
    }

    SUBCASE("coincident poles")
    {
        try {
            (void)FunctionBasis(kernel_at(I), cplx(0.2, 0.2), cplx(1.2, 0.2));
            FAIL("expected IllConditionedBasis");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::IllConditionedBasis);
        }
    }
}

TEST_CASE("gram matrix")
{
    for (cplx omega : {I, cplx(0.5, 1.2), std::polar(1.0, kPi / 3)}) {
        const FunctionBasis fb(kernel_at(omega), cplx(0.13, 0.4) * omega + 0.1, cplx(0.6, 0.2) + 0.55 * omega);
        const GramReport r = gram_report(fb, true, 200, 7);
        CHECK(r.rank == 8);
        CHECK(r.condition < 1e10);
        const GramReport full = gram_report(fb, false, 200, 7);
        CHECK(full.rank == 8);
        CHECK(full.singular_values[8] < 1e-10 * full.singular_values[0]);
    }
}

TEST_CASE("expand_in_basis")
{
    const FunctionBasis fb = generic_basis();

    SUBCASE("conformality expansion")
    {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 5; ++trial) {
            const C4 a = random_c4(rng), b = random_c4(rng), c = random_c4(rng), d = random_c4(rng);
            const Expansion e = expand_in_basis([&](cplx z) { return conformality_fn(fb, a, b, c, d, z); }, fb);
            const std::array<cplx, FunctionBasis::kSize> full = {
                bilinear(a, a),       bilinear(b, b),       2.0 * bilinear(a, c), 2.0 * bilinear(b, c),
                2.0 * bilinear(a, d), 2.0 * bilinear(b, d), bilinear(c, c),       2.0 * bilinear(a, b),
                2.0 * bilinear(c, d), bilinear(d, d)};
            const auto expect = fb.fold(full);
            // wp_l slots carry the w^2 leading term: 2<a,d> + <c,c>.
            CHECK(std::abs(expect[4] - (full[4] + full[6])) < 1e-14);
            for (int j = 0; j < FunctionBasis::kReducedSize; ++j)
                CHECK(std::abs(e.reduced[j] - expect[j]) < 1e-6 * (1 + std::abs(expect[j])));
            CHECK(e.residual < 1e-10);
            CHECK(e.coefficients[FunctionBasis::WSq] == cplx(0.0));
            CHECK(e.coefficients[FunctionBasis::P1P2] == cplx(0.0));
        }
    }
    SUBCASE("basis element")
    {
        const Expansion e = expand_in_basis([&](cplx z) { return fb.elements(z)[FunctionBasis::P1Sq]; }, fb);
        CHECK(std::abs(e.coefficients[FunctionBasis::P1Sq] - 1.0) < 1e-8);
        for (int j = 1; j < FunctionBasis::kSize; ++j)
            CHECK(std::abs(e.coefficients[j]) < 1e-8);
    }
    SUBCASE("zero")
    {
        const Expansion e = expand_in_basis([](cplx) { return cplx(0.0); }, fb);
        for (cplx x : e.coefficients)
            CHECK(std::abs(x) <= 1e-10);
        CHECK(e.residual == 0.0);
    }
    SUBCASE("round trip")
    {
        std::mt19937_64 rng(12);
        std::normal_distribution<double> n(0.0, 1.0);
        std::array<cplx, FunctionBasis::kReducedSize> c;
        for (cplx& x : c)
            x = cplx(n(rng), n(rng));
        const auto idx = FunctionBasis::reduced_elements();
        auto fn = [&](cplx z) {
            const auto e = fb.elements(z);
            cplx s = 0.0;
            for (int j = 0; j < FunctionBasis::kReducedSize; ++j)
                s += c[j] * e[idx[j]];
            return s;
        };
        const Expansion e = expand_in_basis(fn, fb, 64, 5);
        for (int j = 0; j < FunctionBasis::kReducedSize; ++j)
            CHECK(std::abs(e.reduced[j] - c[j]) < 1e-6);
    }
    SUBCASE("too few samples")
    {
        CHECK_THROWS_AS(expand_in_basis([](cplx) { return cplx(1.0); }, fb, 16), Error);
    }
}

TEST_CASE("conformality system")
{
    const FunctionBasis fb = generic_basis();
    const C4 a = {1.0, -I, 0.0, 0.0};

    SUBCASE("satisfying set from the <a,b> = 0 case")
    {
        const cplx beta(0.7, -0.3), gamma(-0.4, 1.1), d1(0.25, 0.5), d3(-1.3, 0.2);
        const C4 b = {beta, -I * beta, gamma, -I * gamma};
        const C4 c = {0.0, 0.0, 0.0, 0.0};
        const C4 d = {d1, -I * d1, d3, -I * d3};
        const ConformalityReport r = verify_conformality_system(a, b, c, d, fb);
        CHECK(r.sampled_residual <= 1e-8);
        CHECK(r.equations_hold);
        CHECK(r.conformal);
        CHECK(r.consistent);
        CHECK(std::abs(r.system.ab) < 1e-15);
    }
    SUBCASE("violating sets")
    {
        // <a,a> = 1.
        const C4 a1 = {1.0, 0.0, 0.0, 0.0};
        const C4 z = {0.0, 0.0, 0.0, 0.0};
        const ConformalityReport r1 = verify_conformality_system(a1, z, z, z, fb);
        CHECK(r1.sampled_residual >= 1e-2);
        CHECK_FALSE(r1.equations_hold);
        CHECK(r1.consistent);

        // Only 2<a,d> + <c,c> and 2<b,d> + <c,c> with unit margin, plus the lower order remainder.
        const C4 d = {0.5, 0.5 * I, 0.0, 0.0};
        const ConformalityReport r2 = verify_conformality_system(a, z, z, d, fb);
        CHECK(std::abs(std::abs(r2.system.ad) - 1.0) < 1e-15);
        CHECK(r2.sampled_residual >= 1e-2 * r2.max_equation);
        CHECK(r2.consistent);

        std::mt19937_64 rng(21);
        for (int t = 0; t < 10; ++t) {
            const C4 ra = random_c4(rng), rb = random_c4(rng), rc = random_c4(rng), rd = random_c4(rng);
            const ConformalityReport r = verify_conformality_system(ra, rb, rc, rd, fb);
            CHECK(r.sampled_residual >= 1e-2);
            CHECK(r.consistent);
        }
    }
    SUBCASE("c = e4 with the leading equations satisfied")
    {
        // <a,c> = <b,c> = 0 and 2<a,d> + |c|^2 = 2<b,d> + |c|^2 = 0 with a = e1 - i e2, b = conj(a).
        const C4 b = {1.0, I, 0.0, 0.0};
        const C4 c = {0.0, 0.0, 0.0, 1.0};
        const C4 d = {-0.5, 0.0, 0.0, 0.0};
        const ConformalityReport r = verify_conformality_system(a, b, c, d, fb);
        CHECK(r.equations[0].value < 1e-15);
        CHECK(r.equations[2].value < 1e-15);
        CHECK(r.equations[4].value < 1e-15);
        CHECK(r.equations[5].value < 1e-15);
        // The remaining reduced coefficients decide conformality.
        CHECK(r.consistent);
    }
}

TEST_CASE("branch points force a degenerate differential when <a,b> = 0")
{
    const FunctionBasis fb = generic_basis();
    const BranchWitness w = ab_zero_witness(fb, cplx(1.0, 0.2), cplx(-0.3, 0.8));
    REQUIRE(w.branch_points.size() == 4);
    CHECK(w.max_abs_fz <= 1e-6);
    CHECK(w.min_abs_fz_elsewhere > 1e-3);
    // Zeros of wp(. - p2) - wp(. - p1) are the midpoints (p1 + p2) / 2 plus half periods.
    const Lattice& lat = fb.kernel().lattice();
    const cplx o = lat.omega();
    for (cplx h : {cplx(0.0), cplx(0.5), 0.5 * o, 0.5 * (1.0 + o)}) {
        const cplx target = 0.5 * (fb.p1() + fb.p2()) + h;
        double best = 1;
        for (cplx b : w.branch_points)
            best = std::min(best, lat.torus_distance(b, target));
        CHECK(best < 1e-8);
    }
}

TEST_CASE("branch system")
{
    const auto k = kernel_at(cplx(0.5, 1.2));
    const C4 a = {1.0, -I, 0.0, 0.0};
    const C4 z = {0.0, 0.0, 0.0, 0.0};

    SUBCASE("double cover")
    {
        const BranchSystemReport r = verify_branch_system(a, z, z, k);
        CHECK(r.sampled_residual <= 1e-8);
        CHECK(r.equations_hold);
        CHECK(r.consistent);
        CHECK(r.double_cover);
        CHECK(r.degree == 2);
        REQUIRE(r.branch_points.size() == 4);
        const Lattice& lat = k->lattice();
        for (cplx h : {cplx(0.0), cplx(0.5), 0.5 * lat.omega(), 0.5 * (1.0 + lat.omega())}) {
            double best = 1;
            for (const BranchPoint& b : r.branch_points)
                best = std::min(best, lat.torus_distance(b.location, h));
            CHECK(best < 1e-8);
        }
    }
    SUBCASE("b3 != 0 violating <b,d> = 0")
    {
        const C4 b = {0.0, 0.0, 1.0, -I};
        const C4 d = {0.0, 0.0, 1.0, 0.0};
        const BranchSystemReport r = verify_branch_system(a, b, d, k);
        CHECK(r.pairings[4].value == doctest::Approx(1.0));
        CHECK(r.sampled_residual >= 1e-2);
        CHECK_FALSE(r.conformal);
        CHECK(r.consistent);
    }
    SUBCASE("conformal but not the derivative of a doubly periodic map")
    {
        std::mt19937_64 rng(31);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int t = 0; t < 5; ++t) {
            const cplx beta(n(rng), n(rng)), delta(n(rng), n(rng));
            const C4 b = {beta, -I * beta, 0.0, 0.0};
            const C4 d = {delta, -I * delta, 0.0, 0.0};
            const BranchSystemReport r = verify_branch_system(a, b, d, k);
            CHECK(r.conformal);
            CHECK(r.equations_hold);
            CHECK(r.period_defect > 1e-3);
            CHECK_FALSE(r.double_cover);
        }
    }
    SUBCASE("a = 0")
    {
        CHECK_THROWS_AS(verify_branch_system(z, a, z, k), Error);
    }
}

TEST_CASE("period integrals")
{
    for (cplx omega : {I, cplx(0.5, 1.2), std::polar(1.0, kPi / 3)}) {
        const FunctionBasis fb(kernel_at(omega), cplx(0.3, 0.0) + 0.2 * omega, cplx(0.8, 0.0) + 0.7 * omega);
        const EllipticKernel& k = fb.kernel();
        std::array<cplx, 2> sig;
        for (int kk = 1; kk <= 2; ++kk) {
            const PeriodReport r = period_integrals(fb, kk);
            const cplx om = kk == 1 ? cplx(1.0) : omega;
            const cplx closed = -k.quasi_periods()[kk - 1] - k.wp(fb.p1() - fb.p2()) * om;
            CHECK(r.l_mismatch <= 1e-8);
            CHECK(std::abs(r.sigma - closed) <= 1e-8);
            // Other segments in the same homotopy class.
            const cplx across = kk == 1 ? omega : cplx(1.0);
            for (double shift : {0.013, -0.021, 0.37}) {
                const PeriodReport s = period_integrals(fb, kk, r.xi + shift * om + 0.01 * shift * across);
                CHECK(std::abs(s.sigma - r.sigma) <= 1e-8);
            }
            sig[static_cast<std::size_t>(kk - 1)] = r.sigma;
        }
        // a4 + b4 = 0 forces d4 = 0.
        CHECK(std::abs(forced_d(0.0, sig[0], sig[1], omega)) == 0.0);
        const cplx s(0.4, -1.3);
        const cplx d = forced_d(s, sig[0], sig[1], omega);
        CHECK(std::abs((s * sig[0] + d).real()) < 1e-12);
        CHECK(std::abs((s * sig[1] + d * omega).real()) < 1e-12);
    }
    SUBCASE("segment through a pole")
    {
        const FunctionBasis fb = generic_basis();
        try {
            (void)period_integrals(fb, 1, fb.p1() - 0.5);
            FAIL("expected PathHitsPole");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::PathHitsPole);
        }
    }
}

TEST_CASE("pole order audit")
{
    const FunctionBasis fb = generic_basis();
    const auto audit = pole_order_audit(fb);
    REQUIRE(audit.size() == FunctionBasis::kSize);
    for (const PoleOrderEntry& e : audit) {
        INFO(e.element);
        CHECK(e.matches);
    }
    // w^2 and wp_l have leading term 1 / (z - p_l)^2.
    CHECK(std::abs(audit[FunctionBasis::WSq].leading[0] - 1.0) < 1e-3);
    CHECK(std::abs(audit[FunctionBasis::WSq].leading[1] - 1.0) < 1e-3);
    CHECK(std::abs(audit[FunctionBasis::P1].leading[0] - 1.0) < 1e-3);
    CHECK(std::abs(audit[FunctionBasis::P2].leading[1] - 1.0) < 1e-3);
    CHECK(std::abs(audit[FunctionBasis::P1Sq].leading[0] - 1.0) < 1e-3);
}
