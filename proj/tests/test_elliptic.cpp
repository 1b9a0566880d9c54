#include "oracles.hpp"

#include <willmore/elliptic.hpp>
#include <willmore/errors.hpp>

#include <doctest.h>

using namespace willmore;

namespace {

const cplx kOmegas[] = {cplx(0, 1), cplx(0.5, 1.2), std::polar(1.0, kPi / 3.0), cplx(0.3, 1.1), cplx(0.1, 0.2)};

double rel(cplx a, cplx b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

} // namespace

TEST_CASE("parity and periodicity")
{
    for (cplx omega : kOmegas) {
        EllipticKernel k{Lattice(omega)};
        std::mt19937_64 rng(1);
        for (int i = 0; i < 1000; ++i) {
            const cplx z = oracle::random_point(rng, omega) * 2.0 - (1.0 + omega);
            if (std::abs(Lattice(omega).nearest_difference(z)) < 0.05 * k.lattice().min_period())
                continue;
            const auto v = k.values(z);
            const auto vm = k.values(-z);
            CHECK(rel(vm.wp, v.wp) < 1e-12);
            CHECK(rel(vm.wp1, -v.wp1) < 1e-12);
            CHECK(rel(vm.zeta, -v.zeta) < 1e-12);
            for (cplx g : {cplx(1.0, 0.0), omega}) {
                const auto vs = k.values(z + g);
                CHECK(std::abs(vs.wp - v.wp) <= 1e-10 * (1 + std::abs(v.wp)));
                CHECK(std::abs(vs.wp1 - v.wp1) <= 1e-10 * (1 + std::abs(v.wp1)));
            }
            const auto eta = k.quasi_periods();
            CHECK(std::abs(k.zeta(z + 1.0) - v.zeta - eta[0]) < 1e-10 * (1 + std::abs(eta[0])));
            CHECK(std::abs(k.zeta(z + omega) - v.zeta - eta[1]) < 1e-10 * (1 + std::abs(eta[1])));
        }
    }
}

TEST_CASE("differential equation and Legendre relation")
{
    for (cplx omega : kOmegas) {
        EllipticKernel k{Lattice(omega)};
        const auto eta = k.quasi_periods();
        CHECK(std::abs(eta[0] * omega - eta[1] - cplx(0, 2 * kPi)) < 1e-10);
        CHECK(std::abs(k.discriminant()) > 1e-6);
        std::mt19937_64 rng(2);
        for (int i = 0; i < 500; ++i) {
            const cplx z = oracle::random_point(rng, omega);
            if (std::abs(k.lattice().nearest_difference(z)) < 0.05 * k.lattice().min_period())
                continue;
            const auto v = k.values(z);
            const cplx rhs = 4.0 * v.wp * v.wp * v.wp - k.g2() * v.wp - k.g3();
            // Relative to the size of the individual terms of the cubic.
            const double scale = std::norm(v.wp1) + 4.0 * std::pow(std::abs(v.wp), 3)
                                 + std::abs(k.g2() * v.wp) + std::abs(k.g3());
            CHECK(std::abs(v.wp1 * v.wp1 - rhs) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("derivatives match finite differences")
{
    EllipticKernel k{Lattice(cplx(0.5, 1.2))};
    const double h = 1e-5;
    for (cplx z : {cplx(0.3, 0.2), cplx(-0.2, 0.7), cplx(0.45, 0.1)}) {
        const cplx dzeta = (k.zeta(z + h) - k.zeta(z - h)) / (2 * h);
        const cplx dwp = (k.wp(z + h) - k.wp(z - h)) / (2 * h);
        CHECK(rel(dzeta, -k.wp(z)) < 1e-8);
        CHECK(rel(dwp, k.wp_prime(z)) < 1e-8);
        const cplx d2 = (k.wp_prime(z + h) - k.wp_prime(z - h)) / (2 * h);
        CHECK(rel(d2, k.wp_second(k.wp(z))) < 1e-7);
    }
}

TEST_CASE("symmetric lattices")
{
    EllipticKernel sq{Lattice(cplx(0, 1))};
    CHECK(std::abs(sq.g3()) < 1e-10);
    const auto e = sq.half_period_values();
    CHECK(std::abs(e[1]) < 1e-10);
    CHECK(std::abs(e[0] + e[2]) < 1e-10);
    // g2(i) = 60 G4(i) with G4(i) = Gamma(1/4)^8 / (960 pi^2).
    const double g4 = std::pow(std::tgamma(0.25), 8) / (960.0 * kPi * kPi);
    CHECK(std::abs(sq.g2() - 60.0 * g4) < 1e-10 * 60.0 * g4);

    EllipticKernel hex{Lattice(std::polar(1.0, kPi / 3.0))};
    CHECK(std::abs(hex.g2()) < 1e-10);
    // g3(rho) = 140 G6 with G6 = Gamma(1/3)^18 / (8960 pi^6).
    const double g6 = std::pow(std::tgamma(1.0 / 3.0), 18) / (8960.0 * std::pow(kPi, 6));
    CHECK(std::abs(std::abs(hex.g3()) - 140.0 * g6) < 1e-10 * 140.0 * g6);
}

TEST_CASE("invariants agree with Eisenstein summation")
{
    const cplx omega(0.5, 1.2);
    EllipticKernel k{Lattice(omega)};
    const auto a = oracle::eisenstein(omega, 1000);
    const auto b = oracle::eisenstein(omega, 2000);
    // Box tails decay like N^-2.
    const cplx g2 = (4.0 * b.first - a.first) / 3.0;
    const cplx g3 = (4.0 * b.second - a.second) / 3.0;
    CHECK(std::abs(k.g2() - g2) < 1e-8 * std::abs(g2));
    CHECK(std::abs(k.g3() - g3) < 1e-8 * std::abs(g3));
    CHECK(std::abs(k.g2() - b.first) < 1e-6 * std::abs(g2));
}

TEST_CASE("half-period values")
{
    for (cplx omega : kOmegas) {
        EllipticKernel k{Lattice(omega)};
        const auto e = k.half_period_values();
        const double scale = std::abs(e[0]) + std::abs(e[1]) + std::abs(e[2]);
        CHECK(std::abs(e[0] + e[1] + e[2]) < 1e-12 * scale);
        CHECK(std::abs(e[0] - e[1]) > 1e-6);
        CHECK(std::abs(e[1] - e[2]) > 1e-6);
        CHECK(std::abs(e[0] - e[2]) > 1e-6);
        for (cplx hp : k.half_periods())
            CHECK(std::abs(k.wp_prime(hp)) < 1e-9 * (1 + scale));
        const auto roots = oracle::cubic_roots(k.g2(), k.g3());
        for (cplx ei : e) {
            double best = 1e300;
            for (cplx r : roots)
                best = std::min(best, std::abs(r - ei));
            CHECK(best < 1e-10 * (1 + scale));
        }
    }
}

TEST_CASE("Laurent behaviour and pole exclusion")
{
    EllipticKernel k{Lattice(cplx(0.5, 1.2))};
    const cplx z(1e-3, 0.0);
    CHECK(std::abs(z * z * k.wp(z) - 1.0) < 1e-6);
    CHECK(std::abs(z * k.zeta(z) - 1.0) < 1e-6);
    try {
        (void)k.wp(cplx(1.0, 0.0) + cplx(0.5, 1.2) + 1e-9);
        FAIL("expected PoleAtInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::PoleAtInput);
    }
}

TEST_CASE("oracle agreement on a 20x20 grid")
{
    for (cplx omega : {cplx(0.5, 1.2), cplx(0, 1)}) {
        EllipticKernel k{Lattice(omega)};
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 20; ++j) {
                const cplx z = (i + 0.5) / 20.0 + (j + 0.5) / 20.0 * omega;
                const auto ref = oracle::lattice_sums(omega, z, 40);
                const auto v = k.values(z);
                worst = std::max({worst, rel(v.wp, ref.wp), rel(v.zeta, ref.zeta), rel(v.wp1, ref.wp1)});
            }
        }
        MESSAGE("worst oracle deviation " << worst);
        CHECK(worst < 1e-8);
    }
}
