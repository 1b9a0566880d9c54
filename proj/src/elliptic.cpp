#include "willmore/elliptic.hpp"

#include "willmore/errors.hpp"

#include <cmath>
#include <sstream>

namespace willmore {

namespace {

constexpr cplx kI(0.0, 1.0);

} // namespace

EllipticKernel::EllipticKernel(const Lattice& lattice, Options options)
    : lattice_(lattice), options_(options)
{
    exclusion_radius_ = options_.pole_exclusion * lattice_.min_period();

    const auto basis = lattice_.reduced_basis();
    scale_ = basis[0];
    tau_ = basis[1] / basis[0];

    const cplx q = std::exp(2.0 * kPi * kI * tau_);
    const double aq = std::abs(q);
    // |Y_n| <= |q|^(n - 1/2) on the centred parallelogram.
    int rows = 1;
    while (std::pow(aq, rows + 0.5) > 1e-19 && rows < 64)
        ++rows;
    qpow_.resize(static_cast<std::size_t>(rows) + 1);
    qpow_[0] = 1.0;
    for (int n = 1; n <= rows; ++n)
        qpow_[static_cast<std::size_t>(n)] = qpow_[static_cast<std::size_t>(n) - 1] * q;

    // Lambert series for the Eisenstein series E2, E4, E6.
    cplx s1 = 0.0, s3 = 0.0, s5 = 0.0;
    for (int n = 1; n <= 4 * rows; ++n) {
        const cplx qn = std::pow(q, n);
        if (std::abs(qn) < 1e-300)
            break;
        const double dn = n;
        s1 += qn / ((1.0 - qn) * (1.0 - qn));
        s3 += dn * dn * dn * qn / (1.0 - qn);
        s5 += dn * dn * dn * dn * dn * qn / (1.0 - qn);
    }
    const double pi2 = kPi * kPi;
    g2e_ = pi2 / 3.0 - 8.0 * pi2 * s1;
    const cplx g2_tau = (4.0 * pi2 * pi2 / 3.0) * (1.0 + 240.0 * s3);
    const cplx g3_tau = (8.0 * pi2 * pi2 * pi2 / 27.0) * (1.0 - 504.0 * s5);

    const cplx l2 = scale_ * scale_;
    g2_ = g2_tau / (l2 * l2);
    g3_ = g3_tau / (l2 * l2 * l2);

    eta_ = {quasi_period(1.0), quasi_period(lattice_.omega())};

    const auto hp = half_periods();
    for (int i = 0; i < 3; ++i)
        e_[static_cast<std::size_t>(i)] = wp(hp[static_cast<std::size_t>(i)]);
}

std::array<cplx, 3> EllipticKernel::half_periods() const
{
    const cplx w = lattice_.omega();
    return {cplx(0.5, 0.0), 0.5 * (1.0 + w), 0.5 * w};
}

cplx EllipticKernel::quasi_period(cplx gamma) const
{
    const cplx u = gamma / scale_;
    const double n = std::round(u.imag() / tau_.imag());
    const double m = std::round(u.real() - n * tau_.real());
    const cplx eta1 = g2e_;
    const cplx eta2 = tau_ * g2e_ - 2.0 * kPi * kI;
    return (m * eta1 + n * eta2) / scale_;
}

WeierstrassValues EllipticKernel::values(cplx z) const
{
    const cplx u = z / scale_;
    const double n_shift = std::floor(u.imag() / tau_.imag() + 0.5);
    const double m_shift = std::floor(u.real() - n_shift * tau_.real() + 0.5);
    const cplx u0 = u - m_shift - n_shift * tau_;

    if (std::abs(u0 * scale_) < exclusion_radius_) {
        std::ostringstream os;
        os << "z = " << z << " is within " << exclusion_radius_ << " of a lattice point";
        throw Error(ErrorKind::PoleAtInput, os.str());
    }

    const double pi2 = kPi * kPi;
    const cplx su = std::sin(kPi * u0);
    const cplx cu = std::cos(kPi * u0);
    const cplx csc2 = 1.0 / (su * su);
    cplx wp = pi2 * csc2;
    cplx wp1 = -2.0 * pi2 * kPi * cu * csc2 / su;
    cplx zeta = kPi * cu / su;

    const cplx x = std::exp(2.0 * kPi * kI * u0);
    const cplx xinv = 1.0 / x;
    const int rows = static_cast<int>(qpow_.size()) - 1;
    for (int n = 1; n <= rows; ++n) {
        const cplx qn = qpow_[static_cast<std::size_t>(n)];
        // n >= 1: Y = exp(-2 pi i (u - n tau)), s = -1
        {
            const cplx y = xinv * qn;
            const cplx om = 1.0 - y;
            const cplx om2 = om * om;
            wp += -4.0 * pi2 * y / om2;
            wp1 += (-2.0 * kPi * kI) * (-4.0 * pi2) * y * (1.0 + y) / (om2 * om);
            zeta += 2.0 * kPi * kI * y / om;
        }
        // n <= -1: Y = exp(2 pi i (u + n tau)), s = +1
        {
            const cplx y = x * qn;
            const cplx om = 1.0 - y;
            const cplx om2 = om * om;
            wp += -4.0 * pi2 * y / om2;
            wp1 += (2.0 * kPi * kI) * (-4.0 * pi2) * y * (1.0 + y) / (om2 * om);
            zeta += -2.0 * kPi * kI * y / om;
        }
    }
    wp -= g2e_;
    zeta += u0 * g2e_;
    zeta += m_shift * g2e_ + n_shift * (tau_ * g2e_ - 2.0 * kPi * kI);

    const cplx l = scale_;
    return {zeta / l, wp / (l * l), wp1 / (l * l * l)};
}

} // namespace willmore
