#include "willmore/meromorphic.hpp"

#include "willmore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace willmore {

namespace {

constexpr cplx kI(0.0, 1.0);

// [zeta, -wp, -wp', -wp''] style jets of the three primitives at one shift.
struct PrimitiveJets {
    Jet3 zeta{}, wp{}, wp1{};
};

PrimitiveJets primitive_jets(const EllipticKernel& k, cplx z, int max_order)
{
    const WeierstrassValues v = k.values(z);
    PrimitiveJets j;
    const cplx wp2 = max_order >= 1 ? k.wp_second(v.wp) : cplx(0.0);
    const cplx wp3 = max_order >= 2 ? 12.0 * v.wp * v.wp1 : cplx(0.0);
    const cplx wp4 = max_order >= 3 ? 12.0 * (v.wp1 * v.wp1 + v.wp * wp2) : cplx(0.0);
    j.zeta = {v.zeta, -v.wp, -v.wp1, -wp2};
    j.wp = {v.wp, v.wp1, wp2, wp3};
    j.wp1 = {v.wp1, wp2, wp3, wp4};
    return j;
}

std::string describe(cplx z)
{
    std::ostringstream os;
    os << z;
    return os.str();
}

// Distance from z to the boundary of the period cell offset by xi, in length units.
double boundary_distance(const Lattice& lat, cplx xi, cplx z)
{
    const cplx w = lat.omega();
    auto [s, t] = lat.coordinates(z - xi);
    s -= std::floor(s);
    t -= std::floor(t);
    const double ds = std::min(s, 1.0 - s) * w.imag() / std::abs(w);
    const double dt = std::min(t, 1.0 - t) * w.imag();
    return std::min(ds, dt);
}

// Reduction that maps points within rounding of the far edges back to the near edges,
// so that points numerically at 0 do not land at 1 - 1e-13.
cplx snap_reduce(const Lattice& lat, cplx z)
{
    cplx r = lat.reduce(z);
    auto [s, t] = lat.coordinates(r);
    if (s > 1.0 - 1e-9)
        r -= 1.0;
    if (t > 1.0 - 1e-9)
        r -= lat.omega();
    return r;
}

struct ZeroOnContour {};

class WindingCounter {
public:
    WindingCounter(const std::function<std::array<cplx, 2>(cplx)>& g, double scale) : g_(g), scale_(scale) {}

    cplx value(cplx z) const
    {
        const cplx v = g_(z)[0];
        if (!(std::abs(v) > 1e-13 * scale_) || !std::isfinite(std::abs(v)))
            throw ZeroOnContour{};
        return v;
    }

    // Accumulated argument change of g along the segment a -> b.
    double segment(cplx a, cplx b, int pieces = 8) const
    {
        double total = 0.0;
        cplx za = a;
        cplx ga = value(a);
        for (int k = 1; k <= pieces; ++k) {
            const cplx zb = a + (b - a) * (double(k) / pieces);
            const cplx gb = value(zb);
            total += refine(za, zb, ga, gb, 0);
            za = zb;
            ga = gb;
        }
        return total;
    }

private:
    double refine(cplx za, cplx zb, cplx ga, cplx gb, int depth) const
    {
        const double d = std::arg(gb / ga);
        if (std::abs(d) < kPi / 4.0 || depth >= 24)
            return d;
        const cplx zm = 0.5 * (za + zb);
        const cplx gm = value(zm);
        return refine(za, zm, ga, gm, depth + 1) + refine(zm, zb, gm, gb, depth + 1);
    }

    const std::function<std::array<cplx, 2>(cplx)>& g_;
    double scale_;
};

} // namespace

Jet3 LaurentChart::regular_jet(cplx w) const
{
    cplx p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
    for (auto it = taylor.rbegin(); it != taylor.rend(); ++it) {
        p3 = p3 * w + 3.0 * p2;
        p2 = p2 * w + 2.0 * p1;
        p1 = p1 * w + p0;
        p0 = p0 * w + *it;
    }
    return {p0, p1, p2, p3};
}

MeromorphicBlock::MeromorphicBlock(std::shared_ptr<const EllipticKernel> kernel, std::vector<Term> terms)
    : kernel_(std::move(kernel)), terms_(std::move(terms))
{
    if (!kernel_)
        throw Error(ErrorKind::InvalidArgument, "block without kernel");
    auto shift_index = [this](cplx p) {
        for (std::size_t i = 0; i < shifts_.size(); ++i)
            if (shifts_[i] == p)
                return static_cast<int>(i);
        shifts_.push_back(p);
        return static_cast<int>(shifts_.size()) - 1;
    };
    for (const Term& t : terms_) {
        std::array<int, 2> idx{-1, -1};
        switch (t.kind) {
        case PrimitiveKind::ZetaDiff:
            if (kernel_->lattice().torus_distance(t.p, t.q) < 1e-9)
                throw Error(ErrorKind::DuplicatePoles, "zeta difference with coincident poles at " + describe(t.p));
            idx = {shift_index(t.p), shift_index(t.q)};
            break;
        case PrimitiveKind::WpTranslate:
        case PrimitiveKind::WpPrimeTranslate:
            idx = {shift_index(t.p), -1};
            break;
        case PrimitiveKind::Constant:
            break;
        }
        term_shift_.push_back(idx);
    }
    build_ledger();
}

void MeromorphicBlock::build_ledger()
{
    const Lattice& lat = kernel_->lattice();
    double scale = 0.0;
    for (const Term& t : terms_)
        if (t.kind != PrimitiveKind::Constant)
            scale = std::max(scale, std::abs(t.coef));

    std::vector<PoleDatum> raw;
    auto add = [&](cplx p, int index, cplx c) {
        const cplx loc = lat.reduce(p);
        PoleDatum* target = nullptr;
        for (auto& d : raw)
            if (lat.torus_distance(d.location, loc) < 1e-9)
                target = &d;
        if (!target) {
            raw.push_back({loc, 1, std::vector<cplx>(3, 0.0)});
            target = &raw.back();
        }
        target->principal[static_cast<std::size_t>(index)] += c;
    };
    for (const Term& t : terms_) {
        switch (t.kind) {
        case PrimitiveKind::ZetaDiff:
            add(t.p, 0, t.coef);
            add(t.q, 0, -t.coef);
            break;
        case PrimitiveKind::WpTranslate:
            add(t.p, 1, t.coef);
            break;
        case PrimitiveKind::WpPrimeTranslate:
            add(t.p, 2, -2.0 * t.coef);
            break;
        case PrimitiveKind::Constant:
            break;
        }
    }
    poles_.clear();
    for (auto& d : raw) {
        int order = 0;
        for (int j = 0; j < 3; ++j)
            if (std::abs(d.principal[static_cast<std::size_t>(j)]) > 1e-13 * scale)
                order = j + 1;
        if (order == 0)
            continue;
        d.principal.resize(static_cast<std::size_t>(order));
        d.order = order;
        poles_.push_back(d);
    }
    std::sort(poles_.begin(), poles_.end(), [](const PoleDatum& a, const PoleDatum& b) {
        return a.location.real() != b.location.real() ? a.location.real() < b.location.real()
                                                       : a.location.imag() < b.location.imag();
    });
}

int MeromorphicBlock::degree() const noexcept
{
    int d = 0;
    for (const auto& p : poles_)
        d += p.order;
    return d;
}

Jet3 MeromorphicBlock::jet(cplx z, int max_order) const
{
    std::vector<PrimitiveJets> at;
    at.reserve(shifts_.size());
    for (cplx s : shifts_)
        at.push_back(primitive_jets(*kernel_, z - s, max_order));
    Jet3 out{};
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        const Term& t = terms_[i];
        const auto& idx = term_shift_[i];
        switch (t.kind) {
        case PrimitiveKind::ZetaDiff: {
            const auto& a = at[static_cast<std::size_t>(idx[0])].zeta;
            const auto& b = at[static_cast<std::size_t>(idx[1])].zeta;
            for (int j = 0; j < 4; ++j)
                out[static_cast<std::size_t>(j)] += t.coef * (a[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]);
            break;
        }
        case PrimitiveKind::WpTranslate:
        case PrimitiveKind::WpPrimeTranslate: {
            const auto& pj = at[static_cast<std::size_t>(idx[0])];
            const auto& a = t.kind == PrimitiveKind::WpTranslate ? pj.wp : pj.wp1;
            for (int j = 0; j < 4; ++j)
                out[static_cast<std::size_t>(j)] += t.coef * a[static_cast<std::size_t>(j)];
            break;
        }
        case PrimitiveKind::Constant:
            out[0] += t.coef;
            break;
        }
    }
    for (int j = max_order + 1; j < 4; ++j)
        out[static_cast<std::size_t>(j)] = 0.0;
    return out;
}

int MeromorphicBlock::pole_index(cplx z, double tol) const
{
    for (std::size_t i = 0; i < poles_.size(); ++i)
        if (kernel_->lattice().torus_distance(poles_[i].location, z) < tol)
            return static_cast<int>(i);
    return -1;
}

LaurentChart MeromorphicBlock::laurent_chart(std::size_t pole, double radius, int samples) const
{
    return local_chart(poles_.at(pole).location, radius, samples);
}

LaurentChart MeromorphicBlock::local_chart(cplx center, double radius, int samples) const
{
    LaurentChart chart;
    chart.center = center;
    chart.radius = radius;
    const int idx = pole_index(center);
    if (idx >= 0)
        chart.principal = poles_[static_cast<std::size_t>(idx)].principal;
    const PoleDatum pd{center, 0, chart.principal};
    const double rho = 2.0 * radius;
    const auto m = static_cast<std::size_t>(samples);
    std::vector<cplx> r(m);
    for (std::size_t j = 0; j < m; ++j) {
        const cplx e = std::polar(1.0, 2.0 * kPi * double(j) / double(samples));
        const cplx w = rho * e;
        cplx principal = 0.0;
        cplx winv = 1.0 / w;
        cplx pw = winv;
        for (cplx c : pd.principal) {
            principal += c * pw;
            pw *= winv;
        }
        r[j] = evaluate(chart.center + w) - principal;
    }
    chart.taylor.assign(m, 0.0);
    for (std::size_t n = 0; n < m; ++n) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            acc += r[j] * std::polar(1.0, -2.0 * kPi * double((n * j) % m) / double(samples));
        chart.taylor[n] = acc / (double(samples) * std::pow(rho, double(n)));
    }
    return chart;
}

MeromorphicBlock MeromorphicBlock::translated(cplx v) const
{
    std::vector<Term> t = terms_;
    for (Term& term : t) {
        term.p += v;
        term.q += v;
    }
    return MeromorphicBlock(kernel_, std::move(t));
}

MeromorphicBlock MeromorphicBlock::affine(cplx s, cplx t) const
{
    std::vector<Term> out = terms_;
    bool has_constant = false;
    for (Term& term : out) {
        term.coef *= s;
        if (term.kind == PrimitiveKind::Constant && !has_constant) {
            term.coef += t;
            has_constant = true;
        }
    }
    if (!has_constant && t != cplx(0.0))
        out.push_back({PrimitiveKind::Constant, t, 0.0, 0.0});
    return MeromorphicBlock(kernel_, std::move(out));
}

MeromorphicBlock make_simple_pole_function(std::shared_ptr<const EllipticKernel> kernel,
                                           const std::vector<std::pair<cplx, cplx>>& poles)
{
    if (poles.size() < 2)
        throw Error(ErrorKind::InvalidArgument, "an elliptic function needs at least two simple poles");
    cplx sum = 0.0;
    double mag = 0.0;
    for (const auto& [p, r] : poles) {
        sum += r;
        mag += std::abs(r);
    }
    if (std::abs(sum) > 1e-10 * mag) {
        std::ostringstream os;
        os << "residues sum to " << sum;
        throw Error(ErrorKind::ResiduesDoNotSumToZero, os.str());
    }
    for (std::size_t i = 0; i < poles.size(); ++i)
        for (std::size_t j = i + 1; j < poles.size(); ++j)
            if (kernel->lattice().torus_distance(poles[i].first, poles[j].first) < 1e-9)
                throw Error(ErrorKind::DuplicatePoles, "poles " + describe(poles[i].first) + " and "
                                                           + describe(poles[j].first) + " coincide");
    std::vector<Term> terms;
    for (std::size_t j = 1; j < poles.size(); ++j)
        terms.push_back({PrimitiveKind::ZetaDiff, poles[j].second, poles[j].first, poles[0].first});
    return MeromorphicBlock(std::move(kernel), std::move(terms));
}

MeromorphicBlock make_wp(std::shared_ptr<const EllipticKernel> kernel)
{
    return MeromorphicBlock(std::move(kernel), {{PrimitiveKind::WpTranslate, 1.0, 0.0, 0.0}});
}

MeromorphicBlock make_inverse_wp(std::shared_ptr<const EllipticKernel> kernel, cplx alpha, double critical_tol)
{
    for (cplx e : kernel->half_period_values())
        if (std::abs(alpha - e) <= critical_tol * (1.0 + std::abs(e))) {
            std::ostringstream os;
            os << "alpha = " << alpha << " is the branch value " << e;
            throw Error(ErrorKind::CriticalValue, os.str());
        }
    const auto zeros = solve(make_wp(kernel), alpha);
    if (zeros.size() != 2 || zeros[0].multiplicity != 1)
        throw Error(ErrorKind::ConvergenceFailure, "expected two simple preimages of alpha");
    const cplx zp = zeros[0].location;
    const WeierstrassValues v = kernel->values(zp);
    const cplx rho = 1.0 / v.wp1;
    std::vector<Term> terms{{PrimitiveKind::ZetaDiff, rho, zp, -zp}, {PrimitiveKind::Constant, 2.0 * rho * v.zeta, 0.0, 0.0}};
    return MeromorphicBlock(std::move(kernel), std::move(terms));
}

MeromorphicBlock invert_after_shift(const MeromorphicBlock& block, cplx c)
{
    const auto zeros = solve(block, c);
    for (const auto& z : zeros)
        if (z.multiplicity > 1)
            throw Error(ErrorKind::NonSimpleZero, "block - c has a multiple zero at " + describe(z.location));
    if (zeros.size() < 2)
        throw Error(ErrorKind::ConvergenceFailure, "block - c has fewer than two zeros");
    double scale = 0.0;
    std::vector<cplx> rho;
    for (const auto& z : zeros) {
        const cplx d = block.derivative(z.location);
        scale = std::max(scale, std::abs(d));
        rho.push_back(1.0 / d);
    }
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        if (zeros[i].multiplicity > 1 || std::abs(1.0 / rho[i]) < 1e-8 * scale)
            throw Error(ErrorKind::NonSimpleZero, "block - c has a multiple zero at " + describe(zeros[i].location));
    }
    cplx sum = 0.0;
    double mag = 0.0;
    for (cplx r : rho) {
        sum += r;
        mag += std::abs(r);
    }
    if (std::abs(sum) > 1e-8 * mag)
        throw Error(ErrorKind::ConvergenceFailure, "residues of the inverted block do not cancel; a zero was missed");

    std::vector<Term> terms;
    for (std::size_t i = 1; i < zeros.size(); ++i)
        terms.push_back({PrimitiveKind::ZetaDiff, rho[i], zeros[i].location, zeros[0].location});
    MeromorphicBlock partial(block.kernel_ptr(), terms);

    const Lattice& lat = block.kernel().lattice();
    auto safe = [&](cplx z) {
        for (const auto& zr : zeros)
            if (lat.torus_distance(z, zr.location) < 0.02 * lat.min_period())
                return false;
        for (const auto& p : block.poles())
            if (lat.torus_distance(z, p.location) < 0.02 * lat.min_period())
                return false;
        return true;
    };
    std::vector<cplx> samples;
    for (int k = 0; samples.size() < 4 && k < 200; ++k) {
        const cplx z = lat.point(std::fmod(0.1234 + 0.6180339887 * k, 1.0), std::fmod(0.4321 + 0.7548776662 * k, 1.0));
        if (safe(z))
            samples.push_back(z);
    }
    const cplx constant = 1.0 / (block.evaluate(samples[0]) - c) - partial.evaluate(samples[0]);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const cplx direct = 1.0 / (block.evaluate(samples[i]) - c);
        const cplx rep = partial.evaluate(samples[i]) + constant;
        if (std::abs(direct - rep) > 1e-8 * (1.0 + std::abs(direct)))
            throw Error(ErrorKind::ConvergenceFailure, "inverted block does not reproduce 1/(block - c)");
    }
    terms.push_back({PrimitiveKind::Constant, constant, 0.0, 0.0});
    return MeromorphicBlock(block.kernel_ptr(), std::move(terms));
}

cplx boundary_avoiding_offset(const Lattice& lat, const std::vector<cplx>& points)
{
    cplx best = 0.0;
    double best_d = -1.0;
    for (int j = 0; j < 32; ++j) {
        const double s = std::fmod(0.1 + 0.6180339887498949 * j, 1.0);
        const double t = std::fmod(0.3 + 0.7548776662466927 * j, 1.0);
        const cplx xi = lat.point(s, t);
        double d = 1e300;
        for (cplx p : points)
            d = std::min(d, boundary_distance(lat, xi, p));
        if (d > best_d) {
            best_d = d;
            best = xi;
        }
    }
    return best;
}

std::vector<ZeroInfo> find_zeros(const Lattice& lat, const std::function<std::array<cplx, 2>(cplx)>& g,
                                 const std::vector<PoleDatum>& poles, int grid)
{
    const cplx w = lat.omega();
    // Scale of g for the "zero on contour" test.
    double scale = 0.0;
    for (int j = 0; j < 16; ++j) {
        try {
            scale = std::max(scale, std::abs(g(lat.point(std::fmod(0.137 + 0.618 * j, 1.0), std::fmod(0.291 + 0.755 * j, 1.0)))[0]));
        } catch (const Error&) {
        }
    }
    if (scale == 0.0)
        scale = 1.0;

    std::vector<cplx> pole_locs;
    for (const auto& p : poles)
        pole_locs.push_back(p.location);

    // Candidate grid offsets in coordinates.
    std::vector<std::array<double, 2>> offsets;
    for (int j = 0; j < 32; ++j)
        offsets.push_back({std::fmod(0.1 + 0.6180339887498949 * j, 1.0) / grid, std::fmod(0.3 + 0.7548776662466927 * j, 1.0) / grid});
    auto offset_quality = [&](const std::array<double, 2>& o) {
        double d = 1e300;
        for (cplx p : pole_locs) {
            auto [ps, pt] = lat.coordinates(p);
            const double fs = (ps - o[0]) * grid - std::floor((ps - o[0]) * grid);
            const double ft = (pt - o[1]) * grid - std::floor((pt - o[1]) * grid);
            d = std::min({d, fs, 1.0 - fs, ft, 1.0 - ft});
        }
        return d;
    };
    std::stable_sort(offsets.begin(), offsets.end(),
                     [&](const auto& a, const auto& b) { return offset_quality(a) > offset_quality(b); });

    WindingCounter wc(g, scale);
    const double h0 = 1.0 / grid;

    auto poles_in = [&](double s0, double t0, double h) {
        int count = 0;
        for (const auto& p : poles) {
            auto [ps, pt] = lat.coordinates(p.location);
            ps -= std::floor(ps - s0);
            pt -= std::floor(pt - t0);
            if (ps >= s0 && ps < s0 + h && pt >= t0 && pt < t0 + h)
                count += p.order;
        }
        return count;
    };
    auto cell_winding = [&](double s0, double t0, double h) {
        const cplx a = lat.point(s0, t0), b = lat.point(s0 + h, t0), c = lat.point(s0 + h, t0 + h),
                   d = lat.point(s0, t0 + h);
        const double total = wc.segment(a, b) + wc.segment(b, c) + wc.segment(c, d) + wc.segment(d, a);
        return static_cast<int>(std::lround(total / (2.0 * kPi)));
    };
    auto newton = [&](cplx z, int mult, bool& ok) {
        ok = false;
        for (int it = 0; it < 80; ++it) {
            const auto v = g(z);
            if (v[0] == cplx(0.0)) {
                ok = true;
                return z;
            }
            const cplx step = double(mult) * v[0] / v[1];
            if (!std::isfinite(std::abs(step)))
                return z;
            z -= step;
            if (std::abs(step) < 1e-14 * (1.0 + std::abs(z))) {
                ok = true;
                return z;
            }
        }
        const auto v = g(z);
        ok = std::abs(double(mult) * v[0] / v[1]) < 1e-11;
        return z;
    };
    // Split fraction for a subcell keeping split lines away from poles.
    auto split_fraction = [&](double s0, double t0, double h) {
        for (double f : {0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65}) {
            bool good = true;
            for (cplx p : pole_locs) {
                auto [ps, pt] = lat.coordinates(p);
                ps -= std::floor(ps - s0);
                pt -= std::floor(pt - t0);
                if (std::abs(ps - (s0 + f * h)) < 0.02 * h || std::abs(pt - (t0 + f * h)) < 0.02 * h)
                    good = false;
            }
            if (good)
                return f;
        }
        return 0.5;
    };

    std::vector<ZeroInfo> found;
    std::function<void(double, double, double, double, int, int)> resolve;
    resolve = [&](double s0, double t0, double hs, double ht, int zeros, int depth) {
        if (zeros <= 0)
            return;
        const cplx center = lat.point(s0 + 0.5 * hs, t0 + 0.5 * ht);
        // Zeros closer than this are reported as one zero of higher multiplicity;
        // a multiple zero cannot be located to better than ~sqrt(eps) anyway.
        const bool tiny = std::max(hs, ht) * std::abs(w) < 1e-5;
        if (zeros == 1 || tiny || depth > 40) {
            bool ok = false;
            const cplx z = newton(center, zeros, ok);
            auto [zs, zt] = lat.coordinates(z);
            const bool inside = zs > s0 - 0.5 * hs && zs < s0 + 1.5 * hs && zt > t0 - 0.5 * ht && zt < t0 + 1.5 * ht;
            if ((ok || zeros > 1) && inside) {
                found.push_back({z, zeros});
                return;
            }
            if (tiny || depth > 40)
                throw Error(ErrorKind::ConvergenceFailure, "Newton polishing failed near " + describe(center));
        }
        const double f = split_fraction(s0, t0, std::max(hs, ht));
        const double ss[2] = {hs * f, hs * (1.0 - f)};
        const double tt[2] = {ht * f, ht * (1.0 - f)};
        double so = s0;
        for (int i = 0; i < 2; ++i) {
            double to = t0;
            for (int j = 0; j < 2; ++j) {
                const double ch = ss[i], cv = tt[j];
                const cplx a = lat.point(so, to), b = lat.point(so + ch, to), c = lat.point(so + ch, to + cv),
                           d = lat.point(so, to + cv);
                const double total = wc.segment(a, b) + wc.segment(b, c) + wc.segment(c, d) + wc.segment(d, a);
                const int wn = static_cast<int>(std::lround(total / (2.0 * kPi)));
                int pin = 0;
                for (const auto& p : poles) {
                    auto [ps, pt] = lat.coordinates(p.location);
                    ps -= std::floor(ps - so);
                    pt -= std::floor(pt - to);
                    if (ps >= so && ps < so + ch && pt >= to && pt < to + cv)
                        pin += p.order;
                }
                resolve(so, to, ch, cv, wn + pin, depth + 1);
                to += cv;
            }
            so += ss[i];
        }
    };

    for (const auto& off : offsets) {
        found.clear();
        try {
            for (int i = 0; i < grid; ++i)
                for (int j = 0; j < grid; ++j) {
                    const double s0 = off[0] + i * h0, t0 = off[1] + j * h0;
                    const int zeros = cell_winding(s0, t0, h0) + poles_in(s0, t0, h0);
                    resolve(s0, t0, h0, h0, zeros, 0);
                }
        } catch (const ZeroOnContour&) {
            continue;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::PoleAtInput)
                continue;
            throw;
        }
        // Reduce, deduplicate and sort.
        std::vector<ZeroInfo> out;
        for (auto z : found) {
            z.location = snap_reduce(lat, z.location);
            bool dup = false;
            for (auto& o : out)
                if (lat.torus_distance(o.location, z.location) < 1e-6) {
                    dup = true;
                    o.multiplicity = std::max(o.multiplicity, z.multiplicity);
                }
            if (!dup)
                out.push_back(z);
        }
        std::sort(out.begin(), out.end(), [](const ZeroInfo& a, const ZeroInfo& b) {
            return a.location.real() != b.location.real() ? a.location.real() < b.location.real()
                                                          : a.location.imag() < b.location.imag();
        });
        return out;
    }
    throw Error(ErrorKind::ConvergenceFailure, "no grid offset avoids zeros on cell boundaries");
}

std::vector<ZeroInfo> solve(const MeromorphicBlock& block, cplx c)
{
    auto g = [&](cplx z) -> std::array<cplx, 2> {
        const Jet3 j = block.jet(z, 1);
        return {j[0] - c, j[1]};
    };
    return find_zeros(block.kernel().lattice(), g, block.poles());
}

std::vector<BranchPoint> branch_points(const MeromorphicBlock& block)
{
    auto g = [&](cplx z) -> std::array<cplx, 2> {
        const Jet3 j = block.jet(z, 2);
        return {j[1], j[2]};
    };
    std::vector<PoleDatum> dpoles = block.poles();
    for (auto& p : dpoles)
        p.order += 1;
    const auto zeros = find_zeros(block.kernel().lattice(), g, dpoles);
    std::vector<BranchPoint> out;
    for (const auto& z : zeros)
        out.push_back({z.location, z.multiplicity});
    for (const auto& p : block.poles())
        if (p.order >= 2)
            out.push_back({p.location, p.order - 1});
    std::sort(out.begin(), out.end(), [](const BranchPoint& a, const BranchPoint& b) {
        return a.location.real() != b.location.real() ? a.location.real() < b.location.real()
                                                      : a.location.imag() < b.location.imag();
    });
    return out;
}

cplx residue(const MeromorphicBlock& block, cplx p, double radius, int samples)
{
    const Lattice& lat = block.kernel().lattice();
    double nearest = 0.5 * lat.min_period();
    for (const auto& q : block.poles()) {
        const double d = lat.torus_distance(q.location, p);
        if (d > 1e-9)
            nearest = std::min(nearest, d);
    }
    if (radius <= 0.0)
        radius = std::min(0.5 * nearest, 0.05 * lat.min_period());
    if (radius >= nearest)
        throw Error(ErrorKind::ContourHitsPole, "another pole lies within the residue contour around " + describe(p));
    cplx sum = 0.0;
    for (int j = 0; j < samples; ++j) {
        const cplx e = std::polar(1.0, 2.0 * kPi * j / samples);
        sum += block.evaluate(p + radius * e) * radius * e;
    }
    return sum / double(samples);
}

int argument_principle_count(const Lattice& lat, const std::function<std::array<cplx, 2>(cplx)>& g,
                             const std::vector<cplx>& avoid, int n)
{
    const cplx xi = boundary_avoiding_offset(lat, avoid);
    const cplx corners[5] = {xi, xi + 1.0, xi + 1.0 + lat.omega(), xi + lat.omega(), xi};
    cplx total = 0.0;
    for (int side = 0; side < 4; ++side) {
        const cplx a = corners[side], b = corners[side + 1];
        const cplx dz = (b - a) / double(n);
        for (int j = 0; j < n; ++j) {
            const auto v = g(a + (j + 0.5) * dz);
            total += v[1] / v[0] * dz;
        }
    }
    return static_cast<int>(std::lround((total / (2.0 * kPi * kI)).real()));
}

} // namespace willmore
