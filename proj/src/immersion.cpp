#include "willmore/immersion.hpp"

#include "willmore/errors.hpp"
#include "willmore/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace willmore {

namespace {

// sum_i x_i conj(y_i)
cplx hdot(const C2& x, const C2& y) { return x.a * std::conj(y.a) + x.b * std::conj(y.b); }

cplx ipow(cplx w, int n)
{
    if (n < 0)
        return 0.0;
    cplx r = 1.0;
    for (int i = 0; i < n; ++i)
        r *= w;
    return r;
}

// G(w) = w^m (principal(w) + regular(w) + c) with two derivatives.
std::array<cplx, 3> chart_component(const LaurentChart& lc, int m, cplx c, cplx w)
{
    cplx p0 = 0.0, p1 = 0.0, p2 = 0.0;
    for (std::size_t j = 0; j < lc.principal.size(); ++j) {
        const int e = m - static_cast<int>(j) - 1;
        const cplx a = lc.principal[j];
        p0 += a * ipow(w, e);
        p1 += a * double(e) * ipow(w, e - 1);
        p2 += a * double(e) * double(e - 1) * ipow(w, e - 2);
    }
    const Jet3 r = lc.regular_jet(w);
    const cplx R0 = r[0] + c, R1 = r[1], R2 = r[2];
    const double dm = m;
    p0 += ipow(w, m) * R0;
    p1 += dm * ipow(w, m - 1) * R0 + ipow(w, m) * R1;
    p2 += dm * (dm - 1.0) * ipow(w, m - 2) * R0 + 2.0 * dm * ipow(w, m - 1) * R1 + ipow(w, m) * R2;
    return {p0, p1, p2};
}

std::string describe(cplx z)
{
    std::ostringstream os;
    os << z;
    return os.str();
}

} // namespace

WirtingerJet invert_holomorphic(const HoloJet2& G, cplx w, int m)
{
    const double T = norm2(G.g);
    const cplx dT = hdot(G.g1, G.g);
    const cplx dbT = std::conj(dT);
    const cplx d2T = hdot(G.g2, G.g);
    const cplx db2T = std::conj(d2T);
    const double ddbT = norm2(G.g1);
    const double T2 = T * T, T3 = T2 * T;

    const C2 psi = G.g / T;
    const C2 psi_z = G.g1 / T - G.g * (dT / T2);
    const C2 psi_zb = -(G.g * (dbT / T2));
    const C2 psi_zz = G.g2 / T - G.g1 * (2.0 * dT / T2) - G.g * (d2T / T2) + G.g * (2.0 * dT * dT / T3);
    const C2 psi_zzb = -(G.g1 * (dbT / T2)) - G.g * (ddbT / T2) + G.g * (2.0 * dT * dbT / T3);
    const C2 psi_zbzb = -(G.g * (db2T / T2)) + G.g * (2.0 * dbT * dbT / T3);

    const cplx wb = std::conj(w);
    const cplx c = ipow(wb, m);
    const cplx cb = double(m) * ipow(wb, m - 1);
    const cplx cbb = double(m) * double(m - 1) * ipow(wb, m - 2);

    WirtingerJet out;
    out.f = c * psi;
    out.fz = c * psi_z;
    out.fzb = cb * psi + c * psi_zb;
    out.fzz = c * psi_zz;
    out.fzzb = cb * psi_z + c * psi_zzb;
    out.fzbzb = cbb * psi + 2.0 * cb * psi_zb + c * psi_zbzb;
    return out;
}

PairImmersion::PairImmersion(MeromorphicBlock f, MeromorphicBlock h, bool inverted, C2 offset)
    : f_(std::move(f)), h_(std::move(h)), inverted_(inverted), offset_(offset)
{
    const Lattice& lat = lattice();
    if (f_.degree() > 0)
        branch_f_ = willmore::branch_points(f_);
    if (h_.degree() > 0)
        branch_h_ = willmore::branch_points(h_);

    const auto pole_list = poles();
    for (cplx p : pole_list) {
        double d = lat.min_period();
        for (cplx q : pole_list)
            if (lat.torus_distance(p, q) > 1e-9)
                d = std::min(d, lat.torus_distance(p, q));
        for (const auto* bs : {&branch_f_, &branch_h_})
            for (const auto& b : *bs)
                if (lat.torus_distance(p, b.location) > 1e-9)
                    d = std::min(d, lat.torus_distance(p, b.location));
        PoleChart chart;
        chart.center = p;
        chart.radius = 0.1 * d;
        const int i_f = f_.pole_index(p), i_h = h_.pole_index(p);
        chart.order = std::max(i_f >= 0 ? f_.poles()[static_cast<std::size_t>(i_f)].order : 0,
                               i_h >= 0 ? h_.poles()[static_cast<std::size_t>(i_h)].order : 0);
        chart.component = {f_.local_chart(p, chart.radius), h_.local_chart(p, chart.radius)};
        charts_.push_back(std::move(chart));
    }
}

std::vector<cplx> PairImmersion::poles() const
{
    std::vector<cplx> out;
    for (const auto* b : {&f_, &h_})
        for (const auto& p : b->poles()) {
            bool seen = false;
            for (cplx q : out)
                seen = seen || lattice().torus_distance(p.location, q) < 1e-9;
            if (!seen)
                out.push_back(p.location);
        }
    return out;
}

HoloJet2 PairImmersion::holomorphic_jet(cplx z) const
{
    const Jet3 jf = f_.jet(z, 2);
    const Jet3 jh = h_.jet(z, 2);
    return {{jf[0] + offset_.a, jh[0] + offset_.b}, {jf[1], jh[1]}, {jf[2], jh[2]}};
}

std::optional<std::size_t> PairImmersion::chart_at(cplx z) const
{
    for (std::size_t i = 0; i < charts_.size(); ++i)
        if (lattice().torus_distance(z, charts_[i].center) < charts_[i].radius)
            return i;
    return std::nullopt;
}

WirtingerJet PairImmersion::wirtinger_direct(cplx z) const
{
    const HoloJet2 G = holomorphic_jet(z);
    if (inverted_)
        return invert_holomorphic(G, 0.0, 0);
    WirtingerJet w;
    w.f = G.g;
    w.fz = G.g1;
    w.fzz = G.g2;
    return w;
}

WirtingerJet PairImmersion::wirtinger_in_chart(cplx z, std::size_t idx) const
{
    const PoleChart& ch = charts_.at(idx);
    const cplx w = lattice().nearest_difference(z - ch.center);
    const int m = ch.order;
    const auto a = chart_component(ch.component[0], m, offset_.a, w);
    const auto b = chart_component(ch.component[1], m, offset_.b, w);
    const HoloJet2 G{{a[0], b[0]}, {a[1], b[1]}, {a[2], b[2]}};
    return invert_holomorphic(G, w, m);
}

WirtingerJet PairImmersion::wirtinger(cplx z) const
{
    if (inverted_) {
        if (auto idx = chart_at(z))
            return wirtinger_in_chart(z, *idx);
    }
    return wirtinger_direct(z);
}

SurfaceJet PairImmersion::jet(double s, double t) const
{
    const cplx omega = lattice().omega();
    return affine_chain(to_real_jet(wirtinger(s + t * omega)), omega);
}

std::vector<RefinementSite> PairImmersion::refinement_sites() const
{
    const Lattice& lat = lattice();
    const double smin = affine_min_singular(lat.omega());
    std::vector<RefinementSite> out;
    for (const auto& ch : charts_) {
        auto [s, t] = lat.coordinates(lat.reduce(ch.center));
        out.push_back({s, t, ch.radius / smin});
    }
    for (const auto* bs : {&branch_f_, &branch_h_})
        for (const auto& b : *bs) {
            auto [s, t] = lat.coordinates(lat.reduce(b.location));
            out.push_back({s, t, 0.05 * lat.min_period() / smin});
        }
    return out;
}

PairImmersion PairImmersion::with_inversion(bool inverted, C2 offset) const
{
    return PairImmersion(f_, h_, inverted, offset);
}

std::array<double, 2> singular_values(const WirtingerJet& w)
{
    const SurfaceJet j = to_real_jet(w);
    const double a = norm2(j.F1), c = norm2(j.F2), b = dot(j.F1, j.F2);
    const double tr = a + c, det = a * c - b * b;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double lo = std::max(0.0, 0.5 * tr - disc);
    return {std::sqrt(lo), std::sqrt(0.5 * tr + disc)};
}

C2 choose_generic_offset(const MeromorphicBlock& f, const MeromorphicBlock& h, std::uint64_t seed, int candidates)
{
    const Lattice& lat = f.kernel().lattice();
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    // Image samples of (f, h) away from the poles.
    std::vector<C2> image;
    const int n = 32;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cplx z = lat.point((i + 0.5) / n, (j + 0.5) / n);
            bool near = false;
            for (const auto* b : {&f, &h})
                for (const auto& p : b->poles())
                    near = near || lat.torus_distance(z, p.location) < 0.02 * lat.min_period();
            if (!near)
                image.push_back({f.evaluate(z), h.evaluate(z)});
        }

    C2 best;
    double best_score = -1.0;
    for (int c = 0; c < candidates; ++c) {
        std::array<double, 4> x{};
        do {
            for (double& v : x)
                v = u(rng);
        } while (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] > 1.0);
        const C2 off{cplx(x[0], x[1]), cplx(x[2], x[3])};
        double score = 1e300;
        for (const C2& y : image)
            score = std::min(score, std::sqrt(norm2(y + off)));
        if (score > best_score) {
            best_score = score;
            best = off;
        }
    }
    return best;
}

namespace {

double min_set_distance(const Lattice& lat, const std::vector<BranchPoint>& a, const std::vector<BranchPoint>& b)
{
    double d = 1e300;
    for (const auto& x : a)
        for (const auto& y : b)
            d = std::min(d, lat.torus_distance(x.location, y.location));
    return d;
}

double min_distance(const Lattice& lat, const std::vector<cplx>& pts)
{
    double d = 1e300;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            d = std::min(d, lat.torus_distance(pts[i], pts[j]));
    return d;
}

std::vector<cplx> locations(const MeromorphicBlock& b)
{
    std::vector<cplx> out;
    for (const auto& p : b.poles())
        out.push_back(p.location);
    return out;
}

} // namespace

PairImmersion build_willmore_torus(const ConformalClass& cls, int k, std::uint64_t seed, BuildOptions opt)
{
    if (k < 3)
        throw Error(ErrorKind::InvalidArgument, "density k must be at least 3");
    auto kernel = std::make_shared<const EllipticKernel>(Lattice(cls));
    const Lattice& lat = kernel->lattice();
    const double sep = opt.min_pole_separation * lat.min_period();
    const double bsep = opt.branch_separation * lat.min_period();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int m = k >= 4 ? k - 2 : 2;

    // f: m simple poles with residues summing to zero.
    std::vector<std::pair<cplx, cplx>> fpoles;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 10000)
            throw Error(ErrorKind::RetryExhausted, "could not place the poles of f");
        fpoles.clear();
        cplx sum = 0.0;
        for (int j = 0; j < m; ++j) {
            const cplx p = lat.point(unit(rng), unit(rng));
            cplx r = std::polar(0.5 + unit(rng), 2.0 * kPi * unit(rng));
            if (j == m - 1)
                r = -sum;
            sum += r;
            fpoles.push_back({p, r});
        }
        std::vector<cplx> locs;
        bool ok = std::abs(fpoles.back().second) > 0.3;
        for (const auto& fp : fpoles)
            locs.push_back(fp.first);
        if (ok && min_distance(lat, locs) >= sep)
            break;
    }
    const MeromorphicBlock f = make_simple_pole_function(kernel, fpoles);
    const auto bf = branch_points(f);
    const auto fp = locations(f);

    // h: two simple poles, then a translation tau_v chosen at random until admissible.
    const cplx q1 = lat.point(unit(rng), unit(rng));
    const cplx q2 = q1 + lat.point(0.5, 0.5);
    const MeromorphicBlock h0 = make_simple_pole_function(kernel, {{q1, 1.0}, {q2, -1.0}});

    for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
        const cplx v = lat.point(unit(rng), unit(rng));
        MeromorphicBlock h = h0.translated(v);
        auto bh = branch_points(h);
        // [df = 0] and [dh = 0] disjoint; h unbranched at the poles of f.
        if (min_set_distance(lat, bf, bh) < bsep)
            continue;
        bool unbranched = true;
        for (cplx p : fp)
            for (const auto& b : bh)
                unbranched = unbranched && lat.torus_distance(p, b.location) >= bsep;
        if (!unbranched)
            continue;
        std::vector<cplx> all = fp;
        for (cplx q : locations(h))
            all.push_back(q);
        if (min_distance(lat, all) < sep)
            continue;

        if (k == 3) {
            // 1/(h - h(p)) shares the pole p with f; its other pole must differ from f's.
            const cplx p = fp[0];
            MeromorphicBlock ht = invert_after_shift(h, h.evaluate(p));
            const auto hp = locations(ht);
            std::vector<cplx> distinct = fp;
            for (cplx q : hp)
                if (lat.torus_distance(q, p) > 1e-6)
                    distinct.push_back(q);
            if (distinct.size() != 3 || min_distance(lat, distinct) < sep)
                continue;
            const auto bht = branch_points(ht);
            if (min_set_distance(lat, bf, bht) < bsep)
                continue;
            h = std::move(ht);
        }

        for (int o = 0; o < 8; ++o) {
            const C2 offset = choose_generic_offset(f, h, seed + 7919ULL * (o + 1), opt.offset_candidates);
            PairImmersion imm(f, h, true, offset);
            try {
                (void)density_report(imm);
                return imm;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::UnexpectedPreimage)
                    throw;
            }
        }
    }
    throw Error(ErrorKind::RetryExhausted, "no admissible translation of h found after "
                                               + std::to_string(opt.max_retries) + " attempts");
}

MeromorphicBlock DoubleCover::block() const { return make_wp(kernel).affine(scale, shift); }

std::vector<BranchPoint> DoubleCover::branch_points() const { return willmore::branch_points(block()); }

PairImmersion DoubleCover::pair() const
{
    return PairImmersion(block(), MeromorphicBlock(kernel, {}), false, C2{});
}

PairImmersion DoubleCover::inverted(cplx c2) const
{
    return PairImmersion(block(), MeromorphicBlock(kernel, {}), true, C2{0.0, c2});
}

DoubleCover build_double_cover(const ConformalClass& cls)
{
    DoubleCover dc;
    dc.kernel = std::make_shared<const EllipticKernel>(Lattice(cls));
    double emax = 0.0;
    for (cplx e : dc.kernel->half_period_values())
        emax = std::max(emax, std::abs(e));
    dc.scale = 1.0 / emax;
    return dc;
}

DensityReport density_report(const PairImmersion& imm, int grid, double threshold)
{
    if (!imm.inverted())
        throw Error(ErrorKind::InvalidArgument, "density report needs an inverted immersion");
    const Lattice& lat = imm.lattice();
    DensityReport rep;
    rep.min_singular_value = 1e300;
    const auto poles = imm.poles();
    for (cplx p : poles) {
        const WirtingerJet w = imm.wirtinger(p);
        if (norm2(w.f) != 0.0)
            throw Error(ErrorKind::UnexpectedPreimage, "pole " + describe(p) + " does not map to 0");
        rep.min_singular_value = std::min(rep.min_singular_value, singular_values(w)[0]);
    }
    if (!(rep.min_singular_value > 0.0))
        throw Error(ErrorKind::DegeneratePoint, "differential degenerates at a pole");

    // Local minima of |phi| on a grid, polished by Gauss-Newton.
    const auto n = static_cast<std::size_t>(grid);
    std::vector<double> mag(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            mag[i * n + j] = std::sqrt(norm2(imm.evaluate(lat.point((i + 0.5) / grid, (j + 0.5) / grid))));
    double scale = 0.0;
    for (double v : mag)
        scale = std::max(scale, v);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = mag[i * n + j];
            if (v > threshold * scale)
                continue;
            bool is_min = true;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const std::size_t ii = (i + n + static_cast<std::size_t>(di + 1) - 1) % n;
                    const std::size_t jj = (j + n + static_cast<std::size_t>(dj + 1) - 1) % n;
                    if ((di || dj) && mag[ii * n + jj] < v)
                        is_min = false;
                }
            if (!is_min)
                continue;
            cplx z = lat.point((i + 0.5) / grid, (j + 0.5) / grid);
            double res = v;
            for (int it = 0; it < 60 && res > 1e-14 * scale; ++it) {
                const SurfaceJet sj = to_real_jet(imm.wirtinger(z));
                const double a = norm2(sj.F1), b = dot(sj.F1, sj.F2), c = norm2(sj.F2);
                const double r1 = dot(sj.F1, sj.F), r2 = dot(sj.F2, sj.F);
                const double det = a * c - b * b;
                if (!(det > 0.0))
                    break;
                const double du = (c * r1 - b * r2) / det, dv = (a * r2 - b * r1) / det;
                z -= cplx(du, dv);
                res = std::sqrt(norm2(imm.evaluate(z)));
            }
            if (res > 1e-10 * std::max(1.0, scale))
                continue;
            bool known = false;
            for (cplx q : rep.preimages)
                known = known || lat.torus_distance(q, z) < 1e-6;
            if (known)
                continue;
            bool at_pole = false;
            for (cplx p : poles)
                at_pole = at_pole || lat.torus_distance(p, z) < 1e-6;
            if (!at_pole)
                throw Error(ErrorKind::UnexpectedPreimage, "0 is also attained at " + describe(lat.reduce(z)));
            rep.preimages.push_back(lat.reduce(z));
        }
    rep.density = static_cast<int>(poles.size());
    return rep;
}

RegularityReport regularity_report(const PairImmersion& imm, int grid)
{
    RegularityReport r;
    r.grid = grid;
    r.min_pole_fzb = INFINITY;
    const auto abs2 = [](const C2& x) { return std::sqrt(norm2(x)); };
    const auto poles = imm.poles();
    r.poles = poles.size();
    for (cplx p : poles) {
        const WirtingerJet w = imm.wirtinger(p);
        r.max_pole_value = std::max(r.max_pole_value, abs2(w.f));
        r.max_pole_fz = std::max(r.max_pole_fz, abs2(w.fz));
        r.min_pole_fzb = std::min(r.min_pole_fzb, abs2(w.fzb));
    }
    if (imm.inverted())
        for (std::size_t i = 0; i < imm.charts().size(); ++i) {
            const PoleChart& ch = imm.charts()[i];
            for (int j = 0; j < 24; ++j) {
                const cplx z = ch.center + std::polar(ch.radius * (0.5 + 0.02 * j), 0.37 + 0.9 * j);
                const WirtingerJet a = imm.wirtinger_in_chart(z, i);
                const WirtingerJet b = imm.wirtinger_direct(z);
                const double s1 = abs2(b.fz) + abs2(b.fzb);
                const double s2 = abs2(b.fzz) + abs2(b.fzzb) + abs2(b.fzbzb);
                r.chart_value_mismatch = std::max(r.chart_value_mismatch, abs2(a.f - b.f) / abs2(b.f));
                for (double d : {abs2(a.fz - b.fz) / s1, abs2(a.fzb - b.fzb) / s1, abs2(a.fzz - b.fzz) / s2,
                                 abs2(a.fzzb - b.fzzb) / s2, abs2(a.fzbzb - b.fzbzb) / s2})
                    r.chart_derivative_mismatch = std::max(r.chart_derivative_mismatch, d);
            }
        }
    const Lattice& lat = imm.lattice();
    std::vector<std::array<double, 2>> rows(static_cast<std::size_t>(grid), {0.0, INFINITY});
    parallel_for(static_cast<std::size_t>(grid), [&](std::size_t i) {
        for (int j = 0; j < grid; ++j) {
            const WirtingerJet w = imm.wirtinger(lat.point((static_cast<double>(i) + 0.5) / grid, (j + 0.5) / grid));
            rows[i][0] = std::max(rows[i][0], std::abs(conformality_pairing(w)) / wirtinger_norm2(w));
            rows[i][1] = std::min(rows[i][1], singular_values(w)[0]);
        }
    });
    r.min_singular_value = INFINITY;
    for (const auto& row : rows) {
        r.max_conformality_residual = std::max(r.max_conformality_residual, row[0]);
        r.min_singular_value = std::min(r.min_singular_value, row[1]);
    }
    return r;
}

} // namespace willmore
