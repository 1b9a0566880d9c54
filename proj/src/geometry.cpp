#include "willmore/geometry.hpp"

#include "willmore/errors.hpp"
#include "willmore/parallel.hpp"
#include "willmore/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace willmore {

namespace {

struct Frame {
    double g11, g12, g22, det;
    double i11, i12, i22;   // inverse metric
    bool degenerate;
};

// Rank test: relative to the larger singular value, and absolute against the
// second-derivative scale so that branch points of conformal maps count as degenerate.
Frame frame(const C2& F1, const C2& F2, double second_scale = 0.0)
{
    Frame f{};
    f.g11 = norm2(F1);
    f.g12 = dot(F1, F2);
    f.g22 = norm2(F2);
    f.det = f.g11 * f.g22 - f.g12 * f.g12;
    const double tr = f.g11 + f.g22;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * f.det));
    const double smax2 = 0.5 * (tr + disc);
    const double smin2 = std::max(0.0, f.det) / std::max(smax2, 1e-300);
    f.degenerate = !(smax2 > 0.0) || smin2 < 1e-24 * smax2 || smax2 < 1e-24 * second_scale * second_scale;
    if (!f.degenerate) {
        f.i11 = f.g22 / f.det;
        f.i12 = -f.g12 / f.det;
        f.i22 = f.g11 / f.det;
    }
    return f;
}

C2 normal_part(const Frame& f, const C2& F1, const C2& F2, const C2& V)
{
    const double p1 = dot(F1, V), p2 = dot(F2, V);
    const double c1 = f.i11 * p1 + f.i12 * p2;
    const double c2 = f.i12 * p1 + f.i22 * p2;
    return V - (c1 * F1 + c2 * F2);
}

std::string describe(cplx z)
{
    std::ostringstream os;
    os << z;
    return os.str();
}

constexpr const auto& kNodes = kGaussNodes;
constexpr const auto& kWeights = kGaussWeights;

struct Tile {
    double s0, t0, h;
};

double second_scale(const SurfaceJet& j)
{
    return std::sqrt(norm2(j.F11)) + std::sqrt(norm2(j.F12)) + std::sqrt(norm2(j.F22));
}

struct TileSum {
    double willmore = 0.0, gauss = 0.0, area = 0.0, conformality = 0.0;
    std::size_t degenerate = 0;
};

TileSum integrate_tile(const Surface& surf, const Tile& T, cplx omega)
{
    TileSum out;
    const double w2 = T.h * T.h;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            const SurfaceJet jet = surf.jet(T.s0 + T.h * kNodes[i], T.t0 + T.h * kNodes[j]);
            const CurvatureSample c = curvature(jet);
            if (c.degenerate) {
                ++out.degenerate;
                continue;
            }
            const double w = w2 * kWeights[i] * kWeights[j];
            out.willmore += w * c.willmore;
            out.gauss += w * c.gauss;
            out.area += w * c.area;
            out.conformality = std::max(out.conformality, conformality_residual(jet, omega));
        }
    return out;
}

double periodic_gap(double x)
{
    x -= std::floor(x);
    return std::min(x, 1.0 - x);
}

bool touches(const Tile& T, const std::vector<RefinementSite>& sites)
{
    const double half = 0.5 * T.h;
    for (const auto& s : sites) {
        const double dx = std::max(0.0, periodic_gap(s.s - (T.s0 + half)) - half);
        const double dy = std::max(0.0, periodic_gap(s.t - (T.t0 + half)) - half);
        if (dx * dx + dy * dy <= s.radius * s.radius)
            return true;
    }
    return false;
}

std::vector<TileSum> integrate_all(const Surface& surf, const std::vector<Tile>& tiles, cplx omega, int threads)
{
    std::vector<TileSum> out(tiles.size());
    parallel_for(tiles.size(), [&](std::size_t i) { out[i] = integrate_tile(surf, tiles[i], omega); }, threads);
    return out;
}

} // namespace

MetricSample metric_from_jet(const SurfaceJet& jet, cplx point)
{
    MetricSample m;
    m.point = point;
    const double g11 = norm2(jet.F1), g12 = dot(jet.F1, jet.F2), g22 = norm2(jet.F2);
    m.metric = {g11, g12, g22};
    m.conformal_factor_sq = 0.5 * (g11 + g22);
    const double tr = g11 + g22;
    m.anisotropy = tr > 0.0 ? std::hypot(g11 - g22, 2.0 * g12) / tr : 0.0;
    return m;
}

MetricSample pullback_metric(const PairImmersion& imm, cplx z)
{
    const SurfaceJet j = to_real_jet(imm.wirtinger(z));
    if (frame(j.F1, j.F2, second_scale(j)).degenerate)
        throw Error(ErrorKind::DegeneratePoint, "rank-deficient differential at " + describe(z));
    return metric_from_jet(j, z);
}

C2 mean_curvature(const SurfaceJet& jet)
{
    const Frame f = frame(jet.F1, jet.F2, second_scale(jet));
    if (f.degenerate)
        throw Error(ErrorKind::DegeneratePoint, "rank-deficient differential");
    const C2 N11 = normal_part(f, jet.F1, jet.F2, jet.F11);
    const C2 N12 = normal_part(f, jet.F1, jet.F2, jet.F12);
    const C2 N22 = normal_part(f, jet.F1, jet.F2, jet.F22);
    return f.i11 * N11 + (2.0 * f.i12) * N12 + f.i22 * N22;
}

C2 mean_curvature(const PairImmersion& imm, cplx z)
{
    const WirtingerJet w = imm.wirtinger(z);
    const SurfaceJet j = to_real_jet(w);
    if (frame(j.F1, j.F2, second_scale(j)).degenerate)
        throw Error(ErrorKind::DegeneratePoint, "rank-deficient differential at " + describe(z));
    const double lambda2 = norm2(w.fz) + norm2(w.fzb);
    return (4.0 / lambda2) * w.fzzb;
}

C2 mean_curvature_fd(const PairImmersion& imm, cplx z, double h)
{
    const C2 c = imm.evaluate(z);
    const C2 e = imm.evaluate(z + h), w = imm.evaluate(z - h);
    const C2 n = imm.evaluate(z + cplx(0, h)), s = imm.evaluate(z - cplx(0, h));
    const C2 Fu = (e - w) / (2.0 * h), Fv = (n - s) / (2.0 * h);
    const double lambda2 = 0.5 * (norm2(Fu) + norm2(Fv));
    if (!(lambda2 > 0.0))
        throw Error(ErrorKind::DegeneratePoint, "rank-deficient differential at " + describe(z));
    const C2 lap = (e + w + n + s - 4.0 * c) / (h * h);
    return lap / lambda2;
}

C2 sphere_gauge_mean_curvature(const SurfaceJet& jet)
{
    const Frame f = frame(jet.F1, jet.F2, second_scale(jet));
    if (f.degenerate)
        throw Error(ErrorKind::DegeneratePoint, "rank-deficient differential");
    const C2 H = mean_curvature(jet);
    const double lambda = 2.0 / (1.0 + norm2(jet.F));
    // grad lambda = -lambda^2 x
    const C2 grad_perp = normal_part(f, jet.F1, jet.F2, (-lambda * lambda) * jet.F);
    return (1.0 / (lambda * lambda)) * (H - (2.0 / lambda) * grad_perp);
}

CurvatureSample curvature(const SurfaceJet& jet)
{
    CurvatureSample c;
    const Frame f = frame(jet.F1, jet.F2, second_scale(jet));
    if (f.degenerate) {
        c.degenerate = true;
        return c;
    }
    const C2 N11 = normal_part(f, jet.F1, jet.F2, jet.F11);
    const C2 N12 = normal_part(f, jet.F1, jet.F2, jet.F12);
    const C2 N22 = normal_part(f, jet.F1, jet.F2, jet.F22);
    c.H = f.i11 * N11 + (2.0 * f.i12) * N12 + f.i22 * N22;
    c.area = std::sqrt(f.det);
    c.gauss = (dot(N11, N22) - norm2(N12)) / c.area;
    c.willmore = 0.25 * norm2(c.H) * c.area;
    const std::array<std::array<double, 2>, 2> gi = {{{f.i11, f.i12}, {f.i12, f.i22}}};
    const std::array<std::array<const C2*, 2>, 2> N = {{{&N11, &N12}, {&N12, &N22}}};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l)
                    c.second_form_sq += gi[i][k] * gi[j][l] * dot(*N[i][j], *N[k][l]);
    return c;
}

double conformality_residual(const SurfaceJet& jet, cplx omega)
{
    const double a = omega.real(), b = omega.imag();
    const C2& Fu = jet.F1;
    const C2 Fv = (jet.F2 - a * jet.F1) / b;
    const double guu = norm2(Fu), gvv = norm2(Fv), guv = dot(Fu, Fv);
    const double tr = guu + gvv;
    return tr > 0.0 ? std::hypot(guu - gvv, 2.0 * guv) / tr : 0.0;
}

EnergyReport willmore_energy(const Surface& surface, const EnergyOptions& options)
{
    if (options.grid_n < 8 || options.refine_levels < 0)
        throw Error(ErrorKind::InvalidArgument, "grid_n must be >= 8 and refine_levels >= 0");
    const cplx omega = surface.conformal_modulus();
    const auto sites = surface.refinement_sites();
    const int side = options.grid_n / 8;
    const double h0 = 1.0 / side;

    std::vector<Tile> tiles;
    tiles.reserve(static_cast<std::size_t>(side) * side);
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i)
            tiles.push_back({i * h0, j * h0, h0});
    std::vector<TileSum> sums = integrate_all(surface, tiles, omega, options.threads);

    EnergyReport rep;
    rep.grid_n = options.grid_n;
    rep.refine_levels = options.refine_levels;
    auto totals = [&] {
        double w = 0.0;
        for (const auto& s : sums)
            w += s.willmore;
        return w;
    };
    auto abs_gauss = [&] {
        double g = 0.0;
        for (const auto& s : sums)
            g += std::abs(s.gauss);
        return g;
    };
    rep.level_energies.push_back(totals());

    const int steps = std::max(1, options.refine_levels);
    for (int level = 0; level < steps; ++level) {
        const double threshold = std::max(options.energy_fraction * rep.level_energies.back(), 1e-12);
        const double gauss_threshold = std::max(options.energy_fraction * abs_gauss(), 1e-12);
        std::vector<std::size_t> flagged;
        for (std::size_t i = 0; i < tiles.size(); ++i)
            if (sums[i].willmore > threshold || std::abs(sums[i].gauss) > gauss_threshold || touches(tiles[i], sites))
                flagged.push_back(i);
        std::vector<Tile> children;
        children.reserve(4 * flagged.size());
        for (std::size_t i : flagged) {
            const Tile& T = tiles[i];
            const double h = 0.5 * T.h;
            children.push_back({T.s0, T.t0, h});
            children.push_back({T.s0 + h, T.t0, h});
            children.push_back({T.s0, T.t0 + h, h});
            children.push_back({T.s0 + h, T.t0 + h, h});
        }
        if (tiles.size() + 3 * flagged.size() > options.max_tiles)
            throw Error(ErrorKind::RefinementBudgetExceeded,
                        "refinement needs " + std::to_string(tiles.size() + 3 * flagged.size()) + " tiles");
        const std::vector<TileSum> child_sums = integrate_all(surface, children, omega, options.threads);

        double indicator = 0.0, gauss_indicator = 0.0;
        for (std::size_t k = 0; k < flagged.size(); ++k) {
            const TileSum& p = sums[flagged[k]];
            double w = 0.0, g = 0.0;
            for (int c = 0; c < 4; ++c) {
                w += child_sums[4 * k + c].willmore;
                g += child_sums[4 * k + c].gauss;
            }
            indicator += std::abs(p.willmore - w);
            gauss_indicator += std::abs(p.gauss - g);
        }
        rep.level_indicators.push_back(indicator);
        rep.error_indicator = indicator;
        rep.gauss_error_indicator = gauss_indicator;

        // With no requested levels the split only supplies the indicator.
        if (options.refine_levels == 0)
            break;
        std::vector<Tile> next_tiles;
        std::vector<TileSum> next_sums;
        next_tiles.reserve(tiles.size() + 3 * flagged.size());
        next_sums.reserve(next_tiles.capacity());
        std::size_t k = 0;
        for (std::size_t i = 0; i < tiles.size(); ++i) {
            if (k < flagged.size() && flagged[k] == i) {
                for (int c = 0; c < 4; ++c) {
                    next_tiles.push_back(children[4 * k + c]);
                    next_sums.push_back(child_sums[4 * k + c]);
                }
                ++k;
            } else {
                next_tiles.push_back(tiles[i]);
                next_sums.push_back(sums[i]);
            }
        }
        tiles = std::move(next_tiles);
        sums = std::move(next_sums);
        rep.level_energies.push_back(totals());
    }

    for (const auto& s : sums) {
        rep.willmore_energy += s.willmore;
        rep.total_gauss_curvature += s.gauss;
        rep.area += s.area;
        rep.max_conformality_residual = std::max(rep.max_conformality_residual, s.conformality);
        rep.degenerate_samples += s.degenerate;
    }
    rep.tiles = tiles.size();
    return rep;
}

ModulusReport estimate_modulus(const std::function<Sym2(double, double)>& metric, const ModulusOptions& options)
{
    const int n = options.grid_n;
    if (n < 2)
        throw Error(ErrorKind::InvalidArgument, "grid_n must be >= 2");
    const double h = 1.0 / n;
    const double area = 0.5 * h * h;
    const std::size_t N = static_cast<std::size_t>(n) * n;
    auto node = [n](int i, int j) { return static_cast<std::size_t>(((i % n + n) % n) + n * ((j % n + n) % n)); };

    // Two triangles per cell; K = sqrt(det g) g^-1 per triangle.
    struct Tri {
        std::array<std::size_t, 3> v;
        std::array<std::array<double, 2>, 3> grad;
        Sym2 K;
        std::array<double, 6> S;   // local stiffness (00, 01, 02, 11, 12, 22)
    };
    std::vector<Tri> tris(2 * N);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            for (int t = 0; t < 2; ++t) {
                Tri& T = tris[2 * (static_cast<std::size_t>(i) + n * j) + t];
                const double cx = t == 0 ? (i + 2.0 / 3.0) * h : (i + 1.0 / 3.0) * h;
                const double cy = t == 0 ? (j + 1.0 / 3.0) * h : (j + 2.0 / 3.0) * h;
                const Sym2 g = metric(cx, cy);
                const double det = g[0] * g[2] - g[1] * g[1];
                if (!(g[0] > 0.0) || !(det > 0.0))
                    throw Error(ErrorKind::NonPositiveDefiniteMetric,
                                "metric not positive definite at (" + std::to_string(cx) + ", " + std::to_string(cy) + ")");
                const double r = 1.0 / std::sqrt(det);
                T.K = {g[2] * r, -g[1] * r, g[0] * r};
                if (t == 0) {
                    T.v = {node(i, j), node(i + 1, j), node(i + 1, j + 1)};
                    T.grad = {{{-1.0 / h, 0.0}, {1.0 / h, -1.0 / h}, {0.0, 1.0 / h}}};
                } else {
                    T.v = {node(i, j), node(i + 1, j + 1), node(i, j + 1)};
                    T.grad = {{{0.0, -1.0 / h}, {1.0 / h, 0.0}, {-1.0 / h, 1.0 / h}}};
                }
                auto kdot = [&](int a, int b) {
                    const auto& x = T.grad[a];
                    const auto& y = T.grad[b];
                    return area * (x[0] * (T.K[0] * y[0] + T.K[1] * y[1]) + x[1] * (T.K[1] * y[0] + T.K[2] * y[1]));
                };
                T.S = {kdot(0, 0), kdot(0, 1), kdot(0, 2), kdot(1, 1), kdot(1, 2), kdot(2, 2)};
            }
        }

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        for (const Tri& T : tris) {
            const double x0 = x[T.v[0]], x1 = x[T.v[1]], x2 = x[T.v[2]];
            y[T.v[0]] += T.S[0] * x0 + T.S[1] * x1 + T.S[2] * x2;
            y[T.v[1]] += T.S[1] * x0 + T.S[3] * x1 + T.S[4] * x2;
            y[T.v[2]] += T.S[2] * x0 + T.S[4] * x1 + T.S[5] * x2;
        }
    };
    auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * b[i];
        return s;
    };

    // u = x + v with v periodic: A v = b, b_a = -integral of grad(phi_a) . K e1.
    std::vector<double> b(N, 0.0), diag(N, 0.0);
    for (const Tri& T : tris) {
        for (int a = 0; a < 3; ++a)
            b[T.v[a]] -= area * (T.grad[a][0] * T.K[0] + T.grad[a][1] * T.K[1]);
        diag[T.v[0]] += T.S[0];
        diag[T.v[1]] += T.S[3];
        diag[T.v[2]] += T.S[5];
    }
    const double bnorm = std::sqrt(dotv(b, b));
    std::vector<double> v(N, 0.0);
    ModulusReport rep;
    rep.grid_n = n;
    if (bnorm > 1e-14) {
        std::vector<double> r = b, z(N), p(N), q(N);
        for (std::size_t i = 0; i < N; ++i)
            z[i] = r[i] / diag[i];
        p = z;
        double rz = dotv(r, z);
        int it = 0;
        for (; it < options.max_iterations; ++it) {
            if (std::sqrt(dotv(r, r)) <= options.tolerance * bnorm)
                break;
            apply(p, q);
            const double alpha = rz / dotv(p, q);
            for (std::size_t i = 0; i < N; ++i) {
                v[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            for (std::size_t i = 0; i < N; ++i)
                z[i] = r[i] / diag[i];
            const double rz_new = dotv(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < N; ++i)
                p[i] = z[i] + beta * p[i];
        }
        rep.iterations = it;
        apply(v, q);
        double res = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            res += (q[i] - b[i]) * (q[i] - b[i]);
        rep.residual = std::sqrt(res) / bnorm;
        if (!(rep.residual <= std::max(options.tolerance * 10.0, 1e-9)))
            throw Error(ErrorKind::SolverDivergence,
                        "conjugate gradient stalled at relative residual " + std::to_string(rep.residual));
    }

    // Periods of *du: along (1, 0) it is -integral J_y, along (0, 1) integral J_x.
    double A = 0.0, B = 0.0;
    for (const Tri& T : tris) {
        double gx = 1.0, gy = 0.0;
        for (int a = 0; a < 3; ++a) {
            gx += v[T.v[a]] * T.grad[a][0];
            gy += v[T.v[a]] * T.grad[a][1];
        }
        const double Jx = T.K[0] * gx + T.K[1] * gy, Jy = T.K[1] * gx + T.K[2] * gy;
        A -= area * Jy;
        B += area * Jx;
    }
    rep.estimated_modulus = cplx(0.0, B) / cplx(1.0, A);
    if (!(rep.estimated_modulus.imag() > 0.0))
        throw Error(ErrorKind::SolverDivergence, "estimated modulus has non-positive imaginary part");
    rep.canonical_modulus = canonicalize(rep.estimated_modulus).cls.omega();
    return rep;
}

} // namespace willmore
