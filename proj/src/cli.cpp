#include "willmore/cli.hpp"

#include "willmore/analysis.hpp"
#include "willmore/errors.hpp"
#include "willmore/geometry.hpp"
#include "willmore/immersion.hpp"
#include "willmore/perturbation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace willmore {

namespace {

using json = nlohmann::ordered_json;

const cplx I(0.0, 1.0);

const std::set<std::string> kCommands = {"construct", "energy", "verify", "perturb", "mesh", "sweep"};
const std::set<std::string> kTargets = {"elliptic", "immersion", "nonexistence-algebra", "branch-algebra", "modulus"};

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }

double parse_real(std::string_view s, std::string_view what)
{
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end)
        invalid("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------- JSON helpers

json cj(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

json quantity(double value, double error_indicator)
{
    return {{"value", value}, {"error_indicator", error_indicator}};
}

cplx complex_from_json(const json& j, std::string_view what)
{
    if (j.is_string())
        return parse_complex(j.get<std::string>());
    if (j.is_number())
        return j.get<double>();
    if (j.is_object() && j.contains("re") && j.contains("im") && j.size() == 2)
        return {j.at("re").get<double>(), j.at("im").get<double>()};
    if (j.is_array() && j.size() == 2)
        return {j[0].get<double>(), j[1].get<double>()};
    invalid("expected a complex number for " + std::string(what));
}

json points_json(const std::vector<cplx>& pts)
{
    json a = json::array();
    for (cplx p : pts)
        a.push_back(cj(p));
    return a;
}

json branch_json(const std::vector<BranchPoint>& bps)
{
    json a = json::array();
    for (const BranchPoint& b : bps)
        a.push_back({{"location", cj(b.location)}, {"order", b.order}});
    return a;
}

// ---------------------------------------------------------------- immersion serialization

const std::map<PrimitiveKind, std::string> kKindNames = {
    {PrimitiveKind::ZetaDiff, "zeta_diff"},
    {PrimitiveKind::WpTranslate, "wp_translate"},
    {PrimitiveKind::WpPrimeTranslate, "wp_prime_translate"},
    {PrimitiveKind::Constant, "constant"},
};

json block_json(const MeromorphicBlock& b)
{
    json terms = json::array();
    for (const Term& t : b.terms())
        terms.push_back({{"kind", kKindNames.at(t.kind)}, {"coef", cj(t.coef)}, {"p", cj(t.p)}, {"q", cj(t.q)}});
    json poles = json::array();
    for (const PoleDatum& p : b.poles())
        poles.push_back({{"location", cj(p.location)}, {"order", p.order}});
    return {{"terms", terms}, {"poles", poles}};
}

MeromorphicBlock block_from_json(const json& j, std::shared_ptr<const EllipticKernel> kernel)
{
    std::vector<Term> terms;
    for (const json& t : j.at("terms")) {
        Term term;
        const std::string kind = t.at("kind").get<std::string>();
        const auto it = std::find_if(kKindNames.begin(), kKindNames.end(), [&](const auto& e) { return e.second == kind; });
        if (it == kKindNames.end())
            invalid("unknown term kind '" + kind + "'");
        term.kind = it->first;
        term.coef = complex_from_json(t.at("coef"), "coef");
        term.p = complex_from_json(t.at("p"), "p");
        term.q = complex_from_json(t.at("q"), "q");
        terms.push_back(term);
    }
    return MeromorphicBlock(std::move(kernel), std::move(terms));
}

json immersion_json(const PairImmersion& imm, int density)
{
    json charts = json::array();
    for (const PoleChart& c : imm.charts())
        charts.push_back({{"center", cj(c.center)}, {"order", c.order}, {"radius", c.radius}});
    return {
        {"omega", cj(imm.lattice().omega())},
        {"density", density},
        {"inverted", imm.inverted()},
        {"offset", json::array({cj(imm.offset().a), cj(imm.offset().b)})},
        {"f", block_json(imm.f())},
        {"h", block_json(imm.h())},
        {"poles", points_json(imm.poles())},
        {"charts", charts},
        {"branch_points_f", branch_json(imm.branch_points_f())},
        {"branch_points_h", branch_json(imm.branch_points_h())},
    };
}

struct LoadedImmersion {
    PairImmersion immersion;
    int density = 0;
};

LoadedImmersion immersion_from_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot read '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        invalid("'" + path + "' is not valid JSON: " + e.what());
    }
    const json* node = &doc;
    if (doc.contains("result") && doc.at("result").contains("immersion"))
        node = &doc.at("result").at("immersion");
    else if (doc.contains("immersion"))
        node = &doc.at("immersion");
    const json& j = *node;
    if (!j.contains("f") || !j.contains("h") || !j.contains("omega"))
        invalid("'" + path + "' does not contain an immersion");
    auto kernel = std::make_shared<const EllipticKernel>(Lattice(complex_from_json(j.at("omega"), "omega")));
    const json& off = j.at("offset");
    PairImmersion imm(block_from_json(j.at("f"), kernel), block_from_json(j.at("h"), kernel),
                      j.at("inverted").get<bool>(),
                      C2{complex_from_json(off.at(0), "offset"), complex_from_json(off.at(1), "offset")});
    const int density = j.value("density", 0);
    if (j.contains("poles")) {
        std::vector<cplx> stored;
        for (const json& p : j.at("poles"))
            stored.push_back(complex_from_json(p, "pole"));
        const std::vector<cplx> rebuilt = imm.poles();
        bool same = stored.size() == rebuilt.size();
        for (std::size_t i = 0; same && i < stored.size(); ++i)
            same = imm.lattice().torus_distance(stored[i], rebuilt[i]) <= 1e-12;
        if (!same)
            invalid("poles stored in '" + path + "' do not match the serialized blocks");
    }
    return {std::move(imm), density};
}

LoadedImmersion immersion_for(const RunConfig& c)
{
    if (!c.input.empty())
        return immersion_from_file(c.input);
    if (c.double_cover)
        return {build_double_cover(ConformalClass(c.omega)).inverted(), 2};
    return {build_willmore_torus(ConformalClass(c.omega), c.k, c.seed), c.k};
}

// ---------------------------------------------------------------- checks

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;   // "<=", ">=", ">" or "=="
    bool pass = false;
};

Check check(std::string name, double value, std::string relation, double threshold)
{
    bool pass = false;
    if (relation == "<=")
        pass = value <= threshold;
    else if (relation == ">=")
        pass = value >= threshold;
    else if (relation == ">")
        pass = value > threshold;
    else
        pass = value == threshold;
    return {std::move(name), value, threshold, std::move(relation), pass};
}

json checks_json(const std::vector<Check>& checks)
{
    json a = json::array();
    for (const Check& c : checks)
        a.push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"threshold", c.threshold},
                     {"pass", c.pass}});
    return a;
}

bool all_pass(const std::vector<Check>& checks)
{
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

// ---------------------------------------------------------------- CSV

std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) { row_strings(header); }
    void row(const std::vector<double>& values)
    {
        std::vector<std::string> s;
        for (double v : values)
            s.push_back(fmt17(v));
        row_strings(s);
    }
    [[nodiscard]] const std::string& text() const noexcept { return text_; }

private:
    void row_strings(const std::vector<std::string>& fields)
    {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i)
                text_ += ',';
            text_ += fields[i];
        }
        text_ += "\r\n";
    }
    std::string text_;
};

// ---------------------------------------------------------------- commands

struct Artifact {
    std::string path;
    std::string contents;
};

struct Outcome {
    json result;
    json tolerances = json::object();
    bool pass = true;
    std::vector<Artifact> artifacts;
};

Outcome cmd_construct(const RunConfig& c)
{
    const LoadedImmersion li = immersion_for(c);
    const DensityReport d = density_report(li.immersion, *c.grid);
    Outcome o;
    o.tolerances = {{"preimage_threshold", 1e-2}};
    o.result = {
        {"immersion", immersion_json(li.immersion, d.density)},
        {"density", {{"value", d.density},
                     {"min_singular_value", d.min_singular_value},
                     {"point", json::array({cj(d.point.a), cj(d.point.b)})},
                     {"preimages", points_json(d.preimages)}}},
    };
    o.pass = d.density == li.density && d.min_singular_value > 0.0;
    return o;
}

json energy_json(const EnergyReport& r)
{
    return {
        {"willmore_energy", quantity(r.willmore_energy, r.error_indicator)},
        {"total_gauss_curvature", quantity(r.total_gauss_curvature, r.gauss_error_indicator)},
        {"max_conformality_residual", r.max_conformality_residual},
        {"quadrature", {{"grid", r.grid_n},
                        {"refine_levels", r.refine_levels},
                        {"tiles", r.tiles},
                        {"degenerate_samples", r.degenerate_samples},
                        {"level_energies", r.level_energies},
                        {"level_indicators", r.level_indicators}}},
    };
}

constexpr double kEnergyTolerance = 0.01;

Outcome cmd_energy(const RunConfig& c)
{
    const LoadedImmersion li = immersion_for(c);
    const EnergyReport r = willmore_energy(li.immersion, {*c.grid, c.refine});
    const double target = 4.0 * kPi * li.density;
    const double rel = std::abs(r.willmore_energy - target) / target;
    Outcome o;
    o.tolerances = {{"relative_energy", kEnergyTolerance}};
    o.result = energy_json(r);
    o.result["density"] = li.density;
    o.result["omega"] = cj(li.immersion.lattice().omega());
    o.result["target"] = target;
    o.result["relative_error"] = quantity(rel, r.error_indicator / target);
    o.pass = rel <= kEnergyTolerance;
    return o;
}

Outcome cmd_sweep(const RunConfig& c)
{
    std::vector<cplx> omegas = c.omega_list.empty() ? std::vector<cplx>{c.omega} : c.omega_list;
    std::vector<int> ks = c.k_list.empty() ? std::vector<int>{c.k} : c.k_list;
    if (c.double_cover)
        ks = {2};
    std::vector<std::string> header = {"omega_re", "omega_im", "k", "willmore_energy", "energy_error_indicator",
                                       "target", "relative_error"};
    if (c.timing)
        header.push_back("wall_seconds");
    Csv csv(header);
    Outcome o;
    o.tolerances = {{"relative_energy", kEnergyTolerance}};
    json rows = json::array();
    for (cplx w : omegas) {
        for (int k : ks) {
            const auto t0 = std::chrono::steady_clock::now();
            const PairImmersion imm = c.double_cover ? build_double_cover(ConformalClass(w)).inverted()
                                                     : build_willmore_torus(ConformalClass(w), k, c.seed);
            const EnergyReport r = willmore_energy(imm, {*c.grid, c.refine});
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const double target = 4.0 * kPi * k;
            const double rel = std::abs(r.willmore_energy - target) / target;
            std::vector<double> row = {w.real(), w.imag(), double(k), r.willmore_energy, r.error_indicator, target, rel};
            if (c.timing)
                row.push_back(secs);
            csv.row(row);
            json j = {{"omega", cj(w)},
                      {"k", k},
                      {"willmore_energy", quantity(r.willmore_energy, r.error_indicator)},
                      {"target", target},
                      {"relative_error", quantity(rel, r.error_indicator / target)},
                      {"pass", rel <= kEnergyTolerance}};
            if (c.timing)
                j["wall_seconds"] = secs;
            rows.push_back(j);
            o.pass = o.pass && rel <= kEnergyTolerance;
        }
    }
    o.result = {{"rows", rows}};
    if (!c.output.empty())
        o.artifacts.push_back({c.output + ".csv", csv.text()});
    return o;
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

constexpr double kTauTolerance = 1e-3;

Outcome cmd_perturb(const RunConfig& c)
{
    const ChartBranch branch = c.branch == "canonical" ? ChartBranch::Canonical : ChartBranch::Centered;
    const PerturbationFamily fam = build_family(ConformalClass(c.omega), c.alpha, c.delta, c.seed, branch);
    SweepOptions so;
    so.modulus_grid = so.energy_grid = so.singular_value_grid = *c.grid;
    so.refine_levels = c.refine;
    so.parallel = c.parallel;
    const std::vector<SweepRow> rows = energy_sweep(fam, c.eps_list, so);

    Csv csv({"epsilon", "sigma_re", "sigma_im", "tau_residual", "willmore_energy", "energy_error_indicator",
             "min_singular_value"});
    Outcome o;
    o.tolerances = {{"tau_residual", kTauTolerance}, {"newton", so.newton_tolerance}};
    json jrows = json::array();
    std::vector<double> eps, excess;
    bool decreasing = true, above = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const SweepRow& r = rows[i];
        csv.row({r.epsilon, r.sigma.real(), r.sigma.imag(), r.tau_residual, r.willmore_energy,
                 r.energy_error_indicator, r.min_singular_value});
        json trace = json::array();
        for (const NewtonStep& s : r.trace)
            trace.push_back({{"sigma", cj(s.sigma)}, {"tau", cj(s.tau)}, {"residual", s.residual}});
        jrows.push_back({{"epsilon", r.epsilon},
                         {"sigma", cj(r.sigma)},
                         {"tau_residual", r.tau_residual},
                         {"willmore_energy", quantity(r.willmore_energy, r.energy_error_indicator)},
                         {"energy_above_eight_pi", quantity(r.willmore_energy - 8 * kPi, r.energy_error_indicator)},
                         {"excess_energy", quantity(r.excess_energy, r.excess_error_indicator)},
                         {"min_singular_value", r.min_singular_value},
                         {"newton_trace", trace}});
        o.pass = o.pass && r.tau_residual <= kTauTolerance && r.min_singular_value > 0.0;
        above = above && r.willmore_energy > 8 * kPi;
        if (i > 0)
            decreasing = decreasing && r.willmore_energy < rows[i - 1].willmore_energy;
        if (r.willmore_energy > 8 * kPi) {
            eps.push_back(r.epsilon);
            excess.push_back(r.willmore_energy - 8 * kPi);
        }
    }
    json order = nullptr;
    if (eps.size() >= 2 && eps.size() == rows.size())
        order = loglog_slope(eps, excess);
    o.result = {
        {"family", {{"omega", cj(c.omega)},
                    {"alpha", cj(fam.alpha())},
                    {"delta", fam.delta()},
                    {"delta_halvings", fam.delta_halvings()},
                    {"chart_branch", c.branch},
                    {"poles", points_json(fam.poles())},
                    {"branch_points", points_json(fam.branch_points())}}},
        {"eight_pi", 8 * kPi},
        {"rows", jrows},
        {"energy_above_eight_pi", above},
        {"energy_decreasing", decreasing},
        {"excess_order", order},
    };
    if (!c.output.empty())
        o.artifacts.push_back({c.output + ".csv", csv.text()});
    return o;
}

// Orthonormal basis of the complement of q, from the standard basis by Gram-Schmidt,
// skipping the vector most aligned with q.
std::array<std::array<double, 4>, 3> complement_basis(const std::array<double, 4>& q)
{
    int skip = 0;
    for (int i = 1; i < 4; ++i)
        if (std::abs(q[i]) > std::abs(q[skip]))
            skip = i;
    std::vector<std::array<double, 4>> basis = {q};
    for (int i = 0; i < 4; ++i) {
        if (i == skip)
            continue;
        std::array<double, 4> v{};
        v[i] = 1.0;
        for (const auto& b : basis) {
            double d = 0, n = 0;
            for (int j = 0; j < 4; ++j)
                d += v[j] * b[j], n += b[j] * b[j];
            for (int j = 0; j < 4; ++j)
                v[j] -= d / n * b[j];
        }
        double n = 0;
        for (double x : v)
            n += x * x;
        for (double& x : v)
            x /= std::sqrt(n);
        basis.push_back(v);
    }
    return {basis[1], basis[2], basis[3]};
}

Outcome cmd_mesh(const RunConfig& c)
{
    const LoadedImmersion li = immersion_for(c);
    const PairImmersion& imm = li.immersion;
    const int n = c.mesh_n;
    const auto& q = c.projection_point;
    const double qq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
    const auto basis = complement_basis(q);

    std::vector<std::array<double, 3>> grid(std::size_t(n) * std::size_t(n));
    double min_denominator = 1e300;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const C2 v = imm.evaluate(imm.lattice().point(double(i) / n, double(j) / n));
            const std::array<double, 4> x = {v.a.real(), v.a.imag(), v.b.real(), v.b.imag()};
            std::array<double, 3> p{};
            if (c.projection == "drop") {
                int m = 0;
                for (int k = 0; k < 4; ++k)
                    if (k != c.drop - 1)
                        p[std::size_t(m++)] = x[std::size_t(k)];
            } else {
                // Central projection from q onto q-perp; stereographic for points on |x| = |q|.
                double xq = 0;
                for (int k = 0; k < 4; ++k)
                    xq += x[std::size_t(k)] * q[std::size_t(k)];
                const double den = qq - xq;
                min_denominator = std::min(min_denominator, std::abs(den) / qq);
                if (std::abs(den) <= 1e-12 * qq)
                    throw Error(ErrorKind::DegeneratePoint, "mesh vertex maps to the projection point");
                const double t = qq / den;
                for (int m = 0; m < 3; ++m) {
                    double s = 0;
                    for (int k = 0; k < 4; ++k)
                        s += (q[std::size_t(k)] + t * (x[std::size_t(k)] - q[std::size_t(k)])) * basis[std::size_t(m)][std::size_t(k)];
                    p[std::size_t(m)] = s;
                }
            }
            grid[std::size_t(j) * std::size_t(n) + std::size_t(i)] = p;
        }
    }

    std::ostringstream os;
    os << "# willmore torus mesh\n# grid " << n << " x " << n << " periodic, seam vertices duplicated\n";
    if (c.projection == "drop")
        os << "# projection drop " << c.drop << "\n";
    else
        os << "# projection stereographic " << fmt17(q[0]) << ' ' << fmt17(q[1]) << ' ' << fmt17(q[2]) << ' '
           << fmt17(q[3]) << "\n";
    const int m = n + 1;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            const auto& p = grid[std::size_t(j % n) * std::size_t(n) + std::size_t(i % n)];
            os << "v " << fmt17(p[0]) << ' ' << fmt17(p[1]) << ' ' << fmt17(p[2]) << "\n";
            if (i == n || j == n)
                os << "# seam " << (j * m + i + 1) << " duplicates " << ((j % n) * m + (i % n) + 1) << "\n";
        }
    }
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int a = j * m + i + 1;
            os << "f " << a << ' ' << a + 1 << ' ' << a + 1 + m << ' ' << a + m << "\n";
        }

    Outcome o;
    o.result = {{"immersion", {{"omega", cj(imm.lattice().omega())}, {"density", li.density}, {"inverted", imm.inverted()}}},
                {"vertices", m * m},
                {"faces", n * n},
                {"seam_vertices", 2 * n + 1},
                {"projection", c.projection}};
    if (c.projection == "drop")
        o.result["dropped_coordinate"] = c.drop;
    else
        o.result["min_relative_denominator"] = min_denominator;
    o.artifacts.push_back({c.output, os.str()});
    return o;
}

// ---------------------------------------------------------------- verify

Outcome verify_elliptic(const RunConfig& c)
{
    const EllipticKernel k{Lattice(c.omega)};
    const cplx w = c.omega;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    double ode = 0, per = 0, quasi = 0, parity = 0;
    const auto eta = k.quasi_periods();
    for (int i = 0; i < 64; ++i) {
        const cplx z = k.lattice().point(u(rng), u(rng));
        const WeierstrassValues v = k.values(z);
        const cplx rhs = 4.0 * v.wp * v.wp * v.wp - k.g2() * v.wp - k.g3();
        const double scale = std::abs(v.wp1 * v.wp1) + 4 * std::abs(v.wp * v.wp * v.wp) + std::abs(k.g2() * v.wp)
                             + std::abs(k.g3());
        ode = std::max(ode, std::abs(v.wp1 * v.wp1 - rhs) / scale);
        for (int g = 0; g < 2; ++g) {
            const cplx gamma = g == 0 ? cplx(1.0) : w;
            const WeierstrassValues s = k.values(z + gamma);
            per = std::max(per, std::abs(s.wp - v.wp) / (1 + std::abs(v.wp)));
            quasi = std::max(quasi, std::abs(s.zeta - v.zeta - eta[std::size_t(g)])
                                        / (1 + std::abs(v.zeta) + std::abs(eta[std::size_t(g)])));
        }
        const WeierstrassValues m = k.values(-z);
        parity = std::max(parity, std::abs(m.wp - v.wp) / (1 + std::abs(v.wp)));
        parity = std::max(parity, std::abs(m.zeta + v.zeta) / (1 + std::abs(v.zeta)));
    }
    const double legendre
        = std::abs(eta[0] * w - eta[1] - cplx(0, 2 * kPi)) / std::max(1.0, std::abs(eta[0] * w) + std::abs(eta[1]));
    const double disc_rel = std::abs(k.discriminant())
                            / (std::pow(std::abs(k.g2()), 3) + 27 * std::pow(std::abs(k.g3()), 2));
    std::vector<Check> checks = {
        check("ode_relative_residual", ode, "<=", 1e-10),
        check("periodicity_residual", per, "<=", 1e-10),
        check("quasi_periodicity_residual", quasi, "<=", 1e-10),
        check("parity_residual", parity, "<=", 1e-10),
        check("legendre_residual", legendre, "<=", 1e-10),
        check("relative_discriminant", disc_rel, ">", 1e-8),
    };
    const cplx canon = canonicalize(w).cls.omega();
    std::string symmetry = "none";
    if (std::abs(canon - I) <= 1e-12) {
        symmetry = "square";
        checks.push_back(check("g3_residual", std::abs(k.g3()) / std::max(1.0, std::pow(std::abs(k.g2()), 1.5)), "<=", 1e-10));
    } else if (std::abs(canon - std::polar(1.0, kPi / 3)) <= 1e-12) {
        symmetry = "hexagonal";
        checks.push_back(check("g2_residual", std::abs(k.g2()) / std::max(1.0, std::pow(std::abs(k.g3()), 2.0 / 3.0)), "<=", 1e-10));
    }
    Outcome o;
    o.tolerances = {{"identities", 1e-10}, {"discriminant", 1e-8}};
    o.result = {{"omega", cj(w)},
                {"canonical_omega", cj(canon)},
                {"symmetry", symmetry},
                {"g2", cj(k.g2())},
                {"g3", cj(k.g3())},
                {"eta", json::array({cj(eta[0]), cj(eta[1])})},
                {"half_period_values", json::array({cj(k.half_period_values()[0]), cj(k.half_period_values()[1]),
                                                    cj(k.half_period_values()[2])})},
                {"checks", checks_json(checks)}};
    o.pass = all_pass(checks);
    return o;
}

Outcome verify_immersion(const RunConfig& c)
{
    const LoadedImmersion li = immersion_for(c);
    const RegularityReport r = regularity_report(li.immersion, *c.grid);
    const DensityReport d = density_report(li.immersion);
    std::vector<Check> checks = {
        check("max_pole_value", r.max_pole_value, "<=", 1e-12),
        check("max_pole_fz", r.max_pole_fz, "<=", 1e-10),
        check("min_pole_fzbar", r.min_pole_fzb, ">", 0.0),
        check("chart_value_mismatch", r.chart_value_mismatch, "<=", 1e-10),
        check("chart_derivative_mismatch", r.chart_derivative_mismatch, "<=", 1e-8),
        check("max_conformality_residual", r.max_conformality_residual, "<=", 1e-10),
        check("min_singular_value", r.min_singular_value, ">", 0.0),
        check("density", d.density, "==", li.density),
    };
    Outcome o;
    o.tolerances = {{"pole_value", 1e-12}, {"pole_fz", 1e-10}, {"chart_value", 1e-10}, {"chart_derivative", 1e-8},
                    {"conformality", 1e-10}};
    o.result = {{"omega", cj(li.immersion.lattice().omega())},
                {"grid", r.grid},
                {"poles", r.poles},
                {"density", d.density},
                {"checks", checks_json(checks)}};
    o.pass = all_pass(checks);
    return o;
}

// Two seeded points at torus distance at least a fifth of the shortest period.
std::array<cplx, 2> seeded_poles(const Lattice& lat, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const cplx p1 = lat.point(u(rng), u(rng));
    for (;;) {
        const cplx p2 = lat.point(u(rng), u(rng));
        if (lat.torus_distance(p1, p2) >= 0.2 * lat.min_period())
            return {p1, p2};
    }
}

json conformality_json(const ConformalityReport& r)
{
    json eq = json::object();
    for (const NamedValue& v : r.equations)
        eq[v.name] = v.value;
    return {{"equations", eq},
            {"max_equation", r.max_equation},
            {"sampled_residual", r.sampled_residual},
            {"pointwise_residual", r.pointwise_residual},
            {"equations_hold", r.equations_hold},
            {"conformal", r.conformal},
            {"consistent", r.consistent}};
}

Outcome verify_nonexistence(const RunConfig& c)
{
    auto kernel = std::make_shared<const EllipticKernel>(Lattice(c.omega));
    const auto [p1, p2] = seeded_poles(kernel->lattice(), c.seed);
    const FunctionBasis fb(kernel, p1, p2);
    std::vector<Check> checks;

    const GramReport gr = gram_report(fb, true, 200, c.seed);
    const GramReport gf = gram_report(fb, false, 200, c.seed);
    checks.push_back(check("reduced_gram_rank", gr.rank, "==", FunctionBasis::kReducedSize));
    checks.push_back(check("reduced_gram_condition", gr.condition, "<=", 1e10));
    checks.push_back(check("full_list_rank", gf.rank, "==", FunctionBasis::kReducedSize));

    const auto audit = pole_order_audit(fb);
    json jaudit = json::array();
    int mismatches = 0;
    for (const PoleOrderEntry& e : audit) {
        mismatches += e.matches ? 0 : 1;
        jaudit.push_back({{"element", e.element},
                          {"expected", e.expected},
                          {"slope", e.slope},
                          {"leading", json::array({cj(e.leading[0]), cj(e.leading[1])})},
                          {"matches", e.matches}});
    }
    checks.push_back(check("pole_order_mismatches", mismatches, "==", 0));

    const C4 a = {1.0, -I, 0.0, 0.0};
    const C4 zero = {0.0, 0.0, 0.0, 0.0};
    const cplx beta(0.7, -0.3), gamma(-0.4, 1.1), d1(0.25, 0.5), d3(-1.3, 0.2);
    const ConformalityReport sat = verify_conformality_system(
        a, {beta, -I * beta, gamma, -I * gamma}, zero, {d1, -I * d1, d3, -I * d3}, fb, c.tolerance, 200, c.seed);
    checks.push_back(check("satisfying_sampled_residual", sat.sampled_residual, "<=", c.tolerance));
    checks.push_back(check("satisfying_consistent", sat.consistent && sat.conformal, "==", 1));

    const ConformalityReport vio
        = verify_conformality_system({1.0, 0.0, 0.0, 0.0}, zero, zero, zero, fb, c.tolerance, 200, c.seed);
    checks.push_back(check("violating_sampled_residual", vio.sampled_residual, ">=", 1e-2));
    checks.push_back(check("violating_consistent", vio.consistent && !vio.conformal, "==", 1));

    std::mt19937_64 rng(c.seed + 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto rc4 = [&] {
        C4 v;
        for (cplx& x : v)
            x = cplx(nd(rng), nd(rng));
        return v;
    };
    double random_min = 1e300;
    int random_inconsistent = 0;
    for (int t = 0; t < 10; ++t) {
        const C4 ra = rc4(), rb = rc4(), rc = rc4(), rd = rc4();
        const ConformalityReport r = verify_conformality_system(ra, rb, rc, rd, fb, c.tolerance, 200, c.seed);
        random_min = std::min(random_min, r.sampled_residual);
        random_inconsistent += r.consistent ? 0 : 1;
    }
    checks.push_back(check("random_min_sampled_residual", random_min, ">=", 1e-2));
    checks.push_back(check("random_inconsistent", random_inconsistent, "==", 0));

    const BranchWitness bw = ab_zero_witness(fb, cplx(1.0, 0.2), cplx(-0.3, 0.8));
    checks.push_back(check("ab_zero_branch_points", double(bw.branch_points.size()), "==", 4));
    checks.push_back(check("ab_zero_max_abs_fz", bw.max_abs_fz, "<=", 1e-6));

    json periods = json::array();
    const cplx wpu = kernel->wp(p1 - p2);
    const auto eta = kernel->quasi_periods();
    std::array<cplx, 2> sig{};
    for (int k = 1; k <= 2; ++k) {
        const PeriodReport pr = period_integrals(fb, k);
        const cplx om = k == 1 ? cplx(1.0) : c.omega;
        const cplx closed = -eta[std::size_t(k - 1)] - wpu * om;
        sig[std::size_t(k - 1)] = pr.sigma;
        const double err = std::abs(pr.sigma - closed) / std::max(1.0, std::abs(closed));
        checks.push_back(check("period_l_mismatch_" + std::to_string(k), pr.l_mismatch, "<=", 1e-8));
        checks.push_back(check("period_closed_form_" + std::to_string(k), err, "<=", 1e-8));
        periods.push_back({{"k", k}, {"xi", cj(pr.xi)}, {"sigma", cj(pr.sigma)}, {"l_mismatch", pr.l_mismatch},
                           {"closed_form", cj(closed)}});
    }
    const cplx dd = forced_d(1.0, sig[0], sig[1], c.omega);

    Outcome o;
    o.tolerances = {{"system", c.tolerance}, {"violation", 1e-2}, {"gram_condition", 1e10}, {"witness", 1e-6},
                    {"period", 1e-8}};
    o.result = {
        {"omega", cj(c.omega)},
        {"p1", cj(p1)},
        {"p2", cj(p2)},
        {"basis", FunctionBasis::names()},
        {"fold_constants", json::array({cj(fb.fold_constants()[0]), cj(fb.fold_constants()[1]),
                                        cj(fb.fold_constants()[2]), cj(fb.fold_constants()[3])})},
        {"gram", {{"reduced_condition", gr.condition}, {"reduced_rank", gr.rank}, {"full_rank", gf.rank},
                  {"full_singular_values", gf.singular_values}}},
        {"pole_orders", jaudit},
        {"satisfying_system", conformality_json(sat)},
        {"violating_system", conformality_json(vio)},
        {"ab_zero_witness", {{"branch_points", points_json(bw.branch_points)},
                             {"max_abs_fz", bw.max_abs_fz},
                             {"min_abs_fz_elsewhere", bw.min_abs_fz_elsewhere}}},
        {"periods", periods},
        {"forced_d_for_unit_s", cj(dd)},
        {"checks", checks_json(checks)},
    };
    o.pass = all_pass(checks);
    return o;
}

json branch_system_json(const BranchSystemReport& r)
{
    json p = json::object();
    for (const NamedValue& v : r.pairings)
        p[v.name] = v.value;
    return {{"pairings", p},
            {"max_pairing", r.max_pairing},
            {"sampled_residual", r.sampled_residual},
            {"pointwise_residual", r.pointwise_residual},
            {"equations_hold", r.equations_hold},
            {"conformal", r.conformal},
            {"consistent", r.consistent},
            {"period_defect", r.period_defect},
            {"double_cover", r.double_cover},
            {"degree", r.degree},
            {"branch_points", branch_json(r.branch_points)}};
}

Outcome verify_branch(const RunConfig& c)
{
    auto kernel = std::make_shared<const EllipticKernel>(Lattice(c.omega));
    const C4 a = {1.0, -I, 0.0, 0.0};
    const C4 zero = {0.0, 0.0, 0.0, 0.0};
    std::vector<Check> checks;

    const BranchSystemReport dc = verify_branch_system(a, zero, zero, kernel, c.tolerance, 200, c.seed);
    checks.push_back(check("double_cover_sampled_residual", dc.sampled_residual, "<=", c.tolerance));
    checks.push_back(check("double_cover_detected", dc.double_cover, "==", 1));
    checks.push_back(check("double_cover_degree", dc.degree, "==", 2));
    const Lattice& lat = kernel->lattice();
    double worst = dc.branch_points.size() == 4 ? 0.0 : 1.0;
    for (cplx h : {cplx(0.0), cplx(0.5), 0.5 * lat.omega(), 0.5 * (1.0 + lat.omega())}) {
        double best = 1e300;
        for (const BranchPoint& b : dc.branch_points)
            best = std::min(best, lat.torus_distance(b.location, h));
        worst = std::max(worst, best);
    }
    checks.push_back(check("branch_points_at_half_periods", worst, "<=", 1e-8));

    const BranchSystemReport vio
        = verify_branch_system(a, {0.0, 0.0, 1.0, -I}, {0.0, 0.0, 1.0, 0.0}, kernel, c.tolerance, 200, c.seed);
    checks.push_back(check("violating_sampled_residual", vio.sampled_residual, ">=", 1e-2));
    checks.push_back(check("violating_consistent", vio.consistent && !vio.conformal, "==", 1));

    std::mt19937_64 rng(c.seed + 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    double min_defect = 1e300;
    int misclassified = 0;
    for (int t = 0; t < 5; ++t) {
        const cplx beta(nd(rng), nd(rng)), delta(nd(rng), nd(rng));
        const BranchSystemReport r = verify_branch_system(a, {beta, -I * beta, 0.0, 0.0},
                                                          {delta, -I * delta, 0.0, 0.0}, kernel, c.tolerance, 200,
                                                          c.seed);
        min_defect = std::min(min_defect, r.period_defect);
        misclassified += (r.conformal && !r.double_cover) ? 0 : 1;
    }
    checks.push_back(check("non_real_min_period_defect", min_defect, ">", 1e-3));
    checks.push_back(check("non_real_misclassified", misclassified, "==", 0));

    Outcome o;
    o.tolerances = {{"system", c.tolerance}, {"violation", 1e-2}, {"branch_location", 1e-8}, {"period_defect", 1e-3}};
    o.result = {{"omega", cj(c.omega)},
                {"double_cover", branch_system_json(dc)},
                {"violating", branch_system_json(vio)},
                {"checks", checks_json(checks)}};
    o.pass = all_pass(checks);
    return o;
}

json modulus_json(const ModulusReport& r)
{
    return {{"estimated", cj(r.estimated_modulus)},
            {"canonical", cj(r.canonical_modulus)},
            {"residual", r.residual},
            {"iterations", r.iterations},
            {"grid", r.grid_n}};
}

Outcome verify_modulus(const RunConfig& c)
{
    const cplx s = c.omega;
    const double a = s.real(), b = s.imag();
    const int n = *c.grid;
    std::vector<Check> checks;

    const ModulusReport flat = estimate_modulus([&](double, double) { return Sym2{1, a, a * a + b * b}; }, {n});
    checks.push_back(check("constant_metric", std::abs(flat.estimated_modulus - s), "<=", 1e-6));
    checks.push_back(check("constant_metric_canonical",
                           std::abs(flat.canonical_modulus - canonicalize(s).cls.omega()), "<=", 1e-6));

    const double e = 0.05, w = 2 * kPi;
    auto g = [=](double x, double y) {
        const double c0 = 1 + a * e * w * std::cos(w * x), c1 = e * w * std::cos(w * y) + a;
        const double d0 = b * e * w * std::cos(w * x), d1 = b;
        return Sym2{c0 * c0 + d0 * d0, c0 * c1 + d0 * d1, c1 * c1 + d1 * d1};
    };
    const ModulusReport diffeo = estimate_modulus(g, {n});
    checks.push_back(check("periodic_diffeomorphism", std::abs(diffeo.estimated_modulus - s), "<=", 1e-3));
    const ModulusReport scaled = estimate_modulus(
        [&](double x, double y) {
            Sym2 m = g(x, y);
            const double rho = 1.5 + std::sin(w * x) * std::cos(w * y);
            for (double& v : m)
                v *= rho;
            return m;
        },
        {n});
    const double rescale_tol = std::max(1e-9, 10 * diffeo.residual);
    checks.push_back(check("conformal_rescaling", std::abs(scaled.estimated_modulus - diffeo.estimated_modulus),
                           "<=", rescale_tol));

    const PerturbationFamily fam = build_family(ConformalClass(s), std::nullopt, std::nullopt, c.seed);
    const ModulusReport t0 = tau(fam, n);
    checks.push_back(check("family_at_zero_eps", std::abs(t0.estimated_modulus - s), "<=", kTauTolerance));

    Outcome o;
    o.tolerances = {{"constant_metric", 1e-6}, {"diffeomorphism", 1e-3}, {"rescaling", rescale_tol},
                    {"family", kTauTolerance}};
    o.result = {{"omega", cj(s)},
                {"grid", n},
                {"constant_metric", modulus_json(flat)},
                {"periodic_diffeomorphism", modulus_json(diffeo)},
                {"conformal_rescaling", modulus_json(scaled)},
                {"family_at_zero_eps", modulus_json(t0)},
                {"checks", checks_json(checks)}};
    o.pass = all_pass(checks);
    return o;
}

Outcome dispatch(const RunConfig& c)
{
    if (c.command == "construct")
        return cmd_construct(c);
    if (c.command == "energy")
        return cmd_energy(c);
    if (c.command == "sweep")
        return cmd_sweep(c);
    if (c.command == "perturb")
        return cmd_perturb(c);
    if (c.command == "mesh")
        return cmd_mesh(c);
    if (c.target == "elliptic")
        return verify_elliptic(c);
    if (c.target == "immersion")
        return verify_immersion(c);
    if (c.target == "nonexistence-algebra")
        return verify_nonexistence(c);
    if (c.target == "branch-algebra")
        return verify_branch(c);
    return verify_modulus(c);
}

// ---------------------------------------------------------------- report plumbing

std::string strip_suffix(std::string path, std::string_view suffix)
{
    if (path.size() > suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
        path.resize(path.size() - suffix.size());
    return path;
}

// Where the JSON report goes; empty means the output stream.
std::string report_path(const RunConfig& c)
{
    if (c.output.empty())
        return {};
    if (c.command == "perturb" || c.command == "sweep")
        return c.output + ".json";
    if (c.command == "mesh")
        return strip_suffix(c.output, ".obj") + ".json";
    return c.output;
}

void write_file(const std::string& path, const std::string& contents)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << contents) || !f.flush())
        throw Error(ErrorKind::Io, "cannot write '" + path + "'");
}

json config_json(const RunConfig& c)
{
    json omega_list = json::array();
    for (cplx w : c.omega_list)
        omega_list.push_back(cj(w));
    return {
        {"command", c.command},
        {"target", c.target},
        {"omega", cj(c.omega)},
        {"k", c.k},
        {"grid", c.grid ? json(*c.grid) : json(nullptr)},
        {"refine", c.refine},
        {"eps_list", c.eps_list},
        {"omega_list", omega_list},
        {"k_list", c.k_list},
        {"tolerance", c.tolerance},
        {"seed", c.seed},
        {"delta", c.delta ? json(*c.delta) : json(nullptr)},
        {"alpha", c.alpha ? cj(*c.alpha) : json(nullptr)},
        {"branch", c.branch},
        {"double_cover", c.double_cover},
        {"parallel", c.parallel},
        {"timing", c.timing},
        {"n", c.mesh_n},
        {"projection", c.projection},
        {"drop", c.drop},
        {"projection_point", c.projection_point},
        {"in", c.input},
        {"out", c.output},
    };
}

json report_header(const RunConfig& c)
{
    return {{"tool", "willmore"}, {"version", kVersion}, {"command", c.command}, {"target", c.target},
            {"config", config_json(c)}, {"seed", c.seed}};
}

} // namespace

cplx parse_complex(std::string_view text)
{
    std::string s;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch)))
            s += ch == 'j' ? 'i' : ch;
    if (s.empty())
        invalid("empty complex number");
    if (s.back() != 'i')
        return parse_real(s, "complex number");
    s.pop_back();
    // Split before the last sign that is not part of an exponent.
    std::size_t split = std::string::npos;
    for (std::size_t i = s.size(); i-- > 1;)
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
            split = i;
            break;
        }
    const std::string re = split == std::string::npos ? "" : s.substr(0, split);
    std::string im = split == std::string::npos ? s : s.substr(split);
    if (im.empty() || im == "+")
        im = "1";
    else if (im == "-")
        im = "-1";
    if (im.front() == '+')
        im.erase(0, 1);
    return {re.empty() ? 0.0 : parse_real(re, "real part"), parse_real(im, "imaginary part")};
}

RunConfig config_from_json(const std::string& text, RunConfig c)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        invalid(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        invalid("config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "command")
                c.command = v.get<std::string>();
            else if (key == "target")
                c.target = v.get<std::string>();
            else if (key == "omega")
                c.omega = complex_from_json(v, "omega");
            else if (key == "k")
                c.k = v.get<int>();
            else if (key == "grid")
                c.grid = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
            else if (key == "refine")
                c.refine = v.get<int>();
            else if (key == "eps_list")
                c.eps_list = v.get<std::vector<double>>();
            else if (key == "omega_list") {
                c.omega_list.clear();
                for (const json& w : v)
                    c.omega_list.push_back(complex_from_json(w, "omega_list"));
            } else if (key == "k_list")
                c.k_list = v.get<std::vector<int>>();
            else if (key == "tolerance")
                c.tolerance = v.get<double>();
            else if (key == "seed")
                c.seed = v.get<std::uint64_t>();
            else if (key == "delta")
                c.delta = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "alpha")
                c.alpha = v.is_null() ? std::nullopt : std::optional<cplx>(complex_from_json(v, "alpha"));
            else if (key == "branch")
                c.branch = v.get<std::string>();
            else if (key == "double_cover")
                c.double_cover = v.get<bool>();
            else if (key == "parallel")
                c.parallel = v.get<bool>();
            else if (key == "timing")
                c.timing = v.get<bool>();
            else if (key == "n")
                c.mesh_n = v.get<int>();
            else if (key == "projection")
                c.projection = v.get<std::string>();
            else if (key == "drop")
                c.drop = v.get<int>();
            else if (key == "projection_point")
                c.projection_point = v.get<std::array<double, 4>>();
            else if (key == "in")
                c.input = v.get<std::string>();
            else if (key == "out")
                c.output = v.get<std::string>();
            else
                invalid("unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        invalid(std::string("bad config value: ") + e.what());
    }
    return c;
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig validated(RunConfig c)
{
    if (!kCommands.count(c.command))
        invalid("unknown command '" + c.command + "'");
    if (c.command == "verify" && !kTargets.count(c.target))
        invalid("unknown verify target '" + c.target + "'");
    if (c.command != "verify")
        c.target.clear();
    auto check_omega = [](cplx w) {
        if (!(w.imag() > 0.0) || !std::isfinite(w.real()))
            throw Error(ErrorKind::NonPositiveImaginaryPart, "omega must have positive imaginary part");
    };
    check_omega(c.omega);
    for (cplx w : c.omega_list)
        check_omega(w);
    if (!c.double_cover && c.input.empty() && c.k < 3)
        invalid("k must be at least 3");
    for (int k : c.k_list)
        if (k < 3)
            invalid("k_list entries must be at least 3");
    if (!c.grid) {
        if (c.command == "energy" || c.command == "sweep")
            c.grid = 512;
        else if (c.command == "construct")
            c.grid = 64;
        else
            c.grid = 256;
    }
    if (*c.grid < 8 || *c.grid > 8192)
        invalid("grid must lie in [8, 8192]");
    if (c.refine < 0 || c.refine > 8)
        invalid("refine must lie in [0, 8]");
    if (!(c.tolerance > 0.0))
        invalid("tolerance must be positive");
    if (c.delta && !(*c.delta > 0.0 && *c.delta <= 0.1))
        invalid("delta must lie in (0, 0.1]");
    if (c.branch != "centered" && c.branch != "canonical")
        invalid("branch must be centered or canonical");
    if (c.command == "perturb") {
        if (c.eps_list.empty())
            invalid("perturb needs eps_list");
        for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
            if (!(c.eps_list[i] > 0.0 && c.eps_list[i] <= 1.0))
                invalid("eps_list entries must lie in (0, 1]");
            if (i > 0 && !(c.eps_list[i] < c.eps_list[i - 1]))
                invalid("eps_list must be strictly decreasing");
        }
    }
    if (c.command == "mesh") {
        if (c.output.empty())
            invalid("mesh needs an output path");
        if (c.mesh_n < 2 || c.mesh_n > 4096)
            invalid("n must lie in [2, 4096]");
        if (c.projection != "drop" && c.projection != "stereographic")
            invalid("projection must be drop or stereographic");
        if (c.drop < 1 || c.drop > 4)
            invalid("drop must lie in [1, 4]");
        double qq = 0;
        for (double x : c.projection_point)
            qq += x * x;
        if (c.projection == "stereographic" && !(qq > 0.0))
            invalid("projection point must be nonzero");
    }
    if ((c.command == "perturb" || c.command == "sweep") && !c.output.empty()) {
        c.output = strip_suffix(strip_suffix(c.output, ".csv"), ".json");
    }
    return c;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err)
{
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig c = config;
    json report = report_header(c);
    int code = 0;
    try {
        c = validated(config);
        report = report_header(c);
        Outcome o = dispatch(c);
        report["tolerances"] = o.tolerances;
        report["status"] = o.pass ? "pass" : "fail";
        report["result"] = std::move(o.result);
        if (c.timing)
            report["timing"] = {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
        for (const Artifact& a : o.artifacts)
            write_file(a.path, a.contents);
        code = o.pass ? 0 : 2;
    } catch (const Error& e) {
        code = is_validation_error(e.kind()) ? 1 : 2;
        report["status"] = "error";
        report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
        err << "willmore: " << e.what() << "\n";
    } catch (const std::exception& e) {
        code = 2;
        report["status"] = "error";
        report["error"] = {{"kind", "Internal"}, {"message", e.what()}};
        err << "willmore: " << e.what() << "\n";
    }
    const std::string text = report.dump(2) + "\n";
    const std::string path = report_path(c);
    if (path.empty()) {
        out << text;
        return code;
    }
    try {
        write_file(path, text);
    } catch (const Error& e) {
        err << "willmore: " << e.what() << "\n";
        out << text;
        return code == 0 ? 1 : code;
    }
    return code;
}

int cli_main(int argc, char** argv)
{
    CLI::App app{"Conformal Willmore tori in R^4: construction, energy quadrature, verification"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration; explicit flags override it");

    struct Raw {
        std::string omega, alpha, target, branch, in, out, projection;
        int k = 0, grid = 0, refine = 0, n = 0, drop = 0;
        std::uint64_t seed = 0;
        double tolerance = 0, delta = 0;
        std::vector<double> eps_list;
        std::vector<std::string> omega_list;
        std::vector<int> k_list;
        std::vector<double> projection_point;
        bool double_cover = false, parallel = false, timing = false;
    } raw;
    std::vector<std::pair<std::string, std::function<void(RunConfig&)>>> appliers = {
        {"--omega", [&](RunConfig& c) { c.omega = parse_complex(raw.omega); }},
        {"--alpha", [&](RunConfig& c) { c.alpha = parse_complex(raw.alpha); }},
        {"target", [&](RunConfig& c) { c.target = raw.target; }},
        {"--branch", [&](RunConfig& c) { c.branch = raw.branch; }},
        {"--in", [&](RunConfig& c) { c.input = raw.in; }},
        {"--out", [&](RunConfig& c) { c.output = raw.out; }},
        {"--projection", [&](RunConfig& c) { c.projection = raw.projection; }},
        {"--k", [&](RunConfig& c) { c.k = raw.k; }},
        {"--grid", [&](RunConfig& c) { c.grid = raw.grid; }},
        {"--refine", [&](RunConfig& c) { c.refine = raw.refine; }},
        {"--n", [&](RunConfig& c) { c.mesh_n = raw.n; }},
        {"--drop", [&](RunConfig& c) { c.drop = raw.drop; }},
        {"--seed", [&](RunConfig& c) { c.seed = raw.seed; }},
        {"--tolerance", [&](RunConfig& c) { c.tolerance = raw.tolerance; }},
        {"--delta", [&](RunConfig& c) { c.delta = raw.delta; }},
        {"--eps-list", [&](RunConfig& c) { c.eps_list = raw.eps_list; }},
        {"--omega-list",
         [&](RunConfig& c) {
             c.omega_list.clear();
             for (const std::string& s : raw.omega_list)
                 c.omega_list.push_back(parse_complex(s));
         }},
        {"--k-list", [&](RunConfig& c) { c.k_list = raw.k_list; }},
        {"--projection-point",
         [&](RunConfig& c) {
             if (raw.projection_point.size() != 4)
                 invalid("projection point needs four coordinates");
             std::copy(raw.projection_point.begin(), raw.projection_point.end(), c.projection_point.begin());
         }},
        {"--double-cover", [&](RunConfig& c) { c.double_cover = raw.double_cover; }},
        {"--parallel", [&](RunConfig& c) { c.parallel = raw.parallel; }},
        {"--timing", [&](RunConfig& c) { c.timing = raw.timing; }},
    };

    auto add_omega = [&](CLI::App* s) { s->add_option("--omega", raw.omega, "Torus modulus, e.g. 0.5+1.2i"); };
    auto add_seed = [&](CLI::App* s) { s->add_option("--seed", raw.seed, "Random seed"); };
    auto add_grid = [&](CLI::App* s) { s->add_option("--grid", raw.grid, "Grid points per side"); };
    auto add_refine = [&](CLI::App* s) { s->add_option("--refine", raw.refine, "Quadrature refinement levels"); };
    auto add_out = [&](CLI::App* s, const std::string& help) { s->add_option("--out", raw.out, help); };
    auto add_timing = [&](CLI::App* s) { s->add_flag("--timing", raw.timing, "Add wall-clock times to the report"); };
    auto add_source = [&](CLI::App* s) {
        add_omega(s);
        add_seed(s);
        s->add_option("--k", raw.k, "Density of the point at the poles (>= 3)");
        s->add_flag("--double-cover", raw.double_cover, "Use the inverted double cover of the sphere");
    };

    CLI::App* construct = app.add_subcommand("construct", "Build a Willmore torus and serialize it");
    add_source(construct);
    add_grid(construct);
    add_out(construct, "Immersion JSON path");
    add_timing(construct);

    CLI::App* energy = app.add_subcommand("energy", "Willmore energy by adaptive quadrature");
    add_source(energy);
    energy->add_option("--in", raw.in, "Immersion JSON written by construct");
    add_grid(energy);
    add_refine(energy);
    add_out(energy, "Report path");
    add_timing(energy);

    CLI::App* verify = app.add_subcommand("verify", "Run a verification suite");
    verify->add_option("target", raw.target, "Suite")->required()->check(
        CLI::IsMember({"elliptic", "immersion", "nonexistence-algebra", "branch-algebra", "modulus"}));
    add_source(verify);
    verify->add_option("--in", raw.in, "Immersion JSON (immersion suite)");
    add_grid(verify);
    verify->add_option("--tolerance", raw.tolerance, "Tolerance of the algebraic systems");
    add_out(verify, "Report path");
    add_timing(verify);

    CLI::App* perturb = app.add_subcommand("perturb", "Perturbed double cover energy sweep");
    add_omega(perturb);
    add_seed(perturb);
    perturb->add_option("--eps-list", raw.eps_list, "Decreasing epsilons, comma separated")->delimiter(',');
    add_grid(perturb);
    add_refine(perturb);
    perturb->add_option("--delta", raw.delta, "Chart radius parameter");
    perturb->add_option("--alpha", raw.alpha, "Value with 1/(wp - alpha) as first component");
    perturb->add_option("--branch", raw.branch, "Cutoff chart branch")->check(CLI::IsMember({"centered", "canonical"}));
    perturb->add_flag("--parallel", raw.parallel, "Start every solve from omega");
    add_out(perturb, "Output prefix for .csv and .json");
    add_timing(perturb);

    CLI::App* mesh = app.add_subcommand("mesh", "Export an OBJ quad mesh");
    add_source(mesh);
    mesh->add_option("--in", raw.in, "Immersion JSON written by construct");
    mesh->add_option("--n", raw.n, "Quads per side");
    mesh->add_option("--projection", raw.projection, "drop or stereographic")
        ->check(CLI::IsMember({"drop", "stereographic"}));
    mesh->add_option("--drop", raw.drop, "Coordinate to drop (1..4)");
    mesh->add_option("--projection-point", raw.projection_point, "Projection point in R^4, comma separated")
        ->delimiter(',');
    add_out(mesh, "OBJ path");
    add_timing(mesh);

    CLI::App* sweep = app.add_subcommand("sweep", "Energy over a grid of moduli and densities");
    sweep->add_option("--omega-list", raw.omega_list, "Moduli, comma separated")->delimiter(',');
    sweep->add_option("--k-list", raw.k_list, "Densities, comma separated")->delimiter(',');
    sweep->add_flag("--double-cover", raw.double_cover, "Use the inverted double cover instead of k");
    add_omega(sweep);
    add_seed(sweep);
    add_grid(sweep);
    add_refine(sweep);
    add_out(sweep, "Output prefix for .csv and .json");
    add_timing(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    RunConfig cfg;
    CLI::App* sub = app.get_subcommands().front();
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path, std::ios::binary);
            if (!in)
                throw Error(ErrorKind::Io, "cannot read '" + config_path + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            cfg = config_from_json(ss.str());
        }
        cfg.command = sub->get_name();
        for (const auto& [name, apply] : appliers) {
            const CLI::Option* opt = sub->get_option_no_throw(name);
            if (opt && opt->count() > 0)
                apply(cfg);
        }
    } catch (const Error& e) {
        std::cerr << "willmore: " << e.what() << "\n";
        const json report = {{"tool", "willmore"},
                             {"version", kVersion},
                             {"command", sub->get_name()},
                             {"status", "error"},
                             {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}};
        std::cout << report.dump(2) << "\n";
        return is_validation_error(e.kind()) ? 1 : 2;
    }
    return run(cfg, std::cout, std::cerr);
}

} // namespace willmore
