#include <willmore/cli.hpp>
#include <willmore/errors.hpp>

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace willmore;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch()
{
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / ("willmore_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Spawned {
    int code = -1;
    std::string out;
};

Spawned spawn(const std::string& args, const std::string& tag)
{
    const fs::path out = scratch() / (tag + ".stdout");
    const std::string cmd = "cd '" + scratch().string() + "' && '" WILLMORE_CLI_PATH "' " + args + " > '" + out.string()
                            + "' 2> /dev/null";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

int run_inprocess(const RunConfig& c, json& report)
{
    std::ostringstream out, err;
    const int code = run(c, out, err);
    report = json::parse(out.str());
    return code;
}

} // namespace

TEST_CASE("parse_complex")
{
    CHECK(parse_complex("0.5+1.2i") == cplx(0.5, 1.2));
    CHECK(parse_complex("0.3 - 1.1i") == cplx(0.3, -1.1));
    CHECK(parse_complex("i") == cplx(0, 1));
    CHECK(parse_complex("-i") == cplx(0, -1));
    CHECK(parse_complex("2.5i") == cplx(0, 2.5));
    CHECK(parse_complex("1e-3+2E+1j") == cplx(1e-3, 20));
    CHECK(parse_complex("-0.75") == cplx(-0.75, 0));
    CHECK(parse_complex("1+i") == cplx(1, 1));
    for (const char* bad : {"", "abc", "1+2", "1+2ii", "i1"}) {
        try {
            (void)parse_complex(bad);
            FAIL("expected InvalidArgument for '" << bad << "'");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidArgument);
        }
    }
}

TEST_CASE("config file and validation")
{
    RunConfig base;
    base.k = 7;
    const RunConfig c = config_from_json(
        R"({"command": "perturb", "omega": {"re": 0.3, "im": 1.1}, "eps_list": [0.2, 0.1], "alpha": "1+0.5i", "grid": 64})",
        base);
    CHECK(c.command == "perturb");
    CHECK(c.omega == cplx(0.3, 1.1));
    CHECK(c.k == 7);
    CHECK(c.eps_list == std::vector<double>{0.2, 0.1});
    CHECK(*c.alpha == cplx(1, 0.5));
    CHECK(*c.grid == 64);
    CHECK(config_from_json(R"({"omega": [0.5, 1.2]})").omega == cplx(0.5, 1.2));

    // Round trip through the serialized form.
    const RunConfig back = config_from_json(config_to_json(c));
    CHECK(back.omega == c.omega);
    CHECK(back.eps_list == c.eps_list);
    CHECK(*back.alpha == *c.alpha);

    CHECK_THROWS_AS(config_from_json(R"({"unknown": 1})"), Error);
    CHECK_THROWS_AS(config_from_json(R"({"k": "four"})"), Error);
    CHECK_THROWS_AS(config_from_json("[1, 2]"), Error);

    RunConfig e;
    e.command = "energy";
    CHECK(*validated(e).grid == 512);
    e.command = "verify";
    e.target = "modulus";
    CHECK(*validated(e).grid == 256);

    auto kind_of = [](RunConfig r) {
        try {
            (void)validated(r);
        } catch (const Error& err) {
            return err.kind();
        }
        return ErrorKind::ConvergenceFailure;
    };
    RunConfig bad;
    bad.command = "energy";
    bad.omega = cplx(0.5, -1.0);
    CHECK(kind_of(bad) == ErrorKind::NonPositiveImaginaryPart);
    bad.omega = cplx(0, 1);
    bad.k = 2;
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
    bad.k = 4;
    bad.command = "perturb";
    bad.eps_list = {0.1, 0.2};
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
    bad.eps_list = {};
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
    bad.command = "verify";
    bad.target = "everything";
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
    bad.command = "mesh";
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
    bad.command = "launch";
    CHECK(kind_of(bad) == ErrorKind::InvalidArgument);
}

TEST_CASE("in-process verify elliptic")
{
    RunConfig c;
    c.command = "verify";
    c.target = "elliptic";
    json r;
    CHECK(run_inprocess(c, r) == 0);
    CHECK(r["tool"] == "willmore");
    CHECK(r["version"] == kVersion);
    CHECK(r["status"] == "pass");
    CHECK(r["seed"] == 0);
    CHECK(r["config"]["omega"]["im"] == 1.0);
    CHECK(r.contains("tolerances"));
    CHECK(r["result"]["symmetry"] == "square");
    bool g3 = false;
    for (const json& ch : r["result"]["checks"])
        if (ch["name"] == "g3_residual") {
            g3 = true;
            CHECK(ch["value"].get<double>() <= 1e-10);
        }
    CHECK(g3);
    CHECK_FALSE(r.contains("timing"));

    c.omega = cplx(1.0, 0.0);
    CHECK(run_inprocess(c, r) == 1);
    CHECK(r["status"] == "error");
    CHECK(r["error"]["kind"] == "NonPositiveImaginaryPart");
}

TEST_CASE("exit codes of the binary")
{
    CHECK(spawn("verify elliptic --omega i", "ok").code == 0);
    CHECK(spawn("verify elliptic --omega 0.5-1i", "neg").code == 1);
    CHECK(spawn("verify elliptic --omega banana", "parse").code == 1);
    CHECK(spawn("energy --frobnicate", "flag").code == 1);
    CHECK(spawn("perturb --omega 0.3+1.1i --eps-list 0.05,0.1", "unsorted").code == 1);
    CHECK(spawn("--version", "version").code == 0);

    // A packing failure is a numerical failure and still produces a diagnostic report.
    const Spawned s = spawn("perturb --omega i --alpha 1e8 --delta 0.1 --eps-list 0.1 --grid 32", "packing");
    CHECK(s.code == 2);
    const json r = json::parse(s.out);
    CHECK(r["status"] == "error");
    CHECK(r["error"]["kind"] == "ChartPackingFailure");
    CHECK(r["config"]["delta"] == 0.1);
}

TEST_CASE("identical runs produce identical bytes")
{
    const Spawned a = spawn("verify nonexistence-algebra --omega 0.5+1.2i --seed 3", "det_a");
    const Spawned b = spawn("verify nonexistence-algebra --omega 0.5+1.2i --seed 3", "det_b");
    CHECK(a.code == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);

    REQUIRE(spawn("perturb --omega 0.3+1.1i --eps-list 0.2,0.1 --grid 48 --refine 1 --out p1", "p1").code == 0);
    REQUIRE(spawn("perturb --omega 0.3+1.1i --eps-list 0.2,0.1 --grid 48 --refine 1 --out p2", "p2").code == 0);
    CHECK(slurp(scratch() / "p1.csv") == slurp(scratch() / "p2.csv"));
    json j1 = json::parse(slurp(scratch() / "p1.json")), j2 = json::parse(slurp(scratch() / "p2.json"));
    CHECK(j1["result"] == j2["result"]);
}

TEST_CASE("perturb CSV layout")
{
    REQUIRE(spawn("perturb --omega 0.3+1.1i --eps-list 0.2,0.1 --grid 48 --refine 1 --out csv.csv", "csv").code == 0);
    const std::string text = slurp(scratch() / "csv.csv");
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t e = text.find("\r\n", pos);
        REQUIRE(e != std::string::npos);
        lines.push_back(text.substr(pos, e - pos));
        pos = e + 2;
    }
    REQUIRE(lines.size() == 3);
    CHECK(lines[0]
          == "epsilon,sigma_re,sigma_im,tau_residual,willmore_energy,energy_error_indicator,min_singular_value");
    CHECK(lines[1].rfind("0.20000000000000001,", 0) == 0);
    double prev = 1e300;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::stringstream ss(lines[i]);
        std::vector<double> v;
        for (std::string f; std::getline(ss, f, ',');)
            v.push_back(std::stod(f));
        REQUIRE(v.size() == 7);
        CHECK(v[3] <= 1e-3);
        CHECK(v[4] > 8 * 3.141592653589793);
        CHECK(v[4] < prev);
        CHECK(v[6] > 0.0);
        prev = v[4];
    }
    const json r = json::parse(slurp(scratch() / "csv.json"));
    CHECK(r["command"] == "perturb");
    CHECK(r["result"]["rows"].size() == 2);
    CHECK(r["result"]["rows"][0]["willmore_energy"].contains("error_indicator"));
}

TEST_CASE("construct then energy")
{
    REQUIRE(spawn("construct --omega 0.5+1.2i --k 4 --out imm.json", "construct").code == 0);
    const json imm = json::parse(slurp(scratch() / "imm.json"));
    CHECK(imm["status"] == "pass");
    CHECK(imm["result"]["density"]["value"] == 4);
    CHECK(imm["result"]["immersion"]["poles"].size() == 4);

    const Spawned e = spawn("energy --in imm.json --grid 128 --refine 2", "energy");
    REQUIRE(e.code == 0);
    const json r = json::parse(e.out);
    const double w = r["result"]["willmore_energy"]["value"];
    CHECK(std::abs(w - 16 * 3.141592653589793) <= 0.01 * 16 * 3.141592653589793);
    CHECK(r["result"]["target"].get<double>() == doctest::Approx(16 * 3.141592653589793));

    // A tampered pole list is rejected.
    json bad = imm;
    bad["result"]["immersion"]["poles"][0]["re"] = 0.123;
    std::ofstream(scratch() / "bad.json") << bad.dump();
    CHECK(spawn("energy --in bad.json --grid 32", "tampered").code == 1);
    CHECK(spawn("energy --in missing.json --grid 32", "missing").code == 1);
}

TEST_CASE("config file with overriding flags")
{
    std::ofstream(scratch() / "run.json") << R"({"command": "verify", "omega": "0.5+1.2i", "seed": 9, "grid": 77})";
    const Spawned s = spawn("--config run.json verify elliptic --seed 4", "cfg");
    REQUIRE(s.code == 0);
    const json r = json::parse(s.out);
    CHECK(r["seed"] == 4);
    CHECK(r["config"]["grid"] == 77);
    CHECK(r["config"]["omega"]["re"] == 0.5);
}

TEST_CASE("mesh export")
{
    REQUIRE(spawn("mesh --omega 0.5+1.2i --k 3 --n 6 --drop 2 --out t.obj", "mesh").code == 0);
    const std::string text = slurp(scratch() / "t.obj");
    std::stringstream ss(text);
    std::vector<std::string> verts;
    int faces = 0, seams = 0;
    for (std::string line; std::getline(ss, line);) {
        if (line.rfind("v ", 0) == 0)
            verts.push_back(line);
        else if (line.rfind("f ", 0) == 0)
            ++faces;
        else if (line.rfind("# seam ", 0) == 0) {
            ++seams;
            int dup = 0, orig = 0;
            REQUIRE(std::sscanf(line.c_str(), "# seam %d duplicates %d", &dup, &orig) == 2);
            CHECK(verts[std::size_t(dup - 1)] == verts[std::size_t(orig - 1)]);
        }
    }
    CHECK(verts.size() == 49);
    CHECK(faces == 36);
    CHECK(seams == 13);
    const json r = json::parse(slurp(scratch() / "t.json"));
    CHECK(r["result"]["dropped_coordinate"] == 2);
    CHECK(spawn("mesh --omega 0.5+1.2i --k 3 --n 6", "mesh_noout").code == 1);
}
