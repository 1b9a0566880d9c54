#pragma once

#include "willmore/lattice.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace willmore {

inline constexpr const char* kVersion = "1.0.0";

/// One command-line run. Fields left unset fall back to per-command defaults.
struct RunConfig {
    std::string command;              // construct, energy, verify, perturb, mesh, sweep
    std::string target;               // verify: elliptic, immersion, nonexistence-algebra, branch-algebra, modulus
    cplx omega{0.0, 1.0};
    int k = 4;
    std::optional<int> grid;
    int refine = 3;
    std::vector<double> eps_list;
    std::vector<cplx> omega_list;
    std::vector<int> k_list;
    double tolerance = 1e-8;          // algebraic systems
    std::uint64_t seed = 0;
    std::optional<double> delta;
    std::optional<cplx> alpha;
    std::string branch = "centered";  // centered or canonical
    bool double_cover = false;
    bool parallel = false;
    bool timing = false;
    int mesh_n = 64;
    std::string projection = "drop";  // drop or stereographic
    int drop = 4;                     // coordinate dropped (1..4)
    std::array<double, 4> projection_point{0.0, 0.0, 0.0, 1.0};
    std::string input;
    std::string output;
};

/// Accepts "a+bi", "a-bi", "bi", "a", "i", "-i" (spaces ignored, j allowed for i).
/// Throws InvalidArgument.
cplx parse_complex(std::string_view text);

/// Reads a JSON object with the RunConfig field names ("eps_list", "omega": "0.3+1.1i" or [re, im], ...).
RunConfig config_from_json(const std::string& text, RunConfig base = {});
std::string config_to_json(const RunConfig& config);

/// Fills per-command defaults and checks preconditions. Throws InvalidArgument.
RunConfig validated(RunConfig config);

/// Executes the run. Reports go to config.output (or derived paths), or to out when no
/// output is set. Returns 0 on success, 1 on validation errors, 2 on numerical failures.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses flags (and an optional --config file, overridden by flags) and runs.
int cli_main(int argc, char** argv);

} // namespace willmore
