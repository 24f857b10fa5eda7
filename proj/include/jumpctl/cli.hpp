#pragma once

#include "jumpctl/backward.hpp"
#include "jumpctl/models.hpp"
#include "jumpctl/serialize.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jumpctl::cli {

inline constexpr const char* kToolName = "jumpctl";
inline constexpr const char* kToolVersion = JUMPCTL_VERSION;

/// Section -> key -> raw value text.
using Sections = std::map<std::string, std::map<std::string, std::string>>;

/// Malformed or out-of-range configuration. `where` names the file position
/// or the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& where, const std::string& what)
        : Error(where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

struct CertifyOptions {
    std::vector<double> p{2.0};
    std::size_t samples = 1000;
};

struct SimulateOptions {
    std::size_t control = 0;
    double p = 2.0;
    double epsilon = 0.15;
    double probe_time = 1.0;
    std::size_t csv_paths = 10;
    bool admissibility = false;
};

struct BsdeRunOptions {
    std::string backends = "lsmc";  // lsmc, markovian or both
    std::size_t control = 0;
    double p = 2.0;
    bool picard = false;
};

struct HjbRunOptions {
    double tol = 1e-6;
    double delta = 0.0;
    std::size_t max_iters = 50;
    bool closed_form = true;
    double closed_form_tol = 0.01;
};

struct DppOptions {
    double t = 0.5;
    std::vector<double> points{-1.0, 1.0};
    double tol = 0.02;
};

struct VerifyOptions {
    std::string mode = "both";  // classical, viscosity or both
    std::vector<double> points{-1.0, 1.0};
    std::size_t random_policies = 10;
    double classical_rel_tol = 0.02;
    double viscosity_rel_tol = 0.05;
    double viscosity_x0 = 1.0;
    double horizon = 1.0;
    std::string policy = "optimal";  // or a control index
};

/// Validated experiment configuration. `values` holds every schema key with
/// defaults filled in; the typed fields are derived from it.
struct ExperimentConfig {
    Sections values;

    std::string family = "LIN1-CTRL";
    Lin1Params lin1;
    OuDecayParams ou;
    std::vector<double> controls;  // LIN1-CTRL control points

    Numerics numerics;
    double x0 = 1.0;
    StateGrid grid;

    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t workers = 1;
    bool strict = false;

    CertifyOptions certify;
    SimulateOptions simulate;
    BsdeRunOptions bsde;
    HjbRunOptions hjb;
    DppOptions dpp;
    VerifyOptions verify;
};

/// Every accepted section and key with its default value text.
const Sections& default_sections();

/// Parses INI text. Syntax errors carry the line number; range errors name
/// the section and key (and the line when known). Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);
/// Builds a configuration from section values (missing keys take defaults).
ExperimentConfig config_from_sections(const Sections& values);

/// Replaces one value and re-validates.
ExperimentConfig with_value(const ExperimentConfig& cfg, const std::string& section, const std::string& key,
                            const std::string& value);

Json sections_to_json(const Sections& s);
Sections sections_from_json(const Json& j);

std::uint64_t fnv1a(std::string_view data);
/// FNV-1a of the canonical "section.key=value" listing, excluding run.out
/// and run.workers (neither affects any result).
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hex64(std::uint64_t v);

ProblemSpec build_problem(const ExperimentConfig& cfg);

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitError = 2;

struct RunResult {
    int exit_code = kExitOk;
    Json summary;
    std::vector<std::string> artifacts;
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"certify", "simulate", "bsde", "hjb", "dpp", "verify"};
    return names;
}

/// Runs one subcommand. Artifacts go to cfg.out when write_artifacts is set.
/// Library errors propagate to the caller.
RunResult run(const std::string& subcommand, const ExperimentConfig& cfg, bool write_artifacts = true);

struct ReplayResult {
    bool match = false;
    std::string message;
    Json expected;
    Json actual;
};

/// Re-runs the subcommand of a summary with its embedded configuration and
/// compares the headline numbers bit for bit. Throws ConfigError on a tool
/// or version mismatch.
ReplayResult replay(const Json& summary, std::optional<std::size_t> workers = std::nullopt);

}  // namespace jumpctl::cli
