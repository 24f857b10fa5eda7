#include "jumpctl/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace cli = jumpctl::cli;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;
    bool strict = false;
};

int run_subcommand(const std::string& name, const Flags& f) {
    auto cfg = cli::load_config(f.config);
    if (f.seed) cfg = cli::with_value(cfg, "run", "seed", std::to_string(*f.seed));
    if (f.out) cfg = cli::with_value(cfg, "run", "out", *f.out);
    if (f.workers) cfg = cli::with_value(cfg, "run", "workers", std::to_string(*f.workers));
    if (f.strict) cfg = cli::with_value(cfg, "run", "strict", "true");

    const auto result = cli::run(name, cfg);
    const auto& s = result.summary;
    for (const auto& a : s["assertions"])
        std::cout << (a["passed"].get<bool>() ? "  ok    " : "  FAIL  ") << a["name"].get<std::string>() << "  "
                  << a["detail"].get<std::string>() << '\n';
    for (const auto& w : s["warnings"]) std::cout << "  warn  " << w.get<std::string>() << '\n';
    std::cout << name << ": " << s["status"].get<std::string>() << " (" << s["wall_time_s"].get<double>()
              << " s, summary " << cfg.out << "/" << name << "_summary.json)\n";
    return result.exit_code;
}

int run_replay(const std::string& path, std::optional<std::size_t> workers) {
    std::ifstream in(path);
    if (!in) throw cli::ConfigError(path, "cannot open summary");
    const auto summary = jumpctl::Json::parse(in);
    const auto r = cli::replay(summary, workers);
    std::cout << (r.match ? "replay: match" : "replay: MISMATCH") << " - " << r.message << '\n';
    return r.match ? cli::kExitOk : cli::kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic control toolkit for jump diffusions"};
    app.set_version_flag("--version", std::string(cli::kToolVersion));
    app.require_subcommand(1);

    Flags flags;
    std::string summary_path;
    std::string chosen;
    for (const auto& name : cli::subcommands()) {
        auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
        sub->add_option("--config", flags.config, "INI experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Override [run] seed");
        sub->add_option("--out", flags.out, "Override [run] out");
        sub->add_option("--workers", flags.workers, "Override [run] workers")->check(CLI::PositiveNumber);
        sub->add_flag("--strict", flags.strict, "Treat warnings as failures");
        sub->callback([&chosen, name] { chosen = name; });
    }
    std::optional<std::size_t> replay_workers;
    auto* replay = app.add_subcommand("replay", "Re-run a summary and compare headline numbers bit for bit");
    replay->add_option("summary", summary_path, "Summary JSON written by a previous run")->required();
    replay->add_option("--workers", replay_workers, "Worker count for the re-run")->check(CLI::PositiveNumber);
    replay->callback([&chosen] { chosen = "replay"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitError;
    }

    try {
        if (chosen == "replay") return run_replay(summary_path, replay_workers);
        return run_subcommand(chosen, flags);
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kExitError;
    } catch (const std::exception& e) {
        std::cerr << chosen << " failed: " << e.what() << '\n';
        return cli::kExitError;
    }
}
