#include "hyperdyn/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace hyperdyn;

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> resolution;
    bool smoke = false;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "INI run configuration")->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "output directory");
    app->add_option("--seed", c.seed, "RNG seed (overrides run.seed)");
    app->add_option("--resolution", c.resolution, "grid resolution for every grid-based step")
        ->check(CLI::Range(4, 256));
    app->add_flag("--smoke", c.smoke, "shrink sample counts and grids");
}

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig cfg;
    if (!c.config.empty())
        cfg.load_file(c.config);
    cfg.apply_env();
    if (c.seed)
        cfg.set("run.seed", std::to_string(*c.seed));
    if (c.resolution)
        cfg.apply_resolution(*c.resolution);
    if (c.smoke)
        cfg.apply_smoke();
    return cfg;
}

void print_checks(const std::vector<CheckResult>& checks)
{
    for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ");
        if (c.criterion > 0)
            std::cout << "[" << c.criterion << "] ";
        std::cout << c.name;
        if (!c.error.empty())
            std::cout << " (" << c.error << ": " << c.metrics.value("message", "") << ")";
        std::cout << "  " << c.seconds << " s\n";
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hyperbolic toral automorphisms, DA maps and their semiconjugacies"};
    app.require_subcommand(1);
    Common common;
    std::vector<std::pair<CLI::App*, std::string>> subs;
    for (const auto& info : subcommands()) {
        auto* sub = app.add_subcommand(info.name, info.help);
        add_common(sub, common);
        subs.push_back({sub, info.name});
    }
    auto* verify = app.add_subcommand("verify-all", "run every check twice and compare the reports");
    add_common(verify, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = resolve(common);
        if (verify->parsed()) {
            auto checks = verify_all(cfg, common.out);
            write_report((std::filesystem::path(common.out) / "report.json").string(),
                make_report("verify-all", cfg, checks));
            print_checks(checks);
            return exit_code(checks);
        }
        for (const auto& [sub, name] : subs) {
            if (!sub->parsed())
                continue;
            ExperimentContext ctx(cfg, common.out);
            auto checks = find_subcommand(name).run(ctx);
            write_report((std::filesystem::path(common.out) / "report.json").string(), make_report(name, cfg, checks));
            print_checks(checks);
            return exit_code(checks);
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
