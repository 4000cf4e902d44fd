#include "doctest.h"

#include "hyperdyn/experiments.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <fstream>

using namespace hyperdyn;

namespace {

std::string error_code(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

std::string error_text(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_SUITE("experiments")
{
    TEST_CASE("defaults")
    {
        ExperimentConfig cfg;
        CHECK(cfg.get_u64("run.seed") == 1);
        CHECK(cfg.matrix() == default_matrix());
        DaParams p = cfg.da_params();
        CHECK(p.x1[0] == doctest::Approx(6.0 / 13).epsilon(1e-15));
        CHECK(p.x1[1] == doctest::Approx(3.0 / 13).epsilon(1e-15));
        CHECK(p.mu == 1.2);
        CHECK(p.cstar == 0.03);
        CHECK(cfg.get_int("semiconjugacy.m") == 64);
        CHECK(cfg.get_ints("semiconjugacy.sweep") == std::vector<int>{32, 64, 128});
        CHECK(cfg.get_doubles("tube.deltas").size() == 20);
        CHECK(cfg.hash().size() == 16);
    }

    TEST_CASE("file values, env overrides and hashing")
    {
        ExperimentConfig a, b;
        a.load_string("[run]\nseed = 7\n\n[da]\nmu = 1.3\nx1 = 1/2 1/4 3/4\n");
        CHECK(a.get_u64("run.seed") == 7);
        CHECK(a.da_params().mu == 1.3);
        CHECK(a.get_vec("da.x1")[1] == 0.25);
        CHECK(a.hash() != b.hash());
        b.set("run.seed", "7");
        b.set("da.mu", "1.3");
        b.set("da.x1", "1/2 1/4 3/4");
        CHECK(a.canonical() == b.canonical());
        CHECK(a.hash() == b.hash());

        setenv("HYPERDYN_DA_MU", "1.4", 1);
        a.apply_env();
        unsetenv("HYPERDYN_DA_MU");
        CHECK(a.da_params().mu == 1.4);

        setenv("HYPERDYN_RUN_SEED", "x", 1);
        CHECK(error_code([&] { a.apply_env(); }) == "ConfigError");
        unsetenv("HYPERDYN_RUN_SEED");
    }

    TEST_CASE("config errors carry line numbers")
    {
        ExperimentConfig cfg;
        CHECK(error_code([&] { cfg.load_string("[da]\nmu = 1.2\nbogus = 3\n"); }) == "ConfigError");
        CHECK(error_text([&] { cfg.load_string("[da]\nmu = 1.2\nbogus = 3\n"); }).find("line 3") != std::string::npos);
        CHECK(error_text([&] { cfg.load_string("[run]\n\nseed = -x\n"); }).find("line 3") != std::string::npos);
        CHECK(error_code([&] { cfg.load_string("[run\nseed = 1\n"); }) == "ConfigError");
        CHECK(error_code([&] { cfg.set("matrix.rows", "1 2 3"); }) == "ConfigError");
        CHECK(error_code([&] { cfg.set("saturate.input", "other"); }) == "ConfigError");
        CHECK(error_code([&] { cfg.load_file("/nonexistent/run.ini"); }) == "ConfigError");
        CHECK(error_code([&] { cfg.apply_resolution(2); }) == "ConfigError");
    }

    TEST_CASE("resolution and smoke scaling")
    {
        ExperimentConfig cfg;
        cfg.apply_resolution(48);
        CHECK(cfg.get_int("gamma.n") == 48);
        CHECK(cfg.get_int("semiconjugacy.test_resolution") == 96);
        CHECK(cfg.get_ints("semiconjugacy.sweep") == std::vector<int>{24, 48, 96});
        cfg.apply_smoke();
        CHECK(cfg.get_int("shadow.orbits") < 1000);
    }

    TEST_CASE("report payload excludes timing")
    {
        ExperimentConfig cfg;
        CheckResult c;
        c.criterion = 1;
        c.name = "x";
        c.pass = true;
        c.seconds = 0.5;
        auto r1 = make_report("classify", cfg, {c});
        c.seconds = 3.0;
        auto r2 = make_report("classify", cfg, {c});
        CHECK(r1.dump() != r2.dump());
        CHECK(deterministic_payload(r1) == deterministic_payload(r2));
        CHECK(r1["criteria"] == nlohmann::json::array({1}));
        CHECK(r1["config_hash"] == cfg.hash());
        CHECK(r1["pass"] == true);
    }

    TEST_CASE("exit codes")
    {
        CheckResult ok, bad, err;
        ok.pass = true;
        err.error = "NoConvergence";
        CHECK(exit_code({ok}) == 0);
        CHECK(exit_code({ok, bad}) == 2);
        CHECK(exit_code({ok, bad, err}) == 1);
    }

    TEST_CASE("subcommand registry")
    {
        CHECK(subcommands().size() == 14);
        CHECK(find_subcommand("leaf-check").criteria == std::vector<int>{8});
        CHECK(error_code([] { find_subcommand("nope"); }) == "BadInput");
    }

    TEST_CASE("smoke subcommands write their artifacts")
    {
        ExperimentConfig cfg;
        cfg.apply_smoke();
        std::string dir = testutil::temp_path("exp_smoke");
        std::filesystem::remove_all(dir);
        ExperimentContext ctx(cfg, dir);
        for (const char* name : {"classify", "shadow", "enclose", "sft-hull"}) {
            auto checks = find_subcommand(name).run(ctx);
            for (const auto& c : checks)
                CHECK_MESSAGE(c.pass, name, " ", c.name);
        }
        CHECK(std::filesystem::exists(dir + "/shadow_beta.csv"));
        CHECK(std::filesystem::exists(dir + "/enclosure.pgm"));
    }
}
