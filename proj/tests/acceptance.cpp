#include "hyperdyn/experiments.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

using namespace hyperdyn;

// Runs the full check suite at the default configuration and prints one
// line per acceptance criterion. HYPERDYN_ACCEPTANCE_SMOKE=1 shrinks it.
int main(int argc, char** argv)
{
    std::string out = argc > 1 ? argv[1] : "acceptance_out";
    ExperimentConfig cfg;
    cfg.apply_env();
    if (const char* s = std::getenv("HYPERDYN_ACCEPTANCE_SMOKE"); s && std::string(s) == "1")
        cfg.apply_smoke();
    std::filesystem::remove_all(out);

    std::vector<CheckResult> checks;
    try {
        checks = verify_all(cfg, out);
    } catch (const std::exception& e) {
        std::cout << "FAIL all: " << e.what() << "\n";
        return 1;
    }
    write_report((std::filesystem::path(out) / "report.json").string(), make_report("verify-all", cfg, checks));

    std::map<int, std::vector<const CheckResult*>> by;
    for (const auto& c : checks)
        if (c.criterion > 0)
            by[c.criterion].push_back(&c);

    int failed = 0;
    for (int id = 1; id <= 13; ++id) {
        bool pass = !by[id].empty();
        double seconds = 0, limit = 0;
        std::string detail;
        for (const auto* c : by[id]) {
            pass = pass && c->pass;
            seconds += c->seconds;
            limit = c->limit;
            if (!c->pass)
                detail += " " + c->name + (c->error.empty() ? "" : "(" + c->error + ")");
        }
        bool timely = limit <= 0 || seconds <= limit;
        if (!timely)
            detail += " over time budget";
        pass = pass && timely;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << "  " << seconds << " s / " << limit << " s";
        if (!detail.empty())
            std::cout << " :" << detail;
        std::cout << "\n";
    }
    return failed == 0 ? 0 : 1;
}
