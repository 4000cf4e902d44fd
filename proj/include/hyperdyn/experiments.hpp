#pragma once

#include "hyperdyn/mane_da.hpp"
#include "hyperdyn/semiconjugacy.hpp"

#include <json.hpp>

#include <boost/property_tree/ptree.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hyperdyn {

// Sectioned key-value run configuration. Every key has a default; the
// resolved tree (defaults, then file, then HYPERDYN_SECTION_KEY environment
// variables, then command-line flags, then smoke scaling) fully determines a
// run.
class ExperimentConfig {
public:
    ExperimentConfig(); // defaults

    // INI file. Throws ConfigError with the line number on syntax errors and
    // on unknown keys or values that do not parse.
    void load_file(const std::string& path);
    void load_string(const std::string& text);
    void apply_env();
    void set(const std::string& key, const std::string& value); // "section.key"; throws ConfigError
    // Shrinks every sample count and grid so that a full run takes seconds.
    void apply_smoke();
    // Overrides every grid resolution (semiconjugacy sweep becomes N/2, N, 2N).
    void apply_resolution(int n);

    std::string get(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;
    Vec get_vec(const std::string& key) const;
    IMat matrix() const;
    DaParams da_params() const;

    std::vector<std::string> keys() const; // sorted
    std::string canonical() const;         // sorted key=value lines
    std::string hash() const;              // FNV-1a 64 of canonical(), hex
    nlohmann::json to_json() const;

private:
    std::map<std::string, std::string> values_;
    void check_value(const std::string& key, const std::string& value, int line) const;
};

struct CheckResult {
    int criterion = 0; // 0: no acceptance criterion
    std::string name;
    std::string claim;
    bool pass = false;
    nlohmann::json metrics = nlohmann::json::object();
    nlohmann::json witness; // null unless the check failed with a witness
    std::string error;      // module error code when one was thrown
    double seconds = 0;
    double limit = 0;       // runtime budget in seconds, 0: none
    bool within_limit() const { return limit <= 0 || seconds <= limit; }
};

// Objects shared between subcommands of one run (the DA map and its
// semiconjugacy are built once).
class ExperimentContext {
public:
    ExperimentContext(const ExperimentConfig& cfg, std::string out_dir);
    const ExperimentConfig& config() const { return cfg_; }
    const std::string& out_dir() const { return out_; }
    std::string artifact(const std::string& name) const; // out_dir/name, creating out_dir
    const ToralAutomorphism& automorphism();
    const DaMap& da();
    const Semiconjugacy& semiconjugacy(); // at semiconjugacy.m with the full test grid
    void keep_semiconjugacy(Semiconjugacy s);

private:
    const ExperimentConfig& cfg_;
    std::string out_;
    std::optional<ToralAutomorphism> a_;
    std::unique_ptr<DaMap> da_;
    std::unique_ptr<Semiconjugacy> h_;
};

using Subcommand = std::function<std::vector<CheckResult>(ExperimentContext&)>;

struct SubcommandInfo {
    std::string name;
    std::string help;
    std::vector<int> criteria;
    Subcommand run;
};

// classify, shadow, orbit-closure, gamma-delta, saturate, da-build, cones,
// leaf-density, semiconjugacy, leaf-check, calibrate-tube, chain-project,
// sft-hull, enclose, in dependency order.
const std::vector<SubcommandInfo>& subcommands();
const SubcommandInfo& find_subcommand(const std::string& name); // throws BadInput

// Runs the subcommands covering criteria 1-12 and, for criterion 13, runs
// them a second time in a fresh context and compares the reports with the
// timing fields removed.
std::vector<CheckResult> verify_all(const ExperimentConfig& cfg, const std::string& out_dir);

// {"tool", "subcommand", "config_hash", "config", "criteria", "checks", "pass",
// "timing"}; everything except "timing" is deterministic.
nlohmann::json make_report(const std::string& subcommand, const ExperimentConfig& cfg,
    const std::vector<CheckResult>& checks);
// The report with every "timing" member removed, serialized.
std::string deterministic_payload(const nlohmann::json& report);
void write_report(const std::string& path, const nlohmann::json& report);

// 0 when every check passed, 1 when a check carries an error, 2 otherwise.
int exit_code(const std::vector<CheckResult>& checks);

} // namespace hyperdyn
