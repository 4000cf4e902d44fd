#include "hyperdyn/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hyperdyn {

namespace {

enum class Kind { Int, U64, Double, Bool, Doubles, Ints, Vec3, Matrix, Choice };

struct KeySpec {
    const char* key;
    Kind kind;
    const char* choices = nullptr; // Choice: space-separated
};

const std::vector<KeySpec>& key_specs()
{
    static const std::vector<KeySpec> specs = {
        {"run.seed", Kind::U64},
        {"matrix.rows", Kind::Matrix},
        {"da.power", Kind::Int},
        {"da.x1", Kind::Vec3},
        {"da.rho", Kind::Double},
        {"da.mu", Kind::Double},
        {"da.cstar", Kind::Double},
        {"da.d", Kind::Double},
        {"shadow.orbits", Kind::Int},
        {"shadow.length", Kind::Int},
        {"shadow.alpha", Kind::Double},
        {"shadow.periodic_inputs", Kind::Int},
        {"chains.trials", Kind::Int},
        {"chains.max_length", Kind::Int},
        {"chains.step", Kind::Double},
        {"gamma.n", Kind::Int},
        {"gamma.delta_cells", Kind::Double},
        {"gamma.budget", Kind::Int},
        {"orbit_closure.n", Kind::Int},
        {"orbit_closure.iterations", Kind::Int},
        {"orbit_closure.half", Kind::Double},
        {"saturate.n", Kind::Int},
        {"saturate.rounds", Kind::Int},
        {"saturate.input", Kind::Choice, "hancock cell"},
        {"cones.theta", Kind::Double},
        {"cones.samples", Kind::Int},
        {"cones.support_samples", Kind::Int},
        {"cones.growth", Kind::Double},
        {"semiconjugacy.m", Kind::Int},
        {"semiconjugacy.test_resolution", Kind::Int},
        {"semiconjugacy.sweep", Kind::Ints},
        {"semiconjugacy.tol", Kind::Double},
        {"semiconjugacy.tail", Kind::Double},
        {"semiconjugacy.modulus_pairs", Kind::Int},
        {"leaves.samples", Kind::Int},
        {"leaves.density_n", Kind::Int},
        {"leaves.u_length", Kind::Double},
        {"leaves.c_length", Kind::Double},
        {"leaves.point", Kind::Vec3},
        {"tube.pairs", Kind::Int},
        {"tube.deltas", Kind::Doubles},
        {"tube.delta_p", Kind::Double},
        {"tube.beta", Kind::Double},
        {"tube.eta", Kind::Double},
        {"tube.offset", Kind::Vec3},
        {"tube.step", Kind::Double},
        {"symbolic.max_period", Kind::Int},
        {"symbolic.max_block", Kind::Int},
        {"symbolic.random_sets", Kind::Int},
        {"enclose.lambda0", Kind::Choice, "heteroclinic empty"},
        {"enclose.lambda1", Kind::Choice, "empty periodic01"},
        {"enclose.n", Kind::Int},
        {"enclose.depth", Kind::Int},
    };
    return specs;
}

const KeySpec* find_spec(const std::string& key)
{
    for (const auto& s : key_specs())
        if (key == s.key)
            return &s;
    return nullptr;
}

std::string trim(const std::string& s)
{
    std::size_t b = s.find_first_not_of(" \t\r\n"), e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& msg, int line)
{
    throw Error("ConfigError", line > 0 ? "line " + std::to_string(line) + ": " + msg : msg);
}

// Accepts decimals and fractions such as 6/13.
bool parse_number(const std::string& tok, double& out)
{
    std::string t = trim(tok);
    if (t.empty())
        return false;
    auto slash = t.find('/');
    char* end = nullptr;
    if (slash != std::string::npos) {
        double num = std::strtod(t.substr(0, slash).c_str(), &end);
        if (*end != '\0')
            return false;
        double den = std::strtod(t.substr(slash + 1).c_str(), &end);
        if (*end != '\0' || den == 0)
            return false;
        out = num / den;
        return true;
    }
    out = std::strtod(t.c_str(), &end);
    return *end == '\0' && std::isfinite(out);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty())
                out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

std::vector<double> parse_doubles(const std::string& s, bool& ok)
{
    std::vector<double> out;
    ok = true;
    for (const auto& t : split_list(s)) {
        double v;
        if (!parse_number(t, v)) {
            ok = false;
            return {};
        }
        out.push_back(v);
    }
    return out;
}

bool parse_int(const std::string& s, long long& out)
{
    std::string t = trim(s);
    if (t.empty())
        return false;
    char* end = nullptr;
    out = std::strtoll(t.c_str(), &end, 10);
    return *end == '\0';
}

std::string matrix_string(const IMat& m)
{
    std::ostringstream os;
    for (int i = 0; i < m.rows(); ++i) {
        if (i)
            os << "; ";
        for (int j = 0; j < m.cols(); ++j)
            os << (j ? " " : "") << m(i, j);
    }
    return os.str();
}

bool parse_matrix(const std::string& s, IMat& out)
{
    std::vector<std::vector<long long>> rows;
    std::stringstream ss(s);
    std::string row;
    while (std::getline(ss, row, ';')) {
        std::vector<long long> r;
        for (const auto& t : split_list(row)) {
            long long v;
            if (!parse_int(t, v))
                return false;
            r.push_back(v);
        }
        if (!r.empty())
            rows.push_back(r);
    }
    int n = static_cast<int>(rows.size());
    if (n < 2 || n > 3)
        return false;
    out = IMat(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            return false;
        for (int j = 0; j < n; ++j)
            out(i, j) = rows[i][j];
    }
    return true;
}

// Line of `key` inside [section] in an INI text, 0 when not found.
int line_of(const std::string& text, const std::string& dotted)
{
    auto dot = dotted.find('.');
    std::string section = dotted.substr(0, dot), key = dotted.substr(dot + 1);
    std::stringstream ss(text);
    std::string line, cur;
    int n = 0;
    while (std::getline(ss, line)) {
        ++n;
        std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#')
            continue;
        if (t.front() == '[' && t.back() == ']') {
            cur = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq != std::string::npos && cur == section && trim(t.substr(0, eq)) == key)
            return n;
    }
    return 0;
}

} // namespace

ExperimentConfig::ExperimentConfig()
{
    values_ = {
        {"run.seed", "1"},
        {"matrix.rows", matrix_string(default_matrix())},
        {"da.power", "2"},
        {"da.x1", "6/13 3/13 7/13"},
        {"da.rho", "0.2"},
        {"da.mu", "1.2"},
        {"da.cstar", "0.03"},
        {"da.d", "0.5"},
        {"shadow.orbits", "1000"},
        {"shadow.length", "10000"},
        {"shadow.alpha", "1e-3"},
        {"shadow.periodic_inputs", "20"},
        {"chains.trials", "1000"},
        {"chains.max_length", "20"},
        {"chains.step", "0.05"},
        {"gamma.n", "32"},
        {"gamma.delta_cells", "3"},
        {"gamma.budget", "10000"},
        {"orbit_closure.n", "32"},
        {"orbit_closure.iterations", "6"},
        {"orbit_closure.half", "0.05"},
        {"saturate.n", "64"},
        {"saturate.rounds", "200"},
        {"saturate.input", "hancock"},
        {"cones.theta", "0.1"},
        {"cones.samples", "100000"},
        {"cones.support_samples", "100000"},
        {"cones.growth", "1.5"},
        {"semiconjugacy.m", "64"},
        {"semiconjugacy.test_resolution", "128"},
        {"semiconjugacy.sweep", "32 64 128"},
        {"semiconjugacy.tol", "1e-8"},
        {"semiconjugacy.tail", "1e-7"},
        {"semiconjugacy.modulus_pairs", "2000"},
        {"leaves.samples", "1000"},
        {"leaves.density_n", "32"},
        {"leaves.u_length", "2000"},
        {"leaves.c_length", "3000"},
        {"leaves.point", "0.1 0.2 0.3"},
        {"tube.pairs", "200"},
        {"tube.deltas", "0.005 0.01 0.015 0.02 0.025 0.03 0.035 0.04 0.045 0.05 0.055 0.06 0.065 0.07 0.075 0.08 "
                        "0.085 0.09 0.095 0.1"},
        {"tube.delta_p", "3/64"},
        {"tube.beta", "0.1"},
        {"tube.eta", "0.2"},
        {"tube.offset", "0.01 0.02 -0.01"},
        {"tube.step", "0.002"},
        {"symbolic.max_period", "6"},
        {"symbolic.max_block", "7"},
        {"symbolic.random_sets", "10"},
        {"enclose.lambda0", "heteroclinic"},
        {"enclose.lambda1", "empty"},
        {"enclose.n", "6"},
        {"enclose.depth", "3"},
    };
}

void ExperimentConfig::check_value(const std::string& key, const std::string& value, int line) const
{
    const KeySpec* spec = find_spec(key);
    if (!spec)
        config_error("unknown key " + key, line);
    bool ok = true;
    long long iv = 0;
    double dv = 0;
    switch (spec->kind) {
    case Kind::Int:
        ok = parse_int(value, iv) && iv >= 0 && iv <= 2'000'000'000;
        break;
    case Kind::U64:
        ok = parse_int(value, iv) && iv >= 0;
        break;
    case Kind::Double:
        ok = parse_number(value, dv);
        break;
    case Kind::Bool:
        ok = value == "true" || value == "false" || value == "1" || value == "0";
        break;
    case Kind::Doubles:
        parse_doubles(value, ok);
        break;
    case Kind::Ints:
        for (const auto& t : split_list(value))
            ok = ok && parse_int(t, iv) && iv > 0;
        ok = ok && !split_list(value).empty();
        break;
    case Kind::Vec3: {
        auto v = parse_doubles(value, ok);
        ok = ok && v.size() == 3;
        break;
    }
    case Kind::Matrix: {
        IMat m;
        ok = parse_matrix(value, m);
        break;
    }
    case Kind::Choice: {
        ok = false;
        for (const auto& c : split_list(spec->choices))
            ok = ok || c == value;
        break;
    }
    }
    if (!ok)
        config_error("bad value for " + key + ": '" + value + "'", line);
}

void ExperimentConfig::load_string(const std::string& text)
{
    boost::property_tree::ptree pt;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        config_error(e.message(), static_cast<int>(e.line()));
    }
    for (const auto& [section, body] : pt) {
        if (body.empty() && !body.data().empty())
            config_error("key outside a section: " + section, line_of(text, "." + section));
        for (const auto& [key, node] : body) {
            std::string dotted = section + "." + key;
            std::string value = trim(node.data());
            check_value(dotted, value, line_of(text, dotted));
            values_[dotted] = value;
        }
    }
}

void ExperimentConfig::load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("ConfigError", "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    load_string(ss.str());
}

void ExperimentConfig::apply_env()
{
    for (const auto& s : key_specs()) {
        std::string name = "HYPERDYN_";
        for (const char* c = s.key; *c; ++c)
            name += *c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
        if (const char* v = std::getenv(name.c_str())) {
            try {
                check_value(s.key, trim(v), 0);
            } catch (const Error&) {
                throw Error("ConfigError", name + ": bad value '" + trim(v) + "'");
            }
            values_[s.key] = trim(v);
        }
    }
}

void ExperimentConfig::set(const std::string& key, const std::string& value)
{
    check_value(key, value, 0);
    values_[key] = value;
}

void ExperimentConfig::apply_smoke()
{
    const std::pair<const char*, const char*> small[] = {
        {"shadow.orbits", "10"},
        {"shadow.length", "500"},
        {"shadow.periodic_inputs", "3"},
        {"chains.trials", "50"},
        {"gamma.n", "8"},
        {"gamma.budget", "500"},
        {"orbit_closure.n", "8"},
        {"orbit_closure.iterations", "3"},
        {"saturate.n", "8"},
        {"saturate.rounds", "20"},
        {"cones.samples", "2000"},
        {"cones.support_samples", "2000"},
        {"semiconjugacy.m", "16"},
        {"semiconjugacy.test_resolution", "16"},
        {"semiconjugacy.sweep", "16 24"},
        {"semiconjugacy.modulus_pairs", "50"},
        {"leaves.samples", "20"},
        {"leaves.density_n", "4"},
        {"leaves.u_length", "100"},
        {"leaves.c_length", "100"},
        {"tube.pairs", "20"},
        {"symbolic.max_period", "4"},
        {"symbolic.max_block", "4"},
        {"symbolic.random_sets", "2"},
    };
    for (auto [k, v] : small)
        values_[k] = v;
}

void ExperimentConfig::apply_resolution(int n)
{
    if (n < 4)
        throw Error("ConfigError", "resolution must be at least 4");
    std::string s = std::to_string(n);
    for (const char* k : {"gamma.n", "orbit_closure.n", "saturate.n", "leaves.density_n", "semiconjugacy.m"})
        values_[k] = s;
    values_["semiconjugacy.test_resolution"] = std::to_string(2 * n);
    values_["semiconjugacy.sweep"] = std::to_string(std::max(4, n / 2)) + " " + s + " " + std::to_string(2 * n);
}

std::string ExperimentConfig::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        throw Error("ConfigError", "unknown key " + key);
    return it->second;
}

int ExperimentConfig::get_int(const std::string& key) const
{
    long long v = 0;
    parse_int(get(key), v);
    return static_cast<int>(v);
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const
{
    return std::strtoull(get(key).c_str(), nullptr, 10);
}

double ExperimentConfig::get_double(const std::string& key) const
{
    double v = 0;
    parse_number(get(key), v);
    return v;
}

bool ExperimentConfig::get_bool(const std::string& key) const
{
    std::string v = get(key);
    return v == "true" || v == "1";
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const
{
    bool ok;
    return parse_doubles(get(key), ok);
}

std::vector<int> ExperimentConfig::get_ints(const std::string& key) const
{
    std::vector<int> out;
    for (const auto& t : split_list(get(key))) {
        long long v = 0;
        parse_int(t, v);
        out.push_back(static_cast<int>(v));
    }
    return out;
}

Vec ExperimentConfig::get_vec(const std::string& key) const
{
    auto v = get_doubles(key);
    return vec3(v[0], v[1], v[2]);
}

IMat ExperimentConfig::matrix() const
{
    IMat m;
    parse_matrix(get("matrix.rows"), m);
    return m;
}

DaParams ExperimentConfig::da_params() const
{
    DaParams p;
    p.power = get_int("da.power");
    p.x1 = get_vec("da.x1");
    p.rho = get_double("da.rho");
    p.mu = get_double("da.mu");
    p.cstar = get_double("da.cstar");
    p.d = get_double("da.d");
    return p;
}

std::vector<std::string> ExperimentConfig::keys() const
{
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        out.push_back(k);
    return out;
}

std::string ExperimentConfig::canonical() const
{
    std::string out;
    for (const auto& [k, v] : values_)
        out += k + "=" + v + "\n";
    return out;
}

std::string ExperimentConfig::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json ExperimentConfig::to_json() const
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) {
        auto dot = k.find('.');
        j[k.substr(0, dot)][k.substr(dot + 1)] = v;
    }
    return j;
}

} // namespace hyperdyn
