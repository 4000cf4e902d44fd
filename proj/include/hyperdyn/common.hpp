#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hyperdyn {

// Small fixed-capacity vectors: every torus here has dimension 2 or 3.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using IMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using IVec = Eigen::Matrix<long long, Eigen::Dynamic, 1, 0, 3, 1>;

// All library failures carry a short machine-readable code ("NotHyperbolic",
// "NoConvergence", ...) that the CLI copies into report.json.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// SplitMix64, used to derive independent per-sample RNG seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Vec vec3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

inline Vec vec2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

} // namespace hyperdyn
