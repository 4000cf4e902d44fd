#pragma once

#include "hyperdyn/map.hpp"

#include <string>
#include <vector>

namespace hyperdyn {

// Points are lifts; consecutive points are compared through the nearest
// integer translate, so torus-reduced sequences are fine.
struct PseudoOrbit {
    std::vector<Vec> points;
    double alpha = 0.0; // max jump, eigen sup norm of the base map
    bool closed = false; // alpha includes the closing jump x_N -> x_0
    std::string map_id;
};

enum class Boundary { Free, Periodic };

struct ShadowResult {
    std::vector<Vec> orbit;
    double beta = 0.0;           // max eigen-sup distance to the pseudo-orbit
    double beta_euclidean = 0.0; // same, Euclidean
    double residual = 0.0;       // max eigen-sup jump of the orbit
    double k_bound = 0.0;
    int iterations = 0;
};

PseudoOrbit make_pseudo_orbit(const TorusMap& f, std::vector<Vec> points, bool closed = false);

// max(1/(1 - lambda) over contracting, 1/(lambda - 1) over expanding).
double shadowing_constant(const ToralAutomorphism& a);

// Exact shadow of a pseudo-orbit of a linear map (throws EmptyOrbit).
ShadowResult shadow_linear(const ToralAutomorphism& a, const PseudoOrbit& po, Boundary boundary);

// Damped Newton on the orbit equations. Free boundary fixes, at the start,
// the corrections along locally contracting directions and, at the end,
// along locally expanding ones. Throws NoConvergence.
ShadowResult shadow_nonlinear(const TorusMap& f, const PseudoOrbit& po, double tol,
    Boundary boundary = Boundary::Free, int max_iterations = 200);

// max over |n| <= horizon of |F^n x - F^n y| on lifts.
double expansivity_gap(const TorusMap& f, const Vec& x, const Vec& y, int horizon);
// Same for x = anchor + from_eigen(dx), y = anchor + from_eigen(dy), where
// anchor is a fixed point of f. Both orbits are carried as eigencoordinate
// offsets from the anchor through eigen_defect, so offsets with zero unstable
// (stable) part keep it exactly under forward (backward) steps. Lifted
// iteration loses such pairs to rounding within a few dozen steps.
// Throws BadInput if the anchor is not fixed to 1e-9.
double expansivity_gap_eigen(const TorusMap& f, const Vec& anchor, const Vec& dx, const Vec& dy, int horizon);

// Random pseudo-orbit: x_{k+1} = A x_k + jump mod 1 with jumps uniform in
// the eigen box of half-width alpha.
std::vector<Vec> random_pseudo_orbit(const ToralAutomorphism& a, std::size_t n, double alpha, std::uint64_t seed);

// A periodic orbit of exact period `period`, repeated `repeats` times, with
// independent eigen-box noise of half-width `noise` added to every point.
std::vector<Vec> noisy_periodic_orbit(
    const ToralAutomorphism& a, int period, int repeats, double noise, std::uint64_t seed);

std::vector<Vec> read_points_csv(const std::string& path);
void write_points_csv(const std::string& path, const std::vector<Vec>& pts);

} // namespace hyperdyn
