#pragma once

#include "hyperdyn/grid.hpp"
#include "hyperdyn/map.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hyperdyn {

struct DaParams {
    int power = 2; // the bump sits on A^power, which needs a fixed point x1 != 0
    Vec x1 = vec3(6.0 / 13, 3.0 / 13, 7.0 / 13);
    double rho = 0.2;
    double mu = 1.2;
    double cstar = 0.03;
    double d = 0.5;           // center derivative at x2, x3
    double half_length = 0.0; // 0: 0.87 rho/2
    double radius = 0.0;      // 0: 0.45 rho/2
};

// Center bifurcation of a three-dimensional hyperbolic automorphism at a
// fixed point x1: a source in the center direction flanked by two new
// saddles x2, x3 at center coordinates +-cstar. The map agrees with the
// linear one outside B(x1, rho/2) and moves points only along e_c, so linear
// center lines and linear (s, c) planes are invariant.
class DaMap final : public TorusMap {
public:
    DaMap(ToralAutomorphism original, BumpMap bump, DaParams p);

    int dim() const override { return 3; }
    Vec forward(const Vec& x) const override { return bump_.forward(x); }
    Vec inverse(const Vec& y) const override { return bump_.inverse(y); }
    Mat jacobian(const Vec& x) const override { return bump_.jacobian(x); }
    Vec displacement(const Vec& p, const Vec& d) const override { return bump_.displacement(p, d); }
    Vec eigen_defect(const Vec& x) const override { return bump_.eigen_defect(x); }
    const ToralAutomorphism& base() const override { return bump_.base(); }
    std::string id() const override { return "da"; }

    const ToralAutomorphism& original() const { return original_; }
    const BumpMap& bump() const { return bump_; }
    const DaParams& params() const { return p_; }
    const BifurcationProfile& profile() const { return bump_.profile(); }
    Vec x1() const { return bump_.center(); }
    Vec x2() const { return bump_.center() - p_.cstar * bump_.axis(); }
    Vec x3() const { return bump_.center() + p_.cstar * bump_.axis(); }
    // Roots of g(t) = t on the center line through x1, ascending.
    const std::vector<double>& center_fixed_points() const { return roots_; }
    // sup |G - A| over the torus (the bump amplitude).
    double perturbation_size() const { return amplitude_; }

private:
    ToralAutomorphism original_;
    BumpMap bump_;
    DaParams p_;
    std::vector<double> roots_;
    double amplitude_ = 0;
};

// Throws BadBifurcation (mu not in (1, lambda_u), cstar >= rho/4, profile
// infeasible, wrong fixed-point inventory or derivative signs), SupportLeak,
// WrongClass.
DaMap build_da(const ToralAutomorphism& a, const DaParams& p = {});

// Sign changes of g(t) - t on a fine grid, refined by bisection.
std::vector<double> center_fixed_points(const BifurcationProfile& prof, int grid = 20000);

struct ConeReport {
    double theta = 0;
    std::size_t samples = 0;
    std::size_t unstable_failures = 0;
    std::size_t stable_failures = 0;
    std::size_t growth_failures = 0;
    double growth_floor = 1.5;
    double min_unstable_growth = 0;
    double max_unstable_ratio = 0; // tan of the widest image angle, over tan theta
    double max_stable_ratio = 0;
    std::vector<Vec> witnesses; // first few failing sample points
    bool pass() const { return unstable_failures == 0 && stable_failures == 0 && growth_failures == 0; }
};

// Unstable cone {|C v| <= tan(theta) |U v|} around E^u and stable cone
// {|U v| <= tan(theta) |C v|} around the contracting plane, with C, U the
// oblique projections of the base map. Samples uniformly in B(center, radius);
// checks Df-invariance and growth of the unstable cone and Df^-1-invariance
// of the stable cone on boundary directions.
ConeReport verify_cones(const TorusMap& f, const Vec& center, double radius, double theta, std::size_t samples,
    std::uint64_t seed, double growth_floor = 1.5);
ConeReport verify_cones(const DaMap& f, double theta, std::size_t samples, std::uint64_t seed);

// Unstable direction at x: a probe pushed forward along the orbit from
// F^-depth x. Throws DirectionNotConverged.
Vec unstable_direction(const TorusMap& f, const Vec& x, int depth = 30, double tol = 1e-10);

// Local chart of the unstable leaf through x: the segment y + s e_u at
// y = F^-depth(x) pushed forward depth times. Only the displacement s e_u is
// pushed (along the stored orbit of y), so lifts far from x stay accurate.
// at(0) = x; the parameter is monotone along the leaf.
class UnstableChart {
public:
    UnstableChart(const TorusMap& f, const Vec& x, int depth = 6);
    Vec at(double s) const;
    // Parameter per unit length near s = 0.
    double scale() const { return scale_; }
    int depth() const { return depth_; }

private:
    const TorusMap& f_;
    Vec x_, eu_;
    std::vector<Vec> orbit_; // y, F(y), ..., F^(depth-1)(y), reduced
    int depth_;
    double scale_ = 1;
};

enum class LeafField { Unstable, Center, CenterStable };

struct Leaf {
    Vec seed;
    LeafField field = LeafField::Unstable;
    double h = 0;
    std::vector<Vec> points;     // lifts; for CenterStable a (2m+1)^2 patch, row-major
    std::vector<double> arclen;  // cumulative, polylines only
    std::size_t seed_index = 0;
    int patch_side = 0;          // 2m+1 for CenterStable
    double length() const { return arclen.empty() ? 0.0 : arclen.back(); }
};

// Polyline of total arc length about `length` centered at x (unstable,
// center), consecutive points at most h apart; for CenterStable a square
// patch of side `length` in the (s, c) plane with spacing h.
Leaf integrate_leaf(const TorusMap& f, const Vec& x, LeafField field, double length, double h, int depth = 6);

// index,arclen,x,y,z per point (arclen empty for patches).
void write_leaf_csv(const Leaf& leaf, const std::string& path);

// Fraction of the n^3 cells crossed by the leaf of length L through x.
double leaf_density(const TorusMap& f, const Vec& x, LeafField field, double length, int n, GridSet* marked = nullptr);

// Point of the unstable leaf through y on the (s, c) plane through x,
// found by safeguarded secant on the chart parameter. Throws
// NoIntersectionInRange when it is farther than `range` along the leaf.
Vec bracket_foliated(const TorusMap& f, const Vec& x, const Vec& y, double range = 1.0);

struct SeparationRow {
    double delta = 0;
    double worst = 0; // max observed l^u(z, p_y^u(z))
    double mean_ratio = 0;
};

struct SeparationTable {
    std::vector<SeparationRow> rows;  // by increasing delta
    std::vector<std::pair<double, double>> modulus; // (eps, delta(eps)), delta = 0 when none qualifies
    std::size_t failures = 0;         // projections outside the search range
    std::size_t samples = 0;
    double delta_for(double eps) const;
};

// For sampled x, y on one unstable leaf with l^u(x, y) = delta and z on the
// (s, c) plane of x within distance zmax, measures the arc length from z to
// the (s, c) plane of y along the unstable leaf of z. x is uniform on the
// torus, or in B(focus) when given.
struct Focus {
    Vec center;
    double radius = 0;
};
SeparationTable leaf_separation_modulus(const TorusMap& f, const std::vector<double>& deltas,
    const std::vector<double>& eps_grid, std::size_t pairs, double zmax, std::uint64_t seed,
    const std::optional<Focus>& focus = std::nullopt);

// V: union of local (s, c) plane disks of radius eta through the unstable arc
// U^u of diameter < delta0 centered at x0. With linear (s, c) planes V is
// |u(p - x0)| < delta0/2 and |C(p - x0)| < eta (eta = 0: no disk limit).
struct TubeV {
    Vec x0;
    double delta0 = 0, eps0 = 0, delta_p = 0, beta = 0, eta = 0;
    std::vector<Vec> arc; // U^u
    std::vector<std::pair<double, double>> table;
    double u_coord(const ToralAutomorphism& a, const Vec& p) const { return a.unstable_coord(p - x0); }
    bool contains(const ToralAutomorphism& a, const Vec& p) const
    {
        if (!(std::fabs(u_coord(a, p)) < 0.5 * delta0))
            return false;
        return eta <= 0 || a.contracting_part(p - x0).norm() < eta;
    }
    std::string to_json() const;
};

// eps0: the largest tabulated eps below min(delta_p, beta) with delta(eps) > 0;
// delta0 = delta(eps0). Throws CalibrationMissing.
TubeV build_tube(const TorusMap& f, const SeparationTable& table, double delta_p, double beta, double eta,
    const Vec& x0 = vec3(0, 0, 0));
TubeV tube_from_json(const std::string& text);

// Max |x - y| over sampled x in V and y on the unstable leaf of x inside V.
double tube_pair_diameter(const TorusMap& f, const TubeV& v, std::size_t samples, std::uint64_t seed);

struct NonlinearChain {
    std::vector<Vec> points;
    double epsilon = 0; // max over steps of |w - x_i| and |w - x_{i+1}|, w = [x_{i+1}, x_i]
};

NonlinearChain make_nonlinear_chain(const TorusMap& f, std::vector<Vec> points);

struct ChainProjection {
    std::vector<Vec> projections;      // on U^u, one per chain point
    std::vector<double> level_epsilon; // epsilon of each rebuilt chain
    double direct_error = 0;           // vs bracket_foliated(x_i, x0)
    bool exits = false;                // the last point lies outside V
    int side = 0;                      // sign of u at the exit
    double max_gap = 0;                // on the exit side of U^u
};

// Rebuilds x̄_i = W^u(x_i) ∩ W^cs(x_{i+1}) level by level; the first point of
// level k is the projection of x_k to U^u along (s, c) planes. Throws
// ChainLeftTube (a point other than the last outside V) and
// StepBoundViolated (a level epsilon above (1 + slack) times the input).
ChainProjection project_chain_nonlinear(const TorusMap& f, const TubeV& v, const NonlinearChain& c,
    double slack = 0.5);

} // namespace hyperdyn
