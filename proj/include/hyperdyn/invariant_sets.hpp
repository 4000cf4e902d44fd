#pragma once

#include "hyperdyn/grid.hpp"
#include "hyperdyn/map.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hyperdyn {

// Lifted polyline through a fixed point x0 of the map.
struct CurveSpec {
    std::vector<Vec> points;
    Vec x0;
    Vec at(double s) const; // s in [0, points.size() - 1]
    double param_end() const { return points.empty() ? 0.0 : static_cast<double>(points.size() - 1); }
    void validate(const TorusMap& f) const; // throws BadInput
};

// Image of a parametrized curve under iterates of a map, kept as a polyline
// whose consecutive points are at most `spacing` apart (sup norm, lifts).
class CurveFront {
public:
    CurveFront(const TorusMap& f, std::function<Vec(double)> curve, double t0, double t1, double spacing,
        bool backward, std::size_t max_points = 20'000'000);
    void step();
    int steps() const { return steps_; }
    std::size_t size() const { return t_.size(); }
    const std::vector<Vec>& points() const { return p_; }
    const std::vector<double>& params() const { return t_; }
    void mark(GridSet& s) const;

private:
    Vec eval(double t) const;
    void refine();
    const TorusMap& f_;
    std::function<Vec(double)> curve_;
    double spacing_;
    bool backward_;
    std::size_t max_points_;
    int steps_ = 0;
    std::vector<double> t_;
    std::vector<Vec> p_;
};

struct OrbitClosure {
    GridSet set;
    int iterations = 0;
    bool stable = false;
    std::vector<std::size_t> counts; // marked cells after each iteration
};

// Marks cells visited by F^n(gamma), |n| <= iterations, stopping early when
// one full forward+backward iteration marks nothing new.
OrbitClosure orbit_closure(const TorusMap& f, const CurveSpec& gamma, int n, int max_iters,
    std::size_t max_points = 20'000'000);

// Finite-horizon over-approximation of the set of points whose orbits avoid
// the ball B(center, radius). Cells start in the set when all samples lie
// outside the ball; each round keeps cells whose sampled image and sampled
// preimage both meet the current set.
GridSet avoidance_set(const TorusMap& f, const Vec& center, double radius, int n, int horizon,
    int samples_per_axis = 3);

enum class Adjacency { Face, Vertex };

struct Components {
    std::vector<int> label; // -1 for unmarked cells
    std::vector<std::size_t> sizes;
    std::size_t count() const { return sizes.size(); }
    std::size_t largest() const;
};

Components connected_components(const GridSet& s, Adjacency adj = Adjacency::Face);

// Singleton components and the rest.
std::pair<GridSet, GridSet> decompose_lambda01(const GridSet& s, Adjacency adj = Adjacency::Face);

enum class ArcSide { Stable, Unstable };

// Local stable or unstable arc of total length about arc_len centered at x,
// by graph transform from the linear eigendirection at F^-depth x (or F^depth x).
// A branch shorter than arc_len / 2 (one ending at a repeller, say) comes back
// truncated. Throws ManifoldUnavailable when the side is not one-dimensional.
std::vector<Vec> local_arc(const TorusMap& f, const Vec& x, ArcSide side, double arc_len, double spacing,
    int depth = 12);

bool local_arc_test(const TorusMap& f, const GridSet& s, const Vec& x, ArcSide side, double arc_len,
    int depth = 12);

// Cells of the image of s, sampling each cell with m^dim points.
GridSet image_cells(const TorusMap& f, const GridSet& s, int m);

// Smale-type planar attractor: the cat map with a source created at the
// origin by a bump along the stable direction.
BumpMap planar_da(double mu = 1.5, double cstar = 0.05, double half_length = 0.2, double radius = 0.12);

// Grid over-approximation of the attractor of a planar DA map: forward images
// of the complement of a ball around the source.
GridSet da_attractor_grid(const BumpMap& f, int n, int iterations, double hole_radius, int m = 4);

// Product of two copies of the Cantor set of base-4 expansions with digits
// 1 and 3 (it stays away from 0, so no adjacency across the wrap). Cells
// cover the intervals of depth d, the least d with 4^d >= n.
GridSet horseshoe_grid_set(int n);

} // namespace hyperdyn
