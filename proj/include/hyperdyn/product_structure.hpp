#pragma once

#include "hyperdyn/grid.hpp"
#include "hyperdyn/invariant_sets.hpp"
#include "hyperdyn/torus.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hyperdyn {

using IntVec = std::vector<long long>;

// Row-style Hermite normal form: nonzero rows only, pivots positive and
// strictly moving right, entries above a pivot reduced into [0, pivot).
std::vector<IntVec> hermite_normal_form(std::vector<IntVec> rows);

class LatticeSubgroup {
public:
    LatticeSubgroup() = default;
    LatticeSubgroup(int dim, std::vector<IntVec> generators);

    int dim() const { return dim_; }
    int rank() const { return static_cast<int>(basis_.size()); }
    const std::vector<IntVec>& generators() const { return gens_; }
    const std::vector<IntVec>& basis() const { return basis_; }
    // [Z^dim : subgroup] for full rank, 0 otherwise.
    long long index() const;
    bool contains(const IntVec& v) const;
    bool contains(const LatticeSubgroup& o) const;
    std::string to_json() const;

private:
    int dim_ = 0;
    std::vector<IntVec> gens_, basis_;
};

// A closed walk through grid cells at the basepoint cell; displacement is
// the lifted endpoint minus the start, in whole torus periods.
struct LoopClass {
    Vec basepoint;
    IntVec displacement;
    std::vector<std::size_t> witness;
};

struct GammaDelta {
    LatticeSubgroup group;
    std::vector<LoopClass> loops; // one per distinct nonzero displacement found
    std::size_t cells = 0;        // cells reached from the basepoint
    std::size_t edges = 0;
};

// Integer cell offsets o != 0 with |o| / n < radius, in a fixed order.
std::vector<std::array<long long, 3>> ball_offsets(int dim, int n, double radius);

// Graph on the cells of s, edges between cells whose centers are closer than
// delta. Fundamental cycles of a BFS tree from the basepoint cell give the
// loop displacements. Throws BasepointMissing, GraphTooLarge.
GammaDelta gamma_delta(const GridSet& s, const Vec& x0, double delta, std::size_t max_loops = 64,
    std::size_t max_edges = 200'000'000);

struct GapStats {
    std::vector<double> positions; // sorted, in [0, window)
    std::vector<double> gaps;      // cyclic, gaps[i] follows positions[i]
    double max_gap = 0;
    std::size_t distinct_gaps(double tol = 1e-9) const;
};

// Unstable coordinates of lattice combinations (coefficients by increasing
// sup norm, at most `budget` of them) reduced mod window.
GapStats projection_density(const LatticeSubgroup& g, const ToralAutomorphism& a, double window,
    std::size_t budget);
GapStats gap_statistics(std::vector<double> values, double window);

struct Chain {
    std::vector<Vec> points;
    double epsilon = 0;
};

// epsilon = max over steps of the larger of the unstable and contracting
// components (Euclidean norms).
Chain make_chain(std::vector<Vec> points, const ToralAutomorphism& a);

inline Vec bracket_linear(const ToralAutomorphism& a, const Vec& x, const Vec& y) { return a.bracket(x, y); }

// Replaces the chain x_0..x_n by [x_j, x_{j+1}] (j < n) until one step is
// left and returns the final bracket. levels, when given, receives every
// intermediate chain starting with the input. Throws EmptyChain.
Vec propagate_chain(const ToralAutomorphism& a, const Chain& c, std::vector<Chain>* levels = nullptr);

// Contracting/unstable splitting used by the grid bracket: [x, y] = x + C(y - x)
// where C projects onto the contracting directions along the unstable ones.
struct Splitting {
    int dim = 3;
    std::function<Vec(const Vec&)> contracting;
    static Splitting linear(const ToralAutomorphism& a);
    // E^u along the first axis, E^s along the second (planar horseshoe).
    static Splitting axis_aligned();
};

struct Saturation {
    GridSet set;
    int rounds = 0;
    bool fixpoint = false;
    std::vector<double> coverage; // after each round, starting with the input
};

// Closes s under brackets of cell centers closer than delta_p, one frontier
// round at a time, until nothing changes or max_rounds is reached.
Saturation bracket_saturate(const Splitting& sp, const GridSet& s, double delta_p, int max_rounds,
    unsigned threads = 0);

struct LpsWitness {
    std::size_t x, y, z; // z is the bracket cell of x, y and is not in the set
};

std::optional<LpsWitness> lps_violation_witness(const Splitting& sp, const GridSet& s, double delta_p);

// Truncated orbit of a segment through the fixed point x0 in the contracting
// plane: direction cos(angle) e_s + sin(angle) e_c, half length `half`,
// iterates |n| <= iterations.
struct HancockCandidate {
    double angle = 0;
    double half = 0;
    int iterations = 0;
    std::size_t cells = 0;
    std::size_t ball_cells = 0; // marked cells meeting the avoided ball
    CurveSpec curve;
};

struct HancockSearch {
    HancockCandidate best;
    GridSet set;
    std::vector<HancockCandidate> tried;
    bool found = false; // some candidate leaves the ball unmarked
};

// Cells of the grid meeting the closed ball (sup over the cell).
GridSet ball_cells(int dim, int n, const Vec& center, double radius);

// Searches angles, half lengths and iteration counts for the largest
// truncated orbit closure that leaves every cell meeting B(center, radius)
// unmarked.
HancockSearch hancock_search(const ToralAutomorphism& a, const Vec& x0, const Vec& center, double radius, int n,
    const std::vector<double>& angles, const std::vector<double>& halves, int max_iterations);

} // namespace hyperdyn
