#pragma once

#include "hyperdyn/grid.hpp"
#include "hyperdyn/map.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hyperdyn {

// G(x) = A x + v on lifts.
class AffineMap final : public TorusMap {
public:
    AffineMap(ToralAutomorphism a, Vec v) : a_(std::move(a)), v_(std::move(v)) {}
    int dim() const override { return a_.dim(); }
    Vec forward(const Vec& x) const override { return a_.apply(x) + v_; }
    Vec inverse(const Vec& y) const override { return a_.apply_inverse(y - v_); }
    Mat jacobian(const Vec&) const override { return a_.matrix().cast<double>(); }
    Vec displacement(const Vec&, const Vec& d) const override { return a_.apply(d); }
    Vec eigen_defect(const Vec&) const override { return a_.to_eigen(v_); }
    const ToralAutomorphism& base() const override { return a_; }
    std::string id() const override { return "affine"; }
    const Vec& shift() const { return v_; }

private:
    ToralAutomorphism a_;
    Vec v_;
};

struct SemiconjugacyOptions {
    int m = 64;                  // grid nodes per axis
    double tol = 1e-8;           // sup of the update between sweeps
    int max_iterations = 500;
    double tail = 1e-7;          // off-grid evaluation: pull back until rate^k < tail
    int test_resolution = 128;   // residual test grid, cell centers
    unsigned threads = 0;
};

// H = id + h with A o H = H o G, h periodic, sampled on the m^3 grid of
// nodes i/m. Keeps a reference to the map; it must outlive this object.
class Semiconjugacy {
public:
    Semiconjugacy(const TorusMap& g, int m, std::vector<double> eigen_h, double tail = 1e-7);

    const TorusMap& map() const { return *g_; }
    int resolution() const { return m_; }
    // Eigencoordinates of h at node (i, j, k), row-major with k fastest.
    const std::vector<double>& eigen_values() const { return h_; }
    Vec node_h(std::size_t node) const;
    Vec node_point(std::size_t node) const;

    // Trilinear interpolant of the grid values (Cartesian).
    Vec interpolate(const Vec& x) const;
    // h(x) through the functional equation: each component is pushed or
    // pulled along the orbit until its contraction factor drops below
    // `tail`, then the interpolant closes the sum.
    Vec h(const Vec& x) const;
    Vec h_eigen(const Vec& x) const; // same, eigencoordinates of the base
    // h_eigen(x + from_eigen(de)) - h_eigen(x) along one shared orbit, the
    // offset carried in eigencoordinates. Pointwise values of the center
    // component are only Holder in the stable direction, so rounding on the
    // backward orbit shows up near 1e-7; in the difference it cancels.
    Vec h_eigen_offset(const Vec& x, const Vec& de) const;
    Vec apply(const Vec& x) const { return x + h(x); }
    const std::vector<int>& depths() const { return depth_; }

    // Filled by solve_h.
    int iterations = 0;
    double last_update = 0;
    double grid_residual = 0; // sup |A h - h o G - (G - A)| at nodes, interpolant only
    double residual = 0;      // sup |A H - H G| on the test grid, through h()
    int test_resolution = 0;
    double cr_bound = 0;      // sup over nodes of |h|
    double r = 0;             // sup over nodes of |G - A|
    double constant() const { return r > 0 ? cr_bound / r : 0.0; }

private:
    const TorusMap* g_;
    int m_;
    std::vector<double> h_;
    std::vector<double> lambda_;
    std::vector<int> depth_;
    double interp_component(int comp, const Vec& x) const;
};

// Throws NoConvergence, ResolutionOverflow, BadInput.
Semiconjugacy solve_h(const TorusMap& g, const SemiconjugacyOptions& opt = {});

// sup over the test grid of |A H(x) - H(G x)|, evaluated as |A h(x) - h(G x) - (G x - A x)|.
double equivariance_residual(const Semiconjugacy& s, int test_resolution, unsigned threads = 0);

// Flat binary: "HSC1", int32 M, then M^3 nodes of 3 float64 (Cartesian h),
// little-endian, row-major.
void write_hsc1(const Semiconjugacy& s, const std::string& path);
Semiconjugacy read_hsc1(const TorusMap& g, const std::string& path, double tail = 1e-7);

struct ModulusRow {
    double radius = 0;
    double value = 0; // max |H(x) - H(y)| over sampled |x - y| <= radius
};

// Half the pairs sit at distance exactly `radius`, the rest uniformly
// inside; values are cumulative over increasing radii.
std::vector<ModulusRow> modulus_of_continuity(const Semiconjugacy& s, std::vector<double> radii, std::size_t pairs,
    std::uint64_t seed);

enum class LeafItem { CuCs, Center, UnstableLine, Transversality, FiberCenter };

const char* leaf_item_name(LeafItem item);
LeafItem leaf_item_from_name(const std::string& name); // throws BadInput

struct LeafCheck {
    LeafItem item = LeafItem::CuCs;
    std::size_t samples = 0;
    double max_deviation = 0;
    std::size_t violations = 0; // monotonicity breaks, intersection counts != 1, ...
    std::size_t pairs_tested = 0;  // fiber_center: pairs with |H(x) - H(y)| < fiber_tol
    std::size_t bounded_pairs = 0; // fiber_center: pairs with orbit gap <= gap_bound
    double max_expansivity_gap = 0; // fiber_center: over the bounded pairs, horizon 50
    std::vector<Vec> witnesses;
    double tolerance = 0;
    bool pass() const { return violations == 0 && max_deviation <= tolerance; }
};

struct LeafCheckOptions {
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    double tolerance = 0;      // 0: 10 * residual
    double leaf_length = 0.2;
    double fiber_tol = 0;      // fiber_center collapse threshold on |H(x) - H(y)|; 0: 1000 * residual
    double gap_bound = 0;      // fiber_center two-sided orbit gap bound; 0: 2 sup|h|
    Vec focus;                 // sample around this point (empty: whole torus); fiber_center needs a fixed point
    double focus_radius = 0.1;
    double center_half = 0;    // fiber_center: half the pairs on focus + t e_c, |t| <= center_half
};

LeafCheck check_leaf_correspondence(const Semiconjugacy& s, LeafItem item, const LeafCheckOptions& opt = {});

// Fraction of the (m/2)^3 cells hit by H of the grid nodes.
double surjectivity_coverage(const Semiconjugacy& s, GridSet* marked = nullptr);

} // namespace hyperdyn
