#pragma once

#include "hyperdyn/grid.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hyperdyn {

using Word = std::vector<int>;

// Eventually periodic bi-infinite sequence: x_i = core[i - start] on
// [start, start + |core|), the periodic word `right` continues to the right
// and `left` to the left (x_{start-1} = left.back()).
struct Sequence {
    Word left, core, right;
    long start = 0;

    int at(long i) const;
    Word window(long from, std::size_t len) const;
    // (sigma^k x)_i = x_{i+k}
    Sequence shifted(long k) const;

    // x_i = w[i mod |w|]
    static Sequence periodic(const Word& w);
    // pre occupies positions 0..|pre|-1, period repeats after it, left
    // repeats before position 0 (defaults to period).
    static Sequence eventually_periodic(const Word& pre, const Word& period, const Word& left = {});
};

// Closed shift-invariant hull of finitely many generators over [0, k).
struct SymbolicSet {
    int k = 2;
    std::vector<Sequence> generators;
};

// Distinct length-n factors over all generators.
std::set<Word> factors(const SymbolicSet& s, int n);
std::set<Word> factors(const Sequence& x, int n);

// Subshift of finite type given by allowed n-words, pruned so every
// (n-1)-word vertex in use has an incoming and an outgoing edge.
class SftHull {
public:
    SftHull() = default;
    // Prunes to a fixpoint. Throws EmptySet if nothing survives.
    static SftHull from_words(int k, int n, std::set<Word> words);

    int alphabet() const { return k_; }
    int block() const { return n_; }
    const std::set<Word>& words() const { return words_; }

    // Every length-n window of w is allowed (w shorter than n: w extends to
    // an allowed word).
    bool allows(const Word& w) const;
    bool contains(const Sequence& x) const;
    // All allowed words of length len (paths of the graph).
    std::vector<Word> paths(int len) const;
    // Adjacency lists on (n-1)-word vertices.
    std::vector<std::pair<Word, std::vector<Word>>> adjacency() const;

private:
    int k_ = 0, n_ = 0;
    std::set<Word> words_;
};

// Allowed words: the length-n factors of s. Throws EmptySet, BadInput.
SftHull hull(const SymbolicSet& s, int n);

// True when every sequence of `inner` lies in `outer`.
bool sft_contains(const SftHull& outer, const SftHull& inner);

struct NeighborhoodReport {
    bool window_ok = true;
    std::optional<Word> witness; // an allowed word that is not a factor of S
    double bound = 0;            // 2^-floor((n-1)/2)
    double worst = 0;            // realized worst distance over enumerated words
    int radius = 0;              // enumerated words have length 2 radius + 1
    std::size_t enumerated = 0;
    bool ok() const { return window_ok && worst <= bound; }
};

// With d(x, y) = 2^-min{|i| : x_i != y_i}, a sequence whose centered window
// of radius r is a factor of S is within 2^-(r+1) of S. Every hull word of
// length 2 radius + 1 (radius = floor((max_len-1)/2), at least the hull's
// block radius) is scored by its largest such r.
NeighborhoodReport hull_neighborhood_check(const SymbolicSet& s, const SftHull& h, int max_len = 12);

// Splice z_i = y_i (i < 0), x_i (i >= 0), defined when x and y agree on
// positions 0..n-2. Returns nothing when they do not agree or the splice
// leaves the hull.
std::optional<Sequence> symbolic_bracket(const SftHull& h, const Sequence& x, const Sequence& y);

// Periodic points of minimal period <= max_period, one per primitive word.
std::vector<Sequence> periodic_points(const SftHull& h, int max_period);

struct BracketClosure {
    std::size_t points = 0;
    std::size_t pairs = 0;
    std::size_t compatible = 0;
    std::size_t failures = 0;
    std::optional<std::pair<Sequence, Sequence>> witness;
    bool closed() const { return failures == 0; }
};

// symbolic_bracket over all ordered pairs of periodic points.
BracketClosure bracket_closure(const SftHull& h, int max_period);

// Planar horseshoe coding: the future z_0..z_{m-1} picks the x-interval and
// the past z_{-1}..z_{-m} the y-interval, digit j -> [(2j+1)/2k, (2j+2)/2k]
// at each level. Cells live on the N = (2k)^m grid.
struct HorseshoeCoding {
    int k = 2;
    int depth = 4;
    int resolution() const;
    std::size_t cell(const GridSet& g, const Word& window) const; // window = z_{-m}..z_{m-1}
    GridSet realize(const std::set<Word>& windows) const;
    GridSet realize(const SftHull& h) const;
    GridSet realize(const SymbolicSet& s) const;
};

struct Enclosure {
    std::optional<SftHull> hull;
    GridSet lambda1;
    GridSet hull_cells;
    GridSet cells; // union
    std::optional<NeighborhoodReport> neighborhood;
    bool disjoint = true;
    bool contains(const Sequence& z) const { return hull && hull->contains(z); }
    bool contains_cell(std::size_t i) const { return cells.test(i); }
};

// hull(lambda0, n) together with lambda1 on the coding grid. Throws Overlap
// when the realized hull meets lambda1, BadInput on a resolution mismatch.
Enclosure enclose(const SymbolicSet& lambda0, const GridSet& lambda1, int n, const HorseshoeCoding& coding);

// JSON: {"k": 2, "generators": [{"left": [...], "pre": [...], "period": [...]}]}
SymbolicSet symbolic_set_from_json(const std::string& text);
std::string symbolic_set_to_json(const SymbolicSet& s);
std::string hull_to_json(const SftHull& h);

std::string word_string(const Word& w);

} // namespace hyperdyn
