#include "hyperdyn/product_structure.hpp"

#include "hyperdyn/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <map>
#include <set>

namespace hyperdyn {

std::vector<IntVec> hermite_normal_form(std::vector<IntVec> rows)
{
    if (rows.empty())
        return rows;
    std::size_t dim = rows.front().size();
    std::size_t r = 0;
    for (std::size_t c = 0; c < dim && r < rows.size(); ++c) {
        // Euclid on column c among rows r..end.
        while (true) {
            std::size_t best = rows.size();
            for (std::size_t i = r; i < rows.size(); ++i)
                if (rows[i][c] != 0 && (best == rows.size() || std::llabs(rows[i][c]) < std::llabs(rows[best][c])))
                    best = i;
            if (best == rows.size())
                break;
            std::swap(rows[r], rows[best]);
            bool clean = true;
            for (std::size_t i = r + 1; i < rows.size(); ++i) {
                if (rows[i][c] == 0)
                    continue;
                long long q = rows[i][c] / rows[r][c];
                for (std::size_t k = 0; k < dim; ++k)
                    rows[i][k] -= q * rows[r][k];
                if (rows[i][c] != 0)
                    clean = false;
            }
            if (clean)
                break;
        }
        if (rows[r][c] == 0)
            continue;
        if (rows[r][c] < 0)
            for (auto& v : rows[r])
                v = -v;
        for (std::size_t i = 0; i < r; ++i) {
            long long p = rows[r][c];
            long long q = rows[i][c] / p;
            if (rows[i][c] - q * p < 0)
                --q;
            for (std::size_t k = 0; k < dim; ++k)
                rows[i][k] -= q * rows[r][k];
        }
        ++r;
    }
    rows.resize(r);
    return rows;
}

namespace {

std::size_t pivot_col(const IntVec& row)
{
    for (std::size_t c = 0; c < row.size(); ++c)
        if (row[c] != 0)
            return c;
    return row.size();
}

} // namespace

LatticeSubgroup::LatticeSubgroup(int dim, std::vector<IntVec> generators) : dim_(dim), gens_(std::move(generators))
{
    for (auto& g : gens_)
        if (static_cast<int>(g.size()) != dim)
            throw Error("BadInput", "generator of the wrong dimension");
    basis_ = hermite_normal_form(gens_);
}

long long LatticeSubgroup::index() const
{
    if (rank() != dim_)
        return 0;
    long long idx = 1;
    for (auto& row : basis_)
        idx *= row[pivot_col(row)];
    return idx;
}

bool LatticeSubgroup::contains(const IntVec& v0) const
{
    IntVec v = v0;
    for (auto& row : basis_) {
        std::size_t c = pivot_col(row);
        for (std::size_t k = 0; k < c; ++k)
            if (v[k] != 0)
                return false;
        if (v[c] % row[c] != 0)
            return false;
        long long q = v[c] / row[c];
        for (std::size_t k = 0; k < v.size(); ++k)
            v[k] -= q * row[k];
    }
    return std::all_of(v.begin(), v.end(), [](long long x) { return x == 0; });
}

bool LatticeSubgroup::contains(const LatticeSubgroup& o) const
{
    return std::all_of(o.basis_.begin(), o.basis_.end(), [this](const IntVec& v) { return contains(v); });
}

std::string LatticeSubgroup::to_json() const
{
    nlohmann::json j;
    j["generators"] = gens_;
    j["hnf_basis"] = basis_;
    j["rank"] = rank();
    j["index"] = index();
    return j.dump(2);
}

std::vector<std::array<long long, 3>> ball_offsets(int dim, int n, double radius)
{
    std::vector<std::array<long long, 3>> out;
    long long r = static_cast<long long>(std::ceil(radius * n));
    double lim = radius * n;
    long long rz = dim == 3 ? r : 0;
    for (long long z = -rz; z <= rz; ++z)
        for (long long y = -r; y <= r; ++y)
            for (long long x = -r; x <= r; ++x) {
                if (x == 0 && y == 0 && z == 0)
                    continue;
                double len = std::sqrt(static_cast<double>(x * x + y * y + z * z));
                if (len < lim)
                    out.push_back({x, y, z});
            }
    return out;
}

GammaDelta gamma_delta(const GridSet& s, const Vec& x0, double delta, std::size_t max_loops, std::size_t max_edges)
{
    int n = s.resolution(), dim = s.dim();
    std::size_t root = s.index_of(x0);
    if (!s.test(root))
        throw Error("BasepointMissing", "the basepoint cell is not in the set");
    auto offs = ball_offsets(dim, n, delta);
    if (s.count() * offs.size() / 2 > max_edges)
        throw Error("GraphTooLarge", "cell graph exceeds the edge budget");

    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> parent(s.size(), none);
    std::vector<std::array<long long, 3>> lift(s.size());
    parent[root] = root;
    lift[root] = s.coords(root);

    auto path_to_root = [&](std::size_t c) {
        std::vector<std::size_t> p{c};
        while (c != root) {
            c = parent[c];
            p.push_back(c);
        }
        return p;
    };

    GammaDelta out;
    std::set<IntVec> seen;
    std::vector<IntVec> gens;
    std::size_t directed = 0;
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
        std::size_t u = queue.front();
        queue.pop_front();
        ++out.cells;
        for (auto& o : offs) {
            std::size_t v = s.shifted(u, o);
            if (!s.test(v))
                continue;
            ++directed;
            std::array<long long, 3> lu = lift[u];
            for (int k = 0; k < 3; ++k)
                lu[k] += o[k];
            if (parent[v] == none) {
                parent[v] = u;
                lift[v] = lu;
                queue.push_back(v);
                continue;
            }
            IntVec disp(static_cast<std::size_t>(dim));
            bool zero = true;
            for (int k = 0; k < dim; ++k) {
                disp[k] = (lu[k] - lift[v][k]) / n;
                zero = zero && disp[k] == 0;
            }
            if (zero || !seen.insert(disp).second)
                continue;
            gens.push_back(disp);
            if (out.loops.size() < max_loops) {
                LoopClass loop;
                loop.basepoint = x0;
                loop.displacement = disp;
                auto pu = path_to_root(u);
                std::reverse(pu.begin(), pu.end());
                auto pv = path_to_root(v);
                loop.witness = pu;
                loop.witness.insert(loop.witness.end(), pv.begin(), pv.end());
                out.loops.push_back(std::move(loop));
            }
        }
    }
    out.edges = directed / 2;
    out.group = LatticeSubgroup(dim, gens);
    return out;
}

std::size_t GapStats::distinct_gaps(double tol) const
{
    std::vector<double> g = gaps;
    std::sort(g.begin(), g.end());
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (i == 0 || g[i] - g[i - 1] > tol)
            ++count;
    return count;
}

GapStats gap_statistics(std::vector<double> values, double window)
{
    GapStats st;
    for (double& v : values) {
        v = std::fmod(v, window);
        if (v < 0)
            v += window;
        if (v >= window)
            v = 0;
    }
    std::sort(values.begin(), values.end());
    st.positions = std::move(values);
    if (st.positions.empty()) {
        st.max_gap = window;
        return st;
    }
    std::size_t m = st.positions.size();
    st.gaps.resize(m);
    for (std::size_t i = 0; i + 1 < m; ++i)
        st.gaps[i] = st.positions[i + 1] - st.positions[i];
    st.gaps[m - 1] = window - st.positions[m - 1] + st.positions[0];
    st.max_gap = *std::max_element(st.gaps.begin(), st.gaps.end());
    return st;
}

GapStats projection_density(const LatticeSubgroup& g, const ToralAutomorphism& a, double window, std::size_t budget)
{
    int r = g.rank();
    std::vector<double> values;
    if (r == 0 || budget == 0)
        return gap_statistics(values, window);
    std::vector<double> proj;
    for (auto& row : g.basis()) {
        Vec v(a.dim());
        for (int k = 0; k < a.dim(); ++k)
            v[k] = static_cast<double>(row[k]);
        proj.push_back(a.unstable_coord(v));
    }
    // Shells of increasing sup norm, lexicographic inside a shell.
    std::vector<long long> c(static_cast<std::size_t>(r));
    for (long long R = 0; values.size() < budget; ++R) {
        std::fill(c.begin(), c.end(), -R);
        while (true) {
            long long sup = 0;
            for (auto x : c)
                sup = std::max(sup, std::llabs(x));
            if (sup == R) {
                double v = 0;
                for (int i = 0; i < r; ++i)
                    v += static_cast<double>(c[i]) * proj[i];
                values.push_back(v);
                if (values.size() >= budget)
                    break;
            }
            int i = r - 1;
            while (i >= 0 && c[i] == R)
                c[i--] = -R;
            if (i < 0)
                break;
            ++c[i];
        }
    }
    return gap_statistics(std::move(values), window);
}

Chain make_chain(std::vector<Vec> points, const ToralAutomorphism& a)
{
    Chain c;
    c.points = std::move(points);
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        Vec d = c.points[i + 1] - c.points[i];
        Vec u = a.unstable_part(d);
        c.epsilon = std::max({c.epsilon, u.norm(), (d - u).norm()});
    }
    return c;
}

Vec propagate_chain(const ToralAutomorphism& a, const Chain& c, std::vector<Chain>* levels)
{
    if (c.points.size() < 2)
        throw Error("EmptyChain", "a chain needs at least two points");
    Chain cur = c;
    if (levels)
        levels->push_back(cur);
    while (cur.points.size() > 2) {
        std::vector<Vec> next;
        for (std::size_t j = 0; j + 1 < cur.points.size(); ++j)
            next.push_back(bracket_linear(a, cur.points[j], cur.points[j + 1]));
        cur = make_chain(std::move(next), a);
        if (levels)
            levels->push_back(cur);
    }
    return bracket_linear(a, cur.points[0], cur.points[1]);
}

Splitting Splitting::linear(const ToralAutomorphism& a)
{
    Splitting s;
    s.dim = a.dim();
    s.contracting = [a](const Vec& v) { return a.contracting_part(v); };
    return s;
}

Splitting Splitting::axis_aligned()
{
    Splitting s;
    s.dim = 2;
    s.contracting = [](const Vec& v) { return vec2(0, v[1]); };
    return s;
}

namespace {

struct BracketRule {
    std::array<long long, 3> offset; // partner cell relative to x
    std::array<long long, 3> target; // bracket cell relative to x
};

// With cell centers a and b = a + o/N, [a, b] = a + C(o)/N lies in the cell
// a + floor(1/2 + C(o)), independent of a.
std::vector<BracketRule> bracket_rules(const Splitting& sp, int n, double delta_p)
{
    std::vector<BracketRule> out;
    for (auto& o : ball_offsets(sp.dim, n, delta_p)) {
        Vec v(sp.dim);
        for (int k = 0; k < sp.dim; ++k)
            v[k] = static_cast<double>(o[k]);
        Vec c = sp.contracting(v);
        BracketRule r{o, {0, 0, 0}};
        for (int k = 0; k < sp.dim; ++k)
            r.target[k] = static_cast<long long>(std::floor(0.5 + c[k]));
        out.push_back(r);
    }
    return out;
}

std::array<long long, 3> negate(const std::array<long long, 3>& o) { return {-o[0], -o[1], -o[2]}; }

} // namespace

Saturation bracket_saturate(const Splitting& sp, const GridSet& s, double delta_p, int max_rounds, unsigned threads)
{
    if (s.dim() != sp.dim)
        throw Error("BadInput", "splitting and set dimensions differ");
    auto rules = bracket_rules(sp, s.resolution(), delta_p);
    Saturation out;
    out.set = s;
    out.coverage.push_back(s.coverage());
    std::vector<std::size_t> frontier = s.members();
    if (threads == 0)
        threads = thread_count();
    while (out.rounds < max_rounds) {
        std::vector<GridSet> local(threads, GridSet(s.dim(), s.resolution()));
        const GridSet& cur = out.set;
        parallel_blocks(
            frontier.size(),
            [&](std::size_t b, std::size_t e, unsigned w) {
                GridSet& mark = local[w];
                for (std::size_t i = b; i < e; ++i) {
                    std::size_t f = frontier[i];
                    for (auto& r : rules) {
                        if (cur.test(cur.shifted(f, r.offset)))
                            mark.set(cur.shifted(f, r.target));
                        std::size_t g = cur.shifted(f, negate(r.offset));
                        if (cur.test(g))
                            mark.set(cur.shifted(g, r.target));
                    }
                }
            },
            threads);
        GridSet added(s.dim(), s.resolution());
        for (auto& l : local)
            added |= l;
        added = added.minus(cur);
        ++out.rounds;
        if (added.empty()) {
            out.fixpoint = true;
            out.coverage.push_back(out.set.coverage());
            break;
        }
        out.set |= added;
        out.coverage.push_back(out.set.coverage());
        frontier = added.members();
    }
    out.set.meta = "bracket saturation, " + std::to_string(out.rounds) + " rounds";
    return out;
}

std::optional<LpsWitness> lps_violation_witness(const Splitting& sp, const GridSet& s, double delta_p)
{
    if (s.dim() != sp.dim)
        throw Error("BadInput", "splitting and set dimensions differ");
    auto rules = bracket_rules(sp, s.resolution(), delta_p);
    for (std::size_t x : s.members())
        for (auto& r : rules) {
            std::size_t y = s.shifted(x, r.offset);
            if (!s.test(y))
                continue;
            std::size_t z = s.shifted(x, r.target);
            if (!s.test(z))
                return LpsWitness{x, y, z};
        }
    return std::nullopt;
}

GridSet ball_cells(int dim, int n, const Vec& center, double radius)
{
    GridSet out(dim, n);
    Vec c = torus_reduce(center);
    long long r = static_cast<long long>(std::ceil(radius * n)) + 1;
    std::array<long long, 3> base{0, 0, 0};
    for (int k = 0; k < dim; ++k)
        base[k] = static_cast<long long>(std::floor(c[k] * n));
    long long rz = dim == 3 ? r : 0;
    double h = 1.0 / n;
    for (long long dz = -rz; dz <= rz; ++dz)
        for (long long dy = -r; dy <= r; ++dy)
            for (long long dx = -r; dx <= r; ++dx) {
                std::array<long long, 3> cell{base[0] + dx, base[1] + dy, base[2] + dz};
                double d2 = 0;
                for (int k = 0; k < dim; ++k) {
                    // Distance from c[k] to the lifted interval [cell h, (cell + 1) h].
                    double lo = static_cast<double>(cell[k]) * h, hi = lo + h;
                    double d = c[k] < lo ? lo - c[k] : (c[k] > hi ? c[k] - hi : 0.0);
                    d2 += d * d;
                }
                if (d2 <= radius * radius)
                    out.set(out.index(cell));
            }
    return out;
}

HancockSearch hancock_search(const ToralAutomorphism& a, const Vec& x0, const Vec& center, double radius, int n,
    const std::vector<double>& angles, const std::vector<double>& halves, int max_iterations)
{
    if (a.dim() != 3)
        throw Error("BadInput", "the curve search runs on three-dimensional tori");
    LinearMap f(a);
    GridSet ball = ball_cells(3, n, center, radius);
    HancockSearch out;
    out.set = GridSet(3, n);
    Vec es = a.eigenvector(0), ec = a.eigenvector(1);
    for (double ang : angles)
        for (double half : halves) {
            Vec dir = std::cos(ang) * es + std::sin(ang) * ec;
            CurveSpec curve{{x0 - half * dir, x0, x0 + half * dir}, x0};
            auto fn = [&curve](double s) { return curve.at(s); };
            CurveFront fwd(f, fn, 0.0, curve.param_end(), 0.5 / n, false);
            CurveFront bwd(f, fn, 0.0, curve.param_end(), 0.5 / n, true);
            GridSet s(3, n);
            fwd.mark(s);
            for (int k = 0; k <= max_iterations; ++k) {
                if (k > 0) {
                    fwd.step();
                    bwd.step();
                    fwd.mark(s);
                    bwd.mark(s);
                }
                GridSet hit = s;
                hit &= ball;
                HancockCandidate c{ang, half, k, s.count(), hit.count(), curve};
                out.tried.push_back(c);
                if (c.ball_cells > 0)
                    break;
                if (!out.found || c.cells > out.best.cells) {
                    out.best = c;
                    out.set = s;
                    out.found = true;
                }
            }
        }
    if (out.found)
        out.set.meta = "truncated orbit of a contracting segment, " + std::to_string(out.best.iterations)
            + " iterations";
    return out;
}

} // namespace hyperdyn
