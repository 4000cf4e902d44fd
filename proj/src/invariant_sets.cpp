#include "hyperdyn/invariant_sets.hpp"

#include "hyperdyn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hyperdyn {

Vec CurveSpec::at(double s) const
{
    if (points.size() == 1)
        return points[0];
    double end = param_end();
    s = std::clamp(s, 0.0, end);
    std::size_t i = std::min(static_cast<std::size_t>(s), points.size() - 2);
    double f = s - static_cast<double>(i);
    return (1 - f) * points[i] + f * points[i + 1];
}

void CurveSpec::validate(const TorusMap& f) const
{
    if (points.empty())
        throw Error("BadInput", "curve has no points");
    for (auto& p : points)
        if (p.size() != f.dim())
            throw Error("BadInput", "curve point has the wrong dimension");
    if (x0.size() != f.dim())
        throw Error("BadInput", "curve has no fixed point");
    if (torus_distance(torus_reduce(f.forward(x0)), torus_reduce(x0)) > 1e-9)
        throw Error("BadInput", "x0 is not a fixed point of the map");
    double best = INFINITY;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i + 1 == points.size()) {
            best = std::min(best, (points[i] - x0).norm());
            break;
        }
        Vec a = points[i], d = points[i + 1] - a;
        double len2 = d.squaredNorm();
        double u = len2 > 0 ? std::clamp((x0 - a).dot(d) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (a + u * d - x0).norm());
    }
    if (best > 1e-9)
        throw Error("BadInput", "curve does not pass through x0");
}

CurveFront::CurveFront(const TorusMap& f, std::function<Vec(double)> curve, double t0, double t1, double spacing,
    bool backward, std::size_t max_points)
    : f_(f), curve_(std::move(curve)), spacing_(spacing), backward_(backward), max_points_(max_points)
{
    if (t1 < t0)
        std::swap(t0, t1);
    t_ = {t0};
    if (t1 > t0)
        t_ = {t0, 0.5 * (t0 + t1), t1};
    for (double t : t_)
        p_.push_back(curve_(t));
    refine();
}

Vec CurveFront::eval(double t) const
{
    Vec x = curve_(t);
    for (int i = 0; i < steps_; ++i)
        x = backward_ ? f_.inverse(x) : f_.forward(x);
    return x;
}

void CurveFront::step()
{
    for (auto& p : p_)
        p = backward_ ? f_.inverse(p) : f_.forward(p);
    ++steps_;
    refine();
}

void CurveFront::refine()
{
    if (t_.size() < 2)
        return;
    std::vector<double> nt{t_[0]};
    std::vector<Vec> np{p_[0]};
    double tspan = t_.back() - t_.front();
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        // Depth-first subdivision of the gap between i and i+1.
        std::vector<std::pair<double, Vec>> stack{{t_[i + 1], p_[i + 1]}};
        double ta = t_[i];
        Vec pa = p_[i];
        while (!stack.empty()) {
            auto [tb, pb] = stack.back();
            if ((pb - pa).cwiseAbs().maxCoeff() > spacing_ && tb - ta > 1e-15 * tspan) {
                double tm = 0.5 * (ta + tb);
                stack.emplace_back(tm, eval(tm));
                continue;
            }
            nt.push_back(tb);
            np.push_back(pb);
            ta = tb;
            pa = pb;
            stack.pop_back();
            if (nt.size() > max_points_)
                throw Error("ResolutionOverflow", "curve sample budget exceeded");
        }
    }
    t_ = std::move(nt);
    p_ = std::move(np);
}

void CurveFront::mark(GridSet& s) const
{
    if (p_.size() == 1) {
        s.set(s.index_of(p_[0]));
        return;
    }
    for (std::size_t i = 0; i + 1 < p_.size(); ++i)
        mark_segment(s, p_[i], p_[i + 1]);
}

OrbitClosure orbit_closure(const TorusMap& f, const CurveSpec& gamma, int n, int max_iters, std::size_t max_points)
{
    gamma.validate(f);
    OrbitClosure out;
    out.set = GridSet(f.dim(), n);
    auto curve = [&gamma](double s) { return gamma.at(s); };
    double spacing = 0.5 / n;
    CurveFront fwd(f, curve, 0.0, gamma.param_end(), spacing, false, max_points);
    CurveFront bwd(f, curve, 0.0, gamma.param_end(), spacing, true, max_points);
    fwd.mark(out.set);
    out.counts.push_back(out.set.count());
    for (int it = 1; it <= max_iters; ++it) {
        fwd.step();
        bwd.step();
        fwd.mark(out.set);
        bwd.mark(out.set);
        out.iterations = it;
        out.counts.push_back(out.set.count());
        if (out.counts.back() == out.counts[out.counts.size() - 2]) {
            out.stable = true;
            break;
        }
    }
    out.set.meta = "orbit closure of a " + std::to_string(gamma.points.size()) + "-point polyline, "
        + std::to_string(out.iterations) + " iterations";
    return out;
}

namespace {

// Sample offsets inside a cell, including the corners.
std::vector<Vec> cell_samples(int dim, int m, double width, bool corners)
{
    std::vector<Vec> out;
    int total = 1;
    for (int d = 0; d < dim; ++d)
        total *= m;
    for (int k = 0; k < total; ++k) {
        Vec v(dim);
        int r = k;
        for (int d = 0; d < dim; ++d) {
            int i = r % m;
            r /= m;
            double frac = corners ? (m == 1 ? 0.5 : static_cast<double>(i) / (m - 1)) : (i + 0.5) / m;
            v[d] = frac * width;
        }
        out.push_back(v);
    }
    return out;
}

Vec cell_corner(const GridSet& s, std::size_t i)
{
    auto c = s.coords(i);
    Vec x(s.dim());
    for (int d = 0; d < s.dim(); ++d)
        x[d] = static_cast<double>(c[d]) / s.resolution();
    return x;
}

// Flattened per-cell lists of sampled image cells.
struct CellImages {
    std::vector<std::size_t> offset;
    std::vector<std::uint32_t> cells;
};

CellImages sample_images(const TorusMap& f, const GridSet& shape, int m, bool inverse)
{
    auto samples = cell_samples(shape.dim(), m, shape.cell_width(), true);
    std::size_t n = shape.size();
    unsigned threads = thread_count();
    std::vector<std::vector<std::uint32_t>> lists(n);
    parallel_blocks(
        n,
        [&](std::size_t b, std::size_t e, unsigned) {
            std::vector<std::uint32_t> tmp;
            for (std::size_t i = b; i < e; ++i) {
                Vec base = cell_corner(shape, i);
                tmp.clear();
                for (auto& s : samples) {
                    Vec y = inverse ? f.inverse(base + s) : f.forward(base + s);
                    tmp.push_back(static_cast<std::uint32_t>(shape.index_of(y)));
                }
                std::sort(tmp.begin(), tmp.end());
                tmp.erase(std::unique(tmp.begin(), tmp.end()), tmp.end());
                lists[i] = tmp;
            }
        },
        threads);
    CellImages out;
    out.offset.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
        out.offset[i + 1] = out.offset[i] + lists[i].size();
    out.cells.reserve(out.offset[n]);
    for (auto& l : lists)
        out.cells.insert(out.cells.end(), l.begin(), l.end());
    return out;
}

} // namespace

GridSet avoidance_set(const TorusMap& f, const Vec& center, double radius, int n, int horizon, int samples_per_axis)
{
    if (!(radius > 0))
        throw Error("BadInput", "ball radius must be positive");
    GridSet s(f.dim(), n);
    if (s.size() > (std::size_t(1) << 31))
        throw Error("ResolutionOverflow", "too many cells for image tables");
    auto samples = cell_samples(f.dim(), samples_per_axis, s.cell_width(), true);
    for (std::size_t i = 0; i < s.size(); ++i) {
        Vec base = cell_corner(s, i);
        bool outside = true;
        for (auto& o : samples)
            if (torus_distance(base + o, center) < radius) {
                outside = false;
                break;
            }
        if (outside)
            s.set(i);
    }
    if (horizon <= 0 || s.empty())
        return s;
    auto fwd = sample_images(f, s, samples_per_axis, false);
    auto bwd = sample_images(f, s, samples_per_axis, true);
    std::size_t words = s.words().size();
    for (int h = 0; h < horizon; ++h) {
        GridSet next(s.dim(), n);
        std::vector<std::uint64_t> packed(words, 0);
        parallel_blocks(words, [&](std::size_t b, std::size_t e, unsigned) {
            for (std::size_t w = b; w < e; ++w)
                for (std::size_t i = w * 64; i < std::min(s.size(), (w + 1) * 64); ++i) {
                    if (!s.test(i))
                        continue;
                    bool img = false, pre = false;
                    for (std::size_t k = fwd.offset[i]; k < fwd.offset[i + 1] && !img; ++k)
                        img = s.test(fwd.cells[k]);
                    for (std::size_t k = bwd.offset[i]; k < bwd.offset[i + 1] && !pre; ++k)
                        pre = s.test(bwd.cells[k]);
                    if (img && pre)
                        packed[w] |= std::uint64_t(1) << (i & 63);
                }
        });
        for (std::size_t w = 0; w < words; ++w)
            for (std::uint64_t b = packed[w]; b; b &= b - 1)
                next.set(w * 64 + static_cast<std::size_t>(__builtin_ctzll(b)));
        bool same = next == s;
        s = std::move(next);
        if (same)
            break;
    }
    s.meta = "avoidance set, horizon " + std::to_string(horizon);
    return s;
}

std::size_t Components::largest() const
{
    return sizes.empty() ? 0 : *std::max_element(sizes.begin(), sizes.end());
}

Components connected_components(const GridSet& s, Adjacency adj)
{
    int dim = s.dim();
    std::vector<std::array<long long, 3>> offs;
    // Half of the neighbourhood suffices for union-find.
    for (long long a = -1; a <= 1; ++a)
        for (long long b = -1; b <= 1; ++b)
            for (long long c = -1; c <= 1; ++c) {
                if ((dim < 3 && c != 0) || (dim < 2 && b != 0))
                    continue;
                std::array<long long, 3> d{a, b, c};
                int nz = (a != 0) + (b != 0) + (c != 0);
                if (nz == 0 || (adj == Adjacency::Face && nz != 1))
                    continue;
                // keep the lexicographically positive half
                auto it = std::find_if(d.rbegin(), d.rend(), [](long long v) { return v != 0; });
                if (*it < 0)
                    continue;
                offs.push_back(d);
            }
    std::vector<std::size_t> parent(s.size());
    std::iota(parent.begin(), parent.end(), std::size_t(0));
    auto find = [&parent](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto members = s.members();
    for (std::size_t i : members)
        for (auto& d : offs) {
            std::size_t j = s.shifted(i, d);
            if (j != i && s.test(j)) {
                std::size_t a = find(i), b = find(j);
                if (a != b)
                    parent[std::max(a, b)] = std::min(a, b);
            }
        }
    Components out;
    out.label.assign(s.size(), -1);
    std::vector<int> root_label(s.size(), -1);
    for (std::size_t i : members) {
        std::size_t r = find(i);
        if (root_label[r] < 0) {
            root_label[r] = static_cast<int>(out.sizes.size());
            out.sizes.push_back(0);
        }
        out.label[i] = root_label[r];
        ++out.sizes[root_label[r]];
    }
    return out;
}

std::pair<GridSet, GridSet> decompose_lambda01(const GridSet& s, Adjacency adj)
{
    auto comp = connected_components(s, adj);
    GridSet l0(s.dim(), s.resolution()), l1(s.dim(), s.resolution());
    for (std::size_t i : s.members()) {
        if (comp.sizes[comp.label[i]] == 1)
            l0.set(i);
        else
            l1.set(i);
    }
    l0.meta = "singleton components";
    l1.meta = "non-singleton components";
    return {l0, l1};
}

std::vector<Vec> local_arc(const TorusMap& f, const Vec& x, ArcSide side, double arc_len, double spacing, int depth)
{
    const auto& a = f.base();
    int nu = a.unstable_dim(), n = a.dim();
    bool unstable = side == ArcSide::Unstable;
    if ((unstable && nu != 1) || (!unstable && n - nu != 1))
        throw Error("ManifoldUnavailable", "local arcs need a one-dimensional stable or unstable direction");
    Vec e = unstable ? a.eigenvector(n - 1) : a.eigenvector(0);
    double rate = unstable ? a.lambda_u() : 1.0 / a.eigenvalues()[0];
    Vec y = iterate(f, x, unstable ? -depth : depth);
    double half = 0.5 * arc_len;
    double seed_len = 4.0 * half * std::pow(rate, -depth);
    std::vector<Vec> arc;
    for (int attempt = 0; attempt < 3; ++attempt, seed_len *= 4) {
        CurveFront front(
            f, [&](double t) { return Vec(y + t * e); }, -seed_len, seed_len, spacing, !unstable);
        for (int k = 0; k < depth; ++k)
            front.step();
        const auto& ts = front.params();
        const auto& ps = front.points();
        std::size_t mid = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), 0.0) - ts.begin());
        if (mid >= ts.size())
            throw Error("ManifoldUnavailable", "lost the base point");
        // Walk outward from the base point until half the length is used.
        std::vector<Vec> left, right;
        double acc_l = 0, acc_r = 0;
        for (std::size_t i = mid; i > 0 && acc_l < half; --i) {
            acc_l += (ps[i] - ps[i - 1]).norm();
            left.push_back(ps[i - 1]);
        }
        for (std::size_t i = mid; i + 1 < ps.size() && acc_r < half; ++i) {
            acc_r += (ps[i + 1] - ps[i]).norm();
            right.push_back(ps[i + 1]);
        }
        arc.assign(left.rbegin(), left.rend());
        arc.push_back(ps[mid]);
        arc.insert(arc.end(), right.begin(), right.end());
        // A branch can be genuinely short, e.g. a stable branch ending at a
        // source; after a few longer seeds the truncated arc is returned.
        if (acc_l >= half && acc_r >= half)
            break;
    }
    return arc;
}

bool local_arc_test(const TorusMap& f, const GridSet& s, const Vec& x, ArcSide side, double arc_len, int depth)
{
    auto arc = local_arc(f, x, side, arc_len, 0.25 * s.cell_width(), depth);
    for (auto& p : arc)
        if (!s.test(s.index_of(p)))
            return false;
    return true;
}

GridSet image_cells(const TorusMap& f, const GridSet& s, int m)
{
    auto members = s.members();
    auto samples = cell_samples(s.dim(), m, s.cell_width(), true);
    unsigned threads = thread_count();
    std::vector<std::vector<std::size_t>> hits(std::max(1u, threads));
    parallel_blocks(
        members.size(),
        [&](std::size_t b, std::size_t e, unsigned w) {
            for (std::size_t k = b; k < e; ++k) {
                Vec base = cell_corner(s, members[k]);
                for (auto& o : samples)
                    hits[w].push_back(s.index_of(f.forward(base + o)));
            }
        },
        threads);
    GridSet out(s.dim(), s.resolution());
    for (auto& h : hits)
        for (std::size_t i : h)
            out.set(i);
    return out;
}

BumpMap planar_da(double mu, double cstar, double half_length, double radius)
{
    auto cat = ToralAutomorphism::classify(integer_matrix({{2, 1}, {1, 1}}));
    BifurcationProfile::Params p;
    p.lambda = cat.eigenvalues()[0];
    p.mu = mu;
    p.cstar = cstar;
    p.w = half_length;
    BumpMap g(cat, vec2(0, 0), 0, BifurcationProfile(p), radius);
    g.set_id("planar-da");
    return g;
}

GridSet da_attractor_grid(const BumpMap& f, int n, int iterations, double hole_radius, int m)
{
    GridSet s(f.dim(), n);
    auto samples = cell_samples(f.dim(), 3, s.cell_width(), true);
    for (std::size_t i = 0; i < s.size(); ++i) {
        Vec base = cell_corner(s, i);
        bool outside = true;
        for (auto& o : samples)
            if (torus_distance(base + o, f.center()) < hole_radius)
                outside = false;
        if (outside)
            s.set(i);
    }
    for (int k = 0; k < iterations; ++k) {
        GridSet next = image_cells(f, s, m);
        next &= s;
        if (next == s)
            break;
        s = std::move(next);
    }
    s.meta = "planar DA attractor";
    return s;
}

GridSet horseshoe_grid_set(int n)
{
    int depth = 0;
    long long scale = 1;
    while (scale < n) {
        scale *= 4;
        ++depth;
    }
    std::vector<char> axis(static_cast<std::size_t>(n), 0);
    for (long long word = 0; word < (1LL << depth); ++word) {
        // Left end of the interval in units of 4^-depth.
        long long a = 0;
        for (int i = 0; i < depth; ++i)
            a = 4 * a + (((word >> (depth - 1 - i)) & 1) ? 3 : 1);
        long long lo = a * n / scale;
        long long hi = ((a + 1) * n + scale - 1) / scale - 1;
        for (long long c = lo; c <= hi; ++c)
            axis[static_cast<std::size_t>(c % n)] = 1;
    }
    GridSet s(2, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            if (axis[x] && axis[y])
                s.set(s.index({x, y, 0}));
    s.meta = "horseshoe (Cantor square, base-4 digits 1 and 3)";
    return s;
}

} // namespace hyperdyn
