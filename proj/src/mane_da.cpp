#include "hyperdyn/mane_da.hpp"

#include "hyperdyn/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>

namespace hyperdyn {

namespace {

// Orthonormal basis of the contracting plane span(e_s, e_c).
std::pair<Vec, Vec> contracting_basis(const ToralAutomorphism& a)
{
    Vec q1 = a.eigenvector(0).normalized();
    Vec q2 = a.eigenvector(1);
    q2 -= q2.dot(q1) * q1;
    return {q1, q2.normalized()};
}

Vec random_in_ball(std::mt19937_64& rng, const Vec& c, double radius)
{
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud;
    Vec d(c.size());
    for (int k = 0; k < d.size(); ++k)
        d[k] = nd(rng);
    double r = radius * std::cbrt(ud(rng));
    return c + r * d.normalized();
}

double polyline_arc(const UnstableChart& ch, double s0, double s1, int pieces = 32)
{
    double arc = 0;
    Vec prev = ch.at(s0);
    for (int i = 1; i <= pieces; ++i) {
        Vec p = ch.at(s0 + (s1 - s0) * i / pieces);
        arc += (p - prev).norm();
        prev = p;
    }
    return arc;
}

// Chart parameter where the leaf meets the (s, c) plane through x.
double leaf_plane_parameter(const ToralAutomorphism& a, const UnstableChart& ch, const Vec& y, const Vec& x,
    double range)
{
    auto phi = [&](double s) { return a.unstable_coord(ch.at(s) - x); };
    double fa = phi(0);
    if (fa == 0)
        return 0;
    double sa = 0, sb = -fa * ch.scale();
    double fb = phi(sb);
    int grow = 0;
    while ((fa < 0) == (fb < 0)) {
        if ((ch.at(sb) - y).norm() > range || ++grow > 60)
            throw Error("NoIntersectionInRange", "unstable leaf does not reach the (s, c) plane in range");
        sa = sb;
        fa = fb;
        sb *= 2;
        fb = phi(sb);
    }
    double tol = 1e-15 * std::max(1.0, std::fabs(a.unstable_coord(x)));
    auto accept = [&](double s) {
        if ((ch.at(s) - y).norm() > range)
            throw Error("NoIntersectionInRange", "unstable leaf does not reach the (s, c) plane in range");
        return s;
    };
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double s = sb - fb * (sb - sa) / (fb - fa);
        if (!(s > std::min(sa, sb) && s < std::max(sa, sb)))
            s = 0.5 * (sa + sb);
        double fs = phi(s);
        if (std::fabs(fs) <= tol || s == sa || s == sb)
            return accept(s);
        if ((fs < 0) == (fb < 0)) {
            sb = s;
            fb = fs;
            if (side == -1)
                fa *= 0.5;
            side = -1;
        } else {
            sa = s;
            fa = fs;
            if (side == 1)
                fb *= 0.5;
            side = 1;
        }
    }
    return accept(std::fabs(fa) < std::fabs(fb) ? sa : sb);
}

} // namespace

// ---------------------------------------------------------------- construction

DaMap::DaMap(ToralAutomorphism original, BumpMap bump, DaParams p)
    : original_(std::move(original)), bump_(std::move(bump)), p_(std::move(p))
{
    roots_ = hyperdyn::center_fixed_points(bump_.profile());
    const auto& pr = bump_.profile().params();
    for (int i = 0; i <= 4000; ++i) {
        double t = -pr.w + 2 * pr.w * i / 4000.0;
        amplitude_ = std::max(amplitude_, std::fabs(bump_.profile().k(t)));
    }
}

std::vector<double> center_fixed_points(const BifurcationProfile& prof, int grid)
{
    double w = prof.params().w * 1.01;
    auto f = [&](double t) { return prof.g(t) - t; };
    std::vector<double> roots;
    double ta = -w, fa = f(ta);
    for (int i = 1; i <= grid; ++i) {
        double tb = -w + 2 * w * i / grid, fb = f(tb);
        if (fa == 0) {
            roots.push_back(ta);
        } else if (fb != 0 && (fa < 0) != (fb < 0)) {
            double lo = ta, hi = tb, flo = fa;
            for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
                double m = 0.5 * (lo + hi), fm = f(m);
                if (fm == 0) {
                    lo = hi = m;
                    break;
                }
                if ((fm < 0) == (flo < 0)) {
                    lo = m;
                    flo = fm;
                } else {
                    hi = m;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        ta = tb;
        fa = fb;
    }
    if (fa == 0)
        roots.push_back(ta);
    std::vector<double> out;
    for (double r : roots)
        if (out.empty() || r - out.back() > 1e-12)
            out.push_back(r);
    return out;
}

DaMap build_da(const ToralAutomorphism& a, const DaParams& p)
{
    if (a.dim() != 3 || !a.t3_class())
        throw Error("WrongClass", "DA construction needs a real-spectrum automorphism of T^3 with one unstable direction");
    if (p.power < 1)
        throw Error("BadInput", "power must be positive");
    ToralAutomorphism b = a.power(p.power);
    Vec x1 = torus_reduce(p.x1);
    if (torus_distance(b.apply_torus(x1), x1) > 1e-12)
        throw Error("BadInput", "x1 is not fixed by the base map");
    if (!(p.rho > 0 && p.rho < 0.5))
        throw Error("BadInput", "rho must lie in (0, 0.5)");
    if (!(p.mu > 1 && p.mu < b.lambda_u()))
        throw Error("BadBifurcation", "mu must lie in (1, lambda_u)");
    if (!(p.cstar > 0 && p.cstar < p.rho / 4))
        throw Error("BadBifurcation", "cstar must lie in (0, rho/4)");
    if (!(p.d > 0 && p.d < 1))
        throw Error("BadBifurcation", "d must lie in (0, 1)");
    double w = p.half_length > 0 ? p.half_length : 0.87 * p.rho / 2;
    double r = p.radius > 0 ? p.radius : 0.45 * p.rho / 2;
    if (std::hypot(w, r) >= p.rho / 2)
        throw Error("SupportLeak", "bump support is not inside B(x1, rho/2)");

    BifurcationProfile::Params pp;
    pp.lambda = b.lambda_c();
    pp.mu = p.mu;
    pp.cstar = p.cstar;
    pp.d = p.d;
    pp.w = w;
    BifurcationProfile prof(pp); // throws BadBifurcation
    if (!(prof.min_derivative() > 0))
        throw Error("BadBifurcation", "center map is not increasing");

    DaParams q = p;
    q.x1 = x1;
    q.half_length = w;
    q.radius = r;
    BumpMap bump(b, x1, 1, prof, r);
    bump.set_id("da");
    DaMap g(a, std::move(bump), q);

    const auto& roots = g.center_fixed_points();
    if (roots.size() != 3 || std::fabs(roots[0] + p.cstar) > 1e-9 || std::fabs(roots[1]) > 1e-9
        || std::fabs(roots[2] - p.cstar) > 1e-9)
        throw Error("BadBifurcation", "center line does not carry exactly the fixed points 0, +-cstar");
    if (!(prof.dg(0) > 1))
        throw Error("BadBifurcation", "x1 is not repelling along the center");
    for (double t : {roots[0], roots[2]})
        if (!(prof.dg(t) > 0 && prof.dg(t) < 1))
            throw Error("BadBifurcation", "x2, x3 are not attracting along the center");

    // Probe just outside the support ball: the map must be exactly linear there.
    std::mt19937_64 rng(mix_seed(0xda, 0));
    std::normal_distribution<double> nd;
    for (int i = 0; i < 2000; ++i) {
        Vec d = vec3(nd(rng), nd(rng), nd(rng)).normalized();
        Vec x = x1 + (p.rho / 2 * (1 + 1e-9 + 0.2 * i / 2000.0)) * d;
        if (g.bump().bump(x) != 0)
            throw Error("SupportLeak", "perturbation is nonzero outside B(x1, rho/2)");
    }
    return g;
}

// ---------------------------------------------------------------- cones

ConeReport verify_cones(const TorusMap& f, const Vec& center, double radius, double theta, std::size_t samples,
    std::uint64_t seed, double growth_floor)
{
    const ToralAutomorphism& a = f.base();
    auto [q1, q2] = contracting_basis(a);
    Vec eu = a.eigenvector(2);
    double t = std::tan(theta);
    constexpr int kDirs = 16;

    struct Row {
        bool ufail = false, sfail = false, gfail = false;
        double growth = INFINITY, uratio = 0, sratio = 0;
        Vec x;
    };
    std::vector<Row> rows(samples);
    parallel_for(samples, [&](std::size_t i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        Row& r = rows[i];
        r.x = random_in_ball(rng, center, radius);
        Mat j = f.jacobian(r.x);
        Mat jinv = j.inverse();
        auto ratio_u = [&](const Vec& w) {
            Vec uw = a.unstable_part(w);
            return (w - uw).norm() / uw.norm();
        };
        Vec g0 = j * eu;
        r.growth = g0.norm();
        r.uratio = ratio_u(g0) / t;
        for (int k = 0; k < kDirs; ++k) {
            double phi = 2 * std::numbers::pi * k / kDirs;
            Vec c = std::cos(phi) * q1 + std::sin(phi) * q2;
            Vec v = eu + t * c;
            Vec w = j * v;
            r.growth = std::min(r.growth, w.norm() / v.norm());
            r.uratio = std::max(r.uratio, ratio_u(w) / t);
            for (int sg : {-1, 1}) {
                Vec vs = c + sg * t * eu;
                Vec ws = jinv * vs;
                Vec uw = a.unstable_part(ws);
                r.sratio = std::max(r.sratio, uw.norm() / ((ws - uw).norm() * t));
            }
        }
        r.ufail = !(r.uratio < 1);
        r.sfail = !(r.sratio < 1);
        r.gfail = !(r.growth >= growth_floor);
    });

    ConeReport rep;
    rep.theta = theta;
    rep.samples = samples;
    rep.growth_floor = growth_floor;
    rep.min_unstable_growth = INFINITY;
    for (const Row& r : rows) {
        rep.unstable_failures += r.ufail;
        rep.stable_failures += r.sfail;
        rep.growth_failures += r.gfail;
        rep.min_unstable_growth = std::min(rep.min_unstable_growth, r.growth);
        rep.max_unstable_ratio = std::max(rep.max_unstable_ratio, r.uratio);
        rep.max_stable_ratio = std::max(rep.max_stable_ratio, r.sratio);
        if ((r.ufail || r.sfail || r.gfail) && rep.witnesses.size() < 8)
            rep.witnesses.push_back(r.x);
    }
    return rep;
}

ConeReport verify_cones(const DaMap& f, double theta, std::size_t samples, std::uint64_t seed)
{
    return verify_cones(f, f.x1(), f.params().rho / 2, theta, samples, seed);
}

Vec unstable_direction(const TorusMap& f, const Vec& x, int depth, double tol)
{
    Vec z = torus_reduce(x);
    std::vector<Vec> orbit{z};
    for (int i = 0; i < depth; ++i)
        orbit.push_back(torus_reduce(f.inverse(orbit.back())));
    // Probes started depth and depth - 1 steps back must agree.
    Vec v = f.base().eigenvector(2), w = v;
    for (int i = depth; i >= 1; --i)
        v = (f.jacobian(orbit[i]) * v).normalized();
    for (int i = depth - 1; i >= 1; --i)
        w = (f.jacobian(orbit[i]) * w).normalized();
    if ((v - w).norm() > tol)
        throw Error("DirectionNotConverged", "unstable direction did not settle at this depth");
    return v;
}

// ---------------------------------------------------------------- unstable charts

UnstableChart::UnstableChart(const TorusMap& f, const Vec& x, int depth) : f_(f), x_(x), depth_(depth)
{
    if (f.dim() != 3)
        throw Error("BadInput", "unstable charts are three-dimensional");
    eu_ = f.base().eigenvector(2);
    Vec z = torus_reduce(x);
    orbit_.resize(static_cast<std::size_t>(depth_));
    for (int i = depth_ - 1; i >= 0; --i) {
        z = torus_reduce(f.inverse(z));
        orbit_[static_cast<std::size_t>(i)] = z;
    }
    scale_ = std::pow(f.base().lambda_u(), -depth_);
}

Vec UnstableChart::at(double s) const
{
    if (s == 0)
        return x_;
    Vec d = s * eu_;
    for (const Vec& p : orbit_)
        d = f_.displacement(p, d);
    return x_ + d;
}

// ---------------------------------------------------------------- leaves

namespace {

struct Sample {
    double s;
    Vec p;
};

std::vector<Sample> refine(const UnstableChart& ch, double s0, double s1, double h)
{
    std::vector<Sample> cur{{s0, ch.at(s0)}, {0.0, ch.at(0.0)}, {s1, ch.at(s1)}};
    constexpr std::size_t kMaxPoints = 50'000'000;
    for (;;) {
        std::vector<std::size_t> split;
        for (std::size_t i = 0; i + 1 < cur.size(); ++i)
            if ((cur[i + 1].p - cur[i].p).norm() > h)
                split.push_back(i);
        if (split.empty())
            return cur;
        if (cur.size() + split.size() > kMaxPoints)
            throw Error("ResolutionOverflow", "leaf needs too many points at this spacing");
        std::vector<Sample> mids(split.size());
        std::atomic<bool> exhausted{false};
        parallel_for(split.size(), [&](std::size_t j) {
            std::size_t i = split[j];
            double s = 0.5 * (cur[i].s + cur[i + 1].s);
            if (s == cur[i].s || s == cur[i + 1].s)
                exhausted = true;
            mids[j] = {s, ch.at(s)};
        });
        if (exhausted)
            throw Error("NoConvergence", "leaf parameter exhausted before reaching the spacing");
        std::vector<Sample> next;
        next.reserve(cur.size() + split.size());
        std::size_t j = 0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            next.push_back(std::move(cur[i]));
            if (j < split.size() && split[j] == i)
                next.push_back(std::move(mids[j++]));
        }
        cur.swap(next);
    }
}

} // namespace

Leaf integrate_leaf(const TorusMap& f, const Vec& x, LeafField field, double length, double h, int depth)
{
    if (!(length >= 0) || !(h > 0))
        throw Error("BadInput", "leaf length and spacing must be positive");
    Leaf leaf;
    leaf.seed = x;
    leaf.field = field;
    leaf.h = h;
    const ToralAutomorphism& a = f.base();
    double half = 0.5 * length;

    if (field == LeafField::Center) {
        Vec ec = a.eigenvector(1);
        long long m = static_cast<long long>(std::ceil(half / h));
        double step = m > 0 ? half / static_cast<double>(m) : 0;
        for (long long i = -m; i <= m; ++i) {
            leaf.points.push_back(x + (static_cast<double>(i) * step) * ec);
            leaf.arclen.push_back(static_cast<double>(i + m) * step);
        }
        leaf.seed_index = static_cast<std::size_t>(m);
        return leaf;
    }
    if (field == LeafField::CenterStable) {
        auto [q1, q2] = contracting_basis(a);
        long long m = static_cast<long long>(std::ceil(half / h));
        double step = m > 0 ? half / static_cast<double>(m) : 0;
        for (long long i = -m; i <= m; ++i)
            for (long long j = -m; j <= m; ++j)
                leaf.points.push_back(x + (static_cast<double>(i) * step) * q1 + (static_cast<double>(j) * step) * q2);
        leaf.patch_side = static_cast<int>(2 * m + 1);
        leaf.seed_index = static_cast<std::size_t>(m * (2 * m + 1) + m);
        return leaf;
    }

    UnstableChart ch(f, x, depth);
    if (length == 0) {
        leaf.points.push_back(x);
        leaf.arclen.push_back(0);
        return leaf;
    }
    double lo = -0.6 * length * ch.scale(), hi = -lo;
    std::vector<Sample> pts;
    std::size_t seed = 0;
    std::vector<double> cum;
    for (int attempt = 0;; ++attempt) {
        pts = refine(ch, lo, hi, h);
        seed = 0;
        while (pts[seed].s != 0.0)
            ++seed;
        cum.assign(pts.size(), 0.0);
        for (std::size_t i = 1; i < pts.size(); ++i)
            cum[i] = cum[i - 1] + (pts[i].p - pts[i - 1].p).norm();
        bool left = cum[seed] >= half, right = cum.back() - cum[seed] >= half;
        if (left && right)
            break;
        if (attempt > 20)
            throw Error("NoConvergence", "leaf chart does not reach the requested length");
        if (!left)
            lo *= 2;
        if (!right)
            hi *= 2;
    }
    std::size_t b = seed, e = seed;
    while (b > 0 && cum[seed] - cum[b - 1] <= half)
        --b;
    while (e + 1 < pts.size() && cum[e + 1] - cum[seed] <= half)
        ++e;
    for (std::size_t i = b; i <= e; ++i) {
        leaf.points.push_back(pts[i].p);
        leaf.arclen.push_back(cum[i] - cum[b]);
    }
    leaf.seed_index = seed - b;
    return leaf;
}

void write_leaf_csv(const Leaf& leaf, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("IoError", "cannot write " + path);
    out << std::setprecision(17) << "index,arclen,x,y,z\n";
    for (std::size_t i = 0; i < leaf.points.size(); ++i) {
        out << i << ',';
        if (i < leaf.arclen.size())
            out << leaf.arclen[i];
        const Vec& p = leaf.points[i];
        out << ',' << p[0] << ',' << p[1] << ',' << p[2] << '\n';
    }
}

double leaf_density(const TorusMap& f, const Vec& x, LeafField field, double length, int n, GridSet* marked)
{
    GridSet s(f.dim(), n);
    Leaf leaf = integrate_leaf(f, x, field, length, 0.5 / n);
    if (field == LeafField::CenterStable) {
        int side = leaf.patch_side;
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                const Vec& p = leaf.points[static_cast<std::size_t>(i) * side + j];
                s.set(s.index_of(p));
                if (j + 1 < side)
                    mark_segment(s, p, leaf.points[static_cast<std::size_t>(i) * side + j + 1]);
                if (i + 1 < side)
                    mark_segment(s, p, leaf.points[static_cast<std::size_t>(i + 1) * side + j]);
            }
    } else {
        s.set(s.index_of(leaf.points.front()));
        for (std::size_t i = 0; i + 1 < leaf.points.size(); ++i)
            mark_segment(s, leaf.points[i], leaf.points[i + 1]);
    }
    double cov = s.coverage();
    if (marked)
        *marked = std::move(s);
    return cov;
}

Vec bracket_foliated(const TorusMap& f, const Vec& x, const Vec& y, double range)
{
    UnstableChart ch(f, y);
    return ch.at(leaf_plane_parameter(f.base(), ch, y, x, range));
}

// ---------------------------------------------------------------- separation

double SeparationTable::delta_for(double eps) const
{
    double best = 0;
    for (auto [e, d] : modulus)
        if (e <= eps)
            best = std::max(best, d);
    return best;
}

SeparationTable leaf_separation_modulus(const TorusMap& f, const std::vector<double>& deltas,
    const std::vector<double>& eps_grid, std::size_t pairs, double zmax, std::uint64_t seed,
    const std::optional<Focus>& focus)
{
    const ToralAutomorphism& a = f.base();
    auto [q1, q2] = contracting_basis(a);
    std::vector<double> ds = deltas;
    std::sort(ds.begin(), ds.end());

    struct Cell {
        double sep = 0, ratio = 0;
        bool fail = false;
    };
    std::vector<Cell> cells(ds.size() * pairs);
    parallel_for(cells.size(), [&](std::size_t idx) {
        std::size_t di = idx / pairs, pi = idx % pairs;
        std::mt19937_64 rng(mix_seed(seed, pi));
        std::uniform_real_distribution<double> ud;
        Vec x = focus ? random_in_ball(rng, focus->center, focus->radius) : vec3(ud(rng), ud(rng), ud(rng));
        double sign = ud(rng) < 0.5 ? -1.0 : 1.0;
        double ang = 2 * std::numbers::pi * ud(rng), rad = zmax * std::sqrt(ud(rng));
        Vec z = x + rad * (std::cos(ang) * q1 + std::sin(ang) * q2);
        double delta = ds[di];
        Cell& c = cells[idx];
        try {
            UnstableChart cx(f, x);
            // y on the leaf of x at chord distance delta.
            double lo = 0, hi = sign * delta * cx.scale();
            for (int g = 0; (cx.at(hi) - x).norm() < delta; ++g) {
                if (g > 60)
                    throw Error("NoIntersectionInRange", "leaf too short");
                lo = hi;
                hi *= 2;
            }
            for (int it = 0; it < 80; ++it) {
                double m = 0.5 * (lo + hi);
                ((cx.at(m) - x).norm() < delta ? lo : hi) = m;
            }
            Vec y = cx.at(0.5 * (lo + hi));
            UnstableChart cz(f, z);
            double sq = leaf_plane_parameter(a, cz, z, y, 1.0);
            c.sep = polyline_arc(cz, 0, sq);
            c.ratio = c.sep / delta;
        } catch (const Error&) {
            c.fail = true;
        }
    });

    SeparationTable t;
    t.samples = cells.size();
    for (std::size_t di = 0; di < ds.size(); ++di) {
        SeparationRow row;
        row.delta = ds[di];
        std::size_t ok = 0;
        for (std::size_t pi = 0; pi < pairs; ++pi) {
            const Cell& c = cells[di * pairs + pi];
            if (c.fail) {
                ++t.failures;
                continue;
            }
            row.worst = std::max(row.worst, c.sep);
            row.mean_ratio += c.ratio;
            ++ok;
        }
        if (ok)
            row.mean_ratio /= static_cast<double>(ok);
        t.rows.push_back(row);
    }
    for (double eps : eps_grid) {
        double d = 0;
        for (const auto& row : t.rows) {
            if (!(row.worst < eps))
                break;
            d = row.delta;
        }
        t.modulus.emplace_back(eps, d);
    }
    return t;
}

// ---------------------------------------------------------------- tube V

std::string TubeV::to_json() const
{
    nlohmann::json j;
    j["x0"] = std::vector<double>(x0.data(), x0.data() + x0.size());
    j["delta0"] = delta0;
    j["eps0"] = eps0;
    j["delta_p"] = delta_p;
    j["beta"] = beta;
    j["eta"] = eta;
    j["arc_points"] = arc.size();
    nlohmann::json tab = nlohmann::json::array();
    for (auto [e, d] : table)
        tab.push_back({e, d});
    j["table"] = tab;
    return j.dump(2);
}

TubeV build_tube(const TorusMap& f, const SeparationTable& table, double delta_p, double beta, double eta,
    const Vec& x0)
{
    double limit = std::min(delta_p, beta);
    TubeV v;
    v.x0 = x0;
    v.delta_p = delta_p;
    v.beta = beta;
    v.eta = eta;
    v.table = table.modulus;
    for (auto [e, d] : table.modulus)
        if (e < limit && d > 0 && e > v.eps0) {
            v.eps0 = e;
            v.delta0 = d;
        }
    if (!(v.delta0 > 0))
        throw Error("CalibrationMissing", "no tabulated eps below min(delta_p, beta) has a positive delta");
    Leaf arc = integrate_leaf(f, x0, LeafField::Unstable, 0.999 * v.delta0, v.delta0 / 200);
    v.arc = std::move(arc.points);
    return v;
}

TubeV tube_from_json(const std::string& text)
{
    TubeV v;
    try {
        auto j = nlohmann::json::parse(text);
        auto x = j.at("x0").get<std::vector<double>>();
        v.x0 = Vec::Map(x.data(), static_cast<Eigen::Index>(x.size()));
        v.delta0 = j.at("delta0").get<double>();
        v.eps0 = j.at("eps0").get<double>();
        v.delta_p = j.at("delta_p").get<double>();
        v.beta = j.at("beta").get<double>();
        v.eta = j.value("eta", 0.0);
        for (const auto& r : j.at("table"))
            v.table.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw Error("BadInput", std::string("tube file: ") + e.what());
    }
    if (!(v.delta0 > 0) || v.x0.size() != 3)
        throw Error("CalibrationMissing", "tube file lacks a positive delta0");
    return v;
}

double tube_pair_diameter(const TorusMap& f, const TubeV& v, std::size_t samples, std::uint64_t seed)
{
    const ToralAutomorphism& a = f.base();
    auto [q1, q2] = contracting_basis(a);
    Vec eu = a.eigenvector(2);
    double disk = v.eta > 0 ? v.eta : 0.5;
    std::vector<double> d(samples, 0.0);
    parallel_for(samples, [&](std::size_t i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        std::uniform_real_distribution<double> ud(-0.5, 0.5);
        auto point = [&](double u) {
            double ang = 2 * std::numbers::pi * (ud(rng) + 0.5), r = disk * std::sqrt(ud(rng) + 0.5);
            return Vec(v.x0 + u * v.delta0 * eu + r * (std::cos(ang) * q1 + std::sin(ang) * q2));
        };
        Vec x = point(ud(rng));
        Vec target = v.x0 + (ud(rng) * v.delta0) * eu;
        try {
            Vec y = bracket_foliated(f, target, x, 1.0);
            d[i] = (x - y).norm();
        } catch (const Error&) {
            d[i] = INFINITY;
        }
    });
    return *std::max_element(d.begin(), d.end());
}

// ---------------------------------------------------------------- chains

NonlinearChain make_nonlinear_chain(const TorusMap& f, std::vector<Vec> points)
{
    NonlinearChain c;
    c.points = std::move(points);
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i) {
        Vec w = bracket_foliated(f, c.points[i + 1], c.points[i]);
        c.epsilon = std::max({c.epsilon, (w - c.points[i]).norm(), (w - c.points[i + 1]).norm()});
    }
    return c;
}

ChainProjection project_chain_nonlinear(const TorusMap& f, const TubeV& v, const NonlinearChain& c, double slack)
{
    const ToralAutomorphism& a = f.base();
    if (c.points.empty())
        throw Error("EmptyChain", "chain has no points");
    for (std::size_t i = 0; i + 1 < c.points.size(); ++i)
        if (!v.contains(a, c.points[i]))
            throw Error("ChainLeftTube", "chain point " + std::to_string(i) + " lies outside V");
    ChainProjection out;
    std::vector<Vec> level = c.points;
    out.projections.push_back(level.front());
    double bound = (1 + slack) * c.epsilon + 1e-12;
    while (level.size() >= 2) {
        std::vector<Vec> next(level.size() - 1);
        for (std::size_t i = 0; i + 1 < level.size(); ++i)
            next[i] = bracket_foliated(f, level[i + 1], level[i]);
        double eps = 0;
        for (std::size_t i = 0; i + 1 < next.size(); ++i) {
            Vec w = bracket_foliated(f, next[i + 1], next[i]);
            eps = std::max({eps, (w - next[i]).norm(), (w - next[i + 1]).norm()});
        }
        out.level_epsilon.push_back(eps);
        if (eps > bound)
            throw Error("StepBoundViolated", "rebuilt chain epsilon exceeds the bound");
        out.projections.push_back(next.front());
        level.swap(next);
    }
    for (std::size_t k = 1; k < c.points.size(); ++k) {
        Vec direct = bracket_foliated(f, c.points[k], c.points.front());
        out.direct_error = std::max(out.direct_error, (direct - out.projections[k]).norm());
    }

    const Vec& last = c.points.back();
    out.exits = !v.contains(a, last);
    double ulast = v.u_coord(a, last);
    out.side = ulast > 0 ? 1 : (ulast < 0 ? -1 : 0);
    if (out.side == 0)
        return out;
    double edge = 0.5 * v.delta0;
    std::vector<double> pos{0.0};
    for (const Vec& p : out.projections) {
        double u = out.side * v.u_coord(a, p);
        if (u > 0)
            pos.push_back(std::min(u, edge));
    }
    std::sort(pos.begin(), pos.end());
    double reach = out.exits ? edge : pos.back();
    for (std::size_t i = 0; i + 1 < pos.size(); ++i)
        out.max_gap = std::max(out.max_gap, pos[i + 1] - pos[i]);
    out.max_gap = std::max(out.max_gap, reach - pos.back());
    return out;
}

} // namespace hyperdyn
