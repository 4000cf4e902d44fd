#include "hyperdyn/semiconjugacy.hpp"

#include "hyperdyn/mane_da.hpp"
#include "hyperdyn/parallel.hpp"
#include "hyperdyn/shadowing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace hyperdyn {

namespace {

struct Corner {
    std::size_t idx[8];
    double w[8];
};

Corner corners(int m, const Vec& x)
{
    Corner c;
    long long base[3];
    double f[3];
    for (int k = 0; k < 3; ++k) {
        double u = x[k] * m;
        double fl = std::floor(u);
        f[k] = u - fl;
        base[k] = static_cast<long long>(fl);
    }
    auto wrap = [m](long long v) {
        long long r = v % m;
        return static_cast<std::size_t>(r < 0 ? r + m : r);
    };
    int n = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int d = 0; d < 2; ++d) {
                std::size_t i = wrap(base[0] + a), j = wrap(base[1] + b), k = wrap(base[2] + d);
                c.idx[n] = (i * m + j) * m + k;
                c.w[n] = (a ? f[0] : 1 - f[0]) * (b ? f[1] : 1 - f[1]) * (d ? f[2] : 1 - f[2]);
                ++n;
            }
    return c;
}

Vec node_position(int m, std::size_t node)
{
    std::size_t k = node % m, j = (node / m) % m, i = node / (static_cast<std::size_t>(m) * m);
    return vec3(static_cast<double>(i) / m, static_cast<double>(j) / m, static_cast<double>(k) / m);
}

Vec defect(const TorusMap& g, const Vec& x) { return g.eigen_defect(x); }

// One accumulator per possible worker index.
std::size_t slots(unsigned threads) { return std::max(threads, thread_count()) + 1; }

} // namespace

Semiconjugacy::Semiconjugacy(const TorusMap& g, int m, std::vector<double> eigen_h, double tail)
    : g_(&g), m_(m), h_(std::move(eigen_h))
{
    if (g.dim() != 3 || m < 2 || h_.size() != static_cast<std::size_t>(m) * m * m * 3)
        throw Error("BadInput", "semiconjugacy grid does not match M^3 x 3");
    lambda_ = g.base().eigenvalues();
    for (double l : lambda_) {
        double rate = std::fabs(l) < 1 ? std::fabs(l) : 1 / std::fabs(l);
        depth_.push_back(std::max(1, static_cast<int>(std::ceil(std::log(tail) / std::log(rate)))));
    }
}

Vec Semiconjugacy::node_h(std::size_t node) const
{
    return g_->base().from_eigen(vec3(h_[3 * node], h_[3 * node + 1], h_[3 * node + 2]));
}

Vec Semiconjugacy::node_point(std::size_t node) const { return node_position(m_, node); }

double Semiconjugacy::interp_component(int comp, const Vec& x) const
{
    Corner c = corners(m_, x);
    double v = 0;
    for (int n = 0; n < 8; ++n)
        v += c.w[n] * h_[3 * c.idx[n] + comp];
    return v;
}

Vec Semiconjugacy::interpolate(const Vec& x) const
{
    Corner c = corners(m_, x);
    Vec e = Vec::Zero(3);
    for (int n = 0; n < 8; ++n)
        for (int k = 0; k < 3; ++k)
            e[k] += c.w[n] * h_[3 * c.idx[n] + k];
    return g_->base().from_eigen(e);
}

Vec Semiconjugacy::h_eigen(const Vec& x) const
{
    Vec out = Vec::Zero(3);
    int back = 0, fwd = 0;
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(lambda_[i]) < 1)
            back = std::max(back, depth_[i]);
        else
            fwd = std::max(fwd, depth_[i]);
    }
    // Contracting components: h_i(y) = -sum_{j>=1} l^(j-1) d_i(G^-j y) + l^k h_i(G^-k y).
    if (back > 0) {
        Vec z = torus_reduce(x);
        std::vector<double> coef(3, 1.0);
        for (int j = 1; j <= back; ++j) {
            z = torus_reduce(g_->inverse(z));
            Vec d = defect(*g_, z);
            for (int i = 0; i < 3; ++i)
                if (std::fabs(lambda_[i]) < 1 && j <= depth_[i]) {
                    out[i] -= coef[i] * d[i];
                    coef[i] *= lambda_[i];
                    if (j == depth_[i])
                        out[i] += coef[i] * interp_component(i, z);
                }
        }
    }
    // Expanding components: h_i(x) = sum_{j>=0} l^-(j+1) d_i(G^j x) + l^-k h_i(G^k x).
    if (fwd > 0) {
        Vec z = torus_reduce(x);
        std::vector<double> coef(3, 1.0);
        for (int j = 0; j < fwd; ++j) {
            Vec d = defect(*g_, z);
            z = torus_reduce(g_->forward(z));
            for (int i = 0; i < 3; ++i)
                if (std::fabs(lambda_[i]) >= 1 && j < depth_[i]) {
                    coef[i] /= lambda_[i];
                    out[i] += coef[i] * d[i];
                    if (j + 1 == depth_[i])
                        out[i] += coef[i] * interp_component(i, z);
                }
        }
    }
    return out;
}

Vec Semiconjugacy::h_eigen_offset(const Vec& x, const Vec& de) const
{
    const ToralAutomorphism& a = g_->base();
    Vec out = Vec::Zero(3);
    int back = 0, fwd = 0;
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(lambda_[i]) < 1)
            back = std::max(back, depth_[i]);
        else
            fwd = std::max(fwd, depth_[i]);
    }
    auto interp_diff = [&](int i, const Vec& z, const Vec& w) {
        return interp_component(i, z + a.from_eigen(w)) - interp_component(i, z);
    };
    if (back > 0) {
        Vec z = torus_reduce(x), w = de;
        std::vector<double> coef(3, 1.0);
        for (int j = 1; j <= back; ++j) {
            Vec zn = g_->inverse(z);
            Vec k = defect(*g_, g_->inverse(z + a.from_eigen(w))) - defect(*g_, zn);
            for (int i = 0; i < 3; ++i)
                w[i] = (w[i] - k[i]) / lambda_[i];
            z = torus_reduce(zn);
            for (int i = 0; i < 3; ++i)
                if (std::fabs(lambda_[i]) < 1 && j <= depth_[i]) {
                    out[i] -= coef[i] * k[i];
                    coef[i] *= lambda_[i];
                    if (j == depth_[i])
                        out[i] += coef[i] * interp_diff(i, z, w);
                }
        }
    }
    if (fwd > 0) {
        Vec z = torus_reduce(x), w = de;
        std::vector<double> coef(3, 1.0);
        for (int j = 0; j < fwd; ++j) {
            Vec k = defect(*g_, z + a.from_eigen(w)) - defect(*g_, z);
            for (int i = 0; i < 3; ++i)
                w[i] = lambda_[i] * w[i] + k[i];
            z = torus_reduce(g_->forward(z));
            for (int i = 0; i < 3; ++i)
                if (std::fabs(lambda_[i]) >= 1 && j < depth_[i]) {
                    coef[i] /= lambda_[i];
                    out[i] += coef[i] * k[i];
                    if (j + 1 == depth_[i])
                        out[i] += coef[i] * interp_diff(i, z, w);
                }
        }
    }
    return out;
}

Vec Semiconjugacy::h(const Vec& x) const { return g_->base().from_eigen(h_eigen(x)); }

Semiconjugacy solve_h(const TorusMap& g, const SemiconjugacyOptions& opt)
{
    if (g.dim() != 3)
        throw Error("BadInput", "semiconjugacy solver is three-dimensional");
    if (opt.m < 4 || opt.test_resolution < 0)
        throw Error("BadInput", "grid resolution must be at least 4");
    const int m = opt.m;
    const std::size_t nodes = static_cast<std::size_t>(m) * m * m;
    if (nodes > GridSet::max_cells() || nodes > (std::size_t(1) << 24))
        throw Error("ResolutionOverflow", "semiconjugacy grid too large");
    const ToralAutomorphism& a = g.base();
    const auto& lam = a.eigenvalues();

    // Per node: G p, G^-1 p (reduced), defect at p and at G^-1 p.
    std::vector<double> gp(3 * nodes), gi(3 * nodes), dp(3 * nodes), di(3 * nodes);
    std::vector<double> rmax(slots(opt.threads), 0.0);
    parallel_blocks(
        nodes,
        [&](std::size_t b, std::size_t e, unsigned w) {
            for (std::size_t n = b; n < e; ++n) {
                Vec p = node_position(m, n);
                Vec fp = g.forward(p);
                Vec ip = g.inverse(p);
                rmax[w] = std::max(rmax[w], (fp - a.apply(p)).norm());
                Vec e0 = defect(g, p), e1 = defect(g, ip);
                Vec rf = torus_reduce(fp), ri = torus_reduce(ip);
                for (int k = 0; k < 3; ++k) {
                    gp[3 * n + k] = rf[k];
                    gi[3 * n + k] = ri[k];
                    dp[3 * n + k] = e0[k];
                    di[3 * n + k] = e1[k];
                }
            }
        },
        opt.threads);

    std::vector<double> h(3 * nodes, 0.0), next(3 * nodes, 0.0);
    auto interp3 = [&](const std::vector<double>& f, const double* x, double* out) {
        Corner c = corners(m, vec3(x[0], x[1], x[2]));
        out[0] = out[1] = out[2] = 0;
        for (int q = 0; q < 8; ++q)
            for (int k = 0; k < 3; ++k)
                out[k] += c.w[q] * f[3 * c.idx[q] + k];
    };

    std::vector<double> upd(slots(opt.threads), 0.0);
    int it = 0;
    double update = INFINITY;
    for (; it < opt.max_iterations; ++it) {
        std::fill(upd.begin(), upd.end(), 0.0);
        parallel_blocks(
            nodes,
            [&](std::size_t b, std::size_t e, unsigned w) {
                double f[3], bck[3];
                for (std::size_t n = b; n < e; ++n) {
                    interp3(h, &gp[3 * n], f);
                    interp3(h, &gi[3 * n], bck);
                    for (int k = 0; k < 3; ++k) {
                        double v = std::fabs(lam[k]) >= 1 ? (f[k] + dp[3 * n + k]) / lam[k]
                                                           : lam[k] * bck[k] - di[3 * n + k];
                        upd[w] = std::max(upd[w], std::fabs(v - h[3 * n + k]));
                        next[3 * n + k] = v;
                    }
                }
            },
            opt.threads);
        h.swap(next);
        update = *std::max_element(upd.begin(), upd.end());
        if (!std::isfinite(update))
            throw Error("NoConvergence", "semiconjugacy iteration diverged");
        if (update < opt.tol) {
            ++it;
            break;
        }
    }
    if (!(update < opt.tol))
        throw Error("NoConvergence", "semiconjugacy iteration did not reach tol (last update "
                + std::to_string(update) + ")");

    Semiconjugacy s(g, m, std::move(h), opt.tail);
    s.iterations = it;
    s.last_update = update;
    s.r = *std::max_element(rmax.begin(), rmax.end());

    std::vector<double> gres(slots(opt.threads), 0.0), hmax(slots(opt.threads), 0.0);
    const auto& hv = s.eigen_values();
    parallel_blocks(
        nodes,
        [&](std::size_t b, std::size_t e, unsigned w) {
            double f[3];
            for (std::size_t n = b; n < e; ++n) {
                interp3(hv, &gp[3 * n], f);
                Vec r(3);
                for (int k = 0; k < 3; ++k)
                    r[k] = lam[k] * hv[3 * n + k] - f[k] - dp[3 * n + k];
                gres[w] = std::max(gres[w], a.from_eigen(r).norm());
                hmax[w] = std::max(hmax[w], s.node_h(n).norm());
            }
        },
        opt.threads);
    s.grid_residual = *std::max_element(gres.begin(), gres.end());
    s.cr_bound = *std::max_element(hmax.begin(), hmax.end());
    if (opt.test_resolution > 0) {
        s.test_resolution = opt.test_resolution;
        s.residual = equivariance_residual(s, opt.test_resolution, opt.threads);
    }
    return s;
}

double equivariance_residual(const Semiconjugacy& s, int t, unsigned threads)
{
    const TorusMap& g = s.map();
    const ToralAutomorphism& a = g.base();
    const auto& lam = a.eigenvalues();
    std::size_t n = static_cast<std::size_t>(t) * t * t;
    std::vector<double> worst(slots(threads), 0.0);
    parallel_blocks(
        n,
        [&](std::size_t b, std::size_t e, unsigned w) {
            for (std::size_t q = b; q < e; ++q) {
                std::size_t k = q % t, j = (q / t) % t, i = q / (static_cast<std::size_t>(t) * t);
                Vec x = vec3((i + 0.5) / t, (j + 0.5) / t, (k + 0.5) / t);
                Vec hx = s.h_eigen(x), hg = s.h_eigen(g.forward(x)), d = defect(g, x);
                Vec r(3);
                for (int c = 0; c < 3; ++c)
                    r[c] = lam[c] * hx[c] - hg[c] - d[c];
                worst[w] = std::max(worst[w], a.from_eigen(r).norm());
            }
        },
        threads);
    return *std::max_element(worst.begin(), worst.end());
}

void write_hsc1(const Semiconjugacy& s, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("IoError", "cannot write " + path);
    out.write("HSC1", 4);
    std::int32_t m = s.resolution();
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    std::size_t nodes = static_cast<std::size_t>(m) * m * m;
    for (std::size_t n = 0; n < nodes; ++n) {
        Vec v = s.node_h(n);
        double buf[3] = {v[0], v[1], v[2]};
        out.write(reinterpret_cast<const char*>(buf), sizeof buf);
    }
    if (!out)
        throw Error("IoError", "write failed for " + path);
}

Semiconjugacy read_hsc1(const TorusMap& g, const std::string& path, double tail)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("IoError", "cannot read " + path);
    char magic[4];
    std::int32_t m = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&m), sizeof m);
    if (!in || std::memcmp(magic, "HSC1", 4) != 0)
        throw Error("IoError", "not an HSC1 file: " + path);
    if (m < 2 || m > 256)
        throw Error("IoError", "bad grid size in " + path);
    std::size_t nodes = static_cast<std::size_t>(m) * m * m;
    std::vector<double> h(3 * nodes);
    for (std::size_t n = 0; n < nodes; ++n) {
        double buf[3];
        in.read(reinterpret_cast<char*>(buf), sizeof buf);
        if (!in)
            throw Error("IoError", "truncated HSC1 file");
        Vec e = g.base().to_eigen(vec3(buf[0], buf[1], buf[2]));
        for (int k = 0; k < 3; ++k)
            h[3 * n + k] = e[k];
    }
    return Semiconjugacy(g, m, std::move(h), tail);
}

std::vector<ModulusRow> modulus_of_continuity(const Semiconjugacy& s, std::vector<double> radii, std::size_t pairs,
    std::uint64_t seed)
{
    std::sort(radii.begin(), radii.end());
    std::vector<ModulusRow> rows;
    double running = 0;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        double rad = radii[ri];
        std::vector<double> v(pairs, 0.0);
        parallel_for(pairs, [&](std::size_t i) {
            std::mt19937_64 rng(mix_seed(seed, ri * pairs + i));
            std::uniform_real_distribution<double> ud;
            std::normal_distribution<double> nd;
            Vec x = vec3(ud(rng), ud(rng), ud(rng));
            Vec dir = vec3(nd(rng), nd(rng), nd(rng)).normalized();
            double len = i % 2 == 0 ? rad : rad * std::cbrt(ud(rng));
            Vec d = len * dir;
            v[i] = (d + s.map().base().from_eigen(s.h_eigen_offset(x, s.map().base().to_eigen(d)))).norm();
        });
        for (double d : v)
            running = std::max(running, d);
        rows.push_back({rad, running});
    }
    return rows;
}

const char* leaf_item_name(LeafItem item)
{
    switch (item) {
    case LeafItem::CuCs: return "cu_cs";
    case LeafItem::Center: return "c";
    case LeafItem::UnstableLine: return "u_line";
    case LeafItem::Transversality: return "transversality";
    case LeafItem::FiberCenter: return "fiber_center";
    }
    return "?";
}

LeafItem leaf_item_from_name(const std::string& name)
{
    for (LeafItem i : {LeafItem::CuCs, LeafItem::Center, LeafItem::UnstableLine, LeafItem::Transversality,
             LeafItem::FiberCenter})
        if (name == leaf_item_name(i))
            return i;
    throw Error("BadInput", "unknown leaf item " + name);
}

LeafCheck check_leaf_correspondence(const Semiconjugacy& s, LeafItem item, const LeafCheckOptions& opt)
{
    const TorusMap& g = s.map();
    const ToralAutomorphism& a = g.base();
    LeafCheck rep;
    rep.item = item;
    rep.samples = opt.samples;
    rep.tolerance = opt.tolerance > 0 ? opt.tolerance : std::max(10 * s.residual, 1e-12);
    double gap_bound = opt.gap_bound > 0 ? opt.gap_bound : 2 * s.cr_bound;
    double fiber_tol = opt.fiber_tol > 0 ? opt.fiber_tol : std::max(1e3 * s.residual, 1e-9);
    Vec es = a.eigenvector(0), ec = a.eigenvector(1), eu = a.eigenvector(2);
    if (item == LeafItem::FiberCenter && opt.focus.size() != 3)
        throw Error("BadInput", "fiber_center needs a fixed focus point");

    struct Out {
        double dev = 0, gap = 0;
        std::size_t viol = 0, collapsed = 0, bounded = 0;
        Vec witness;
    };
    std::vector<Out> outs(opt.samples);
    parallel_for(opt.samples, [&](std::size_t i) {
        std::mt19937_64 rng(mix_seed(opt.seed, i));
        std::uniform_real_distribution<double> ud, sym(-1, 1);
        std::normal_distribution<double> nd;
        Vec x = opt.focus.size() == 3
            ? Vec(opt.focus + opt.focus_radius * std::cbrt(ud(rng)) * vec3(nd(rng), nd(rng), nd(rng)).normalized())
            : vec3(ud(rng), ud(rng), ud(rng));
        Out& o = outs[i];
        double half = 0.5 * opt.leaf_length;
        Vec hx = s.h_eigen(x);
        switch (item) {
        case LeafItem::CuCs: {
            // Offsets built in eigencoordinates; the cs plane has zero u part
            // and the cu plane zero s part before adding h.
            for (int q = 0; q < 8; ++q) {
                double t1 = half * sym(rng), t2 = half * sym(rng);
                Vec pcs = x + t1 * es + t2 * ec;
                Vec pcu = x + t1 * eu + t2 * ec;
                double dcs = std::fabs(s.h_eigen(pcs)[2] - hx[2]);
                double dcu = std::fabs(s.h_eigen(pcu)[0] - hx[0]);
                o.dev = std::max({o.dev, dcs, dcu});
            }
            break;
        }
        case LeafItem::Center: {
            for (int q = 0; q < 8; ++q) {
                Vec hp = s.h_eigen(x + half * sym(rng) * ec);
                o.dev = std::max({o.dev, std::fabs(hp[0] - hx[0]), std::fabs(hp[2] - hx[2])});
            }
            break;
        }
        case LeafItem::UnstableLine: {
            Leaf leaf = integrate_leaf(g, x, LeafField::Unstable, opt.leaf_length, opt.leaf_length / 20);
            double prev_u = -INFINITY;
            for (const Vec& p : leaf.points) {
                Vec e = a.to_eigen(p - x);
                Vec w = e + s.h_eigen_offset(x, e);
                Vec off = a.from_eigen(vec3(w[0], w[1], 0));
                o.dev = std::max(o.dev, off.norm());
                if (!(w[2] > prev_u))
                    ++o.viol;
                prev_u = w[2];
            }
            break;
        }
        case LeafItem::Transversality: {
            double rad = 0.05 * std::cbrt(ud(rng));
            Vec y = x + rad * vec3(nd(rng), nd(rng), nd(rng)).normalized();
            try {
                Vec w = bracket_foliated(g, x, y);
                o.dev = std::fabs(a.unstable_coord(w - x));
                // Count crossings of the leaf of y with the (s, c) plane of x.
                UnstableChart ch(g, y);
                double span = 1.0 * ch.scale();
                int crossings = 0;
                double prev = a.unstable_coord(ch.at(-span) - x);
                for (int q = 1; q <= 400; ++q) {
                    double cur = a.unstable_coord(ch.at(-span + 2 * span * q / 400) - x);
                    if ((prev < 0) != (cur < 0) || cur == 0)
                        ++crossings;
                    prev = cur;
                }
                if (crossings != 1)
                    ++o.viol;
            } catch (const Error&) {
                ++o.viol;
            }
            break;
        }
        case LeafItem::FiberCenter: {
            // Pairs H collapses must share a center leaf; pairs whose orbits
            // stay within gap_bound for 50 steps both ways must collapse.
            Vec dx, dy;
            if (opt.center_half > 0 && i % 2 == 0) {
                dx = vec3(0, opt.center_half * sym(rng), 0);
                dy = vec3(0, opt.center_half * sym(rng), 0);
            } else {
                dx = a.to_eigen(x - opt.focus);
                dy = dx + a.to_eigen(0.05 * std::cbrt(ud(rng)) * vec3(nd(rng), nd(rng), nd(rng)).normalized());
            }
            x = opt.focus + a.from_eigen(dx);
            Vec de = dy - dx;
            double dh = a.from_eigen(de + s.h_eigen_offset(x, de)).norm();
            if (dh < fiber_tol) {
                o.collapsed = 1;
                o.dev = a.from_eigen(vec3(de[0], 0, de[2])).norm();
            }
            double gap = expansivity_gap_eigen(g, opt.focus, dx, dy, 50);
            if (gap <= gap_bound) {
                o.bounded = 1;
                o.gap = gap;
                if (dh >= fiber_tol)
                    ++o.viol;
            }
            break;
        }
        }
        if (o.viol > 0 || o.dev > rep.tolerance)
            o.witness = x;
    });
    for (const Out& o : outs) {
        rep.max_deviation = std::max(rep.max_deviation, o.dev);
        rep.violations += o.viol;
        rep.pairs_tested += o.collapsed;
        rep.bounded_pairs += o.bounded;
        rep.max_expansivity_gap = std::max(rep.max_expansivity_gap, o.gap);
        if (o.witness.size() == 3 && rep.witnesses.size() < 8)
            rep.witnesses.push_back(o.witness);
    }
    return rep;
}

double surjectivity_coverage(const Semiconjugacy& s, GridSet* marked)
{
    int m = s.resolution();
    GridSet cells(3, std::max(1, m / 2));
    std::size_t nodes = static_cast<std::size_t>(m) * m * m;
    for (std::size_t n = 0; n < nodes; ++n) {
        Vec p = s.node_point(n);
        cells.set(cells.index_of(torus_reduce(p + s.node_h(n))));
    }
    double cov = cells.coverage();
    if (marked)
        *marked = std::move(cells);
    return cov;
}

} // namespace hyperdyn
