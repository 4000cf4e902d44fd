#include "doctest.h"

#include "hyperdyn/mane_da.hpp"
#include "hyperdyn/product_structure.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <random>

using namespace hyperdyn;

namespace {

ToralAutomorphism default_a() { return ToralAutomorphism::classify(default_matrix(), true); }

const DaMap& default_da()
{
    static const DaMap g = build_da(default_a());
    return g;
}

template <class Fn>
std::string error_code(Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Plain Newton on g(t) = t from a starting guess.
double newton_root(const BifurcationProfile& p, double t)
{
    for (int i = 0; i < 100; ++i)
        t -= (p.g(t) - t) / (p.dg(t) - 1);
    return t;
}

std::vector<Vec> walk_out(const ToralAutomorphism& a, const TubeV& v, double step, int sign, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-1, 1);
    Vec eu = a.eigenvector(2);
    Vec dir = (ud(rng) * a.eigenvector(0) + ud(rng) * a.eigenvector(1)).normalized();
    std::vector<Vec> pts{v.x0};
    while (v.contains(a, pts.back()) && pts.size() < 5000) {
        Vec n = vec3(ud(rng), ud(rng), ud(rng));
        pts.push_back(pts.back() + step * (sign * (0.5 + 0.3 * ud(rng)) * eu + dir + 0.3 * n));
    }
    return pts;
}

SeparationTable coarse_table(const TorusMap& f)
{
    std::vector<double> ds, es;
    for (int i = 1; i <= 20; ++i) {
        ds.push_back(0.005 * i);
        es.push_back(0.005 * i);
    }
    return leaf_separation_modulus(f, ds, es, 200, 2.0, 7);
}

} // namespace

TEST_SUITE("mane_da")
{
    TEST_CASE("construction: fixed points on the center line")
    {
        const DaMap& g = default_da();
        const auto& roots = g.center_fixed_points();
        REQUIRE(roots.size() == 3);
        const auto& prof = g.profile();
        CHECK(roots[0] == doctest::Approx(newton_root(prof, -0.03)).epsilon(1e-12));
        CHECK(std::fabs(roots[1] - newton_root(prof, 0.001)) < 1e-12);
        CHECK(roots[2] == doctest::Approx(newton_root(prof, 0.03)).epsilon(1e-12));
        CHECK(prof.dg(0) == doctest::Approx(1.2));
        CHECK(prof.dg(roots[0]) == doctest::Approx(0.5));
        CHECK(prof.dg(roots[2]) == doctest::Approx(0.5));

        // Center derivative from central differences of the map itself.
        Vec ec = g.base().eigenvector(1);
        for (auto [p, want] : {std::pair{g.x1(), 1.2}, {g.x2(), 0.5}, {g.x3(), 0.5}}) {
            CHECK(torus_distance(torus_reduce(g.forward(p)), torus_reduce(p)) < 1e-12);
            double hh = 1e-6;
            double dc = (g.forward(p + hh * ec) - g.forward(p - hh * ec)).dot(ec) / (2 * hh);
            CHECK(dc == doctest::Approx(want).epsilon(1e-6));
        }

        // Df(x1) has spectrum {lambda_s, mu, lambda_u} of the base.
        Eigen::Matrix3d j = g.jacobian(g.x1());
        Eigen::EigenSolver<Eigen::Matrix3d> es(j);
        std::vector<double> ev;
        for (int i = 0; i < 3; ++i) {
            CHECK(std::fabs(es.eigenvalues()[i].imag()) < 1e-12);
            ev.push_back(es.eigenvalues()[i].real());
        }
        std::sort(ev.begin(), ev.end());
        CHECK(ev[0] == doctest::Approx(g.base().lambda_s()).epsilon(1e-10));
        CHECK(ev[1] == doctest::Approx(1.2).epsilon(1e-10));
        CHECK(ev[2] == doctest::Approx(g.base().lambda_u()).epsilon(1e-10));
        CHECK(g.base().lambda_u() == doctest::Approx(std::pow(default_a().lambda_u(), 2)).epsilon(1e-12));
    }

    TEST_CASE("construction: bit-identical to the linear map outside the ball")
    {
        const DaMap& g = default_da();
        const ToralAutomorphism& b = g.base();
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> ud(0, 1);
        std::size_t checked = 0;
        while (checked < 20000) {
            Vec x = vec3(ud(rng), ud(rng), ud(rng));
            if (torus_distance(x, g.x1()) <= 0.1)
                continue;
            ++checked;
            Vec y = g.forward(x), z = b.apply(x);
            REQUIRE((y.array() == z.array()).all());
        }
        std::normal_distribution<double> nd;
        Vec d = vec3(nd(rng), nd(rng), nd(rng)).normalized();
        Vec x = g.x1() + 0.11 * d;
        CHECK((g.forward(x).array() == b.apply(x).array()).all());
        CHECK(g.perturbation_size() > 0);
        CHECK(g.perturbation_size() < 0.05);
    }

    TEST_CASE("construction: center lines map into center lines")
    {
        const DaMap& g = default_da();
        const ToralAutomorphism& b = g.base();
        Vec ec = b.eigenvector(1);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> ud(-0.1, 0.1);
        for (int i = 0; i < 200; ++i) {
            Vec base = g.x1() + vec3(ud(rng), ud(rng), ud(rng));
            Vec image = g.forward(base);
            for (double t : {-0.08, -0.03, 0.01, 0.05}) {
                Vec d = g.forward(base + t * ec) - image;
                CHECK((d - d.dot(ec) * ec).norm() < 1e-12);
            }
        }
    }

    TEST_CASE("construction: rejected parameters")
    {
        auto a = default_a();
        DaParams p;
        p.mu = a.power(2).lambda_c();
        CHECK(error_code([&] { build_da(a, p); }) == "BadBifurcation");
        p.mu = a.power(2).lambda_u() + 1;
        CHECK(error_code([&] { build_da(a, p); }) == "BadBifurcation");
        p = {};
        p.cstar = 0.05;
        CHECK(error_code([&] { build_da(a, p); }) == "BadBifurcation");
        p = {};
        p.half_length = 0.095;
        CHECK(error_code([&] { build_da(a, p); }) == "SupportLeak");
        p = {};
        p.x1 = vec3(0.1, 0.2, 0.3);
        CHECK(error_code([&] { build_da(a, p); }) == "BadInput");
        // x^3 - x - 1 has a complex pair.
        CHECK(error_code([&] {
            build_da(ToralAutomorphism::classify(integer_matrix({{0, 0, 1}, {1, 0, 1}, {0, 1, 0}}), false));
        }) == "WrongClass");
        // The default map has a single fixed point, so power 1 has no x1 != 0.
        p = {};
        p.power = 1;
        CHECK(error_code([&] { build_da(a, p); }) == "BadInput");
    }

    TEST_CASE("cones")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        auto r0 = verify_cones(lin, vec3(0.5, 0.5, 0.5), 0.5, 0.3, 2000, 1);
        CHECK(r0.pass());
        // |A c| / (lambda_u tan theta) for unit contracting c.
        CHECK(r0.max_unstable_ratio < 0.1);

        auto r = verify_cones(default_da(), 0.1, 20000, 1);
        CHECK(r.pass());
        CHECK(r.min_unstable_growth >= 1.5);
        CHECK(r.witnesses.empty());

        // Same seed, same report.
        auto r2 = verify_cones(default_da(), 0.1, 20000, 1);
        CHECK(r2.max_unstable_ratio == r.max_unstable_ratio);

        DaParams p;
        p.mu = 4.9;
        DaMap steep = build_da(a, p);
        auto bad = verify_cones(steep, 0.1, 20000, 1);
        CHECK_FALSE(bad.pass());
        CHECK(bad.unstable_failures > 0);
        REQUIRE_FALSE(bad.witnesses.empty());
        for (const Vec& w : bad.witnesses)
            CHECK(torus_distance(w, steep.x1()) < 0.1);
    }

    TEST_CASE("unstable direction")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        Vec eu = lin.base().eigenvector(2);
        Vec v = unstable_direction(lin, vec3(0.3, 0.1, 0.7));
        CHECK(std::fabs(std::fabs(v.dot(eu)) - 1) < 1e-12);

        const DaMap& g = default_da();
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ud(-0.06, 0.06);
        for (int i = 0; i < 50; ++i) {
            Vec x = g.x1() + vec3(ud(rng), ud(rng), ud(rng));
            Vec e1 = unstable_direction(g, x);
            Vec e2 = unstable_direction(g, g.forward(x));
            Vec pushed = (g.jacobian(x) * e1).normalized();
            CHECK((pushed - e2).norm() < 1e-8);
            // E^u of the DA map lies in the linear (u, c) plane.
            CHECK(std::fabs(g.base().to_eigen(e1)[0]) < 1e-12);
        }
        CHECK(error_code([&] { unstable_direction(g, g.x1() + vec3(0.01, 0, 0), 1, 1e-30); })
            == "DirectionNotConverged");
    }

    TEST_CASE("unstable chart")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        Vec x = vec3(0.2, 0.9, 0.4), eu = lin.base().eigenvector(2);
        UnstableChart ch(lin, x);
        CHECK((ch.at(0).array() == x.array()).all());
        for (double s : {-3e-8, 1e-9, 2e-7}) {
            Vec want = x + s * std::pow(lin.base().lambda_u(), 6) * eu;
            CHECK((ch.at(s) - want).norm() < 1e-12 * std::max(1.0, want.norm()));
        }
        // Equivariance on the DA map: F maps the chart at x into the chart at F x.
        const DaMap& g = default_da();
        Vec z = g.x1() + vec3(0.01, -0.02, 0.015);
        UnstableChart cz(g, z);
        for (double s : {-2e-11, 1e-11, 5e-11}) {
            Vec p = g.forward(cz.at(s));
            CHECK((bracket_foliated(g, p, g.forward(z), 100.0) - p).norm() < 1e-10);
        }
    }

    TEST_CASE("leaves: linear unstable leaf is a straight line")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        Vec x = vec3(0.1, 0.2, 0.3), eu = lin.base().eigenvector(2);
        Leaf l = integrate_leaf(lin, x, LeafField::Unstable, 20.0, 0.01);
        CHECK(l.length() == doctest::Approx(20.0).epsilon(0.01));
        CHECK((l.points[l.seed_index] - x).norm() == 0.0);
        for (std::size_t i = 0; i < l.points.size(); ++i) {
            Vec d = l.points[i] - x;
            CHECK((d - d.dot(eu) * eu).norm() < 1e-9 * std::max(1.0, d.norm()));
            if (i > 0) {
                CHECK((l.points[i] - l.points[i - 1]).norm() <= 0.01);
                CHECK(l.arclen[i] > l.arclen[i - 1]);
            }
        }
    }

    TEST_CASE("leaves: DA unstable leaf through the bump")
    {
        const DaMap& g = default_da();
        // On the (u, c) plane of x1 the backward orbit stays in the bump.
        Vec x = g.x1() + 0.02 * g.base().eigenvector(1) + 0.01 * g.base().eigenvector(2);
        Leaf l = integrate_leaf(g, x, LeafField::Unstable, 2.0, 0.002);
        double max_turn = 0, dev = 0;
        Vec eu = g.base().eigenvector(2);
        for (std::size_t i = 1; i + 1 < l.points.size(); ++i) {
            Vec t0 = (l.points[i] - l.points[i - 1]).normalized();
            Vec t1 = (l.points[i + 1] - l.points[i]).normalized();
            max_turn = std::max(max_turn, std::acos(std::min(1.0, t0.dot(t1))));
            Vec d = l.points[i] - x;
            dev = std::max(dev, (d - d.dot(eu) * eu).norm());
        }
        CHECK(max_turn < 0.05);
        CHECK(dev > 1e-4); // bent by the bump
        // Leaf equivariance: images of leaf points lie on the leaf of F x.
        Vec fx = g.forward(x);
        for (std::size_t i = 0; i < l.points.size(); i += 97) {
            Vec p = g.forward(l.points[i]);
            CHECK((bracket_foliated(g, p, fx, 100.0) - p).norm() < 1e-10 * std::max(1.0, (p - fx).norm()));
        }
    }

    TEST_CASE("leaves: center and center-stable")
    {
        const DaMap& g = default_da();
        Leaf c = integrate_leaf(g, g.x1(), LeafField::Center, 0.1, 0.001);
        auto near = [&](const Vec& p) {
            double best = INFINITY;
            for (const Vec& q : c.points)
                best = std::min(best, (q - p).norm());
            return best;
        };
        CHECK(near(g.x2()) < 1e-3);
        CHECK(near(g.x3()) < 1e-3);
        Leaf cs = integrate_leaf(g, g.x1(), LeafField::CenterStable, 0.1, 0.01);
        CHECK(cs.patch_side == 11);
        CHECK(cs.points.size() == 121);
        for (const Vec& p : cs.points)
            CHECK(std::fabs(g.base().unstable_coord(p - g.x1())) < 1e-15);

        auto path = testutil::temp_path("leaf.csv");
        write_leaf_csv(c, path);
        std::ifstream in(path);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line))
            ++n;
        CHECK(n == c.points.size() + 1);
    }

    TEST_CASE("leaf density")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        Vec x = vec3(0.1, 0.2, 0.3);
        CHECK(leaf_density(lin, x, LeafField::Unstable, 0.0, 16) == doctest::Approx(1.0 / 4096));

        // Oracle: dense point sampling of the straight line.
        Vec eu = lin.base().eigenvector(2);
        GridSet marked;
        double d = leaf_density(lin, x, LeafField::Unstable, 60.0, 16, &marked);
        GridSet sampled(3, 16);
        for (double t = -29.9; t <= 29.9; t += 1e-4)
            sampled.set(sampled.index_of(torus_reduce(x + t * eu)));
        GridSet diff = sampled;
        diff &= marked;
        CHECK(diff.count() == sampled.count());
        CHECK(d >= sampled.coverage());
        CHECK(d - sampled.coverage() < 0.01);

        double prev = 0;
        for (double len : {50.0, 200.0, 800.0}) {
            double cov = leaf_density(lin, x, LeafField::Unstable, len, 16);
            CHECK(cov >= prev);
            prev = cov;
        }
        CHECK(prev > 0.99);

        const DaMap& g = default_da();
        CHECK(leaf_density(g, x, LeafField::Unstable, 600.0, 16) >= 0.99);
        CHECK(leaf_density(g, x, LeafField::Center, 600.0, 16) >= 0.99);
    }

    TEST_CASE("bracket_foliated")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> ud(0, 1), small(-0.05, 0.05);
        for (int i = 0; i < 200; ++i) {
            Vec x = vec3(ud(rng), ud(rng), ud(rng));
            Vec y = x + vec3(small(rng), small(rng), small(rng));
            CHECK((bracket_foliated(lin, x, y) - bracket_linear(lin.base(), x, y)).norm() < 1e-10);
        }
        const DaMap& g = default_da();
        Vec x = g.x1() + vec3(0.01, 0.0, 0.02);
        CHECK((bracket_foliated(g, x, x) - x).norm() == 0.0);
        for (int i = 0; i < 100; ++i) {
            Vec p = g.x1() + vec3(small(rng), small(rng), small(rng));
            Vec q = g.x1() + vec3(small(rng), small(rng), small(rng));
            Vec w = bracket_foliated(g, p, q);
            CHECK(std::fabs(g.base().unstable_coord(w - p)) < 1e-13);
            CHECK((bracket_foliated(g, w, q) - w).norm() < 1e-12);
        }
        CHECK(error_code([&] { bracket_foliated(g, x + 5 * g.base().eigenvector(2), x, 0.5); })
            == "NoIntersectionInRange");
    }

    TEST_CASE("leaf separation")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        std::vector<double> ds{0.01, 0.02, 0.04}, es{0.015, 0.03, 0.05, 0.005};
        auto t = leaf_separation_modulus(lin, ds, es, 100, 2.0, 1);
        CHECK(t.failures == 0);
        for (const auto& r : t.rows) {
            CHECK(r.worst == doctest::Approx(r.delta).epsilon(1e-9));
            CHECK(r.mean_ratio == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(t.modulus[0].second == 0.01);
        CHECK(t.modulus[1].second == 0.02);
        CHECK(t.modulus[2].second == 0.04);
        CHECK(t.modulus[3].second == 0.0);
        CHECK(t.delta_for(0.031) == 0.02);

        // z = x: the separation is the leaf distance itself.
        const DaMap& g = default_da();
        auto z0 = leaf_separation_modulus(g, ds, es, 50, 0.0, 2, Focus{g.x1(), 0.1});
        for (const auto& r : z0.rows)
            CHECK(r.worst == doctest::Approx(r.delta).epsilon(1e-6));

        auto da = leaf_separation_modulus(g, ds, es, 200, 2.0, 3, Focus{g.x1(), 0.1});
        CHECK(da.failures == 0);
        for (std::size_t i = 1; i < da.rows.size(); ++i)
            CHECK(da.rows[i].worst > da.rows[i - 1].worst);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(da.modulus[i].second > 0);
    }

    TEST_CASE("tube")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        auto t = coarse_table(lin);
        TubeV v = build_tube(lin, t, 3.0 / 64, 0.1, 1.0);
        CHECK(v.eps0 > 0);
        CHECK(v.eps0 < 3.0 / 64);
        CHECK(v.delta0 > 0);
        Vec eu = lin.base().eigenvector(2);
        CHECK(v.contains(lin.base(), 0.49 * v.delta0 * eu));
        CHECK_FALSE(v.contains(lin.base(), 0.51 * v.delta0 * eu));
        CHECK_FALSE(v.contains(lin.base(), 2 * v.delta0 * eu));
        for (const Vec& p : v.arc)
            CHECK(std::fabs(v.u_coord(lin.base(), p)) < 0.5 * v.delta0);

        TubeV back = tube_from_json(v.to_json());
        CHECK(back.delta0 == v.delta0);
        CHECK(back.eps0 == v.eps0);
        CHECK(back.table == v.table);

        const DaMap& g = default_da();
        TubeV w = build_tube(g, coarse_table(g), 3.0 / 64, 0.1, 1.0);
        double diam = tube_pair_diameter(g, w, 1000, 4);
        CHECK(diam < w.delta_p);
        CHECK(diam < w.beta);

        SeparationTable empty;
        empty.modulus = {{0.2, 0.1}};
        CHECK(error_code([&] { build_tube(g, empty, 0.05, 0.1, 1.0); }) == "CalibrationMissing");
        CHECK(error_code([&] { tube_from_json("{\"x0\":[0,0,0],\"delta0\":0,\"eps0\":0,\"delta_p\":0,\"beta\":0,\"table\":[]}"); })
            == "CalibrationMissing");
    }

    TEST_CASE("nonlinear chain projection")
    {
        auto a = default_a();
        LinearMap lin(a.power(2));
        TubeV v = build_tube(lin, coarse_table(lin), 3.0 / 64, 0.1, 1.0);

        // Linear input: projections agree with propagate_chain on reversed prefixes.
        auto pts = walk_out(lin.base(), v, 0.002, 1, 21);
        auto c = make_nonlinear_chain(lin, pts);
        auto r = project_chain_nonlinear(lin, v, c);
        CHECK(r.exits);
        CHECK(r.side == 1);
        CHECK(r.max_gap <= 2 * c.epsilon);
        Chain lc = make_chain(pts, lin.base());
        CHECK(c.epsilon == doctest::Approx(lc.epsilon).epsilon(1e-9));
        for (std::size_t k = 1; k < pts.size(); ++k) {
            std::vector<Vec> rev(pts.rbegin() + static_cast<long>(pts.size() - 1 - k), pts.rend());
            Vec oracle = propagate_chain(lin.base(), make_chain(rev, lin.base()));
            CHECK((r.projections[k] - oracle).norm() < 1e-9);
        }

        // Chain of length one.
        auto one = make_nonlinear_chain(lin, {v.x0, v.x0 + 0.001 * lin.base().eigenvector(2)});
        auto r1 = project_chain_nonlinear(lin, v, one);
        CHECK(r1.projections.size() == 2);
        CHECK(r1.level_epsilon.size() == 1);

        // DA map: tube around a point near the bump, chains leaving on both sides.
        const DaMap& g = default_da();
        TubeV w = build_tube(g, coarse_table(g), 3.0 / 64, 0.1, 0.2, g.x1() + vec3(0.01, 0.02, -0.01));
        for (int sign : {-1, 1}) {
            auto dp = walk_out(g.base(), w, 0.002, sign, 30 + sign);
            auto dc = make_nonlinear_chain(g, dp);
            auto dr = project_chain_nonlinear(g, w, dc);
            CHECK(dr.exits);
            CHECK(dr.side == sign);
            CHECK(dr.max_gap <= 2 * dc.epsilon);
            CHECK(dr.direct_error < 1e-9);
            for (double e : dr.level_epsilon)
                CHECK(e <= 1.5 * dc.epsilon + 1e-12);
        }

        // A middle point outside V.
        auto bad = pts;
        bad.insert(bad.begin() + 1, v.x0 + v.delta0 * lin.base().eigenvector(2));
        CHECK(error_code([&] { project_chain_nonlinear(lin, v, make_nonlinear_chain(lin, bad)); }) == "ChainLeftTube");
    }
}
