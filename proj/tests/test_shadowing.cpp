#include "doctest.h"

#include "hyperdyn/mane_da.hpp"
#include "hyperdyn/shadowing.hpp"
#include "test_util.hpp"

#include <cmath>
#include <random>

using namespace hyperdyn;

namespace {

const DaMap& shadow_da()
{
    static const DaMap g = build_da(ToralAutomorphism::classify(default_matrix(), true));
    return g;
}

std::vector<Vec> noisy_constant(const ToralAutomorphism& a, const Vec& p, std::size_t n, double noise, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-noise, noise);
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back(p + a.from_eigen(vec3(ud(rng), ud(rng), ud(rng))));
    return pts;
}

} // namespace

TEST_SUITE("shadowing")
{
    TEST_CASE("true orbit shadows itself")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        std::vector<Vec> pts{vec3(0.1, 0.2, 0.3)};
        for (int i = 0; i < 30; ++i)
            pts.push_back(a.apply_torus(pts.back()));
        auto po = make_pseudo_orbit(f, pts);
        CHECK(po.alpha < 1e-12);
        auto res = shadow_linear(a, po, Boundary::Free);
        CHECK(res.beta < 1e-12);
        CHECK(res.residual < 1e-12);
    }

    TEST_CASE("empty orbit")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        PseudoOrbit po;
        CHECK_THROWS_WITH_AS(shadow_linear(a, po, Boundary::Free), doctest::Contains("EmptyOrbit"), Error);
    }

    TEST_CASE("single jump matches the closed-form geometric series")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        const int k = 12, n = 20;
        Vec v = vec3(3e-4, -2e-4, 5e-4);
        std::vector<Vec> pts;
        for (int i = 0; i < n; ++i)
            pts.push_back(i < k ? Vec(Vec::Zero(3)) : torus_reduce(iterate(f, v, i - k)));
        auto res = shadow_linear(a, make_pseudo_orbit(f, pts), Boundary::Free);
        Vec ve = a.to_eigen(v);
        const auto& l = a.eigenvalues();
        for (int i = 0; i < n; ++i) {
            // oracle correction in eigencoordinates
            Vec c = Vec::Zero(3);
            for (int j = 0; j < 2; ++j)
                c[j] = i < k ? 0.0 : -std::pow(l[j], i - k) * ve[j];
            c[2] = i < k ? ve[2] * std::pow(l[2], -(k - i)) : 0.0;
            Vec got = a.to_eigen(res.orbit[i] - pts[i]);
            CHECK((got - c).cwiseAbs().maxCoeff() < 1e-14);
        }
        CHECK(res.residual < 1e-12);
    }

    TEST_CASE("beta bounded by K alpha on random pseudo-orbits")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        double k = shadowing_constant(a);
        CHECK(k == doctest::Approx(2.8019).epsilon(1e-4));
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            auto pts = testutil::random_pseudo_orbit(a, 2000, 1e-3, 100 + trial);
            auto po = make_pseudo_orbit(f, pts);
            CHECK(po.alpha <= 1e-3 + 1e-15);
            auto res = shadow_linear(a, po, Boundary::Free);
            CHECK(res.residual < 1e-12);
            worst = std::max(worst, res.beta / po.alpha);
        }
        CHECK(worst <= k + 1e-6);
    }

    TEST_CASE("halving the jumps halves beta")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1e-3, 1e-3);
        std::vector<Vec> jumps;
        for (int i = 0; i < 300; ++i)
            jumps.push_back(a.from_eigen(vec3(u(rng), u(rng), u(rng))));
        auto build = [&](double s) {
            std::vector<Vec> pts{vec3(0.3, 0.6, 0.1)};
            for (auto& j : jumps)
                pts.push_back(torus_reduce(a.apply(pts.back()) + s * j));
            return pts;
        };
        auto r1 = shadow_linear(a, make_pseudo_orbit(f, build(1.0)), Boundary::Free);
        auto r2 = shadow_linear(a, make_pseudo_orbit(f, build(0.5)), Boundary::Free);
        CHECK(r2.beta == doctest::Approx(0.5 * r1.beta).epsilon(1e-6));
    }

    TEST_CASE("periodic shadows are unique and periodic")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        auto pts = testutil::noisy_periodic_orbit(a, 12, 40, 2e-4, 9);
        auto po = make_pseudo_orbit(f, pts, true);
        auto r1 = shadow_linear(a, po, Boundary::Periodic);
        CHECK(r1.residual < 1e-12);
        CHECK(r1.beta <= r1.k_bound * po.alpha + 1e-12);
        // Same cycle started elsewhere.
        std::size_t shift = 17, n = pts.size();
        std::vector<Vec> rot(n);
        for (std::size_t i = 0; i < n; ++i)
            rot[i] = pts[(i + shift) % n];
        auto r2 = shadow_linear(a, make_pseudo_orbit(f, rot, true), Boundary::Periodic);
        double diff = 0;
        for (std::size_t i = 0; i < n; ++i)
            diff = std::max(diff, (r2.orbit[i] - r1.orbit[(i + shift) % n]).cwiseAbs().maxCoeff());
        CHECK(diff < 1e-10);
    }

    TEST_CASE("nonlinear solver on a linear map agrees with the exact solve")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        auto pts = testutil::random_pseudo_orbit(a, 500, 1e-3, 77);
        auto po = make_pseudo_orbit(f, pts);
        auto lin = shadow_linear(a, po, Boundary::Free);
        auto non = shadow_nonlinear(f, po, 1e-12);
        double diff = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
            diff = std::max(diff, (lin.orbit[i] - non.orbit[i]).cwiseAbs().maxCoeff());
        CHECK(diff < 1e-11);
        auto per = testutil::noisy_periodic_orbit(a, 12, 10, 2e-4, 3);
        auto pp = make_pseudo_orbit(f, per, true);
        auto lp = shadow_linear(a, pp, Boundary::Periodic);
        auto np = shadow_nonlinear(f, pp, 1e-12, Boundary::Periodic);
        diff = 0;
        for (std::size_t i = 0; i < per.size(); ++i)
            diff = std::max(diff, (lp.orbit[i] - np.orbit[i]).cwiseAbs().maxCoeff());
        CHECK(diff < 1e-11);
    }

    TEST_CASE("expansivity gap")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        Vec x = vec3(0.2, 0.4, 0.1);
        CHECK(expansivity_gap(f, x, x, 10) == 0.0);
        double eps = 1e-9;
        double g = expansivity_gap(f, x, x + eps * a.eigenvector(2), 8);
        CHECK(g == doctest::Approx(std::pow(a.lambda_u(), 8) * eps).epsilon(1e-6));
    }

    TEST_CASE("csv round trip")
    {
        std::vector<Vec> pts{vec3(0.125, -1.5, 2.0), vec3(1e-17, 0.3, 0.7)};
        std::string path = testutil::temp_path("points.csv");
        write_points_csv(path, pts);
        auto back = read_points_csv(path);
        REQUIRE(back.size() == 2);
        CHECK(back[0] == pts[0]);
        CHECK(back[1] == pts[1]);
    }

    TEST_CASE("DA: noisy fixed point shadows the saddle from the center root")
    {
        const DaMap& g = shadow_da();
        const auto& prof = g.profile();
        double t = 0.03;
        for (int i = 0; i < 100; ++i)
            t -= (prof.g(t) - t) / (prof.dg(t) - 1);
        Vec x3 = g.x1() + t * g.bump().axis();
        auto pts = noisy_constant(g.base(), x3, 60, 1e-4, 11);
        auto po = make_pseudo_orbit(g, pts);
        auto res = shadow_nonlinear(g, po, 1e-11);
        CHECK(res.residual < 1e-11);
        CHECK(res.beta <= res.k_bound * po.alpha + 1e-9);
        for (std::size_t i = 20; i < 40; ++i)
            CHECK(torus_distance(res.orbit[i], x3) < 1e-9);
    }

    TEST_CASE("DA: pseudo-orbit through the bump ball, tol 1e-9 vs 1e-12")
    {
        const DaMap& g = shadow_da();
        const auto& a = g.base();
        // True orbit through a point next to x1, then jumps of 1e-6.
        Vec p0 = g.x1() + vec3(0.004, -0.003, 0.002);
        std::vector<Vec> orbit{p0};
        for (int i = 0; i < 15; ++i)
            orbit.insert(orbit.begin(), torus_reduce(g.inverse(orbit.front())));
        for (int i = 0; i < 15; ++i)
            orbit.push_back(torus_reduce(g.forward(orbit.back())));
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> ud(-1e-6, 1e-6);
        for (auto& p : orbit)
            p += a.from_eigen(vec3(ud(rng), ud(rng), ud(rng)));
        auto po = make_pseudo_orbit(g, orbit);
        bool crosses = false;
        for (const auto& p : orbit)
            crosses = crosses || torus_distance(p, g.x1()) < g.params().rho / 2;
        REQUIRE(crosses);
        auto coarse = shadow_nonlinear(g, po, 1e-9);
        auto fine = shadow_nonlinear(g, po, 1e-12);
        CHECK(coarse.residual < 1e-9);
        CHECK(coarse.beta <= 10 * po.alpha);
        double diff = 0;
        for (std::size_t i = 0; i < orbit.size(); ++i)
            diff = std::max(diff, torus_distance(coarse.orbit[i], fine.orbit[i]));
        CHECK(diff < 1e-8);
        CHECK(std::fabs(coarse.beta - fine.beta) < 1e-8);
    }

    TEST_CASE("eigen-offset expansivity gap")
    {
        auto a = ToralAutomorphism::classify(default_matrix());
        LinearMap f(a);
        Vec origin = vec3(0, 0, 0);
        double eps = 1e-9;
        double lifted = expansivity_gap(f, origin, origin + eps * a.eigenvector(2), 8);
        double eig = expansivity_gap_eigen(f, origin, vec3(0, 0, 0), vec3(0, 0, eps), 8);
        CHECK(eig == doctest::Approx(lifted).epsilon(1e-6));

        const DaMap& g = shadow_da();
        double c = g.params().cstar;
        // Points of the segment between x2 and x3 stay in it for all time.
        double gap = expansivity_gap_eigen(g, g.x1(), vec3(0, -0.5 * c, 0), vec3(0, 0.7 * c, 0), 50);
        CHECK(gap <= 2 * c + 1e-12);
        // Outside it, backward iteration along e_c expands like 1/lambda_c.
        double out = expansivity_gap_eigen(g, g.x1(), vec3(0, 0.1, 0), vec3(0, 0.12, 0), 50);
        CHECK(out > 1.0);
        // A lifted run loses the same pair to rounding.
        Vec ec = g.base().eigenvector(1);
        CHECK(expansivity_gap(g, g.x1() - 0.5 * c * ec, g.x1() + 0.7 * c * ec, 50) > 1.0);
        CHECK_THROWS_AS(expansivity_gap_eigen(g, vec3(0.1, 0.2, 0.3), origin, origin, 5), Error);
    }
}
