#include "doctest.h"

#include "hyperdyn/mane_da.hpp"
#include "hyperdyn/semiconjugacy.hpp"
#include "hyperdyn/shadowing.hpp"
#include "test_util.hpp"

#include <Eigen/LU>

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

const Semiconjugacy& da_h32()
{
    static const Semiconjugacy s = [] {
        SemiconjugacyOptions o;
        o.m = 32;
        o.test_resolution = 24;
        return solve_h(default_da(), o);
    }();
    return s;
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

} // namespace

TEST_SUITE("semiconjugacy")
{
    TEST_CASE("G = A gives h = 0")
    {
        LinearMap f(default_a());
        SemiconjugacyOptions o;
        o.m = 8;
        o.test_resolution = 8;
        auto s = solve_h(f, o);
        for (double v : s.eigen_values())
            CHECK(v == 0.0);
        CHECK(s.residual == 0.0);
        CHECK(s.r == 0.0);
        CHECK(s.h(vec3(0.3, 0.1, 0.7)).norm() == 0.0);
    }

    TEST_CASE("affine shift matches the solution of (A - I) w = v")
    {
        auto a = default_a();
        Vec v = vec3(0.013, -0.02, 0.007);
        AffineMap f(a, v);
        SemiconjugacyOptions o;
        o.m = 8;
        o.tol = 1e-13;
        o.test_resolution = 8;
        auto s = solve_h(f, o);
        Mat am = a.matrix().cast<double>() - Mat::Identity(3, 3);
        Vec w = am.fullPivLu().solve(v);
        std::size_t nodes = 8 * 8 * 8;
        double worst = 0;
        for (std::size_t n = 0; n < nodes; ++n)
            worst = std::max(worst, (s.node_h(n) - w).norm());
        CHECK(worst < 1e-9);
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> ud;
        for (int i = 0; i < 50; ++i)
            CHECK((s.h(vec3(ud(rng), ud(rng), ud(rng))) - w).norm() < 1e-9);
        CHECK(s.residual < 1e-9);
    }

    TEST_CASE("default DA map: residual, C and surjectivity")
    {
        const auto& s = da_h32();
        CHECK(s.residual < 1e-6);
        CHECK(s.r > 0.0);
        CHECK(s.r < 0.02);
        CHECK(std::isfinite(s.constant()));
        CHECK(s.constant() > 0.5);
        CHECK(s.constant() < 3.0);
        CHECK(surjectivity_coverage(s) == 1.0);
    }

    TEST_CASE("h is fixed at x1 and collapses the center segment between x2 and x3")
    {
        const auto& s = da_h32();
        const DaMap& g = default_da();
        const auto& a = g.base();
        double c = g.params().cstar;
        Vec x1 = g.x1();
        Vec h0 = s.h_eigen(x1);
        CHECK(std::fabs(h0[0]) < 1e-9);
        CHECK(std::fabs(h0[2]) < 1e-9);
        // H(x2) = H(x1): the offset +-cstar along e_c is absorbed by h.
        for (double t : {-c, c}) {
            Vec dh = s.h_eigen_offset(x1, vec3(0, t, 0));
            CHECK(std::fabs(dh[1] + t) < 1e-6);
        }
        // Outside the segment the center map behaves like A's and H does not collapse.
        Vec far = s.h_eigen_offset(x1, vec3(0, 0.2, 0));
        CHECK(std::fabs(far[1] + 0.2) > 1e-3);
        (void)a;
    }

    TEST_CASE("offset evaluation agrees with pointwise differences")
    {
        const auto& s = da_h32();
        const auto& a = default_da().base();
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> ud, sym(-1, 1);
        for (int i = 0; i < 40; ++i) {
            Vec x = default_da().x1() + 0.05 * vec3(sym(rng), sym(rng), sym(rng));
            Vec d = 0.02 * vec3(sym(rng), sym(rng), sym(rng));
            Vec de = a.to_eigen(d);
            Vec diff = s.h_eigen(x + d) - s.h_eigen(x);
            CHECK((s.h_eigen_offset(x, de) - diff).norm() < 1e-5);
        }
    }

    TEST_CASE("HSC1 round trip")
    {
        const auto& s = da_h32();
        std::string path = testutil::temp_path("h32.hsc1");
        write_hsc1(s, path);
        auto t = read_hsc1(default_da(), path);
        REQUIRE(t.resolution() == s.resolution());
        double worst = 0;
        for (std::size_t n = 0; n < s.eigen_values().size(); ++n)
            worst = std::max(worst, std::fabs(t.eigen_values()[n] - s.eigen_values()[n]));
        CHECK(worst < 1e-15);
        CHECK(equivariance_residual(t, 8) < 1e-6);

        std::string bad = testutil::temp_path("bad.hsc1");
        std::ofstream(bad) << "HSC2xxxx";
        CHECK(error_code([&] { read_hsc1(default_da(), bad); }) == "IoError");
        {
            std::ofstream out(bad, std::ios::binary);
            out.write("HSC1", 4);
            std::int32_t m = 4;
            out.write(reinterpret_cast<const char*>(&m), sizeof m);
        }
        CHECK(error_code([&] { read_hsc1(default_da(), bad); }) == "IoError");
    }

    TEST_CASE("modulus of continuity")
    {
        LinearMap f(default_a());
        SemiconjugacyOptions o;
        o.m = 8;
        o.test_resolution = 0;
        auto id = solve_h(f, o);
        auto rows = modulus_of_continuity(id, {0.0, 0.01, 0.1}, 64, 5);
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].value == 0.0);
        CHECK(rows[1].value == doctest::Approx(0.01).epsilon(1e-12));
        CHECK(rows[2].value == doctest::Approx(0.1).epsilon(1e-12));

        auto da = modulus_of_continuity(da_h32(), {0.1, 0.0, 1.0 / 32, 0.01}, 200, 5);
        CHECK(da[0].value == 0.0);
        for (std::size_t i = 1; i < da.size(); ++i) {
            CHECK(da[i].radius > da[i - 1].radius);
            CHECK(da[i].value >= da[i - 1].value);
        }
        CHECK(da.back().value < 0.2);
    }

    TEST_CASE("leaf correspondence for the linear map is exact")
    {
        LinearMap f(default_a());
        SemiconjugacyOptions o;
        o.m = 8;
        o.test_resolution = 8;
        auto s = solve_h(f, o);
        LeafCheckOptions lo;
        lo.samples = 50;
        lo.focus = vec3(0, 0, 0);
        lo.center_half = 0.02;
        for (LeafItem it : {LeafItem::CuCs, LeafItem::Center, LeafItem::UnstableLine, LeafItem::Transversality,
                 LeafItem::FiberCenter}) {
            auto rep = check_leaf_correspondence(s, it, lo);
            CAPTURE(leaf_item_name(it));
            CHECK(rep.pass());
            CHECK(rep.max_deviation < 1e-12);
        }
    }

    TEST_CASE("leaf correspondence for the DA map")
    {
        const auto& s = da_h32();
        LeafCheckOptions lo;
        lo.samples = 200;
        lo.focus = default_da().x1();
        lo.center_half = 0.029;
        for (LeafItem it : {LeafItem::CuCs, LeafItem::Center, LeafItem::UnstableLine, LeafItem::Transversality,
                 LeafItem::FiberCenter}) {
            auto rep = check_leaf_correspondence(s, it, lo);
            CAPTURE(leaf_item_name(it));
            CAPTURE(rep.max_deviation);
            CHECK(rep.pass());
            CHECK(rep.tolerance == doctest::Approx(10 * s.residual));
            if (it == LeafItem::FiberCenter) {
                CHECK(rep.pairs_tested > 0);
                CHECK(rep.bounded_pairs > 0);
                CHECK(rep.max_expansivity_gap <= 2 * s.cr_bound);
            }
        }
    }

    TEST_CASE("fiber_center without a fixed focus is rejected")
    {
        const auto& s = da_h32();
        LeafCheckOptions lo;
        lo.samples = 4;
        CHECK(error_code([&] { check_leaf_correspondence(s, LeafItem::FiberCenter, lo); }) == "BadInput");
        lo.focus = vec3(0.1, 0.2, 0.3);
        CHECK(error_code([&] { check_leaf_correspondence(s, LeafItem::FiberCenter, lo); }) == "BadInput");
    }

    TEST_CASE("item names")
    {
        for (LeafItem it : {LeafItem::CuCs, LeafItem::Center, LeafItem::UnstableLine, LeafItem::Transversality,
                 LeafItem::FiberCenter})
            CHECK(leaf_item_from_name(leaf_item_name(it)) == it);
        CHECK(error_code([] { leaf_item_from_name("fiber"); }) == "BadInput");
    }

    TEST_CASE("solver errors")
    {
        SemiconjugacyOptions o;
        o.m = 2;
        CHECK(error_code([&] { solve_h(default_da(), o); }) == "BadInput");
        o.m = 300;
        CHECK(error_code([&] { solve_h(default_da(), o); }) == "ResolutionOverflow");
        o.m = 16;
        o.max_iterations = 2;
        CHECK(error_code([&] { solve_h(default_da(), o); }) == "NoConvergence");
        CHECK(error_code([] { Semiconjugacy(default_da(), 4, std::vector<double>(5)); }) == "BadInput");
    }
}
