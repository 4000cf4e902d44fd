#include "doctest.h"

#include "hyperdyn/product_structure.hpp"

#include <cmath>
#include <random>

using namespace hyperdyn;

namespace {

ToralAutomorphism default_a() { return ToralAutomorphism::classify(default_matrix(), true); }

// Bracket by solving x + s e_s + c e_c = y + u e_u directly.
Vec solve_bracket(const ToralAutomorphism& a, const Vec& x, const Vec& y)
{
    Eigen::Matrix3d m;
    m.col(0) = a.eigenvector(0);
    m.col(1) = a.eigenvector(1);
    m.col(2) = -a.eigenvector(2);
    Eigen::Vector3d rhs = y - x;
    Eigen::Vector3d c = m.fullPivLu().solve(rhs);
    return x + c[0] * a.eigenvector(0) + c[1] * a.eigenvector(1);
}

HancockSearch surrogate(const ToralAutomorphism& a, int n)
{
    std::vector<double> angles, halves{0.02, 0.05, 0.1, 0.2};
    for (int i = 0; i < 12; ++i)
        angles.push_back(i * M_PI / 12);
    return hancock_search(a, vec3(0, 0, 0), vec3(6.0 / 13, 3.0 / 13, 7.0 / 13), 0.1, n, angles, halves, 12);
}

} // namespace

TEST_SUITE("product_structure")
{
    TEST_CASE("hermite normal form")
    {
        LatticeSubgroup d(3, {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
        CHECK(d.rank() == 3);
        CHECK(d.index() == 6);
        CHECK(LatticeSubgroup(3, {}).rank() == 0);
        CHECK(LatticeSubgroup(3, {{0, 0, 0}}).rank() == 0);

        std::mt19937 rng(3);
        std::uniform_int_distribution<long long> coef(-6, 6);
        for (int trial = 0; trial < 200; ++trial) {
            int m = 1 + trial % 5;
            std::vector<IntVec> gens;
            for (int i = 0; i < m; ++i)
                gens.push_back({coef(rng), coef(rng), coef(rng)});
            auto h = hermite_normal_form(gens);
            CHECK(hermite_normal_form(h) == h);
            LatticeSubgroup g(3, gens), b(3, h);
            for (auto& v : gens)
                CHECK(b.contains(v));
            CHECK(g.contains(b));
            CHECK(b.contains(g));
            if (m == 3) {
                Eigen::Matrix3d mm;
                for (int i = 0; i < 3; ++i)
                    for (int k = 0; k < 3; ++k)
                        mm(i, k) = static_cast<double>(gens[i][k]);
                long long det = std::llround(std::fabs(mm.determinant()));
                CHECK(g.index() == det);
            }
        }
        CHECK(d.to_json().find("\"index\": 6") != std::string::npos);
    }

    TEST_CASE("gamma delta on simple sets")
    {
        GridSet one(3, 32);
        one.set(one.index_of(vec3(0, 0, 0)));
        CHECK(gamma_delta(one, vec3(0, 0, 0), 3.0 / 32).group.rank() == 0);
        CHECK_THROWS(gamma_delta(one, vec3(0.5, 0.5, 0.5), 3.0 / 32));

        auto full = GridSet::full(3, 32);
        auto gd = gamma_delta(full, vec3(0, 0, 0), 3.0 / 32);
        CHECK(gd.group.rank() == 3);
        CHECK(gd.group.index() == 1);
        CHECK(gd.group.basis() == std::vector<IntVec>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
        CHECK(gd.cells == full.size());
        for (auto& loop : gd.loops) {
            REQUIRE(loop.witness.size() >= 2);
            CHECK(loop.witness.front() == full.index_of(vec3(0, 0, 0)));
            CHECK(loop.witness.back() == loop.witness.front());
            for (std::size_t i = 0; i + 1 < loop.witness.size(); ++i)
                CHECK(torus_distance(full.center(loop.witness[i]), full.center(loop.witness[i + 1])) < 3.0 / 32);
        }

        // Two coordinate circles: a loop along x only with delta below the cell pitch.
        GridSet cross(3, 16);
        for (int i = 0; i < 16; ++i) {
            cross.set(cross.index({i, 0, 0}));
            cross.set(cross.index({0, i, 0}));
        }
        CHECK(gamma_delta(cross, vec3(0, 0, 0), 0.5 / 16).group.rank() == 0);
        auto two = gamma_delta(cross, vec3(0, 0, 0), 1.5 / 16).group;
        CHECK(two.rank() == 2);
        CHECK(two.contains(IntVec{1, 0, 0}));
        CHECK(two.contains(IntVec{0, 1, 0}));
        CHECK_FALSE(two.contains(IntVec{0, 0, 1}));
        CHECK_THROWS(gamma_delta(full, vec3(0, 0, 0), 3.0 / 32, 64, 1000));
    }

    TEST_CASE("gamma delta grows with delta")
    {
        auto a = default_a();
        auto hs = surrogate(a, 32);
        REQUIRE(hs.found);
        LatticeSubgroup prev;
        bool first = true;
        for (double k : {1.0, 1.5, 2.0, 3.0}) {
            auto g = gamma_delta(hs.set, vec3(0, 0, 0), k / 32).group;
            if (!first) {
                CHECK(g.contains(prev));
            }
            prev = g;
            first = false;
        }
    }

    TEST_CASE("projection density")
    {
        auto a = default_a();
        CHECK(projection_density(LatticeSubgroup(3, {}), a, 1.0, 100).max_gap == 1.0);

        // Three-distance: {k x mod 1}, |k| <= 1000, has at most three gap lengths.
        auto rank1 = projection_density(LatticeSubgroup(3, {{1, 0, 0}}), a, 1.0, 2001);
        CHECK(rank1.positions.size() == 2001);
        CHECK(rank1.distinct_gaps(1e-9) <= 3);

        // Whole shells agree with a direct triple loop.
        LatticeSubgroup z3(3, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
        auto st = projection_density(z3, a, 1.0, 23 * 23 * 23);
        std::vector<double> direct;
        for (int i = -11; i <= 11; ++i)
            for (int j = -11; j <= 11; ++j)
                for (int k = -11; k <= 11; ++k) {
                    double v = std::fmod(a.unstable_coord(vec3(i, j, k)), 1.0);
                    direct.push_back(v < 0 ? v + 1 : v);
                }
        std::sort(direct.begin(), direct.end());
        REQUIRE(direct.size() == st.positions.size());
        double diff = 0;
        for (std::size_t i = 0; i < direct.size(); ++i)
            diff = std::max(diff, std::fabs(direct[i] - st.positions[i]));
        CHECK(diff < 1e-12);

        auto dense = projection_density(z3, a, 1.0, 10000);
        CHECK(dense.positions.size() == 10000);
        CHECK(dense.max_gap < 1e-2);
        CHECK(projection_density(z3, a, 1.0, 100).max_gap > dense.max_gap);
    }

    TEST_CASE("chains")
    {
        auto a = default_a();
        Vec p = vec3(0.1, 0.2, 0.3);
        CHECK(make_chain({p, p}, a).epsilon == 0.0);
        Vec eu = a.eigenvector(2);
        auto line = make_chain({p, p + 0.01 * eu, p + 0.02 * eu}, a);
        CHECK(line.epsilon == doctest::Approx(0.01).epsilon(1e-9));
        CHECK_THROWS(propagate_chain(a, Chain{{p}, 0}));

        // A lifted loop witness has projected steps within the oblique projector bound.
        auto gd = gamma_delta(GridSet::full(3, 16), vec3(0, 0, 0), 2.0 / 16);
        REQUIRE(!gd.loops.empty());
        GridSet g(3, 16);
        double proj = a.unstable_projector_norm();
        for (auto& loop : gd.loops) {
            std::vector<Vec> pts{g.center(loop.witness[0])};
            for (std::size_t i = 1; i < loop.witness.size(); ++i)
                pts.push_back(pts.back() + wrap_displacement(g.center(loop.witness[i]) - g.center(loop.witness[i - 1])));
            Chain c = make_chain(pts, a);
            CHECK(c.epsilon <= std::max(proj, 1.0) * 2.0 / 16 + 1e-12);
        }
    }

    TEST_CASE("chain propagation equals the direct bracket")
    {
        auto a = default_a();
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-1, 1);
        std::uniform_int_distribution<int> len(1, 20);
        double worst = 0, oracle = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            int n = len(rng);
            std::vector<Vec> pts{vec3(u(rng), u(rng), u(rng))};
            for (int i = 0; i < n; ++i)
                pts.push_back(pts.back() + 0.05 * vec3(u(rng), u(rng), u(rng)));
            Chain c = make_chain(pts, a);
            Vec z = propagate_chain(a, c);
            worst = std::max(worst, (z - bracket_linear(a, pts.front(), pts.back())).norm());
            oracle = std::max(oracle, (z - solve_bracket(a, pts.front(), pts.back())).norm());
        }
        CHECK(worst < 1e-10);
        CHECK(oracle < 1e-10);

        Vec x = vec3(0.3, 0.1, 0.7), y = vec3(0.32, 0.13, 0.66);
        CHECK((propagate_chain(a, make_chain({x, y}, a)) - solve_bracket(a, x, y)).norm() < 1e-14);
    }

    TEST_CASE("shortened chains keep their displacement bound")
    {
        auto a = default_a();
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> u(-1, 1);
        Vec es = a.eigenvector(0), ec = a.eigenvector(1), eu = a.eigenvector(2);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Vec> pts{vec3(u(rng), u(rng), u(rng))};
            for (int i = 0; i < 20; ++i) {
                Vec s = u(rng) * es + u(rng) * ec;
                if (s.norm() > 1)
                    s /= s.norm();
                pts.push_back(pts.back() + 0.05 * (s + u(rng) * eu));
            }
            Chain c = make_chain(pts, a);
            REQUIRE(c.epsilon <= 0.05 + 1e-12);
            std::vector<Chain> levels;
            propagate_chain(a, c, &levels);
            CHECK(levels.size() == 20);
            for (auto& l : levels)
                CHECK(l.epsilon <= 0.05 + 1e-12);
        }
    }

    TEST_CASE("bracket saturation basics")
    {
        auto a = default_a();
        auto sp = Splitting::linear(a);
        auto full = GridSet::full(3, 16);
        auto sf = bracket_saturate(sp, full, 3.0 / 16, 5);
        CHECK(sf.set == full);
        CHECK(sf.fixpoint);
        GridSet one(3, 16);
        one.set(one.index_of(vec3(0.3, 0.3, 0.3)));
        CHECK(bracket_saturate(sp, one, 3.0 / 16, 5).set == one);

        auto hs = surrogate(a, 32);
        auto s1 = bracket_saturate(sp, hs.set, 3.0 / 32, 8, 1);
        auto s3 = bracket_saturate(sp, hs.set, 3.0 / 32, 8, 3);
        CHECK(s1.set == s3.set);
        CHECK(s1.coverage == s3.coverage);
        CHECK(hs.set.subset_of(s1.set));

        // Translating the input translates the saturation.
        GridSet moved(3, 32);
        for (auto i : hs.set.members())
            moved.set(moved.shifted(i, {5, -3, 7}));
        auto sm = bracket_saturate(sp, moved, 3.0 / 32, 8);
        GridSet back(3, 32);
        for (auto i : sm.set.members())
            back.set(back.shifted(i, {-5, 3, -7}));
        CHECK(back == s1.set);
    }

    TEST_CASE("saturation commutes with the map up to a cell")
    {
        auto a = default_a();
        auto sp = Splitting::linear(a);
        LinearMap f(a);
        auto hs = surrogate(a, 32);
        auto sat_then_map = image_cells(f, bracket_saturate(sp, hs.set, 3.0 / 32, 50).set, 3);
        auto map_then_sat = bracket_saturate(sp, image_cells(f, hs.set, 3), 3.0 / 32, 50).set;
        CHECK(sat_then_map.subset_of(map_then_sat.dilate(1)));
        CHECK(map_then_sat.subset_of(sat_then_map.dilate(1)));
    }

    TEST_CASE("surrogate orbit closure saturates to the torus")
    {
        auto a = default_a();
        auto hs = surrogate(a, 64);
        REQUIRE(hs.found);
        auto ball = ball_cells(3, 64, vec3(6.0 / 13, 3.0 / 13, 7.0 / 13), 0.1);
        GridSet hit = hs.set;
        hit &= ball;
        CHECK(hit.empty());
        CHECK(hs.set.test(hs.set.index_of(vec3(0, 0, 0))));
        CHECK(connected_components(hs.set).count() == 1);
        auto sat = bracket_saturate(Splitting::linear(a), hs.set, 3.0 / 64, 100);
        CHECK(sat.coverage.back() >= 0.99);
        for (std::size_t i = 1; i < sat.coverage.size(); ++i)
            CHECK(sat.coverage[i] >= sat.coverage[i - 1]);
    }

    TEST_CASE("local product structure witnesses")
    {
        auto a = default_a();
        auto sp = Splitting::linear(a);
        CHECK_FALSE(lps_violation_witness(sp, GridSet::full(3, 16), 3.0 / 16));
        // An offset whose bracket cell is neither endpoint.
        GridSet pair(3, 16);
        std::size_t x = pair.index({4, 4, 4});
        for (auto& o : ball_offsets(3, 16, 3.0 / 16)) {
            Vec c = pair.center(x);
            std::size_t zc = pair.index_of(torus_reduce(bracket_linear(a, c, c + vec3(o[0], o[1], o[2]) / 16.0)));
            if (zc != x && zc != pair.shifted(x, o)) {
                pair.set(x);
                pair.set(pair.shifted(x, o));
                break;
            }
        }
        REQUIRE(pair.count() == 2);
        auto w = lps_violation_witness(sp, pair, 3.0 / 16);
        REQUIRE(w);
        CHECK(pair.test(w->x));
        CHECK(pair.test(w->y));
        CHECK_FALSE(pair.test(w->z));
        Vec z = bracket_linear(a, pair.center(w->x), pair.center(w->x) + wrap_displacement(pair.center(w->y) - pair.center(w->x)));
        CHECK(pair.index_of(torus_reduce(z)) == w->z);

        auto horseshoe = horseshoe_grid_set(256);
        CHECK_FALSE(lps_violation_witness(Splitting::axis_aligned(), horseshoe, 3.0 / 256));
        CHECK_FALSE(lps_violation_witness(Splitting::axis_aligned(), horseshoe, 8.0 / 256));
    }
}
