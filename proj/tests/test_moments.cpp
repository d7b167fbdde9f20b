#include "doctest.h"

#include <cmath>
#include <random>

#include "groupop/moments.hpp"
#include "groupop/simulator.hpp"
#include "oracle.hpp"

using namespace groupop;

namespace {

MomentState state_of(const MomentEngine& eng, const OpinionMatrix& a, const GroupLayout& layout)
{
    auto s = eng.init_moments(InitialCondition(layout.n_groups(), 0.0));
    const int ng = layout.n_groups();
    for (int g = 0; g < ng; ++g)
        s.x_self[g] = oracle::self_mean(a, layout, g);
    for (int p = 0; p < ng; ++p)
        for (int q = 0; q < ng; ++q)
            s.x_cross[p * ng + q] = oracle::cross_mean(a, layout, p, q);
    const auto cat = eng.system().catalog();
    for (std::size_t m = 0; m < cat.size(); ++m)
        s.second[m] = oracle::brute_moment(a, layout, cat[m]);
    return s;
}

void check_frozen_halfstep(const ModelParams& p, std::uint64_t seed)
{
    MomentEngine eng(p);
    GroupLayout layout(p);
    std::mt19937_64 rng(seed);
    const auto a = oracle::random_matrix(layout.agents(), rng, 0.5);
    const int ng = p.n_groups;
    std::vector<double> h(ng * ng);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (auto& v : h)
        v = u(rng);

    InfluenceTable tab;
    tab.n_groups = ng;
    tab.h_bar = h;
    tab.h_hat = h;
    tab.h_prime.assign(h.size(), 0.0);

    const auto s = state_of(eng, a, layout);
    const auto next = eng.interaction_halfstep(s, tab);
    const auto cat = eng.system().catalog();
    const std::vector<MomentKey> keys(cat.begin(), cat.end());
    const auto ref = oracle::frozen_interaction(a, layout, h, p.delta, p.gossip, keys);

    for (int g = 0; g < ng; ++g)
        CHECK(next.x_self[g] == doctest::Approx(ref.self[g]).epsilon(1e-12));
    for (int c = 0; c < ng * ng; ++c)
        CHECK(next.x_cross[c] == doctest::Approx(ref.cross[c]).epsilon(1e-12));
    for (std::size_t m = 0; m < keys.size(); ++m) {
        INFO(keys[m].name());
        CHECK(std::abs(next.second[m] - ref.second[m]) <= 1e-12 * (1.0 + std::abs(ref.second[m])));
    }
}

}  // namespace

TEST_CASE("frozen-influence half-step matches exhaustive enumeration")
{
    ModelParams p;
    p.delta = 0.1;
    SUBCASE("two groups of three, no gossip")
    {
        p.n_groups = 2;
        p.group_size = 3;
        p.gossip = 0;
        check_frozen_halfstep(p, 1);
    }
    SUBCASE("two groups of three, single gossip")
    {
        p.n_groups = 2;
        p.group_size = 3;
        p.gossip = 1;
        check_frozen_halfstep(p, 2);
    }
    SUBCASE("two groups of three, double gossip")
    {
        p.n_groups = 2;
        p.group_size = 3;
        p.gossip = 2;
        check_frozen_halfstep(p, 3);
    }
    SUBCASE("three groups of two, double gossip")
    {
        p.n_groups = 3;
        p.group_size = 2;
        p.gossip = 2;
        check_frozen_halfstep(p, 4);
    }
    SUBCASE("one group of five, gossip")
    {
        p.n_groups = 1;
        p.group_size = 5;
        p.gossip = 2;
        check_frozen_halfstep(p, 5);
    }
    SUBCASE("two groups of four, triple gossip")
    {
        p.n_groups = 2;
        p.group_size = 4;
        p.gossip = 3;
        check_frozen_halfstep(p, 6);
    }
}

TEST_CASE("first moments are exact for an influence linear in the opinion gap")
{
    // h_ij = hhat_IJ + h'_IJ (a_ii - a_ij): the first-moment update then only
    // involves second moments, which the state carries exactly.
    for (int ng : {1, 2, 3}) {
        ModelParams p;
        p.n_groups = ng;
        p.group_size = ng == 1 ? 5 : 3;
        p.delta = 0.1;
        MomentEngine eng(p);
        GroupLayout layout(p);
        std::mt19937_64 rng(40 + ng);
        const auto a = oracle::random_matrix(layout.agents(), rng, 0.5);
        InfluenceTable tab;
        tab.n_groups = ng;
        std::uniform_real_distribution<double> u(0.1, 0.9), d(-1.5, -0.2);
        for (int c = 0; c < ng * ng; ++c) {
            tab.h_hat.push_back(u(rng));
            tab.h_prime.push_back(d(rng));
            tab.h_bar.push_back(u(rng));
        }
        auto weight = [&](int i, int j) {
            const int c = layout.group_of(i) * ng + layout.group_of(j);
            return tab.h_hat[c] + tab.h_prime[c] * (a(i, i) - a(i, j));
        };
        const auto ref = oracle::exact_interaction(a, layout, weight, p.delta, 0, {});
        const auto next = eng.interaction_halfstep(state_of(eng, a, layout), tab);
        for (int g = 0; g < ng; ++g)
            CHECK(next.x_self[g] == doctest::Approx(ref.self[g]).epsilon(1e-12));
        for (int c = 0; c < ng * ng; ++c)
            CHECK(next.x_cross[c] == doctest::Approx(ref.cross[c]).epsilon(1e-12));
    }
}

namespace {

void check_attraction_identity(int ng, int n, int matrices, std::uint64_t seed)
{
    ModelParams p;
    p.n_groups = ng;
    p.group_size = n;
    p.mu = 0.9;
    MomentEngine eng(p);
    GroupLayout layout(p);
    std::mt19937_64 rng(seed);
    const auto cat = eng.system().catalog();
    for (int r = 0; r < matrices; ++r) {
        auto a = oracle::random_matrix(layout.agents(), rng);
        const auto s = state_of(eng, a, layout);
        const auto next = eng.attraction_fullstep(s);
        attraction_step(a, p, layout);
        for (std::size_t m = 0; m < cat.size(); ++m) {
            INFO(cat[m].name());
            CHECK(oracle::close(next.second[m], oracle::brute_moment(a, layout, cat[m]), 1e-12,
                                1e-14));
        }
        for (int g = 0; g < ng; ++g)
            CHECK(next.x_self[g] == s.x_self[g]);
        CHECK(next.x_cross == s.x_cross);
    }
}

}  // namespace

TEST_CASE("attraction full step is exact on explicit matrices")
{
    check_attraction_identity(1, 4, 10, 1);
    check_attraction_identity(2, 3, 10, 2);
    check_attraction_identity(3, 2, 10, 3);
    check_attraction_identity(2, 4, 3, 4);
}

TEST_CASE("zero state")
{
    ModelParams p;
    p.n_groups = 3;
    p.group_size = 10;
    p.delta = 0.05;
    MomentEngine eng(p);
    const auto s = eng.init_moments(InitialCondition(3, 0.0));
    for (double v : s.second)
        CHECK(v == 0.0);
    const auto h = eng.influence_table(s);
    for (int c = 0; c < 9; ++c) {
        CHECK(h.h_bar[c] == doctest::Approx(0.5));
        CHECK(h.h_hat[c] == doctest::Approx(0.5));
        CHECK(h.h_prime[c] == doctest::Approx(-1.0 / (4 * 0.3)));
    }
    const auto next = eng.interaction_halfstep(s);
    for (double v : next.x_self)
        CHECK(v == 0.0);
    for (double v : next.x_cross)
        CHECK(v == 0.0);
    const auto iiii = MomentKey::parse("x2_IIII[1]").value();
    CHECK(eng.second(next, iiii) == doctest::Approx(1.3888888888888888e-05).epsilon(1e-12));
    CHECK(eng.second(next, iiii) ==
          doctest::Approx((58.0 / 870.0) * 0.25 * (0.0025 / 3.0)).epsilon(1e-12));

    ModelParams quiet = p;
    quiet.delta = 0.0;
    quiet.gossip = 2;
    MomentEngine qe(quiet);
    auto z = qe.init_moments(InitialCondition(3, 0.0));
    for (int t = 0; t < 20; ++t)
        z = qe.step(z);
    for (double v : z.second)
        CHECK(v == 0.0);
    for (double v : z.x_cross)
        CHECK(v == 0.0);
}

TEST_CASE("offsets enter through the influence argument")
{
    ModelParams p;
    p.n_groups = 3;
    p.group_size = 10;
    MomentEngine eng(p);
    const double lv[] = {-0.5, 0.0, 0.5};
    const auto init = InitialCondition::shared_levels(lv);
    const auto s = eng.init_moments(init);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(s.offsets(i, j) == lv[j]);
    const auto h = eng.influence_table(s);
    CHECK(h.bar(0, 1) == doctest::Approx(0.8411308951190849).epsilon(1e-14));
    CHECK(h.hat(0, 1) == h.bar(0, 1));
    CHECK_THROWS_AS(eng.init_moments(InitialCondition(3, std::vector<double>{0, 0.1, 0, 0, 0, 0,
                                                                             0, 0, 0})),
                    ParameterError);
    CHECK_THROWS_AS(eng.init_moments(InitialCondition(2, 0.0)), ParameterError);
}

TEST_CASE("printed self-opinion equations")
{
    // Hand-written forms of the x_ii^2 updates, used as an independent check
    // of the generated programme.
    ModelParams p;
    p.n_groups = 2;
    p.group_size = 4;
    p.delta = 0.07;
    p.mu = 0.97;
    MomentEngine eng(p);
    GroupLayout layout(p);
    std::mt19937_64 rng(8);
    const auto a = oracle::random_matrix(8, rng, 0.4);
    const auto s = state_of(eng, a, layout);
    InfluenceTable tab;
    tab.n_groups = 2;
    tab.h_hat = {0.3, 0.6, 0.45, 0.2};
    tab.h_bar = tab.h_hat;
    tab.h_prime.assign(4, 0.0);
    const auto half = eng.interaction_halfstep(s, tab);
    const double nc = static_cast<double>(p.couples());
    const int n = p.group_size;
    for (int I = 0; I < 2; ++I) {
        const int gi[] = {I};
        const auto iiii = MomentKey::of_product({0, 0}, {0, 0}, std::span<const int>(gi, 1));
        double expect = eng.second(s, iiii);
        for (int J = 0; J < 2; ++J) {
            const int g2[] = {I, J};
            const double hh = tab.hat(I, J);
            const auto jiji = MomentKey::of_product({1, 0}, {1, 0}, g2);
            const auto iiji = MomentKey::of_product({0, 0}, {1, 0}, g2);
            expect += 2.0 * (n - (I == J)) / nc *
                      ((hh * hh - 2 * hh) * eng.second(s, iiii) + hh * hh * eng.second(s, jiji) +
                       2 * (1 - hh) * hh * eng.second(s, iiji) +
                       hh * hh * p.delta * p.delta / 3.0);
        }
        CHECK(eng.second(half, iiii) == doctest::Approx(expect).epsilon(1e-13));

        const auto full = eng.attraction_fullstep(half);
        const int gg[] = {I, I};
        const auto iijj = MomentKey::of_product({0, 0}, {1, 1}, gg);
        const double mu2 = p.mu * p.mu;
        const double att = (mu2 + (1 - mu2) / n) * eng.second(half, iiii) +
                           (1 - mu2) * (n - 1) / n * eng.second(half, iijj);
        CHECK(eng.second(full, iiii) == doctest::Approx(att).epsilon(1e-13));
    }
}

TEST_CASE("group relabelling commutes with both steps")
{
    ModelParams p;
    p.n_groups = 3;
    p.group_size = 4;
    p.gossip = 2;
    MomentEngine eng(p);
    GroupLayout layout(p);
    std::mt19937_64 rng(12);
    const auto a = oracle::random_matrix(12, rng, 0.3);
    // permuted matrix: group g of a becomes group perm[g]
    const int perm[] = {2, 0, 1};
    OpinionMatrix b(12);
    auto map = [&](int agent) { return perm[agent / 4] * 4 + agent % 4; };
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            b(map(i), map(j)) = a(i, j);
    const auto sa = eng.step(state_of(eng, a, layout));
    const auto sb = eng.step(state_of(eng, b, layout));
    for (int g = 0; g < 3; ++g)
        CHECK(sb.self(perm[g]) == doctest::Approx(sa.self(g)).epsilon(1e-12));
    for (int h = 0; h < 3; ++h)
        for (int t = 0; t < 3; ++t)
            CHECK(sb.cross(perm[h], perm[t]) == doctest::Approx(sa.cross(h, t)).epsilon(1e-12));
    const auto cat = eng.system().catalog();
    for (std::size_t m = 0; m < cat.size(); ++m) {
        int g[4];
        for (int r = 0; r < cat[m].role_count(); ++r)
            g[r] = perm[cat[m].group_of_role(r)];
        const auto moved = MomentKey::of_product(cat[m].first(), cat[m].second(),
                                                 std::span<const int>(g, cat[m].role_count()));
        CHECK(eng.second(sb, moved) == doctest::Approx(sa.second[m]).epsilon(1e-12));
    }
}

TEST_CASE("integration records")
{
    ModelParams p;
    p.n_groups = 2;
    p.group_size = 5;
    MomentEngine eng(p);
    const auto init = InitialCondition(2, 0.0);
    CHECK(eng.integrate(init, 0).size() == 1);
    const auto tr = eng.integrate(init, 25, 10);
    REQUIRE(tr.size() == 4);
    CHECK(tr[1].t == 10.0);
    CHECK(tr[3].t == 25.0);
    for (const auto& s : tr)
        CHECK(s.self(0) == doctest::Approx(s.self(1)).epsilon(1e-13));
    const auto again = eng.integrate(init, 25, 10);
    CHECK(again.back().second == tr.back().second);
    CHECK(eng.first_moment_names().size() == 6);
    CHECK(eng.second_moment_names().size() == eng.system().catalog().size());
}
