#include "doctest.h"

#include <cmath>

#include "groupop/core.hpp"

using namespace groupop;

TEST_CASE("influence values")
{
    CHECK(influence(0.0, 0.3) == doctest::Approx(0.5));
    CHECK(influence(0.0, 7.0) == doctest::Approx(0.5));
    CHECK(influence(0.3, 0.3) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));
    CHECK(influence(-0.5, 0.3) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-5.0 / 3.0))).epsilon(1e-14));
    CHECK(influence(0.3, 0.3) == doctest::Approx(0.2689414213699951).epsilon(1e-14));
    CHECK(influence(-0.5, 0.3) == doctest::Approx(0.8411308951190849).epsilon(1e-14));
}

TEST_CASE("influence is decreasing and bounded")
{
    double prev = 2.0;
    for (double u = -2.0; u <= 2.0; u += 0.01) {
        const double h = influence(u, 0.3);
        CHECK(h > 0.0);
        CHECK(h < 1.0);
        CHECK(h < prev);
        CHECK(influence(u, 0.3) + influence(-u, 0.3) == doctest::Approx(1.0));
        prev = h;
    }
    CHECK(influence(1000.0, 0.3) >= 0.0);
    CHECK(influence(-1000.0, 0.3) <= 1.0);
}

TEST_CASE("influence derivative")
{
    CHECK(influence_derivative(0.0, 0.3) == doctest::Approx(-1.0 / (4.0 * 0.3)));
    CHECK(influence_derivative(0.3, 0.3) == doctest::Approx(influence_derivative(-0.3, 0.3)));
    const double e = 1e-5;
    const double fd = (influence(0.3 + e, 0.3) - influence(0.3 - e, 0.3)) / (2 * e);
    CHECK(std::abs(fd - influence_derivative(0.3, 0.3)) < 1e-8);
    for (double u = -3.0; u <= 3.0; u += 0.25)
        CHECK(influence_derivative(u, 0.3) < 0.0);
    CHECK(std::isfinite(influence_derivative(500.0, 0.3)));
}

TEST_CASE("influence rejects bad arguments")
{
    CHECK_THROWS_AS(influence(0.0, 0.0), ParameterError);
    CHECK_THROWS_AS(influence(0.0, -1.0), ParameterError);
    CHECK_THROWS_AS(influence(NAN, 0.3), ParameterError);
    CHECK_THROWS_AS(influence_derivative(INFINITY, 0.3), ParameterError);
}

TEST_CASE("parameter validation")
{
    ModelParams p;
    CHECK(validate(p).ok());
    CHECK(p.agents() == 40);
    CHECK(p.couples() == 40 * 39);
    CHECK(p.triples() == 40 * 39 * 38);

    ModelParams bad = p;
    bad.sigma = 0.0;
    auto r = validate(bad);
    REQUIRE_FALSE(r.ok());
    bool found = false;
    for (const auto& e : r.errors)
        found = found || e == "sigma must be positive";
    CHECK(found);
    CHECK_THROWS_AS(require_valid(bad), ParameterError);

    ModelParams crowded;
    crowded.n_groups = 1;
    crowded.group_size = 5;
    crowded.gossip = 5;
    CHECK_FALSE(validate(crowded).ok());
    crowded.gossip = 3;
    CHECK(validate(crowded).ok());

    ModelParams small;
    small.n_groups = 2;
    small.group_size = 3;
    small.gossip = 2;
    auto w = validate(small);
    CHECK(w.ok());
    CHECK_FALSE(w.warnings.empty());

    ModelParams several = p;
    several.delta = -1.0;
    several.mu = 1.5;
    CHECK(validate(several).errors.size() >= 2);

    ModelParams lonely;
    lonely.n_groups = 1;
    lonely.group_size = 1;
    CHECK_FALSE(validate(lonely).ok());
}

TEST_CASE("layout and initial conditions")
{
    GroupLayout l(3, 4);
    CHECK(l.agents() == 12);
    CHECK(l.group_of(0) == 0);
    CHECK(l.group_of(7) == 1);
    CHECK(l.begin(2) == 8);
    CHECK(l.end(2) == 12);

    const double levels[] = {-0.5, 0.0, 0.5};
    const auto init = InitialCondition::shared_levels(levels);
    CHECK(init.shared_by_holders());
    const auto m = init.expand(l);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            CHECK(m(i, j) == levels[l.group_of(j)]);

    InitialCondition zero(2);
    const auto z = zero.expand(GroupLayout(2, 3));
    for (double v : z.values())
        CHECK(v == 0.0);

    InitialCondition skew(2, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    CHECK_FALSE(skew.shared_by_holders());
    const auto s = skew.expand(GroupLayout(2, 2));
    CHECK(s(0, 0) == 0.1);
    CHECK(s(1, 1) == 0.1);  // self-opinions use the group's own diagonal level
    CHECK(s(0, 2) == 0.2);
    CHECK(s(2, 0) == 0.3);
    CHECK(s(3, 3) == 0.4);

    CHECK_THROWS_AS(InitialCondition(2, std::vector<double>{0, 0, 0, 1.5}), ParameterError);
    CHECK_THROWS_AS(InitialCondition(2, std::vector<double>{0, 0, 0}), ParameterError);
}
