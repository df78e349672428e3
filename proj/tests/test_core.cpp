#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "bicb/core.hpp"
#include "bicb/synth.hpp"

using namespace bicb;
using Catch::Approx;

namespace {

Campaign bounded(double cu, double cl) {
  Campaign c;
  c.id = "t";
  c.budget = 100;
  c.cpc_upper = cu;
  c.cpc_lower = cl;
  return c;
}

}  // namespace

TEST_CASE("bid_price evaluates the dual formula") {
  CHECK(bid_price(DualVars{1, 0, 0}, bounded(2, 0), 0.5) == Approx(1.0));
  CHECK(bid_price(DualVars{0.5, 0.25, 0}, bounded(2, 1), 0.3) == Approx((0.6 + 0.5) / 0.75));
  CHECK(bid_price(DualVars{1, 0, 0.5}, bounded(2, 1), 0.4) == Approx(0.6));
}

TEST_CASE("bid_price rejects a nonpositive denominator") {
  CHECK_THROWS_AS(bid_price(DualVars{0, 0, 0}, bounded(2, 1), 0.5), DegenerateDualsError);
  CHECK_THROWS_AS(bid_price(DualVars{1, 0, 2}, bounded(2, 1), 0.5), DegenerateDualsError);
  CHECK_THROWS_AS(to_bid_params(DualVars{1, 0, 1}, bounded(2, 1)), DegenerateDualsError);
  CHECK_THROWS_AS(win_decision(DualVars{0.5, 0, 0.5}, bounded(2, 1), Impression{0, 1, 1, 0.5}),
                  DegenerateDualsError);
}

TEST_CASE("to_bid_params matches the closed form") {
  const BidParams a = to_bid_params(DualVars{1, 0, 0}, bounded(2, 0));
  CHECK(a.alpha == Approx(2.0));
  CHECK(a.beta == Approx(0.0));

  const BidParams b = to_bid_params(DualVars{0.5, 0.25, 0}, bounded(2, 1));
  CHECK(b.alpha == Approx(8.0 / 3.0));
  CHECK(b.beta == Approx(2.0 / 3.0));

  const BidParams c = to_bid_params(DualVars{2, 0, 1}, bounded(2, 1));
  CHECK(c.alpha == Approx(2.0));
  CHECK(c.beta == Approx(-1.0));
}

TEST_CASE("win_decision is strict at the threshold") {
  const Campaign c = bounded(2, 0);
  CHECK(win_decision(DualVars{1, 0, 0}, c, Impression{0, 1, 1.0, 0.6}));
  CHECK_FALSE(win_decision(DualVars{1, 0, 0}, c, Impression{0, 1, 1.0, 0.5}));  // exact tie
  CHECK_FALSE(win_decision(DualVars{0.5, 0.25, 0}, bounded(2, 1), Impression{0, 1, 1.5, 0.3}));
}

TEST_CASE("effective_cpc with the zero-click convention") {
  CHECK(effective_cpc(AccumStats{150, 100, 0, 0, 0}) == Approx(1.5));
  CHECK(effective_cpc(AccumStats{}) == 0.0);
  CHECK(effective_cpc(AccumStats{240477, 160318, 0, 0, 0}) == Approx(1.50).epsilon(1e-9));
}

TEST_CASE("epsilon_c formula and edge cases") {
  Campaign c = bounded(2, 1.2);
  c.budget = 300;
  CHECK(epsilon_c(c, 3.0) == Approx(8.0 / 296.0).epsilon(1e-12));
  c.cpc_lower = 0;
  CHECK(epsilon_c(c, 3.0) == Approx(8.0 / 296.0).epsilon(1e-12));
  c.cpc_lower = 1.2;
  c.budget = 1e9;
  CHECK(epsilon_c(c, 3.0) < 1e-8);

  c.budget = 3.9;  // not above 2*C_u
  CHECK_THROWS_AS(epsilon_c(c, 3.0), ConfigError);
  Campaign open = bounded(kInf, 0);
  CHECK_THROWS_AS(epsilon_c(open, 3.0), ConfigError);
}

TEST_CASE("epsilon_c is nonincreasing in the budget") {
  Campaign c = bounded(2, 1.2);
  std::mt19937_64 gen(7);
  double prev = kInf;
  for (double b = 5; b < 1e6; b *= 1.7 + rng::uniform(gen)) {
    c.budget = b;
    const double eps = epsilon_c(c, 3.0);
    CHECK(eps <= prev + 1e-15);
    prev = eps;
  }
}

TEST_CASE("bid_price and bid params agree on random inputs") {
  std::mt19937_64 gen(42);
  for (int i = 0; i < 10000; ++i) {
    DualVars d;
    d.p = 0.01 + 3 * rng::uniform(gen);
    if (gen() % 2) {
      d.q_u = 2 * rng::uniform(gen);
    } else {
      d.q_l = rng::uniform(gen) * d.p * 0.9;  // keep the denominator positive
    }
    const Campaign c = bounded(0.5 + 3 * rng::uniform(gen), 0.2 * rng::uniform(gen));
    const double obj = rng::uniform(gen);
    const BidParams params = to_bid_params(d, c);
    const double direct = bid_price(d, c, obj);
    CHECK(std::abs(direct - params.bid(obj)) <= 1e-9 * std::max(1.0, std::abs(direct)));

    const Impression imp{0, 1.0, 0.05 + 2 * rng::uniform(gen), obj};
    CHECK(win_decision(d, c, imp) == (bid_price(d, c, obj) > imp.wp));
  }
}

TEST_CASE("decisions depend on duals only through the bid parameters") {
  // Two distinct dual triples with identical (alpha, beta): shift both q's
  // by (t*C_l, t*C_u) and move p to keep the denominator fixed.
  std::mt19937_64 gen(11);
  for (int i = 0; i < 1000; ++i) {
    const Campaign c = bounded(1 + 2 * rng::uniform(gen), 0.1 + 0.5 * rng::uniform(gen));
    DualVars a{0.5 + rng::uniform(gen), 0.5 * rng::uniform(gen), 0};
    const double t = 0.5 * rng::uniform(gen);
    DualVars b{a.p + t * (c.cpc_upper - c.cpc_lower), a.q_u + t * c.cpc_lower,
               a.q_l + t * c.cpc_upper};
    const BidParams pa = to_bid_params(a, c);
    const BidParams pb = to_bid_params(b, c);
    REQUIRE(pa.alpha == Approx(pb.alpha).epsilon(1e-12));
    REQUIRE(pa.beta == Approx(pb.beta).margin(1e-12));
    const Impression imp{0, 1.0, 0.05 + 2 * rng::uniform(gen), rng::uniform(gen)};
    CHECK(win_decision(a, c, imp) == win_decision(b, c, imp));
  }
}

TEST_CASE("campaign validation") {
  Campaign c = bounded(2, 1);
  c.budget = 0;
  CHECK_THROWS_AS(validate_campaign(c), ConfigError);
  c.budget = 10;
  c.cpc_lower = 2.5;
  CHECK_THROWS_AS(validate_campaign(c), ConfigError);
  c.cpc_lower = 1;
  c.start_step = 5;
  c.end_step = 3;
  CHECK_THROWS_AS(validate_campaign(c), ConfigError);
  c.end_step = 5;
  CHECK_NOTHROW(validate_campaign(c));
}
