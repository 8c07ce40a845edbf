#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <aldist/policy_opt.hpp>
#include <aldist/rng.hpp>
#include <aldist/rules.hpp>

using namespace aldist;

namespace {

double tv(const policy& a, const policy& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

margin_matrix rps(double c) {
  return margin_matrix(3, {0.0, c, -c, -c, 0.0, c, c, -c, 0.0});
}

policy random_simplex(const counter_rng& rng, std::uint64_t c, std::uint64_t tag, std::size_t m) {
  std::vector<double> e(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += e[i] = -std::log(1.0 - rng.uniform(c, tag, i) + 1e-15);
  for (double& v : e) v /= s;
  return policy(std::move(e));
}

}  // namespace

TEST_CASE("kl divergence basics") {
  const policy ref({0.2, 0.3, 0.5});
  CHECK(kl_div(ref, ref) == 0.0);
  CHECK(kl_div(policy::point_mass(3, 0), ref) == Catch::Approx(std::log(5.0)).margin(1e-14));
  // Direct-sum oracle.
  const policy pi({0.1, 0.6, 0.3});
  const double expect = 0.1 * std::log(0.1 / 0.2) + 0.6 * std::log(0.6 / 0.3) +
                        0.3 * std::log(0.3 / 0.5);
  CHECK(kl_div(pi, ref) == Catch::Approx(expect).margin(1e-14));
  CHECK_THROWS(kl_ball(policy({1.0, 0.0}), 0.5));  // zero reference mass
  CHECK_THROWS(kl_ball(ref, -0.1));
}

TEST_CASE("regularized linear max is the Gibbs policy") {
  const policy ref = policy::uniform(2);
  const policy g = regularized_linear_max({1.0, 0.0}, ref, 1.0);
  CHECK(g[0] == Catch::Approx(0.73105857863000488).margin(1e-15));  // sigmoid(1)
  CHECK(g[1] == Catch::Approx(0.26894142136999512).margin(1e-15));

  const policy ref2({0.15, 0.25, 0.6});
  CHECK(tv(regularized_linear_max({0.3, -0.9, 0.5}, ref2, 1e9), ref2) <= 1e-8);
  const policy cold = regularized_linear_max({0.3, -0.9, 0.5}, policy::uniform(3), 1e-9);
  CHECK(tv(cold, policy::point_mass(3, 2)) <= 1e-8);
}

TEST_CASE("linear max over ball: corners") {
  const policy ref({0.5, 0.3, 0.2});
  const std::vector<double> r = {0.2, 0.9, 0.1};
  const ball_opt_result at_zero = linear_max_over_ball(r, kl_ball(ref, 0.0));
  CHECK(tv(at_zero.pi, ref) == 0.0);
  CHECK(at_zero.kl == 0.0);

  // Budget large enough to reach the vertex.
  const ball_opt_result wide = linear_max_over_ball(r, kl_ball(policy::uniform(3), std::log(3.0)));
  CHECK(tv(wide.pi, policy::point_mass(3, 1)) <= 1e-12);
  CHECK(wide.value == Catch::Approx(0.9).margin(1e-12));

  // Tied argmax: the limit policy splits the argmax set proportionally to the
  // reference and the budget needed is strictly below log m.
  const ball_opt_result tied =
      linear_max_over_ball({1.0, 1.0, 0.0}, kl_ball(policy({0.25, 0.5, 0.25}), 50.0));
  CHECK(tied.pi[0] == Catch::Approx(1.0 / 3).margin(1e-12));
  CHECK(tied.pi[1] == Catch::Approx(2.0 / 3).margin(1e-12));
  CHECK(tied.pi[2] <= 1e-15);
  CHECK(tied.kl == Catch::Approx(-std::log(0.75)).margin(1e-12));
}

TEST_CASE("linear max over ball matches a fine grid oracle") {
  const counter_rng rng(808);
  for (std::uint64_t c = 0; c < 20; ++c) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform(c, 0) * 4.0);
    std::vector<double> r(m);
    for (std::size_t i = 0; i < m; ++i) r[i] = 2.0 * rng.uniform(c, 1, i) - 1.0;
    const policy ref = random_simplex(rng, c, 2, m);
    const double tau = 0.01 + rng.uniform(c, 3);
    const kl_ball ball(ref, tau);
    const ball_opt_result res = linear_max_over_ball(r, ball, 1e-10);
    CHECK(res.kl <= tau + 1e-8);
    CHECK(res.value <= res.upper + 1e-12);

    double best = -1e300;
    for (int k = 0; k <= 100000; ++k) {
      const double lambda = std::pow(10.0, -12.0 + 24.0 * double(k) / 100000.0);
      const policy cand = regularized_linear_max(r, ref, lambda);
      if (kl_div(cand, ref) > tau) continue;
      double v = 0.0;
      for (std::size_t i = 0; i < m; ++i) v += r[i] * cand[i];
      best = std::max(best, v);
    }
    CHECK(res.value >= best - 1e-7);
  }
}

TEST_CASE("gibbs path kl is monotone in lambda") {
  const counter_rng rng(4242);
  for (std::uint64_t c = 0; c < 10; ++c) {
    std::vector<double> r(4);
    for (std::size_t i = 0; i < 4; ++i) r[i] = 2.0 * rng.uniform(c, 1, i) - 1.0;
    const policy ref = random_simplex(rng, c, 2, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 200; ++k) {
      const double lambda = std::pow(10.0, -12.0 + 24.0 * double(k) / 200.0);
      const double kl = kl_div(regularized_linear_max(r, ref, lambda), ref);
      CHECK(kl <= prev + 1e-10);
      prev = kl;
    }
  }
}

TEST_CASE("rlhf policy basics") {
  comparison_counts sym(3);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y)
      if (x != y) sym.at(x, y) = 5;
  const policy ref({0.6, 0.3, 0.1});
  const ball_opt_result res = rlhf_policy(sym, kl_ball(ref, 0.7));
  CHECK(tv(res.pi, ref) <= 1e-7);  // zero rewards keep the reference

  // Population mode with a full budget lands on the Borda winner.
  const instance inst(utility_mixture({0.5, 0.5}, {{0.9, 0.1, 0.3}, {0.4, 0.7, 0.2}}), 2.0,
                      pair_distribution::product_of_mu({0.3, 0.4, 0.3}));
  const win_rates rates = expected_win_rates(inst);
  const ball_opt_result pop =
      rlhf_policy(rates, inst.pairs, kl_ball(policy::uniform(3), std::log(3.0)));
  const std::vector<double> bc = limiting_borda(rates, inst.pairs.mu());
  const std::size_t winner = std::max_element(bc.begin(), bc.end()) - bc.begin();
  CHECK(pop.pi[winner] >= 1.0 - 1e-10);
}

TEST_CASE("dpo equals constrained rlhf at the solved multiplier") {
  const counter_rng rng(616);
  comparison_counts counts(4);
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t y = 0; y < 4; ++y)
      if (x != y) counts.at(x, y) = 1 + static_cast<std::uint64_t>(rng.uniform(x, y) * 30.0);
  const policy ref({0.4, 0.25, 0.2, 0.15});
  comparison_counts sym(2);
  sym.at(0, 1) = sym.at(1, 0) = 3;
  CHECK(tv(dpo_policy(sym, policy({0.7, 0.3}), 2.0), policy({0.7, 0.3})) <= 1e-9);

  const kl_ball ball(ref, 0.05);  // small budget, so the constraint binds
  const ball_opt_result rlhf = rlhf_policy(counts, ball);
  REQUIRE(std::isfinite(rlhf.lambda));
  const policy dpo = dpo_policy(counts, ref, rlhf.lambda);
  CHECK(tv(dpo, rlhf.pi) <= 1e-8);
}

TEST_CASE("nlhf policy corners and certificates") {
  const margin_matrix M = rps(0.6);
  const policy ref({0.5, 0.25, 0.25});
  const nlhf_result at_zero = nlhf_policy(M, kl_ball(ref, 0.0));
  CHECK(tv(at_zero.pi, ref) == 0.0);

  const nlhf_result zero_game =
      nlhf_policy(margin_matrix(3, std::vector<double>(9, 0.0)), kl_ball(ref, 0.4));
  CHECK(tv(zero_game.pi, ref) == 0.0);

  const kl_ball wide(policy::uniform(3), std::log(3.0));
  const nlhf_result eq = nlhf_policy(M, wide);
  CHECK(tv(eq.pi, maximal_lotteries(M).pi) <= 1e-8);  // unique equilibrium
  CHECK(eq.exploitability <= 1e-9);
  CHECK(eq.kl <= wide.tau + 1e-8);

  // Self-play value vanishes by antisymmetry.
  double self = 0.0;
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) self += eq.pi[x] * M(x, y) * eq.pi[y];
  CHECK(std::abs(self) <= 1e-12);
}

TEST_CASE("nlhf with a binding ball stays feasible and certified") {
  const counter_rng rng(7777);
  for (std::uint64_t c = 0; c < 15; ++c) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform(c, 0) * 4.0);
    std::vector<double> v(m * m, 0.0);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = x + 1; y < m; ++y) {
        const double d = 2.0 * rng.uniform(c, 1, x * 64 + y) - 1.0;
        v[x * m + y] = d;
        v[y * m + x] = -d;
      }
    const margin_matrix M(m, v);
    const policy ref = random_simplex(rng, c, 2, m);
    const double tau = 0.001 + 0.2 * rng.uniform(c, 3);
    const kl_ball ball(ref, tau);
    const nlhf_result res = nlhf_policy(M, ball, 1e-9);
    CHECK(res.kl <= tau + 1e-8);
    CHECK(res.exploitability <= 1e-9);
    CHECK(exploitability(res.pi, M, ball) <= 1e-9);
  }
}

TEST_CASE("exploitability certificate and grid oracle") {
  const margin_matrix M = rps(0.8);
  const kl_ball ball(policy::uniform(3), std::log(3.0));
  const policy pi({0.5, 0.3, 0.2});
  const double expl = exploitability(pi, M, ball);

  // Brute force over the simplex grid, keeping points inside the ball.
  double best = -1e300;
  const int steps = 400;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j + i <= steps; ++j) {
      const double a = double(i) / steps, b = double(j) / steps, c = 1.0 - a - b;
      std::vector<double> q = {a, b, c};
      double kl = 0.0;
      for (double x : q) kl += x > 0.0 ? x * std::log(x * 3.0) : 0.0;
      if (kl > ball.tau) continue;
      double v = 0.0;
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t t = 0; t < 3; ++t) v += q[s] * M(s, t) * pi[t];
      best = std::max(best, v);
    }
  }
  CHECK(std::abs(expl - best) <= 1e-4);

  // tau = 0: the only response is the reference.
  const kl_ball frozen(policy({0.2, 0.2, 0.6}), 0.0);
  double direct = 0.0;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t t = 0; t < 3; ++t) direct += frozen.pi_ref[s] * M(s, t) * pi[t];
  CHECK(exploitability(pi, M, frozen) == Catch::Approx(direct).margin(1e-14));
}

TEST_CASE("optimal policy is the ball maximizer of average utility") {
  const instance inst(utility_mixture({0.7, 0.3}, {{0.9, 0.2}, {0.1, 0.8}}), 2.0,
                      pair_distribution::product_of_mu({0.5, 0.5}));
  const policy ref({0.35, 0.65});
  const ball_opt_result at_zero = optimal_policy(inst, kl_ball(ref, 0.0));
  CHECK(tv(at_zero.pi, ref) == 0.0);
  CHECK(at_zero.value == Catch::Approx(avg_util_policy(inst, ref)).margin(1e-14));

  const std::vector<double> au = avg_util(inst);
  const std::size_t best = au[0] > au[1] ? 0 : 1;
  const ball_opt_result vertex =
      optimal_policy(inst, kl_ball(ref, std::log(1.0 / ref[best]) + 0.01));
  CHECK(vertex.pi[best] >= 1.0 - 1e-9);
}

TEST_CASE("regularized equilibrium certifies in its induced ball") {
  const counter_rng rng(1212);
  for (std::uint64_t c = 0; c < 10; ++c) {
    const std::size_t m = 3 + static_cast<std::size_t>(rng.uniform(c, 0) * 3.0);
    std::vector<double> v(m * m, 0.0);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = x + 1; y < m; ++y) {
        const double d = 2.0 * rng.uniform(c, 1, x * 64 + y) - 1.0;
        v[x * m + y] = d;
        v[y * m + x] = -d;
      }
    const margin_matrix M(m, v);
    const policy ref = random_simplex(rng, c, 2, m);
    const double lambda = std::pow(10.0, -1.0 + 2.0 * rng.uniform(c, 3));
    const detail::reg_equilibrium eq = detail::solve_regularized(M, ref, lambda, nullptr);
    REQUIRE(eq.residual <= 1e-10);
    const policy pi = detail::policy_from_log(eq.logpi);
    const kl_ball ball(ref, kl_div(pi, ref));
    CHECK(exploitability(pi, M, ball) <= 1e-7);
  }
}
