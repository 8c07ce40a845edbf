#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <aldist/rng.hpp>
#include <aldist/rules.hpp>
#include <aldist/zero_sum.hpp>

using namespace aldist;

namespace {

margin_matrix rps(double c) {
  return margin_matrix(3, {0.0, c, -c, -c, 0.0, c, c, -c, 0.0});
}

double worst_pure_response(const margin_matrix& M, const policy& pi) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < M.size(); ++y) {
    double v = 0.0;
    for (std::size_t x = 0; x < M.size(); ++x) v += pi[x] * M(x, y);
    worst = std::min(worst, v);
  }
  return worst;
}

}  // namespace

TEST_CASE("margin matrix validation") {
  CHECK_THROWS(margin_matrix(2, {0.0, 0.5, 0.5, 0.0}));   // not antisymmetric
  CHECK_THROWS(margin_matrix(2, {0.1, 0.5, -0.5, 0.0}));  // diagonal
  CHECK_THROWS(margin_matrix(2, {0.0, 1.5, -1.5, 0.0}));  // out of range
}

TEST_CASE("margins from win rates") {
  const win_rates rates(2, {0.5, 0.8, 0.2, 0.5});
  const margin_matrix M = margins(rates);
  CHECK(M(0, 1) == Catch::Approx(0.6).margin(1e-15));
  CHECK(M(0, 1) == -M(1, 0));
  CHECK(M(0, 0) == 0.0);

  const win_rates half(2, {0.5, 0.5, 0.5, 0.5});
  const margin_matrix Z = margins(half);
  CHECK(Z(0, 1) == 0.0);

  const win_rates sure(2, {0.5, 1.0, 0.0, 0.5});
  CHECK(margins(sure)(0, 1) == 1.0);
}

TEST_CASE("margins from counts use the exact count ratio") {
  comparison_counts counts(3);
  counts.at(0, 1) = 7;
  counts.at(1, 0) = 3;
  const margin_matrix M = margins(counts);
  CHECK(M(0, 1) == (7.0 - 3.0) / 10.0);
  CHECK(M(1, 0) == -M(0, 1));
  CHECK(M(0, 2) == 0.0);  // unobserved pair: neutral margin
  // Same thing through empirical rates agrees to rounding error.
  const margin_matrix Mr = margins(empirical_win_rates(counts));
  CHECK(std::abs(Mr(0, 1) - M(0, 1)) <= 1e-15);
}

TEST_CASE("borda scores with self pairs") {
  comparison_counts counts(2);
  counts.at(0, 0) = 2;
  counts.at(0, 1) = 3;
  counts.at(1, 0) = 1;
  const borda_scores_result res = borda_scores(counts);
  // Self-pairs add one win and two slots: (2+3)/(4+4), (0+1)/(0+4).
  CHECK(res.scores[0] == Catch::Approx(5.0 / 8.0).margin(1e-15));
  CHECK(res.scores[1] == Catch::Approx(1.0 / 4.0).margin(1e-15));
  CHECK(res.observed[0] == 1);
  CHECK(res.observed[1] == 1);
}

TEST_CASE("borda score of an unobserved alternative is one half") {
  comparison_counts counts(3);
  counts.at(0, 1) = 2;
  counts.at(1, 0) = 2;
  const borda_scores_result res = borda_scores(counts);
  CHECK(res.scores[0] == 0.5);  // balanced
  CHECK(res.scores[1] == 0.5);
  CHECK(res.scores[2] == 0.5);  // never compared
  CHECK(res.observed[2] == 0);
}

TEST_CASE("limiting borda formula") {
  // BC*(x) = mu(x)/2 + sum_{y != x} mu(y) p(x over y).
  const win_rates rates(3, {0.5, 0.9, 0.4, 0.1, 0.5, 0.7, 0.6, 0.3, 0.5});
  const std::vector<double> mu = {0.2, 0.3, 0.5};
  const std::vector<double> bc = limiting_borda(rates, mu);
  CHECK(bc[0] == Catch::Approx(0.1 + 0.3 * 0.9 + 0.5 * 0.4).margin(1e-15));
  CHECK(bc[1] == Catch::Approx(0.15 + 0.2 * 0.1 + 0.5 * 0.7).margin(1e-15));
  CHECK(bc[2] == Catch::Approx(0.25 + 0.2 * 0.6 + 0.3 * 0.3).margin(1e-15));

  const win_rates half(2, {0.5, 0.5, 0.5, 0.5});
  const std::vector<double> flat = limiting_borda(half, {0.5, 0.5});
  CHECK(flat[0] == 0.5);
  CHECK(flat[1] == 0.5);
}

TEST_CASE("limiting borda matches large-sample scores") {
  const instance inst(utility_mixture({0.5, 0.5}, {{0.9, 0.1, 0.4}, {0.2, 0.8, 0.5}}), 2.0,
                      pair_distribution::product_of_mu({0.3, 0.3, 0.4}));
  const std::vector<double> bc = limiting_borda(expected_win_rates(inst), inst.pairs.mu());
  const comparison_counts counts = sample_comparisons(inst, 10000000, 1, 42);
  const std::vector<double> sc = borda_scores(counts).scores;
  for (std::size_t x = 0; x < 3; ++x) CHECK(std::abs(sc[x] - bc[x]) <= 0.002);
}

TEST_CASE("borda rule tie handling") {
  CHECK(borda_rule({0.2, 0.9, 0.4}, 1e-9)[1] == 1.0);
  const policy two = borda_rule({0.5, 0.5, 0.2}, 1e-9);
  CHECK(two[0] == 0.5);
  CHECK(two[1] == 0.5);
  CHECK(two[2] == 0.0);
  const double tol = 1e-6;
  const policy window = borda_rule({0.5, 0.5 + tol / 2.0, 0.3}, tol);
  CHECK(window[0] == 0.5);
  CHECK(window[1] == 0.5);
}

TEST_CASE("maximal lotteries on canonical games") {
  const equilibrium_result zero = maximal_lotteries(margin_matrix(3, std::vector<double>(9, 0.0)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(zero.pi[i] == Catch::Approx(1.0 / 3).margin(1e-15));

  const equilibrium_result cyc = maximal_lotteries(rps(0.4));
  for (std::size_t i = 0; i < 3; ++i) CHECK(cyc.pi[i] == Catch::Approx(1.0 / 3).margin(1e-9));
  CHECK(cyc.exploitability <= 1e-9);

  // Strict Condorcet winner: row 0 dominates.
  const margin_matrix dom(3, {0.0, 0.3, 0.6, -0.3, 0.0, 0.2, -0.6, -0.2, 0.0});
  const equilibrium_result point = maximal_lotteries(dom);
  CHECK(point.pi[0] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("maximal lotteries certificate on random games") {
  const counter_rng rng(31337);
  for (std::uint64_t c = 0; c < 40; ++c) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform(c, 0) * 6.0);
    std::vector<double> v(m * m, 0.0);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = x + 1; y < m; ++y) {
        const double d = 2.0 * rng.uniform(c, 1, x * 64 + y) - 1.0;
        v[x * m + y] = d;
        v[y * m + x] = -d;
      }
    const margin_matrix M(m, v);
    const equilibrium_result eq = maximal_lotteries(M);
    CHECK(eq.exploitability <= 1e-9);
    CHECK(worst_pure_response(M, eq.pi) >= -1e-9);

    // The LP solver is an independent oracle: its strategy also certifies.
    const std::vector<double> lp = zero_sum::solve_lp(M.data(), m);
    CHECK(worst_pure_response(M, policy(lp)) >= -1e-9);
  }
}

TEST_CASE("maximal lotteries is scale invariant as a certificate") {
  const margin_matrix M(3, {0.0, 0.5, -0.2, -0.5, 0.0, 0.7, 0.2, -0.7, 0.0});
  std::vector<double> scaled(9);
  for (std::size_t i = 0; i < 9; ++i) scaled[i] = 0.1 * M.data()[i];
  const equilibrium_result eq = maximal_lotteries(margin_matrix(3, scaled), 1e-10);
  // The scaled-game equilibrium also certifies for the original game.
  CHECK(worst_pure_response(M, eq.pi) >= -1e-9);
}
