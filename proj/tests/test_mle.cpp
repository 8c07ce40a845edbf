#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include <aldist/instances.hpp>
#include <aldist/math.hpp>
#include <aldist/mle.hpp>
#include <aldist/model.hpp>
#include <aldist/rng.hpp>
#include <aldist/rules.hpp>

using namespace aldist;

namespace {

double nll(const comparison_counts& counts, const std::vector<double>& r) {
  double f = 0.0;
  for (std::size_t x = 0; x < counts.size(); ++x)
    for (std::size_t y = 0; y < counts.size(); ++y)
      if (x != y && counts(x, y) > 0)
        f -= double(counts(x, y)) * log_sigmoid(r[x] - r[y]);
  return f;
}

// Plain projected gradient descent on the (convex) negative log-likelihood,
// centered each step. Slow but entirely independent of the Newton path.
std::vector<double> gd_oracle(const comparison_counts& counts) {
  const std::size_t m = counts.size();
  std::vector<double> r(m, 0.0);
  double step = 0.5;
  double f = nll(counts, r);
  for (int it = 0; it < 200000; ++it) {
    std::vector<double> g(m, 0.0);
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = 0; y < m; ++y)
        if (x != y && counts(x, y) > 0) {
          const double s = sigmoid(r[x] - r[y]);
          g[x] -= double(counts(x, y)) * (1.0 - s);
          g[y] += double(counts(x, y)) * (1.0 - s);
        }
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax <= 1e-12) break;
    std::vector<double> cand(m);
    bool stalled = false;
    for (;;) {
      for (std::size_t i = 0; i < m; ++i) cand[i] = r[i] - step * g[i];
      const double fc = nll(counts, cand);
      if (fc <= f) {
        r = cand;
        f = fc;
        step *= 1.2;
        break;
      }
      step *= 0.5;
      if (step < 1e-14) {
        stalled = true;  // progress below double precision
        break;
      }
    }
    if (stalled) break;
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / double(m);
    for (double& v : r) v -= mean;
  }
  return r;
}

}  // namespace

TEST_CASE("two alternatives give the closed-form log odds") {
  comparison_counts counts(2);
  counts.at(0, 1) = 3;
  counts.at(1, 0) = 1;
  mle_options opt;
  opt.ridge = 0.0;
  const rewards r = fit_bt_mle(counts, opt);
  CHECK(r.r[0] - r.r[1] == Catch::Approx(1.0986122886681097).margin(1e-9));  // log 3
  CHECK(sigmoid(r.r[0] - r.r[1]) == Catch::Approx(0.75).margin(1e-10));
  CHECK(std::abs(r.r[0] + r.r[1]) <= 1e-10);  // zero mean
}

TEST_CASE("symmetric counts fit to zero") {
  comparison_counts counts(3);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y)
      if (x != y) counts.at(x, y) = 4;
  const rewards r = fit_bt_mle(counts);
  for (double v : r.r) CHECK(std::abs(v) <= 1e-9);
}

TEST_CASE("diagonal self-pairs carry no reward information") {
  comparison_counts a(2), b(2);
  a.at(0, 1) = b.at(0, 1) = 5;
  a.at(1, 0) = b.at(1, 0) = 2;
  b.at(0, 0) = 17;
  b.at(1, 1) = 3;
  const rewards ra = fit_bt_mle(a), rb = fit_bt_mle(b);
  CHECK(ra.r[0] == rb.r[0]);
  CHECK(ra.r[1] == rb.r[1]);
}

TEST_CASE("random counts match an independent descent oracle") {
  const counter_rng rng(2024);
  for (std::uint64_t c = 0; c < 10; ++c) {
    comparison_counts counts(3);
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t y = 0; y < 3; ++y)
        if (x != y) counts.at(x, y) = 1 + static_cast<std::uint64_t>(rng.uniform(c, x * 8 + y) * 20.0);
    mle_options opt;
    opt.ridge = 0.0;
    const rewards r = fit_bt_mle(counts, opt);
    const std::vector<double> oracle = gd_oracle(counts);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(r.r[i] - oracle[i]) <= 1e-6);
    // Never worse than the trivial solution.
    CHECK(nll(counts, r.r) <= nll(counts, std::vector<double>(3, 0.0)) + 1e-12);
  }
}

TEST_CASE("separable data raises a divergence error naming the set") {
  comparison_counts counts(3);
  counts.at(0, 1) = 5;  // 0 never loses
  counts.at(1, 2) = 3;
  counts.at(2, 1) = 2;
  mle_options opt;
  opt.ridge = 0.0;
  bool threw = false;
  try {
    fit_bt_mle(counts, opt);
  } catch (const divergence_error& e) {
    threw = true;
    REQUIRE(e.dominant_set().size() == 1);
    CHECK(e.dominant_set()[0] == 0);
    CHECK(std::string(e.what()).find("ridge") != std::string::npos);
  }
  CHECK(threw);
  // The default ridge regularizes the same data to a finite fit.
  const rewards r = fit_bt_mle(counts);
  CHECK(std::isfinite(r.r[0]));
  CHECK(r.r[0] > r.r[1]);
}

TEST_CASE("population fit: flat rates give zero rewards") {
  const std::size_t m = 4;
  const win_rates half(m, std::vector<double>(m * m, 0.5));
  const rewards r = fit_bt_mle_population(half, pair_distribution::product_of_mu(
                                                    std::vector<double>(m, 0.25)));
  for (double v : r.r) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("population fit satisfies the stationarity conditions") {
  const instance inst(utility_mixture({0.5, 0.3, 0.2},
                                      {{0.9, 0.2, 0.5, 0.1}, {0.1, 0.8, 0.3, 0.6}, {0.4, 0.4, 0.9, 0.2}}),
                      3.0, pair_distribution::product_of_mu({0.1, 0.2, 0.3, 0.4}));
  const win_rates rates = expected_win_rates(inst);
  const rewards r = fit_bt_mle_population(rates, inst.pairs, 1e-11);
  for (std::size_t x = 0; x < 4; ++x) {
    double resid = 0.0;
    for (std::size_t y = 0; y < 4; ++y) {
      if (y == x) continue;
      resid += inst.pairs.pair_prob(x, y) * (rates(x, y) - sigmoid(r.r[x] - r.r[y]));
    }
    CHECK(std::abs(resid) <= 1e-10);
  }
  CHECK(std::abs(std::accumulate(r.r.begin(), r.r.end(), 0.0)) <= 1e-10);
}

TEST_CASE("population rewards are ordered like limiting borda scores") {
  const counter_rng rng(5150);
  for (std::uint64_t c = 0; c < 25; ++c) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform(c, 0) * 5.0);
    std::vector<double> w = {0.35, 0.65};
    std::vector<std::vector<double>> utils(2, std::vector<double>(m));
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t x = 0; x < m; ++x) utils[k][x] = rng.uniform(c, 1, k * 64 + x);
    std::vector<double> mu(m);
    double s = 0.0;
    for (std::size_t x = 0; x < m; ++x) s += mu[x] = 0.2 + rng.uniform(c, 2, x);
    for (double& v : mu) v /= s;
    const instance inst(utility_mixture(w, utils), 4.0, pair_distribution::product_of_mu(mu));
    const win_rates rates = expected_win_rates(inst);
    const rewards r = fit_bt_mle_population(rates, inst.pairs, 1e-11);
    const std::vector<double> bc = limiting_borda(rates, inst.pairs.mu());
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t y = 0; y < m; ++y) {
        if (bc[x] > bc[y] + 1e-12) CHECK(r.r[x] > r.r[y] - 1e-8);
        if (std::abs(bc[x] - bc[y]) <= 1e-13) CHECK(std::abs(r.r[x] - r.r[y]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("single BT population is recovered from samples") {
  // One component: the model is well-specified, so fitted differences
  // approach beta * (u(x) - u(y)).
  const instance inst(utility_mixture({1.0}, {{0.9, 0.55, 0.2}}), 2.5,
                      pair_distribution::product_of_mu({1.0 / 3, 1.0 / 3, 1.0 / 3}));
  const comparison_counts counts = sample_comparisons(inst, 1000000, 1, 99);
  const rewards r = fit_bt_mle(counts);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) {
      const double want = 2.5 * (0.9 - 0.55) * (x == 0 && y == 1   ? 1.0
                                                : x == 1 && y == 0 ? -1.0
                                                                   : 0.0) +
                          2.5 * (0.9 - 0.2) * (x == 0 && y == 2   ? 1.0
                                               : x == 2 && y == 0 ? -1.0
                                                                  : 0.0) +
                          2.5 * (0.55 - 0.2) * (x == 1 && y == 2   ? 1.0
                                                : x == 2 && y == 1 ? -1.0
                                                                   : 0.0);
      CHECK(std::abs((r.r[x] - r.r[y]) - want) <= 0.05);
    }
}

TEST_CASE("unbounded sequence rewards increase monotonically") {
  const unbounded_seq_result gen = gen_unbounded_seq(4.0, 8, 1e-3);
  const rewards r = fit_bt_mle_population(expected_win_rates(gen.inst), gen.inst.pairs, 1e-11);
  for (std::size_t t = 1; t < 8; ++t) CHECK(r.r[t] > r.r[t - 1]);
}
