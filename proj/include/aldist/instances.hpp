#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/mle.hpp"
#include "aldist/model.hpp"
#include "aldist/policy_opt.hpp"
#include "aldist/rules.hpp"

namespace aldist {

// Hard instances. Each generator also returns the analytic side-information
// the construction predicts; tests recompute those quantities from the
// instance itself instead of trusting the generator's arithmetic.

struct sandwich_bounds {
  double lo, hi;  // bracket for p(x over y) - 1/2
};

// Slope of the secant of sigma - 1/2 over [0, beta]; the linearization
// constant that degrades from the tangent slope 1/4 as beta grows.
inline double ell_beta(double beta) {
  check(beta > 0.0, "ell_beta: beta must be positive");
  return sigmoid_centered(beta) / beta;
}

inline sandwich_bounds linearization_bounds(const instance& inst, std::size_t x, std::size_t y) {
  const std::size_t m = inst.mixture.num_alternatives();
  check(x < m && y < m, "linearization_bounds: index out of range");
  const std::vector<double> au = avg_util(inst);
  const double L = 0.25, lb = ell_beta(inst.beta);
  return {inst.beta * (lb * au[x] - L * au[y]), inst.beta * (L * au[x] - lb * au[y])};
}

// ---------------------------------------------------------------------------

struct universal_lb_result {
  instance inst;
  double weight_a;      // weight of the component that favors alternative 0
  double floor_ratio;   // distortion floor certified by the construction
  double win_rate_a_b;  // predicted p(0 over j) for every j >= 1
};

// Two-component family on alternatives {a, b_1..b_{m-1}}: one user type gets
// utility 1 from a only, the rest get xi*eps from every b_j. At xi = 1 the
// mixture weight is tuned so every pairwise win rate is exactly 1/2, making
// a (the far-best alternative) information-theoretically invisible; xi > 1
// turns a into a strict expected Condorcet loser.
inline universal_lb_result gen_universal_lb(std::size_t m, double beta, double eps, double xi) {
  check(m >= 2, "gen_universal_lb: m >= 2");
  check(beta > 0.0, "gen_universal_lb: beta must be positive");
  check(eps > 0.0 && eps <= 0.5, "gen_universal_lb: eps in (0, 1/2]");
  check(xi >= 1.0 && xi < 2.0, "gen_universal_lb: xi in [1, 2)");
  const double sb = sigmoid_centered(beta), se = sigmoid_centered(beta * eps);
  const double wa = se / (sb + se);
  std::vector<std::vector<double>> utils(2, std::vector<double>(m, 0.0));
  utils[0][0] = 1.0;
  for (std::size_t j = 1; j < m; ++j) utils[1][j] = xi * eps;
  utility_mixture mix({wa, 1.0 - wa}, utils);
  instance inst{std::move(mix), beta,
                pair_distribution::product_of_mu(std::vector<double>(m, 1.0 / double(m)))};
  const double floor_ratio = 1.0 / (1.0 / double(m) + xi * eps * sb / se);
  const double p_ab = 0.5 + wa * sb - (1.0 - wa) * sigmoid_centered(beta * xi * eps);
  return {std::move(inst), wa, floor_ratio, p_ab};
}

// ---------------------------------------------------------------------------

struct borda_lb_result {
  instance inst;
  double p_a, p_b, p_c;   // component weights
  double realized_ratio;  // AvgUtil(a) / AvgUtil(c)
  double limit_factor;    // value the ratio approaches as eps, eps' -> 0
};

// gamma maximizing the limit factor of gen_borda_lb.
inline double borda_lb_gamma_star(double beta) {
  check(beta > 0.0, "borda_lb_gamma_star: beta must be positive");
  return (2.0 / beta) * std::atanh(std::sqrt(1.0 - 4.0 * sigmoid_centered(beta) / beta));
}

// Three alternatives (a, b, c) and three user types with weights tuned so
// p(a over b) = p(b over c) = 1/2 at eps' = 0 while c's utility stays near
// eps. Nudging eps' > 0 hands c the Borda win even though a carries nearly
// all the utility.
inline borda_lb_result gen_borda_lb(double beta, double gamma, double eps, double eps_prime,
                                    double mu_a, double mu_c) {
  check(beta > 0.0, "gen_borda_lb: beta must be positive");
  check(gamma > 0.0 && gamma < 1.0, "gen_borda_lb: gamma in (0,1)");
  check(eps > 0.0 && eps < 1.0, "gen_borda_lb: eps in (0,1)");
  check(eps_prime >= 0.0 && eps_prime < 1.0 - eps, "gen_borda_lb: eps' in [0, 1-eps)");
  check(mu_a > 0.0 && mu_c > 0.0 && mu_a + mu_c < 1.0, "gen_borda_lb: bad mu");
  const double sb = sigmoid_centered(beta), se = sigmoid_centered(beta * eps);
  const double p_a = se / (sb + se);
  const double p_b = p_a * sigmoid_centered(beta * gamma) / sb;
  const double p_c = 1.0 - p_a - p_b;
  check(p_c > 0.0, "gen_borda_lb: component weights exceed 1");
  utility_mixture mix({p_a, p_b, p_c}, {{1.0 - gamma, 1.0, 0.0},
                                        {1.0, 0.0, eps},
                                        {0.0, 0.0, eps + eps_prime}});
  instance inst{std::move(mix), beta,
                pair_distribution::product_of_mu({mu_a, 1.0 - mu_a - mu_c, mu_c})};
  const double realized = (p_a * (1.0 - gamma) + p_b) / (p_b * eps + p_c * (eps + eps_prime));
  const double limit = 0.5 * beta * (1.0 + std::exp(-beta)) / (-std::expm1(-beta)) *
                       (1.0 - gamma + sigmoid_centered(beta * gamma) / sb);
  return {std::move(inst), p_a, p_b, p_c, realized, limit};
}

// ---------------------------------------------------------------------------

struct rlhf_lb_result {
  instance inst;
  kl_ball ball;
  double eps;    // reference-policy mass parameter actually used
  double delta;  // weight of the b-loving user type
  double eta1, eta2;
  double log_eps_threshold;  // admissible eps must satisfy log(eps) < this
  bool threshold_met;
  bool construction_valid;  // AvgUtil(a) > AvgUtil(b), required by the argument
  double borda_gap;         // limiting Borda score of b minus that of a
  rewards pop_rewards;      // population MLE rewards, shifted so r(c_1) = 0
};

inline std::size_t rlhf_lb_min_m(double beta) {
  return 2 + static_cast<std::size_t>(std::ceil(4.0 * std::exp(beta)));
}

// Reward-hacking instance {a, b, c_1..c_{m-2}}: a small user type loves b, a
// large one mildly likes a but loves the c-block, and the reference policy
// starves the c-block so no ball policy can use it. The single fitted reward
// then ranks b above a and reward maximization lands on b, paying an
// exp(beta) utility factor against the optimum at a.
//
// m = 0 picks the smallest admissible m. eps <= 0 picks the proof's
// threshold automatically; the exact threshold exp(-2/min(eta1,eta2))
// underflows double for beta >= 4, so the automatic choice is clamped at
// 1e-300 and threshold_met records whether the true threshold was met.
inline rlhf_lb_result gen_rlhf_lb(double beta, std::size_t m = 0, double eps = 0.0,
                                  double tau = 1.0) {
  check(beta >= 1.0, "gen_rlhf_lb: beta must be >= 1 (type II utility 1/beta)");
  const std::size_t min_m = rlhf_lb_min_m(beta);
  if (min_m > 10000) {
    std::ostringstream msg;
    msg << "gen_rlhf_lb: beta = " << beta << " needs m >= " << min_m
        << " alternatives; keep beta <= 7 or so";
    throw std::invalid_argument(msg.str());
  }
  if (m == 0) m = min_m;
  if (m < min_m) {
    std::ostringstream msg;
    msg << "gen_rlhf_lb: m must be >= " << min_m << " for beta = " << beta;
    throw std::invalid_argument(msg.str());
  }
  check(tau > 0.0, "gen_rlhf_lb: tau must be positive");

  const double delta = 10.0 / (10.0 + std::exp(beta));
  std::vector<std::vector<double>> utils(2, std::vector<double>(m, 0.0));
  utils[0][1] = 1.0;
  utils[1][0] = 1.0 / beta;
  for (std::size_t i = 2; i < m; ++i) utils[1][i] = 1.0;
  utility_mixture mix({delta, 1.0 - delta}, utils);
  instance inst{std::move(mix), beta,
                pair_distribution::product_of_mu(std::vector<double>(m, 1.0 / double(m)))};

  const win_rates rates = expected_win_rates(inst);
  rewards r = fit_bt_mle_population(rates, inst.pairs, 1e-11);
  const double rc = r.r[2];
  for (double& v : r.r) v -= rc;
  const double ra = r.r[0], rb = r.r[1];

  const std::vector<double> au = avg_util(inst);
  const double eta1 = std::exp(-beta) / (1.0 + std::abs(rb) / std::abs(rb - ra));
  const double eta2 = std::exp(-beta) / (1.0 + au[0] / (au[0] - au[1]));
  const double min_eta = std::min(eta1, eta2);
  const double log_thr = -2.0 / min_eta;
  const bool valid = au[0] > au[1];

  if (eps <= 0.0) eps = std::clamp(std::exp(log_thr) * 0.5, 1e-300, 0.01);
  check(eps < 1.0, "gen_rlhf_lb: eps must be < 1");
  const bool met = std::log(eps) < log_thr;

  std::vector<double> ref(m, eps / double(m - 2));
  ref[0] = ref[1] = 0.5 * (1.0 - eps);
  kl_ball ball(policy(std::move(ref)), tau);

  const std::vector<double> bc = limiting_borda(rates, inst.pairs.mu());
  return {std::move(inst), std::move(ball), eps,     delta,         eta1,  eta2,
          log_thr,         met,             valid,   bc[1] - bc[0], std::move(r)};
}

// ---------------------------------------------------------------------------

struct unbounded_seq_result {
  instance inst;
  std::vector<double> avg_utils;        // AvgUtil(a_t), t = 1..m
  std::vector<double> delta_prime;      // increment at each step t = 2..m
  std::vector<double> step_win_rate;    // predicted p(a_t over a_{t-1}), t = 2..m
  std::vector<double> decrement_bound;  // guaranteed AvgUtil drop at step t = 2..m
};

// Chain a_1..a_m over three equally likely user types where each a_t beats
// its predecessor in expected win rate yet loses a constant factor of
// average utility; nu concentrates comparisons on adjacent pairs. Utilities
// follow the recursion: the type that liked a_{t-1} most gets zero on a_t,
// the other two gain Delta'/beta.
inline unbounded_seq_result gen_unbounded_seq(double beta, std::size_t m, double eps) {
  check(beta > 0.0, "gen_unbounded_seq: beta must be positive");
  check(m >= 2, "gen_unbounded_seq: m >= 2");
  check(eps > 0.0 && eps < 1.0, "gen_unbounded_seq: eps in (0,1)");

  std::vector<std::vector<double>> utils(3, std::vector<double>(m, 0.0));
  for (std::size_t k = 0; k < 3; ++k) utils[k][0] = 1.0 / 3.0;
  std::vector<double> avg_utils(m, 0.0), delta_prime, step_win_rate, decrement_bound;
  avg_utils[0] = (utils[0][0] + utils[1][0] + utils[2][0]) / 3.0;
  for (std::size_t t = 1; t < m; ++t) {
    std::size_t A = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (utils[k][t - 1] > utils[A][t - 1]) A = k;
    const double prev = avg_utils[t - 1];
    const double d = beta * utils[A][t - 1];
    const double dp = std::log(std::pow(std::exp(0.5 * d) + 1.0, 3) / (2.0 * (std::exp(d) + 3.0)));
    for (std::size_t k = 0; k < 3; ++k)
      utils[k][t] = (k == A) ? 0.0 : utils[k][t - 1] + dp / beta;
    delta_prime.push_back(dp);
    step_win_rate.push_back(0.5 + (sigmoid_centered(-d) + 2.0 * sigmoid_centered(dp)) / 3.0);
    const double th = std::tanh(0.25 * beta * prev);
    decrement_bound.push_back(2.0 / (3.0 * beta) * std::log1p(th * th * th));
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += utils[k][t];
    avg_utils[t] = s / 3.0;
  }

  std::vector<double> nu(m * m, 0.0);
  const std::size_t adjacent = m - 1;
  const std::size_t others = m * (m - 1) / 2 - adjacent;
  const double adj_mass = others == 0 ? 1.0 / double(adjacent) : (1.0 - eps) / double(adjacent);
  const double other_mass = others == 0 ? 0.0 : eps / double(others);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      const double v = (y == x + 1) ? adj_mass : other_mass;
      nu[x * m + y] = nu[y * m + x] = v;
    }
  }
  return {instance{utility_mixture({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, utils), beta,
                   pair_distribution::general_nu(m, nu)},
          std::move(avg_utils), std::move(delta_prime), std::move(step_win_rate),
          std::move(decrement_bound)};
}

}  // namespace aldist
