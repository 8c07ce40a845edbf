#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/mle.hpp"
#include "aldist/model.hpp"
#include "aldist/rules.hpp"
#include "aldist/zero_sum.hpp"

namespace aldist {

// KL trust region around a strictly positive reference policy. Zero-mass
// reference entries are rejected; drop those alternatives before building the
// ball.
struct kl_ball {
  policy pi_ref;
  double tau;

  kl_ball(policy ref, double tau_) : pi_ref(std::move(ref)), tau(tau_) {
    check(std::isfinite(tau) && tau >= 0.0, "kl_ball: tau must be nonnegative");
    for (std::size_t i = 0; i < pi_ref.size(); ++i)
      check(pi_ref[i] > 0.0, "kl_ball: reference policy must be strictly positive");
  }
};

inline double kl_div(const policy& pi, const policy& pi_ref) {
  check(pi.size() == pi_ref.size(), "kl_div: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    check(pi_ref[i] > 0.0, "kl_div: reference policy must be strictly positive");
    if (pi[i] > 0.0) s += pi[i] * std::log(pi[i] / pi_ref[i]);
  }
  return std::max(s, 0.0);
}

// pi(x) proportional to pi_ref(x) exp(r(x)/lambda), normalized in log space.
inline policy regularized_linear_max(const std::vector<double>& r, const policy& pi_ref,
                                     double lambda) {
  check(lambda > 0.0, "regularized_linear_max: lambda must be positive");
  check(r.size() == pi_ref.size(), "regularized_linear_max: dimension mismatch");
  // Shift by max r first: r[i]/lambda alone can reach 1e12 at small lambda,
  // where the later subtraction of logsumexp loses four digits of the result.
  const double rmax = *std::max_element(r.begin(), r.end());
  std::vector<double> g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    g[i] = std::log(pi_ref[i]) + (r[i] - rmax) / lambda;
  const double z = logsumexp(g);
  std::vector<double> p(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) p[i] = std::exp(g[i] - z);
  return policy(std::move(p));
}

struct ball_opt_result {
  policy pi;
  double value;   // <r, pi> at the returned (feasible) policy
  double upper;   // dual bound on max <r, pi'> over the ball
  double lambda;  // temperature at the returned policy; +inf when pi = pi_ref
  double kl;      // kl_div(pi, pi_ref)
};

// Maximize <r, pi> over the KL ball along the Gibbs path pi_lambda, bisecting
// log lambda in [1e-12, 1e12]. KL is nonincreasing in lambda along this path,
// so the root bracket shrinks geometrically; tol bounds the residual slack
// tau - kl on the accepted (feasible) side. Corner cases: tau = 0 returns
// pi_ref; if the ball contains the zero-temperature limit (mass on the argmax
// set split proportionally to pi_ref) that limit is returned exactly.
inline ball_opt_result linear_max_over_ball(const std::vector<double>& r, const kl_ball& ball,
                                            double tol = 1e-9) {
  const std::size_t m = ball.pi_ref.size();
  check(r.size() == m, "linear_max_over_ball: dimension mismatch");
  check(tol > 0.0, "linear_max_over_ball: tol must be positive");
  auto dot = [&](const policy& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += r[i] * p[i];
    return s;
  };
  const double inf = std::numeric_limits<double>::infinity();
  if (ball.tau == 0.0) return {ball.pi_ref, dot(ball.pi_ref), dot(ball.pi_ref), inf, 0.0};

  const double rmax = *std::max_element(r.begin(), r.end());
  double argmax_mass = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (r[i] == rmax) argmax_mass += ball.pi_ref[i];
  const double kl_limit = -std::log(argmax_mass);
  if (ball.tau >= kl_limit) {
    std::vector<double> p(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      if (r[i] == rmax) p[i] = ball.pi_ref[i] / argmax_mass;
    policy lim(std::move(p));
    return {lim, rmax, rmax, 0.0, kl_limit};
  }

  auto eval = [&](double lambda) {
    policy p = regularized_linear_max(r, ball.pi_ref, lambda);
    const double k = kl_div(p, ball.pi_ref);
    return std::pair<policy, double>(std::move(p), k);
  };

  double lo = 1e-12, hi = 1e12;
  auto [plo, klo] = eval(lo);
  if (klo <= ball.tau) return {plo, dot(plo), dot(plo) + lo * (ball.tau - klo), lo, klo};
  auto [phi, khi] = eval(hi);
  if (khi > ball.tau) {
    std::ostringstream msg;
    msg << "linear_max_over_ball: bracket failure, kl(" << lo << ") = " << klo << ", kl(" << hi
        << ") = " << khi << ", tau = " << ball.tau;
    throw solver_error(msg.str(), khi - ball.tau);
  }
  for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-15; ++it) {
    const double mid = std::exp(0.5 * (std::log(lo) + std::log(hi)));
    auto [pm, km] = eval(mid);
    if (km > ball.tau) {
      lo = mid;
    } else {
      hi = mid;
      phi = std::move(pm);
      khi = km;
    }
  }
  check(ball.tau - khi <= std::max(tol, 1e-6 * ball.tau),
        "linear_max_over_ball: bisection did not close the KL gap");
  return {phi, dot(phi), dot(phi) + hi * (ball.tau - khi), hi, khi};
}

// Reward-then-maximize: fit one BT reward to the data, then take the best
// policy in the ball.
inline ball_opt_result rlhf_policy(const comparison_counts& counts, const kl_ball& ball,
                                   const mle_options& opt = {}, double tol = 1e-9) {
  return linear_max_over_ball(fit_bt_mle(counts, opt).r, ball, tol);
}

inline ball_opt_result rlhf_policy(const win_rates& rates, const pair_distribution& pairs,
                                   const kl_ball& ball, double tol = 1e-9) {
  return linear_max_over_ball(fit_bt_mle_population(rates, pairs).r, ball, tol);
}

// Closed-form DPO policy; by the reward/policy change of variables this is
// the regularized RLHF optimum for the same data.
inline policy dpo_policy(const comparison_counts& counts, const policy& pi_ref, double lambda,
                         const mle_options& opt = {}) {
  return regularized_linear_max(fit_bt_mle(counts, opt).r, pi_ref, lambda);
}

// Best response value against pi over the ball: max_{pi2 in ball} <M pi, pi2>
// (M is antisymmetric, so this equals -min <M^T pi, pi2>). Zero up to tol
// certifies an equilibrium.
inline double exploitability(const policy& pi, const margin_matrix& M, const kl_ball& ball) {
  const std::size_t m = M.size();
  check(pi.size() == m && ball.pi_ref.size() == m, "exploitability: dimension mismatch");
  std::vector<double> r(m, 0.0);
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y) r[x] += M(x, y) * pi[y];
  return linear_max_over_ball(r, ball, 1e-12).value;
}

struct nlhf_result {
  policy pi;
  double lambda;  // regularization strength at the accepted policy; 0 = unconstrained regime
  double kl;
  double exploitability;
  std::size_t iterations;
  bool used_scan;  // dense lambda scan fallback triggered (non-monotone KL path)
};

namespace detail {

struct reg_equilibrium {
  std::vector<double> logpi;
  double residual;
  std::size_t iterations;
};

// Fixed-point machinery for the regularized symmetric equilibrium
// pi proportional to pi_ref exp((M pi)/lambda), in log space throughout.
// Damped mirror steps alone cannot cope with small lambda (the map's local
// rotation rate scales like |M|/lambda), so every iteration first attempts a
// Newton step on v - T(v) and only falls back to the mirror update; cold
// starts approach the target lambda by halving from an easy one.
class reg_solver {
 public:
  reg_solver(const margin_matrix& M, const policy& pi_ref) : M_(M), ref_(pi_ref), m_(M.size()) {}

  reg_equilibrium run(double lambda, const std::vector<double>* warm, std::size_t cap = 100000) {
    iters_ = 0;
    std::vector<double> v;
    if (warm && warm->size() == m_) {
      v = *warm;
      if (descend(v, lambda, std::min<std::size_t>(cap, 3000))) return {v, last_res_, iters_};
    }
    double mag = 0.0;
    for (std::size_t x = 0; x < m_; ++x)
      for (std::size_t y = 0; y < m_; ++y) mag = std::max(mag, std::abs(M_(x, y)));
    v.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) v[i] = std::log(ref_[i]);
    double cur = std::max(4.0 * mag, lambda);
    if (!descend(v, cur, cap) || cur == lambda) return {v, last_res_, iters_};

    // Adaptive continuation toward the target: when a step leaves the Newton
    // basin, retreat to the last solved lambda and shrink the step until the
    // fixed-point path is tracked closely enough.
    std::vector<double> good = v;
    double factor = 0.5;
    while (cur > lambda && iters_ < cap && factor <= 0.995) {
      const double next = std::max(cur * factor, lambda);
      const std::size_t local = std::min<std::size_t>(600, cap - std::min(cap, iters_));
      if (descend(v, next, local)) {
        cur = next;
        good = v;
        factor = std::max(0.5, factor * factor);
      } else {
        v = good;
        factor = std::sqrt(factor);
      }
    }
    if (cur > lambda) {
      v = good;
      descend(v, lambda, cap - std::min(cap, iters_));
    } else {
      descend(v, lambda, 1);  // refresh last_res_ at the target
    }
    return {v, last_res_, iters_};
  }

 private:
  // Residual of the fixed point map at logp; fills t_ with the map's output.
  double resid(const std::vector<double>& logp, double lambda) {
    std::vector<double> p(m_);
    for (std::size_t i = 0; i < m_; ++i) p[i] = std::exp(logp[i]);
    t_.resize(m_);
    for (std::size_t x = 0; x < m_; ++x) {
      double s = 0.0;
      for (std::size_t y = 0; y < m_; ++y) s += M_(x, y) * p[y];
      t_[x] = std::log(ref_[x]) + s / lambda;
    }
    const double z = logsumexp(t_);
    double res = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      t_[i] -= z;
      res = std::max(res, std::abs(logp[i] - t_[i]));
    }
    return res;
  }

  // Drives v toward the fixed point at this lambda. True once the residual
  // is at tolerance; false when the iteration budget runs out first.
  bool descend(std::vector<double>& v, double lambda, std::size_t budget) {
    double res = resid(v, lambda);
    std::vector<double> t = t_, best_v = v;
    double best_res = res, eta = 0.5;
    Eigen::MatrixXd J(m_, m_);
    Eigen::VectorXd rhs(m_);
    for (std::size_t it = 0; it < budget && res > 1e-13; ++it, ++iters_) {
      bool stepped = false;
      std::vector<double> p(m_), pm_row(m_, 0.0);
      for (std::size_t i = 0; i < m_; ++i) p[i] = std::exp(v[i]);
      for (std::size_t y = 0; y < m_; ++y) {
        double s = 0.0;
        for (std::size_t x = 0; x < m_; ++x) s += p[x] * M_(x, y);
        pm_row[y] = s;
      }
      for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t k = 0; k < m_; ++k)
          J(i, k) = (i == k ? 1.0 : 0.0) - p[k] * (M_(i, k) - pm_row[k]) / lambda;
      for (std::size_t i = 0; i < m_; ++i) rhs(i) = t[i] - v[i];
      Eigen::VectorXd s = J.partialPivLu().solve(rhs);
      if (s.allFinite()) {
        for (double scale = 1.0; scale >= 1.0 / 1024.0; scale *= 0.5) {
          std::vector<double> trial(m_);
          for (std::size_t i = 0; i < m_; ++i) trial[i] = v[i] + scale * s(i);
          const double z = logsumexp(trial);
          for (double& x : trial) x -= z;
          const double rt = resid(trial, lambda);
          if (rt < res * (1.0 - 1e-3)) {
            v = std::move(trial);
            res = rt;
            t = t_;
            stepped = true;
            break;
          }
        }
      }
      if (!stepped) {
        std::vector<double> trial(m_);
        for (std::size_t i = 0; i < m_; ++i) trial[i] = (1.0 - eta) * v[i] + eta * t[i];
        const double z = logsumexp(trial);
        for (double& x : trial) x -= z;
        const double rt = resid(trial, lambda);
        if (rt > res) eta = std::max(0.5 * eta, 1.0 / 4096.0);
        v = std::move(trial);
        res = rt;
        t = t_;
      }
      if (res < best_res) {
        best_res = res;
        best_v = v;
      } else if (res > 10.0 * best_res) {
        v = best_v;
        res = resid(v, lambda);
        t = t_;
        eta = std::max(0.5 * eta, 1.0 / 4096.0);
      }
    }
    if (res > best_res) {
      v = best_v;
      res = best_res;
    }
    last_res_ = res;
    return res <= 1e-13;
  }

  const margin_matrix& M_;
  const policy& ref_;
  std::size_t m_;
  std::vector<double> t_;
  double last_res_ = 0.0;
  std::size_t iters_ = 0;
};

inline reg_equilibrium solve_regularized(const margin_matrix& M, const policy& pi_ref,
                                         double lambda, const std::vector<double>* warm,
                                         std::size_t cap = 100000) {
  return reg_solver(M, pi_ref).run(lambda, warm, cap);
}

inline policy policy_from_log(const std::vector<double>& logp) {
  std::vector<double> p(logp.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logp[i]);
  return policy(std::move(p));
}

}  // namespace detail

// KL-constrained Nash equilibrium of the margin game. The unconstrained
// equilibrium is tried first (any simplex equilibrium that lands inside the
// ball is constrained-optimal); otherwise bisect the regularization strength
// lambda until the regularized equilibrium sits on the KL boundary, which
// bounds the ball exploitability by lambda * (tau - kl). If the KL-vs-lambda
// map turns out non-monotone the solver falls back to a dense lambda scan and
// flags it.
inline nlhf_result nlhf_policy(const margin_matrix& M, const kl_ball& ball, double tol = 1e-9) {
  const std::size_t m = M.size();
  check(ball.pi_ref.size() == m, "nlhf_policy: dimension mismatch");
  check(tol > 0.0, "nlhf_policy: tol must be positive");
  double mag = 0.0;
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y) mag = std::max(mag, std::abs(M(x, y)));
  if (ball.tau == 0.0 || mag == 0.0) {
    const double e = exploitability(ball.pi_ref, M, ball);
    return {ball.pi_ref, 0.0, 0.0, e, 0, false};
  }

  std::size_t total_iter = 0;
  try {
    zero_sum::solution sol = zero_sum::solve(M.data(), m, 0.25 * tol);
    policy pi(sol.strategy);
    const double kl = kl_div(pi, ball.pi_ref);
    if (kl <= ball.tau) {
      const double e = exploitability(pi, M, ball);
      if (e <= tol) return {pi, 0.0, kl, e, sol.iterations, false};
    }
  } catch (const solver_error&) {
    // fall through to the regularized path
  }

  struct probe {
    policy pi;
    double lambda, kl, cert;
  };
  auto solve_at = [&](double lambda, const std::vector<double>* warm,
                      std::vector<double>* out_log) -> probe {
    detail::reg_equilibrium eq = detail::solve_regularized(M, ball.pi_ref, lambda, warm);
    total_iter += eq.iterations;
    if (eq.residual > 1e-9)
      throw solver_error("nlhf_policy: inner fixed point did not converge", eq.residual);
    if (out_log) *out_log = eq.logpi;
    policy pi = detail::policy_from_log(eq.logpi);
    const double kl = kl_div(pi, ball.pi_ref);
    return {std::move(pi), lambda, kl, lambda * (ball.tau - kl)};
  };
  auto accept = [&](const probe& pr) {
    return pr.kl <= ball.tau + std::min(1e-12, 0.01 * tol) &&
           pr.lambda * std::max(ball.tau - pr.kl, 0.0) <= 0.3 * tol;
  };
  auto finish = [&](const probe& pr, bool scanned) {
    const double e = exploitability(pr.pi, M, ball);
    return nlhf_result{pr.pi, pr.lambda, pr.kl, e, total_iter, scanned};
  };

  // Walk lambda down from an easy anchor with warm starts until the KL ball
  // binds; tiny lambdas are only ever approached through this continuation,
  // never probed cold (the inner map rotates at rate |M|/lambda).
  std::vector<double> warm;
  double hi = 1e12;
  probe phi = solve_at(hi, nullptr, &warm);
  if (accept(phi)) return finish(phi, false);
  check(phi.kl <= ball.tau, "nlhf_policy: kl exceeds tau even at lambda = 1e12");
  bool bracketed = false, stuck = false;
  double lo = hi;
  while (lo > 1e-12) {
    probe pr;
    try {
      pr = solve_at(0.1 * lo, &warm, &warm);
    } catch (const solver_error&) {
      stuck = true;
      break;
    }
    lo *= 0.1;
    if (accept(pr)) return finish(pr, false);
    if (pr.kl > ball.tau) {
      bracketed = true;
      break;
    }
    hi = lo;
    phi = std::move(pr);
  }
  if (bracketed) {
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-15; ++it) {
      const double mid = std::exp(0.5 * (std::log(lo) + std::log(hi)));
      probe pm;
      try {
        pm = solve_at(mid, &warm, &warm);
      } catch (const solver_error&) {
        stuck = true;
        break;
      }
      if (accept(pm)) return finish(pm, false);
      if (pm.kl > ball.tau)
        lo = mid;
      else {
        hi = mid;
        phi = std::move(pm);
      }
    }
    if (!stuck && accept(phi)) return finish(phi, false);
  } else if (!stuck) {
    // The ball never bound on the way down: the last iterate is essentially
    // the unconstrained equilibrium and its certificate vanishes with lambda.
    if (accept(phi)) return finish(phi, false);
  }

  // Non-monotone or discontinuous KL path: dense scan, keep the feasible
  // policy with the tightest certificate.
  std::optional<probe> best;
  warm.clear();
  for (int i = 999; i >= 0; --i) {
    const double lambda = std::pow(10.0, -12.0 + 24.0 * i / 999.0);
    probe pr;
    try {
      pr = solve_at(lambda, warm.empty() ? nullptr : &warm, &warm);
    } catch (const solver_error&) {
      continue;
    }
    if (pr.kl > ball.tau + std::min(1e-12, 0.01 * tol)) continue;
    if (!best || pr.cert < best->cert) best = pr;
    if (best->cert <= 0.3 * tol) break;
  }
  if (best && best->cert <= tol) return finish(*best, true);
  throw solver_error("nlhf_policy: no certified equilibrium found",
                     best ? best->cert : std::numeric_limits<double>::infinity());
}

// Benchmark: best average utility attainable inside the ball.
inline ball_opt_result optimal_policy(const instance& inst, const kl_ball& ball,
                                      double tol = 1e-9) {
  return linear_max_over_ball(avg_util(inst), ball, tol);
}

}  // namespace aldist
