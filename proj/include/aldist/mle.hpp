#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/model.hpp"

namespace aldist {

// Bradley-Terry reward vector, normalized to zero mean.
struct rewards {
  std::vector<double> r;

  static rewards centered(std::vector<double> v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double& x : v) x -= mean;
    return rewards{std::move(v)};
  }
};

// Fitted without regularization, separable data sends some rewards to
// infinity; the error names an alternative set that is never beaten from
// outside.
class divergence_error : public std::runtime_error {
 public:
  divergence_error(const std::string& what, std::vector<std::size_t> dominant)
      : std::runtime_error(what), dominant_set_(std::move(dominant)) {}
  const std::vector<std::size_t>& dominant_set() const { return dominant_set_; }

 private:
  std::vector<std::size_t> dominant_set_;
};

struct mle_options {
  double ridge = 1e-9;
  double tol = 1e-10;
  std::size_t max_iter = 500;
};

namespace detail {

// The maximizer is finite and unique (up to shift) iff the "x beat y at least
// once" digraph is strongly connected. When it is not, some group is never
// beaten from outside and its rewards diverge; Kosaraju's algorithm finds a
// source component to report.
inline void check_connectivity(const std::vector<double>& W, std::size_t m) {
  std::vector<std::vector<std::size_t>> fwd(m), rev(m);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < m; ++y) {
      if (x != y && W[x * m + y] > 0.0) {
        fwd[x].push_back(y);
        rev[y].push_back(x);
      }
    }
  }
  std::vector<char> seen(m, 0);
  std::vector<std::size_t> order;
  order.reserve(m);
  for (std::size_t s = 0; s < m; ++s) {
    if (seen[s]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
    seen[s] = 1;
    while (!stack.empty()) {
      auto& [v, i] = stack.back();
      if (i < fwd[v].size()) {
        const std::size_t w = fwd[v][i++];
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
  }
  // Reverse pass from the last-finished vertex yields one SCC; if it is not
  // everything, that component is never beaten by the rest.
  std::vector<char> mark(m, 0);
  std::vector<std::size_t> comp, stack{order.back()};
  mark[order.back()] = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    comp.push_back(v);
    for (std::size_t w : rev[v]) {
      if (!mark[w]) {
        mark[w] = 1;
        stack.push_back(w);
      }
    }
  }
  if (comp.size() == m) return;
  std::sort(comp.begin(), comp.end());
  std::ostringstream msg;
  msg << "BT MLE diverges: alternatives {";
  for (std::size_t i = 0; i < comp.size(); ++i) msg << (i ? "," : "") << comp[i];
  msg << "} are never beaten from outside; refit with ridge > 0";
  throw divergence_error(msg.str(), comp);
}

// Damped Newton ascent of the weighted log-likelihood
//   sum_{x != y} W[x][y] log sigmoid(r_x - r_y) - ridge * |r|^2.
// W is normalized to unit mass first so tolerances mean the same thing for
// count data of any size.
inline rewards fit_bt_weighted(std::vector<double> W, std::size_t m, const mle_options& opt) {
  check(m >= 1, "fit_bt: no alternatives");
  check(opt.ridge >= 0.0 && opt.tol > 0.0, "fit_bt: bad options");
  double mass = 0.0;
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      if (x != y) mass += W[x * m + y];
  if (mass == 0.0) {
    if (opt.ridge == 0.0) check_connectivity(W, m);
    return rewards{std::vector<double>(m, 0.0)};
  }
  for (double& w : W) w /= mass;
  if (opt.ridge == 0.0) check_connectivity(W, m);

  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  auto objective = [&](const Eigen::VectorXd& v) {
    double f = 0.0;
    for (std::size_t x = 0; x < m; ++x)
      for (std::size_t y = 0; y < m; ++y)
        if (x != y && W[x * m + y] > 0.0) f += W[x * m + y] * log_sigmoid(v(x) - v(y));
    return f - opt.ridge * v.squaredNorm();
  };

  double f = objective(r);
  Eigen::VectorXd g(m);
  Eigen::MatrixXd H(m, m);
  auto grad_at = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    out.setZero();
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t y = x + 1; y < m; ++y) {
        const double wxy = W[x * m + y], wyx = W[y * m + x];
        if (wxy == 0.0 && wyx == 0.0) continue;
        const double s = sigmoid(v(x) - v(y));
        const double d1 = wxy * (1.0 - s) - wyx * s;
        out(x) += d1;
        out(y) -= d1;
      }
    }
    out -= 2.0 * opt.ridge * v;
  };
  for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
    g.setZero();
    H.setZero();
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t y = x + 1; y < m; ++y) {
        const double wxy = W[x * m + y], wyx = W[y * m + x];
        if (wxy == 0.0 && wyx == 0.0) continue;
        const double s = sigmoid(r(x) - r(y));
        const double d1 = wxy * (1.0 - s) - wyx * s;
        const double d2 = (wxy + wyx) * s * (1.0 - s);
        g(x) += d1;
        g(y) -= d1;
        H(x, x) -= d2;
        H(y, y) -= d2;
        H(x, y) += d2;
        H(y, x) += d2;
      }
    }
    g -= 2.0 * opt.ridge * r;
    H.diagonal().array() -= 2.0 * opt.ridge;

    if (g.lpNorm<Eigen::Infinity>() <= opt.tol) {
      std::vector<double> out(r.data(), r.data() + m);
      return rewards::centered(std::move(out));
    }

    // Levenberg damping keeps the step well defined along the shift nullspace
    // and on flat tails.
    Eigen::VectorXd step;
    double damp = 1e-12;
    for (;; damp *= 10.0) {
      Eigen::MatrixXd A = -H;
      A.diagonal().array() += damp;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(g);
        if (step.allFinite()) break;
      }
      if (damp > 1e12) throw solver_error("BT MLE: cannot factor Hessian", g.lpNorm<Eigen::Infinity>());
    }

    const double slope = g.dot(step);
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    bool moved = false;
    if (1e-4 * slope <= noise) {
      // Endgame: the predicted gain is below objective roundoff, so a sufficient
      // decrease test can no longer certify anything. The full Newton step still
      // converges quadratically; accept it on gradient decrease.
      Eigen::VectorXd trial = r + step;
      Eigen::VectorXd gt(m);
      grad_at(trial, gt);
      if (gt.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
        r = trial;
        f = objective(r);
        moved = true;
      }
    }
    for (double alpha = 1.0; !moved && alpha >= 1e-14; alpha *= 0.5) {
      Eigen::VectorXd trial = r + alpha * step;
      const double ft = objective(trial);
      if (ft >= f + 1e-4 * alpha * slope) {
        r = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) {
      // Fall back to a short gradient step before declaring failure.
      Eigen::VectorXd trial = r + (0.1 / (1.0 + g.norm())) * g;
      const double ft = objective(trial);
      if (ft <= f) throw solver_error("BT MLE stalled", g.lpNorm<Eigen::Infinity>());
      r = trial;
      f = ft;
    }
    if (opt.ridge == 0.0) r.array() -= r.mean();
  }
  throw solver_error("BT MLE did not converge", g.lpNorm<Eigen::Infinity>());
}

}  // namespace detail

// Finite-sample fit. Self-pair tallies on the diagonal carry no preference
// signal and are excluded.
inline rewards fit_bt_mle(const comparison_counts& counts, const mle_options& opt = {}) {
  const std::size_t m = counts.size();
  std::vector<double> W(m * m, 0.0);
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      if (x != y) W[x * m + y] = static_cast<double>(counts(x, y));
  return detail::fit_bt_weighted(std::move(W), m, opt);
}

// Population fit: weight each ordered pair by nu({x,y}) p(x over y). Solves
// the first-order conditions
//   sum_{y != x} nu({x,y}) sigmoid(r_x - r_y) = sum_{y != x} nu({x,y}) p(x over y).
inline rewards fit_bt_mle_population(const win_rates& rates, const pair_distribution& pairs,
                                     double tol = 1e-10) {
  const std::size_t m = rates.size();
  check(pairs.num_alternatives() == m, "fit_bt_mle_population: dimension mismatch");
  std::vector<double> W(m * m, 0.0);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      const double nu = pairs.pair_prob(x, y);
      W[x * m + y] = nu * rates(x, y);
      W[y * m + x] = nu * rates(y, x);
    }
  }
  mle_options opt;
  opt.ridge = 0.0;
  opt.tol = tol;
  return detail::fit_bt_weighted(std::move(W), m, opt);
}

}  // namespace aldist
