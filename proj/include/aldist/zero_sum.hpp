#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "aldist/math.hpp"

namespace aldist {

// Internals for solving symmetric zero-sum games given by an antisymmetric
// payoff matrix M (row player receives M[x][y]). The game value is 0 and both
// players share the same equilibrium strategies.
namespace zero_sum {

// Guaranteed payoff of strategy s: min_y sum_x s[x] M[x][y]. An equilibrium
// strategy attains 0; -worst_value is the exploitability on the simplex.
inline double worst_value(const std::vector<double>& M, std::size_t m,
                          const std::vector<double>& s) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < m; ++y) {
    double v = 0.0;
    for (std::size_t x = 0; x < m; ++x) v += s[x] * M[x * m + y];
    worst = std::min(worst, v);
  }
  return worst;
}

// Try to read an exact equilibrium off a candidate support: on its support an
// equilibrium strategy is a positive null vector of the restricted payoff
// matrix. Returns the full-length strategy when the candidate certifies.
inline std::optional<std::vector<double>> polish_support(const std::vector<double>& M,
                                                         std::size_t m,
                                                         const std::vector<std::size_t>& support,
                                                         double tol) {
  const std::size_t s = support.size();
  if (s == 0) return std::nullopt;
  std::vector<double> full(m, 0.0);
  if (s == 1) {
    full[support[0]] = 1.0;
  } else {
    Eigen::MatrixXd A(s, s);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) A(i, j) = M[support[j] * m + support[i]];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-10);
    if (lu.dimensionOfKernel() != 1) return std::nullopt;
    Eigen::VectorXd v = lu.kernel().col(0);
    double sum = v.sum();
    if (sum == 0.0) return std::nullopt;
    v /= sum;
    for (std::size_t i = 0; i < s; ++i) {
      if (v(i) < -1e-12) return std::nullopt;
      full[support[i]] = std::max(0.0, v(i));
    }
    double total = 0.0;
    for (double x : full) total += x;
    for (double& x : full) x /= total;
  }
  if (worst_value(M, m, full) < -tol) return std::nullopt;
  return full;
}

struct solution {
  std::vector<double> strategy;
  double exploitability = 0.0;
  std::size_t iterations = 0;
  bool used_lp = false;
};

// Dense simplex solver for the game LP, used when support identification from
// the self-play average fails (degenerate or near-degenerate games).
// Shift M to M' = M + 2 (entries positive) and solve, for the column player,
//   max 1'w  s.t.  M'w <= 1, w >= 0.
// By antisymmetry the normalized optimum is also a row equilibrium strategy.
inline std::vector<double> solve_lp(const std::vector<double>& M, std::size_t m) {
  const std::size_t cols = 2 * m + 1;  // variables, slacks, rhs
  std::vector<double> T(m * cols, 0.0);
  std::vector<double> obj(cols, 0.0);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) T[i * cols + j] = M[i * m + j] + 2.0;
    T[i * cols + m + i] = 1.0;
    T[i * cols + 2 * m] = 1.0;
    basis[i] = m + i;
  }
  for (std::size_t j = 0; j < m; ++j) obj[j] = 1.0;

  const std::size_t max_pivots = 2000 + 40 * m * m;
  for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
    // Bland's rule: first column with positive reduced cost.
    std::size_t enter = cols;
    for (std::size_t j = 0; j + 1 < cols; ++j) {
      if (obj[j] > 1e-12) {
        enter = j;
        break;
      }
    }
    if (enter == cols) break;  // optimal
    std::size_t leave = m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double a = T[i * cols + enter];
      if (a > 1e-12) {
        const double ratio = T[i * cols + 2 * m] / a;
        if (ratio < best_ratio - 1e-15 ||
            (ratio < best_ratio + 1e-15 && (leave == m || basis[i] < basis[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
    }
    if (leave == m) throw solver_error("game LP unbounded", 0.0);
    const double piv = T[leave * cols + enter];
    for (std::size_t j = 0; j < cols; ++j) T[leave * cols + j] /= piv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = T[i * cols + enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) T[i * cols + j] -= f * T[leave * cols + j];
    }
    const double fo = obj[enter];
    for (std::size_t j = 0; j < cols; ++j) obj[j] -= fo * T[leave * cols + j];
    basis[leave] = enter;
  }

  std::vector<double> w(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < m) w[basis[i]] = std::max(0.0, T[i * cols + 2 * m]);
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  if (sum <= 0.0) throw solver_error("game LP returned a zero strategy", 1.0);
  for (double& v : w) v /= sum;
  return w;
}

// Multiplicative-weights self-play with averaged iterates locates the
// equilibrium; periodic support polishing turns the approximate average into
// an exact basic solution so the certificate can reach tight tolerances that
// the O(1/sqrt(T)) self-play rate alone cannot.
inline solution solve(const std::vector<double>& M, std::size_t m, double tol,
                      std::size_t max_iter = 1000000) {
  check(M.size() == m * m && m >= 1, "zero_sum::solve: bad dimensions");
  solution out;
  if (m == 1) {
    out.strategy = {1.0};
    return out;
  }

  double scale = 0.0;
  for (double v : M) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) {
    out.strategy.assign(m, 1.0 / static_cast<double>(m));
    return out;
  }

  // Strict Condorcet winner: a row positive everywhere off-diagonal.
  for (std::size_t x = 0; x < m; ++x) {
    bool all = true;
    for (std::size_t y = 0; y < m && all; ++y) {
      if (y != x && M[x * m + y] <= 0.0) all = false;
    }
    if (all) {
      out.strategy.assign(m, 0.0);
      out.strategy[x] = 1.0;
      return out;
    }
  }

  auto try_polish = [&](const std::vector<double>& cand) -> std::optional<std::vector<double>> {
    double top = 0.0;
    std::vector<double> gains(m);
    for (std::size_t y = 0; y < m; ++y) {
      double v = 0.0;
      for (std::size_t x = 0; x < m; ++x) v += cand[x] * M[x * m + y];
      gains[y] = v;
      top = std::max(top, cand[y]);
    }
    for (double theta : {1e-2, 1e-3, 1e-4, 1e-6}) {
      std::vector<std::size_t> support;
      for (std::size_t x = 0; x < m; ++x)
        if (cand[x] >= theta * top) support.push_back(x);
      if (auto p = polish_support(M, m, support, tol)) return p;
    }
    // Equilibrium support lies among near-binding responses of the candidate.
    double gap = 0.0;
    for (std::size_t y = 0; y < m; ++y) gap = std::max(gap, -gains[y]);
    std::vector<std::size_t> support;
    for (std::size_t y = 0; y < m; ++y)
      if (gains[y] <= 4.0 * gap + 1e-12 * scale) support.push_back(y);
    return polish_support(M, m, support, tol);
  };

  std::vector<double> x(m, 1.0 / static_cast<double>(m));
  std::vector<double> avg(m, 0.0);
  std::vector<double> payoff(m);
  const std::size_t polish_budget = std::min<std::size_t>(max_iter, 65536);
  std::size_t next_check = 256;
  const double log_m = std::log(static_cast<double>(m));

  for (std::size_t t = 1; t <= polish_budget; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < m; ++j) v += M[i * m + j] * x[j];
      payoff[i] = v;
    }
    const double eta = std::min(0.5, std::sqrt(log_m / static_cast<double>(t))) / scale;
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) hi = std::max(hi, eta * payoff[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      x[i] *= std::exp(eta * payoff[i] - hi);
      z += x[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      x[i] /= z;
      avg[i] += (x[i] - avg[i]) / static_cast<double>(t);
    }
    out.iterations = t;
    if (t == next_check || t == polish_budget) {
      next_check *= 2;
      if (auto p = try_polish(avg)) {
        out.strategy = *p;
        out.exploitability = -worst_value(M, m, out.strategy);
        return out;
      }
      const double expl = -worst_value(M, m, avg);
      if (expl <= tol) {
        out.strategy = avg;
        out.exploitability = expl;
        return out;
      }
    }
  }

  out.strategy = solve_lp(M, m);
  out.used_lp = true;
  out.exploitability = -worst_value(M, m, out.strategy);
  if (out.exploitability > tol) {
    // One more polish pass from the LP vertex before giving up.
    if (auto p = try_polish(out.strategy)) {
      out.strategy = *p;
      out.exploitability = -worst_value(M, m, out.strategy);
    }
  }
  if (out.exploitability > tol) {
    throw solver_error("equilibrium solver failed to certify", out.exploitability);
  }
  return out;
}

}  // namespace zero_sum
}  // namespace aldist
