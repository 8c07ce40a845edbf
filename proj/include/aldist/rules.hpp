#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/model.hpp"
#include "aldist/zero_sum.hpp"

namespace aldist {

// Antisymmetric margin matrix: entry (x, y) is p(x over y) - p(y over x).
class margin_matrix {
 public:
  margin_matrix(std::size_t m, std::vector<double> v) : m_(m), v_(std::move(v)) {
    check(v_.size() == m_ * m_, "margin_matrix: size mismatch");
    for (std::size_t x = 0; x < m_; ++x) {
      check(v_[x * m_ + x] == 0.0, "margin_matrix: diagonal must be zero");
      for (std::size_t y = x + 1; y < m_; ++y) {
        const double a = v_[x * m_ + y];
        check(std::isfinite(a) && std::abs(a) <= 1.0 + 1e-12, "margin_matrix: entry outside [-1,1]");
        check(v_[y * m_ + x] == -a, "margin_matrix: must be antisymmetric");
      }
    }
  }

  std::size_t size() const { return m_; }
  double operator()(std::size_t x, std::size_t y) const { return v_[x * m_ + y]; }
  const std::vector<double>& data() const { return v_; }

 private:
  std::size_t m_;
  std::vector<double> v_;
};

inline margin_matrix margins(const win_rates& rates) {
  const std::size_t m = rates.size();
  std::vector<double> v(m * m, 0.0);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      const double d = rates(x, y) - rates(y, x);
      v[x * m + y] = d;
      v[y * m + x] = -d;
    }
  }
  return margin_matrix(m, std::move(v));
}

// Margins straight from tallies: (#x over y - #y over x) / (total for the
// pair). Unobserved pairs get margin 0, matching the 1/2 win-rate convention.
inline margin_matrix margins(const comparison_counts& counts) {
  const std::size_t m = counts.size();
  std::vector<double> v(m * m, 0.0);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      const std::uint64_t w = counts(x, y), l = counts(y, x);
      if (w + l == 0) continue;
      const double d = (static_cast<double>(w) - static_cast<double>(l)) /
                       static_cast<double>(w + l);
      v[x * m + y] = d;
      v[y * m + x] = -d;
    }
  }
  return margin_matrix(m, std::move(v));
}

struct borda_scores_result {
  std::vector<double> scores;
  // False where an alternative never appeared in any comparison and its score
  // fell back to 1/2.
  std::vector<unsigned char> observed;
};

// Normalized Borda count from tallies. A self-pair draw counts as one win out
// of two appearances for its alternative.
inline borda_scores_result borda_scores(const comparison_counts& counts) {
  const std::size_t m = counts.size();
  borda_scores_result out;
  out.scores.assign(m, 0.5);
  out.observed.assign(m, 0);
  for (std::size_t x = 0; x < m; ++x) {
    std::uint64_t wins = counts(x, x);
    std::uint64_t total = 2 * counts(x, x);
    for (std::size_t y = 0; y < m; ++y) {
      if (y == x) continue;
      wins += counts(x, y);
      total += counts(x, y) + counts(y, x);
    }
    if (total > 0) {
      out.scores[x] = static_cast<double>(wins) / static_cast<double>(total);
      out.observed[x] = 1;
    }
  }
  return out;
}

// Population limit of the normalized Borda count when pairs are drawn as two
// independent samples from mu: mu(x)/2 + sum_{y != x} mu(y) p(x over y).
inline std::vector<double> limiting_borda(const win_rates& rates, const std::vector<double>& mu) {
  const std::size_t m = rates.size();
  check(mu.size() == m, "limiting_borda: marginal size mismatch");
  std::vector<double> bc(m, 0.0);
  for (std::size_t x = 0; x < m; ++x) {
    double v = 0.5 * mu[x];
    for (std::size_t y = 0; y < m; ++y) {
      if (y != x) v += mu[y] * rates(x, y);
    }
    bc[x] = v;
  }
  return bc;
}

// Uniform lottery over all scores within tie_tol (absolute) of the maximum.
inline policy borda_rule(const std::vector<double>& scores, double tie_tol) {
  check(!scores.empty(), "borda_rule: empty scores");
  check(tie_tol >= 0.0, "borda_rule: tie_tol must be >= 0");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size(), 0.0);
  std::size_t winners = 0;
  for (std::size_t x = 0; x < scores.size(); ++x) {
    if (scores[x] >= top - tie_tol) ++winners;
  }
  for (std::size_t x = 0; x < scores.size(); ++x) {
    if (scores[x] >= top - tie_tol) p[x] = 1.0 / static_cast<double>(winners);
  }
  return policy(std::move(p));
}

// Default tie window used by the aggregate rules: 1e-9 of the score spread.
inline double default_tie_tol(const std::vector<double>& scores) {
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  return 1e-9 * (*hi - *lo);
}

struct equilibrium_result {
  policy pi;
  double exploitability = 0.0;
  std::size_t iterations = 0;
  bool used_lp = false;
};

// Maximal lotteries: the symmetric Nash equilibrium of the margin game.
// An all-zero margin matrix returns the uniform lottery by convention.
inline equilibrium_result maximal_lotteries(const margin_matrix& mm, double tol = 1e-9,
                                            std::size_t max_iter = 1000000) {
  const auto sol = zero_sum::solve(mm.data(), mm.size(), tol, max_iter);
  equilibrium_result out;
  out.pi = policy(sol.strategy);
  out.exploitability = sol.exploitability;
  out.iterations = sol.iterations;
  out.used_lp = sol.used_lp;
  return out;
}

}  // namespace aldist
