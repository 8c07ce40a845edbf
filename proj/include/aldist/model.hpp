#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/rng.hpp"

namespace aldist {

// Probability vector over alternatives. Entries are validated nonnegative and
// renormalized so the stored vector sums to 1 up to rounding.
class policy {
 public:
  policy() = default;

  explicit policy(std::vector<double> probs) : p_(std::move(probs)) {
    check(!p_.empty(), "policy: empty");
    double sum = 0.0;
    for (double v : p_) {
      check(std::isfinite(v) && v >= -1e-15, "policy: negative or non-finite entry");
      sum += v;
    }
    check(std::abs(sum - 1.0) <= 1e-9, "policy: entries must sum to 1, got " + std::to_string(sum));
    for (double& v : p_) v = std::max(0.0, v) / sum;
  }

  static policy uniform(std::size_t m) {
    check(m >= 1, "policy::uniform: m >= 1");
    return policy(std::vector<double>(m, 1.0 / static_cast<double>(m)));
  }

  static policy point_mass(std::size_t m, std::size_t x) {
    check(x < m, "policy::point_mass: index out of range");
    std::vector<double> p(m, 0.0);
    p[x] = 1.0;
    return policy(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& probs() const { return p_; }

 private:
  std::vector<double> p_;
};

// Finite mixture of utility functions. utils[k][x] is the utility component k
// assigns to alternative x; utilities live in [0, 1].
class utility_mixture {
 public:
  utility_mixture(std::vector<double> weights, std::vector<std::vector<double>> utils)
      : weights_(std::move(weights)), utils_(std::move(utils)) {
    check(!weights_.empty() && weights_.size() == utils_.size(),
          "utility_mixture: need one weight per component");
    const std::size_t m = utils_[0].size();
    check(m >= 1, "utility_mixture: no alternatives");
    double sum = 0.0;
    for (double w : weights_) {
      check(std::isfinite(w) && w > 0.0, "utility_mixture: weights must be positive");
      sum += w;
    }
    check(std::abs(sum - 1.0) <= 1e-9, "utility_mixture: weights must sum to 1");
    for (double& w : weights_) w /= sum;
    for (const auto& u : utils_) {
      check(u.size() == m, "utility_mixture: ragged utility vectors");
      for (double v : u)
        check(std::isfinite(v) && v >= -1e-12 && v <= 1.0 + 1e-12,
              "utility_mixture: utilities must lie in [0,1]");
    }
  }

  std::size_t num_alternatives() const { return utils_[0].size(); }
  std::size_t num_components() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<std::vector<double>>& utils() const { return utils_; }
  double util(std::size_t k, std::size_t x) const { return utils_[k][x]; }

 private:
  std::vector<double> weights_;
  std::vector<std::vector<double>> utils_;
};

enum class pair_kind { product_of_mu, general_nu };

// Distribution over unordered comparison pairs. Either induced by independent
// draws of both endpoints from a marginal mu (self-pairs possible), or an
// explicit distribution nu over distinct pairs.
class pair_distribution {
 public:
  static pair_distribution product_of_mu(std::vector<double> mu) {
    pair_distribution d;
    d.kind_ = pair_kind::product_of_mu;
    check(mu.size() >= 1, "product_of_mu: empty marginal");
    double sum = 0.0;
    for (double v : mu) {
      check(std::isfinite(v) && v > 0.0, "product_of_mu: marginal must be strictly positive");
      sum += v;
    }
    check(std::abs(sum - 1.0) <= 1e-9, "product_of_mu: marginal must sum to 1");
    for (double& v : mu) v /= sum;
    d.m_ = mu.size();
    d.mu_ = std::move(mu);
    d.mu_cdf_.resize(d.m_);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.m_; ++i) {
      acc += d.mu_[i];
      d.mu_cdf_[i] = acc;
    }
    d.mu_cdf_.back() = 1.0;
    return d;
  }

  // nu is given as a dense m x m symmetric matrix of pair probabilities with a
  // zero diagonal; every off-diagonal pair must have positive probability.
  static pair_distribution general_nu(std::size_t m, const std::vector<double>& nu_dense) {
    pair_distribution d;
    d.kind_ = pair_kind::general_nu;
    check(m >= 2, "general_nu: need at least 2 alternatives");
    check(nu_dense.size() == m * m, "general_nu: matrix size mismatch");
    d.m_ = m;
    d.nu_.assign(m * m, 0.0);
    double sum = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      check(nu_dense[x * m + x] == 0.0, "general_nu: diagonal must be zero");
      for (std::size_t y = x + 1; y < m; ++y) {
        const double v = nu_dense[x * m + y];
        check(std::abs(v - nu_dense[y * m + x]) <= 1e-12, "general_nu: matrix must be symmetric");
        check(std::isfinite(v) && v > 0.0,
              "general_nu: every distinct pair needs positive probability");
        sum += v;
      }
    }
    check(std::abs(sum - 1.0) <= 1e-9, "general_nu: pair probabilities must sum to 1");
    d.pairs_.reserve(m * (m - 1) / 2);
    d.pair_cdf_.reserve(m * (m - 1) / 2);
    double acc = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t y = x + 1; y < m; ++y) {
        const double v = nu_dense[x * m + y] / sum;
        d.nu_[x * m + y] = v;
        d.nu_[y * m + x] = v;
        d.pairs_.emplace_back(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
        acc += v;
        d.pair_cdf_.push_back(acc);
      }
    }
    d.pair_cdf_.back() = 1.0;
    return d;
  }

  pair_kind kind() const { return kind_; }
  std::size_t num_alternatives() const { return m_; }
  bool is_product() const { return kind_ == pair_kind::product_of_mu; }
  const std::vector<double>& mu() const {
    check(is_product(), "pair_distribution: mu only defined for product_of_mu");
    return mu_;
  }

  // Probability that one comparison draws the unordered pair {x, y}.
  double pair_prob(std::size_t x, std::size_t y) const {
    if (kind_ == pair_kind::product_of_mu) {
      return x == y ? mu_[x] * mu_[x] : 2.0 * mu_[x] * mu_[y];
    }
    return x == y ? 0.0 : nu_[x * m_ + y];
  }

  // Draw the pair for user i, comparison j. Product form draws both endpoints
  // independently from mu, so x == y happens with probability mu(x)^2.
  std::pair<std::size_t, std::size_t> sample_pair(const counter_rng& rng, std::uint64_t i,
                                                  std::uint64_t j) const {
    if (kind_ == pair_kind::product_of_mu) {
      const std::size_t x = pick_from_cdf(mu_cdf_, rng.uniform(rng_stream::pair, i, j, 0));
      const std::size_t y = pick_from_cdf(mu_cdf_, rng.uniform(rng_stream::pair, i, j, 1));
      return {x, y};
    }
    const std::size_t k = pick_from_cdf(pair_cdf_, rng.uniform(rng_stream::pair, i, j, 0));
    return {pairs_[k].first, pairs_[k].second};
  }

 private:
  pair_distribution() = default;

  pair_kind kind_ = pair_kind::product_of_mu;
  std::size_t m_ = 0;
  std::vector<double> mu_;
  std::vector<double> mu_cdf_;
  std::vector<double> nu_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
  std::vector<double> pair_cdf_;
};

// A preference population: utility mixture, comparison noise level beta, and
// the distribution of compared pairs.
struct instance {
  instance(utility_mixture mix, double beta_in, pair_distribution pairs_in)
      : mixture(std::move(mix)), beta(beta_in), pairs(std::move(pairs_in)) {
    check(std::isfinite(beta) && beta > 0.0 && beta <= 700.0,
          "instance: beta must lie in (0, 700]");
    check(mixture.num_alternatives() == pairs.num_alternatives(),
          "instance: mixture and pair distribution disagree on m");
  }

  std::size_t num_alternatives() const { return mixture.num_alternatives(); }

  utility_mixture mixture;
  double beta;
  pair_distribution pairs;
};

// Expected win rate matrix p(x over y). Complement pairs are stored so that
// p(x,y) + p(y,x) == 1 holds exactly as computed.
class win_rates {
 public:
  win_rates(std::size_t m, std::vector<double> p) : m_(m), p_(std::move(p)) {
    check(p_.size() == m_ * m_, "win_rates: size mismatch");
    for (std::size_t x = 0; x < m_; ++x) {
      check(std::abs(p_[x * m_ + x] - 0.5) <= 1e-12, "win_rates: diagonal must be 1/2");
      for (std::size_t y = 0; y < m_; ++y) {
        const double v = p_[x * m_ + y];
        check(std::isfinite(v) && v >= -1e-12 && v <= 1.0 + 1e-12, "win_rates: entry outside [0,1]");
        check(std::abs(v + p_[y * m_ + x] - 1.0) <= 1e-12,
              "win_rates: complement pairs must sum to 1");
      }
    }
  }

  std::size_t size() const { return m_; }
  double operator()(std::size_t x, std::size_t y) const { return p_[x * m_ + y]; }

 private:
  std::size_t m_;
  std::vector<double> p_;
};

// Raw comparison tallies. counts(x, y) is the number of comparisons of the
// pair {x, y} decided for x; the diagonal records self-pair draws.
class comparison_counts {
 public:
  explicit comparison_counts(std::size_t m) : m_(m), c_(m * m, 0) {
    check(m >= 1, "comparison_counts: m >= 1");
  }

  comparison_counts(std::size_t m, std::vector<std::uint64_t> c) : m_(m), c_(std::move(c)) {
    check(c_.size() == m_ * m_, "comparison_counts: size mismatch");
  }

  std::size_t size() const { return m_; }
  std::uint64_t operator()(std::size_t x, std::size_t y) const { return c_[x * m_ + y]; }
  std::uint64_t& at(std::size_t x, std::size_t y) { return c_[x * m_ + y]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (std::uint64_t v : c_) t += v;
    return t;
  }

 private:
  std::size_t m_;
  std::vector<std::uint64_t> c_;
};

inline win_rates expected_win_rates(const instance& inst) {
  const std::size_t m = inst.num_alternatives();
  const auto& mix = inst.mixture;
  std::vector<double> p(m * m, 0.5);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      double v = 0.0;
      for (std::size_t k = 0; k < mix.num_components(); ++k) {
        v += mix.weights()[k] * sigmoid(inst.beta * (mix.util(k, x) - mix.util(k, y)));
      }
      p[x * m + y] = v;
      p[y * m + x] = 1.0 - v;
    }
  }
  return win_rates(m, std::move(p));
}

// Population average utility of each alternative.
inline std::vector<double> avg_util(const instance& inst) {
  const auto& mix = inst.mixture;
  const std::size_t m = mix.num_alternatives();
  std::vector<double> a(m, 0.0);
  for (std::size_t k = 0; k < mix.num_components(); ++k) {
    const double w = mix.weights()[k];
    for (std::size_t x = 0; x < m; ++x) a[x] += w * mix.util(k, x);
  }
  return a;
}

inline double avg_util_policy(const instance& inst, const policy& pi) {
  check(pi.size() == inst.num_alternatives(), "avg_util_policy: dimension mismatch");
  const std::vector<double> a = avg_util(inst);
  double v = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) v += a[x] * pi[x];
  return v;
}

// Draw n users with d comparisons each. Each user first draws a utility
// component, then d pairs; a user labels each distinct unordered pair at most
// once and repeats of the same pair reuse that label. All draws are keyed
// functions of (seed, user, comparison), so results do not depend on
// evaluation order.
inline comparison_counts sample_comparisons(const instance& inst, std::uint64_t n_users,
                                            std::uint64_t d_per_user, std::uint64_t seed) {
  check(n_users >= 1 && d_per_user >= 1, "sample_comparisons: need n >= 1 and d >= 1");
  check(n_users <= (1ULL << 53) / d_per_user,
        "sample_comparisons: n * d exceeds the exactly representable count range");
  const std::size_t m = inst.num_alternatives();
  const auto& mix = inst.mixture;
  const counter_rng rng(seed);

  std::vector<double> comp_cdf(mix.num_components());
  double acc = 0.0;
  for (std::size_t k = 0; k < mix.num_components(); ++k) {
    acc += mix.weights()[k];
    comp_cdf[k] = acc;
  }
  comp_cdf.back() = 1.0;

  comparison_counts counts(m);
  for (std::uint64_t i = 0; i < n_users; ++i) {
    const std::size_t k = pick_from_cdf(comp_cdf, rng.uniform(rng_stream::component, i));
    for (std::uint64_t j = 0; j < d_per_user; ++j) {
      const auto [x, y] = inst.pairs.sample_pair(rng, i, j);
      if (x == y) {
        counts.at(x, x) += 1;
        continue;
      }
      const std::size_t lo = std::min(x, y), hi = std::max(x, y);
      const double p_lo = sigmoid(inst.beta * (mix.util(k, lo) - mix.util(k, hi)));
      // Keyed by (user, pair) only: re-drawing the same pair for the same user
      // reproduces the same label.
      const bool lo_wins = rng.uniform(rng_stream::label, i, lo * m + hi) < p_lo;
      if (lo_wins) {
        counts.at(lo, hi) += 1;
      } else {
        counts.at(hi, lo) += 1;
      }
    }
  }
  return counts;
}

// Empirical win rates; unobserved pairs (and the diagonal) fall back to 1/2.
inline win_rates empirical_win_rates(const comparison_counts& counts) {
  const std::size_t m = counts.size();
  std::vector<double> p(m * m, 0.5);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = x + 1; y < m; ++y) {
      const std::uint64_t w = counts(x, y), l = counts(y, x);
      if (w + l == 0) continue;
      const double v = static_cast<double>(w) / static_cast<double>(w + l);
      p[x * m + y] = v;
      p[y * m + x] = 1.0 - v;
    }
  }
  return win_rates(m, std::move(p));
}

}  // namespace aldist
