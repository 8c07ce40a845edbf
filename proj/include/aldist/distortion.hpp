#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aldist/math.hpp"
#include "aldist/mle.hpp"
#include "aldist/model.hpp"
#include "aldist/policy_opt.hpp"
#include "aldist/rng.hpp"
#include "aldist/rules.hpp"

namespace aldist {

// Distortion guarantee of the equilibrium-based rules: (beta/2) coth(beta/2).
inline double nlhf_bound(double beta) {
  check(beta > 0.0, "nlhf_bound: beta must be positive");
  return 0.5 * beta * (1.0 + std::exp(-beta)) / (-std::expm1(-beta));
}

enum class method_kind { borda, maximal_lotteries, rlhf, nlhf };

inline const char* method_name(method_kind m) {
  switch (m) {
    case method_kind::borda: return "borda";
    case method_kind::maximal_lotteries: return "maximal_lotteries";
    case method_kind::rlhf: return "rlhf";
    case method_kind::nlhf: return "nlhf";
  }
  return "?";
}

inline method_kind parse_method(const std::string& s) {
  if (s == "borda") return method_kind::borda;
  if (s == "maximal_lotteries" || s == "ml") return method_kind::maximal_lotteries;
  if (s == "rlhf") return method_kind::rlhf;
  if (s == "nlhf") return method_kind::nlhf;
  throw std::invalid_argument("unknown method: " + s);
}

struct distortion_report {
  std::string method;
  std::string mode;  // population | empirical
  double optimal_util = 0.0;
  double method_util = 0.0;
  double ratio = 0.0;      // optimal_util / method_util
  bool infinite = false;   // method_util was 0; ratio is meaningless then
  std::size_t trials = 0;  // 0 in population mode
  std::size_t n = 0, d = 0;
  double std_err = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t thread_budget(std::size_t work) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ALIGN_DISTORT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) cap = static_cast<std::size_t>(v);
  }
  return std::min(cap, std::max<std::size_t>(work, 1));
}

// Runs fn(i) for i in [0, work) on up to thread_budget(work) threads. Results
// must be written into index-addressed slots by fn so that reductions happen
// in deterministic order afterwards. The first exception wins and is
// rethrown.
inline void parallel_for(std::size_t work, const std::function<void(std::size_t)>& fn) {
  const std::size_t nthreads = thread_budget(work);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < work; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= work || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline policy method_policy_population(const instance& inst, method_kind method,
                                       const kl_ball& ball, double tol) {
  const win_rates rates = expected_win_rates(inst);
  switch (method) {
    case method_kind::borda: {
      const std::vector<double>& mu = inst.pairs.mu();  // rejects GeneralNu
      const std::vector<double> bc = limiting_borda(rates, mu);
      return borda_rule(bc, default_tie_tol(bc));
    }
    case method_kind::maximal_lotteries:
      return maximal_lotteries(margins(rates), tol).pi;
    case method_kind::rlhf:
      return rlhf_policy(rates, inst.pairs, ball, tol).pi;
    case method_kind::nlhf:
      return nlhf_policy(margins(rates), ball, tol).pi;
  }
  throw std::invalid_argument("method_policy_population: bad method");
}

inline policy method_policy_empirical(const comparison_counts& counts, method_kind method,
                                      const kl_ball& ball, double tol, const mle_options& mle) {
  switch (method) {
    case method_kind::borda: {
      const std::vector<double> sc = borda_scores(counts).scores;
      return borda_rule(sc, default_tie_tol(sc));
    }
    case method_kind::maximal_lotteries:
      return maximal_lotteries(margins(counts), tol).pi;
    case method_kind::rlhf:
      return rlhf_policy(counts, ball, mle, tol).pi;
    case method_kind::nlhf:
      return nlhf_policy(margins(counts), ball, tol).pi;
  }
  throw std::invalid_argument("method_policy_empirical: bad method");
}

}  // namespace detail

// Exact n -> infinity evaluation: expected win rates stand in for the sample
// limit.
inline distortion_report distortion_population(const instance& inst, method_kind method,
                                               const kl_ball& ball, double tol = 1e-9) {
  const policy pi = detail::method_policy_population(inst, method, ball, tol);
  distortion_report rep;
  rep.method = method_name(method);
  rep.mode = "population";
  rep.optimal_util = optimal_policy(inst, ball, tol).value;
  rep.method_util = avg_util_policy(inst, pi);
  rep.infinite = rep.method_util <= 0.0;
  rep.ratio = rep.infinite ? std::numeric_limits<double>::infinity()
                           : rep.optimal_util / rep.method_util;
  return rep;
}

// Monte-Carlo evaluation over independent seeded trials. Trials run in
// parallel (ALIGN_DISTORT_THREADS caps the pool) but are reduced in trial
// order, so reports are byte-stable across thread counts.
inline distortion_report distortion_empirical(const instance& inst, method_kind method,
                                              const kl_ball& ball, std::size_t n, std::size_t d,
                                              std::size_t trials, std::uint64_t seed,
                                              double tol = 1e-9, const mle_options& mle = {}) {
  check(trials >= 1, "distortion_empirical: trials >= 1");
  std::vector<double> util(trials);
  const counter_rng root(seed);
  detail::parallel_for(trials, [&](std::size_t t) {
    try {
      const comparison_counts counts = sample_comparisons(inst, n, d, root.derive(rng_stream::test, t));
      const policy pi = detail::method_policy_empirical(counts, method, ball, tol, mle);
      util[t] = avg_util_policy(inst, pi);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "trial " << t << " (method " << method_name(method) << ", n=" << n << ", d=" << d
          << "): " << e.what();
      throw std::runtime_error(msg.str());
    }
  });

  double mean = 0.0;
  for (double u : util) mean += u;
  mean /= double(trials);
  double var = 0.0;
  for (double u : util) var += (u - mean) * (u - mean);
  var = trials > 1 ? var / double(trials - 1) : 0.0;

  distortion_report rep;
  rep.method = method_name(method);
  rep.mode = "empirical";
  rep.optimal_util = optimal_policy(inst, ball, tol).value;
  rep.method_util = mean;
  rep.infinite = mean <= 0.0;
  rep.ratio = rep.infinite ? std::numeric_limits<double>::infinity() : rep.optimal_util / mean;
  rep.trials = trials;
  rep.n = n;
  rep.d = d;
  rep.std_err = std::sqrt(var / double(trials));
  rep.seed = seed;
  return rep;
}

enum class convergence_quantity { win_rates, borda };

struct convergence_row {
  std::size_t n;
  double mean_err;
  double std_err;
};

struct convergence_result {
  std::vector<convergence_row> rows;
  double slope;  // least-squares slope of log(mean_err) against log(n)
};

// Max-entry estimation error against the population quantity, averaged over
// trials, for each sample size in n_grid.
inline convergence_result convergence_experiment(const instance& inst,
                                                 convergence_quantity quantity,
                                                 const std::vector<std::size_t>& n_grid,
                                                 std::size_t d, std::size_t trials,
                                                 std::uint64_t seed) {
  check(!n_grid.empty() && trials >= 1, "convergence_experiment: empty grid or no trials");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    check(n_grid[i] > n_grid[i - 1], "convergence_experiment: n_grid must increase");
  const std::size_t m = inst.mixture.num_alternatives();
  const win_rates pop = expected_win_rates(inst);
  std::vector<double> pop_borda;
  if (quantity == convergence_quantity::borda) pop_borda = limiting_borda(pop, inst.pairs.mu());

  const counter_rng root(seed);
  std::vector<double> errs(n_grid.size() * trials);
  detail::parallel_for(errs.size(), [&](std::size_t idx) {
    const std::size_t gi = idx / trials, t = idx % trials;
    const comparison_counts counts =
        sample_comparisons(inst, n_grid[gi], d, root.derive(rng_stream::test, idx));
    double err = 0.0;
    if (quantity == convergence_quantity::win_rates) {
      const win_rates emp = empirical_win_rates(counts);
      for (std::size_t x = 0; x < m; ++x)
        for (std::size_t y = 0; y < m; ++y)
          if (x != y) err = std::max(err, std::abs(emp(x, y) - pop(x, y)));
    } else {
      const std::vector<double> sc = borda_scores(counts).scores;
      for (std::size_t x = 0; x < m; ++x) err = std::max(err, std::abs(sc[x] - pop_borda[x]));
    }
    errs[idx] = err;
  });

  convergence_result out;
  std::vector<double> lx, ly;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    double mean = 0.0;
    for (std::size_t t = 0; t < trials; ++t) mean += errs[gi * trials + t];
    mean /= double(trials);
    double var = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double dv = errs[gi * trials + t] - mean;
      var += dv * dv;
    }
    var = trials > 1 ? var / double(trials - 1) : 0.0;
    out.rows.push_back({n_grid[gi], mean, std::sqrt(var / double(trials))});
    if (mean > 0.0) {
      lx.push_back(std::log(double(n_grid[gi])));
      ly.push_back(std::log(mean));
    }
  }
  out.slope = lx.size() >= 2 ? ls_slope(lx, ly) : 0.0;
  return out;
}

}  // namespace aldist
