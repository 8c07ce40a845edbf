// align-distort: experiment runner for the alignment-distortion library.
// Subcommands: gen, run, verify, winrates, mle, policy. Deterministic given
// flags + seed; config echo embedded in every output.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <aldist/aldist.hpp>

namespace {

using namespace aldist;

constexpr int kSchema = 1;

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct table {
  std::vector<std::string> cols;
  std::vector<std::vector<std::string>> rows;

  void row(std::vector<std::string> r) { rows.push_back(std::move(r)); }
};

// CSV: leading comment line carries the schema version and the full config
// echo; JSON: everything in one object. Both byte-deterministic.
std::string render(const table& t, const json& config, const std::string& format) {
  if (format == "json") {
    json rows = json::array();
    for (const auto& r : t.rows) {
      json o;
      for (std::size_t i = 0; i < t.cols.size(); ++i) {
        o[t.cols[i]] = r[i];
      }
      rows.push_back(o);
    }
    return json{{"schema", kSchema}, {"config", config}, {"rows", rows}}.dump(2) + "\n";
  }
  check(format == "csv", "unknown format: " + format + " (want csv or json)");
  std::string out = "# schema=" + std::to_string(kSchema) + " config=" + config.dump() + "\n";
  for (std::size_t i = 0; i < t.cols.size(); ++i)
    out += (i ? "," : "") + csv_field(t.cols[i]);
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
    out += "\n";
  }
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

// --instance accepts a JSON file path or an inline generator spec of the form
// name(k=v,k=v,...), e.g. universal-lb(m=200,beta=5,eps=1e-4,xi=1).
bool is_gen_spec(const std::string& s) {
  return !s.empty() && s.back() == ')' && s.find('(') != std::string::npos;
}

std::map<std::string, double> parse_params(const std::string& body) {
  std::map<std::string, double> kv;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    check(eq != std::string::npos, "generator spec: expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return kv;
}

double take(std::map<std::string, double>& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const double v = it->second;
  kv.erase(it);
  return v;
}

instance generate(const std::string& spec) {
  const auto open = spec.find('(');
  const std::string name = spec.substr(0, open);
  auto kv = parse_params(spec.substr(open + 1, spec.size() - open - 2));
  instance inst = [&]() -> instance {
    if (name == "universal-lb")
      return gen_universal_lb(static_cast<std::size_t>(take(kv, "m", 200)), take(kv, "beta", 5.0),
                              take(kv, "eps", 1e-4), take(kv, "xi", 1.0))
          .inst;
    if (name == "borda-lb") {
      const double beta = take(kv, "beta", 5.0);
      const double eps = take(kv, "eps", 1e-4);
      return gen_borda_lb(beta, take(kv, "gamma", borda_lb_gamma_star(beta)), eps,
                          take(kv, "eps_prime", eps * eps), take(kv, "mu_a", 1e-3),
                          take(kv, "mu_c", 1e-3))
          .inst;
    }
    if (name == "rlhf-lb")
      return gen_rlhf_lb(take(kv, "beta", 5.0), static_cast<std::size_t>(take(kv, "m", 0)),
                         take(kv, "eps", 0.0), take(kv, "tau", 1.0))
          .inst;
    if (name == "unbounded-seq")
      return gen_unbounded_seq(take(kv, "beta", 5.0), static_cast<std::size_t>(take(kv, "m", 14)),
                               take(kv, "eps", 1e-3))
          .inst;
    throw std::invalid_argument("unknown generator: " + name);
  }();
  check(kv.empty(), "generator spec: unknown parameter '" +
                        (kv.empty() ? "" : kv.begin()->first) + "' for " + name);
  return inst;
}

instance load_or_generate(const std::string& spec) {
  check(!spec.empty(), "--instance is required (path or generator spec)");
  return is_gen_spec(spec) ? generate(spec) : load_instance(spec);
}

policy parse_pi_ref(const std::string& spec, std::size_t m) {
  if (spec.empty() || spec == "uniform") return policy::uniform(m);
  std::vector<double> p;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) p.push_back(std::stod(item));
  check(p.size() == m, "--pi-ref: expected " + std::to_string(m) + " entries, got " +
                           std::to_string(p.size()));
  return policy(std::move(p));
}

std::vector<std::size_t> parse_counts(const std::string& spec) {
  std::vector<std::size_t> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  check(!out.empty(), "--n: expected one or more counts");
  return out;
}

// Shared run/winrates/mle/policy options. Flags beat config-file values.
struct run_config {
  std::string instance_spec, method, pi_ref = "uniform", n, format = "csv", out, config_path;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double tol = 1e-9;
  std::uint64_t d = 1, trials = 20, seed = 1;

  // CLI11 handles for override detection.
  std::map<std::string, CLI::Option*> opts;

  void add_common(CLI::App* cmd, bool with_method = true) {
    opts["instance"] = cmd->add_option("--instance", instance_spec,
                                       "instance JSON path or generator spec name(k=v,...)");
    if (with_method) opts["method"] = cmd->add_option("--method", method, "method name");
    opts["pi_ref"] = cmd->add_option("--pi-ref", pi_ref, "uniform or comma-separated vector");
    opts["tau"] = cmd->add_option("--tau", tau, "KL budget (default log m)");
    opts["lambda"] = cmd->add_option("--lambda", lambda, "regularization strength (dpo)");
    opts["n"] = cmd->add_option("--n", n, "users (comma list = convergence grid)");
    opts["d"] = cmd->add_option("--d", d, "comparisons per user");
    opts["trials"] = cmd->add_option("--trials", trials, "independent trials");
    opts["seed"] = cmd->add_option("--seed", seed, "RNG seed");
    opts["tol"] = cmd->add_option("--tol", tol, "solver tolerance");
    opts["out"] = cmd->add_option("--out", out, "output path (default stdout)");
    opts["format"] = cmd->add_option("--format", format, "csv or json")
                         ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--config", config_path, "JSON config file (flags override)");
  }

  void apply_config_file() {
    if (config_path.empty()) return;
    const json j = json::parse(read_text_file(config_path));
    require_keys(j, {},
                 {"instance", "method", "pi_ref", "tau", "lambda", "n", "d", "trials", "seed",
                  "tol", "out", "format"});
    auto unset = [&](const char* k) {
      return j.contains(k) && (!opts.count(k) || opts[k]->count() == 0);
    };
    if (unset("instance")) instance_spec = j["instance"].get<std::string>();
    if (unset("method")) method = j["method"].get<std::string>();
    if (unset("pi_ref")) pi_ref = j["pi_ref"].get<std::string>();
    if (unset("tau")) tau = j["tau"].get<double>();
    if (unset("lambda")) lambda = j["lambda"].get<double>();
    if (unset("n")) n = j["n"].is_string() ? j["n"].get<std::string>()
                                           : std::to_string(j["n"].get<std::uint64_t>());
    if (unset("d")) d = j["d"].get<std::uint64_t>();
    if (unset("trials")) trials = j["trials"].get<std::uint64_t>();
    if (unset("seed")) seed = j["seed"].get<std::uint64_t>();
    if (unset("tol")) tol = j["tol"].get<double>();
    if (unset("out")) out = j["out"].get<std::string>();
    if (unset("format")) format = j["format"].get<std::string>();
  }

  double tau_or_default(std::size_t m) const {
    return std::isnan(tau) ? std::log(static_cast<double>(m)) : tau;
  }

  json echo(const std::string& command, const std::string& mode, std::size_t m) const {
    json j = {{"command", command},       {"instance", instance_spec}, {"pi_ref", pi_ref},
              {"tau", tau_or_default(m)}, {"d", d},                    {"seed", seed},
              {"tol", tol},               {"format", format}};
    if (!mode.empty()) j["mode"] = mode;
    if (!method.empty()) j["method"] = method;
    if (!n.empty()) j["n"] = n;
    if (!std::isnan(lambda)) j["lambda"] = lambda;
    if (trials) j["trials"] = trials;
    if (!config_path.empty()) j["config_file"] = config_path;
    return j;
  }
};

void report_row(table& t, const distortion_report& rep) {
  t.cols = {"method",      "mode", "optimal_util", "method_util", "ratio",
            "infinite",    "n",    "d",            "trials",      "std_err",
            "seed"};
  t.row({rep.method, rep.mode, g17(rep.optimal_util), g17(rep.method_util), g17(rep.ratio),
         rep.infinite ? "1" : "0", std::to_string(rep.n), std::to_string(rep.d),
         std::to_string(rep.trials), g17(rep.std_err), std::to_string(rep.seed)});
}

int cmd_run(const std::string& mode, run_config& cfg) {
  cfg.apply_config_file();
  const instance inst = load_or_generate(cfg.instance_spec);
  const std::size_t m = inst.num_alternatives();
  table t;
  if (mode == "convergence") {
    const std::string q = cfg.method.empty() ? "winrates" : cfg.method;
    check(q == "winrates" || q == "win_rates" || q == "borda",
          "convergence: --method must be winrates or borda");
    const convergence_quantity quantity =
        q == "borda" ? convergence_quantity::borda : convergence_quantity::win_rates;
    const std::vector<std::size_t> grid =
        cfg.n.empty() ? std::vector<std::size_t>{1000, 10000, 100000, 1000000}
                      : parse_counts(cfg.n);
    const convergence_result res =
        convergence_experiment(inst, quantity, grid, cfg.d, cfg.trials, cfg.seed);
    t.cols = {"n", "mean_err", "std_err", "slope"};
    for (const convergence_row& r : res.rows)
      t.row({std::to_string(r.n), g17(r.mean_err), g17(r.std_err), g17(res.slope)});
  } else {
    const kl_ball ball(parse_pi_ref(cfg.pi_ref, m), cfg.tau_or_default(m));
    const method_kind method = parse_method(cfg.method);
    distortion_report rep;
    if (mode == "population") {
      rep = distortion_population(inst, method, ball, cfg.tol);
    } else {
      check(mode == "empirical", "run: mode must be population, empirical or convergence");
      check(!cfg.n.empty(), "empirical: --n is required");
      const std::vector<std::size_t> ns = parse_counts(cfg.n);
      check(ns.size() == 1, "empirical: --n takes a single count");
      rep = distortion_empirical(inst, method, ball, ns[0], cfg.d, cfg.trials, cfg.seed, cfg.tol);
    }
    report_row(t, rep);
  }
  emit(render(t, cfg.echo("run", mode, m), cfg.format), cfg.out);
  return 0;
}

int cmd_winrates(run_config& cfg) {
  cfg.apply_config_file();
  const instance inst = load_or_generate(cfg.instance_spec);
  const std::size_t m = inst.num_alternatives();
  const bool empirical = !cfg.n.empty();
  win_rates rates = empirical
                        ? empirical_win_rates(sample_comparisons(
                              inst, parse_counts(cfg.n)[0], cfg.d, cfg.seed))
                        : expected_win_rates(inst);
  const margin_matrix M = margins(rates);
  table t;
  t.cols = {"x", "y", "p", "margin"};
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      if (x != y)
        t.row({std::to_string(x), std::to_string(y), g17(rates(x, y)), g17(M(x, y))});
  emit(render(t, cfg.echo("winrates", empirical ? "empirical" : "population", m), cfg.format),
       cfg.out);
  return 0;
}

int cmd_mle(run_config& cfg) {
  cfg.apply_config_file();
  const instance inst = load_or_generate(cfg.instance_spec);
  const std::size_t m = inst.num_alternatives();
  rewards r;
  std::string mode;
  if (cfg.n.empty()) {
    mode = "population";
    r = fit_bt_mle_population(expected_win_rates(inst), inst.pairs, cfg.tol);
  } else {
    mode = "empirical";
    mle_options opt;
    opt.tol = cfg.tol;
    r = fit_bt_mle(sample_comparisons(inst, parse_counts(cfg.n)[0], cfg.d, cfg.seed), opt);
  }
  table t;
  t.cols = {"alt", "reward"};
  for (std::size_t x = 0; x < m; ++x) t.row({std::to_string(x), g17(r.r[x])});
  emit(render(t, cfg.echo("mle", mode, m), cfg.format), cfg.out);
  return 0;
}

int cmd_policy(run_config& cfg) {
  cfg.apply_config_file();
  const instance inst = load_or_generate(cfg.instance_spec);
  const std::size_t m = inst.num_alternatives();
  const kl_ball ball(parse_pi_ref(cfg.pi_ref, m), cfg.tau_or_default(m));
  const bool empirical = !cfg.n.empty();
  std::optional<comparison_counts> counts;
  std::optional<win_rates> rates;
  if (empirical)
    counts.emplace(sample_comparisons(inst, parse_counts(cfg.n)[0], cfg.d, cfg.seed));
  else
    rates.emplace(expected_win_rates(inst));

  policy pi = policy::uniform(m);
  json diag;
  const std::string name = cfg.method;
  if (name == "borda") {
    const std::vector<double> sc =
        empirical ? borda_scores(*counts).scores : limiting_borda(*rates, inst.pairs.mu());
    pi = borda_rule(sc, default_tie_tol(sc));
  } else if (name == "ml" || name == "maximal_lotteries") {
    const equilibrium_result eq =
        maximal_lotteries(empirical ? margins(*counts) : margins(*rates), cfg.tol);
    pi = eq.pi;
    diag["exploitability"] = eq.exploitability;
  } else if (name == "rlhf") {
    const ball_opt_result res = empirical ? rlhf_policy(*counts, ball, {}, cfg.tol)
                                          : rlhf_policy(*rates, inst.pairs, ball, cfg.tol);
    pi = res.pi;
    diag["value"] = res.value;
    diag["kl"] = res.kl;
    diag["lambda"] = res.lambda;
  } else if (name == "nlhf") {
    const nlhf_result res =
        nlhf_policy(empirical ? margins(*counts) : margins(*rates), ball, cfg.tol);
    pi = res.pi;
    diag["exploitability"] = res.exploitability;
    diag["kl"] = res.kl;
    diag["lambda"] = res.lambda;
  } else if (name == "dpo") {
    check(empirical, "dpo: needs sampled comparisons; pass --n");
    check(!std::isnan(cfg.lambda) && cfg.lambda > 0.0, "dpo: --lambda > 0 is required");
    pi = dpo_policy(*counts, ball.pi_ref, cfg.lambda);
  } else if (name == "optimal") {
    const ball_opt_result res = optimal_policy(inst, ball, cfg.tol);
    pi = res.pi;
    diag["value"] = res.value;
    diag["kl"] = res.kl;
  } else {
    throw std::invalid_argument("policy: unknown method '" + name +
                                "' (borda|ml|rlhf|nlhf|dpo|optimal)");
  }

  json config = cfg.echo("policy", empirical ? "empirical" : "population", m);
  if (!diag.empty()) config["diagnostics"] = diag;
  table t;
  t.cols = {"alt", "prob"};
  for (std::size_t x = 0; x < m; ++x) t.row({std::to_string(x), g17(pi[x])});
  emit(render(t, config, cfg.format), cfg.out);
  return 0;
}

// gen writes <prefix>.instance.json and <prefix>.analytics.json.
void write_gen(const std::string& prefix, const instance& inst, const json& analytics) {
  save_instance(prefix + ".instance.json", inst);
  write_text_file(prefix + ".analytics.json", analytics.dump(2) + "\n");
  std::cout << "wrote " << prefix << ".instance.json and " << prefix << ".analytics.json\n";
}

int cmd_gen_universal(std::size_t m, double beta, double eps, double xi, std::string prefix) {
  const universal_lb_result res = gen_universal_lb(m, beta, eps, xi);
  const win_rates rates = expected_win_rates(res.inst);
  double dev = 0.0;
  for (std::size_t x = 0; x < m; ++x)
    for (std::size_t y = 0; y < m; ++y)
      if (x != y) dev = std::max(dev, std::abs(rates(x, y) - 0.5));
  const json analytics = {{"generator", "universal-lb"}, {"m", m},
                          {"beta", beta},                {"eps", eps},
                          {"xi", xi},                    {"weight_a", res.weight_a},
                          {"floor_ratio", res.floor_ratio}, {"win_rate_a_b", res.win_rate_a_b},
                          {"max_win_rate_dev_from_half", dev}};
  write_gen(prefix, res.inst, analytics);
  std::cout << "floor_ratio=" << g17(res.floor_ratio)
            << " max|p-1/2|=" << g17(dev) << "\n";
  return 0;
}

int cmd_gen_borda(double beta, double gamma, double eps, double eps_prime, double mu_a,
                  double mu_c, std::string prefix) {
  if (std::isnan(gamma)) gamma = borda_lb_gamma_star(beta);
  if (std::isnan(eps_prime)) eps_prime = eps * eps;
  const borda_lb_result res = gen_borda_lb(beta, gamma, eps, eps_prime, mu_a, mu_c);
  const std::vector<double> bc = limiting_borda(expected_win_rates(res.inst), res.inst.pairs.mu());
  const std::size_t winner = std::max_element(bc.begin(), bc.end()) - bc.begin();
  const json analytics = {{"generator", "borda-lb"},
                          {"beta", beta},
                          {"gamma", gamma},
                          {"eps", eps},
                          {"eps_prime", eps_prime},
                          {"mu_a", mu_a},
                          {"mu_c", mu_c},
                          {"p_a", res.p_a},
                          {"p_b", res.p_b},
                          {"p_c", res.p_c},
                          {"realized_ratio", res.realized_ratio},
                          {"limit_factor", res.limit_factor},
                          {"limiting_borda", bc},
                          {"borda_winner", winner}};
  write_gen(prefix, res.inst, analytics);
  std::cout << "realized_ratio=" << g17(res.realized_ratio) << " borda_winner=" << winner << "\n";
  return 0;
}

int cmd_gen_rlhf(double beta, std::size_t m, double eps, double tau, std::string prefix) {
  const rlhf_lb_result res = gen_rlhf_lb(beta, m, eps, tau);
  const json analytics = {{"generator", "rlhf-lb"},
                          {"beta", beta},
                          {"m", res.inst.num_alternatives()},
                          {"eps", res.eps},
                          {"delta", res.delta},
                          {"tau", res.ball.tau},
                          {"eta1", res.eta1},
                          {"eta2", res.eta2},
                          {"log_eps_threshold", res.log_eps_threshold},
                          {"threshold_met", res.threshold_met},
                          {"construction_valid", res.construction_valid},
                          {"borda_gap", res.borda_gap},
                          {"pop_rewards", res.pop_rewards.r},
                          {"pi_ref", res.ball.pi_ref.probs()}};
  write_gen(prefix, res.inst, analytics);
  std::cout << "m=" << res.inst.num_alternatives() << " eps=" << g17(res.eps)
            << " r_a=" << g17(res.pop_rewards.r[0]) << " r_b=" << g17(res.pop_rewards.r[1])
            << "\n";
  return 0;
}

int cmd_gen_unbounded(double beta, std::size_t m, double eps, std::string prefix) {
  const unbounded_seq_result res = gen_unbounded_seq(beta, m, eps);
  const json analytics = {{"generator", "unbounded-seq"},
                          {"beta", beta},
                          {"m", m},
                          {"eps", eps},
                          {"avg_utils", res.avg_utils},
                          {"delta_prime", res.delta_prime},
                          {"step_win_rate", res.step_win_rate},
                          {"decrement_bound", res.decrement_bound}};
  write_gen(prefix, res.inst, analytics);
  std::cout << "avg_utils:";
  for (double v : res.avg_utils) std::cout << " " << g17(v);
  std::cout << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out,
               const std::string& format) {
  const std::vector<criterion_result> results = run_criteria(suite_ids(suite), seed);
  bool all = true;
  for (const criterion_result& r : results) {
    std::cout << "criterion " << r.id << " " << r.name << ": " << (r.pass ? "PASS" : "FAIL")
              << " [" << r.detail << "]\n";
    all = all && r.pass;
  }
  std::cout << "suite " << suite << " seed " << seed << ": " << (all ? "PASS" : "FAIL") << "\n";
  if (!out.empty()) {
    if (format == "csv") {
      table t;
      t.cols = {"id", "name", "pass", "detail"};
      for (const criterion_result& r : results)
        t.row({std::to_string(r.id), r.name, r.pass ? "1" : "0", r.detail});
      emit(render(t, json{{"command", "verify"}, {"suite", suite}, {"seed", seed}}, "csv"), out);
    } else {
      emit(render_report(results, suite, seed), out);
    }
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"alignment distortion experiments"};
  app.require_subcommand(1);
  std::function<int()> action;

  // gen
  CLI::App* gen = app.add_subcommand("gen", "materialize a lower-bound instance family");
  gen->require_subcommand(1);
  {
    auto* c = gen->add_subcommand("universal-lb", "indistinguishable-from-ties family");
    auto m = std::make_shared<std::size_t>(200);
    auto beta = std::make_shared<double>(5.0), eps = std::make_shared<double>(1e-4),
         xi = std::make_shared<double>(1.0);
    auto prefix = std::make_shared<std::string>("universal_lb");
    c->add_option("--m", *m, "alternatives");
    c->add_option("--beta", *beta, "BT temperature");
    c->add_option("--eps", *eps, "utility scale of the opposing component");
    c->add_option("--xi", *xi, "tie-breaking factor; 1 = exact ties");
    c->add_option("--out", *prefix, "output prefix");
    c->callback([=, &action] {
      action = [=] { return cmd_gen_universal(*m, *beta, *eps, *xi, *prefix); };
    });
  }
  {
    auto* c = gen->add_subcommand("borda-lb", "three-alternative Borda failure family");
    auto beta = std::make_shared<double>(5.0);
    auto gamma = std::make_shared<double>(std::numeric_limits<double>::quiet_NaN());
    auto eps = std::make_shared<double>(1e-4);
    auto eps_prime = std::make_shared<double>(std::numeric_limits<double>::quiet_NaN());
    auto mu_a = std::make_shared<double>(1e-3), mu_c = std::make_shared<double>(1e-3);
    auto prefix = std::make_shared<std::string>("borda_lb");
    c->add_option("--beta", *beta, "BT temperature");
    c->add_option("--gamma", *gamma, "utility gap (default: optimized)");
    c->add_option("--eps", *eps, "small utility of c for b-lovers");
    c->add_option("--eps-prime", *eps_prime, "extra utility of c for c-lovers (default eps^2)");
    c->add_option("--mu-a", *mu_a, "sampling mass of a");
    c->add_option("--mu-c", *mu_c, "sampling mass of c");
    c->add_option("--out", *prefix, "output prefix");
    c->callback([=, &action] {
      action = [=] {
        return cmd_gen_borda(*beta, *gamma, *eps, *eps_prime, *mu_a, *mu_c, *prefix);
      };
    });
  }
  {
    auto* c = gen->add_subcommand("rlhf-lb", "exponential-distortion RLHF family");
    auto beta = std::make_shared<double>(5.0);
    auto m = std::make_shared<std::size_t>(0);
    auto eps = std::make_shared<double>(0.0), tau = std::make_shared<double>(1.0);
    auto prefix = std::make_shared<std::string>("rlhf_lb");
    c->add_option("--beta", *beta, "BT temperature (>= 1)");
    c->add_option("--m", *m, "alternatives (0 = minimal admissible)");
    c->add_option("--eps", *eps, "reference mass off {a,b} (0 = auto)");
    c->add_option("--tau", *tau, "KL budget");
    c->add_option("--out", *prefix, "output prefix");
    c->callback([=, &action] {
      action = [=] { return cmd_gen_rlhf(*beta, *m, *eps, *tau, *prefix); };
    });
  }
  {
    auto* c = gen->add_subcommand("unbounded-seq", "iterated-deployment utility decay family");
    auto beta = std::make_shared<double>(5.0);
    auto m = std::make_shared<std::size_t>(14);
    auto eps = std::make_shared<double>(1e-3);
    auto prefix = std::make_shared<std::string>("unbounded_seq");
    c->add_option("--beta", *beta, "BT temperature");
    c->add_option("--m", *m, "sequence length");
    c->add_option("--eps", *eps, "mass off the adjacent-pair path");
    c->add_option("--out", *prefix, "output prefix");
    c->callback([=, &action] {
      action = [=] { return cmd_gen_unbounded(*beta, *m, *eps, *prefix); };
    });
  }

  // run
  CLI::App* run = app.add_subcommand("run", "distortion and convergence experiments");
  run->require_subcommand(1);
  auto run_cfgs = std::make_shared<std::vector<std::shared_ptr<run_config>>>();
  for (const std::string mode : {"population", "empirical", "convergence"}) {
    auto* c = run->add_subcommand(mode, mode + " experiment");
    auto cfg = std::make_shared<run_config>();
    run_cfgs->push_back(cfg);
    cfg->add_common(c);
    c->callback([=, &action] { action = [=] { return cmd_run(mode, *cfg); }; });
  }

  // winrates / mle / policy
  {
    auto* c = app.add_subcommand("winrates", "population or sampled win-rate table");
    auto cfg = std::make_shared<run_config>();
    cfg->add_common(c, false);
    c->callback([=, &action] { action = [=] { return cmd_winrates(*cfg); }; });
  }
  {
    auto* c = app.add_subcommand("mle", "Bradley-Terry reward fit");
    auto cfg = std::make_shared<run_config>();
    cfg->add_common(c, false);
    c->callback([=, &action] { action = [=] { return cmd_mle(*cfg); }; });
  }
  {
    auto* c = app.add_subcommand("policy", "compute one method's policy");
    auto cfg = std::make_shared<run_config>();
    cfg->add_common(c);
    c->callback([=, &action] { action = [=] { return cmd_policy(*cfg); }; });
  }

  // verify
  {
    auto* c = app.add_subcommand("verify", "run an acceptance suite");
    auto suite = std::make_shared<std::string>("all");
    auto seed = std::make_shared<std::uint64_t>(1);
    auto out = std::make_shared<std::string>();
    auto format = std::make_shared<std::string>("json");
    c->add_option("suite", *suite, "sandwich|equivalences|bounds|lowerbounds|convergence|all");
    c->add_option("--seed", *seed, "RNG seed");
    c->add_option("--out", *out, "write the report here as well");
    c->add_option("--format", *format, "report format: json or csv")
        ->check(CLI::IsMember({"csv", "json"}));
    c->callback([=, &action] {
      action = [=] { return cmd_verify(*suite, *seed, *out, *format); };
    });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return action ? action() : 0;
  } catch (const divergence_error& e) {
    json set = json::array();
    for (std::size_t i : e.dominant_set()) set.push_back(i);
    std::cout << json{{"error", {{"type", "divergence"}, {"message", e.what()},
                                 {"dominant_set", set}}}}
                     .dump(2)
              << "\n";
    return 3;
  } catch (const solver_error& e) {
    std::cout << json{{"error",
                       {{"type", "solver"}, {"message", e.what()}, {"residual", e.residual()}}}}
                     .dump(2)
              << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
