#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aldist/model.hpp"

namespace aldist {

using nlohmann::json;

// Shortest exact decimal for a double is what nlohmann emits already; this is
// for CSV cells, where we pin the classic round-trippable format instead.
inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void require_keys(const json& j, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  check(j.is_object(), "expected a JSON object");
  for (const char* k : required) check(j.contains(k), std::string("missing field: ") + k);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required) known = known || it.key() == k;
    for (const char* k : optional) known = known || it.key() == k;
    check(known, "unknown field: " + it.key());
  }
}

inline json instance_to_json(const instance& inst) {
  const std::size_t m = inst.mixture.num_alternatives();
  json comps = json::array();
  for (std::size_t k = 0; k < inst.mixture.num_components(); ++k)
    comps.push_back({{"weight", inst.mixture.weights()[k]}, {"utils", inst.mixture.utils()[k]}});
  json pairs;
  if (inst.pairs.kind() == pair_kind::product_of_mu) {
    pairs = {{"type", "mu"}, {"mu", inst.pairs.mu()}};
  } else {
    json rows = json::array();
    for (std::size_t x = 0; x < m; ++x) {
      json row = json::array();
      for (std::size_t y = 0; y < m; ++y) row.push_back(inst.pairs.pair_prob(x, y));
      rows.push_back(row);
    }
    pairs = {{"type", "nu"}, {"nu", rows}};
  }
  return {{"m", m}, {"beta", inst.beta}, {"components", comps}, {"pairs", pairs}};
}

inline instance instance_from_json(const json& j) {
  require_keys(j, {"m", "beta", "components", "pairs"});
  const std::size_t m = j.at("m").get<std::size_t>();
  const double beta = j.at("beta").get<double>();
  check(j.at("components").is_array() && !j.at("components").empty(),
        "components must be a nonempty array");
  std::vector<double> weights;
  std::vector<std::vector<double>> utils;
  for (const json& c : j.at("components")) {
    require_keys(c, {"weight", "utils"});
    weights.push_back(c.at("weight").get<double>());
    utils.push_back(c.at("utils").get<std::vector<double>>());
    check(utils.back().size() == m, "utils length must equal m");
  }
  const json& p = j.at("pairs");
  check(p.is_object() && p.contains("type"), "pairs must carry a type");
  const std::string type = p.at("type").get<std::string>();
  if (type == "mu") {
    require_keys(p, {"type", "mu"});
    std::vector<double> mu = p.at("mu").get<std::vector<double>>();
    check(mu.size() == m, "mu length must equal m");
    return {utility_mixture(std::move(weights), std::move(utils)), beta,
            pair_distribution::product_of_mu(std::move(mu))};
  }
  check(type == "nu", "pairs.type must be 'mu' or 'nu'");
  require_keys(p, {"type", "nu"});
  std::vector<double> nu(m * m, 0.0);
  const json& rows = p.at("nu");
  check(rows.is_array() && rows.size() == m, "nu must be an m-by-m array");
  for (std::size_t x = 0; x < m; ++x) {
    check(rows[x].is_array() && rows[x].size() == m, "nu must be an m-by-m array");
    for (std::size_t y = 0; y < m; ++y) nu[x * m + y] = rows[x][y].get<double>();
  }
  return {utility_mixture(std::move(weights), std::move(utils)), beta,
          pair_distribution::general_nu(m, nu)};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot open " + path + " for writing");
  out << text;
  check(out.good(), "failed writing " + path);
}

inline instance load_instance(const std::string& path) {
  return instance_from_json(json::parse(read_text_file(path)));
}

inline void save_instance(const std::string& path, const instance& inst) {
  write_text_file(path, instance_to_json(inst).dump(2) + "\n");
}

}  // namespace aldist
