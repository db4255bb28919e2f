#pragma once

// Run configuration for the verification harness: parsing, validation and a
// stable content hash.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qim/errors.hpp"

namespace qim::harness {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& all_suites() {
  static const std::vector<std::string> names = {
      "lemma2-monotonicity", "lemma1-formbound", "norm-equivalence", "comparability",
      "mean-lambda",         "kubo-oracle",      "frechet",          "estimate-chain",
      "taylor-radius",       "transport",        "route-independence"};
  return names;
}

// Suites whose checks perturb inside a hood and so need target < 1 - beta0.
inline bool hood_dependent(const std::string& suite) {
  return suite == "norm-equivalence" || suite == "comparability" || suite == "taylor-radius" ||
         suite == "transport" || suite == "route-independence";
}

struct SpectrumSpec {
  std::string kind = "linear";  // linear: h_k = 1 + c k; power: h_k = 1 + c k^s
  double c = 1.0;
  double s = 1.0;
};

struct PerturbationSpec {
  std::string kind = "dense";  // dense | diagonal | offdiag
  double target_eps_norm = 0.3;
};

struct RunConfig {
  int dim = 6;
  double epsilon = 0.25;
  double beta0 = 0.5;
  SpectrumSpec spectrum;
  PerturbationSpec perturbation;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> suites = all_suites();
  std::string output_dir = "qim-out";
  int instances = 10;
  int max_order = 4;  // Kubo and estimate-chain orders 1..max_order
  std::size_t oracle_samples = 100000;
  int norm_samples = 20;  // random Y per instance in norm-equivalence
  int taylor_order = 6;
};

inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (c.dim < 1 || c.dim > 64) fail("dim must lie in [1, 64]");
  if (!(c.epsilon > 0.0 && c.epsilon < 0.5)) fail("epsilon must lie in (0, 1/2)");
  if (!(c.beta0 > 0.0 && c.beta0 < 1.0)) fail("beta0 must lie in (0, 1)");
  if (c.spectrum.kind != "linear" && c.spectrum.kind != "power")
    fail("spectrum.kind must be linear or power");
  if (!(c.spectrum.c > 0.0) || !std::isfinite(c.spectrum.c)) fail("spectrum.c must be positive");
  if (!(c.spectrum.s > 0.0) || !std::isfinite(c.spectrum.s)) fail("spectrum.s must be positive");
  const auto& pk = c.perturbation.kind;
  if (pk != "dense" && pk != "diagonal" && pk != "offdiag")
    fail("perturbation.kind must be dense, diagonal or offdiag");
  if (pk == "offdiag" && c.dim < 2) fail("offdiag perturbations need dim >= 2");
  if (!(c.perturbation.target_eps_norm > 0.0)) fail("perturbation.target_eps_norm must be > 0");
  if (c.seeds.empty()) fail("seeds must not be empty");
  if (c.instances < 0) fail("instances must be >= 0");
  if (c.max_order < 1 || c.max_order > 6) fail("max_order must lie in [1, 6]");
  if (c.oracle_samples < 2) fail("oracle_samples must be >= 2");
  if (c.norm_samples < 1) fail("norm_samples must be >= 1");
  if (c.taylor_order < 1 || c.taylor_order > 8) fail("taylor_order must lie in [1, 8]");
  std::set<std::string> seen;
  for (const auto& s : c.suites) {
    if (std::find(all_suites().begin(), all_suites().end(), s) == all_suites().end())
      fail("unknown suite '" + s + "'");
    if (!seen.insert(s).second) fail("duplicate suite '" + s + "'");
    if (hood_dependent(s) && !(c.perturbation.target_eps_norm < 1.0 - c.beta0))
      fail("perturbation.target_eps_norm must be < 1 - beta0 for suite '" + s + "'");
  }
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["dim"] = c.dim;
  j["epsilon"] = c.epsilon;
  j["beta0"] = c.beta0;
  j["spectrum"] = {{"kind", c.spectrum.kind}, {"c", c.spectrum.c}, {"s", c.spectrum.s}};
  j["perturbation"] = {{"kind", c.perturbation.kind},
                       {"target_eps_norm", c.perturbation.target_eps_norm}};
  j["seeds"] = c.seeds;
  j["suites"] = c.suites;
  j["output_dir"] = c.output_dir;
  j["instances"] = c.instances;
  j["max_order"] = c.max_order;
  j["oracle_samples"] = c.oracle_samples;
  j["norm_samples"] = c.norm_samples;
  j["taylor_order"] = c.taylor_order;
  return j;
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError("config: unknown key '" + where + it.key() + "'");
  }
}

}  // namespace detail

/// Parse a config object; absent fields keep their defaults.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  detail::reject_unknown(j,
                         {"dim", "epsilon", "beta0", "spectrum", "perturbation", "seeds", "suites",
                          "output_dir", "instances", "max_order", "oracle_samples", "norm_samples",
                          "taylor_order"},
                         "");
  RunConfig c;
  detail::read_field(j, "dim", c.dim);
  detail::read_field(j, "epsilon", c.epsilon);
  detail::read_field(j, "beta0", c.beta0);
  if (j.contains("spectrum")) {
    const auto& s = j["spectrum"];
    if (!s.is_object()) throw ConfigError("config: spectrum must be an object");
    detail::reject_unknown(s, {"kind", "c", "s"}, "spectrum.");
    detail::read_field(s, "kind", c.spectrum.kind);
    detail::read_field(s, "c", c.spectrum.c);
    detail::read_field(s, "s", c.spectrum.s);
  }
  if (j.contains("perturbation")) {
    const auto& p = j["perturbation"];
    if (!p.is_object()) throw ConfigError("config: perturbation must be an object");
    detail::reject_unknown(p, {"kind", "target_eps_norm"}, "perturbation.");
    detail::read_field(p, "kind", c.perturbation.kind);
    detail::read_field(p, "target_eps_norm", c.perturbation.target_eps_norm);
  }
  detail::read_field(j, "seeds", c.seeds);
  detail::read_field(j, "suites", c.suites);
  detail::read_field(j, "output_dir", c.output_dir);
  detail::read_field(j, "instances", c.instances);
  detail::read_field(j, "max_order", c.max_order);
  detail::read_field(j, "oracle_samples", c.oracle_samples);
  detail::read_field(j, "norm_samples", c.norm_samples);
  detail::read_field(j, "taylor_order", c.taylor_order);
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: cannot parse '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a over the canonical JSON form; output_dir is excluded so that the
/// hash identifies the science parameters only.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::ordered_json j = to_json(c);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace qim::harness
