// qim: batch command-line front end of the verification harness.
//
// Exit codes: 0 all checks pass, 1 some check failed, 2 configuration or
// usage error, 3 any other error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qim/bounds.hpp"
#include "qim/epsnorms.hpp"
#include "qim/harness/config.hpp"
#include "qim/harness/ensemble.hpp"
#include "qim/harness/report.hpp"
#include "qim/harness/suites.hpp"
#include "qim/kubo.hpp"
#include "qim/manifold.hpp"
#include "qim/taylor.hpp"

namespace {

using qim::harness::Instance;
using qim::harness::RunConfig;
using json = nlohmann::ordered_json;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (replaces the configured seed list)");
  cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
  cmd->add_option("--format", o.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : qim::harness::load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (!o.out.empty()) c.output_dir = o.out;
  qim::harness::validate(c);
  return c;
}

std::vector<Instance> all_instances(const RunConfig& c) {
  std::vector<Instance> out;
  for (auto seed : c.seeds)
    for (auto& inst : qim::harness::gen_ensemble(c, seed)) out.push_back(std::move(inst));
  return out;
}

std::string instance_id(const Instance& i) {
  return "s" + std::to_string(i.seed) + "/i" + std::to_string(i.index);
}

void emit(const RunConfig& c, const std::string& stem, const std::string& format, const json& j,
          const std::string& csv) {
  const auto path = format == "json"
                        ? qim::harness::write_output(c.output_dir, stem + ".json", j.dump(2) + "\n")
                        : qim::harness::write_output(c.output_dir, stem + ".csv", csv);
  std::cout << "wrote " << path.string() << '\n';
}

int cmd_verify(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  const qim::harness::Report rep = qim::harness::run_suite(c);
  const auto path = qim::harness::emit_report(rep, o.format, c.output_dir);
  std::cout << rep.records.size() << " records, " << rep.failures() << " failing; wrote "
            << path.string() << '\n';
  if (rep.empty_ensemble_warning) std::cout << "warning: empty ensemble\n";
  for (const auto& r : rep.records)
    if (r.gating && !r.pass)
      std::cout << "FAIL " << r.name << " margin " << r.margin << " tol " << r.tolerance
                << (r.error.empty() ? "" : " (" + r.error + ")") << '\n';
  return rep.all_pass() ? 0 : 1;
}

int cmd_kubo(const CommonOptions& o, int n) {
  RunConfig c = resolve(o);
  c.max_order = std::max(c.max_order, n);
  bool ok = true;
  json arr = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "instance,n,value,imag,oracle_value,oracle_stderr,oracle_agrees,kubo_abs,"
         "product_bound,final_bound,factors_hold\n";
  for (const auto& inst : all_instances(c)) {
    const qim::GibbsState s0 = qim::make_state(inst.h0, c.beta0);
    std::span<const qim::HermitianOperator> dirs(inst.v.data(), static_cast<std::size_t>(n));
    qim::KuboResult k = qim::kubo_n_point(s0, dirs);
    bool agrees = true;
    if (n >= 2) {
      const auto e = qim::kubo_oracle(s0, dirs, c.oracle_samples, inst.seed ^ (inst.index * 7919ULL));
      k = qim::with_oracle(k, e);
      agrees = qim::oracle_agrees(k);
    }
    const qim::BoundLedger L = qim::estimate_chain(s0, dirs, c.epsilon);
    ok = ok && agrees && L.factors_hold() && L.kubo_dominated();
    json j;
    j["instance"] = instance_id(inst);
    j["kubo"] = qim::to_json(k);
    j["oracle_agrees"] = agrees;
    j["ledger"] = qim::to_json(L);
    arr.push_back(std::move(j));
    csv << instance_id(inst) << ',' << n << ',' << k.value << ',' << k.imag << ','
        << (k.oracle_value ? std::to_string(*k.oracle_value) : "") << ','
        << (k.oracle_stderr ? std::to_string(*k.oracle_stderr) : "") << ','
        << (agrees ? "true" : "false") << ',' << L.kubo_abs << ',' << L.product_bound << ','
        << L.final_bound << ',' << (L.factors_hold() ? "true" : "false") << '\n';
  }
  emit(c, "kubo", o.format, arr, csv.str());
  return ok ? 0 : 1;
}

int cmd_taylor(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  bool ok = true;
  json arr = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "instance,lambda,order,coefficient,partial_sum,direct\n";
  for (const auto& inst : all_instances(c)) {
    const qim::GibbsState s0 = qim::make_state(inst.h0, c.beta0);
    const qim::GibbsState sx = qim::perturb(s0, inst.x, c.epsilon);
    const qim::HermitianOperator w = qim::harness::scale_to_eps_norm(
        inst.v.front(), sx.h_decomposition(), c.epsilon, 0.5 * 2.0 * c.epsilon * (1.0 - sx.beta()));
    const double r = qim::radius_bound(sx, w, c.epsilon);
    const qim::TaylorProbe t =
        qim::taylor_probe(sx, w, {-0.5 * r, -0.25 * r, 0.25 * r, 0.5 * r}, c.taylor_order, c.epsilon);
    ok = ok && t.converged;
    json j = qim::to_json(t);
    j["instance"] = instance_id(inst);
    arr.push_back(std::move(j));
    std::ostringstream one;
    qim::write_csv(one, t);
    std::istringstream lines(one.str());
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) csv << instance_id(inst) << ',' << line << '\n';
  }
  emit(c, "taylor", o.format, arr, csv.str());
  return ok ? 0 : 1;
}

int cmd_norms(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  bool ok = true;
  json arr = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "instance,epsilon,eps_norm,omega_norm,form_bound_surrogate\n";
  for (const auto& inst : all_instances(c)) {
    const qim::EpsNormReport r = qim::monotonicity_scan(inst.x, inst.h0);
    ok = ok && r.monotone && r.omega_dominates;
    json j;
    j["instance"] = instance_id(inst);
    j["epsilon_grid"] = r.epsilon_grid;
    j["values"] = r.values;
    j["omega_norm"] = r.omega_norm;
    j["form_bound_surrogate"] = r.form_bound_surrogate;
    j["max_relative_drop"] = r.max_relative_drop;
    j["monotone"] = r.monotone;
    j["max_excess_over_omega"] = r.max_excess_over_omega;
    j["omega_dominates"] = r.omega_dominates;
    arr.push_back(std::move(j));
    for (std::size_t k = 0; k < r.values.size(); ++k)
      csv << instance_id(inst) << ',' << r.epsilon_grid[k] << ',' << r.values[k] << ','
          << r.omega_norm << ',' << r.form_bound_surrogate << '\n';
  }
  emit(c, "norms", o.format, arr, csv.str());
  return ok ? 0 : 1;
}

int cmd_transport(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  bool ok = true;
  json arr = json::array();
  std::ostringstream csv;
  csv.precision(17);
  csv << "instance,m,M,norm_ratio,in_bracket,direct_deviation,route_deviation\n";
  for (const auto& inst : all_instances(c)) {
    const qim::GibbsState s0 = qim::make_state(inst.h0, c.beta0);
    const qim::GibbsState sx = qim::perturb(s0, inst.x, c.epsilon);
    const qim::HermitianOperator y = qim::harness::scale_to_eps_norm(
        inst.v.front(), sx.h_decomposition(), c.epsilon, 0.5 * (1.0 - sx.beta()));
    const qim::ChartTransition t = qim::chart_transition(s0, inst.x, y, c.epsilon);
    const qim::HermitianOperator third = (1.0 / 3.0) * inst.x;
    const std::vector<qim::HermitianOperator> parts = {third, third, third};
    const qim::RouteReport route = qim::route_independence(s0, parts, c.epsilon);
    ok = ok && t.in_bracket && route.max_rho_deviation <= 1e-11;
    json j = qim::to_json(t);
    j["instance"] = instance_id(inst);
    j["route_deviation"] = route.max_rho_deviation;
    arr.push_back(std::move(j));
    csv << instance_id(inst) << ',' << t.constants.m << ',' << t.constants.M << ',' << t.norm_ratio
        << ',' << (t.in_bracket ? "true" : "false") << ',' << t.direct_deviation << ','
        << route.max_rho_deviation << '\n';
  }
  emit(c, "transport", o.format, arr, csv.str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification harness for eps-bounded perturbations of Gibbs states"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qim::harness::kVersion));

  CommonOptions o;
  int kubo_order = 2;
  auto* verify = app.add_subcommand("verify", "run the configured verification suites");
  auto* kubo = app.add_subcommand("kubo", "Kubo n-point functions, oracle and bound ledger");
  auto* taylor = app.add_subcommand("taylor", "Taylor probes of the free energy");
  auto* norms = app.add_subcommand("norms", "eps-norm scans of the ensemble perturbations");
  auto* transport = app.add_subcommand("transport", "chart transitions and route independence");
  for (auto* cmd : {verify, kubo, taylor, norms, transport}) add_common(cmd, o);
  kubo->add_option("--n", kubo_order, "order of the Kubo function")
      ->required()
      ->check(CLI::Range(1, 6));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*verify) return cmd_verify(o);
    if (*kubo) return cmd_kubo(o, kubo_order);
    if (*taylor) return cmd_taylor(o);
    if (*norms) return cmd_norms(o);
    if (*transport) return cmd_transport(o);
  } catch (const qim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
