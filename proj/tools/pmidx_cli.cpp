// pmidx: command-line front end.
//
//   pmidx index     --input spec.json [--format json|csv]
//   pmidx solve     --input fleet.json [--epsilon e]
//   pmidx simulate  --input fleet.json [--policy kind|file] [--replicates n] [--horizon h] [--seed s]
//   pmidx study     --study suboptimality|large-system|myopic [--input config.json] [--instances n]
//   pmidx plot-data --input spec.json [--machine m]
//   pmidx validate  --input spec.json
//
// Exit codes: 0 ok, 1 invalid input, 2 solver failure, 64 usage.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "pmidx/pmidx.hpp"

namespace {

using namespace pmidx;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kSolver = 2;
constexpr int kUsage = 64;

struct Args {
  std::string input;
  std::string output;
  std::string format = "json";
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> horizon;
  std::optional<double> epsilon;
  std::string study = "suboptimality";
  std::optional<std::size_t> instances;
  std::string policy = "all";
  std::optional<std::size_t> threshold_count;
  std::size_t machine = 0;
  bool full_values = false;
};

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("input", "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("input", "'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Accepts a FleetSpec, a single MachineSpec, or a generator parameter bundle
/// (a document with "deterioration_rate"), optionally wrapped in a "machines" list.
FleetSpec read_fleet(const Args& a, bool validate_now = true) {
  Json j = read_json(a.input);
  auto machine = [](const Json& m) {
    if (m.contains("deterioration_rate")) return build_machine(m.get<MachineParams>());
    return m.get<MachineSpec>();
  };
  FleetSpec fleet;
  if (j.contains("machines")) {
    for (const auto& m : j.at("machines")) fleet.machines.push_back(machine(m));
    detail::read_opt(j, "n_repairmen", fleet.n_repairmen);
    detail::read_opt(j, "allow_idle", fleet.allow_idle);
  } else {
    fleet.machines.push_back(machine(j));
  }
  if (a.beta)
    for (auto& m : fleet.machines) m.beta = *a.beta;
  if (validate_now) require_valid(fleet);
  return fleet;
}

void emit(const Args& a, const std::string& text) {
  if (a.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(a.output, std::ios::binary);
  if (!out) throw ValidationError("output", "cannot write '" + a.output + "'");
  out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::vector<IndexTable> all_indices(const FleetSpec& fleet) {
  std::vector<IndexTable> tables;
  for (std::size_t m = 0; m < fleet.machines.size(); ++m) {
    tables.push_back(w_index(fleet.machines[m]));
    tables.back().machine_id = m;
  }
  return tables;
}

int cmd_index(const Args& a) {
  const FleetSpec fleet = read_fleet(a);
  const auto tables = all_indices(fleet);
  if (a.format == "csv") {
    std::ostringstream os;
    csv::index_table(os, tables);
    emit(a, os.str());
  } else {
    emit(a, dump(Json(tables)));
  }
  return kOk;
}

int cmd_solve(const Args& a) {
  const FleetSpec fleet = read_fleet(a);
  SolveOptions opts;
  if (a.epsilon) opts.epsilon = *a.epsilon;
  const auto mdp = solve_joint(fleet, opts);
  Json out{{"n_joint_states", mdp.n_joint_states},
           {"n_actions", mdp.actions.size()},
           {"iterations", mdp.iterations},
           {"residual", mdp.residual},
           {"optimal_value", mdp.value[0]}};
  const auto tables = all_indices(fleet);
  const bool indexable = std::all_of(tables.begin(), tables.end(), [](const IndexTable& t) { return t.indexable; });
  if (indexable) {
    const auto pv = evaluate_policy(fleet, Policy::index(tables, fleet.allow_idle), opts);
    double pct = 100.0 * (pv.value[0] - mdp.value[0]) / mdp.value[0];
    out["index_value"] = pv.value[0];
    out["index_iterations"] = pv.iterations;
    out["suboptimality_percent"] = std::max(0.0, pct);
    if (a.full_values) out["index_values"] = pv.value;
  } else {
    out["index_value"] = nullptr;
    out["note"] = "fleet has a non-indexable machine; index policy not evaluated";
  }
  if (a.full_values) {
    out["values"] = mdp.value;
    std::vector<ActionMask> greedy;
    for (auto k : mdp.policy) greedy.push_back(mdp.actions[k]);
    out["policy"] = greedy;
  }
  emit(a, dump(out));
  return kOk;
}

std::vector<PolicyDescriptor> requested_policies(const Args& a, const FleetSpec& fleet) {
  std::vector<PolicyDescriptor> out;
  std::size_t tc = 8;
  for (const auto& m : fleet.machines) tc = std::min(tc, m.n_states > 2 ? m.n_states - 2 : 1);
  if (a.threshold_count) tc = *a.threshold_count;
  auto thresholds = [&] {
    for (const auto& p : enumerate_thresholds(fleet, tc)) out.push_back(describe(p));
  };
  const std::string& p = a.policy;
  if (p == "index") out.push_back({PolicyKind::Index, {}, 1, fleet.allow_idle});
  else if (p == "naive") out.push_back({PolicyKind::Naive, {}, 2, true});
  else if (p == "myopic") out.push_back({PolicyKind::MyopicPerfect, {}, 3, fleet.allow_idle});
  else if (p == "threshold") thresholds();
  else if (p == "all") {
    out.push_back({PolicyKind::Index, {}, 1, fleet.allow_idle});
    out.push_back({PolicyKind::Naive, {}, 2, true});
    out.push_back({PolicyKind::MyopicPerfect, {}, 3, fleet.allow_idle});
    thresholds();
  } else {
    Json j = read_json(p);
    if (j.is_array())
      for (const auto& d : j) out.push_back(d.get<PolicyDescriptor>());
    else
      out.push_back(j.get<PolicyDescriptor>());
  }
  return out;
}

int cmd_simulate(const Args& a) {
  const FleetSpec fleet = read_fleet(a);
  const auto descriptors = requested_policies(a, fleet);
  std::vector<Policy> policies;
  std::vector<std::string> names;
  for (const auto& d : descriptors) {
    policies.push_back(instantiate(d, fleet));
    names.push_back(Json(d.kind).get<std::string>());
  }
  const auto batch = simulate_batch(fleet, policies, names, a.horizon.value_or(520), a.replicates.value_or(25),
                                    a.seed.value_or(1));
  const std::string scenario = a.input;
  if (a.format == "csv") {
    std::ostringstream os;
    csv::batch(os, batch, scenario);
    emit(a, os.str());
  } else {
    emit(a, dump(batch_records(batch, scenario, descriptors)));
  }
  return kOk;
}

int cmd_study(const Args& a) {
  Study study;
  if (a.study == "suboptimality") study = Study::Suboptimality;
  else if (a.study == "large-system") study = Study::LargeSystem;
  else if (a.study == "myopic") study = Study::MyopicComparison;
  else throw CLI::ValidationError("--study", "expected suboptimality, large-system or myopic");

  ScenarioConfig c = default_config(study);
  if (!a.input.empty()) {
    c = read_json(a.input).get<ScenarioConfig>();
    study = c.study;
  }
  if (a.beta) c.beta = *a.beta;
  if (a.seed) c.sampler_seed = *a.seed;
  if (a.instances) c.n_instances = *a.instances;
  if (a.replicates) c.replicates = *a.replicates;
  if (a.horizon) c.horizon = *a.horizon;
  if (a.epsilon) c.epsilon = *a.epsilon;
  if (a.threshold_count) c.threshold_count = *a.threshold_count;

  const RunReport report = run_study(c);
  if (a.format == "json") {
    emit(a, dump(Json{{"config", c}, {"report", report}}));
  } else {
    std::ostringstream os;
    if (study == Study::Suboptimality) csv::suboptimality(os, report);
    else csv::comparison(os, report);
    emit(a, os.str());
  }
  return kOk;
}

/// Index curves, H and samples of B(x, W) around each intersection.
int cmd_plot_data(const Args& a) {
  const FleetSpec fleet = read_fleet(a);
  if (a.machine >= fleet.machines.size()) throw ValidationError("machine", "--machine out of range");
  std::ostringstream os;
  os << "series,machine,state,w,value\n";
  auto row = [&](const char* series, std::size_t m, State x, double w, double v) {
    os << series << ',' << m << ',' << x << ',' << csv::num(w, 4) << ',' << csv::num(v, 4) << '\n';
  };
  const auto tables = all_indices(fleet);
  for (const auto& t : tables)
    for (State x = 0; x < t.w.size(); ++x) row("index", t.machine_id, x, t.w[x], t.w[x]);

  const MachineSpec& spec = fleet.machines[a.machine];
  const auto& t = tables[a.machine];
  for (State x = 0; x < t.h.size(); ++x) row("H", a.machine, x, 0.0, t.h[x]);
  if (t.indexable) {
    const auto cyc = intervention_cycle(spec);
    const double lo = *std::min_element(t.w.begin() + 1, t.w.end());
    const double hi = *std::max_element(t.w.begin() + 1, t.w.end());
    constexpr int kSamples = 41;
    for (State x = 1; x < spec.n_states; ++x)
      for (int k = 0; k < kSamples; ++k) {
        const double w = lo + (hi - lo) * k / (kSamples - 1);
        row("B", a.machine, x, w, cyc.rate(x, w));
      }
  }
  emit(a, os.str());
  return kOk;
}

int cmd_validate(const Args& a) {
  const FleetSpec fleet = read_fleet(a, false);
  const auto violations = validate(fleet);
  Json out = Json::array();
  for (const auto& v : violations)
    out.push_back(Json{{"invariant", v.invariant}, {"state", v.state}, {"message", v.message}});
  Json doc{{"valid", violations.empty()}, {"violations", out}};
  emit(a, dump(doc));
  for (const auto& v : violations) std::cerr << "violation: " << v.invariant << ": " << v.message << '\n';
  return violations.empty() ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maintenance scheduling indices, solvers and simulations"};
  app.require_subcommand(1, 1);
  Args a;

  auto common = [&](CLI::App* sub, bool input_required = true) {
    auto* in = sub->add_option("--input,-i", a.input, "Input JSON file");
    if (input_required) in->required();
    sub->add_option("--output,-o", a.output, "Output file (default stdout)");
    sub->add_option("--beta", a.beta, "Override the discount factor")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  };

  auto* index = app.add_subcommand("index", "Compute W-indices for a machine or fleet");
  common(index);
  index->add_option("--format", a.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  auto* solve = app.add_subcommand("solve", "Solve the joint MDP and evaluate the index policy");
  common(solve);
  solve->add_option("--epsilon", a.epsilon, "Relative stopping tolerance")->check(CLI::PositiveNumber);
  solve->add_flag("--full-values", a.full_values, "Include value vectors");

  auto* simulate = app.add_subcommand("simulate", "Simulate policies on common random numbers");
  common(simulate);
  simulate->add_option("--policy", a.policy, "index, naive, myopic, threshold, all, or a descriptor JSON file");
  simulate->add_option("--replicates", a.replicates)->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", a.horizon)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", a.seed);
  simulate->add_option("--threshold-count", a.threshold_count)->check(CLI::PositiveNumber);
  simulate->add_option("--format", a.format)->check(CLI::IsMember({"json", "csv"}));

  auto* study = app.add_subcommand("study", "Run a suboptimality or large-system study");
  common(study, false);
  study->add_option("--study", a.study)->check(CLI::IsMember({"suboptimality", "large-system", "myopic"}));
  study->add_option("--instances", a.instances)->check(CLI::PositiveNumber);
  study->add_option("--replicates", a.replicates)->check(CLI::PositiveNumber);
  study->add_option("--horizon", a.horizon)->check(CLI::PositiveNumber);
  study->add_option("--seed", a.seed);
  study->add_option("--epsilon", a.epsilon)->check(CLI::PositiveNumber);
  study->add_option("--threshold-count", a.threshold_count)->check(CLI::PositiveNumber);
  std::string study_format = "csv";
  study->add_option("--format", study_format)->check(CLI::IsMember({"json", "csv"}));

  auto* plot = app.add_subcommand("plot-data", "Emit index curves and B(x,W) samples as CSV");
  common(plot);
  plot->add_option("--machine", a.machine, "Machine whose H and B curves are sampled");

  auto* validate_cmd = app.add_subcommand("validate", "Check a machine or fleet specification");
  common(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*index) return cmd_index(a);
    if (*solve) return cmd_solve(a);
    if (*simulate) return cmd_simulate(a);
    if (*study) {
      a.format = study_format;
      return cmd_study(a);
    }
    if (*plot) return cmd_plot_data(a);
    if (*validate_cmd) return cmd_validate(a);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input (" << e.invariant() << "): " << e.what() << '\n';
    return kInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return kSolver;
  } catch (const std::runtime_error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}
