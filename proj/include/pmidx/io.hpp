#pragma once

// JSON and CSV formats. JSON keys equal the C++ field names; matrices are
// row-major arrays of arrays.

#include <algorithm>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmidx/errors.hpp"
#include "pmidx/experiment.hpp"
#include "pmidx/index.hpp"
#include "pmidx/mdp.hpp"
#include "pmidx/model.hpp"
#include "pmidx/policy.hpp"
#include "pmidx/sim.hpp"

namespace pmidx {

using Json = nlohmann::ordered_json;

NLOHMANN_JSON_SERIALIZE_ENUM(Mode, {{Mode::WithFailures, "WithFailures"}, {Mode::PureDeterioration, "PureDeterioration"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Terminal, {{Terminal::Absorbing, "Absorbing"}, {Terminal::Breakdown, "Breakdown"}})
NLOHMANN_JSON_SERIALIZE_ENUM(IndexVariant, {{IndexVariant::Failures, "Failures"},
                                            {IndexVariant::PureDeterioration, "PureDeterioration"},
                                            {IndexVariant::PerfectIntervention, "PerfectIntervention"}})
NLOHMANN_JSON_SERIALIZE_ENUM(PolicyKind, {{PolicyKind::Index, "Index"},
                                          {PolicyKind::Naive, "Naive"},
                                          {PolicyKind::Threshold, "Threshold"},
                                          {PolicyKind::MyopicPerfect, "MyopicPerfect"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Study, {{Study::Suboptimality, "Suboptimality"},
                                     {Study::LargeSystem, "LargeSystem"},
                                     {Study::MyopicComparison, "MyopicComparison"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Operation, {{Operation::Linear, "Linear"}, {Operation::Quadratic, "Quadratic"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FailureBand,
                             {{FailureBand::Low, "Low"}, {FailureBand::Medium, "Medium"}, {FailureBand::High, "High"}})

namespace detail {

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) throw ValidationError("schema", std::string("missing key '") + key + "'");
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema", std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) read(j, key, out);
}

}  // namespace detail

inline void to_json(Json& j, const MachineSpec& m) {
  j = Json{{"beta", m.beta},
           {"n_states", m.n_states},
           {"p_advance", m.p_advance},
           {"p_fail", m.p_fail},
           {"intervention_kernel", m.intervention_kernel},
           {"op_cost", m.op_cost},
           {"maint_cost", m.maint_cost},
           {"fail_cost", m.fail_cost},
           {"mode", m.mode},
           {"terminal", m.terminal}};
  if (!m.warnings.empty()) j["warnings"] = m.warnings;
}

inline void from_json(const Json& j, MachineSpec& m) {
  detail::read(j, "beta", m.beta);
  detail::read(j, "n_states", m.n_states);
  detail::read(j, "p_advance", m.p_advance);
  detail::read(j, "p_fail", m.p_fail);
  detail::read(j, "intervention_kernel", m.intervention_kernel);
  detail::read(j, "op_cost", m.op_cost);
  detail::read(j, "maint_cost", m.maint_cost);
  detail::read(j, "fail_cost", m.fail_cost);
  detail::read_opt(j, "mode", m.mode);
  detail::read_opt(j, "terminal", m.terminal);
  detail::read_opt(j, "warnings", m.warnings);
}

inline void to_json(Json& j, const FleetSpec& f) {
  j = Json{{"machines", f.machines}, {"n_repairmen", f.n_repairmen}, {"allow_idle", f.allow_idle}};
}

inline void from_json(const Json& j, FleetSpec& f) {
  detail::read(j, "machines", f.machines);
  detail::read(j, "n_repairmen", f.n_repairmen);
  detail::read_opt(j, "allow_idle", f.allow_idle);
}

inline void to_json(Json& j, const MachineParams& p) {
  j = Json{{"beta", p.beta},
           {"n_states", p.n_states},
           {"deterioration_rate", p.deterioration_rate},
           {"fail_coef", p.fail_coef},
           {"fail_scale", p.fail_scale},
           {"intervention_decay", p.intervention_decay},
           {"maint_intercept", p.maint_intercept},
           {"maint_slope", p.maint_slope},
           {"op_intercept", p.op_intercept},
           {"op_slope", p.op_slope},
           {"op_quadratic", p.op_quadratic},
           {"fail_cost", p.fail_cost},
           {"mode", p.mode},
           {"terminal", p.terminal}};
}

inline void from_json(const Json& j, MachineParams& p) {
  detail::read_opt(j, "beta", p.beta);
  detail::read(j, "n_states", p.n_states);
  detail::read(j, "deterioration_rate", p.deterioration_rate);
  detail::read_opt(j, "fail_coef", p.fail_coef);
  detail::read_opt(j, "fail_scale", p.fail_scale);
  detail::read(j, "intervention_decay", p.intervention_decay);
  detail::read(j, "maint_intercept", p.maint_intercept);
  detail::read(j, "maint_slope", p.maint_slope);
  detail::read(j, "op_intercept", p.op_intercept);
  detail::read(j, "op_slope", p.op_slope);
  detail::read_opt(j, "op_quadratic", p.op_quadratic);
  detail::read_opt(j, "fail_cost", p.fail_cost);
  detail::read_opt(j, "mode", p.mode);
  detail::read_opt(j, "terminal", p.terminal);
}

inline void to_json(Json& j, const IndexTable& t) {
  j = Json{{"machine_id", t.machine_id}, {"variant", t.variant}, {"indexable", t.indexable}, {"w", t.w}, {"h", t.h}};
}

inline void from_json(const Json& j, IndexTable& t) {
  detail::read(j, "machine_id", t.machine_id);
  detail::read(j, "variant", t.variant);
  detail::read(j, "indexable", t.indexable);
  detail::read(j, "w", t.w);
  detail::read_opt(j, "h", t.h);
}

/// Policy descriptor {kind, levels?, seed, allow_idle?}; index tables are
/// referenced by machine id and supplied separately.
struct PolicyDescriptor {
  PolicyKind kind = PolicyKind::Index;
  std::vector<State> levels;
  std::uint64_t seed = 0;
  bool allow_idle = true;
};

inline void to_json(Json& j, const PolicyDescriptor& p) {
  j = Json{{"kind", p.kind}};
  if (p.kind == PolicyKind::Threshold) j["levels"] = p.levels;
  j["seed"] = p.seed;
  if (p.kind == PolicyKind::Index || p.kind == PolicyKind::MyopicPerfect) j["allow_idle"] = p.allow_idle;
}

inline void from_json(const Json& j, PolicyDescriptor& p) {
  detail::read(j, "kind", p.kind);
  detail::read_opt(j, "levels", p.levels);
  detail::read_opt(j, "seed", p.seed);
  detail::read_opt(j, "allow_idle", p.allow_idle);
  if (p.kind == PolicyKind::Threshold && p.levels.empty())
    throw ValidationError("schema", "threshold policy descriptor needs 'levels'");
}

inline PolicyDescriptor describe(const Policy& p) {
  return {p.kind(), p.levels(), p.seed(), p.allow_idle()};
}

/// Builds a policy for `fleet`, computing whatever index tables it needs.
inline Policy instantiate(const PolicyDescriptor& d, const FleetSpec& fleet) {
  auto tables = [&](bool perfect) {
    std::vector<IndexTable> out;
    for (std::size_t m = 0; m < fleet.machines.size(); ++m) {
      out.push_back(perfect ? w_index_perfect(fleet.machines[m]) : w_index(fleet.machines[m]));
      out.back().machine_id = m;
    }
    return out;
  };
  switch (d.kind) {
    case PolicyKind::Index: return Policy::index(tables(false), d.allow_idle, d.seed);
    case PolicyKind::MyopicPerfect: return Policy::myopic(tables(true), d.allow_idle, d.seed);
    case PolicyKind::Naive: return Policy::naive(d.seed);
    case PolicyKind::Threshold: return Policy::threshold(d.levels, d.seed);
  }
  throw ValidationError("schema", "unknown policy kind");
}

inline Json batch_records(const BatchResult& b, const std::string& scenario_id,
                          const std::vector<PolicyDescriptor>& descriptors) {
  Json out = Json::array();
  for (std::size_t k = 0; k < b.summaries.size(); ++k) {
    const auto& s = b.summaries[k];
    Json policy = k < descriptors.size() ? Json(descriptors[k]) : Json(s.policy);
    out.push_back(Json{{"scenario_id", scenario_id},
                       {"policy", policy},
                       {"mean_cost", s.mean_cost},
                       {"mean_interventions", s.mean_interventions},
                       {"mean_failures", s.mean_failures},
                       {"n_replicates", s.n_replicates},
                       {"seed", b.seed}});
  }
  return out;
}

inline void to_json(Json& j, const FleetShape& s) {
  j = Json{{"n_machines", s.n_machines}, {"n_repairmen", s.n_repairmen}, {"n_states", s.n_states}};
}

inline void from_json(const Json& j, FleetShape& s) {
  detail::read(j, "n_machines", s.n_machines);
  detail::read(j, "n_repairmen", s.n_repairmen);
  detail::read(j, "n_states", s.n_states);
}

inline void to_json(Json& j, const ScenarioConfig& c) {
  j = Json{{"study", c.study}};
  if (c.operation) j["operation"] = *c.operation;
  if (c.maint_case) j["maint_case"] = *c.maint_case;
  if (c.failure_band) j["failure_band"] = *c.failure_band;
  if (c.op_intercept_band) j["op_intercept_band"] = *c.op_intercept_band;
  if (c.op_slope_band) j["op_slope_band"] = *c.op_slope_band;
  j["mode"] = c.mode;
  j["sampler_seed"] = c.sampler_seed;
  j["n_instances"] = c.n_instances;
  j["fleet_shape"] = c.fleet_shape;
  j["beta"] = c.beta;
  j["horizon"] = c.horizon;
  j["replicates"] = c.replicates;
  j["threshold_count"] = c.threshold_count;
  j["epsilon"] = c.epsilon;
  j["allow_idle"] = c.allow_idle;
}

inline void from_json(const Json& j, ScenarioConfig& c) {
  Study study = Study::Suboptimality;
  detail::read(j, "study", study);
  c = default_config(study);
  auto opt = [&]<typename T>(const char* key, std::optional<T>& out) {
    if (j.contains(key)) {
      T v{};
      detail::read(j, key, v);
      out = v;
    }
  };
  opt("operation", c.operation);
  opt("maint_case", c.maint_case);
  opt("failure_band", c.failure_band);
  opt("op_intercept_band", c.op_intercept_band);
  opt("op_slope_band", c.op_slope_band);
  detail::read_opt(j, "mode", c.mode);
  detail::read_opt(j, "sampler_seed", c.sampler_seed);
  detail::read_opt(j, "n_instances", c.n_instances);
  detail::read_opt(j, "fleet_shape", c.fleet_shape);
  detail::read_opt(j, "beta", c.beta);
  detail::read_opt(j, "horizon", c.horizon);
  detail::read_opt(j, "replicates", c.replicates);
  detail::read_opt(j, "threshold_count", c.threshold_count);
  detail::read_opt(j, "epsilon", c.epsilon);
  detail::read_opt(j, "allow_idle", c.allow_idle);
}

inline void to_json(Json& j, const Range& r) { j = Json::array({r.lo, r.hi}); }
inline void from_json(const Json& j, Range& r) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("schema", "range must be [lo, hi]");
  r.lo = j[0].get<double>();
  r.hi = j[1].get<double>();
}

inline void to_json(Json& j, const Distributions& d) {
  j = Json{{"deterioration_rate", d.deterioration_rate},
           {"fail_coef", d.fail_coef},
           {"fail_scale", d.fail_scale},
           {"intervention_decay", d.intervention_decay},
           {"maint_intercept", d.maint_intercept},
           {"maint_slope", d.maint_slope},
           {"op_intercept", d.op_intercept},
           {"op_slope", d.op_slope},
           {"op_quadratic", d.op_quadratic},
           {"fail_multiplier", d.fail_multiplier}};
}

inline void from_json(const Json& j, Distributions& d) {
  detail::read(j, "deterioration_rate", d.deterioration_rate);
  detail::read(j, "fail_coef", d.fail_coef);
  detail::read(j, "fail_scale", d.fail_scale);
  detail::read(j, "intervention_decay", d.intervention_decay);
  detail::read(j, "maint_intercept", d.maint_intercept);
  detail::read(j, "maint_slope", d.maint_slope);
  detail::read(j, "op_intercept", d.op_intercept);
  detail::read(j, "op_slope", d.op_slope);
  detail::read(j, "op_quadratic", d.op_quadratic);
  detail::read(j, "fail_multiplier", d.fail_multiplier);
}

inline Json distribution_table() {
  return Json{{"small_fleet", small_fleet_distributions()}, {"large_fleet", large_fleet_distributions()}};
}

inline void to_json(Json& j, const OrderStats& s) {
  j = Json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

inline void to_json(Json& j, const PolicyStats& s) {
  j = Json{{"mean_cost", s.mean_cost}, {"mean_interventions", s.mean_interventions}, {"mean_failures", s.mean_failures}};
}

inline void to_json(Json& j, const SuboptimalityCell& c) {
  j = Json{{"operation", c.operation}, {"maint_case", c.maint_case}, {"mode", c.mode},
           {"stats", c.stats},         {"values", c.values},          {"n_discarded", c.n_discarded},
           {"n_clamped", c.n_clamped}, {"n_failed", c.n_failed}};
}

inline void to_json(Json& j, const ComparisonCell& c) {
  j = Json{{"failure_band", c.band},
           {"maint_case", c.maint_case},
           {"index", c.index},
           {"naive", c.naive},
           {"threshold", c.threshold},
           {"best_threshold", c.best_threshold},
           {"ratio_naive", c.ratio_naive},
           {"ratio_threshold", c.ratio_threshold}};
  if (c.myopic.mean_cost != 0.0) {
    j["myopic"] = c.myopic;
    j["ratio_myopic"] = c.ratio_myopic;
  }
  j["n_instances"] = c.n_instances;
  j["n_discarded"] = c.n_discarded;
}

inline void to_json(Json& j, const RunReport& r) {
  j = Json{{"study", r.study}};
  if (!r.suboptimality.empty()) j["suboptimality"] = r.suboptimality;
  if (!r.comparison.empty()) j["policy_comparison"] = r.comparison;
  j["n_discarded_nonindexable"] = r.n_discarded_nonindexable;
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string num(double v, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  return os.str();
}

/// One row per state, one column per machine.
inline void index_table(std::ostream& os, const std::vector<IndexTable>& tables, int decimals = 2) {
  os << "state";
  for (const auto& t : tables) os << ",machine_" << t.machine_id + 1;
  os << '\n';
  std::size_t rows = 0;
  for (const auto& t : tables) rows = std::max(rows, std::max(t.w.size(), t.h.size()));
  for (std::size_t x = 0; x < rows; ++x) {
    os << x;
    for (const auto& t : tables) os << ',' << (x < t.w.size() ? num(t.w[x], decimals) : std::string("NA"));
    os << '\n';
  }
}

inline const char* mode_label(Mode m) { return m == Mode::WithFailures ? "failures" : "pure"; }

inline void suboptimality(std::ostream& os, const RunReport& r) {
  os << "mode,operation,maint_case,n,min,q1,median,q3,max\n";
  for (const auto& c : r.suboptimality)
    os << mode_label(c.mode) << ',' << to_string(c.operation) << ",Case " << c.maint_case << ',' << c.values.size()
       << ',' << num(c.stats.min, 3) << ',' << num(c.stats.q1, 3) << ',' << num(c.stats.median, 3) << ','
       << num(c.stats.q3, 3) << ',' << num(c.stats.max, 3) << '\n';
}

inline void comparison(std::ostream& os, const RunReport& r) {
  const bool myopic = r.study == Study::MyopicComparison;
  os << "failure_costs,maint_costs,index_cost,index_intervs,index_failures,naive_cost,naive_intervs,naive_failures,"
        "threshold_cost,threshold_intervs,threshold_failures,threshold_best,ratio_index_naive,ratio_index_threshold";
  if (myopic) os << ",myopic_cost,myopic_intervs,myopic_failures,ratio_index_myopic";
  os << '\n';
  auto stats = [&](const PolicyStats& s) {
    os << ',' << num(s.mean_cost, 1) << ',' << num(s.mean_interventions, 1) << ',' << num(s.mean_failures, 1);
  };
  for (const auto& c : r.comparison) {
    os << to_string(c.band) << ",Case " << c.maint_case;
    stats(c.index);
    stats(c.naive);
    stats(c.threshold);
    os << ',' << num(c.best_threshold, 1) << ',' << num(100.0 * c.ratio_naive, 1) << "%," << num(100.0 * c.ratio_threshold, 1)
       << '%';
    if (myopic) {
      stats(c.myopic);
      os << ',' << num(100.0 * c.ratio_myopic, 1) << '%';
    }
    os << '\n';
  }
}

inline void batch(std::ostream& os, const BatchResult& b, const std::string& scenario_id) {
  os << "scenario_id,policy,mean_cost,mean_interventions,mean_failures,n_replicates,seed\n";
  for (const auto& s : b.summaries)
    os << scenario_id << ',' << s.policy << ',' << num(s.mean_cost, 4) << ',' << num(s.mean_interventions, 4) << ','
       << num(s.mean_failures, 4) << ',' << s.n_replicates << ',' << b.seed << '\n';
}

}  // namespace csv

}  // namespace pmidx
