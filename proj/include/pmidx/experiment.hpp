#pragma once

// Scenario sampling and the three studies: exact suboptimality on small
// fleets, large-fleet policy comparison by simulation, and the comparison
// against the perfect-intervention ("myopic") index policy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmidx/errors.hpp"
#include "pmidx/index.hpp"
#include "pmidx/mdp.hpp"
#include "pmidx/model.hpp"
#include "pmidx/policy.hpp"
#include "pmidx/random.hpp"
#include "pmidx/sim.hpp"

namespace pmidx {

enum class Study { Suboptimality, LargeSystem, MyopicComparison };
enum class Operation { Linear, Quadratic };
enum class FailureBand { Low, Medium, High };

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double draw(Stream& s) const { return s.uniform(lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Sampling distributions of one study. Maintenance "cases" index
/// `maint_intercept`; failure cost = mean intervention cost x multiplier.
struct Distributions {
  Range deterioration_rate;
  Range fail_coef;
  double fail_scale = 4.0;
  Range intervention_decay;
  std::vector<Range> maint_intercept;
  Range maint_slope;
  std::vector<Range> op_intercept;
  std::vector<Range> op_slope;
  Range op_quadratic;
  /// Low, Medium, High; the small-fleet study has a single band.
  std::vector<Range> fail_multiplier;

  friend bool operator==(const Distributions&, const Distributions&) = default;
};

inline const Distributions& small_fleet_distributions() {
  static const Distributions d{
      .deterioration_rate = {0.01, 0.025},
      .fail_coef = {0.005, 0.015},
      .fail_scale = 4.0,
      .intervention_decay = {0.0, 2.0},
      .maint_intercept = {{50, 80}, {100, 140}, {250, 300}, {500, 600}, {1000, 1200}},
      .maint_slope = {5, 15},
      .op_intercept = {{20, 30}, {40, 60}},
      .op_slope = {{1, 3}, {8, 12}},
      .op_quadratic = {0.4, 0.6},
      .fail_multiplier = {{7.5, 12.5}},
  };
  return d;
}

inline const Distributions& large_fleet_distributions() {
  static const Distributions d{
      .deterioration_rate = {0.01, 0.025},
      .fail_coef = {0.0025, 0.0050},
      .fail_scale = 6.0,
      .intervention_decay = {0.0, 2.0},
      .maint_intercept = {{250, 295}, {500, 560}, {750, 825}, {1000, 1090}},
      .maint_slope = {10, 15},
      .op_intercept = {{20, 30}, {40, 60}},
      .op_slope = {{1, 3}, {8, 12}},
      .op_quadratic = {0.4, 0.6},
      .fail_multiplier = {{5, 15}, {15, 25}, {50, 60}},
  };
  return d;
}

inline const Distributions& distributions_for(Study s) {
  return s == Study::Suboptimality ? small_fleet_distributions() : large_fleet_distributions();
}

struct FleetShape {
  std::size_t n_machines = 3;
  std::size_t n_repairmen = 1;
  std::size_t n_states = 8;
  friend bool operator==(const FleetShape&, const FleetShape&) = default;
};

inline FleetShape default_shape(Study s) {
  switch (s) {
    case Study::Suboptimality: return {3, 1, 8};
    case Study::LargeSystem: return {25, 2, 25};
    case Study::MyopicComparison: return {50, 3, 25};
  }
  return {};
}

/// One study run. Unset optional axes are swept by the run_* functions;
/// `sample_scenario` needs them set (op bands may stay unset: they are then
/// drawn per machine).
struct ScenarioConfig {
  Study study = Study::Suboptimality;
  std::optional<Operation> operation;
  std::optional<int> maint_case;  // 1-based
  std::optional<FailureBand> failure_band;
  std::optional<int> op_intercept_band;  // 0 or 1
  std::optional<int> op_slope_band;      // 0 or 1
  Mode mode = Mode::WithFailures;
  std::uint64_t sampler_seed = 1;
  std::size_t n_instances = 50;
  FleetShape fleet_shape = default_shape(Study::Suboptimality);
  double beta = 0.95;
  std::size_t horizon = 520;
  std::size_t replicates = 1;
  std::size_t threshold_count = 8;
  double epsilon = 1e-4;
  bool allow_idle = true;
};

inline ScenarioConfig default_config(Study s) {
  ScenarioConfig c;
  c.study = s;
  c.fleet_shape = default_shape(s);
  if (s != Study::Suboptimality) {
    c.operation = Operation::Linear;
    c.n_instances = 25;
  }
  return c;
}

inline const char* to_string(Study s) {
  switch (s) {
    case Study::Suboptimality: return "suboptimality";
    case Study::LargeSystem: return "large-system";
    case Study::MyopicComparison: return "myopic";
  }
  return "";
}
inline const char* to_string(Operation o) { return o == Operation::Linear ? "Linear" : "Quadratic"; }
inline const char* to_string(FailureBand b) {
  return b == FailureBand::Low ? "Low" : b == FailureBand::Medium ? "Medium" : "High";
}

struct SampledFleet {
  FleetSpec fleet;
  std::size_t n_discarded = 0;
};

namespace detail {

inline MachineParams draw_params(const ScenarioConfig& c, const Distributions& d, Stream& rng) {
  MachineParams p;
  p.beta = c.beta;
  p.n_states = c.fleet_shape.n_states;
  p.mode = c.mode;
  p.fail_scale = d.fail_scale;
  p.deterioration_rate = d.deterioration_rate.draw(rng);
  p.fail_coef = d.fail_coef.draw(rng);
  p.intervention_decay = d.intervention_decay.draw(rng);
  p.maint_intercept = d.maint_intercept.at(static_cast<std::size_t>(*c.maint_case - 1)).draw(rng);
  p.maint_slope = d.maint_slope.draw(rng);
  const auto ib = static_cast<std::size_t>(c.op_intercept_band.value_or(static_cast<int>(rng.below(2))));
  const auto sb = static_cast<std::size_t>(c.op_slope_band.value_or(static_cast<int>(rng.below(2))));
  p.op_intercept = d.op_intercept.at(ib).draw(rng);
  p.op_slope = d.op_slope.at(sb).draw(rng);
  const double quad = d.op_quadratic.draw(rng);
  p.op_quadratic = *c.operation == Operation::Quadratic ? quad : 0.0;
  const std::size_t band = d.fail_multiplier.size() == 1 ? 0 : static_cast<std::size_t>(*c.failure_band);
  const double multiplier = d.fail_multiplier.at(band).draw(rng);
  // Mean intervention cost over the states where intervening is possible.
  const double top = static_cast<double>(p.n_states - 1);
  const double mean_c = p.maint_intercept + p.maint_slope * (top + 1.0) / 2.0;
  p.fail_cost = c.mode == Mode::WithFailures ? multiplier * mean_c : 0.0;
  return p;
}

}  // namespace detail

/// Deterministic fleet for (config, instance). Each machine is redrawn until
/// its index is well defined; discards are counted.
inline SampledFleet sample_scenario(const ScenarioConfig& c, std::uint64_t instance_id) {
  if (!c.operation || !c.maint_case) throw ValidationError("scenario", "operation and maintenance case must be set");
  const Distributions& d = distributions_for(c.study);
  if (*c.maint_case < 1 || static_cast<std::size_t>(*c.maint_case) > d.maint_intercept.size())
    throw ValidationError("scenario", detail::concat("maintenance case ", *c.maint_case, " out of range"));
  if (d.fail_multiplier.size() > 1 && !c.failure_band)
    throw ValidationError("scenario", "failure band must be set for this study");
  if (c.fleet_shape.n_states < 3) throw ValidationError("scenario", "need at least 3 states per machine");

  const std::uint64_t base = derive_seed(c.sampler_seed,
                                         {static_cast<std::uint64_t>(c.study), static_cast<std::uint64_t>(*c.operation),
                                          static_cast<std::uint64_t>(*c.maint_case),
                                          static_cast<std::uint64_t>(c.failure_band.value_or(FailureBand::Low)),
                                          static_cast<std::uint64_t>(c.mode), instance_id});
  SampledFleet out;
  out.fleet.n_repairmen = c.fleet_shape.n_repairmen;
  out.fleet.allow_idle = c.allow_idle;
  for (std::size_t m = 0; m < c.fleet_shape.n_machines; ++m) {
    std::size_t streak = 0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      Stream rng(derive_seed(base, {m, attempt}));
      MachineSpec spec = build_machine(detail::draw_params(c, d, rng));
      if (w_index(spec).indexable) {
        out.fleet.machines.push_back(std::move(spec));
        break;
      }
      ++out.n_discarded;
      if (++streak >= 100)
        throw NumericalError(detail::concat("100 consecutive non-indexable draws for machine ", m, " of instance ",
                                            instance_id));
    }
  }
  require_valid(out.fleet);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct OrderStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Quartiles by linear interpolation between order statistics (the usual
/// "type 7" definition).
inline OrderStats order_stats(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

struct SuboptimalityCell {
  Operation operation = Operation::Linear;
  int maint_case = 1;
  Mode mode = Mode::WithFailures;
  std::vector<double> values;  // percent, one per solved instance
  OrderStats stats;
  std::size_t n_discarded = 0;
  std::size_t n_clamped = 0;
  std::size_t n_failed = 0;
};

struct PolicyStats {
  double mean_cost = 0.0;
  double mean_interventions = 0.0;
  double mean_failures = 0.0;
};

struct ComparisonCell {
  FailureBand band = FailureBand::Low;
  int maint_case = 1;
  PolicyStats index, naive, threshold, myopic;
  double best_threshold = 0.0;
  double ratio_naive = 0.0;      // (naive - index) / naive
  double ratio_threshold = 0.0;  // (threshold - index) / threshold
  double ratio_myopic = 0.0;     // (myopic - index) / myopic
  std::size_t n_instances = 0;
  std::size_t n_discarded = 0;
};

struct RunReport {
  Study study = Study::Suboptimality;
  std::vector<SuboptimalityCell> suboptimality;
  std::vector<ComparisonCell> comparison;
  std::size_t n_discarded_nonindexable = 0;
};

// ---------------------------------------------------------------------------
// Studies

/// Percentage suboptimality of the index policy at the all-new joint state.
struct InstanceResult {
  double optimal = 0.0;
  double index = 0.0;
  double percent = 0.0;
  bool clamped = false;
};

inline InstanceResult suboptimality_of(const FleetSpec& fleet, double epsilon) {
  const SolveOptions opts{epsilon};
  const auto mdp = solve_joint(fleet, opts);
  std::vector<IndexTable> tables;
  for (std::size_t m = 0; m < fleet.machines.size(); ++m) {
    tables.push_back(w_index(fleet.machines[m]));
    tables.back().machine_id = m;
  }
  const auto value = evaluate_policy(fleet, Policy::index(std::move(tables), fleet.allow_idle), opts);
  InstanceResult r;
  r.optimal = mdp.value[0];
  r.index = value.value[0];
  r.percent = 100.0 * (r.index - r.optimal) / r.optimal;
  if (r.percent < 0.0) {
    r.percent = 0.0;
    r.clamped = true;
  }
  return r;
}

inline SuboptimalityCell run_suboptimality_cell(const ScenarioConfig& c) {
  SuboptimalityCell cell;
  cell.operation = *c.operation;
  cell.maint_case = *c.maint_case;
  cell.mode = c.mode;
  for (std::size_t i = 0; i < c.n_instances; ++i) {
    try {
      const auto sampled = sample_scenario(c, i);
      cell.n_discarded += sampled.n_discarded;
      const auto r = suboptimality_of(sampled.fleet, c.epsilon);
      cell.values.push_back(r.percent);
      cell.n_clamped += r.clamped ? 1 : 0;
    } catch (const std::exception&) {
      ++cell.n_failed;
    }
  }
  cell.stats = order_stats(cell.values);
  return cell;
}

/// Sweeps the unset operation / maintenance-case axes.
inline RunReport run_suboptimality(const ScenarioConfig& config) {
  RunReport report;
  report.study = Study::Suboptimality;
  const auto& d = small_fleet_distributions();
  std::vector<Operation> ops = config.operation ? std::vector{*config.operation}
                                                : std::vector{Operation::Linear, Operation::Quadratic};
  std::vector<int> cases;
  if (config.maint_case) cases.push_back(*config.maint_case);
  else
    for (int k = 1; k <= static_cast<int>(d.maint_intercept.size()); ++k) cases.push_back(k);
  for (auto op : ops)
    for (int k : cases) {
      ScenarioConfig c = config;
      c.study = Study::Suboptimality;
      c.operation = op;
      c.maint_case = k;
      report.suboptimality.push_back(run_suboptimality_cell(c));
      report.n_discarded_nonindexable += report.suboptimality.back().n_discarded;
    }
  return report;
}

namespace detail {

inline std::vector<IndexTable> index_tables(const FleetSpec& fleet, bool perfect) {
  std::vector<IndexTable> out;
  for (std::size_t m = 0; m < fleet.machines.size(); ++m) {
    out.push_back(perfect ? w_index_perfect(fleet.machines[m]) : w_index(fleet.machines[m]));
    out.back().machine_id = m;
  }
  return out;
}

inline void accumulate(PolicyStats& acc, const PolicySummary& s, double weight) {
  acc.mean_cost += weight * s.mean_cost;
  acc.mean_interventions += weight * s.mean_interventions;
  acc.mean_failures += weight * s.mean_failures;
}

inline double ratio(double other, double index) { return other != 0.0 ? (other - index) / other : 0.0; }

}  // namespace detail

inline ComparisonCell run_comparison_cell(const ScenarioConfig& c) {
  ComparisonCell cell;
  cell.band = *c.failure_band;
  cell.maint_case = *c.maint_case;
  const bool myopic = c.study == Study::MyopicComparison;
  std::vector<double> threshold_cost(c.threshold_count, 0.0);
  const double w = 1.0 / static_cast<double>(c.n_instances);
  for (std::size_t i = 0; i < c.n_instances; ++i) {
    const auto sampled = sample_scenario(c, i);
    cell.n_discarded += sampled.n_discarded;
    const FleetSpec& fleet = sampled.fleet;
    std::vector<Policy> policies{Policy::index(detail::index_tables(fleet, false), c.allow_idle, 1),
                                 Policy::naive(2)};
    std::vector<std::string> names{"index", "naive"};
    if (myopic) {
      policies.push_back(Policy::myopic(detail::index_tables(fleet, true), c.allow_idle, 3));
      names.emplace_back("myopic");
    }
    const std::size_t first_threshold = policies.size();
    for (auto& p : enumerate_thresholds(fleet, c.threshold_count, 4)) {
      policies.push_back(std::move(p));
      names.push_back("threshold");
    }
    const auto batch = simulate_batch(fleet, policies, names, c.horizon, c.replicates,
                                      derive_seed(c.sampler_seed, {0x73696dULL, i}));
    detail::accumulate(cell.index, batch.summaries[0], w);
    detail::accumulate(cell.naive, batch.summaries[1], w);
    if (myopic) detail::accumulate(cell.myopic, batch.summaries[2], w);
    const double tw = w / static_cast<double>(c.threshold_count);
    for (std::size_t k = 0; k < c.threshold_count; ++k) {
      detail::accumulate(cell.threshold, batch.summaries[first_threshold + k], tw);
      threshold_cost[k] += w * batch.summaries[first_threshold + k].mean_cost;
    }
  }
  cell.n_instances = c.n_instances;
  cell.best_threshold = *std::min_element(threshold_cost.begin(), threshold_cost.end());
  cell.ratio_naive = detail::ratio(cell.naive.mean_cost, cell.index.mean_cost);
  cell.ratio_threshold = detail::ratio(cell.threshold.mean_cost, cell.index.mean_cost);
  if (myopic) cell.ratio_myopic = detail::ratio(cell.myopic.mean_cost, cell.index.mean_cost);
  return cell;
}

/// Large-fleet simulation study; sweeps unset failure-band / case axes.
inline RunReport run_large_system(const ScenarioConfig& config) {
  if (config.n_instances < 1) throw ValidationError("instances", "need at least one instance");
  RunReport report;
  report.study = config.study == Study::MyopicComparison ? Study::MyopicComparison : Study::LargeSystem;
  const auto& d = large_fleet_distributions();
  std::vector<FailureBand> bands = config.failure_band
                                       ? std::vector{*config.failure_band}
                                       : std::vector{FailureBand::Low, FailureBand::Medium, FailureBand::High};
  std::vector<int> cases;
  if (config.maint_case) cases.push_back(*config.maint_case);
  else
    for (int k = 1; k <= static_cast<int>(d.maint_intercept.size()); ++k) cases.push_back(k);
  for (auto band : bands)
    for (int k : cases) {
      ScenarioConfig c = config;
      c.study = report.study;
      c.operation = c.operation.value_or(Operation::Linear);
      c.failure_band = band;
      c.maint_case = k;
      report.comparison.push_back(run_comparison_cell(c));
      report.n_discarded_nonindexable += report.comparison.back().n_discarded;
    }
  return report;
}

inline RunReport run_study(const ScenarioConfig& c) {
  return c.study == Study::Suboptimality ? run_suboptimality(c) : run_large_system(c);
}

}  // namespace pmidx
