#pragma once

#include <fstream>
#include <string>

#include "pmidx/pmidx.hpp"

namespace pmidx::testing {

inline Json load_json(const std::string& name) {
  std::ifstream in(std::string(PMIDX_DATA_DIR) + "/" + name);
  return Json::parse(in);
}

inline FleetSpec load_fleet(const std::string& name) {
  FleetSpec f;
  const Json j = load_json(name);
  for (const auto& m : j.at("machines")) f.machines.push_back(build_machine(m.get<MachineParams>()));
  f.n_repairmen = j.at("n_repairmen").get<std::size_t>();
  return f;
}

inline FleetSpec illustrative_fleet() { return load_fleet("illustrative_fleet.json"); }
inline FleetSpec small_fleet() { return load_fleet("small_fleet.json"); }

/// Small random machine in the ranges of the small-fleet study.
inline MachineParams random_params(Stream& rng, std::size_t n_states, Mode mode, double beta = 0.95) {
  MachineParams p;
  p.beta = beta;
  p.n_states = n_states;
  p.mode = mode;
  p.deterioration_rate = rng.uniform(0.2, 0.6) / static_cast<double>(n_states);
  p.fail_coef = rng.uniform(0.005, 0.03);
  p.fail_scale = static_cast<double>(n_states) / 2.0;
  p.intervention_decay = rng.uniform(0.2, 2.0);
  p.maint_intercept = rng.uniform(20, 300);
  p.maint_slope = rng.uniform(2, 15);
  p.op_intercept = rng.uniform(10, 60);
  p.op_slope = rng.uniform(1, 12);
  p.op_quadratic = rng.uniform() < 0.5 ? rng.uniform(0.4, 0.6) : 0.0;
  p.fail_cost = mode == Mode::WithFailures ? rng.uniform(300, 3000) : 0.0;
  return p;
}

inline MachineSpec random_machine(Stream& rng, std::size_t n_states, Mode mode, double beta = 0.95) {
  return build_machine(random_params(rng, n_states, mode, beta));
}

inline MachineSpec with_perfect_kernel(MachineSpec m) {
  m.intervention_kernel = perfect_intervention_kernel(m.n_states);
  return m;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace pmidx::testing
