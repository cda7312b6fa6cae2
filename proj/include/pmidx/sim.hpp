#pragma once

// Monte Carlo simulation of a fleet under a decision rule, on common random
// numbers: every machine draws its transitions from its own per-period
// substream, so two policies facing the same seed see the same uniforms.

#include <cstdint>
#include <string>
#include <vector>

#include "pmidx/errors.hpp"
#include "pmidx/model.hpp"
#include "pmidx/policy.hpp"
#include "pmidx/random.hpp"

namespace pmidx {

struct Trajectory {
  std::size_t horizon = 0;
  double discounted_cost = 0.0;
  std::size_t n_interventions = 0;
  std::size_t n_failures = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

namespace detail {

inline State sample_intervention(const MachineSpec& s, State x, double u) {
  const auto& row = s.intervention_kernel[x];
  double acc = 0.0;
  for (State y = 0; y + 1 < x; ++y) {
    acc += row[y];
    if (u < acc) return y;
  }
  return x - 1;
}

enum class Move { Stay, Advance, Fail };

inline Move sample_operation(const MachineSpec& s, State x, double u) {
  if (u < s.p_fail[x]) return Move::Fail;
  if (u < s.p_fail[x] + s.p_advance[x]) return Move::Advance;
  return Move::Stay;
}

}  // namespace detail

/// One replicate from the all-new state. Per period t: the policy picks
/// machines; each picked machine pays C(x) and lands at y ~ P1(x, .); every
/// machine then operates for the period, paying K and moving by P0. A failure
/// resets the machine to 0 and costs B at t+1. Costs are weighted beta^t.
inline Trajectory simulate(const FleetSpec& fleet, Policy policy, std::size_t horizon, std::uint64_t seed) {
  require_valid(fleet);
  if (horizon < 1) throw ValidationError("horizon", "horizon must be at least 1");
  policy.reseed(derive_seed(seed, {0x706f6c6963ULL, policy.seed()}));

  const std::size_t m = fleet.machines.size();
  std::vector<State> states(m, 0);
  std::vector<double> discount(m, 1.0);
  Trajectory tr;
  tr.horizon = horizon;
  tr.seed = seed;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Selection sel = decide(policy, states, fleet.n_repairmen);
    std::size_t next_pick = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const MachineSpec& s = fleet.machines[i];
      Stream rng(derive_seed(seed, {i, t}));
      const double u_intervene = rng.uniform();
      const double u_operate = rng.uniform();
      State x = states[i];
      double cost = 0.0;
      if (next_pick < sel.size() && sel[next_pick] == i) {
        ++next_pick;
        ++tr.n_interventions;
        cost += s.maint_cost[x];
        x = detail::sample_intervention(s, x, u_intervene);
      }
      cost += s.op_cost[x];
      switch (detail::sample_operation(s, x, u_operate)) {
        case detail::Move::Fail:
          ++tr.n_failures;
          cost += s.beta * s.fail_cost;
          x = 0;
          break;
        case detail::Move::Advance:
          ++x;
          break;
        case detail::Move::Stay:
          break;
      }
      tr.discounted_cost += discount[i] * cost;
      discount[i] *= s.beta;
      states[i] = x;
    }
  }
  return tr;
}

struct PolicySummary {
  std::string policy;
  double mean_cost = 0.0;
  double mean_interventions = 0.0;
  double mean_failures = 0.0;
  std::size_t n_replicates = 0;
};

struct BatchResult {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::vector<PolicySummary> summaries;
  /// replicates[k][r]: policy k, replicate r.
  std::vector<std::vector<Trajectory>> replicates;
};

/// Every policy faces the same replicate seeds derive_seed(seed, {r}).
inline BatchResult simulate_batch(const FleetSpec& fleet, const std::vector<Policy>& policies,
                                  const std::vector<std::string>& names, std::size_t horizon,
                                  std::size_t n_replicates, std::uint64_t seed) {
  if (n_replicates < 1) throw ValidationError("replicates", "need at least one replicate");
  if (names.size() != policies.size()) throw ValidationError("dimensions", "one name per policy");
  BatchResult out;
  out.seed = seed;
  out.horizon = horizon;
  out.replicates.resize(policies.size());
  for (std::size_t k = 0; k < policies.size(); ++k) {
    PolicySummary sum;
    sum.policy = names[k];
    sum.n_replicates = n_replicates;
    auto& reps = out.replicates[k];
    reps.reserve(n_replicates);
    for (std::size_t r = 0; r < n_replicates; ++r) {
      reps.push_back(simulate(fleet, policies[k], horizon, derive_seed(seed, {r})));
      sum.mean_cost += reps.back().discounted_cost;
      sum.mean_interventions += static_cast<double>(reps.back().n_interventions);
      sum.mean_failures += static_cast<double>(reps.back().n_failures);
    }
    const double nr = static_cast<double>(n_replicates);
    sum.mean_cost /= nr;
    sum.mean_interventions /= nr;
    sum.mean_failures /= nr;
    out.summaries.push_back(std::move(sum));
  }
  return out;
}

}  // namespace pmidx
