#pragma once

// Exact dynamic-programming references: the single-machine W-charge problem,
// a Whittle-indifference oracle, a Gittins-index oracle and the joint
// multi-machine MDP with its policy evaluator.
//
// Timing used throughout: operating at x costs K(x) and moves by P0(x, .);
// a failure is charged B on arrival at 0 (one period later). An intervention
// at x costs C(x), lands at y ~ P1(x, .), and the machine is then operated
// from y within the same period.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "pmidx/errors.hpp"
#include "pmidx/index.hpp"
#include "pmidx/model.hpp"
#include "pmidx/policy.hpp"

namespace pmidx {

// ---------------------------------------------------------------------------
// Single machine

struct WChargeSolution {
  double w = 0.0;
  std::vector<double> value;
  /// operate_set[x] is true iff operating is optimal at x (ties go to operation).
  std::vector<bool> operate_set;
  std::vector<double> operate_value;
  std::vector<double> intervene_value;
  std::size_t iterations = 0;
};

struct WChargeOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10'000'000;
};

namespace detail {

inline double operate_term(const MachineSpec& s, State x, const std::vector<double>& v) {
  const double next = s.p_advance[x] > 0.0 ? s.p_advance[x] * v[x + 1] : 0.0;
  return s.op_cost[x] + s.beta * (s.p_stay(x) * v[x] + next + s.p_fail[x] * (s.fail_cost + v[0]));
}

inline void wcharge_terms(const MachineSpec& s, double w, const std::vector<double>& v, std::vector<double>& op,
                          std::vector<double>& iv) {
  const std::size_t n = s.n_states;
  for (State x = 0; x < n; ++x) op[x] = operate_term(s, x, v);
  iv[0] = s.maint_cost[0] + w + op[0];
  for (State x = 1; x < n; ++x) {
    double land = 0.0;
    for (State y = 0; y < x; ++y) land += s.intervention_kernel[x][y] * op[y];
    iv[x] = s.maint_cost[x] + w + land;
  }
}

/// Value iteration from `v` (updated in place) to the absolute tolerance.
inline WChargeSolution solve_wcharge_from(const MachineSpec& s, double w, std::vector<double>& v,
                                          const WChargeOptions& opts) {
  const std::size_t n = s.n_states;
  std::vector<double> op(n), iv(n), next(n);
  WChargeSolution sol;
  sol.w = w;
  for (std::size_t it = 1;; ++it) {
    wcharge_terms(s, w, v, op, iv);
    double diff = 0.0;
    for (State x = 0; x < n; ++x) {
      next[x] = std::min(op[x], iv[x]);
      diff = std::max(diff, std::abs(next[x] - v[x]));
    }
    v.swap(next);
    if (diff <= opts.tolerance) {
      sol.iterations = it;
      break;
    }
    if (it >= opts.max_iterations) throw NotConverged(concat("W-charge value iteration stalled, diff=", diff));
  }
  wcharge_terms(s, w, v, op, iv);
  sol.value = v;
  sol.operate_set.resize(n);
  for (State x = 0; x < n; ++x) sol.operate_set[x] = op[x] <= iv[x];
  sol.operate_value = std::move(op);
  sol.intervene_value = std::move(iv);
  return sol;
}

inline double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace detail

/// Single-machine problem with an extra charge W per intervention.
inline WChargeSolution solve_wcharge(const MachineSpec& spec, double w, const WChargeOptions& opts = {}) {
  std::vector<double> v(spec.n_states, 0.0);
  return detail::solve_wcharge_from(spec, w, v, opts);
}

struct OracleOptions {
  double vi_tolerance = 1e-10;
  double w_tolerance = 1e-8;
  std::size_t max_doublings = 60;
};

/// Smallest charge W at which operating is optimal at x, by bisection.
inline double whittle_oracle(const MachineSpec& spec, State x, const OracleOptions& opts = {}) {
  require_well_posed(spec);
  if (x >= spec.n_states) throw ValidationError("state_range", detail::concat("state ", x, " out of range"));
  const double span = detail::max_of(spec.op_cost) / (1.0 - spec.beta);
  double lo = -detail::max_of(spec.maint_cost) - span;
  double hi = spec.fail_cost + span;
  const WChargeOptions vi{opts.vi_tolerance};
  std::vector<double> v(spec.n_states, 0.0);
  auto operates = [&](double w) -> bool { return detail::solve_wcharge_from(spec, w, v, vi).operate_set[x]; };

  std::size_t doublings = 0;
  while (operates(lo)) {
    if (++doublings > opts.max_doublings) throw NumericalError("whittle_oracle: lower bracket did not expand");
    lo -= std::max(1.0, hi - lo);
  }
  while (!operates(hi)) {
    if (++doublings > opts.max_doublings) throw NumericalError("whittle_oracle: upper bracket did not expand");
    hi += std::max(1.0, hi - lo);
  }
  while (hi - lo > opts.w_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (operates(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace detail {

/// E[beta^tau(0,x)] and K(0, tau(0,x)) by a direct linear solve of the chain
/// killed on reaching x.
inline std::pair<double, double> first_passage_from_new(const MachineSpec& s, State x) {
  if (x == 0) return {1.0, 0.0};
  const auto n = static_cast<Eigen::Index>(x);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd hit = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n);
  for (State z = 0; z < x; ++z) {
    const auto i = static_cast<Eigen::Index>(z);
    a(i, i) -= s.beta * s.p_stay(z);
    a(i, 0) -= s.beta * s.p_fail[z];
    if (z + 1 < x) a(i, i + 1) -= s.beta * s.p_advance[z];
    else hit(i) = s.beta * s.p_advance[z];
    cost(i) = s.op_cost[z] + s.beta * s.p_fail[z] * s.fail_cost;
  }
  const auto lu = a.partialPivLu();
  return {lu.solve(hit)(0), lu.solve(cost)(0)};
}

inline double gittins_direct(const MachineSpec& s, State x) {
  const auto [e0, k0] = first_passage_from_new(s, x);
  const double beta = s.beta;
  const double pa = s.p_advance[x], pf = s.p_fail[x], ps = s.p_stay(x);
  const auto& C = s.maint_cost;
  const double next = pa > 0.0 ? beta * pa * C[x + 1] : 0.0;
  const double num = s.op_cost[x] + beta * pf * (k0 + s.fail_cost) + beta * ps * C[x] + next + beta * pf * e0 * C[x] - C[x];
  return num / (1.0 - beta * (ps + pa) - beta * pf * e0);
}

/// Whether some stopping time tau >= 1 started at x has
/// E[cost before tau] + E[beta^tau C(X_tau)] - C(x) <= lambda (1 - E beta^tau).
inline bool stopping_worthwhile(const MachineSpec& s, State x, double lambda, std::vector<double>& u) {
  const std::size_t n = s.n_states;
  const double run = lambda * (1.0 - s.beta);
  std::vector<double> next(n);
  auto cont = [&](State z) { return operate_term(s, z, u) - run; };
  const double scale = std::max({1.0, max_of(s.maint_cost), std::abs(lambda)});
  for (std::size_t it = 0; it < 10'000'000; ++it) {
    double diff = 0.0;
    for (State z = 0; z < n; ++z) {
      next[z] = std::min(s.maint_cost[z], cont(z));
      diff = std::max(diff, std::abs(next[z] - u[z]));
    }
    u.swap(next);
    if (diff <= 1e-14 * scale) break;
  }
  return cont(x) <= s.maint_cost[x];
}

}  // namespace detail

/// G(x) by optimal stopping: bisection on the retirement reward lambda.
inline double gittins_by_stopping(const MachineSpec& spec, State x) {
  const double span = (detail::max_of(spec.op_cost) + spec.fail_cost + 2.0 * detail::max_of(spec.maint_cost)) /
                      (1.0 - spec.beta);
  double lo = -span - 1.0, hi = span + 1.0;
  std::vector<double> u(spec.n_states, 0.0);
  for (int i = 0; i < 60 && detail::stopping_worthwhile(spec, x, lo, u); ++i) lo -= hi - lo;
  for (int i = 0; i < 60 && !detail::stopping_worthwhile(spec, x, hi, u); ++i) hi += hi - lo;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (detail::stopping_worthwhile(spec, x, mid, u) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Gittins cost rate of operation at x, from the first-passage formula over
/// tau* = min(return to x, first visit to x+1), checked against optimal stopping.
inline double gittins_oracle(const MachineSpec& spec, State x) {
  require_well_posed(spec);
  if (x >= spec.n_states) throw ValidationError("state_range", detail::concat("state ", x, " out of range"));
  const double direct = detail::gittins_direct(spec, x);
  const double stopping = gittins_by_stopping(spec, x);
  if (std::abs(direct - stopping) > 1e-6 * std::max(1.0, std::abs(direct)))
    throw ModelInconsistency(detail::concat("Gittins index at x=", x, ": first-passage ", direct,
                                            " vs optimal stopping ", stopping));
  return direct;
}

// ---------------------------------------------------------------------------
// Joint MDP

using ActionMask = std::uint32_t;

struct SolveOptions {
  double epsilon = 1e-4;
  std::size_t max_iterations = 1'000'000;
  /// Cap on n_joint_states * |actions|.
  std::size_t memory_budget = 100'000'000;
};

struct JointMdp {
  std::vector<std::size_t> radix;
  std::size_t n_joint_states = 0;
  /// Bit m set means machine m is intervened; sorted by (count, action vector).
  std::vector<ActionMask> actions;
  std::vector<double> value;
  std::vector<std::uint32_t> policy;
  std::size_t iterations = 0;
  double residual = 0.0;
};

/// Randomised stationary policy over joint states: (action, probability) pairs.
struct TabularPolicy {
  std::vector<std::vector<std::pair<ActionMask, double>>> choices;
};

struct PolicyValue {
  std::vector<double> value;
  std::size_t iterations = 0;
  double residual = 0.0;
};

namespace detail {

struct SparseRow {
  std::vector<std::pair<State, double>> entries;
};

struct MachineOperator {
  std::vector<SparseRow> rows;  // successor distribution
  std::vector<double> cost;     // expected one-period cost
};

inline void add_entry(SparseRow& r, State y, double p) {
  if (p == 0.0) return;
  for (auto& e : r.entries)
    if (e.first == y) {
      e.second += p;
      return;
    }
  r.entries.emplace_back(y, p);
}

inline MachineOperator operate_operator(const MachineSpec& s) {
  MachineOperator op;
  op.rows.resize(s.n_states);
  op.cost.resize(s.n_states);
  for (State x = 0; x < s.n_states; ++x) {
    add_entry(op.rows[x], x, s.p_stay(x));
    if (s.p_advance[x] > 0.0) add_entry(op.rows[x], x + 1, s.p_advance[x]);
    add_entry(op.rows[x], 0, s.p_fail[x]);
    op.cost[x] = s.op_cost[x] + s.beta * s.p_fail[x] * s.fail_cost;
  }
  return op;
}

/// Intervene-then-operate; row 0 is left empty (inadmissible).
inline MachineOperator intervene_operator(const MachineSpec& s, const MachineOperator& operate) {
  MachineOperator iv;
  iv.rows.resize(s.n_states);
  iv.cost.assign(s.n_states, 0.0);
  for (State x = 1; x < s.n_states; ++x) {
    iv.cost[x] = s.maint_cost[x];
    for (State y = 0; y < x; ++y) {
      const double p = s.intervention_kernel[x][y];
      if (p == 0.0) continue;
      iv.cost[x] += p * operate.cost[y];
      for (const auto& [z, q] : operate.rows[y].entries) add_entry(iv.rows[x], z, p * q);
    }
  }
  return iv;
}

/// Joint dynamics as products of per-machine operators; machine M-1 varies fastest.
class JointModel {
 public:
  explicit JointModel(const FleetSpec& fleet) : beta_(fleet.machines.front().beta) {
    const std::size_t m = fleet.machines.size();
    radix_.resize(m);
    stride_.resize(m);
    n_ = 1;
    for (std::size_t i = m; i-- > 0;) {
      const auto& spec = fleet.machines[i];
      if (spec.beta != beta_) throw ValidationError("beta_range", "joint MDP needs a common beta across machines");
      radix_[i] = spec.n_states;
      stride_[i] = n_;
      n_ *= spec.n_states;
    }
    for (const auto& spec : fleet.machines) {
      operate_.push_back(operate_operator(spec));
      intervene_.push_back(intervene_operator(spec, operate_.back()));
    }
  }

  std::size_t size() const noexcept { return n_; }
  double beta() const noexcept { return beta_; }
  const std::vector<std::size_t>& radix() const noexcept { return radix_; }

  State machine_state(std::size_t s, std::size_t m) const { return (s / stride_[m]) % radix_[m]; }

  bool admissible(std::size_t s, ActionMask a) const {
    for (std::size_t m = 0; m < radix_.size(); ++m)
      if ((a >> m & 1U) && machine_state(s, m) == 0) return false;
    return true;
  }

  double cost(std::size_t s, ActionMask a) const {
    double c = 0.0;
    for (std::size_t m = 0; m < radix_.size(); ++m) {
      const auto& op = (a >> m & 1U) ? intervene_[m] : operate_[m];
      c += op.cost[machine_state(s, m)];
    }
    return c;
  }

  /// out = E[v(next) | s, a] for every s.
  void expect(ActionMask a, const std::vector<double>& v, std::vector<double>& out, std::vector<double>& scratch) const {
    out = v;
    for (std::size_t m = 0; m < radix_.size(); ++m) {
      const auto& op = (a >> m & 1U) ? intervene_[m] : operate_[m];
      scratch.assign(n_, 0.0);
      const std::size_t stride = stride_[m];
      for (std::size_t s = 0; s < n_; ++s) {
        const State x = machine_state(s, m);
        const std::size_t base = s - x * stride;
        double acc = 0.0;
        for (const auto& [y, p] : op.rows[x].entries) acc += p * out[base + y * stride];
        scratch[s] = acc;
      }
      out.swap(scratch);
    }
  }

 private:
  double beta_;
  std::size_t n_ = 0;
  std::vector<std::size_t> radix_, stride_;
  std::vector<MachineOperator> operate_, intervene_;
};

inline std::vector<ActionMask> joint_actions(std::size_t n_machines, std::size_t n_repairmen) {
  if (n_machines > 31) throw ValidationError("dimensions", "joint MDP supports at most 31 machines");
  std::vector<ActionMask> out;
  for (ActionMask a = 0; a < (ActionMask{1} << n_machines); ++a)
    if (static_cast<std::size_t>(std::popcount(a)) <= n_repairmen) out.push_back(a);
  // Action vector (a_0, ..., a_{M-1}) compared lexicographically: a smaller
  // vector has its first set bit later, i.e. reversed bit order as integer.
  auto reversed = [n_machines](ActionMask a) {
    ActionMask r = 0;
    for (std::size_t m = 0; m < n_machines; ++m)
      if (a >> m & 1U) r |= ActionMask{1} << (n_machines - 1 - m);
    return r;
  };
  std::sort(out.begin(), out.end(), [&](ActionMask a, ActionMask b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    return pa != pb ? pa < pb : reversed(a) < reversed(b);
  });
  return out;
}

inline void check_budget(std::size_t n_states, std::size_t n_actions, std::size_t budget) {
  const std::size_t need = n_states * n_actions;
  if (n_actions != 0 && need / n_actions != n_states) throw BudgetExceeded(std::numeric_limits<std::size_t>::max(), budget);
  if (need > budget) throw BudgetExceeded(need, budget);
}

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool converged(double diff, double beta, double norm, double epsilon) {
  return diff * beta / (1.0 - beta) <= epsilon * norm;
}

}  // namespace detail

/// Optimal discounted cost of the fleet by value iteration from V = 0.
inline JointMdp solve_joint(const FleetSpec& fleet, const SolveOptions& opts = {}) {
  require_valid(fleet);
  const detail::JointModel model(fleet);
  JointMdp mdp;
  mdp.radix = model.radix();
  mdp.n_joint_states = model.size();
  mdp.actions = detail::joint_actions(fleet.machines.size(), fleet.n_repairmen);
  detail::check_budget(mdp.n_joint_states, mdp.actions.size(), opts.memory_budget);

  const std::size_t n = model.size();
  const double beta = model.beta();
  std::vector<double> v(n, 0.0), best(n), ev, scratch;
  std::vector<std::uint32_t> arg(n);
  for (std::size_t it = 1;; ++it) {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::uint32_t k = 0; k < mdp.actions.size(); ++k) {
      const ActionMask a = mdp.actions[k];
      model.expect(a, v, ev, scratch);
      for (std::size_t s = 0; s < n; ++s) {
        if (a != 0 && !model.admissible(s, a)) continue;
        const double q = model.cost(s, a) + beta * ev[s];
        if (q < best[s]) {
          best[s] = q;
          arg[s] = k;
        }
      }
    }
    double diff = 0.0;
    for (std::size_t s = 0; s < n; ++s) diff = std::max(diff, std::abs(best[s] - v[s]));
    v.swap(best);
    if (detail::converged(diff, beta, detail::sup_norm(v), opts.epsilon)) {
      mdp.iterations = it;
      mdp.residual = diff;
      break;
    }
    if (it >= opts.max_iterations) throw NotConverged(detail::concat("joint value iteration: diff ", diff, " after ", it, " sweeps"));
  }
  mdp.value = std::move(v);
  mdp.policy = std::move(arg);
  return mdp;
}

/// The greedy policy of a solved MDP as a tabular policy.
inline TabularPolicy as_tabular(const JointMdp& mdp) {
  TabularPolicy p;
  p.choices.resize(mdp.n_joint_states);
  for (std::size_t s = 0; s < mdp.n_joint_states; ++s) p.choices[s] = {{mdp.actions[mdp.policy[s]], 1.0}};
  return p;
}

/// Exact action distribution of a decision rule at every joint state.
inline TabularPolicy tabulate(const FleetSpec& fleet, const Policy& policy) {
  const detail::JointModel model(fleet);
  const std::size_t m = fleet.machines.size();
  TabularPolicy p;
  p.choices.resize(model.size());
  std::vector<State> states(m);
  for (std::size_t s = 0; s < model.size(); ++s) {
    for (std::size_t i = 0; i < m; ++i) states[i] = model.machine_state(s, i);
    for (auto& [sel, prob] : decision_distribution(policy, states, fleet.n_repairmen)) {
      ActionMask a = 0;
      for (std::size_t id : sel) a |= ActionMask{1} << id;
      p.choices[s].emplace_back(a, prob);
    }
  }
  return p;
}

/// Discounted cost of a tabular policy by fixed-point iteration from V = 0.
inline PolicyValue evaluate_policy(const FleetSpec& fleet, const TabularPolicy& policy, const SolveOptions& opts = {}) {
  require_valid(fleet);
  const detail::JointModel model(fleet);
  const std::size_t n = model.size();
  if (policy.choices.size() != n) throw ValidationError("dimensions", "tabular policy does not cover the joint state space");

  std::vector<ActionMask> used;
  for (std::size_t s = 0; s < n; ++s)
    for (const auto& [a, p] : policy.choices[s]) {
      if (static_cast<std::size_t>(std::popcount(a)) > fleet.n_repairmen || !model.admissible(s, a))
        throw ValidationError("action", detail::concat("inadmissible action ", a, " at joint state ", s));
      if (std::find(used.begin(), used.end(), a) == used.end()) used.push_back(a);
    }
  std::sort(used.begin(), used.end());
  detail::check_budget(n, used.size(), opts.memory_budget);

  // Per-state one-step cost and, per used action, the weight it gets there.
  std::vector<double> cost(n, 0.0);
  std::vector<std::vector<double>> weight(used.size(), std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s)
    for (const auto& [a, p] : policy.choices[s]) {
      cost[s] += p * model.cost(s, a);
      const auto k = static_cast<std::size_t>(std::lower_bound(used.begin(), used.end(), a) - used.begin());
      weight[k][s] += p;
    }

  const double beta = model.beta();
  PolicyValue out;
  std::vector<double> v(n, 0.0), next(n), ev, scratch;
  for (std::size_t it = 1;; ++it) {
    next = cost;
    for (std::size_t k = 0; k < used.size(); ++k) {
      model.expect(used[k], v, ev, scratch);
      for (std::size_t s = 0; s < n; ++s)
        if (weight[k][s] != 0.0) next[s] += beta * weight[k][s] * ev[s];
    }
    double diff = 0.0;
    for (std::size_t s = 0; s < n; ++s) diff = std::max(diff, std::abs(next[s] - v[s]));
    v.swap(next);
    if (detail::converged(diff, beta, detail::sup_norm(v), opts.epsilon)) {
      out.iterations = it;
      out.residual = diff;
      break;
    }
    if (it >= opts.max_iterations) throw NotConverged(detail::concat("policy evaluation: diff ", diff, " after ", it, " sweeps"));
  }
  out.value = std::move(v);
  return out;
}

inline PolicyValue evaluate_policy(const FleetSpec& fleet, const Policy& policy, const SolveOptions& opts = {}) {
  return evaluate_policy(fleet, tabulate(fleet, policy), opts);
}

}  // namespace pmidx
