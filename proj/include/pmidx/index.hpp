#pragma once

// Closed-form W-indices for deteriorating machines with random-outcome
// interventions.
//
// For a state x the index is the intervention charge W that makes the
// Gittins cost rate of postponing, G(x), equal to the cost rate of the
// "intervene on every arrival at x" cycle, B(x, W):
//
//   B(x, W) = (W + E_y[K(y, tau(y,x))] + E_y[E beta^tau(y,x)] C(x))
//             / (1 - E_y[E beta^tau(y,x)]),
//
// where y ~ P1(x, .) is the random post-intervention state and tau(y,x) is
// the first entry time into x under operation. When H (the closed form of G)
// is non-decreasing, solving for W gives
//
//   W(x) = H(x) (1 - Ebar(x)) - Ebar(x) C(x) - Kbar(x).
//
// All first-passage quantities follow from the scalar ratios
//   delta(x) = beta P0(x,x+1) / (1 - beta P0(x,x))
//   kappa(x) = K(x)           / (1 - beta P0(x,x))
//   gamma(x) = beta P0(x,0)   / (1 - beta P0(x,x)),  gamma(0) = 0
// through the recursions below. Failure costs B are charged on re-entry to
// state 0, one period after the failing operation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pmidx/errors.hpp"
#include "pmidx/model.hpp"

namespace pmidx {

enum class IndexVariant { Failures, PureDeterioration, PerfectIntervention };

/// How W(0) is reported. Interventions at the new state leave it unchanged,
/// so the fair charge there is -C(0); `FromH` keeps the empty-sum value H(0).
enum class StateZeroIndex { NegativeMaintenanceCost, FromH };

struct IndexOptions {
  /// H counts as non-decreasing when H(x+1) - H(x) >= -tol * max(1, |H(x)|).
  double monotone_tolerance = 1e-9;
  /// Smallest admissible value of 1 - sum_i gamma(i) prod_{z<i} delta(z).
  double denominator_floor = 1e-12;
  StateZeroIndex state_zero = StateZeroIndex::NegativeMaintenanceCost;
};

/// First-passage tables of the failures model. Lower-triangular matrices are
/// stored by target row: `e_beta_yx[x][y]` for y < x (row x has x entries).
struct AuxiliaryTables {
  std::vector<double> delta;
  std::vector<double> kappa;
  std::vector<double> gamma;
  /// 1 - sum_{i<x} gamma(i) prod_{z<i} delta(z), x = 0..n-1.
  std::vector<double> denominator;
  /// E[beta^tau(0,x)], with the convention e_beta_0x[0] = 1.
  std::vector<double> e_beta_0x;
  Matrix e_beta_yx;
  /// K(0, tau(0,x)), with k_0x[0] = 0.
  std::vector<double> k_0x;
  Matrix k_yx;
  /// One-step quantities E[beta^tau(y,y+1)] and K(y, tau(y,y+1)).
  std::vector<double> e_beta_next;
  std::vector<double> k_next;
};

struct IndexTable {
  std::size_t machine_id = 0;
  IndexVariant variant = IndexVariant::Failures;
  bool indexable = false;
  /// W(x) for every state, empty when the machine is not indexable.
  std::vector<double> w;
  std::vector<double> h;

  friend bool operator==(const IndexTable&, const IndexTable&) = default;
};

inline AuxiliaryTables build_auxiliary(const MachineSpec& spec, const IndexOptions& opts = {}) {
  const std::size_t n = spec.n_states;
  const double beta = spec.beta;
  const double B = spec.fail_cost;
  AuxiliaryTables aux;
  aux.delta.resize(n);
  aux.kappa.resize(n);
  aux.gamma.resize(n);
  for (State x = 0; x < n; ++x) {
    const double hold = 1.0 - beta * spec.p_stay(x);
    aux.delta[x] = beta * spec.p_advance[x] / hold;
    aux.kappa[x] = spec.op_cost[x] / hold;
    aux.gamma[x] = x == 0 ? 0.0 : beta * spec.p_fail[x] / hold;
  }

  // prefix[x] = prod_{z<x} delta(z)
  std::vector<double> prefix(n + 1, 1.0);
  for (State x = 0; x < n; ++x) prefix[x + 1] = prefix[x] * aux.delta[x];

  aux.denominator.resize(n);
  aux.e_beta_0x.resize(n);
  aux.k_0x.resize(n);
  double fail_mass = 0.0;  // sum_{i<x} gamma(i) prefix[i]
  double cost_mass = 0.0;  // sum_{i<x} (kappa(i) + gamma(i) B) prefix[i]
  for (State x = 0; x < n; ++x) {
    const double denom = 1.0 - fail_mass;
    if (x > 0 && !(denom >= opts.denominator_floor))
      throw NumericalError(detail::concat("first-passage denominator ", denom, " below floor ",
                                          opts.denominator_floor, " at state ", x));
    aux.denominator[x] = denom;
    aux.e_beta_0x[x] = prefix[x] / denom;
    aux.k_0x[x] = cost_mass / denom;
    fail_mass += aux.gamma[x] * prefix[x];
    cost_mass += (aux.kappa[x] + aux.gamma[x] * B) * prefix[x];
  }

  aux.e_beta_next.assign(n, 0.0);
  aux.k_next.assign(n, 0.0);
  for (State y = 0; y + 1 < n; ++y) {
    const double leak = 1.0 - aux.gamma[y] * aux.e_beta_0x[y];
    aux.e_beta_next[y] = aux.delta[y] / leak;
    aux.k_next[y] = (aux.kappa[y] + aux.gamma[y] * (aux.k_0x[y] + B)) / leak;
  }

  aux.e_beta_yx.assign(n, {});
  aux.k_yx.assign(n, {});
  for (State x = 1; x < n; ++x) {
    auto& e_row = aux.e_beta_yx[x];
    auto& k_row = aux.k_yx[x];
    e_row.assign(x, 0.0);
    k_row.assign(x, 0.0);
    double climb = 1.0;  // prod_{h=y}^{x-1} delta(h)
    for (State y = x; y-- > 0;) {
      climb *= aux.delta[y];
      e_row[y] = climb * aux.denominator[y] / aux.denominator[x];
      k_row[y] = y + 1 == x ? aux.k_next[y] : aux.k_next[y] + aux.e_beta_next[y] * k_row[y + 1];
    }
  }
  return aux;
}

/// Closed-form Gittins cost rate of operating from x until the first return
/// to x or first visit to x+1.
inline std::vector<double> h_function(const MachineSpec& spec, const AuxiliaryTables& aux) {
  const std::size_t n = spec.n_states;
  const double beta = spec.beta;
  const double B = spec.fail_cost;
  const auto& C = spec.maint_cost;
  std::vector<double> h(n);
  for (State x = 0; x < n; ++x) {
    const double pa = spec.p_advance[x], pf = spec.p_fail[x], ps = spec.p_stay(x);
    const double e0 = aux.e_beta_0x[x];
    const double next_cost = pa > 0.0 ? beta * pa * C[x + 1] : 0.0;
    const double run_cost = spec.op_cost[x] + beta * pf * (aux.k_0x[x] + B);
    const double stop_cost = beta * ps * C[x] + next_cost + beta * pf * e0 * C[x];
    const double discount = beta * (1.0 - pf) + beta * pf * e0;
    h[x] = (run_cost + stop_cost - C[x]) / (1.0 - discount);
  }
  return h;
}

inline bool is_non_decreasing(const std::vector<double>& v, double tol) {
  for (std::size_t x = 0; x + 1 < v.size(); ++x)
    if (v[x + 1] - v[x] < -tol * std::max(1.0, std::abs(v[x]))) return false;
  return true;
}

/// Expected discount and accumulated operating cost of the climb back to x
/// from the random post-intervention state y ~ P1(x, .).
struct InterventionCycle {
  std::vector<double> e_bar;
  std::vector<double> k_bar;
  std::vector<double> maint_cost;

  /// Cost rate B(x, W) of intervening on every arrival at x >= 1. Strictly
  /// increasing in W with slope 1 / (1 - e_bar[x]).
  double rate(State x, double w) const {
    return (w + k_bar[x] + e_bar[x] * maint_cost[x]) / (1.0 - e_bar[x]);
  }
};

inline InterventionCycle intervention_cycle(const MachineSpec& spec, const AuxiliaryTables& aux) {
  const std::size_t n = spec.n_states;
  InterventionCycle cyc;
  cyc.e_bar.assign(n, 0.0);
  cyc.k_bar.assign(n, 0.0);
  cyc.maint_cost = spec.maint_cost;
  for (State x = 1; x < n; ++x) {
    const auto& p1 = spec.intervention_kernel[x];
    for (State y = 0; y < x; ++y) {
      cyc.e_bar[x] += p1[y] * aux.e_beta_yx[x][y];
      cyc.k_bar[x] += p1[y] * aux.k_yx[x][y];
    }
  }
  return cyc;
}

namespace detail {

inline double state_zero_index(const MachineSpec& spec, const std::vector<double>& h, const IndexOptions& opts) {
  return opts.state_zero == StateZeroIndex::FromH ? h[0] : -spec.maint_cost[0];
}

inline void require_mode(const MachineSpec& spec, Mode mode, const char* who) {
  if (spec.mode != mode)
    throw ValidationError("mode", std::string(who) + ": machine has the wrong deterioration mode");
}

inline IndexTable failures_chain(const MachineSpec& spec, const IndexOptions& opts, IndexVariant variant) {
  const auto aux = build_auxiliary(spec, opts);
  IndexTable t;
  t.variant = variant;
  t.h = h_function(spec, aux);
  t.indexable = is_non_decreasing(t.h, opts.monotone_tolerance);
  if (!t.indexable) return t;
  const auto cyc = intervention_cycle(spec, aux);
  t.w.resize(spec.n_states);
  t.w[0] = state_zero_index(spec, t.h, opts);
  for (State x = 1; x < spec.n_states; ++x)
    t.w[x] = t.h[x] * (1.0 - cyc.e_bar[x]) - cyc.e_bar[x] * spec.maint_cost[x] - cyc.k_bar[x];
  return t;
}

inline IndexTable pure_chain(const MachineSpec& spec, const IndexOptions& opts) {
  const std::size_t n = spec.n_states;
  const double beta = spec.beta;
  const auto& C = spec.maint_cost;
  const auto& K = spec.op_cost;
  std::vector<double> delta(n), kappa(n);
  for (State x = 0; x < n; ++x) {
    const double hold = 1.0 - beta * (1.0 - spec.p_advance[x]);
    delta[x] = beta * spec.p_advance[x] / hold;
    kappa[x] = K[x] / hold;
  }
  auto step_up = [&](State x) { return spec.p_advance[x] > 0.0 ? C[x + 1] - C[x] : 0.0; };

  IndexTable t;
  t.variant = IndexVariant::PureDeterioration;
  t.h.resize(n);
  for (State x = 0; x < n; ++x) {
    const double pa = spec.p_advance[x];
    const double next = pa > 0.0 ? beta * pa * C[x + 1] : 0.0;
    t.h[x] = (K[x] + beta * (1.0 - pa) * C[x] + next - C[x]) / (1.0 - beta);
  }
  t.indexable = is_non_decreasing(t.h, opts.monotone_tolerance);
  if (!t.indexable) return t;

  t.w.resize(n);
  t.w[0] = state_zero_index(spec, t.h, opts);
  for (State x = 1; x < n; ++x) {
    const auto& p1 = spec.intervention_kernel[x];
    double climb_discount = 0.0;  // sum_y P1(x,y) prod_{z=y}^{x-1} delta(z)
    double climb_cost = 0.0;      // sum_y P1(x,y) sum_{h=y}^{x-1} kappa(h) prod_{z=y}^{h-1} delta(z)
    for (State y = 0; y < x; ++y) {
      double prod = 1.0, cost = 0.0;
      for (State h = y; h < x; ++h) {
        cost += kappa[h] * prod;
        prod *= delta[h];
      }
      climb_discount += p1[y] * prod;
      climb_cost += p1[y] * cost;
    }
    const double rate = (K[x] + beta * spec.p_advance[x] * step_up(x)) / (1.0 - beta);
    t.w[x] = rate * (1.0 - climb_discount) - climb_cost - C[x];
  }
  return t;
}

}  // namespace detail

/// W-indices of the failures model. Non-indexable machines (H decreasing
/// somewhere) come back with `indexable == false` and an empty `w`.
inline IndexTable w_index_failures(const MachineSpec& spec, const IndexOptions& opts = {}) {
  detail::require_mode(spec, Mode::WithFailures, "w_index_failures");
  return detail::failures_chain(spec, opts, IndexVariant::Failures);
}

/// W-indices of the failure-free model. A Breakdown terminal state is a
/// certain failure at the top, which only the failures chain expresses.
inline IndexTable w_index_pure(const MachineSpec& spec, const IndexOptions& opts = {}) {
  detail::require_mode(spec, Mode::PureDeterioration, "w_index_pure");
  if (spec.terminal == Terminal::Breakdown)
    return detail::failures_chain(spec, opts, IndexVariant::PureDeterioration);
  return detail::pure_chain(spec, opts);
}

/// Dispatches on the machine's mode.
inline IndexTable w_index(const MachineSpec& spec, const IndexOptions& opts = {}) {
  return spec.mode == Mode::WithFailures ? w_index_failures(spec, opts) : w_index_pure(spec, opts);
}

/// Indices computed as if every intervention restored state 0.
inline IndexTable w_index_perfect(MachineSpec spec, const IndexOptions& opts = {}) {
  spec.intervention_kernel = perfect_intervention_kernel(spec.n_states);
  IndexTable t = w_index(spec, opts);
  t.variant = IndexVariant::PerfectIntervention;
  return t;
}

/// B(x, W) for every state x >= 1 of a machine; entry 0 is unused.
inline InterventionCycle intervention_cycle(const MachineSpec& spec, const IndexOptions& opts = {}) {
  return intervention_cycle(spec, build_auxiliary(spec, opts));
}

}  // namespace pmidx
