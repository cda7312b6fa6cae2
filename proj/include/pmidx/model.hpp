#pragma once

// Machine and fleet specifications for the preventive-maintenance model:
// right-skip-free deterioration under operation, random-outcome interventions,
// and the parametric generator used by the experiment studies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "pmidx/errors.hpp"

namespace pmidx {

using State = std::size_t;
using Matrix = std::vector<std::vector<double>>;

enum class Mode { WithFailures, PureDeterioration };

/// Behaviour of the top state in the pure-deterioration model: either it
/// absorbs (and keeps charging its operating cost), or it breaks down with
/// certainty, returning to state 0 at the failure cost.
enum class Terminal { Absorbing, Breakdown };

/// One machine. States are 0..n_states-1, state 0 is as-good-as-new.
///
/// Under operation a machine at x stays, advances to x+1 or fails back to 0.
/// `intervention_kernel[x][y]` is the probability that an intervention at x
/// leaves the machine at y < x; row 0 is all zeros (no intervention outcome
/// below the new state).
struct MachineSpec {
  double beta = 0.95;
  std::size_t n_states = 0;
  std::vector<double> p_advance;
  std::vector<double> p_fail;
  Matrix intervention_kernel;
  std::vector<double> op_cost;
  std::vector<double> maint_cost;
  double fail_cost = 0.0;
  Mode mode = Mode::WithFailures;
  Terminal terminal = Terminal::Absorbing;
  /// Non-fatal notes from construction (e.g. clamped probabilities).
  std::vector<std::string> warnings;

  State top() const noexcept { return n_states - 1; }
  double p_stay(State x) const noexcept { return 1.0 - p_advance[x] - p_fail[x]; }

  friend bool operator==(const MachineSpec&, const MachineSpec&) = default;
};

struct FleetSpec {
  std::vector<MachineSpec> machines;
  std::size_t n_repairmen = 1;
  bool allow_idle = true;

  friend bool operator==(const FleetSpec&, const FleetSpec&) = default;
};

/// Parameter bundle for the parametric machine generator.
///
///   P0(x,0)   = q * exp(x / s)           for x >= 1, 0 at x = 0
///   P0(x,x+1) = min(r * (x + 1), 1)      0 at the top state
///   P1(x,y)   = exp(-nu*y) / sum_{y'<x} exp(-nu*y')
///   C(x)      = a + b x
///   K(x)      = e + f x + g x^2
struct MachineParams {
  double beta = 0.95;
  std::size_t n_states = 8;
  double deterioration_rate = 0.0;  // r
  double fail_coef = 0.0;           // q
  double fail_scale = 4.0;          // s
  double intervention_decay = 1.0;  // nu
  double maint_intercept = 0.0;     // a
  double maint_slope = 0.0;         // b
  double op_intercept = 0.0;        // e
  double op_slope = 0.0;            // f
  double op_quadratic = 0.0;        // g
  double fail_cost = 0.0;           // B
  Mode mode = Mode::WithFailures;
  Terminal terminal = Terminal::Absorbing;
};

struct Violation {
  std::string invariant;
  State state = 0;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

constexpr double kProbabilityTolerance = 1e-12;

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

}  // namespace detail

/// Checks every MachineSpec invariant. Returns an empty list iff the spec is
/// valid; each entry names the invariant and the offending state.
///
/// The top state is exempt from the non-decreasing advance-rate check: the
/// truncation forces P0(top, top+1) = 0.
inline std::vector<Violation> validate(const MachineSpec& spec) {
  using detail::concat;
  using detail::kProbabilityTolerance;
  std::vector<Violation> out;
  auto add = [&](const char* name, State x, std::string msg) {
    out.push_back(Violation{name, x, std::move(msg)});
  };

  if (!(spec.beta > 0.0 && spec.beta < 1.0)) add("beta_range", 0, concat("beta=", spec.beta, " not in (0,1)"));
  const std::size_t n = spec.n_states;
  if (n == 0) {
    add("dimensions", 0, "n_states must be positive");
    return out;
  }
  auto sized = [&](const char* name, std::size_t got) {
    if (got != n) add("dimensions", 0, concat(name, " has length ", got, ", expected ", n));
  };
  sized("p_advance", spec.p_advance.size());
  sized("p_fail", spec.p_fail.size());
  sized("op_cost", spec.op_cost.size());
  sized("maint_cost", spec.maint_cost.size());
  sized("intervention_kernel", spec.intervention_kernel.size());
  for (State x = 0; x < spec.intervention_kernel.size(); ++x)
    if (spec.intervention_kernel[x].size() != n)
      add("dimensions", x, concat("intervention_kernel row ", x, " has length ",
                                  spec.intervention_kernel[x].size(), ", expected ", n));
  if (!out.empty()) return out;

  for (State x = 0; x < n; ++x) {
    const double pa = spec.p_advance[x], pf = spec.p_fail[x];
    if (!(pa >= 0.0 && pa <= 1.0) || !(pf >= 0.0 && pf <= 1.0) || spec.p_stay(x) < -kProbabilityTolerance)
      add("row_stochastic", x, concat("P0(", x, ",.) is not a probability row (advance=", pa, ", fail=", pf, ")"));
  }
  if (spec.p_advance[n - 1] != 0.0)
    add("truncation", n - 1, concat("P0(", n - 1, ",", n, ") must be 0 at the top state"));
  if (spec.p_fail[0] != 0.0) add("no_failure_at_new", 0, "P0(0,0) failure probability must be 0");

  if (spec.mode == Mode::PureDeterioration) {
    for (State x = 0; x < n; ++x) {
      const bool breakdown_top = spec.terminal == Terminal::Breakdown && x == n - 1 && n > 1;
      const double expected = breakdown_top ? 1.0 : 0.0;
      if (spec.p_fail[x] != expected)
        add("pure_no_failures", x, concat("p_fail[", x, "]=", spec.p_fail[x], " in pure-deterioration mode"));
    }
  }

  for (State x = 1; x + 1 < n; ++x)
    if (spec.p_advance[x] < spec.p_advance[x - 1])
      add("p_advance_monotone", x, concat("p_advance not non-decreasing at x=", x));
  for (State x = 1; x < n; ++x)
    if (spec.p_fail[x] < spec.p_fail[x - 1]) add("p_fail_monotone", x, concat("p_fail not non-decreasing at x=", x));

  for (State y = 0; y < n; ++y)
    if (spec.intervention_kernel[0][y] != 0.0)
      add("intervention_support", 0, "intervention_kernel row 0 must be all zeros");
  for (State x = 1; x < n; ++x) {
    const auto& row = spec.intervention_kernel[x];
    double sum = 0.0;
    for (State y = 0; y < n; ++y) {
      if (y >= x && row[y] != 0.0)
        add("intervention_support", x, concat("P1(", x, ",", y, ") must be 0 for y >= x"));
      if (row[y] < 0.0) add("intervention_support", x, concat("P1(", x, ",", y, ") is negative"));
      if (y < x) sum += row[y];
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance)
      add("intervention_row_sum", x, concat("intervention row ", x, " sums to ", sum));
    for (State y = 0; y + 1 < x; ++y)
      if (!(row[y] > row[y + 1]))
        add("intervention_kernel_decreasing", x, concat("P1(", x, ",", y, ") <= P1(", x, ",", y + 1, ")"));
  }

  auto costs = [&](const std::vector<double>& c, const char* nonneg, const char* mono, const char* label) {
    for (State x = 0; x < n; ++x) {
      if (!(c[x] >= 0.0)) add(nonneg, x, concat(label, "[", x, "] is negative"));
      if (x > 0 && c[x] < c[x - 1]) add(mono, x, concat(label, " not non-decreasing at x=", x));
    }
  };
  costs(spec.op_cost, "op_cost_nonnegative", "op_cost_monotone", "op_cost");
  costs(spec.maint_cost, "maint_cost_nonnegative", "maint_cost_monotone", "maint_cost");
  if (!(spec.fail_cost >= 0.0)) add("fail_cost_nonnegative", 0, "fail_cost is negative");
  return out;
}

inline std::vector<Violation> validate(const FleetSpec& fleet) {
  std::vector<Violation> out;
  if (fleet.n_repairmen < 1 || fleet.n_repairmen > fleet.machines.size())
    out.push_back({"fleet_repairmen", 0,
                   detail::concat("need 1 <= n_repairmen <= |M|, got ", fleet.n_repairmen, " for ",
                                  fleet.machines.size(), " machines")});
  for (std::size_t m = 0; m < fleet.machines.size(); ++m)
    for (auto v : validate(fleet.machines[m])) {
      v.message = detail::concat("machine ", m, ": ", v.message);
      out.push_back(std::move(v));
    }
  return out;
}

/// Throws ValidationError carrying the first violated invariant.
template <typename Spec>
void require_valid(const Spec& spec) {
  auto violations = validate(spec);
  if (!violations.empty()) throw ValidationError(violations.front().invariant, violations.front().message);
}

/// Checks only what the dynamic program needs (dimensions, discount factor,
/// stochastic rows, support below x). Monotonicity assumptions are waived,
/// so perfect-intervention kernels pass.
inline void require_well_posed(const MachineSpec& spec) {
  static const std::vector<std::string> structural{"beta_range", "dimensions", "row_stochastic", "truncation",
                                                   "no_failure_at_new", "intervention_support",
                                                   "intervention_row_sum"};
  for (const auto& v : validate(spec))
    if (std::find(structural.begin(), structural.end(), v.invariant) != structural.end())
      throw ValidationError(v.invariant, v.message);
}

/// Intervention kernel with P1(x,y) proportional to exp(-nu*y) over y < x.
inline Matrix exponential_intervention_kernel(std::size_t n_states, double nu) {
  Matrix k(n_states, std::vector<double>(n_states, 0.0));
  for (State x = 1; x < n_states; ++x) {
    double total = 0.0;
    for (State y = 0; y < x; ++y) total += std::exp(-nu * static_cast<double>(y));
    for (State y = 0; y < x; ++y) k[x][y] = std::exp(-nu * static_cast<double>(y)) / total;
  }
  return k;
}

/// Kernel where every intervention restores the as-good-as-new state.
inline Matrix perfect_intervention_kernel(std::size_t n_states) {
  Matrix k(n_states, std::vector<double>(n_states, 0.0));
  for (State x = 1; x < n_states; ++x) k[x][0] = 1.0;
  return k;
}

/// Builds and validates a machine from the parametric bundle. Failure
/// probabilities are clamped to 1 - P0(x,x+1) where the exponential would
/// overflow the row; each clamp is recorded in `warnings`.
inline MachineSpec build_machine(const MachineParams& p) {
  if (p.n_states == 0) throw ValidationError("dimensions", "n_states must be positive");
  MachineSpec m;
  m.beta = p.beta;
  m.n_states = p.n_states;
  m.mode = p.mode;
  m.terminal = p.terminal;
  m.fail_cost = p.fail_cost;
  const std::size_t n = p.n_states;
  m.p_advance.assign(n, 0.0);
  m.p_fail.assign(n, 0.0);
  m.op_cost.resize(n);
  m.maint_cost.resize(n);

  for (State x = 0; x < n; ++x) {
    const double xd = static_cast<double>(x);
    const bool top = x + 1 == n;
    m.p_advance[x] = top ? 0.0 : std::min(p.deterioration_rate * (xd + 1.0), 1.0);
    if (x > 0 && p.mode == Mode::WithFailures) {
      const double raw = p.fail_coef * std::exp(xd / p.fail_scale);
      const double cap = 1.0 - m.p_advance[x];
      if (raw > cap) {
        m.warnings.push_back(detail::concat("p_fail clamped at x=", x, " from ", raw, " to ", cap));
        m.p_fail[x] = cap;
      } else {
        m.p_fail[x] = raw;
      }
    }
    m.maint_cost[x] = p.maint_intercept + p.maint_slope * xd;
    m.op_cost[x] = p.op_intercept + p.op_slope * xd + p.op_quadratic * xd * xd;
  }
  if (p.mode == Mode::PureDeterioration) {
    m.fail_cost = p.terminal == Terminal::Breakdown ? p.fail_cost : 0.0;
    if (p.terminal == Terminal::Breakdown && n > 1) m.p_fail[n - 1] = 1.0;
  }
  m.intervention_kernel = exponential_intervention_kernel(n, p.intervention_decay);
  require_valid(m);
  return m;
}

/// Same machine with every cost (K, C, B) multiplied by `factor`.
inline MachineSpec scale_costs(MachineSpec spec, double factor) {
  for (double& k : spec.op_cost) k *= factor;
  for (double& c : spec.maint_cost) c *= factor;
  spec.fail_cost *= factor;
  return spec;
}

}  // namespace pmidx
