#pragma once

// Decision rules that pick at most |R| machines for intervention per epoch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pmidx/errors.hpp"
#include "pmidx/index.hpp"
#include "pmidx/model.hpp"
#include "pmidx/random.hpp"

namespace pmidx {

enum class PolicyKind { Index, Naive, Threshold, MyopicPerfect };

/// Machine ids chosen for intervention, ascending.
using Selection = std::vector<std::size_t>;

class Policy {
 public:
  /// Intervene on the machines with the largest W-index. With `allow_idle`
  /// a machine whose current index is <= 0 is never chosen, which is the same
  /// as competing against |R| virtual machines of index zero.
  static Policy index(std::vector<IndexTable> tables, bool allow_idle = true, std::uint64_t seed = 0) {
    Policy p(PolicyKind::Index, seed);
    p.tables_ = std::move(tables);
    p.allow_idle_ = allow_idle;
    return p;
  }

  /// Index policy driven by perfect-intervention indices.
  static Policy myopic(std::vector<IndexTable> perfect_tables, bool allow_idle = true, std::uint64_t seed = 0) {
    Policy p = index(std::move(perfect_tables), allow_idle, seed);
    p.kind_ = PolicyKind::MyopicPerfect;
    return p;
  }

  /// Most-deteriorated-first, blind to costs.
  static Policy naive(std::uint64_t seed = 0) { return Policy(PolicyKind::Naive, seed); }

  /// Intervene on any machine at or above its level.
  static Policy threshold(std::vector<State> levels, std::uint64_t seed = 0) {
    Policy p(PolicyKind::Threshold, seed);
    p.levels_ = std::move(levels);
    return p;
  }

  PolicyKind kind() const noexcept { return kind_; }
  const std::vector<IndexTable>& tables() const noexcept { return tables_; }
  const std::vector<State>& levels() const noexcept { return levels_; }
  bool allow_idle() const noexcept { return allow_idle_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Restarts the tie-breaking stream; the descriptor seed is unchanged.
  void reseed(std::uint64_t stream_seed) { stream_ = Stream(stream_seed); }
  Stream& stream() noexcept { return stream_; }

 private:
  Policy(PolicyKind kind, std::uint64_t seed) : kind_(kind), seed_(seed), stream_(seed) {}

  PolicyKind kind_;
  std::vector<IndexTable> tables_;
  std::vector<State> levels_;
  bool allow_idle_ = true;
  std::uint64_t seed_ = 0;
  Stream stream_;
};

namespace detail {

struct Candidate {
  std::size_t machine;
  double key;
};

/// Eligible machines with their ranking keys, in machine order. State-0
/// machines are never eligible.
inline std::vector<Candidate> candidates(const Policy& policy, std::span<const State> states) {
  std::vector<Candidate> out;
  const bool indexed = policy.kind() == PolicyKind::Index || policy.kind() == PolicyKind::MyopicPerfect;
  if (indexed) {
    if (policy.tables().size() != states.size())
      throw ValidationError("index_tables", "index-based policy needs one index table per machine");
    for (const auto& t : policy.tables())
      if (!t.indexable || t.w.empty())
        throw ValidationError("index_tables", "index-based policy given a non-indexable machine");
  }
  if (policy.kind() == PolicyKind::Threshold && policy.levels().size() != states.size())
    throw ValidationError("threshold_levels", "threshold policy needs one level per machine");

  for (std::size_t m = 0; m < states.size(); ++m) {
    const State x = states[m];
    if (x == 0) continue;
    switch (policy.kind()) {
      case PolicyKind::Index:
      case PolicyKind::MyopicPerfect: {
        const auto& w = policy.tables()[m].w;
        if (x >= w.size()) throw ValidationError("state_range", "machine state outside its index table");
        if (policy.allow_idle() && !(w[x] > 0.0)) break;
        out.push_back({m, w[x]});
        break;
      }
      case PolicyKind::Naive:
        out.push_back({m, static_cast<double>(x)});
        break;
      case PolicyKind::Threshold:
        if (x >= policy.levels()[m]) out.push_back({m, static_cast<double>(x)});
        break;
    }
  }
  return out;
}

inline void sort_by_key(std::vector<Candidate>& c) {
  std::stable_sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) { return a.key > b.key; });
}

}  // namespace detail

/// Chooses up to `n_repairmen` machines. Ties on the ranking key are broken
/// uniformly at random through the policy's own stream, which is only drawn
/// from when more machines are eligible than repairmen are available.
inline Selection decide(Policy& policy, std::span<const State> states, std::size_t n_repairmen) {
  auto cands = detail::candidates(policy, states);
  if (cands.size() > n_repairmen) {
    auto& rng = policy.stream();
    for (std::size_t i = cands.size() - 1; i > 0; --i) std::swap(cands[i], cands[rng.below(i + 1)]);
    detail::sort_by_key(cands);
    cands.resize(n_repairmen);
  }
  Selection sel;
  sel.reserve(cands.size());
  for (const auto& c : cands) sel.push_back(c.machine);
  std::sort(sel.begin(), sel.end());
  return sel;
}

/// Exact distribution of `decide` over its random tie-breaks: every
/// selection it can return together with its probability.
inline std::vector<std::pair<Selection, double>> decision_distribution(const Policy& policy,
                                                                       std::span<const State> states,
                                                                       std::size_t n_repairmen) {
  auto cands = detail::candidates(policy, states);
  detail::sort_by_key(cands);
  Selection fixed;
  std::vector<std::size_t> tied;
  if (cands.size() <= n_repairmen) {
    for (const auto& c : cands) fixed.push_back(c.machine);
  } else {
    const double boundary = cands[n_repairmen - 1].key;
    for (const auto& c : cands) {
      if (c.key > boundary) fixed.push_back(c.machine);
      else if (c.key == boundary) tied.push_back(c.machine);
    }
  }
  const std::size_t pick = std::min(n_repairmen, cands.size()) - fixed.size();
  std::vector<std::pair<Selection, double>> out;
  if (pick == 0) {
    std::sort(fixed.begin(), fixed.end());
    out.emplace_back(std::move(fixed), 1.0);
    return out;
  }
  // Enumerate all size-`pick` subsets of the tied group.
  std::vector<bool> mask(tied.size(), false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(pick), true);
  std::vector<Selection> subsets;
  do {
    Selection s = fixed;
    for (std::size_t i = 0; i < tied.size(); ++i)
      if (mask[i]) s.push_back(tied[i]);
    std::sort(s.begin(), s.end());
    subsets.push_back(std::move(s));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  const double p = 1.0 / static_cast<double>(subsets.size());
  for (auto& s : subsets) out.emplace_back(std::move(s), p);
  return out;
}

/// `count` threshold policies with levels evenly spaced over each machine's
/// interior states: level_k = round(top * k / (count + 1)), k = 1..count.
inline std::vector<Policy> enumerate_thresholds(const FleetSpec& fleet, std::size_t count, std::uint64_t seed = 0) {
  if (count == 0) throw ValidationError("threshold_count", "threshold count must be at least 1");
  for (const auto& m : fleet.machines)
    if (m.n_states < 3 || count > m.n_states - 2)
      throw ValidationError("threshold_count", detail::concat("threshold count ", count,
                                                              " exceeds the interior states of a ", m.n_states,
                                                              "-state machine"));
  std::vector<Policy> out;
  for (std::size_t k = 1; k <= count; ++k) {
    std::vector<State> levels;
    for (const auto& m : fleet.machines) {
      const double top = static_cast<double>(m.top());
      levels.push_back(static_cast<State>(std::lround(top * static_cast<double>(k) / static_cast<double>(count + 1))));
    }
    out.push_back(Policy::threshold(std::move(levels), derive_seed(seed, {k})));
  }
  return out;
}

}  // namespace pmidx
