#pragma once

// Trap-set based runtime monitoring of Fin/Inf acceptance conditions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hoaexec/automaton.hpp"
#include "hoaexec/errors.hpp"
#include "hoaexec/trap_analysis.hpp"

namespace hoaexec {

enum class Verdict : std::uint8_t { Good, Bad, Ugly, Unknown };

inline constexpr bool is_conclusive(Verdict v) noexcept { return v != Verdict::Unknown; }

inline constexpr std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Good:
      return "good";
    case Verdict::Bad:
      return "bad";
    case Verdict::Ugly:
      return "ugly";
    case Verdict::Unknown:
      return "unknown";
  }
  return "unknown";
}

/// Exchanges Good and Bad; Ugly and Unknown are fixed points.
inline constexpr Verdict swap(Verdict v) noexcept {
  if (v == Verdict::Good) return Verdict::Bad;
  if (v == Verdict::Bad) return Verdict::Good;
  return v;
}

inline constexpr Verdict combine_and(Verdict a, Verdict b) noexcept {
  if (a == Verdict::Bad || b == Verdict::Bad) return Verdict::Bad;
  if (a == Verdict::Good) return b;
  if (b == Verdict::Good) return a;
  if (a == Verdict::Ugly && b == Verdict::Ugly) return Verdict::Ugly;
  return Verdict::Unknown;
}

inline constexpr Verdict combine_or(Verdict a, Verdict b) noexcept {
  if (a == Verdict::Good || b == Verdict::Good) return Verdict::Good;
  if (a == Verdict::Bad) return b;
  if (b == Verdict::Bad) return a;
  if (a == Verdict::Ugly && b == Verdict::Ugly) return Verdict::Ugly;
  return Verdict::Unknown;
}

/// One-step verdict for Inf(S) at state `q`, from the smallest trap set containing `q`.
inline Verdict verdict_inf(const TrapIndex& idx, const StateGraph& g, StateId q,
                           const StateSet& s) {
  if (s.empty()) throw StructuralError("Inf/Fin monitor needs a non-empty state set");
  const TrapSet trap = idx.min_trap_set_of(q);
  const auto& t = trap.states;
  if (std::includes(s.begin(), s.end(), t.begin(), t.end())) return Verdict::Good;

  StateSet rest;
  std::set_difference(t.begin(), t.end(), s.begin(), s.end(), std::back_inserter(rest));
  if (rest.size() == t.size()) return Verdict::Bad;

  if (trap.minimal) return is_transient(g, rest) ? Verdict::Good : Verdict::Ugly;
  return Verdict::Unknown;
}

inline Verdict verdict_fin(const TrapIndex& idx, const StateGraph& g, StateId q,
                           const StateSet& s) {
  return swap(verdict_inf(idx, g, q, s));
}

namespace detail {

struct Clause {
  std::vector<std::size_t> fin;
  std::vector<std::size_t> inf;
};

inline constexpr std::size_t kMaxClauses = 4096;

// Disjunctive normal form of an acceptance condition; nullopt if it grows past kMaxClauses.
inline std::optional<std::vector<Clause>> to_dnf(const AcceptanceCond& c, bool negated) {
  using K = AcceptanceCond::Kind;
  auto kind = c.kind();
  if (negated) {
    switch (kind) {
      case K::Top: kind = K::Bot; break;
      case K::Bot: kind = K::Top; break;
      case K::Fin: kind = K::Inf; break;
      case K::Inf: kind = K::Fin; break;
      case K::And: kind = K::Or; break;
      case K::Or: kind = K::And; break;
    }
  }
  switch (kind) {
    case K::Top:
      return std::vector<Clause>{Clause{}};
    case K::Bot:
      return std::vector<Clause>{};
    case K::Fin:
      return std::vector<Clause>{Clause{{c.set_index()}, {}}};
    case K::Inf:
      return std::vector<Clause>{Clause{{}, {c.set_index()}}};
    case K::Or: {
      std::vector<Clause> out;
      for (const auto& child : c.children()) {
        auto sub = to_dnf(child, negated);
        if (!sub || out.size() + sub->size() > kMaxClauses) return std::nullopt;
        out.insert(out.end(), sub->begin(), sub->end());
      }
      return out;
    }
    case K::And: {
      std::vector<Clause> out{Clause{}};
      for (const auto& child : c.children()) {
        auto sub = to_dnf(child, negated);
        if (!sub || out.size() * sub->size() > kMaxClauses) return std::nullopt;
        std::vector<Clause> next;
        for (const auto& a : out) {
          for (const auto& b : *sub) {
            Clause m = a;
            m.fin.insert(m.fin.end(), b.fin.begin(), b.fin.end());
            m.inf.insert(m.inf.end(), b.inf.begin(), b.inf.end());
            next.push_back(std::move(m));
          }
        }
        out = std::move(next);
      }
      return out;
    }
  }
  return std::nullopt;
}

// Whether some cycle inside `region` has an infinity set satisfying `clause`:
// drop the Fin states, then look for a non-trivial SCC meeting every Inf set.
inline bool clause_satisfiable(const Clause& clause, const StateSet& region, const StateGraph& g,
                               std::span<const StateSet> acc_sets) {
  std::vector<bool> allowed(g.size(), false);
  for (auto q : region) allowed[q] = true;
  for (auto k : clause.fin) {
    for (auto q : acc_sets[k]) allowed[q] = false;
  }
  std::vector<StateId> local;
  std::vector<StateId> to_local(g.size(), UINT32_MAX);
  for (auto q : region) {
    if (allowed[q]) {
      to_local[q] = static_cast<StateId>(local.size());
      local.push_back(q);
    }
  }
  std::vector<StateSet> succ(local.size());
  std::vector<bool> self_loop(local.size(), false);
  for (std::size_t i = 0; i < local.size(); ++i) {
    for (auto r : g.successors[local[i]]) {
      if (to_local[r] == UINT32_MAX) continue;
      succ[i].push_back(to_local[r]);
      if (r == local[i]) self_loop[i] = true;
    }
  }
  std::size_t count = 0;
  const auto comp = tarjan_scc(succ, count);
  std::vector<std::vector<StateId>> members(count);
  for (std::size_t i = 0; i < local.size(); ++i) members[comp[i]].push_back(local[i]);
  for (std::size_t c = 0; c < count; ++c) {
    const auto& m = members[c];
    const bool cyclic = m.size() > 1 || self_loop[to_local[m.front()]];
    if (!cyclic) continue;
    const bool meets_all = std::all_of(clause.inf.begin(), clause.inf.end(), [&](std::size_t k) {
      return std::any_of(m.begin(), m.end(), [&](StateId q) {
        return std::binary_search(acc_sets[k].begin(), acc_sets[k].end(), q);
      });
    });
    if (meets_all) return true;
  }
  return false;
}

inline std::optional<bool> satisfiable_in(const AcceptanceCond& c, bool negated,
                                          const StateSet& region, const StateGraph& g,
                                          std::span<const StateSet> acc_sets) {
  const auto dnf = to_dnf(c, negated);
  if (!dnf) return std::nullopt;
  return std::any_of(dnf->begin(), dnf->end(), [&](const Clause& cl) {
    return clause_satisfiable(cl, region, g, acc_sets);
  });
}

}  // namespace detail

/// Exact verdict for `cond` once the run is inside the bottom component `bscc`.
///
/// Every run that reaches a bottom SCC stays in it and can realise any cyclic
/// subset of it as its infinity set, so the verdict is decided by two emptiness
/// checks. Returns Unknown if the condition is too large to normalise.
inline Verdict decide_in_bottom_component(const AcceptanceCond& cond, const StateSet& bscc,
                                          const StateGraph& g,
                                          std::span<const StateSet> acc_sets) {
  const auto accepting = detail::satisfiable_in(cond, false, bscc, g, acc_sets);
  const auto rejecting = detail::satisfiable_in(cond, true, bscc, g, acc_sets);
  if (!accepting || !rejecting) return Verdict::Unknown;
  if (!*rejecting) return Verdict::Good;
  if (!*accepting) return Verdict::Bad;
  return Verdict::Ugly;
}

class MonitorAttachError : public Error {
 public:
  using Error::Error;
};

/// State graph and trap index of one automaton, shareable between monitors.
struct MonitorAnalysis {
  std::shared_ptr<const Automaton> automaton;
  StateGraph graph;
  TrapIndex index;

  explicit MonitorAnalysis(std::shared_ptr<const Automaton> a)
      : automaton(std::move(a)), graph(StateGraph::of(*automaton)), index(graph) {}
};

/// Refuses automata that are not deterministic and complete.
inline std::shared_ptr<const MonitorAnalysis> analyse_for_monitoring(
    std::shared_ptr<const Automaton> a) {
  if (!is_deterministic(*a)) {
    throw MonitorAttachError("automaton is not deterministic");
  }
  if (!is_complete(*a)) {
    throw MonitorAttachError("automaton is not complete");
  }
  a->condition.for_each_leaf([&](const AcceptanceCond& leaf) {
    if (a->acc_sets.at(leaf.set_index()).empty()) {
      throw MonitorAttachError("condition references empty acceptance set " +
                               std::to_string(leaf.set_index()));
    }
  });
  return std::make_shared<const MonitorAnalysis>(std::move(a));
}

/// Per-run monitor: evaluates the acceptance condition after each transition,
/// memoises per-state verdicts and latches the first conclusive one.
class Monitor {
 public:
  explicit Monitor(std::shared_ptr<const MonitorAnalysis> analysis, bool use_cache = true)
      : analysis_(std::move(analysis)),
        cache_(analysis_->automaton->state_count()),
        use_cache_(use_cache) {}

  const Automaton& automaton() const noexcept { return *analysis_->automaton; }
  Verdict current() const noexcept { return current_; }

  /// Verdict for the run prefix ending in `q`, ignoring the latch.
  Verdict evaluate(StateId q) {
    if (use_cache_) {
      auto& slot = cache_.at(q);
      if (!slot) slot = evaluate_node(automaton().condition, q);
      return *slot;
    }
    return evaluate_node(automaton().condition, q);
  }

  /// Feeds the state reached by a transition. Returns true iff this call latched
  /// a conclusive verdict.
  bool step(StateId q) {
    if (observer_) observer_(q);
    if (is_conclusive(current_)) return false;
    current_ = evaluate(q);
    return is_conclusive(current_);
  }

  /// Clears the latch; memoised verdicts stay valid.
  void reset_latch() noexcept { current_ = Verdict::Unknown; }

  void set_observer(std::function<void(StateId)> f) { observer_ = std::move(f); }

 private:
  Verdict evaluate_node(const AcceptanceCond& c, StateId q) const {
    using K = AcceptanceCond::Kind;
    const auto& a = automaton();
    switch (c.kind()) {
      case K::Top:
        return Verdict::Good;
      case K::Bot:
        return Verdict::Bad;
      case K::Inf:
        return verdict_inf(analysis_->index, analysis_->graph, q, a.acc_sets.at(c.set_index()));
      case K::Fin:
        return verdict_fin(analysis_->index, analysis_->graph, q, a.acc_sets.at(c.set_index()));
      case K::And:
      case K::Or: {
        const bool conj = c.kind() == K::And;
        auto children = c.children();
        Verdict acc = evaluate_node(children.front(), q);
        bool ugly_pair = false;
        for (std::size_t i = 1; i < children.size(); ++i) {
          const Verdict v = evaluate_node(children[i], q);
          ugly_pair = ugly_pair || (acc == Verdict::Ugly && v == Verdict::Ugly);
          acc = conj ? combine_and(acc, v) : combine_or(acc, v);
        }
        // Two ugly operands can still be jointly unsatisfiable (or jointly valid),
        // so that cell is re-decided exactly; ugly operands imply a bottom component.
        if (acc == Verdict::Ugly && ugly_pair) {
          const auto trap = analysis_->index.min_trap_set_of(q);
          if (!trap.minimal) return Verdict::Unknown;
          return decide_in_bottom_component(c, trap.states, analysis_->graph, a.acc_sets);
        }
        return acc;
      }
    }
    return Verdict::Unknown;
  }

  std::shared_ptr<const MonitorAnalysis> analysis_;
  std::vector<std::optional<Verdict>> cache_;
  bool use_cache_ = true;
  Verdict current_ = Verdict::Unknown;
  std::function<void(StateId)> observer_;
};

}  // namespace hoaexec
