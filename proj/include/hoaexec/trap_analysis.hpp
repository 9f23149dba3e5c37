#pragma once

// Strongly connected components, the condensation DAG, and minimal trap sets.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "hoaexec/automaton.hpp"
#include "hoaexec/errors.hpp"

namespace hoaexec {

using ComponentId = std::uint32_t;

namespace detail {

// Iterative Tarjan. Returns the component id of every vertex; ids are assigned
// in completion order, so every edge u->v satisfies comp[u] >= comp[v].
inline std::vector<ComponentId> tarjan_scc(const std::vector<StateSet>& succ,
                                           std::size_t& component_count) {
  constexpr std::uint32_t kUnvisited = UINT32_MAX;
  const std::size_t n = succ.size();
  std::vector<std::uint32_t> order(n, kUnvisited);
  std::vector<std::uint32_t> low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<ComponentId> comp(n, 0);
  std::vector<StateId> scc_stack;
  // (vertex, index of the next successor to explore)
  std::vector<std::pair<StateId, std::size_t>> call_stack;
  std::uint32_t next_order = 0;
  component_count = 0;

  for (StateId root = 0; root < n; ++root) {
    if (order[root] != kUnvisited) continue;
    call_stack.emplace_back(root, 0);
    order[root] = low[root] = next_order++;
    scc_stack.push_back(root);
    on_stack[root] = true;

    while (!call_stack.empty()) {
      auto& [v, next] = call_stack.back();
      if (next < succ[v].size()) {
        const StateId w = succ[v][next++];
        if (order[w] == kUnvisited) {
          order[w] = low[w] = next_order++;
          scc_stack.push_back(w);
          on_stack[w] = true;
          call_stack.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], order[w]);
        }
        continue;
      }
      const StateId done = v;
      call_stack.pop_back();
      if (!call_stack.empty()) {
        const StateId parent = call_stack.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
      if (low[done] == order[done]) {
        StateId w = 0;
        do {
          w = scc_stack.back();
          scc_stack.pop_back();
          on_stack[w] = false;
          comp[w] = static_cast<ComponentId>(component_count);
        } while (w != done);
        ++component_count;
      }
    }
  }
  return comp;
}

}  // namespace detail

struct TrapSet {
  StateSet states;
  std::vector<ComponentId> components;
  bool minimal = false;
  bool trivial = false;
};

/// SCC decomposition and condensation of a state graph.
///
/// Components are numbered by their smallest member state, so numbering is
/// independent of traversal details. Queries for the closure of a component are
/// memoised lazily; the memo is guarded by a mutex, so concurrent queries on a
/// shared index are safe.
class TrapIndex {
 public:
  explicit TrapIndex(const StateGraph& g) : initial_(g.initial) {
    if (g.size() == 0) throw StructuralError("cannot index an empty state graph");
    std::size_t count = 0;
    const auto raw = detail::tarjan_scc(g.successors, count);

    // Renumber components by smallest member.
    std::vector<ComponentId> renumber(count, UINT32_MAX);
    ComponentId next = 0;
    for (StateId q = 0; q < g.size(); ++q) {
      if (renumber[raw[q]] == UINT32_MAX) renumber[raw[q]] = next++;
    }
    state_to_comp_.resize(g.size());
    components_.resize(count);
    for (StateId q = 0; q < g.size(); ++q) {
      state_to_comp_[q] = renumber[raw[q]];
      components_[state_to_comp_[q]].push_back(q);
    }
    condensation_.resize(count);
    for (StateId q = 0; q < g.size(); ++q) {
      for (StateId r : g.successors[q]) {
        const auto from = state_to_comp_[q];
        const auto to = state_to_comp_[r];
        if (from != to) condensation_[from].push_back(to);
      }
    }
    for (auto& out : condensation_) {
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    memo_ = std::make_unique<Memo>();
    memo_->reachable.resize(count);
  }

  TrapIndex(TrapIndex&&) noexcept = default;
  TrapIndex& operator=(TrapIndex&&) noexcept = default;

  std::size_t component_count() const noexcept { return components_.size(); }
  const std::vector<StateSet>& components() const noexcept { return components_; }
  const std::vector<std::vector<ComponentId>>& condensation() const noexcept {
    return condensation_;
  }
  ComponentId component_of(StateId q) const {
    if (q >= state_to_comp_.size()) {
      throw StructuralError("unknown state id " + std::to_string(q));
    }
    return state_to_comp_[q];
  }
  bool is_bottom(ComponentId k) const { return condensation_.at(k).empty(); }

  /// Components reachable from `k` in the condensation, `k` included, sorted.
  std::shared_ptr<const std::vector<ComponentId>> reachable_from(ComponentId k) const {
    std::lock_guard lock(memo_->mutex);
    auto& slot = memo_->reachable.at(k);
    if (!slot) {
      std::vector<bool> seen(components_.size(), false);
      std::vector<ComponentId> out;
      std::vector<ComponentId> stack{k};
      seen[k] = true;
      while (!stack.empty()) {
        const auto c = stack.back();
        stack.pop_back();
        out.push_back(c);
        // Reverse push so the smallest successor is explored first.
        for (auto it = condensation_[c].rbegin(); it != condensation_[c].rend(); ++it) {
          if (!seen[*it]) {
            seen[*it] = true;
            stack.push_back(*it);
          }
        }
      }
      std::sort(out.begin(), out.end());
      slot = std::make_shared<const std::vector<ComponentId>>(std::move(out));
    }
    return slot;
  }

  /// Smallest trap set containing `q`: the union of all components reachable from its own.
  TrapSet min_trap_set_of(StateId q) const {
    const auto comps = reachable_from(component_of(q));
    TrapSet t;
    t.components = *comps;
    for (auto c : t.components) {
      t.states.insert(t.states.end(), components_[c].begin(), components_[c].end());
    }
    std::sort(t.states.begin(), t.states.end());
    t.minimal = t.components.size() == 1;
    t.trivial = std::any_of(initial_.begin(), initial_.end(), [&](StateId s) {
      return std::binary_search(t.states.begin(), t.states.end(), s);
    });
    return t;
  }

  std::vector<StateSet> bsccs() const {
    std::vector<StateSet> out;
    for (ComponentId k = 0; k < components_.size(); ++k) {
      if (is_bottom(k)) out.push_back(components_[k]);
    }
    return out;
  }

 private:
  struct Memo {
    std::mutex mutex;
    std::vector<std::shared_ptr<const std::vector<ComponentId>>> reachable;
  };

  StateSet initial_;
  std::vector<StateSet> components_;
  std::vector<std::vector<ComponentId>> condensation_;
  std::vector<ComponentId> state_to_comp_;
  std::unique_ptr<Memo> memo_;
};

inline TrapIndex build_index(const StateGraph& g) { return TrapIndex(g); }

inline TrapSet min_trap_set_of(const TrapIndex& idx, StateId q) { return idx.min_trap_set_of(q); }

inline std::vector<StateSet> bsccs(const TrapIndex& idx) { return idx.bsccs(); }

/// True iff the subgraph induced by `states` is acyclic (a self-loop is a cycle).
inline bool is_transient(const StateGraph& g, const StateSet& states) {
  std::vector<bool> member(g.size(), false);
  for (auto q : states) member.at(q) = true;
  std::vector<std::size_t> indegree(g.size(), 0);
  for (auto q : states) {
    for (auto r : g.successors[q]) {
      if (member[r]) ++indegree[r];
    }
  }
  std::vector<StateId> ready;
  for (auto q : states) {
    if (indegree[q] == 0) ready.push_back(q);
  }
  std::size_t removed = 0;
  while (!ready.empty()) {
    const auto q = ready.back();
    ready.pop_back();
    ++removed;
    for (auto r : g.successors[q]) {
      if (member[r] && --indegree[r] == 0) ready.push_back(r);
    }
  }
  return removed == states.size();
}

}  // namespace hoaexec
