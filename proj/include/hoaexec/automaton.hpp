#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hoaexec/errors.hpp"
#include "hoaexec/label_expr.hpp"

namespace hoaexec {

using StateId = std::uint32_t;
/// Sorted, duplicate-free list of states.
using StateSet = std::vector<StateId>;

inline StateSet make_state_set(std::vector<StateId> states) {
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  return states;
}

/// Positive Boolean combination of Fin/Inf constraints over acceptance-set indices.
class AcceptanceCond {
 public:
  enum class Kind : std::uint8_t { Top, Bot, Fin, Inf, And, Or };

  AcceptanceCond() = default;

  static AcceptanceCond top() { return AcceptanceCond(Kind::Top); }
  static AcceptanceCond bot() { return AcceptanceCond(Kind::Bot); }
  static AcceptanceCond fin(std::size_t set) { return leaf(Kind::Fin, set); }
  static AcceptanceCond inf(std::size_t set) { return leaf(Kind::Inf, set); }
  static AcceptanceCond conj(std::vector<AcceptanceCond> operands) {
    return nary(Kind::And, std::move(operands), Kind::Top);
  }
  static AcceptanceCond disj(std::vector<AcceptanceCond> operands) {
    return nary(Kind::Or, std::move(operands), Kind::Bot);
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t set_index() const noexcept { return set_; }
  std::span<const AcceptanceCond> children() const noexcept { return children_; }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& c : children_) d = std::max(d, c.depth());
    return d + 1;
  }

  template <typename F>
  void for_each_leaf(F&& f) const {
    if (kind_ == Kind::Fin || kind_ == Kind::Inf) f(*this);
    for (const auto& c : children_) c.for_each_leaf(f);
  }

  friend bool operator==(const AcceptanceCond&, const AcceptanceCond&) = default;

 private:
  explicit AcceptanceCond(Kind k) : kind_(k) {}
  static AcceptanceCond leaf(Kind k, std::size_t set) {
    AcceptanceCond c(k);
    c.set_ = set;
    return c;
  }
  static AcceptanceCond nary(Kind k, std::vector<AcceptanceCond> operands, Kind empty) {
    if (operands.empty()) return AcceptanceCond(empty);
    if (operands.size() == 1) return std::move(operands.front());
    AcceptanceCond c(k);
    c.children_ = std::move(operands);
    return c;
  }

  Kind kind_ = Kind::Top;
  std::size_t set_ = 0;
  std::vector<AcceptanceCond> children_;
};

struct Edge {
  LabelExpr label;
  StateId target = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Transition {
  StateId source = 0;
  const LabelExpr* label = nullptr;
  StateId target = 0;
};

/// A state-based ω-automaton with labels over atomic propositions.
///
/// States are dense ids 0..n-1 in declaration order; `hoa_ids` keeps the
/// identifiers used in the source text. Outgoing edges are stored per state in
/// source order and parallel edges are kept.
struct Automaton {
  std::optional<std::string> name;
  std::vector<AtomicProposition> aps;
  std::vector<std::uint64_t> hoa_ids;
  std::vector<std::optional<std::string>> state_names;
  StateSet initial;
  std::vector<std::vector<Edge>> edges;
  std::vector<StateSet> acc_sets;
  AcceptanceCond condition;

  std::size_t state_count() const noexcept { return edges.size(); }

  std::size_t edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& out : edges) n += out.size();
    return n;
  }

  /// Adds a state and returns its dense id; the HOA id defaults to the dense id.
  StateId add_state(std::optional<std::uint64_t> hoa_id = std::nullopt) {
    const auto id = static_cast<StateId>(edges.size());
    edges.emplace_back();
    hoa_ids.push_back(hoa_id.value_or(id));
    state_names.emplace_back();
    return id;
  }

  void add_edge(StateId source, LabelExpr label, StateId target) {
    edges.at(source).push_back(Edge{std::move(label), target});
  }

  std::vector<Transition> transitions() const {
    std::vector<Transition> out;
    for (StateId q = 0; q < edges.size(); ++q) {
      for (const auto& e : edges[q]) out.push_back(Transition{q, &e.label, e.target});
    }
    return out;
  }

  std::optional<StateId> state_by_hoa_id(std::uint64_t hoa_id) const {
    const auto it = std::find(hoa_ids.begin(), hoa_ids.end(), hoa_id);
    if (it == hoa_ids.end()) return std::nullopt;
    return static_cast<StateId>(it - hoa_ids.begin());
  }

  bool in_acc_set(std::size_t set, StateId q) const {
    const auto& s = acc_sets.at(set);
    return std::binary_search(s.begin(), s.end(), q);
  }

  /// Throws StructuralError if ids, AP indices or set references are out of range.
  void validate() const {
    const auto n = state_count();
    if (hoa_ids.size() != n || state_names.size() != n) {
      throw StructuralError("state metadata does not match the state count");
    }
    if (initial.empty()) throw StructuralError("automaton has no initial state");
    for (auto q : initial) {
      if (q >= n) throw StructuralError("initial state out of range");
    }
    for (std::size_t i = 0; i < aps.size(); ++i) {
      if (aps[i].index != i) throw StructuralError("AP indices must be contiguous");
    }
    for (const auto& out : edges) {
      for (const auto& e : out) {
        if (e.target >= n) throw StructuralError("edge target out of range");
        if (e.label.min_width() > aps.size()) {
          throw StructuralError("edge label references an undeclared proposition");
        }
      }
    }
    for (const auto& s : acc_sets) {
      for (auto q : s) {
        if (q >= n) throw StructuralError("acceptance set member out of range");
      }
    }
    condition.for_each_leaf([&](const AcceptanceCond& leaf) {
      if (leaf.set_index() >= acc_sets.size()) {
        throw StructuralError("acceptance condition references undeclared set " +
                              std::to_string(leaf.set_index()));
      }
    });
  }

  friend bool operator==(const Automaton&, const Automaton&) = default;
};

/// Targets of every edge leaving `q` whose label holds under `v`.
inline StateSet successors(const Automaton& a, StateId q, const Valuation& v) {
  std::vector<StateId> out;
  for (const auto& e : a.edges.at(q)) {
    if (e.label.evaluate(v)) out.push_back(e.target);
  }
  return make_state_set(std::move(out));
}

inline std::vector<LabelExpr> outgoing_labels(const Automaton& a, StateId q) {
  std::vector<LabelExpr> labels;
  for (const auto& e : a.edges.at(q)) labels.push_back(e.label);
  return labels;
}

inline bool is_deterministic(const Automaton& a, std::size_t cap = kDefaultEnumerationCap) {
  if (a.initial.size() != 1) return false;
  for (const auto& out : a.edges) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (!are_disjoint(out[i].label, out[j].label, a.aps.size(), cap)) return false;
      }
    }
  }
  return true;
}

inline bool is_complete(const Automaton& a, std::size_t cap = kDefaultEnumerationCap) {
  for (StateId q = 0; q < a.state_count(); ++q) {
    if (a.edges[q].empty()) return false;
    if (!covers_all(outgoing_labels(a, q), a.aps.size(), cap)) return false;
  }
  return true;
}

/// Returns a copy where every state whose outgoing labels leave some valuation
/// uncovered gains a self-loop labelled with the complement of their disjunction.
inline Automaton complete_by_stuttering(const Automaton& a,
                                        std::size_t cap = kDefaultEnumerationCap) {
  Automaton out = a;
  for (StateId q = 0; q < out.state_count(); ++q) {
    auto labels = outgoing_labels(out, q);
    if (labels.empty()) {
      out.add_edge(q, LabelExpr::top(), q);
    } else if (!covers_all(labels, out.aps.size(), cap)) {
      out.add_edge(q, LabelExpr::negate(LabelExpr::disj(std::move(labels))), q);
    }
  }
  return out;
}

/// Evaluates `cond` for a run whose set of infinitely-often visited states is `inf_set`.
inline bool run_accepts(const StateSet& inf_set, const AcceptanceCond& cond,
                        std::span<const StateSet> acc_sets) {
  using K = AcceptanceCond::Kind;
  auto intersects = [&](std::size_t k) {
    const auto& s = acc_sets[k];
    auto i = inf_set.begin();
    auto j = s.begin();
    while (i != inf_set.end() && j != s.end()) {
      if (*i == *j) return true;
      if (*i < *j) {
        ++i;
      } else {
        ++j;
      }
    }
    return false;
  };
  switch (cond.kind()) {
    case K::Top:
      return true;
    case K::Bot:
      return false;
    case K::Fin:
      return !intersects(cond.set_index());
    case K::Inf:
      return intersects(cond.set_index());
    case K::And:
      for (const auto& c : cond.children()) {
        if (!run_accepts(inf_set, c, acc_sets)) return false;
      }
      return true;
    case K::Or:
      for (const auto& c : cond.children()) {
        if (run_accepts(inf_set, c, acc_sets)) return true;
      }
      return false;
  }
  return false;
}

/// Label-free adjacency view of an automaton's transition relation.
struct StateGraph {
  std::vector<StateSet> successors;
  StateSet initial;

  std::size_t size() const noexcept { return successors.size(); }

  std::size_t edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : successors) n += s.size();
    return n;
  }

  static StateGraph from_edges(std::size_t n, std::span<const std::pair<StateId, StateId>> es,
                               StateSet initial = {}) {
    StateGraph g;
    g.successors.resize(n);
    for (auto [from, to] : es) g.successors.at(from).push_back(to);
    for (auto& s : g.successors) s = make_state_set(std::move(s));
    g.initial = std::move(initial);
    return g;
  }

  /// Edges whose label no valuation satisfies can never be taken and are left out.
  static StateGraph of(const Automaton& a, std::size_t cap = kDefaultEnumerationCap) {
    StateGraph g;
    g.successors.resize(a.state_count());
    for (StateId q = 0; q < a.state_count(); ++q) {
      std::vector<StateId> succ;
      for (const auto& e : a.edges[q]) {
        if (is_satisfiable(e.label, a.aps.size(), cap)) succ.push_back(e.target);
      }
      g.successors[q] = make_state_set(std::move(succ));
    }
    g.initial = a.initial;
    return g;
  }
};

}  // namespace hoaexec
