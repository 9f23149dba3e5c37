#pragma once

// Lock-acquisition scenario: N threads, N locks, a random lock-respecting
// schedule with injected faults, and per-(thread, lock) monitor automata.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hoaexec/automaton.hpp"
#include "hoaexec/errors.hpp"
#include "hoaexec/hoa.hpp"
#include "hoaexec/label_expr.hpp"

namespace hoaexec {

enum class FaultKind : std::uint8_t { DoubleAcquire, UnreleasedAtEnd };

struct LockScenario {
  std::size_t n = 2;
  std::size_t length = 0;
  std::size_t violations = 0;
  FaultKind fault = FaultKind::DoubleAcquire;
  std::uint64_t seed = 0;
};

/// One trace record. `acquire` is false for a release.
struct LockEvent {
  bool end = false;
  bool acquire = false;
  std::size_t thread = 0;
  std::size_t lock = 0;

  friend bool operator==(const LockEvent&, const LockEvent&) = default;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t index_bits(std::size_t n) {
  std::size_t b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

/// `end a i0.. l0..`; bit 0 is the least significant.
inline std::vector<std::string> lock_ap_names(std::size_t n) {
  if (n < 2 || !is_power_of_two(n)) throw Error("thread count must be a power of two >= 2");
  std::vector<std::string> names{"end", "a"};
  const auto b = index_bits(n);
  for (std::size_t k = 0; k < b; ++k) names.push_back("i" + std::to_string(k));
  for (std::size_t k = 0; k < b; ++k) names.push_back("l" + std::to_string(k));
  return names;
}

namespace locks_detail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

struct Interval {
  std::size_t acquire;  // record index
  std::size_t release;
  std::size_t thread;
  std::size_t lock;
};

// Random lock-respecting schedule of `length` records that leaves no lock held.
inline std::vector<LockEvent> base_schedule(std::size_t n, std::size_t length, std::mt19937_64& rng) {
  std::vector<LockEvent> out;
  out.reserve(length);
  std::vector<std::optional<std::size_t>> owner(n);
  std::size_t held = 0;
  for (std::size_t k = 0; k + 1 < length; ++k) {
    const std::size_t remaining = length - k;
    const bool can_acquire = held + 1 <= remaining - 1 && held < n;
    const bool can_release = held > 0;
    const bool acquire = can_acquire && (!can_release || (rng() & 1U) != 0);
    if (acquire) {
      std::vector<std::size_t> free;
      for (std::size_t l = 0; l < n; ++l) {
        if (!owner[l]) free.push_back(l);
      }
      const auto l = free[pick(rng, free.size())];
      const auto t = pick(rng, n);
      owner[l] = t;
      ++held;
      out.push_back({false, true, t, l});
    } else {
      std::vector<std::size_t> busy;
      for (std::size_t l = 0; l < n; ++l) {
        if (owner[l]) busy.push_back(l);
      }
      const auto l = busy[pick(rng, busy.size())];
      out.push_back({false, false, *owner[l], l});
      owner[l].reset();
      --held;
    }
  }
  if (held == 1) {
    const auto l = static_cast<std::size_t>(
        std::find_if(owner.begin(), owner.end(), [](const auto& o) { return o.has_value(); }) -
        owner.begin());
    out.push_back({true, false, *owner[l], l});
  } else {
    // acquisitions at the end are ignored by the properties
    out.push_back({true, true, 0, 0});
  }
  return out;
}

inline std::vector<Interval> intervals_of(const std::vector<LockEvent>& s, std::size_t n) {
  std::vector<Interval> out;
  std::vector<std::optional<std::size_t>> open(n);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto& e = s[k];
    if (e.acquire && !e.end) {
      open[e.lock] = k;
    } else if (!e.acquire && open[e.lock]) {
      out.push_back({*open[e.lock], k, e.thread, e.lock});
      open[e.lock].reset();
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Interval& x, const Interval& y) { return x.acquire < y.acquire; });
  return out;
}

// k distinct indices of [0, n), ascending.
inline std::vector<std::size_t> sample(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + pick(rng, n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace locks_detail

/// The event schedule of a scenario, including its injected faults.
inline std::vector<LockEvent> generate_schedule(const LockScenario& s) {
  using namespace locks_detail;
  lock_ap_names(s.n);
  if (s.length == 0) throw Error("trace length must be positive");
  if (s.violations > s.length / 4) throw Error("violations must not exceed length / 4");
  std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                    static_cast<std::uint32_t>(s.n)};
  std::mt19937_64 rng(seq);
  const std::size_t k = s.violations;

  if (s.fault == FaultKind::DoubleAcquire) {
    auto base = base_schedule(s.n, s.length - 2 * k, rng);
    const auto iv = intervals_of(base, s.n);
    if (iv.size() < k) {
      throw Error("infeasible: only " + std::to_string(iv.size()) +
                  " holding intervals for " + std::to_string(k) + " double acquisitions");
    }
    const auto chosen = sample(rng, iv.size(), k);
    std::vector<std::optional<std::size_t>> intruder(base.size());
    for (auto c : chosen) {
      auto j = pick(rng, s.n - 1);
      if (j >= iv[c].thread) ++j;
      intruder[iv[c].acquire] = j;
    }
    std::vector<LockEvent> out;
    out.reserve(s.length);
    for (std::size_t i = 0; i < base.size(); ++i) {
      out.push_back(base[i]);
      if (intruder[i]) {
        out.push_back({false, true, *intruder[i], base[i].lock});
        out.push_back({false, false, *intruder[i], base[i].lock});
      }
    }
    return out;
  }

  auto base = base_schedule(s.n, s.length + k, rng);
  const auto iv = intervals_of(base, s.n);
  std::vector<std::optional<std::size_t>> last(s.n);
  for (std::size_t c = 0; c < iv.size(); ++c) last[iv[c].lock] = c;
  std::vector<std::size_t> eligible;
  for (std::size_t l = 0; l < s.n; ++l) {
    if (last[l] && !base[iv[*last[l]].release].end) eligible.push_back(*last[l]);
  }
  if (eligible.size() < k) {
    throw Error("infeasible: at most " + std::to_string(eligible.size()) +
                " locks can be left held at the end, " + std::to_string(k) + " requested");
  }
  std::vector<bool> drop(base.size(), false);
  for (auto c : sample(rng, eligible.size(), k)) drop[iv[eligible[c]].release] = true;
  std::vector<LockEvent> out;
  out.reserve(s.length);
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!drop[i]) out.push_back(base[i]);
  }
  return out;
}

inline std::string format_trace(const std::vector<LockEvent>& events, std::size_t n) {
  const auto names = lock_ap_names(n);
  const auto b = index_bits(n);
  std::string out;
  out.reserve(events.size() * names.size() * 2 + 64);
  for (std::size_t i = 0; i < names.size(); ++i) {
    out += i ? " " : "";
    out += names[i];
  }
  out += '\n';
  for (const auto& e : events) {
    out += e.end ? '1' : '0';
    out += e.acquire ? " 1" : " 0";
    for (std::size_t k = 0; k < b; ++k) out += ((e.thread >> k) & 1U) != 0 ? " 1" : " 0";
    for (std::size_t k = 0; k < b; ++k) out += ((e.lock >> k) & 1U) != 0 ? " 1" : " 0";
    out += '\n';
  }
  return out;
}

inline std::string generate_trace(const LockScenario& s) {
  return format_trace(generate_schedule(s), s.n);
}

namespace locks_detail {

inline LabelExpr equals(std::size_t first_ap, std::size_t bits, std::size_t value) {
  std::vector<LabelExpr> lits;
  for (std::size_t k = 0; k < bits; ++k) {
    auto lit = LabelExpr::ap(first_ap + k);
    lits.push_back(((value >> k) & 1U) != 0 ? lit : LabelExpr::negate(lit));
  }
  return LabelExpr::conj(std::move(lits));
}

inline HoaEntry lock_monitor(std::size_t n, const std::string& name) {
  HoaEntry e;
  auto& a = e.automaton;
  a.name = name;
  const auto names = lock_ap_names(n);
  for (std::size_t i = 0; i < names.size(); ++i) a.aps.push_back({i, names[i]});
  for (const char* s : {"idle", "held", "violation"}) a.state_names[a.add_state()] = s;
  a.initial = {0};
  a.acc_sets = {{2}};
  a.condition = AcceptanceCond::fin(0);
  e.header.tool = {"hoaexec", "gen-locks"};
  e.header.acc_name = "co-Buchi";
  e.header.properties = {"deterministic", "complete", "state-acc"};
  return e;
}

}  // namespace locks_detail

/// Property monitors for every (thread, lock) pair: no_double_acq_<i>_<l> and
/// release_by_end_<i>_<l>. Each accepts the runs satisfying its property, so a
/// Bad verdict marks a violation.
inline HoaDocument emit_monitors(std::size_t n) {
  using locks_detail::equals;
  const auto b = index_bits(n);
  lock_ap_names(n);
  const auto end = LabelExpr::ap(0);
  const auto a = LabelExpr::ap(1);
  const auto not_ = [](const LabelExpr& x) { return LabelExpr::negate(x); };
  HoaDocument doc;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < n; ++l) {
      const auto by_i = equals(2, b, i);
      const auto on_l = equals(2 + b, b, l);
      const auto acq = LabelExpr::conj({not_(end), a, by_i, on_l});
      const auto rel = LabelExpr::conj({not_(a), by_i, on_l});
      const auto tag = std::to_string(i) + "_" + std::to_string(l);

      auto nd = locks_detail::lock_monitor(n, "no_double_acq_" + tag);
      const auto other = LabelExpr::conj({not_(end), a, not_(by_i), on_l});
      nd.automaton.add_edge(0, acq, 1);
      nd.automaton.add_edge(0, not_(acq), 0);
      nd.automaton.add_edge(1, rel, 0);
      nd.automaton.add_edge(1, other, 2);
      nd.automaton.add_edge(1, not_(LabelExpr::disj({rel, other})), 1);
      nd.automaton.add_edge(2, LabelExpr::top(), 2);
      doc.automata.push_back(std::move(nd));

      auto re = locks_detail::lock_monitor(n, "release_by_end_" + tag);
      re.automaton.add_edge(0, acq, 1);
      re.automaton.add_edge(0, not_(acq), 0);
      re.automaton.add_edge(1, rel, 0);
      re.automaton.add_edge(1, LabelExpr::conj({end, not_(rel)}), 2);
      re.automaton.add_edge(1, LabelExpr::conj({not_(end), not_(rel)}), 1);
      re.automaton.add_edge(2, LabelExpr::top(), 2);
      doc.automata.push_back(std::move(re));
    }
  }
  return doc;
}

/// Run configuration reading every proposition from `trace_path` and resetting
/// each monitor after a conclusive verdict, so every violation is counted.
inline std::string lock_run_config(const std::string& trace_path) {
  std::ostringstream os;
  os << "[drivers]\n"
     << "default = file:" << trace_path << "\n\n"
     << "[hooks.count_violations]\n"
     << "trigger = verdict:conclusive\n"
     << "action = reset\n";
  return os.str();
}

}  // namespace hoaexec
