#pragma once

// Execution loop: drivers produce valuations, runners advance their automata,
// hooks react to nondeterminism, deadlock, verdicts and user conditions.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hoaexec/automaton.hpp"
#include "hoaexec/config.hpp"
#include "hoaexec/errors.hpp"
#include "hoaexec/hoa.hpp"
#include "hoaexec/label_expr.hpp"
#include "hoaexec/monitoring.hpp"
#include "hoaexec/trace.hpp"

namespace hoaexec {

/// Aborts the loop with a documented exit code.
class RuntimeFault : public Error {
 public:
  RuntimeFault(int code, const std::string& what) : Error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

namespace exit_codes {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kAttachRefused = 2;
inline constexpr int kNondeterminism = 3;
inline constexpr int kDeadlock = 4;
inline constexpr int kBadVerdict = 10;
inline constexpr int kUglyVerdict = 11;
inline constexpr int kStrictUnknown = 12;
}  // namespace exit_codes

struct RuntimeIo {
  std::istream* in = &std::cin;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
  /// Whether `in` is attached to a user; the prompt action requires it.
  bool interactive = false;
};

namespace runtime_detail {

inline std::mt19937_64 seeded_stream(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Uniform double in [0, 1) with 53 random bits, identical on every platform.
inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline constexpr std::uint64_t kDriverStream = 0x64726976;
inline constexpr std::uint64_t kHookStream = 0x686f6f6b;

}  // namespace runtime_detail

/// Input sources for every proposition of the shared AP universe.
class InputBindings {
 public:
  InputBindings(const std::vector<std::string>& universe, const Config& cfg, RuntimeIo io,
                const std::filesystem::path& base_dir = {})
      : universe_(universe), io_(io) {
    for (const auto& [name, spec] : cfg.drivers) {
      if (std::find(universe.begin(), universe.end(), name) == universe.end()) {
        throw ConfigError("driver bound to unknown proposition '" + name + "'");
      }
    }
    std::size_t order = 0;
    auto bind = [&](const std::string& ap, const DriverSpec& spec) {
      Binding b;
      b.kind = spec.kind;
      switch (spec.kind) {
        case DriverSpec::Kind::Interactive:
          break;
        case DriverSpec::Kind::File: {
          auto path = std::filesystem::path(spec.path);
          if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
          auto& reader = readers_[path.string()];
          if (!reader) reader = TraceReader::open(path.string());
          const auto col = reader->column_of(ap);
          if (!col) {
            throw ConfigError("trace '" + path.string() + "' has no column for '" + ap + "'");
          }
          b.reader = reader;
          b.column = *col;
          break;
        }
        case DriverSpec::Kind::Random:
          b.bias = spec.bias;
          b.rng = runtime_detail::seeded_stream({cfg.seed, spec.seed.value_or(0),
                                                 spec.seed ? 1U : 0U, order,
                                                 runtime_detail::kDriverStream});
          break;
      }
      ++order;
      bindings_[ap] = std::move(b);
    };
    for (const auto& [name, spec] : cfg.drivers) bind(name, spec);
    for (const auto& ap : universe) {
      if (bindings_.count(ap) != 0) continue;
      if (!cfg.default_driver) throw ConfigError("no driver for proposition '" + ap + "'");
      bind(ap, *cfg.default_driver);
    }
  }

  /// Valuation over the universe for the next step, or nullopt once a trace is exhausted.
  std::optional<Valuation> collect(std::size_t step) {
    for (auto& [path, reader] : readers_) {
      if (!reader->advance()) return std::nullopt;
    }
    Valuation v(universe_.size());
    for (std::size_t i = 0; i < universe_.size(); ++i) {
      auto& b = bindings_.at(universe_[i]);
      switch (b.kind) {
        case DriverSpec::Kind::File:
          v.set(i, b.reader->value(b.column));
          break;
        case DriverSpec::Kind::Random:
          v.set(i, runtime_detail::unit(b.rng) < b.bias);
          break;
        case DriverSpec::Kind::Interactive:
          v.set(i, ask(universe_[i], step));
          break;
      }
    }
    return v;
  }

 private:
  struct Binding {
    DriverSpec::Kind kind = DriverSpec::Kind::Interactive;
    std::shared_ptr<TraceReader> reader;
    std::size_t column = 0;
    double bias = 0.5;
    std::mt19937_64 rng;
  };

  bool ask(const std::string& ap, std::size_t step) {
    for (;;) {
      *io_.err << "step " << step << ": " << ap << " = " << std::flush;
      std::string tok;
      if (!(*io_.in >> tok)) throw RuntimeFault(exit_codes::kUsage, "interactive input closed");
      if (tok == "1" || tok == "t" || tok == "true") return true;
      if (tok == "0" || tok == "f" || tok == "false") return false;
      *io_.err << "expected 0/1/t/f/true/false\n";
    }
  }

  std::vector<std::string> universe_;
  RuntimeIo io_;
  std::map<std::string, Binding> bindings_;
  std::map<std::string, std::shared_ptr<TraceReader>> readers_;
};

struct StepOutcome {
  enum class Kind : std::uint8_t { Advanced, Deadlock, Nondeterministic };
  Kind kind = Kind::Advanced;
  StateId state = 0;
  StateSet candidates;
  /// Set when the monitor latched a conclusive verdict on this step.
  std::optional<Verdict> verdict;
};

struct BoundHook {
  HookSpec spec;
  std::optional<LabelExpr> condition;  // over the universe, for cond: triggers
  std::optional<StateId> watched;      // dense id, for state: triggers
  std::optional<StateId> target;       // dense id, for goto actions
};

/// Tracks one automaton's current state.
class Runner {
 public:
  Runner(std::string label, std::shared_ptr<const Automaton> automaton,
         const std::vector<std::string>& universe)
      : label_(std::move(label)), automaton_(std::move(automaton)) {
    for (const auto& ap : automaton_->aps) {
      const auto it = std::find(universe.begin(), universe.end(), ap.name);
      projection_.push_back(static_cast<std::size_t>(it - universe.begin()));
    }
    local_ = Valuation(automaton_->aps.size());
    state_ = automaton_->initial.front();
  }

  const std::string& label() const noexcept { return label_; }
  const Automaton& automaton() const noexcept { return *automaton_; }
  StateId state() const noexcept { return state_; }
  std::uint64_t hoa_state() const { return automaton_->hoa_ids[state_]; }
  std::size_t step_count() const noexcept { return steps_; }
  Monitor* monitor() noexcept { return monitor_ ? &*monitor_ : nullptr; }
  const Monitor* monitor() const noexcept { return monitor_ ? &*monitor_ : nullptr; }
  std::vector<BoundHook>& hooks() noexcept { return hooks_; }

  void attach_monitor(std::shared_ptr<const MonitorAnalysis> analysis, bool use_cache = true) {
    monitor_.emplace(std::move(analysis), use_cache);
  }

  /// Consumes one valuation of the universe. State changes only on Advanced.
  StepOutcome step(const Valuation& global) {
    for (std::size_t i = 0; i < projection_.size(); ++i) local_.set(i, global.test(projection_[i]));
    ++steps_;
    StepOutcome out;
    out.candidates = successors(*automaton_, state_, local_);
    if (out.candidates.empty()) {
      out.kind = StepOutcome::Kind::Deadlock;
    } else if (out.candidates.size() > 1) {
      out.kind = StepOutcome::Kind::Nondeterministic;
    } else {
      out.verdict = move_to(out.candidates.front());
      out.state = state_;
    }
    return out;
  }

  /// Takes a transition to `q` chosen outside of `step` and feeds the monitor.
  std::optional<Verdict> move_to(StateId q) {
    state_ = q;
    if (monitor_ && monitor_->step(q)) return monitor_->current();
    return std::nullopt;
  }

  void reset() {
    state_ = automaton_->initial.front();
    if (monitor_) monitor_->reset_latch();
  }

  void force(StateId q) { state_ = q; }

 private:
  std::string label_;
  std::shared_ptr<const Automaton> automaton_;
  std::vector<std::size_t> projection_;
  Valuation local_;
  StateId state_ = 0;
  std::size_t steps_ = 0;
  std::optional<Monitor> monitor_;
  std::vector<BoundHook> hooks_;
};

struct VerdictEvent {
  std::size_t step = 0;
  std::size_t runner = 0;
  Verdict verdict = Verdict::Unknown;

  friend bool operator==(const VerdictEvent&, const VerdictEvent&) = default;
};

struct RunnerReport {
  std::string label;
  std::uint64_t state = 0;
  std::size_t steps = 0;
  std::optional<Verdict> latched;  // empty when not monitored

  friend bool operator==(const RunnerReport&, const RunnerReport&) = default;
};

struct ExitReport {
  enum class Reason : std::uint8_t { EndOfInput, MaxSteps, Halt, Fault };

  Reason reason = Reason::EndOfInput;
  int code = 0;  // halt or fault code
  std::string message;
  std::size_t iterations = 0;
  std::vector<RunnerReport> runners;
  std::vector<VerdictEvent> verdicts;

  friend bool operator==(const ExitReport&, const ExitReport&) = default;
};

/// Maps a finished run to the process exit code.
inline int exit_code_of(const ExitReport& r, bool strict = false) {
  if (r.reason == ExitReport::Reason::Halt || r.reason == ExitReport::Reason::Fault) return r.code;
  const auto any = [&](Verdict v) {
    return std::any_of(r.verdicts.begin(), r.verdicts.end(),
                       [&](const VerdictEvent& e) { return e.verdict == v; });
  };
  if (any(Verdict::Bad)) return exit_codes::kBadVerdict;
  if (any(Verdict::Ugly)) return exit_codes::kUglyVerdict;
  if (strict) {
    for (const auto& rr : r.runners) {
      if (rr.latched && !is_conclusive(*rr.latched)) return exit_codes::kStrictUnknown;
    }
  }
  return exit_codes::kOk;
}

struct AutomatonInput {
  std::string label;
  std::shared_ptr<const Automaton> automaton;
  /// Attach a monitor when set.
  std::shared_ptr<const MonitorAnalysis> analysis;
};

struct SessionOptions {
  bool verbose = false;
  bool use_verdict_cache = true;
};

/// Names of all propositions, deduplicated by name in order of first appearance.
inline std::vector<std::string> ap_universe(const std::vector<AutomatonInput>& inputs) {
  std::vector<std::string> names;
  for (const auto& in : inputs) {
    for (const auto& ap : in.automaton->aps) {
      if (std::find(names.begin(), names.end(), ap.name) == names.end()) names.push_back(ap.name);
    }
  }
  return names;
}

class Session {
 public:
  Session(std::vector<AutomatonInput> inputs, const Config& cfg, RuntimeIo io,
          SessionOptions options = {}, const std::filesystem::path& base_dir = {})
      : universe_(ap_universe(inputs)),
        bindings_(universe_, cfg, io, base_dir),
        io_(io),
        options_(options),
        max_steps_(cfg.max_steps) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto& in = inputs[i];
      runners_.emplace_back(in.label, in.automaton, universe_);
      if (in.analysis) runners_.back().attach_monitor(in.analysis, options_.use_verdict_cache);
      hook_rngs_.push_back(
          runtime_detail::seeded_stream({cfg.seed, i, runtime_detail::kHookStream}));
    }
    for (const auto& spec : cfg.hooks) {
      bool matched = false;
      for (std::size_t i = 0; i < runners_.size(); ++i) {
        if (!in_scope(spec.scope, i)) continue;
        matched = true;
        runners_[i].hooks().push_back(bind_hook(spec, runners_[i]));
      }
      if (!matched) {
        throw ConfigError("hook '" + spec.id + "': scope '" + spec.scope + "' matches no automaton");
      }
    }
  }

  std::vector<Runner>& runners() noexcept { return runners_; }
  const std::vector<std::string>& universe() const noexcept { return universe_; }

  ExitReport run() {
    ExitReport report;
    try {
      loop(report);
    } catch (const RuntimeFault& f) {
      report.reason = ExitReport::Reason::Fault;
      report.code = f.code();
      report.message = f.what();
    } catch (const TraceError& e) {
      report.reason = ExitReport::Reason::Fault;
      report.code = exit_codes::kUsage;
      report.message = e.what();
    }
    for (const auto& r : runners_) {
      RunnerReport rr{r.label(), r.hoa_state(), r.step_count(), std::nullopt};
      if (r.monitor()) rr.latched = r.monitor()->current();
      report.runners.push_back(std::move(rr));
    }
    if (report.reason == ExitReport::Reason::Fault) {
      *io_.err << "error: " << report.message << '\n';
    }
    return report;
  }

 private:
  struct Halt {
    int code;
  };

  bool in_scope(const std::string& scope, std::size_t i) const {
    return scope == "*" || scope == runners_[i].label() || scope == std::to_string(i);
  }

  BoundHook bind_hook(const HookSpec& spec, const Runner& r) const {
    BoundHook b{spec, std::nullopt, std::nullopt, std::nullopt};
    auto dense = [&](std::uint64_t id) {
      const auto q = r.automaton().state_by_hoa_id(id);
      if (!q) {
        throw ConfigError("hook '" + spec.id + "': state " + std::to_string(id) +
                          " does not exist in " + r.label());
      }
      return *q;
    };
    if (spec.trigger.kind == Trigger::Kind::StateIs) b.watched = dense(spec.trigger.state);
    if (spec.action.kind == Action::Kind::Goto) b.target = dense(spec.action.state);
    if (spec.trigger.kind == Trigger::Kind::Condition) {
      try {
        b.condition = parse_named_label(spec.trigger.condition,
                                        [&](const std::string& name) -> std::optional<std::size_t> {
                                          const auto it = std::find(universe_.begin(), universe_.end(), name);
                                          if (it == universe_.end()) return std::nullopt;
                                          return static_cast<std::size_t>(it - universe_.begin());
                                        });
      } catch (const Error& e) {
        throw ConfigError("hook '" + spec.id + "': " + e.what());
      }
    }
    return b;
  }

  enum class Event : std::uint8_t { Nondeterminism, Deadlock, Verdict, User };

  bool matches(const BoundHook& h, Event ev, const Runner& r, const Valuation& v,
               Verdict verdict) const {
    const auto& t = h.spec.trigger;
    switch (ev) {
      case Event::Nondeterminism:
        return t.kind == Trigger::Kind::Nondeterminism;
      case Event::Deadlock:
        return t.kind == Trigger::Kind::Deadlock;
      case Event::Verdict:
        if (t.kind != Trigger::Kind::Verdict) return false;
        switch (t.verdict) {
          case Trigger::VerdictFilter::Good:
            return verdict == Verdict::Good;
          case Trigger::VerdictFilter::Bad:
            return verdict == Verdict::Bad;
          case Trigger::VerdictFilter::Ugly:
            return verdict == Verdict::Ugly;
          case Trigger::VerdictFilter::Conclusive:
            return is_conclusive(verdict);
        }
        return false;
      case Event::User:
        if (t.kind == Trigger::Kind::StateIs) return r.state() == *h.watched;
        if (t.kind == Trigger::Kind::Condition) return h.condition->evaluate(v);
        return false;
    }
    return false;
  }

  std::string expand(const std::string& tmpl, const Runner& r, Verdict verdict) const {
    std::string out;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      if (tmpl[i] == '{') {
        const auto close = tmpl.find('}', i);
        if (close != std::string::npos) {
          const auto key = tmpl.substr(i + 1, close - i - 1);
          std::optional<std::string> value;
          if (key == "automaton") value = r.label();
          if (key == "state") value = std::to_string(r.hoa_state());
          if (key == "step") value = std::to_string(r.step_count());
          if (key == "verdict") value = std::string(to_string(verdict));
          if (value) {
            out += *value;
            i = close;
            continue;
          }
        }
      }
      out.push_back(tmpl[i]);
    }
    return out;
  }

  // Applies the first matching hook. Returns false if none matched.
  bool fire(std::size_t idx, Event ev, const Valuation& v, const StateSet& candidates,
            Verdict verdict, ExitReport& report) {
    Runner& r = runners_[idx];
    for (const auto& h : r.hooks()) {
      if (!matches(h, ev, r, v, verdict)) continue;
      const auto& a = h.spec.action;
      switch (a.kind) {
        case Action::Kind::RandomChoice: {
          const auto pick = static_cast<std::size_t>(runtime_detail::unit(hook_rngs_[idx]) *
                                                     static_cast<double>(candidates.size()));
          record(idx, r.move_to(candidates[pick]), v, report);
          break;
        }
        case Action::Kind::Prompt:
          record(idx, r.move_to(prompt(r, candidates)), v, report);
          break;
        case Action::Kind::Reset:
          r.reset();
          break;
        case Action::Kind::Goto:
          r.force(*h.target);
          break;
        case Action::Kind::Log:
          *io_.out << expand(a.message, r, verdict) << '\n';
          break;
        case Action::Kind::Halt:
          throw Halt{a.code};
      }
      return true;
    }
    return false;
  }

  StateId prompt(const Runner& r, const StateSet& candidates) {
    if (!io_.interactive) {
      throw RuntimeFault(exit_codes::kUsage, "prompt action needs an interactive terminal");
    }
    for (;;) {
      *io_.err << r.label() << " is nondeterministic at step " << r.step_count() << ":";
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        *io_.err << "  [" << i << "] " << r.automaton().hoa_ids[candidates[i]];
      }
      *io_.err << "\nchoice: " << std::flush;
      std::size_t choice = 0;
      if (!(*io_.in >> choice)) {
        if (io_.in->eof()) throw RuntimeFault(exit_codes::kUsage, "interactive input closed");
        io_.in->clear();
        std::string junk;
        *io_.in >> junk;
        continue;
      }
      if (choice < candidates.size()) return candidates[choice];
    }
  }

  void record(std::size_t idx, std::optional<Verdict> verdict, const Valuation& v,
              ExitReport& report) {
    if (!verdict) return;
    Runner& r = runners_[idx];
    report.verdicts.push_back({r.step_count(), idx, *verdict});
    *io_.out << "VERDICT " << r.label() << ' ' << to_string(*verdict) << " @" << r.step_count()
             << '\n';
    fire(idx, Event::Verdict, v, {}, *verdict, report);
  }

  void loop(ExitReport& report) {
    for (;;) {
      if (max_steps_ && report.iterations >= *max_steps_) {
        report.reason = ExitReport::Reason::MaxSteps;
        return;
      }
      const auto v = bindings_.collect(report.iterations + 1);
      if (!v) {
        report.reason = ExitReport::Reason::EndOfInput;
        return;
      }
      ++report.iterations;
      try {
        for (std::size_t i = 0; i < runners_.size(); ++i) step_runner(i, *v, report);
      } catch (const Halt& h) {
        report.reason = ExitReport::Reason::Halt;
        report.code = h.code;
        print_step(report.iterations, *v);
        return;
      }
      print_step(report.iterations, *v);
    }
  }

  void step_runner(std::size_t idx, const Valuation& v, ExitReport& report) {
    Runner& r = runners_[idx];
    auto outcome = r.step(v);
    switch (outcome.kind) {
      case StepOutcome::Kind::Advanced:
        record(idx, outcome.verdict, v, report);
        break;
      case StepOutcome::Kind::Deadlock:
        if (!fire(idx, Event::Deadlock, v, {}, Verdict::Unknown, report)) {
          throw RuntimeFault(exit_codes::kDeadlock,
                             "deadlock in " + r.label() + " at state " +
                                 std::to_string(r.hoa_state()) + ", step " +
                                 std::to_string(r.step_count()));
        }
        break;
      case StepOutcome::Kind::Nondeterministic:
        if (!fire(idx, Event::Nondeterminism, v, outcome.candidates, Verdict::Unknown, report)) {
          throw RuntimeFault(exit_codes::kNondeterminism,
                             "nondeterminism in " + r.label() + " at state " +
                                 std::to_string(r.hoa_state()) + ", step " +
                                 std::to_string(r.step_count()));
        }
        break;
    }
    const Verdict current = r.monitor() ? r.monitor()->current() : Verdict::Unknown;
    fire(idx, Event::User, v, {}, current, report);
  }

  void print_step(std::size_t n, const Valuation& v) {
    if (!options_.verbose) return;
    auto& out = *io_.out;
    out << "STEP " << n << ' ' << v.to_string() << " |";
    for (const auto& r : runners_) out << ' ' << r.label() << ':' << r.hoa_state();
    out << '\n';
  }

  std::vector<std::string> universe_;
  InputBindings bindings_;
  RuntimeIo io_;
  SessionOptions options_;
  std::optional<std::size_t> max_steps_;
  std::vector<Runner> runners_;
  std::vector<std::mt19937_64> hook_rngs_;
};

}  // namespace hoaexec
