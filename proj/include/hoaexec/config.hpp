#pragma once

// INI-style run configuration: drivers per proposition, hooks, and run limits.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hoaexec/errors.hpp"

namespace hoaexec {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DriverSpec {
  enum class Kind : std::uint8_t { Interactive, File, Random };

  Kind kind = Kind::Interactive;
  std::string path;
  double bias = 0.5;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const DriverSpec&, const DriverSpec&) = default;
};

struct Trigger {
  enum class Kind : std::uint8_t { Nondeterminism, Deadlock, Verdict, StateIs, Condition };
  enum class VerdictFilter : std::uint8_t { Good, Bad, Ugly, Conclusive };

  Kind kind = Kind::Deadlock;
  VerdictFilter verdict = VerdictFilter::Conclusive;
  std::uint64_t state = 0;
  std::string condition;
};

struct Action {
  enum class Kind : std::uint8_t { RandomChoice, Prompt, Reset, Goto, Log, Halt };

  Kind kind = Kind::Log;
  std::uint64_t state = 0;
  std::string message;
  int code = 0;
};

struct HookSpec {
  std::string id;
  Trigger trigger;
  Action action;
  std::string scope = "*";
};

struct Config {
  std::vector<std::pair<std::string, DriverSpec>> drivers;
  std::optional<DriverSpec> default_driver;
  std::vector<HookSpec> hooks;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_steps;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace config_detail

/// Parses `interactive`, `file:<path>` or `random(bias=<float>[,seed=<int>])`.
inline DriverSpec parse_driver_spec(std::string_view text) {
  using config_detail::trim;
  text = trim(text);
  DriverSpec d;
  if (text == "interactive") return d;
  if (text.substr(0, 5) == "file:") {
    d.kind = DriverSpec::Kind::File;
    d.path = std::string(trim(text.substr(5)));
    if (d.path.empty()) throw ConfigError("file driver needs a path");
    return d;
  }
  if (text.substr(0, 7) == "random(" && text.back() == ')') {
    d.kind = DriverSpec::Kind::Random;
    auto args = text.substr(7, text.size() - 8);
    bool have_bias = false;
    while (!args.empty()) {
      const auto comma = args.find(',');
      const auto arg = trim(args.substr(0, comma));
      args = comma == std::string_view::npos ? std::string_view{} : args.substr(comma + 1);
      const auto eq = arg.find('=');
      if (eq == std::string_view::npos) throw ConfigError("malformed random driver argument");
      const auto key = trim(arg.substr(0, eq));
      const auto value = trim(arg.substr(eq + 1));
      if (key == "bias") {
        const auto b = config_detail::parse_number<double>(value);
        if (!b || *b < 0.0 || *b > 1.0) throw ConfigError("bias must be a number in [0, 1]");
        d.bias = *b;
        have_bias = true;
      } else if (key == "seed") {
        const auto s = config_detail::parse_number<std::uint64_t>(value);
        if (!s) throw ConfigError("seed must be a non-negative integer");
        d.seed = *s;
      } else {
        throw ConfigError("unknown random driver argument '" + std::string(key) + "'");
      }
    }
    if (!have_bias) throw ConfigError("random driver needs bias=<float>");
    return d;
  }
  throw ConfigError("unknown driver '" + std::string(text) + "'");
}

inline Trigger parse_trigger(std::string_view text) {
  using config_detail::trim;
  text = trim(text);
  Trigger t;
  if (text == "nondeterminism") {
    t.kind = Trigger::Kind::Nondeterminism;
  } else if (text == "deadlock") {
    t.kind = Trigger::Kind::Deadlock;
  } else if (text.substr(0, 8) == "verdict:") {
    t.kind = Trigger::Kind::Verdict;
    const auto v = trim(text.substr(8));
    if (v == "good") {
      t.verdict = Trigger::VerdictFilter::Good;
    } else if (v == "bad") {
      t.verdict = Trigger::VerdictFilter::Bad;
    } else if (v == "ugly") {
      t.verdict = Trigger::VerdictFilter::Ugly;
    } else if (v == "conclusive") {
      t.verdict = Trigger::VerdictFilter::Conclusive;
    } else {
      throw ConfigError("unknown verdict filter '" + std::string(v) + "'");
    }
  } else if (text.substr(0, 6) == "state:") {
    t.kind = Trigger::Kind::StateIs;
    const auto s = config_detail::parse_number<std::uint64_t>(trim(text.substr(6)));
    if (!s) throw ConfigError("state trigger needs a state id");
    t.state = *s;
  } else if (text.substr(0, 5) == "cond:") {
    t.kind = Trigger::Kind::Condition;
    t.condition = std::string(trim(text.substr(5)));
    if (t.condition.empty()) throw ConfigError("cond trigger needs a label expression");
  } else {
    throw ConfigError("unknown trigger '" + std::string(text) + "'");
  }
  return t;
}

inline Action parse_action(std::string_view text) {
  using config_detail::trim;
  text = trim(text);
  Action a;
  if (text == "random-choice") {
    a.kind = Action::Kind::RandomChoice;
  } else if (text == "prompt") {
    a.kind = Action::Kind::Prompt;
  } else if (text == "reset") {
    a.kind = Action::Kind::Reset;
  } else if (text.substr(0, 5) == "goto:") {
    a.kind = Action::Kind::Goto;
    const auto s = config_detail::parse_number<std::uint64_t>(trim(text.substr(5)));
    if (!s) throw ConfigError("goto action needs a state id");
    a.state = *s;
  } else if (text.substr(0, 4) == "log:") {
    a.kind = Action::Kind::Log;
    a.message = std::string(trim(text.substr(4)));
  } else if (text.substr(0, 5) == "halt:") {
    a.kind = Action::Kind::Halt;
    const auto c = config_detail::parse_number<int>(trim(text.substr(5)));
    if (!c || *c < 0 || *c > 255) throw ConfigError("halt action needs an exit code in 0..255");
    a.code = *c;
  } else {
    throw ConfigError("unknown action '" + std::string(text) + "'");
  }
  return a;
}

inline Config parse_config(std::string_view text, std::string_view source = "<config>") {
  using config_detail::trim;
  Config cfg;
  enum class Section { None, Drivers, Hook, Run } section = Section::None;
  std::size_t line_no = 0;
  struct PendingHook {
    HookSpec spec;
    bool has_trigger = false;
    bool has_action = false;
    bool has_scope = false;
  };
  std::vector<PendingHook> hooks;

  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw fail("malformed section header");
      const auto name = trim(line.substr(1, line.size() - 2));
      if (name == "drivers") {
        section = Section::Drivers;
      } else if (name == "run") {
        section = Section::Run;
      } else if (name.substr(0, 6) == "hooks." && name.size() > 6) {
        section = Section::Hook;
        const auto id = std::string(name.substr(6));
        for (const auto& h : hooks) {
          if (h.spec.id == id) throw fail("duplicate hook '" + id + "'");
        }
        hooks.push_back({});
        hooks.back().spec.id = id;
      } else {
        throw fail("unknown section [" + std::string(name) + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw fail("empty key");

    try {
      switch (section) {
        case Section::None:
          throw fail("entry outside of any section");
        case Section::Drivers: {
          auto spec = parse_driver_spec(value);
          if (key == "default") {
            if (cfg.default_driver) throw fail("duplicate default driver");
            cfg.default_driver = spec;
          } else {
            for (const auto& [name, d] : cfg.drivers) {
              if (name == key) throw fail("duplicate driver for '" + std::string(key) + "'");
            }
            cfg.drivers.emplace_back(std::string(key), std::move(spec));
          }
          break;
        }
        case Section::Run:
          if (key == "seed") {
            const auto s = config_detail::parse_number<std::uint64_t>(value);
            if (!s) throw fail("seed must be a non-negative integer");
            cfg.seed = *s;
          } else if (key == "max_steps") {
            const auto s = config_detail::parse_number<std::size_t>(value);
            if (!s) throw fail("max_steps must be a non-negative integer");
            cfg.max_steps = *s;
          } else {
            throw fail("unknown key '" + std::string(key) + "' in [run]");
          }
          break;
        case Section::Hook: {
          auto& h = hooks.back();
          if (key == "trigger") {
            if (h.has_trigger) throw fail("duplicate trigger");
            h.spec.trigger = parse_trigger(value);
            h.has_trigger = true;
          } else if (key == "action") {
            if (h.has_action) throw fail("duplicate action");
            h.spec.action = parse_action(value);
            h.has_action = true;
          } else if (key == "scope") {
            if (h.has_scope) throw fail("duplicate scope");
            if (value.empty()) throw fail("empty scope");
            h.spec.scope = std::string(value);
            h.has_scope = true;
          } else {
            throw fail("unknown key '" + std::string(key) + "' in hook");
          }
          break;
        }
      }
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      if (what.rfind(std::string(source) + ":", 0) == 0) throw;
      throw fail(what);
    }
  }

  for (auto& h : hooks) {
    if (!h.has_trigger || !h.has_action) {
      throw ConfigError(std::string(source) + ": hook '" + h.spec.id + "' needs a trigger and an action");
    }
    const auto a = h.spec.action.kind;
    if ((a == Action::Kind::RandomChoice || a == Action::Kind::Prompt) &&
        h.spec.trigger.kind != Trigger::Kind::Nondeterminism) {
      throw ConfigError(std::string(source) + ": hook '" + h.spec.id +
                        "': random-choice and prompt only resolve nondeterminism");
    }
    cfg.hooks.push_back(std::move(h.spec));
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace hoaexec
