#pragma once

// `hoaexec run | check | gen-locks`.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hoaexec/automaton.hpp"
#include "hoaexec/bench_locks.hpp"
#include "hoaexec/config.hpp"
#include "hoaexec/errors.hpp"
#include "hoaexec/hoa.hpp"
#include "hoaexec/monitoring.hpp"
#include "hoaexec/runtime.hpp"
#include "hoaexec/trace.hpp"
#include "hoaexec/trap_analysis.hpp"

namespace hoaexec {

namespace cli_detail {

struct Loaded {
  std::string source;
  HoaEntry entry;
};

inline std::string read_source(const std::string& path, std::istream& in) {
  std::ostringstream ss;
  if (path == "-") {
    ss << in.rdbuf();
    return ss.str();
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  ss << f.rdbuf();
  return ss.str();
}

// Returns nullopt after printing diagnostics if any file fails to parse.
inline std::optional<std::vector<Loaded>> load_all(const std::vector<std::string>& paths,
                                                   std::istream& in, std::ostream& err) {
  std::vector<Loaded> out;
  bool ok = true;
  for (const auto& path : paths) {
    std::string text;
    try {
      text = read_source(path, in);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      ok = false;
      continue;
    }
    auto result = parse_hoa(text);
    const auto shown = path == "-" ? std::string("<stdin>") : path;
    for (const auto& d : result.diagnostics) err << shown << ':' << d.to_string() << '\n';
    if (!result.ok()) {
      ok = false;
      continue;
    }
    for (auto& e : result.document->automata) out.push_back({shown, std::move(e)});
  }
  if (!ok) return std::nullopt;
  return out;
}

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

struct RunOptions {
  std::vector<std::string> hoa;
  std::optional<std::string> config;
  std::optional<std::string> trace;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  bool monitor = false;
  bool complete = false;
  bool verbose = false;
  bool strict = false;
};

inline int run_command(const RunOptions& o, const RuntimeIo& io) {
  auto& err = *io.err;
  auto loaded = load_all(o.hoa, *io.in, err);
  if (!loaded) return exit_codes::kUsage;

  Config cfg;
  std::filesystem::path base_dir;
  try {
    if (o.config) {
      cfg = load_config(*o.config);
      base_dir = std::filesystem::path(*o.config).parent_path();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_codes::kUsage;
  }
  if (o.trace) {
    DriverSpec d;
    d.kind = DriverSpec::Kind::File;
    d.path = std::filesystem::absolute(*o.trace).string();
    cfg.drivers.clear();
    cfg.default_driver = d;
  }
  if (!cfg.default_driver && cfg.drivers.empty()) cfg.default_driver = DriverSpec{};
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.max_steps = *o.steps;

  std::vector<AutomatonInput> inputs;
  for (std::size_t i = 0; i < loaded->size(); ++i) {
    auto& l = (*loaded)[i];
    Automaton a = std::move(l.entry.automaton);
    const std::string label = a.name ? *a.name : std::to_string(i);
    if (o.complete) {
      try {
        if (!is_complete(a)) a = complete_by_stuttering(a);
      } catch (const Error& e) {
        err << "error: " << label << ": " << e.what() << '\n';
        return exit_codes::kUsage;
      }
    }
    auto shared = std::make_shared<const Automaton>(std::move(a));
    std::shared_ptr<const MonitorAnalysis> analysis;
    if (o.monitor) {
      try {
        analysis = analyse_for_monitoring(shared);
      } catch (const MonitorAttachError& e) {
        err << "error: cannot monitor " << label << ": " << e.what() << '\n';
        return exit_codes::kAttachRefused;
      } catch (const Error& e) {
        err << "error: cannot monitor " << label << ": " << e.what() << '\n';
        return exit_codes::kUsage;
      }
    }
    inputs.push_back({label, std::move(shared), std::move(analysis)});
  }

  try {
    Session session(std::move(inputs), cfg, io, SessionOptions{o.verbose, true}, base_dir);
    const auto report = session.run();
    return exit_code_of(report, o.strict);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_codes::kUsage;
  }
}

inline int check_command(const std::vector<std::string>& paths, const RuntimeIo& io) {
  auto& out = *io.out;
  auto loaded = load_all(paths, *io.in, *io.err);
  if (!loaded) return exit_codes::kUsage;
  for (std::size_t i = 0; i < loaded->size(); ++i) {
    const auto& [source, entry] = (*loaded)[i];
    const auto& a = entry.automaton;
    out << source << " #" << i;
    if (a.name) out << ' ' << hoa_detail::quote(*a.name);
    out << '\n';
    out << "  states: " << a.state_count() << '\n';
    out << "  edges: " << a.edge_count() << '\n';
    try {
      out << "  deterministic: " << yes_no(is_deterministic(a)) << '\n';
      out << "  complete: " << yes_no(is_complete(a)) << '\n';
      out << "  bsccs: " << bsccs(TrapIndex(StateGraph::of(a))).size() << '\n';
    } catch (const CapacityError& e) {
      out << "  analysis skipped: " << e.what() << '\n';
    }
    out << "  acceptance: " << a.acc_sets.size() << ' ' << to_string(a.condition) << '\n';
  }
  return exit_codes::kOk;
}

struct GenLocksOptions {
  std::size_t n = 2;
  std::size_t length = 0;
  std::size_t violations = 0;
  std::string fault = "double-acquire";
  std::uint64_t seed = 0;
  std::string out_trace;
  std::string out_monitors;
  std::optional<std::string> out_config;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << content;
  if (!f) throw Error("write to '" + path + "' failed");
}

inline int gen_locks_command(const GenLocksOptions& o, const RuntimeIo& io) {
  try {
    LockScenario s;
    s.n = o.n;
    s.length = o.length;
    s.violations = o.violations;
    s.fault = o.fault == "unreleased-at-end" ? FaultKind::UnreleasedAtEnd : FaultKind::DoubleAcquire;
    s.seed = o.seed;
    const auto names = lock_ap_names(s.n);
    const auto trace = generate_trace(s);
    write_file(o.out_trace, trace);
    write_file(o.out_monitors, serialize_hoa(emit_monitors(s.n)));
    if (o.out_config) {
      namespace fs = std::filesystem;
      const auto dir = fs::absolute(*o.out_config).parent_path();
      const auto rel = fs::absolute(o.out_trace).lexically_relative(dir);
      write_file(*o.out_config, lock_run_config(rel.generic_string()));
    }
    auto& out = *io.out;
    out << "AP layout:";
    for (const auto& n : names) out << ' ' << n;
    out << '\n';
  } catch (const Error& e) {
    *io.err << "error: " << e.what() << '\n';
    return exit_codes::kUsage;
  }
  return exit_codes::kOk;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, RuntimeIo io) {
  CLI::App app{"Execute and monitor omega-automata in HOA format", "hoaexec"};
  app.require_subcommand(1);

  cli_detail::RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Execute automata on a stream of valuations");
  run_cmd->add_option("--config", run.config, "Run configuration file")->check(CLI::ExistingFile);
  run_cmd->add_option("--trace", run.trace, "Read every proposition from this trace file")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--steps", run.steps, "Stop after this many steps");
  run_cmd->add_option("--seed", run.seed, "Global seed");
  run_cmd->add_flag("--monitor", run.monitor, "Attach a verdict monitor to every automaton");
  run_cmd->add_flag("--complete", run.complete, "Complete automata with stuttering self-loops");
  run_cmd->add_flag("--verbose", run.verbose, "Print one STEP line per step");
  run_cmd->add_flag("--strict", run.strict, "Exit 12 if a monitor ends without a verdict");
  run_cmd->add_option("hoa", run.hoa, "HOA files, or - for standard input")->required();

  std::vector<std::string> check_paths;
  auto* check_cmd = app.add_subcommand("check", "Summarise automata");
  check_cmd->add_option("hoa", check_paths, "HOA files, or - for standard input")->required();

  cli_detail::GenLocksOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-locks", "Generate a lock trace and its monitors");
  gen_cmd->add_option("--n", gen.n, "Threads and locks (power of two)")->required();
  gen_cmd->add_option("--len", gen.length, "Trace length")->required();
  gen_cmd->add_option("--violations", gen.violations, "Injected faults");
  gen_cmd->add_option("--fault", gen.fault, "Fault kind")
      ->check(CLI::IsMember({"double-acquire", "unreleased-at-end"}));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out-trace", gen.out_trace, "Trace output path")->required();
  gen_cmd->add_option("--out-monitors", gen.out_monitors, "HOA output path")->required();
  gen_cmd->add_option("--out-config", gen.out_config, "Run configuration with reset hooks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, *io.out, *io.err);
    return rc == 0 ? exit_codes::kOk : exit_codes::kUsage;
  }

  if (run_cmd->parsed()) return cli_detail::run_command(run, io);
  if (check_cmd->parsed()) return cli_detail::check_command(check_paths, io);
  return cli_detail::gen_locks_command(gen, io);
}

}  // namespace hoaexec
