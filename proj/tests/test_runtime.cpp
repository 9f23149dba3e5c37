#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "hoaexec/hoa.hpp"
#include "hoaexec/runtime.hpp"
#include "support/oracles.hpp"

using namespace hoaexec;

namespace {

std::shared_ptr<const Automaton> load(const std::string& name, std::size_t index = 0) {
  auto doc = parse_hoa_or_throw(oracle::read_file(std::string(HOAEXEC_FIXTURES) + "/" + name));
  return std::make_shared<const Automaton>(std::move(doc.automata.at(index).automaton));
}

std::shared_ptr<const Automaton> from_text(const std::string& text) {
  auto doc = parse_hoa_or_throw(text);
  return std::make_shared<const Automaton>(std::move(doc.automata.at(0).automaton));
}

struct Harness {
  std::istringstream in;
  std::ostringstream out;
  std::ostringstream err;

  explicit Harness(std::string input = {}) : in(std::move(input)) {}

  RuntimeIo io(bool interactive = false) { return RuntimeIo{&in, &out, &err, interactive}; }
};

AutomatonInput plain(std::string label, std::shared_ptr<const Automaton> a) {
  return {std::move(label), std::move(a), nullptr};
}

AutomatonInput monitored(std::string label, std::shared_ptr<const Automaton> a) {
  auto analysis = analyse_for_monitoring(a);
  return {std::move(label), std::move(a), std::move(analysis)};
}

Config config(const std::string& text) { return parse_config(text); }

std::string write_trace(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("hoaexec_test_" + name);
  std::ofstream(path) << content;
  return path.string();
}

}  // namespace

TEST_CASE("config grammar") {
  const auto cfg = config(
      "# comment\n[drivers]\na = file:t.txt\nb = random(bias=0.25,seed=9)\ndefault = interactive\n\n"
      "[hooks.first]\ntrigger = verdict:bad\naction = reset\nscope = mon\n"
      "[hooks.second]\ntrigger = cond: a & !b\naction = log:{automaton} at {state}\n"
      "[run]\nseed = 42\nmax_steps = 10\n");
  REQUIRE(cfg.drivers.size() == 2);
  CHECK(cfg.drivers[0].second.kind == DriverSpec::Kind::File);
  CHECK(cfg.drivers[0].second.path == "t.txt");
  CHECK(cfg.drivers[1].second.bias == 0.25);
  CHECK(cfg.drivers[1].second.seed == 9U);
  CHECK(cfg.default_driver->kind == DriverSpec::Kind::Interactive);
  REQUIRE(cfg.hooks.size() == 2);
  CHECK(cfg.hooks[0].scope == "mon");
  CHECK(cfg.hooks[1].trigger.condition == "a & !b");
  CHECK(cfg.hooks[1].action.message == "{automaton} at {state}");
  CHECK(cfg.seed == 42);
  CHECK(cfg.max_steps == 10U);
}

TEST_CASE("config errors name the line") {
  const auto fails_with = [](const std::string& text, const std::string& needle) {
    try {
      parse_config(text, "cfg");
    } catch (const ConfigError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
      return;
    }
    FAIL("no error for: " << text);
  };
  fails_with("[run]\nspeed = 3\n", "cfg:2: unknown key 'speed'");
  fails_with("[drivers]\na = random(bias=2)\n", "cfg:2: bias");
  fails_with("[nope]\n", "cfg:1: unknown section");
  fails_with("[hooks.x]\ntrigger = deadlock\naction = random-choice\n", "only resolve nondeterminism");
  fails_with("[hooks.x]\ntrigger = deadlock\n", "needs a trigger and an action");
  fails_with("a = 1\n", "outside of any section");
  fails_with("[drivers]\na = interactive\na = interactive\n", "duplicate driver");
}

TEST_CASE("file drivers share one reader") {
  const auto path = write_trace("shared.txt", "# header follows\na b\n1 0\n0 1\n");
  Config cfg = config("[drivers]\na = file:" + path + "\nb = file:" + path + "\n");
  InputBindings bindings({"a", "b"}, cfg, RuntimeIo{});
  auto v = bindings.collect(1);
  REQUIRE(v);
  CHECK(v->to_string() == "10");
  v = bindings.collect(2);
  REQUIRE(v);
  CHECK(v->to_string() == "01");
  CHECK_FALSE(bindings.collect(3));
}

TEST_CASE("random drivers are reproducible and honour the bias") {
  Config cfg = config("[drivers]\ndefault = random(bias=1.0)\n");
  InputBindings ones({"x", "y"}, cfg, RuntimeIo{});
  for (std::size_t i = 1; i <= 20; ++i) CHECK(ones.collect(i)->to_string() == "11");

  Config half = config("[drivers]\ndefault = random(bias=0.5)\n[run]\nseed = 5\n");
  InputBindings r1({"x", "y"}, half, RuntimeIo{});
  InputBindings r2({"x", "y"}, half, RuntimeIo{});
  std::size_t trues = 0;
  for (std::size_t i = 1; i <= 2000; ++i) {
    const auto a = r1.collect(i);
    REQUIRE(a == r2.collect(i));
    trues += a->test(0) ? 1 : 0;
  }
  CHECK(trues > 850);
  CHECK(trues < 1150);
}

TEST_CASE("interactive driver parses answers") {
  Harness h("1 false t 0\n");
  Config cfg;
  cfg.default_driver = DriverSpec{};
  InputBindings b({"p", "q"}, cfg, h.io());
  CHECK(b.collect(1)->to_string() == "10");
  CHECK(b.collect(2)->to_string() == "10");
  CHECK_THROWS_AS(b.collect(3), RuntimeFault);
}

TEST_CASE("driver binding errors") {
  Config unmapped;
  CHECK_THROWS_AS(InputBindings({"p"}, unmapped, RuntimeIo{}), ConfigError);
  Config stray = config("[drivers]\nzz = interactive\ndefault = interactive\n");
  CHECK_THROWS_AS(InputBindings({"p"}, stray, RuntimeIo{}), ConfigError);
  const auto path = write_trace("columns.txt", "a\n1\n");
  Config missing = config("[drivers]\nb = file:" + path + "\n");
  CHECK_THROWS_AS(InputBindings({"b"}, missing, RuntimeIo{}), ConfigError);
}

TEST_CASE("malformed trace records report their line") {
  const auto path = write_trace("bad.txt", "a b\n1 0\n1\n");
  Harness h;
  Session s({plain("m", load("multi.hoa", 1))}, config("[drivers]\ndefault = file:" + path + "\n"), h.io());
  const auto r = s.run();
  CHECK(r.reason == ExitReport::Reason::Fault);
  CHECK(r.code == 1);
  CHECK(r.message.find(":3: expected 2 values") != std::string::npos);
}

TEST_CASE("step outcomes") {
  const std::vector<std::string> universe{"a"};
  Runner loop("loop", load("accept_all.hoa"), {});
  CHECK(loop.step(Valuation(0)).kind == StepOutcome::Kind::Advanced);

  Runner dead("dead", load("deadlock.hoa"), universe);
  CHECK(dead.step(Valuation::from_bits(1, 1)).kind == StepOutcome::Kind::Advanced);
  const auto d = dead.step(Valuation::from_bits(1, 1));
  CHECK(d.kind == StepOutcome::Kind::Deadlock);
  CHECK(dead.state() == 1);

  Runner nd("nd", from_text("HOA: v1\nStates: 3\nStart: 0\nAP: 1 \"a\"\nAcceptance: 0 t\n--BODY--\n"
                            "State: 0\n[t] 2\n[t] 1\nState: 1\n[t] 1\nState: 2\n[t] 2\n--END--\n"),
            universe);
  const auto o = nd.step(Valuation::from_bits(0, 1));
  CHECK(o.kind == StepOutcome::Kind::Nondeterministic);
  CHECK(o.candidates == StateSet{1, 2});
  CHECK(nd.state() == 0);
}

TEST_CASE("max_steps of zero stops immediately") {
  Harness h;
  Session s({plain("a", load("accept_all.hoa"))}, config("[drivers]\ndefault = random(bias=0.5)\n[run]\nmax_steps = 0\n"),
            h.io(), SessionOptions{true, true});
  const auto r = s.run();
  CHECK(r.reason == ExitReport::Reason::MaxSteps);
  CHECK(r.iterations == 0);
  CHECK(h.out.str().empty());
  CHECK(exit_code_of(r) == 0);
}

TEST_CASE("unhandled deadlock and nondeterminism are fatal") {
  {
    Harness h;
    Session s({plain("d", load("deadlock.hoa"))}, config("[drivers]\ndefault = random(bias=1.0)\n"), h.io());
    const auto r = s.run();
    CHECK(r.reason == ExitReport::Reason::Fault);
    CHECK(exit_code_of(r) == exit_codes::kDeadlock);
    CHECK(h.err.str().find("deadlock in d") != std::string::npos);
  }
  {
    Harness h;
    Session s({plain("n", load("nondet.hoa"))}, config("[drivers]\ndefault = random(bias=1.0)\n"), h.io());
    CHECK(exit_code_of(s.run()) == exit_codes::kNondeterminism);
  }
}

TEST_CASE("random-choice resolves nondeterminism reproducibly") {
  const auto run_once = [](std::uint64_t seed) {
    Harness h;
    Config cfg = config("[drivers]\ndefault = random(bias=0.5)\n[hooks.pick]\ntrigger = nondeterminism\n"
                        "action = random-choice\n[run]\nmax_steps = 1\n");
    cfg.seed = seed;
    Session s({plain("n", load("nondet.hoa"))}, cfg, h.io(), SessionOptions{true, true});
    const auto r = s.run();
    return std::make_pair(r, h.out.str());
  };
  std::set<std::uint64_t> reached;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto [a, out_a] = run_once(seed);
    const auto [b, out_b] = run_once(seed);
    REQUIRE(a == b);
    REQUIRE(out_a == out_b);
    reached.insert(a.runners[0].state);
  }
  CHECK(reached == std::set<std::uint64_t>{1, 2});
}

TEST_CASE("prompt needs an interactive stream") {
  const auto hook = "[drivers]\ndefault = random(bias=1.0)\n[hooks.ask]\ntrigger = nondeterminism\naction = prompt\n";
  {
    Harness h;
    Session s({plain("n", load("nondet.hoa"))}, config(hook), h.io(false));
    const auto r = s.run();
    CHECK(r.reason == ExitReport::Reason::Fault);
    CHECK(r.message.find("interactive") != std::string::npos);
  }
  {
    Harness h("1\n");
    Config cfg = config(hook);
    cfg.max_steps = 1;
    Session s({plain("n", load("nondet.hoa"))}, cfg, h.io(true));
    const auto r = s.run();
    CHECK(r.reason == ExitReport::Reason::MaxSteps);
    CHECK(r.runners[0].state == 2);  // candidates {1, 2}
  }
}

TEST_CASE("bad verdict with a reset hook returns to the initial state") {
  // Inf({q0}) on chain3_complete is Bad from q1 on
  auto a = parse_hoa_or_throw(oracle::read_file(std::string(HOAEXEC_FIXTURES) + "/chain3_complete.hoa"))
               .automata[0]
               .automaton;
  a.condition = AcceptanceCond::inf(0);
  auto shared = std::make_shared<const Automaton>(std::move(a));
  const auto path = write_trace("reset.txt", "a\n0\n0\n0\n");
  Harness h;
  Session s({monitored("m", shared)},
            config("[drivers]\ndefault = file:" + path + "\n[hooks.r]\ntrigger = verdict:bad\naction = reset\n"),
            h.io());
  const auto r = s.run();
  // q0 -> q1 (bad, reset to q0) -> q1 (bad again) -> reset
  CHECK(h.out.str() == "VERDICT m bad @1\nVERDICT m bad @2\nVERDICT m bad @3\n");
  CHECK(r.runners[0].state == 0);
  CHECK(r.verdicts.size() == 3);
  CHECK(exit_code_of(r) == exit_codes::kBadVerdict);
}

TEST_CASE("verdict log matches the oracle on an engineered trace") {
  // Fin({q2}) on chain3_complete: q2 is entered when a first holds in q1
  auto a = parse_hoa_or_throw(oracle::read_file(std::string(HOAEXEC_FIXTURES) + "/chain3_complete.hoa"))
               .automata[0]
               .automaton;
  a.condition = AcceptanceCond::fin(1);
  const auto expected = oracle::oracle_verdict(a, 2);
  REQUIRE(expected == Verdict::Bad);
  auto shared = std::make_shared<const Automaton>(std::move(a));
  const std::size_t k = 5;
  std::string trace = "a\n";
  for (std::size_t i = 1; i < k; ++i) trace += i == 1 ? "1\n" : "0\n";
  trace += "1\n0\n1\n";
  Harness h;
  Session s({monitored("m", shared)}, config("[drivers]\ndefault = file:" + write_trace("k.txt", trace) + "\n"), h.io());
  const auto r = s.run();
  REQUIRE(r.verdicts.size() == 1);
  CHECK(r.verdicts[0] == VerdictEvent{k, 0, Verdict::Bad});
}

TEST_CASE("runners advance in lockstep on shared propositions") {
  const auto path = write_trace("lockstep.txt", "a b\n1 0\n0 1\n1 1\n0 0\n1 0\n");
  Harness h;
  std::vector<AutomatonInput> inputs{plain("first", load("multi.hoa", 0)), plain("second", load("multi.hoa", 1)),
                                     plain("uv", load("uv.hoa"))};
  Config cfg = config("[drivers]\na = file:" + path + "\nb = file:" + path + "\nx = random(bias=0.0)\n");
  Session s(std::move(inputs), cfg, h.io(), SessionOptions{true, true});
  const auto r = s.run();
  CHECK(r.iterations == 5);
  for (const auto& rr : r.runners) CHECK(rr.steps == 5);
  const auto out = h.out.str();
  CHECK(out.rfind("STEP 1 100 | first:0 second:1 uv:1\n", 0) == 0);
}

TEST_CASE("state, condition, goto, log and halt hooks") {
  const auto path = write_trace("hooks.txt", "a b\n1 0\n1 1\n0 0\n0 0\n");
  Harness h;
  Config cfg = config("[drivers]\ndefault = file:" + path +
                      "\n[hooks.note]\ntrigger = cond: a & b\naction = log:{automaton} step {step} state {state} {verdict}\n"
                      "[hooks.stop]\ntrigger = cond: !a & !b\naction = halt:7\n"
                      "[hooks.jump]\ntrigger = state:1\naction = goto:0\nscope = second\n");
  Session s({plain("second", load("multi.hoa", 1))}, cfg, h.io());
  const auto r = s.run();
  CHECK(r.reason == ExitReport::Reason::Halt);
  CHECK(exit_code_of(r) == 7);
  CHECK(r.iterations == 3);
  // the first matching hook wins, so the jump is skipped on step 2
  CHECK(h.out.str() == "second step 2 state 1 unknown\n");
}

TEST_CASE("exit code mapping") {
  ExitReport r;
  CHECK(exit_code_of(r) == 0);
  r.runners.push_back({"m", 0, 1, Verdict::Unknown});
  CHECK(exit_code_of(r, true) == exit_codes::kStrictUnknown);
  r.verdicts.push_back({1, 0, Verdict::Ugly});
  CHECK(exit_code_of(r) == exit_codes::kUglyVerdict);
  r.verdicts.push_back({2, 0, Verdict::Bad});
  CHECK(exit_code_of(r) == exit_codes::kBadVerdict);
  r.reason = ExitReport::Reason::Fault;
  r.code = 4;
  CHECK(exit_code_of(r) == 4);
}

TEST_CASE("monitor sees exactly the runner's state sequence") {
  std::mt19937_64 rng(41);
  auto a = std::make_shared<const Automaton>(oracle::random_dc_automaton(rng, 8, 2));
  Runner r("r", a, {"p0", "p1"});
  r.attach_monitor(analyse_for_monitoring(a));
  std::vector<StateId> fed;
  std::vector<StateId> states;
  r.monitor()->set_observer([&](StateId q) { fed.push_back(q); });
  for (int i = 0; i < 500; ++i) {
    r.step(Valuation::from_bits(rng(), 2));
    states.push_back(r.state());
  }
  CHECK(fed == states);
}
