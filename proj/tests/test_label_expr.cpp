#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "hoaexec/label_expr.hpp"

using hoaexec::LabelExpr;
using hoaexec::Valuation;

namespace {

Valuation val(std::uint64_t bits, std::size_t width) { return Valuation::from_bits(bits, width); }

LabelExpr random_expr(std::mt19937_64& rng, std::size_t aps, int depth) {
  const auto roll = rng() % 6;
  if (depth == 0 || roll < 2) {
    if (roll == 0 && aps == 0) return LabelExpr::top();
    if (aps == 0) return LabelExpr::bottom();
    return LabelExpr::ap(rng() % aps);
  }
  if (roll == 2) return LabelExpr::negate(random_expr(rng, aps, depth - 1));
  std::vector<LabelExpr> kids;
  for (int i = 0; i < 2 + static_cast<int>(rng() % 2); ++i) kids.push_back(random_expr(rng, aps, depth - 1));
  return roll == 3 ? LabelExpr::conj(kids) : LabelExpr::disj(kids);
}

}  // namespace

TEST_CASE("evaluate follows Boolean semantics") {
  const auto e = LabelExpr::conj({LabelExpr::ap(0), LabelExpr::negate(LabelExpr::ap(1))});
  CHECK(hoaexec::evaluate(e, val(0b01, 2)));
  CHECK_FALSE(hoaexec::evaluate(e, val(0b11, 2)));
  CHECK(hoaexec::evaluate(LabelExpr::top(), val(0, 0)));
  CHECK_FALSE(hoaexec::evaluate(LabelExpr::bottom(), val(0, 3)));
  const auto taut = LabelExpr::disj({LabelExpr::ap(0), LabelExpr::negate(LabelExpr::ap(0))});
  CHECK(hoaexec::evaluate(taut, val(0, 1)));
}

TEST_CASE("evaluating outside the valuation width is a structural error") {
  CHECK_THROWS_AS(LabelExpr::ap(3).evaluate(val(0, 2)), hoaexec::StructuralError);
}

TEST_CASE("are_disjoint examples") {
  const auto a = LabelExpr::ap(0);
  CHECK(hoaexec::are_disjoint(a, LabelExpr::negate(a), 1));
  CHECK_FALSE(hoaexec::are_disjoint(a, LabelExpr::conj({a, LabelExpr::ap(1)}), 2));
  CHECK(hoaexec::are_disjoint(LabelExpr::bottom(), LabelExpr::ap(1), 2));
  CHECK(hoaexec::are_disjoint(LabelExpr::bottom(), LabelExpr::top(), 0));
}

TEST_CASE("covers_all examples") {
  const auto a = LabelExpr::ap(0);
  std::vector<LabelExpr> split{a, LabelExpr::negate(a)};
  CHECK(hoaexec::covers_all(split, 1));
  std::vector<LabelExpr> one{LabelExpr::conj({a, LabelExpr::ap(1)})};
  CHECK_FALSE(hoaexec::covers_all(one, 2));
  std::vector<LabelExpr> top{LabelExpr::top()};
  CHECK(hoaexec::covers_all(top, 0));
  CHECK_FALSE(hoaexec::covers_all(std::vector<LabelExpr>{}, 0));
}

TEST_CASE("checks enumerate only occurring propositions and respect the cap") {
  // AP 40 is far beyond 2^k enumeration over the full set, but only one AP occurs.
  const auto p = LabelExpr::ap(40);
  CHECK(hoaexec::are_disjoint(p, LabelExpr::negate(p), 41));
  std::vector<LabelExpr> wide;
  for (std::size_t i = 0; i < 17; ++i) wide.push_back(LabelExpr::ap(i));
  CHECK_THROWS_AS(hoaexec::covers_all(wide, 17), hoaexec::CapacityError);
  CHECK_NOTHROW(hoaexec::covers_all(wide, 17, 17));
}

TEST_CASE("negation, disjointness and covering agree with full enumeration") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 400; ++round) {
    const std::size_t aps = rng() % 6;
    const auto a = random_expr(rng, aps, 4);
    const auto b = random_expr(rng, aps, 4);
    bool overlap = false;
    bool covered = true;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << aps); ++bits) {
      const auto v = val(bits, aps);
      REQUIRE(LabelExpr::negate(a).evaluate(v) == !a.evaluate(v));
      overlap = overlap || (a.evaluate(v) && b.evaluate(v));
      covered = covered && (a.evaluate(v) || b.evaluate(v));
    }
    REQUIRE(hoaexec::are_disjoint(a, b, aps) == !overlap);
    std::vector<LabelExpr> both{a, b};
    REQUIRE(hoaexec::covers_all(both, aps) == covered);
  }
}

TEST_CASE("minterm encodes AP 0 as the least significant bit") {
  const auto m = LabelExpr::minterm(0b10, 2);
  CHECK(m.evaluate(val(0b10, 2)));
  CHECK_FALSE(m.evaluate(val(0b01, 2)));
  CHECK(val(0b10, 3).to_string() == "010");
}
