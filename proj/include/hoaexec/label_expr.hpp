#pragma once

// Boolean formulas over atomic propositions, used as transition labels.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hoaexec/errors.hpp"

namespace hoaexec {

struct AtomicProposition {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const AtomicProposition&, const AtomicProposition&) = default;
};

/// Fixed-width assignment of truth values, one bit per AP index.
class Valuation {
 public:
  Valuation() = default;
  explicit Valuation(std::size_t width) : width_(width), words_((width + 63) / 64, 0) {}

  /// Builds a valuation from the low `width` bits of `bits` (bit i = AP i).
  static Valuation from_bits(std::uint64_t bits, std::size_t width) {
    Valuation v(width);
    for (std::size_t i = 0; i < width && i < 64; ++i) v.set(i, ((bits >> i) & 1U) != 0);
    return v;
  }

  std::size_t size() const noexcept { return width_; }

  bool test(std::size_t i) const {
    if (i >= width_) {
      throw StructuralError("proposition index " + std::to_string(i) +
                            " outside valuation of width " + std::to_string(width_));
    }
    return ((words_[i / 64] >> (i % 64)) & 1U) != 0;
  }

  void set(std::size_t i, bool value) {
    if (i >= width_) {
      throw StructuralError("proposition index " + std::to_string(i) +
                            " outside valuation of width " + std::to_string(width_));
    }
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }

  /// One '0'/'1' character per AP, index 0 first.
  std::string to_string() const {
    std::string s(width_, '0');
    for (std::size_t i = 0; i < width_; ++i) {
      if (test(i)) s[i] = '1';
    }
    return s;
  }

  friend bool operator==(const Valuation&, const Valuation&) = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

class LabelExpr {
 public:
  enum class Kind : std::uint8_t { True, False, Ap, Not, And, Or };

  LabelExpr() = default;

  static LabelExpr top() { return LabelExpr(Kind::True); }
  static LabelExpr bottom() { return LabelExpr(Kind::False); }
  static LabelExpr ap(std::size_t index) {
    LabelExpr e(Kind::Ap);
    e.index_ = index;
    return e;
  }
  static LabelExpr negate(LabelExpr child) {
    LabelExpr e(Kind::Not);
    e.children_.push_back(std::move(child));
    return e;
  }
  /// N-ary conjunction; a single operand is returned as is, none gives True.
  static LabelExpr conj(std::vector<LabelExpr> operands) {
    return nary(Kind::And, std::move(operands), Kind::True);
  }
  /// N-ary disjunction; a single operand is returned as is, none gives False.
  static LabelExpr disj(std::vector<LabelExpr> operands) {
    return nary(Kind::Or, std::move(operands), Kind::False);
  }
  static LabelExpr conj(std::initializer_list<LabelExpr> operands) {
    return conj(std::vector<LabelExpr>(operands));
  }
  static LabelExpr disj(std::initializer_list<LabelExpr> operands) {
    return disj(std::vector<LabelExpr>(operands));
  }

  /// Conjunction of literals fixing every AP in [0, width) to the bits of `bits`.
  static LabelExpr minterm(std::uint64_t bits, std::size_t width) {
    std::vector<LabelExpr> lits;
    lits.reserve(width);
    for (std::size_t i = 0; i < width; ++i) {
      const bool positive = i < 64 && ((bits >> i) & 1U) != 0;
      lits.push_back(positive ? ap(i) : negate(ap(i)));
    }
    return conj(std::move(lits));
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t ap_index() const noexcept { return index_; }
  std::span<const LabelExpr> children() const noexcept { return children_; }

  bool evaluate(const Valuation& v) const {
    switch (kind_) {
      case Kind::True:
        return true;
      case Kind::False:
        return false;
      case Kind::Ap:
        return v.test(index_);
      case Kind::Not:
        return !children_.front().evaluate(v);
      case Kind::And:
        return std::all_of(children_.begin(), children_.end(),
                           [&](const LabelExpr& c) { return c.evaluate(v); });
      case Kind::Or:
        return std::any_of(children_.begin(), children_.end(),
                           [&](const LabelExpr& c) { return c.evaluate(v); });
    }
    return false;
  }

  /// Appends every AP index referenced in this formula (unsorted, may repeat).
  void collect_aps(std::vector<std::size_t>& out) const {
    if (kind_ == Kind::Ap) out.push_back(index_);
    for (const auto& c : children_) c.collect_aps(out);
  }

  /// Largest referenced AP index plus one; 0 for constant formulas.
  std::size_t min_width() const {
    std::size_t w = kind_ == Kind::Ap ? index_ + 1 : 0;
    for (const auto& c : children_) w = std::max(w, c.min_width());
    return w;
  }

  friend bool operator==(const LabelExpr&, const LabelExpr&) = default;

 private:
  explicit LabelExpr(Kind k) : kind_(k) {}

  static LabelExpr nary(Kind k, std::vector<LabelExpr> operands, Kind empty) {
    if (operands.empty()) return LabelExpr(empty);
    if (operands.size() == 1) return std::move(operands.front());
    LabelExpr e(k);
    e.children_ = std::move(operands);
    return e;
  }

  Kind kind_ = Kind::True;
  std::size_t index_ = 0;
  std::vector<LabelExpr> children_;
};

inline bool evaluate(const LabelExpr& expr, const Valuation& v) { return expr.evaluate(v); }

/// Default bound on the number of distinct propositions a semantic check may enumerate.
inline constexpr std::size_t kDefaultEnumerationCap = 16;

namespace detail {

inline std::vector<std::size_t> occurring_aps(std::span<const LabelExpr* const> exprs) {
  std::vector<std::size_t> aps;
  for (const auto* e : exprs) e->collect_aps(aps);
  std::sort(aps.begin(), aps.end());
  aps.erase(std::unique(aps.begin(), aps.end()), aps.end());
  return aps;
}

// Calls `visit(v)` for every assignment of the occurring propositions (others stay false)
// and stops early as soon as `visit` returns false. Returns false iff stopped early.
template <typename Visit>
bool for_each_valuation(std::span<const LabelExpr* const> exprs, std::size_t ap_count,
                        std::size_t cap, Visit&& visit) {
  const auto aps = occurring_aps(exprs);
  if (aps.size() > cap) {
    throw CapacityError(std::to_string(aps.size()) +
                        " distinct propositions exceed the enumeration cap of " +
                        std::to_string(cap));
  }
  std::size_t width = ap_count;
  if (!aps.empty()) width = std::max(width, aps.back() + 1);
  Valuation v(width);
  const std::uint64_t total = std::uint64_t{1} << aps.size();
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    for (std::size_t j = 0; j < aps.size(); ++j) v.set(aps[j], ((bits >> j) & 1U) != 0);
    if (!visit(static_cast<const Valuation&>(v))) return false;
  }
  return true;
}

}  // namespace detail

/// True iff no valuation satisfies both `a` and `b`.
inline bool are_disjoint(const LabelExpr& a, const LabelExpr& b, std::size_t ap_count,
                         std::size_t cap = kDefaultEnumerationCap) {
  const LabelExpr* exprs[] = {&a, &b};
  return detail::for_each_valuation(exprs, ap_count, cap, [&](const Valuation& v) {
    return !(a.evaluate(v) && b.evaluate(v));
  });
}

/// True iff every valuation satisfies at least one of `labels`.
inline bool covers_all(std::span<const LabelExpr> labels, std::size_t ap_count,
                       std::size_t cap = kDefaultEnumerationCap) {
  std::vector<const LabelExpr*> exprs;
  exprs.reserve(labels.size());
  for (const auto& l : labels) exprs.push_back(&l);
  return detail::for_each_valuation(exprs, ap_count, cap, [&](const Valuation& v) {
    return std::any_of(labels.begin(), labels.end(),
                       [&](const LabelExpr& l) { return l.evaluate(v); });
  });
}

inline bool is_satisfiable(const LabelExpr& e, std::size_t ap_count,
                           std::size_t cap = kDefaultEnumerationCap) {
  const LabelExpr* exprs[] = {&e};
  return !detail::for_each_valuation(exprs, ap_count, cap,
                                     [&](const Valuation& v) { return !e.evaluate(v); });
}

}  // namespace hoaexec
