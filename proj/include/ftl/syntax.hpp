#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ftl/error.hpp"

namespace ftl {

enum class Op : std::uint8_t {
  Atom,
  True,
  False,
  Not,
  And,
  Or,
  Implies,
  Iff,
  Exists,
  Forall,
  Until,
  Release,
  UntilPlus,
  ReleasePlus,
  Next,
  WeakNext,
  Eventually,
  EventuallyPlus,
  Always,
  AlwaysPlus,
  Last,
};

inline bool is_unary(Op op) {
  switch (op) {
  case Op::Not: case Op::Next: case Op::WeakNext: case Op::Eventually:
  case Op::EventuallyPlus: case Op::Always: case Op::AlwaysPlus:
    return true;
  default:
    return false;
  }
}

inline bool is_binary(Op op) {
  switch (op) {
  case Op::And: case Op::Or: case Op::Implies: case Op::Iff: case Op::Until:
  case Op::Release: case Op::UntilPlus: case Op::ReleasePlus:
    return true;
  default:
    return false;
  }
}

inline bool is_quantifier(Op op) { return op == Op::Exists || op == Op::Forall; }

inline bool is_temporal(Op op) {
  switch (op) {
  case Op::Until: case Op::Release: case Op::UntilPlus: case Op::ReleasePlus:
  case Op::Next: case Op::WeakNext: case Op::Eventually: case Op::EventuallyPlus:
  case Op::Always: case Op::AlwaysPlus: case Op::Last:
    return true;
  default:
    return false;
  }
}

struct Term {
  std::string name;
  bool is_var = false;

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;
};

class Node;
using Formula = std::shared_ptr<const Node>;

class Node {
public:
  Op op;
  std::string name;       // predicate of an Atom, bound variable of a quantifier
  std::vector<Term> args; // Atom arguments
  Formula lhs;            // operand of unary nodes, body of quantifiers
  Formula rhs;
  std::size_t hash = 0;
  int size = 1;

  Node(Op o, std::string n, std::vector<Term> a, Formula l, Formula r)
      : op(o), name(std::move(n)), args(std::move(a)), lhs(std::move(l)), rhs(std::move(r)) {
    std::size_t h = static_cast<std::size_t>(op) * 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    mix(std::hash<std::string>{}(name));
    for (const auto& t : args) {
      mix(std::hash<std::string>{}(t.name));
      mix(t.is_var ? 1 : 2);
    }
    if (lhs) { mix(lhs->hash); size += lhs->size; }
    if (rhs) { mix(rhs->hash); size += rhs->size; }
    hash = h;
  }
};

// ---------------------------------------------------------------------------
// Structural equality, ordering, hashing

inline bool equal(const Formula& a, const Formula& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->hash != b->hash || a->op != b->op || a->size != b->size) return false;
  if (a->name != b->name || a->args != b->args) return false;
  return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
}

inline int compare(const Formula& a, const Formula& b) {
  if (a == b) return 0;
  if (!a) return -1;
  if (!b) return 1;
  if (a->op != b->op) return a->op < b->op ? -1 : 1;
  if (a->name != b->name) return a->name < b->name ? -1 : 1;
  if (a->args != b->args) return a->args < b->args ? -1 : 1;
  if (int c = compare(a->lhs, b->lhs)) return c;
  return compare(a->rhs, b->rhs);
}

struct FormulaHash {
  std::size_t operator()(const Formula& f) const { return f ? f->hash : 0; }
};
struct FormulaEq {
  bool operator()(const Formula& a, const Formula& b) const { return equal(a, b); }
};
struct FormulaLess {
  bool operator()(const Formula& a, const Formula& b) const { return compare(a, b) < 0; }
};

template <class V>
using FormulaMap = std::unordered_map<Formula, V, FormulaHash, FormulaEq>;
using FormulaSet = std::unordered_set<Formula, FormulaHash, FormulaEq>;

// ---------------------------------------------------------------------------
// Constructors

inline Formula make(Op op, Formula l = nullptr, Formula r = nullptr) {
  return std::make_shared<const Node>(op, std::string{}, std::vector<Term>{}, std::move(l), std::move(r));
}
inline Formula atom(std::string pred, std::vector<Term> args = {}) {
  return std::make_shared<const Node>(Op::Atom, std::move(pred), std::move(args), nullptr, nullptr);
}
inline Term var(std::string n) { return Term{std::move(n), true}; }
inline Term cst(std::string n) { return Term{std::move(n), false}; }
inline Formula top() { return make(Op::True); }
inline Formula bot() { return make(Op::False); }
inline Formula last() { return make(Op::Last); }
inline Formula neg(Formula a) { return make(Op::Not, std::move(a)); }
inline Formula conj(Formula a, Formula b) { return make(Op::And, std::move(a), std::move(b)); }
inline Formula disj(Formula a, Formula b) { return make(Op::Or, std::move(a), std::move(b)); }
inline Formula implies(Formula a, Formula b) { return make(Op::Implies, std::move(a), std::move(b)); }
inline Formula iff(Formula a, Formula b) { return make(Op::Iff, std::move(a), std::move(b)); }
inline Formula until(Formula a, Formula b) { return make(Op::Until, std::move(a), std::move(b)); }
inline Formula release(Formula a, Formula b) { return make(Op::Release, std::move(a), std::move(b)); }
inline Formula until_plus(Formula a, Formula b) { return make(Op::UntilPlus, std::move(a), std::move(b)); }
inline Formula release_plus(Formula a, Formula b) { return make(Op::ReleasePlus, std::move(a), std::move(b)); }
inline Formula next(Formula a) { return make(Op::Next, std::move(a)); }
inline Formula wnext(Formula a) { return make(Op::WeakNext, std::move(a)); }
inline Formula eventually(Formula a) { return make(Op::Eventually, std::move(a)); }
inline Formula eventually_plus(Formula a) { return make(Op::EventuallyPlus, std::move(a)); }
inline Formula always(Formula a) { return make(Op::Always, std::move(a)); }
inline Formula always_plus(Formula a) { return make(Op::AlwaysPlus, std::move(a)); }
inline Formula exists(std::string x, Formula body) {
  return std::make_shared<const Node>(Op::Exists, std::move(x), std::vector<Term>{}, std::move(body), nullptr);
}
inline Formula forall(std::string x, Formula body) {
  return std::make_shared<const Node>(Op::Forall, std::move(x), std::vector<Term>{}, std::move(body), nullptr);
}

inline Formula conj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return top();
  Formula r = fs.front();
  for (std::size_t i = 1; i < fs.size(); ++i) r = conj(r, fs[i]);
  return r;
}
inline Formula disj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return bot();
  Formula r = fs.front();
  for (std::size_t i = 1; i < fs.size(); ++i) r = disj(r, fs[i]);
  return r;
}

// Rebuild `f` with new children, sharing when nothing changed.
inline Formula with_children(const Formula& f, Formula l, Formula r) {
  if (l == f->lhs && r == f->rhs) return f;
  return std::make_shared<const Node>(f->op, f->name, f->args, std::move(l), std::move(r));
}

// ---------------------------------------------------------------------------
// Signature

struct Signature {
  std::map<std::string, int> predicates;
  std::set<std::string> constants;
  std::set<std::string> variables; // names that are variables when they occur free

  void add_predicate(const std::string& name, int arity) {
    if (arity < 0) throw Error("negative arity for predicate " + name);
    if (constants.count(name) || variables.count(name))
      throw Error("identifier class clash: " + name);
    auto [it, fresh] = predicates.emplace(name, arity);
    if (!fresh && it->second != arity)
      throw Error("arity mismatch for " + name + ": " + std::to_string(it->second) +
                  " vs " + std::to_string(arity));
  }
  void add_constant(const std::string& name) {
    if (predicates.count(name) || variables.count(name))
      throw Error("identifier class clash: " + name);
    constants.insert(name);
  }
  bool has_predicate(const std::string& n) const { return predicates.count(n) > 0; }
  int arity(const std::string& n) const {
    auto it = predicates.find(n);
    if (it == predicates.end()) throw Error("unknown predicate " + n);
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Queries

namespace detail {
inline void collect_free(const Formula& f, std::set<std::string>& bound, std::set<std::string>& out) {
  switch (f->op) {
  case Op::Atom:
    for (const auto& t : f->args)
      if (t.is_var && !bound.count(t.name)) out.insert(t.name);
    return;
  case Op::Exists: case Op::Forall: {
    bool had = bound.count(f->name) > 0;
    bound.insert(f->name);
    collect_free(f->lhs, bound, out);
    if (!had) bound.erase(f->name);
    return;
  }
  default:
    if (f->lhs) collect_free(f->lhs, bound, out);
    if (f->rhs) collect_free(f->rhs, bound, out);
  }
}
} // namespace detail

inline std::set<std::string> free_vars(const Formula& f) {
  std::set<std::string> bound, out;
  detail::collect_free(f, bound, out);
  return out;
}

inline bool is_sentence(const Formula& f) { return free_vars(f).empty(); }

inline void collect_signature(const Formula& f, Signature& sig) {
  if (f->op == Op::Atom) {
    sig.add_predicate(f->name, static_cast<int>(f->args.size()));
    for (const auto& t : f->args)
      if (!t.is_var) sig.add_constant(t.name);
    return;
  }
  if (f->lhs) collect_signature(f->lhs, sig);
  if (f->rhs) collect_signature(f->rhs, sig);
}

inline Signature signature_of(const Formula& f) {
  Signature s;
  collect_signature(f, s);
  for (const auto& v : free_vars(f)) s.variables.insert(v);
  return s;
}

inline std::set<std::string> variables_of(const Formula& f) {
  std::set<std::string> out;
  std::function<void(const Formula&)> go = [&](const Formula& g) {
    if (g->op == Op::Atom) {
      for (const auto& t : g->args)
        if (t.is_var) out.insert(t.name);
      return;
    }
    if (is_quantifier(g->op)) out.insert(g->name);
    if (g->lhs) go(g->lhs);
    if (g->rhs) go(g->rhs);
  };
  go(f);
  return out;
}

// Nesting depth of temporal operators (derived operators count once).
inline int temporal_depth(const Formula& f) {
  int d = 0;
  if (f->lhs) d = std::max(d, temporal_depth(f->lhs));
  if (f->rhs) d = std::max(d, temporal_depth(f->rhs));
  return is_temporal(f->op) ? d + 1 : d;
}

// Every until-like subformula has at most one free variable.
inline bool is_monodic(const Formula& f) {
  if (is_temporal(f->op) && f->op != Op::Last && free_vars(f).size() > 1) return false;
  if (f->lhs && !is_monodic(f->lhs)) return false;
  if (f->rhs && !is_monodic(f->rhs)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Core expansion

// Rewrites into {Atom, True, False, Not, And, Exists, Until}.
inline Formula expand(const Formula& f) {
  auto nott = [](Formula a) { return neg(std::move(a)); };
  switch (f->op) {
  case Op::Atom: case Op::True: case Op::False:
    return f;
  case Op::Not:
    return with_children(f, expand(f->lhs), nullptr);
  case Op::And: case Op::Until:
    return with_children(f, expand(f->lhs), expand(f->rhs));
  case Op::Exists:
    return with_children(f, expand(f->lhs), nullptr);
  case Op::Or:
    return nott(conj(nott(expand(f->lhs)), nott(expand(f->rhs))));
  case Op::Implies:
    return nott(conj(expand(f->lhs), nott(expand(f->rhs))));
  case Op::Iff: {
    Formula a = expand(f->lhs), b = expand(f->rhs);
    return conj(nott(conj(a, nott(b))), nott(conj(b, nott(a))));
  }
  case Op::Forall:
    return nott(exists(f->name, nott(expand(f->lhs))));
  case Op::Release:
    return nott(until(nott(expand(f->lhs)), nott(expand(f->rhs))));
  case Op::UntilPlus: {
    // b | (a & a U b)
    Formula a = expand(f->lhs), b = expand(f->rhs);
    return nott(conj(nott(b), nott(conj(a, until(a, b)))));
  }
  case Op::ReleasePlus: {
    // b & (a | a R b)
    Formula a = expand(f->lhs), b = expand(f->rhs);
    Formula r = nott(until(nott(a), nott(b)));
    return conj(b, nott(conj(nott(a), nott(r))));
  }
  case Op::Next:
    return until(bot(), expand(f->lhs));
  case Op::WeakNext:
    return nott(until(nott(top()), nott(expand(f->lhs))));
  case Op::Eventually:
    return until(top(), expand(f->lhs));
  case Op::EventuallyPlus: {
    Formula b = expand(f->lhs);
    return nott(conj(nott(b), nott(until(top(), b))));
  }
  case Op::Always:
    return nott(until(nott(bot()), nott(expand(f->lhs))));
  case Op::AlwaysPlus: {
    Formula b = expand(f->lhs);
    return conj(b, nott(until(nott(bot()), nott(b))));
  }
  case Op::Last:
    return nott(until(nott(bot()), nott(bot())));
  }
  return f;
}

inline bool is_core(const Formula& f) {
  switch (f->op) {
  case Op::Atom: case Op::True: case Op::False: case Op::Not: case Op::And:
  case Op::Exists: case Op::Until:
    break;
  default:
    return false;
  }
  return (!f->lhs || is_core(f->lhs)) && (!f->rhs || is_core(f->rhs));
}

// Double negation and negated constants removed; keeps core form.
inline Formula simplify_negations(const Formula& f) {
  switch (f->op) {
  case Op::Not: {
    Formula a = simplify_negations(f->lhs);
    if (a->op == Op::Not) return a->lhs;
    if (a->op == Op::True) return bot();
    if (a->op == Op::False) return top();
    return with_children(f, a, nullptr);
  }
  default: {
    Formula l = f->lhs ? simplify_negations(f->lhs) : nullptr;
    Formula r = f->rhs ? simplify_negations(f->rhs) : nullptr;
    return with_children(f, l, r);
  }
  }
}

// ---------------------------------------------------------------------------
// Negation normal form over {lit, true, false, &, |, exists, forall, U, R, U+, R+}

namespace detail {
inline Formula nnf_rec(const Formula& f, bool negate) {
  switch (f->op) {
  case Op::Atom:
    return negate ? neg(f) : f;
  case Op::True:
    return negate ? bot() : top();
  case Op::False:
    return negate ? top() : bot();
  case Op::Not:
    return nnf_rec(f->lhs, !negate);
  case Op::And: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? disj(a, b) : conj(a, b);
  }
  case Op::Or: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? conj(a, b) : disj(a, b);
  }
  case Op::Implies: {
    Formula a = nnf_rec(f->lhs, !negate), b = nnf_rec(f->rhs, negate);
    return negate ? conj(a, b) : disj(a, b);
  }
  case Op::Iff: {
    // (~a | b) & (a | ~b); negated: (a & ~b) | (~a & b)
    Formula pa = nnf_rec(f->lhs, false), na = nnf_rec(f->lhs, true);
    Formula pb = nnf_rec(f->rhs, false), nb = nnf_rec(f->rhs, true);
    if (negate) return disj(conj(pa, nb), conj(na, pb));
    return conj(disj(na, pb), disj(pa, nb));
  }
  case Op::Exists: {
    Formula b = nnf_rec(f->lhs, negate);
    return negate ? forall(f->name, b) : exists(f->name, b);
  }
  case Op::Forall: {
    Formula b = nnf_rec(f->lhs, negate);
    return negate ? exists(f->name, b) : forall(f->name, b);
  }
  case Op::Until: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? release(a, b) : until(a, b);
  }
  case Op::Release: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? until(a, b) : release(a, b);
  }
  case Op::UntilPlus: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? release_plus(a, b) : until_plus(a, b);
  }
  case Op::ReleasePlus: {
    Formula a = nnf_rec(f->lhs, negate), b = nnf_rec(f->rhs, negate);
    return negate ? until_plus(a, b) : release_plus(a, b);
  }
  case Op::Next:
    return nnf_rec(until(bot(), f->lhs), negate);
  case Op::WeakNext:
    return nnf_rec(release(top(), f->lhs), negate);
  case Op::Eventually:
    return nnf_rec(until(top(), f->lhs), negate);
  case Op::EventuallyPlus:
    return nnf_rec(until_plus(top(), f->lhs), negate);
  case Op::Always:
    return nnf_rec(release(bot(), f->lhs), negate);
  case Op::AlwaysPlus:
    return nnf_rec(release_plus(bot(), f->lhs), negate);
  case Op::Last:
    return nnf_rec(release(bot(), bot()), negate);
  }
  return f;
}
} // namespace detail

inline Formula nnf(const Formula& f) { return detail::nnf_rec(f, false); }

inline bool is_nnf(const Formula& f) {
  switch (f->op) {
  case Op::Atom: case Op::True: case Op::False:
    return true;
  case Op::Not:
    return f->lhs->op == Op::Atom;
  case Op::And: case Op::Or: case Op::Until: case Op::Release: case Op::UntilPlus:
  case Op::ReleasePlus:
    return is_nnf(f->lhs) && is_nnf(f->rhs);
  case Op::Exists: case Op::Forall:
    return is_nnf(f->lhs);
  default:
    return false;
  }
}

// ---------------------------------------------------------------------------
// Subformulas of the core expansion, post-order, duplicates dropped.

inline std::vector<Formula> subformulas(const Formula& f) {
  Formula core = is_core(f) ? f : expand(f);
  std::vector<Formula> out;
  FormulaSet seen;
  std::function<void(const Formula&)> go = [&](const Formula& g) {
    if (g->lhs) go(g->lhs);
    if (g->rhs) go(g->rhs);
    if (seen.insert(g).second) out.push_back(g);
  };
  go(core);
  return out;
}

// ---------------------------------------------------------------------------
// Substitution f{t/x}

inline Formula substitute(const Formula& f, const std::string& x, const Term& t) {
  switch (f->op) {
  case Op::Atom: {
    bool hit = false;
    std::vector<Term> args = f->args;
    for (auto& a : args)
      if (a.is_var && a.name == x) { a = t; hit = true; }
    if (!hit) return f;
    return atom(f->name, std::move(args));
  }
  case Op::Exists: case Op::Forall: {
    if (f->name == x) return f;
    if (t.is_var && t.name == f->name && free_vars(f->lhs).count(x))
      throw Error("variable capture substituting " + t.name + " for " + x);
    return with_children(f, substitute(f->lhs, x, t), nullptr);
  }
  default: {
    Formula l = f->lhs ? substitute(f->lhs, x, t) : nullptr;
    Formula r = f->rhs ? substitute(f->rhs, x, t) : nullptr;
    return with_children(f, l, r);
  }
  }
}

// Renames every variable (bound or free) to `x`; used for one-variable closures.
inline Formula rename_all_vars(const Formula& f, const std::string& x) {
  switch (f->op) {
  case Op::Atom: {
    bool hit = false;
    std::vector<Term> args = f->args;
    for (auto& a : args)
      if (a.is_var && a.name != x) { a.name = x; hit = true; }
    return hit ? atom(f->name, std::move(args)) : f;
  }
  case Op::Exists: case Op::Forall: {
    Formula b = rename_all_vars(f->lhs, x);
    if (f->name == x && b == f->lhs) return f;
    return std::make_shared<const Node>(f->op, x, std::vector<Term>{}, b, nullptr);
  }
  default: {
    Formula l = f->lhs ? rename_all_vars(f->lhs, x) : nullptr;
    Formula r = f->rhs ? rename_all_vars(f->rhs, x) : nullptr;
    return with_children(f, l, r);
  }
  }
}

// ---------------------------------------------------------------------------
// Rendering

enum class Style { Ascii, Unicode };

namespace detail {

inline int precedence(Op op) {
  switch (op) {
  case Op::Iff: return 1;
  case Op::Implies: return 2;
  case Op::Or: return 3;
  case Op::And: return 4;
  case Op::Until: case Op::Release: case Op::UntilPlus: case Op::ReleasePlus: return 5;
  case Op::Exists: case Op::Forall: return 0;
  default: return 6;
  }
}

inline bool right_assoc(Op op) {
  return op == Op::Iff || op == Op::Implies || precedence(op) == 5;
}

inline const char* symbol(Op op, Style s) {
  bool u = s == Style::Unicode;
  switch (op) {
  case Op::True: return u ? "⊤" : "true";
  case Op::False: return u ? "⊥" : "false";
  case Op::Last: return "last";
  case Op::Not: return u ? "¬" : "~";
  case Op::And: return u ? " ∧ " : " & ";
  case Op::Or: return u ? " ∨ " : " | ";
  case Op::Implies: return u ? " → " : " -> ";
  case Op::Iff: return u ? " ↔ " : " <-> ";
  case Op::Until: return " U ";
  case Op::Release: return " R ";
  case Op::UntilPlus: return u ? " U⁺ " : " U+ ";
  case Op::ReleasePlus: return u ? " R⁺ " : " R+ ";
  case Op::Next: return u ? "○" : "X ";
  case Op::WeakNext: return u ? "●" : "N ";
  case Op::Eventually: return u ? "◇" : "F ";
  case Op::EventuallyPlus: return u ? "◇⁺" : "F+ ";
  case Op::Always: return u ? "□" : "G ";
  case Op::AlwaysPlus: return u ? "□⁺" : "G+ ";
  case Op::Exists: return u ? "∃" : "exists ";
  case Op::Forall: return u ? "∀" : "forall ";
  default: return "";
  }
}

inline void render_rec(std::ostream& os, const Formula& f, int ctx, bool tail, Style s) {
  bool paren = is_quantifier(f->op) ? !tail : precedence(f->op) < ctx;
  if (paren) { os << '('; tail = true; }
  switch (f->op) {
  case Op::Atom:
    os << f->name;
    if (!f->args.empty()) {
      os << '(';
      for (std::size_t i = 0; i < f->args.size(); ++i) os << (i ? "," : "") << f->args[i].name;
      os << ')';
    }
    break;
  case Op::True: case Op::False: case Op::Last:
    os << symbol(f->op, s);
    break;
  case Op::Exists: case Op::Forall:
    os << symbol(f->op, s) << f->name << (s == Style::Unicode ? " " : ". ");
    render_rec(os, f->lhs, 0, true, s);
    break;
  default:
    if (is_unary(f->op)) {
      os << symbol(f->op, s);
      render_rec(os, f->lhs, 6, tail, s);
    } else {
      int p = precedence(f->op);
      bool ra = right_assoc(f->op);
      render_rec(os, f->lhs, ra ? p + 1 : p, false, s);
      os << symbol(f->op, s);
      render_rec(os, f->rhs, ra ? p : p + 1, tail, s);
    }
  }
  if (paren) os << ')';
}
} // namespace detail

inline std::string render(const Formula& f, Style s = Style::Ascii) {
  std::ostringstream os;
  detail::render_rec(os, f, 0, true, s);
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Formula& f) { return os << render(f); }

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class Tok {
  Ident, LParen, RParen, Comma, Dot, Not, And, Or, Implies, Iff, True, False, Last,
  Until, Release, UntilPlus, ReleasePlus, Next, WeakNext, Eventually, EventuallyPlus,
  Always, AlwaysPlus, Exists, Forall, End,
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t{Tok::End, "", line_, col_};
      if (pos_ >= src_.size()) { out.push_back(t); return out; }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t b = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '\''))
          advance(1);
        t.text = std::string(src_.substr(b, pos_ - b));
        t.kind = keyword(t.text);
        Tok plus = plus_form(t.kind);
        if (plus != Tok::End) {
          if (pos_ < src_.size() && src_[pos_] == '+') { t.kind = plus; t.text += '+'; advance(1); }
          else if (src_.substr(pos_, 3) == "⁺") { t.kind = plus; t.text += '+'; advance(3); }
        }
        out.push_back(t);
        continue;
      }
      if (match("<->")) t.kind = Tok::Iff;
      else if (match("->")) t.kind = Tok::Implies;
      else if (match("(")) t.kind = Tok::LParen;
      else if (match(")")) t.kind = Tok::RParen;
      else if (match(",")) t.kind = Tok::Comma;
      else if (match(".")) t.kind = Tok::Dot;
      else if (match("~") || match("!") || match("¬")) t.kind = Tok::Not;
      else if (match("&") || match("∧")) t.kind = Tok::And;
      else if (match("|") || match("∨")) t.kind = Tok::Or;
      else if (match("→")) t.kind = Tok::Implies;
      else if (match("↔")) t.kind = Tok::Iff;
      else if (match("⊤")) t.kind = Tok::True;
      else if (match("⊥")) t.kind = Tok::False;
      else if (match("∃")) t.kind = Tok::Exists;
      else if (match("∀")) t.kind = Tok::Forall;
      else if (match("○")) t.kind = Tok::Next;
      else if (match("●")) t.kind = Tok::WeakNext;
      else if (match("◇⁺")) t.kind = Tok::EventuallyPlus;
      else if (match("◇")) t.kind = Tok::Eventually;
      else if (match("□⁺")) t.kind = Tok::AlwaysPlus;
      else if (match("□")) t.kind = Tok::Always;
      else throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
      out.push_back(t);
    }
  }

private:
  static Tok keyword(const std::string& s) {
    static const std::map<std::string, Tok> kw = {
        {"U", Tok::Until}, {"R", Tok::Release}, {"X", Tok::Next}, {"N", Tok::WeakNext},
        {"F", Tok::Eventually}, {"G", Tok::Always}, {"last", Tok::Last}, {"true", Tok::True},
        {"false", Tok::False}, {"forall", Tok::Forall}, {"exists", Tok::Exists}};
    auto it = kw.find(s);
    return it == kw.end() ? Tok::Ident : it->second;
  }
  static Tok plus_form(Tok k) {
    switch (k) {
    case Tok::Until: return Tok::UntilPlus;
    case Tok::Release: return Tok::ReleasePlus;
    case Tok::Eventually: return Tok::EventuallyPlus;
    case Tok::Always: return Tok::AlwaysPlus;
    default: return Tok::End;
    }
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') { ++line_; col_ = 1; ++pos_; }
      else if (std::isspace(static_cast<unsigned char>(c))) advance(1);
      else if (c == '#') { while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_; }
      else break;
    }
  }
  bool match(std::string_view s) {
    if (src_.substr(pos_, s.size()) != s) return false;
    advance(s.size());
    return true;
  }
  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      // count columns per code point, not per byte
      if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) ++col_;
      ++pos_;
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
public:
  Parser(std::vector<Token> toks, Signature& sig, bool open)
      : toks_(std::move(toks)), sig_(sig), open_(open) {}

  Formula parse_all() {
    Formula f = parse_iff();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    for (const auto& c : used_const_)
      if (bound_names_.count(c)) fail_plain("identifier class clash: " + c + " is both bound and a constant");
    for (const auto& c : used_const_) {
      if (sig_.predicates.count(c)) fail_plain("identifier class clash: " + c);
      if (open_) sig_.constants.insert(c);
    }
    return f;
  }

private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  void expect(Tok k, const char* what) {
    if (!accept(k)) fail(std::string("expected ") + what);
  }
  [[noreturn]] void fail(const std::string& m) const { throw ParseError(m, peek().line, peek().col); }
  [[noreturn]] void fail_plain(const std::string& m) const { throw ParseError(m, 1, 1); }

  Formula parse_iff() {
    Formula a = parse_imp();
    if (accept(Tok::Iff)) return iff(a, parse_iff());
    return a;
  }
  Formula parse_imp() {
    Formula a = parse_or();
    if (accept(Tok::Implies)) return implies(a, parse_imp());
    return a;
  }
  Formula parse_or() {
    Formula a = parse_and();
    while (accept(Tok::Or)) a = disj(a, parse_and());
    return a;
  }
  Formula parse_and() {
    Formula a = parse_temporal();
    while (accept(Tok::And)) a = conj(a, parse_temporal());
    return a;
  }
  Formula parse_temporal() {
    Formula a = parse_unary();
    switch (peek().kind) {
    case Tok::Until: ++pos_; return until(a, parse_temporal());
    case Tok::Release: ++pos_; return release(a, parse_temporal());
    case Tok::UntilPlus: ++pos_; return until_plus(a, parse_temporal());
    case Tok::ReleasePlus: ++pos_; return release_plus(a, parse_temporal());
    default: return a;
    }
  }
  Formula parse_unary() {
    switch (peek().kind) {
    case Tok::Not: ++pos_; return neg(parse_unary());
    case Tok::Next: ++pos_; return next(parse_unary());
    case Tok::WeakNext: ++pos_; return wnext(parse_unary());
    case Tok::Eventually: ++pos_; return eventually(parse_unary());
    case Tok::EventuallyPlus: ++pos_; return eventually_plus(parse_unary());
    case Tok::Always: ++pos_; return always(parse_unary());
    case Tok::AlwaysPlus: ++pos_; return always_plus(parse_unary());
    case Tok::Exists: case Tok::Forall: {
      bool ex = take().kind == Tok::Exists;
      if (peek().kind != Tok::Ident) fail("expected variable after quantifier");
      std::string x = take().text;
      if (sig_.constants.count(x) || sig_.predicates.count(x))
        fail("identifier class clash: " + x + " cannot be bound");
      accept(Tok::Dot);
      bound_.push_back(x);
      bound_names_.insert(x);
      Formula body = parse_iff();
      bound_.pop_back();
      return ex ? exists(x, body) : forall(x, body);
    }
    default:
      return parse_primary();
    }
  }
  Formula parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
    case Tok::True: ++pos_; return top();
    case Tok::False: ++pos_; return bot();
    case Tok::Last: ++pos_; return last();
    case Tok::LParen: {
      ++pos_;
      Formula f = parse_iff();
      expect(Tok::RParen, "')'");
      return f;
    }
    case Tok::Until: case Tok::Release:
      if (peek(1).kind == Tok::LParen) return parse_atom();
      fail("unexpected '" + t.text + "'");
    case Tok::Ident:
      return parse_atom();
    default:
      fail(t.kind == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'");
    }
  }
  Formula parse_atom() {
    Token name = take();
    std::vector<Term> args;
    if (accept(Tok::LParen)) {
      do {
        if (peek().kind != Tok::Ident) fail("expected term");
        Token a = take();
        args.push_back(term(a));
      } while (accept(Tok::Comma));
      expect(Tok::RParen, "')'");
    }
    if (bound_names_.count(name.text) || used_const_.count(name.text) || sig_.constants.count(name.text) ||
        sig_.variables.count(name.text) || used_terms_.count(name.text))
      throw ParseError("identifier class clash: " + name.text, name.line, name.col);
    auto it = sig_.predicates.find(name.text);
    if (it == sig_.predicates.end()) {
      if (!open_) throw ParseError("unknown predicate " + name.text, name.line, name.col);
      sig_.predicates.emplace(name.text, static_cast<int>(args.size()));
    } else if (it->second != static_cast<int>(args.size())) {
      throw ParseError("arity mismatch for " + name.text + ": expected " + std::to_string(it->second) +
                           ", got " + std::to_string(args.size()),
                       name.line, name.col);
    }
    used_preds_.insert(name.text);
    return atom(name.text, std::move(args));
  }
  Term term(const Token& a) {
    if (used_preds_.count(a.text) || sig_.predicates.count(a.text))
      throw ParseError("identifier class clash: " + a.text, a.line, a.col);
    used_terms_.insert(a.text);
    if (std::find(bound_.begin(), bound_.end(), a.text) != bound_.end()) return var(a.text);
    if (sig_.variables.count(a.text)) return var(a.text);
    used_const_.insert(a.text);
    return cst(a.text);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Signature& sig_;
  bool open_;
  std::vector<std::string> bound_;
  std::set<std::string> bound_names_, used_const_, used_preds_, used_terms_;
};

} // namespace detail

// Strict: predicates must be declared in `sig`.
inline Formula parse(std::string_view text, const Signature& sig) {
  Signature copy = sig;
  detail::Parser p(detail::Lexer(text).run(), copy, false);
  return p.parse_all();
}

// Open: new predicates and constants are added to `sig`.
inline Formula parse_open(std::string_view text, Signature& sig) {
  detail::Parser p(detail::Lexer(text).run(), sig, true);
  return p.parse_all();
}

inline Formula parse(std::string_view text) {
  Signature sig;
  return parse_open(text, sig);
}

// Parses with the given names treated as variables when free.
inline Formula parse_with_vars(std::string_view text, const std::set<std::string>& vars) {
  Signature sig;
  sig.variables = vars;
  return parse_open(text, sig);
}

} // namespace ftl
