#pragma once

// Temporal ALC on finite traces. Concepts and formulas share one AST; the
// sort is fixed by position. Satisfiability of global-CI problems on traces of
// length <= k is decided by type elimination over quasimodels.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "ftl/error.hpp"
#include "ftl/search.hpp"
#include "ftl/semantics.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl::talc {

enum class TOp {
  Name, Top, Bottom, Not, And, Or, Implies, Iff, Some, All, Assert, RoleAssert, Until, Release, UntilPlus,
  ReleasePlus, Next, WeakNext, Eventually, EventuallyPlus, Always, AlwaysPlus, Last,
};

struct TNode;
using TExpr = std::shared_ptr<const TNode>;

// Name: name = concept. Some/All: name = role, lhs = filler.
// Assert: name = concept, a = individual. RoleAssert: name = role, a, b.
struct TNode {
  TOp op;
  std::string name, a, b;
  TExpr lhs, rhs;
};

inline TExpr mk(TOp op, TExpr l = nullptr, TExpr r = nullptr) {
  return std::make_shared<const TNode>(TNode{op, {}, {}, {}, std::move(l), std::move(r)});
}
inline TExpr cname(std::string n) { return std::make_shared<const TNode>(TNode{TOp::Name, std::move(n), {}, {}, nullptr, nullptr}); }
inline TExpr some(std::string role, TExpr c) {
  return std::make_shared<const TNode>(TNode{TOp::Some, std::move(role), {}, {}, std::move(c), nullptr});
}
inline TExpr all(std::string role, TExpr c) {
  return std::make_shared<const TNode>(TNode{TOp::All, std::move(role), {}, {}, std::move(c), nullptr});
}
inline TExpr assertion(std::string concept_name, std::string ind) {
  return std::make_shared<const TNode>(TNode{TOp::Assert, std::move(concept_name), std::move(ind), {}, nullptr, nullptr});
}
inline TExpr role_assertion(std::string role, std::string a, std::string b) {
  return std::make_shared<const TNode>(TNode{TOp::RoleAssert, std::move(role), std::move(a), std::move(b), nullptr, nullptr});
}
inline TExpr ttop() { return mk(TOp::Top); }
inline TExpr tbot() { return mk(TOp::Bottom); }
inline TExpr tnot(TExpr a) { return mk(TOp::Not, std::move(a)); }
inline TExpr tand(TExpr a, TExpr b) { return mk(TOp::And, std::move(a), std::move(b)); }
inline TExpr tor(TExpr a, TExpr b) { return mk(TOp::Or, std::move(a), std::move(b)); }
inline TExpr tuntil(TExpr a, TExpr b) { return mk(TOp::Until, std::move(a), std::move(b)); }

struct Ci {
  TExpr lhs, rhs;
};

struct Problem {
  std::vector<Ci> tbox;
  TExpr psi = ttop();
};

inline bool is_binary(TOp op) {
  switch (op) {
  case TOp::And: case TOp::Or: case TOp::Implies: case TOp::Iff: case TOp::Until: case TOp::Release:
  case TOp::UntilPlus: case TOp::ReleasePlus:
    return true;
  default:
    return false;
  }
}

inline std::string render(const TExpr& e) {
  switch (e->op) {
  case TOp::Name: return e->name;
  case TOp::Top: return "true";
  case TOp::Bottom: return "false";
  case TOp::Last: return "last";
  case TOp::Assert: return e->name + "(" + e->a + ")";
  case TOp::RoleAssert: return e->name + "(" + e->a + "," + e->b + ")";
  case TOp::Some: return "(E " + e->name + " . " + render(e->lhs) + ")";
  case TOp::All: return "(A " + e->name + " . " + render(e->lhs) + ")";
  case TOp::Not: return "!" + render(e->lhs);
  case TOp::Next: return "X " + render(e->lhs);
  case TOp::WeakNext: return "N " + render(e->lhs);
  case TOp::Eventually: return "F " + render(e->lhs);
  case TOp::EventuallyPlus: return "F+ " + render(e->lhs);
  case TOp::Always: return "G " + render(e->lhs);
  case TOp::AlwaysPlus: return "G+ " + render(e->lhs);
  default: break;
  }
  static const std::map<TOp, std::string> sym = {
      {TOp::And, "&"}, {TOp::Or, "|"}, {TOp::Implies, "->"}, {TOp::Iff, "<->"}, {TOp::Until, "U"},
      {TOp::Release, "R"}, {TOp::UntilPlus, "U+"}, {TOp::ReleasePlus, "R+"}};
  return "(" + render(e->lhs) + " " + sym.at(e->op) + " " + render(e->rhs) + ")";
}

inline std::string render(const Problem& p) {
  std::string out = "global {";
  for (const auto& ci : p.tbox) out += " " + render(ci.lhs) + " [= " + render(ci.rhs) + ";";
  out += " } assert { " + render(p.psi) + " }";
  return out;
}

inline std::size_t size(const TExpr& e) {
  if (!e) return 0;
  return 1 + size(e->lhs) + size(e->rhs);
}
inline std::size_t size(const Problem& p) {
  std::size_t n = size(p.psi);
  for (const auto& ci : p.tbox) n += 1 + size(ci.lhs) + size(ci.rhs);
  return n;
}

// ---------------------------------------------------------------------------
// Sorts and signature

namespace detail {

inline bool concept_op(TOp op) { return op == TOp::Name || op == TOp::Some || op == TOp::All; }
inline bool formula_op(TOp op) { return op == TOp::Assert || op == TOp::RoleAssert; }

inline void check_sort(const TExpr& e, bool formula) {
  if (!e) throw Error("malformed expression");
  if (formula && concept_op(e->op)) throw Error("concept where a formula is expected: " + render(e));
  if (!formula && formula_op(e->op)) throw Error("assertion where a concept is expected: " + render(e));
  if (e->op == TOp::Some || e->op == TOp::All) {
    check_sort(e->lhs, false);
    return;
  }
  if (e->lhs) check_sort(e->lhs, formula);
  if (e->rhs) check_sort(e->rhs, formula);
}

} // namespace detail

struct TalcSignature {
  std::set<std::string> concepts, roles, individuals;
};

inline void collect(const TExpr& e, TalcSignature& s) {
  if (!e) return;
  switch (e->op) {
  case TOp::Name: s.concepts.insert(e->name); break;
  case TOp::Some: case TOp::All: s.roles.insert(e->name); break;
  case TOp::Assert: s.concepts.insert(e->name); s.individuals.insert(e->a); break;
  case TOp::RoleAssert: s.roles.insert(e->name); s.individuals.insert(e->a); s.individuals.insert(e->b); break;
  default: break;
  }
  collect(e->lhs, s);
  collect(e->rhs, s);
}

inline TalcSignature signature_of(const Problem& p) {
  TalcSignature s;
  for (const auto& ci : p.tbox) {
    collect(ci.lhs, s);
    collect(ci.rhs, s);
  }
  collect(p.psi, s);
  return s;
}

inline void validate(const Problem& p) {
  for (const auto& ci : p.tbox) {
    detail::check_sort(ci.lhs, false);
    detail::check_sort(ci.rhs, false);
  }
  detail::check_sort(p.psi, true);
  TalcSignature s = signature_of(p);
  for (const auto& c : s.concepts)
    if (s.roles.count(c) || s.individuals.count(c)) throw Error("identifier class clash: " + c);
  for (const auto& r : s.roles)
    if (s.individuals.count(r)) throw Error("identifier class clash: " + r);
  for (const auto& a : s.individuals)
    if (a == "x" || a == "y") throw Error("individual name reserved for the translation: " + a);
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

using ftl::detail::Tok;
using ftl::detail::Token;

class TalcParser {
public:
  TalcParser(std::string_view src, bool formula) : toks_(ftl::detail::Lexer(src).run()), formula_(formula) {}

  TExpr parse_all() {
    TExpr e = parse_iff();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return e;
  }

private:
  std::vector<Token> toks_;
  bool formula_;
  std::size_t pos_ = 0;

  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token take() { return toks_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const std::string& m) const { throw ParseError(m, peek().line, peek().col); }

  TExpr parse_iff() {
    TExpr a = parse_imp();
    if (accept(Tok::Iff)) return mk(TOp::Iff, a, parse_iff());
    return a;
  }
  TExpr parse_imp() {
    TExpr a = parse_or();
    if (accept(Tok::Implies)) return mk(TOp::Implies, a, parse_imp());
    return a;
  }
  TExpr parse_or() {
    TExpr a = parse_and();
    while (accept(Tok::Or)) a = tor(a, parse_and());
    return a;
  }
  TExpr parse_and() {
    TExpr a = parse_temporal();
    while (accept(Tok::And)) a = tand(a, parse_temporal());
    return a;
  }
  TExpr parse_temporal() {
    TExpr a = parse_unary();
    switch (peek().kind) {
    case Tok::Until: ++pos_; return mk(TOp::Until, a, parse_temporal());
    case Tok::Release: ++pos_; return mk(TOp::Release, a, parse_temporal());
    case Tok::UntilPlus: ++pos_; return mk(TOp::UntilPlus, a, parse_temporal());
    case Tok::ReleasePlus: ++pos_; return mk(TOp::ReleasePlus, a, parse_temporal());
    default: return a;
    }
  }
  bool at_role_quantifier() const {
    const Token& t = peek();
    bool kw = t.kind == Tok::Exists || t.kind == Tok::Forall ||
              (t.kind == Tok::Ident && (t.text == "E" || t.text == "A"));
    return kw && peek(1).kind == Tok::Ident && peek(2).kind == Tok::Dot;
  }
  TExpr parse_unary() {
    switch (peek().kind) {
    case Tok::Not: ++pos_; return tnot(parse_unary());
    case Tok::Next: ++pos_; return mk(TOp::Next, parse_unary());
    case Tok::WeakNext: ++pos_; return mk(TOp::WeakNext, parse_unary());
    case Tok::Eventually: ++pos_; return mk(TOp::Eventually, parse_unary());
    case Tok::EventuallyPlus: ++pos_; return mk(TOp::EventuallyPlus, parse_unary());
    case Tok::Always: ++pos_; return mk(TOp::Always, parse_unary());
    case Tok::AlwaysPlus: ++pos_; return mk(TOp::AlwaysPlus, parse_unary());
    default: break;
    }
    if (at_role_quantifier()) {
      if (formula_) fail("role quantifier outside a concept");
      Token q = take();
      bool ex = q.kind == Tok::Exists || q.text == "E";
      std::string role = take().text;
      take();
      TExpr body = parse_iff();
      return ex ? some(role, body) : all(role, body);
    }
    return parse_primary();
  }
  TExpr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
    case Tok::True: ++pos_; return ttop();
    case Tok::False: ++pos_; return tbot();
    case Tok::Last: ++pos_; return mk(TOp::Last);
    case Tok::LParen: {
      ++pos_;
      TExpr e = parse_iff();
      if (!accept(Tok::RParen)) fail("expected ')'");
      return e;
    }
    case Tok::Ident: {
      std::string name = take().text;
      if (!formula_) {
        if (peek().kind == Tok::LParen) fail("assertion inside a concept");
        return cname(name);
      }
      if (!accept(Tok::LParen)) fail("expected '(' after " + name);
      if (peek().kind != Tok::Ident) fail("expected individual");
      std::string a = take().text;
      if (accept(Tok::Comma)) {
        if (peek().kind != Tok::Ident) fail("expected individual");
        std::string b = take().text;
        if (!accept(Tok::RParen)) fail("expected ')'");
        return role_assertion(name, a, b);
      }
      if (!accept(Tok::RParen)) fail("expected ')'");
      return assertion(name, a);
    }
    default:
      fail(t.kind == Tok::End ? "unexpected end of input" : "unexpected '" + t.text + "'");
    }
  }
};

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Body of `keyword { ... }`, or nullopt if the keyword is absent.
inline std::optional<std::string> block(const std::string& src, const std::string& keyword, std::size_t& end) {
  std::size_t p = 0;
  for (;;) {
    p = src.find(keyword, p);
    if (p == std::string::npos) return std::nullopt;
    bool left = p == 0 || !(std::isalnum(static_cast<unsigned char>(src[p - 1])) || src[p - 1] == '_');
    std::size_t q = p + keyword.size();
    while (q < src.size() && std::isspace(static_cast<unsigned char>(src[q]))) ++q;
    if (left && q < src.size() && src[q] == '{') {
      std::size_t close = src.find('}', q);
      if (close == std::string::npos) throw ParseError("unterminated " + keyword + " block", 1, 1);
      end = close + 1;
      return src.substr(q + 1, close - q - 1);
    }
    p += keyword.size();
  }
}

} // namespace detail

inline TExpr parse_concept(std::string_view src) { return detail::TalcParser(src, false).parse_all(); }
inline TExpr parse_talc_formula(std::string_view src) { return detail::TalcParser(src, true).parse_all(); }

inline Ci parse_ci(const std::string& src) {
  std::size_t p = src.find("[=");
  std::size_t w = 2;
  if (p == std::string::npos) {
    p = src.find("⊑");
    w = std::string("⊑").size();
  }
  if (p == std::string::npos) throw ParseError("expected '[=' in concept inclusion: " + src, 1, 1);
  return {parse_concept(src.substr(0, p)), parse_concept(src.substr(p + w))};
}

// global { C [= D; ... } assert { formula }; either block may be omitted.
inline Problem parse_problem(const std::string& raw) {
  std::string src;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '#')
      while (i < raw.size() && raw[i] != '\n') ++i;
    if (i < raw.size()) src += raw[i];
  }
  Problem p;
  std::size_t end_g = 0, end_a = 0;
  auto g = detail::block(src, "global", end_g);
  auto a = detail::block(src, "assert", end_a);
  if (!g && !a) throw ParseError("expected 'global { ... }' or 'assert { ... }'", 1, 1);
  if (g) {
    std::size_t b = 0;
    while (b <= g->size()) {
      std::size_t e = g->find(';', b);
      if (e == std::string::npos) e = g->size();
      std::string part = detail::trim(std::string_view(*g).substr(b, e - b));
      if (!part.empty()) p.tbox.push_back(parse_ci(part));
      b = e + 1;
    }
  }
  if (a) {
    std::string body = detail::trim(*a);
    if (!body.empty()) p.psi = parse_talc_formula(body);
  }
  std::string rest = src;
  auto blank = [&](std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to; ++i) rest[i] = ' ';
  };
  if (g) blank(src.find("global"), end_g);
  if (a) blank(src.rfind("assert", end_a), end_a);
  if (!detail::trim(rest).empty()) throw ParseError("unexpected text outside blocks: " + detail::trim(rest), 1, 1);
  validate(p);
  return p;
}

// ---------------------------------------------------------------------------
// Abbreviations and the first-order embedding

// Rewrites into Name, Top, Bottom, Not, And, Some, Until, Assert, RoleAssert.
inline TExpr core(const TExpr& e) {
  auto n = [](TExpr x) { return tnot(std::move(x)); };
  switch (e->op) {
  case TOp::Name: case TOp::Top: case TOp::Bottom: case TOp::Assert: case TOp::RoleAssert:
    return e;
  case TOp::Not: return n(core(e->lhs));
  case TOp::And: return tand(core(e->lhs), core(e->rhs));
  case TOp::Some: return some(e->name, core(e->lhs));
  case TOp::Until: return tuntil(core(e->lhs), core(e->rhs));
  default: break;
  }
  TExpr a = e->lhs ? core(e->lhs) : nullptr;
  TExpr b = e->rhs ? core(e->rhs) : nullptr;
  switch (e->op) {
  case TOp::Or: return n(tand(n(a), n(b)));
  case TOp::Implies: return n(tand(a, n(b)));
  case TOp::Iff: return tand(n(tand(a, n(b))), n(tand(b, n(a))));
  case TOp::All: return n(some(e->name, n(a)));
  case TOp::Release: return n(tuntil(n(a), n(b)));
  case TOp::UntilPlus: return n(tand(n(b), n(tand(a, tuntil(a, b)))));
  case TOp::ReleasePlus: return tand(b, n(tand(n(a), n(n(tuntil(n(a), n(b)))))));
  case TOp::Next: return tuntil(tbot(), a);
  case TOp::WeakNext: return n(tuntil(n(ttop()), n(a)));
  case TOp::Eventually: return tuntil(ttop(), a);
  case TOp::EventuallyPlus: return n(tand(n(a), n(tuntil(ttop(), a))));
  case TOp::Always: return n(tuntil(n(tbot()), n(a)));
  case TOp::AlwaysPlus: return tand(a, n(tuntil(n(tbot()), n(a))));
  case TOp::Last: return n(tuntil(n(tbot()), n(tbot())));
  default: throw Error("core: unexpected operator");
  }
}

namespace detail {

inline Formula fo_op(TOp op, Formula a, Formula b) {
  switch (op) {
  case TOp::Not: return neg(a);
  case TOp::And: return conj(a, b);
  case TOp::Or: return disj(a, b);
  case TOp::Implies: return implies(a, b);
  case TOp::Iff: return iff(a, b);
  case TOp::Until: return until(a, b);
  case TOp::Release: return release(a, b);
  case TOp::UntilPlus: return until_plus(a, b);
  case TOp::ReleasePlus: return release_plus(a, b);
  case TOp::Next: return next(a);
  case TOp::WeakNext: return wnext(a);
  case TOp::Eventually: return eventually(a);
  case TOp::EventuallyPlus: return eventually_plus(a);
  case TOp::Always: return always(a);
  case TOp::AlwaysPlus: return always_plus(a);
  default: throw Error("fo_op: unexpected operator");
  }
}

} // namespace detail

// Standard translation with two alternating variables.
inline Formula to_fo_concept(const TExpr& c, const std::string& x) {
  std::string y = x == "x" ? "y" : "x";
  switch (c->op) {
  case TOp::Name: return atom(c->name, {var(x)});
  case TOp::Top: return top();
  case TOp::Bottom: return bot();
  case TOp::Last: return last();
  case TOp::Some: return exists(y, conj(atom(c->name, {var(x), var(y)}), to_fo_concept(c->lhs, y)));
  case TOp::All: return forall(y, implies(atom(c->name, {var(x), var(y)}), to_fo_concept(c->lhs, y)));
  default:
    return detail::fo_op(c->op, to_fo_concept(c->lhs, x), c->rhs ? to_fo_concept(c->rhs, x) : nullptr);
  }
}

inline Formula to_fo_formula(const TExpr& f) {
  switch (f->op) {
  case TOp::Assert: return atom(f->name, {cst(f->a)});
  case TOp::RoleAssert: return atom(f->name, {cst(f->a), cst(f->b)});
  case TOp::Top: return top();
  case TOp::Bottom: return bot();
  case TOp::Last: return last();
  default:
    return detail::fo_op(f->op, to_fo_formula(f->lhs), f->rhs ? to_fo_formula(f->rhs) : nullptr);
  }
}

inline Formula to_fo(const Ci& ci) { return forall("x", implies(to_fo_concept(ci.lhs, "x"), to_fo_concept(ci.rhs, "x"))); }

// G+ (conjunction of CIs) & psi.
inline Formula to_fo(const Problem& p) {
  Formula psi = to_fo_formula(p.psi);
  if (p.tbox.empty()) return psi;
  std::vector<Formula> cis;
  for (const auto& ci : p.tbox) cis.push_back(to_fo(ci));
  return conj(always_plus(conj_all(cis)), psi);
}

// ---------------------------------------------------------------------------
// Closure

using TType = boost::dynamic_bitset<>;

struct TalcClosure {
  enum Kind { Name, Top, Bottom, Not, And, Some, Until, Assert, RoleAssert };
  struct CNode {
    Kind kind;
    std::string name; // concept or role
    int a = -1, b = -1;
  };
  struct FNode {
    Kind kind;
    std::string name;
    int ind_a = -1, ind_b = -1; // individuals of assertions
    int cnode = -1;             // concept node of an Assert
    int a = -1, b = -1;
  };

  Problem problem;
  std::vector<std::string> individuals, roles, concept_names;
  std::vector<std::string> fresh;     // A_a per individual
  bool fresh_individual = false;
  TExpr ct;                           // C_T, core form
  TExpr psi;                          // psi with the fresh assertion, core form
  std::vector<CNode> cnodes;
  std::vector<std::string> ckeys;
  std::vector<FNode> fnodes;
  std::vector<std::string> fkeys;
  int ct_node = -1, root = -1;
  std::vector<int> cbases, fbases, cuntils, funtils, somes;

  std::size_t concept_count() const { return cnodes.size(); }
  std::size_t formula_count() const { return fnodes.size(); }
  int individual_index(const std::string& a) const {
    auto it = std::find(individuals.begin(), individuals.end(), a);
    return it == individuals.end() ? -1 : static_cast<int>(it - individuals.begin());
  }
  int concept_node(const std::string& key) const {
    auto it = std::find(ckeys.begin(), ckeys.end(), key);
    return it == ckeys.end() ? -1 : static_cast<int>(it - ckeys.begin());
  }
  int formula_node(const std::string& key) const {
    auto it = std::find(fkeys.begin(), fkeys.end(), key);
    return it == fkeys.end() ? -1 : static_cast<int>(it - fkeys.begin());
  }
};

namespace detail {

inline std::string fresh_name(const std::string& base, const TalcSignature& s, const std::set<std::string>& taken) {
  std::string n = base;
  while (s.concepts.count(n) || s.roles.count(n) || s.individuals.count(n) || taken.count(n)) n += "_";
  return n;
}

inline int add_concept(TalcClosure& c, const TExpr& e, std::map<std::string, int>& index) {
  std::string key = render(e);
  if (auto it = index.find(key); it != index.end()) return it->second;
  TalcClosure::CNode n{};
  switch (e->op) {
  case TOp::Name: n.kind = TalcClosure::Name; n.name = e->name; break;
  case TOp::Top: n.kind = TalcClosure::Top; break;
  case TOp::Bottom: n.kind = TalcClosure::Bottom; break;
  case TOp::Not: n.kind = TalcClosure::Not; n.a = add_concept(c, e->lhs, index); break;
  case TOp::And:
    n.kind = TalcClosure::And;
    n.a = add_concept(c, e->lhs, index);
    n.b = add_concept(c, e->rhs, index);
    break;
  case TOp::Some: n.kind = TalcClosure::Some; n.name = e->name; n.a = add_concept(c, e->lhs, index); break;
  case TOp::Until:
    n.kind = TalcClosure::Until;
    n.a = add_concept(c, e->lhs, index);
    n.b = add_concept(c, e->rhs, index);
    break;
  default: throw Error("closure: not a core concept: " + key);
  }
  int id = static_cast<int>(c.cnodes.size());
  c.cnodes.push_back(n);
  c.ckeys.push_back(key);
  index.emplace(key, id);
  return id;
}

inline int add_formula(TalcClosure& c, const TExpr& e, std::map<std::string, int>& index,
                       std::map<std::string, int>& cindex) {
  std::string key = render(e);
  if (auto it = index.find(key); it != index.end()) return it->second;
  TalcClosure::FNode n{};
  switch (e->op) {
  case TOp::Assert:
    n.kind = TalcClosure::Assert;
    n.name = e->name;
    n.ind_a = c.individual_index(e->a);
    n.cnode = add_concept(c, cname(e->name), cindex);
    break;
  case TOp::RoleAssert:
    n.kind = TalcClosure::RoleAssert;
    n.name = e->name;
    n.ind_a = c.individual_index(e->a);
    n.ind_b = c.individual_index(e->b);
    break;
  case TOp::Top: n.kind = TalcClosure::Top; break;
  case TOp::Bottom: n.kind = TalcClosure::Bottom; break;
  case TOp::Not: n.kind = TalcClosure::Not; n.a = add_formula(c, e->lhs, index, cindex); break;
  case TOp::And:
    n.kind = TalcClosure::And;
    n.a = add_formula(c, e->lhs, index, cindex);
    n.b = add_formula(c, e->rhs, index, cindex);
    break;
  case TOp::Until:
    n.kind = TalcClosure::Until;
    n.a = add_formula(c, e->lhs, index, cindex);
    n.b = add_formula(c, e->rhs, index, cindex);
    break;
  default: throw Error("closure: not a core formula: " + key);
  }
  int id = static_cast<int>(c.fnodes.size());
  c.fnodes.push_back(n);
  c.fkeys.push_back(key);
  index.emplace(key, id);
  return id;
}

} // namespace detail

// cl^c and cl^f as node lists; negations are complements of positive nodes.
inline TalcClosure closure_talc(const Problem& p) {
  validate(p);
  TalcClosure c;
  c.problem = p;
  TalcSignature s = signature_of(p);
  c.individuals.assign(s.individuals.begin(), s.individuals.end());
  c.roles.assign(s.roles.begin(), s.roles.end());
  std::set<std::string> taken;
  TExpr psi = p.psi;
  if (c.individuals.empty()) {
    std::string a = detail::fresh_name("a", s, taken);
    taken.insert(a);
    c.individuals.push_back(a);
    c.fresh_individual = true;
  }
  for (const auto& a : c.individuals) {
    std::string n = detail::fresh_name("A_" + a, s, taken);
    taken.insert(n);
    c.fresh.push_back(n);
  }
  if (c.fresh_individual) psi = tand(psi, assertion(c.fresh[0], c.individuals[0]));

  std::vector<TExpr> parts;
  for (const auto& ci : p.tbox) parts.push_back(tor(tnot(ci.lhs), ci.rhs));
  TExpr ct = ttop();
  if (!parts.empty()) {
    ct = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) ct = tand(ct, parts[i]);
  }
  c.ct = core(ct);
  c.psi = core(psi);

  std::map<std::string, int> cindex, findex;
  c.ct_node = detail::add_concept(c, c.ct, cindex);
  c.root = detail::add_formula(c, c.psi, findex, cindex);
  for (std::size_t i = 0; i < c.individuals.size(); ++i) {
    detail::add_concept(c, cname(c.fresh[i]), cindex);
    for (const auto& r : c.roles) detail::add_concept(c, some(r, cname(c.fresh[i])), cindex);
  }
  for (const auto& n : s.concepts) detail::add_concept(c, cname(n), cindex);
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.cnodes.size(); ++i) {
    const auto& n = c.cnodes[i];
    if (n.kind == TalcClosure::Name) names.insert(n.name);
    if (n.kind == TalcClosure::Name || n.kind == TalcClosure::Some || n.kind == TalcClosure::Until)
      c.cbases.push_back(static_cast<int>(i));
    if (n.kind == TalcClosure::Until) c.cuntils.push_back(static_cast<int>(i));
    if (n.kind == TalcClosure::Some) c.somes.push_back(static_cast<int>(i));
  }
  c.concept_names.assign(names.begin(), names.end());
  for (std::size_t i = 0; i < c.fnodes.size(); ++i) {
    const auto& n = c.fnodes[i];
    if (n.kind == TalcClosure::Assert || n.kind == TalcClosure::RoleAssert || n.kind == TalcClosure::Until)
      c.fbases.push_back(static_cast<int>(i));
    if (n.kind == TalcClosure::Until) c.funtils.push_back(static_cast<int>(i));
  }
  return c;
}

// Full membership vector from a valuation of the bases (T1-T2 by construction).
inline TType concept_type_bits(const TalcClosure& c, std::uint64_t val) {
  TType t(c.cnodes.size());
  for (std::size_t i = 0; i < c.cbases.size(); ++i)
    if (val >> i & 1) t.set(static_cast<std::size_t>(c.cbases[i]));
  for (std::size_t i = 0; i < c.cnodes.size(); ++i) {
    const auto& n = c.cnodes[i];
    switch (n.kind) {
    case TalcClosure::Top: t.set(i); break;
    case TalcClosure::Not: t[i] = !t[static_cast<std::size_t>(n.a)]; break;
    case TalcClosure::And: t[i] = t[static_cast<std::size_t>(n.a)] && t[static_cast<std::size_t>(n.b)]; break;
    default: break;
    }
  }
  return t;
}

inline TType formula_type_bits(const TalcClosure& c, std::uint64_t val) {
  TType t(c.fnodes.size());
  for (std::size_t i = 0; i < c.fbases.size(); ++i)
    if (val >> i & 1) t.set(static_cast<std::size_t>(c.fbases[i]));
  for (std::size_t i = 0; i < c.fnodes.size(); ++i) {
    const auto& n = c.fnodes[i];
    switch (n.kind) {
    case TalcClosure::Top: t.set(i); break;
    case TalcClosure::Not: t[i] = !t[static_cast<std::size_t>(n.a)]; break;
    case TalcClosure::And: t[i] = t[static_cast<std::size_t>(n.a)] && t[static_cast<std::size_t>(n.b)]; break;
    default: break;
    }
  }
  return t;
}

struct ConceptType {
  TType bits;
  int individual = -1; // at most one individual
  friend bool operator==(const ConceptType& x, const ConceptType& y) {
    return x.bits == y.bits && x.individual == y.individual;
  }
};

// T1-T3 for concept types.
inline bool is_concept_type(const TalcClosure& c, const ConceptType& t) {
  if (t.bits.size() != c.cnodes.size()) return false;
  if (t.individual < -1 || t.individual >= static_cast<int>(c.individuals.size())) return false;
  for (std::size_t i = 0; i < c.cnodes.size(); ++i) {
    const auto& n = c.cnodes[i];
    bool v = t.bits[i];
    if (n.kind == TalcClosure::Top && !v) return false;
    if (n.kind == TalcClosure::Bottom && v) return false;
    if (n.kind == TalcClosure::Not && v == t.bits[static_cast<std::size_t>(n.a)]) return false;
    if (n.kind == TalcClosure::And && v != (t.bits[static_cast<std::size_t>(n.a)] && t.bits[static_cast<std::size_t>(n.b)]))
      return false;
  }
  return true;
}

inline bool is_formula_type(const TalcClosure& c, const TType& t) {
  if (t.size() != c.fnodes.size()) return false;
  for (std::size_t i = 0; i < c.fnodes.size(); ++i) {
    const auto& n = c.fnodes[i];
    bool v = t[i];
    if (n.kind == TalcClosure::Top && !v) return false;
    if (n.kind == TalcClosure::Bottom && v) return false;
    if (n.kind == TalcClosure::Not && v == t[static_cast<std::size_t>(n.a)]) return false;
    if (n.kind == TalcClosure::And && v != (t[static_cast<std::size_t>(n.a)] && t[static_cast<std::size_t>(n.b)]))
      return false;
  }
  return true;
}

// {not F : not E R.F in t} is contained in t'.
inline bool r_compatible(const TalcClosure& c, const TType& t, const TType& t2, const std::string& role) {
  for (int s : c.somes) {
    const auto& n = c.cnodes[static_cast<std::size_t>(s)];
    if (n.name == role && !t[static_cast<std::size_t>(s)] && t2[static_cast<std::size_t>(n.a)]) return false;
  }
  return true;
}

// aUb in t iff b in t' or {a, aUb} in t'.
inline bool u_compatible_concept(const TalcClosure& c, const TType& t, const TType& t2) {
  for (int u : c.cuntils) {
    const auto& n = c.cnodes[static_cast<std::size_t>(u)];
    bool want = t2[static_cast<std::size_t>(n.b)] || (t2[static_cast<std::size_t>(n.a)] && t2[static_cast<std::size_t>(u)]);
    if (t[static_cast<std::size_t>(u)] != want) return false;
  }
  return true;
}

inline bool u_compatible_formula(const TalcClosure& c, const TType& t, const TType& t2) {
  for (int u : c.funtils) {
    const auto& n = c.fnodes[static_cast<std::size_t>(u)];
    bool want = t2[static_cast<std::size_t>(n.b)] || (t2[static_cast<std::size_t>(n.a)] && t2[static_cast<std::size_t>(u)]);
    if (t[static_cast<std::size_t>(u)] != want) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Quasimodels

struct TalcQuasistate {
  TType formula;
  std::vector<ConceptType> concepts;
};

struct TalcQuasimodel {
  std::shared_ptr<const TalcClosure> closure;
  std::vector<TalcQuasistate> states;
  std::vector<std::vector<std::size_t>> runs; // indices into states[i].concepts
  std::size_t length() const { return states.size(); }
};

// Empty string iff Q1-Q6, R1-R2 and M1-M2 hold.
inline std::string verify_talc_quasimodel(const TalcQuasimodel& q) {
  if (!q.closure) return "no closure";
  const TalcClosure& c = *q.closure;
  if (q.states.empty()) return "no quasistates";
  std::size_t n = q.states.size(), m = c.individuals.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& S = q.states[i];
    std::string at = " at instant " + std::to_string(i);
    if (!is_formula_type(c, S.formula)) return "Q1: formula type is not a type" + at;
    std::vector<int> named(m, -1);
    for (std::size_t j = 0; j < S.concepts.size(); ++j) {
      const auto& t = S.concepts[j];
      if (!is_concept_type(c, t)) return "concept type " + std::to_string(j) + " is not a type" + at;
      if (!t.bits[static_cast<std::size_t>(c.ct_node)]) return "Q3: C_T missing from a concept type" + at;
      if (t.individual >= 0) {
        if (named[static_cast<std::size_t>(t.individual)] >= 0)
          return "Q2: two types named " + c.individuals[static_cast<std::size_t>(t.individual)] + at;
        named[static_cast<std::size_t>(t.individual)] = static_cast<int>(j);
      }
    }
    for (std::size_t a = 0; a < m; ++a)
      if (named[a] < 0) return "Q2: no type named " + c.individuals[a] + at;
    auto ta = [&](int ind) -> const TType& {
      return S.concepts[static_cast<std::size_t>(named[static_cast<std::size_t>(ind)])].bits;
    };
    for (std::size_t k = 0; k < c.fnodes.size(); ++k) {
      const auto& f = c.fnodes[k];
      if (f.kind == TalcClosure::Assert && S.formula[k] != ta(f.ind_a)[static_cast<std::size_t>(f.cnode)])
        return "Q4: " + c.fkeys[k] + at;
      if (f.kind == TalcClosure::RoleAssert && S.formula[k] != r_compatible(c, ta(f.ind_a), ta(f.ind_b), f.name))
        return "Q6: " + c.fkeys[k] + at;
    }
    for (const auto& t : S.concepts)
      for (int s : c.somes) {
        const auto& sn = c.cnodes[static_cast<std::size_t>(s)];
        if (!t.bits[static_cast<std::size_t>(s)]) continue;
        bool ok = std::any_of(S.concepts.begin(), S.concepts.end(), [&](const ConceptType& u) {
          return u.bits[static_cast<std::size_t>(sn.a)] && r_compatible(c, t.bits, u.bits, sn.name);
        });
        if (!ok) return "Q5: no witness for " + c.ckeys[static_cast<std::size_t>(s)] + at;
      }
  }
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!u_compatible_formula(c, q.states[i].formula, q.states[i + 1].formula))
      return "R2: formula run not U-compatible at " + std::to_string(i);
  for (int u : c.funtils)
    if (q.states[n - 1].formula[static_cast<std::size_t>(u)]) return "R2: until in the last formula type";
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::vector<bool>> covered(n);
  for (std::size_t i = 0; i < n; ++i) covered[i].assign(q.states[i].concepts.size(), false);
  for (std::size_t r = 0; r < q.runs.size(); ++r) {
    const auto& run = q.runs[r];
    std::string rn = "run " + std::to_string(r);
    if (run.size() != n) return rn + " has the wrong length";
    if (!seen.insert(run).second) return rn + " is a duplicate";
    for (std::size_t i = 0; i < n; ++i) {
      if (run[i] >= q.states[i].concepts.size()) return rn + " leaves the quasistate at " + std::to_string(i);
      covered[i][run[i]] = true;
    }
    int ind = q.states[0].concepts[run[0]].individual;
    for (std::size_t i = 0; i < n; ++i)
      if (q.states[i].concepts[run[i]].individual != ind) return "R1: " + rn + " changes its individual";
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (!u_compatible_concept(c, q.states[i].concepts[run[i]].bits, q.states[i + 1].concepts[run[i + 1]].bits))
        return "R2: " + rn + " not U-compatible at " + std::to_string(i);
    for (int u : c.cuntils)
      if (q.states[n - 1].concepts[run[n - 1]].bits[static_cast<std::size_t>(u)]) return "R2: " + rn + " ends with an until";
  }
  if (!q.states[0].formula[static_cast<std::size_t>(c.root)]) return "M1: psi not in the first formula type";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < covered[i].size(); ++j)
      if (!covered[i][j]) return "M2: concept type " + std::to_string(j) + " at " + std::to_string(i) + " is on no run";
  return {};
}

// Domain = runs, concept names from membership, role edges = R-compatible pairs.
inline Trace extract_talc_model(const TalcQuasimodel& q) {
  std::string err = verify_talc_quasimodel(q);
  if (!err.empty()) throw Error("extract_talc_model: " + err);
  const TalcClosure& c = *q.closure;
  Trace t;
  t.domain = default_domain(q.runs.size());
  for (std::size_t a = 0; a < c.individuals.size(); ++a)
    for (std::size_t r = 0; r < q.runs.size(); ++r)
      if (q.states[0].concepts[q.runs[r][0]].individual == static_cast<int>(a))
        t.constants[c.individuals[a]] = static_cast<int>(r);
  for (std::size_t i = 0; i < q.states.size(); ++i) {
    State s;
    auto type = [&](std::size_t r) -> const TType& { return q.states[i].concepts[q.runs[r][i]].bits; };
    for (std::size_t k = 0; k < c.cnodes.size(); ++k) {
      if (c.cnodes[k].kind != TalcClosure::Name) continue;
      for (std::size_t r = 0; r < q.runs.size(); ++r)
        if (type(r)[k]) s.ext[c.cnodes[k].name].insert(Tuple{static_cast<int>(r)});
    }
    for (const auto& role : c.roles)
      for (std::size_t r1 = 0; r1 < q.runs.size(); ++r1)
        for (std::size_t r2 = 0; r2 < q.runs.size(); ++r2)
          if (r_compatible(c, type(r1), type(r2), role))
            s.ext[role].insert(Tuple{static_cast<int>(r1), static_cast<int>(r2)});
    t.states.push_back(std::move(s));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Type elimination

namespace detail {

class Eliminator {
public:
  Eliminator(std::shared_ptr<const TalcClosure> c, Budget& budget) : c_(std::move(c)), budget_(budget) {
    const TalcClosure& c0 = *c_;
    if (c0.cbases.size() > 16) throw Error("too many concept bases for type elimination");
    if (c0.fbases.size() > 16) throw Error("too many formula bases for type elimination");
    if (c0.cuntils.size() > 63 || c0.funtils.size() > 63 || c0.somes.size() > 20) throw Error("closure too large");
    m_ = c0.individuals.size();
    slots_ = m_ + 1;
    nv_ = std::size_t{1} << c0.cbases.size();
    nw_ = std::size_t{1} << c0.fbases.size();
    for (std::size_t v = 0; v < nv_; ++v) {
      TType t = concept_type_bits(c0, v);
      cumask_.push_back(until_mask(t, c0.cuntils));
      creq_.push_back(required(t, c0.cnodes, c0.cuntils));
      ct_ok_.push_back(t[static_cast<std::size_t>(c0.ct_node)]);
      cbits_.push_back(std::move(t));
    }
    for (std::size_t w = 0; w < nw_; ++w) {
      TType t = formula_type_bits(c0, w);
      fumask_.push_back(until_mask(t, c0.funtils));
      freq_.push_back(required(t, c0.fnodes, c0.funtils));
      fbits_.push_back(std::move(t));
    }
  }

  std::optional<TalcQuasimodel> run(std::size_t l) {
    l_ = l;
    eliminate();
    std::vector<Fn> path;
    path.reserve(l + 1);
    feasible_.assign(l + 1, {});
    if (!select(0, nullptr, path)) return std::nullopt;
    return build(path);
  }

private:
  struct Fn {
    std::size_t w;
    std::vector<std::size_t> named;
  };

  std::shared_ptr<const TalcClosure> c_;
  Budget& budget_;
  std::size_t m_, slots_, nv_, nw_, l_ = 0;
  std::vector<TType> cbits_, fbits_;
  std::vector<std::uint64_t> cumask_, creq_, fumask_, freq_;
  std::vector<char> ct_ok_;
  std::vector<std::vector<char>> alive_; // [level][v * slots + slot]; slot 0 unnamed, j+1 individual j
  std::vector<std::map<std::vector<std::uint64_t>, bool>> feasible_; // per level, keyed by incoming masks

  static std::uint64_t until_mask(const TType& t, const std::vector<int>& untils) {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < untils.size(); ++i)
      if (t[static_cast<std::size_t>(untils[i])]) m |= std::uint64_t{1} << i;
    return m;
  }
  // Until mask a predecessor must carry for U-compatibility with t.
  template <class N>
  static std::uint64_t required(const TType& t, const std::vector<N>& nodes, const std::vector<int>& untils) {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < untils.size(); ++i) {
      const auto& n = nodes[static_cast<std::size_t>(untils[i])];
      if (t[static_cast<std::size_t>(n.b)] || (t[static_cast<std::size_t>(n.a)] && t[static_cast<std::size_t>(untils[i])]))
        m |= std::uint64_t{1} << i;
    }
    return m;
  }

  char& alive(std::size_t i, std::size_t v, std::size_t s) { return alive_[i][v * slots_ + s]; }

  void eliminate() {
    const TalcClosure& c = *c_;
    alive_.assign(l_ + 1, std::vector<char>(nv_ * slots_, 0));
    for (std::size_t i = 0; i <= l_; ++i)
      for (std::size_t v = 0; v < nv_; ++v) {
        bool ok = ct_ok_[v] && (i < l_ || cumask_[v] == 0);
        for (std::size_t s = 0; s < slots_; ++s) alive(i, v, s) = ok;
      }
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i <= l_; ++i) {
        budget_.charge(nv_);
        std::vector<char> any(nv_, 0);
        for (std::size_t v = 0; v < nv_; ++v)
          for (std::size_t s = 0; s < slots_; ++s) any[v] |= alive(i, v, s);
        std::unordered_map<std::uint64_t, bool> e1_cache;
        auto witness = [&](std::size_t v, std::size_t si) {
          const auto& sn = c.cnodes[static_cast<std::size_t>(c.somes[si])];
          std::uint64_t forbid = 0;
          for (std::size_t sj = 0; sj < c.somes.size(); ++sj) {
            const auto& o = c.cnodes[static_cast<std::size_t>(c.somes[sj])];
            if (o.name == sn.name && !cbits_[v][static_cast<std::size_t>(c.somes[sj])]) forbid |= std::uint64_t{1} << sj;
          }
          std::uint64_t key = (forbid << 6) | si;
          if (auto it = e1_cache.find(key); it != e1_cache.end()) return it->second;
          bool found = false;
          for (std::size_t u = 0; u < nv_ && !found; ++u) {
            if (!any[u] || !cbits_[u][static_cast<std::size_t>(sn.a)]) continue;
            bool ok = true;
            for (std::size_t sj = 0; sj < c.somes.size() && ok; ++sj)
              if (forbid >> sj & 1)
                ok = !cbits_[u][static_cast<std::size_t>(c.cnodes[static_cast<std::size_t>(c.somes[sj])].a)];
            found = ok;
          }
          e1_cache.emplace(key, found);
          return found;
        };
        std::vector<std::unordered_set<std::uint64_t>> prev(slots_), next(slots_);
        if (i > 0)
          for (std::size_t v = 0; v < nv_; ++v)
            for (std::size_t s = 0; s < slots_; ++s)
              if (alive(i - 1, v, s)) prev[s].insert(cumask_[v]);
        if (i < l_)
          for (std::size_t v = 0; v < nv_; ++v)
            for (std::size_t s = 0; s < slots_; ++s)
              if (alive(i + 1, v, s)) next[s].insert(creq_[v]);
        for (std::size_t v = 0; v < nv_; ++v) {
          if (!any[v]) continue;
          bool e1 = true;
          for (std::size_t si = 0; si < c.somes.size() && e1; ++si)
            if (cbits_[v][static_cast<std::size_t>(c.somes[si])]) e1 = witness(v, si);
          for (std::size_t s = 0; s < slots_; ++s) {
            if (!alive(i, v, s)) continue;
            bool ok = e1 && (i == 0 || prev[s].count(creq_[v])) && (i == l_ || next[s].count(cumask_[v]));
            if (!ok) {
              alive(i, v, s) = 0;
              changed = true;
            }
          }
        }
      }
    }
  }

  // Until masks of a function; the rest of a chain depends on nothing else.
  std::vector<std::uint64_t> masks(const Fn& fn) const {
    std::vector<std::uint64_t> k{fumask_[fn.w]};
    for (std::size_t v : fn.named) k.push_back(cumask_[v]);
    return k;
  }

  // Formula type functions chained from level i; lexicographically least first.
  bool select(std::size_t i, const std::vector<std::uint64_t>* prev, std::vector<Fn>& path) {
    const TalcClosure& c = *c_;
    for (std::size_t w = 0; w < nw_; ++w) {
      if (i == 0 && !fbits_[w][static_cast<std::size_t>(c.root)]) continue;
      if (i > 0 && (*prev)[0] != freq_[w]) continue;
      if (i == l_ && fumask_[w] != 0) continue;
      std::vector<std::vector<std::size_t>> cands(m_);
      bool empty = false;
      for (std::size_t a = 0; a < m_ && !empty; ++a) {
        for (std::size_t v = 0; v < nv_; ++v) {
          if (!alive(i, v, a + 1)) continue;
          if (i > 0 && (*prev)[a + 1] != creq_[v]) continue;
          bool ok = true;
          for (std::size_t k = 0; k < c.fnodes.size() && ok; ++k) {
            const auto& f = c.fnodes[k];
            if (f.kind == TalcClosure::Assert && f.ind_a == static_cast<int>(a))
              ok = fbits_[w][k] == cbits_[v][static_cast<std::size_t>(f.cnode)];
          }
          if (ok) cands[a].push_back(v);
        }
        empty = cands[a].empty();
      }
      if (empty) continue;
      Fn fn{w, std::vector<std::size_t>(m_)};
      if (choose(i, 0, cands, fn, path)) return true;
    }
    return false;
  }

  bool choose(std::size_t i, std::size_t a, const std::vector<std::vector<std::size_t>>& cands, Fn& fn,
              std::vector<Fn>& path) {
    const TalcClosure& c = *c_;
    if (a == m_) {
      budget_.charge();
      if (i == l_) {
        path.push_back(fn);
        return true;
      }
      auto key = masks(fn);
      auto& memo = feasible_[i + 1];
      if (auto it = memo.find(key); it != memo.end() && !it->second) return false;
      path.push_back(fn);
      bool ok = select(i + 1, &key, path);
      memo[key] = ok;
      if (!ok) path.pop_back();
      return ok;
    }
    for (std::size_t v : cands[a]) {
      fn.named[a] = v;
      bool ok = true;
      for (std::size_t k = 0; k < c.fnodes.size() && ok; ++k) {
        const auto& f = c.fnodes[k];
        if (f.kind != TalcClosure::RoleAssert) continue;
        std::size_t x = static_cast<std::size_t>(f.ind_a), y = static_cast<std::size_t>(f.ind_b);
        if (std::max(x, y) != a) continue;
        ok = fbits_[fn.w][k] == r_compatible(c, cbits_[fn.named[x]], cbits_[fn.named[y]], f.name);
      }
      if (ok && choose(i, a + 1, cands, fn, path)) return true;
    }
    return false;
  }

  TalcQuasimodel build(const std::vector<Fn>& path) {
    const TalcClosure& c = *c_;
    TalcQuasimodel q;
    q.closure = c_;
    std::vector<std::map<std::size_t, std::size_t>> unnamed(l_ + 1); // v -> index in concepts
    for (std::size_t i = 0; i <= l_; ++i) {
      TalcQuasistate S;
      S.formula = fbits_[path[i].w];
      for (std::size_t v = 0; v < nv_; ++v)
        if (alive(i, v, 0)) {
          unnamed[i][v] = S.concepts.size();
          S.concepts.push_back({cbits_[v], -1});
        }
      for (std::size_t a = 0; a < m_; ++a) S.concepts.push_back({cbits_[path[i].named[a]], static_cast<int>(a)});
      q.states.push_back(std::move(S));
    }
    for (std::size_t a = 0; a < m_; ++a) {
      std::vector<std::size_t> run;
      for (std::size_t i = 0; i <= l_; ++i) run.push_back(unnamed[i].size() + a);
      q.runs.push_back(run);
    }
    std::vector<std::set<std::size_t>> covered(l_ + 1);
    for (std::size_t i = 0; i <= l_; ++i)
      for (const auto& [v, idx] : unnamed[i]) {
        if (covered[i].count(v)) continue;
        std::vector<std::size_t> vs(l_ + 1);
        vs[i] = v;
        for (std::size_t j = i; j > 0; --j) {
          auto it = std::find_if(unnamed[j - 1].begin(), unnamed[j - 1].end(),
                                 [&](const auto& e) { return cumask_[e.first] == creq_[vs[j]]; });
          if (it == unnamed[j - 1].end()) throw Error("type elimination: unnamed type without predecessor");
          vs[j - 1] = it->first;
        }
        for (std::size_t j = i; j < l_; ++j) {
          auto it = std::find_if(unnamed[j + 1].begin(), unnamed[j + 1].end(),
                                 [&](const auto& e) { return creq_[e.first] == cumask_[vs[j]]; });
          if (it == unnamed[j + 1].end()) throw Error("type elimination: unnamed type without successor");
          vs[j + 1] = it->first;
        }
        std::vector<std::size_t> run;
        for (std::size_t j = 0; j <= l_; ++j) {
          covered[j].insert(vs[j]);
          run.push_back(unnamed[j].at(vs[j]));
        }
        if (std::find(q.runs.begin(), q.runs.end(), run) == q.runs.end()) q.runs.push_back(run);
      }
    std::string err = verify_talc_quasimodel(q);
    if (!err.empty()) throw Error("type elimination produced an invalid quasimodel: " + err);
    (void)c;
    return q;
  }
};

} // namespace detail

// Satisfiable on a trace of length <= k iff a quasimodel of length l+1 <= k exists.
inline std::optional<TalcQuasimodel> type_elimination(const Problem& p, std::size_t k,
                                                      Budget& budget = Budget::unlimited()) {
  if (k == 0) throw Error("type_elimination needs k >= 1");
  auto c = std::make_shared<const TalcClosure>(closure_talc(p));
  detail::Eliminator el(c, budget);
  for (std::size_t l = 0; l < k; ++l)
    if (auto q = el.run(l)) return q;
  return std::nullopt;
}

// Constant maps up to renaming of domain elements.
inline std::vector<std::map<std::string, int>> canonical_constant_maps(const std::set<std::string>& consts,
                                                                       std::size_t n) {
  std::vector<std::map<std::string, int>> out;
  std::vector<std::string> cs(consts.begin(), consts.end());
  std::map<std::string, int> cur;
  std::function<void(std::size_t, int)> go = [&](std::size_t i, int used) {
    if (i == cs.size()) {
      out.push_back(cur);
      return;
    }
    for (int v = 0; v <= used && v < static_cast<int>(n); ++v) {
      cur[cs[i]] = v;
      go(i + 1, std::max(used, v + 1));
    }
  };
  go(0, 0);
  return out;
}

// Exhaustive search over finite traces with |domain| <= max_domain and length <= k.
inline Verdict talc_bruteforce(const Problem& p, std::size_t k, std::size_t max_domain,
                               Budget& budget = Budget::unlimited()) {
  validate(p);
  Formula f = to_fo(p);
  Signature sig = ftl::signature_of(f);
  std::vector<Formula> inv = global_invariants(f);
  for (std::size_t d = 1; d <= max_domain; ++d) {
    Vocabulary voc(sig.predicates, d);
    auto alpha = all_states(voc);
    for (const auto& cm : canonical_constant_maps(sig.constants, d)) {
      Engine eng(f, voc, cm, inv);
      SearchOptions opt;
      for (std::size_t i = 0; i < inv.size(); ++i) opt.invariants.push_back(eng.extra(i));
      auto w = finite_dp(eng, alpha, k, accept_root_any(eng), budget, opt);
      if (w) {
        Witness wit = make_witness(eng, *w, cm);
        if (!eval(wit.trace, f, 0, wit.assignment)) throw Error("internal error: witness does not re-evaluate");
        return {wit};
      }
    }
  }
  return {};
}

} // namespace ftl::talc
