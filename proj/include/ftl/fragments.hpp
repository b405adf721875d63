#pragma once

// Syntactic fragments and bounded falsifiers for the finite/infinite trace
// properties, the frozen trace property, the runtime-verification maxims and
// bad prefixes.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/search.hpp"
#include "ftl/semantics.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"
#include "ftl/transforms.hpp"

namespace ftl {

enum class Fragment { UPlus, RPlus, U, R, UPlusForall, RPlusExists, UPlusRPlus, LtlSafety, LtlCoSafety };

inline const std::vector<Fragment>& all_fragments() {
  static const std::vector<Fragment> v{Fragment::UPlus,       Fragment::RPlus,       Fragment::U,
                                       Fragment::R,           Fragment::UPlusForall, Fragment::RPlusExists,
                                       Fragment::UPlusRPlus,  Fragment::LtlSafety,   Fragment::LtlCoSafety};
  return v;
}

inline std::string fragment_name(Fragment k) {
  switch (k) {
  case Fragment::UPlus: return "U+";
  case Fragment::RPlus: return "R+";
  case Fragment::U: return "U";
  case Fragment::R: return "R";
  case Fragment::UPlusForall: return "U+forall";
  case Fragment::RPlusExists: return "R+exists";
  case Fragment::UPlusRPlus: return "U+R+";
  case Fragment::LtlSafety: return "LTL-safety";
  case Fragment::LtlCoSafety: return "LTL-cosafety";
  }
  return "?";
}

namespace detail {

struct Grammar {
  bool exists = false, forall = false, until = false, release = false, until_plus = false, release_plus = false;
  bool next = false;          // strict next, written false U phi in NNF
  bool propositional = false; // nullary atoms only
};

inline Grammar grammar_of(Fragment k) {
  Grammar g;
  switch (k) {
  case Fragment::UPlus: g.exists = g.until_plus = true; break;
  case Fragment::U: g.exists = g.until_plus = g.until = true; break;
  case Fragment::UPlusForall: g.exists = g.forall = g.until_plus = true; break;
  case Fragment::RPlus: g.forall = g.release_plus = true; break;
  case Fragment::R: g.forall = g.release_plus = g.release = true; break;
  case Fragment::RPlusExists: g.forall = g.exists = g.release_plus = true; break;
  case Fragment::UPlusRPlus: g.exists = g.forall = g.until_plus = g.release_plus = true; break;
  case Fragment::LtlSafety: g.propositional = g.next = g.release_plus = true; break;
  case Fragment::LtlCoSafety: g.propositional = g.next = g.until_plus = true; break;
  }
  return g;
}

inline bool in_grammar(const Formula& f, const Grammar& g) {
  switch (f->op) {
  case Op::True: case Op::False:
    return true;
  case Op::Atom:
    return !g.propositional || f->args.empty();
  case Op::Not:
    return f->lhs->op == Op::Atom && in_grammar(f->lhs, g);
  case Op::And: case Op::Or:
    return in_grammar(f->lhs, g) && in_grammar(f->rhs, g);
  case Op::Exists:
    return g.exists && in_grammar(f->lhs, g);
  case Op::Forall:
    return g.forall && in_grammar(f->lhs, g);
  case Op::Until:
    if (g.next && f->lhs->op == Op::False) return in_grammar(f->rhs, g);
    return g.until && in_grammar(f->lhs, g) && in_grammar(f->rhs, g);
  case Op::Release:
    return g.release && in_grammar(f->lhs, g) && in_grammar(f->rhs, g);
  case Op::UntilPlus:
    return g.until_plus && in_grammar(f->lhs, g) && in_grammar(f->rhs, g);
  case Op::ReleasePlus:
    return g.release_plus && in_grammar(f->lhs, g) && in_grammar(f->rhs, g);
  default:
    return false;
  }
}

} // namespace detail

inline bool in_fragment(const Formula& f, Fragment k) { return detail::in_grammar(nnf(f), detail::grammar_of(k)); }

// Membership is checked on the negation normal form; it is sufficient only.
inline std::vector<Fragment> classify(const Formula& f) {
  Formula n = nnf(f);
  std::vector<Fragment> out;
  for (Fragment k : all_fragments())
    if (detail::in_grammar(n, detail::grammar_of(k))) out.push_back(k);
  return out;
}

inline bool is_propositional(const Formula& f) {
  if (f->op == Op::Atom) return f->args.empty();
  if (is_quantifier(f->op)) return false;
  return (!f->lhs || is_propositional(f->lhs)) && (!f->rhs || is_propositional(f->rhs));
}

// ---------------------------------------------------------------------------
// Trace properties

enum class Property { FExists, FForall, IExists, IForall, FOmega };
enum class Direction { Both, Forward, Backward }; // Forward: "=>", Backward: "<="

inline std::string property_name(Property p, Direction d = Direction::Both) {
  std::string s;
  switch (p) {
  case Property::FExists: s = "F?E"; break;
  case Property::FForall: s = "F?A"; break;
  case Property::IExists: s = "I?E"; break;
  case Property::IForall: s = "I?A"; break;
  case Property::FOmega: s = "F?w"; break;
  }
  s.replace(1, 1, d == Direction::Forward ? "=>" : d == Direction::Backward ? "<=" : "");
  return s;
}

struct PropertyOptions {
  Bounds bounds{2, 4, 1};
  std::size_t ext_len = 2; // extensions F.I' range over lassos I' with stem+loop <= ext_len
};

struct PropertyVerdict {
  bool refuted = false;
  bool conclusive = false;
  Direction direction = Direction::Both; // the refuted direction
  // The trace the property quantifies over first (finite F, or lasso I), and
  // one related trace (an extension F.I', or a prefix of I).
  std::optional<Trace> trace, related;
  Assignment assignment;
  bool trace_sat = false, related_sat = false;
};

inline bool finite_side(Property p) { return p == Property::FExists || p == Property::FForall || p == Property::FOmega; }
inline bool universal(Property p) { return p == Property::FForall || p == Property::IForall; }

// Refuting a direction needs one related trace (conclusive) or all of them
// (conclusive only when the related set is exact: prefixes of a lasso, or
// the single frozen extension).
inline bool refutation_conclusive(Property p, Direction d) {
  if (!finite_side(p) || p == Property::FOmega) return true;
  bool forward = d == Direction::Forward;
  return forward == universal(p);
}

namespace detail {

// Does (main, related values) violate the property in direction d?
inline bool violates(Property p, Direction d, bool main, const std::vector<bool>& rel) {
  bool any = false, all = true;
  for (bool r : rel) {
    any = any || r;
    all = all && r;
  }
  if (p == Property::FOmega) {
    bool r = rel.at(0);
    return d == Direction::Forward ? (main && !r) : (!main && r);
  }
  bool u = universal(p);
  if (d == Direction::Forward) return main && (u ? !all : !any);
  return !main && (u ? all : any);
}

inline std::vector<Word> encode_states(const Vocabulary& voc, const Trace& t) {
  if (voc.bits > 30) throw Error("state space exceeds the enumeration cap");
  std::vector<Word> out;
  for (const auto& s : t.states) out.push_back(voc.encode(s)[0]);
  return out;
}

inline std::vector<Word> alphabet(const Vocabulary& voc) { return all_states(voc); }

// Every lasso with stem+loop <= n, as (word, loop start), in order of total
// length, loop length, then word.
inline void for_each_lasso(const std::vector<Word>& alpha, std::size_t n,
                           const std::function<bool(const std::vector<Word>&, std::size_t)>& fn) {
  for (std::size_t total = 1; total <= n; ++total)
    for (std::size_t m = 1; m <= total; ++m) {
      bool stop = false;
      for_each_word(alpha, total, [&](const std::vector<Word>& w) {
        if (stop) return;
        std::vector<Word> loop(w.begin() + static_cast<long>(total - m), w.end());
        if (primitive_period(loop) != m) return;
        if (total > m && w[total - m - 1] == w.back()) return;
        if (!fn(w, total - m)) stop = true;
      });
      if (stop) return;
    }
}

// Signature id of states[from..] followed by the signature `next`.
inline std::uint32_t chain(Stepper& st, const std::vector<Word>& states, std::size_t from, std::uint32_t next) {
  std::uint32_t cur = next;
  for (std::size_t i = states.size(); i-- > from;) cur = st.step(states[i], cur);
  return cur;
}

inline std::uint32_t lasso_sig(Stepper& st, const std::vector<Word>& w, std::size_t ls) {
  std::vector<Word> loop(w.begin() + static_cast<long>(ls), w.end());
  std::uint32_t cur = st.loop(loop)[0];
  for (std::size_t i = ls; i-- > 0;) cur = st.step(w[i], cur);
  return cur;
}

// Signature ids at instant 0 of every finite prefix of the lasso (w, ls).
inline std::vector<std::uint32_t> prefix_sigs(Stepper& st, const std::vector<Word>& w, std::size_t ls) {
  std::size_t m = w.size() - ls;
  std::vector<std::vector<std::uint32_t>> ps(m);
  auto from = [&](Word s, const std::vector<std::uint32_t>& next) {
    std::vector<std::uint32_t> out{st.step(s, Stepper::kEnd)};
    for (auto y : next) out.push_back(st.step(s, y));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = m; i-- > 0;) {
      auto v = from(w[ls + i], ps[(i + 1) % m]);
      if (v != ps[i]) {
        ps[i] = std::move(v);
        changed = true;
      }
    }
  }
  std::vector<std::uint32_t> cur = ps[0];
  for (std::size_t i = ls; i-- > 0;) cur = from(w[i], cur);
  return cur;
}

inline std::vector<bool> bits_of(const Engine& eng, Stepper& st, const std::vector<std::uint32_t>& ids, std::size_t a) {
  std::vector<bool> out;
  for (auto id : ids) out.push_back(eng.root_bit(st.sig(id), a));
  return out;
}

} // namespace detail

// Checks the property for one given trace and assignment: a finite trace
// against its extensions by lassos of stem+loop <= ext_len, or a lasso
// against all of its prefixes. Returns true when the property holds.
inline bool property_holds_on(const Formula& f, const Trace& t, Property p, Direction d, const Assignment& asg,
                              std::size_t ext_len = 2, Budget& budget = Budget::unlimited()) {
  if (finite_side(p) == t.is_lasso()) throw Error("trace kind does not match the property");
  t.validate();
  Vocabulary voc = vocabulary_for(t, f);
  Engine eng(f, voc, t.constants);
  Stepper st(eng, budget);
  auto w = detail::encode_states(voc, t);
  std::size_t a = eng.root_index(asg);
  bool main;
  std::vector<std::uint32_t> rel;
  if (p == Property::FOmega) {
    main = eng.root_bit(st.sig(detail::chain(st, w, 0, Stepper::kEnd)), a);
    rel.push_back(detail::chain(st, w, 0, st.loop({w.back()})[0]));
  } else if (finite_side(p)) {
    main = eng.root_bit(st.sig(detail::chain(st, w, 0, Stepper::kEnd)), a);
    for (auto tail : lasso_start_sigs(st, all_states(voc), ext_len)) rel.push_back(detail::chain(st, w, 0, tail));
  } else {
    main = eng.root_bit(st.sig(detail::lasso_sig(st, w, *t.loop_start)), a);
    rel = detail::prefix_sigs(st, w, *t.loop_start);
  }
  auto bits = detail::bits_of(eng, st, rel, a);
  if (d != Direction::Backward && detail::violates(p, Direction::Forward, main, bits)) return false;
  if (d != Direction::Forward && detail::violates(p, Direction::Backward, main, bits)) return false;
  return true;
}

namespace detail {

// One direction of one property, over all domains and constant maps.
inline PropertyVerdict falsify_direction(const Formula& f, Property p, Direction d, const PropertyOptions& o,
                                         Budget& budget) {
  Signature sig = signature_of(f);
  for (std::size_t dom = std::max<std::size_t>(1, o.bounds.min_domain); dom <= o.bounds.max_domain; ++dom) {
    Vocabulary voc(sig.predicates, dom);
    auto alpha = all_states(voc);
    for (const auto& cm : constant_maps(sig.constants, dom)) {
      Engine eng(f, voc, cm);
      Stepper st(eng, budget);
      ProductAcceptor acc = [&](std::uint32_t s, std::uint32_t set) -> std::optional<std::size_t> {
        for (std::size_t a = 0; a < eng.root_size(); ++a)
          if (violates(p, d, eng.root_bit(st.sig(s), a), bits_of(eng, st, st.set(set), a))) return a;
        return std::nullopt;
      };
      std::optional<DpWitness> w;
      if (p == Property::FOmega) {
        w = extension_dp(st, alpha, o.bounds.max_len, [&](Word s) { return std::vector<std::uint32_t>{st.loop({s})[0]}; },
                         acc);
      } else if (finite_side(p)) {
        auto tails = lasso_start_sigs(st, alpha, o.ext_len);
        w = extension_dp(st, alpha, o.bounds.max_len, [&](Word) { return tails; }, acc);
      } else {
        w = prefix_dp(st, alpha, o.bounds.max_len, acc);
      }
      if (!w) continue;

      PropertyVerdict v;
      v.refuted = true;
      v.conclusive = refutation_conclusive(p, d);
      v.direction = d;
      std::size_t a = w->assignment;
      v.assignment = eng.root_assignment(a);
      v.trace = make_trace(voc, cm, w->states, w->loop_start);
      // the related trace: one that breaks the property, or a representative
      // when every related trace does
      bool want = d == Direction::Backward;
      if (p == Property::FOmega) {
        v.related = frozen_extension(*v.trace);
      } else if (finite_side(p)) {
        for_each_lasso(alpha, o.ext_len, [&](const std::vector<Word>& tw, std::size_t ls) {
          std::uint32_t sid = chain(st, w->states, 0, lasso_sig(st, tw, ls));
          if (eng.root_bit(st.sig(sid), a) != want) return true;
          std::vector<Word> all = w->states;
          all.insert(all.end(), tw.begin(), tw.end());
          v.related = make_trace(voc, cm, all, w->states.size() + ls);
          return false;
        });
      } else {
        std::size_t horizon = w->states.size() * (st.size() + 2);
        for (std::size_t n = 0; n < horizon && !v.related; ++n) {
          Trace pre = prefix(*v.trace, n);
          if (eval(pre, f, 0, v.assignment) == want) v.related = pre;
        }
      }
      if (!v.related) throw Error("internal error: no related trace for the witness");
      v.trace_sat = eval(*v.trace, f, 0, v.assignment);
      v.related_sat = eval(*v.related, f, 0, v.assignment);
      if (property_holds_on(f, *v.trace, p, d, v.assignment, o.ext_len))
        throw Error("internal error: property witness does not re-check");
      return v;
    }
  }
  return {};
}

} // namespace detail

// Bounded search for a trace and assignment violating the property. For
// Direction::Both the direction with conclusive refutations is tried first.
inline PropertyVerdict property_falsify(const Formula& f, Property p, Direction d, const PropertyOptions& o = {},
                                        Budget& budget = Budget::unlimited()) {
  std::vector<Direction> dirs;
  if (d == Direction::Both) {
    if (refutation_conclusive(p, Direction::Forward)) dirs = {Direction::Forward, Direction::Backward};
    else dirs = {Direction::Backward, Direction::Forward};
  } else {
    dirs = {d};
  }
  for (Direction x : dirs) {
    auto v = detail::falsify_direction(f, p, x, o, budget);
    if (v.refuted) return v;
  }
  return {};
}

// Insensitivity as a property of the formula, with E fresh.
inline PropertyVerdict insensitivity_property(const Formula& f, const PropertyOptions& o = {},
                                              Budget& budget = Budget::unlimited()) {
  Signature sigma = signature_of(f);
  std::string e = fresh_predicate(sigma);
  sigma.add_predicate(e, 1);
  auto w = insensitivity_falsify(f, sigma, e, o.bounds, budget);
  PropertyVerdict v;
  if (!w.found()) return v;
  v.refuted = v.conclusive = true;
  v.trace = w.witness->trace;
  v.related = insensitive_extension(*v.trace, sigma, e);
  v.assignment = w.witness->assignment;
  v.trace_sat = eval(*v.trace, f, 0, v.assignment);
  v.related_sat = eval(*v.related, f, 0, v.assignment);
  return v;
}

// ---------------------------------------------------------------------------
// Runtime-verification maxims (propositional formulas)

enum class Maxim { Impartial, Anticipating };

// Impartial: F=>forall and F<=exists. Anticipating: F<=forall and F=>exists.
inline PropertyVerdict maxims_falsify(const Formula& f, Maxim m, const PropertyOptions& o = {},
                                      Budget& budget = Budget::unlimited()) {
  if (!is_propositional(f)) throw Error("maxims are defined for propositional formulas");
  if (m == Maxim::Impartial) {
    auto v = property_falsify(f, Property::FForall, Direction::Forward, o, budget);
    if (v.refuted) return v;
    return property_falsify(f, Property::FExists, Direction::Backward, o, budget);
  }
  auto v = property_falsify(f, Property::FForall, Direction::Backward, o, budget);
  if (v.refuted) return v;
  return property_falsify(f, Property::FExists, Direction::Forward, o, budget);
}

// ---------------------------------------------------------------------------
// Bad prefixes

struct BadPrefixVerdict {
  bool bad_up_to_bound = true;
  std::optional<Trace> extension; // an extension satisfying chi
};

// Searches lasso extensions F.I' (stem+loop of I' <= lasso_len) satisfying chi.
inline BadPrefixVerdict bad_prefix_check(const Trace& f, const Formula& chi, std::size_t lasso_len,
                                         Budget& budget = Budget::unlimited()) {
  if (!is_propositional(chi)) throw Error("bad prefixes are checked for propositional formulas");
  if (f.is_lasso()) throw Error("a bad prefix candidate must be finite");
  f.validate();
  Vocabulary voc = vocabulary_for(f, chi);
  Engine eng(chi, voc, f.constants);
  Stepper st(eng, budget);
  auto w = detail::encode_states(voc, f);
  BadPrefixVerdict v;
  detail::for_each_lasso(all_states(voc), lasso_len, [&](const std::vector<Word>& tw, std::size_t ls) {
    std::uint32_t sid = detail::chain(st, w, 0, detail::lasso_sig(st, tw, ls));
    if (!eng.root_bit(st.sig(sid), 0)) return true;
    std::vector<Word> all = w;
    all.insert(all.end(), tw.begin(), tw.end());
    v.extension = make_trace(voc, f.constants, all, w.size() + ls);
    v.bad_up_to_bound = false;
    return false;
  });
  if (v.extension && !eval(*v.extension, chi)) throw Error("internal error: extension does not re-evaluate");
  return v;
}

} // namespace ftl
