#pragma once

// Reduction of finite-trace reasoning to infinite traces through a fresh
// end-of-time predicate E, and the insensitivity construction.

#include <optional>
#include <string>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/search.hpp"
#include "ftl/semantics.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl {

struct EndOfTimeBundle {
  std::string e;
  Formula psi1, psi2, psi3, psi;
};

inline EndOfTimeBundle end_of_time_bundle(const std::string& e) {
  EndOfTimeBundle b;
  b.e = e;
  auto ex = atom(e, {var("x")});
  b.psi1 = forall("x", neg(ex));
  b.psi2 = until(forall("x", neg(ex)), forall("x", ex));
  b.psi3 = always(forall("x", implies(ex, next(ex))));
  b.psi = conj(conj(b.psi1, b.psi2), b.psi3);
  return b;
}

// Picks `__E`, or `__E1`, `__E2`, ... when the name is taken.
inline std::string fresh_predicate(const Signature& sig, const std::string& base = "__E") {
  std::string name = base;
  for (int i = 1; sig.predicates.count(name) || sig.constants.count(name) || sig.variables.count(name); ++i)
    name = base + std::to_string(i);
  return name;
}

inline EndOfTimeBundle end_of_time_formula(const Signature& sig) { return end_of_time_bundle(fresh_predicate(sig)); }

inline bool mentions_predicate(const Formula& f, const std::string& p) {
  if (f->op == Op::Atom) return f->name == p;
  return (f->lhs && mentions_predicate(f->lhs, p)) || (f->rhs && mentions_predicate(f->rhs, p));
}

namespace detail {
inline Formula dagger_rec(const Formula& f, const Formula& psi1) {
  switch (f->op) {
  case Op::Atom: case Op::True: case Op::False:
    return f;
  case Op::Not: case Op::Exists:
    return with_children(f, dagger_rec(f->lhs, psi1), nullptr);
  case Op::And:
    return with_children(f, dagger_rec(f->lhs, psi1), dagger_rec(f->rhs, psi1));
  case Op::Until:
    return until(dagger_rec(f->lhs, psi1), conj(dagger_rec(f->rhs, psi1), psi1));
  default:
    throw Error("dagger expects a core formula");
  }
}
} // namespace detail

// Translation on the core expansion: Until gets psi_f^1 on its right argument.
inline Formula dagger(const Formula& f, const EndOfTimeBundle& b) {
  if (mentions_predicate(f, b.e)) throw Error("predicate " + b.e + " occurs in the formula");
  return detail::dagger_rec(expand(f), b.psi1);
}

struct ReductionReport {
  EndOfTimeBundle bundle;
  Formula translated; // dagger(f) & psi_f
  Verdict finite, infinite;
  bool agree() const { return finite.found() == infinite.found(); }
};

namespace detail {
// Bit mask of the E extension inside a state word.
inline Word predicate_mask(const Vocabulary& voc, const std::string& p) {
  int k = voc.index(p);
  if (k < 0) return 0;
  std::size_t cnt = 1;
  for (int i = 0; i < voc.arity[static_cast<std::size_t>(k)]; ++i) cnt *= voc.domain_size;
  Word m = 0;
  for (std::size_t i = 0; i < cnt; ++i) m |= Word{1} << (voc.offset[static_cast<std::size_t>(k)] + i);
  return m;
}
} // namespace detail

// Bounded comparison of finite satisfiability of f with infinite
// satisfiability of dagger(f) & psi_f. Lassos are searched among
// end-extension shapes: E is empty or the whole domain at each instant,
// never shrinks, and the loop lies where E holds.
inline ReductionReport check_reduction(const Formula& f, const Bounds& b, std::size_t lasso_len,
                                       Budget& budget = Budget::unlimited()) {
  if (!is_sentence(f)) throw Error("check_reduction expects a sentence");
  Signature sig = signature_of(f);
  ReductionReport r;
  r.bundle = end_of_time_formula(sig);
  r.translated = conj(dagger(f, r.bundle), r.bundle.psi);
  r.finite = sat_bruteforce(f, b, TraceKind::Finite, budget);

  Signature sig_e = sig;
  sig_e.add_predicate(r.bundle.e, 1);
  for (std::size_t d = std::max<std::size_t>(1, b.min_domain); d <= b.max_domain && !r.infinite.found(); ++d) {
    Vocabulary voc(sig_e.predicates, d);
    Word emask = detail::predicate_mask(voc, r.bundle.e);
    std::vector<Word> stem_alpha, loop_alpha;
    for (Word s : all_states(voc)) {
      if ((s & emask) == 0) stem_alpha.push_back(s);
      if ((s & emask) == emask) {
        stem_alpha.push_back(s);
        loop_alpha.push_back(s);
      }
    }
    std::sort(stem_alpha.begin(), stem_alpha.end());
    SearchOptions opt;
    opt.link = [emask](Word s, Word next) { return (s & emask) == 0 || (next & emask) != 0; };
    opt.link_class = [emask](Word s) { return (s & emask) ? 1u : 0u; };
    opt.max_loop = lasso_len > 1 ? lasso_len - 1 : 1;
    for (const auto& cm : constant_maps(sig_e.constants, d)) {
      Engine eng(r.translated, voc, cm);
      auto base = accept_root_any(eng);
      Acceptor acc = [&](const Word* s, Word first) -> std::optional<std::size_t> {
        if (first & emask) return std::nullopt;
        return base(s, first);
      };
      if (auto w = lasso_dp(eng, stem_alpha, loop_alpha, lasso_len, acc, budget, opt)) {
        Witness wit = make_witness(eng, *w, cm);
        if (!eval(wit.trace, r.translated, 0, wit.assignment))
          throw Error("internal error: witness does not re-evaluate");
        r.infinite.witness = wit;
        break;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Insensitivity to infiniteness

struct InsensitivityBundle {
  Signature sigma;
  EndOfTimeBundle eot;
  Formula chi, theta;
};

// chi_f = G forall x (E(x) -> /\_P forall ybar ~P(x, ybar)) over sigma \ {E}.
inline InsensitivityBundle theta_f(const Signature& sigma, const std::string& e) {
  auto it = sigma.predicates.find(e);
  if (it == sigma.predicates.end()) throw Error("predicate " + e + " is not in the signature");
  if (it->second != 1) throw Error("predicate " + e + " must be unary");
  InsensitivityBundle b;
  b.sigma = sigma;
  b.eot = end_of_time_bundle(e);
  std::vector<Formula> parts;
  for (const auto& [p, ar] : sigma.predicates) {
    if (p == e) continue;
    if (ar == 0) {
      parts.push_back(neg(atom(p)));
      continue;
    }
    std::vector<Term> args{var("x")};
    std::vector<std::string> ys;
    for (int i = 1; i < ar; ++i) {
      ys.push_back("y" + std::to_string(i));
      args.push_back(var(ys.back()));
    }
    Formula g = neg(atom(p, args));
    for (auto y = ys.rbegin(); y != ys.rend(); ++y) g = forall(*y, g);
    parts.push_back(g);
  }
  Formula body = parts.empty() ? top() : conj_all(parts);
  b.chi = always(forall("x", implies(atom(e, {var("x")}), body)));
  b.theta = conj(b.eot.psi, b.chi);
  return b;
}

// Searches a finite trace F and assignment with F |= f xor F._E 𝔈 |= f.
inline Verdict insensitivity_falsify(const Formula& f, const Signature& sigma, const std::string& e, const Bounds& b,
                                     Budget& budget = Budget::unlimited()) {
  if (!sigma.predicates.count(e) || sigma.predicates.at(e) != 1) throw Error("signature must contain unary " + e);
  Signature fs = signature_of(f);
  for (const auto& [p, ar] : fs.predicates) {
    auto it = sigma.predicates.find(p);
    if (it == sigma.predicates.end() || it->second != ar) throw Error("predicate " + p + " is not in the signature");
  }
  if (fs.predicates.count(e)) throw Error("predicate " + e + " occurs in the formula");
  Signature s = fs;
  s.add_predicate(e, 1);
  for (std::size_t d = std::max<std::size_t>(1, b.min_domain); d <= b.max_domain; ++d) {
    Vocabulary voc(s.predicates, d);
    Word emask = detail::predicate_mask(voc, e);
    std::vector<Word> alpha;
    for (Word w : all_states(voc))
      if ((w & emask) == 0) alpha.push_back(w);
    for (const auto& cm : constant_maps(s.constants, d)) {
      Engine eng(f, voc, cm);
      Stepper st(eng, budget);
      std::uint32_t tail = st.loop({emask}).front();
      auto w = extension_dp(
          st, alpha, b.max_len, [&](Word) { return std::vector<std::uint32_t>{tail}; },
          [&](std::uint32_t sig, std::uint32_t set) -> std::optional<std::size_t> {
            const Word* ext = st.sig(st.set(set).front());
            for (std::size_t a = 0; a < eng.root_size(); ++a)
              if (eng.root_bit(st.sig(sig), a) != eng.root_bit(ext, a)) return a;
            return std::nullopt;
          });
      if (w) {
        Witness wit = make_witness(eng, *w, cm);
        Trace ext = insensitive_extension(wit.trace, sigma, e);
        if (eval(wit.trace, f, 0, wit.assignment) == eval(ext, f, 0, wit.assignment))
          throw Error("internal error: insensitivity witness does not re-evaluate");
        return {wit};
      }
    }
  }
  return {};
}

} // namespace ftl
