#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/eval.hpp"
#include "ftl/search.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl {

using Assignment = std::map<std::string, int>;

enum class TraceKind { Finite, Lasso };

struct Bounds {
  std::size_t max_domain = 2;
  std::size_t max_len = 4;
  std::size_t min_domain = 1;
};

struct Witness {
  Trace trace;
  Assignment assignment;
  std::size_t instant = 0;
};

// Either a witness or NoneUpToBound.
struct Verdict {
  std::optional<Witness> witness;
  bool found() const { return witness.has_value(); }
};

// Vocabulary covering both the trace and the formula; arities must agree.
inline Vocabulary vocabulary_for(const Trace& t, const Formula& f) {
  auto preds = t.arities();
  Signature fs;
  collect_signature(f, fs);
  for (const auto& [p, a] : fs.predicates) {
    auto [it, fresh] = preds.emplace(p, a);
    if (!fresh && it->second != a) throw Error("arity mismatch for predicate " + p);
  }
  return Vocabulary(preds, t.domain.size());
}

// Root truth tables at every stored instant of the trace.
class Evaluation {
public:
  Evaluation(const Trace& t, const Formula& f) : trace_(t) {
    t.validate();
    Vocabulary voc = vocabulary_for(t, f);
    engine_.emplace(f, voc, t.constants);
    for (const auto& s : t.states) encoded_.push_back(voc.encode(s));
    std::vector<const Word*> ptrs;
    for (const auto& e : encoded_) ptrs.push_back(e.data());
    buf_ = t.loop_start ? engine_->eval_lasso(ptrs, *t.loop_start) : engine_->eval_finite(ptrs);
  }

  const Engine& engine() const { return *engine_; }

  bool at(std::size_t instant, const Assignment& asg = {}) const {
    std::size_t pos = instant;
    if (pos >= trace_.states.size()) {
      if (!trace_.loop_start) throw Error("instant " + std::to_string(instant) + " out of range");
      std::size_t ls = *trace_.loop_start, m = trace_.loop_length();
      pos = ls + (pos - ls) % m;
    }
    const Word* sig = buf_.data() + pos * engine_->scratch_words() + engine_->sig_offset();
    return engine_->root_bit(sig, engine_->root_index(asg));
  }

private:
  Trace trace_;
  std::optional<Engine> engine_;
  std::vector<std::vector<Word>> encoded_;
  std::vector<Word> buf_;
};

// Satisfaction of f at `instant` under `asg`.
inline bool eval(const Trace& t, const Formula& f, std::size_t instant = 0, const Assignment& asg = {}) {
  return Evaluation(t, f).at(instant, asg);
}

inline Assignment assignment_by_name(const Trace& t, const std::map<std::string, std::string>& named) {
  Assignment a;
  for (const auto& [v, e] : named) {
    auto it = std::find(t.domain.begin(), t.domain.end(), e);
    if (it == t.domain.end()) throw Error("unknown domain element " + e);
    a[v] = static_cast<int>(it - t.domain.begin());
  }
  return a;
}

inline std::map<std::string, std::string> assignment_names(const Trace& t, const Assignment& a) {
  std::map<std::string, std::string> out;
  for (const auto& [v, e] : a) out[v] = t.domain.at(static_cast<std::size_t>(e));
  return out;
}

// Top-level conjuncts of the form G+ chi with chi a sentence.
inline std::vector<Formula> global_invariants(const Formula& f) {
  std::vector<Formula> out;
  std::function<void(const Formula&)> go = [&](const Formula& g) {
    if (g->op == Op::And) {
      go(g->lhs);
      go(g->rhs);
    } else if (g->op == Op::AlwaysPlus && is_sentence(g->lhs)) {
      out.push_back(g->lhs);
    }
  };
  go(f);
  return out;
}

inline Witness make_witness(const Engine& eng, const DpWitness& w, const std::map<std::string, int>& cmap) {
  Witness out;
  out.trace = make_trace(eng.vocabulary(), cmap, w.states, w.loop_start);
  out.assignment = eng.root_assignment(w.assignment);
  return out;
}

// Exhaustive bounded satisfiability. Free variables are closed existentially.
// Order of search: domain size, constant map, then trace length and states.
inline Verdict sat_bruteforce(const Formula& f, const Bounds& b, TraceKind kind, Budget& budget = Budget::unlimited(),
                              const Signature* sig_override = nullptr) {
  Signature sig = sig_override ? *sig_override : signature_of(f);
  std::vector<Formula> inv = global_invariants(f);
  for (std::size_t d = std::max<std::size_t>(1, b.min_domain); d <= b.max_domain; ++d) {
    Vocabulary voc(sig.predicates, d);
    auto alpha = all_states(voc);
    for (const auto& cm : constant_maps(sig.constants, d)) {
      Engine eng(f, voc, cm, inv);
      SearchOptions opt;
      for (std::size_t i = 0; i < inv.size(); ++i) opt.invariants.push_back(eng.extra(i));
      auto acc = accept_root_any(eng);
      auto w = kind == TraceKind::Finite ? finite_dp(eng, alpha, b.max_len, acc, budget, opt)
                                         : lasso_dp(eng, alpha, alpha, b.max_len, acc, budget, opt);
      if (w) {
        Witness wit = make_witness(eng, *w, cm);
        if (!eval(wit.trace, f, 0, wit.assignment)) throw Error("internal error: witness does not re-evaluate");
        return {wit};
      }
    }
  }
  return {};
}

// Searches for a trace and assignment on which f and g disagree at instant 0.
inline Verdict equiv_bruteforce(const Formula& f, const Formula& g, const Bounds& b, TraceKind kind,
                                Budget& budget = Budget::unlimited()) {
  Signature sig = signature_of(f);
  Signature sg = signature_of(g);
  for (const auto& [p, a] : sg.predicates) sig.add_predicate(p, a);
  for (const auto& c : sg.constants) sig.add_constant(c);
  return sat_bruteforce(neg(iff(f, g)), b, kind, budget, &sig);
}

} // namespace ftl
