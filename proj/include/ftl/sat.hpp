#pragma once

// Quasimodel satisfiability for the constant-free one-variable monadic
// fragment on finite traces, with model extraction and size bounds.

#include <boost/dynamic_bitset.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/semantics.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl {

using QType = boost::dynamic_bitset<>;
using StateCandidate = std::vector<QType>; // sorted, duplicate free
using BigInt = boost::multiprecision::cpp_int;

struct ClosureNode {
  enum Kind { Atom, True, False, Not, And, Exists, Until } kind;
  int a = -1, b = -1; // children
  bool sentence = false;
  std::string pred;   // Atom
  Formula formula;
};

// Positive subformulas of the normalised core formula, children first. A type
// is a bitset over these nodes; negations are complements. Until nodes stand
// for their surrogates.
struct Closure {
  Formula source, normalised;
  std::vector<ClosureNode> nodes;
  int root = -1;
  std::vector<int> x_bases; // unary atoms and x-surrogates
  std::vector<int> s_bases; // nullary atoms, sentence surrogates, exists nodes
  std::vector<int> untils, exists;
  std::set<std::string> unary, nullary;

  std::size_t size() const { return nodes.size(); }
  std::string describe(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    return n.kind == ClosureNode::Until ? "surrogate(" + render(n.formula) + ")" : render(n.formula);
  }
};

namespace detail {

inline void check_qtl_fragment(const Formula& f) {
  if (f->op == Op::Atom) {
    if (f->args.size() > 1) throw Error("predicate " + f->name + " is not monadic");
    for (const auto& t : f->args)
      if (!t.is_var) throw Error("constant " + t.name + " is outside the constant-free fragment");
  }
  if (free_vars(f).size() > 1) throw Error("subformula " + render(f) + " has more than one free variable");
  if (f->lhs) check_qtl_fragment(f->lhs);
  if (f->rhs) check_qtl_fragment(f->rhs);
}

// Drops vacuous quantifiers of a core formula.
inline Formula drop_vacuous(const Formula& f) {
  if (f->op == Op::Exists) {
    Formula b = drop_vacuous(f->lhs);
    if (!free_vars(b).count(f->name)) return b;
    return exists(f->name, b);
  }
  Formula l = f->lhs ? drop_vacuous(f->lhs) : nullptr;
  Formula r = f->rhs ? drop_vacuous(f->rhs) : nullptr;
  return with_children(f, l, r);
}

} // namespace detail

// Closure of a fragment formula; free variables are closed existentially.
inline Closure closure(const Formula& f) {
  detail::check_qtl_fragment(f);
  Closure c;
  c.source = f;
  Formula g = expand(f);
  for (const auto& v : free_vars(g)) g = exists(v, g);
  g = rename_all_vars(detail::drop_vacuous(g), "x");
  c.normalised = g;
  FormulaMap<int> index;
  std::function<int(const Formula&)> add = [&](const Formula& h) -> int {
    if (auto it = index.find(h); it != index.end()) return it->second;
    ClosureNode n;
    n.formula = h;
    n.sentence = is_sentence(h);
    switch (h->op) {
    case Op::Atom:
      n.kind = ClosureNode::Atom;
      n.pred = h->name;
      (h->args.empty() ? c.nullary : c.unary).insert(h->name);
      break;
    case Op::True: n.kind = ClosureNode::True; break;
    case Op::False: n.kind = ClosureNode::False; break;
    case Op::Not: n.kind = ClosureNode::Not; n.a = add(h->lhs); break;
    case Op::And: n.kind = ClosureNode::And; n.a = add(h->lhs); n.b = add(h->rhs); break;
    case Op::Exists: n.kind = ClosureNode::Exists; n.a = add(h->lhs); break;
    case Op::Until: n.kind = ClosureNode::Until; n.a = add(h->lhs); n.b = add(h->rhs); break;
    default: throw Error("unexpected operator in core formula");
    }
    int id = static_cast<int>(c.nodes.size());
    c.nodes.push_back(n);
    index.emplace(h, id);
    if (n.kind == ClosureNode::Atom || n.kind == ClosureNode::Until || n.kind == ClosureNode::Exists)
      (n.sentence ? c.s_bases : c.x_bases).push_back(id);
    if (n.kind == ClosureNode::Until) c.untils.push_back(id);
    if (n.kind == ClosureNode::Exists) c.exists.push_back(id);
    return id;
  };
  c.root = add(g);
  for (const auto& p : c.unary)
    if (c.nullary.count(p)) throw Error("predicate " + p + " used with two arities");
  return c;
}

// Boolean saturation.
inline bool is_type(const Closure& c, const QType& t) {
  if (t.size() != c.size()) return false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& n = c.nodes[i];
    auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
    switch (n.kind) {
    case ClosureNode::True: if (!t[i]) return false; break;
    case ClosureNode::False: if (t[i]) return false; break;
    case ClosureNode::Not: if (t[i] == t[a]) return false; break;
    case ClosureNode::And: if (t[i] != (t[a] && t[b])) return false; break;
    default: break;
    }
  }
  return true;
}

inline bool u_compatible(const Closure& c, const QType& t, const QType& next) {
  if (t.size() != c.size() || next.size() != c.size()) throw Error("types over a different closure");
  for (int u : c.untils) {
    const auto& n = c.nodes[static_cast<std::size_t>(u)];
    bool want = next[static_cast<std::size_t>(n.b)] ||
                (next[static_cast<std::size_t>(n.a)] && next[static_cast<std::size_t>(u)]);
    if (t[static_cast<std::size_t>(u)] != want) return false;
  }
  return true;
}

// A type that may sit at the last instant.
inline bool final_type(const Closure& c, const QType& t) {
  for (int u : c.untils)
    if (t[static_cast<std::size_t>(u)]) return false;
  return true;
}

inline bool agree_on_sentences(const Closure& c, const QType& s, const QType& t) {
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.nodes[i].sentence && s[i] != t[i]) return false;
  return true;
}

// Realisability through exists-coherence: one element per type.
inline bool realisable(const Closure& c, const StateCandidate& s) {
  if (s.empty()) return false;
  for (const auto& t : s)
    if (!is_type(c, t) || !agree_on_sentences(c, s[0], t)) return false;
  for (int e : c.exists) {
    auto body = static_cast<std::size_t>(c.nodes[static_cast<std::size_t>(e)].a);
    bool some = std::any_of(s.begin(), s.end(), [&](const QType& t) { return t[body]; });
    if (s[0][static_cast<std::size_t>(e)] != some) return false;
  }
  return true;
}

inline bool suitable(const Closure& c, const StateCandidate& s1, const StateCandidate& s2) {
  for (const auto& t1 : s1)
    if (std::none_of(s2.begin(), s2.end(), [&](const QType& t2) { return u_compatible(c, t1, t2); })) return false;
  for (const auto& t2 : s2)
    if (std::none_of(s1.begin(), s1.end(), [&](const QType& t1) { return u_compatible(c, t1, t2); })) return false;
  return true;
}

struct Quasimodel {
  std::shared_ptr<const Closure> closure;
  std::vector<StateCandidate> states;
  std::vector<std::vector<std::size_t>> runs; // runs[r][i] indexes states[i]
  std::size_t length() const { return states.size(); }
};

// Checks the quasimodel conditions literally. Returns an empty string when
// all hold, otherwise the first violation.
inline std::string verify_quasimodel(const Quasimodel& q) {
  if (!q.closure) return "no closure";
  const Closure& c = *q.closure;
  std::size_t n = q.states.size();
  if (n == 0) return "empty state sequence";
  for (std::size_t i = 0; i < n; ++i)
    if (!realisable(c, q.states[i])) return "S(" + std::to_string(i) + ") is not a realisable state candidate";
  std::vector<std::vector<bool>> covered(n);
  for (std::size_t i = 0; i < n; ++i) covered[i].assign(q.states[i].size(), false);
  for (std::size_t r = 0; r < q.runs.size(); ++r) {
    const auto& run = q.runs[r];
    if (run.size() != n) return "run " + std::to_string(r) + " has the wrong length";
    for (std::size_t i = 0; i < n; ++i) {
      if (run[i] >= q.states[i].size()) return "run " + std::to_string(r) + " leaves S(" + std::to_string(i) + ")";
      covered[i][run[i]] = true;
    }
    auto at = [&](std::size_t i) -> const QType& { return q.states[i][run[i]]; };
    for (int u : c.untils) {
      const auto& un = c.nodes[static_cast<std::size_t>(u)];
      for (std::size_t i = 0; i < n; ++i) {
        bool sem = false;
        for (std::size_t j = i + 1; j < n && !sem; ++j) {
          if (at(j)[static_cast<std::size_t>(un.b)]) {
            bool ok = true;
            for (std::size_t l = i + 1; l < j && ok; ++l) ok = at(l)[static_cast<std::size_t>(un.a)];
            sem = ok;
          }
        }
        if (at(i)[static_cast<std::size_t>(u)] != sem)
          return "run " + std::to_string(r) + " breaks " + c.describe(u) + " at " + std::to_string(i);
      }
    }
  }
  auto root = static_cast<std::size_t>(c.root);
  if (std::none_of(q.states[0].begin(), q.states[0].end(), [&](const QType& t) { return t[root]; }))
    return "the formula is in no type of S(0)";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < covered[i].size(); ++k)
      if (!covered[i][k]) return "a type of S(" + std::to_string(i) + ") lies on no run";
  return {};
}

// One element per run; unary atoms are read off the run's types.
inline Trace extract_trace(const Quasimodel& q) {
  if (!verify_quasimodel(q).empty()) throw Error("extract_trace expects a verified quasimodel");
  const Closure& c = *q.closure;
  Trace t;
  t.domain = default_domain(q.runs.size());
  for (std::size_t i = 0; i < q.states.size(); ++i) {
    State s;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const auto& n = c.nodes[k];
      if (n.kind != ClosureNode::Atom) continue;
      if (n.sentence) {
        if (q.states[i][0][k]) s.ext[n.pred].insert(Tuple{});
        continue;
      }
      for (std::size_t r = 0; r < q.runs.size(); ++r)
        if (q.states[i][q.runs[r][i]][k]) s.ext[n.pred].insert(Tuple{static_cast<int>(r)});
    }
    t.states.push_back(std::move(s));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Search

namespace detail {

using Bits = boost::dynamic_bitset<>;

// Sentence nodes forced by the root: at instant 0 (`init`) and at every later
// instant (`inner`, from top-level G conjuncts).
inline void collect_forced(const Closure& c, int i, std::vector<char>& out) {
  const auto& n = c.nodes[static_cast<std::size_t>(i)];
  if (n.sentence) {
    if (out[static_cast<std::size_t>(i)]) return;
    out[static_cast<std::size_t>(i)] = 1;
  }
  if (n.kind == ClosureNode::And) {
    collect_forced(c, n.a, out);
    collect_forced(c, n.b, out);
  } else if (n.kind == ClosureNode::Exists) {
    collect_forced(c, n.a, out);
  }
}

// Matches the surrogate pattern of G chi = ~(~false U ~chi) or ~(true U ~chi); returns chi.
inline int always_body(const Closure& c, int i) {
  const auto& n = c.nodes[static_cast<std::size_t>(i)];
  if (n.kind != ClosureNode::Not) return -1;
  const auto& u = c.nodes[static_cast<std::size_t>(n.a)];
  if (u.kind != ClosureNode::Until) return -1;
  const auto& l = c.nodes[static_cast<std::size_t>(u.a)];
  bool top = l.kind == ClosureNode::True ||
             (l.kind == ClosureNode::Not && c.nodes[static_cast<std::size_t>(l.a)].kind == ClosureNode::False);
  const auto& r = c.nodes[static_cast<std::size_t>(u.b)];
  if (!top || r.kind != ClosureNode::Not) return -1;
  return r.a;
}

// Backward search over sentence valuations. A search state at instant i is
// (sentence valuation, set B of x-valuations (atoms, until mask) that extend
// to the end of the trace, antichain of obligations). Until bits at i are
// determined by the type at i + 1, so only atoms and exists bits are guessed.
class QmSearch {
public:
  struct Val {
    std::uint64_t m = 0, a = 0; // until mask, atom bits
    friend bool operator==(const Val&, const Val&) = default;
    friend auto operator<=>(const Val&, const Val&) = default;
  };

  QmSearch(const Formula& f, Budget& budget) : c_(std::make_shared<Closure>(ftl::closure(f))), budget_(budget) {
    const Closure& c = *c_;
    for (int i : c.x_bases)
      (c.nodes[static_cast<std::size_t>(i)].kind == ClosureNode::Atom ? xatoms_ : xuntils_).push_back(i);
    for (int i : c.s_bases) {
      auto k = c.nodes[static_cast<std::size_t>(i)].kind;
      if (k == ClosureNode::Until) suntils_.push_back(i);
      else decisions_.push_back(i);
    }
    std::sort(decisions_.begin(), decisions_.end());
    if (xatoms_.size() > 16 || xuntils_.size() > 64 || c.s_bases.size() > 64)
      throw Error("closure too large for the quasimodel search");
    sbit_.assign(c.size(), -1);
    for (std::size_t k = 0; k < c.s_bases.size(); ++k) sbit_[static_cast<std::size_t>(c.s_bases[k])] = static_cast<int>(k);
    xpos_.assign(c.size(), -1);
    for (std::size_t k = 0; k < xatoms_.size(); ++k) xpos_[static_cast<std::size_t>(xatoms_[k])] = static_cast<int>(k);
    for (std::size_t k = 0; k < xuntils_.size(); ++k) xpos_[static_cast<std::size_t>(xuntils_[k])] = static_cast<int>(k);
    init_.assign(c.size(), 0);
    inner_.assign(c.size(), 0);
    collect_forced(c, c.root, init_);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (init_[i]) {
        int chi = always_body(c, static_cast<int>(i));
        if (chi >= 0 && c.nodes[static_cast<std::size_t>(chi)].sentence) collect_forced(c, chi, inner_);
      }
    vals_.resize(c.size());
    sval_.assign(c.size(), 0);
  }

  const Closure& closure() const { return *c_; }

  // Shortest quasimodel with at most max_len states (0: no limit).
  std::optional<Quasimodel> run(std::uint64_t max_len) {
    items_.clear();
    seen_.clear();
    std::vector<std::size_t> level;
    std::optional<std::size_t> hit;
    auto collect = [&](std::vector<std::size_t>& out, std::size_t parent) {
      return [&, parent](Item&& it) {
        if (hit) return;
        it.parent = parent;
        if (!seen_.insert(key_of(it)).second) return;
        items_.push_back(std::move(it));
        if (items_.back().accept) hit = items_.size() - 1;
        else if (items_.back().inner) out.push_back(items_.size() - 1);
      };
    };
    predecessors(nullptr, collect(level, SIZE_MAX));
    for (std::uint64_t len = 1; !hit && !level.empty() && (max_len == 0 || len < max_len); ++len) {
      std::vector<std::size_t> next;
      for (std::size_t idx : level) {
        Item cur = items_[idx]; // items_ grows while expanding
        predecessors(&cur, collect(next, idx));
        if (hit) break;
      }
      level.swap(next);
    }
    if (!hit) return std::nullopt;
    std::vector<std::size_t> path;
    for (std::size_t k = *hit; k != SIZE_MAX; k = items_[k].parent) path.push_back(k);
    return build(path);
  }

private:
  struct Item {
    std::uint64_t sbits = 0;            // over s_bases
    std::vector<Val> vals;              // sorted
    std::vector<std::uint64_t> req;     // until mask demanded of the predecessor, per val
    std::vector<std::vector<std::uint32_t>> obl; // indices into vals
    bool inner = false, accept = false;
    std::size_t parent = SIZE_MAX;
  };

  static std::string key_of(const Item& it) {
    std::string k;
    auto put = [&k](std::uint64_t v) { k.append(reinterpret_cast<const char*>(&v), sizeof v); };
    put(it.sbits);
    put(it.vals.size());
    for (const auto& v : it.vals) {
      put(v.m);
      put(v.a);
    }
    for (const auto& o : it.obl) {
      put(o.size());
      for (auto j : o) put(j);
    }
    return k;
  }

  // Sentence node values for a sentence valuation.
  std::vector<char> sentence_values(std::uint64_t sbits) const {
    const Closure& c = *c_;
    std::vector<char> s(c.size(), 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& n = c.nodes[i];
      if (!n.sentence) continue;
      auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
      switch (n.kind) {
      case ClosureNode::True: s[i] = 1; break;
      case ClosureNode::False: s[i] = 0; break;
      case ClosureNode::Not: s[i] = !s[a]; break;
      case ClosureNode::And: s[i] = s[a] && s[b]; break;
      default: s[i] = (sbits >> sbit_[i]) & 1; break;
      }
    }
    return s;
  }

  QType type_of(std::uint64_t sbits, const Val& v) const {
    const Closure& c = *c_;
    QType t(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& n = c.nodes[i];
      auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
      switch (n.kind) {
      case ClosureNode::True: t[i] = true; break;
      case ClosureNode::False: t[i] = false; break;
      case ClosureNode::Not: t[i] = !t[a]; break;
      case ClosureNode::And: t[i] = t[a] && t[b]; break;
      default:
        if (n.sentence) t[i] = (sbits >> sbit_[i]) & 1;
        else if (n.kind == ClosureNode::Atom) t[i] = (v.a >> xpos_[i]) & 1;
        else t[i] = (v.m >> xpos_[i]) & 1;
      }
    }
    return t;
  }

  std::uint64_t req_of(const QType& t) const {
    std::uint64_t r = 0;
    for (std::size_t k = 0; k < xuntils_.size(); ++k) {
      const auto& n = c_->nodes[static_cast<std::size_t>(xuntils_[k])];
      if (t[static_cast<std::size_t>(n.b)] || (t[static_cast<std::size_t>(n.a)] && t[static_cast<std::size_t>(xuntils_[k])]))
        r |= std::uint64_t{1} << k;
    }
    return r;
  }

  // Per-expansion data: candidate c is (masks[c >> na], c & (2^na - 1)).
  struct Frame {
    const Item* succ = nullptr;
    std::vector<std::uint64_t> masks;
    std::vector<char> snext; // sentence values at the successor
    std::size_t nc = 0;
  };

  template <class Emit>
  void predecessors(const Item* succ, Emit&& emit) {
    const Closure& c = *c_;
    Frame fr;
    fr.succ = succ;
    if (succ) {
      fr.masks = succ->req;
      std::sort(fr.masks.begin(), fr.masks.end());
      fr.masks.erase(std::unique(fr.masks.begin(), fr.masks.end()), fr.masks.end());
      fr.snext = sentence_values(succ->sbits);
    } else {
      fr.masks = {0};
    }
    std::size_t na = xatoms_.size();
    fr.nc = fr.masks.size() << na;
    if (fr.nc > (std::size_t{1} << 24)) throw Error("closure too large for the quasimodel search");
    budget_.charge(1 + fr.nc / 64);
    for (int u : suntils_) {
      const auto& n = c.nodes[static_cast<std::size_t>(u)];
      bool v = succ && (fr.snext[static_cast<std::size_t>(n.b)] ||
                        (fr.snext[static_cast<std::size_t>(n.a)] && fr.snext[static_cast<std::size_t>(u)]));
      sval_[static_cast<std::size_t>(u)] = v;
    }
    Bits live(fr.nc);
    live.set();
    dfs(fr, 0, 0, live, false, false, emit);
  }

  void fill(const Frame& fr, std::size_t i) {
    const Closure& c = *c_;
    const auto& n = c.nodes[i];
    Bits& out = vals_[i];
    auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
    switch (n.kind) {
    case ClosureNode::True: sval_[i] = 1; break;
    case ClosureNode::False: sval_[i] = 0; break;
    case ClosureNode::Not: sval_[i] = !sval_[a]; break;
    case ClosureNode::And: sval_[i] = sval_[a] && sval_[b]; break;
    default: break; // sentence bases are set by the caller
    }
    if (n.sentence) {
      out.resize(fr.nc);
      if (sval_[i]) out.set();
      else out.reset();
      return;
    }
    switch (n.kind) {
    case ClosureNode::Not: out = ~vals_[a]; break;
    case ClosureNode::And: out = vals_[a] & vals_[b]; break;
    case ClosureNode::Atom: {
      out.resize(fr.nc);
      out.reset();
      std::size_t na = xatoms_.size(), k = static_cast<std::size_t>(xpos_[i]);
      for (std::size_t x = 0; x < fr.nc; ++x)
        if (((x & ((std::size_t{1} << na) - 1)) >> k) & 1) out.set(x);
      break;
    }
    case ClosureNode::Until: {
      out.resize(fr.nc);
      out.reset();
      std::size_t na = xatoms_.size(), k = static_cast<std::size_t>(xpos_[i]);
      for (std::size_t mi = 0; mi < fr.masks.size(); ++mi)
        if ((fr.masks[mi] >> k) & 1)
          for (std::size_t x = mi << na; x < (mi + 1) << na; ++x) out.set(x);
      break;
    }
    default: throw Error("internal error: unexpected x-node");
    }
  }

  template <class Emit>
  void dfs(const Frame& fr, std::size_t k, std::size_t from, const Bits& live, bool inner_fail, bool init_fail,
           Emit& emit) {
    budget_.charge();
    const Closure& c = *c_;
    std::size_t to = k < decisions_.size() ? static_cast<std::size_t>(decisions_[k]) : c.size();
    for (std::size_t i = from; i < to; ++i) {
      fill(fr, i);
      if (!c.nodes[i].sentence) continue;
      if (inner_[i] && !sval_[i]) inner_fail = true;
      if (init_[i] && !sval_[i]) init_fail = true;
    }
    if (inner_fail && init_fail) return;
    if (k == decisions_.size()) {
      leaf(fr, live, inner_fail, init_fail, emit);
      return;
    }
    const auto d = static_cast<std::size_t>(decisions_[k]);
    const auto& n = c.nodes[d];
    auto branch = [&](bool v, const Bits& lv) {
      sval_[d] = v;
      vals_[d].resize(fr.nc);
      if (v) vals_[d].set();
      else vals_[d].reset();
      bool inf = inner_fail || (inner_[d] && !v), itf = init_fail || (init_[d] && !v);
      if (inf && itf) return;
      dfs(fr, k + 1, d + 1, lv, inf, itf, emit);
    };
    if (n.kind == ClosureNode::Atom) {
      branch(false, live);
      branch(true, live);
      return;
    }
    const Bits& body = vals_[static_cast<std::size_t>(n.a)];
    Bits rest = live - body;
    if (rest.any()) branch(false, rest);
    if (live.intersects(body)) branch(true, live);
  }

  template <class Emit>
  void leaf(const Frame& fr, const Bits& live, bool inner_fail, bool init_fail, Emit& emit) {
    const Closure& c = *c_;
    for (int e : c.exists)
      if (sval_[static_cast<std::size_t>(e)] && !live.intersects(vals_[static_cast<std::size_t>(c.nodes[static_cast<std::size_t>(e)].a)]))
        return;
    Item it;
    for (std::size_t k = 0; k < c.s_bases.size(); ++k)
      if (sval_[static_cast<std::size_t>(c.s_bases[k])]) it.sbits |= std::uint64_t{1} << k;
    std::size_t na = xatoms_.size();
    std::vector<std::size_t> cand;
    for (std::size_t x = live.find_first(); x != Bits::npos; x = live.find_next(x)) {
      cand.push_back(x);
      it.vals.push_back({fr.masks[x >> na], x & ((std::size_t{1} << na) - 1)});
      std::uint64_t r = 0;
      for (std::size_t u = 0; u < xuntils_.size(); ++u) {
        const auto& n = c.nodes[static_cast<std::size_t>(xuntils_[u])];
        if (vals_[static_cast<std::size_t>(n.b)][x] ||
            (vals_[static_cast<std::size_t>(n.a)][x] && vals_[static_cast<std::size_t>(xuntils_[u])][x]))
          r |= std::uint64_t{1} << u;
      }
      it.req.push_back(r);
    }
    for (int e : c.exists) {
      if (!sval_[static_cast<std::size_t>(e)]) continue;
      const Bits& body = vals_[static_cast<std::size_t>(c.nodes[static_cast<std::size_t>(e)].a)];
      std::vector<std::uint32_t> o;
      for (std::size_t j = 0; j < cand.size(); ++j)
        if (body[cand[j]]) o.push_back(static_cast<std::uint32_t>(j));
      it.obl.push_back(std::move(o));
    }
    if (fr.succ) {
      for (const auto& o2 : fr.succ->obl) {
        std::vector<std::uint64_t> want;
        for (auto j : o2) want.push_back(fr.succ->req[j]);
        std::sort(want.begin(), want.end());
        std::vector<std::uint32_t> o;
        for (std::size_t j = 0; j < it.vals.size(); ++j)
          if (std::binary_search(want.begin(), want.end(), it.vals[j].m)) o.push_back(static_cast<std::uint32_t>(j));
        if (o.empty()) return;
        it.obl.push_back(std::move(o));
      }
    }
    normalise(it.obl);
    it.inner = !inner_fail;
    it.accept = !init_fail && sval_[static_cast<std::size_t>(c.root)];
    emit(std::move(it));
  }

  // Keeps the minimal obligation sets.
  static void normalise(std::vector<std::vector<std::uint32_t>>& obl) {
    std::sort(obl.begin(), obl.end(), [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return a.size() < b.size();
      return a < b;
    });
    obl.erase(std::unique(obl.begin(), obl.end()), obl.end());
    std::vector<std::vector<std::uint32_t>> keep;
    for (const auto& o : obl)
      if (std::none_of(keep.begin(), keep.end(),
                       [&](const auto& k) { return std::includes(o.begin(), o.end(), k.begin(), k.end()); }))
        keep.push_back(o);
    obl.swap(keep);
  }

  // One witness run per (instant, true exists node); path[0] is instant 0.
  Quasimodel build(const std::vector<std::size_t>& path) {
    const Closure& c = *c_;
    std::size_t n = path.size();
    auto item = [&](std::size_t i) -> const Item& { return items_[path[i]]; };
    std::vector<std::vector<char>> fwd(n);
    fwd[0].assign(item(0).vals.size(), 1);
    for (std::size_t i = 1; i < n; ++i) {
      std::set<std::uint64_t> ms;
      for (std::size_t j = 0; j < item(i - 1).vals.size(); ++j)
        if (fwd[i - 1][j]) ms.insert(item(i - 1).vals[j].m);
      fwd[i].assign(item(i).vals.size(), 0);
      for (std::size_t j = 0; j < item(i).vals.size(); ++j) fwd[i][j] = ms.count(item(i).req[j]) > 0;
    }
    std::vector<std::vector<QType>> types(n);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& v : item(i).vals) types[i].push_back(type_of(item(i).sbits, v));
    auto run_through = [&](std::size_t i, std::size_t j) {
      std::vector<std::size_t> r(n);
      r[i] = j;
      for (std::size_t t = i; t-- > 0;) {
        std::uint64_t want = item(t + 1).req[r[t + 1]];
        std::size_t pick = SIZE_MAX;
        for (std::size_t u = 0; u < item(t).vals.size() && pick == SIZE_MAX; ++u)
          if (fwd[t][u] && item(t).vals[u].m == want) pick = u;
        if (pick == SIZE_MAX) throw Error("internal error: run cannot be extended backwards");
        r[t] = pick;
      }
      for (std::size_t t = i + 1; t < n; ++t) {
        std::uint64_t m = item(t - 1).vals[r[t - 1]].m;
        std::size_t pick = SIZE_MAX;
        for (std::size_t u = 0; u < item(t).vals.size() && pick == SIZE_MAX; ++u)
          if (fwd[t][u] && item(t).req[u] == m) pick = u;
        if (pick == SIZE_MAX) throw Error("internal error: run cannot be extended forwards");
        r[t] = pick;
      }
      if (n > 0 && !final_type(c, types[n - 1][r[n - 1]])) throw Error("internal error: run does not end");
      return r;
    };
    std::set<std::vector<std::size_t>> runs;
    for (std::size_t i = 0; i < n; ++i)
      for (int e : c.exists) {
        if (!types[i].front()[static_cast<std::size_t>(e)]) continue;
        auto body = static_cast<std::size_t>(c.nodes[static_cast<std::size_t>(e)].a);
        std::size_t pick = SIZE_MAX;
        for (std::size_t j = 0; j < types[i].size() && pick == SIZE_MAX; ++j)
          if (fwd[i][j] && types[i][j][body]) pick = j;
        if (pick == SIZE_MAX) throw Error("internal error: no witness for " + c.describe(e));
        runs.insert(run_through(i, pick));
      }
    if (runs.empty()) runs.insert(run_through(0, 0));
    Quasimodel q;
    q.closure = c_;
    std::vector<std::map<std::size_t, std::size_t>> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::set<std::size_t> used;
      for (const auto& r : runs) used.insert(r[i]);
      std::vector<std::pair<QType, std::size_t>> ts;
      for (std::size_t j : used) ts.emplace_back(types[i][j], j);
      std::sort(ts.begin(), ts.end());
      StateCandidate sc;
      for (std::size_t k = 0; k < ts.size(); ++k) {
        sc.push_back(ts[k].first);
        pos[i][ts[k].second] = k;
      }
      q.states.push_back(std::move(sc));
    }
    for (const auto& r : runs) {
      std::vector<std::size_t> rr(n);
      for (std::size_t i = 0; i < n; ++i) rr[i] = pos[i].at(r[i]);
      q.runs.push_back(std::move(rr));
    }
    if (auto err = verify_quasimodel(q); !err.empty()) throw Error("internal error: " + err);
    if (!eval(extract_trace(q), c.normalised)) throw Error("internal error: extracted trace does not satisfy the formula");
    return q;
  }

  std::shared_ptr<Closure> c_;
  Budget& budget_;
  std::vector<int> xatoms_, xuntils_, suntils_, decisions_;
  std::vector<int> sbit_, xpos_;
  std::vector<char> init_, inner_;
  std::vector<Bits> vals_;
  std::vector<char> sval_;
  std::vector<Item> items_;
  std::unordered_set<std::string> seen_;
};

} // namespace detail

// Shortest quasimodel with at most k states. Throws BudgetExceeded when the
// budget runs out, which is distinct from None.
inline std::optional<Quasimodel> sat_bounded(const Formula& f, std::uint64_t k, Budget& budget = Budget::unlimited()) {
  if (k == 0) throw Error("k must be at least 1");
  detail::QmSearch s(f, budget);
  return s.run(k);
}

// Unbounded finite-trace satisfiability: the search stops once no new search
// state appears, so None means unsatisfiable on all finite traces.
inline std::optional<Quasimodel> sat_finite(const Formula& f, Budget& budget = Budget::unlimited()) {
  detail::QmSearch s(f, budget);
  return s.run(0);
}

// 2^exponent, kept symbolic since the exponent itself may be large.
struct Pow2 {
  BigInt exponent;
  bool bounds(const BigInt& v) const { // v <= 2^exponent
    if (v <= 0) return true;
    BigInt msb = boost::multiprecision::msb(v);
    if (msb < exponent) return true;
    return msb == exponent && v == (BigInt(1) << static_cast<unsigned>(msb));
  }
  std::string str() const {
    if (exponent <= 4096) return (BigInt(1) << static_cast<unsigned>(exponent)).str();
    return "2^" + exponent.str();
  }
};

struct SizeBounds {
  Pow2 trace;  // 2^(2^|f|)
  Pow2 domain; // |types|^k * 2^|types| with |types| = 2^atoms
  std::size_t atoms = 0, formula_size = 0;
};

inline BigInt pow2(std::size_t e) { return BigInt(1) << static_cast<unsigned>(e); }

inline SizeBounds bounds(const Formula& f, const BigInt& k) {
  Closure c = closure(f);
  SizeBounds b;
  b.atoms = c.size();
  b.formula_size = static_cast<std::size_t>(f->size);
  b.trace.exponent = pow2(b.formula_size);
  b.domain.exponent = BigInt(b.atoms) * k + pow2(b.atoms);
  return b;
}

} // namespace ftl
