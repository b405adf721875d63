#pragma once

// Compiled evaluator. Every core subformula becomes a node whose value at an
// instant is a bit table over assignments to its free variables. Tables are
// computed bottom-up per instant; an Until node reads the "continuation" table
// W = b | (a & U) of the next instant from a signature vector, which is all
// a backward pass needs to carry between instants.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl {

using Word = std::uint64_t;

inline std::size_t words_for(std::size_t bits) { return std::max<std::size_t>(1, (bits + 63) / 64); }
inline bool test_bit(const Word* w, std::size_t i) { return (w[i >> 6] >> (i & 63)) & 1; }
inline void set_bit(Word* w, std::size_t i) { w[i >> 6] |= Word{1} << (i & 63); }

// Fixed-width word vectors interned to dense ids.
class Interner {
public:
  explicit Interner(std::size_t width = 1) : w_(width), slots_(1024, kEmpty) {}

  std::size_t width() const { return w_; }
  std::size_t size() const { return count_; }
  const Word* get(std::uint32_t id) const { return data_.data() + static_cast<std::size_t>(id) * w_; }

  std::uint32_t intern(const Word* key) {
    std::size_t mask = slots_.size() - 1;
    for (std::size_t h = hash(key) & mask;; h = (h + 1) & mask) {
      std::uint32_t id = slots_[h];
      if (id == kEmpty) {
        id = static_cast<std::uint32_t>(count_++);
        data_.insert(data_.end(), key, key + w_);
        slots_[h] = id;
        if (count_ * 2 > slots_.size()) grow();
        return id;
      }
      if (std::memcmp(get(id), key, w_ * sizeof(Word)) == 0) return id;
    }
  }

  // Returns the id or kEmpty when absent.
  std::uint32_t find(const Word* key) const {
    std::size_t mask = slots_.size() - 1;
    for (std::size_t h = hash(key) & mask;; h = (h + 1) & mask) {
      std::uint32_t id = slots_[h];
      if (id == kEmpty || std::memcmp(get(id), key, w_ * sizeof(Word)) == 0) return id;
    }
  }

  static constexpr std::uint32_t kEmpty = 0xffffffffu;

private:
  std::size_t hash(const Word* k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ w_;
    for (std::size_t i = 0; i < w_; ++i) {
      h ^= k[i];
      h *= 0xff51afd7ed558ccdULL;
      h ^= h >> 32;
    }
    return static_cast<std::size_t>(h);
  }
  void grow() {
    std::vector<std::uint32_t> fresh(slots_.size() * 2, kEmpty);
    std::size_t mask = fresh.size() - 1;
    for (std::size_t id = 0; id < count_; ++id) {
      std::size_t h = hash(get(static_cast<std::uint32_t>(id))) & mask;
      while (fresh[h] != kEmpty) h = (h + 1) & mask;
      fresh[h] = static_cast<std::uint32_t>(id);
    }
    slots_.swap(fresh);
  }

  std::size_t w_;
  std::size_t count_ = 0;
  std::vector<Word> data_;
  std::vector<std::uint32_t> slots_;
};

class Engine {
public:
  static constexpr std::uint32_t kNone = 0xffffffffu;

  struct CNode {
    Op op;
    int a = -1, b = -1;
    std::vector<std::string> fv;
    std::size_t size = 1;
    std::size_t words = 1;
    std::size_t off = 0;
    std::vector<std::uint32_t> map_a, map_b; // parent assignment -> child assignment
    std::vector<std::uint32_t> atom_bits;
    std::vector<std::uint32_t> proj;
    std::size_t w_off = 0; // Until: offset of W inside the signature
  };

  // `constants` maps constant names to element indices; every constant of the
  // formula must be present. Predicates missing from `voc` are empty.
  Engine(const Formula& f, const Vocabulary& voc, const std::map<std::string, int>& constants,
         const std::vector<Formula>& extras = {})
      : voc_(voc), n_(voc.domain_size), constants_(constants) {
    root_ = add(is_core(f) ? f : expand(f));
    for (const auto& e : extras) extras_.push_back(add(is_core(e) ? e : expand(e)));
    layout();
  }

  const Vocabulary& vocabulary() const { return voc_; }
  std::size_t domain_size() const { return n_; }
  std::size_t scratch_words() const { return scratch_words_; }
  std::size_t sig_words() const { return sig_words_; }
  std::size_t sig_offset() const { return sig_off_; }
  std::size_t node_count() const { return nodes_.size(); }
  const CNode& node(std::size_t k) const { return nodes_[k]; }
  int root() const { return root_; }
  int extra(std::size_t i) const { return extras_.at(i); }
  const std::vector<std::string>& root_vars() const { return nodes_[static_cast<std::size_t>(root_)].fv; }
  std::size_t root_size() const { return nodes_[static_cast<std::size_t>(root_)].size; }
  std::size_t until_count() const { return untils_.size(); }

  // Root table inside a signature.
  const Word* root_in_sig(const Word* sig) const { return sig + root_sig_off_; }
  bool root_bit(const Word* sig, std::size_t assignment) const { return test_bit(root_in_sig(sig), assignment); }
  bool root_any(const Word* sig) const {
    const Word* r = root_in_sig(sig);
    for (std::size_t i = 0; i < nodes_[static_cast<std::size_t>(root_)].words; ++i)
      if (r[i]) return true;
    return false;
  }
  const Word* table(const Word* scratch, int k) const { return scratch + nodes_[static_cast<std::size_t>(k)].off; }
  bool all_true(const Word* scratch, int k) const {
    const CNode& nd = nodes_[static_cast<std::size_t>(k)];
    const Word* t = scratch + nd.off;
    for (std::size_t i = 0; i < nd.size; ++i)
      if (!test_bit(t, i)) return false;
    return true;
  }

  // Decodes an assignment index of the root into variable -> element.
  std::map<std::string, int> root_assignment(std::size_t idx) const {
    std::map<std::string, int> out;
    for (const auto& v : root_vars()) {
      out[v] = static_cast<int>(idx % n_);
      idx /= n_;
    }
    return out;
  }
  std::size_t root_index(const std::map<std::string, int>& asg) const {
    std::size_t idx = 0, mul = 1;
    for (const auto& v : root_vars()) {
      auto it = asg.find(v);
      if (it == asg.end()) throw Error("unbound free variable " + v);
      if (it->second < 0 || it->second >= static_cast<int>(n_)) throw Error("assignment outside the domain");
      idx += static_cast<std::size_t>(it->second) * mul;
      mul *= n_;
    }
    return idx;
  }

  // Evaluates one instant. `next_sig` is the signature of the following
  // instant, or null at the last instant of a finite trace. Afterwards the
  // signature of this instant is at scratch + sig_offset().
  void step(const Word* state, const Word* next_sig, Word* scratch) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) compute(k, state, next_sig, scratch);
    for (int u : untils_) write_w(static_cast<std::size_t>(u), scratch);
    copy_root(scratch);
  }

  // Evaluates every instant of a finite trace; returns one scratch per instant.
  std::vector<Word> eval_finite(const std::vector<const Word*>& states) const {
    std::size_t len = states.size(), sw = scratch_words_;
    std::vector<Word> buf(len * sw, 0);
    for (std::size_t i = len; i-- > 0;)
      step(states[i], i + 1 < len ? buf.data() + (i + 1) * sw + sig_off_ : nullptr, buf.data() + i * sw);
    return buf;
  }

  // Evaluates every instant of the lasso states[0..ls) states[ls..]^omega.
  // Until nodes take the least fixpoint around the loop.
  std::vector<Word> eval_lasso(const std::vector<const Word*>& states, std::size_t ls) const {
    std::size_t len = states.size(), sw = scratch_words_;
    std::vector<Word> buf(len * sw, 0);
    auto at = [&](std::size_t i) { return buf.data() + i * sw; };
    auto nxt = [&](std::size_t i) { return i + 1 < len ? i + 1 : ls; };
    std::vector<Word> tmp(max_words_);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const CNode& nd = nodes_[k];
      if (nd.op != Op::Until) {
        for (std::size_t i = 0; i < len; ++i) compute(k, states[i], nullptr, at(i));
        continue;
      }
      for (std::size_t i = 0; i < len; ++i) std::fill_n(at(i) + nd.off, nd.words, 0);
      for (std::size_t i = 0; i < len; ++i) write_w(k, at(i));
      bool changed = true;
      while (changed) {
        changed = false;
        for (std::size_t i = len; i-- > ls;) {
          Word* u = at(i) + nd.off;
          const Word* w = at(nxt(i)) + sig_off_ + nd.w_off;
          if (std::memcmp(u, w, nd.words * sizeof(Word)) != 0) {
            std::memcpy(u, w, nd.words * sizeof(Word));
            write_w(k, at(i));
            changed = true;
          }
        }
      }
      for (std::size_t i = ls; i-- > 0;) {
        std::memcpy(at(i) + nd.off, at(i + 1) + sig_off_ + nd.w_off, nd.words * sizeof(Word));
        write_w(k, at(i));
      }
    }
    for (std::size_t i = 0; i < len; ++i) copy_root(at(i));
    return buf;
  }

private:
  int add(const Formula& f) {
    if (auto it = index_.find(f); it != index_.end()) return it->second;
    CNode nd;
    nd.op = f->op;
    if (f->lhs) nd.a = add(f->lhs);
    if (f->rhs) nd.b = add(f->rhs);
    switch (f->op) {
    case Op::True: case Op::False:
      break;
    case Op::Atom: {
      std::set<std::string> vs;
      for (const auto& t : f->args)
        if (t.is_var) vs.insert(t.name);
      nd.fv.assign(vs.begin(), vs.end());
      break;
    }
    case Op::Not:
      nd.fv = nodes_[static_cast<std::size_t>(nd.a)].fv;
      break;
    case Op::And: case Op::Until: {
      std::set<std::string> vs(nodes_[static_cast<std::size_t>(nd.a)].fv.begin(),
                               nodes_[static_cast<std::size_t>(nd.a)].fv.end());
      vs.insert(nodes_[static_cast<std::size_t>(nd.b)].fv.begin(), nodes_[static_cast<std::size_t>(nd.b)].fv.end());
      nd.fv.assign(vs.begin(), vs.end());
      break;
    }
    case Op::Exists: {
      for (const auto& v : nodes_[static_cast<std::size_t>(nd.a)].fv)
        if (v != f->name) nd.fv.push_back(v);
      break;
    }
    default:
      throw Error("engine expects a core formula");
    }
    nd.size = 1;
    for (std::size_t i = 0; i < nd.fv.size(); ++i) nd.size *= n_;
    if (nd.size > (std::size_t{1} << 26)) throw Error("assignment table too large");
    nd.words = words_for(nd.size);

    auto child_map = [&](int c) {
      std::vector<std::uint32_t> m;
      const auto& cfv = nodes_[static_cast<std::size_t>(c)].fv;
      if (cfv == nd.fv) return m;
      m.resize(nd.size);
      for (std::size_t i = 0; i < nd.size; ++i) m[i] = static_cast<std::uint32_t>(project(nd.fv, i, cfv, {}, 0));
      return m;
    };

    switch (f->op) {
    case Op::Atom: {
      int p = voc_.index(f->name);
      if (p >= 0 && voc_.arity[static_cast<std::size_t>(p)] != static_cast<int>(f->args.size()))
        throw Error("arity mismatch for predicate " + f->name);
      nd.atom_bits.resize(nd.size);
      for (std::size_t i = 0; i < nd.size; ++i) {
        Tuple t;
        for (const auto& a : f->args) {
          if (a.is_var) {
            auto pos = static_cast<std::size_t>(std::find(nd.fv.begin(), nd.fv.end(), a.name) - nd.fv.begin());
            t.push_back(digit(i, pos));
          } else {
            auto it = constants_.find(a.name);
            if (it == constants_.end()) throw Error("constant " + a.name + " has no interpretation");
            t.push_back(it->second);
          }
        }
        nd.atom_bits[i] = p < 0 ? kNone : static_cast<std::uint32_t>(voc_.bit(p, t));
      }
      break;
    }
    case Op::And: case Op::Until:
      nd.map_a = child_map(nd.a);
      nd.map_b = child_map(nd.b);
      break;
    case Op::Exists: {
      const auto& cfv = nodes_[static_cast<std::size_t>(nd.a)].fv;
      bool binds = std::find(cfv.begin(), cfv.end(), f->name) != cfv.end();
      std::size_t reps = binds ? n_ : 1;
      nd.proj.resize(nd.size * reps);
      for (std::size_t i = 0; i < nd.size; ++i)
        for (std::size_t e = 0; e < reps; ++e)
          nd.proj[i * reps + e] = static_cast<std::uint32_t>(project(nd.fv, i, cfv, f->name, e));
      break;
    }
    default:
      break;
    }
    nodes_.push_back(std::move(nd));
    int id = static_cast<int>(nodes_.size() - 1);
    index_.emplace(f, id);
    return id;
  }

  int digit(std::size_t idx, std::size_t pos) const {
    for (std::size_t i = 0; i < pos; ++i) idx /= n_;
    return static_cast<int>(idx % n_);
  }

  // Index in `to` of the assignment `idx` over `from`, with variable `extra`
  // (absent from `from`) set to `e`.
  std::size_t project(const std::vector<std::string>& from, std::size_t idx, const std::vector<std::string>& to,
                      const std::string& extra, std::size_t e) const {
    std::size_t out = 0, mul = 1;
    for (const auto& v : to) {
      std::size_t val;
      if (v == extra) val = e;
      else {
        auto pos = static_cast<std::size_t>(std::find(from.begin(), from.end(), v) - from.begin());
        val = static_cast<std::size_t>(digit(idx, pos));
      }
      out += val * mul;
      mul *= n_;
    }
    return out;
  }

  void layout() {
    std::size_t off = 0;
    for (auto& nd : nodes_) {
      nd.off = off;
      off += nd.words;
      max_words_ = std::max(max_words_, nd.words);
    }
    sig_off_ = off;
    std::size_t s = 0;
    for (std::size_t k = 0; k < nodes_.size(); ++k)
      if (nodes_[k].op == Op::Until) {
        nodes_[k].w_off = s;
        s += nodes_[k].words;
        untils_.push_back(static_cast<int>(k));
      }
    root_sig_off_ = s;
    s += nodes_[static_cast<std::size_t>(root_)].words;
    sig_words_ = s;
    tmp_off_ = sig_off_ + sig_words_;
    scratch_words_ = tmp_off_ + 2 * max_words_;
  }

  // Child table seen through a parent's assignment map.
  void load(const Word* scratch, int c, const std::vector<std::uint32_t>& map, std::size_t size, Word* out) const {
    const CNode& ch = nodes_[static_cast<std::size_t>(c)];
    const Word* src = scratch + ch.off;
    if (map.empty()) {
      std::memcpy(out, src, ch.words * sizeof(Word));
      return;
    }
    std::fill_n(out, words_for(size), 0);
    for (std::size_t i = 0; i < size; ++i)
      if (test_bit(src, map[i])) set_bit(out, i);
  }

  void mask_tail(Word* t, const CNode& nd) const {
    std::size_t r = nd.size & 63;
    if (r) t[nd.words - 1] &= (Word{1} << r) - 1;
  }

  void compute(std::size_t k, const Word* state, const Word* next_sig, Word* scratch) const {
    const CNode& nd = nodes_[k];
    Word* t = scratch + nd.off;
    switch (nd.op) {
    case Op::True:
      t[0] = 1;
      return;
    case Op::False:
      t[0] = 0;
      return;
    case Op::Atom:
      std::fill_n(t, nd.words, 0);
      for (std::size_t i = 0; i < nd.size; ++i) {
        std::uint32_t b = nd.atom_bits[i];
        if (b != kNone && test_bit(state, b)) set_bit(t, i);
      }
      return;
    case Op::Not: {
      const Word* c = scratch + nodes_[static_cast<std::size_t>(nd.a)].off;
      for (std::size_t i = 0; i < nd.words; ++i) t[i] = ~c[i];
      mask_tail(t, nd);
      return;
    }
    case Op::And: {
      Word* x = scratch + tmp_off_;
      Word* y = x + max_words_;
      load(scratch, nd.a, nd.map_a, nd.size, x);
      load(scratch, nd.b, nd.map_b, nd.size, y);
      for (std::size_t i = 0; i < nd.words; ++i) t[i] = x[i] & y[i];
      return;
    }
    case Op::Exists: {
      const Word* c = scratch + nodes_[static_cast<std::size_t>(nd.a)].off;
      std::size_t reps = nd.proj.size() / nd.size;
      std::fill_n(t, nd.words, 0);
      for (std::size_t i = 0; i < nd.size; ++i)
        for (std::size_t e = 0; e < reps; ++e)
          if (test_bit(c, nd.proj[i * reps + e])) {
            set_bit(t, i);
            break;
          }
      return;
    }
    case Op::Until:
      if (next_sig) std::memcpy(t, next_sig + nd.w_off, nd.words * sizeof(Word));
      else std::fill_n(t, nd.words, 0);
      return;
    default:
      return;
    }
  }

  void write_w(std::size_t k, Word* scratch) const {
    const CNode& nd = nodes_[k];
    Word* x = scratch + tmp_off_;
    Word* y = x + max_words_;
    load(scratch, nd.a, nd.map_a, nd.size, x);
    load(scratch, nd.b, nd.map_b, nd.size, y);
    const Word* u = scratch + nd.off;
    Word* w = scratch + sig_off_ + nd.w_off;
    for (std::size_t i = 0; i < nd.words; ++i) w[i] = y[i] | (x[i] & u[i]);
  }

  void copy_root(Word* scratch) const {
    const CNode& r = nodes_[static_cast<std::size_t>(root_)];
    std::memcpy(scratch + sig_off_ + root_sig_off_, scratch + r.off, r.words * sizeof(Word));
  }

  Vocabulary voc_;
  std::size_t n_;
  std::map<std::string, int> constants_;
  std::vector<CNode> nodes_;
  FormulaMap<int> index_;
  std::vector<int> untils_;
  std::vector<int> extras_;
  int root_ = -1;
  std::size_t max_words_ = 1;
  std::size_t sig_off_ = 0, sig_words_ = 0, root_sig_off_ = 0, tmp_off_ = 0, scratch_words_ = 0;
};

} // namespace ftl
