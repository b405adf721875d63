#pragma once

// Exhaustive bounded searches over bit-encoded traces. Instead of visiting
// every state sequence, the searches work backwards over evaluator
// signatures: two suffixes with the same signature are interchangeable, so
// each level keeps one lexicographically least representative per signature.

#include <cstdint>
#include <functional>
#include <optional>
#include <map>
#include <set>
#include <unordered_map>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "ftl/error.hpp"
#include "ftl/eval.hpp"

namespace ftl {

struct DpWitness {
  std::vector<Word> states;
  std::optional<std::size_t> loop_start;
  std::size_t assignment = 0;
};

// Decides acceptance from the signature of instant 0 and the first state;
// returns the accepted assignment index.
using Acceptor = std::function<std::optional<std::size_t>(const Word* sig, Word first)>;
// May state `s` immediately precede state `next`?
using Link = std::function<bool(Word s, Word next)>;

inline Acceptor accept_root_any(const Engine& eng) {
  return [&eng](const Word* sig, Word) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < eng.root_size(); ++i)
      if (eng.root_bit(sig, i)) return i;
    return std::nullopt;
  };
}

inline std::vector<Word> all_states(const Vocabulary& voc) {
  if (voc.bits > 30) throw Error("state space exceeds the enumeration cap");
  std::vector<Word> out(std::size_t{1} << voc.bits);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

struct SearchOptions {
  std::vector<int> invariants; // nodes that must hold for every assignment at every instant
  Link link;                   // optional adjacency filter
  // Part of a state that `link` and the acceptor look at; states with equal
  // class and signature are interchangeable.
  std::function<std::uint32_t(Word)> link_class;
  std::size_t max_loop = 0; // lasso loops longer than this are skipped (0: no limit)
};

namespace detail {
inline std::uint64_t dedup_key(const SearchOptions& opt, std::uint32_t sig, Word s) {
  std::uint64_t c = opt.link_class ? opt.link_class(s) : 0;
  return (std::uint64_t{sig} << 20) ^ c;
}

struct LevelEntry {
  std::uint32_t sig;
  Word state;
  std::uint32_t parent;
};
} // namespace detail

// Finite traces of length 1..max_len over `alphabet` (sorted ascending).
// Returns the first accepted trace in (length, lexicographic) order.
inline std::optional<DpWitness> finite_dp(const Engine& eng, const std::vector<Word>& alphabet, std::size_t max_len,
                                          const Acceptor& accept, Budget& budget, const SearchOptions& opt = {}) {
  using detail::LevelEntry;
  const std::size_t sw = eng.sig_words();
  Interner sigs(sw);
  std::vector<Word> scratch(eng.scratch_words());
  std::vector<std::vector<LevelEntry>> levels;
  std::unordered_set<std::uint64_t> seen_any;

  auto sig_ok = [&]() {
    for (int k : opt.invariants)
      if (!eng.all_true(scratch.data(), k)) return false;
    return true;
  };

  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<LevelEntry> cur;
    std::unordered_set<std::uint64_t> in_level;
    bool fresh = false;
    auto push = [&](Word s, std::uint32_t parent) {
      if (!sig_ok()) return;
      std::uint32_t id = sigs.intern(scratch.data() + eng.sig_offset());
      std::uint64_t key = detail::dedup_key(opt, id, s);
      if (!in_level.insert(key).second) return;
      if (!seen_any.count(key)) fresh = true;
      cur.push_back({id, s, parent});
    };
    if (len == 1) {
      for (Word s : alphabet) {
        budget.charge();
        eng.step(&s, nullptr, scratch.data());
        push(s, 0);
      }
    } else {
      const auto& prev = levels.back();
      for (Word s : alphabet)
        for (std::uint32_t p = 0; p < prev.size(); ++p) {
          if (opt.link && !opt.link(s, prev[p].state)) continue;
          budget.charge();
          eng.step(&s, sigs.get(prev[p].sig), scratch.data());
          push(s, p);
        }
    }
    levels.push_back(std::move(cur));
    for (const auto& e : levels.back()) {
      if (auto a = accept(sigs.get(e.sig), e.state)) {
        DpWitness w;
        w.assignment = *a;
        std::size_t lv = levels.size() - 1;
        const LevelEntry* x = &e;
        for (;;) {
          w.states.push_back(x->state);
          if (lv == 0) break;
          x = &levels[lv - 1][x->parent];
          --lv;
        }
        return w;
      }
    }
    if (!fresh) break; // nothing new: longer traces reach no new signature
    for (const auto& e : levels.back()) seen_any.insert(detail::dedup_key(opt, e.sig, e.state));
  }
  return std::nullopt;
}

// Canonical lassos with stem+loop <= max_len. Loop states come from
// `loop_alpha`, stem states from `stem_alpha` (both sorted). Order of the
// first witness: total length, loop length, then the state word.
inline std::optional<DpWitness> lasso_dp(const Engine& eng, const std::vector<Word>& stem_alpha,
                                         const std::vector<Word>& loop_alpha, std::size_t max_len,
                                         const Acceptor& accept, Budget& budget, const SearchOptions& opt = {}) {
  using detail::LevelEntry;
  const std::size_t sw = eng.sig_words(), scw = eng.scratch_words(), soff = eng.sig_offset();
  Interner sigs(sw);
  std::vector<Word> scratch(scw);

  // Per loop length: groups keyed by (start signature, last loop state), each
  // with its least loop word, in lexicographic order of that word.
  struct Group {
    std::uint32_t sig;
    std::vector<Word> loop;
  };
  struct PerLength {
    std::vector<Group> groups;
    std::vector<std::vector<LevelEntry>> levels; // levels[j]: stems of length j+1
    std::unordered_set<std::uint64_t> seen;
    bool exhausted = false;
  };
  std::vector<PerLength> per(max_len + 1);

  auto loop_groups = [&](std::size_t m) {
    std::map<std::tuple<std::uint32_t, Word, std::uint32_t>, std::vector<Word>> best;
    const std::size_t alpha = loop_alpha.size();
    std::vector<std::size_t> idx(m, 0);
    std::vector<Word> w(m);
    std::vector<const Word*> ptrs(m);
    for (;;) {
      for (std::size_t i = 0; i < m; ++i) w[i] = loop_alpha[idx[i]];
      // visit each necklace once, through its least rotation
      bool least = primitive_period(w) == m;
      for (std::size_t r = 1; r < m && least; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
          Word x = w[(r + i) % m], y = w[i];
          if (x != y) {
            if (x < y) least = false;
            break;
          }
        }
      }
      if (least) {
        budget.charge(m);
        for (std::size_t i = 0; i < m; ++i) ptrs[i] = &w[i];
        auto buf = eng.eval_lasso(ptrs, 0);
        bool ok = true;
        for (int k : opt.invariants)
          for (std::size_t i = 0; i < m && ok; ++i) ok = eng.all_true(buf.data() + i * scw, k);
        if (ok && opt.link)
          for (std::size_t i = 0; i < m && ok; ++i) ok = opt.link(w[i], w[(i + 1) % m]);
        if (ok)
          for (std::size_t r = 0; r < m; ++r) {
            std::uint32_t id = sigs.intern(buf.data() + r * scw + soff);
            std::vector<Word> rot(m);
            for (std::size_t i = 0; i < m; ++i) rot[i] = w[(r + i) % m];
            auto key = std::make_tuple(id, rot.back(), opt.link_class ? opt.link_class(rot.front()) : 0u);
            auto it = best.find(key);
            if (it == best.end() || rot < it->second) best[key] = rot;
          }
      }
      std::size_t i = m;
      bool done = true;
      while (i > 0) {
        --i;
        if (++idx[i] < alpha) { done = false; break; }
        idx[i] = 0;
      }
      if (done) break;
    }
    std::vector<Group> gs;
    for (auto& [k, loop] : best) gs.push_back({std::get<0>(k), loop});
    std::sort(gs.begin(), gs.end(), [](const Group& a, const Group& b) { return a.loop < b.loop; });
    return gs;
  };

  auto witness_from = [&](std::size_t m, std::size_t stem_len, std::uint32_t entry, std::size_t asg) {
    PerLength& pl = per[m];
    DpWitness w;
    w.assignment = asg;
    std::uint32_t e = entry;
    for (std::size_t lv = stem_len; lv-- > 0;) {
      const LevelEntry& x = pl.levels[lv][e];
      w.states.push_back(x.state);
      e = x.parent;
    }
    const Group& g = pl.groups[e];
    w.states.insert(w.states.end(), g.loop.begin(), g.loop.end());
    w.loop_start = stem_len;
    return w;
  };

  for (std::size_t total = 1; total <= max_len; ++total) {
    for (std::size_t m = 1; m <= total; ++m) {
      if (opt.max_loop && m > opt.max_loop) break;
      PerLength& pl = per[m];
      std::size_t stem_len = total - m;
      if (stem_len == 0) {
        pl.groups = loop_groups(m);
        for (std::uint32_t g = 0; g < pl.groups.size(); ++g) {
          const Group& gr = pl.groups[g];
          if (auto a = accept(sigs.get(gr.sig), gr.loop.front())) {
            DpWitness w;
            w.states = gr.loop;
            w.loop_start = 0;
            w.assignment = *a;
            return w;
          }
        }
        for (const auto& gr : pl.groups) pl.seen.insert(detail::dedup_key(opt, gr.sig, gr.loop.front()));
        continue;
      }
      if (pl.exhausted) continue;
      // build stem level stem_len from the previous one
      std::vector<LevelEntry> cur;
      std::unordered_set<std::uint64_t> in_level;
      bool fresh = false;
      for (Word s : stem_alpha) {
        if (stem_len == 1) {
          for (std::uint32_t g = 0; g < pl.groups.size(); ++g) {
            const Group& gr = pl.groups[g];
            if (s == gr.loop.back()) continue;
            if (opt.link && !opt.link(s, gr.loop.front())) continue;
            budget.charge();
            eng.step(&s, sigs.get(gr.sig), scratch.data());
            bool ok = true;
            for (int k : opt.invariants) ok = ok && eng.all_true(scratch.data(), k);
            if (!ok) continue;
            std::uint32_t id = sigs.intern(scratch.data() + soff);
            std::uint64_t key = detail::dedup_key(opt, id, s);
            if (!in_level.insert(key).second) continue;
            if (!pl.seen.count(key)) fresh = true;
            cur.push_back({id, s, g});
          }
        } else {
          const auto& prev = pl.levels[stem_len - 2];
          for (std::uint32_t p = 0; p < prev.size(); ++p) {
            if (opt.link && !opt.link(s, prev[p].state)) continue;
            budget.charge();
            eng.step(&s, sigs.get(prev[p].sig), scratch.data());
            bool ok = true;
            for (int k : opt.invariants) ok = ok && eng.all_true(scratch.data(), k);
            if (!ok) continue;
            std::uint32_t id = sigs.intern(scratch.data() + soff);
            std::uint64_t key = detail::dedup_key(opt, id, s);
            if (!in_level.insert(key).second) continue;
            if (!pl.seen.count(key)) fresh = true;
            cur.push_back({id, s, p});
          }
        }
      }
      pl.levels.push_back(std::move(cur));
      const auto& lv = pl.levels.back();
      for (std::uint32_t e = 0; e < lv.size(); ++e)
        if (auto a = accept(sigs.get(lv[e].sig), lv[e].state)) return witness_from(m, stem_len, e, *a);
      // stems reaching no new signature cannot produce new verdicts later
      if (!fresh) pl.exhausted = true;
      for (const auto& e : lv) pl.seen.insert(detail::dedup_key(opt, e.sig, e.state));
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Product searches. Items pair the signature of a trace with a set of
// signatures of related traces (its extensions, or its finite prefixes).

// Memoized single steps over interned signatures.
class Stepper {
public:
  static constexpr std::uint32_t kEnd = 0xffffffffu;

  Stepper(const Engine& eng, Budget& budget)
      : eng_(eng), budget_(budget), sigs_(eng.sig_words()), scratch_(eng.scratch_words()) {}

  const Engine& engine() const { return eng_; }
  const Word* sig(std::uint32_t id) const { return sigs_.get(id); }
  std::size_t size() const { return sigs_.size(); }

  // Signature of state `s` followed by the trace with signature `next`, or of
  // `s` as a final instant when next == kEnd.
  std::uint32_t step(Word s, std::uint32_t next) {
    std::uint64_t key = (static_cast<std::uint64_t>(s) << 32) | next;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    budget_.charge();
    eng_.step(&s, next == kEnd ? nullptr : sigs_.get(next), scratch_.data());
    std::uint32_t id = sigs_.intern(scratch_.data() + eng_.sig_offset());
    cache_.emplace(key, id);
    return id;
  }

  // Signatures at every position of the loop w^omega.
  std::vector<std::uint32_t> loop(const std::vector<Word>& w) {
    budget_.charge(w.size());
    std::vector<const Word*> ptrs;
    for (const auto& x : w) ptrs.push_back(&x);
    auto buf = eng_.eval_lasso(ptrs, 0);
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < w.size(); ++i)
      out.push_back(sigs_.intern(buf.data() + i * eng_.scratch_words() + eng_.sig_offset()));
    return out;
  }

  // Interned sorted sets of signature ids.
  std::uint32_t set_id(std::vector<std::uint32_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    auto [it, fresh] = set_ids_.emplace(v, static_cast<std::uint32_t>(sets_.size()));
    if (fresh) sets_.push_back(v);
    return it->second;
  }
  const std::vector<std::uint32_t>& set(std::uint32_t id) const { return sets_[id]; }

private:
  const Engine& eng_;
  Budget& budget_;
  Interner sigs_;
  std::vector<Word> scratch_;
  std::unordered_map<std::uint64_t, std::uint32_t> cache_;
  std::map<std::vector<std::uint32_t>, std::uint32_t> set_ids_;
  std::vector<std::vector<std::uint32_t>> sets_;
};

// Primitive word that is the least of its rotations.
inline bool is_least_necklace(const std::vector<Word>& w) {
  std::size_t m = w.size();
  if (primitive_period(w) != m) return false;
  for (std::size_t r = 1; r < m; ++r)
    for (std::size_t i = 0; i < m; ++i) {
      Word x = w[(r + i) % m], y = w[i];
      if (x != y) {
        if (x < y) return false;
        break;
      }
    }
  return true;
}

// Calls fn on every word of length m over `alpha` in lexicographic order.
inline void for_each_word(const std::vector<Word>& alpha, std::size_t m,
                          const std::function<void(const std::vector<Word>&)>& fn) {
  if (alpha.empty()) return;
  std::vector<std::size_t> idx(m, 0);
  std::vector<Word> w(m);
  for (;;) {
    for (std::size_t i = 0; i < m; ++i) w[i] = alpha[idx[i]];
    fn(w);
    std::size_t i = m;
    for (;;) {
      if (i == 0) return;
      --i;
      if (++idx[i] < alpha.size()) break;
      idx[i] = 0;
    }
  }
}

// Signatures at instant 0 of every lasso with stem+loop <= max_len.
inline std::vector<std::uint32_t> lasso_start_sigs(Stepper& st, const std::vector<Word>& alpha, std::size_t max_len) {
  std::set<std::uint32_t> all;
  for (std::size_t m = 1; m <= max_len; ++m) {
    std::set<std::uint32_t> level;
    for_each_word(alpha, m, [&](const std::vector<Word>& w) {
      if (!is_least_necklace(w)) return;
      auto sg = st.loop(w);
      level.insert(sg.begin(), sg.end());
    });
    all.insert(level.begin(), level.end());
    for (std::size_t j = m; j < max_len; ++j) {
      std::set<std::uint32_t> next;
      for (Word s : alpha)
        for (auto x : level) next.insert(st.step(s, x));
      level.swap(next);
      all.insert(level.begin(), level.end());
    }
  }
  return {all.begin(), all.end()};
}

// (signature, set id) of one search item.
using ProductAcceptor = std::function<std::optional<std::size_t>(std::uint32_t sig, std::uint32_t set)>;

// Finite traces F of length 1..max_len. The set component holds the
// signatures of F followed by each tail in tails(last state of F).
inline std::optional<DpWitness> extension_dp(Stepper& st, const std::vector<Word>& alpha, std::size_t max_len,
                                             const std::function<std::vector<std::uint32_t>(Word)>& tails,
                                             const ProductAcceptor& accept) {
  struct Item {
    std::uint32_t sig, set;
    Word state;
    std::uint32_t parent;
  };
  std::vector<std::vector<Item>> levels;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Item> cur;
    std::unordered_set<std::uint64_t> in_level;
    bool fresh = false;
    auto push = [&](Word s, std::uint32_t sig, std::uint32_t set, std::uint32_t parent) {
      std::uint64_t key = (static_cast<std::uint64_t>(sig) << 32) | set;
      if (!in_level.insert(key).second) return;
      if (!seen.count(key)) fresh = true;
      cur.push_back({sig, set, s, parent});
    };
    for (Word s : alpha) {
      if (len == 1) {
        std::vector<std::uint32_t> ext;
        for (auto t : tails(s)) ext.push_back(st.step(s, t));
        push(s, st.step(s, Stepper::kEnd), st.set_id(ext), 0);
      } else {
        const auto& prev = levels.back();
        for (std::uint32_t p = 0; p < prev.size(); ++p) {
          std::vector<std::uint32_t> ext;
          for (auto e : st.set(prev[p].set)) ext.push_back(st.step(s, e));
          std::uint32_t set = st.set_id(ext);
          push(s, st.step(s, prev[p].sig), set, p);
        }
      }
    }
    levels.push_back(std::move(cur));
    for (const auto& e : levels.back()) {
      if (auto a = accept(e.sig, e.set)) {
        DpWitness w;
        w.assignment = *a;
        const Item* x = &e;
        for (std::size_t lv = levels.size() - 1;; --lv) {
          w.states.push_back(x->state);
          if (lv == 0) break;
          x = &levels[lv - 1][x->parent];
        }
        return w;
      }
    }
    if (!fresh) break;
    for (const auto& e : levels.back()) seen.insert((static_cast<std::uint64_t>(e.sig) << 32) | e.set);
  }
  return std::nullopt;
}

// Lassos with stem+loop <= max_len. The set component holds the signatures
// at instant 0 of all finite prefixes of the lasso.
inline std::optional<DpWitness> prefix_dp(Stepper& st, const std::vector<Word>& alpha, std::size_t max_len,
                                          const ProductAcceptor& accept) {
  struct Item {
    std::uint32_t sig, set;
    Word state;
    std::uint32_t parent;
  };
  struct Group {
    std::uint32_t sig, set;
    std::vector<Word> loop;
  };
  auto prefixes_from = [&](Word s, const std::vector<std::uint32_t>& ps) {
    std::vector<std::uint32_t> out{st.step(s, Stepper::kEnd)};
    for (auto y : ps) out.push_back(st.step(s, y));
    return out;
  };
  auto key_of = [](std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; };

  for (std::size_t total = 1; total <= max_len; ++total) {
    for (std::size_t m = 1; m <= total; ++m) {
      // every lasso of this shape is rebuilt from its loop groups
      std::map<std::uint64_t, Group> best;
      for_each_word(alpha, m, [&](const std::vector<Word>& w) {
        if (!is_least_necklace(w)) return;
        auto sg = st.loop(w);
        std::vector<std::vector<std::uint32_t>> ps(m);
        for (bool changed = true; changed;) {
          changed = false;
          for (std::size_t i = m; i-- > 0;) {
            auto v = prefixes_from(w[i], ps[(i + 1) % m]);
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            if (v != ps[i]) {
              ps[i] = std::move(v);
              changed = true;
            }
          }
        }
        for (std::size_t r = 0; r < m; ++r) {
          std::vector<Word> rot(m);
          for (std::size_t i = 0; i < m; ++i) rot[i] = w[(r + i) % m];
          std::uint32_t set = st.set_id(ps[r]);
          auto k = key_of(sg[r], set);
          auto it = best.find(k);
          if (it == best.end()) best.emplace(k, Group{sg[r], set, rot});
          else if (rot < it->second.loop) it->second.loop = rot;
        }
      });
      std::vector<Group> groups;
      for (auto& [k, g] : best) groups.push_back(std::move(g));
      std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.loop < b.loop; });

      std::size_t stem = total - m;
      std::vector<std::vector<Item>> levels;
      std::unordered_set<std::uint64_t> seen;
      if (stem == 0) {
        for (const auto& g : groups)
          if (auto a = accept(g.sig, g.set)) return DpWitness{g.loop, 0, *a};
        continue;
      }
      for (const auto& g : groups) seen.insert(key_of(g.sig, g.set));
      bool dead = false;
      for (std::size_t lv = 1; lv <= stem && !dead; ++lv) {
        std::vector<Item> cur;
        std::unordered_set<std::uint64_t> in_level;
        bool fresh = false;
        for (Word s : alpha) {
          std::size_t n = lv == 1 ? groups.size() : levels.back().size();
          for (std::uint32_t p = 0; p < n; ++p) {
            std::uint32_t nsig = lv == 1 ? groups[p].sig : levels.back()[p].sig;
            std::uint32_t nset = lv == 1 ? groups[p].set : levels.back()[p].set;
            std::uint32_t sig = st.step(s, nsig);
            std::uint32_t set = st.set_id(prefixes_from(s, st.set(nset)));
            auto k = key_of(sig, set);
            if (!in_level.insert(k).second) continue;
            if (!seen.count(k)) fresh = true;
            cur.push_back({sig, set, s, p});
          }
        }
        levels.push_back(std::move(cur));
        for (const auto& e : levels.back()) seen.insert(key_of(e.sig, e.set));
        if (lv < stem && !fresh) dead = true;
      }
      if (dead) continue;
      for (const auto& e : levels.back()) {
        if (auto a = accept(e.sig, e.set)) {
          DpWitness w;
          w.assignment = *a;
          const Item* x = &e;
          for (std::size_t lv = levels.size() - 1;; --lv) {
            w.states.push_back(x->state);
            if (lv == 0) break;
            x = &levels[lv - 1][x->parent];
          }
          const auto& g = groups[x->parent];
          w.states.insert(w.states.end(), g.loop.begin(), g.loop.end());
          w.loop_start = stem;
          return w;
        }
      }
    }
  }
  return std::nullopt;
}

} // namespace ftl
