#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftl/error.hpp"
#include "ftl/syntax.hpp"

namespace ftl {

using Tuple = std::vector<int>;

// Predicate extensions at one instant; absent predicates are empty.
struct State {
  std::map<std::string, std::set<Tuple>> ext;

  bool holds(const std::string& p, const Tuple& t) const {
    auto it = ext.find(p);
    return it != ext.end() && it->second.count(t) > 0;
  }
  void set(const std::string& p, const Tuple& t, bool v = true) {
    if (v) ext[p].insert(t);
    else if (auto it = ext.find(p); it != ext.end()) {
      it->second.erase(t);
      if (it->second.empty()) ext.erase(it);
    }
  }
  void normalize() {
    for (auto it = ext.begin(); it != ext.end();)
      it = it->second.empty() ? ext.erase(it) : std::next(it);
  }
  friend bool operator==(const State& a, const State& b) { return a.ext == b.ext; }
  friend bool operator<(const State& a, const State& b) { return a.ext < b.ext; }
};

// Finite trace (no loop) or lasso (states[loop_start..] repeat forever).
struct Trace {
  std::vector<std::string> domain;
  std::map<std::string, int> constants; // constant -> element index
  std::vector<State> states;
  std::optional<std::size_t> loop_start;

  bool is_lasso() const { return loop_start.has_value(); }
  std::size_t length() const { return states.size(); }
  std::size_t stem_length() const { return loop_start.value_or(states.size()); }
  std::size_t loop_length() const { return loop_start ? states.size() - *loop_start : 0; }

  // State at an arbitrary instant; lasso positions wrap into the loop.
  const State& at(std::size_t i) const {
    if (i < states.size()) return states[i];
    if (!loop_start) throw Error("instant " + std::to_string(i) + " out of range");
    std::size_t m = loop_length();
    return states[*loop_start + (i - *loop_start) % m];
  }

  // Predicate arities seen in the states.
  std::map<std::string, int> arities() const {
    std::map<std::string, int> out;
    for (const auto& s : states)
      for (const auto& [p, ts] : s.ext)
        for (const auto& t : ts) {
          auto [it, fresh] = out.emplace(p, static_cast<int>(t.size()));
          if (!fresh && it->second != static_cast<int>(t.size()))
            throw Error("inconsistent arity for predicate " + p + " in trace");
        }
    return out;
  }

  void validate() const {
    if (domain.empty()) throw Error("trace domain must be non-empty");
    if (states.empty()) throw Error("trace must have at least one state");
    if (loop_start && *loop_start >= states.size()) throw Error("loop start out of range");
    const int n = static_cast<int>(domain.size());
    for (const auto& [c, e] : constants)
      if (e < 0 || e >= n) throw Error("constant " + c + " mapped outside the domain");
    for (const auto& s : states)
      for (const auto& [p, ts] : s.ext)
        for (const auto& t : ts)
          for (int e : t)
            if (e < 0 || e >= n) throw Error("tuple of " + p + " mentions an element outside the domain");
    arities();
  }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.domain == b.domain && a.constants == b.constants && a.states == b.states &&
           a.loop_start == b.loop_start;
  }
};

inline std::vector<std::string> default_domain(std::size_t n) {
  std::vector<std::string> d;
  for (std::size_t i = 0; i < n; ++i) d.push_back("d" + std::to_string(i));
  return d;
}

// ---------------------------------------------------------------------------
// Trace algebra

inline Trace suffix(const Trace& m, std::size_t i) {
  Trace r = m;
  if (!m.loop_start) {
    if (i >= m.states.size()) throw Error("suffix index out of range");
    r.states.assign(m.states.begin() + static_cast<long>(i), m.states.end());
    return r;
  }
  std::size_t ls = *m.loop_start;
  if (i <= ls) {
    r.states.assign(m.states.begin() + static_cast<long>(i), m.states.end());
    r.loop_start = ls - i;
    return r;
  }
  std::size_t len = m.loop_length();
  std::size_t rot = (i - ls) % len;
  r.states.clear();
  for (std::size_t k = 0; k < len; ++k) r.states.push_back(m.states[ls + (rot + k) % len]);
  r.loop_start = 0;
  return r;
}

inline Trace prefix(const Trace& m, std::size_t i) {
  if (!m.loop_start && i >= m.states.size()) throw Error("prefix index out of range");
  Trace r = m;
  r.loop_start.reset();
  r.states.clear();
  for (std::size_t k = 0; k <= i; ++k) r.states.push_back(m.at(k));
  return r;
}

inline Trace concat(const Trace& f, const Trace& m) {
  if (f.loop_start) throw Error("concat: left operand must be finite");
  if (f.domain != m.domain || f.constants != m.constants)
    throw Error("concat: domain or constant interpretation mismatch");
  Trace r = f;
  r.states.insert(r.states.end(), m.states.begin(), m.states.end());
  if (m.loop_start) r.loop_start = f.states.size() + *m.loop_start;
  return r;
}

inline Trace frozen_extension(const Trace& f) {
  if (f.loop_start) throw Error("frozen extension of a lasso");
  Trace r = f;
  r.loop_start = f.states.size() - 1;
  return r;
}

inline bool trace_mentions(const Trace& t, const std::string& p) {
  for (const auto& s : t.states)
    if (s.ext.count(p)) return true;
  return false;
}

inline Trace end_extension(const Trace& f, const Trace& i, const std::string& e) {
  if (trace_mentions(f, e) || trace_mentions(i, e))
    throw Error("end extension: predicate " + e + " already occurs");
  if (!i.loop_start) throw Error("end extension: right operand must be a lasso");
  Trace r = concat(f, i);
  std::set<Tuple> all;
  for (int d = 0; d < static_cast<int>(f.domain.size()); ++d) all.insert({d});
  for (std::size_t k = f.states.size(); k < r.states.size(); ++k) r.states[k].ext[e] = all;
  return r;
}

// F followed by one looping state in which only E holds, for every element.
inline Trace insensitive_extension(const Trace& f, const Signature& sigma, const std::string& e) {
  auto it = sigma.predicates.find(e);
  if (it == sigma.predicates.end()) throw Error("insensitive extension: " + e + " not in the signature");
  if (it->second != 1) throw Error("insensitive extension: " + e + " must be unary");
  if (f.loop_start) throw Error("insensitive extension of a lasso");
  Trace r = f;
  State end;
  for (int d = 0; d < static_cast<int>(f.domain.size()); ++d) end.ext[e].insert({d});
  r.states.push_back(end);
  r.loop_start = f.states.size();
  return r;
}

inline Trace sigma_reduct(const Trace& m, const std::set<std::string>& sigma) {
  Trace r = m;
  for (auto& s : r.states)
    for (auto it = s.ext.begin(); it != s.ext.end();)
      it = sigma.count(it->first) ? std::next(it) : s.ext.erase(it);
  return r;
}

// Explicit finite unrolling of a lasso to `len` states.
inline Trace unroll(const Trace& m, std::size_t len) {
  Trace r = m;
  r.loop_start.reset();
  r.states.clear();
  for (std::size_t k = 0; k < len; ++k) r.states.push_back(m.at(k));
  return r;
}

// ---------------------------------------------------------------------------
// Lasso canonical form: the loop has no proper period and the stem does not end
// with the loop's last state.

template <class T>
std::size_t primitive_period(const std::vector<T>& w) {
  std::size_t m = w.size();
  for (std::size_t p = 1; p < m; ++p) {
    if (m % p) continue;
    bool ok = true;
    for (std::size_t i = p; i < m && ok; ++i) ok = w[i] == w[i - p];
    if (ok) return p;
  }
  return m;
}

inline Trace canonical_lasso(const Trace& m) {
  if (!m.loop_start) return m;
  std::vector<State> stem(m.states.begin(), m.states.begin() + static_cast<long>(*m.loop_start));
  std::vector<State> loop(m.states.begin() + static_cast<long>(*m.loop_start), m.states.end());
  loop.resize(primitive_period(loop));
  while (!stem.empty() && stem.back() == loop.back()) {
    std::rotate(loop.rbegin(), loop.rbegin() + 1, loop.rend());
    stem.pop_back();
  }
  Trace r = m;
  r.loop_start = stem.size();
  r.states = stem;
  r.states.insert(r.states.end(), loop.begin(), loop.end());
  return r;
}

inline bool is_canonical_lasso(const Trace& m) { return !m.loop_start || canonical_lasso(m) == m; }

// ---------------------------------------------------------------------------
// Bit encoding of states over a fixed vocabulary and domain size.

struct Vocabulary {
  std::vector<std::string> names;
  std::vector<int> arity;
  std::vector<std::size_t> offset;
  std::size_t domain_size = 1;
  std::size_t bits = 0;

  Vocabulary() = default;
  Vocabulary(const std::map<std::string, int>& preds, std::size_t n) : domain_size(n) {
    for (const auto& [p, a] : preds) {
      names.push_back(p);
      arity.push_back(a);
      offset.push_back(bits);
      std::size_t cnt = 1;
      for (int i = 0; i < a; ++i) cnt *= n;
      bits += cnt;
    }
  }

  int index(const std::string& p) const {
    auto it = std::lower_bound(names.begin(), names.end(), p);
    if (it == names.end() || *it != p) return -1;
    return static_cast<int>(it - names.begin());
  }
  std::size_t words() const { return std::max<std::size_t>(1, (bits + 63) / 64); }

  std::size_t bit(int pred, const Tuple& t) const {
    std::size_t idx = 0, mul = 1;
    for (int e : t) {
      idx += static_cast<std::size_t>(e) * mul;
      mul *= domain_size;
    }
    return offset[static_cast<std::size_t>(pred)] + idx;
  }

  Tuple tuple_of(int pred, std::size_t idx) const {
    Tuple t(static_cast<std::size_t>(arity[static_cast<std::size_t>(pred)]));
    for (auto& e : t) {
      e = static_cast<int>(idx % domain_size);
      idx /= domain_size;
    }
    return t;
  }

  std::vector<std::uint64_t> encode(const State& s) const {
    std::vector<std::uint64_t> w(words(), 0);
    for (const auto& [p, ts] : s.ext) {
      int k = index(p);
      if (k < 0) continue;
      for (const auto& t : ts) {
        if (static_cast<int>(t.size()) != arity[static_cast<std::size_t>(k)])
          throw Error("arity mismatch for predicate " + p);
        std::size_t b = bit(k, t);
        w[b / 64] |= std::uint64_t{1} << (b % 64);
      }
    }
    return w;
  }

  State decode(const std::uint64_t* w) const {
    State s;
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::size_t cnt = (k + 1 < names.size() ? offset[k + 1] : bits) - offset[k];
      for (std::size_t i = 0; i < cnt; ++i) {
        std::size_t b = offset[k] + i;
        if ((w[b / 64] >> (b % 64)) & 1) s.ext[names[k]].insert(tuple_of(static_cast<int>(k), i));
      }
    }
    return s;
  }
  State decode(std::uint64_t w) const { return decode(&w); }
};

// Builds a trace from bit-encoded states (single-word states).
inline Trace make_trace(const Vocabulary& voc, const std::map<std::string, int>& constants,
                        const std::vector<std::uint64_t>& states, std::optional<std::size_t> loop_start) {
  Trace t;
  t.domain = default_domain(voc.domain_size);
  t.constants = constants;
  for (auto s : states) t.states.push_back(voc.decode(s));
  t.loop_start = loop_start;
  return t;
}

// ---------------------------------------------------------------------------
// Enumeration

constexpr double kEnumerationCap = 1099511627776.0; // 2^40

// All maps from `consts` into [0, n), in lexicographic order.
inline std::vector<std::map<std::string, int>> constant_maps(const std::set<std::string>& consts, std::size_t n) {
  std::vector<std::map<std::string, int>> out;
  std::vector<std::string> cs(consts.begin(), consts.end());
  std::vector<int> cur(cs.size(), 0);
  for (;;) {
    std::map<std::string, int> m;
    for (std::size_t i = 0; i < cs.size(); ++i) m[cs[i]] = cur[i];
    out.push_back(std::move(m));
    std::size_t i = cs.size();
    while (i > 0) {
      --i;
      if (++cur[i] < static_cast<int>(n)) break;
      cur[i] = 0;
      if (i == 0) return out;
    }
    if (cs.empty()) return out;
  }
}

// Words over an alphabet of `alpha` letters of length m with no proper period.
inline void for_each_primitive_word(std::uint64_t alpha, std::size_t m,
                                    const std::function<bool(const std::vector<std::uint64_t>&)>& fn) {
  std::vector<std::uint64_t> w(m, 0);
  for (;;) {
    if (primitive_period(w) == m && !fn(w)) return;
    std::size_t i = m;
    while (i > 0) {
      --i;
      if (++w[i] < alpha) break;
      w[i] = 0;
      if (i == 0) return;
    }
  }
}

// Enumerates every trace over `sig` with exactly `domain_size` elements, length
// 1..max_len (finite) or stem+loop <= max_len (canonical lassos). Order:
// constant map, then length, then stem length, then states lexicographically. `fn` returns false to stop.
inline void enumerate_traces(const Signature& sig, std::size_t domain_size, std::size_t max_len, bool lasso,
                             const std::function<bool(const Trace&)>& fn) {
  if (domain_size < 1 || max_len < 1) throw Error("enumeration bounds must be positive");
  Vocabulary voc(sig.predicates, domain_size);
  if (voc.bits > 62) throw Error("enumeration exceeds the safety cap");
  const std::uint64_t alpha = std::uint64_t{1} << voc.bits;
  double total = 0;
  for (std::size_t l = 1; l <= max_len; ++l) total += std::pow(static_cast<double>(alpha), static_cast<double>(l));
  if (lasso) total *= static_cast<double>(max_len);
  total *= std::pow(static_cast<double>(domain_size), static_cast<double>(sig.constants.size()));
  if (total > kEnumerationCap) throw Error("enumeration exceeds the safety cap of 2^40 traces");
  auto cmaps = constant_maps(sig.constants, domain_size);

  for (const auto& cm : cmaps) {
    for (std::size_t len = 1; len <= max_len; ++len) {
      // lassos of total length `len` are all state sequences split into
      // stem/loop, kept when canonical
      for (std::size_t stem = lasso ? 0 : len; stem <= len; ++stem) {
        if (lasso && stem == len) break;
        std::vector<std::uint64_t> w(len, 0);
        for (;;) {
          bool ok = true;
          if (lasso) {
            std::vector<std::uint64_t> loop(w.begin() + static_cast<long>(stem), w.end());
            ok = primitive_period(loop) == len - stem && (stem == 0 || w[stem - 1] != w.back());
          }
          std::optional<std::size_t> ls;
          if (lasso) ls = stem;
          if (ok && !fn(make_trace(voc, cm, w, ls))) return;
          std::size_t i = len;
          bool done = true;
          while (i > 0) {
            --i;
            if (++w[i] < alpha) { done = false; break; }
            w[i] = 0;
          }
          if (done) break;
        }
      }
    }
  }
}

inline std::vector<Trace> all_traces(const Signature& sig, std::size_t domain_size, std::size_t max_len, bool lasso) {
  std::vector<Trace> out;
  enumerate_traces(sig, domain_size, max_len, lasso, [&](const Trace& t) {
    out.push_back(t);
    return true;
  });
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Trace& t) {
  nlohmann::json j;
  j["domain"] = t.domain;
  nlohmann::json cs = nlohmann::json::object();
  for (const auto& [c, e] : t.constants) cs[c] = t.domain.at(static_cast<std::size_t>(e));
  j["constants"] = cs;
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : t.states) {
    nlohmann::json js = nlohmann::json::object();
    for (const auto& [p, ts] : s.ext) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& tup : ts) {
        nlohmann::json jt = nlohmann::json::array();
        for (int e : tup) jt.push_back(t.domain.at(static_cast<std::size_t>(e)));
        arr.push_back(jt);
      }
      js[p] = arr;
    }
    states.push_back(js);
  }
  j["states"] = states;
  j["loop"] = t.loop_start ? nlohmann::json(*t.loop_start) : nlohmann::json(nullptr);
  return j;
}

inline Trace trace_from_json(const nlohmann::json& j) {
  Trace t;
  try {
    t.domain = j.at("domain").get<std::vector<std::string>>();
    std::map<std::string, int> idx;
    for (std::size_t i = 0; i < t.domain.size(); ++i)
      if (!idx.emplace(t.domain[i], static_cast<int>(i)).second)
        throw Error("duplicate domain element " + t.domain[i]);
    auto elem = [&](const std::string& e) {
      auto it = idx.find(e);
      if (it == idx.end()) throw Error("unknown domain element " + e);
      return it->second;
    };
    if (j.contains("constants"))
      for (const auto& [c, e] : j.at("constants").items()) t.constants[c] = elem(e.get<std::string>());
    for (const auto& js : j.at("states")) {
      State s;
      for (const auto& [p, arr] : js.items()) {
        std::set<Tuple> ts;
        for (const auto& jt : arr) {
          Tuple tup;
          if (jt.is_array())
            for (const auto& e : jt) tup.push_back(elem(e.get<std::string>()));
          else if (jt.is_string())
            tup.push_back(elem(jt.get<std::string>()));
          else
            throw Error("tuple of " + p + " must be an array of element names");
          ts.insert(tup);
        }
        if (!ts.empty()) s.ext[p] = ts;
      }
      t.states.push_back(std::move(s));
    }
    if (j.contains("loop") && !j.at("loop").is_null()) t.loop_start = j.at("loop").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed trace JSON: ") + e.what());
  }
  t.validate();
  return t;
}

} // namespace ftl
