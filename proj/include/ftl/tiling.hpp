#pragma once

// Corridor and grid tiling: formula generators and brute-force solvers.
// Column i, row j of a tiling sits at instant i * 2^n + j on element d_{i*2^n+j}.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftl/error.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"

namespace ftl {

inline const std::string kWhite = "white";

struct Tile {
  std::string name, up, down, left, right;
};

struct TileSet {
  std::vector<Tile> tiles;
  std::string t0, t1;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < tiles.size(); ++i)
      if (tiles[i].name == name) return i;
    throw Error("unknown tile " + name);
  }
  void validate(bool need_t1) const {
    if (tiles.empty()) throw Error("empty tile set");
    std::map<std::string, int> seen;
    for (const auto& t : tiles) {
      if (t.name.empty()) throw Error("tile without a name");
      if (seen[t.name]++) throw Error("duplicate tile " + t.name);
    }
    index(t0);
    if (need_t1) index(t1);
  }
};

enum class TilingKind { Corridor, Grid };

struct TilingInstance {
  TilingKind kind = TilingKind::Corridor;
  int n = 1;
  TileSet tiles;

  std::size_t height() const { return std::size_t{1} << n; }
};

// tau[i][j]: tile index at column i, row j.
using Tiling = std::vector<std::vector<std::size_t>>;

inline TileSet tiles_from_json(const nlohmann::json& j) {
  TileSet s;
  for (const auto& t : j.at("tiles")) {
    Tile x;
    x.name = t.at("name").get<std::string>();
    x.up = t.at("up").get<std::string>();
    x.down = t.at("down").get<std::string>();
    x.left = t.at("left").get<std::string>();
    x.right = t.at("right").get<std::string>();
    s.tiles.push_back(x);
  }
  s.t0 = j.at("t0").get<std::string>();
  s.t1 = j.value("t1", s.t0);
  s.validate(true);
  return s;
}

inline nlohmann::json tiles_to_json(const TileSet& s) {
  nlohmann::json j;
  j["tiles"] = nlohmann::json::array();
  for (const auto& t : s.tiles)
    j["tiles"].push_back({{"name", t.name}, {"up", t.up}, {"down", t.down}, {"left", t.left}, {"right", t.right}});
  j["t0"] = s.t0;
  j["t1"] = s.t1;
  return j;
}

inline std::string tile_predicate(const Tile& t) { return "T_" + t.name; }

// ---------------------------------------------------------------------------
// Formulas

namespace detail {

inline Formula pred(const std::string& p, const std::string& x = "x") { return atom(p, {var(x)}); }
inline std::string bit_pred(char c, int i) { return std::string(1, c) + std::to_string(i); }

// Binary value j over predicates c_{n-1} .. c_0.
inline Formula counter_value(char c, int n, std::uint64_t j) {
  std::vector<Formula> parts;
  for (int i = n - 1; i >= 0; --i) {
    Formula a = pred(bit_pred(c, i));
    parts.push_back((j >> i & 1) ? a : neg(a));
  }
  return conj_all(parts);
}

inline Formula all_of(char c, int lo, int hi, bool positive) {
  std::vector<Formula> parts;
  for (int i = lo; i < hi; ++i) parts.push_back(positive ? pred(bit_pred(c, i)) : neg(pred(bit_pred(c, i))));
  return conj_all(parts);
}

// G+ AND_i (forall x C_i(x) | forall x !C_i(x))
inline Formula uniform(char c, int n) {
  std::vector<Formula> parts;
  for (int i = 0; i < n; ++i)
    parts.push_back(disj(forall("x", pred(bit_pred(c, i))), forall("x", neg(pred(bit_pred(c, i))))));
  return always_plus(conj_all(parts));
}

// Increment step for bit k: low bits set and bit k clear.
inline Formula increment(char c, int n, int k) {
  std::vector<Formula> keep;
  for (int j = k + 1; j < n; ++j) keep.push_back(iff(pred(bit_pred(c, j)), next(pred(bit_pred(c, j)))));
  Formula guard = conj(all_of(c, 0, k, true), neg(pred(bit_pred(c, k))));
  Formula step = conj(conj_all(keep), next(conj(all_of(c, 0, k, false), pred(bit_pred(c, k)))));
  return implies(guard, step);
}

struct Parts {
  Formula countval, counter, pval, equ, mark, tile, untilform, tileboxmarktotile, up, right, tileeach, t0, t1,
      tileupdown, tileleftright, bottomwhite, upwhite, rhocountval, rhocounter, untilrhoform;
};

inline Parts parts(const TilingInstance& inst) {
  const int n = inst.n;
  if (n < 1) throw Error("tiling: n must be >= 1");
  const TileSet& ts = inst.tiles;
  ts.validate(inst.kind == TilingKind::Corridor);
  const std::uint64_t top = (std::uint64_t{1} << n) - 1;
  Parts p;

  p.countval = uniform('S', n);
  std::vector<Formula> inc;
  for (int k = 0; k < n; ++k) inc.push_back(increment('S', n, k));
  p.counter = conj(conj(counter_value('S', n, 0), always_plus(conj_all(inc))),
                   always_plus(implies(all_of('S', 0, n, true), wnext(all_of('S', 0, n, false)))));
  std::vector<Formula> pv, eq, mk;
  for (int i = 0; i < n; ++i) {
    pv.push_back(implies(neg(last()), iff(pred(bit_pred('P', i)), next(pred(bit_pred('P', i))))));
    eq.push_back(iff(pred(bit_pred('P', i)), pred(bit_pred('S', i))));
  }
  p.pval = always_plus(forall("x", conj_all(pv)));
  p.equ = conj_all(eq);
  for (const auto& t : ts.tiles) mk.push_back(pred(tile_predicate(t)));
  p.mark = disj_all(mk);
  p.tile = conj(conj(p.equ, p.mark), always(neg(p.mark)));
  p.untilform = eventually_plus(conj(last(), counter_value('S', n, top)));
  p.tileboxmarktotile = conj(p.tile, always(exists("x", p.tile)));
  p.up = next(p.tile);
  p.right = conj(p.equ, until(neg(p.equ), p.tile));

  std::vector<Formula> each;
  for (std::size_t a = 0; a < ts.tiles.size(); ++a)
    for (std::size_t b = a + 1; b < ts.tiles.size(); ++b)
      each.push_back(neg(conj(pred(tile_predicate(ts.tiles[a])), pred(tile_predicate(ts.tiles[b])))));
  p.tileeach = always_plus(forall("x", conj_all(each)));
  p.t0 = pred(tile_predicate(ts.tiles[ts.index(ts.t0)]));
  if (inst.kind == TilingKind::Corridor)
    p.t1 = always_plus(forall("x", implies(conj(conj(counter_value('S', n, 0), p.mark), always(neg(counter_value('S', n, 0)))),
                                           pred(tile_predicate(ts.tiles[ts.index(ts.t1)])))));

  std::vector<Formula> ud, lr;
  for (const auto& t : ts.tiles)
    for (const auto& u : ts.tiles) {
      Formula forbid = implies(pred(tile_predicate(t)), forall("x", implies(p.up, always(neg(pred(tile_predicate(u)))))));
      if (t.up != u.down) ud.push_back(forbid);
      if (t.right != u.left)
        lr.push_back(implies(pred(tile_predicate(t)), forall("x", implies(p.right, always(neg(pred(tile_predicate(u))))))));
    }
  p.tileupdown = always_plus(forall("x", implies(neg(counter_value('S', n, top)), conj_all(ud))));
  p.tileleftright = always_plus(forall("x", conj_all(lr)));
  std::vector<Formula> dw, uw;
  for (const auto& t : ts.tiles) {
    if (t.down == kWhite) dw.push_back(pred(tile_predicate(t)));
    if (t.up == kWhite) uw.push_back(pred(tile_predicate(t)));
  }
  p.bottomwhite = always_plus(forall("x", implies(conj(counter_value('S', n, 0), p.mark), disj_all(dw))));
  p.upwhite = always_plus(forall("x", implies(conj(counter_value('S', n, top), p.mark), disj_all(uw))));

  p.rhocountval = uniform('R', n);
  std::vector<Formula> hold, step;
  for (int k = 0; k < n; ++k) {
    hold.push_back(implies(next(neg(counter_value('S', n, 0))), iff(pred(bit_pred('R', k)), next(pred(bit_pred('R', k))))));
    step.push_back(implies(next(counter_value('S', n, 0)), increment('R', n, k)));
  }
  p.rhocounter = conj(conj(counter_value('R', n, 0), always_plus(conj_all(hold))), always_plus(conj_all(step)));
  p.untilrhoform = eventually_plus(conj(conj(last(), counter_value('S', n, top)), counter_value('R', n, top)));
  return p;
}

} // namespace detail

// Free variable x; satisfiable (x closed existentially) iff a corridor tiling exists.
inline Formula corridor_formula(const TilingInstance& inst) {
  if (inst.kind != TilingKind::Corridor) throw Error("corridor_formula needs a corridor instance");
  auto p = detail::parts(inst);
  Formula corridor = conj_all({p.countval, p.counter, p.pval, p.untilform, p.tileboxmarktotile});
  return conj_all({corridor, p.tileeach, p.t0, p.t1, p.tileupdown, p.tileleftright, p.bottomwhite, p.upwhite});
}

// Satisfiable on 2^{2n}-bounded traces iff a grid tiling exists.
inline Formula grid_formula(const TilingInstance& inst) {
  if (inst.kind != TilingKind::Grid) throw Error("grid_formula needs a grid instance");
  auto p = detail::parts(inst);
  return conj_all({p.countval, p.counter, p.pval, p.tileboxmarktotile, p.tileeach, p.t0, p.tileupdown,
                   p.tileleftright, p.rhocountval, p.rhocounter, p.untilrhoform});
}

inline Formula tiling_formula(const TilingInstance& inst) {
  return inst.kind == TilingKind::Corridor ? corridor_formula(inst) : grid_formula(inst);
}

// Bound k at which grid_formula is meant to be checked.
inline std::uint64_t grid_bound(int n) { return std::uint64_t{1} << (2 * n); }

// ---------------------------------------------------------------------------
// Solutions

inline bool is_tiling(const TilingInstance& inst, const Tiling& tau) {
  const TileSet& ts = inst.tiles;
  std::size_t h = inst.height();
  if (tau.empty()) return false;
  if (inst.kind == TilingKind::Grid && tau.size() != h) return false;
  for (const auto& col : tau) {
    if (col.size() != h) return false;
    for (std::size_t x : col)
      if (x >= ts.tiles.size()) return false;
  }
  auto T = [&](std::size_t i, std::size_t j) -> const Tile& { return ts.tiles[tau[i][j]]; };
  if (T(0, 0).name != ts.t0) return false;
  if (inst.kind == TilingKind::Corridor && T(tau.size() - 1, 0).name != ts.t1) return false;
  for (std::size_t i = 0; i < tau.size(); ++i)
    for (std::size_t j = 0; j < h; ++j) {
      if (j + 1 < h && T(i, j).up != T(i, j + 1).down) return false;
      if (i + 1 < tau.size() && T(i, j).right != T(i + 1, j).left) return false;
    }
  if (inst.kind == TilingKind::Corridor)
    for (std::size_t i = 0; i < tau.size(); ++i)
      if (T(i, 0).down != kWhite || T(i, h - 1).up != kWhite) return false;
  return true;
}

namespace detail {

// Vertically consistent columns; corridor columns also have white ends.
inline std::vector<std::vector<std::size_t>> columns(const TilingInstance& inst, double cap = 1e6) {
  const auto& tiles = inst.tiles.tiles;
  std::size_t h = inst.height();
  double total = 1;
  for (std::size_t j = 0; j < h; ++j) total *= static_cast<double>(tiles.size());
  if (total > cap) throw Error("tiling: too many columns to enumerate");
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> col;
  std::function<void()> go = [&] {
    std::size_t j = col.size();
    if (j == h) {
      if (inst.kind == TilingKind::Corridor && tiles[col.back()].up != kWhite) return;
      out.push_back(col);
      return;
    }
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      if (j == 0 && inst.kind == TilingKind::Corridor && tiles[t].down != kWhite) continue;
      if (j > 0 && tiles[col.back()].up != tiles[t].down) continue;
      col.push_back(t);
      go();
      col.pop_back();
    }
  };
  go();
  return out;
}

inline bool adjacent(const TileSet& ts, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t j = 0; j < a.size(); ++j)
    if (ts.tiles[a[j]].right != ts.tiles[b[j]].left) return false;
  return true;
}

} // namespace detail

// Corridor: smallest m <= max_m with a tiling. Grid: 2^n columns, max_m ignored.
inline std::optional<Tiling> solve_tiling_bruteforce(const TilingInstance& inst, std::size_t max_m) {
  const TileSet& ts = inst.tiles;
  ts.validate(inst.kind == TilingKind::Corridor);
  auto cols = detail::columns(inst);
  std::size_t t0 = ts.index(ts.t0);
  std::size_t width = inst.kind == TilingKind::Grid ? inst.height() : max_m;
  // Breadth-first over columns; parent links recover the tiling.
  std::vector<std::vector<int>> parent;
  std::vector<char> frontier(cols.size(), 0);
  for (std::size_t c = 0; c < cols.size(); ++c) frontier[c] = cols[c][0] == t0;
  for (std::size_t m = 1; m <= width; ++m) {
    auto done = [&](std::size_t c) {
      if (!frontier[c]) return false;
      if (inst.kind == TilingKind::Grid) return m == width;
      return cols[c][0] == ts.index(ts.t1);
    };
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (done(c)) {
        Tiling tau(m);
        int cur = static_cast<int>(c);
        for (std::size_t i = m; i-- > 0;) {
          tau[i] = cols[static_cast<std::size_t>(cur)];
          if (i > 0) cur = parent[i - 1][static_cast<std::size_t>(cur)];
        }
        return tau;
      }
    if (m == width) break;
    std::vector<int> par(cols.size(), -1);
    std::vector<char> next(cols.size(), 0);
    for (std::size_t a = 0; a < cols.size(); ++a) {
      if (!frontier[a]) continue;
      for (std::size_t b = 0; b < cols.size(); ++b)
        if (!next[b] && detail::adjacent(ts, cols[a], cols[b])) {
          next[b] = 1;
          par[b] = static_cast<int>(a);
        }
    }
    parent.push_back(par);
    frontier = next;
  }
  return std::nullopt;
}

// The intended model of the reduction: element d_t is tiled at instant t.
// Evaluate the formula with x -> d0.
inline Trace tiling_trace(const TilingInstance& inst, const Tiling& tau) {
  if (!is_tiling(inst, tau)) throw Error("tiling_trace: not a tiling");
  const int n = inst.n;
  std::size_t h = inst.height(), N = tau.size() * h;
  Trace t;
  t.domain = default_domain(N);
  for (std::size_t i = 0; i < N; ++i) {
    State s;
    std::size_t row = i % h, col = i / h;
    for (int b = 0; b < n; ++b) {
      for (std::size_t d = 0; d < N; ++d) {
        if (row >> b & 1) s.ext[detail::bit_pred('S', b)].insert(Tuple{static_cast<int>(d)});
        if (inst.kind == TilingKind::Grid && (col >> b & 1)) s.ext[detail::bit_pred('R', b)].insert(Tuple{static_cast<int>(d)});
        if ((d % h) >> b & 1) s.ext[detail::bit_pred('P', b)].insert(Tuple{static_cast<int>(d)});
      }
    }
    s.ext[tile_predicate(inst.tiles.tiles[tau[col][row]])].insert(Tuple{static_cast<int>(i)});
    t.states.push_back(std::move(s));
  }
  return t;
}

} // namespace ftl
