#include <gtest/gtest.h>

#include <random>

#include "ftl/sat.hpp"
#include "gen.hpp"
#include "oracle.hpp"

using namespace ftl;

namespace {

gen::Atoms mono_atoms() {
  gen::Atoms a;
  a.unary = {"P", "Q"};
  a.nullary = {"p", "q"};
  return a;
}

// Random sentence of the fragment: a sentence, or an open formula closed by exists.
Formula random_sentence(gen::FormulaGen& g, int max_size) {
  int size = 1 + g.pick(max_size);
  if (g.pick(2)) return exists("x", g.any(size, {"x"}, {"x"}));
  return g.any(size, {}, {"x"});
}

int find(const Closure& c, const std::string& src) {
  Formula f = rename_all_vars(expand(parse_with_vars(src, {"x"})), "x");
  for (std::size_t i = 0; i < c.size(); ++i)
    if (equal(c.nodes[i].formula, f)) return static_cast<int>(i);
  return -1;
}

QType type_of(const Closure& c, const std::set<std::string>& bases) {
  QType t(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& n = c.nodes[i];
    auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
    switch (n.kind) {
    case ClosureNode::True: t[i] = true; break;
    case ClosureNode::False: t[i] = false; break;
    case ClosureNode::Not: t[i] = !t[a]; break;
    case ClosureNode::And: t[i] = t[a] && t[b]; break;
    default: t[i] = bases.count(render(n.formula)) > 0;
    }
  }
  return t;
}

// Genuine first-order truth of every closure node over an interpretation
// assigning the base symbols (atoms and surrogates) per element.
std::vector<QType> fo_types(const Closure& c, const std::vector<std::vector<bool>>& xval, const std::vector<bool>& sval) {
  std::size_t d = xval.size();
  std::vector<QType> ts(d, QType(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& n = c.nodes[i];
    auto a = static_cast<std::size_t>(n.a), b = static_cast<std::size_t>(n.b);
    bool ex = false;
    if (n.kind == ClosureNode::Exists)
      for (std::size_t e = 0; e < d; ++e) ex = ex || ts[e][a];
    for (std::size_t e = 0; e < d; ++e) {
      switch (n.kind) {
      case ClosureNode::True: ts[e][i] = true; break;
      case ClosureNode::False: ts[e][i] = false; break;
      case ClosureNode::Not: ts[e][i] = !ts[e][a]; break;
      case ClosureNode::And: ts[e][i] = ts[e][a] && ts[e][b]; break;
      case ClosureNode::Exists: ts[e][i] = ex; break;
      default: {
        auto& bases = n.sentence ? c.s_bases : c.x_bases;
        std::size_t k = static_cast<std::size_t>(std::find(bases.begin(), bases.end(), static_cast<int>(i)) - bases.begin());
        ts[e][i] = n.sentence ? sval[k] : xval[e][k];
      }
      }
    }
  }
  return ts;
}

// Brute-force realisability of a candidate: some interpretation with at most
// |C| elements whose element types are exactly C.
bool realisable_fo(const Closure& c, const StateCandidate& cand) {
  std::size_t nx = 0, ns = 0;
  for (int i : c.x_bases) nx += c.nodes[static_cast<std::size_t>(i)].kind != ClosureNode::Exists;
  for (int i : c.s_bases) ns += c.nodes[static_cast<std::size_t>(i)].kind != ClosureNode::Exists;
  // exists nodes are evaluated, not assigned: only atoms and surrogates are free
  std::set<QType> want(cand.begin(), cand.end());
  for (std::size_t d = 1; d <= cand.size(); ++d) {
    std::size_t total = d * nx + ns;
    for (std::uint64_t m = 0; m < (std::uint64_t{1} << total); ++m) {
      std::vector<std::vector<bool>> xval(d, std::vector<bool>(c.x_bases.size()));
      std::vector<bool> sval(c.s_bases.size());
      std::size_t bit = 0;
      for (std::size_t e = 0; e < d; ++e)
        for (std::size_t k = 0; k < c.x_bases.size(); ++k)
          if (c.nodes[static_cast<std::size_t>(c.x_bases[k])].kind != ClosureNode::Exists) xval[e][k] = (m >> bit++) & 1;
      for (std::size_t k = 0; k < c.s_bases.size(); ++k)
        if (c.nodes[static_cast<std::size_t>(c.s_bases[k])].kind != ClosureNode::Exists) sval[k] = (m >> bit++) & 1;
      auto ts = fo_types(c, xval, sval);
      if (std::set<QType>(ts.begin(), ts.end()) == want) return true;
    }
  }
  return false;
}

} // namespace

TEST(Closure, Examples) {
  auto c = closure(parse("p U q"));
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.untils.size(), 1u);
  EXPECT_EQ(c.s_bases.size(), 3u);
  EXPECT_TRUE(c.x_bases.empty());
  auto d = closure(parse("exists x. (P(x) U Q(x))"));
  EXPECT_GE(find(d, "P(x)"), 0);
  EXPECT_GE(find(d, "Q(x)"), 0);
  EXPECT_GE(find(d, "P(x) U Q(x)"), 0);
  EXPECT_GE(find(d, "exists x. (P(x) U Q(x))"), 0);
  EXPECT_EQ(d.size(), 4u);
  EXPECT_EQ(d.x_bases.size(), 3u);
  EXPECT_TRUE(d.nodes[static_cast<std::size_t>(d.root)].sentence);
  // variable names are unified and vacuous quantifiers dropped
  auto e = closure(parse("(exists y. P(y)) & forall z. exists x. p"));
  EXPECT_EQ(e.exists.size(), 1u);
  EXPECT_GE(find(e, "exists x. P(x)"), 0);
  // linear size
  gen::FormulaGen g(50, mono_atoms());
  for (int i = 0; i < 50; ++i) {
    auto f = random_sentence(g, 12);
    EXPECT_LE(closure(f).size(), static_cast<std::size_t>(4 * expand(f)->size)) << render(f);
  }
}

TEST(Closure, FragmentErrors) {
  EXPECT_THROW(closure(parse("exists x. exists y. R(x,y)")), Error);
  EXPECT_THROW(closure(parse("P(a)")), Error);
  EXPECT_THROW(closure(parse("exists x. exists y. (P(x) U P(y))")), Error);
  EXPECT_NO_THROW(closure(parse("exists x. (P(x) & exists y. Q(y))")));
}

TEST(Closure, UCompatible) {
  auto c = closure(parse("p U q"));
  QType surr = type_of(c, {"p U q"}), q = type_of(c, {"q"}), none = type_of(c, {});
  EXPECT_TRUE(u_compatible(c, surr, q));
  EXPECT_FALSE(u_compatible(c, surr, none));
  EXPECT_FALSE(u_compatible(c, none, q));
  EXPECT_TRUE(u_compatible(c, none, none));
  EXPECT_FALSE(final_type(c, surr));
  // agrees with the finite semantics on two-state traces
  auto f = parse("p U q");
  for (int m = 0; m < 16; ++m) {
    std::set<std::string> b0, b1;
    if (m & 1) b0.insert("p");
    if (m & 2) b0.insert("q");
    if (m & 4) b1.insert("p");
    if (m & 8) b1.insert("q");
    State s0, s1;
    for (auto& x : b0) s0.ext[x].insert(Tuple{});
    for (auto& x : b1) s1.ext[x].insert(Tuple{});
    Trace t{default_domain(1), {}, {s0, s1}, std::nullopt};
    bool sem0 = eval(t, f, 0), sem1 = eval(t, f, 1);
    auto t1 = b1;
    if (sem1) t1.insert("p U q");
    for (bool guess : {false, true}) {
      auto t0 = b0;
      if (guess) t0.insert("p U q");
      EXPECT_EQ(u_compatible(c, type_of(c, t0), type_of(c, t1)), guess == sem0);
    }
  }
}

TEST(Closure, Suitable) {
  auto c = closure(parse("p U q"));
  StateCandidate s1{type_of(c, {"p U q"})}, s2{type_of(c, {"q"})}, s3{type_of(c, {})};
  EXPECT_TRUE(suitable(c, s1, s2));
  EXPECT_FALSE(suitable(c, s1, s3));
  auto d = closure(parse("p & q"));
  StateCandidate x{type_of(d, {"p"})};
  EXPECT_TRUE(suitable(d, x, x));
  auto e = closure(parse("exists x. (P(x) U Q(x))"));
  StateCandidate a{type_of(e, {"P(x) U Q(x)", "exists x. (P(x) U Q(x))"}), type_of(e, {"exists x. (P(x) U Q(x))"})};
  StateCandidate b{type_of(e, {"Q(x)"})};
  EXPECT_FALSE(suitable(e, a, b)); // the second type has no successor
  StateCandidate b2{type_of(e, {"Q(x)"}), type_of(e, {})};
  EXPECT_TRUE(suitable(e, a, b2));
}

TEST(Closure, RealisabilityMatchesFirstOrder) {
  gen::FormulaGen g(51, mono_atoms());
  std::mt19937_64 rng(52);
  int checked = 0, yes = 0;
  for (int i = 0; i < 200 && checked < 150; ++i) {
    auto f = random_sentence(g, 8);
    auto c = closure(f);
    std::size_t nx = 0;
    for (int k : c.x_bases) nx += c.nodes[static_cast<std::size_t>(k)].kind != ClosureNode::Exists;
    if (nx > 3 || c.s_bases.size() > 5) continue;
    for (int trial = 0; trial < 4; ++trial) {
      // random sentence valuation and random set of x-valuations
      std::set<std::string> sb;
      for (int k : c.s_bases)
        if (rng() & 1) sb.insert(render(c.nodes[static_cast<std::size_t>(k)].formula));
      std::set<QType> ts;
      std::size_t cnt = 1 + rng() % 3;
      for (std::size_t j = 0; j < cnt; ++j) {
        auto b = sb;
        for (int k : c.x_bases)
          if (rng() & 1) b.insert(render(c.nodes[static_cast<std::size_t>(k)].formula));
        ts.insert(type_of(c, b));
      }
      StateCandidate cand(ts.begin(), ts.end());
      // make the exists bits coherent half of the time
      if (trial % 2 == 0) {
        for (int e : c.exists) {
          auto body = static_cast<std::size_t>(c.nodes[static_cast<std::size_t>(e)].a);
          bool some = std::any_of(cand.begin(), cand.end(), [&](const QType& t) { return t[body]; });
          if (some) sb.insert(render(c.nodes[static_cast<std::size_t>(e)].formula));
          else sb.erase(render(c.nodes[static_cast<std::size_t>(e)].formula));
        }
        std::set<QType> fixed;
        for (const auto& t : cand) {
          std::set<std::string> b = sb;
          for (int k : c.x_bases)
            if (t[static_cast<std::size_t>(k)]) b.insert(render(c.nodes[static_cast<std::size_t>(k)].formula));
          fixed.insert(type_of(c, b));
        }
        cand.assign(fixed.begin(), fixed.end());
      }
      bool r = realisable(c, cand);
      ASSERT_EQ(r, realisable_fo(c, cand)) << render(f);
      yes += r;
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
  EXPECT_GT(yes, 10);
}

TEST(SatBounded, Examples) {
  auto q = sat_bounded(parse("p & X ~p"), 2);
  ASSERT_TRUE(q);
  EXPECT_EQ(q->length(), 2u);
  EXPECT_FALSE(sat_bounded(parse("p & X ~p"), 1));
  for (std::uint64_t k : {1, 2, 3, 5}) EXPECT_FALSE(sat_bounded(parse("G+ X true"), k));
  auto r = sat_bounded(parse("(exists x. P(x)) & exists x. ~P(x)"), 1);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->states[0].size(), 2u);
  EXPECT_TRUE(verify_quasimodel(*r).empty());
  Trace t = extract_trace(*r);
  EXPECT_EQ(t.domain.size(), 2u);
  EXPECT_TRUE(oracle::eval(t, parse("(exists x. P(x)) & exists x. ~P(x)")));
  EXPECT_THROW(sat_bounded(parse("p"), 0), Error);
}

TEST(SatBounded, BudgetIsDistinct) {
  Budget b(5);
  EXPECT_THROW(sat_bounded(parse("exists x. (P(x) U Q(x)) & G+ (p U q)"), 3, b), BudgetExceeded);
}

TEST(SatFinite, Examples) {
  EXPECT_TRUE(sat_finite(parse("F last")));
  auto q = sat_finite(parse("p U q"));
  ASSERT_TRUE(q);
  EXPECT_EQ(q->length(), 2u);
  EXPECT_FALSE(sat_finite(parse("G+ X true")));
  EXPECT_FALSE(sat_finite(parse("G+ (p -> X ~p) & G+ (~p -> X p) & G+ F+ (p & last) & G+ F+ (~p & last)")));
  EXPECT_THROW(sat_finite(parse("G+ forall x. exists y. R(x,y)")), Error);
  // needs 4 instants
  auto far = sat_finite(parse("~p & X ~p & X X ~p & F p"));
  ASSERT_TRUE(far);
  EXPECT_EQ(far->length(), 4u);
}

TEST(Verifier, RejectsCorruptions) {
  auto q = sat_bounded(parse("exists x. (P(x) U Q(x)) & exists x. ~Q(x)"), 3);
  ASSERT_TRUE(q);
  ASSERT_TRUE(verify_quasimodel(*q).empty());
  auto no_runs = *q;
  no_runs.runs.clear();
  EXPECT_FALSE(verify_quasimodel(no_runs).empty());
  auto flipped = *q;
  int u = flipped.closure->untils.front();
  flipped.states.back().front()[static_cast<std::size_t>(u)].flip();
  EXPECT_FALSE(verify_quasimodel(flipped).empty());
  auto shorter = *q;
  shorter.states.pop_back();
  EXPECT_FALSE(verify_quasimodel(shorter).empty());
}

TEST(SatBounded, AgreesWithBruteForce) {
  gen::FormulaGen g(53, mono_atoms());
  int sat = 0;
  for (int i = 0; i < 150; ++i) {
    auto f = random_sentence(g, 12);
    for (std::uint64_t k = 1; k <= 3; ++k) {
      auto q = sat_bounded(f, k);
      bool brute = sat_bruteforce(f, {2, k}, TraceKind::Finite).found();
      if (q && !brute) {
        // needs more than two elements
        Trace t = extract_trace(*q);
        ASSERT_GT(t.domain.size(), 2u) << render(f);
        ASSERT_TRUE(sat_bruteforce(f, {t.domain.size(), k}, TraceKind::Finite).found()) << render(f);
        continue;
      }
      ASSERT_EQ(q.has_value(), brute) << render(f) << " k=" << k;
      if (q) {
        ++sat;
        Trace t = extract_trace(*q);
        ASSERT_TRUE(oracle::eval(t, closure(f).normalised)) << render(f);
        ASSERT_LE(t.length(), k);
        ASSERT_TRUE(bounds(f, k).domain.bounds(t.domain.size()));
      }
    }
  }
  EXPECT_GT(sat, 20);
}

TEST(SatFinite, AgreesWithBruteForce) {
  gen::FormulaGen g(54, mono_atoms());
  for (int i = 0; i < 40; ++i) {
    auto f = random_sentence(g, 8);
    auto q = sat_finite(f);
    bool brute = sat_bruteforce(f, {2, 5}, TraceKind::Finite).found();
    if (brute) {
      ASSERT_TRUE(q) << render(f);
    }
    if (q && q->length() <= 5) {
      std::size_t d = extract_trace(*q).domain.size();
      ASSERT_TRUE(d > 2 || brute) << render(f);
      ASSERT_TRUE(sat_bruteforce(f, {d, 5}, TraceKind::Finite).found()) << render(f);
    }
  }
}

TEST(Bounds, Values) {
  auto b = bounds(parse("p"), 1);
  EXPECT_EQ(b.atoms, 1u);
  EXPECT_EQ(b.domain.str(), "8");
  EXPECT_EQ(bounds(parse("p & q"), 2).atoms, 3u);
  Pow2 x{8};
  EXPECT_TRUE(x.bounds(256));
  EXPECT_FALSE(x.bounds(257));
  EXPECT_TRUE(x.bounds(255));
  // large exponents stay symbolic
  auto big = bounds(parse("G+ exists x. (P(x) -> F+ (Q(x) & X X X X X p))"), BigInt("123456789012345678901234567890"));
  EXPECT_EQ(big.trace.str().substr(0, 2), "2^");
  EXPECT_TRUE(big.domain.bounds(BigInt(1) << 1000));
}
