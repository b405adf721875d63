#include <gtest/gtest.h>

#include "ftl/semantics.hpp"
#include "gen.hpp"
#include "oracle.hpp"

using namespace ftl;

namespace {

Signature small_sig() {
  Signature s;
  s.predicates = {{"P", 1}, {"Q", 1}, {"R", 2}};
  s.constants = {"a"};
  return s;
}

gen::Atoms small_atoms() {
  gen::Atoms a;
  a.unary = {"P", "Q"};
  a.nullary = {};
  a.binary = {"R"};
  a.constants = {"a"};
  return a;
}

} // namespace

TEST(Eval, LastAndNext) {
  Signature s;
  s.predicates = {{"p", 0}};
  for (const auto& t : all_traces(s, 1, 3, false)) {
    for (std::size_t i = 0; i < t.states.size(); ++i)
      EXPECT_EQ(eval(t, last(), i), i + 1 == t.states.size());
    EXPECT_TRUE(eval(t, parse("F+ last")));
  }
  for (const auto& t : all_traces(s, 1, 3, true)) EXPECT_FALSE(eval(t, parse("F+ last")));
}

TEST(Eval, WeakNextIsLastOrNext) {
  auto f = parse("N p <-> last | X p");
  Signature s;
  s.predicates = {{"p", 0}};
  for (const auto& t : all_traces(s, 1, 4, false)) EXPECT_TRUE(eval(t, f));
}

TEST(Eval, MatchesNaiveOracleFinite) {
  gen::FormulaGen g(21, small_atoms());
  auto traces = all_traces(small_sig(), 2, 2, false);
  for (int i = 0; i < 150; ++i) {
    auto f = g.any(1 + g.pick(10), {}, {"x", "y"});
    for (std::size_t k = i % 41; k < traces.size(); k += 401) {
      const auto& t = traces[k];
      Evaluation ev(t, f);
      for (std::size_t p = 0; p < t.states.size(); ++p)
        ASSERT_EQ(ev.at(p), oracle::eval(t, f, p)) << render(f);
    }
  }
}

TEST(Eval, MatchesNaiveOracleLasso) {
  gen::FormulaGen g(22, small_atoms());
  Signature s;
  s.predicates = {{"P", 1}, {"Q", 1}};
  s.constants = {"a"};
  auto traces = all_traces(s, 2, 3, true);
  for (int i = 0; i < 300; ++i) {
    auto f = g.any(1 + g.pick(10), {}, {"x"});
    if (signature_of(f).predicates.count("R")) continue;
    for (std::size_t k = i % 13; k < traces.size(); k += 53) {
      const auto& t = traces[k];
      Evaluation ev(t, f);
      for (std::size_t p = 0; p < t.states.size() + 2; ++p)
        ASSERT_EQ(ev.at(p), oracle::eval(t, f, p)) << render(f);
    }
  }
}

TEST(Eval, LassoMatchesUnrolling) {
  gen::FormulaGen g(23, small_atoms());
  Signature s;
  s.predicates = {{"P", 1}, {"Q", 1}};
  s.constants = {"a"};
  auto traces = all_traces(s, 1, 3, true);
  for (int i = 0; i < 200; ++i) {
    auto f = g.any(1 + g.pick(9), {}, {"x"});
    if (signature_of(f).predicates.count("R")) continue;
    std::size_t depth = static_cast<std::size_t>(temporal_depth(f));
    for (std::size_t k = 0; k < traces.size(); k += 5) {
      const auto& t = traces[k];
      std::size_t len = t.stem_length() + 2 * t.loop_length() * (depth + 1);
      // the explicit unrolling, closed by one more copy of the loop
      auto u = unroll(t, len);
      u.loop_start = len - t.loop_length();
      Evaluation ev(t, f), eu(u, f);
      for (std::size_t p = 0; p < len; ++p) ASSERT_EQ(ev.at(p), eu.at(p)) << render(f);
      ASSERT_EQ(ev.at(0), oracle::eval(u, f, 0)) << render(f);
    }
  }
}

TEST(Eval, ExpandAndNnfPreserveTruth) {
  gen::FormulaGen g(24, small_atoms());
  auto fin = all_traces(small_sig(), 2, 2, false);
  Signature s;
  s.predicates = {{"P", 1}, {"Q", 1}};
  s.constants = {"a"};
  auto las = all_traces(s, 2, 2, true);
  for (int i = 0; i < 200; ++i) {
    auto f = g.any(1 + g.pick(10), {}, {"x"});
    auto e = expand(f), n = nnf(f);
    for (std::size_t k = i % 31; k < fin.size(); k += 997) {
      ASSERT_EQ(eval(fin[k], f), eval(fin[k], e)) << render(f);
      ASSERT_EQ(eval(fin[k], f), eval(fin[k], n)) << render(f);
    }
    if (signature_of(f).predicates.count("R")) continue;
    for (std::size_t k = i % 7; k < las.size(); k += 29) {
      ASSERT_EQ(eval(las[k], f), eval(las[k], e)) << render(f);
      ASSERT_EQ(eval(las[k], f), eval(las[k], n)) << render(f);
    }
  }
}

TEST(Eval, NnfOfNegatedReflexiveEventually) {
  auto f = parse("~F+ P(a)");
  auto n = nnf(f);
  Signature s;
  s.predicates = {{"P", 1}};
  s.constants = {"a"};
  EXPECT_FALSE(equiv_bruteforce(f, n, {2, 3}, TraceKind::Finite).found());
  EXPECT_FALSE(equiv_bruteforce(f, n, {2, 3}, TraceKind::Lasso).found());
}

TEST(Eval, Errors) {
  Trace t;
  t.domain = {"d0"};
  t.states = {State{}};
  EXPECT_THROW(eval(t, parse_with_vars("P(x)", {"x"})), Error);
  EXPECT_THROW(eval(t, parse("P(a)")), Error);
  t.states[0].set("P", {0, 0});
  EXPECT_THROW(eval(t, parse_with_vars("P(x)", {"x"}), 0, {{"x", 0}}), Error);
}

TEST(SatBruteforce, Examples) {
  auto inf = parse("G+ X true");
  EXPECT_FALSE(sat_bruteforce(inf, {2, 4}, TraceKind::Finite).found());
  EXPECT_TRUE(sat_bruteforce(inf, {1, 1}, TraceKind::Lasso).found());
  auto fin = parse("F+ G false");
  auto w = sat_bruteforce(fin, {1, 1}, TraceKind::Finite);
  ASSERT_TRUE(w.found());
  EXPECT_EQ(w.witness->trace.states.size(), 1u);
  EXPECT_FALSE(sat_bruteforce(parse("P(a) & ~P(a)"), {2, 4}, TraceKind::Finite).found());
  EXPECT_FALSE(sat_bruteforce(parse("P(a) & ~P(a)"), {2, 4}, TraceKind::Lasso).found());
}

TEST(SatBruteforce, FreeVariablesClosedExistentially) {
  auto f = parse_with_vars("P(x) & ~P(a)", {"x"});
  auto w = sat_bruteforce(f, {2, 1}, TraceKind::Finite);
  ASSERT_TRUE(w.found());
  EXPECT_EQ(w.witness->trace.domain.size(), 2u);
  EXPECT_TRUE(eval(w.witness->trace, f, 0, w.witness->assignment));
}

TEST(SatBruteforce, AgreesWithPlainEnumeration) {
  gen::Atoms atoms;
  atoms.unary = {"P"};
  atoms.nullary = {"p"};
  atoms.constants = {};
  gen::FormulaGen g(25, atoms);
  for (int i = 0; i < 120; ++i) {
    auto f = g.any(1 + g.pick(9), {}, {"x"});
    bool fin = sat_bruteforce(f, {2, 3}, TraceKind::Finite).found();
    ASSERT_EQ(fin, oracle::sat_enum(f, 2, 3, false)) << render(f);
    bool las = sat_bruteforce(f, {1, 3}, TraceKind::Lasso).found();
    ASSERT_EQ(las, oracle::sat_enum(f, 1, 3, true)) << render(f);
  }
}

TEST(SatBruteforce, FirstWitnessIsCanonicalFirst) {
  auto f = parse("X X p");
  auto w = sat_bruteforce(f, {1, 4}, TraceKind::Finite);
  ASSERT_TRUE(w.found());
  Signature s;
  s.predicates = {{"p", 0}};
  std::optional<Trace> first;
  enumerate_traces(s, 1, 4, false, [&](const Trace& t) {
    if (oracle::eval(t, f)) {
      first = t;
      return false;
    }
    return true;
  });
  ASSERT_TRUE(first);
  EXPECT_EQ(w.witness->trace, *first);
}

TEST(EquivBruteforce, Examples) {
  auto a = parse("F G (p | q)"), b = parse("F G p | F G q");
  EXPECT_FALSE(equiv_bruteforce(a, b, {1, 5}, TraceKind::Finite).found());
  EXPECT_TRUE(equiv_bruteforce(a, b, {1, 5}, TraceKind::Lasso).found());
  EXPECT_FALSE(equiv_bruteforce(parse("G+ F+ p"), parse("F+ (last & p)"), {1, 5}, TraceKind::Finite).found());
  EXPECT_FALSE(equiv_bruteforce(last(), bot(), {1, 3}, TraceKind::Lasso).found());
  auto w = equiv_bruteforce(last(), bot(), {1, 3}, TraceKind::Finite);
  ASSERT_TRUE(w.found());
  EXPECT_EQ(w.witness->trace.states.size(), 1u);
}
