#include <gtest/gtest.h>

#include <algorithm>

#include "ftl/fragments.hpp"
#include "gen.hpp"
#include "oracle.hpp"

using namespace ftl;

namespace {

Formula px(const std::string& src) { return parse_with_vars(src, {"x"}); }

bool has(const std::vector<Fragment>& v, Fragment k) { return std::find(v.begin(), v.end(), k) != v.end(); }

PropertyOptions small() {
  PropertyOptions o;
  o.bounds = {2, 3};
  o.ext_len = 2;
  return o;
}

gen::Atoms atoms() {
  gen::Atoms a;
  a.unary = {"P"};
  a.nullary = {"p"};
  return a;
}

Trace fin(std::vector<State> s, std::size_t d = 1) { return Trace{default_domain(d), {}, std::move(s), std::nullopt}; }

State with_p(std::initializer_list<int> xs) {
  State s;
  for (int x : xs) s.ext["P"].insert({x});
  return s;
}

} // namespace

TEST(Classify, Examples) {
  auto a = classify(px("F+ P(x)"));
  EXPECT_EQ(a, (std::vector<Fragment>{Fragment::UPlus, Fragment::U, Fragment::UPlusForall, Fragment::UPlusRPlus}));
  EXPECT_EQ(classify(parse("G+ forall x. (P(x) -> F+ Q(x))")), std::vector<Fragment>{Fragment::UPlusRPlus});
  auto b = classify(parse("G+ p"));
  EXPECT_TRUE(has(b, Fragment::RPlus));
  EXPECT_TRUE(has(b, Fragment::LtlSafety));
  EXPECT_FALSE(has(b, Fragment::LtlCoSafety));
  auto c = classify(parse("X p & F+ q"));
  EXPECT_TRUE(has(c, Fragment::LtlCoSafety));
  EXPECT_TRUE(has(c, Fragment::U));
  EXPECT_FALSE(has(c, Fragment::UPlus));
  // negation pushes through: ~F+ P(a) is G+ ~P(a)
  EXPECT_TRUE(has(classify(parse("~F+ P(a)")), Fragment::RPlus));
  EXPECT_TRUE(classify(parse("p U q & q R p")).empty());
  EXPECT_FALSE(has(classify(px("F+ P(x)")), Fragment::LtlCoSafety));
}

TEST(Property, ProofCountermodels) {
  // phi1 is F-exists but not F-forall, I-exists, I-forall
  auto phi1 = px("F+ last | F P(x)");
  Assignment x0{{"x", 0}};
  Trace empty1 = fin({State{}});
  EXPECT_FALSE(property_holds_on(phi1, empty1, Property::FForall, Direction::Forward, x0));
  EXPECT_TRUE(property_holds_on(phi1, empty1, Property::FExists, Direction::Both, x0));
  Trace empty_lasso = frozen_extension(empty1);
  EXPECT_FALSE(property_holds_on(phi1, empty_lasso, Property::IExists, Direction::Backward, x0));
  EXPECT_FALSE(property_holds_on(phi1, empty_lasso, Property::IForall, Direction::Backward, x0));

  // phi2 is F-forall, not F-exists, not I-forall
  auto phi2 = parse("forall x. F+ P(x)");
  EXPECT_FALSE(property_holds_on(phi2, empty1, Property::FExists, Direction::Backward, {}));
  Trace i2 = empty1;
  i2.states.push_back(with_p({0}));
  i2 = frozen_extension(i2);
  EXPECT_FALSE(property_holds_on(phi2, i2, Property::IForall, Direction::Forward, {}));

  // phi3 is I-exists
  auto phi3 = parse("G X true | last");
  Trace f3 = fin({State{}, State{}});
  EXPECT_FALSE(property_holds_on(phi3, f3, Property::FExists, Direction::Backward, {}));
  EXPECT_FALSE(property_holds_on(phi3, frozen_extension(f3), Property::IForall, Direction::Forward, {}));

  // phi4 is I-forall
  auto phi4 = px("G+ P(x) | F+ (P(x) & last)");
  Trace f4 = fin({State{}, with_p({0})});
  EXPECT_FALSE(property_holds_on(phi4, f4, Property::FExists, Direction::Forward, x0));
  Trace i4 = fin({with_p({0}), State{}});
  i4.loop_start = 1;
  EXPECT_FALSE(property_holds_on(phi4, i4, Property::IExists, Direction::Backward, x0));
}

TEST(Property, SearchMatchesTable) {
  struct Row {
    const char* src;
    bool fe, fa, ie, ia;
  };
  // expected: holds at the bound (true) or refuted (false)
  const Row rows[] = {
      {"F+ last | F P(x)", true, false, false, false},
      {"forall x. F+ P(x)", false, true, true, false}, // I-exists fails only on infinite domains
      {"G X true | last", false, false, true, false},
      {"G+ P(x) | F+ (P(x) & last)", false, false, false, true},
  };
  for (const auto& r : rows) {
    auto f = px(r.src);
    EXPECT_EQ(!property_falsify(f, Property::FExists, Direction::Both, small()).refuted, r.fe) << r.src;
    EXPECT_EQ(!property_falsify(f, Property::FForall, Direction::Both, small()).refuted, r.fa) << r.src;
    EXPECT_EQ(!property_falsify(f, Property::IExists, Direction::Both, small()).refuted, r.ie) << r.src;
    EXPECT_EQ(!property_falsify(f, Property::IForall, Direction::Both, small()).refuted, r.ia) << r.src;
  }
}

TEST(Property, WitnessesRecheck) {
  auto f = px("G+ P(x) | F+ (P(x) & last)");
  auto v = property_falsify(f, Property::IExists, Direction::Both, small());
  ASSERT_TRUE(v.refuted);
  EXPECT_TRUE(v.conclusive);
  ASSERT_TRUE(v.trace && v.related);
  EXPECT_TRUE(v.trace->is_lasso());
  EXPECT_FALSE(v.related->is_lasso());
  EXPECT_EQ(v.trace_sat, oracle::eval(*v.trace, f, 0, v.assignment));
  EXPECT_EQ(v.related_sat, oracle::eval(*v.related, f, 0, v.assignment));
  EXPECT_NE(v.trace_sat, v.related_sat);
  EXPECT_FALSE(property_holds_on(f, *v.trace, Property::IExists, v.direction, v.assignment));

  auto w = property_falsify(px("F+ last | F P(x)"), Property::FForall, Direction::Both, small());
  ASSERT_TRUE(w.refuted);
  EXPECT_EQ(w.direction, Direction::Forward);
  EXPECT_TRUE(w.conclusive);
  EXPECT_TRUE(w.trace_sat);
  EXPECT_FALSE(w.related_sat);
  EXPECT_TRUE(w.related->is_lasso());
}

TEST(Property, NearMisses) {
  auto a = property_falsify(parse("F true"), Property::FForall, Direction::Backward, small());
  ASSERT_TRUE(a.refuted);
  EXPECT_FALSE(a.conclusive);
  auto b = property_falsify(parse("last"), Property::FExists, Direction::Forward, small());
  ASSERT_TRUE(b.refuted);
  EXPECT_FALSE(b.conclusive);
  // refuting this needs an infinite domain
  EXPECT_FALSE(property_falsify(parse("exists x. G+ ~P(x)"), Property::IForall, Direction::Backward, small()).refuted);
  EXPECT_FALSE(property_falsify(parse("F+ p"), Property::FForall, Direction::Both, small()).refuted);
}

TEST(Property, FOmega) {
  EXPECT_FALSE(property_falsify(parse("G+ F+ p"), Property::FOmega, Direction::Both, small()).refuted);
  auto v = property_falsify(parse("F last"), Property::FOmega, Direction::Both, small());
  ASSERT_TRUE(v.refuted);
  EXPECT_TRUE(v.conclusive);
  EXPECT_TRUE(v.trace_sat);
  EXPECT_FALSE(v.related_sat);
}

TEST(Property, NegationDuality) {
  // F=>E for f is F<=A for ~f, and the same for the infinite side
  gen::FormulaGen g(41, atoms());
  for (int i = 0; i < 12; ++i) {
    auto f = g.any(1 + g.pick(6), {}, {"x"});
    for (auto [p, q] : {std::pair{Property::FExists, Property::FForall}, std::pair{Property::IExists, Property::IForall}}) {
      bool a = property_falsify(f, p, Direction::Forward, small()).refuted;
      bool b = property_falsify(neg(f), q, Direction::Backward, small()).refuted;
      ASSERT_EQ(a, b) << render(f);
    }
  }
}

TEST(Property, GrammarsAreSound) {
  gen::FormulaGen g(42, atoms());
  struct Case {
    Fragment k;
    gen::FormulaGen::Grammar gr;
    std::vector<Property> props;
  };
  std::vector<Case> cases;
  cases.push_back({Fragment::UPlus, {true, false, {Op::UntilPlus}}, {Property::FForall, Property::IExists}});
  cases.push_back({Fragment::RPlus, {false, true, {Op::ReleasePlus}}, {Property::FExists, Property::IForall}});
  cases.push_back({Fragment::U, {true, false, {Op::UntilPlus, Op::Until}}, {Property::IExists}});
  cases.push_back({Fragment::R, {false, true, {Op::ReleasePlus, Op::Release}}, {Property::IForall}});
  cases.push_back({Fragment::UPlusForall, {true, true, {Op::UntilPlus}}, {Property::FForall}});
  cases.push_back({Fragment::RPlusExists, {true, true, {Op::ReleasePlus}}, {Property::FExists}});
  cases.push_back({Fragment::UPlusRPlus, {true, true, {Op::UntilPlus, Op::ReleasePlus}}, {Property::FOmega}});
  for (const auto& c : cases)
    for (int i = 0; i < 20; ++i) {
      auto f = g.grammar(2 + g.pick(5), c.gr, {}, {"x"});
      ASSERT_TRUE(in_fragment(f, c.k)) << render(f);
      for (auto p : c.props)
        ASSERT_FALSE(property_falsify(f, p, Direction::Both, small()).refuted)
            << fragment_name(c.k) << " " << property_name(p) << " " << render(f);
    }
}

TEST(Property, UPlusEquivalenceTransfers) {
  // a finite disagreement of two U+ formulas carries over to the frozen lasso
  gen::FormulaGen g(43, atoms());
  gen::FormulaGen::Grammar gr{true, false, {Op::UntilPlus}};
  int found = 0;
  for (int i = 0; i < 20; ++i) {
    auto f = g.grammar(2 + g.pick(4), gr, {}, {"x"});
    auto h = g.grammar(2 + g.pick(4), gr, {}, {"x"});
    if (!is_sentence(f) || !is_sentence(h)) continue;
    auto fin_v = equiv_bruteforce(f, h, {2, 3}, TraceKind::Finite);
    if (!fin_v.found()) continue;
    ++found;
    EXPECT_TRUE(equiv_bruteforce(f, h, {2, 3}, TraceKind::Lasso).found()) << render(f) << " vs " << render(h);
  }
  EXPECT_GT(found, 0);
}

TEST(Maxims, Examples) {
  auto imp = maxims_falsify(parse("G+ p"), Maxim::Impartial, small());
  ASSERT_TRUE(imp.refuted);
  EXPECT_TRUE(imp.conclusive);
  auto ant = maxims_falsify(parse("F true"), Maxim::Anticipating, small());
  ASSERT_TRUE(ant.refuted);
  EXPECT_FALSE(ant.conclusive);
  EXPECT_FALSE(maxims_falsify(parse("p"), Maxim::Impartial, small()).refuted);
  EXPECT_FALSE(maxims_falsify(parse("p"), Maxim::Anticipating, small()).refuted);
  EXPECT_THROW(maxims_falsify(parse("P(a)"), Maxim::Impartial, small()), Error);
}

TEST(BadPrefix, Examples) {
  auto chi = parse("G+ p");
  State p;
  p.ext["p"].insert(Tuple{});
  EXPECT_TRUE(bad_prefix_check(fin({State{}}), chi, 3).bad_up_to_bound);
  auto v = bad_prefix_check(fin({p}), chi, 3);
  ASSERT_FALSE(v.bad_up_to_bound);
  EXPECT_TRUE(oracle::eval(*v.extension, chi));
  // X p is only violated once the next state is known
  EXPECT_FALSE(bad_prefix_check(fin({State{}}), parse("X p"), 2).bad_up_to_bound);
  EXPECT_TRUE(bad_prefix_check(fin({State{}, State{}}), parse("X p"), 2).bad_up_to_bound);
}
