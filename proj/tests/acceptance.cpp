// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "ftl/ftl.hpp"
#include "gen.hpp"
#include "oracle.hpp"

using namespace ftl;

namespace {

// Pinned limits (seconds) and bounds.
constexpr double kLimit1 = 30, kLimit2 = 300, kLimit3 = 60, kLimit7 = 300;
constexpr std::uint64_t kSeed = 20261018;

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail.clear();
    if (!detail.empty()) detail += "; ";
    detail += why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void time_limit(Outcome& o, Clock::time_point t0, double limit) {
  double s = since(t0);
  if (s >= limit) o.fail(fmt::format("runtime {:.1f}s exceeds {:.0f}s", s, limit));
}

gen::Atoms mono_atoms() {
  gen::Atoms a;
  a.unary = {"P", "Q"};
  a.nullary = {"p", "q"};
  return a;
}

Formula random_sentence(gen::FormulaGen& g, int max_size) {
  int size = 1 + g.pick(max_size);
  if (g.pick(2)) return exists("x", g.any(size, {"x"}, {"x"}));
  return g.any(size, {}, {"x"});
}

// ---------------------------------------------------------------------------

Outcome c1_semantics() {
  Outcome o;
  auto t0 = Clock::now();
  Bounds b{2, 5, 1};
  struct Pair {
    const char *f, *g;
    TraceKind kind;
  };
  const Pair eqs[] = {
      {"last", "~X true", TraceKind::Lasso},
      {"last", "~X true", TraceKind::Finite},
      {"N p", "last | X p", TraceKind::Lasso},
      {"N p", "last | X p", TraceKind::Finite},
      {"F+ G+ p", "F+ (last & p)", TraceKind::Finite},
      {"G+ F+ p", "F+ (last & p)", TraceKind::Finite},
      {"F G (p | q)", "F G p | F G q", TraceKind::Finite},
  };
  int held = 0;
  for (const auto& e : eqs) {
    auto v = equiv_bruteforce(parse(e.f), parse(e.g), b, e.kind);
    if (v.found()) o.fail(fmt::format("{} vs {} differ", e.f, e.g));
    else ++held;
  }
  auto w = equiv_bruteforce(parse("F G (p | q)"), parse("F G p | F G q"), b, TraceKind::Lasso);
  if (!w.found()) o.fail("no lasso witness for F G (p | q)");
  else if (!w.witness->trace.is_lasso() ||
           oracle::eval(w.witness->trace, parse("F G (p | q)")) == oracle::eval(w.witness->trace, parse("F G p | F G q")))
    o.fail("lasso witness does not separate");
  time_limit(o, t0, kLimit1);
  if (o.pass) o.detail = fmt::format("{} equivalences hold at (2,5), lasso witness found, {:.1f}s", held, since(t0));
  return o;
}

Outcome c2_reduction() {
  Outcome o;
  auto t0 = Clock::now();
  gen::FormulaGen g(kSeed + 2, mono_atoms());
  int n = 0, sat = 0, nodes = 0;
  while (n < 200) {
    Formula f = random_sentence(g, 10);
    if (!is_sentence(f) || f->size > 10) continue;
    ++n;
    nodes += f->size;
    auto r = check_reduction(f, {2, 4, 1}, 5);
    if (!r.agree()) o.fail("disagreement on " + render(f));
    sat += r.finite.found();
  }
  time_limit(o, t0, kLimit2);
  if (o.pass) o.detail = fmt::format("200 sentences (mean size {:.1f}), {} finitely satisfiable, 0 disagreements, {:.1f}s",
                                     nodes / 200.0, sat, since(t0));
  return o;
}

// Per-instant P profile of the element x (or of the whole domain): 0 empty, D full, m mixed.
std::string p_profile(const Trace& t, const Assignment& a) {
  std::string s;
  for (const auto& st : t.states) {
    if (a.count("x")) {
      s += st.holds("P", {a.at("x")}) ? 'D' : '0';
      continue;
    }
    std::size_t c = 0;
    for (std::size_t d = 0; d < t.domain.size(); ++d) c += st.holds("P", {static_cast<int>(d)});
    s += c == 0 ? '0' : c == t.domain.size() ? 'D' : 'm';
  }
  return s;
}

Outcome c3_matrix() {
  Outcome o;
  auto t0 = Clock::now();
  PropertyOptions opt;
  opt.bounds = {2, 4, 1};
  opt.ext_len = 2;
  const Property props[] = {Property::FExists, Property::FForall, Property::IExists, Property::IForall};
  const char* rows[] = {"F+ last | F P(x)", "forall x. F+ P(x)", "G X true | last", "G+ P(x) | F+ (P(x) & last)"};
  std::vector<std::vector<PropertyVerdict>> vs(4);
  for (int r = 0; r < 4; ++r) {
    Formula f = parse_with_vars(rows[r], {"x"});
    for (int c = 0; c < 4; ++c) {
      auto v = property_falsify(f, props[c], Direction::Both, opt);
      bool expect_hold = r == c;
      if (expect_hold && v.refuted) o.fail(fmt::format("{} refuted for {}", rows[r], property_name(props[c])));
      if (!expect_hold && !v.refuted) o.fail(fmt::format("{} not refuted for {}", rows[r], property_name(props[c])));
      if (v.refuted && v.trace_sat == v.related_sat) o.fail(fmt::format("{} {} witness inconsistent", rows[r], property_name(props[c])));
      vs[r].push_back(v);
    }
  }
  // Countermodels of the proof, up to isomorphism.
  auto check = [&](int r, int c, bool ok, const std::string& what) {
    if (vs[r][c].refuted && !ok) o.fail(fmt::format("{} {}: countermodel differs ({})", rows[r], property_name(props[c]), what));
  };
  {
    const auto& v = vs[0][1];
    check(0, 1,
          v.trace && v.related && p_profile(*v.trace, v.assignment) == "0" && v.related->is_lasso() &&
              p_profile(*v.related, v.assignment).find_first_not_of('0') == std::string::npos,
          "1-state P=0 with all-empty extension");
  }
  {
    const auto& v = vs[1][0];
    check(1, 0,
          v.trace && v.related && p_profile(*v.trace, {}) == "0" && p_profile(*v.related, {}).substr(0, 2) == "0D",
          "1-state P=0, extension P=D at instant 1");
  }
  {
    const auto& v = vs[2][3];
    check(2, 3, v.trace && v.related && v.trace->is_lasso() && !v.related->is_lasso() && v.related->length() == 2,
          "prefix of length 2");
  }
  {
    const auto& v = vs[3][0];
    check(3, 0, v.trace && p_profile(*v.trace, v.assignment) == "0D", "2-state P=0 then D");
  }
  time_limit(o, t0, kLimit3);
  if (o.pass) o.detail = fmt::format("4x4 verdict pattern and countermodels match, {:.1f}s", since(t0));
  return o;
}

Outcome c4_grammars() {
  Outcome o;
  gen::Atoms atoms;
  atoms.unary = {"P"};
  atoms.nullary = {"p"};
  gen::FormulaGen g(kSeed + 4, atoms);
  PropertyOptions opt;
  opt.bounds = {2, 4, 1};
  opt.ext_len = 2;
  struct Case {
    Fragment k;
    gen::FormulaGen::Grammar gr;
    std::vector<Property> props;
  };
  const std::vector<Case> cases{
      {Fragment::UPlus, {true, false, {Op::UntilPlus}}, {Property::FForall, Property::IExists}},
      {Fragment::RPlus, {false, true, {Op::ReleasePlus}}, {Property::FExists, Property::IForall}},
      {Fragment::U, {true, false, {Op::UntilPlus, Op::Until}}, {Property::IExists}},
      {Fragment::R, {false, true, {Op::ReleasePlus, Op::Release}}, {Property::IForall}},
      {Fragment::UPlusForall, {true, true, {Op::UntilPlus}}, {Property::FForall}},
      {Fragment::RPlusExists, {true, true, {Op::ReleasePlus}}, {Property::FExists}},
      {Fragment::UPlusRPlus, {true, true, {Op::UntilPlus, Op::ReleasePlus}}, {Property::FOmega}},
  };
  int checks = 0;
  for (const auto& c : cases)
    for (int i = 0; i < 500; ++i) {
      Formula f = g.grammar(2 + g.pick(5), c.gr, {}, {"x"});
      if (!in_fragment(f, c.k)) {
        o.fail("generator left " + fragment_name(c.k) + ": " + render(f));
        continue;
      }
      for (auto p : c.props) {
        ++checks;
        if (property_falsify(f, p, Direction::Both, opt).refuted)
          o.fail(fragment_name(c.k) + " " + property_name(p) + " refuted on " + render(f));
      }
    }
  auto a = property_falsify(parse("F true"), Property::FForall, Direction::Backward, opt);
  if (!a.refuted || a.conclusive) o.fail("F true for F<=A not an inconclusive refutation");
  auto b = property_falsify(parse("last"), Property::FExists, Direction::Forward, opt);
  if (!b.refuted || b.conclusive) o.fail("last for F=>E not an inconclusive refutation");
  auto c = property_falsify(parse("exists x. G+ ~P(x)"), Property::IForall, Direction::Backward, opt);
  if (c.refuted && c.conclusive) o.fail("exists x. G+ ~P(x) conclusively refuted at bound");
  if (o.pass)
    o.detail = fmt::format("7 fragments x 500 formulas, {} property checks, 0 refutations; near misses as recorded", checks);
  return o;
}

std::vector<Formula> sat_corpus() {
  gen::FormulaGen g(kSeed + 5, mono_atoms());
  std::vector<Formula> out;
  while (out.size() < 300) out.push_back(random_sentence(g, 10));
  return out;
}

Outcome c5_sat_bounded() {
  Outcome o;
  int sat = 0, wide = 0;
  for (const auto& f : sat_corpus())
    for (std::uint64_t k = 1; k <= 3; ++k) {
      auto q = sat_bounded(f, k);
      bool brute = sat_bruteforce(f, {2, k, 1}, TraceKind::Finite).found();
      if (!q) {
        if (brute) o.fail(fmt::format("sat_bounded misses {} at k={}", render(f), k));
        continue;
      }
      ++sat;
      Trace t = extract_trace(*q);
      if (!oracle::eval(t, closure(f).normalised)) o.fail("extraction does not re-evaluate: " + render(f));
      if (t.length() > k) o.fail("extraction too long: " + render(f));
      if (!bounds(f, k).domain.bounds(t.domain.size())) o.fail("domain bound exceeded: " + render(f));
      if (!brute) {
        // The quasimodel needs more than two elements; confirm at its own size.
        ++wide;
        if (t.domain.size() <= 2 || !sat_bruteforce(f, {t.domain.size(), k, t.domain.size()}, TraceKind::Finite).found())
          o.fail(fmt::format("sat_bounded finds {} at k={} but brute force does not", render(f), k));
      }
    }
  if (o.pass)
    o.detail = fmt::format("300 sentences x k=1..3 agree ({} SAT, {} needing |D|>2 confirmed); extractions re-evaluate", sat, wide);
  return o;
}

Outcome c6_sat_finite() {
  Outcome o;
  int sat = 0, beyond = 0;
  for (const auto& f : sat_corpus()) {
    auto q = sat_finite(f);
    bool brute = sat_bruteforce(f, {2, 6, 1}, TraceKind::Finite).found();
    if (brute && !q) o.fail("sat_finite misses " + render(f));
    if (!q) continue;
    ++sat;
    Trace t = extract_trace(*q);
    if (!oracle::eval(t, closure(f).normalised)) o.fail("extraction does not re-evaluate: " + render(f));
    if (q->length() > 6) {
      ++beyond;
      continue;
    }
    std::size_t d = std::max<std::size_t>(2, t.domain.size());
    if (!brute && !sat_bruteforce(f, {d, 6, 3}, TraceKind::Finite).found())
      o.fail("sat_finite finds " + render(f) + " but brute force at length 6 does not");
  }
  if (o.pass) o.detail = fmt::format("300 sentences agree ({} SAT, {} only beyond length 6)", sat, beyond);
  return o;
}

Outcome c7_tiling() {
  Outcome o;
  auto t0 = Clock::now();
  std::mt19937_64 rng(kSeed + 7);
  int solvable[2] = {0, 0};
  for (int i = 0; i < 5; ++i) {
    TileSet ts = gen::random_tiles(rng, 3);
    for (auto kind : {TilingKind::Grid, TilingKind::Corridor}) {
      TilingInstance inst{kind, 1, ts};
      auto tau = solve_tiling_bruteforce(inst, 4);
      Formula f = tiling_formula(inst);
      auto q = sat_bounded(f, kind == TilingKind::Grid ? 4 : 4 * inst.height());
      if (q.has_value() != tau.has_value())
        o.fail(fmt::format("{} tiles {}: sat {} solver {}", kind == TilingKind::Grid ? "grid" : "corridor",
                           tiles_to_json(ts).dump(), q.has_value(), tau.has_value()));
      if (tau) {
        ++solvable[kind == TilingKind::Grid];
        if (!eval(tiling_trace(inst, *tau), f, 0, {{"x", 0}})) o.fail("intended model fails: " + tiles_to_json(ts).dump());
      }
    }
  }
  time_limit(o, t0, kLimit7);
  if (o.pass)
    o.detail = fmt::format("5 tile sets: grid {} solvable, corridor {} solvable, all matched, {:.1f}s", solvable[1],
                           solvable[0], since(t0));
  return o;
}

Outcome c8_talc() {
  using namespace ftl::talc;
  Outcome o;
  gen::TalcGen g(kSeed + 8);
  int sat = 0, wide = 0;
  for (int i = 0; i < 200; ++i) {
    Problem p = g.problem(10);
    std::size_t k = 1 + static_cast<std::size_t>(i % 3);
    auto q = type_elimination(p, k);
    bool brute = talc_bruteforce(p, k, 3).found();
    if (brute && !q) o.fail(fmt::format("type_elimination misses {} k={}", render(p), k));
    if (!q) continue;
    ++sat;
    Trace t = extract_talc_model(*q);
    if (t.length() > k || !oracle::eval(t, to_fo(p))) o.fail("extraction does not re-evaluate: " + render(p));
    if (!brute) {
      ++wide;
      if (t.domain.size() <= 3) o.fail(fmt::format("type_elimination finds {} k={} but brute force does not", render(p), k));
    }
  }
  if (type_elimination(parse_problem("global { true [= A & !A; } assert { A_a(a) }"), 3)) o.fail("E5 contradiction SAT");
  auto ex = type_elimination(parse_problem("global { true [= E r . A; } assert { B(a) }"), 1);
  if (!ex || ex->length() != 1) o.fail("E r . A not SAT in one quasistate");
  Problem ev = parse_problem("assert { A(a) & (true U !A(a)) }");
  if (type_elimination(ev, 1) || !type_elimination(ev, 2)) o.fail("U-eventuality pattern wrong");
  if (o.pass)
    o.detail = fmt::format("200 problems agree ({} SAT, {} beyond |D|=3), 3 hand examples pass", sat, wide);
  return o;
}

Outcome c9_proofs() {
  using namespace ftl::proof;
  Outcome o;
  auto s = run_corpus();
  if (s.passed != 13 || s.total() != 13) o.fail(fmt::format("corpus {}/{}", s.passed, s.total()));
  int mutants_ok = 0;
  for (const auto& d : corpus()) {
    Library lib;
    for (const auto& e : dependency_order(corpus()))
      if (e.name != d.name) check_derivation(e, lib);
    if (check_derivation(drop_premise(d), lib).ok) {
      ++mutants_ok;
      o.fail("mutant of " + d.name + " passes");
    }
  }
  for (const auto& d : corpus())
    if (sat_bruteforce(neg(soundness_claim(d)), {1, 4, 1}, TraceKind::Finite).found())
      o.fail(d.name + " goal falsified at (1,4)");
  if (o.pass) o.detail = fmt::format("13/13 verified, {}/13 mutants pass, goals valid at (1,4)", mutants_ok);
  return o;
}

Outcome c10_insensitivity() {
  Outcome o;
  Signature sigma;
  sigma.predicates = {{"P", 1}, {"Q", 1}, {"p", 0}, {"E", 1}};
  sigma.constants = {"a"};
  if (insensitivity_falsify(parse("F+ P(a)"), sigma, "E", {1, 3, 1}).found()) o.fail("F+ P(a) refuted");
  if (!insensitivity_falsify(parse("F+ ~P(a)"), sigma, "E", {1, 3, 1}).found()) o.fail("F+ ~P(a) not refuted");

  gen::Atoms atoms;
  atoms.unary = {"P", "Q"};
  atoms.nullary = {"p"};
  atoms.constants = {"a"};
  gen::FormulaGen g(kSeed + 10, atoms);
  Bounds b{2, 3, 1};
  auto insensitive = [&](const Formula& f) { return !insensitivity_falsify(f, sigma, "E", b).found(); };
  std::vector<Formula> pool;
  for (int i = 0; i < 2000 && pool.size() < 40; ++i) {
    Formula f = g.any(1 + g.pick(6), {"x"}, {"x"});
    if (insensitive(f)) pool.push_back(f);
  }
  if (pool.size() < 10) o.fail(fmt::format("only {} insensitive formulas generated", pool.size()));
  int pairs = 0, violations = 0;
  std::mt19937_64 rng(kSeed + 11);
  for (; pairs < 100 && !pool.empty(); ++pairs) {
    const Formula& f = pool[rng() % pool.size()];
    const Formula& h = pool[rng() % pool.size()];
    for (const Formula& c : {neg(f), exists("x", f), conj(f, h)})
      if (!insensitive(c)) {
        ++violations;
        o.fail("closure violation: " + render(c));
      }
  }
  if (o.pass)
    o.detail = fmt::format("examples as expected; {} pairs over {} insensitive formulas, {} closure violations", pairs,
                           pool.size(), violations);
  return o;
}

} // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> crit{
      {"semantics equivalences", c1_semantics},
      {"finite-to-infinite reduction", c2_reduction},
      {"property matrix", c3_matrix},
      {"grammar soundness", c4_grammars},
      {"sat_bounded vs brute force", c5_sat_bounded},
      {"sat_finite vs brute force", c6_sat_finite},
      {"tiling end-to-end", c7_tiling},
      {"TALC type elimination", c8_talc},
      {"proof corpus", c9_proofs},
      {"insensitivity", c10_insensitivity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < crit.size(); ++i) {
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = crit[i].second();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    fmt::print("criterion {:>2} {:<30} {}  [{:.1f}s] {}\n", i + 1, crit[i].first, o.pass ? "PASS" : "FAIL", since(t0), o.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria pass\n", crit.size() - static_cast<std::size_t>(failed), crit.size());
  return failed;
}
