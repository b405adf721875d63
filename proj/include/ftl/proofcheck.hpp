#pragma once

// Hilbert-style derivation checker for the finite-trace temporal axiom system.
// Metavariables are 0-ary atoms: phi, psi, chi in schemata, every 0-ary atom in a cited goal.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ftl/error.hpp"
#include "ftl/syntax.hpp"

namespace ftl::proof {

using json = nlohmann::json;
using Subst = std::map<std::string, Formula>;

enum class Rule { Axiom, Fol, Def, Nec, Cite, Assume };

// An axiom or theorem instance folded into a Fol/Def step.
struct Use {
  bool cite = false;
  std::string name;
  Subst sub;
};

struct Justification {
  Rule rule = Rule::Fol;
  std::string name;                  // axiom, cited theorem, or "box"/"wnext" for Nec
  std::vector<std::size_t> premises; // 1-based line numbers
  Subst sub;
  std::vector<Use> uses;
};

struct Line {
  Formula f;
  Justification by;
};

struct Derivation {
  std::string name;
  Formula goal;
  std::vector<Line> lines;
};

struct Schema {
  std::string name;
  Formula pattern;
};

inline const std::vector<Schema>& axioms() {
  static const std::vector<Schema> table = [] {
    std::vector<std::pair<std::string, std::string>> src = {
        {"boxK", "G (phi -> psi) -> (G phi -> G psi)"},
        {"wnextK", "N (phi -> psi) -> (N phi -> N psi)"},
        {"wnextdef", "N phi <-> G false | X phi"},
        {"boxdef", "G phi <-> N phi & N G phi"},
        {"boxwnexttrcl", "G (phi -> N phi) -> N (phi -> G phi)"},
        {"untiltodiam", "phi U psi -> F psi"},
        {"untildef", "phi U psi <-> X psi | X (phi & phi U psi)"},
        {"wnextbarcan", "N (forall x. phi) <-> forall x. N phi"},
        {"endoftime", "F+ G false"},
    };
    std::vector<Schema> out;
    for (auto& [n, s] : src) out.push_back({n, parse(s)});
    return out;
  }();
  return table;
}

inline const Schema* find_axiom(const std::string& name) {
  for (const auto& s : axioms())
    if (s.name == name) return &s;
  return nullptr;
}

inline const std::set<std::string>& schema_metavars() {
  static const std::set<std::string> m = {"phi", "psi", "chi"};
  return m;
}

inline bool is_metavar(const Formula& f, const std::set<std::string>& metas) {
  return f->op == Op::Atom && f->args.empty() && metas.count(f->name);
}

inline void collect_metavars(const Formula& f, std::set<std::string>& out) {
  if (f->op == Op::Atom && f->args.empty()) out.insert(f->name);
  if (f->lhs) collect_metavars(f->lhs, out);
  if (f->rhs) collect_metavars(f->rhs, out);
}

namespace detail {

inline bool match_rec(const Formula& p, const Formula& f, const std::set<std::string>& metas, Subst& sub,
                      std::map<std::string, std::string>& vars) {
  if (is_metavar(p, metas)) {
    auto it = sub.find(p->name);
    if (it == sub.end()) {
      sub.emplace(p->name, f);
      return true;
    }
    return equal(it->second, f);
  }
  if (p->op != f->op) return false;
  if (is_quantifier(p->op)) {
    auto [it, fresh] = vars.emplace(p->name, f->name);
    if (!fresh && it->second != f->name) return false;
  } else if (p->name != f->name || p->args != f->args) {
    return false;
  }
  if (p->lhs && !match_rec(p->lhs, f->lhs, metas, sub, vars)) return false;
  if (p->rhs && !match_rec(p->rhs, f->rhs, metas, sub, vars)) return false;
  return true;
}

} // namespace detail

// Extends `sub` so that pattern[sub] == f.
inline bool match(const Formula& pattern, const Formula& f, const std::set<std::string>& metas, Subst& sub) {
  Subst trial = sub;
  std::map<std::string, std::string> vars;
  if (!detail::match_rec(pattern, f, metas, trial, vars)) return false;
  sub = std::move(trial);
  return true;
}

inline Formula instantiate(const Formula& p, const Subst& sub) {
  if (p->op == Op::Atom && p->args.empty()) {
    auto it = sub.find(p->name);
    return it == sub.end() ? p : it->second;
  }
  Formula l = p->lhs ? instantiate(p->lhs, sub) : nullptr;
  Formula r = p->rhs ? instantiate(p->rhs, sub) : nullptr;
  return with_children(p, l, r);
}

// Exhaustive rewriting with the definitional equations, then ¬¬ and ¬⊤/¬⊥ removal.
inline Formula def_normal(const Formula& f) { return simplify_negations(expand(f)); }

// ---------------------------------------------------------------------------
// Propositional consequence over opaque temporal / quantified / atomic subformulas

struct Countervaluation {
  std::vector<std::pair<std::string, bool>> atoms;

  std::string str() const {
    std::string s;
    for (const auto& [a, v] : atoms) s += (s.empty() ? "" : ", ") + a + "=" + (v ? "1" : "0");
    return s;
  }
};

namespace detail {

class PropSkeleton {
public:
  static constexpr std::size_t kMaxAtoms = 16;

  int atom_of(const Formula& f) {
    auto it = index_.find(f);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(atoms_.size());
    atoms_.push_back(f);
    index_.emplace(f, id);
    return id;
  }
  void register_atoms(const Formula& f) {
    switch (f->op) {
    case Op::True: case Op::False: return;
    case Op::Not: register_atoms(f->lhs); return;
    case Op::And: case Op::Or: case Op::Implies: case Op::Iff:
      register_atoms(f->lhs);
      register_atoms(f->rhs);
      return;
    default: atom_of(f);
    }
  }
  bool value(const Formula& f, std::uint32_t val) const {
    switch (f->op) {
    case Op::True: return true;
    case Op::False: return false;
    case Op::Not: return !value(f->lhs, val);
    case Op::And: return value(f->lhs, val) && value(f->rhs, val);
    case Op::Or: return value(f->lhs, val) || value(f->rhs, val);
    case Op::Implies: return !value(f->lhs, val) || value(f->rhs, val);
    case Op::Iff: return value(f->lhs, val) == value(f->rhs, val);
    default: return (val >> index_.at(f)) & 1;
    }
  }
  const std::vector<Formula>& atoms() const { return atoms_; }

private:
  std::vector<Formula> atoms_;
  std::unordered_map<Formula, int, FormulaHash, FormulaEq> index_;
};

} // namespace detail

// Returns a valuation making every premise true and the conclusion false, if any.
inline std::optional<Countervaluation> tautological_consequence(const std::vector<Formula>& premises,
                                                                const Formula& conclusion) {
  detail::PropSkeleton sk;
  for (const auto& p : premises) sk.register_atoms(p);
  sk.register_atoms(conclusion);
  std::size_t n = sk.atoms().size();
  if (n > detail::PropSkeleton::kMaxAtoms)
    throw Error("propositional check over " + std::to_string(n) + " atoms exceeds the limit of 16");
  for (std::uint32_t v = 0; v < (std::uint32_t{1} << n); ++v) {
    bool all = std::all_of(premises.begin(), premises.end(), [&](const Formula& p) { return sk.value(p, v); });
    if (all && !sk.value(conclusion, v)) {
      Countervaluation cv;
      for (std::size_t i = 0; i < n; ++i) cv.atoms.emplace_back(render(sk.atoms()[i]), (v >> i) & 1);
      return cv;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Library of verified results

struct Theorem {
  Formula goal;
  std::vector<Formula> assumptions; // non-empty for derived rules
};

inline const std::string kWnextNec = "wnextNec";

class Library {
public:
  void add(const std::string& name, Theorem t) { theorems_[name] = std::move(t); }
  const Theorem* find(const std::string& name) const {
    auto it = theorems_.find(name);
    return it == theorems_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return theorems_.size(); }

private:
  std::map<std::string, Theorem> theorems_;
};

inline std::set<std::string> theorem_metavars(const Theorem& t) {
  std::set<std::string> m;
  collect_metavars(t.goal, m);
  for (const auto& a : t.assumptions) collect_metavars(a, m);
  return m;
}

// ---------------------------------------------------------------------------
// Line and derivation checks

struct LineError {
  std::size_t line = 0; // 1-based
  std::string message;
  std::optional<Countervaluation> countervaluation;
};

struct Report {
  std::string name;
  bool ok = false;
  std::optional<LineError> error;
};

namespace detail {

inline Formula use_instance(const Use& u, const Library& lib) {
  if (!u.cite) {
    const Schema* s = find_axiom(u.name);
    if (!s) throw Error("unknown axiom " + u.name);
    return instantiate(s->pattern, u.sub);
  }
  const Theorem* t = lib.find(u.name);
  if (!t) throw Error("unknown or unverified theorem " + u.name);
  if (!t->assumptions.empty()) throw Error(u.name + " is a rule, not a theorem");
  return instantiate(t->goal, u.sub);
}

inline std::string describe(Rule r) {
  switch (r) {
  case Rule::Axiom: return "axiom";
  case Rule::Fol: return "FOL";
  case Rule::Def: return "Def";
  case Rule::Nec: return "Nec";
  case Rule::Cite: return "cite";
  case Rule::Assume: return "assumption";
  }
  return "?";
}

} // namespace detail

// `i` is 0-based. Returns nullopt when the line is justified.
inline std::optional<LineError> check_line(const Derivation& d, std::size_t i, const Library& lib) {
  const Line& ln = d.lines.at(i);
  const Justification& by = ln.by;
  auto fail = [&](std::string msg) { return LineError{i + 1, std::move(msg), std::nullopt}; };
  for (std::size_t p : by.premises)
    if (p == 0 || p > i) return fail("bad premise index " + std::to_string(p));
  try {
    switch (by.rule) {
    case Rule::Assume:
      return std::nullopt;
    case Rule::Axiom: {
      const Schema* s = find_axiom(by.name);
      if (!s) return fail("unknown axiom " + by.name);
      if (!by.sub.empty()) {
        if (!equal(instantiate(s->pattern, by.sub), ln.f)) return fail("not the stated instance of " + by.name);
        return std::nullopt;
      }
      Subst sub;
      if (!match(s->pattern, ln.f, schema_metavars(), sub)) return fail("pattern mismatch with axiom " + by.name);
      return std::nullopt;
    }
    case Rule::Cite: {
      const Theorem* t = lib.find(by.name);
      if (!t) return fail("unknown or unverified theorem " + by.name);
      if (!t->assumptions.empty()) return fail(by.name + " is a rule, not a theorem");
      if (!by.sub.empty()) {
        if (!equal(instantiate(t->goal, by.sub), ln.f)) return fail("not the stated instance of " + by.name);
        return std::nullopt;
      }
      Subst sub;
      if (!match(t->goal, ln.f, theorem_metavars(*t), sub)) return fail("not an instance of " + by.name);
      return std::nullopt;
    }
    case Rule::Nec: {
      if (by.premises.size() != 1) return fail("Nec takes exactly one premise");
      const Formula& prem = d.lines[by.premises[0] - 1].f;
      if (by.name == "box") {
        if (!equal(ln.f, always(prem))) return fail("line is not G of its premise");
        return std::nullopt;
      }
      if (by.name == "wnext") {
        const Theorem* r = lib.find(kWnextNec);
        if (!r || r->assumptions.size() != 1) return fail("derived rule " + kWnextNec + " is not available");
        auto metas = theorem_metavars(*r);
        Subst sub;
        if (!match(r->assumptions[0], prem, metas, sub) || !match(r->goal, ln.f, metas, sub))
          return fail("line does not follow by " + kWnextNec);
        return std::nullopt;
      }
      return fail("unknown necessitation " + by.name);
    }
    case Rule::Fol: case Rule::Def: {
      std::vector<Formula> prem;
      for (std::size_t p : by.premises) prem.push_back(d.lines[p - 1].f);
      for (const auto& u : by.uses) prem.push_back(detail::use_instance(u, lib));
      Formula concl = ln.f;
      if (by.rule == Rule::Def) {
        for (auto& p : prem) p = def_normal(p);
        concl = def_normal(concl);
      }
      if (auto cv = tautological_consequence(prem, concl)) {
        LineError e = fail("not a tautological consequence (" + detail::describe(by.rule) + "); countervaluation: " +
                           cv->str());
        e.countervaluation = std::move(cv);
        return e;
      }
      return std::nullopt;
    }
    }
  } catch (const Error& e) {
    return fail(e.what());
  }
  return std::nullopt;
}

// On success the goal (with its assumptions) is registered in `lib` under d.name.
inline Report check_derivation(const Derivation& d, Library& lib) {
  Report r{d.name, false, std::nullopt};
  if (d.lines.empty()) {
    r.error = LineError{0, "empty derivation", std::nullopt};
    return r;
  }
  for (std::size_t i = 0; i < d.lines.size(); ++i) {
    if (auto e = check_line(d, i, lib)) {
      r.error = std::move(e);
      return r;
    }
  }
  if (!equal(d.lines.back().f, d.goal)) {
    r.error = LineError{d.lines.size(), "last line is not the goal", std::nullopt};
    return r;
  }
  Theorem t{d.goal, {}};
  for (const auto& ln : d.lines)
    if (ln.by.rule == Rule::Assume) t.assumptions.push_back(ln.f);
  lib.add(d.name, std::move(t));
  r.ok = true;
  return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline Subst subst_from_json(const json& j) {
  Subst s;
  if (!j.is_object()) throw Error("substitution must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) s[it.key()] = parse(it.value().get<std::string>());
  return s;
}

inline json subst_to_json(const Subst& s) {
  json j = json::object();
  for (const auto& [k, v] : s) j[k] = render(v);
  return j;
}

inline std::vector<std::size_t> premises_from_json(const json& j) {
  std::vector<std::size_t> out;
  if (j.is_number_unsigned()) return {j.get<std::size_t>()};
  for (const auto& p : j) out.push_back(p.get<std::size_t>());
  return out;
}

inline Justification justification_from_json(const json& j) {
  Justification b;
  if (!j.is_object()) throw Error("justification must be an object");
  if (j.contains("axiom")) {
    b.rule = Rule::Axiom;
    b.name = j["axiom"].get<std::string>();
  } else if (j.contains("fol")) {
    b.rule = Rule::Fol;
    b.premises = premises_from_json(j["fol"]);
  } else if (j.contains("def")) {
    b.rule = Rule::Def;
    b.premises = premises_from_json(j["def"]);
  } else if (j.contains("nec")) {
    b.rule = Rule::Nec;
    b.name = j["nec"].get<std::string>();
    b.premises = premises_from_json(j.at("of"));
  } else if (j.contains("cite")) {
    b.rule = Rule::Cite;
    b.name = j["cite"].get<std::string>();
  } else if (j.contains("assume")) {
    b.rule = Rule::Assume;
  } else {
    throw Error("unknown justification " + j.dump());
  }
  if (j.contains("sub")) b.sub = subst_from_json(j["sub"]);
  if (j.contains("use")) {
    for (const auto& u : j["use"]) {
      Use x;
      if (u.contains("axiom")) x.name = u["axiom"].get<std::string>();
      else if (u.contains("cite")) { x.cite = true; x.name = u["cite"].get<std::string>(); }
      else throw Error("use entry needs axiom or cite: " + u.dump());
      if (u.contains("sub")) x.sub = subst_from_json(u["sub"]);
      b.uses.push_back(std::move(x));
    }
  }
  return b;
}

inline json justification_to_json(const Justification& b) {
  json j = json::object();
  auto prem = [&] { return json(b.premises); };
  switch (b.rule) {
  case Rule::Axiom: j["axiom"] = b.name; break;
  case Rule::Fol: j["fol"] = prem(); break;
  case Rule::Def: j["def"] = prem(); break;
  case Rule::Nec: j["nec"] = b.name; j["of"] = b.premises.empty() ? json(0) : json(b.premises[0]); break;
  case Rule::Cite: j["cite"] = b.name; break;
  case Rule::Assume: j["assume"] = true; break;
  }
  if (!b.sub.empty()) j["sub"] = subst_to_json(b.sub);
  if (!b.uses.empty()) {
    json us = json::array();
    for (const auto& u : b.uses) {
      json x = json::object();
      x[u.cite ? "cite" : "axiom"] = u.name;
      if (!u.sub.empty()) x["sub"] = subst_to_json(u.sub);
      us.push_back(x);
    }
    j["use"] = us;
  }
  return j;
}

} // namespace detail

inline Derivation derivation_from_json(const json& j) {
  Derivation d;
  try {
    d.name = j.value("name", std::string());
    d.goal = parse(j.at("goal").get<std::string>());
    for (const auto& l : j.at("lines"))
      d.lines.push_back({parse(l.at("f").get<std::string>()), detail::justification_from_json(l.at("by"))});
  } catch (const json::exception& e) {
    throw Error(std::string("malformed proof: ") + e.what());
  }
  return d;
}

inline json derivation_to_json(const Derivation& d) {
  json lines = json::array();
  for (const auto& l : d.lines) lines.push_back({{"f", render(l.f)}, {"by", detail::justification_to_json(l.by)}});
  return {{"name", d.name}, {"goal", render(d.goal)}, {"lines", lines}};
}

// A file holds one derivation object or an array of them.
inline std::vector<Derivation> derivations_from_json(const json& j) {
  std::vector<Derivation> out;
  if (j.is_array()) {
    for (const auto& x : j) out.push_back(derivation_from_json(x));
  } else {
    out.push_back(derivation_from_json(j));
  }
  return out;
}

inline std::vector<Derivation> load_proofs(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<Derivation> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error("cannot read " + f.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(f.string() + ": " + e.what());
    }
    for (auto& d : derivations_from_json(j)) out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

// Names a derivation depends on (cites, uses, derived rule).
inline std::set<std::string> dependencies(const Derivation& d) {
  std::set<std::string> out;
  for (const auto& l : d.lines) {
    if (l.by.rule == Rule::Cite) out.insert(l.by.name);
    if (l.by.rule == Rule::Nec && l.by.name == "wnext") out.insert(kWnextNec);
    for (const auto& u : l.by.uses)
      if (u.cite) out.insert(u.name);
  }
  return out;
}

// Stable topological order; names not defined in the set are left to the library.
inline std::vector<Derivation> dependency_order(std::vector<Derivation> ds) {
  std::set<std::string> names;
  for (const auto& d : ds) names.insert(d.name);
  std::vector<Derivation> out;
  std::set<std::string> done;
  while (!ds.empty()) {
    auto it = std::find_if(ds.begin(), ds.end(), [&](const Derivation& d) {
      for (const auto& n : dependencies(d))
        if (names.count(n) && !done.count(n) && n != d.name) return false;
      return true;
    });
    if (it == ds.end()) it = ds.begin(); // cycle: let the checker report it
    done.insert(it->name);
    out.push_back(std::move(*it));
    ds.erase(it);
  }
  return out;
}

inline const char* corpus_source() {
  return R"json([
{"name": "nexttownext", "goal": "X phi -> N phi", "lines": [
  {"f": "G false | X phi -> N phi", "by": {"fol": [], "use": [{"axiom": "wnextdef"}]}},
  {"f": "X phi -> N phi", "by": {"fol": [1]}}]},
{"name": "lastequiv", "goal": "G false <-> ~X true", "lines": [
  {"f": "G false -> N false & N G false", "by": {"fol": [], "use": [{"axiom": "boxdef", "sub": {"phi": "false"}}]}},
  {"f": "N false -> ~X true", "by": {"def": []}},
  {"f": "G false -> ~X true", "by": {"fol": [1, 2]}},
  {"f": "false -> G false", "by": {"fol": []}},
  {"f": "G (false -> G false)", "by": {"nec": "box", "of": 4}},
  {"f": "G (false -> G false) -> N (false -> G false)", "by": {"fol": [], "use": [{"axiom": "boxdef", "sub": {"phi": "false -> G false"}}]}},
  {"f": "N (false -> G false) -> (N false -> N G false)", "by": {"fol": [], "use": [{"axiom": "wnextK", "sub": {"phi": "false", "psi": "G false"}}]}},
  {"f": "G (false -> G false) -> (N false -> N G false)", "by": {"fol": [6, 7]}},
  {"f": "N false -> N G false", "by": {"fol": [5, 8]}},
  {"f": "~X true -> N G false", "by": {"def": [9]}},
  {"f": "~X true -> N false", "by": {"def": []}},
  {"f": "~X true -> N false & N G false", "by": {"fol": [10, 11]}},
  {"f": "N false & N G false -> G false", "by": {"fol": [], "use": [{"axiom": "boxdef", "sub": {"phi": "false"}}]}},
  {"f": "~X true -> G false", "by": {"fol": [12, 13]}},
  {"f": "G false <-> ~X true", "by": {"fol": [3, 14]}}]},
{"name": "nexttoboxbot", "goal": "X phi -> ~G false", "lines": [
  {"f": "X phi -> false U phi", "by": {"def": []}},
  {"f": "false U phi -> F phi", "by": {"axiom": "untiltodiam"}},
  {"f": "F phi -> ~G ~phi", "by": {"def": []}},
  {"f": "false -> ~phi", "by": {"fol": []}},
  {"f": "G (false -> ~phi)", "by": {"nec": "box", "of": 4}},
  {"f": "G (false -> ~phi) -> (G false -> G ~phi)", "by": {"axiom": "boxK"}},
  {"f": "G false -> G ~phi", "by": {"fol": [5, 6]}},
  {"f": "~G ~phi -> ~G false", "by": {"fol": [7]}},
  {"f": "X phi -> ~G false", "by": {"fol": [1, 2, 3, 8]}}]},
{"name": "wnextNec", "goal": "N phi", "lines": [
  {"f": "phi", "by": {"assume": true}},
  {"f": "G phi", "by": {"nec": "box", "of": 1}},
  {"f": "G phi -> N phi", "by": {"fol": [], "use": [{"axiom": "boxdef"}]}},
  {"f": "N phi", "by": {"fol": [2, 3]}}]},
{"name": "wnextandleft", "goal": "N (phi & psi) -> N phi & N psi", "lines": [
  {"f": "phi & psi -> phi", "by": {"fol": []}},
  {"f": "N (phi & psi -> phi)", "by": {"nec": "wnext", "of": 1}},
  {"f": "N (phi & psi) -> N phi", "by": {"fol": [2], "use": [{"axiom": "wnextK", "sub": {"phi": "phi & psi", "psi": "phi"}}]}},
  {"f": "phi & psi -> psi", "by": {"fol": []}},
  {"f": "N (phi & psi -> psi)", "by": {"nec": "wnext", "of": 4}},
  {"f": "N (phi & psi) -> N psi", "by": {"fol": [5], "use": [{"axiom": "wnextK", "sub": {"phi": "phi & psi", "psi": "psi"}}]}},
  {"f": "N (phi & psi) -> N phi & N psi", "by": {"fol": [3, 6]}}]},
{"name": "wnextandright", "goal": "N phi & N psi -> N (phi & psi)", "lines": [
  {"f": "phi -> (psi -> phi & psi)", "by": {"fol": []}},
  {"f": "N (phi -> (psi -> phi & psi))", "by": {"nec": "wnext", "of": 1}},
  {"f": "N phi -> N (psi -> phi & psi)", "by": {"fol": [2], "use": [{"axiom": "wnextK", "sub": {"phi": "phi", "psi": "psi -> phi & psi"}}]}},
  {"f": "N (psi -> phi & psi) -> (N psi -> N (phi & psi))", "by": {"axiom": "wnextK"}},
  {"f": "N phi -> (N psi -> N (phi & psi))", "by": {"fol": [3, 4]}},
  {"f": "N phi & N psi -> N (phi & psi)", "by": {"fol": [5]}}]},
{"name": "wnextand", "goal": "N phi & N psi <-> N (phi & psi)", "lines": [
  {"f": "N (phi & psi) -> N phi & N psi", "by": {"cite": "wnextandleft"}},
  {"f": "N phi & N psi -> N (phi & psi)", "by": {"cite": "wnextandright"}},
  {"f": "N phi & N psi <-> N (phi & psi)", "by": {"fol": [1, 2]}}]},
{"name": "nextandright", "goal": "X (phi & psi) -> X phi & X psi", "lines": [
  {"f": "X (phi & psi) -> N (phi & psi)", "by": {"cite": "nexttownext"}},
  {"f": "N (phi & psi) -> N phi & N psi", "by": {"cite": "wnextandleft"}},
  {"f": "N phi & N psi -> (G false | X phi) & (G false | X psi)", "by": {"fol": [], "use": [{"axiom": "wnextdef", "sub": {"phi": "phi"}}, {"axiom": "wnextdef", "sub": {"phi": "psi"}}]}},
  {"f": "X (phi & psi) -> ~G false", "by": {"cite": "nexttoboxbot"}},
  {"f": "X (phi & psi) -> (G false | X phi) & (G false | X psi) & ~G false", "by": {"fol": [1, 2, 3, 4]}},
  {"f": "X (phi & psi) -> X phi & X psi", "by": {"fol": [5]}}]},
{"name": "nextandleft", "goal": "X phi & X psi -> X (phi & psi)", "lines": [
  {"f": "X phi & X psi -> N phi & N psi", "by": {"fol": [], "use": [{"cite": "nexttownext", "sub": {"phi": "phi"}}, {"cite": "nexttownext", "sub": {"phi": "psi"}}]}},
  {"f": "N phi & N psi -> N (phi & psi)", "by": {"cite": "wnextandright"}},
  {"f": "N (phi & psi) -> G false | X (phi & psi)", "by": {"fol": [], "use": [{"axiom": "wnextdef", "sub": {"phi": "phi & psi"}}]}},
  {"f": "X phi & X psi -> ~G false", "by": {"fol": [], "use": [{"cite": "nexttoboxbot", "sub": {"phi": "phi"}}]}},
  {"f": "X phi & X psi -> (G false | X (phi & psi)) & ~G false", "by": {"fol": [1, 2, 3, 4]}},
  {"f": "X phi & X psi -> X (phi & psi)", "by": {"fol": [5]}}]},
{"name": "nextand", "goal": "X phi & X psi <-> X (phi & psi)", "lines": [
  {"f": "X (phi & psi) -> X phi & X psi", "by": {"cite": "nextandright"}},
  {"f": "X phi & X psi -> X (phi & psi)", "by": {"cite": "nextandleft"}},
  {"f": "X phi & X psi <-> X (phi & psi)", "by": {"fol": [1, 2]}}]},
{"name": "nextorleftright", "goal": "X (phi | psi) <-> X phi | X psi", "lines": [
  {"f": "~(X phi | X psi) <-> ~X phi & ~X psi", "by": {"fol": []}},
  {"f": "~X phi & ~X psi <-> N ~phi & N ~psi", "by": {"def": []}},
  {"f": "N ~phi & N ~psi <-> N (~phi & ~psi)", "by": {"cite": "wnextand"}},
  {"f": "N (~phi & ~psi) <-> ~X (phi | psi)", "by": {"def": []}},
  {"f": "~(X phi | X psi) <-> ~X (phi | psi)", "by": {"fol": [1, 2, 3, 4]}},
  {"f": "X (phi | psi) <-> X phi | X psi", "by": {"fol": [5]}}]},
{"name": "wnextor", "goal": "N (phi | psi) <-> N phi | N psi", "lines": [
  {"f": "N (phi | psi) <-> G false | X (phi | psi)", "by": {"axiom": "wnextdef"}},
  {"f": "G false | X (phi | psi) <-> G false | (X phi | X psi)", "by": {"fol": [], "use": [{"cite": "nextorleftright"}]}},
  {"f": "G false | (X phi | X psi) <-> (G false | X phi) | (G false | X psi)", "by": {"fol": []}},
  {"f": "(G false | X phi) | (G false | X psi) <-> N phi | N psi", "by": {"fol": [], "use": [{"axiom": "wnextdef", "sub": {"phi": "phi"}}, {"axiom": "wnextdef", "sub": {"phi": "psi"}}]}},
  {"f": "N (phi | psi) <-> N phi | N psi", "by": {"fol": [1, 2, 3, 4]}}]},
{"name": "untiltotop", "goal": "phi U psi -> F true", "lines": [
  {"f": "false -> ~psi", "by": {"fol": []}},
  {"f": "G (false -> ~psi)", "by": {"nec": "box", "of": 1}},
  {"f": "G (false -> ~psi) -> (G false -> G ~psi)", "by": {"axiom": "boxK"}},
  {"f": "G false -> G ~psi", "by": {"fol": [2, 3]}},
  {"f": "F psi -> F true", "by": {"def": [4]}},
  {"f": "phi U psi -> F psi", "by": {"axiom": "untiltodiam"}},
  {"f": "phi U psi -> F true", "by": {"fol": [5, 6]}}]}
])json";
}

inline std::vector<Derivation> corpus() { return derivations_from_json(json::parse(corpus_source())); }

struct CorpusSummary {
  std::vector<Report> reports;
  std::size_t passed = 0;
  std::size_t total() const { return reports.size(); }
  bool ok() const { return passed == reports.size(); }
};

// Checks in dependency order; results accumulate in `lib`.
inline CorpusSummary run_corpus(const std::vector<Derivation>& ds, Library& lib) {
  CorpusSummary s;
  for (const auto& d : dependency_order(ds)) {
    s.reports.push_back(check_derivation(d, lib));
    if (s.reports.back().ok) ++s.passed;
  }
  return s;
}

inline CorpusSummary run_corpus() {
  Library lib;
  return run_corpus(corpus(), lib);
}

// One-line mutant: the last line with premises or uses loses one of them.
inline Derivation drop_premise(Derivation d) {
  for (std::size_t i = d.lines.size(); i-- > 0;) {
    auto& by = d.lines[i].by;
    if (!by.uses.empty()) { by.uses.pop_back(); return d; }
    if (!by.premises.empty()) { by.premises.pop_back(); return d; }
  }
  throw Error("derivation " + d.name + " has no premise to drop");
}

// Goal as a validity claim: derived rules become G+(assumptions) -> conclusion.
inline Formula soundness_claim(const Derivation& d) {
  std::vector<Formula> as;
  for (const auto& l : d.lines)
    if (l.by.rule == Rule::Assume) as.push_back(l.f);
  if (as.empty()) return d.goal;
  return implies(always_plus(conj_all(as)), d.goal);
}

} // namespace ftl::proof
