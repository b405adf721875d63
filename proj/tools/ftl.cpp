// ftl: command line front end. Exit codes: 0 success / SAT / holds at bound,
// 1 UNSAT / refuted / check failed, 2 usage error or budget exhausted.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "ftl/ftl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ftl;

namespace {

struct Usage : Error {
  using Error::Error;
};

struct Globals {
  bool json = false;
  bool unicode = false;
  std::string vars;
  std::uint64_t budget = 0;
  int jobs = 1;
};

Globals g;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Usage("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Usage(path + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

// Formula text from an argument or @file; '#' starts a comment line.
Formula read_formula(const std::string& arg) {
  std::string text = arg;
  if (!arg.empty() && arg[0] == '@') {
    text.clear();
    std::istringstream in(slurp(arg.substr(1)));
    for (std::string line; std::getline(in, line);)
      if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] != '#')
        text += line + "\n";
  }
  auto vs = split(g.vars);
  return parse_with_vars(text, std::set<std::string>(vs.begin(), vs.end()));
}

std::string show(const Formula& f) { return render(f, g.unicode ? Style::Unicode : Style::Ascii); }

Budget& budget() {
  static Budget b([] {
    if (g.budget) return g.budget;
    if (const char* e = std::getenv("FTL_BUDGET")) {
      try {
        return static_cast<std::uint64_t>(std::stoull(e));
      } catch (const std::exception&) {
        throw Usage("FTL_BUDGET must be a number");
      }
    }
    return Budget::kDefault;
  }());
  return b;
}

void emit(const json& j, const std::string& text) {
  if (g.json) std::cout << j.dump(2) << "\n";
  else if (!text.empty()) std::cout << text << (text.back() == '\n' ? "" : "\n");
}

json witness_json(const Witness& w) {
  json a = json::object();
  for (const auto& [v, e] : assignment_names(w.trace, w.assignment)) a[v] = e;
  return {{"trace", to_json(w.trace)}, {"assignment", a}, {"instant", w.instant}};
}

Bounds bounds_of(std::size_t dom, std::size_t len) {
  if (dom == 0 || len == 0) throw Usage("bounds must be positive");
  return {dom, len, 1};
}

// Brute force sharded by domain size; the smallest domain with a witness wins.
Verdict sharded_sat(const Formula& f, const Bounds& b, TraceKind kind) {
  if (g.jobs <= 1 || b.max_domain <= b.min_domain) return sat_bruteforce(f, b, kind, budget());
  std::vector<Verdict> out(b.max_domain + 1);
  std::vector<std::exception_ptr> errs(b.max_domain + 1);
  std::size_t next = b.min_domain;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t d;
      {
        std::lock_guard<std::mutex> lk(mu);
        if (next > b.max_domain) return;
        d = next++;
      }
      try {
        out[d] = sat_bruteforce(f, {d, b.max_len, d}, kind, budget());
      } catch (...) {
        errs[d] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> ts;
  for (int i = 0; i < g.jobs; ++i) ts.emplace_back(worker);
  for (auto& t : ts) t.join();
  for (std::size_t d = b.min_domain; d <= b.max_domain; ++d) {
    if (errs[d]) std::rethrow_exception(errs[d]);
    if (out[d].found()) return out[d];
  }
  return {};
}

// ---------------------------------------------------------------------------

int cmd_parse(const std::string& arg, bool expanded, bool to_nnf) {
  Formula f = read_formula(arg);
  if (expanded) f = expand(f);
  if (to_nnf) f = nnf(f);
  Signature s = signature_of(f);
  json preds = json::object();
  for (const auto& [p, a] : s.predicates) preds[p] = a;
  emit({{"formula", render(f)},
        {"unicode", render(f, Style::Unicode)},
        {"size", f->size},
        {"predicates", preds},
        {"constants", s.constants},
        {"free", free_vars(f)}},
       show(f));
  return 0;
}

int cmd_eval(const std::string& trace_path, const std::string& arg, std::size_t at,
             const std::vector<std::string>& assign) {
  Trace t = trace_from_json(load_json(trace_path));
  Formula f = read_formula(arg);
  std::map<std::string, std::string> named;
  for (const auto& a : assign) {
    auto eq = a.find('=');
    if (eq == std::string::npos) throw Usage("assignment must look like x=d0");
    named[a.substr(0, eq)] = a.substr(eq + 1);
  }
  Assignment asg = assignment_by_name(t, named);
  for (const auto& v : free_vars(f))
    if (!asg.count(v)) throw Usage("free variable " + v + " needs --assign");
  bool r = eval(t, f, at, asg);
  emit({{"value", r}, {"instant", at}}, r ? "true" : "false");
  return r ? 0 : 1;
}

int cmd_classify(const std::string& arg, bool props, std::size_t dom, std::size_t len, std::size_t ext) {
  Formula f = read_formula(arg);
  json j;
  j["fragments"] = json::array();
  std::string text;
  for (Fragment k : classify(f)) {
    j["fragments"].push_back(fragment_name(k));
    text += fragment_name(k) + " ";
  }
  if (text.empty()) text = "(none)";
  else text.pop_back();
  text = "fragments: " + text + "\n";
  if (props) {
    PropertyOptions o{bounds_of(dom, len), ext};
    j["properties"] = json::object();
    auto row = [&](const std::string& name, const PropertyVerdict& v) {
      std::string s = !v.refuted ? "holds-at-bound" : v.conclusive ? "refuted" : "refuted-at-bound";
      json e{{"verdict", s}};
      if (v.refuted) {
        e["direction"] = property_name(Property::FExists, v.direction).substr(1, 2);
        if (v.trace) e["trace"] = to_json(*v.trace);
        if (v.related) e["related"] = to_json(*v.related);
      }
      j["properties"][name] = e;
      text += fmt::format("{:<6} {}\n", name, s);
    };
    for (Property p : {Property::FExists, Property::FForall, Property::IExists, Property::IForall, Property::FOmega})
      row(property_name(p), property_falsify(f, p, Direction::Both, o, budget()));
    if (is_sentence(f)) row("ins", insensitivity_property(f, o, budget()));
  }
  emit(j, text);
  return 0;
}

Signature parse_sigma(const std::string& s, const Formula& f) {
  Signature fs = signature_of(f), out;
  for (const auto& item : split(s)) {
    auto slash = item.find('/');
    std::string name = item.substr(0, slash);
    int ar = slash != std::string::npos ? std::stoi(item.substr(slash + 1))
             : fs.predicates.count(name)  ? fs.predicates.at(name)
                                          : 1;
    out.add_predicate(name, ar);
  }
  for (const auto& c : fs.constants) out.add_constant(c);
  return out;
}

int cmd_translate(const std::string& arg, const std::string& mode, const std::string& sigma, std::string end) {
  Formula f = read_formula(arg);
  json j;
  std::string text;
  if (mode == "thetaf") {
    if (sigma.empty()) throw Usage("--thetaf needs --sigma");
    Signature s = parse_sigma(sigma, f);
    if (end.empty()) end = split(sigma).back().substr(0, split(sigma).back().find('/'));
    auto b = theta_f(s, end);
    j = {{"chi", render(b.chi)}, {"theta", render(b.theta)}, {"end", end}};
    text = show(b.theta);
  } else {
    Signature s = signature_of(f);
    if (!sigma.empty()) s = parse_sigma(sigma, f);
    auto b = end.empty() ? end_of_time_formula(s) : end_of_time_bundle(end);
    if (mode == "dagger") {
      Formula d = dagger(f, b);
      j = {{"dagger", render(d)}, {"translated", render(conj(d, b.psi))}, {"end", b.e}};
      text = show(d);
    } else {
      j = {{"psi", render(b.psi)}, {"psi1", render(b.psi1)}, {"psi2", render(b.psi2)}, {"psi3", render(b.psi3)},
           {"end", b.e}};
      text = show(b.psi);
    }
  }
  emit(j, text);
  return 0;
}

int cmd_equiv(const std::string& a, const std::string& b, bool lasso, std::size_t dom, std::size_t len) {
  Formula f = read_formula(a), h = read_formula(b);
  Verdict v = equiv_bruteforce(f, h, bounds_of(dom, len), lasso ? TraceKind::Lasso : TraceKind::Finite, budget());
  json j{{"equivalent_at_bound", !v.found()}};
  if (v.found()) j["witness"] = witness_json(*v.witness);
  emit(j, v.found() ? "differ:\n" + to_json(v.witness->trace).dump(2) : "equivalent up to bound");
  return v.found() ? 1 : 0;
}

int cmd_sat(const std::string& arg, std::uint64_t bound, bool finite) {
  Formula f = read_formula(arg);
  if (!finite && bound == 0) throw Usage("give --bound k or --finite");
  auto q = finite ? sat_finite(f, budget()) : sat_bounded(f, bound, budget());
  json j{{"sat", q.has_value()}};
  std::string text = q ? "sat" : "unsat";
  if (q) {
    Trace t = extract_trace(*q);
    j["length"] = q->length();
    j["domain_size"] = t.domain.size();
    j["trace"] = to_json(t);
    text += "\n" + to_json(t).dump(2);
  }
  emit(j, text);
  return q ? 0 : 1;
}

int cmd_talc(const std::string& path, std::size_t bound, bool brute, std::size_t dom) {
  talc::Problem p = talc::parse_problem(slurp(path));
  if (bound == 0) throw Usage("give --bound k");
  json j;
  bool sat;
  std::optional<Trace> model;
  if (brute) {
    Verdict v = talc::talc_bruteforce(p, bound, dom, budget());
    sat = v.found();
    if (sat) model = v.witness->trace;
  } else {
    auto q = talc::type_elimination(p, bound, budget());
    sat = q.has_value();
    if (sat) {
      model = talc::extract_talc_model(*q);
      j["length"] = q->length();
    }
  }
  j["sat"] = sat;
  if (model) j["trace"] = to_json(*model);
  emit(j, sat ? "sat\n" + to_json(*model).dump(2) : "unsat");
  return sat ? 0 : 1;
}

int cmd_gen_tiling(const std::string& kind, int n, const std::string& tiles, bool solve, std::size_t max_m) {
  TilingInstance inst{kind == "grid" ? TilingKind::Grid : TilingKind::Corridor, n, tiles_from_json(load_json(tiles))};
  if (n < 1) throw Usage("-n must be at least 1");
  Formula f = exists("x", tiling_formula(inst));
  json j{{"formula", render(f)}, {"size", f->size}};
  std::string text = show(f);
  int rc = 0;
  if (solve) {
    auto tau = solve_tiling_bruteforce(inst, max_m);
    j["solvable"] = tau.has_value();
    if (tau) j["tiling"] = *tau;
    rc = tau ? 0 : 1;
    if (!g.json) {
      std::cerr << (tau ? "solvable" : "no tiling") << "\n";
    }
  }
  emit(j, text);
  return rc;
}

int cmd_check_proof(const std::vector<std::string>& paths, bool bundled, const std::string& export_dir) {
  using namespace ftl::proof;
  if (!export_dir.empty()) {
    fs::create_directories(export_dir);
    std::size_t i = 0;
    for (const auto& d : corpus()) {
      std::ofstream out(fs::path(export_dir) / fmt::format("{:02}_{}.json", ++i, d.name));
      out << derivation_to_json(d).dump(2) << "\n";
    }
  }
  std::vector<Derivation> ds;
  if (bundled) ds = corpus();
  for (const auto& p : paths) {
    auto more = load_proofs(p);
    ds.insert(ds.end(), more.begin(), more.end());
  }
  if (ds.empty() && !export_dir.empty()) return 0;
  if (ds.empty()) throw Usage("no derivations given");
  Library lib;
  auto s = run_corpus(ds, lib);
  json j{{"passed", s.passed}, {"total", s.total()}, {"reports", json::array()}};
  std::string text;
  for (const auto& r : s.reports) {
    json e{{"name", r.name}, {"ok", r.ok}};
    text += fmt::format("{:<18} {}", r.name, r.ok ? "ok" : "FAILED");
    if (r.error) {
      e["line"] = r.error->line;
      e["message"] = r.error->message;
      text += fmt::format(" (line {}: {})", r.error->line, r.error->message);
    }
    text += "\n";
    j["reports"].push_back(e);
  }
  text += fmt::format("{}/{} verified", s.passed, s.total());
  emit(j, text);
  return s.ok() ? 0 : 1;
}

int cmd_oracle(const std::string& what, const std::string& arg, bool lasso, std::size_t dom, std::size_t len) {
  Formula f = read_formula(arg);
  TraceKind kind = lasso ? TraceKind::Lasso : TraceKind::Finite;
  bool valid = what == "valid";
  Verdict v = sharded_sat(valid ? neg(f) : f, bounds_of(dom, len), kind);
  json j{{"query", what}, {"found", v.found()}};
  if (v.found()) j["witness"] = witness_json(*v.witness);
  std::string text = valid ? (v.found() ? "counterexample" : "valid up to bound") : (v.found() ? "sat" : "none up to bound");
  if (v.found()) text += "\n" + to_json(v.witness->trace).dump(2);
  emit(j, text);
  return v.found() == valid ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-order temporal logic on finite traces"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", g.json, "Machine-readable output");
  app.add_flag("--unicode", g.unicode, "Render formulas with logic symbols");
  app.add_option("--vars", g.vars, "Comma separated names read as free variables");
  app.add_option("--budget", g.budget, "Search budget (overrides FTL_BUDGET)");
  app.add_option("--jobs", g.jobs, "Worker threads for the oracle")->check(CLI::PositiveNumber);

  std::string formula, formula2, trace, sigma, end, tiles, path, kind = "finite", mode;
  std::vector<std::string> assign, paths;
  std::size_t at = 0, dom = 2, len = 4, ext = 2, max_m = 4;
  std::uint64_t bound = 0;
  int n = 1;
  bool flag_a = false, flag_b = false;
  std::function<int()> run;

  auto* parse = app.add_subcommand("parse", "Parse and pretty-print a formula");
  parse->add_option("formula", formula, "Formula or @file")->required();
  parse->add_flag("--expand", flag_a, "Show the core expansion");
  parse->add_flag("--nnf", flag_b, "Show the negation normal form");
  parse->callback([&] { run = [&] { return cmd_parse(formula, flag_a, flag_b); }; });

  auto* ev = app.add_subcommand("eval", "Evaluate a formula on a trace");
  ev->add_option("--trace", trace, "Trace JSON")->required();
  ev->add_option("--formula,formula", formula, "Formula or @file")->required();
  ev->add_option("--at", at, "Instant");
  ev->add_option("--assign", assign, "Free variable values, x=d0");
  ev->callback([&] { run = [&] { return cmd_eval(trace, formula, at, assign); }; });

  auto* cl = app.add_subcommand("classify", "Fragment membership and property verdicts");
  cl->add_option("formula", formula, "Formula or @file")->required();
  cl->add_flag("--props", flag_a, "Bounded property matrix");
  cl->add_option("--max-dom", dom);
  cl->add_option("--max-len", len);
  cl->add_option("--ext-len", ext, "Stem+loop bound of lasso extensions");
  cl->callback([&] { run = [&] { return cmd_classify(formula, flag_a, dom, len, ext); }; });

  auto* tr = app.add_subcommand("translate", "Finite-to-infinite translations");
  tr->add_option("formula", formula, "Formula or @file")->required();
  auto* grp = tr->add_option_group("mode");
  grp->add_flag_callback("--dagger", [&] { mode = "dagger"; });
  grp->add_flag_callback("--psif", [&] { mode = "psif"; });
  grp->add_flag_callback("--thetaf", [&] { mode = "thetaf"; });
  grp->require_option(1);
  tr->add_option("--sigma", sigma, "Signature, e.g. P,Q/2,E");
  tr->add_option("--end", end, "End-of-time predicate (fresh by default; last of --sigma for --thetaf)");
  tr->callback([&] { run = [&] { return cmd_translate(formula, mode, sigma, end); }; });

  auto* eq = app.add_subcommand("equiv", "Bounded equivalence check");
  eq->add_option("formula1", formula, "Formula or @file")->required();
  eq->add_option("formula2", formula2, "Formula or @file")->required();
  eq->add_flag("--lasso", flag_a, "Compare on lasso traces");
  eq->add_option("--max-dom", dom);
  eq->add_option("--max-len", len);
  eq->callback([&] { run = [&] { return cmd_equiv(formula, formula2, flag_a, dom, len); }; });

  auto* sat = app.add_subcommand("sat", "Quasimodel satisfiability (monodic one-variable fragment)");
  sat->add_option("formula", formula, "Formula or @file")->required();
  auto* sg = sat->add_option_group("length");
  sg->add_option("--bound", bound, "At most k quasistates")->check(CLI::PositiveNumber);
  sg->add_flag("--finite", flag_a, "Any finite length");
  sg->require_option(1);
  sat->callback([&] { run = [&] { return cmd_sat(formula, bound, flag_a); }; });

  auto* ta = app.add_subcommand("talc", "Temporal ALC with global CIs");
  auto* tsat = ta->add_subcommand("sat", "Satisfiability of a problem file");
  ta->require_subcommand(1);
  tsat->add_option("file", path, "Problem file")->required()->check(CLI::ExistingFile);
  tsat->add_option("--bound", bound, "Trace length")->required()->check(CLI::PositiveNumber);
  tsat->add_flag("--bruteforce", flag_a, "Use the brute-force oracle");
  tsat->add_option("--max-dom", dom, "Domain bound for --bruteforce");
  tsat->callback([&] { run = [&] { return cmd_talc(path, bound, flag_a, dom); }; });

  auto* gt = app.add_subcommand("gen-tiling", "Tiling reduction formula");
  gt->add_option("kind", kind, "corridor or grid")->required()->check(CLI::IsMember({"corridor", "grid"}));
  gt->add_option("-n", n, "Counter width")->check(CLI::Range(1, 8));
  gt->add_option("--tiles", tiles, "Tiles JSON")->required()->check(CLI::ExistingFile);
  gt->add_flag("--solve", flag_a, "Also run the brute-force tiling solver");
  gt->add_option("--max-m", max_m, "Corridor width bound for --solve");
  gt->callback([&] { run = [&] { return cmd_gen_tiling(kind, n, tiles, flag_a, max_m); }; });

  auto* cp = app.add_subcommand("check-proof", "Check derivations (file or directory)");
  cp->add_option("paths", paths, "Derivation JSON files or directories");
  cp->add_flag("--corpus", flag_a, "Include the bundled corpus");
  cp->add_option("--export", path, "Write the bundled corpus to a directory");
  cp->callback([&] { run = [&] { return cmd_check_proof(paths, flag_a, path); }; });

  auto* orc = app.add_subcommand("oracle", "Brute-force satisfiability or validity");
  orc->add_option("query", mode, "sat or valid")->required()->check(CLI::IsMember({"sat", "valid"}));
  orc->add_option("formula", formula, "Formula or @file")->required();
  orc->add_flag("--lasso", flag_a, "Search lasso traces");
  orc->add_option("--max-dom", dom);
  orc->add_option("--max-len", len);
  orc->callback([&] { run = [&] { return cmd_oracle(mode, formula, flag_a, dom, len); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return run();
  } catch (const BudgetExceeded& e) {
    if (g.json) std::cout << json{{"error", "budget"}, {"message", e.what()}}.dump(2) << "\n";
    std::cerr << "ftl: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    if (g.json) std::cout << json{{"error", "usage"}, {"message", e.what()}}.dump(2) << "\n";
    std::cerr << "ftl: " << e.what() << "\n";
    return 2;
  }
}
