// condsym command-line front end.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "condsym/catalog.hpp"
#include "condsym/condsym.hpp"
#include "condsym/error.hpp"
#include "condsym/kirchhoff.hpp"
#include "condsym/report.hpp"

using namespace condsym;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitVerify = 4;

struct Common {
  bool json = false;
  std::string output;
};

void emit(const Common& c, const std::string& text) {
  if (c.output.empty() || c.output == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(c.output);
  if (!out) throw PreconditionError("cannot write " + c.output);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> parse_indices(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    long v = 0;
    try {
      v = std::stol(item);
    } catch (const std::exception&) {
      throw ParseError("bad index '" + item + "'");
    }
    if (v < 1) throw ParseError("indices are 1-based");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("CONDSYM_SEED"); env && *env) return std::stoull(env);
  return CheckOptions{}.seed;
}

std::map<std::string, Rational> collect_params(const std::vector<std::string>& items) {
  std::map<std::string, Rational> out;
  for (const auto& it : items)
    for (const auto& [k, v] : parse_assignments(it)) out[k] = v;
  return out;
}

// ---------------------------------------------------------------------------

struct DetsysArgs {
  Common common;
  std::string file;
  std::string type = "first";
  std::string indices;
  bool diff = false;
  bool normalize = false;
  bool reduced = false;
  std::string compare;
};

int cmd_detsys(const DetsysArgs& a) {
  SourceFile src = load_source(a.file);
  GenerateRequest req;
  req.diff_consequences = a.diff;
  std::size_t m = parse_system(src).pde.deps.size();
  if (!a.indices.empty()) {
    req.indices = parse_indices(a.indices);
  } else if (a.type == "first") {
    req.indices = {1};
  } else if (a.type == "nonclassical") {
    for (std::size_t i = 1; i <= m; ++i) req.indices.push_back(i);
  }
  if (a.type == "lie") req.indices.clear();
  if (a.diff && req.indices.size() != 1) throw PreconditionError("--diff-consequences needs a single index");
  DeterminingSystem ds = generate(src, req);
  bool exact = true;
  if (a.normalize) {
    Xi0Normalization n = normalize_xi0(ds);
    ds = n.system;
    exact = n.xi0_eliminated_exactly;
    if (!exact) std::cerr << "warning: xi0 is not eliminated exactly\n";
  }
  if (a.reduced) {
    ds = reduced_system(ds);
    ds.description += ", reduced";
  }
  bool ok = true;
  Json payload;
  payload["type"] = a.type;
  payload["indices"] = req.indices;
  payload["diff_consequences"] = a.diff;
  payload["xi0_normalized"] = a.normalize;
  payload["reduced"] = a.reduced;
  if (a.normalize) payload["xi0_eliminated_exactly"] = exact;
  payload["system"] = to_json(ds);
  std::string cmp_text;
  if (!a.compare.empty()) {
    CompareReport cr = compare_systems(ds, determining_from_source(load_source(a.compare)));
    ok = cr.status != "mismatch";
    payload["compare"] = to_json(cr);
    cmp_text = "compare: " + cr.status + (cr.reduced_identical ? " (reduced forms identical)" : "") + "\n";
  }
  if (a.common.json) {
    emit(a.common, dump(report("detsys", ok, payload)));
  } else {
    emit(a.common, render(ds));
    std::cerr << "assumptions:";
    for (const auto& r : ds.assumptions) std::cerr << " " << r.text << ";";
    std::cerr << "\n" << cmp_text;
  }
  return ok ? 0 : kExitVerify;
}

struct CompareArgs {
  Common common;
  std::string a;
  std::string b;
};

int cmd_compare(const CompareArgs& c) {
  CompareReport cr =
      compare_systems(determining_from_source(load_source(c.a)), determining_from_source(load_source(c.b)));
  bool ok = cr.status != "mismatch";
  if (c.common.json) {
    emit(c.common, dump(report("compare", ok, to_json(cr))));
  } else {
    std::ostringstream os;
    os << "status: " << cr.status << "\n";
    os << "reduced forms identical: " << (cr.reduced_identical ? "yes" : "no") << "\n";
    for (const auto& p : cr.matched_pairs) os << "  " << p.label_a << " <-> " << p.label_b << " (" << p.level << ")\n";
    for (const auto& t : cr.unmatched_a_text) os << "  only in A: " << t << "\n";
    for (const auto& t : cr.unmatched_b_text) os << "  only in B: " << t << "\n";
    emit(c.common, os.str());
  }
  return ok ? 0 : kExitVerify;
}

struct ExampleArgs {
  Common common;
  std::string file;
  std::string kind = "nonclassical";
  std::vector<std::string> vanish;
  std::string compare;
};

int cmd_example(const ExampleArgs& e) {
  SourceFile src = load_source(e.file);
  std::vector<Atom> extra;
  for (const auto& v : e.vanish) {
    auto a = parse_expr(v, src.decls).as_atom();
    if (!a) throw ParseError("--vanish expects a single derivative, got '" + v + "'");
    extra.push_back(*a);
  }
  ExampleResult r = restrict_example(src, e.kind == "first" ? ExampleKind::FirstType : ExampleKind::NonClassical, extra);
  bool ok = true;
  Json payload;
  payload["kind"] = e.kind;
  payload["system"] = to_json(r.system);
  Json gens = Json::array();
  for (const auto& g : r.generators) gens.push_back(to_string(g));
  payload["generators"] = gens;
  payload["ansatz_solves_generators"] = r.ansatz_solves_generators;
  std::string cmp_text;
  if (!e.compare.empty()) {
    CompareReport cr = compare_systems(r.system, determining_from_source(load_source(e.compare)));
    ok = cr.status != "mismatch";
    payload["compare"] = to_json(cr);
    cmp_text = "compare: " + cr.status + "\n";
  }
  if (e.common.json) {
    emit(e.common, dump(report("example", ok, payload)));
  } else {
    emit(e.common, render(r.system));
    std::cerr << "vanishing:";
    for (const auto& g : r.generators) std::cerr << " " << to_string(g);
    std::cerr << "\nansatz solves generators: " << (r.ansatz_solves_generators ? "yes" : "no") << "\n" << cmp_text;
  }
  return ok ? 0 : kExitVerify;
}

struct KirchhoffArgs {
  Common common;
  std::vector<std::string> files;
  int catalog = 0;
  std::vector<std::string> params;
  bool numeric_inverse = false;
};

int cmd_kirchhoff(const KirchhoffArgs& k) {
  RDOriginal orig;
  Declarations decls;
  std::optional<VectorField> op;
  if (k.catalog) {
    InstantiateOptions io;
    io.params = collect_params(k.params);
    Instance inst = instantiate(load_entry(k.catalog), io);
    orig = inst.original;
    decls = inst.decls;
    op = inst.op;
  } else {
    if (k.files.empty()) throw PreconditionError("kirchhoff needs a system file or --catalog");
    std::string text;
    for (const auto& f : k.files) text += read_file(f) + "\n";
    SourceFile src = parse_source(text, k.files.front());
    ParsedSystem ps = parse_system(src);
    if (!ps.original) throw PreconditionError("system is not of the form U_t = (D(U) U_x)_x + F");
    orig = *ps.original;
    decls = src.decls;
    if (src.has_operator()) op = operator_of(src);
    if (!k.params.empty()) {
      AtomMap m;
      for (const auto& [n, v] : collect_params(k.params)) m.params.emplace(n, ParamFrac(v));
      for (auto& d : orig.diffusivity) d = substitute(d, m);
      for (auto& f : orig.reaction) f = substitute(f, m);
      if (op) {
        op->xi0 = substitute(op->xi0, m);
        op->xi1 = substitute(op->xi1, m);
        for (auto& e : op->eta) e = substitute(e, m);
      }
    }
  }
  KirchhoffResult res = to_canonical(orig, decls, k.numeric_inverse);
  std::optional<VectorField> q;
  if (op) q = transform_operator(*op, res.record);
  if (k.common.json) {
    Json payload;
    Json sys = Json::array();
    for (std::size_t a = 0; a < res.canonical.deps.size(); ++a) {
      const std::string& u = res.canonical.deps[a];
      sys.push_back({{"variable", u},
                     {"d", to_string(res.canonical.d[a])},
                     {"C", to_string(res.canonical.c[a])},
                     {"forward", to_string(res.record.forward[a])},
                     {"inverse", res.record.inverse[a] ? to_string(*res.record.inverse[a]) : "numeric"}});
    }
    payload["system"] = sys;
    if (q) {
      Json o;
      o["xi0"] = to_string(q->xi0);
      o["xi1"] = to_string(q->xi1);
      Json eta = Json::array();
      for (const auto& e : q->eta) eta.push_back(to_string(e));
      o["eta"] = eta;
      payload["operator"] = o;
    }
    emit(k.common, dump(report("kirchhoff", true, payload)));
  } else {
    emit(k.common, render(res, q ? &*q : nullptr));
  }
  return 0;
}

struct CatalogArgs {
  Common common;
  int row = 0;
  std::vector<std::string> params;
};

int cmd_catalog_list(const CatalogArgs& c) {
  auto entries = list_entries();
  if (c.common.json) {
    Json rows = Json::array();
    for (const auto& e : entries) {
      Json d = Json::object();
      for (const auto& [k, v] : e.defaults) d[k] = rational_to_string(v);
      rows.push_back({{"row", e.row}, {"title", e.title}, {"path", e.path}, {"defaults", d}});
    }
    emit(c.common, dump(report("catalog list", true, Json{{"rows", rows}})));
  } else {
    std::ostringstream os;
    for (const auto& e : entries) os << e.row << "  " << e.title << "\n";
    emit(c.common, os.str());
  }
  return 0;
}

int cmd_catalog_show(const CatalogArgs& c) {
  CatalogEntry e = load_entry(c.row);
  auto params = e.defaults;
  for (const auto& [k, v] : collect_params(c.params)) params[k] = v;
  Classification cl = expected_classification(e, params);
  if (c.common.json) {
    Json payload;
    payload["row"] = e.row;
    payload["title"] = e.title;
    payload["source"] = read_file(e.path);
    payload["expected"] = to_json(cl);
    emit(c.common, dump(report("catalog show", true, payload)));
  } else {
    std::ostringstream os;
    os << read_file(e.path) << "\n# expected classification\n";
    for (const auto& t : cl.trace) os << "#   " << t << "\n";
    os << "# nonclassical: yes, first type: " << (cl.first_type ? "yes" : "no")
       << ", Lie: " << (cl.lie_degenerate ? "yes" : "no") << "\n";
    emit(c.common, os.str());
  }
  return 0;
}

struct VerifyArgs {
  Common common;
  int catalog = 0;
  std::string file;
  bool first = false;
  bool nonclassical = false;
  bool lie = false;
  std::string indices;
  std::vector<std::string> params;
  std::string p_sample;
  bool no_restrictions = false;
  bool expect_classification = false;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int points = 100;
  int samples = 3;
};

int cmd_verify(const VerifyArgs& v) {
  if (v.tol <= 0) throw PreconditionError("tolerance must be positive");
  if (v.points < 1) throw PreconditionError("need at least one point");
  Instance inst;
  std::optional<CatalogEntry> entry;
  auto params = collect_params(v.params);
  if (v.catalog) {
    entry = load_entry(v.catalog);
  } else {
    if (v.file.empty()) throw PreconditionError("verify needs --catalog or a system file");
    entry = read_entry(v.file);
  }
  {
    InstantiateOptions io;
    io.params = params;
    io.enforce_restrictions = !v.no_restrictions;
    if (!v.p_sample.empty()) {
      AtomMap toSlot;
      toSlot.atoms.emplace(space_atom(), Expr(Atom::slot(0)));
      io.p_sample = substitute(parse_expr(v.p_sample), toSlot);
    }
    inst = instantiate(*entry, io);
  }
  VerifyOptions vo;
  vo.check.seed = v.seed;
  vo.check.tol = v.tol;
  vo.check.n_points = v.points;
  vo.n_samples = v.samples;
  bool any = v.first || v.nonclassical || v.lie;
  std::optional<Classification> expected;
  if (v.expect_classification) {
    if (entry->row == 0) throw PreconditionError("--expect-classification needs a catalog row");
    expected = expected_classification(*entry, inst.params);
  }

  Json claims = Json::array();
  std::ostringstream text;
  bool ok = true;
  auto record = [&](const std::string& name, const std::string& status, std::optional<bool> want,
                    const std::vector<const VerifyResult*>& parts) {
    bool pass = status == "pass";
    bool good = want ? (pass == *want && (pass || status == "confirmed-fail")) : pass;
    ok = ok && good;
    Json j;
    j["claim"] = name;
    j["status"] = status;
    if (want) j["expected"] = *want ? "pass" : "confirmed-fail";
    j["verdict"] = good ? "ok" : "failed";
    Json ps = Json::array();
    for (const auto* p : parts) ps.push_back(to_json(*p));
    j["checks"] = ps;
    claims.push_back(j);
    text << name << ": " << status;
    if (want) text << " (expected " << (*want ? "pass" : "confirmed-fail") << ")";
    text << "\n";
    for (const auto* p : parts)
      text << "  " << p->claim << ": " << p->report.status << ", max violation " << p->report.max_violation
           << ", " << p->report.n_points << " points" << (p->symbolic_zero ? ", symbolic zero" : "") << "\n";
  };
  std::string row = "row " + std::to_string(inst.row);
  if (v.lie) {
    VerifyResult r = verify_instance(inst, CheckKind::Lie, {}, vo);
    std::optional<bool> want;
    if (expected) want = expected->lie_degenerate;
    record(row + " lie", r.report.status, want, {&r});
  }
  if (v.first) {
    if (!v.indices.empty()) {
      VerifyResult r = verify_instance(inst, CheckKind::FirstType, parse_indices(v.indices), vo);
      record(row + " first-type", r.report.status, std::nullopt, {&r});
    } else {
      FirstTypeResult r = verify_first_type(inst, vo);
      std::optional<bool> want;
      if (expected) want = expected->first_type;
      record(row + " first-type", r.status(), want, {&r.with_u, &r.with_v});
    }
  }
  if (v.nonclassical || !any) {
    VerifyResult r = verify_instance(inst, CheckKind::NonClassical, {}, vo);
    std::optional<bool> want;
    if (expected) want = expected->nonclassical;
    record(row + " nonclassical", r.report.status, want, {&r});
  }
  if (v.common.json) {
    Json payload;
    payload["row"] = inst.row;
    Json ps = Json::object();
    for (const auto& [k, val] : inst.params) ps[k] = rational_to_string(val);
    payload["params"] = ps;
    payload["seed"] = v.seed;
    payload["tol"] = v.tol;
    payload["n_points"] = v.points;
    payload["n_samples"] = v.samples;
    if (expected) payload["expected"] = to_json(*expected);
    payload["claims"] = claims;
    emit(v.common, dump(report("verify", ok, payload)));
  } else {
    emit(v.common, text.str());
  }
  return ok ? 0 : kExitVerify;
}

void add_common(CLI::App* app, Common& c) {
  app->add_flag("--json", c.json, "Emit a JSON report");
  app->add_option("-o,--output", c.output, "Write output to a file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Determining equations and verification of Q-conditional symmetries"};
  app.require_subcommand(1);

  DetsysArgs detsys;
  auto* d = app.add_subcommand("detsys", "Generate a determining system");
  d->add_option("file", detsys.file, "System with an operator template")->required();
  d->add_option("--type", detsys.type, "lie, first or nonclassical")
      ->check(CLI::IsMember({"lie", "first", "nonclassical"}));
  d->add_option("--indices", detsys.indices, "Adjoined surface conditions, e.g. 1 or 1,2");
  d->add_flag("--diff-consequences", detsys.diff, "Adjoin the t and x derivatives of Q(u)");
  d->add_flag("--xi0-normalize", detsys.normalize, "Rewrite in xi1/xi0, eta/xi0 and set xi0 = 1");
  d->add_flag("--reduced", detsys.reduced, "Print vanishing derivatives and the remaining equations");
  d->add_option("--compare", detsys.compare, "Reference determining system");
  add_common(d, detsys.common);

  CompareArgs compare;
  auto* c = app.add_subcommand("compare", "Compare two determining systems");
  c->add_option("a", compare.a)->required();
  c->add_option("b", compare.b)->required();
  add_common(c, compare.common);

  ExampleArgs example;
  auto* e = app.add_subcommand("example", "Restrict the generic system by xi1 = eta1_v = eta2_u = 0");
  e->add_option("file", example.file)->required();
  e->add_option("--kind", example.kind)->check(CLI::IsMember({"first", "nonclassical"}));
  e->add_option("--vanish", example.vanish, "Additional vanishing derivative, e.g. d2_v");
  e->add_option("--compare", example.compare, "Reference system");
  add_common(e, example.common);

  KirchhoffArgs kirch;
  auto* k = app.add_subcommand("kirchhoff", "Transform U_t = (D U_x)_x + F to u_xx = d u_t + C");
  k->add_option("files", kirch.files, "System file and optional operator file");
  k->add_option("--catalog", kirch.catalog, "Catalog row");
  k->add_option("--param", kirch.params, "Parameter assignment name=value");
  k->add_flag("--numeric-inverse", kirch.numeric_inverse, "Allow forward maps without a closed inverse");
  add_common(k, kirch.common);

  CatalogArgs cat;
  auto* ca = app.add_subcommand("catalog", "Table of known operators");
  ca->require_subcommand(1);
  auto* cl = ca->add_subcommand("list", "List rows");
  add_common(cl, cat.common);
  auto* cs = ca->add_subcommand("show", "Show one row and its expected classification");
  cs->add_option("row", cat.row)->required();
  cs->add_option("--param", cat.params, "Parameter assignment name=value");
  add_common(cs, cat.common);

  VerifyArgs verify;
  verify.seed = default_seed();
  auto* v = app.add_subcommand("verify", "Random-point check of symmetry claims");
  v->add_option("file", verify.file, "System with an operator (instead of --catalog)");
  v->add_option("--catalog", verify.catalog, "Catalog row");
  v->add_flag("--first-type", verify.first, "Check the first type (either component)");
  v->add_flag("--nonclassical", verify.nonclassical, "Check the non-classical type (default)");
  v->add_flag("--lie", verify.lie, "Check the Lie type");
  v->add_option("--indices", verify.indices, "Component for --first-type");
  v->add_option("--param", verify.params, "Parameter assignment name=value");
  v->add_option("--p-sample", verify.p_sample, "Concrete p(x), e.g. 6/x^2");
  v->add_flag("--no-restrictions", verify.no_restrictions, "Skip the row's parameter restrictions");
  v->add_flag("--expect-classification", verify.expect_classification,
              "Succeed when the verdicts agree with the expected classification");
  v->add_option("--seed", verify.seed, "Random seed (default from CONDSYM_SEED)");
  v->add_option("--tol", verify.tol, "Relative tolerance");
  v->add_option("--points", verify.points, "Points per sample");
  v->add_option("--samples", verify.samples, "Independent samples of the arbitrary functions");
  add_common(v, verify.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int rc = app.exit(err);
    return rc == 0 ? 0 : kExitParse;
  }

  try {
    if (d->parsed()) return cmd_detsys(detsys);
    if (c->parsed()) return cmd_compare(compare);
    if (e->parsed()) return cmd_example(example);
    if (k->parsed()) return cmd_kirchhoff(kirch);
    if (cl->parsed()) return cmd_catalog_list(cat);
    if (cs->parsed()) return cmd_catalog_show(cat);
    if (v->parsed()) return cmd_verify(verify);
  } catch (const ParseError& err) {
    std::cerr << "parse error: " << err.what() << "\n";
    return kExitParse;
  } catch (const PreconditionError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitPrecondition;
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
