// Batch front end: parse an input, run one pipeline, print the artifacts,
// and optionally certify the emitted identity on random metric jets.
//
// Exit codes: 0 pass, 2 verification failure, 3 budget exhausted,
// 4 input error, 1 internal fault. Reports are deterministic for a fixed
// configuration and seed; wall-clock timings go to stderr only so the
// written artifacts stay byte-identical.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "confinv/canon.hpp"
#include "confinv/conformal.hpp"
#include "confinv/expr.hpp"
#include "confinv/ibp.hpp"
#include "confinv/oracle.hpp"
#include "confinv/parse.hpp"

namespace {

using confinv::Error;
using confinv::LinComb;
using confinv::Term;
using json = nlohmann::ordered_json;

struct Opts {
  std::string P;
  std::string expr;
  std::string in_file;
  std::string out;
  std::string trace;
  std::string dims;
  std::string report = "text";
  std::string mode = "general";
  int n = 0;
  int Z = 1;
  std::uint64_t seed = 20240817;
  int trials = 20;
  double tol = 1e-8;
  std::int64_t budget = confinv::default_node_budget;
  bool verify = false;
  bool classify = false;
};

int exit_code_for(const Error& e) {
  if (e.code == "BudgetExceeded") return 3;
  if (e.code == "ResidualNonzero") return 2;
  if (e.code == "InternalError" || e.code == "ProjectionDidNotConverge")
    return 1;
  return 4;
}

void write_atomic(const std::string& path, const std::string& data) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("SyntaxError", "cannot open output file " + tmp);
    os << data;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("SyntaxError", "cannot move output into place at " + path);
}

std::string load_text(const Opts& o, bool allow_preset, int* preset_n) {
  if (preset_n) *preset_n = 0;
  std::string src = !o.P.empty() ? o.P : o.expr;
  if (allow_preset && !o.P.empty()) {
    if (o.P == "gb4") {
      if (preset_n) *preset_n = 4;
      return "contr(Rm[a b c d] * Rm[a b c d]) - 4*contr(Ric[a b] * Ric[a b])"
             " + contr(Sc * Sc)";
    }
    if (o.P == "sc2") {
      if (preset_n) *preset_n = 2;
      return "contr(Sc)";
    }
  }
  if (!src.empty()) return src;
  if (!o.in_file.empty()) {
    std::ifstream is(o.in_file);
    if (!is) throw Error("SyntaxError", "cannot read " + o.in_file);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }
  throw Error("SyntaxError", "no input: pass --P, --expr or --in");
}

std::vector<int> parse_dims(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (piece.empty()) continue;
    try {
      out.push_back(std::stoi(piece));
    } catch (const std::exception&) {
      throw Error("SyntaxError", "bad --dims entry: " + piece);
    }
  }
  return out;
}

json stage(const std::string& name, const LinComb& l) {
  return json{{"name", name}, {"terms", l.terms.size()}};
}

const char* class_tag(confinv::XiClass c) {
  using confinv::XiClass;
  switch (c) {
    case XiClass::Good: return "good";
    case XiClass::Easy: return "easy";
    case XiClass::Undecided: return "undecided";
    case XiClass::Hard: return "hard";
    case XiClass::Stigmatized1: return "stigmatized1";
    case XiClass::Stigmatized2: return "stigmatized2";
  }
  return "?";
}

json class_histogram(const LinComb& d) {
  json h = {{"good", 0},         {"easy", 0},         {"undecided", 0},
            {"hard", 0},         {"stigmatized1", 0}, {"stigmatized2", 0}};
  for (const Term& t : d.terms) {
    const char* k = class_tag(confinv::classify(t));
    h[k] = int(h[k]) + 1;
  }
  return h;
}

// The polarized variation of the candidate invariant, pinned at n.
struct Pipe {
  LinComb iz;
  int n = 0;
};

Pipe make_iz(const Opts& o, json& stages) {
  int preset_n = 0;
  LinComb P = confinv::parse(load_text(o, true, &preset_n));
  int wn = -confinv::weight(P);
  int n = o.n > 0 ? o.n : (preset_n > 0 ? preset_n : wn);
  if (n != wn)
    throw Error("DimensionMismatch",
                "the dimension must equal minus the weight of P (" +
                    std::to_string(wn) + ")");
  if (n < 2 || n % 2 != 0)
    throw Error("DimensionMismatch", "the dimension must be even and >= 2");
  if (o.Z < 1) throw Error("DimensionMismatch", "Z must be positive");
  P = confinv::rewrite_dimension(confinv::collect(P), n);
  stages.push_back(stage("input", P));
  LinComb v = confinv::conformal_variation(P, confinv::XiMode::General);
  stages.push_back(stage("variation", v));
  LinComb iz = confinv::collect(confinv::pin_coefficients(
      confinv::rewrite_dimension(confinv::polarize(v, o.Z), n)));
  stages.push_back(stage("polarized", iz));
  return {std::move(iz), n};
}

// "true" / "false" / "unknown" under the node budget.
std::string formal_zero(const LinComb& l, std::int64_t budget) {
  try {
    return confinv::is_formally_zero(l, std::nullopt, budget) ? "true"
                                                              : "false";
  } catch (const Error& e) {
    if (e.code == "BudgetExceeded") return "unknown";
    throw;
  }
}

double oracle_residual(const LinComb& l, int dim, const Opts& o) {
  if (l.terms.empty()) return 0.0;
  LinComb at = confinv::rewrite_dimension(l, dim);
  return confinv::num::check_vanishes(at, dim, o.trials, o.seed);
}

struct Run {
  Opts o;
  json report;
  bool pass = true;

  explicit Run(const Opts& opts, const std::string& command) : o(opts) {
    report["command"] = command;
    report["config"] = {{"n", o.n},         {"Z", o.Z},
                        {"seed", o.seed},   {"trials", o.trials},
                        {"tol", o.tol},     {"budget", o.budget},
                        {"input", !o.P.empty() ? o.P : o.expr},
                        {"verify", o.verify}};
    report["stages"] = json::array();
  }

  // Certifies lc == 0 formally (budget-capped) and on random jets at dim.
  json certify(const std::string& what, const LinComb& lc, int dim) {
    std::string fz = formal_zero(lc, o.budget);
    double r = oracle_residual(lc, dim, o);
    bool ok = r < o.tol && fz != "false";
    if (!ok) pass = false;
    return json{{"what", what},
                {"formal", fz},
                {"dim", dim},
                {"residual", r},
                {"pass", ok}};
  }

  int finish() {
    report["pass"] = pass;
    std::string rendered = report.dump(2) + "\n";
    if (!o.out.empty()) write_atomic(o.out, rendered);
    if (o.report == "json" && o.out.empty()) std::cout << rendered;
    if (!pass && o.report == "text")
      std::cout << "FAIL: a certification check did not pass\n";
    return pass ? 0 : 2;
  }

  void text(const std::string& s) {
    if (o.report == "text") std::cout << s << "\n";
  }
};

int cmd_canon(const Opts& o) {
  Run run(o, "canon");
  LinComb l = confinv::parse(load_text(o, false, nullptr));
  run.report["stages"].push_back(stage("input", l));
  LinComb c = confinv::collect(l);
  run.report["stages"].push_back(stage("collected", c));
  run.report["output"] = confinv::serialize_text(c);
  run.text(confinv::serialize_text(c));
  return run.finish();
}

int cmd_verify(const Opts& o) {
  Run run(o, "verify");
  LinComb l = confinv::parse(load_text(o, false, nullptr));
  run.report["stages"].push_back(stage("input", l));
  std::string fz = formal_zero(l, o.budget);
  std::vector<int> dims = parse_dims(o.dims);
  if (dims.empty()) {
    if (l.dim > 0)
      dims = {l.dim};
    else
      dims = {3, 4};
  }
  json checks = json::array();
  bool oracle_ok = true;
  for (int d : dims) {
    double r = oracle_residual(l, d, o);
    checks.push_back(json{{"dim", d}, {"residual", r}});
    if (!(r < o.tol)) oracle_ok = false;
  }
  run.report["checks"] = {
      {"formal", fz}, {"oracle", checks}, {"oracle_pass", oracle_ok}};
  // An identity must pass the oracle; a definite formal "false" paired with
  // an oracle zero is an inconsistency and also fails.
  run.pass = oracle_ok && fz != "false";
  run.text("formal: " + fz + ", oracle max residual pass: " +
           (oracle_ok ? "yes" : "no"));
  return run.finish();
}

int cmd_vary(const Opts& o) {
  Run run(o, "vary");
  int preset_n = 0;
  LinComb P = confinv::parse(load_text(o, true, &preset_n));
  run.report["stages"].push_back(stage("input", P));
  auto mode = o.mode == "linear" ? confinv::XiMode::Linear
                                 : confinv::XiMode::General;
  LinComb v = confinv::collect(confinv::conformal_variation(P, mode));
  run.report["stages"].push_back(stage("variation", v));
  run.report["output"] = confinv::serialize_text(v);
  run.text(confinv::serialize_text(v));
  return run.finish();
}

int cmd_polarize(const Opts& o) {
  Run run(o, "polarize");
  Pipe p = make_iz(o, run.report["stages"]);
  run.report["output"] = confinv::serialize_text(p.iz);
  run.text(confinv::serialize_text(p.iz));
  return run.finish();
}

int cmd_descend(const Opts& o) {
  Run run(o, "descend");
  LinComb l = confinv::parse(load_text(o, true, nullptr));
  run.report["stages"].push_back(stage("input", l));
  LinComb d = confinv::collect(confinv::descend(l));
  run.report["stages"].push_back(stage("descend", d));
  if (o.classify) run.report["classes"] = class_histogram(d);
  run.report["output"] = confinv::serialize_text(d);
  if (o.classify && o.report == "text") {
    for (const Term& t : d.terms)
      run.text(std::string(class_tag(confinv::classify(t))) + ": " +
               confinv::serialize_text(t));
  } else {
    run.text(confinv::serialize_text(d));
  }
  return run.finish();
}

void add_descend_stage(Run& run, const LinComb& iz) {
  LinComb d = confinv::collect(confinv::descend(iz));
  json s = stage("descend", d);
  s["classes"] = class_histogram(d);
  run.report["stages"].push_back(std::move(s));
}

int cmd_sillydiv(const Opts& o) {
  Run run(o, "sillydiv");
  Pipe p = make_iz(o, run.report["stages"]);
  confinv::DivergenceFormula f = confinv::silly_divergence(p.iz);
  run.report["formula"] = confinv::serialize_text(f.fields);
  run.report["fields"] = f.fields.terms.size();
  if (!o.trace.empty()) write_atomic(o.trace, confinv::trace_to_json(f.trace));
  run.text(confinv::serialize_text(f.fields));
  if (o.verify) {
    LinComb r = confinv::collect(confinv::plus(
        confinv::scaled(p.iz, confinv::Rational(-1)),
        confinv::expand_divergence(f)));
    run.report["checks"] = json::array({run.certify("expansion", r, p.n)});
  }
  return run.finish();
}

int cmd_superdiv(const Opts& o) {
  Run run(o, "superdiv");
  Pipe p = make_iz(o, run.report["stages"]);
  add_descend_stage(run, p.iz);
  confinv::DivergenceFormula f = confinv::super_divergence(p.iz);
  run.report["formula"] = confinv::serialize_text(f.fields);
  run.report["fields"] = f.fields.terms.size();
  if (!o.trace.empty()) write_atomic(o.trace, confinv::trace_to_json(f.trace));
  run.text(confinv::serialize_text(f.fields));
  if (o.verify) {
    LinComb r = confinv::collect(confinv::plus(
        confinv::scaled(p.iz, confinv::Rational(-1)),
        confinv::expand_divergence(f)));
    run.report["checks"] = json::array({run.certify("expansion", r, p.n)});
  }
  return run.finish();
}

int cmd_shadow(const Opts& o) {
  Run run(o, "shadow");
  Pipe p = make_iz(o, run.report["stages"]);
  add_descend_stage(run, p.iz);
  confinv::IbpTrace tr;
  LinComb sh = confinv::shadow(p.iz, &tr);
  run.report["shadow"] = confinv::serialize_text(sh);
  run.report["terms"] = sh.terms.size();
  if (!o.trace.empty()) write_atomic(o.trace, confinv::trace_to_json(tr));
  run.text(confinv::serialize_text(sh));
  if (o.verify) {
    json checks = json::array();
    double r = oracle_residual(sh, p.n, o);
    bool ok = r < o.tol;
    checks.push_back(
        json{{"what", "shadow"}, {"dim", p.n}, {"residual", r}, {"pass", ok}});
    if (!ok) run.pass = false;
    for (auto& [g, part] : confinv::grade_by_xixi(sh)) {
      double rg = oracle_residual(part, p.n, o);
      bool okg = rg < o.tol;
      checks.push_back(json{{"what", "grade " + std::to_string(g)},
                            {"dim", p.n},
                            {"residual", rg},
                            {"pass", okg}});
      if (!okg) run.pass = false;
    }
    run.report["checks"] = std::move(checks);
  }
  return run.finish();
}

int cmd_simplediv(const Opts& o) {
  Run run(o, "simplediv");
  Pipe p = make_iz(o, run.report["stages"]);
  add_descend_stage(run, p.iz);
  confinv::IbpTrace tr;
  auto [res, un] = confinv::simple_divergence(p.iz, &tr);
  run.report["residual"] = confinv::serialize_text(res);
  run.report["unintrinsic"] = confinv::serialize_text(un);
  if (!o.trace.empty()) write_atomic(o.trace, confinv::trace_to_json(tr));
  run.text("residual: " + confinv::serialize_text(res));
  run.text("unintrinsic: " + confinv::serialize_text(un));
  if (o.verify) {
    json checks = json::array();
    double rr = oracle_residual(res, p.n, o);
    bool ok1 = rr < o.tol;
    checks.push_back(json{
        {"what", "residual"}, {"dim", p.n}, {"residual", rr}, {"pass", ok1}});
    double ru = oracle_residual(un, p.n, o);
    bool ok2 = ru < o.tol;
    checks.push_back(json{{"what", "unintrinsic"},
                          {"dim", p.n},
                          {"residual", ru},
                          {"pass", ok2}});
    if (!ok1 || !ok2) run.pass = false;
    run.report["checks"] = std::move(checks);
  }
  return run.finish();
}

void add_common(CLI::App* c, Opts& o, bool with_pipeline) {
  c->add_option("--expr", o.expr, "input in the contraction DSL");
  c->add_option("--in", o.in_file, "file holding the input DSL");
  c->add_option("--out", o.out, "write the JSON report here");
  c->add_option("--seed", o.seed, "random seed for certification");
  c->add_option("--trials", o.trials, "random jets per certification check");
  c->add_option("--tol", o.tol, "certification tolerance");
  c->add_option("--budget", o.budget, "node budget for formal-zero checks");
  c->add_option("--report", o.report, "report rendering: text or json")
      ->check(CLI::IsMember({"text", "json"}));
  if (with_pipeline) {
    c->add_option("--P", o.P, "candidate invariant: DSL text or preset gb4|sc2");
    c->add_option("--n", o.n, "dimension (defaults to minus the weight)");
    c->add_option("--Z", o.Z, "number of polarized scalar arguments");
    c->add_option("--trace", o.trace, "write the derivation trace JSON here");
    c->add_flag("--verify", o.verify, "certify the emitted identity on jets");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complete-contraction engine: conformal variation, descent, "
               "parts-integration formulas, numeric certification"};
  app.require_subcommand(1);
  Opts o;

  CLI::App* canon = app.add_subcommand("canon", "collect to canonical form");
  add_common(canon, o, false);
  CLI::App* verify =
      app.add_subcommand("verify", "certify an identity formally and on jets");
  add_common(verify, o, false);
  verify->add_option("--dims", o.dims, "comma-separated dimensions");
  CLI::App* vary = app.add_subcommand("vary", "conformal variation");
  add_common(vary, o, true);
  vary->add_option("--mode", o.mode, "general or linear")
      ->check(CLI::IsMember({"general", "linear"}));
  CLI::App* pol = app.add_subcommand("polarize", "polarized variation");
  add_common(pol, o, true);
  CLI::App* desc = app.add_subcommand("descend", "gradient-field descendants");
  add_common(desc, o, true);
  desc->add_flag("--classify", o.classify, "tag each descendant's class");
  CLI::App* silly = app.add_subcommand("sillydiv", "peeled divergence formula");
  add_common(silly, o, true);
  CLI::App* super_ = app.add_subcommand("superdiv", "sieved divergence formula");
  add_common(super_, o, true);
  CLI::App* shadow_ = app.add_subcommand("shadow", "parked-term combination");
  add_common(shadow_, o, true);
  CLI::App* simple =
      app.add_subcommand("simplediv", "crude route with connection terms");
  add_common(simple, o, true);

  CLI11_PARSE(app, argc, argv);

  auto t0 = std::chrono::steady_clock::now();
  int rc = 1;
  try {
    if (canon->parsed()) rc = cmd_canon(o);
    if (verify->parsed()) rc = cmd_verify(o);
    if (vary->parsed()) rc = cmd_vary(o);
    if (pol->parsed()) rc = cmd_polarize(o);
    if (desc->parsed()) rc = cmd_descend(o);
    if (silly->parsed()) rc = cmd_sillydiv(o);
    if (super_->parsed()) rc = cmd_superdiv(o);
    if (shadow_->parsed()) rc = cmd_shadow(o);
    if (simple->parsed()) rc = cmd_simplediv(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!o.out.empty()) {
      json err = {{"error", {{"code", e.code}, {"message", e.what()}}},
                  {"pass", false}};
      try {
        write_atomic(o.out, err.dump(2) + "\n");
      } catch (...) {
      }
    }
    rc = exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = 1;
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - t0)
                .count();
  std::cerr << "elapsed: " << ms << " ms\n";
  return rc;
}
