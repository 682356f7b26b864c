// sdpl — command-line front end for the differential language toolkit.
//
// Subcommands:
//   check FILE            parse + typecheck, print the program's type
//   run FILE --at ...     big-step evaluation at a point
//   trace FILE --at ...   record the straight-line execution trace
//   diff FILE             expand every rd into derivative code
//   denote FILE --at ...  evaluate the compiled partial-map denotation
//   transform FILE --rule if-rd|while-fd|while-rd
//   verify-transform FILE --rule ...   sampled equivalence check
//   axioms                property suite for the derivative backend
//   soundness             three-route agreement over the program corpus
//   bench-blowup          standard- vs optimized-mode call counts
//
// Exit codes: 0 success, 1 user error (bad flags, unreadable file, parse or
// type error, no matching transform site), 2 property failure (axioms,
// soundness, verify-transform).

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sdpl/ast_json.hpp"
#include "sdpl/axioms.hpp"
#include "sdpl/interp.hpp"
#include "sdpl/opsem.hpp"
#include "sdpl/parse.hpp"
#include "sdpl/pretty.hpp"
#include "sdpl/prims.hpp"
#include "sdpl/soundness.hpp"
#include "sdpl/symdiff.hpp"
#include "sdpl/transforms.hpp"
#include "sdpl/typing.hpp"

using nlohmann::json;
using namespace sdpl;

namespace {

int die(const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  return 1;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_floats(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream ss(s);
  while (std::getline(ss, tok, ',')) {
    size_t used = 0;
    double v = std::stod(tok, &used);
    while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
      ++used;
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

struct Loaded {
  Program prog;
  Context ctx;
  Ty result_ty = Ty::real();
  Ty dom_ty = Ty::unit();
};

Loaded load(const Interp& I, const std::string& path) {
  Loaded l;
  l.prog = parse_program(read_file(path), I.sig);
  l.ctx.assign(l.prog.args.begin(), l.prog.args.end());
  l.result_ty = type_of(I.sig, l.ctx, l.prog.term);
  if (!l.prog.args.empty()) {
    l.dom_ty = l.prog.args[0].second;
    for (size_t i = 1; i < l.prog.args.size(); ++i)
      l.dom_ty = Ty::prod(l.dom_ty, l.prog.args[i].second);
  }
  return l;
}

std::string show_program(const Context& args, const TermPtr& term) {
  std::string out;
  for (const auto& [n, ty] : args) out += "arg " + n + " : " + ty.str() + " ;\n";
  out += pretty(term);
  out += "\n";
  return out;
}

// split a flat input vector into per-argument values; throws on arity error
std::vector<TermPtr> decode_args(const Interp& I, const Context& ctx,
                                 const std::vector<double>& flat) {
  if (static_cast<int>(flat.size()) != ctx_dims(I, ctx))
    throw std::invalid_argument("--at expects " + std::to_string(ctx_dims(I, ctx)) +
                                " comma-separated floats, got " +
                                std::to_string(flat.size()));
  std::vector<TermPtr> vals;
  size_t pos = 0;
  for (const auto& [n, ty] : ctx) {
    (void)n;
    vals.push_back(decode_value(ty, flat, pos));
  }
  return vals;
}

const char* eval_error_kind(const EvalError& e) {
  if (dynamic_cast<const UndefinedPrimitive*>(&e)) return "undefined-primitive";
  if (dynamic_cast<const StuckPredicate*>(&e)) return "stuck-predicate";
  if (dynamic_cast<const OutOfFuel*>(&e)) return "out-of-budget";
  return "evaluation-error";
}

std::optional<TermPtr> apply_rule(const std::string& rule, const TermPtr& t,
                                  FreshNames& fresh) {
  auto step = [&](const TermPtr& s) -> std::optional<TermPtr> {
    if (rule == "if-rd") return transform_if_rd_step(s);
    if (rule == "while-fd") return transform_while_fd_step(s, fresh);
    return transform_while_rd_step(s, fresh);
  };
  return rewrite_first(t, step);
}

json row_json(const AxiomRow& r) {
  return json{{"name", r.name},         {"maps", r.maps},
              {"points", r.points},     {"failures", r.failures},
              {"skips", r.skips},       {"max_dev", r.max_dev},
              {"pass", r.ok()}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential language toolkit"};
  app.require_subcommand(1);

  // shared options (declared per subcommand so --help stays local)
  std::string file, at_str, mode_str = "standard", rule, depths_str = "8,12,16";
  long budget = 1'000'000;
  int fuel = 10'000, samples = 50, inputs = 25, maps = 50, points = 200;
  int table_depth = 3, map_depth = 4;
  unsigned long long seed = 7;
  double tol = 1e-9, fd_tol = 1e-4;
  bool want_json = false, want_ast = false, want_stats = false;

  auto add_common = [&](CLI::App* c, bool with_file) {
    if (with_file) c->add_option("file", file, "program file (.sdpl)")->required();
    c->add_flag("--json", want_json, "machine-readable output");
  };
  auto add_mode = [&](CLI::App* c) {
    c->add_option("--mode", mode_str, "differentiation mode")
        ->check(CLI::IsMember({"standard", "optimized"}))
        ->capture_default_str();
  };
  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed, "random seed")->capture_default_str();
  };

  CLI::App* c_check = app.add_subcommand("check", "parse and typecheck a program");
  add_common(c_check, true);
  c_check->add_flag("--ast", want_ast, "dump the abstract syntax as JSON");

  CLI::App* c_run = app.add_subcommand("run", "evaluate a program at a point");
  add_common(c_run, true);
  c_run->add_option("--at", at_str, "input point, comma-separated floats")->required();
  c_run->add_option("--budget", budget, "evaluation step budget")->capture_default_str();
  add_mode(c_run);
  add_seed(c_run);

  CLI::App* c_trace = app.add_subcommand("trace", "record an execution trace");
  add_common(c_trace, true);
  c_trace->add_option("--at", at_str, "input point, comma-separated floats")->required();
  c_trace->add_option("--budget", budget, "evaluation step budget")->capture_default_str();
  add_mode(c_trace);
  add_seed(c_trace);

  CLI::App* c_diff = app.add_subcommand("diff", "expand rd into derivative code");
  add_common(c_diff, true);
  add_mode(c_diff);
  c_diff->add_flag("--stats", want_stats, "print differentiation statistics");

  CLI::App* c_den = app.add_subcommand("denote", "evaluate the denotation at a point");
  add_common(c_den, true);
  c_den->add_option("--at", at_str, "input point, comma-separated floats")->required();
  c_den->add_option("--fuel", fuel, "loop/fixed-point unrolling depth")
      ->capture_default_str();

  CLI::App* c_tr = app.add_subcommand("transform", "rewrite derivatives of control flow");
  add_common(c_tr, true);
  c_tr->add_option("--rule", rule, "rewrite rule")
      ->check(CLI::IsMember({"if-rd", "while-fd", "while-rd"}))
      ->required();

  CLI::App* c_vt = app.add_subcommand("verify-transform",
                                      "check a rewrite preserves meaning on samples");
  add_common(c_vt, true);
  c_vt->add_option("--rule", rule, "rewrite rule")
      ->check(CLI::IsMember({"if-rd", "while-fd", "while-rd"}))
      ->required();
  c_vt->add_option("--samples", samples, "sample points")->capture_default_str();
  add_seed(c_vt);
  c_vt->add_option("--tol", tol, "comparison tolerance")->capture_default_str();
  c_vt->add_option("--fuel", fuel, "loop unrolling depth")->capture_default_str();

  CLI::App* c_ax = app.add_subcommand("axioms", "derivative-backend property suite");
  add_common(c_ax, false);
  c_ax->add_option("--maps", maps, "generated maps")->capture_default_str();
  c_ax->add_option("--samples", points, "points per map and axiom")
      ->capture_default_str();
  add_seed(c_ax);
  c_ax->add_option("--depth", table_depth, "primitive-table reverse depth")
      ->capture_default_str();
  c_ax->add_option("--map-depth", map_depth, "generated-map structure depth")
      ->capture_default_str();
  c_ax->add_option("--tol", tol, "algebraic tolerance")->capture_default_str();
  c_ax->add_option("--fd-tol", fd_tol, "finite-difference tolerance")
      ->capture_default_str();

  CLI::App* c_snd = app.add_subcommand("soundness",
                                       "three-route agreement over the corpus");
  add_common(c_snd, false);
  c_snd->add_option("--inputs", inputs, "inputs per program")->capture_default_str();
  add_seed(c_snd);
  c_snd->add_option("--tol", tol, "value tolerance")->capture_default_str();
  c_snd->add_option("--budget", budget, "evaluation step budget")->capture_default_str();

  CLI::App* c_bb = app.add_subcommand("bench-blowup",
                                      "mode separation on the let-chain family");
  add_common(c_bb, false);
  c_bb->add_option("--depths", depths_str, "comma-separated chain depths")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Interp I = default_interp(3);
  RdMode mode = mode_str == "optimized" ? RdMode::Optimized : RdMode::Standard;

  try {
    // ------------------------------------------------------------- check
    if (c_check->parsed()) {
      Loaded l;
      try {
        l = load(I, file);
      } catch (const std::exception& e) {
        if (want_json) {
          std::printf("%s\n", json{{"error", e.what()}}.dump().c_str());
          return 1;
        }
        return die(e.what());
      }
      std::string ty = l.dom_ty.str() + " -> " + l.result_ty.str();
      if (want_json) {
        json j{{"type", ty}, {"result", l.result_ty.str()}};
        j["args"] = json::array();
        for (const auto& [n, t] : l.prog.args)
          j["args"].push_back({{"name", n}, {"ty", t.str()}});
        if (want_ast) j["ast"] = json::parse(ast_json(l.prog.term));
        std::printf("%s\n", j.dump().c_str());
      } else {
        std::printf("%s\n", ty.c_str());
        if (want_ast) std::printf("%s\n", ast_json(l.prog.term).c_str());
      }
      return 0;
    }

    // --------------------------------------------------------- run/trace
    if (c_run->parsed() || c_trace->parsed()) {
      Loaded l = load(I, file);
      std::vector<TermPtr> args = decode_args(I, l.ctx, parse_floats(at_str));
      if (c_run->parsed()) {
        ValueEnv env;
        for (size_t i = 0; i < l.ctx.size(); ++i)
          env.emplace_back(l.ctx[i].first, args[i]);
        try {
          TermPtr v = eval_program(I, env, l.prog.term, budget, mode);
          if (want_json)
            std::printf("%s\n", json{{"value", pretty(v)},
                                     {"flat", encode_value(v)}}
                                    .dump()
                                    .c_str());
          else
            std::printf("%s\n", pretty(v).c_str());
        } catch (const EvalError& e) {
          if (want_json)
            std::printf("%s\n", json{{"error", eval_error_kind(e)},
                                     {"detail", e.what()}}
                                    .dump()
                                    .c_str());
          else
            std::printf("error: %s (%s)\n", eval_error_kind(e), e.what());
        }
        return 0;
      }
      try {
        TraceResult tr = trace_program(I, l.ctx, args, l.prog.term, budget, mode);
        if (want_json)
          std::printf("%s\n", json{{"trace", pretty(tr.trace)},
                                   {"value", pretty(tr.value)},
                                   {"flat", encode_value(tr.value)}}
                                  .dump()
                                  .c_str());
        else
          std::printf("%s\n~> %s\n", pretty(tr.trace).c_str(),
                      pretty(tr.value).c_str());
      } catch (const EvalError& e) {
        if (want_json)
          std::printf("%s\n", json{{"error", eval_error_kind(e)},
                                   {"detail", e.what()}}
                                  .dump()
                                  .c_str());
        else
          std::printf("error: %s (%s)\n", eval_error_kind(e), e.what());
      }
      return 0;
    }

    // ---------------------------------------------------------------- diff
    if (c_diff->parsed()) {
      Loaded l = load(I, file);
      FreshNames fresh;
      RdStats stats;
      TermPtr out = expand_rd_fully(I.sig, mode, l.ctx, l.prog.term, fresh, &stats);
      if (want_json) {
        json j{{"term", show_program(l.ctx, out)}};
        if (want_stats)
          j["stats"] = {{"calls", stats.calls}, {"output_nodes", stats.output_nodes}};
        std::printf("%s\n", j.dump().c_str());
      } else {
        std::fputs(show_program(l.ctx, out).c_str(), stdout);
        if (want_stats)
          std::printf("-- calls: %zu, output nodes: %zu\n", stats.calls,
                      stats.output_nodes);
      }
      return 0;
    }

    // -------------------------------------------------------------- denote
    if (c_den->parsed()) {
      Loaded l = load(I, file);
      std::vector<double> flat = parse_floats(at_str);
      if (static_cast<int>(flat.size()) != ctx_dims(I, l.ctx))
        return die("--at expects " + std::to_string(ctx_dims(I, l.ctx)) + " floats");
      PMapPtr den = denote(I, l.ctx, l.prog.term, fuel);
      EvalResult r = evaluate(I.table, den, flat);
      if (want_json) {
        json j{{"defined", r.has_value()}};
        if (r) {
          j["flat"] = *r;
          j["value"] = pretty(decode_value(l.result_ty, *r));
        }
        std::printf("%s\n", j.dump().c_str());
      } else if (r) {
        std::printf("%s\n", pretty(decode_value(l.result_ty, *r)).c_str());
      } else {
        std::printf("undefined\n");
      }
      return 0;
    }

    // ----------------------------------------------------------- transform
    if (c_tr->parsed()) {
      Loaded l = load(I, file);
      FreshNames fresh;
      auto out = apply_rule(rule, l.prog.term, fresh);
      if (!out) return die("no subterm matches rule '" + rule + "'");
      type_of(I.sig, l.ctx, *out);  // rewrites must preserve typing
      if (want_json)
        std::printf("%s\n", json{{"term", show_program(l.ctx, *out)}}.dump().c_str());
      else
        std::fputs(show_program(l.ctx, *out).c_str(), stdout);
      return 0;
    }

    // ---------------------------------------------------- verify-transform
    if (c_vt->parsed()) {
      Loaded l = load(I, file);
      FreshNames fresh;
      auto out = apply_rule(rule, l.prog.term, fresh);
      if (!out) return die("no subterm matches rule '" + rule + "'");
      Rng rng(seed);
      std::vector<std::vector<double>> pts;
      for (int i = 0; i < samples; ++i)
        pts.push_back(sample_point_off_boundary(rng, ctx_dims(I, l.ctx), -3.0, 3.0));
      TransformReport rep = check_equivalence(I, l.ctx, l.prog.term, *out, pts,
                                              tol, fuel);
      if (want_json)
        std::printf("%s\n", json{{"pass", rep.pass},
                                 {"samples", rep.samples},
                                 {"max_dev", rep.max_dev},
                                 {"definedness_mismatches",
                                  rep.definedness_mismatches}}
                                .dump()
                                .c_str());
      else
        std::printf("%s samples=%d max_dev=%.3g definedness_mismatches=%d\n",
                    rep.pass ? "PASS" : "FAIL", rep.samples, rep.max_dev,
                    rep.definedness_mismatches);
      return rep.pass ? 0 : 2;
    }

    // -------------------------------------------------------------- axioms
    if (c_ax->parsed()) {
      PrimTable t = default_prim_table(table_depth);
      Rng rng(seed);
      std::vector<AxiomRow> rows = run_axiom_suite(t, rng, maps, points, map_depth,
                                                   tol, fd_tol);
      bool all = true;
      for (const auto& r : rows) all = all && r.ok();
      if (want_json) {
        json j{{"pass", all}, {"axioms", json::array()}};
        for (const auto& r : rows) j["axioms"].push_back(row_json(r));
        std::printf("%s\n", j.dump().c_str());
      } else {
        for (const auto& r : rows)
          std::printf("%-9s maps=%-3d points=%-6d failures=%-3d skips=%-3d "
                      "max_dev=%-9.3g %s\n",
                      r.name.c_str(), r.maps, r.points, r.failures, r.skips,
                      r.max_dev, r.ok() ? "PASS" : "FAIL");
      }
      return all ? 0 : 2;
    }

    // ----------------------------------------------------------- soundness
    if (c_snd->parsed()) {
      Rng rng(seed);
      bool all = true;
      json jrows = json::array();
      for (const auto& sp : sound_corpus()) {
        SoundnessRow row = run_soundness(I, sp, rng, inputs, tol, budget);
        all = all && row.ok();
        if (want_json)
          jrows.push_back({{"name", row.name},
                           {"inputs", row.inputs},
                           {"defined", row.defined},
                           {"undefined", row.undefined},
                           {"value_mismatches", row.value_mismatches},
                           {"definedness_mismatches", row.definedness_mismatches},
                           {"max_dev", row.max_dev},
                           {"pass", row.ok()}});
        else
          std::printf("%-22s inputs=%-4d defined=%-4d undefined=%-4d "
                      "value_mismatches=%-3d definedness_mismatches=%-3d "
                      "max_dev=%-9.3g %s\n",
                      row.name.c_str(), row.inputs, row.defined, row.undefined,
                      row.value_mismatches, row.definedness_mismatches,
                      row.max_dev, row.ok() ? "PASS" : "FAIL");
      }
      if (want_json)
        std::printf("%s\n", json{{"pass", all}, {"programs", jrows}}.dump().c_str());
      return all ? 0 : 2;
    }

    // -------------------------------------------------------- bench-blowup
    if (c_bb->parsed()) {
      std::vector<double> dd = parse_floats(depths_str);
      json jrows = json::array();
      if (!want_json) std::printf("depth,standard_calls,optimized_calls\n");
      for (double d : dd) {
        int n = static_cast<int>(d);
        if (n < 1 || static_cast<double>(n) != d)
          return die("--depths expects positive integers");
        BlowupRow row = measure_blowup(I.sig, n, 1.0, [&I](const TermPtr& t) {
          return encode_value(eval_program(I, {}, t)).at(0);
        });
        if (want_json)
          jrows.push_back({{"depth", row.depth},
                           {"standard_calls", row.standard_calls},
                           {"optimized_calls", row.optimized_calls},
                           {"standard_value", row.standard_value},
                           {"optimized_value", row.optimized_value}});
        else
          std::printf("%d,%zu,%zu\n", row.depth, row.standard_calls,
                      row.optimized_calls);
      }
      if (want_json) std::printf("%s\n", jrows.dump().c_str());
      return 0;
    }
  } catch (const ParseError& e) {
    return die(std::string("parse: ") + e.what());
  } catch (const TypeError& e) {
    return die(std::string("type: ") + e.what());
  } catch (const std::exception& e) {
    return die(e.what());
  }
  return die("no subcommand");  // unreachable: require_subcommand(1)
}
