#pragma once
// sdpl/soundness.hpp
//
// A fixed corpus of programs exercising every language construct, plus a
// runner that checks three independent evaluation routes against each other
// on sampled inputs:
//
//   1. big-step operational evaluation,
//   2. the compiled partial-map denotation,
//   3. the denotation of the recorded execution trace.
//
// Defined results must agree within tolerance; definedness itself must agree
// exactly.  The sampler keeps inputs away from guard boundaries (which for
// this corpus all lie on the quarter-integer lattice), so definedness of a
// program at a sampled point is stable.

#include <cmath>
#include <string>
#include <vector>

#include "gen.hpp"
#include "interp.hpp"
#include "opsem.hpp"
#include "parse.hpp"
#include "typing.hpp"

namespace sdpl {

struct SoundProgram {
  std::string name;
  std::string source;
  std::vector<double> lo, hi;  // per scalar input dimension
  int fuel = 32;
};

// Sample one input for `sp`, rejecting coordinates within `margin` of the
// quarter-integer lattice, where this corpus' guards change truth value.
inline std::vector<double> sample_program_input(Rng& rng, const SoundProgram& sp,
                                                double margin = 1e-3) {
  std::vector<double> p(sp.lo.size());
  for (size_t i = 0; i < p.size(); ++i) {
    double c = 0.0;
    for (int tries = 0; tries < 1000; ++tries) {
      c = sample_uniform(rng, sp.lo[i], sp.hi[i]);
      if (std::fabs(c - std::round(c * 4.0) / 4.0) > margin) break;
    }
    p[i] = c;
  }
  return p;
}

inline std::vector<SoundProgram> sound_corpus() {
  std::vector<SoundProgram> v;
  auto add = [&v](std::string name, std::string src, std::vector<double> lo,
                  std::vector<double> hi, int fuel = 32) {
    v.push_back({std::move(name), std::move(src), std::move(lo), std::move(hi), fuel});
  };

  add("affine", "arg x : real ; x + 2.5 + x", {-3}, {3});
  add("poly", "arg x : real ; arg y : real ; mul(x + y, mul(x, y))",
      {-2, -2}, {2, 2});
  add("trig_chain", "arg x : real ; sin(cos(x)) + exp(sin(x))", {-3}, {3});
  add("let_chain",
      "arg x : real ; let a : real = mul(x, x), b : real = a + x in mul(a, b)",
      {-2}, {2});
  add("deep_lets",
      "arg x : real ;\n"
      "let a : real = x + x in\n"
      "let b : real = mul(a, x) in\n"
      "let c : real = b + a in\n"
      "let d : real = mul(c, c) in\n"
      "let e : real = d + neg(b) in\n"
      "mul(e, a + 1.0)",
      {-1.5}, {1.5});
  add("pairs",
      "arg p : real * real ; let s : real = fst(p) + snd(p) in (mul(s, s), fst(p))",
      {-2, -2}, {2, 2});
  add("unit_value", "arg x : real ; let u : 1 = * in (u, x + 1.0)", {-3}, {3});
  add("shadowing", "arg x : real ; let x : real = x + 1.0 in mul(x, x)", {-3}, {3});
  add("tuple_pattern",
      "arg p : real * real ;\n"
      "let (a : real, b : real) = (snd(p), fst(p)) in mul(a, b) + a",
      {-2, -2}, {2, 2});
  add("abs_if", "arg x : real ; if gt0(x) then x else neg(x)", {-3}, {3});
  add("nested_if",
      "arg x : real ; arg y : real ;\n"
      "if gt0(x) then (if gt0(y) then mul(x, y) else x + neg(y)) else neg(x)",
      {-2, -2}, {2, 2});
  add("sqrt_region", "arg x : real ; sqrtp(x + -1.0)", {-2}, {4});
  add("guard_exp",
      "arg x : real ; if gt0(exp(x) + -1.0) then sqrtp(x) else neg(x)",
      {-3}, {3});
  add("guarded_recip",
      "arg x : real ; if gt0(x) then recip(x) else neg(x) + -1.0", {-3}, {3});
  add("countdown", "arg x : real ; while gt0(x) do x + -1.0", {-4}, {4}, 12);
  add("halving", "arg x : real ; while gt0(x + -0.25) do mul(x, 0.5)",
      {-4}, {4}, 12);
  add("loop_pair_state",
      "arg p : real * real ;\n"
      "while gt0(fst(p)) do (fst(p) + -1.0, snd(p) + fst(p))",
      {-4, -2}, {4, 2}, 12);
  add("loop_under_context",
      "arg a : real ; arg x : real ;\n"
      "let s : real * real = (a, x) in\n"
      "snd(while gt0(snd(s)) do (fst(s), snd(s) + neg(fst(s))))",
      {0.3, -4}, {3, 4});
  add("rd_square",
      "arg x : real ; let s : real = 1.0 in s.rd(y : real. mul(y, y))(x)",
      {-3}, {3});
  add("rd_trig",
      "arg x : real ; let s : real = 1.0 in s.rd(y : real. sin(mul(y, y)))(x)",
      {-2}, {2});
  add("rd_ambient", "arg a : real ; arg x : real ; a.rd(y : real. mul(a, y))(x)",
      {-2, -2}, {2, 2});
  add("rd_over_if",
      "arg x : real ;\n"
      "let s : real = 1.0 in s.rd(y : real. if gt0(y) then mul(y, y) else neg(y))(x)",
      {-3}, {3});
  add("rd_over_while",
      "arg x : real ;\n"
      "let s : real = 1.0 in s.rd(y : real. while gt0(y + -0.5) do mul(y, 0.5))(x)",
      {-4}, {4}, 16);
  add("rd_pair_body",
      "arg x : real ;\n"
      "let s : real * real = (1.0, 0.5) in s.rd(y : real. (mul(y, y), y + y))(x)",
      {-3}, {3});
  add("rd_wrt_pair",
      "arg p : real * real ;\n"
      "let s : real = 1.0 in snd(s.rd(q : real * real. mul(fst(q), snd(q)))(p))",
      {-2, -2}, {2, 2});
  add("rd_of_let",
      "arg x : real ;\n"
      "let s : real = 1.0 in\n"
      "s.rd(y : real. let a : real = mul(y, y) in a + mul(a, y))(x)",
      {-2}, {2});
  add("fact",
      "arg x : real ;\n"
      "letrec f(n : real) : real :=\n"
      "  if gt0(n + -0.5) then mul(n, f(n + -1.0)) else 1.0\n"
      "in f(x)",
      {-3}, {6}, 16);
  add("letrec_nonrec",
      "arg x : real ; letrec g(y : real) : real := mul(y, y) in g(x) + g(x + 1.0)",
      {-3}, {3});
  add("letrec_nested",
      "arg x : real ;\n"
      "letrec f(y : real) : real := y + y in\n"
      "letrec g(z : real) : real := f(mul(z, z)) in g(x)",
      {-3}, {3});
  add("rd_result_reused",
      "arg x : real ;\n"
      "let d : real = (let s : real = 1.0 in s.rd(y : real. exp(mul(y, 0.5)))(x))\n"
      "in mul(d, d)",
      {-2}, {2});
  return v;
}

// ------------------------------------------------------------------ runner

struct SoundnessRow {
  std::string name;
  int inputs = 0;
  int defined = 0;
  int undefined = 0;
  int value_mismatches = 0;
  int definedness_mismatches = 0;
  double max_dev = 0.0;
  bool ok() const { return value_mismatches == 0 && definedness_mismatches == 0; }
};

inline SoundnessRow run_soundness(const Interp& I, const SoundProgram& sp,
                                  Rng& rng, int n_inputs, double tol = 1e-9,
                                  long budget = 1'000'000) {
  SoundnessRow row;
  row.name = sp.name;
  Program prog = parse_program(sp.source, I.sig);
  Context ctx(prog.args.begin(), prog.args.end());
  type_of(I.sig, ctx, prog.term);  // corpus programs must typecheck
  PMapPtr den = denote(I, ctx, prog.term, sp.fuel);

  for (int i = 0; i < n_inputs; ++i) {
    std::vector<double> xs = sample_program_input(rng, sp);
    ++row.inputs;

    // route 1: operational
    bool op_def = false;
    std::vector<double> op_val;
    {
      ValueEnv env;
      size_t pos = 0;
      std::vector<TermPtr> arg_vals;
      for (const auto& [n, ty] : ctx) {
        TermPtr v = decode_value(ty, xs, pos);
        (void)n;
        arg_vals.push_back(v);
      }
      for (size_t k = 0; k < ctx.size(); ++k) env.emplace_back(ctx[k].first, arg_vals[k]);
      try {
        TermPtr v = eval_program(I, env, prog.term, budget);
        op_val = encode_value(v);
        op_def = true;
      } catch (const EvalError&) {
        op_def = false;  // undefined (or out of budget on a divergent input)
      }

      // route 2: denotational
      EvalResult dv = evaluate(I.table, den, xs);
      if (dv.has_value() != op_def) {
        ++row.definedness_mismatches;
        continue;
      }
      if (!op_def) {
        ++row.undefined;
        continue;
      }
      ++row.defined;
      for (size_t j = 0; j < op_val.size(); ++j) {
        double dev = std::fabs(op_val[j] - (*dv)[j]);
        row.max_dev = std::max(row.max_dev, dev);
        if (!(dev <= tol)) {
          ++row.value_mismatches;
          break;
        }
      }

      // route 3: denotation of the recorded trace
      TraceResult tr = trace_program(I, ctx, arg_vals, prog.term, budget);
      std::vector<double> tv = encode_value(tr.value);
      PMapPtr trden = denote(I, tr.trace_ctx, tr.trace, sp.fuel);
      EvalResult tdv = evaluate(I.table, trden, xs);
      if (!tdv) {
        ++row.definedness_mismatches;
        continue;
      }
      for (size_t j = 0; j < op_val.size(); ++j) {
        double dev = std::max(std::fabs(op_val[j] - (*tdv)[j]),
                              std::fabs(op_val[j] - tv[j]));
        row.max_dev = std::max(row.max_dev, dev);
        if (!(dev <= tol)) {
          ++row.value_mismatches;
          break;
        }
      }
    }
  }
  return row;
}

}  // namespace sdpl
