#pragma once
// sdpl/prims.hpp
//
// The default primitive-operation table: seven scalar base operations
// (mul, neg, sin, cos, exp, recip, sqrtp) plus the boolean-guard witnesses
// gt0_T / gt0_F, closed under the reverse derivative up to a configurable
// depth.
//
// Level-1 reverse maps are written out as combinator graphs over the base
// operations, chosen so that their domains of definition coincide exactly
// with (domain of op) x R^cod — e.g. the reverse of recip tests x != 0 by
// computing recip(x*x).  Higher levels are generated structurally by
// reverse_derivative, which preserves that exactness.

#include <string>
#include <vector>

#include "pmap.hpp"
#include "syntax.hpp"

namespace sdpl {

namespace detail {

inline PMapPtr base_reverse_graph(const std::string& op) {
  auto MUL = [] { return prim_node("mul", 2, 1); };
  auto NEG = [] { return prim_node("neg", 1, 1); };
  auto SIN = [] { return prim_node("sin", 1, 1); };
  auto COS = [] { return prim_node("cos", 1, 1); };
  auto EXP = [] { return prim_node("exp", 1, 1); };
  auto RECIP = [] { return prim_node("recip", 1, 1); };
  auto SQRTP = [] { return prim_node("sqrtp", 1, 1); };

  if (op == "mul") {
    // (x, y, w) -> (y*w, x*w)
    PMapPtr yw = compose(pair_map(coord(3, 1), coord(3, 2)), MUL());
    PMapPtr xw = compose(pair_map(coord(3, 0), coord(3, 2)), MUL());
    return pair_map(yw, xw);
  }
  PMapPtr x = coord(2, 0), w = coord(2, 1);
  if (op == "neg")  // (x, w) -> -w
    return compose(w, NEG());
  if (op == "sin")  // (x, w) -> cos(x)*w
    return compose(pair_map(compose(x, COS()), w), MUL());
  if (op == "cos")  // (x, w) -> -sin(x)*w
    return compose(pair_map(compose(compose(x, SIN()), NEG()), w), MUL());
  if (op == "exp")  // (x, w) -> exp(x)*w
    return compose(pair_map(compose(x, EXP()), w), MUL());
  if (op == "recip") {
    // (x, w) -> -recip(x*x)*w   (defined iff x != 0)
    PMapPtr xx = compose(pair_map(x, x), MUL());
    PMapPtr t = compose(xx, RECIP());
    return compose(compose(pair_map(t, w), MUL()), NEG());
  }
  if (op == "sqrtp") {
    // (x, w) -> recip(sqrtp(x) + sqrtp(x)) * w   (defined iff x > 0)
    PMapPtr s = compose(x, SQRTP());
    PMapPtr denom_inv = compose(add_maps(s, s), RECIP());
    return compose(pair_map(denom_inv, w), MUL());
  }
  throw std::logic_error("base_reverse_graph: unknown op " + op);
}

}  // namespace detail

// Table with the base operations and their reverse maps closed up to
// max_depth nested reverse derivatives.
inline PrimTable default_prim_table(int max_depth = 3) {
  PrimTable t;
  const std::vector<std::string> bases = {"mul",   "neg",   "sin",  "cos",
                                          "exp",   "recip", "sqrtp"};

  auto reg_base = [&](const std::string& name, int dom,
                      std::function<EvalResult(const std::vector<double>&)> f) {
    PrimDef d;
    d.dom = dom;
    d.cod = 1;
    d.eval = std::move(f);
    if (max_depth >= 1) d.reverse_name = reverse_op_name(name, 1);
    t.defs[name] = std::move(d);
  };

  using V = std::vector<double>;
  reg_base("mul", 2, [](const V& v) -> EvalResult { return V{v[0] * v[1]}; });
  reg_base("neg", 1, [](const V& v) -> EvalResult { return V{-v[0]}; });
  reg_base("sin", 1, [](const V& v) -> EvalResult { return V{std::sin(v[0])}; });
  reg_base("cos", 1, [](const V& v) -> EvalResult { return V{std::cos(v[0])}; });
  reg_base("exp", 1, [](const V& v) -> EvalResult { return V{std::exp(v[0])}; });
  reg_base("recip", 1, [](const V& v) -> EvalResult {
    if (v[0] == 0.0) return std::nullopt;
    return V{1.0 / v[0]};
  });
  reg_base("sqrtp", 1, [](const V& v) -> EvalResult {
    if (!(v[0] > 0.0)) return std::nullopt;
    return V{std::sqrt(v[0])};
  });

  // guard witnesses: partial maps into the empty product
  {
    PrimDef d;
    d.dom = 1;
    d.cod = 0;
    d.eval = [](const V& v) -> EvalResult {
      if (v[0] > 0.0) return V{};
      return std::nullopt;
    };
    t.defs["gt0_T"] = d;
    d.eval = [](const V& v) -> EvalResult {
      if (v[0] < 0.0) return V{};
      return std::nullopt;
    };
    t.defs["gt0_F"] = std::move(d);
  }

  // Close under the reverse derivative: level k+1 is the structural reverse
  // of the level-k defining graph.  Levels are registered breadth-first
  // because one operation's reverse graph may mention another's (sin's
  // mentions cos), so every level-k entry must exist before any level-k+1
  // graph is derived.
  std::map<std::string, PMapPtr> cur;
  for (int k = 1; k <= max_depth; ++k) {
    for (const auto& base : bases) {
      PMapPtr g = (k == 1) ? detail::base_reverse_graph(base)
                           : reverse_derivative(t, cur[base]);
      cur[base] = g;
      PrimDef d;
      d.dom = g->dom;
      d.cod = g->cod;
      d.graph = g;
      if (k < max_depth) d.reverse_name = reverse_op_name(base, k + 1);
      t.defs[reverse_op_name(base, k)] = std::move(d);
    }
  }
  return t;
}

}  // namespace sdpl
