#pragma once
// sdpl/gen.hpp
//
// Seeded random generators used by the property suites: partial-map graphs
// with constrained dimensions, trace terms of a given type, and numeric
// sample points (optionally avoiding guard boundaries, which for this
// signature all sit on integer coordinates of the form tested by gt0).

#include <random>
#include <string>
#include <vector>

#include "pmap.hpp"
#include "syntax.hpp"
#include "typing.hpp"

namespace sdpl {

using Rng = std::mt19937_64;

inline double sample_uniform(Rng& rng, double lo = -3.0, double hi = 3.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<double> sample_point(Rng& rng, int n, double lo = -3.0,
                                        double hi = 3.0) {
  std::vector<double> p(static_cast<size_t>(n));
  for (double& d : p) d = sample_uniform(rng, lo, hi);
  return p;
}

// sample avoiding a margin around integer coordinates (guard boundaries)
inline std::vector<double> sample_point_off_boundary(Rng& rng, int n,
                                                     double lo = -3.0,
                                                     double hi = 3.0,
                                                     double margin = 1e-3) {
  std::vector<double> p(static_cast<size_t>(n));
  for (double& d : p) {
    for (int tries = 0; tries < 1000; ++tries) {
      double c = sample_uniform(rng, lo, hi);
      if (std::fabs(c - std::round(c)) > margin) {
        d = c;
        break;
      }
    }
  }
  return p;
}

inline std::vector<std::vector<double>> sample_points(Rng& rng, int count, int n,
                                                      double lo = -3.0,
                                                      double hi = 3.0) {
  std::vector<std::vector<double>> ps;
  ps.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) ps.push_back(sample_point(rng, n, lo, hi));
  return ps;
}

// ------------------------------------------------------- random map graphs

namespace detail {

inline int pick(Rng& rng, int lo, int hi) {  // inclusive
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// a leaf map dom -> cod built from projections/injections/zeros/constants
inline PMapPtr gen_leaf(Rng& rng, int dom, int cod) {
  std::vector<int> choices;
  choices.push_back(0);  // zero
  if (dom == cod) choices.push_back(1);
  if (cod <= dom && cod > 0) choices.push_back(2);  // slice
  if (dom == 0) choices.push_back(3);               // const point
  if (cod == 0) choices.push_back(4);               // bang
  if (cod >= dom && dom > 0) choices.push_back(5);  // zero-padded injection
  switch (choices[static_cast<size_t>(pick(rng, 0, (int)choices.size() - 1))]) {
    case 1: return identity(dom);
    case 2: return slice(dom, pick(rng, 0, dom - cod), cod);
    case 3: {
      std::vector<double> v(static_cast<size_t>(cod));
      for (double& d : v) d = sample_uniform(rng);
      return const_point(std::move(v));
    }
    case 4: return bang(dom);
    case 5: {
      PMapPtr inj = inj0(dom, cod - dom);
      return compose(inj, identity(cod));
    }
    default: return zero_map(dom, cod);
  }
}

inline PMapPtr gen_map_rec(Rng& rng, const PrimTable& table,
                           const std::vector<std::string>& prim_names, int dom,
                           int cod, int depth) {
  if (depth <= 0) return gen_leaf(rng, dom, cod);
  switch (pick(rng, 0, 7)) {
    case 0: {  // compose through a random middle dimension
      int mid = pick(rng, 0, 3);
      return compose(gen_map_rec(rng, table, prim_names, dom, mid, depth - 1),
                     gen_map_rec(rng, table, prim_names, mid, cod, depth - 1));
    }
    case 1: {  // pair splits the codomain
      if (cod < 1) break;
      int c1 = pick(rng, 0, cod);
      return pair_map(gen_map_rec(rng, table, prim_names, dom, c1, depth - 1),
                      gen_map_rec(rng, table, prim_names, dom, cod - c1, depth - 1));
    }
    case 2:  // pointwise sum
      return add_maps(gen_map_rec(rng, table, prim_names, dom, cod, depth - 1),
                      gen_map_rec(rng, table, prim_names, dom, cod, depth - 1));
    case 3: {  // domain restriction by a partial probe
      PMapPtr probe = gen_map_rec(rng, table, prim_names, dom, 1, depth - 1);
      PMapPtr guarded = restrict_map(compose(probe, prim(table, "sqrtp")));
      return compose(guarded, gen_map_rec(rng, table, prim_names, dom, cod, depth - 1));
    }
    case 4: {  // join of two branches restricted to disjoint half-spaces
      if (dom < 1) break;
      PMapPtr c = coord(dom, pick(rng, 0, dom - 1));
      PMapPtr gT = restrict_map(compose(c, prim_node("gt0_T", 1, 0)));
      PMapPtr gF = restrict_map(compose(c, prim_node("gt0_F", 1, 0)));
      return join({compose(gT, gen_map_rec(rng, table, prim_names, dom, cod, depth - 1)),
                   compose(gF, gen_map_rec(rng, table, prim_names, dom, cod, depth - 1))});
    }
    case 5: {  // a primitive, adapted to the requested dimensions
      const std::string& name =
          prim_names[static_cast<size_t>(pick(rng, 0, (int)prim_names.size() - 1))];
      const PrimDef& d = table.at(name);
      PMapPtr in = gen_map_rec(rng, table, prim_names, dom, d.dom, depth - 1);
      PMapPtr out = gen_map_rec(rng, table, prim_names, d.cod, cod, depth - 1);
      return compose(compose(in, prim_node(name, d.dom, d.cod)), out);
    }
    default:
      break;
  }
  return gen_leaf(rng, dom, cod);
}

}  // namespace detail

// Random partial map dom -> cod. `with_prims` selects whether primitive
// operations may appear (structural-only maps survive arbitrarily many
// nested reverse derivatives).
inline PMapPtr gen_map(Rng& rng, const PrimTable& table, int dom, int cod,
                       int depth, bool with_prims = true) {
  static const std::vector<std::string> all = {"mul", "neg",   "sin",  "cos",
                                               "exp", "recip", "sqrtp"};
  static const std::vector<std::string> none = {};
  return detail::gen_map_rec(rng, table, with_prims ? all : none, dom, cod, depth);
}

// ------------------------------------------------------ random trace terms

namespace detail {

inline Ty gen_small_ty(Rng& rng, int max_nest = 1) {
  int r = pick(rng, 0, max_nest > 0 ? 3 : 2);
  switch (r) {
    case 0: case 1: return Ty::real();
    case 2: return Ty::unit();
    default:
      return Ty::prod(gen_small_ty(rng, max_nest - 1), gen_small_ty(rng, max_nest - 1));
  }
}

inline TermPtr gen_trace_rec(Rng& rng, const Signature& sig, Context& ctx,
                             FreshNames& fresh, const Ty& ty, int depth);

inline TermPtr gen_trace_leaf(Rng& rng, Context& ctx, const Ty& ty) {
  std::vector<const std::string*> candidates;
  for (const auto& [n, t] : ctx)
    if (t == ty) candidates.push_back(&n);
  if (!candidates.empty() && pick(rng, 0, 2) != 0)
    return t_var(*candidates[static_cast<size_t>(
        pick(rng, 0, (int)candidates.size() - 1))]);
  if (ty.is_real())
    return pick(rng, 0, 3) == 0 ? t_const(0.0)
                                : t_const(sample_uniform(rng, -2.0, 2.0));
  if (ty.is_unit()) return t_star();
  return zero_term(ty);
}

inline TermPtr gen_trace_rec(Rng& rng, const Signature& sig, Context& ctx,
                             FreshNames& fresh, const Ty& ty, int depth) {
  if (depth <= 0) return gen_trace_leaf(rng, ctx, ty);
  int r = pick(rng, 0, 9);
  // let: any type
  if (r <= 1) {
    Ty bty = gen_small_ty(rng);
    std::set<std::string> avoid;
    for (const auto& [n, t] : ctx) avoid.insert(n);
    std::string y = fresh.fresh("v", avoid);
    TermPtr bound = gen_trace_rec(rng, sig, ctx, fresh, bty, depth - 1);
    ctx.emplace_back(y, bty);
    TermPtr body = gen_trace_rec(rng, sig, ctx, fresh, ty, depth - 1);
    ctx.pop_back();
    return t_let(y, bty, bound, body);
  }
  // projections from a product extension
  if (r == 2) {
    Ty other = gen_small_ty(rng);
    bool left = pick(rng, 0, 1) == 0;
    Ty pt = left ? Ty::prod(ty, other) : Ty::prod(other, ty);
    TermPtr p = gen_trace_rec(rng, sig, ctx, fresh, pt, depth - 1);
    return left ? t_fst(p) : t_snd(p);
  }
  if (ty.is_real()) {
    if (r <= 5) {  // op application
      static const std::vector<std::string> ops = {"mul", "neg", "sin",  "cos",
                                                   "exp", "mul", "recip", "sqrtp"};
      const std::string& op =
          ops[static_cast<size_t>(pick(rng, 0, (int)ops.size() - 1))];
      const OpSig& os = sig.op(op);
      return t_op(op, gen_trace_rec(rng, sig, ctx, fresh, os.dom, depth - 1));
    }
    if (r <= 7)
      return t_add(gen_trace_rec(rng, sig, ctx, fresh, ty, depth - 1),
                   gen_trace_rec(rng, sig, ctx, fresh, ty, depth - 1));
    return gen_trace_leaf(rng, ctx, ty);
  }
  if (ty.is_prod() && r <= 7)
    return t_pair(gen_trace_rec(rng, sig, ctx, fresh, ty.left(), depth - 1),
                  gen_trace_rec(rng, sig, ctx, fresh, ty.right(), depth - 1));
  return gen_trace_leaf(rng, ctx, ty);
}

}  // namespace detail

// Random trace term of the given type over the given context.
inline TermPtr gen_trace_term(Rng& rng, const Signature& sig, const Context& ctx,
                              const Ty& ty, int depth, FreshNames& fresh) {
  Context scratch = ctx;
  return detail::gen_trace_rec(rng, sig, scratch, fresh, ty, depth);
}

inline Ty gen_ty(Rng& rng, int max_nest = 1) { return detail::gen_small_ty(rng, max_nest); }

}  // namespace sdpl
