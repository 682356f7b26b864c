#pragma once
// sdpl/interp.hpp
//
// Denotational semantics: compile a typed term into a partial-map graph.
//
// A context (x1 : T1, ..., xk : Tk) denotes the product of its entry
// dimensions, concatenated left to right; a term Gamma |- m : T denotes a
// partial map  dims(Gamma) -> dims(T).
//
// Loops and recursion are interpreted as suprema of finite approximation
// chains, cut off at a caller-supplied fuel: a while loop becomes the join
// of its "exactly i iterations, then the guard fails" members for
// i = 0..fuel, and letrec interprets the function as the fuel-th Kleene
// iterate starting from the nowhere-defined map.

#include <string>
#include <utility>
#include <vector>

#include "pmap.hpp"
#include "prims.hpp"
#include "syntax.hpp"
#include "typing.hpp"

namespace sdpl {

struct Interp {
  Signature sig;
  PrimTable table;
  int carrier = 1;  // dimension of the interpretation of `real`
};

inline Interp default_interp(int depth = 3) {
  return Interp{default_signature(depth), default_prim_table(depth), 1};
}

inline int ty_dims(const Interp& I, const Ty& t) {
  switch (t.kind()) {
    case Ty::Kind::Real: return I.carrier;
    case Ty::Kind::Unit: return 0;
    case Ty::Kind::Prod: return ty_dims(I, t.left()) + ty_dims(I, t.right());
  }
  return 0;
}

inline int ctx_dims(const Interp& I, const Context& ctx) {
  int n = 0;
  for (const auto& [name, ty] : ctx) n += ty_dims(I, ty);
  return n;
}

// A function name bound to both its type and its denotation.
struct FunDen {
  std::string name;
  FunSig sig;
  PMapPtr den;
};

namespace detail {

inline FunContext fun_types(const std::vector<FunDen>& funs) {
  FunContext f;
  f.reserve(funs.size());
  for (const auto& fd : funs) f.emplace_back(fd.name, fd.sig);
  return f;
}

inline const PMapPtr& fun_den(const std::vector<FunDen>& funs, const std::string& n) {
  for (auto it = funs.rbegin(); it != funs.rend(); ++it)
    if (it->name == n) return it->den;
  throw std::logic_error("denote: unbound function " + n);
}

}  // namespace detail

// Denotation of a primitive operation as a map between flattened types.
inline PMapPtr op_den(const Interp& I, const std::string& op) {
  return prim(I.table, op);
}

// Denotation of a predicate as its (true-witness, false-witness) pair of
// maps into the empty product.
inline std::pair<PMapPtr, PMapPtr> pred_den(const Interp& I, const std::string& p) {
  const Ty& dom = [&]() -> const Ty& {
    auto it = I.sig.preds.find(p);
    if (it == I.sig.preds.end())
      throw std::logic_error("denote: unknown predicate " + p);
    return it->second;
  }();
  int d = ty_dims(I, dom);
  return {prim_node(p + "_T", d, 0), prim_node(p + "_F", d, 0)};
}

inline PMapPtr denote(const Interp& I, const Context& ctx, const TermPtr& m,
                      int fuel, const std::vector<FunDen>& funs = {});

// (true-branch restriction witness, false-branch restriction witness),
// both maps dims(ctx) -> 0.
inline std::pair<PMapPtr, PMapPtr> denote_bool(const Interp& I, const Context& ctx,
                                               const BoolTerm& b, int fuel,
                                               const std::vector<FunDen>& funs = {}) {
  int n = ctx_dims(I, ctx);
  switch (b.kind) {
    case BoolTerm::Kind::True:
      return {bang(n), empty_map(n, 0)};
    case BoolTerm::Kind::False:
      return {empty_map(n, 0), bang(n)};
    case BoolTerm::Kind::Pred: {
      PMapPtr argm = denote(I, ctx, b.arg, fuel, funs);
      auto [pT, pF] = pred_den(I, b.pred);
      return {compose(argm, pT), compose(argm, pF)};
    }
  }
  throw std::logic_error("denote_bool: unhandled kind");
}

// fuel-th Kleene iterate of `step` starting from the nowhere-defined map.
inline PMapPtr kleene_fix(int dom, int cod,
                          const std::function<PMapPtr(PMapPtr)>& step, int fuel) {
  PMapPtr f = empty_map(dom, cod);
  for (int i = 0; i < fuel; ++i) f = step(f);
  return f;
}

inline PMapPtr denote(const Interp& I, const Context& ctx, const TermPtr& m,
                      int fuel, const std::vector<FunDen>& funs) {
  const int n = ctx_dims(I, ctx);

  if (auto* v = as<Var>(m)) {
    // rightmost binding of the name; project out its coordinate block
    int off = 0, width = -1;
    int cursor = 0;
    for (const auto& [name, ty] : ctx) {
      int w = ty_dims(I, ty);
      if (name == v->name) {
        off = cursor;
        width = w;
      }
      cursor += w;
    }
    if (width < 0) throw std::logic_error("denote: unbound variable " + v->name);
    return slice(n, off, width);
  }
  if (auto* c = as<Const>(m)) {
    return compose(bang(n), const_point({c->value}));
  }
  if (auto* a = as<Add>(m)) {
    return add_maps(denote(I, ctx, a->lhs, fuel, funs),
                    denote(I, ctx, a->rhs, fuel, funs));
  }
  if (auto* o = as<PrimApp>(m)) {
    return compose(denote(I, ctx, o->arg, fuel, funs), op_den(I, o->op));
  }
  if (auto* l = as<Let>(m)) {
    PMapPtr bound = denote(I, ctx, l->bound, fuel, funs);
    Context ctx2 = ctx;
    ctx2.emplace_back(l->var, l->ty);
    PMapPtr body = denote(I, ctx2, l->body, fuel, funs);
    return compose(pair_map(identity(n), bound), body);
  }
  if (as<Star>(m)) {
    return bang(n);
  }
  if (auto* p = as<PairT>(m)) {
    return pair_map(denote(I, ctx, p->first, fuel, funs),
                    denote(I, ctx, p->second, fuel, funs));
  }
  if (auto* f = as<Fst>(m)) {
    Ty t = type_of(I.sig, detail::fun_types(funs), ctx, f->arg);
    if (!t.is_prod()) throw std::logic_error("denote: fst of non-product");
    return compose(denote(I, ctx, f->arg, fuel, funs),
                   proj0(ty_dims(I, t.left()), ty_dims(I, t.right())));
  }
  if (auto* s = as<Snd>(m)) {
    Ty t = type_of(I.sig, detail::fun_types(funs), ctx, s->arg);
    if (!t.is_prod()) throw std::logic_error("denote: snd of non-product");
    return compose(denote(I, ctx, s->arg, fuel, funs),
                   proj1(ty_dims(I, t.left()), ty_dims(I, t.right())));
  }
  if (auto* i = as<If>(m)) {
    auto [bT, bF] = denote_bool(I, ctx, i->guard, fuel, funs);
    PMapPtr thenm = compose(restrict_map(bT), denote(I, ctx, i->then_br, fuel, funs));
    PMapPtr elsem = compose(restrict_map(bF), denote(I, ctx, i->else_br, fuel, funs));
    return join({thenm, elsem});
  }
  if (auto* w = as<While>(m)) {
    if (ctx.empty()) throw std::logic_error("denote: while with empty context");
    // the loop reads and writes only the rightmost variable; guard and body
    // are interpreted in that singleton context
    Context loop_ctx{ctx.back()};
    const int u = ty_dims(I, ctx.back().second);
    auto [bT, bF] = denote_bool(I, loop_ctx, w->guard, fuel, funs);
    PMapPtr step = compose(restrict_map(bT), denote(I, loop_ctx, w->body, fuel, funs));
    // member i: run the body exactly i times, then require the guard false
    std::vector<PMapPtr> members;
    members.reserve(static_cast<size_t>(fuel) + 1);
    PMapPtr cur = restrict_map(bF);
    members.push_back(cur);
    for (int i = 0; i < fuel; ++i) {
      cur = compose(step, cur);
      members.push_back(cur);
    }
    PMapPtr loop = join(std::move(members));
    if (n == u && ctx.size() == 1) return loop;
    return compose(proj1(n - u, u), loop);
  }
  if (auto* r = as<Rd>(m)) {
    Context ctx2 = ctx;
    ctx2.emplace_back(r->var, r->var_ty);
    const int u = ty_dims(I, r->var_ty);
    PMapPtr f = denote(I, ctx2, r->body, fuel, funs);      // n+u -> t
    PMapPtr rf = reverse_derivative(I.table, f);           // (n+u)+t -> n+u
    PMapPtr at = pair_map(identity(n), denote(I, ctx, r->point, fuel, funs));
    PMapPtr seed = denote(I, ctx, r->seed, fuel, funs);    // n -> t
    return compose(compose(pair_map(at, seed), rf), proj1(n, u));
  }
  if (auto* c = as<FunCall>(m)) {
    return compose(denote(I, ctx, c->arg, fuel, funs),
                   detail::fun_den(funs, c->fun));
  }
  if (auto* lr = as<LetRec>(m)) {
    const int a = ty_dims(I, lr->param_ty);
    const int b = ty_dims(I, lr->ret_ty);
    Context body_ctx{{lr->param, lr->param_ty}};
    FunSig fsig{lr->param_ty, lr->ret_ty};
    auto step = [&](PMapPtr approx) {
      std::vector<FunDen> funs2 = funs;
      funs2.push_back({lr->fun, fsig, std::move(approx)});
      return denote(I, body_ctx, lr->body, fuel, funs2);
    };
    PMapPtr fixed = kleene_fix(a, b, step, fuel);
    std::vector<FunDen> funs2 = funs;
    funs2.push_back({lr->fun, fsig, std::move(fixed)});
    return denote(I, ctx, lr->cont, fuel, funs2);
  }
  throw std::logic_error("denote: unhandled term node");
}

}  // namespace sdpl
