#pragma once
// sdpl/transforms.hpp
//
// Source-to-source rewrites that push differentiation through control flow,
// plus a sampled-equivalence checker used to validate them.
//
//   * rd over if      -> if over rd (guard evaluated at the base point)
//   * fd over while   -> a single forward pass: loop over (value, tangent)
//                        pairs, stepping the tangent with the body's fd
//   * rd over while   -> the forward pass above, transposed by one rd
//                        taken with respect to the tangent argument
//
// transform_control_rd applies these rules outside-in until none fires,
// recursing into each replacement (bodies strictly shrink, so this
// terminates).

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "interp.hpp"
#include "syntax.hpp"
#include "typing.hpp"

namespace sdpl {

// rd over if: v.rd(x:U. if b then m else n)(a)
//   -> if b[let x=a] then v.rd(x:U. m)(a) else v.rd(x:U. n)(a)
inline std::optional<TermPtr> transform_if_rd_step(const TermPtr& t) {
  auto* r = as<Rd>(t);
  if (!r) return std::nullopt;
  auto* i = as<If>(r->body);
  if (!i) return std::nullopt;
  BoolTerm guard = i->guard;
  if (guard.kind == BoolTerm::Kind::Pred)
    guard = b_pred(guard.pred, t_let(r->var, r->var_ty, r->point, guard.arg));
  return t_if(guard,
              t_rd(r->seed, r->var, r->var_ty, i->then_br, r->point),
              t_rd(r->seed, r->var, r->var_ty, i->else_br, r->point), t->span);
}

namespace detail {

// The paired forward loop for `while b do f` over loop variable x : A —
// state w : A*A carries (value, tangent); each step applies the body to the
// value and the body's forward differential to the tangent.
struct FwdLoop {
  std::string w;
  BoolTerm guard;
  TermPtr body;
};

inline FwdLoop forward_loop(const While& wl, const std::string& x, const Ty& A,
                            FreshNames& fresh, std::set<std::string> avoid) {
  avoid.merge(all_names(wl.body));
  if (wl.guard.arg) avoid.merge(all_names(wl.guard.arg));
  avoid.insert(x);
  std::string w = fresh.fresh("w", avoid);
  avoid.insert(w);
  std::string dx = fresh.fresh("dx", avoid);
  avoid.insert(dx);
  std::string z = fresh.fresh("z", avoid);
  avoid.insert(z);

  TermPtr f_z = substitute(wl.body, x, t_var(z), &fresh);
  TermPtr step_tangent = fd_term(z, A, f_z, A, t_var(x), t_var(dx), fresh);
  TermPtr body = t_let(x, A, t_fst(t_var(w)),
                       t_let(dx, A, t_snd(t_var(w)),
                             t_pair(wl.body, step_tangent)));
  BoolTerm guard = wl.guard;
  if (guard.kind == BoolTerm::Kind::Pred)
    guard = b_pred(guard.pred, t_let(x, A, t_fst(t_var(w)), guard.arg));
  return {w, guard, body};
}

}  // namespace detail

// fd over while, matched in its two-rd desugared form
//   let z : A = v in z.rd(dy : A. dy.rd(x : A. while b do f)(a))(0_A)
//   -> let w : A*A = (a, v) in snd(while b' do f')
inline std::optional<TermPtr> transform_while_fd_step(const TermPtr& t,
                                                      FreshNames& fresh) {
  auto* l = as<Let>(t);
  if (!l) return std::nullopt;
  auto* outer = as<Rd>(l->body);
  if (!outer) return std::nullopt;
  auto* outer_seed = as<Var>(outer->seed);
  if (!outer_seed || outer_seed->name != l->var) return std::nullopt;
  auto* inner = as<Rd>(outer->body);
  if (!inner) return std::nullopt;
  auto* inner_seed = as<Var>(inner->seed);
  if (!inner_seed || inner_seed->name != outer->var) return std::nullopt;
  auto* wl = as<While>(inner->body);
  if (!wl) return std::nullopt;
  const Ty& A = inner->var_ty;
  if (!(l->ty == A) || !(outer->var_ty == A)) return std::nullopt;
  if (!alpha_eq(outer->point, zero_term(A))) return std::nullopt;

  std::set<std::string> avoid = all_names(inner->point);
  avoid.merge(all_names(l->bound));
  detail::FwdLoop fl = detail::forward_loop(*wl, inner->var, A, fresh, std::move(avoid));
  return t_let(fl.w, Ty::prod(A, A), t_pair(inner->point, l->bound),
               t_snd(t_while(fl.guard, fl.body)), t->span);
}

// rd over while: v.rd(x:A. while b do f)(a)
//   -> v.rd(dy:A. let w : A*A = (a, dy) in snd(while b' do f'))(0_A)
// — the forward pass of the loop, transposed with respect to the tangent.
inline std::optional<TermPtr> transform_while_rd_step(const TermPtr& t,
                                                      FreshNames& fresh) {
  auto* r = as<Rd>(t);
  if (!r) return std::nullopt;
  auto* wl = as<While>(r->body);
  if (!wl) return std::nullopt;
  const Ty& A = r->var_ty;

  detail::FwdLoop fl = detail::forward_loop(*wl, r->var, A, fresh, all_names(t));
  std::set<std::string> avoid = all_names(t);
  avoid.insert(fl.w);
  std::string dy = fresh.fresh("dy", avoid);
  TermPtr fwd = t_let(fl.w, Ty::prod(A, A), t_pair(r->point, t_var(dy)),
                      t_snd(t_while(fl.guard, fl.body)));
  return t_rd(r->seed, dy, A, fwd, zero_term(A), t->span);
}

// Apply all three rewrites everywhere, outside-in, until none applies.
inline TermPtr transform_control_rd(const TermPtr& t, FreshNames& fresh) {
  if (!t) return t;
  if (auto r = transform_while_fd_step(t, fresh))
    return transform_control_rd(*r, fresh);
  if (auto* rd = as<Rd>(t)) {
    if (as<If>(rd->body)) {
      auto r = transform_if_rd_step(t);
      return transform_control_rd(*r, fresh);
    }
    if (as<While>(rd->body)) {
      auto r = transform_while_rd_step(t, fresh);
      return transform_control_rd(*r, fresh);
    }
  }

  auto go = [&fresh](const TermPtr& s) { return transform_control_rd(s, fresh); };
  auto go_bool = [&](const BoolTerm& b) {
    return b.kind == BoolTerm::Kind::Pred ? b_pred(b.pred, go(b.arg)) : b;
  };
  if (as<Var>(t) || as<Const>(t) || as<Star>(t)) return t;
  if (auto* a = as<Add>(t)) return t_add(go(a->lhs), go(a->rhs), t->span);
  if (auto* o = as<PrimApp>(t)) return t_op(o->op, go(o->arg), t->span);
  if (auto* l = as<Let>(t))
    return t_let(l->var, l->ty, go(l->bound), go(l->body), t->span);
  if (auto* p = as<PairT>(t)) return t_pair(go(p->first), go(p->second), t->span);
  if (auto* f = as<Fst>(t)) return t_fst(go(f->arg), t->span);
  if (auto* s = as<Snd>(t)) return t_snd(go(s->arg), t->span);
  if (auto* i = as<If>(t))
    return t_if(go_bool(i->guard), go(i->then_br), go(i->else_br), t->span);
  if (auto* w = as<While>(t))
    return t_while(go_bool(w->guard), go(w->body), t->span);
  if (auto* r = as<Rd>(t))
    return t_rd(go(r->seed), r->var, r->var_ty, go(r->body), go(r->point), t->span);
  if (auto* c = as<FunCall>(t)) return t_call(c->fun, go(c->arg), t->span);
  if (auto* lr = as<LetRec>(t))
    return t_letrec(lr->fun, lr->param, lr->param_ty, lr->ret_ty, go(lr->body),
                    go(lr->cont), t->span);
  throw std::logic_error("transform_control_rd: unhandled node");
}

// Apply `step` at the outermost matching position (pre-order) and stop.
// Returns nullopt when no subterm matches.
inline std::optional<TermPtr> rewrite_first(
    const TermPtr& t,
    const std::function<std::optional<TermPtr>(const TermPtr&)>& step) {
  if (!t) return std::nullopt;
  if (auto r = step(t)) return r;

  auto one = [&step](const TermPtr& s) { return rewrite_first(s, step); };
  if (auto* a = as<Add>(t)) {
    if (auto r = one(a->lhs)) return t_add(*r, a->rhs, t->span);
    if (auto r = one(a->rhs)) return t_add(a->lhs, *r, t->span);
  } else if (auto* o = as<PrimApp>(t)) {
    if (auto r = one(o->arg)) return t_op(o->op, *r, t->span);
  } else if (auto* l = as<Let>(t)) {
    if (auto r = one(l->bound)) return t_let(l->var, l->ty, *r, l->body, t->span);
    if (auto r = one(l->body)) return t_let(l->var, l->ty, l->bound, *r, t->span);
  } else if (auto* p = as<PairT>(t)) {
    if (auto r = one(p->first)) return t_pair(*r, p->second, t->span);
    if (auto r = one(p->second)) return t_pair(p->first, *r, t->span);
  } else if (auto* f = as<Fst>(t)) {
    if (auto r = one(f->arg)) return t_fst(*r, t->span);
  } else if (auto* s = as<Snd>(t)) {
    if (auto r = one(s->arg)) return t_snd(*r, t->span);
  } else if (auto* i = as<If>(t)) {
    if (i->guard.kind == BoolTerm::Kind::Pred)
      if (auto r = one(i->guard.arg))
        return t_if(b_pred(i->guard.pred, *r), i->then_br, i->else_br, t->span);
    if (auto r = one(i->then_br)) return t_if(i->guard, *r, i->else_br, t->span);
    if (auto r = one(i->else_br)) return t_if(i->guard, i->then_br, *r, t->span);
  } else if (auto* w = as<While>(t)) {
    if (w->guard.kind == BoolTerm::Kind::Pred)
      if (auto r = one(w->guard.arg))
        return t_while(b_pred(w->guard.pred, *r), w->body, t->span);
    if (auto r = one(w->body)) return t_while(w->guard, *r, t->span);
  } else if (auto* r0 = as<Rd>(t)) {
    if (auto r = one(r0->seed))
      return t_rd(*r, r0->var, r0->var_ty, r0->body, r0->point, t->span);
    if (auto r = one(r0->body))
      return t_rd(r0->seed, r0->var, r0->var_ty, *r, r0->point, t->span);
    if (auto r = one(r0->point))
      return t_rd(r0->seed, r0->var, r0->var_ty, r0->body, *r, t->span);
  } else if (auto* c = as<FunCall>(t)) {
    if (auto r = one(c->arg)) return t_call(c->fun, *r, t->span);
  } else if (auto* lr = as<LetRec>(t)) {
    if (auto r = one(lr->body))
      return t_letrec(lr->fun, lr->param, lr->param_ty, lr->ret_ty, *r, lr->cont,
                      t->span);
    if (auto r = one(lr->cont))
      return t_letrec(lr->fun, lr->param, lr->param_ty, lr->ret_ty, lr->body, *r,
                      t->span);
  }
  return std::nullopt;
}

// fd with the body type synthesized from the context
inline TermPtr make_fd(const Signature& sig, const Context& ctx, const std::string& x,
                       const Ty& xty, const TermPtr& m, const TermPtr& a,
                       const TermPtr& v, FreshNames& fresh) {
  Context c2 = ctx;
  c2.emplace_back(x, xty);
  Ty mty = type_of(sig, {}, c2, m);
  return fd_term(x, xty, m, mty, a, v, fresh);
}

// --------------------------------------------------- sampled equivalence

struct TransformReport {
  bool pass = true;
  int samples = 0;                 // points where at least one side is defined
  double max_dev = 0.0;
  int definedness_mismatches = 0;
};

// Compare the denotations of two terms over the given sample points: both
// must be defined on the same points and agree within tol where defined.
inline TransformReport check_equivalence(const Interp& I, const Context& ctx,
                                         const TermPtr& t1, const TermPtr& t2,
                                         const std::vector<std::vector<double>>& points,
                                         double tol = 1e-9, int fuel = 32) {
  TransformReport rep;
  PMapPtr d1 = denote(I, ctx, t1, fuel);
  PMapPtr d2 = denote(I, ctx, t2, fuel);
  for (const auto& p : points) {
    EvalResult r1 = evaluate(I.table, d1, p);
    EvalResult r2 = evaluate(I.table, d2, p);
    if (r1.has_value() != r2.has_value()) {
      ++rep.definedness_mismatches;
      rep.pass = false;
      ++rep.samples;
      continue;
    }
    if (!r1) continue;
    ++rep.samples;
    for (size_t i = 0; i < r1->size(); ++i) {
      double dev = std::fabs((*r1)[i] - (*r2)[i]);
      if (dev > rep.max_dev) rep.max_dev = dev;
      if (!(dev <= tol)) rep.pass = false;
    }
  }
  return rep;
}

}  // namespace sdpl
