#pragma once
// sdpl/symdiff.hpp
//
// Symbolic reverse-mode differentiation of trace terms (the control-free
// fragment: variables, constants, sums, operation applications, lets,
// unit, pairs, projections).
//
// rd_symbolic(w, x, m, a) produces a trace term denoting the reverse
// derivative of x |-> m at point a with output seed w.  Two rule sets are
// provided for the let case:
//
//   * Standard: differentiates `let y = d in e` by recursing into e twice
//     (once for x held through e directly, once through y) — simple, but
//     exponential on chains of lets;
//   * Optimized: when x does not occur free in e, the direct branch is a
//     zero and is skipped, collapsing the chain to a single recursion.
//
// The produced term never mentions rd; nested rd inputs are handled by
// expand_rd_fully, which rewrites innermost occurrences first.

#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "syntax.hpp"
#include "typing.hpp"

namespace sdpl {

enum class RdMode { Standard, Optimized };

struct RdStats {
  size_t calls = 0;         // number of recursive differentiation steps
  size_t output_nodes = 0;  // node count of the produced term
};

class NotATraceTerm : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MissingReverseOp : public std::runtime_error {
public:
  explicit MissingReverseOp(const std::string& op)
      : std::runtime_error("operation '" + op +
                           "' has no registered reverse form"),
        op_name(op) {}
  std::string op_name;
};

// total node count of a term, including guard arguments
inline size_t term_size(const TermPtr& t) {
  if (!t) return 0;
  size_t n = 1;
  if (auto* a = as<Add>(t)) n += term_size(a->lhs) + term_size(a->rhs);
  if (auto* o = as<PrimApp>(t)) n += term_size(o->arg);
  if (auto* l = as<Let>(t)) n += term_size(l->bound) + term_size(l->body);
  if (auto* p = as<PairT>(t)) n += term_size(p->first) + term_size(p->second);
  if (auto* f = as<Fst>(t)) n += term_size(f->arg);
  if (auto* s = as<Snd>(t)) n += term_size(s->arg);
  if (auto* i = as<If>(t))
    n += term_size(i->guard.arg) + term_size(i->then_br) + term_size(i->else_br);
  if (auto* w = as<While>(t)) n += term_size(w->guard.arg) + term_size(w->body);
  if (auto* r = as<Rd>(t))
    n += term_size(r->seed) + term_size(r->body) + term_size(r->point);
  if (auto* c = as<FunCall>(t)) n += term_size(c->arg);
  if (auto* lr = as<LetRec>(t)) n += term_size(lr->body) + term_size(lr->cont);
  return n;
}

namespace detail {

// type of m under ctx extended with (x : xty)
inline Ty type_of_ext(const Signature& sig, const Context& ctx,
                      const std::string& x, const Ty& xty, const TermPtr& m) {
  Context c2 = ctx;
  c2.emplace_back(x, xty);
  return type_of(sig, {}, c2, m);
}

struct RdCtx {
  const Signature& sig;
  RdMode mode;
  FreshNames& fresh;
  std::set<std::string> avoid;
  size_t calls = 0;
  const std::function<void()>* on_step = nullptr;

  std::string mk(const std::string& base) {
    std::string n = fresh.fresh(base, avoid);
    avoid.insert(n);
    return n;
  }
};

// Reverse derivative of x |-> m at point a with seed w, as a trace term.
// Invariants: x not free in w or a; ctx types w and a; ctx,(x:xty) types m.
inline TermPtr rd_sym(RdCtx& cx, const Context& ctx, const TermPtr& w,
                      const std::string& x, const Ty& xty, const TermPtr& m,
                      const TermPtr& a) {
  ++cx.calls;
  if (cx.on_step) (*cx.on_step)();

  if (auto* v = as<Var>(m))
    return v->name == x ? w : zero_term(xty);

  if (as<Const>(m) || as<Star>(m)) return zero_term(xty);

  if (auto* ad = as<Add>(m))
    return add_terms(xty, rd_sym(cx, ctx, w, x, xty, ad->lhs, a),
                     rd_sym(cx, ctx, w, x, xty, ad->rhs, a), cx.fresh);

  if (auto* o = as<PrimApp>(m)) {
    // let x = a in let t = op_R((arg, w)) in rd(t, x, arg, a)
    auto rev = cx.sig.reverse_of(o->op);
    if (!rev) throw MissingReverseOp(o->op);
    const OpSig& os = cx.sig.op(o->op);
    std::string t = cx.mk("t");
    Context c2 = ctx;
    c2.emplace_back(x, xty);
    c2.emplace_back(t, os.dom);
    TermPtr rec = rd_sym(cx, c2, t_var(t), x, xty, o->arg, a);
    return t_let(x, xty, a,
                 t_let(t, os.dom, t_op(*rev, t_pair(o->arg, w)), rec));
  }

  if (auto* l = as<Let>(m)) {
    // rename the bound variable if it would collide with x or capture a
    // free variable of the seed or the point
    std::string y = l->var;
    TermPtr e = l->body;
    {
      std::set<std::string> danger = free_vars(w);
      auto fa = free_vars(a);
      danger.insert(fa.begin(), fa.end());
      danger.insert(x);
      if (danger.count(y)) {
        std::string y2 = cx.mk(y);
        e = substitute(e, y, t_var(y2), &cx.fresh);
        y = y2;
      }
    }
    const Ty& A = l->ty;
    Context c_xy = ctx;
    c_xy.emplace_back(x, xty);
    c_xy.emplace_back(y, A);

    // seed pulled back through e as a function of y, then through d
    std::string t = cx.mk("t");
    TermPtr through_y = rd_sym(cx, c_xy, w, y, A, e, t_var(y));
    Context c_t = c_xy;
    c_t.emplace_back(t, A);
    TermPtr through_d = rd_sym(cx, c_t, t_var(t), x, xty, l->bound, a);
    TermPtr chained = t_let(t, A, through_y, through_d);

    if (cx.mode == RdMode::Optimized && free_vars(e).count(x) == 0) {
      // x only reaches the body through y; the direct branch is zero
      return t_let(x, xty, a, t_let(y, A, l->bound, chained));
    }
    TermPtr direct = rd_sym(cx, c_xy, w, x, xty, e, a);
    return t_let(x, xty, a,
                 t_let(y, A, l->bound, add_terms(xty, direct, chained, cx.fresh)));
  }

  if (auto* p = as<PairT>(m)) {
    // split the seed and pull each half back through its component
    Ty t1 = detail::type_of_ext(cx.sig, ctx, x, xty, p->first);
    Ty t2 = detail::type_of_ext(cx.sig, ctx, x, xty, p->second);
    std::string pn = cx.mk("p"), yn = cx.mk("y"), zn = cx.mk("z");
    Context c2 = ctx;
    c2.emplace_back(pn, Ty::prod(t1, t2));
    c2.emplace_back(yn, t1);
    c2.emplace_back(zn, t2);
    TermPtr r1 = rd_sym(cx, c2, t_var(yn), x, xty, p->first, a);
    TermPtr r2 = rd_sym(cx, c2, t_var(zn), x, xty, p->second, a);
    return t_let(pn, Ty::prod(t1, t2), w,
                 t_let(yn, t1, t_fst(t_var(pn)),
                       t_let(zn, t2, t_snd(t_var(pn)),
                             add_terms(xty, r1, r2, cx.fresh))));
  }

  if (auto* f = as<Fst>(m)) {
    Ty tp = type_of_ext(cx.sig, ctx, x, xty, f->arg);
    if (!tp.is_prod()) throw NotATraceTerm("fst of non-product in rd");
    return rd_sym(cx, ctx, t_pair(w, zero_term(tp.right())), x, xty, f->arg, a);
  }
  if (auto* s = as<Snd>(m)) {
    Ty tp = type_of_ext(cx.sig, ctx, x, xty, s->arg);
    if (!tp.is_prod()) throw NotATraceTerm("snd of non-product in rd");
    return rd_sym(cx, ctx, t_pair(zero_term(tp.left()), w), x, xty, s->arg, a);
  }

  throw NotATraceTerm("rd applied to a term outside the trace fragment");
}

}  // namespace detail

// `on_step`, when given, is invoked once per recursive differentiation step;
// an evaluator can make it tick its fuel budget so that runaway expansions
// (standard mode is exponential in let-depth) abort instead of exhausting
// memory.
inline TermPtr rd_symbolic(const Signature& sig, RdMode mode, const Context& ctx,
                           const TermPtr& w, const std::string& x, const Ty& xty,
                           const TermPtr& m, const TermPtr& a, FreshNames& fresh,
                           RdStats* stats = nullptr,
                           const std::function<void()>* on_step = nullptr) {
  detail::RdCtx cx{sig, mode, fresh, {}, 0, on_step};
  cx.avoid = all_names(m);
  auto add_all = [&cx](const std::set<std::string>& s) {
    cx.avoid.insert(s.begin(), s.end());
  };
  add_all(all_names(w));
  add_all(all_names(a));
  for (const auto& [n, t] : ctx) cx.avoid.insert(n);
  cx.avoid.insert(x);
  TermPtr out = detail::rd_sym(cx, ctx, w, x, xty, m, a);
  if (stats) {
    stats->calls = cx.calls;
    stats->output_nodes = term_size(out);
  }
  return out;
}

// Rewrite every rd node in m (innermost first) into its symbolic expansion.
// Seeds and points that are not syntactic values are let-bound first so the
// expansion never duplicates live computation.
inline TermPtr expand_rd_fully(const Signature& sig, RdMode mode,
                               const Context& ctx, const TermPtr& m,
                               FreshNames& fresh, RdStats* stats = nullptr,
                               const FunContext& funs = {}) {
  size_t total_calls = 0;

  std::function<TermPtr(const Context&, const FunContext&, const TermPtr&)> go =
      [&](const Context& c, const FunContext& fc, const TermPtr& t) -> TermPtr {
    if (!t) return t;
    if (as<Var>(t) || as<Const>(t) || as<Star>(t)) return t;
    if (auto* a = as<Add>(t))
      return t_add(go(c, fc, a->lhs), go(c, fc, a->rhs), t->span);
    if (auto* o = as<PrimApp>(t)) return t_op(o->op, go(c, fc, o->arg), t->span);
    if (auto* l = as<Let>(t)) {
      Context c2 = c;
      c2.emplace_back(l->var, l->ty);
      return t_let(l->var, l->ty, go(c, fc, l->bound), go(c2, fc, l->body),
                   t->span);
    }
    if (auto* p = as<PairT>(t))
      return t_pair(go(c, fc, p->first), go(c, fc, p->second), t->span);
    if (auto* f = as<Fst>(t)) return t_fst(go(c, fc, f->arg), t->span);
    if (auto* s = as<Snd>(t)) return t_snd(go(c, fc, s->arg), t->span);
    if (auto* i = as<If>(t)) {
      BoolTerm g = i->guard.kind == BoolTerm::Kind::Pred
                       ? b_pred(i->guard.pred, go(c, fc, i->guard.arg))
                       : i->guard;
      return t_if(g, go(c, fc, i->then_br), go(c, fc, i->else_br), t->span);
    }
    if (auto* wl = as<While>(t)) {
      if (c.empty()) return t;  // ill-typed anyway; leave untouched
      Context single{c.back()};
      BoolTerm g = wl->guard.kind == BoolTerm::Kind::Pred
                       ? b_pred(wl->guard.pred, go(single, fc, wl->guard.arg))
                       : wl->guard;
      return t_while(g, go(single, fc, wl->body), t->span);
    }
    if (auto* cl = as<FunCall>(t))
      return t_call(cl->fun, go(c, fc, cl->arg), t->span);
    if (auto* lr = as<LetRec>(t)) {
      Context body_ctx{{lr->param, lr->param_ty}};
      FunContext fc2 = fc;
      fc2.emplace_back(lr->fun, FunSig{lr->param_ty, lr->ret_ty});
      return t_letrec(lr->fun, lr->param, lr->param_ty, lr->ret_ty,
                      go(body_ctx, fc2, lr->body), go(c, fc2, lr->cont), t->span);
    }
    if (auto* r = as<Rd>(t)) {
      Context cx2 = c;
      cx2.emplace_back(r->var, r->var_ty);
      TermPtr body = go(cx2, fc, r->body);
      TermPtr seed = go(c, fc, r->seed);
      TermPtr point = go(c, fc, r->point);
      if (!is_trace_term(body))
        throw NotATraceTerm("rd body is outside the trace fragment");

      std::set<std::string> avoid = all_names(body);
      auto aw = all_names(seed), ap = all_names(point);
      avoid.insert(aw.begin(), aw.end());
      avoid.insert(ap.begin(), ap.end());
      for (const auto& [n, ty] : c) avoid.insert(n);
      avoid.insert(r->var);

      Context inner = c;
      TermPtr w_t = seed, a_t = point;
      std::optional<std::pair<std::string, Ty>> w_bind, a_bind;
      if (!is_value(seed)) {
        Ty wt = type_of(sig, fc, c, seed);
        std::string wn = fresh.fresh("w", avoid);
        avoid.insert(wn);
        w_bind = {wn, wt};
        inner.emplace_back(wn, wt);
        w_t = t_var(wn);
      }
      if (!is_value(point)) {
        std::string an = fresh.fresh("a", avoid);
        avoid.insert(an);
        a_bind = {an, r->var_ty};
        inner.emplace_back(an, r->var_ty);
        a_t = t_var(an);
      }
      RdStats local;
      TermPtr core = rd_symbolic(sig, mode, inner, w_t, r->var, r->var_ty, body,
                                 a_t, fresh, &local);
      total_calls += local.calls;
      if (a_bind) core = t_let(a_bind->first, a_bind->second, point, core);
      if (w_bind) core = t_let(w_bind->first, w_bind->second, seed, core);
      return core;
    }
    throw std::logic_error("expand_rd_fully: unhandled node");
  };

  TermPtr out = go(ctx, funs, m);
  if (stats) {
    stats->calls = total_calls;
    stats->output_nodes = term_size(out);
  }
  return out;
}

// -------------------------------------------------------- benchmark family

// n-deep doubling let-chain over the free variable x:
//   let y1 = x + x in let y2 = y1 + y1 in ... in yn        (value 2^n * x)
// Differentiating it in standard mode revisits the direct branch of every
// let, giving exponentially many recursive steps; optimized mode drops the
// branch whenever the let body does not mention the differentiation variable
// and stays linear.
inline TermPtr blowup_chain(int n) {
  auto name = [](int i) { return "y" + std::to_string(i); };
  TermPtr body = t_var(name(n));
  for (int i = n; i >= 1; --i) {
    TermPtr prev = i == 1 ? t_var("x") : t_var(name(i - 1));
    body = t_let(name(i), Ty::real(), t_add(prev, prev), body);
  }
  return body;
}

struct BlowupRow {
  int depth = 0;
  size_t standard_calls = 0, optimized_calls = 0;
  double standard_value = 0.0, optimized_value = 0.0;
};

// Differentiate the depth-n chain at `at` in both modes and count the
// recursive steps.  `eval_closed` evaluates the resulting closed derivative
// term to a scalar (supplied by the caller so this header stays independent
// of the evaluation strategy).
template <typename EvalClosed>
inline BlowupRow measure_blowup(const Signature& sig, int n, double at,
                                EvalClosed&& eval_closed) {
  BlowupRow row;
  row.depth = n;
  Context ctx;  // the chain's only free variable is bound by rd itself
  for (RdMode mode : {RdMode::Standard, RdMode::Optimized}) {
    FreshNames fresh;
    RdStats stats;
    TermPtr d = rd_symbolic(sig, mode, ctx, t_const(1.0), "x", Ty::real(),
                            blowup_chain(n), t_const(at), fresh, &stats);
    double val = eval_closed(d);
    if (mode == RdMode::Standard) {
      row.standard_calls = stats.calls;
      row.standard_value = val;
    } else {
      row.optimized_calls = stats.calls;
      row.optimized_value = val;
    }
  }
  return row;
}

}  // namespace sdpl
