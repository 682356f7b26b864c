#pragma once
// sdpl/typing.hpp
//
// Bidirectional-free type synthesis: every binder is ascribed, so types
// are computed bottom-up. Contexts are ordered; the rightmost binding of
// a name shadows earlier ones.
//
// The while rule: guard and body are checked in the singleton context of
// the loop variable (the rightmost context entry), but the loop itself may
// appear under a longer ambient context — it simply cannot read anything
// except its loop variable. letrec bodies are closed up to their own
// parameter.

#include <string>
#include <utility>
#include <vector>

#include "sdpl/syntax.hpp"

namespace sdpl {

using Context = std::vector<std::pair<std::string, Ty>>;

struct FunSig {
  Ty dom = Ty::real();
  Ty cod = Ty::real();
};
using FunContext = std::vector<std::pair<std::string, FunSig>>;

enum class TypeErrorKind {
  UnboundVariable,
  UnboundFunction,
  ArityMismatch,
  TypeMismatch,
  WhileContextViolation,
  RecBodyFreeVarViolation,
  UnknownOp,
  UnknownPred,
};

class TypeError : public std::runtime_error {
public:
  TypeError(TypeErrorKind k, std::string msg, Span sp = {}, std::string expected = "",
            std::string actual = "", std::string name = "")
      : std::runtime_error(format(msg, sp)),
        kind(k),
        span(sp),
        expected(std::move(expected)),
        actual(std::move(actual)),
        name(std::move(name)) {}

  TypeErrorKind kind;
  Span span;
  std::string expected, actual, name;

private:
  static std::string format(const std::string& msg, Span sp) {
    if (sp.line == 0) return msg;
    return std::to_string(sp.line) + ":" + std::to_string(sp.col) + ": " + msg;
  }
};

namespace detail {
inline const Ty* ctx_lookup(const Context& ctx, const std::string& x) {
  for (auto it = ctx.rbegin(); it != ctx.rend(); ++it)
    if (it->first == x) return &it->second;
  return nullptr;
}
inline const FunSig* fun_lookup(const FunContext& fns, const std::string& f) {
  for (auto it = fns.rbegin(); it != fns.rend(); ++it)
    if (it->first == f) return &it->second;
  return nullptr;
}
}  // namespace detail

inline Ty type_of(const Signature& sig, const FunContext& fns, const Context& ctx,
                  const TermPtr& t);

inline void check_bool(const Signature& sig, const FunContext& fns, const Context& ctx,
                       const BoolTerm& b, Span sp = {}) {
  if (b.kind != BoolTerm::Kind::Pred) return;
  auto it = sig.preds.find(b.pred);
  if (it == sig.preds.end())
    throw TypeError(TypeErrorKind::UnknownPred, "unknown predicate '" + b.pred + "'",
                    b.arg ? b.arg->span : sp, "", "", b.pred);
  Ty arg_ty = type_of(sig, fns, ctx, b.arg);
  if (!(arg_ty == it->second))
    throw TypeError(TypeErrorKind::TypeMismatch,
                    "predicate '" + b.pred + "' expects " + it->second.str() +
                        " but got " + arg_ty.str(),
                    b.arg->span, it->second.str(), arg_ty.str());
}

inline Ty type_of(const Signature& sig, const FunContext& fns, const Context& ctx,
                  const TermPtr& t) {
  if (!t) throw std::logic_error("type_of: null term");

  if (auto* v = as<Var>(t)) {
    if (const Ty* ty = detail::ctx_lookup(ctx, v->name)) return *ty;
    throw TypeError(TypeErrorKind::UnboundVariable,
                    "unbound variable '" + v->name + "'", t->span, "", "", v->name);
  }
  if (as<Const>(t)) return Ty::real();
  if (as<Star>(t)) return Ty::unit();
  if (auto* a = as<Add>(t)) {
    Ty lt = type_of(sig, fns, ctx, a->lhs);
    Ty rt = type_of(sig, fns, ctx, a->rhs);
    if (!lt.is_real())
      throw TypeError(TypeErrorKind::TypeMismatch, "+ expects real operands, got " +
                      lt.str(), a->lhs->span, "real", lt.str());
    if (!rt.is_real())
      throw TypeError(TypeErrorKind::TypeMismatch, "+ expects real operands, got " +
                      rt.str(), a->rhs->span, "real", rt.str());
    return Ty::real();
  }
  if (auto* o = as<PrimApp>(t)) {
    if (!sig.is_op(o->op))
      throw TypeError(TypeErrorKind::UnknownOp, "unknown operation '" + o->op + "'",
                      t->span, "", "", o->op);
    const OpSig& os = sig.op(o->op);
    Ty at = type_of(sig, fns, ctx, o->arg);
    if (!(at == os.dom))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "operation '" + o->op + "' expects " + os.dom.str() +
                          " but got " + at.str(),
                      o->arg->span, os.dom.str(), at.str());
    return os.cod;
  }
  if (auto* l = as<Let>(t)) {
    Ty bt = type_of(sig, fns, ctx, l->bound);
    if (!(bt == l->ty))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "let binding for '" + l->var + "' is ascribed " + l->ty.str() +
                          " but the bound term has type " + bt.str(),
                      l->bound->span, l->ty.str(), bt.str());
    Context ext = ctx;
    ext.emplace_back(l->var, l->ty);
    return type_of(sig, fns, ext, l->body);
  }
  if (auto* p = as<PairT>(t)) {
    Ty ft = type_of(sig, fns, ctx, p->first);
    Ty st = type_of(sig, fns, ctx, p->second);
    return Ty::prod(ft, st);
  }
  if (auto* f = as<Fst>(t)) {
    Ty at = type_of(sig, fns, ctx, f->arg);
    if (!at.is_prod())
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "fst expects a product, got " + at.str(), f->arg->span,
                      "_ * _", at.str());
    return at.left();
  }
  if (auto* s = as<Snd>(t)) {
    Ty at = type_of(sig, fns, ctx, s->arg);
    if (!at.is_prod())
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "snd expects a product, got " + at.str(), s->arg->span,
                      "_ * _", at.str());
    return at.right();
  }
  if (auto* i = as<If>(t)) {
    check_bool(sig, fns, ctx, i->guard, t->span);
    Ty tt = type_of(sig, fns, ctx, i->then_br);
    Ty et = type_of(sig, fns, ctx, i->else_br);
    if (!(tt == et))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "if branches have different types: " + tt.str() + " vs " +
                          et.str(),
                      t->span, tt.str(), et.str());
    return tt;
  }
  if (auto* w = as<While>(t)) {
    if (ctx.empty())
      throw TypeError(TypeErrorKind::WhileContextViolation,
                      "while needs a loop variable in context", t->span);
    const auto& [pname, pty] = ctx.back();
    Context loop_ctx{{pname, pty}};
    try {
      check_bool(sig, fns, loop_ctx, w->guard, t->span);
      Ty bt = type_of(sig, fns, loop_ctx, w->body);
      if (!(bt == pty))
        throw TypeError(TypeErrorKind::TypeMismatch,
                        "while body must have the loop variable's type " + pty.str() +
                            " but has " + bt.str(),
                        w->body->span, pty.str(), bt.str());
    } catch (const TypeError& e) {
      // A variable that is visible outside but not to the loop: report it
      // as a context violation rather than a spurious unbound-variable.
      if (e.kind == TypeErrorKind::UnboundVariable &&
          detail::ctx_lookup(ctx, e.name) != nullptr)
        throw TypeError(TypeErrorKind::WhileContextViolation,
                        "while guard/body may only reference the loop variable '" +
                            pname + "' (found '" + e.name + "')",
                        e.span, "", "", e.name);
      throw;
    }
    return pty;
  }
  if (auto* r = as<Rd>(t)) {
    Context ext = ctx;
    ext.emplace_back(r->var, r->var_ty);
    Ty body_ty = type_of(sig, fns, ext, r->body);
    Ty point_ty = type_of(sig, fns, ctx, r->point);
    if (!(point_ty == r->var_ty))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "rd point must have the bound variable's type " +
                          r->var_ty.str() + " but has " + point_ty.str(),
                      r->point->span, r->var_ty.str(), point_ty.str());
    Ty seed_ty = type_of(sig, fns, ctx, r->seed);
    if (!(seed_ty == body_ty))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "rd seed must have the body's type " + body_ty.str() +
                          " but has " + seed_ty.str(),
                      r->seed->span, body_ty.str(), seed_ty.str());
    return r->var_ty;
  }
  if (auto* c = as<FunCall>(t)) {
    const FunSig* fs = detail::fun_lookup(fns, c->fun);
    if (!fs)
      throw TypeError(TypeErrorKind::UnboundFunction,
                      "unbound function '" + c->fun + "'", t->span, "", "", c->fun);
    Ty at = type_of(sig, fns, ctx, c->arg);
    if (!(at == fs->dom))
      throw TypeError(TypeErrorKind::ArityMismatch,
                      "function '" + c->fun + "' expects " + fs->dom.str() +
                          " but got " + at.str(),
                      c->arg->span, fs->dom.str(), at.str());
    return fs->cod;
  }
  if (auto* lr = as<LetRec>(t)) {
    for (const std::string& fv : free_vars(lr->body))
      if (fv != lr->param)
        throw TypeError(TypeErrorKind::RecBodyFreeVarViolation,
                        "letrec body of '" + lr->fun +
                            "' may only reference its parameter '" + lr->param +
                            "' (found '" + fv + "')",
                        lr->body->span, "", "", fv);
    FunContext ext_fns = fns;
    ext_fns.emplace_back(lr->fun, FunSig{lr->param_ty, lr->ret_ty});
    Context body_ctx{{lr->param, lr->param_ty}};
    Ty bt = type_of(sig, ext_fns, body_ctx, lr->body);
    if (!(bt == lr->ret_ty))
      throw TypeError(TypeErrorKind::TypeMismatch,
                      "letrec body of '" + lr->fun + "' is declared " +
                          lr->ret_ty.str() + " but has type " + bt.str(),
                      lr->body->span, lr->ret_ty.str(), bt.str());
    return type_of(sig, ext_fns, ctx, lr->cont);
  }
  throw std::logic_error("type_of: unhandled term node");
}

// convenience for terms with no function bindings in scope
inline Ty type_of(const Signature& sig, const Context& ctx, const TermPtr& t) {
  return type_of(sig, FunContext{}, ctx, t);
}

}  // namespace sdpl
