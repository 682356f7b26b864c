#pragma once
// sdpl/opsem.hpp
//
// Big-step operational semantics with a step budget, plus the symbolic
// tracing evaluator that eliminates control flow (if/while/letrec/function
// calls/rd) from a term, producing a straight-line trace term together with
// the numeric value it takes at the traced input.
//
// rd is executed by tracing its body symbolically — the bound variable
// stays a fresh symbol, every other variable is inlined as its current
// value — and then differentiating the trace with rd_symbolic.  Nested rd
// keeps its seed and point symbolic (let-bound when they are not already
// values), so differentiating an rd-containing trace again remains sound.

#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "interp.hpp"
#include "symdiff.hpp"
#include "syntax.hpp"
#include "typing.hpp"

namespace sdpl {

// ------------------------------------------------------------------ errors

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class OutOfFuel : public EvalError {
public:
  OutOfFuel() : EvalError("evaluation budget exhausted") {}
};

class StuckPredicate : public EvalError {
public:
  explicit StuckPredicate(const std::string& p)
      : EvalError("predicate '" + p + "' is undefined at this argument") {}
};

class UndefinedPrimitive : public EvalError {
public:
  explicit UndefinedPrimitive(const std::string& op)
      : EvalError("operation '" + op + "' is undefined at this argument") {}
};

class UnboundName : public EvalError {
public:
  explicit UnboundName(const std::string& n)
      : EvalError("unbound name '" + n + "' at evaluation time") {}
};

class SymbolicGuard : public EvalError {
public:
  SymbolicGuard() : EvalError("guard value could not be determined") {}
};

// -------------------------------------------------------------- value envs

// environments are ordered; lookup takes the rightmost binding
using ValueEnv = std::vector<std::pair<std::string, TermPtr>>;

struct Closure;
using ClosurePtr = std::shared_ptr<const Closure>;
using FunEnv = std::vector<std::pair<std::string, ClosurePtr>>;

struct Closure {
  FunEnv saved;  // functions visible at definition time (not the closure itself)
  std::string fun, param;
  Ty param_ty, ret_ty;
  TermPtr body;
};

inline const TermPtr& env_lookup(const ValueEnv& env, const std::string& n) {
  for (auto it = env.rbegin(); it != env.rend(); ++it)
    if (it->first == n) return it->second;
  throw UnboundName(n);
}

inline ClosurePtr fun_lookup(const FunEnv& env, const std::string& n) {
  for (auto it = env.rbegin(); it != env.rend(); ++it)
    if (it->first == n) return it->second;
  throw UnboundName(n);
}

struct Budget {
  long remaining = 1'000'000;
  void tick() {
    if (--remaining < 0) throw OutOfFuel();
  }
};

// --------------------------------------------- value <-> coordinate vectors

inline void encode_value(const TermPtr& v, std::vector<double>& out) {
  if (auto* c = as<Const>(v)) {
    out.push_back(c->value);
    return;
  }
  if (as<Star>(v)) return;
  if (auto* p = as<PairT>(v)) {
    encode_value(p->first, out);
    encode_value(p->second, out);
    return;
  }
  throw std::logic_error("encode_value: not a closed value");
}

inline std::vector<double> encode_value(const TermPtr& v) {
  std::vector<double> out;
  encode_value(v, out);
  return out;
}

inline TermPtr decode_value(const Ty& ty, const std::vector<double>& v, size_t& pos) {
  switch (ty.kind()) {
    case Ty::Kind::Real:
      if (pos >= v.size()) throw std::logic_error("decode_value: underflow");
      return t_const(v[pos++]);
    case Ty::Kind::Unit:
      return t_star();
    case Ty::Kind::Prod: {
      TermPtr a = decode_value(ty.left(), v, pos);
      TermPtr b = decode_value(ty.right(), v, pos);
      return t_pair(std::move(a), std::move(b));
    }
  }
  throw std::logic_error("decode_value: bad type");
}

inline TermPtr decode_value(const Ty& ty, const std::vector<double>& v) {
  size_t pos = 0;
  TermPtr r = decode_value(ty, v, pos);
  if (pos != v.size()) throw std::logic_error("decode_value: trailing data");
  return r;
}

// type of a closed value, read off its shape
inline Ty value_type(const TermPtr& v) {
  if (as<Const>(v)) return Ty::real();
  if (as<Star>(v)) return Ty::unit();
  if (auto* p = as<PairT>(v))
    return Ty::prod(value_type(p->first), value_type(p->second));
  throw std::logic_error("value_type: not a closed value");
}

// -------------------------------------------------------------- evaluation

namespace detail {

struct OpsemCtx {
  const Interp& I;
  Budget& budget;
  RdMode mode;
  FreshNames& fresh;
};

// guard decision via the predicate's witness pair; nullopt when the guard's
// own evaluation is defined but the predicate is (true-and-false-)undefined
inline bool decide_pred(OpsemCtx& cx, const std::string& pred, const TermPtr& val) {
  std::vector<double> in = encode_value(val);
  auto [pT, pF] = pred_den(cx.I, pred);
  if (evaluate(cx.I.table, pT, in)) return true;
  if (evaluate(cx.I.table, pF, in)) return false;
  throw StuckPredicate(pred);
}

inline TermPtr eval_rec(OpsemCtx& cx, const ValueEnv& env, const FunEnv& fenv,
                        const TermPtr& m);

inline bool eval_guard(OpsemCtx& cx, const ValueEnv& env, const FunEnv& fenv,
                       const BoolTerm& b) {
  switch (b.kind) {
    case BoolTerm::Kind::True: return true;
    case BoolTerm::Kind::False: return false;
    case BoolTerm::Kind::Pred:
      return decide_pred(cx, b.pred, eval_rec(cx, env, fenv, b.arg));
  }
  throw std::logic_error("eval_guard: bad kind");
}

struct SymRes {
  TermPtr trace;  // trace term over the symbolic variables
  TermPtr value;  // closed value the trace takes at the traced input
};

struct SymBinding {
  std::string name;  // source-level variable
  TermPtr sym;       // value-form term over symbolic variables
  TermPtr val;       // its closed numeric value
  Ty ty;
};
using SymEnv = std::vector<SymBinding>;

struct SymCtx {
  OpsemCtx& op;
  Context sym_ctx;     // types of all symbolic variables introduced so far
  ValueEnv sym_vals;   // numeric values of all symbolic variables
  std::set<std::string> avoid;

  std::string mk(const std::string& base) {
    std::string n = op.fresh.fresh(base, avoid);
    avoid.insert(n);
    return n;
  }
  void add_sym(const std::string& n, const Ty& ty, const TermPtr& val) {
    sym_ctx.emplace_back(n, ty);
    sym_vals.emplace_back(n, val);
  }
};

inline const SymBinding& sym_lookup(const SymEnv& env, const std::string& n) {
  for (auto it = env.rbegin(); it != env.rend(); ++it)
    if (it->name == n) return *it;
  throw UnboundName(n);
}

inline SymRes sym_eval(SymCtx& cx, const SymEnv& env, const FunEnv& fenv,
                       const TermPtr& m);

}  // namespace detail

// Evaluate a term to a closed value under the given environments.
inline TermPtr eval_term(const Interp& I, const ValueEnv& env, const FunEnv& fenv,
                         const TermPtr& m, Budget& budget,
                         RdMode mode = RdMode::Standard,
                         FreshNames* names = nullptr) {
  FreshNames local;
  detail::OpsemCtx cx{I, budget, mode, names ? *names : local};
  return detail::eval_rec(cx, env, fenv, m);
}

namespace detail {

inline TermPtr eval_rec(OpsemCtx& cx, const ValueEnv& env, const FunEnv& fenv,
                        const TermPtr& m) {
  cx.budget.tick();

  if (auto* v = as<Var>(m)) return env_lookup(env, v->name);
  if (as<Const>(m) || as<Star>(m)) return m;

  if (auto* a = as<Add>(m)) {
    TermPtr l = eval_rec(cx, env, fenv, a->lhs);
    TermPtr r = eval_rec(cx, env, fenv, a->rhs);
    auto* lc = as<Const>(l);
    auto* rc = as<Const>(r);
    if (!lc || !rc) throw std::logic_error("eval: sum of non-scalars");
    double s = lc->value + rc->value;
    if (!std::isfinite(s)) throw UndefinedPrimitive("+");
    return t_const(s);
  }

  if (auto* o = as<PrimApp>(m)) {
    TermPtr arg = eval_rec(cx, env, fenv, o->arg);
    EvalResult r = evaluate(cx.I.table, op_den(cx.I, o->op), encode_value(arg));
    if (!r) throw UndefinedPrimitive(o->op);
    return decode_value(cx.I.sig.op(o->op).cod, *r);
  }

  if (auto* l = as<Let>(m)) {
    TermPtr bound = eval_rec(cx, env, fenv, l->bound);
    ValueEnv env2 = env;
    env2.emplace_back(l->var, std::move(bound));
    return eval_rec(cx, env2, fenv, l->body);
  }

  if (auto* p = as<PairT>(m))
    return t_pair(eval_rec(cx, env, fenv, p->first),
                  eval_rec(cx, env, fenv, p->second));

  if (auto* f = as<Fst>(m)) {
    TermPtr v = eval_rec(cx, env, fenv, f->arg);
    auto* pv = as<PairT>(v);
    if (!pv) throw std::logic_error("eval: fst of non-pair");
    return pv->first;
  }
  if (auto* s = as<Snd>(m)) {
    TermPtr v = eval_rec(cx, env, fenv, s->arg);
    auto* pv = as<PairT>(v);
    if (!pv) throw std::logic_error("eval: snd of non-pair");
    return pv->second;
  }

  if (auto* i = as<If>(m))
    return eval_guard(cx, env, fenv, i->guard)
               ? eval_rec(cx, env, fenv, i->then_br)
               : eval_rec(cx, env, fenv, i->else_br);

  if (auto* w = as<While>(m)) {
    if (env.empty()) throw UnboundName("(while loop variable)");
    ValueEnv env2 = env;  // loop state lives in the rightmost binding
    while (eval_guard(cx, env2, fenv, w->guard)) {
      cx.budget.tick();
      env2.back().second = eval_rec(cx, env2, fenv, w->body);
    }
    return env2.back().second;
  }

  if (auto* r = as<Rd>(m)) {
    TermPtr seed = eval_rec(cx, env, fenv, r->seed);
    TermPtr point = eval_rec(cx, env, fenv, r->point);

    // trace the body with the bound variable symbolic and every
    // environment variable inlined as its value
    SymCtx scx{cx, {}, {}, {}};
    scx.avoid = all_names(r->body);
    for (const auto& [n, v] : env) scx.avoid.insert(n);
    scx.avoid.insert(r->var);
    std::string xs = scx.mk(r->var);
    scx.add_sym(xs, r->var_ty, point);

    SymEnv senv;
    for (const auto& [n, v] : env) senv.push_back({n, v, v, value_type(v)});
    senv.push_back({r->var, t_var(xs), point, r->var_ty});

    SymRes body = sym_eval(scx, senv, fenv, r->body);
    if (!is_trace_term(body.trace))
      throw NotATraceTerm("rd body did not reduce to a trace term");

    // expansion steps consume evaluation fuel: standard-mode differentiation
    // is exponential in the trace's let-depth, so an unmetered expansion can
    // exhaust memory long before the produced term is ever evaluated
    const std::function<void()> tick = [&cx] { cx.budget.tick(); };
    TermPtr deriv = rd_symbolic(cx.I.sig, cx.mode, {}, seed, xs, r->var_ty,
                                body.trace, point, cx.fresh, nullptr, &tick);
    return eval_rec(cx, {}, {}, deriv);
  }

  if (auto* c = as<FunCall>(m)) {
    TermPtr arg = eval_rec(cx, env, fenv, c->arg);
    ClosurePtr cl = fun_lookup(fenv, c->fun);
    FunEnv fenv2 = cl->saved;
    fenv2.emplace_back(cl->fun, cl);
    ValueEnv env2{{cl->param, std::move(arg)}};
    return eval_rec(cx, env2, fenv2, cl->body);
  }

  if (auto* lr = as<LetRec>(m)) {
    auto cl = std::make_shared<const Closure>(
        Closure{fenv, lr->fun, lr->param, lr->param_ty, lr->ret_ty, lr->body});
    FunEnv fenv2 = fenv;
    fenv2.emplace_back(lr->fun, std::move(cl));
    return eval_rec(cx, env, fenv2, lr->cont);
  }

  throw std::logic_error("eval: unhandled term node");
}

// --------------------------------------------------------- symbolic tracing

inline TermPtr sym_value_of(SymCtx& cx, const TermPtr& trace) {
  Budget& b = cx.op.budget;
  OpsemCtx inner{cx.op.I, b, cx.op.mode, cx.op.fresh};
  return eval_rec(inner, cx.sym_vals, {}, trace);
}

inline SymRes sym_eval(SymCtx& cx, const SymEnv& env, const FunEnv& fenv,
                       const TermPtr& m) {
  cx.op.budget.tick();

  if (auto* v = as<Var>(m)) {
    const SymBinding& b = sym_lookup(env, v->name);
    return {b.sym, b.val};
  }
  if (as<Const>(m) || as<Star>(m)) return {m, m};

  if (auto* a = as<Add>(m)) {
    SymRes l = sym_eval(cx, env, fenv, a->lhs);
    SymRes r = sym_eval(cx, env, fenv, a->rhs);
    double s = as<Const>(l.value)->value + as<Const>(r.value)->value;
    if (!std::isfinite(s)) throw UndefinedPrimitive("+");
    return {t_add(l.trace, r.trace), t_const(s)};
  }

  if (auto* o = as<PrimApp>(m)) {
    SymRes arg = sym_eval(cx, env, fenv, o->arg);
    EvalResult r =
        evaluate(cx.op.I.table, op_den(cx.op.I, o->op), encode_value(arg.value));
    if (!r) throw UndefinedPrimitive(o->op);
    return {t_op(o->op, arg.trace),
            decode_value(cx.op.I.sig.op(o->op).cod, *r)};
  }

  if (auto* l = as<Let>(m)) {
    SymRes bound = sym_eval(cx, env, fenv, l->bound);
    std::string y = cx.mk(l->var);
    cx.add_sym(y, l->ty, bound.value);
    SymEnv env2 = env;
    env2.push_back({l->var, t_var(y), bound.value, l->ty});
    SymRes body = sym_eval(cx, env2, fenv, l->body);
    return {t_let(y, l->ty, bound.trace, body.trace), body.value};
  }

  if (auto* p = as<PairT>(m)) {
    SymRes a = sym_eval(cx, env, fenv, p->first);
    SymRes b = sym_eval(cx, env, fenv, p->second);
    return {t_pair(a.trace, b.trace), t_pair(a.value, b.value)};
  }
  if (auto* f = as<Fst>(m)) {
    SymRes a = sym_eval(cx, env, fenv, f->arg);
    auto* pv = as<PairT>(a.value);
    if (!pv) throw std::logic_error("sym_eval: fst of non-pair");
    return {t_fst(a.trace), pv->first};
  }
  if (auto* s = as<Snd>(m)) {
    SymRes a = sym_eval(cx, env, fenv, s->arg);
    auto* pv = as<PairT>(a.value);
    if (!pv) throw std::logic_error("sym_eval: snd of non-pair");
    return {t_snd(a.trace), pv->second};
  }

  if (auto* i = as<If>(m)) {
    bool taken;
    switch (i->guard.kind) {
      case BoolTerm::Kind::True: taken = true; break;
      case BoolTerm::Kind::False: taken = false; break;
      default: {
        SymRes g = sym_eval(cx, env, fenv, i->guard.arg);
        taken = decide_pred(cx.op, i->guard.pred, g.value);
      }
    }
    // the trace records only the branch that was taken
    return sym_eval(cx, env, fenv, taken ? i->then_br : i->else_br);
  }

  if (auto* w = as<While>(m)) {
    if (env.empty()) throw UnboundName("(while loop variable)");
    SymEnv env2 = env;
    SymBinding& loop = env2.back();
    std::vector<std::tuple<std::string, Ty, TermPtr>> steps;
    for (;;) {
      bool taken;
      switch (w->guard.kind) {
        case BoolTerm::Kind::True: taken = true; break;
        case BoolTerm::Kind::False: taken = false; break;
        default: {
          SymRes g = sym_eval(cx, env2, fenv, w->guard.arg);
          taken = decide_pred(cx.op, w->guard.pred, g.value);
        }
      }
      if (!taken) break;
      cx.op.budget.tick();
      SymRes body = sym_eval(cx, env2, fenv, w->body);
      std::string p = cx.mk(loop.name);
      cx.add_sym(p, loop.ty, body.value);
      steps.emplace_back(p, loop.ty, body.trace);
      loop.sym = t_var(p);
      loop.val = body.value;
    }
    // let p'1 = step1 in let p'2 = step2 in ... in p'k
    TermPtr trace = loop.sym;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it)
      trace = t_let(std::get<0>(*it), std::get<1>(*it), std::get<2>(*it), trace);
    return {trace, loop.val};
  }

  if (auto* r = as<Rd>(m)) {
    // nested rd: keep the seed and the point symbolic so the result trace
    // still depends on the outer variables
    SymRes seed = sym_eval(cx, env, fenv, r->seed);
    SymRes point = sym_eval(cx, env, fenv, r->point);

    TermPtr w_sym = seed.trace, a_sym = point.trace;
    std::vector<std::tuple<std::string, Ty, TermPtr>> binds;
    if (!is_value(w_sym)) {
      Ty wt = type_of(cx.op.I.sig, {}, cx.sym_ctx, w_sym);
      std::string wn = cx.mk("w");
      cx.add_sym(wn, wt, seed.value);
      binds.emplace_back(wn, wt, w_sym);
      w_sym = t_var(wn);
    }
    if (!is_value(a_sym)) {
      std::string an = cx.mk("a");
      cx.add_sym(an, r->var_ty, point.value);
      binds.emplace_back(an, r->var_ty, a_sym);
      a_sym = t_var(an);
    }

    std::string xs = cx.mk(r->var);
    cx.add_sym(xs, r->var_ty, point.value);
    SymEnv env2 = env;
    env2.push_back({r->var, t_var(xs), point.value, r->var_ty});
    SymRes body = sym_eval(cx, env2, fenv, r->body);
    if (!is_trace_term(body.trace))
      throw NotATraceTerm("rd body did not reduce to a trace term");

    const std::function<void()> tick = [&cx] { cx.op.budget.tick(); };
    TermPtr deriv = rd_symbolic(cx.op.I.sig, cx.op.mode, cx.sym_ctx, w_sym, xs,
                                r->var_ty, body.trace, a_sym, cx.op.fresh,
                                nullptr, &tick);
    for (auto it = binds.rbegin(); it != binds.rend(); ++it)
      deriv = t_let(std::get<0>(*it), std::get<1>(*it), std::get<2>(*it), deriv);
    return {deriv, sym_value_of(cx, deriv)};
  }

  if (auto* c = as<FunCall>(m)) {
    SymRes arg = sym_eval(cx, env, fenv, c->arg);
    ClosurePtr cl = fun_lookup(fenv, c->fun);
    FunEnv fenv2 = cl->saved;
    fenv2.emplace_back(cl->fun, cl);
    std::string xp = cx.mk(cl->param);
    cx.add_sym(xp, cl->param_ty, arg.value);
    SymEnv env2{{cl->param, t_var(xp), arg.value, cl->param_ty}};
    SymRes body = sym_eval(cx, env2, fenv2, cl->body);
    return {t_let(xp, cl->param_ty, arg.trace, body.trace), body.value};
  }

  if (auto* lr = as<LetRec>(m)) {
    auto cl = std::make_shared<const Closure>(
        Closure{fenv, lr->fun, lr->param, lr->param_ty, lr->ret_ty, lr->body});
    FunEnv fenv2 = fenv;
    fenv2.emplace_back(lr->fun, std::move(cl));
    return sym_eval(cx, env, fenv2, lr->cont);
  }

  throw std::logic_error("sym_eval: unhandled term node");
}

}  // namespace detail

// ------------------------------------------------------------ entry points

// Evaluate a closed program (args bound to values) to a value.
inline TermPtr eval_program(const Interp& I, const ValueEnv& env, const TermPtr& m,
                            long budget = 1'000'000,
                            RdMode mode = RdMode::Standard) {
  Budget b{budget};
  FreshNames fresh;
  return eval_term(I, env, {}, m, b, mode, &fresh);
}

struct TraceResult {
  TermPtr trace;     // straight-line trace over the argument variables
  TermPtr value;     // value at the traced input
  Context trace_ctx; // types of the argument variables (unchanged names)
};

// Trace a whole program at a specific input: argument variables stay
// symbolic (same names), control flow is resolved against the given values.
inline TraceResult trace_program(const Interp& I, const Context& args,
                                 const std::vector<TermPtr>& arg_values,
                                 const TermPtr& m, long budget = 1'000'000,
                                 RdMode mode = RdMode::Standard) {
  if (args.size() != arg_values.size())
    throw std::logic_error("trace_program: arity mismatch");
  Budget b{budget};
  FreshNames fresh;
  detail::OpsemCtx ocx{I, b, mode, fresh};
  detail::SymCtx scx{ocx, {}, {}, {}};
  scx.avoid = all_names(m);
  detail::SymEnv senv;
  for (size_t i = 0; i < args.size(); ++i) {
    scx.avoid.insert(args[i].first);
    scx.add_sym(args[i].first, args[i].second, arg_values[i]);
    senv.push_back({args[i].first, t_var(args[i].first), arg_values[i],
                    args[i].second});
  }
  detail::SymRes r = detail::sym_eval(scx, senv, {}, m);
  return {r.trace, r.value, args};
}

}  // namespace sdpl
