#pragma once
// sdpl/pretty.hpp
//
// Plain-text rendering of types, boolean guards and terms. The output is
// guaranteed to re-parse to the same AST (chained-let and tuple-pattern
// sugar is never emitted; parenthesization is conservative).

#include <string>

#include "sdpl/syntax.hpp"

namespace sdpl {

inline std::string pretty(const Ty& ty) { return ty.str(); }

namespace detail {

// Precedence levels, loosest to tightest. A node printed in a position
// that requires a tighter level than its own gets wrapped in parens.
enum : int { LVL_TERM = 0, LVL_SUM = 1, LVL_POSTFIX = 2, LVL_PRIMARY = 3 };

inline void print_term(const TermPtr& t, int need, std::string& out);

inline void print_bool(const BoolTerm& b, std::string& out) {
  switch (b.kind) {
    case BoolTerm::Kind::True: out += "true"; return;
    case BoolTerm::Kind::False: out += "false"; return;
    case BoolTerm::Kind::Pred:
      out += b.pred;
      out += "(";
      print_term(b.arg, LVL_TERM, out);
      out += ")";
      return;
  }
}

// op(m) and f(m) print a pair argument in comma form: op(a, b).
inline void print_call_args(const TermPtr& arg, std::string& out) {
  out += "(";
  if (auto* p = as<PairT>(arg)) {
    print_term(p->first, LVL_TERM, out);
    out += ", ";
    print_term(p->second, LVL_TERM, out);
  } else {
    print_term(arg, LVL_TERM, out);
  }
  out += ")";
}

inline int level_of(const TermPtr& t) {
  if (as<Let>(t) || as<If>(t) || as<While>(t) || as<LetRec>(t)) return LVL_TERM;
  if (as<Add>(t)) return LVL_SUM;
  if (as<Rd>(t)) return LVL_POSTFIX;
  return LVL_PRIMARY;
}

inline void print_term(const TermPtr& t, int need, std::string& out) {
  const bool parens = level_of(t) < need;
  if (parens) out += "(";

  if (auto* v = as<Var>(t)) {
    out += v->name;
  } else if (auto* c = as<Const>(t)) {
    out += format_double(c->value);
  } else if (auto* a = as<Add>(t)) {
    // left-associated chains print flat; a right-nested Add needs parens
    print_term(a->lhs, LVL_SUM, out);
    out += " + ";
    print_term(a->rhs, LVL_POSTFIX, out);
  } else if (auto* o = as<PrimApp>(t)) {
    out += o->op;
    print_call_args(o->arg, out);
  } else if (auto* l = as<Let>(t)) {
    out += "let " + l->var + " : " + l->ty.str() + " = ";
    print_term(l->bound, LVL_TERM, out);
    out += " in ";
    print_term(l->body, LVL_TERM, out);
  } else if (as<Star>(t)) {
    out += "*";
  } else if (auto* p = as<PairT>(t)) {
    out += "(";
    print_term(p->first, LVL_TERM, out);
    out += ", ";
    print_term(p->second, LVL_TERM, out);
    out += ")";
  } else if (auto* f = as<Fst>(t)) {
    out += "fst(";
    print_term(f->arg, LVL_TERM, out);
    out += ")";
  } else if (auto* sn = as<Snd>(t)) {
    out += "snd(";
    print_term(sn->arg, LVL_TERM, out);
    out += ")";
  } else if (auto* i = as<If>(t)) {
    out += "if ";
    print_bool(i->guard, out);
    out += " then ";
    print_term(i->then_br, LVL_TERM, out);
    out += " else ";
    print_term(i->else_br, LVL_TERM, out);
  } else if (auto* w = as<While>(t)) {
    out += "while ";
    print_bool(w->guard, out);
    out += " do ";
    print_term(w->body, LVL_TERM, out);
  } else if (auto* r = as<Rd>(t)) {
    print_term(r->seed, LVL_PRIMARY, out);
    out += ".rd(" + r->var + " : " + r->var_ty.str() + ". ";
    print_term(r->body, LVL_TERM, out);
    out += ")(";
    print_term(r->point, LVL_TERM, out);
    out += ")";
  } else if (auto* c = as<FunCall>(t)) {
    out += c->fun;
    print_call_args(c->arg, out);
  } else if (auto* lr = as<LetRec>(t)) {
    out += "letrec " + lr->fun + "(" + lr->param + " : " + lr->param_ty.str() +
           ") : " + lr->ret_ty.str() + " := ";
    print_term(lr->body, LVL_TERM, out);
    out += " in ";
    print_term(lr->cont, LVL_TERM, out);
  } else {
    throw std::logic_error("pretty: unhandled term node");
  }

  if (parens) out += ")";
}

}  // namespace detail

inline std::string pretty(const TermPtr& t) {
  std::string out;
  detail::print_term(t, detail::LVL_TERM, out);
  return out;
}

inline std::string pretty(const BoolTerm& b) {
  std::string out;
  detail::print_bool(b, out);
  return out;
}

}  // namespace sdpl
