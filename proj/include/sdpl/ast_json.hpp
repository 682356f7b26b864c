#pragma once
// sdpl/ast_json.hpp
//
// JSON dump of the abstract syntax with a stable schema:
//   every term object has "kind" plus a "children" array of subterms in
//   evaluation order; binders carry "var" and, where an ascription exists,
//   "ty" (the printed type).  Extra scalar fields:
//     Const   -> "value" (number)
//     PrimApp -> "op"
//     If/While-> "guard": {"kind":"True"|"False"|"Pred","pred":...,
//                          "children":[arg]}
//     Rd      -> "var","ty"; children [seed, body, point]
//     FunCall -> "fun"
//     LetRec  -> "var" (function), "param", "param_ty", "ret_ty";
//                children [body, cont]

#include <string>

#include "syntax.hpp"

namespace sdpl {

namespace detail {

inline void json_escape(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else
          out += c;
    }
  }
  out += '"';
}

inline void field(std::string& out, const char* name, const std::string& val) {
  out += ',';
  json_escape(name, out);
  out += ':';
  json_escape(val, out);
}

inline void ast_json_rec(const TermPtr& t, std::string& out);

inline void bool_json(const BoolTerm& b, std::string& out) {
  out += "{\"kind\":";
  switch (b.kind) {
    case BoolTerm::Kind::True: out += "\"True\",\"children\":[]}"; return;
    case BoolTerm::Kind::False: out += "\"False\",\"children\":[]}"; return;
    case BoolTerm::Kind::Pred: break;
  }
  out += "\"Pred\"";
  field(out, "pred", b.pred);
  out += ",\"children\":[";
  ast_json_rec(b.arg, out);
  out += "]}";
}

inline void children(std::string& out, std::initializer_list<TermPtr> ts) {
  out += ",\"children\":[";
  bool first = true;
  for (const TermPtr& t : ts) {
    if (!first) out += ',';
    first = false;
    ast_json_rec(t, out);
  }
  out += "]}";
}

inline void ast_json_rec(const TermPtr& t, std::string& out) {
  out += "{\"kind\":";
  if (auto* v = as<Var>(t)) {
    out += "\"Var\"";
    field(out, "var", v->name);
    children(out, {});
  } else if (auto* c = as<Const>(t)) {
    out += "\"Const\",\"value\":" + format_double(c->value);
    children(out, {});
  } else if (auto* a = as<Add>(t)) {
    out += "\"Add\"";
    children(out, {a->lhs, a->rhs});
  } else if (auto* o = as<PrimApp>(t)) {
    out += "\"PrimApp\"";
    field(out, "op", o->op);
    children(out, {o->arg});
  } else if (auto* l = as<Let>(t)) {
    out += "\"Let\"";
    field(out, "var", l->var);
    field(out, "ty", l->ty.str());
    children(out, {l->bound, l->body});
  } else if (as<Star>(t)) {
    out += "\"Star\"";
    children(out, {});
  } else if (auto* p = as<PairT>(t)) {
    out += "\"Pair\"";
    children(out, {p->first, p->second});
  } else if (auto* f = as<Fst>(t)) {
    out += "\"Fst\"";
    children(out, {f->arg});
  } else if (auto* s = as<Snd>(t)) {
    out += "\"Snd\"";
    children(out, {s->arg});
  } else if (auto* i = as<If>(t)) {
    out += "\"If\",\"guard\":";
    bool_json(i->guard, out);
    children(out, {i->then_br, i->else_br});
  } else if (auto* w = as<While>(t)) {
    out += "\"While\",\"guard\":";
    bool_json(w->guard, out);
    children(out, {w->body});
  } else if (auto* r = as<Rd>(t)) {
    out += "\"Rd\"";
    field(out, "var", r->var);
    field(out, "ty", r->var_ty.str());
    children(out, {r->seed, r->body, r->point});
  } else if (auto* fc = as<FunCall>(t)) {
    out += "\"FunCall\"";
    field(out, "fun", fc->fun);
    children(out, {fc->arg});
  } else if (auto* lr = as<LetRec>(t)) {
    out += "\"LetRec\"";
    field(out, "var", lr->fun);
    field(out, "param", lr->param);
    field(out, "param_ty", lr->param_ty.str());
    field(out, "ret_ty", lr->ret_ty.str());
    children(out, {lr->body, lr->cont});
  } else {
    throw std::logic_error("ast_json: unhandled node");
  }
}

}  // namespace detail

inline std::string ast_json(const TermPtr& t) {
  std::string out;
  detail::ast_json_rec(t, out);
  return out;
}

}  // namespace sdpl
