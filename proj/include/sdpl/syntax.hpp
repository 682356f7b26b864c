#pragma once
// sdpl/syntax.hpp
//
// Abstract syntax for the differential language: types, terms, boolean
// guards, operation signatures, and the basic term algebra (free variables,
// capture-avoiding substitution, value / trace-term classification,
// alpha-equivalence, typed zero and typed sum builders).
//
// Terms are immutable value types held through shared_ptr<const Term>;
// they are safe to share across threads once built.

#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sdpl {

// ----------------------------------------------------------------- types

// ty ::= real | 1 | ty * ty     (products associate to the left in syntax)
class Ty {
public:
  enum class Kind { Real, Unit, Prod };

  Ty() : kind_(Kind::Real) {}  // default to the scalar type

  static Ty real() { return Ty(Kind::Real); }
  static Ty unit() { return Ty(Kind::Unit); }
  static Ty prod(const Ty& a, const Ty& b) {
    Ty t(Kind::Prod);
    t.left_ = std::make_shared<Ty>(a);
    t.right_ = std::make_shared<Ty>(b);
    return t;
  }
  // real^n sugar: left-associated product of n copies of real (n >= 1).
  static Ty reals(int n) {
    if (n < 1) throw std::invalid_argument("Ty::reals: n must be >= 1");
    Ty t = real();
    for (int i = 1; i < n; ++i) t = prod(t, real());
    return t;
  }

  Kind kind() const { return kind_; }
  bool is_real() const { return kind_ == Kind::Real; }
  bool is_unit() const { return kind_ == Kind::Unit; }
  bool is_prod() const { return kind_ == Kind::Prod; }
  const Ty& left() const { return *left_; }
  const Ty& right() const { return *right_; }

  friend bool operator==(const Ty& a, const Ty& b) {
    if (a.kind_ != b.kind_) return false;
    if (a.kind_ != Kind::Prod) return true;
    return *a.left_ == *b.left_ && *a.right_ == *b.right_;
  }
  friend bool operator!=(const Ty& a, const Ty& b) { return !(a == b); }

  // Rendered in concrete syntax: "real", "1", "real * (real * real)", ...
  std::string str() const {
    switch (kind_) {
      case Kind::Real: return "real";
      case Kind::Unit: return "1";
      case Kind::Prod: {
        // products associate to the left, so only right-nested ones
        // need parentheses
        std::string l = left_->str();
        std::string r = right_->str();
        if (right_->is_prod()) r = "(" + r + ")";
        return l + " * " + r;
      }
    }
    return "?";
  }

private:
  explicit Ty(Kind k) : kind_(k) {}
  Kind kind_;
  std::shared_ptr<Ty> left_, right_;
};

// ----------------------------------------------------------------- terms

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Span {
  int line = 0;  // 1-based; 0 means "no position"
  int col = 0;
};

// Boolean terms appear only as guards of `if` and `while`.
struct BoolTerm {
  enum class Kind { True, False, Pred };
  Kind kind = Kind::True;
  std::string pred;  // predicate name, for Kind::Pred
  TermPtr arg;       // predicate argument, for Kind::Pred
};

struct Var { std::string name; };
struct Const { double value = 0.0; };
struct Add { TermPtr lhs, rhs; };
struct PrimApp { std::string op; TermPtr arg; };
struct Let { std::string var; Ty ty = Ty::real(); TermPtr bound, body; };
struct Star {};
struct PairT { TermPtr first, second; };
struct Fst { TermPtr arg; };
struct Snd { TermPtr arg; };
struct If { BoolTerm guard; TermPtr then_br, else_br; };
struct While { BoolTerm guard; TermPtr body; };
// v.rd(x : var_ty. body)(point) — reverse differential of `body` with
// respect to `x` at `point`, applied to the cotangent seed `seed`.
struct Rd { TermPtr seed; std::string var; Ty var_ty = Ty::real(); TermPtr body, point; };
struct FunCall { std::string fun; TermPtr arg; };
// letrec fun(param : param_ty) : ret_ty := body in cont
struct LetRec {
  std::string fun, param;
  Ty param_ty = Ty::real(), ret_ty = Ty::real();
  TermPtr body, cont;
};

using TermNode = std::variant<Var, Const, Add, PrimApp, Let, Star, PairT, Fst,
                              Snd, If, While, Rd, FunCall, LetRec>;

struct Term {
  TermNode node;
  Span span;
  explicit Term(TermNode n, Span s = {}) : node(std::move(n)), span(s) {}
};

template <class T>
const T* as(const TermPtr& t) {
  return t ? std::get_if<T>(&t->node) : nullptr;
}

inline TermPtr mk(TermNode n, Span s = {}) {
  return std::make_shared<Term>(std::move(n), s);
}

inline TermPtr t_var(std::string x, Span s = {}) { return mk(Var{std::move(x)}, s); }
inline TermPtr t_const(double v, Span s = {}) { return mk(Const{v}, s); }
inline TermPtr t_add(TermPtr a, TermPtr b, Span s = {}) {
  return mk(Add{std::move(a), std::move(b)}, s);
}
inline TermPtr t_op(std::string op, TermPtr m, Span s = {}) {
  return mk(PrimApp{std::move(op), std::move(m)}, s);
}
inline TermPtr t_let(std::string x, Ty ty, TermPtr bound, TermPtr body, Span s = {}) {
  return mk(Let{std::move(x), std::move(ty), std::move(bound), std::move(body)}, s);
}
inline TermPtr t_star(Span s = {}) { return mk(Star{}, s); }
inline TermPtr t_pair(TermPtr a, TermPtr b, Span s = {}) {
  return mk(PairT{std::move(a), std::move(b)}, s);
}
inline TermPtr t_fst(TermPtr m, Span s = {}) { return mk(Fst{std::move(m)}, s); }
inline TermPtr t_snd(TermPtr m, Span s = {}) { return mk(Snd{std::move(m)}, s); }
inline TermPtr t_if(BoolTerm g, TermPtr a, TermPtr b, Span s = {}) {
  return mk(If{std::move(g), std::move(a), std::move(b)}, s);
}
inline TermPtr t_while(BoolTerm g, TermPtr body, Span s = {}) {
  return mk(While{std::move(g), std::move(body)}, s);
}
inline TermPtr t_rd(TermPtr seed, std::string x, Ty xty, TermPtr body, TermPtr point,
                    Span s = {}) {
  return mk(Rd{std::move(seed), std::move(x), std::move(xty), std::move(body),
               std::move(point)},
            s);
}
inline TermPtr t_call(std::string f, TermPtr m, Span s = {}) {
  return mk(FunCall{std::move(f), std::move(m)}, s);
}
inline TermPtr t_letrec(std::string f, std::string x, Ty a, Ty b, TermPtr body,
                        TermPtr cont, Span s = {}) {
  return mk(LetRec{std::move(f), std::move(x), std::move(a), std::move(b),
                   std::move(body), std::move(cont)},
            s);
}

inline BoolTerm b_true() { return BoolTerm{BoolTerm::Kind::True, "", nullptr}; }
inline BoolTerm b_false() { return BoolTerm{BoolTerm::Kind::False, "", nullptr}; }
inline BoolTerm b_pred(std::string p, TermPtr m) {
  return BoolTerm{BoolTerm::Kind::Pred, std::move(p), std::move(m)};
}

// ------------------------------------------------------------ signatures

// An operation signature: every op has one argument type and one result
// type (multi-argument operations take a product). reverse_map sends an
// op to the name of its reverse derivative; it is injective, and partial
// at the top of the closed-off derivative tower.
struct OpSig {
  Ty dom = Ty::real();
  Ty cod = Ty::real();
};

struct Signature {
  std::map<std::string, OpSig> ops;
  std::map<std::string, Ty> preds;
  std::map<std::string, std::string> reverse_map;

  bool is_op(const std::string& n) const { return ops.count(n) != 0; }
  bool is_pred(const std::string& n) const { return preds.count(n) != 0; }
  const OpSig& op(const std::string& n) const {
    auto it = ops.find(n);
    if (it == ops.end()) throw std::out_of_range("unknown op: " + n);
    return it->second;
  }
  std::optional<std::string> reverse_of(const std::string& n) const {
    auto it = reverse_map.find(n);
    if (it == reverse_map.end()) return std::nullopt;
    return it->second;
  }
};

// Name of the k-th reverse of `base`: mul -> mul_R -> mul_RR -> mul_RRR.
inline std::string reverse_op_name(const std::string& base, int level) {
  if (level == 0) return base;
  return base + "_" + std::string(static_cast<size_t>(level), 'R');
}

// Default signature: seven scalar primitives plus the derivative tower up
// to `depth` nested reverses, and the single predicate gt0 : real.
inline Signature default_signature(int depth = 3) {
  Signature sig;
  const std::pair<const char*, OpSig> base[] = {
      {"mul", {Ty::reals(2), Ty::real()}}, {"neg", {Ty::real(), Ty::real()}},
      {"sin", {Ty::real(), Ty::real()}},   {"cos", {Ty::real(), Ty::real()}},
      {"exp", {Ty::real(), Ty::real()}},   {"recip", {Ty::real(), Ty::real()}},
      {"sqrtp", {Ty::real(), Ty::real()}}};
  for (const auto& [name, s0] : base) {
    OpSig s = s0;
    for (int k = 0; k <= depth; ++k) {
      std::string n = reverse_op_name(name, k);
      sig.ops[n] = s;
      if (k < depth) sig.reverse_map[n] = reverse_op_name(name, k + 1);
      // type of the next level: (dom * cod) -> dom
      s = OpSig{Ty::prod(s.dom, s.cod), s.dom};
    }
  }
  sig.preds["gt0"] = Ty::real();
  return sig;
}

// ---------------------------------------------------------- fresh names

// Deterministic fresh-name supply: candidates are base'1, base'2, ...
// (apostrophes are legal identifier characters), skipping anything in the
// avoid set. A monotone counter keeps distinct calls distinct.
class FreshNames {
public:
  explicit FreshNames(uint64_t start = 0) : counter_(start) {}
  std::string fresh(const std::string& base, const std::set<std::string>& avoid) {
    for (;;) {
      std::string cand = base + "'" + std::to_string(++counter_);
      if (avoid.count(cand) == 0) return cand;
    }
  }
  uint64_t counter() const { return counter_; }

private:
  uint64_t counter_;
};

// -------------------------------------------------- basic term algebra

namespace detail {
inline void free_vars_rec(const TermPtr& t, std::set<std::string>& bound,
                          std::set<std::string>& out);
inline void free_vars_bool(const BoolTerm& b, std::set<std::string>& bound,
                           std::set<std::string>& out) {
  if (b.kind == BoolTerm::Kind::Pred) free_vars_rec(b.arg, bound, out);
}
inline void free_vars_rec(const TermPtr& t, std::set<std::string>& bound,
                          std::set<std::string>& out) {
  if (!t) return;
  if (auto* v = std::get_if<Var>(&t->node)) {
    if (bound.count(v->name) == 0) out.insert(v->name);
  } else if (auto* a = std::get_if<Add>(&t->node)) {
    free_vars_rec(a->lhs, bound, out);
    free_vars_rec(a->rhs, bound, out);
  } else if (auto* o = std::get_if<PrimApp>(&t->node)) {
    free_vars_rec(o->arg, bound, out);
  } else if (auto* l = std::get_if<Let>(&t->node)) {
    free_vars_rec(l->bound, bound, out);
    bool was = bound.count(l->var) != 0;
    bound.insert(l->var);
    free_vars_rec(l->body, bound, out);
    if (!was) bound.erase(l->var);
  } else if (auto* p = std::get_if<PairT>(&t->node)) {
    free_vars_rec(p->first, bound, out);
    free_vars_rec(p->second, bound, out);
  } else if (auto* f = std::get_if<Fst>(&t->node)) {
    free_vars_rec(f->arg, bound, out);
  } else if (auto* sn = std::get_if<Snd>(&t->node)) {
    free_vars_rec(sn->arg, bound, out);
  } else if (auto* i = std::get_if<If>(&t->node)) {
    free_vars_bool(i->guard, bound, out);
    free_vars_rec(i->then_br, bound, out);
    free_vars_rec(i->else_br, bound, out);
  } else if (auto* w = std::get_if<While>(&t->node)) {
    free_vars_bool(w->guard, bound, out);
    free_vars_rec(w->body, bound, out);
  } else if (auto* r = std::get_if<Rd>(&t->node)) {
    free_vars_rec(r->seed, bound, out);
    free_vars_rec(r->point, bound, out);
    bool was = bound.count(r->var) != 0;
    bound.insert(r->var);
    free_vars_rec(r->body, bound, out);
    if (!was) bound.erase(r->var);
  } else if (auto* c = std::get_if<FunCall>(&t->node)) {
    free_vars_rec(c->arg, bound, out);
  } else if (auto* lr = std::get_if<LetRec>(&t->node)) {
    bool was = bound.count(lr->param) != 0;
    bound.insert(lr->param);
    free_vars_rec(lr->body, bound, out);
    if (!was) bound.erase(lr->param);
    free_vars_rec(lr->cont, bound, out);
  }
}
}  // namespace detail

inline std::set<std::string> free_vars(const TermPtr& t) {
  std::set<std::string> bound, out;
  detail::free_vars_rec(t, bound, out);
  return out;
}

inline std::set<std::string> free_vars(const BoolTerm& b) {
  std::set<std::string> bound, out;
  detail::free_vars_bool(b, bound, out);
  return out;
}

namespace detail {
inline void free_fun_vars_rec(const TermPtr& t, std::set<std::string>& bound,
                              std::set<std::string>& out) {
  if (!t) return;
  if (auto* c = std::get_if<FunCall>(&t->node)) {
    if (bound.count(c->fun) == 0) out.insert(c->fun);
    free_fun_vars_rec(c->arg, bound, out);
  } else if (auto* lr = std::get_if<LetRec>(&t->node)) {
    bool was = bound.count(lr->fun) != 0;
    bound.insert(lr->fun);
    free_fun_vars_rec(lr->body, bound, out);
    free_fun_vars_rec(lr->cont, bound, out);
    if (!was) bound.erase(lr->fun);
  } else if (auto* a = std::get_if<Add>(&t->node)) {
    free_fun_vars_rec(a->lhs, bound, out);
    free_fun_vars_rec(a->rhs, bound, out);
  } else if (auto* o = std::get_if<PrimApp>(&t->node)) {
    free_fun_vars_rec(o->arg, bound, out);
  } else if (auto* l = std::get_if<Let>(&t->node)) {
    free_fun_vars_rec(l->bound, bound, out);
    free_fun_vars_rec(l->body, bound, out);
  } else if (auto* p = std::get_if<PairT>(&t->node)) {
    free_fun_vars_rec(p->first, bound, out);
    free_fun_vars_rec(p->second, bound, out);
  } else if (auto* f = std::get_if<Fst>(&t->node)) {
    free_fun_vars_rec(f->arg, bound, out);
  } else if (auto* sn = std::get_if<Snd>(&t->node)) {
    free_fun_vars_rec(sn->arg, bound, out);
  } else if (auto* i = std::get_if<If>(&t->node)) {
    if (i->guard.kind == BoolTerm::Kind::Pred)
      free_fun_vars_rec(i->guard.arg, bound, out);
    free_fun_vars_rec(i->then_br, bound, out);
    free_fun_vars_rec(i->else_br, bound, out);
  } else if (auto* w = std::get_if<While>(&t->node)) {
    if (w->guard.kind == BoolTerm::Kind::Pred)
      free_fun_vars_rec(w->guard.arg, bound, out);
    free_fun_vars_rec(w->body, bound, out);
  } else if (auto* r = std::get_if<Rd>(&t->node)) {
    free_fun_vars_rec(r->seed, bound, out);
    free_fun_vars_rec(r->body, bound, out);
    free_fun_vars_rec(r->point, bound, out);
  }
}
}  // namespace detail

inline std::set<std::string> free_fun_vars(const TermPtr& t) {
  std::set<std::string> bound, out;
  detail::free_fun_vars_rec(t, bound, out);
  return out;
}

// All variable names mentioned anywhere (free or bound) — used to build
// avoid sets for fresh-name generation.
namespace detail {
inline void all_names_rec(const TermPtr& t, std::set<std::string>& out) {
  if (!t) return;
  if (auto* v = std::get_if<Var>(&t->node)) {
    out.insert(v->name);
  } else if (auto* a = std::get_if<Add>(&t->node)) {
    all_names_rec(a->lhs, out);
    all_names_rec(a->rhs, out);
  } else if (auto* o = std::get_if<PrimApp>(&t->node)) {
    all_names_rec(o->arg, out);
  } else if (auto* l = std::get_if<Let>(&t->node)) {
    out.insert(l->var);
    all_names_rec(l->bound, out);
    all_names_rec(l->body, out);
  } else if (auto* p = std::get_if<PairT>(&t->node)) {
    all_names_rec(p->first, out);
    all_names_rec(p->second, out);
  } else if (auto* f = std::get_if<Fst>(&t->node)) {
    all_names_rec(f->arg, out);
  } else if (auto* sn = std::get_if<Snd>(&t->node)) {
    all_names_rec(sn->arg, out);
  } else if (auto* i = std::get_if<If>(&t->node)) {
    if (i->guard.kind == BoolTerm::Kind::Pred) all_names_rec(i->guard.arg, out);
    all_names_rec(i->then_br, out);
    all_names_rec(i->else_br, out);
  } else if (auto* w = std::get_if<While>(&t->node)) {
    if (w->guard.kind == BoolTerm::Kind::Pred) all_names_rec(w->guard.arg, out);
    all_names_rec(w->body, out);
  } else if (auto* r = std::get_if<Rd>(&t->node)) {
    out.insert(r->var);
    all_names_rec(r->seed, out);
    all_names_rec(r->body, out);
    all_names_rec(r->point, out);
  } else if (auto* c = std::get_if<FunCall>(&t->node)) {
    all_names_rec(c->arg, out);
  } else if (auto* lr = std::get_if<LetRec>(&t->node)) {
    out.insert(lr->param);
    all_names_rec(lr->body, out);
    all_names_rec(lr->cont, out);
  }
}
}  // namespace detail

inline std::set<std::string> all_names(const TermPtr& t) {
  std::set<std::string> out;
  detail::all_names_rec(t, out);
  return out;
}

// ------------------------------------------- value / trace classification

// Values: variables, numeric constants, *, and pairs of values.
inline bool is_value(const TermPtr& t) {
  if (!t) return false;
  if (std::holds_alternative<Var>(t->node)) return true;
  if (std::holds_alternative<Const>(t->node)) return true;
  if (std::holds_alternative<Star>(t->node)) return true;
  if (auto* p = std::get_if<PairT>(&t->node))
    return is_value(p->first) && is_value(p->second);
  return false;
}

// Trace terms: the control-free fragment (variables, constants, sums,
// op applications, lets, *, pairs, fst, snd). Every value is a trace term.
inline bool is_trace_term(const TermPtr& t) {
  if (!t) return false;
  if (std::holds_alternative<Var>(t->node)) return true;
  if (std::holds_alternative<Const>(t->node)) return true;
  if (std::holds_alternative<Star>(t->node)) return true;
  if (auto* a = std::get_if<Add>(&t->node))
    return is_trace_term(a->lhs) && is_trace_term(a->rhs);
  if (auto* o = std::get_if<PrimApp>(&t->node)) return is_trace_term(o->arg);
  if (auto* l = std::get_if<Let>(&t->node))
    return is_trace_term(l->bound) && is_trace_term(l->body);
  if (auto* p = std::get_if<PairT>(&t->node))
    return is_trace_term(p->first) && is_trace_term(p->second);
  if (auto* f = std::get_if<Fst>(&t->node)) return is_trace_term(f->arg);
  if (auto* s = std::get_if<Snd>(&t->node)) return is_trace_term(s->arg);
  return false;
}

// True when no derivative node occurs anywhere in the term.
inline bool is_rd_free(const TermPtr& t) {
  if (!t) return true;
  if (std::holds_alternative<Rd>(t->node)) return false;
  bool clean = true;
  auto sub = [&clean](const TermPtr& s) { clean = clean && is_rd_free(s); };
  if (auto* a = std::get_if<Add>(&t->node)) { sub(a->lhs); sub(a->rhs); }
  else if (auto* o = std::get_if<PrimApp>(&t->node)) sub(o->arg);
  else if (auto* l = std::get_if<Let>(&t->node)) { sub(l->bound); sub(l->body); }
  else if (auto* p = std::get_if<PairT>(&t->node)) { sub(p->first); sub(p->second); }
  else if (auto* f = std::get_if<Fst>(&t->node)) sub(f->arg);
  else if (auto* s2 = std::get_if<Snd>(&t->node)) sub(s2->arg);
  else if (auto* i = std::get_if<If>(&t->node)) {
    if (i->guard.kind == BoolTerm::Kind::Pred) sub(i->guard.arg);
    sub(i->then_br); sub(i->else_br);
  } else if (auto* w = std::get_if<While>(&t->node)) {
    if (w->guard.kind == BoolTerm::Kind::Pred) sub(w->guard.arg);
    sub(w->body);
  } else if (auto* c = std::get_if<FunCall>(&t->node)) sub(c->arg);
  else if (auto* r = std::get_if<LetRec>(&t->node)) { sub(r->body); sub(r->cont); }
  return clean;
}

// ------------------------------------------------------------ substitution

// m[v/x], capture-avoiding: binders whose name would capture a free
// variable of v (or that shadow x) are renamed with fresh names.
inline TermPtr substitute(const TermPtr& m, const std::string& x, const TermPtr& v,
                          FreshNames* names = nullptr);

namespace detail {
inline BoolTerm substitute_bool(const BoolTerm& b, const std::string& x,
                                const TermPtr& v, FreshNames* names) {
  if (b.kind != BoolTerm::Kind::Pred) return b;
  return b_pred(b.pred, substitute(b.arg, x, v, names));
}

// Rename the binder of a Let/Rd/LetRec if it would capture fv(v).
inline std::string maybe_rename(const std::string& binder, const TermPtr& body,
                                const std::set<std::string>& fv_v,
                                const std::string& x, FreshNames& names,
                                TermPtr& body_out) {
  if (fv_v.count(binder) == 0) {
    body_out = body;
    return binder;
  }
  std::set<std::string> avoid = all_names(body);
  avoid.insert(fv_v.begin(), fv_v.end());
  avoid.insert(x);
  std::string fresh = names.fresh(binder, avoid);
  body_out = substitute(body, binder, t_var(fresh), &names);
  return fresh;
}
}  // namespace detail

inline TermPtr substitute(const TermPtr& m, const std::string& x, const TermPtr& v,
                          FreshNames* names) {
  FreshNames local;
  FreshNames& fn = names ? *names : local;
  if (!m) return m;
  const std::set<std::string> fv_v = free_vars(v);

  if (auto* w = std::get_if<Var>(&m->node))
    return w->name == x ? v : m;
  if (std::holds_alternative<Const>(m->node) || std::holds_alternative<Star>(m->node))
    return m;
  if (auto* a = std::get_if<Add>(&m->node))
    return t_add(substitute(a->lhs, x, v, &fn), substitute(a->rhs, x, v, &fn), m->span);
  if (auto* o = std::get_if<PrimApp>(&m->node))
    return t_op(o->op, substitute(o->arg, x, v, &fn), m->span);
  if (auto* l = std::get_if<Let>(&m->node)) {
    TermPtr bound = substitute(l->bound, x, v, &fn);
    if (l->var == x) return t_let(l->var, l->ty, bound, l->body, m->span);
    TermPtr body = l->body;
    std::string b = detail::maybe_rename(l->var, body, fv_v, x, fn, body);
    return t_let(b, l->ty, bound, substitute(body, x, v, &fn), m->span);
  }
  if (auto* p = std::get_if<PairT>(&m->node))
    return t_pair(substitute(p->first, x, v, &fn), substitute(p->second, x, v, &fn),
                  m->span);
  if (auto* f = std::get_if<Fst>(&m->node))
    return t_fst(substitute(f->arg, x, v, &fn), m->span);
  if (auto* sn = std::get_if<Snd>(&m->node))
    return t_snd(substitute(sn->arg, x, v, &fn), m->span);
  if (auto* i = std::get_if<If>(&m->node))
    return t_if(detail::substitute_bool(i->guard, x, v, &fn),
                substitute(i->then_br, x, v, &fn), substitute(i->else_br, x, v, &fn),
                m->span);
  if (auto* w = std::get_if<While>(&m->node))
    return t_while(detail::substitute_bool(w->guard, x, v, &fn),
                   substitute(w->body, x, v, &fn), m->span);
  if (auto* r = std::get_if<Rd>(&m->node)) {
    TermPtr seed = substitute(r->seed, x, v, &fn);
    TermPtr point = substitute(r->point, x, v, &fn);
    if (r->var == x) return t_rd(seed, r->var, r->var_ty, r->body, point, m->span);
    TermPtr body = r->body;
    std::string b = detail::maybe_rename(r->var, body, fv_v, x, fn, body);
    return t_rd(seed, b, r->var_ty, substitute(body, x, v, &fn), point, m->span);
  }
  if (auto* c = std::get_if<FunCall>(&m->node))
    return t_call(c->fun, substitute(c->arg, x, v, &fn), m->span);
  if (auto* lr = std::get_if<LetRec>(&m->node)) {
    // Well-formed letrec bodies are closed up to their own parameter, so x
    // normally cannot occur there. Handle the ill-formed case defensively.
    if (lr->param != x && free_vars(lr->body).count(x) != 0) {
      TermPtr b2 = lr->body;
      std::string p = detail::maybe_rename(lr->param, b2, fv_v, x, fn, b2);
      return t_letrec(lr->fun, p, lr->param_ty, lr->ret_ty,
                      substitute(b2, x, v, &fn), substitute(lr->cont, x, v, &fn),
                      m->span);
    }
    return t_letrec(lr->fun, lr->param, lr->param_ty, lr->ret_ty, lr->body,
                    substitute(lr->cont, x, v, &fn), m->span);
  }
  throw std::logic_error("substitute: unhandled term node");
}

// -------------------------------------------------------- alpha-equality

namespace detail {
using NameMap = std::vector<std::pair<std::string, std::string>>;

inline bool var_eq(const NameMap& env, const std::string& a, const std::string& b) {
  for (auto it = env.rbegin(); it != env.rend(); ++it) {
    if (it->first == a || it->second == b) return it->first == a && it->second == b;
  }
  return a == b;  // both free
}

inline bool alpha_eq_rec(const TermPtr& a, const TermPtr& b, NameMap& env);

inline bool alpha_eq_bool(const BoolTerm& a, const BoolTerm& b, NameMap& env) {
  if (a.kind != b.kind) return false;
  if (a.kind != BoolTerm::Kind::Pred) return true;
  return a.pred == b.pred && alpha_eq_rec(a.arg, b.arg, env);
}

inline bool alpha_eq_rec(const TermPtr& a, const TermPtr& b, NameMap& env) {
  if (!a || !b) return a == b;
  if (a->node.index() != b->node.index()) return false;
  if (auto* va = std::get_if<Var>(&a->node))
    return var_eq(env, va->name, std::get_if<Var>(&b->node)->name);
  if (auto* ca = std::get_if<Const>(&a->node))
    return ca->value == std::get_if<Const>(&b->node)->value;
  if (std::holds_alternative<Star>(a->node)) return true;
  if (auto* aa = std::get_if<Add>(&a->node)) {
    auto* ab = std::get_if<Add>(&b->node);
    return alpha_eq_rec(aa->lhs, ab->lhs, env) && alpha_eq_rec(aa->rhs, ab->rhs, env);
  }
  if (auto* oa = std::get_if<PrimApp>(&a->node)) {
    auto* ob = std::get_if<PrimApp>(&b->node);
    return oa->op == ob->op && alpha_eq_rec(oa->arg, ob->arg, env);
  }
  if (auto* la = std::get_if<Let>(&a->node)) {
    auto* lb = std::get_if<Let>(&b->node);
    if (!(la->ty == lb->ty) || !alpha_eq_rec(la->bound, lb->bound, env)) return false;
    env.emplace_back(la->var, lb->var);
    bool ok = alpha_eq_rec(la->body, lb->body, env);
    env.pop_back();
    return ok;
  }
  if (auto* pa = std::get_if<PairT>(&a->node)) {
    auto* pb = std::get_if<PairT>(&b->node);
    return alpha_eq_rec(pa->first, pb->first, env) &&
           alpha_eq_rec(pa->second, pb->second, env);
  }
  if (auto* fa = std::get_if<Fst>(&a->node))
    return alpha_eq_rec(fa->arg, std::get_if<Fst>(&b->node)->arg, env);
  if (auto* sa = std::get_if<Snd>(&a->node))
    return alpha_eq_rec(sa->arg, std::get_if<Snd>(&b->node)->arg, env);
  if (auto* ia = std::get_if<If>(&a->node)) {
    auto* ib = std::get_if<If>(&b->node);
    return alpha_eq_bool(ia->guard, ib->guard, env) &&
           alpha_eq_rec(ia->then_br, ib->then_br, env) &&
           alpha_eq_rec(ia->else_br, ib->else_br, env);
  }
  if (auto* wa = std::get_if<While>(&a->node)) {
    auto* wb = std::get_if<While>(&b->node);
    return alpha_eq_bool(wa->guard, wb->guard, env) &&
           alpha_eq_rec(wa->body, wb->body, env);
  }
  if (auto* ra = std::get_if<Rd>(&a->node)) {
    auto* rb = std::get_if<Rd>(&b->node);
    if (!(ra->var_ty == rb->var_ty)) return false;
    if (!alpha_eq_rec(ra->seed, rb->seed, env)) return false;
    if (!alpha_eq_rec(ra->point, rb->point, env)) return false;
    env.emplace_back(ra->var, rb->var);
    bool ok = alpha_eq_rec(ra->body, rb->body, env);
    env.pop_back();
    return ok;
  }
  if (auto* ca = std::get_if<FunCall>(&a->node)) {
    auto* cb = std::get_if<FunCall>(&b->node);
    return ca->fun == cb->fun && alpha_eq_rec(ca->arg, cb->arg, env);
  }
  if (auto* la = std::get_if<LetRec>(&a->node)) {
    auto* lb = std::get_if<LetRec>(&b->node);
    if (la->fun != lb->fun) return false;  // function names are not renamed
    if (!(la->param_ty == lb->param_ty) || !(la->ret_ty == lb->ret_ty)) return false;
    env.emplace_back(la->param, lb->param);
    bool ok = alpha_eq_rec(la->body, lb->body, env);
    env.pop_back();
    return ok && alpha_eq_rec(la->cont, lb->cont, env);
  }
  return false;
}
}  // namespace detail

inline bool alpha_eq(const TermPtr& a, const TermPtr& b) {
  detail::NameMap env;
  return detail::alpha_eq_rec(a, b, env);
}

// --------------------------------------------- typed zeros and typed sums

// 0_real = 0, 0_1 = *, 0_{T*U} = (0_T, 0_U). Always a value.
inline TermPtr zero_term(const Ty& ty) {
  switch (ty.kind()) {
    case Ty::Kind::Real: return t_const(0.0);
    case Ty::Kind::Unit: return t_star();
    case Ty::Kind::Prod: return t_pair(zero_term(ty.left()), zero_term(ty.right()));
  }
  throw std::logic_error("zero_term: bad type");
}

// The typed sum m +_ty n. At real it is Add; at 1 it evaluates both sides
// (so definedness is preserved) and returns *; at products it sums the
// components through fresh let-bound names.
inline TermPtr add_terms(const Ty& ty, const TermPtr& m, const TermPtr& n,
                         FreshNames& names) {
  switch (ty.kind()) {
    case Ty::Kind::Real: return t_add(m, n);
    case Ty::Kind::Unit: {
      std::set<std::string> avoid = all_names(m);
      avoid.merge(all_names(n));
      std::string u1 = names.fresh("u", avoid);
      avoid.insert(u1);
      std::string u2 = names.fresh("u", avoid);
      return t_let(u1, Ty::unit(), m, t_let(u2, Ty::unit(), n, t_star()));
    }
    case Ty::Kind::Prod: {
      std::set<std::string> avoid = all_names(m);
      avoid.merge(all_names(n));
      std::string p = names.fresh("p", avoid);
      avoid.insert(p);
      std::string q = names.fresh("q", avoid);
      TermPtr sum = t_pair(
          add_terms(ty.left(), t_fst(t_var(p)), t_fst(t_var(q)), names),
          add_terms(ty.right(), t_snd(t_var(p)), t_snd(t_var(q)), names));
      return t_let(p, ty, m, t_let(q, ty, n, sum));
    }
  }
  throw std::logic_error("add_terms: bad type");
}

// ----------------------------------------------------- forward-mode sugar

// fd(x : A. m)(a).v — the forward differential of m at point a applied to
// the tangent v : A, defined through two nested reverse differentials:
//
//   let z : A = v in z.rd(y : B. y.rd(x : A. m)(a))(0_B)
//
// where B is the type of m. The inner rd is the reverse derivative of m;
// the outer rd transposes it back, yielding the forward derivative.
inline TermPtr fd_term(const std::string& x, const Ty& xty, const TermPtr& m,
                       const Ty& mty, const TermPtr& a, const TermPtr& v,
                       FreshNames& names) {
  std::set<std::string> avoid = all_names(m);
  avoid.merge(all_names(a));
  avoid.merge(all_names(v));
  avoid.insert(x);
  std::string z = names.fresh("z", avoid);
  avoid.insert(z);
  std::string y = names.fresh("dy", avoid);
  TermPtr inner = t_rd(t_var(y), x, xty, m, a);
  TermPtr outer = t_rd(t_var(z), y, mty, inner, zero_term(mty));
  return t_let(z, xty, v, outer);
}

// -------------------------------------------------------- number printing

// Round-trip exact float formatting ("%.17g", with a ".0" appended to
// integral values so constants stay visibly floating point).
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // 3 -> 3.0
  return s;
}

}  // namespace sdpl
