#pragma once
// sdpl/pmap.hpp
//
// Partial smooth maps R^n -> R^m as immutable combinator expression graphs,
// together with a numeric evaluator and the structural reverse / forward
// derivative operators.
//
// Conventions:
//   * compose(f, g) is diagrammatic: first f, then g.
//   * products are flattened — an object is just a dimension, and pairing
//     concatenates coordinates, so nested products need no associators.
//   * a map is undefined at a point when a primitive's domain predicate
//     fails or any produced coordinate is non-finite (IEEE overflow is
//     treated as falling off the domain).
//   * reverse(f) denotes R[f] : dom+cod -> dom lazily; reverse_derivative
//     computes the same map structurally.
//
// Evaluation memoizes (node, input) pairs, so heavily shared graphs — loop
// joins, iterated derivatives — evaluate in time proportional to the number
// of distinct node/point combinations actually reached.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sdpl {

struct PMap;
using PMapPtr = std::shared_ptr<const PMap>;

enum class PKind {
  Identity,
  Compose,
  Pair,
  Proj0,
  Proj1,
  Inj0,
  Inj1,
  Zero,
  AddMaps,
  ConstPoint,
  Prim,
  Restrict,
  Join,
  Empty,
  Reverse,
  Bang,
};

struct PMap {
  PKind kind;
  int dom = 0, cod = 0;
  PMapPtr a, b;                  // Compose (a then b), Pair, AddMaps, Restrict(a), Reverse(a)
  std::vector<PMapPtr> members;  // Join
  std::vector<double> point;     // ConstPoint
  std::string prim;              // Prim
};

using EvalResult = std::optional<std::vector<double>>;

class JoinConflict : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class MissingReversePrimitive : public std::runtime_error {
public:
  explicit MissingReversePrimitive(const std::string& op)
      : std::runtime_error("no reverse primitive registered for '" + op + "'"),
        op_name(op) {}
  std::string op_name;
};

// ------------------------------------------------------------ primitives

struct PrimDef {
  int dom = 1, cod = 1;
  // exactly one of eval / graph is set: either a native evaluator (returns
  // nullopt outside the domain) or a defining combinator graph
  std::function<EvalResult(const std::vector<double>&)> eval;
  PMapPtr graph;
  std::optional<std::string> reverse_name;
};

struct PrimTable {
  std::map<std::string, PrimDef> defs;
  bool has(const std::string& n) const { return defs.count(n) != 0; }
  const PrimDef& at(const std::string& n) const {
    auto it = defs.find(n);
    if (it == defs.end()) throw std::out_of_range("unknown primitive: " + n);
    return it->second;
  }
};

// ----------------------------------------------------------- constructors

namespace detail {
inline PMapPtr mk_pmap(PMap m) { return std::make_shared<const PMap>(std::move(m)); }
inline void require(bool cond, const char* what) {
  if (!cond) throw std::logic_error(std::string("pmap: ") + what);
}
}  // namespace detail

inline PMapPtr identity(int n) {
  detail::require(n >= 0, "identity: negative dim");
  return detail::mk_pmap({PKind::Identity, n, n, nullptr, nullptr, {}, {}, ""});
}

// f then g (diagrammatic order)
inline PMapPtr compose(PMapPtr f, PMapPtr g) {
  detail::require(f && g, "compose: null");
  detail::require(f->cod == g->dom, "compose: dimension mismatch");
  if (f->kind == PKind::Identity) return g;
  if (g->kind == PKind::Identity) return f;
  return detail::mk_pmap(
      {PKind::Compose, f->dom, g->cod, std::move(f), std::move(g), {}, {}, ""});
}

inline PMapPtr pair_map(PMapPtr f, PMapPtr g) {
  detail::require(f && g, "pair: null");
  detail::require(f->dom == g->dom, "pair: domain mismatch");
  return detail::mk_pmap({PKind::Pair, f->dom, f->cod + g->cod, std::move(f),
                          std::move(g), {}, {}, ""});
}

inline PMapPtr proj0(int a, int b) {
  detail::require(a >= 0 && b >= 0, "proj0: negative dim");
  return detail::mk_pmap({PKind::Proj0, a + b, a, nullptr, nullptr, {}, {}, ""});
}

inline PMapPtr proj1(int a, int b) {
  detail::require(a >= 0 && b >= 0, "proj1: negative dim");
  return detail::mk_pmap({PKind::Proj1, a + b, b, nullptr, nullptr, {}, {}, ""});
}

// zero-padded coprojections: inj0 = <1, 0> : A -> A x B, inj1 = <0, 1> : B -> A x B
inline PMapPtr inj0(int a, int b) {
  detail::require(a >= 0 && b >= 0, "inj0: negative dim");
  return detail::mk_pmap({PKind::Inj0, a, a + b, nullptr, nullptr, {}, {}, ""});
}

inline PMapPtr inj1(int a, int b) {
  detail::require(a >= 0 && b >= 0, "inj1: negative dim");
  return detail::mk_pmap({PKind::Inj1, b, a + b, nullptr, nullptr, {}, {}, ""});
}

inline PMapPtr zero_map(int dom, int cod) {
  detail::require(dom >= 0 && cod >= 0, "zero: negative dim");
  return detail::mk_pmap({PKind::Zero, dom, cod, nullptr, nullptr, {}, {}, ""});
}

inline PMapPtr add_maps(PMapPtr f, PMapPtr g) {
  detail::require(f && g, "add: null");
  detail::require(f->dom == g->dom && f->cod == g->cod, "add: dimension mismatch");
  return detail::mk_pmap(
      {PKind::AddMaps, f->dom, f->cod, std::move(f), std::move(g), {}, {}, ""});
}

inline PMapPtr const_point(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return detail::mk_pmap({PKind::ConstPoint, 0, n, nullptr, nullptr, {}, std::move(v), ""});
}

inline PMapPtr prim_node(std::string name, int dom, int cod) {
  return detail::mk_pmap(
      {PKind::Prim, dom, cod, nullptr, nullptr, {}, {}, std::move(name)});
}

inline PMapPtr prim(const PrimTable& table, const std::string& name) {
  const PrimDef& d = table.at(name);
  return prim_node(name, d.dom, d.cod);
}

inline PMapPtr restrict_map(PMapPtr f) {
  detail::require(f != nullptr, "restrict: null");
  if (f->kind == PKind::Restrict) return f;           // idempotent
  if (f->kind == PKind::Identity) return f;           // identities are total
  int n = f->dom;
  return detail::mk_pmap({PKind::Restrict, n, n, std::move(f), nullptr, {}, {}, ""});
}

inline PMapPtr join(std::vector<PMapPtr> members) {
  detail::require(!members.empty(), "join: empty member list");
  for (const auto& m : members) {
    detail::require(m != nullptr, "join: null member");
    detail::require(m->dom == members[0]->dom && m->cod == members[0]->cod,
                    "join: dimension mismatch");
  }
  if (members.size() == 1) return members[0];
  int dom = members[0]->dom, cod = members[0]->cod;
  return detail::mk_pmap(
      {PKind::Join, dom, cod, nullptr, nullptr, std::move(members), {}, ""});
}

inline PMapPtr empty_map(int dom, int cod) {
  detail::require(dom >= 0 && cod >= 0, "empty: negative dim");
  return detail::mk_pmap({PKind::Empty, dom, cod, nullptr, nullptr, {}, {}, ""});
}

inline PMapPtr reverse(PMapPtr f) {
  detail::require(f != nullptr, "reverse: null");
  int dom = f->dom + f->cod, cod = f->dom;
  return detail::mk_pmap({PKind::Reverse, dom, cod, std::move(f), nullptr, {}, {}, ""});
}

inline PMapPtr bang(int n) {
  detail::require(n >= 0, "bang: negative dim");
  return detail::mk_pmap({PKind::Bang, n, 0, nullptr, nullptr, {}, {}, ""});
}

// f x g : A x C -> B x D
inline PMapPtr cross(PMapPtr f, PMapPtr g) {
  int a = f->dom, c = g->dom;
  return pair_map(compose(proj0(a, c), f), compose(proj1(a, c), g));
}

// select coordinates [lo, lo+len) of an n-dimensional input
inline PMapPtr slice(int n, int lo, int len) {
  detail::require(lo >= 0 && len >= 0 && lo + len <= n, "slice: out of range");
  PMapPtr m = identity(n);
  if (lo > 0) m = compose(m, proj1(lo, n - lo));
  if (lo + len < n) m = compose(m, proj0(len, n - lo - len));
  return m;
}

// select coordinate i of an n-dimensional input
inline PMapPtr coord(int n, int i) { return slice(n, i, 1); }

inline size_t graph_size(const PMapPtr& f) {
  std::map<const PMap*, bool> seen;
  std::function<void(const PMapPtr&)> go = [&](const PMapPtr& m) {
    if (!m || seen.count(m.get())) return;
    seen[m.get()] = true;
    go(m->a);
    go(m->b);
    for (const auto& c : m->members) go(c);
  };
  go(f);
  return seen.size();
}

// -------------------------------------------------------------- evaluation

namespace detail {

struct PtKey {
  const PMap* node;
  std::vector<double> in;
  bool operator==(const PtKey& o) const { return node == o.node && in == o.in; }
};

struct PtKeyHash {
  size_t operator()(const PtKey& k) const {
    size_t h = std::hash<const void*>()(k.node);
    for (double d : k.in) {
      uint64_t bits;
      static_assert(sizeof bits == sizeof d);
      std::memcpy(&bits, &d, sizeof bits);
      h ^= std::hash<uint64_t>()(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct EvalCtx {
  const PrimTable& table;
  std::unordered_map<PtKey, EvalResult, PtKeyHash> memo;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double d : v)
    if (!std::isfinite(d)) return false;
  return true;
}

inline PMapPtr reverse_derivative_impl(const PrimTable& table, const PMapPtr& f);

inline EvalResult eval_rec(EvalCtx& cx, const PMapPtr& f, const std::vector<double>& x);

inline EvalResult eval_uncached(EvalCtx& cx, const PMapPtr& f,
                                const std::vector<double>& x) {
  switch (f->kind) {
    case PKind::Identity:
      return x;
    case PKind::Compose: {
      EvalResult mid = eval_rec(cx, f->a, x);
      if (!mid) return std::nullopt;
      return eval_rec(cx, f->b, *mid);
    }
    case PKind::Pair: {
      EvalResult l = eval_rec(cx, f->a, x);
      if (!l) return std::nullopt;
      EvalResult r = eval_rec(cx, f->b, x);
      if (!r) return std::nullopt;
      l->insert(l->end(), r->begin(), r->end());
      return l;
    }
    case PKind::Proj0:
      return std::vector<double>(x.begin(), x.begin() + f->cod);
    case PKind::Proj1:
      return std::vector<double>(x.end() - f->cod, x.end());
    case PKind::Inj0: {
      std::vector<double> out = x;
      out.resize(static_cast<size_t>(f->cod), 0.0);
      return out;
    }
    case PKind::Inj1: {
      std::vector<double> out(static_cast<size_t>(f->cod - f->dom), 0.0);
      out.insert(out.end(), x.begin(), x.end());
      return out;
    }
    case PKind::Zero:
      return std::vector<double>(static_cast<size_t>(f->cod), 0.0);
    case PKind::AddMaps: {
      EvalResult l = eval_rec(cx, f->a, x);
      if (!l) return std::nullopt;
      EvalResult r = eval_rec(cx, f->b, x);
      if (!r) return std::nullopt;
      for (size_t i = 0; i < l->size(); ++i) (*l)[i] += (*r)[i];
      if (!all_finite(*l)) return std::nullopt;
      return l;
    }
    case PKind::ConstPoint:
      return f->point;
    case PKind::Prim: {
      const PrimDef& d = cx.table.at(f->prim);
      EvalResult r = d.eval ? d.eval(x) : eval_rec(cx, d.graph, x);
      if (r && !all_finite(*r)) return std::nullopt;
      return r;
    }
    case PKind::Restrict: {
      EvalResult r = eval_rec(cx, f->a, x);
      if (!r) return std::nullopt;
      return x;
    }
    case PKind::Join: {
      EvalResult out;
      for (const auto& m : f->members) {
        EvalResult r = eval_rec(cx, m, x);
        if (!r) continue;
        if (!out) {
          out = r;
          continue;
        }
        for (size_t i = 0; i < r->size(); ++i)
          if (std::fabs((*r)[i] - (*out)[i]) > 1e-9)
            throw JoinConflict("join members disagree at a common point");
      }
      return out;
    }
    case PKind::Empty:
      return std::nullopt;
    case PKind::Reverse:
      // one structural rewrite step, then evaluate
      return eval_rec(cx, reverse_derivative_impl(cx.table, f->a), x);
    case PKind::Bang:
      return std::vector<double>{};
  }
  throw std::logic_error("evaluate: unhandled node kind");
}

inline EvalResult eval_rec(EvalCtx& cx, const PMapPtr& f, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != f->dom)
    throw std::logic_error("evaluate: input dimension mismatch");
  switch (f->kind) {
    // trivially cheap nodes skip the memo table
    case PKind::Identity:
    case PKind::Proj0:
    case PKind::Proj1:
    case PKind::Inj0:
    case PKind::Inj1:
    case PKind::Zero:
    case PKind::ConstPoint:
    case PKind::Empty:
    case PKind::Bang:
      return eval_uncached(cx, f, x);
    default:
      break;
  }
  PtKey key{f.get(), x};
  auto it = cx.memo.find(key);
  if (it != cx.memo.end()) return it->second;
  EvalResult r = eval_uncached(cx, f, x);
  cx.memo.emplace(std::move(key), r);
  return r;
}

}  // namespace detail

inline EvalResult evaluate(const PrimTable& table, const PMapPtr& f,
                           const std::vector<double>& x) {
  detail::EvalCtx cx{table, {}};
  return detail::eval_rec(cx, f, x);
}

// ------------------------------------------------------ reverse derivative

namespace detail {

struct RdrvCtx {
  const PrimTable& table;
  std::map<const PMap*, PMapPtr> memo;
};

inline PMapPtr rdrv(RdrvCtx& cx, const PMapPtr& f);

inline PMapPtr rdrv_uncached(RdrvCtx& cx, const PMapPtr& f) {
  const int A = f->dom, B = f->cod;
  switch (f->kind) {
    case PKind::Identity:
      return proj1(A, A);
    case PKind::Compose: {
      // R[fg] = <pi0, <pi0 f, pi1> R[g]> R[f]
      const PMapPtr& g = f->b;
      const int C = g->cod;
      PMapPtr p0 = proj0(A, C), p1 = proj1(A, C);
      PMapPtr inner = compose(pair_map(compose(p0, f->a), p1), rdrv(cx, g));
      return compose(pair_map(p0, inner), rdrv(cx, f->a));
    }
    case PKind::Pair: {
      // R[<f,g>] = (1 x pi0) R[f] + (1 x pi1) R[g]
      const int Bf = f->a->cod, Bg = f->b->cod;
      PMapPtr l = compose(cross(identity(A), proj0(Bf, Bg)), rdrv(cx, f->a));
      PMapPtr r = compose(cross(identity(A), proj1(Bf, Bg)), rdrv(cx, f->b));
      return add_maps(l, r);
    }
    case PKind::Proj0: {
      // R[pi0] = pi1 iota0
      const int a = f->cod, b = f->dom - f->cod;
      return compose(proj1(a + b, a), inj0(a, b));
    }
    case PKind::Proj1: {
      const int b = f->cod, a = f->dom - f->cod;
      return compose(proj1(a + b, b), inj1(a, b));
    }
    case PKind::Inj0: {
      // iota0 = <1, 0>, so R[iota0] = (1 x pi0) pi1 = pi1 pi0
      const int a = f->dom, b = f->cod - f->dom;
      return compose(proj1(a, a + b), proj0(a, b));
    }
    case PKind::Inj1: {
      const int b = f->dom, a = f->cod - f->dom;
      return compose(proj1(b, a + b), proj1(a, b));
    }
    case PKind::Zero:
      return zero_map(A + B, A);
    case PKind::AddMaps:
      return add_maps(rdrv(cx, f->a), rdrv(cx, f->b));
    case PKind::ConstPoint:
      // points are total, so R[c] : 0+B -> 0 is the (empty) zero map
      return bang(B);
    case PKind::Prim: {
      const PrimDef& d = cx.table.at(f->prim);
      if (!d.reverse_name) throw MissingReversePrimitive(f->prim);
      return prim_node(*d.reverse_name, A + B, A);
    }
    case PKind::Restrict:
      // R[restrict(f)] = (restrict(f) x 1) pi1
      return compose(cross(restrict_map(f->a), identity(A)), proj1(A, A));
    case PKind::Join: {
      std::vector<PMapPtr> ms;
      ms.reserve(f->members.size());
      for (const auto& m : f->members) ms.push_back(rdrv(cx, m));
      return join(std::move(ms));
    }
    case PKind::Empty:
      return empty_map(A + B, A);
    case PKind::Reverse:
      return rdrv(cx, rdrv(cx, f->a));
    case PKind::Bang:
      return zero_map(A, A);
  }
  throw std::logic_error("reverse_derivative: unhandled node kind");
}

inline PMapPtr rdrv(RdrvCtx& cx, const PMapPtr& f) {
  auto it = cx.memo.find(f.get());
  if (it != cx.memo.end()) return it->second;
  PMapPtr r = rdrv_uncached(cx, f);
  cx.memo.emplace(f.get(), r);
  return r;
}

inline PMapPtr reverse_derivative_impl(const PrimTable& table, const PMapPtr& f) {
  RdrvCtx cx{table, {}};
  return rdrv(cx, f);
}

}  // namespace detail

// R[f] : A x B -> A, computed structurally.
inline PMapPtr reverse_derivative(const PrimTable& table, const PMapPtr& f) {
  return detail::reverse_derivative_impl(table, f);
}

// D[f] = (iota0 x 1) R[R[f]] pi1 : A x A -> B, the forward derivative.
inline PMapPtr forward_derivative(const PrimTable& table, const PMapPtr& f) {
  const int a = f->dom, b = f->cod;
  PMapPtr rr = reverse_derivative(table, reverse_derivative(table, f));
  PMapPtr pre = cross(inj0(a, b), identity(a));  // A x A -> (A x B) x A
  return compose(compose(pre, rr), proj1(a, b));
}

// f^{dagger[A]} = (iota0 x 1) R[f] pi1 : A x C -> B for f : A x B -> C.
inline PMapPtr dagger_ctx(const PrimTable& table, const PMapPtr& f, int a_dim) {
  detail::require(a_dim >= 0 && a_dim <= f->dom, "dagger: bad context dim");
  const int b = f->dom - a_dim, c = f->cod;
  PMapPtr pre = cross(inj0(a_dim, b), identity(c));  // A x C -> (A x B) x C
  return compose(compose(pre, reverse_derivative(table, f)), proj1(a_dim, b));
}

// -------------------------------------------- restriction order (sampled)

// f <= g : wherever f is defined, g is defined and agrees.
inline bool leq(const PrimTable& table, const PMapPtr& f, const PMapPtr& g,
                const std::vector<std::vector<double>>& points, double tol = 1e-9) {
  for (const auto& p : points) {
    EvalResult rf = evaluate(table, f, p);
    if (!rf) continue;
    EvalResult rg = evaluate(table, g, p);
    if (!rg) return false;
    for (size_t i = 0; i < rf->size(); ++i)
      if (std::fabs((*rf)[i] - (*rg)[i]) > tol) return false;
  }
  return true;
}

// f and g agree wherever both are defined.
inline bool compatible(const PrimTable& table, const PMapPtr& f, const PMapPtr& g,
                       const std::vector<std::vector<double>>& points,
                       double tol = 1e-9) {
  for (const auto& p : points) {
    EvalResult rf = evaluate(table, f, p);
    if (!rf) continue;
    EvalResult rg = evaluate(table, g, p);
    if (!rg) continue;
    for (size_t i = 0; i < rf->size(); ++i)
      if (std::fabs((*rf)[i] - (*rg)[i]) > tol) return false;
  }
  return true;
}

// f and g are nowhere both defined.
inline bool disjoint(const PrimTable& table, const PMapPtr& f, const PMapPtr& g,
                     const std::vector<std::vector<double>>& points) {
  for (const auto& p : points)
    if (evaluate(table, f, p) && evaluate(table, g, p)) return false;
  return true;
}

}  // namespace sdpl
