#pragma once
// sdpl/axioms.hpp
//
// Numeric checkers for the reverse-derivative axioms of the partial-map
// backend, for the derived forward derivative, and for the finite-difference
// oracles.  Each checker samples the two sides of an equation on supplied
// points and reports agreement (same definedness, values within tolerance)
// or a skip when the equation's construction needs a reverse form of a
// primitive beyond the table's closure depth.

#include <cmath>
#include <string>
#include <vector>

#include "gen.hpp"
#include "pmap.hpp"

namespace sdpl {

struct CheckResult {
  int points = 0;     // probes where the comparison was decidable
  int failures = 0;
  double max_dev = 0.0;
  bool skipped = false;
  std::string skip_reason;
  bool ok() const { return !skipped && failures == 0; }
};

namespace detail {

// compare two maps at one input; undefined-vs-undefined agrees
inline void compare_at(const PrimTable& t, const PMapPtr& f, const PMapPtr& g,
                       const std::vector<double>& x, double tol, CheckResult& r) {
  EvalResult a = evaluate(t, f, x);
  EvalResult b = evaluate(t, g, x);
  if (a.has_value() != b.has_value()) {
    ++r.points;
    ++r.failures;
    return;
  }
  if (!a) return;  // both undefined: no information, but no failure
  ++r.points;
  for (size_t i = 0; i < a->size(); ++i) {
    double dev = std::fabs((*a)[i] - (*b)[i]);
    if (dev > r.max_dev) r.max_dev = dev;
    if (!(dev <= tol)) {
      ++r.failures;
      return;
    }
  }
}

inline CheckResult compare_maps(const PrimTable& t, const PMapPtr& f,
                                const PMapPtr& g,
                                const std::vector<std::vector<double>>& pts,
                                double tol) {
  CheckResult r;
  if (f->dom != g->dom || f->cod != g->cod) {
    r.failures = 1;
    return r;
  }
  for (const auto& x : pts) compare_at(t, f, g, x, tol, r);
  return r;
}

template <typename F>
inline CheckResult guard_missing(F&& body) {
  try {
    return body();
  } catch (const MissingReversePrimitive& e) {
    CheckResult r;
    r.skipped = true;
    r.skip_reason = e.op_name;
    return r;
  }
}

}  // namespace detail

// ---------------------------------------------------------------- axioms

// additivity in the map: R[f+g] = R[f]+R[g], and R[0] = 0
inline CheckResult check_rd1(const PrimTable& t, const PMapPtr& f, const PMapPtr& g,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    PMapPtr lhs = reverse_derivative(t, add_maps(f, g));
    PMapPtr rhs = add_maps(reverse_derivative(t, f), reverse_derivative(t, g));
    CheckResult r = detail::compare_maps(t, lhs, rhs, pts, tol);
    PMapPtr z = zero_map(f->dom, f->cod);
    CheckResult rz = detail::compare_maps(t, reverse_derivative(t, z),
                                          zero_map(f->dom + f->cod, f->dom), pts, tol);
    r.points += rz.points;
    r.failures += rz.failures;
    r.max_dev = std::max(r.max_dev, rz.max_dev);
    return r;
  });
}

// additivity in the direction: R[f](p, w1+w2) = R[f](p,w1) + R[f](p,w2),
// and R[f](p, 0) = 0 exactly when f is defined at p
inline CheckResult check_rd2(const PrimTable& t, const PMapPtr& f,
                             const std::vector<std::vector<double>>& pts,
                             const std::vector<std::vector<double>>& dir_pairs,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    CheckResult r;
    PMapPtr rf = reverse_derivative(t, f);
    const int B = f->cod;
    for (size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      const auto& ws = dir_pairs[i % dir_pairs.size()];
      std::vector<double> w1(ws.begin(), ws.begin() + B);
      std::vector<double> w2(ws.begin() + B, ws.end());
      auto in = [&p](const std::vector<double>& w) {
        std::vector<double> x = p;
        x.insert(x.end(), w.begin(), w.end());
        return x;
      };
      std::vector<double> wsum(static_cast<size_t>(B));
      for (int j = 0; j < B; ++j) wsum[static_cast<size_t>(j)] = w1[j] + w2[j];

      EvalResult rsum = evaluate(t, rf, in(wsum));
      EvalResult r1 = evaluate(t, rf, in(w1));
      EvalResult r2 = evaluate(t, rf, in(w2));
      if (rsum.has_value() != (r1.has_value() && r2.has_value())) {
        ++r.points;
        ++r.failures;
        continue;
      }
      if (rsum) {
        ++r.points;
        for (size_t j = 0; j < rsum->size(); ++j) {
          double dev = std::fabs((*rsum)[j] - ((*r1)[j] + (*r2)[j]));
          r.max_dev = std::max(r.max_dev, dev);
          if (!(dev <= tol)) {
            ++r.failures;
            break;
          }
        }
      }
      // zero direction: defined exactly where f is, and exactly zero
      EvalResult rz = evaluate(t, rf, in(std::vector<double>(B, 0.0)));
      EvalResult fp = evaluate(t, f, p);
      ++r.points;
      if (rz.has_value() != fp.has_value()) {
        ++r.failures;
        continue;
      }
      if (rz)
        for (double d : *rz)
          if (d != 0.0) {
            ++r.failures;
            break;
          }
    }
    return r;
  });
}

// projections: R[pi_j] = pi1 iota_j (checked against hand-built witnesses);
// pts0 must have dimension (a+b)+a and pts1 dimension (a+b)+b
inline CheckResult check_rd3(const PrimTable& t, int a, int b,
                             const std::vector<std::vector<double>>& pts0,
                             const std::vector<std::vector<double>>& pts1,
                             double tol = 1e-9) {
  CheckResult r0 = detail::compare_maps(
      t, reverse_derivative(t, proj0(a, b)),
      compose(proj1(a + b, a), inj0(a, b)), pts0, tol);
  CheckResult r1 = detail::compare_maps(
      t, reverse_derivative(t, proj1(a, b)),
      compose(proj1(a + b, b), inj1(a, b)), pts1, tol);
  r0.points += r1.points;
  r0.failures += r1.failures;
  r0.max_dev = std::max(r0.max_dev, r1.max_dev);
  return r0;
}

// pairing: R[<f,g>] = (1 x pi0) R[f] + (1 x pi1) R[g]
inline CheckResult check_rd4(const PrimTable& t, const PMapPtr& f, const PMapPtr& g,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    const int A = f->dom, Bf = f->cod, Bg = g->cod;
    PMapPtr lhs = reverse_derivative(t, pair_map(f, g));
    PMapPtr l = compose(cross(identity(A), proj0(Bf, Bg)), reverse_derivative(t, f));
    PMapPtr rr = compose(cross(identity(A), proj1(Bf, Bg)), reverse_derivative(t, g));
    return detail::compare_maps(t, lhs, add_maps(l, rr), pts, tol);
  });
}

// composition: R[fg] = <pi0, <pi0 f, pi1> R[g]> R[f]
inline CheckResult check_rd5(const PrimTable& t, const PMapPtr& f, const PMapPtr& g,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    const int A = f->dom, C = g->cod;
    PMapPtr lhs = reverse_derivative(t, compose(f, g));
    PMapPtr p0 = proj0(A, C), p1 = proj1(A, C);
    PMapPtr inner = compose(pair_map(compose(p0, f), p1), reverse_derivative(t, g));
    PMapPtr rhs = compose(pair_map(p0, inner), reverse_derivative(t, f));
    return detail::compare_maps(t, lhs, rhs, pts, tol);
  });
}

// linearity of the derivative in the direction argument:
//   D[R[f]]((x,w1),(0,w2)) = R[f](x,w2)   on A x (B x B)
inline CheckResult check_rd6(const PrimTable& t, const PMapPtr& f,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    const int A = f->dom, B = f->cod;
    PMapPtr rf = reverse_derivative(t, f);
    PMapPtr drf = forward_derivative(t, rf);  // (A+B)+(A+B) -> A
    const int n = A + 2 * B;
    PMapPtr px = slice(n, 0, A), pw1 = slice(n, A, B), pw2 = slice(n, A + B, B);
    PMapPtr lhs = compose(
        pair_map(pair_map(px, pw1), pair_map(zero_map(n, A), pw2)), drf);
    PMapPtr rhs = compose(pair_map(px, pw2), rf);
    return detail::compare_maps(t, lhs, rhs, pts, tol);
  });
}

// symmetry of the second derivative: D[D[f]] = D[D[f]] after exchanging the
// two inner arguments: ((a,b),(c,d)) -> ((a,c),(b,d))
inline CheckResult check_rd7(const PrimTable& t, const PMapPtr& f,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  return detail::guard_missing([&] {
    const int A = f->dom;
    PMapPtr d2 = forward_derivative(t, forward_derivative(t, f));
    const int n = 4 * A;
    PMapPtr ex = pair_map(
        pair_map(slice(n, 0, A), slice(n, 2 * A, A)),
        pair_map(slice(n, A, A), slice(n, 3 * A, A)));
    return detail::compare_maps(t, d2, compose(ex, d2), pts, tol);
  });
}

// definedness: R[f] is defined at (p,w) exactly when f is defined at p
inline CheckResult check_rd8(const PrimTable& t, const PMapPtr& f,
                             const std::vector<std::vector<double>>& pts,
                             double /*tol*/ = 1e-9) {
  return detail::guard_missing([&] {
    CheckResult r;
    PMapPtr rf = reverse_derivative(t, f);
    for (const auto& x : pts) {
      std::vector<double> p(x.begin(), x.begin() + f->dom);
      ++r.points;
      if (evaluate(t, rf, x).has_value() != evaluate(t, f, p).has_value())
        ++r.failures;
    }
    return r;
  });
}

// restrictions: R[restrict(f)] = (restrict(f) x 1) pi1
inline CheckResult check_rd9(const PrimTable& t, const PMapPtr& f,
                             const std::vector<std::vector<double>>& pts,
                             double tol = 1e-9) {
  const int A = f->dom;
  PMapPtr rbar = restrict_map(f);
  PMapPtr lhs = reverse_derivative(t, rbar);
  PMapPtr rhs = compose(cross(rbar, identity(A)), proj1(A, A));
  return detail::compare_maps(t, lhs, rhs, pts, tol);
}

// --------------------------------------------------- derivative vs oracle

namespace detail {

// Central difference of `f` at `p` along `v` at step `h`; nullopt when any
// probe leaves the domain.
inline std::optional<std::vector<double>> central_diff(
    const PrimTable& t, const PMapPtr& f, const std::vector<double>& p,
    const std::vector<double>& v, double h) {
  std::vector<double> pp = p, pm = p;
  for (size_t i = 0; i < p.size(); ++i) {
    pp[i] += h * v[i];
    pm[i] -= h * v[i];
  }
  EvalResult fp = evaluate(t, f, pp), fm = evaluate(t, f, pm);
  if (!fp || !fm) return std::nullopt;
  std::vector<double> d(fp->size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = ((*fp)[i] - (*fm)[i]) / (2 * h);
  return d;
}

// Self-certifying directional-derivative oracle: estimates at h and h/2 must
// agree to 1% relative or the oracle abstains (the probe point is too stiff
// for finite differences to testify).  On agreement, returns the Richardson
// extrapolation of the two estimates, which is fourth-order accurate.
inline std::optional<std::vector<double>> fd_oracle(
    const PrimTable& t, const PMapPtr& f, const std::vector<double>& p,
    const std::vector<double>& v, double h) {
  auto d1 = central_diff(t, f, p, v, h);
  auto d2 = central_diff(t, f, p, v, h / 2);
  if (!d1 || !d2) return std::nullopt;
  std::vector<double> out(d1->size());
  for (size_t i = 0; i < out.size(); ++i) {
    double scale = std::max({1.0, std::fabs((*d1)[i]), std::fabs((*d2)[i])});
    if (std::fabs((*d1)[i] - (*d2)[i]) > 1e-2 * scale) return std::nullopt;
    out[i] = (4 * (*d2)[i] - (*d1)[i]) / 3;
  }
  return out;
}

}  // namespace detail

// forward derivative against the finite-difference oracle along direction v
inline CheckResult check_forward_fd(const PrimTable& t, const PMapPtr& f,
                                    const std::vector<std::vector<double>>& pts_dirs,
                                    double h = 1e-5, double tol = 1e-4) {
  return detail::guard_missing([&] {
    CheckResult r;
    PMapPtr df = forward_derivative(t, f);
    const int A = f->dom;
    for (const auto& pv : pts_dirs) {
      std::vector<double> p(pv.begin(), pv.begin() + A);
      std::vector<double> v(pv.begin() + A, pv.end());
      EvalResult d = evaluate(t, df, pv);
      if (!d) continue;
      auto fd = detail::fd_oracle(t, f, p, v, h);
      if (!fd) continue;  // oracle abstains
      ++r.points;
      for (size_t i = 0; i < d->size(); ++i) {
        double scale = std::max({1.0, std::fabs((*d)[i]), std::fabs((*fd)[i])});
        double dev = std::fabs((*d)[i] - (*fd)[i]) / scale;
        r.max_dev = std::max(r.max_dev, dev);
        if (!(dev <= tol)) {
          ++r.failures;
          break;
        }
      }
    }
    return r;
  });
}

// reverse derivative against the transposed-Jacobian identity
//   <R[f](p,w), v> = <w, d/dh f(p+hv)>
inline CheckResult check_reverse_fd(const PrimTable& t, const PMapPtr& f,
                                    const std::vector<std::vector<double>>& pts_w_v,
                                    double h = 1e-5, double tol = 1e-4) {
  return detail::guard_missing([&] {
    CheckResult r;
    PMapPtr rf = reverse_derivative(t, f);
    const int A = f->dom, B = f->cod;
    for (const auto& pwv : pts_w_v) {
      std::vector<double> p(pwv.begin(), pwv.begin() + A);
      std::vector<double> w(pwv.begin() + A, pwv.begin() + A + B);
      std::vector<double> v(pwv.begin() + A + B, pwv.end());
      std::vector<double> pw = p;
      pw.insert(pw.end(), w.begin(), w.end());
      EvalResult rw = evaluate(t, rf, pw);
      if (!rw) continue;
      auto jv = detail::fd_oracle(t, f, p, v, h);
      if (!jv) continue;  // oracle abstains
      ++r.points;
      double lhs = 0.0, rhs = 0.0, scale = 1.0;
      for (int i = 0; i < A; ++i) {
        lhs += (*rw)[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        scale = std::max(scale, std::fabs((*rw)[static_cast<size_t>(i)]));
      }
      for (int i = 0; i < B; ++i)
        rhs += w[static_cast<size_t>(i)] * (*jv)[static_cast<size_t>(i)];
      scale = std::max({scale, std::fabs(lhs), std::fabs(rhs)});
      double dev = std::fabs(lhs - rhs) / scale;
      r.max_dev = std::max(r.max_dev, dev);
      if (!(dev <= tol)) ++r.failures;
    }
    return r;
  });
}

// transposing the forward derivative recovers the reverse derivative:
//   D[f]^{dagger[A]} = R[f]
inline CheckResult check_dagger_roundtrip(const PrimTable& t, const PMapPtr& f,
                                          const std::vector<std::vector<double>>& pts,
                                          double tol = 1e-9) {
  return detail::guard_missing([&] {
    PMapPtr lhs = dagger_ctx(t, forward_derivative(t, f), f->dom);
    return detail::compare_maps(t, lhs, reverse_derivative(t, f), pts, tol);
  });
}

// the reverse derivative is monotone for the restriction order (sampled)
inline CheckResult check_monotone(const PrimTable& t, const PMapPtr& f,
                                  const PMapPtr& g,
                                  const std::vector<std::vector<double>>& pts_fw,
                                  const std::vector<std::vector<double>>& pts_p,
                                  double tol = 1e-9) {
  return detail::guard_missing([&] {
    CheckResult r;
    ++r.points;
    if (!leq(t, f, g, pts_p, tol)) return r;  // premise fails: vacuous
    if (!leq(t, reverse_derivative(t, f), reverse_derivative(t, g), pts_fw, tol))
      ++r.failures;
    return r;
  });
}

// ---------------------------------------------------------- aggregate suite

struct AxiomRow {
  std::string name;
  int maps = 0;      // maps the check ran on
  int points = 0;    // decidable comparisons
  int failures = 0;
  int skips = 0;     // constructions beyond the table's reverse closure
  double max_dev = 0.0;
  bool ok() const { return failures == 0; }
};

namespace detail {

inline void fold_into(AxiomRow& row, const CheckResult& r) {
  if (r.skipped) {
    ++row.skips;
    return;
  }
  ++row.maps;
  row.points += r.points;
  row.failures += r.failures;
  row.max_dev = std::max(row.max_dev, r.max_dev);
}

}  // namespace detail

// Run every axiom and derived-operator check over `n_maps` generated maps
// with `pts_per` sample points each.  Rows come back in a fixed order:
// RD.1..RD.9, then R-vs-FD, D-vs-FD, dagger, monotone.
inline std::vector<AxiomRow> run_axiom_suite(const PrimTable& t, Rng& rng,
                                             int n_maps, int pts_per,
                                             int map_depth = 4,
                                             double tol_alg = 1e-9,
                                             double tol_fd = 1e-4,
                                             double fd_h = 1e-5) {
  std::vector<AxiomRow> rows(13);
  const char* names[] = {"RD.1", "RD.2", "RD.3", "RD.4", "RD.5", "RD.6",
                         "RD.7", "RD.8", "RD.9", "R-vs-FD", "D-vs-FD",
                         "dagger", "monotone"};
  for (size_t i = 0; i < rows.size(); ++i) rows[i].name = names[i];

  for (int m = 0; m < n_maps; ++m) {
    int a = 1 + static_cast<int>(rng() % 3);
    int b = 1 + static_cast<int>(rng() % 2);
    int depth = 1 + static_cast<int>(rng() % static_cast<unsigned>(map_depth));
    PMapPtr f = gen_map(rng, t, a, b, depth);
    PMapPtr g = gen_map(rng, t, a, b, depth);
    PMapPtr h = gen_map(rng, t, b, 2, depth);

    auto pts = [&](int n) { return sample_points(rng, pts_per, n, -2.0, 2.0); };
    detail::fold_into(rows[0], check_rd1(t, f, g, pts(a + b), tol_alg));
    detail::fold_into(rows[1],
                      check_rd2(t, f, pts(a), sample_points(rng, 8, 2 * b, -2.0, 2.0),
                                tol_alg));
    detail::fold_into(rows[2],
                      check_rd3(t, a, b, pts(a + b + a), pts(a + b + b), tol_alg));
    detail::fold_into(rows[3], check_rd4(t, f, g, pts(a + 2 * b), tol_alg));
    detail::fold_into(rows[4], check_rd5(t, f, h, pts(a + 2), tol_alg));
    detail::fold_into(rows[5], check_rd6(t, f, pts(a + 2 * b), tol_alg));
    detail::fold_into(rows[6], check_rd7(t, f, pts(4 * a), tol_alg));
    detail::fold_into(rows[7], check_rd8(t, f, pts(a + b), tol_alg));
    detail::fold_into(rows[8], check_rd9(t, f, pts(2 * a), tol_alg));
    detail::fold_into(rows[9], check_reverse_fd(t, f, pts(2 * a + b), fd_h, tol_fd));
    detail::fold_into(rows[10], check_forward_fd(t, f, pts(2 * a), fd_h, tol_fd));
    detail::fold_into(rows[11], check_dagger_roundtrip(t, f, pts(a + b), tol_alg));
    // restriction of f below f itself gives a guaranteed leq premise
    PMapPtr probe = gen_map(rng, t, a, 1, 2);
    PMapPtr fr = compose(restrict_map(compose(probe, prim(t, "sqrtp"))), f);
    detail::fold_into(rows[12],
                      check_monotone(t, fr, f, pts(a + b), pts(a), tol_alg));
  }
  return rows;
}

}  // namespace sdpl
