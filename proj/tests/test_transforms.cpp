// Source-level rewrites that push reverse derivatives through control flow,
// plus the generic first-match rewriter and the sampled equivalence checker.

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "sdpl/gen.hpp"
#include "sdpl/interp.hpp"
#include "sdpl/parse.hpp"
#include "sdpl/prims.hpp"
#include "sdpl/transforms.hpp"

using namespace sdpl;

namespace {
const Interp& I() {
  static Interp i = default_interp(3);
  return i;
}

std::vector<std::vector<double>> line_points(double lo, double hi, int n) {
  Rng rng(99);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < n; ++i)
    pts.push_back(sample_point_off_boundary(rng, 1, lo, hi));
  return pts;
}

bool equiv(const TermPtr& a, const TermPtr& b, double lo, double hi) {
  Context ctx{{"x", Ty::real()}};
  TransformReport rep = check_equivalence(I(), ctx, a, b, line_points(lo, hi, 40));
  INFO("max_dev " << rep.max_dev << ", definedness mismatches "
                  << rep.definedness_mismatches << ", samples " << rep.samples);
  return rep.pass && rep.samples > 0;
}
}  // namespace

TEST_CASE("derivative of a conditional becomes a conditional of derivatives") {
  TermPtr t = parse_term(
      "let s : real = 1.0 in "
      "s.rd(y : real. if gt0(y) then mul(y, y) else neg(y))(x)",
      I().sig);
  auto step = [](const TermPtr& u) { return transform_if_rd_step(u); };
  auto rewritten = rewrite_first(t, step);
  REQUIRE(rewritten.has_value());
  Context ctx{{"x", Ty::real()}};
  CHECK(type_of(I().sig, ctx, *rewritten) == Ty::real());
  CHECK(equiv(t, *rewritten, -3.0, 3.0));

  // the rewrite floats the conditional above the derivative, re-pointing the
  // guard at the outer point
  auto* l = as<Let>(*rewritten);
  REQUIRE(l);
  auto* i = as<If>(l->body);
  REQUIRE(i);
  CHECK(as<Rd>(i->then_br));
  CHECK(as<Rd>(i->else_br));
  CHECK(i->guard.kind == BoolTerm::Kind::Pred);
  CHECK(as<Let>(i->guard.arg));
}

TEST_CASE("forward differential of a loop becomes a paired loop") {
  // the .fd sugar produces exactly the nested shape the rewrite matches
  TermPtr t = parse_term(
      "dx.fd(y : real. while gt0(y + -0.5) do mul(y, 0.5))(x)", I().sig);
  FreshNames fresh;
  auto step = [&fresh](const TermPtr& u) {
    return transform_while_fd_step(u, fresh);
  };
  auto rewritten = rewrite_first(t, step);
  REQUIRE(rewritten.has_value());
  Context ctx{{"x", Ty::real()}, {"dx", Ty::real()}};
  CHECK(type_of(I().sig, ctx, *rewritten) == Ty::real());
  // the loop surfaces: a paired state whose second component is the tangent
  auto* l = as<Let>(*rewritten);
  REQUIRE(l);
  CHECK(l->ty == Ty::prod(Ty::real(), Ty::real()));
  auto* sn = as<Snd>(l->body);
  REQUIRE(sn);
  CHECK(as<While>(sn->arg));

  TransformReport rep = check_equivalence(
      I(), ctx, t, *rewritten,
      {{4.1, 1.0}, {4.1, 2.5}, {0.3, 1.0}, {17.0, -2.0}, {100.0, 1.0}});
  INFO("max_dev " << rep.max_dev);
  CHECK(rep.pass);
  // spot value: 4.1 halves four times, so the tangent is scaled by 0.5^4
  PMapPtr den = denote(I(), ctx, *rewritten, 64);
  EvalResult r = evaluate(I().table, den, {4.1, 3.0});
  REQUIRE(r.has_value());
  CHECK((*r)[0] == Catch::Approx(3.0 * 0.0625).margin(1e-12));
}

TEST_CASE("reverse derivative of a loop reduces to a forward-pass transpose") {
  TermPtr t = parse_term(
      "let s : real = 1.0 in "
      "s.rd(y : real. while gt0(y + -0.5) do mul(y, 0.5))(x)",
      I().sig);
  FreshNames fresh;
  auto step = [&fresh](const TermPtr& u) {
    return transform_while_rd_step(u, fresh);
  };
  auto rewritten = rewrite_first(t, step);
  REQUIRE(rewritten.has_value());
  Context ctx{{"x", Ty::real()}};
  CHECK(type_of(I().sig, ctx, *rewritten) == Ty::real());
  CHECK(equiv(t, *rewritten, 0.1, 20.0));
  // the loop itself no longer sits under the derivative binder
  auto* l = as<Let>(*rewritten);
  REQUIRE(l);
  auto* r = as<Rd>(l->body);
  REQUIRE(r);
  CHECK_FALSE(as<While>(r->body));
}

TEST_CASE("the rewriter reaches sites buried inside other constructs") {
  TermPtr t = parse_term(
      "let p : (real * real) = "
      "(x, let s : real = 1.0 in s.rd(y : real. if gt0(y) then y else neg(y))(x)) "
      "in snd(p)",
      I().sig);
  auto step = [](const TermPtr& u) { return transform_if_rd_step(u); };
  auto rewritten = rewrite_first(t, step);
  REQUIRE(rewritten.has_value());
  CHECK(equiv(t, *rewritten, -3.0, 3.0));
  CHECK_FALSE(alpha_eq(t, *rewritten));
}

TEST_CASE("the rewriter reports when no site matches") {
  auto step = [](const TermPtr& u) { return transform_if_rd_step(u); };
  CHECK_FALSE(rewrite_first(parse_term("mul(x, x) + 1.0", I().sig), step));
  // an rd over a smooth body is not a conditional site
  CHECK_FALSE(rewrite_first(
      parse_term("let s : real = 1.0 in s.rd(y : real. mul(y, y))(x)", I().sig),
      step));
  FreshNames fresh;
  auto wstep = [&fresh](const TermPtr& u) {
    return transform_while_fd_step(u, fresh);
  };
  // nested-rd shape whose outer point is not zero must not match
  TermPtr off = parse_term(
      "let z : real = 1.0 in "
      "z.rd(dy : real. dy.rd(y : real. while gt0(y) do y + -1.0)(x))(1.0)",
      I().sig);
  CHECK_FALSE(rewrite_first(off, wstep));
}

TEST_CASE("the combined pass eliminates every control-flow derivative") {
  TermPtr t = parse_term(
      "let s : real = 1.0 in "
      "s.rd(y : real. if gt0(y + -1.0) "
      "then while gt0(y + -0.5) do mul(y, 0.5) "
      "else mul(y, y))(x)",
      I().sig);
  FreshNames fresh;
  TermPtr out = transform_control_rd(t, fresh);
  Context ctx{{"x", Ty::real()}};
  CHECK(type_of(I().sig, ctx, out) == Ty::real());
  // no derivative node with control flow under it survives
  auto if_step = [](const TermPtr& u) { return transform_if_rd_step(u); };
  auto w_step = [&fresh](const TermPtr& u) {
    return transform_while_rd_step(u, fresh);
  };
  CHECK_FALSE(rewrite_first(out, if_step));
  CHECK_FALSE(rewrite_first(out, w_step));
  CHECK(equiv(t, out, 0.1, 6.0));
}

TEST_CASE("forward differentials built from reverse ones are correct") {
  FreshNames fresh;
  Context ctx{{"x", Ty::real()}, {"v", Ty::real()}};
  TermPtr m = parse_term("mul(y, y)", I().sig);
  TermPtr fd = make_fd(I().sig, ctx, "y", Ty::real(), m, t_var("x"), t_var("v"),
                       fresh);
  CHECK(type_of(I().sig, ctx, fd) == Ty::real());
  PMapPtr den = denote(I(), ctx, fd, 32);
  for (auto [x, v] : {std::pair{3.0, 1.0}, {3.0, 2.0}, {-1.5, 4.0}}) {
    EvalResult r = evaluate(I().table, den, {x, v});
    REQUIRE(r.has_value());
    CHECK((*r)[0] == Catch::Approx(2 * x * v).epsilon(1e-12));
  }
}

TEST_CASE("the equivalence checker flags value and definedness mismatches") {
  Context ctx{{"x", Ty::real()}};
  TermPtr a = parse_term("x", I().sig);
  TermPtr close = parse_term("x + 0.001", I().sig);
  TransformReport bad = check_equivalence(I(), ctx, a, close,
                                          {{1.0}, {2.0}, {3.0}});
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_dev == Catch::Approx(0.001));
  CHECK(bad.definedness_mismatches == 0);

  TermPtr partial = parse_term("mul(sqrtp(x), sqrtp(x))", I().sig);
  TransformReport dm = check_equivalence(I(), ctx, a, partial,
                                         {{4.0}, {-4.0}, {9.0}});
  CHECK_FALSE(dm.pass);
  CHECK(dm.definedness_mismatches == 1);

  TransformReport good = check_equivalence(I(), ctx, a, parse_term("x + 0.0", I().sig),
                                           {{1.0}, {-2.0}, {0.5}});
  CHECK(good.pass);
  CHECK(good.samples == 3);
  CHECK(good.max_dev == 0.0);
}
