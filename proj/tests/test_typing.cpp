// The typing relation: positive derivations, error taxonomy, and the
// context discipline of loops and recursive definitions.

#include <catch2/catch_amalgamated.hpp>

#include "sdpl/parse.hpp"
#include "sdpl/syntax.hpp"
#include "sdpl/typing.hpp"

using namespace sdpl;

namespace {
const Signature& sig() {
  static Signature s = default_signature(3);
  return s;
}

Ty ty_of(const std::string& src, Context ctx = {{"x", Ty::real()}}) {
  return type_of(sig(), ctx, parse_term(src, sig()));
}

TypeErrorKind err_of(const std::string& src, Context ctx = {{"x", Ty::real()}}) {
  try {
    type_of(sig(), ctx, parse_term(src, sig()));
  } catch (const TypeError& e) {
    return e.kind;
  }
  throw std::logic_error("expected a type error for: " + src);
}
}  // namespace

TEST_CASE("core constructs type as expected") {
  CHECK(ty_of("x + 1.0") == Ty::real());
  CHECK(ty_of("*") == Ty::unit());
  CHECK(ty_of("(x, x, x)") == Ty::reals(3));
  CHECK(ty_of("fst((x, *))") == Ty::real());
  CHECK(ty_of("snd((x, *))") == Ty::unit());
  CHECK(ty_of("mul(x, x)") == Ty::real());
  CHECK(ty_of("let a : real * real = (x, x) in fst(a)") == Ty::real());
  CHECK(ty_of("if gt0(x) then x else neg(x)") == Ty::real());
  CHECK(ty_of("while gt0(x) do x + -1.0") == Ty::real());
  CHECK(ty_of("letrec f(n : real) : real := mul(n, n) in f(x)") == Ty::real());
}

TEST_CASE("the surface sum is an operation on scalars only") {
  CHECK(ty_of("x + x + 1.0") == Ty::real());
  CHECK(err_of("(x, x) + (x, x)") == TypeErrorKind::TypeMismatch);
  CHECK(err_of("x + (x, x)") == TypeErrorKind::TypeMismatch);
  CHECK(err_of("* + x") == TypeErrorKind::TypeMismatch);
}

TEST_CASE("rd types as seed-and-point to input type") {
  // seed : B, body : A |- B, point : A  gives  A
  CHECK(ty_of("let s : real = 1.0 in s.rd(y : real. mul(y, y))(x)") ==
        Ty::real());
  CHECK(ty_of("let s : real = 1.0 in s.rd(q : real * real. mul(fst(q), snd(q)))"
              "((x, x))") == Ty::reals(2));
  // seed type must match the body type
  CHECK(err_of("let s : real * real = (1.0, 1.0) in s.rd(y : real. y)(x)") ==
        TypeErrorKind::TypeMismatch);
  // point type must match the binder ascription
  CHECK(err_of("let s : real = 1.0 in s.rd(y : real. y)((x, x))") ==
        TypeErrorKind::TypeMismatch);
}

TEST_CASE("rd body may read ambient variables") {
  CHECK(ty_of("let s : real = 1.0 in s.rd(y : real. mul(x, y))(x)") ==
        Ty::real());
}

TEST_CASE("unbound names and unknown operations are reported") {
  CHECK(err_of("y") == TypeErrorKind::UnboundVariable);
  // an unknown name in call position reads as a function call
  CHECK(err_of("frobnicate(x)") == TypeErrorKind::UnboundFunction);
  CHECK(err_of("f(x)") == TypeErrorKind::UnboundFunction);
  // ... while programmatically built nodes can still name unknown symbols
  const Signature& sig = default_signature(3);
  Context ctx{{"x", Ty::real()}};
  try {
    type_of(sig, ctx, t_op("frobnicate", t_var("x")));
    FAIL("expected UnknownOp");
  } catch (const TypeError& e) {
    CHECK(e.kind == TypeErrorKind::UnknownOp);
  }
  try {
    type_of(sig, ctx, t_if(b_pred("lt0", t_var("x")), t_var("x"), t_var("x")));
    FAIL("expected UnknownPred");
  } catch (const TypeError& e) {
    CHECK(e.kind == TypeErrorKind::UnknownPred);
  }
  // unknown predicates are already rejected when parsing source text
  CHECK_THROWS_AS(parse_term("if lt0(x) then x else x", sig), ParseError);
}

TEST_CASE("operation arguments are checked against the signature") {
  CHECK(err_of("mul(x)") == TypeErrorKind::TypeMismatch);
  CHECK(err_of("sin((x, x))") == TypeErrorKind::TypeMismatch);
  CHECK(err_of("if gt0((x, x)) then 1.0 else 0.0") ==
        TypeErrorKind::TypeMismatch);
}

TEST_CASE("branches of a conditional must agree") {
  CHECK(err_of("if gt0(x) then x else (x, x)") == TypeErrorKind::TypeMismatch);
}

TEST_CASE("loops close over exactly the rightmost binding") {
  // the loop state is the rightmost context variable; its body and guard
  // may use nothing else
  Context two{{"a", Ty::real()}, {"x", Ty::real()}};
  CHECK(type_of(sig(), two, parse_term("while gt0(x) do x + -1.0", sig())) ==
        Ty::real());
  CHECK(err_of("while gt0(x) do x + a", two) ==
        TypeErrorKind::WhileContextViolation);
  CHECK(err_of("while gt0(a) do x + -1.0", two) ==
        TypeErrorKind::WhileContextViolation);
  // the body must preserve the state type
  CHECK(err_of("while gt0(x) do (x, x)") == TypeErrorKind::TypeMismatch);
  // a loop over a product state under ambient context, via a let
  CHECK(ty_of("let s : real * real = (a, x) in "
              "snd(while gt0(snd(s)) do (fst(s), snd(s) + neg(fst(s))))",
              two) == Ty::real());
}

TEST_CASE("recursive definitions see only their parameter and themselves") {
  CHECK(ty_of("letrec f(n : real) : real := "
              "if gt0(n + -0.5) then mul(n, f(n + -1.0)) else 1.0 in f(x)") ==
        Ty::real());
  // the body may not reach ambient term variables
  CHECK(err_of("letrec f(n : real) : real := n + x in f(x)") ==
        TypeErrorKind::RecBodyFreeVarViolation);
  // but it may call previously defined functions
  CHECK(ty_of("letrec g(y : real) : real := y + y in "
              "letrec f(n : real) : real := g(mul(n, n)) in f(x)") ==
        Ty::real());
  // declared return type is enforced
  CHECK(err_of("letrec f(n : real) : real := (n, n) in f(x)") ==
        TypeErrorKind::TypeMismatch);
  // call sites check the argument against the parameter
  CHECK(err_of("letrec f(n : real) : real := n in f((x, x))") ==
        TypeErrorKind::ArityMismatch);
}

TEST_CASE("shadowing resolves to the rightmost binding") {
  Context ctx{{"x", Ty::reals(2)}};
  CHECK(type_of(sig(), ctx,
                parse_term("let x : real = fst(x) in x + 1.0", sig())) ==
        Ty::real());
}

TEST_CASE("type errors carry source positions") {
  try {
    type_of(sig(), {}, parse_term("let a : real = 1.0 in\n  b", sig()));
    FAIL("expected an error");
  } catch (const TypeError& e) {
    CHECK(e.kind == TypeErrorKind::UnboundVariable);
    CHECK(e.span.line == 2);
  }
}

TEST_CASE("derivative tower operations are ordinary signature entries") {
  CHECK(ty_of("mul_R((x, x), 1.0)", {{"x", Ty::real()}}) == Ty::reals(2));
  CHECK(ty_of("sin_RR((x, 1.0), 0.5)", {{"x", Ty::real()}}) ==
        Ty::prod(Ty::real(), Ty::real()));
}
