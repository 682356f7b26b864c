// Terms, types, printing, parsing, and the capture-avoiding term algebra.

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "sdpl/ast_json.hpp"
#include "sdpl/parse.hpp"
#include "sdpl/pretty.hpp"
#include "sdpl/syntax.hpp"
#include "sdpl/typing.hpp"

using namespace sdpl;

namespace {
const Signature& sig() {
  static Signature s = default_signature(3);
  return s;
}
}  // namespace

TEST_CASE("type construction and printing") {
  CHECK(Ty::real().str() == "real");
  CHECK(Ty::unit().str() == "1");
  CHECK(Ty::prod(Ty::real(), Ty::real()).str() == "real * real");
  // reals(n) associates to the left, so the right factor never needs parens
  CHECK(Ty::reals(3).str() == "real * real * real");
  CHECK(Ty::prod(Ty::real(), Ty::prod(Ty::real(), Ty::real())).str() ==
        "real * (real * real)");
  CHECK(Ty::reals(3) == Ty::prod(Ty::prod(Ty::real(), Ty::real()), Ty::real()));
  CHECK_FALSE(Ty::reals(2) == Ty::real());
}

TEST_CASE("number formatting survives a parse round trip") {
  for (double v : {1.0, -1.0, 0.5, 120.0, 3.25e-3, 1e17, -0.0078125}) {
    TermPtr c = parse_term(format_double(v), sig());
    REQUIRE(as<Const>(c) != nullptr);
    CHECK(as<Const>(c)->value == v);
  }
}

TEST_CASE("pretty output parses back to an alpha-equivalent term") {
  const char* sources[] = {
      "x + 2.5 + x",
      "mul(x, mul(x, x))",
      "let a : real = x + x in mul(a, a)",
      "let u : 1 = * in (u, x)",
      "(x, x + 1.0, mul(x, x))",
      "fst(snd((x, (x, x))))",
      "if gt0(x) then x else neg(x)",
      "while gt0(x) do x + -1.0",
      "let s : real = 1.0 in s.rd(y : real. mul(y, y))(x)",
      "letrec f(n : real) : real := if gt0(n + -0.5) then mul(n, f(n + -1.0)) "
      "else 1.0 in f(x)",
  };
  for (const char* src : sources) {
    INFO(src);
    TermPtr t = parse_term(src, sig());
    TermPtr back = parse_term(pretty(t), sig());
    CHECK(alpha_eq(t, back));
    // printing is a normal form: it is stable under reparsing
    CHECK(pretty(back) == pretty(t));
  }
}

TEST_CASE("chained lets and tuple patterns desugar to core constructs") {
  TermPtr t = parse_term(
      "let a : real = x, b : real = a + 1.0 in mul(a, b)", sig());
  auto* l1 = as<Let>(t);
  REQUIRE(l1);
  CHECK(l1->var == "a");
  REQUIRE(as<Let>(l1->body));
  CHECK(as<Let>(l1->body)->var == "b");

  TermPtr p = parse_term(
      "let (a : real, b : real) = (x, x + 1.0) in a + b", sig());
  Context ctx{{"x", Ty::real()}};
  CHECK(type_of(sig(), ctx, p) == Ty::real());
  // the pattern binds components via projections of a single bound pair
  auto* outer = as<Let>(p);
  REQUIRE(outer);
  CHECK(outer->ty == Ty::reals(2));
}

TEST_CASE("multi-argument application builds left-nested pairs") {
  TermPtr t = parse_term("mul(x, y)", sig());
  auto* op = as<PrimApp>(t);
  REQUIRE(op);
  REQUIRE(as<PairT>(op->arg));
  CHECK(as<Var>(as<PairT>(op->arg)->first)->name == "x");
}

TEST_CASE("free variables respect binders") {
  TermPtr t = parse_term("let a : real = x in a + y", sig());
  auto fv = free_vars(t);
  CHECK(fv == std::set<std::string>{"x", "y"});

  TermPtr r = parse_term("let s : real = 1.0 in s.rd(q : real. mul(q, z))(x)",
                         sig());
  fv = free_vars(r);
  CHECK(fv == std::set<std::string>{"x", "z"});

  TermPtr lr = parse_term(
      "letrec f(n : real) : real := mul(n, n) in f(x)", sig());
  CHECK(free_vars(lr) == std::set<std::string>{"x"});
}

TEST_CASE("substitution avoids capturing the replacement's variables") {
  // [x := a] (let a = x + 1 in a + x) must not capture the outer a
  TermPtr body = parse_term("let a : real = x + 1.0 in a + x", sig());
  FreshNames fresh;
  TermPtr out = substitute(body, "x", t_var("a"), &fresh);
  auto* l = as<Let>(out);
  REQUIRE(l);
  CHECK(l->var != "a");  // binder renamed
  CHECK(free_vars(out) == std::set<std::string>{"a"});
  // semantics: the result is alpha-equal to the expected renaming
  TermPtr expect = parse_term("let b : real = a + 1.0 in b + a", sig());
  CHECK(alpha_eq(out, expect));
}

TEST_CASE("substitution under rd renames the differentiation binder") {
  TermPtr t = parse_term("let s : real = 1.0 in s.rd(y : real. y + x)(0.0)",
                         sig());
  FreshNames fresh;
  TermPtr out = substitute(t, "x", t_var("y"), &fresh);
  TermPtr expect =
      parse_term("let s : real = 1.0 in s.rd(q : real. q + y)(0.0)", sig());
  CHECK(alpha_eq(out, expect));
}

TEST_CASE("alpha equivalence identifies renamed binders only") {
  auto t1 = parse_term("let a : real = x in a + a", sig());
  auto t2 = parse_term("let b : real = x in b + b", sig());
  auto t3 = parse_term("let b : real = x in b + x", sig());
  CHECK(alpha_eq(t1, t2));
  CHECK_FALSE(alpha_eq(t1, t3));
  CHECK_FALSE(alpha_eq(parse_term("x", sig()), parse_term("y", sig())));
}

TEST_CASE("value and trace-term predicates") {
  CHECK(is_value(parse_term("(1.0, (*, 2.0))", sig())));
  CHECK_FALSE(is_value(parse_term("1.0 + 2.0", sig())));
  CHECK(is_trace_term(parse_term("let a : real = mul(x, x) in a + x", sig())));
  CHECK_FALSE(is_trace_term(parse_term("if gt0(x) then x else x", sig())));
  CHECK_FALSE(is_trace_term(parse_term("while gt0(x) do x", sig())));
  CHECK_FALSE(is_trace_term(
      parse_term("let s : real = 1.0 in s.rd(y : real. y)(x)", sig())));
}

TEST_CASE("zero terms and pointwise sums are built type-directedly") {
  CHECK(alpha_eq(zero_term(Ty::real()), t_const(0.0)));
  CHECK(alpha_eq(zero_term(Ty::unit()), t_star()));
  CHECK(alpha_eq(zero_term(Ty::reals(2)), t_pair(t_const(0.0), t_const(0.0))));

  FreshNames fresh;
  Ty p2 = Ty::reals(2);
  TermPtr sum = add_terms(p2, t_var("u"), t_var("v"), fresh);
  Context ctx{{"u", p2}, {"v", p2}};
  CHECK(type_of(sig(), ctx, sum) == p2);

  TermPtr usum = add_terms(Ty::unit(), t_var("a"), t_var("b"), fresh);
  Context uctx{{"a", Ty::unit()}, {"b", Ty::unit()}};
  CHECK(type_of(sig(), uctx, usum) == Ty::unit());
}

TEST_CASE("forward-differential sugar expands to the nested-rd shape") {
  FreshNames fresh;
  TermPtr m = parse_term("mul(x, x)", sig());
  TermPtr fd = fd_term("x", Ty::real(), m, Ty::real(), t_const(3.0),
                       t_const(1.0), fresh);
  auto* l = as<Let>(fd);
  REQUIRE(l);
  auto* outer = as<Rd>(l->body);
  REQUIRE(outer);
  REQUIRE(as<Var>(outer->seed));
  CHECK(as<Var>(outer->seed)->name == l->var);
  auto* inner = as<Rd>(outer->body);
  REQUIRE(inner);
  CHECK(as<Var>(inner->seed)->name == outer->var);
  CHECK(inner->var == "x");
  CHECK(alpha_eq(outer->point, t_const(0.0)));
}

TEST_CASE("fresh names avoid the requested set and stay distinct") {
  FreshNames fresh;
  std::set<std::string> avoid{"x'1", "x'2"};
  std::string a = fresh.fresh("x", avoid);
  std::string b = fresh.fresh("x", avoid);
  CHECK(a != b);
  CHECK(avoid.count(a) == 0);
  CHECK(avoid.count(b) == 0);
}

TEST_CASE("parser reports positions and rejects malformed input") {
  CHECK_THROWS_AS(parse_term("let x real = 1.0 in x", sig()), ParseError);
  CHECK_THROWS_AS(parse_term("mul(x,)", sig()), ParseError);
  CHECK_THROWS_AS(parse_term("", sig()), ParseError);
  CHECK_THROWS_AS(parse_program("arg x real ; x", sig()), ParseError);
  try {
    parse_term("if gt0(x then x else x", sig());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.span.line >= 1);
  }
}

TEST_CASE("comments and layout are ignored") {
  TermPtr t = parse_term("-- leading comment\n  x +  -- inline\n 1.0\n", sig());
  CHECK(alpha_eq(t, parse_term("x + 1.0", sig())));
}

TEST_CASE("ast dump is valid json with the documented schema") {
  TermPtr t = parse_term(
      "let s : real = 1.0 in s.rd(y : real. if gt0(y) then y else neg(y))(x)",
      sig());
  nlohmann::json j = nlohmann::json::parse(ast_json(t));
  CHECK(j["kind"] == "Let");
  CHECK(j["var"] == "s");
  CHECK(j["ty"] == "real");
  REQUIRE(j["children"].size() == 2);
  const auto& rd = j["children"][1];
  CHECK(rd["kind"] == "Rd");
  CHECK(rd["var"] == "y");
  REQUIRE(rd["children"].size() == 3);
  const auto& ifn = rd["children"][1];
  CHECK(ifn["kind"] == "If");
  CHECK(ifn["guard"]["kind"] == "Pred");
  CHECK(ifn["guard"]["pred"] == "gt0");
  // every node carries kind and children
  CHECK(ifn["children"].size() == 2);
}

TEST_CASE("signature knows the reverse tower") {
  const Signature& s = sig();
  CHECK(s.is_op("mul"));
  CHECK(s.is_op("mul_RR"));
  CHECK(reverse_op_name("sin", 2) == "sin_RR");
  REQUIRE(s.reverse_of("mul").has_value());
  CHECK(*s.reverse_of("mul") == "mul_R");
  CHECK(s.op("mul_R").dom == Ty::prod(Ty::reals(2), Ty::real()));
  CHECK(s.op("mul_R").cod == Ty::reals(2));
  // the tower is cut off at the configured depth
  CHECK_FALSE(s.reverse_of("mul_RRR").has_value());
}
