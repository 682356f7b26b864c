// The partial-map backend: combinator evaluation, domains of definition,
// joins, and the reverse/forward derivative operators.

#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "sdpl/axioms.hpp"
#include "sdpl/pmap.hpp"
#include "sdpl/prims.hpp"

using namespace sdpl;

namespace {
const PrimTable& table() {
  static PrimTable t = default_prim_table(3);
  return t;
}

std::vector<double> ev(const PMapPtr& f, const std::vector<double>& x) {
  EvalResult r = evaluate(table(), f, x);
  REQUIRE(r.has_value());
  return *r;
}

bool undef(const PMapPtr& f, const std::vector<double>& x) {
  return !evaluate(table(), f, x).has_value();
}
}  // namespace

TEST_CASE("structural combinators evaluate coordinatewise") {
  CHECK(ev(identity(3), {1, 2, 3}) == std::vector<double>{1, 2, 3});
  CHECK(ev(proj0(2, 1), {1, 2, 3}) == std::vector<double>{1, 2});
  CHECK(ev(proj1(2, 1), {1, 2, 3}) == std::vector<double>{3});
  CHECK(ev(pair_map(proj1(1, 1), proj0(1, 1)), {4, 5}) ==
        std::vector<double>{5, 4});
  CHECK(ev(zero_map(2, 3), {7, 8}) == std::vector<double>{0, 0, 0});
  CHECK(ev(const_point({2.5, -1}), {}) == std::vector<double>{2.5, -1});
  CHECK(ev(bang(2), {1, 2}).empty());
  CHECK(ev(slice(4, 1, 2), {1, 2, 3, 4}) == std::vector<double>{2, 3});
  CHECK(ev(coord(3, 2), {1, 2, 3}) == std::vector<double>{3});
  CHECK(ev(inj0(1, 2), {9}) == std::vector<double>{9, 0, 0});
  CHECK(ev(inj1(2, 1), {9}) == std::vector<double>{0, 0, 9});
  CHECK(ev(cross(identity(1), zero_map(1, 1)), {3, 4}) ==
        std::vector<double>{3, 0});
}

TEST_CASE("composition is diagrammatic: first argument runs first") {
  PMapPtr f = compose(const_point({2.0}), prim(table(), "exp"));
  CHECK(ev(f, {})[0] == Catch::Approx(std::exp(2.0)));
  // identity is elided structurally
  PMapPtr g = prim(table(), "sin");
  CHECK(compose(g, identity(1)) == g);
  CHECK(compose(identity(1), g) == g);
}

TEST_CASE("pointwise addition of maps") {
  PMapPtr f = add_maps(identity(2), identity(2));
  CHECK(ev(f, {1, 2}) == std::vector<double>{2, 4});
}

TEST_CASE("primitive operations and their domains") {
  CHECK(ev(prim(table(), "mul"), {3, 4})[0] == 12.0);
  CHECK(ev(prim(table(), "neg"), {3})[0] == -3.0);
  CHECK(ev(prim(table(), "recip"), {4})[0] == 0.25);
  CHECK(undef(prim(table(), "recip"), {0}));
  CHECK(ev(prim(table(), "sqrtp"), {4})[0] == 2.0);
  CHECK(undef(prim(table(), "sqrtp"), {0}));   // open domain: x > 0
  CHECK(undef(prim(table(), "sqrtp"), {-1}));
  // the guard primitives are partial points of the terminal object
  CHECK(ev(prim_node("gt0_T", 1, 0), {1}).empty());
  CHECK(undef(prim_node("gt0_T", 1, 0), {-1}));
  CHECK(undef(prim_node("gt0_T", 1, 0), {0}));
  CHECK(ev(prim_node("gt0_F", 1, 0), {-1}).empty());
  CHECK(undef(prim_node("gt0_F", 1, 0), {1}));
}

TEST_CASE("non-finite intermediate results leave the domain") {
  PMapPtr f = compose(prim(table(), "exp"), prim(table(), "exp"));
  CHECK(undef(f, {1000.0}));
}

TEST_CASE("restriction keeps the domain but forgets the output") {
  PMapPtr r = restrict_map(prim(table(), "sqrtp"));
  CHECK(ev(r, {4})[0] == 4.0);  // acts as the identity where defined
  CHECK(undef(r, {-4}));
  PMapPtr id2 = identity(2);
  CHECK(restrict_map(id2) == id2);  // identities are total: nothing to restrict
  // restricting twice changes nothing
  PMapPtr rr = restrict_map(r);
  CHECK(ev(rr, {4})[0] == 4.0);
  CHECK(graph_size(rr) == graph_size(r));
}

TEST_CASE("joins glue maps with disjoint domains") {
  PMapPtr gT = restrict_map(prim_node("gt0_T", 1, 0));
  PMapPtr gF = restrict_map(prim_node("gt0_F", 1, 0));
  PMapPtr pos = compose(gT, identity(1));
  PMapPtr negb = compose(gF, prim(table(), "neg"));
  PMapPtr abs = join({pos, negb});
  CHECK(ev(abs, {2.5})[0] == 2.5);
  CHECK(ev(abs, {-2.5})[0] == 2.5);
  CHECK(undef(abs, {0}));  // neither branch is defined on the boundary

  // a singleton join is the map itself
  CHECK(join({pos}) == pos);

  // overlapping branches that agree are fine; disagreeing ones are an error
  PMapPtr twice = join({identity(1), identity(1)});
  CHECK(ev(twice, {3})[0] == 3.0);
  PMapPtr clash = join({identity(1), prim(table(), "neg")});
  CHECK_THROWS_AS(evaluate(table(), clash, {1.0}), JoinConflict);
  CHECK(ev(clash, {0.0})[0] == 0.0);  // they agree at the origin
}

TEST_CASE("the empty map is nowhere defined and is a join unit") {
  CHECK(undef(empty_map(1, 1), {0}));
  PMapPtr f = join({empty_map(1, 1), identity(1)});
  CHECK(ev(f, {5})[0] == 5.0);
}

TEST_CASE("restriction order and compatibility on sampled points") {
  Rng rng(3);
  auto pts = sample_points(rng, 50, 1, -3, 3);
  PMapPtr gT = restrict_map(prim_node("gt0_T", 1, 0));
  PMapPtr pos_id = compose(gT, identity(1));
  CHECK(leq(table(), pos_id, identity(1), pts));
  CHECK_FALSE(leq(table(), identity(1), pos_id, pts));
  CHECK(compatible(table(), pos_id, identity(1), pts));
  PMapPtr gF = restrict_map(prim_node("gt0_F", 1, 0));
  CHECK(disjoint(table(), pos_id, compose(gF, identity(1)), pts));
}

TEST_CASE("reverse derivative of primitives transposes the jacobian") {
  // d(x*y) carried backwards: seed w maps to (w*y, w*x)
  PMapPtr rmul = reverse_derivative(table(), prim(table(), "mul"));
  CHECK(rmul->dom == 3);
  CHECK(rmul->cod == 2);
  CHECK(ev(rmul, {3, 4, 1}) == std::vector<double>{4, 3});
  CHECK(ev(rmul, {3, 4, 2}) == std::vector<double>{8, 6});

  PMapPtr rsin = reverse_derivative(table(), prim(table(), "sin"));
  CHECK(ev(rsin, {1.0, 1.0})[0] == Catch::Approx(std::cos(1.0)).epsilon(1e-12));

  PMapPtr rrec = reverse_derivative(table(), prim(table(), "recip"));
  CHECK(ev(rrec, {2.0, 1.0})[0] == Catch::Approx(-0.25).epsilon(1e-12));
  CHECK(undef(rrec, {0.0, 1.0}));  // same domain as the operation

  PMapPtr rsq = reverse_derivative(table(), prim(table(), "sqrtp"));
  CHECK(ev(rsq, {4.0, 1.0})[0] == 0.25);
  CHECK(undef(rsq, {-4.0, 1.0}));
  CHECK(undef(rsq, {0.0, 1.0}));
}

TEST_CASE("reverse derivative follows the chain rule through composition") {
  // f(x) = sin(x^2); gradient at 1 with seed 1 is 2 cos(1)
  PMapPtr square = compose(pair_map(identity(1), identity(1)),
                           prim(table(), "mul"));
  PMapPtr f = compose(square, prim(table(), "sin"));
  PMapPtr rf = reverse_derivative(table(), f);
  CHECK(ev(rf, {1.0, 1.0})[0] ==
        Catch::Approx(2 * std::cos(1.0)).epsilon(1e-12));
}

TEST_CASE("reverse derivative of a join differentiates the taken branch") {
  PMapPtr gT = restrict_map(prim_node("gt0_T", 1, 0));
  PMapPtr gF = restrict_map(prim_node("gt0_F", 1, 0));
  PMapPtr abs = join({compose(gT, identity(1)),
                      compose(gF, prim(table(), "neg"))});
  PMapPtr rabs = reverse_derivative(table(), abs);
  CHECK(ev(rabs, {2.0, 1.0})[0] == 1.0);
  CHECK(ev(rabs, {-2.0, 1.0})[0] == -1.0);
  CHECK(undef(rabs, {0.0, 1.0}));
}

TEST_CASE("a lazily reversed map evaluates like its expansion") {
  PMapPtr f = prim(table(), "mul");
  CHECK(ev(reverse(f), {3, 4, 1}) ==
        ev(reverse_derivative(table(), f), {3, 4, 1}));
}

TEST_CASE("forward derivative computes directional derivatives") {
  PMapPtr dmul = forward_derivative(table(), prim(table(), "mul"));
  // d(xy) at (3,4) along (1,0) is y = 4
  CHECK(ev(dmul, {3, 4, 1, 0})[0] == 4.0);
  CHECK(ev(dmul, {3, 4, 0, 1})[0] == 3.0);
  CHECK(ev(dmul, {3, 4, 1, 1})[0] == 7.0);
}

TEST_CASE("the contextual transpose recovers the reverse derivative") {
  PMapPtr f = compose(prim(table(), "mul"), prim(table(), "sin"));
  PMapPtr lhs = dagger_ctx(table(), forward_derivative(table(), f), f->dom);
  PMapPtr rhs = reverse_derivative(table(), f);
  Rng rng(5);
  for (const auto& p : sample_points(rng, 100, 3, -2, 2)) {
    auto a = evaluate(table(), lhs, p);
    auto b = evaluate(table(), rhs, p);
    REQUIRE(a.has_value() == b.has_value());
    if (a)
      for (size_t i = 0; i < a->size(); ++i) CHECK((*a)[i] == (*b)[i]);
  }
}

TEST_CASE("derivatives beyond the table's closure depth are refused") {
  PMapPtr f = prim(table(), "mul");
  PMapPtr r = f;
  for (int i = 0; i < 3; ++i) r = reverse_derivative(table(), r);
  // the third reverse still evaluates
  CHECK(evaluate(table(), r, std::vector<double>(static_cast<size_t>(r->dom), 0.5))
            .has_value());
  try {
    PMapPtr r4 = reverse_derivative(table(), r);
    evaluate(table(), r4, std::vector<double>(static_cast<size_t>(r4->dom), 0.5));
    FAIL("expected the missing-reverse error");
  } catch (const MissingReversePrimitive& e) {
    CHECK(e.op_name == "mul_RRR");
  }
}

TEST_CASE("a deeper table admits fourth-order symmetry checks on primitives") {
  PrimTable t4 = default_prim_table(4);
  Rng rng(17);
  for (const char* name : {"mul", "sin", "exp"}) {
    PMapPtr f = prim(t4, name);
    auto pts = sample_points(rng, 60, 4 * f->dom, -1.5, 1.5);
    CheckResult r = check_rd7(t4, f, pts);
    INFO(name);
    CHECK_FALSE(r.skipped);
    CHECK(r.failures == 0);
    CHECK(r.points > 0);
  }
}

TEST_CASE("evaluation dimension mismatches are programming errors") {
  CHECK_THROWS_AS(evaluate(table(), identity(2), {1.0}), std::logic_error);
}

TEST_CASE("derived reverse graphs in the table evaluate standalone") {
  // the level-1 reverse of mul is itself a primitive with a graph body
  const PrimDef& d = table().at("mul_R");
  CHECK(d.dom == 3);
  CHECK(d.cod == 2);
  CHECK(ev(prim(table(), "mul_R"), {3, 4, 1}) == std::vector<double>{4, 3});
  // level-2 entries exist and have consistent dimensions
  const PrimDef& d2 = table().at("mul_RR");
  CHECK(d2.dom == 5);
  CHECK(d2.cod == 3);
}
