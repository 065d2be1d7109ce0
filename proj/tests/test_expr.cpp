#include <catch2/catch_amalgamated.hpp>

#include "ratspec/selfadjoint.hpp"
#include "testutil.hpp"

using namespace ratspec;
using testutil::random_expr;
using testutil::random_expr_with_point;

namespace {
const Signature kSig21{2, 1};

ExprPtr x(int j, Signature sig = kSig21) {
  return RationalExpr::variable({VarKind::SelfAdjoint, j - 1}, sig);
}
ExprPtr u(int j, Signature sig = kSig21) {
  return RationalExpr::variable({VarKind::Unitary, j - 1}, sig);
}
}  // namespace

TEST_CASE("shape rules") {
  Signature sig{1, 0};
  ExprPtr c23 = RationalExpr::constant(Matrix::Ones(2, 3), sig);
  CHECK(shape(c23) == Shape{2, 3});

  ExprPtr scaled = RationalExpr::scaled_variable(Matrix::Ones(3, 1), {VarKind::SelfAdjoint, 0}, sig);
  CHECK(shape(RationalExpr::product(c23, scaled)) == Shape{2, 1});

  CHECK_THROWS_AS(RationalExpr::sum(RationalExpr::constant(Matrix::Ones(2, 2), sig),
                                    RationalExpr::constant(Matrix::Ones(3, 3), sig)),
                  ShapeMismatchError);
  CHECK_THROWS_AS(RationalExpr::product(c23, c23), ShapeMismatchError);
  CHECK_THROWS_AS(RationalExpr::inverse(c23), ShapeMismatchError);
}

TEST_CASE("cached shape equals recomputed shape") {
  CounterRng rng(11);
  for (int i = 0; i < 50; ++i) {
    ExprPtr e = random_expr(rng, kSig21, 4, 2, 2);
    CHECK(recompute_shape(e) == e->shape());
  }
}

TEST_CASE("variable indices are checked at construction") {
  CHECK_THROWS_AS(RationalExpr::variable({VarKind::SelfAdjoint, 2}, kSig21),
                  UnknownVariableError);
  CHECK_THROWS_AS(RationalExpr::variable({VarKind::Unitary, 1}, kSig21), UnknownVariableError);
  CHECK_THROWS_AS(RationalExpr::variable({VarKind::Unitary, -1}, kSig21), UnknownVariableError);
}

TEST_CASE("formal adjoint on the worked examples") {
  SECTION("x1 + x2^-1 is fixed") {
    ExprPtr e = RationalExpr::sum(x(1), RationalExpr::inverse(x(2)));
    CHECK(structurally_equal(formal_adjoint(e), e));
  }
  SECTION("u1 becomes u1^-1") {
    ExprPtr adj = formal_adjoint(u(1));
    CHECK(adj->kind() == NodeKind::Inverse);
    CHECK(structurally_equal(adj, RationalExpr::inverse(u(1))));
  }
  SECTION("x1 u1 reverses to u1^-1 x1") {
    ExprPtr adj = formal_adjoint(RationalExpr::product(x(1), u(1)));
    CHECK(structurally_equal(adj,
                             RationalExpr::product(RationalExpr::inverse(u(1)), x(1))));
  }
  SECTION("constants conjugate-transpose") {
    Matrix a(1, 2);
    a << Complex(1, 2), Complex(0, -1);
    ExprPtr adj = formal_adjoint(RationalExpr::constant(a, kSig21));
    CHECK(exactly_equal(adj->coefficient(), a.adjoint()));
  }
}

TEST_CASE("adjoint is semantically sound and involutive") {
  CounterRng rng(2024);
  int checked = 0;
  for (int i = 0; i < 40 && checked < 25; ++i) {
    ExprPtr e = random_expr(rng, kSig21, 4, 1 + i % 2, 1 + i % 2);
    auto dp = testutil::find_domain_point(e, rng.next_u64());
    if (!dp) continue;
    ++checked;

    EvalOutcome adj = eval_expr(formal_adjoint(e), dp->point);
    REQUIRE(adj.ok());
    // eval(e*) = eval(e)* at Hermitian/unitary points
    CHECK((adj.value() - Matrix(dp->value.adjoint())).norm() <=
          1e-10 * (1.0 + dp->value.norm()));

    EvalOutcome twice = eval_expr(formal_adjoint(formal_adjoint(e)), dp->point);
    REQUIRE(twice.ok());
    CHECK((twice.value() - dp->value).norm() <= 1e-10 * (1.0 + dp->value.norm()));
  }
  REQUIRE(checked >= 20);
}

TEST_CASE("matrix lift") {
  SECTION("singleton grid evaluates like its entry") {
    ExprPtr r = RationalExpr::inverse(x(1));
    ExprMatrix grid{{{r}}};
    ExprPtr lifted = lift_matrix(grid);
    auto dp = testutil::find_domain_point(r, 5);
    REQUIRE(dp);
    EvalOutcome via_lift = eval_expr(lifted, dp->point);
    REQUIRE(via_lift.ok());
    CHECK((via_lift.value() - dp->value).norm() <= 1e-12 * (1.0 + dp->value.norm()));
  }

  SECTION("the type-(2,1) self-adjoint block matrix") {
    // [[x1^-1, u1], [u1^-1, x2^-1]]
    ExprMatrix grid{{{RationalExpr::inverse(x(1)), u(1)},
                     {RationalExpr::inverse(u(1)), RationalExpr::inverse(x(2))}}};
    ExprPtr lifted = lift_matrix(grid);
    CHECK(lifted->shape() == Shape{2, 2});

    auto dp = testutil::find_domain_point(lifted, 17, 3, 6);
    REQUIRE(dp);
    const int n = dp->point.dim;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        EvalOutcome entry = eval_expr(grid.entries[i][j], dp->point);
        REQUIRE(entry.ok());
        CHECK((dp->value.block(i * n, j * n, n, n) - entry.value()).norm() <= 1e-10);
      }

    SelfAdjointVerdict verdict = is_selfadjoint_probabilistic(lifted, 4, 10, 1e-8, 99);
    CHECK(verdict.selfadjoint);
  }

  SECTION("grid of constants collapses to one constant") {
    Signature sig{1, 0};
    auto c = [&](double v) { return RationalExpr::constant(Matrix::Constant(1, 1, v), sig); };
    ExprPtr lifted = lift_matrix(ExprMatrix{{{c(1), c(2)}, {c(3), c(4)}}});
    REQUIRE(lifted->kind() == NodeKind::Constant);
    Matrix expected(2, 2);
    expected << 1, 2, 3, 4;
    CHECK(exactly_equal(lifted->coefficient(), expected));
  }

  SECTION("ragged and mixed-signature grids are rejected") {
    ExprMatrix ragged{{{x(1), x(1)}, {x(1)}}};
    CHECK_THROWS_AS(lift_matrix(ragged), ShapeMismatchError);
    ExprMatrix mixed{{{x(1), RationalExpr::variable({VarKind::SelfAdjoint, 0}, {1, 0})}}};
    CHECK_THROWS_AS(lift_matrix(mixed), ShapeMismatchError);
  }
}

TEST_CASE("randomized self-adjointness verdicts") {
  SECTION("u1^-1 x1^-1 u1 is self-adjoint") {
    ExprPtr e = RationalExpr::product(
        RationalExpr::product(RationalExpr::inverse(u(1)), RationalExpr::inverse(x(1))), u(1));
    CHECK(is_selfadjoint_probabilistic(e, 4, 20, 1e-8, 7).selfadjoint);
  }
  SECTION("i(u1 - u1^-1) is self-adjoint") {
    ExprPtr diff = RationalExpr::sum(
        u(1), RationalExpr::product(RationalExpr::constant(-Matrix::Ones(1, 1), kSig21),
                                    RationalExpr::inverse(u(1))));
    ExprPtr e = RationalExpr::product(
        RationalExpr::constant(Matrix::Constant(1, 1, Complex(0, 1)), kSig21), diff);
    CHECK(is_selfadjoint_probabilistic(e, 4, 20, 1e-8, 7).selfadjoint);
  }
  SECTION("u1 + u2^-1 is not") {
    Signature sig{0, 2};
    ExprPtr e = RationalExpr::sum(u(1, sig), RationalExpr::inverse(u(2, sig)));
    SelfAdjointVerdict verdict = is_selfadjoint_probabilistic(e, 4, 20, 1e-8, 7);
    CHECK_FALSE(verdict.selfadjoint);
    CHECK(verdict.witness.has_value());
  }
  SECTION("i(x1 - x1^-1) is not") {
    Signature sig{1, 0};
    ExprPtr diff = RationalExpr::sum(
        x(1, sig), RationalExpr::product(RationalExpr::constant(-Matrix::Ones(1, 1), sig),
                                         RationalExpr::inverse(x(1, sig))));
    ExprPtr e = RationalExpr::product(
        RationalExpr::constant(Matrix::Constant(1, 1, Complex(0, 1)), sig), diff);
    CHECK_FALSE(is_selfadjoint_probabilistic(e, 4, 20, 1e-8, 7).selfadjoint);
  }
  SECTION("x1^-1 u1^-1 x1 is not") {
    ExprPtr e = RationalExpr::product(
        RationalExpr::product(RationalExpr::inverse(x(1)), RationalExpr::inverse(u(1))), x(1));
    CHECK_FALSE(is_selfadjoint_probabilistic(e, 4, 20, 1e-8, 7).selfadjoint);
  }
  SECTION("Hermitian constants pass for any trial count") {
    CounterRng rng(3);
    ExprPtr e = RationalExpr::constant(testutil::random_hermitian_matrix(rng, 2), kSig21);
    CHECK(is_selfadjoint_probabilistic(e, 4, 3, 1e-8, 7).selfadjoint);
  }
  SECTION("identically singular inverses raise NoSampleInDomain") {
    Signature sig{1, 0};
    ExprPtr zero = RationalExpr::sum(
        x(1, sig), RationalExpr::product(RationalExpr::constant(-Matrix::Ones(1, 1), sig),
                                         x(1, sig)));
    CHECK_THROWS_AS(is_selfadjoint_probabilistic(RationalExpr::inverse(zero), 4, 5, 1e-8, 7),
                    NoSampleInDomainError);
  }
}
