// Exact arithmetic, contraction construction, weights, and the text form.

#include <gtest/gtest.h>

#include <functional>

#include "confinv/expr.hpp"
#include "confinv/canon.hpp"
#include "confinv/parse.hpp"

using namespace confinv;

namespace {

std::string canon_str(const LinComb& l) { return serialize_text(collect(l)); }

std::string canon_str(const std::string& text) {
  return canon_str(parse(text));
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code;
  }
  return "";
}

TEST(Rational, ReducesAndCompares) {
  Rational a(6, -4);
  EXPECT_EQ(a.num(), -3);
  EXPECT_EQ(a.den(), 2);
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(2, 3) * Rational(3, 4), Rational(1, 2));
  EXPECT_LT(Rational(1, 3), Rational(1, 2));
  EXPECT_EQ((-Rational(5)).sign(), -1);
  EXPECT_EQ(error_code([] { Rational x(1, 0); }), "DivideByZero");
}

TEST(Rational, OverflowIsDetected) {
  Rational big(std::int64_t(3037000500), 1);
  EXPECT_EQ(error_code([&] { auto r = big * big; (void)r; }), "Overflow");
}

TEST(PolyN, Basics) {
  PolyN n = PolyN::variable();
  PolyN p = n * n - PolyN::linear(Rational(0), Rational(3)) + PolyN(2);
  EXPECT_EQ(p.degree(), 2);
  EXPECT_EQ(p.eval(Rational(1)), Rational(0));
  EXPECT_EQ(p.eval(Rational(2)), Rational(0));
  EXPECT_EQ(p.eval(Rational(3)), Rational(2));
  PolyN q, r;
  PolyN::divmod(p, PolyN::linear(Rational(-1), Rational(1)), q, r);
  EXPECT_TRUE(r.is_zero());
  EXPECT_EQ(q.eval(Rational(5)), Rational(3));  // (N-2) at 5
}

TEST(RationalFnN, NormalFormAndLimit) {
  PolyN n = PolyN::variable();
  RationalFnN f(n * n - PolyN(1), PolyN::linear(Rational(1), Rational(1)));
  // (N^2-1)/(N+1) reduces to N-1
  EXPECT_EQ(f.den(), PolyN(Rational(1)));
  EXPECT_EQ(f.degree(), 1);
  EXPECT_EQ(f.eval(Rational(4)), Rational(3));

  RationalFnN g(PolyN::linear(Rational(4), Rational(-2)),
                PolyN::linear(Rational(-3), Rational(1)));
  EXPECT_EQ(g.degree(), 0);
  EXPECT_EQ(g.leading(), Rational(-2));
  EXPECT_EQ(error_code([&] { g.eval(Rational(3)); }), "PoleAtN");
}

TEST(Contraction, ValidationErrors) {
  Factor rm{FactorKind::Riemann, 0, 0, 0};
  EXPECT_EQ(error_code([&] {
              make_contraction({rm}, {{{0, 0}, {0, 0}}},
                               {{0, 1}, {0, 2}, {0, 3}});
            }),
            "SelfPair");
  EXPECT_EQ(error_code([&] {
              make_contraction({rm}, {{{0, 0}, {0, 1}}, {{0, 1}, {0, 2}}},
                               {{0, 3}});
            }),
            "OverlappingPairs");
  EXPECT_EQ(error_code([&] {
              make_contraction({rm}, {{{0, 0}, {0, 1}}}, {{0, 2}});
            }),
            "UncoveredSlot");
}

TEST(Weight, MatchesTheScalingTable) {
  EXPECT_EQ(weight(parse("contr(Rm[a b c d] * Rm[a b c d])")), -4);
  EXPECT_EQ(weight(parse("contr(Psi1[a a])")), -2);
  EXPECT_EQ(weight(parse("contr(Xi[a] * Xi[a])")), -2);
  EXPECT_EQ(weight(parse("contr(Sc)")), -2);
  EXPECT_EQ(weight(parse("contr(Ric[a b] * Ric[a b])")), -4);
  // a connection-tower block scales like a lowered metric derivative
  EXPECT_EQ(weight(parse("contr(SGamma[a b ; u] * SGamma[a b ; u])")), -2);
  EXPECT_EQ(weight(parse("contr(SXi[a ; b] * Xi[a] * Xi[b])")), -4);
}

TEST(Weight, MixedListsNeedTheFlag) {
  LinComb a = parse("contr(Sc)");
  LinComb b = parse("contr(Sc * Sc)");
  EXPECT_EQ(error_code([&] {
              make_lincomb({a.terms[0], b.terms[0]}, formal_dim);
            }),
            "WeightMismatch");
  LinComb m = make_lincomb({a.terms[0], b.terms[0]}, formal_dim, true);
  EXPECT_EQ(weight(m), -2);  // first term decides
}

TEST(Parse, RoundTripsThroughTheCanonicalForm) {
  const char* cases[] = {
      "contr(Rm[a b c d] * Rm[a b c d])",
      "-2*contr(Psi1[a a])",
      "contr(D[i] Ric[i j] * Xi[j])",
      "3/2*contr(SXi[a b ; c] * Rm[a c b d] * Xi[d])",
      "[N-2]*contr(Psi0[a] * Psi0[a])",
      "contr(SGamma[a ; b c ; u] * SGamma[a ; b c ; u])",
      "contr(Omega3[a b c] * SpXi1[a b ; c])",
      "contr(g[a b] * Ric[a b])",
  };
  for (const char* c : cases) {
    LinComb l = parse(c);
    EXPECT_EQ(canon_str(parse(serialize_text(l))), canon_str(l)) << c;
  }
}

TEST(Parse, FreeSlotsAreOrderedByFirstAppearance) {
  LinComb l = parse("contr(Ric[u v])");
  ASSERT_EQ(l.terms.size(), 1u);
  EXPECT_EQ(l.terms[0].c.free.size(), 2u);
  EXPECT_EQ(l.terms[0].c.free[0], (Slot{0, 0}));
  EXPECT_EQ(l.terms[0].c.free[1], (Slot{0, 1}));
}

TEST(Parse, ErrorsCarryStableCodes) {
  EXPECT_EQ(error_code([] { parse("contr(Rm[a b c])"); }), "IndexArityError");
  EXPECT_EQ(error_code([] { parse("contr(Xi[a] * Xi[a] * Xi[a])"); }),
            "RepeatedLabelError");
  EXPECT_EQ(error_code([] { parse("contr(Q[a])"); }), "SyntaxError");
  EXPECT_EQ(error_code([] { parse("2*"); }), "SyntaxError");
}

TEST(Parse, PolynomialCoefficients) {
  LinComb l = parse("[N^2 - 3*N + 2]*contr(Sc) - contr(Sc)");
  ASSERT_EQ(l.terms.size(), 2u);
  EXPECT_EQ(l.terms[0].qofn.num().degree(), 2);
  LinComb p = pin_coefficients(rewrite_dimension(l, 2));
  // N^2-3N+2 vanishes at 2; only the -1 term survives
  ASSERT_EQ(p.terms.size(), 1u);
  EXPECT_EQ(p.terms[0].scalar, Rational(-1));
}

TEST(PinCoefficients, RequiresAPinnedDimension) {
  LinComb l = parse("contr(Sc)");
  EXPECT_EQ(error_code([&] { pin_coefficients(l); }), "DimensionMismatch");
}

TEST(TracedShapes, RiemannTraceBecomesRicci) {
  // Rm with cores 1,3 contracted = Ric by the trace convention
  LinComb l = parse("contr(Rm[a b a d] * Ric[b d])");
  EXPECT_EQ(canon_str(eliminate_traced_ric(l)),
            canon_str("contr(Ric[b d] * Ric[b d])"));
}

TEST(TracedShapes, AntisymmetricTraceDrops) {
  LinComb l = parse("contr(Rm[a a c d] * Ric[c d])");
  EXPECT_EQ(collect(eliminate_traced_ric(l)).terms.size(), 0u);
}

TEST(TracedShapes, TracedRicciGradientUsesTheContractedBianchi) {
  // grad R = 2 div Ric: a derivative tower over the traced Ricci reopens
  // into a divergence-contracted Ricci
  LinComb l = parse("contr(D[b] Ric[a a] * Xi[b])");
  LinComb r = eliminate_traced_ric(l);
  EXPECT_EQ(canon_str(r), canon_str("2*contr(D[a] Ric[a b] * Xi[b])"));
}

TEST(Scaled, MultipliesBothCoefficientParts) {
  LinComb l = scaled(parse("contr(Sc)"), Rational(3),
                     RationalFnN(PolyN::variable()));
  EXPECT_EQ(l.terms[0].scalar, Rational(3));
  EXPECT_EQ(l.terms[0].qofn.degree(), 1);
}

}  // namespace
