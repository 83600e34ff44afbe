#include "fpk/ornstein.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace fpk;

namespace {

// --- brute-force construction of p_2, sharing no code with refine_step ----
// Direct transcription of the definition for delta = 1/2: closed forms for
// p_1 and p_1^x, strip membership decided pointwise.

Rational bf_p1(const Rational& x, const Rational& y) {
    Rational d(1, 2);
    auto in = [](const Rational& t, const Rational& a, const Rational& b) {
        return t > a && t < b;
    };
    if (in(x, Rational(-1, 2), Rational(0)) && in(y, -d, -d / 4)) return Rational(1);
    if (in(x, Rational(0), Rational(1, 2)) && in(y, d / 4, d)) return Rational(1);
    if (in(x, Rational(0), Rational(1, 2)) && in(y, -d, -d / 4)) return Rational(-1);
    if (in(x, Rational(-1, 2), Rational(0)) && in(y, d / 4, d)) return Rational(-1);
    return Rational(0);
}

// p_1^x(x, y) = sign * max(0, 1/2 - |x|) with the band sign
Rational bf_p1x(const Rational& x, const Rational& y) {
    Rational d(1, 2);
    Rational m = Rational(1, 2) - rat_abs(x);
    if (m < 0) m = 0;
    if (y > -d && y < -d / 4) return m;
    if (y > d / 4 && y < d) return -m;
    return Rational(0);
}

// p_2(x, y) for delta = 1/2 and a given alpha, evaluated from the definition.
Rational bf_p2(const Rational& x, const Rational& y, const Rational& alpha) {
    Rational d(1, 2);
    std::vector<Rational> breaks = {-d, -d / 4, d / 4, d};
    for (const Rational& c : breaks) {
        if (!(y > c - alpha / 2 && y < c + alpha / 2)) continue;
        if (c > 0) return -bf_p2(x, -y, alpha);  // oddness extension
        // sample heights in the adjacent old cells, clear of every strip
        Rational below = c - alpha, above = c + alpha;
        Rational r1 = (bf_p1(x, below) + bf_p1(x, above)) / 2;
        Rational kw = alpha / d;  // K-cell width
        Rational rel = (x + 1) / kw;
        BigInt k = numerator(rel) / denominator(rel);
        Rational xk = Rational(-1) + (2 * Rational(k) + 1) * kw / 2;
        Rational beta = d / (2 * alpha) * (bf_p1x(xk, below) - bf_p1x(xk, above));
        bool left = x < xk, lower = y < c;
        return r1 + ((left == lower) ? Rational(beta) : Rational(-beta));
    }
    return bf_p1(x, y);
}

}  // namespace

TEST_CASE("p_1 report for several deltas") {
    for (const Rational& d : {Rational(1, 2), Rational(1, 4), Rational(1, 8)}) {
        auto st = build_p1(d);
        CHECK(st.report.l1 == 3 * d / 2);
        CHECK(st.report.max_row_residual == 0);
        CHECK(st.report.max_col_residual == 0);
        CHECK(st.report.sup_fx <= 1);
        CHECK(st.report.sup_fy <= d);
        CHECK(st.report.odd_ok);
        CHECK(st.report.all_pass());
        CHECK(st.p.at(Rational(-1, 4), -3 * d / 8) == 1);
    }
    CHECK_THROWS_AS(build_p1(Rational(2)), ParameterError);
    CHECK_THROWS_AS(build_p1(Rational(0)), ParameterError);
}

TEST_CASE("refinement leaves p unchanged off the strips") {
    auto s1 = build_p1(Rational(1, 2));
    Rational alpha(1, 32);
    auto s2 = refine_step(s1, alpha);
    const auto& ys = s1.p.ygrid().points();
    for (std::size_t j = 0; j < s2.p.ncy(); ++j) {
        Rational ym = s2.p.ygrid().midpoint(j);
        bool in_strip = false;
        for (std::size_t k = 1; k + 1 < ys.size(); ++k)
            if (ym > ys[k] - alpha / 2 && ym < ys[k] + alpha / 2) in_strip = true;
        if (in_strip) continue;
        for (std::size_t i = 0; i < s2.p.ncx(); ++i)
            CHECK(s2.p.cell(i, j) == s1.p.at(s2.p.xgrid().midpoint(i), ym));
    }
}

TEST_CASE("brute-force oracle reproduces every cell of p_2") {
    auto s1 = build_p1(Rational(1, 2));
    Rational alpha = select_alpha(s1, s1.delta);
    auto s2 = refine_step(s1, alpha);
    for (std::size_t j = 0; j < s2.p.ncy(); ++j)
        for (std::size_t i = 0; i < s2.p.ncx(); ++i) {
            Rational xm = s2.p.xgrid().midpoint(i), ym = s2.p.ygrid().midpoint(j);
            REQUIRE(s2.p.cell(i, j) == bf_p2(xm, ym, alpha));
        }
}

TEST_CASE("jump control across refined strips") {
    // each of the three consecutive antiderivative differences lies between 0
    // and half the parent drop, with the parent's orientation
    auto s1 = build_p1(Rational(1, 2));
    Rational alpha(1, 32);
    auto s2 = refine_step(s1, alpha);
    const auto& ys = s1.p.ygrid().points();
    for (std::size_t k = 1; k + 1 < ys.size(); ++k) {
        Rational c = ys[k];
        Rational y_below = c - alpha, y_prime = c - alpha / 4, y_dprime = c + alpha / 4,
                 y_above = c + alpha;
        for (const Rational& x : s2.p.xgrid().points()) {
            Rational parent = x_antiderivative(s1.p, x, y_below) - x_antiderivative(s1.p, x, y_above);
            Rational d1 = x_antiderivative(s2.p, x, y_below) - x_antiderivative(s2.p, x, y_prime);
            Rational d2 = x_antiderivative(s2.p, x, y_prime) - x_antiderivative(s2.p, x, y_dprime);
            Rational d3 = x_antiderivative(s2.p, x, y_dprime) - x_antiderivative(s2.p, x, y_above);
            for (const Rational& dd : {d1, d2, d3}) {
                if (parent >= 0) {
                    CHECK(dd >= 0);
                    CHECK(2 * dd <= parent);
                } else {
                    CHECK(dd <= 0);
                    CHECK(2 * dd >= parent);
                }
            }
        }
    }
}

TEST_CASE("select_alpha obeys its admissibility contract") {
    auto s1 = build_p1(Rational(1, 2));
    Rational a = select_alpha(s1, s1.delta);
    CHECK(is_integer(2 * s1.delta / a));
    CHECK(a <= s1.delta / 16);  // (delta/4)/4
    CHECK(a == Rational(1, 32));

    auto q1 = build_p1(Rational(1, 4));
    Rational aq = select_alpha(q1, q1.delta);
    CHECK(is_integer(2 * q1.delta / aq));
    CHECK(aq <= a);  // constraint set shrinks with delta
}

TEST_CASE("mass growth approaches (delta/2) C3 monotonically") {
    auto s1 = build_p1(Rational(1, 2));
    Rational limit = (s1.delta / 2) * s1.c3;
    Rational prev(-1);
    Rational finest_gain;
    for (int j = 3; j <= 9; ++j) {
        Rational alpha = pow2_inv(j);  // delta/2^(j-1), all dyadic
        auto t = refine_step(s1, alpha);
        Rational gain = l1_norm(t.p) - l1_norm(s1.p);
        CHECK(gain > prev);
        prev = gain;
        finest_gain = gain;
    }
    CHECK(rat_abs(finest_gain - limit) <= limit / 10);
}

TEST_CASE("three-stage construction passes all properties") {
    auto states = construct_sequence(Rational(1, 2), 3);
    REQUIRE(states.size() == 3);
    Rational c3 = states[0].report.int_var_y;
    Rational prev_l1(0);
    for (const auto& st : states) {
        const auto& r = st.report;
        CHECK(r.all_pass());
        CHECK(r.max_row_residual == 0);
        CHECK(r.max_col_residual == 0);
        CHECK(r.int_var_y == c3);           // property 6, exactly
        CHECK(r.max_drop <= r.drop_bound);  // property 7, 2^-(n-1)
        CHECK(r.sup_fx <= 1);
        CHECK(r.sup_fy <= r.sup_fy_bound);
        CHECK(r.l1 > prev_l1);  // strictly increasing mass
        prev_l1 = r.l1;
        CHECK(r.l1 > kC1 * st.delta * st.n);
        CHECK(r.int_var_x < kC2 * st.delta * r.l1);
    }
    // (ek5.2) with the recorded C2 is a large-n statement; the stage ratios
    // must decrease toward it.
    CHECK(states[2].report.ratio5 < states[1].report.ratio5);
    CHECK(states[1].report.ratio5 < states[0].report.ratio5);
}

TEST_CASE("refine_step rejects inadmissible alpha") {
    auto s1 = build_p1(Rational(1, 2));
    CHECK_THROWS_AS(refine_step(s1, Rational(1, 3)), ParameterError);   // 2d/a not integer
    CHECK_THROWS_AS(refine_step(s1, Rational(1, 2)), ParameterError);   // strips overlap
    CHECK_THROWS_AS(refine_step(s1, Rational(-1, 8)), ParameterError);  // negative
}

TEST_CASE("construct_sequence with one stage returns p_1 only") {
    auto states = construct_sequence(Rational(1, 2), 1);
    REQUIRE(states.size() == 1);
    CHECK(states[0].n == 1);
    CHECK(l1_norm(states[0].p) == Rational(3, 4));
}
