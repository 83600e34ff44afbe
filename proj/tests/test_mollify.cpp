#include "fpk/mollify.hpp"
#include "fpk/ornstein.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

using namespace fpk;

TEST_CASE("kernel is a smooth probability density on [-1,1]") {
    const auto& K = BumpKernel::instance();
    CHECK(K.cdf(-1.0) == 0.0);
    CHECK(K.cdf(1.0) == 1.0);
    CHECK(std::fabs(K.cdf(0.0) - 0.5) < 1e-14);
    // unit mass within 1e-12 on an independent fine Simpson grid
    int n = 40001;
    double h = 2.0 / (n - 1);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = K.density(-1 + i * h);
    CHECK(std::fabs(simpson_sum(f, h) - 1.0) < 1e-12);
    CHECK(K.density(-1.0) == 0.0);
    CHECK(K.density(1.0) == 0.0);
    // second antiderivative is z beyond the support
    CHECK(K.cdf_integral(1.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(K.cdf_integral(3.5) == 3.5);
}

TEST_CASE("smoothing the zero function gives zero") {
    Partition1D g({Rational(-1), Rational(0), Rational(1)});
    auto z = StepFunction2D::zero(g, g);
    GridField q = smooth_xy(z, 1.0 / 8, 1.0 / 64);
    CHECK(q.max_abs() == 0.0);
    GridField gg = assemble_g(q);
    CHECK(gg.max_abs() == 0.0);
}

TEST_CASE("mollification preserves zero mass and recovers the L1 norm") {
    auto s1 = build_p1(Rational(1, 2));
    double l1p = to_double(l1_norm(s1.p));
    double last = 0;
    for (double eps : {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256}) {
        MollifiedField f(s1.p, eps);
        NormReport r = compute_norm_report(f, eps / 8);
        CHECK(std::fabs(r.mass) < 1e-10);
        CHECK(r.mixed_l1 <= l1p + 1e-8);
        last = r.mixed_l1;
    }
    CHECK(std::fabs(last - l1p) < 0.01 * l1p);  // within 1% at the finest eps
}

TEST_CASE("antiderivatives vanish at the far edges") {
    auto s1 = build_p1(Rational(1, 2));
    GridField q = smooth_xy(s1.p, 1.0 / 16, 1.0 / 256);
    double scale = 1e-8 * q.l1();
    auto [top, right] = check_vanishing_antiderivatives(q);
    CHECK(top <= scale);
    CHECK(right <= scale);

    GridField z(0, 0, 1.0 / 8, 9, 9);
    auto [zt, zr] = check_vanishing_antiderivatives(z);
    CHECK(zt == 0.0);
    CHECK(zr == 0.0);

    // a translate keeps zero line integrals, hence the same property
    auto moved = translate(s1.p, Rational(1, 8), Rational(-1, 16));
    GridField qm = smooth_xy(moved, 1.0 / 16, 1.0 / 256);
    auto [mt, mr] = check_vanishing_antiderivatives(qm);
    CHECK(mt <= 1e-8 * qm.l1());
    CHECK(mr <= 1e-8 * qm.l1());
}

TEST_CASE("select_epsilon returns a witnessing report") {
    auto s1 = build_p1(Rational(1, 2));
    auto targets = step_norm_targets(s1.p);
    auto sel = select_epsilon(s1.p, s1.delta, targets);
    const double tol = 1e-8;
    CHECK(sel.report.xx_l1 <= targets.int_var_x + tol);
    CHECK(sel.report.yy_l1 <= targets.int_var_y + tol);
    CHECK(sel.report.x_sup <= targets.sup_fy + tol);
    CHECK(sel.report.y_sup <= targets.sup_fx + tol);
    CHECK(sel.report.mixed_l1 >= 0.95 * targets.l1);

    // the (ek5.2) left side does not increase with more smoothing
    MollifiedField fa(s1.p, sel.eps), fb(s1.p, sel.eps / 2);
    NormReport ra = compute_norm_report(fa, sel.eps / 8);
    NormReport rb = compute_norm_report(fb, sel.eps / 16);
    double lhs_a = ra.xx_l1 + ra.yy_l1 + ra.x_sup + ra.y_sup;
    double lhs_b = rb.xx_l1 + rb.yy_l1 + rb.x_sup + rb.y_sup;
    double lhs_exact = targets.int_var_x + targets.int_var_y + targets.sup_fy + targets.sup_fx;
    CHECK(lhs_b >= lhs_a - 1e-8);
    CHECK(lhs_a <= lhs_exact + 1e-8);
    CHECK(lhs_b <= lhs_exact + 1e-8);

    // degenerate input returns at once
    Partition1D g({Rational(-1), Rational(1)});
    auto z = StepFunction2D::zero(g, g);
    auto zsel = select_epsilon(z, Rational(1, 2), step_norm_targets(z));
    CHECK(zsel.halvings == 0);
    CHECK(zsel.report.mixed_l1 == 0.0);
}

TEST_CASE("assemble_g identities under grid refinement") {
    auto s1 = build_p1(Rational(1, 2));
    double eps = 1.0 / 16;
    MollifiedField f(s1.p, eps);

    auto mixed_fd_err = [&](double h) {
        GridField q = smooth_xy(s1.p, eps, h);
        GridField g = assemble_g(q);
        double worst = 0;
        for (int j = 1; j + 1 < g.ny; ++j)
            for (int i = 1; i + 1 < g.nx; ++i) {
                double fd = (g.at(i + 1, j + 1) - g.at(i + 1, j - 1) - g.at(i - 1, j + 1) +
                             g.at(i - 1, j - 1)) /
                            (4 * h * h);
                worst = std::max(worst, std::fabs(fd - q.at(i, j)));
            }
        return worst;
    };
    double e1 = mixed_fd_err(1.0 / 256), e2 = mixed_fd_err(1.0 / 512);
    CHECK(e2 < e1);
    double order = std::log2(e1 / e2);
    CHECK(order >= 1.5);  // second-order mixed difference

    // g vanishes outside the 2 eps enlargement of the support
    GridField q = smooth_xy(s1.p, eps, 1.0 / 256);
    GridField g = assemble_g(q);
    double frame = 0;
    for (int i = 0; i < g.nx; ++i) frame = std::max(frame, std::fabs(g.at(i, g.ny - 1)));
    for (int j = 0; j < g.ny; ++j) frame = std::max(frame, std::fabs(g.at(g.nx - 1, j)));
    CHECK(frame <= 1e-10);

    // cumulative-quadrature g converges fast to the closed-form g
    auto quad_err = [&](double h) {
        GridField qq = smooth_xy(s1.p, eps, h);
        GridField gg = assemble_g(qq);
        double worst = 0;
        for (int j = 0; j < gg.ny; j += 7)
            for (int i = 0; i < gg.nx; i += 7)
                worst = std::max(worst, std::fabs(gg.at(i, j) - f.g(gg.x(i), gg.y(j))));
        return worst;
    };
    double g1 = quad_err(1.0 / 256), g2 = quad_err(1.0 / 512);
    CHECK(g1 < 2e-6);
    CHECK(g2 < g1 / 8);  // roughly fourth order
}

TEST_CASE("norm report ratios and contraction at stages 1 and 2") {
    auto states = construct_sequence(Rational(1, 2), 2);
    double prev_ratio = 0;
    for (const auto& st : states) {
        auto targets = step_norm_targets(st.p);
        auto sel = select_epsilon(st.p, st.delta, targets);
        const auto& r = sel.report;
        const double tol = 1e-8;
        CHECK(r.xx_l1 <= targets.int_var_x + tol);
        CHECK(r.yy_l1 <= targets.int_var_y + tol);
        CHECK(r.x_sup <= targets.sup_fy + tol);
        CHECK(r.y_sup <= targets.sup_fx + tol);
        double step_ratio =
            targets.l1 / (targets.int_var_x + targets.int_var_y + targets.sup_fx + targets.sup_fy);
        CHECK(r.ratio >= step_ratio - 0.05 * step_ratio);
        CHECK(r.ratio > prev_ratio);
        prev_ratio = r.ratio;
    }
}

TEST_CASE("zero report serializes with an undefined ratio") {
    NormReport r;
    r.finalize();
    json j = to_json(r);
    CHECK(j["ratio"] == "undefined");
}

TEST_CASE("resolution preconditions") {
    auto s1 = build_p1(Rational(1, 2));
    CHECK_THROWS_AS(smooth_xy(s1.p, 1.0 / 16, 1.0 / 32), ResolutionError);  // h > eps/8
}

TEST_CASE("determinism: identical inputs give bit-identical grids") {
    auto s1 = build_p1(Rational(1, 2));
    GridField a = smooth_xy(s1.p, 1.0 / 16, 1.0 / 128);
    GridField b = smooth_xy(s1.p, 1.0 / 16, 1.0 / 128);
    REQUIRE(a.v.size() == b.v.size());
    CHECK(std::memcmp(a.v.data(), b.v.data(), a.v.size() * sizeof(double)) == 0);
    NormReport ra = compute_norm_report(MollifiedField(s1.p, 1.0 / 16), 1.0 / 128);
    NormReport rb = compute_norm_report(MollifiedField(s1.p, 1.0 / 16), 1.0 / 128);
    CHECK(ra.mixed_l1 == rb.mixed_l1);
    CHECK(ra.xx_l1 == rb.xx_l1);
    CHECK(ra.yy_l1 == rb.yy_l1);
}
