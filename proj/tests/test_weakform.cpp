#include "fpk/weakform.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace fpk;

namespace {

Field gaussian_density(double Z) {
    return [Z](double x, double y) { return std::exp(-0.5 * (x * x + y * y)) / (2.0 * M_PI * Z); };
}

}  // namespace

TEST_CASE("test functions have consistent analytic derivatives") {
    TestFunction phi(0.3, -0.1, 0.7, 1.2, {1, 0.5, -0.3, 0, 0.2, 0, 0.1, 0, 0, -0.05});
    double d = 1e-6;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int k = 0; k < 50; ++k) {
        double x = 0.3 + u(rng) * 0.9, y = -0.1 + u(rng) * 0.9;
        auto g = phi.gradient(x, y);
        double fx = (phi.value(x + d, y) - phi.value(x - d, y)) / (2 * d);
        double fy = (phi.value(x, y + d) - phi.value(x, y - d)) / (2 * d);
        CHECK(std::fabs(g[0] - fx) < 1e-6 * (1 + std::fabs(fx)));
        CHECK(std::fabs(g[1] - fy) < 1e-6 * (1 + std::fabs(fy)));
        double lap_fd = (phi.value(x + d, y) + phi.value(x - d, y) + phi.value(x, y + d) +
                         phi.value(x, y - d) - 4 * phi.value(x, y)) /
                        (d * d);
        CHECK(std::fabs(phi.laplacian(x, y) - lap_fd) < 2e-4 * (1 + std::fabs(lap_fd)));
    }
    CHECK(phi.value(0.3 + 0.8, -0.1) == 0.0);  // outside support
}

TEST_CASE("Ornstein-Uhlenbeck pair is weakly stationary") {
    Field rho = gaussian_density(1.0);
    Field bx = [](double x, double) { return -x; };
    Field by = [](double, double y) { return -y; };
    TestFunction phi(0.4, -0.3, 1.1);
    // |residual| <= C h^2 with C calibrated on the coarse grids
    double c_est = 0;
    for (double h : {1.0 / 32, 1.0 / 64})
        c_est = std::max(c_est, std::fabs(residual(rho, bx, by, phi, -4, 4, h)) / (h * h));
    for (double h : {1.0 / 256, 1.0 / 512})
        CHECK(std::fabs(residual(rho, bx, by, phi, -4, 4, h)) <= c_est * h * h);
}

TEST_CASE("constant density with zero drift integrates the laplacian to zero") {
    Field rho = [](double, double) { return 1.0; };
    Field zero = [](double, double) { return 0.0; };
    TestFunction phi(0.0, 0.0, 0.5);
    double r = residual(rho, zero, zero, phi, -1, 1, 1.0 / 2048);
    CHECK(std::fabs(r) <= 1e-10);  // divergence theorem
}

TEST_CASE("residual is linear in the test function and the density") {
    Field rho = gaussian_density(1.0);
    Field rho2 = [](double x, double y) {
        return std::exp(-((x - 0.2) * (x - 0.2) + y * y));
    };
    Field bx = [](double x, double) { return -x; };
    Field by = [](double, double y) { return -y; };
    TestFunction phi(0.1, 0.2, 0.8);
    TestFunction phi3(0.1, 0.2, 0.8, 3.0);  // amplitude-scaled copy
    double h = 1.0 / 128;
    double a = residual(rho, bx, by, phi, -4, 4, h);
    double a3 = residual(rho, bx, by, phi3, -4, 4, h);
    CHECK(std::fabs(a3 - 3.0 * a) <= 1e-12 * (1 + std::fabs(a3)));

    Field combo = [&](double x, double y) { return 2.0 * rho(x, y) - 0.5 * rho2(x, y); };
    double c = residual(combo, bx, by, phi, -4, 4, h);
    double c_parts = 2.0 * a - 0.5 * residual(rho2, bx, by, phi, -4, 4, h);
    CHECK(std::fabs(c - c_parts) <= 1e-12 * (1 + std::fabs(c)));
}

TEST_CASE("residual errors on out-of-window supports") {
    Field rho = gaussian_density(1.0);
    Field zero = [](double, double) { return 0.0; };
    TestFunction phi(3.9, 0.0, 0.5);
    CHECK_THROWS_AS(residual(rho, zero, zero, phi, -4, 4, 1.0 / 64), DomainError);
}

TEST_CASE("residual suite on the zero density") {
    Field zero = [](double, double) { return 0.0; };
    auto basis = bump_basis(-0.9, 0.9);
    auto rep = residual_suite(zero, zero, zero, basis, -1, 1, 1.0 / 128);
    for (double r : rep.residuals) CHECK(r == 0.0);
    CHECK(rep.max_normalized == 0.0);
}

TEST_CASE("loggrad equality case and strict inequality for shifted drift") {
    double A = 6.5;
    double Z = std::erf(A / std::sqrt(2.0));
    Z *= Z;
    Field rho = gaussian_density(Z);
    Field dx = [rho](double x, double y) { return -x * rho(x, y); };
    Field dy = [rho](double x, double y) { return -y * rho(x, y); };
    Field bx = [](double x, double) { return -x; };
    Field by = [](double, double y) { return -y; };
    auto [lhs, rhs] = l2_loggrad_check(rho, dx, dy, bx, by, -A, A, 1.0 / 64);
    CHECK(std::fabs(lhs - rhs) <= 1e-6 * rhs);
    CHECK(std::fabs(rhs - 2.0) < 1e-4);  // E|x|^2 for the standard gaussian

    // shifted drift: lhs strictly below rhs by |c|^2
    Field bxs = [](double x, double) { return -x + 1.0; };
    auto [lhs2, rhs2] = l2_loggrad_check(rho, dx, dy, bxs, by, -A, A, 1.0 / 64);
    CHECK(std::fabs(lhs2 - lhs) < 1e-12);
    CHECK(std::fabs(rhs2 - (rhs + 1.0)) < 1e-4);
    CHECK(lhs2 < rhs2);

    Field negative = [](double, double) { return -1.0; };
    CHECK_THROWS_AS(l2_loggrad_check(negative, dx, dy, bx, by, -1, 1, 1.0 / 32), DomainError);
}

TEST_CASE("rescaling identities") {
    TestFunction f(0.0, 0.0, 0.8);
    auto id = scaling_identities(f, 0.0, 0.0, 1, -1, 1, 1.0 / 256);
    CHECK(id.ratio_dxx_l1 == 1.0);
    CHECK(id.ratio_lap_l1 == 1.0);
    CHECK(id.ratio_sup == 1.0);
    CHECK(id.ratio_grad_sup == 1.0);

    auto two = scaling_identities(f, 0.1, -0.05, 2, -1, 1, 1.0 / 256);
    CHECK(two.ratio_dxx_l1 > 0.99);
    CHECK(two.ratio_dxx_l1 < 1.01);
    CHECK(two.ratio_lap_l1 > 0.99);
    CHECK(two.ratio_lap_l1 < 1.01);
    CHECK(two.ratio_sup > 0.999);
    CHECK(two.ratio_sup < 1.001);
    CHECK(two.ratio_grad_sup > 1.98);
    CHECK(two.ratio_grad_sup < 2.02);
    // the printed identity N ||f||_inf does not hold for this family
    CHECK_FALSE(two.printed_identity_matches);

    CHECK_THROWS_AS(scaling_identities(f, 0.9, 0.9, 2, -1, 1, 1.0 / 128), DomainError);
}
