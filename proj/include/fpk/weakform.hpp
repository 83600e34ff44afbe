#pragma once

#include "fpk/rational.hpp"
#include "fpk/util.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <vector>

namespace fpk {

using json = nlohmann::json;
using Field = std::function<double(double, double)>;

// Tensor bump (1-u^2)^4 (1-v^2)^4 times a polynomial of degree <= 3 in the
// scaled coordinates, with analytic gradient and Laplacian.
class TestFunction {
  public:
    TestFunction(double cx, double cy, double r, double amp = 1.0,
                 std::array<double, 10> poly = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0})
        : cx_(cx), cy_(cy), r_(r), amp_(amp), c_(poly) {}

    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double radius() const { return r_; }

    double value(double x, double y) const {
        double u = (x - cx_) / r_, v = (y - cy_) / r_;
        if (std::fabs(u) >= 1 || std::fabs(v) >= 1) return 0;
        return amp_ * B(u) * B(v) * P(u, v);
    }

    std::array<double, 2> gradient(double x, double y) const {
        double u = (x - cx_) / r_, v = (y - cy_) / r_;
        if (std::fabs(u) >= 1 || std::fabs(v) >= 1) return {0, 0};
        double gx = (Bd(u) * B(v) * P(u, v) + B(u) * B(v) * Pu(u, v)) / r_;
        double gy = (B(u) * Bd(v) * P(u, v) + B(u) * B(v) * Pv(u, v)) / r_;
        return {amp_ * gx, amp_ * gy};
    }

    double laplacian(double x, double y) const {
        double u = (x - cx_) / r_, v = (y - cy_) / r_;
        if (std::fabs(u) >= 1 || std::fabs(v) >= 1) return 0;
        double fxx = Bdd(u) * B(v) * P(u, v) + 2 * Bd(u) * B(v) * Pu(u, v) + B(u) * B(v) * Puu(u, v);
        double fyy = B(u) * Bdd(v) * P(u, v) + 2 * B(u) * Bd(v) * Pv(u, v) + B(u) * B(v) * Pvv(u, v);
        return amp_ * (fxx + fyy) / (r_ * r_);
    }

    // sup|phi| + sup|grad phi| + sup|second derivatives|, from a fixed dense
    // lattice of the closed-form derivatives.
    double c2_norm() const {
        double m0 = 0, m1 = 0, m2 = 0;
        const int n = 81;
        double d = 1e-4 * r_;
        for (int a = 0; a <= n; ++a)
            for (int b = 0; b <= n; ++b) {
                double x = cx_ + (-1.0 + 2.0 * a / n) * r_ * 0.999;
                double y = cy_ + (-1.0 + 2.0 * b / n) * r_ * 0.999;
                m0 = std::max(m0, std::fabs(value(x, y)));
                auto g = gradient(x, y);
                m1 = std::max(m1, std::hypot(g[0], g[1]));
                double fxx = (value(x + d, y) - 2 * value(x, y) + value(x - d, y)) / (d * d);
                double fyy = (value(x, y + d) - 2 * value(x, y) + value(x, y - d)) / (d * d);
                m2 = std::max(m2, std::max(std::fabs(fxx), std::fabs(fyy)));
            }
        return m0 + m1 + m2;
    }

  private:
    static double B(double t) {
        double s = 1 - t * t;
        return s * s * s * s;
    }
    static double Bd(double t) {
        double s = 1 - t * t;
        return -8 * t * s * s * s;
    }
    static double Bdd(double t) {
        double s = 1 - t * t;
        return -8 * s * s * s + 48 * t * t * s * s;
    }
    // polynomial 1, u, v, u^2, uv, v^2, u^3, u^2 v, u v^2, v^3
    double P(double u, double v) const {
        return c_[0] + c_[1] * u + c_[2] * v + c_[3] * u * u + c_[4] * u * v + c_[5] * v * v +
               c_[6] * u * u * u + c_[7] * u * u * v + c_[8] * u * v * v + c_[9] * v * v * v;
    }
    double Pu(double u, double v) const {
        return c_[1] + 2 * c_[3] * u + c_[4] * v + 3 * c_[6] * u * u + 2 * c_[7] * u * v +
               c_[8] * v * v;
    }
    double Pv(double u, double v) const {
        return c_[2] + c_[4] * u + 2 * c_[5] * v + c_[7] * u * u + 2 * c_[8] * u * v +
               3 * c_[9] * v * v;
    }
    double Puu(double u, double v) const { return 2 * c_[3] + 6 * c_[6] * u + 2 * c_[7] * v; }
    double Pvv(double u, double v) const { return 2 * c_[5] + 2 * c_[8] * u + 6 * c_[9] * v; }

    double cx_, cy_, r_, amp_;
    std::array<double, 10> c_;
};

// 5x5 center lattice, two radii per center.
inline std::vector<TestFunction> bump_basis(double lo, double hi, int lattice = 5) {
    std::vector<TestFunction> basis;
    double span = hi - lo;
    double step = span / (lattice + 1);
    for (int a = 1; a <= lattice; ++a)
        for (int b = 1; b <= lattice; ++b) {
            double cx = lo + a * step, cy = lo + b * step;
            basis.emplace_back(cx, cy, step * 0.95);
            basis.emplace_back(cx, cy, step * 0.55);
        }
    return basis;
}

// integral of (lap phi + b . grad phi) rho over the support of phi, composite
// Simpson with nodes on the lattice h starting at the window corner.
inline double residual(const Field& rho, const Field& bx, const Field& by, const TestFunction& phi,
                       double window_lo, double window_hi, double h) {
    if (phi.cx() - phi.radius() < window_lo || phi.cx() + phi.radius() > window_hi ||
        phi.cy() - phi.radius() < window_lo || phi.cy() + phi.radius() > window_hi)
        throw DomainError("test function support exits the window");
    auto snap = [&](double t) { return static_cast<long>(std::floor((t - window_lo) / h)); };
    long i0 = std::max(0l, snap(phi.cx() - phi.radius()));
    long j0 = std::max(0l, snap(phi.cy() - phi.radius()));
    long i1 = snap(phi.cx() + phi.radius()) + 2;
    long j1 = snap(phi.cy() + phi.radius()) + 2;
    long nx = i1 - i0 + 1, ny = j1 - j0 + 1;
    if (nx % 2 == 0) ++nx;
    if (ny % 2 == 0) ++ny;
    double total = 0;
    for (long j = 0; j < ny; ++j) {
        double y = window_lo + (j0 + j) * h;
        double wy = simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(ny), h);
        double row = 0;
        for (long i = 0; i < nx; ++i) {
            double x = window_lo + (i0 + i) * h;
            double wx = simpson_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(nx), h);
            auto grad = phi.gradient(x, y);
            double lap = phi.laplacian(x, y);
            double integrand = (lap + bx(x, y) * grad[0] + by(x, y) * grad[1]) * rho(x, y);
            row += wx * integrand;
        }
        total += wy * row;
    }
    return total;
}

struct ResidualReport {
    double h = 0;
    std::vector<double> residuals;             // at h, per test function
    std::vector<double> normalized;            // residual / (||phi||_C2 ||rho||_1)
    double max_normalized = 0;                 // at h
    double max_normalized_coarse = 0;          // at 2h
    double order = 0;                          // log2(coarse / fine)
    double rho_l1 = 0;
};

inline json to_json(const ResidualReport& r) {
    return json{{"h", r.h},
                {"residuals", r.residuals},
                {"normalized", r.normalized},
                {"max_normalized", r.max_normalized},
                {"max_normalized_coarse", r.max_normalized_coarse},
                {"order", r.order},
                {"rho_l1", r.rho_l1}};
}

inline double field_l1(const Field& f, double lo, double hi, double h) {
    long n = static_cast<long>(std::ceil((hi - lo) / h)) + 1;
    if (n % 2 == 0) ++n;
    double total = 0;
    for (long j = 0; j < n; ++j) {
        double wy = simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(n), h);
        double row = 0;
        for (long i = 0; i < n; ++i)
            row += simpson_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(n), h) *
                   std::fabs(f(lo + i * h, lo + j * h));
        total += wy * row;
    }
    return total;
}

namespace detail {

// rho and b*rho sampled once on the lattice covering the basis hull; each
// residual is then a weighted sum over its support sub-box.
struct SampledFields {
    double lo = 0, h = 0;
    long n = 0;
    std::vector<double> rho, bxr, byr;
    double val(const std::vector<double>& a, long i, long j) const { return a[j * n + i]; }
};

inline SampledFields sample_fields(const Field& rho, const Field& bx, const Field& by,
                                   double window_lo, double hull_lo, double hull_hi, double h) {
    SampledFields s;
    s.h = h;
    long i0 = static_cast<long>(std::floor((hull_lo - window_lo) / h));
    long i1 = static_cast<long>(std::ceil((hull_hi - window_lo) / h)) + 1;
    s.lo = window_lo + i0 * h;
    s.n = i1 - i0 + 1;
    s.rho.resize(s.n * s.n);
    s.bxr.resize(s.n * s.n);
    s.byr.resize(s.n * s.n);
    parallel_blocks(static_cast<std::size_t>(s.n), worker_count() * 2,
                    [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                        for (std::size_t j = jlo; j < jhi; ++j) {
                            double y = s.lo + j * h;
                            for (long i = 0; i < s.n; ++i) {
                                double x = s.lo + i * h;
                                double p = rho(x, y);
                                s.rho[j * s.n + i] = p;
                                s.bxr[j * s.n + i] = bx(x, y) * p;
                                s.byr[j * s.n + i] = by(x, y) * p;
                            }
                        }
                    });
    return s;
}

inline double residual_on_samples(const SampledFields& s, const TestFunction& phi) {
    long i0 = std::max(0l, static_cast<long>(std::floor((phi.cx() - phi.radius() - s.lo) / s.h)));
    long j0 = std::max(0l, static_cast<long>(std::floor((phi.cy() - phi.radius() - s.lo) / s.h)));
    long i1 = std::min(s.n - 1,
                       static_cast<long>(std::ceil((phi.cx() + phi.radius() - s.lo) / s.h)) + 1);
    long j1 = std::min(s.n - 1,
                       static_cast<long>(std::ceil((phi.cy() + phi.radius() - s.lo) / s.h)) + 1);
    long nx = i1 - i0 + 1, ny = j1 - j0 + 1;
    if (nx % 2 == 0) { --nx; --i1; }
    if (ny % 2 == 0) { --ny; --j1; }
    double total = 0;
    for (long j = 0; j < ny; ++j) {
        double y = s.lo + (j0 + j) * s.h;
        double wy = simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(ny), s.h);
        double row = 0;
        for (long i = 0; i < nx; ++i) {
            double x = s.lo + (i0 + i) * s.h;
            double wx =
                simpson_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(nx), s.h);
            auto grad = phi.gradient(x, y);
            double lap = phi.laplacian(x, y);
            long idx = (j0 + j) * s.n + (i0 + i);
            row += wx * (lap * s.rho[idx] + grad[0] * s.bxr[idx] + grad[1] * s.byr[idx]);
        }
        total += wy * row;
    }
    return total;
}

}  // namespace detail

// Runs the basis at 2h and h; order estimated from the max normalized
// residuals of the two resolutions.
inline ResidualReport residual_suite(const Field& rho, const Field& bx, const Field& by,
                                     const std::vector<TestFunction>& basis, double window_lo,
                                     double window_hi, double h) {
    if (basis.empty()) throw ParameterError("empty test basis");
    ResidualReport rep;
    rep.h = h;
    double hull_lo = window_hi, hull_hi = window_lo;
    for (const auto& phi : basis) {
        if (phi.cx() - phi.radius() < window_lo || phi.cx() + phi.radius() > window_hi ||
            phi.cy() - phi.radius() < window_lo || phi.cy() + phi.radius() > window_hi)
            throw DomainError("test function support exits the window");
        hull_lo = std::min({hull_lo, phi.cx() - phi.radius(), phi.cy() - phi.radius()});
        hull_hi = std::max({hull_hi, phi.cx() + phi.radius(), phi.cy() + phi.radius()});
    }
    rep.rho_l1 = field_l1(rho, window_lo, window_hi, std::max(h, (window_hi - window_lo) / 2048));
    auto fine = detail::sample_fields(rho, bx, by, window_lo, hull_lo, hull_hi, h);
    auto coarse = detail::sample_fields(rho, bx, by, window_lo, hull_lo, hull_hi, 2 * h);
    std::vector<double> c2(basis.size()), res_f(basis.size()), res_c(basis.size());
    parallel_blocks(basis.size(), worker_count() * 2,
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
                        for (std::size_t k = lo; k < hi; ++k) {
                            c2[k] = basis[k].c2_norm();
                            res_f[k] = detail::residual_on_samples(fine, basis[k]);
                            res_c[k] = detail::residual_on_samples(coarse, basis[k]);
                        }
                    });
    for (std::size_t k = 0; k < basis.size(); ++k) {
        rep.residuals.push_back(res_f[k]);
        double scale = c2[k] * std::max(rep.rho_l1, 1e-300);
        rep.normalized.push_back(std::fabs(res_f[k]) / scale);
        rep.max_normalized = std::max(rep.max_normalized, rep.normalized.back());
        rep.max_normalized_coarse = std::max(rep.max_normalized_coarse, std::fabs(res_c[k]) / scale);
    }
    if (rep.max_normalized > 0)
        rep.order = std::log2(rep.max_normalized_coarse / rep.max_normalized);
    return rep;
}

// lhs = integral |grad rho / rho|^2 rho, rhs = integral |b|^2 rho over the
// window; rho must be strictly positive.
inline std::pair<double, double> l2_loggrad_check(const Field& rho, const Field& drho_x,
                                                  const Field& drho_y, const Field& bx,
                                                  const Field& by, double lo, double hi, double h) {
    long n = static_cast<long>(std::ceil((hi - lo) / h)) + 1;
    if (n % 2 == 0) ++n;
    double hh = (hi - lo) / (n - 1);
    std::vector<double> lhs_rows(n, 0.0), rhs_rows(n, 0.0);
    std::atomic<bool> nonpositive{false};
    parallel_blocks(static_cast<std::size_t>(n), worker_count() * 2,
                    [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                        for (std::size_t j = jlo; j < jhi; ++j) {
                            double y = lo + j * hh;
                            double l = 0, r = 0;
                            for (long i = 0; i < n; ++i) {
                                double x = lo + i * hh;
                                double w = simpson_weight(static_cast<std::size_t>(i),
                                                          static_cast<std::size_t>(n), hh);
                                double p = rho(x, y);
                                if (!(p > 0)) {
                                    nonpositive = true;
                                    return;
                                }
                                double gx = drho_x(x, y), gy = drho_y(x, y);
                                l += w * (gx * gx + gy * gy) / p;
                                double vx = bx(x, y), vy = by(x, y);
                                r += w * (vx * vx + vy * vy) * p;
                            }
                            lhs_rows[j] = l;
                            rhs_rows[j] = r;
                        }
                    });
    if (nonpositive) throw DomainError("density not strictly positive");
    double lhs = 0, rhs = 0;
    for (long j = 0; j < n; ++j) {
        double w = simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(n), hh);
        lhs += w * lhs_rows[j];
        rhs += w * rhs_rows[j];
    }
    return {lhs, rhs};
}

// Rescaling identities of g_{P,N}(x,y) = f(N(x-Px), N(y-Py)) for a closed-form
// bump f, with norms measured at matched effective resolution. The printed
// identity ||grad g|| = N ||f||_inf is a typo for N ||grad f||_inf; the
// report verifies the chain-rule form and flags the discrepancy.
struct ScalingReport {
    double ratio_dxx_l1 = 0;   // expected 1
    double ratio_lap_l1 = 0;   // expected 1
    double ratio_sup = 0;      // expected 1
    double ratio_grad_sup = 0; // expected N
    bool printed_identity_matches = false;  // N ||f||_inf form
    json to_json_obj() const {
        return json{{"ratio_dxx_l1", ratio_dxx_l1},
                    {"ratio_lap_l1", ratio_lap_l1},
                    {"ratio_sup", ratio_sup},
                    {"ratio_grad_sup", ratio_grad_sup},
                    {"printed_identity_matches", printed_identity_matches}};
    }
};

inline ScalingReport scaling_identities(const TestFunction& f, double px, double py, int N,
                                        double window_lo, double window_hi, double h) {
    if (N < 1) throw ParameterError("N must be >= 1");
    double r = f.radius() / N;
    if (px - r < window_lo || px + r > window_hi || py - r < window_lo || py + r > window_hi)
        throw DomainError("rescaled support exits the window");
    auto norms = [&](const TestFunction& t, double cx, double cy, double rr, int NN, double hh) {
        // integrate over the support square of the scaled function
        long n = static_cast<long>(std::ceil(2 * rr / hh)) + 1;
        if (n % 2 == 0) ++n;
        double dxx_l1 = 0, lap_l1 = 0, sup = 0, gsup = 0;
        for (long j = 0; j < n; ++j) {
            double y = cy - rr + j * hh;
            double wy = simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(n), hh);
            for (long i = 0; i < n; ++i) {
                double x = cx - rr + i * hh;
                double wx =
                    simpson_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(n), hh);
                double u = t.cx() + (x - cx) * NN, v = t.cy() + (y - cy) * NN;
                double val = t.value(u, v);
                auto g = t.gradient(u, v);
                double lap = t.laplacian(u, v) * NN * NN;
                // dxx of the scaled function via the unscaled second difference
                double d = 1e-5 * t.radius();
                double fxx = (t.value(u + d, v) - 2 * t.value(u, v) + t.value(u - d, v)) / (d * d) *
                             NN * NN;
                dxx_l1 += wy * wx * std::fabs(fxx);
                lap_l1 += wy * wx * std::fabs(lap);
                sup = std::max(sup, std::fabs(val));
                gsup = std::max(gsup, std::hypot(g[0], g[1]) * NN);
            }
        }
        return std::array<double, 4>{dxx_l1, lap_l1, sup, gsup};
    };
    auto base = norms(f, f.cx(), f.cy(), f.radius(), 1, h);
    auto scaled = norms(f, px, py, r, N, h / N);
    ScalingReport rep;
    rep.ratio_dxx_l1 = scaled[0] / base[0];
    rep.ratio_lap_l1 = scaled[1] / base[1];
    rep.ratio_sup = scaled[2] / base[2];
    rep.ratio_grad_sup = scaled[3] / base[3];
    // the printed form would make ratio_grad_sup equal N ||f||_inf / ||grad f||_inf
    rep.printed_identity_matches = std::fabs(rep.ratio_grad_sup - N * base[2] / base[3]) < 1e-6;
    return rep;
}

}  // namespace fpk
