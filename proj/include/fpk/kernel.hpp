#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fpk {

// The fixed mollifier: c * exp(-1/(1-t^2)) on (-1,1), normalized to unit
// mass. Tables hold the cdf and the first partial moment on [-1,1]; cubic
// Hermite interpolation with the exact derivatives keeps the evaluation error
// far below 1e-12.
class BumpKernel {
  public:
    static const BumpKernel& instance() {
        static BumpKernel k;
        return k;
    }

    // unnormalized shape
    static double shape(double t) {
        double u = 1.0 - t * t;
        return u > 0 ? std::exp(-1.0 / u) : 0.0;
    }

    double density(double t) const { return norm_ * shape(t); }

    // cdf: integral of density from -1 to z
    double cdf(double z) const {
        if (z <= -1) return 0.0;
        if (z >= 1) return 1.0;
        return hermite(cdf_, z, [this](double t) { return density(t); });
    }

    // second antiderivative: integral of cdf from -1 to z; equals z for z >= 1
    double cdf_integral(double z) const {
        if (z <= -1) return 0.0;
        if (z >= 1) return z;
        // Cauchy repeated integration: Psi(z) = z*cdf(z) - M1(z)
        double m1 = hermite(m1_, z, [this](double t) { return t * density(t); });
        return z * cdf(z) - m1;
    }

  private:
    static constexpr int kN = 1 << 14;

    BumpKernel() {
        // 8-point Gauss-Legendre nodes/weights on [-1,1]
        static const double gx[8] = {-0.9602898564975362, -0.7966664774136267,
                                     -0.5255324099163290, -0.1834346424956498,
                                     0.1834346424956498,  0.5255324099163290,
                                     0.7966664774136267,  0.9602898564975362};
        static const double gw[8] = {0.1012285362903763, 0.2223810344533745,
                                     0.3137066458778873, 0.3626837833783620,
                                     0.3626837833783620, 0.3137066458778873,
                                     0.2223810344533745, 0.1012285362903763};
        auto panel = [&](double a, double b, auto&& f) {
            double m = 0.5 * (a + b), r = 0.5 * (b - a), s = 0;
            for (int i = 0; i < 8; ++i) s += gw[i] * f(m + r * gx[i]);
            return s * r;
        };
        double h = 2.0 / kN;
        // total mass of the unnormalized shape
        double total = 0;
        for (int i = 0; i < kN; ++i) total += panel(-1 + i * h, -1 + (i + 1) * h, shape);
        norm_ = 1.0 / total;

        cdf_.resize(kN + 1);
        m1_.resize(kN + 1);
        cdf_[0] = 0;
        m1_[0] = 0;
        for (int i = 0; i < kN; ++i) {
            double a = -1 + i * h, b = -1 + (i + 1) * h;
            cdf_[i + 1] = cdf_[i] + panel(a, b, [this](double t) { return density(t); });
            m1_[i + 1] = m1_[i] + panel(a, b, [this](double t) { return t * density(t); });
        }
    }

    template <typename Deriv>
    double hermite(const std::vector<double>& tab, double z, Deriv&& d) const {
        double h = 2.0 / kN;
        double s = (z + 1.0) / h;
        int i = static_cast<int>(s);
        if (i < 0) i = 0;
        if (i >= kN) i = kN - 1;
        double t = s - i;
        double x0 = -1 + i * h, x1 = x0 + h;
        double f0 = tab[i], f1 = tab[i + 1], d0 = d(x0) * h, d1 = d(x1) * h;
        double t2 = t * t, t3 = t2 * t;
        return f0 * (2 * t3 - 3 * t2 + 1) + d0 * (t3 - 2 * t2 + t) + f1 * (-2 * t3 + 3 * t2) +
               d1 * (t3 - t2);
    }

    double norm_ = 0;
    std::vector<double> cdf_, m1_;
};

// Scaled kernel rho_eps(t) = rho(t/eps)/eps with its antiderivatives.
struct ScaledKernel {
    double eps;
    explicit ScaledKernel(double e) : eps(e) {
        if (!(e > 0)) throw std::invalid_argument("kernel scale must be positive");
    }
    double density(double t) const { return BumpKernel::instance().density(t / eps) / eps; }
    double cdf(double t) const { return BumpKernel::instance().cdf(t / eps); }
    // integral of cdf from -infinity to t
    double cdf_integral(double t) const { return eps * BumpKernel::instance().cdf_integral(t / eps); }
};

}  // namespace fpk
