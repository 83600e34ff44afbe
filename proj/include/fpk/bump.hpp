#pragma once

#include <array>
#include <cmath>

namespace fpk {

// Quintic smoothstep on [0,1]; C^2 with S'(0)=S'(1)=0, max slope 15/8.
inline double smoothstep5(double z) {
    if (z <= 0) return 0;
    if (z >= 1) return 1;
    return z * z * z * (10 + z * (-15 + 6 * z));
}
inline double smoothstep5_d(double z) {
    if (z <= 0 || z >= 1) return 0;
    return 30 * z * z * (1 - z) * (1 - z);
}

// Plateau bump built on the l^16 superellipse: value amp on the plateau
// containing [-s,s]^2, zero outside the support superellipse inside
// [-2s,2s]^2, quintic ramp in between. The l^16 radius has Euclidean
// gradient norm <= 1, so max |grad| = amp * (15/8) / ((2 - 2^(1/16)) s)
// < 2 amp / s, the bound the construction needs.
class PlateauBump {
  public:
    PlateauBump(double cx, double cy, double s, double amp)
        : cx_(cx), cy_(cy), s_(s), amp_(amp) {}

    static constexpr double plateau_radius() { return 1.0442737824274138; }  // 2^(1/16)
    static constexpr double support_radius() { return 2.0; }

    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double scale() const { return s_; }
    double amp() const { return amp_; }
    // max |grad u| / amp, a fixed profile constant (about 1.9614 / s)
    double grad_bound() const {
        return (15.0 / 8.0) / ((support_radius() - plateau_radius()) * s_);
    }

    double value(double x, double y) const {
        double r = radius16((x - cx_) / s_, (y - cy_) / s_);
        if (r >= support_radius()) return 0;
        if (r <= plateau_radius()) return amp_;
        return amp_ * smoothstep5((support_radius() - r) / (support_radius() - plateau_radius()));
    }

    std::array<double, 2> gradient(double x, double y) const {
        double u = (x - cx_) / s_, v = (y - cy_) / s_;
        double r = radius16(u, v);
        if (r >= support_radius() || r <= plateau_radius()) return {0, 0};
        double w = support_radius() - plateau_radius();
        double ds = -amp_ * smoothstep5_d((support_radius() - r) / w) / (w * s_);
        // d r16 / du = (u/r)^15 etc.
        double pu = std::pow(u / r, 15), pv = std::pow(v / r, 15);
        return {ds * pu, ds * pv};
    }

    bool plateau_contains_box(double half) const {
        // the inscribed square of the plateau superellipse has half-width
        // plateau_radius * 2^(-1/16) * s
        return half <= plateau_radius() * std::pow(2.0, -1.0 / 16.0) * s_;
    }

    double support_half() const { return support_radius() * s_; }

  private:
    static double radius16(double u, double v) {
        double a = std::fabs(u), b = std::fabs(v);
        double m = std::max(a, b);
        if (m == 0) return 0;
        double p = a / m, q = b / m;
        double p8 = p * p * p * p, q8 = q * q * q * q;
        p8 *= p8;
        q8 *= q8;
        return m * std::pow(p8 * p8 + q8 * q8, 1.0 / 16.0);
    }

    double cx_, cy_, s_, amp_;
};

}  // namespace fpk
