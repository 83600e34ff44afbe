#pragma once

#include "fpk/grid_field.hpp"
#include "fpk/rational.hpp"
#include "fpk/util.hpp"

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

namespace fpk {

using json = nlohmann::json;

namespace detail {

inline std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// smallest 5-smooth size >= n (fftw-friendly)
inline int next_fast_size(int n) {
    for (int m = n;; ++m) {
        int k = m;
        for (int p : {2, 3, 5})
            while (k % p == 0) k /= p;
        if (k == 1) return m;
    }
}

}  // namespace detail

// Periodic zero-padded extension of a grid field with its real-to-complex
// transform. The padding fraction applies per side; the inverse transform
// must reproduce the input to roundoff.
class SpectralField {
  public:
    SpectralField(const GridField& g, double pad_fraction = 0.25) : h_(g.h) {
        if (pad_fraction < 0) throw ParameterError("negative padding");
        nx_ = detail::next_fast_size(
            static_cast<int>(std::ceil(g.nx * (1.0 + 2.0 * pad_fraction))));
        ny_ = detail::next_fast_size(
            static_cast<int>(std::ceil(g.ny * (1.0 + 2.0 * pad_fraction))));
        if (pad_fraction == 0) {
            // pure torus: drop the repeated right/top edge if the input holds it
            nx_ = g.nx;
            ny_ = g.ny;
        }
        real_.assign(static_cast<std::size_t>(nx_) * ny_, 0.0);
        int offx = (nx_ - g.nx) / 2, offy = (ny_ - g.ny) / 2;
        for (int j = 0; j < g.ny && j + offy < ny_; ++j)
            for (int i = 0; i < g.nx && i + offx < nx_; ++i)
                real_[static_cast<std::size_t>(j + offy) * nx_ + (i + offx)] = g.at(i, j);
        stash_input_ = real_;
        spec_.assign(static_cast<std::size_t>(ny_) * (nx_ / 2 + 1), {0.0, 0.0});
        std::lock_guard<std::mutex> lk(detail::fftw_mutex());
        plan_fwd_ = fftw_plan_dft_r2c_2d(ny_, nx_, real_.data(),
                                         reinterpret_cast<fftw_complex*>(spec_.data()),
                                         FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
        plan_bwd_ = fftw_plan_dft_c2r_2d(ny_, nx_, reinterpret_cast<fftw_complex*>(spec_.data()),
                                         real_.data(), FFTW_ESTIMATE);
    }
    SpectralField(const SpectralField&) = delete;
    SpectralField& operator=(const SpectralField&) = delete;
    ~SpectralField() {
        std::lock_guard<std::mutex> lk(detail::fftw_mutex());
        fftw_destroy_plan(plan_fwd_);
        fftw_destroy_plan(plan_bwd_);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double h() const { return h_; }

    // applies (1 + |xi|^2)^(alpha/2) in frequency and returns the node values
    std::vector<double> apply_multiplier(double alpha) {
        real_ = stash_input_;
        fftw_execute(plan_fwd_);
        double lx = nx_ * h_, ly = ny_ * h_;
        int nxs = nx_ / 2 + 1;
        for (int j = 0; j < ny_; ++j) {
            int kj = j <= ny_ / 2 ? j : j - ny_;
            double xy = 2.0 * M_PI * kj / ly;
            for (int i = 0; i < nxs; ++i) {
                double xx = 2.0 * M_PI * i / lx;
                double mult = std::pow(1.0 + xx * xx + xy * xy, alpha / 2.0);
                spec_[static_cast<std::size_t>(j) * nxs + i] *= mult;
            }
        }
        fftw_execute(plan_bwd_);
        std::vector<double> out = real_;
        double scale = 1.0 / (static_cast<double>(nx_) * ny_);
        for (double& t : out) t *= scale;
        return out;
    }

    // roundtrip residual of the plain transform
    double roundtrip_error() {
        auto out = apply_multiplier(0.0);
        double worst = 0;
        for (std::size_t k = 0; k < out.size(); ++k)
            worst = std::max(worst, std::fabs(out[k] - stash_input_[k]));
        return worst;
    }

    double lr_norm(const std::vector<double>& v, double r) const {
        double s = 0;
        for (double t : v) s += std::pow(std::fabs(t), r);
        return std::pow(s * h_ * h_, 1.0 / r);
    }

  private:
    int nx_ = 0, ny_ = 0;
    double h_ = 1;
    std::vector<double> real_, stash_input_;
    std::vector<std::complex<double>> spec_;
    fftw_plan plan_fwd_{}, plan_bwd_{};
};

// ||(I - Lap)^(alpha/2) rho||_{L^r} on the padded torus; alpha = 0 bypasses
// the transform so it coincides exactly with the plain discrete L^r norm.
inline double frac_norm(const GridField& rho, double r, double alpha, double pad = 0.25) {
    if (!(r > 1)) throw ParameterError("r must exceed 1");
    if (alpha < 0 || alpha > 2) throw DomainError("alpha out of [0, 2]");
    if (alpha == 0.0) {
        double s = 0;
        for (double t : rho.v) s += std::pow(std::fabs(t), r);
        return std::pow(s * rho.h * rho.h, 1.0 / r);
    }
    SpectralField sf(rho, pad);
    auto v = sf.apply_multiplier(alpha);
    return sf.lr_norm(v, r);
}

inline double ls_norm(const GridField& rho, double s) {
    if (!(s >= 1)) throw ParameterError("s must be >= 1");
    double acc = 0;
    for (double t : rho.v) acc += std::pow(std::fabs(t), s);
    return std::pow(acc * rho.h * rho.h, 1.0 / s);
}

struct SweepCurve {
    double r = 0;
    double alpha_star = 0;  // 1 - d(r-1)/r with d = 2
    std::vector<double> alphas, norms;
    json to_json_obj() const {
        return json{{"r", r}, {"alpha_star", alpha_star}, {"alphas", alphas}, {"norms", norms}};
    }
};

inline SweepCurve threshold_sweep(const GridField& rho, double r,
                                  const std::vector<double>& alphas, double pad = 0.25) {
    SweepCurve c;
    c.r = r;
    c.alpha_star = 1.0 - 2.0 * (r - 1.0) / r;
    SpectralField sf(rho, pad);
    for (double a : alphas) {
        c.alphas.push_back(a);
        if (a == 0.0) {
            c.norms.push_back(frac_norm(rho, r, 0.0, pad));
        } else {
            auto v = sf.apply_multiplier(a);
            c.norms.push_back(sf.lr_norm(v, r));
        }
    }
    return c;
}

// sup over unit-ball centers of integral_{U(a)} |b| rho, plus the L^p / L^1
// comparison of the claim that a uniform ball bound controls ||rho||_{L^p}.
struct BallBoundReport {
    double M = 0;
    double lp_norm = 0;
    double l1_norm = 0;
    double ratio = 0;
};

inline BallBoundReport ball_uniform_bound(const GridField& rho, const GridField& babs, double p) {
    if (!(p >= 1)) throw ParameterError("p must be >= 1");
    BallBoundReport rep;
    rep.lp_norm = ls_norm(rho, p);
    rep.l1_norm = ls_norm(rho, 1.0);
    double lox = rho.x0, hix = rho.x0 + rho.extent_x();
    double loy = rho.y0, hiy = rho.y0 + rho.extent_y();
    double step = 0.25;
    for (double cy = loy; cy <= hiy + 1e-12; cy += step)
        for (double cx = lox; cx <= hix + 1e-12; cx += step) {
            // masked Riemann sum over the unit disc
            int i0 = std::max(0, static_cast<int>(std::floor((cx - 1 - rho.x0) / rho.h)));
            int i1 = std::min(rho.nx - 1, static_cast<int>(std::ceil((cx + 1 - rho.x0) / rho.h)));
            int j0 = std::max(0, static_cast<int>(std::floor((cy - 1 - rho.y0) / rho.h)));
            int j1 = std::min(rho.ny - 1, static_cast<int>(std::ceil((cy + 1 - rho.y0) / rho.h)));
            double s = 0;
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    double dx = rho.x(i) - cx, dy = rho.y(j) - cy;
                    if (dx * dx + dy * dy <= 1.0)
                        s += std::fabs(babs.at(i, j)) * std::fabs(rho.at(i, j));
                }
            rep.M = std::max(rep.M, s * rho.h * rho.h);
        }
    rep.ratio = rep.l1_norm > 0 ? rep.lp_norm / rep.l1_norm : 0.0;
    return rep;
}

}  // namespace fpk
