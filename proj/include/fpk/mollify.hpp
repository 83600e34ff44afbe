#pragma once

#include "fpk/grid_field.hpp"
#include "fpk/kernel.hpp"
#include "fpk/step_function.hpp"
#include "fpk/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fpk {

// Per-coordinate convolution weights against a cell partition. Cells fully to
// the left of the kernel window enter through prefix sums; only cells meeting
// the open window (t-eps, t+eps) carry transitional weights.
struct AxisWeights {
    int full = 0;    // cells [0, full) lie entirely left of the window
    int tbegin = 0;  // first transitional cell
    int count = 0;   // number of transitional cells
    static constexpr int kMax = 40;
    std::array<double, kMax> w_phi{};  // cdf difference        -> convolution value
    std::array<double, kMax> w_psi{};  // cdf-integral diff     -> antiderivative
    std::array<double, kMax> w_rho{};  // density difference    -> derivative
};

// Mollification q = p * (rho_eps x rho_eps) of a rational step function,
// evaluated in closed form through the kernel cdf. The same weight machinery
// yields q^x, q^y, g = (q^x)^y and the second derivatives of g exactly at any
// point, so no finite differencing enters the norm computations.
class MollifiedField {
  public:
    MollifiedField(const StepFunction2D& p, double eps) : eps_(eps), kern_(eps) {
        if (!(eps > 0)) throw ParameterError("eps must be positive");
        for (const auto& t : p.xgrid().points()) xs_.push_back(to_double(t));
        for (const auto& t : p.ygrid().points()) ys_.push_back(to_double(t));
        ncx_ = static_cast<int>(xs_.size()) - 1;
        ncy_ = static_cast<int>(ys_.size()) - 1;
        v_.resize(static_cast<std::size_t>(ncx_) * ncy_);
        for (int j = 0; j < ncy_; ++j)
            for (int i = 0; i < ncx_; ++i)
                v_[static_cast<std::size_t>(j) * ncx_ + i] =
                    to_double(p.cell(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));

        colpref_.assign(static_cast<std::size_t>(ncx_ + 1) * ncy_, 0.0);
        for (int j = 0; j < ncy_; ++j)
            for (int i = 0; i < ncx_; ++i)
                colpref(i + 1, j) = colpref(i, j) + width(i) * cell(i, j);
        rowpref_.assign(static_cast<std::size_t>(ncx_) * (ncy_ + 1), 0.0);
        for (int i = 0; i < ncx_; ++i)
            for (int j = 0; j < ncy_; ++j)
                rowpref(i, j + 1) = rowpref(i, j) + height(j) * cell(i, j);
        pref2_.assign(static_cast<std::size_t>(ncx_ + 1) * (ncy_ + 1), 0.0);
        for (int i = 0; i < ncx_; ++i)
            for (int j = 0; j < ncy_; ++j)
                pref2(i + 1, j + 1) =
                    pref2(i, j + 1) + pref2(i + 1, j) - pref2(i, j) + width(i) * height(j) * cell(i, j);
    }

    double eps() const { return eps_; }
    double support_xlo() const { return xs_.front() - eps_; }
    double support_xhi() const { return xs_.back() + eps_; }
    double support_ylo() const { return ys_.front() - eps_; }
    double support_yhi() const { return ys_.back() + eps_; }

    AxisWeights x_weights(double t) const { return weights(xs_, t); }
    AxisWeights y_weights(double t) const { return weights(ys_, t); }

    // q(x, y)
    double q(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = 0;
        for (int b = 0; b < wy.count; ++b) {
            int j = wy.tbegin + b;
            double row = 0;
            for (int a = 0; a < wx.count; ++a) row += wx.w_phi[a] * cell(wx.tbegin + a, j);
            s += wy.w_phi[b] * row;
        }
        return s;
    }

    // q^x(x, y): x-antiderivative from the far left
    double qx(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = 0;
        for (int b = 0; b < wy.count; ++b) {
            int j = wy.tbegin + b;
            double t = colpref(wx.full, j);
            for (int a = 0; a < wx.count; ++a) t += wx.w_psi[a] * cell(wx.tbegin + a, j);
            s += wy.w_phi[b] * t;
        }
        return s;
    }

    double qy(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = 0;
        for (int a = 0; a < wx.count; ++a) {
            int i = wx.tbegin + a;
            double t = rowpref(i, wy.full);
            for (int b = 0; b < wy.count; ++b) t += wy.w_psi[b] * cell(i, wy.tbegin + b);
            s += wx.w_phi[a] * t;
        }
        return s;
    }

    // g = (q^x)^y
    double g(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = pref2(wx.full, wy.full);
        for (int a = 0; a < wx.count; ++a)
            s += wx.w_psi[a] * rowpref(wx.tbegin + a, wy.full);
        for (int b = 0; b < wy.count; ++b)
            s += wy.w_psi[b] * colpref(wx.full, wy.tbegin + b);
        for (int a = 0; a < wx.count; ++a)
            for (int b = 0; b < wy.count; ++b)
                s += wx.w_psi[a] * wy.w_psi[b] * cell(wx.tbegin + a, wy.tbegin + b);
        return s;
    }

    // dxx g = d/dx q^y
    double dxx_g(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = 0;
        for (int a = 0; a < wx.count; ++a) {
            int i = wx.tbegin + a;
            double t = rowpref(i, wy.full);
            for (int b = 0; b < wy.count; ++b) t += wy.w_psi[b] * cell(i, wy.tbegin + b);
            s += wx.w_rho[a] * t;
        }
        return s;
    }

    // dyy g = d/dy q^x
    double dyy_g(const AxisWeights& wx, const AxisWeights& wy) const {
        double s = 0;
        for (int b = 0; b < wy.count; ++b) {
            int j = wy.tbegin + b;
            double t = colpref(wx.full, j);
            for (int a = 0; a < wx.count; ++a) t += wx.w_psi[a] * cell(wx.tbegin + a, j);
            s += wy.w_rho[b] * t;
        }
        return s;
    }

    double lap_g(const AxisWeights& wx, const AxisWeights& wy) const {
        return dxx_g(wx, wy) + dyy_g(wx, wy);
    }

    // point interface
    double q(double x, double y) const { return q(x_weights(x), y_weights(y)); }
    double qx(double x, double y) const { return qx(x_weights(x), y_weights(y)); }
    double qy(double x, double y) const { return qy(x_weights(x), y_weights(y)); }
    double g(double x, double y) const { return g(x_weights(x), y_weights(y)); }
    double dxx_g(double x, double y) const { return dxx_g(x_weights(x), y_weights(y)); }
    double dyy_g(double x, double y) const { return dyy_g(x_weights(x), y_weights(y)); }
    double lap_g(double x, double y) const { return lap_g(x_weights(x), y_weights(y)); }

  private:
    double& colpref(int k, int j) { return colpref_[static_cast<std::size_t>(j) * (ncx_ + 1) + k]; }
    double colpref(int k, int j) const {
        return colpref_[static_cast<std::size_t>(j) * (ncx_ + 1) + k];
    }
    double& rowpref(int i, int l) { return rowpref_[static_cast<std::size_t>(i) * (ncy_ + 1) + l]; }
    double rowpref(int i, int l) const {
        return rowpref_[static_cast<std::size_t>(i) * (ncy_ + 1) + l];
    }
    double& pref2(int k, int l) { return pref2_[static_cast<std::size_t>(l) * (ncx_ + 1) + k]; }
    double pref2(int k, int l) const { return pref2_[static_cast<std::size_t>(l) * (ncx_ + 1) + k]; }
    double cell(int i, int j) const { return v_[static_cast<std::size_t>(j) * ncx_ + i]; }
    double width(int i) const { return xs_[i + 1] - xs_[i]; }
    double height(int j) const { return ys_[j + 1] - ys_[j]; }

    AxisWeights weights(const std::vector<double>& e, double t) const {
        AxisWeights w;
        int ncells = static_cast<int>(e.size()) - 1;
        // cells [0, full) satisfy e[i+1] <= t - eps
        auto ub = std::upper_bound(e.begin(), e.end(), t - eps_);
        w.full = std::max(0, static_cast<int>(ub - e.begin()) - 1);
        // transitional cells: e[i] < t + eps and e[i+1] > t - eps
        int i = w.full;
        w.tbegin = i;
        int c = 0;
        while (i < ncells && e[i] < t + eps_) {
            if (c >= AxisWeights::kMax) throw ResolutionError("kernel spans too many cells");
            w.w_phi[c] = kern_.cdf(t - e[i]) - kern_.cdf(t - e[i + 1]);
            w.w_psi[c] = kern_.cdf_integral(t - e[i]) - kern_.cdf_integral(t - e[i + 1]);
            w.w_rho[c] = kern_.density(t - e[i]) - kern_.density(t - e[i + 1]);
            ++c;
            ++i;
        }
        w.count = c;
        return w;
    }

    double eps_;
    ScaledKernel kern_;
    std::vector<double> xs_, ys_, v_;
    std::vector<double> colpref_, rowpref_, pref2_;
    int ncx_ = 0, ncy_ = 0;
};

// The five quantities of the (ek5.2) bookkeeping for q, plus total mass.
struct NormReport {
    double mixed_l1 = 0;  // ||dx dy g||_1 = ||q||_1
    double xx_l1 = 0;     // ||dxx g||_1 = integral of Var_x q^y
    double yy_l1 = 0;     // ||dyy g||_1 = integral of Var_y q^x
    double x_sup = 0;     // ||dx g||_inf = sup |q^y|
    double y_sup = 0;     // ||dy g||_inf = sup |q^x|
    double ratio = std::numeric_limits<double>::quiet_NaN();
    double mass = 0;      // integral of q
    double eps = 0, h = 0;

    void finalize() {
        double denom = xx_l1 + yy_l1 + x_sup + y_sup;
        ratio = denom > 0 ? mixed_l1 / denom : std::numeric_limits<double>::quiet_NaN();
    }
};

inline json to_json(const NormReport& r) {
    json j{{"mixed_l1", r.mixed_l1}, {"xx_l1", r.xx_l1}, {"yy_l1", r.yy_l1},
           {"x_sup", r.x_sup},       {"y_sup", r.y_sup}, {"mass", r.mass},
           {"eps", r.eps},           {"h", r.h}};
    if (std::isnan(r.ratio))
        j["ratio"] = "undefined";
    else
        j["ratio"] = r.ratio;
    return j;
}

// Streaming evaluation of the norm report on a grid of spacing h covering the
// support with a 2 eps margin. Rows are processed in deterministic blocks;
// nothing larger than a few rows is materialized.
inline NormReport compute_norm_report(const MollifiedField& f, double h) {
    double x0 = f.support_xlo() - f.eps(), x1 = f.support_xhi() + f.eps();
    double y0 = f.support_ylo() - f.eps(), y1 = f.support_yhi() + f.eps();
    auto node_count = [&](double a, double b) {
        int n = static_cast<int>(std::ceil((b - a) / h)) + 1;
        if (n % 2 == 0) ++n;
        return n;
    };
    int nx = node_count(x0, x1), ny = node_count(y0, y1);
    if (static_cast<long long>(nx) * ny > 6'000'000'000ll)
        throw CapabilityError("norm grid too large; raise h");

    std::vector<AxisWeights> wxs(nx);
    for (int i = 0; i < nx; ++i) wxs[i] = f.x_weights(x0 + i * h);

    unsigned nthreads = worker_count();
    std::size_t nblocks = std::max<std::size_t>(1, nthreads * 4);
    struct Partial {
        double l1 = 0, mass = 0, xx = 0, supqx = 0, supqy = 0;
        std::vector<double> tvy;  // per-column Var_y contribution
    };
    std::vector<Partial> parts(nblocks);

    parallel_blocks(static_cast<std::size_t>(ny), nblocks, [&](std::size_t b, std::size_t lo,
                                                               std::size_t hi) {
        Partial& P = parts[b];
        P.tvy.assign(nx, 0.0);
        std::vector<double> qxrow(nx), qxprev(nx);
        bool have_prev = false;
        if (lo > 0) {  // seed the Var_y chain with the row below the block
            AxisWeights wy = f.y_weights(y0 + (lo - 1) * h);
            for (int i = 0; i < nx; ++i) qxprev[i] = f.qx(wxs[i], wy);
            have_prev = true;
        }
        for (std::size_t j = lo; j < hi; ++j) {
            AxisWeights wy = f.y_weights(y0 + j * h);
            double wyS = simpson_weight(j, ny, h);
            double rowL1 = 0, rowMass = 0, rowTV = 0;
            double prev_qy = 0;
            for (int i = 0; i < nx; ++i) {
                double qv = f.q(wxs[i], wy);
                double qyv = f.qy(wxs[i], wy);
                qxrow[i] = f.qx(wxs[i], wy);
                double wxS = simpson_weight(i, nx, h);
                rowL1 += wxS * std::fabs(qv);
                rowMass += wxS * qv;
                if (i > 0) rowTV += std::fabs(qyv - prev_qy);
                prev_qy = qyv;
                P.supqy = std::max(P.supqy, std::fabs(qyv));
                P.supqx = std::max(P.supqx, std::fabs(qxrow[i]));
            }
            P.l1 += wyS * rowL1;
            P.mass += wyS * rowMass;
            P.xx += wyS * rowTV;
            if (have_prev)
                for (int i = 0; i < nx; ++i) P.tvy[i] += std::fabs(qxrow[i] - qxprev[i]);
            std::swap(qxrow, qxprev);
            have_prev = true;
        }
    });

    NormReport r;
    r.eps = f.eps();
    r.h = h;
    std::vector<double> tvy(nx, 0.0);
    for (const auto& P : parts) {
        r.mixed_l1 += P.l1;
        r.mass += P.mass;
        r.xx_l1 += P.xx;
        r.x_sup = std::max(r.x_sup, P.supqy);
        r.y_sup = std::max(r.y_sup, P.supqx);
        if (!P.tvy.empty())
            for (int i = 0; i < nx; ++i) tvy[i] += P.tvy[i];
    }
    for (int i = 0; i < nx; ++i) r.yy_l1 += simpson_weight(i, nx, h) * tvy[i];
    r.finalize();
    return r;
}

// Samples q on a grid covering the support plus a 2 eps margin.
inline GridField smooth_xy(const StepFunction2D& p, double eps, double h) {
    if (!(h <= eps / 8 + 1e-15)) throw ResolutionError("grid too coarse: need h <= eps/8");
    MollifiedField f(p, eps);
    double x0 = f.support_xlo() - eps, y0 = f.support_ylo() - eps;
    auto node_count = [&](double a, double b) {
        int n = static_cast<int>(std::ceil((b - a) / h)) + 1;
        if (n % 2 == 0) ++n;
        return n;
    };
    int nx = node_count(x0, f.support_xhi() + eps), ny = node_count(y0, f.support_yhi() + eps);
    if (static_cast<long long>(nx) * ny > 400'000'000ll)
        throw CapabilityError("grid too large to materialize; raise h");
    GridField out(x0, y0, h, nx, ny);
    std::vector<AxisWeights> wxs(nx);
    for (int i = 0; i < nx; ++i) wxs[i] = f.x_weights(out.x(i));
    parallel_blocks(static_cast<std::size_t>(ny), worker_count() * 4,
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
                        for (std::size_t j = lo; j < hi; ++j) {
                            AxisWeights wy = f.y_weights(out.y(static_cast<int>(j)));
                            for (int i = 0; i < nx; ++i)
                                out.at(i, static_cast<int>(j)) = f.q(wxs[i], wy);
                        }
                    });
    return out;
}

// Cumulative Simpson along one index, third-order corrected at odd nodes.
namespace detail {
inline void cumulative_simpson(const double* f, int n, double h, double* out) {
    out[0] = 0;
    for (int k = 1; k < n; ++k) {
        if (k % 2 == 0)
            out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4 * f[k - 1] + f[k]);
        else if (k + 1 < n)
            out[k] = out[k - 1] + h / 12.0 * (5 * f[k - 1] + 8 * f[k] - f[k + 1]);
        else
            out[k] = out[k - 1] + h / 2.0 * (f[k - 1] + f[k]);
    }
}
}  // namespace detail

// Max |q^y| on the top edge and max |q^x| on the right edge, from cumulative
// quadrature of the sampled grid.
inline std::pair<double, double> check_vanishing_antiderivatives(const GridField& q) {
    std::vector<double> col(q.ny), cum(std::max(q.nx, q.ny));
    double top = 0;
    for (int i = 0; i < q.nx; ++i) {
        for (int j = 0; j < q.ny; ++j) col[j] = q.at(i, j);
        detail::cumulative_simpson(col.data(), q.ny, q.h, cum.data());
        top = std::max(top, std::fabs(cum[q.ny - 1]));
    }
    std::vector<double> row(q.nx);
    double right = 0;
    for (int j = 0; j < q.ny; ++j) {
        for (int i = 0; i < q.nx; ++i) row[i] = q.at(i, j);
        detail::cumulative_simpson(row.data(), q.nx, q.h, cum.data());
        right = std::max(right, std::fabs(cum[q.nx - 1]));
    }
    return {top, right};
}

// g = (q^x)^y by cumulative quadrature of a sampled grid.
inline GridField assemble_g(const GridField& q) {
    auto [top, right] = check_vanishing_antiderivatives(q);
    double scale = std::max(1.0, q.l1());
    if (top > 1e-6 * scale || right > 1e-6 * scale)
        throw AssemblyError("assemble_g: antiderivatives do not vanish at the far edges");
    GridField gx = q;
    std::vector<double> row(q.nx), cum(std::max(q.nx, q.ny));
    for (int j = 0; j < q.ny; ++j) {
        for (int i = 0; i < q.nx; ++i) row[i] = q.at(i, j);
        detail::cumulative_simpson(row.data(), q.nx, q.h, cum.data());
        for (int i = 0; i < q.nx; ++i) gx.at(i, j) = cum[i];
    }
    GridField g = gx;
    std::vector<double> col(q.ny);
    for (int i = 0; i < q.nx; ++i) {
        for (int j = 0; j < q.ny; ++j) col[j] = gx.at(i, j);
        detail::cumulative_simpson(col.data(), q.ny, q.h, cum.data());
        for (int j = 0; j < q.ny; ++j) g.at(i, j) = cum[j];
    }
    return g;
}

// Exact step-function counterparts used as mollification targets.
struct StepNormTargets {
    double l1 = 0;
    double int_var_x = 0;  // bounds xx_l1
    double int_var_y = 0;  // bounds yy_l1
    double sup_fx = 0;     // bounds y_sup = sup |q^x|
    double sup_fy = 0;     // bounds x_sup = sup |q^y|
};

inline StepNormTargets step_norm_targets(const StepFunction2D& p) {
    StepNormTargets t;
    t.l1 = to_double(l1_norm(p));
    t.int_var_x = to_double(integral_var_x_of_y_antideriv(p));
    t.int_var_y = to_double(integral_var_y_of_x_antideriv(p));
    auto s = sup_norm_antiderivatives(p);
    t.sup_fx = to_double(s.first);
    t.sup_fy = to_double(s.second);
    return t;
}

struct EpsilonSelection {
    double eps = 0;
    int halvings = 0;
    NormReport report;
};

// Halving search from (shortest cell)/4 until the grid analogue of (ek5.2)
// survives mollification: the four right-hand quantities contract relative to
// the exact step function values and at most 5% of the L1 mass is lost.
inline EpsilonSelection select_epsilon(const StepFunction2D& p, const Rational& /*delta*/,
                                       const StepNormTargets& target) {
    double shortest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.ncx(); ++i)
        shortest = std::min(shortest, to_double(p.xgrid().width(i)));
    for (std::size_t j = 0; j < p.ncy(); ++j)
        shortest = std::min(shortest, to_double(p.ygrid().width(j)));
    const double tol = 1e-8;
    for (int t = 0; t <= 30; ++t) {
        double eps = shortest / 4.0 / (1 << t);
        MollifiedField f(p, eps);
        NormReport r = compute_norm_report(f, eps / 8.0);
        bool contracts = r.xx_l1 <= target.int_var_x + tol && r.yy_l1 <= target.int_var_y + tol &&
                         r.x_sup <= target.sup_fy + tol && r.y_sup <= target.sup_fx + tol;
        bool mass_kept = r.mixed_l1 >= 0.95 * target.l1;
        bool mass_zero = std::fabs(r.mass) <= tol * std::max(1.0, target.l1);
        if (contracts && mass_kept && mass_zero) return {eps, t, r};
    }
    throw ResolutionError("select_epsilon: no eps within 30 halvings");
}

}  // namespace fpk
