#pragma once

#include "fpk/bump.hpp"
#include "fpk/grid_field.hpp"
#include "fpk/mollify.hpp"
#include "fpk/ornstein.hpp"
#include "fpk/weakform.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace fpk {

// ----------------------------------------------------------------------
// tile plans

struct TileSpec {
    int n = 1;          // 1-based tile index
    double cx = 0, cy = 0;
    double b_half = 0;  // half-edge of the square B_n
    double d_half = 0;  // half-edge of the square D_n (overlapping mode)
    double weight = 1;  // n^-1 coefficient (disjoint mode)
};

struct TilePlan {
    enum class Mode { disjoint, overlapping };
    Mode mode = Mode::disjoint;
    std::vector<TileSpec> tiles;
    double window_lo = 0, window_hi = 0;
};

// Fixed center order so that N = 1, 2, 4, 9 give nested tile sets.
inline const std::array<std::pair<double, double>, 9>& tile_center_order() {
    static const std::array<std::pair<double, double>, 9> c = {
        std::pair<double, double>{0, 0}, {1, 0}, {0, 1}, {1, 1}, {-1, 0},
        {0, -1},                         {-1, 1}, {1, -1}, {-1, -1}};
    return c;
}

inline TilePlan make_tile_plan(TilePlan::Mode mode, int n_tiles) {
    if (n_tiles < 1 || n_tiles > 9) throw PlanError("tile count must be in [1, 9]");
    TilePlan plan;
    plan.mode = mode;
    double clo = 0, chi = 0;
    for (int n = 1; n <= n_tiles; ++n) {
        auto [ux, uy] = tile_center_order()[n - 1];
        TileSpec t;
        t.n = n;
        t.weight = 1.0 / n;
        if (mode == TilePlan::Mode::overlapping) {
            t.cx = ux;
            t.cy = uy;
            t.b_half = 0.6;   // unit lattice squares grown by 10% per side
            t.d_half = 0.25;  // edge-1/2 square with the same center
        } else {
            t.cx = 1.25 * ux;  // pitch > support edge keeps tiles disjoint
            t.cy = 1.25 * uy;
            t.b_half = 0.5;
        }
        clo = std::min({clo, t.cx, t.cy});
        chi = std::max({chi, t.cx, t.cy});
        plan.tiles.push_back(t);
    }
    if (mode == TilePlan::Mode::overlapping) {
        plan.window_lo = clo - 0.4;
        plan.window_hi = chi + 0.4;
    } else {
        plan.window_lo = clo - 0.7;
        plan.window_hi = chi + 0.7;
    }
    // disjoint mode: exact tile arithmetic on the support squares
    if (mode == TilePlan::Mode::disjoint) {
        for (std::size_t a = 0; a < plan.tiles.size(); ++a)
            for (std::size_t b = a + 1; b < plan.tiles.size(); ++b) {
                double dx = std::fabs(plan.tiles[a].cx - plan.tiles[b].cx);
                double dy = std::fabs(plan.tiles[a].cy - plan.tiles[b].cy);
                if (std::max(dx, dy) < plan.tiles[a].b_half + plan.tiles[b].b_half)
                    throw PlanError("overlapping tiles in disjoint mode");
            }
    }
    return plan;
}

// ----------------------------------------------------------------------
// tiles: an affinely mapped mollified stage field plus a plateau bump

struct Tile {
    TileSpec spec;
    int stage = 1;
    std::shared_ptr<MollifiedField> base;
    PlateauBump bump;
    double fscale = 1;   // window = fscale * base coordinates
    double amp_f = 0;    // amplitude of the stage part
    double amp_b = 0;    // amplitude of the bump part
    double grad_mass_d = 0;  // integral over D_n of |grad f_n| (unnormalized)

    Tile(TileSpec s, int stg, std::shared_ptr<MollifiedField> b, double bump_scale, double fs)
        : spec(s), stage(stg), base(std::move(b)), bump(s.cx, s.cy, bump_scale, 1.0), fscale(fs) {}

    bool touches(double x, double y) const {
        double r = bump.support_half();
        return std::fabs(x - spec.cx) < r && std::fabs(y - spec.cy) < r;
    }

    // density contribution
    double density(double x, double y) const {
        if (!touches(x, y)) return 0;
        double u = (x - spec.cx) / fscale, v = (y - spec.cy) / fscale;
        return amp_f * base->qx(u, v) + amp_b * bump.value(x, y);
    }
    std::array<double, 2> density_grad(double x, double y) const {
        if (!touches(x, y)) return {0, 0};
        double u = (x - spec.cx) / fscale, v = (y - spec.cy) / fscale;
        auto wx = base->x_weights(u);
        auto wy = base->y_weights(v);
        auto bg = bump.gradient(x, y);
        return {amp_f * base->q(wx, wy) / fscale + amp_b * bg[0],
                amp_f * base->dyy_g(wx, wy) / fscale + amp_b * bg[1]};
    }
    // numerator field: Delta(density) = div(numerator)
    std::array<double, 2> numerator(double x, double y) const {
        if (!touches(x, y)) return {0, 0};
        double u = (x - spec.cx) / fscale, v = (y - spec.cy) / fscale;
        auto bg = bump.gradient(x, y);
        return {amp_b * bg[0], amp_f * base->lap_g(u, v) / fscale + amp_b * bg[1]};
    }
};

// ----------------------------------------------------------------------

struct FPKAssembly {
    std::string mode;
    double window_lo = 0, window_hi = 0;    // positivity / test-basis region
    double support_lo = 0, support_hi = 0;  // hull of the density support
    double h = 0;            // build resolution the assembly is tuned for
    double normalization = 1;  // Z: density = raw / Z
    double scale_k = 0;      // gradient-mass unit: tile n carries scale_k/(2n) over D_n
    bool strictly_positive = false;
    std::vector<Tile> tiles;
    json recipe;

    Field rho, drho_x, drho_y, bx, by, vx, vy;
};

namespace detail {

inline double box_simpson(const Field& f, double lox, double hix, double loy, double hiy,
                          double h0) {
    long nx = static_cast<long>(std::ceil((hix - lox) / h0)) + 1;
    long ny = static_cast<long>(std::ceil((hiy - loy) / h0)) + 1;
    if (nx % 2 == 0) ++nx;
    if (ny % 2 == 0) ++ny;
    double hx = (hix - lox) / (nx - 1), hy = (hiy - loy) / (ny - 1);
    std::vector<double> rows(ny, 0.0);
    parallel_blocks(static_cast<std::size_t>(ny), worker_count() * 2,
                    [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                        for (std::size_t j = jlo; j < jhi; ++j) {
                            double row = 0;
                            for (long i = 0; i < nx; ++i)
                                row += simpson_weight(static_cast<std::size_t>(i),
                                                      static_cast<std::size_t>(nx), hx) *
                                       f(lox + i * hx, loy + j * hy);
                            rows[j] = row;
                        }
                    });
    double total = 0;
    for (long j = 0; j < ny; ++j)
        total += simpson_weight(static_cast<std::size_t>(j), static_cast<std::size_t>(ny), hy) *
                 rows[j];
    return total;
}

// Simpson integral over a box, halved until the Richardson-extrapolated tail
// falls below tol, then extrapolated.
inline double converged_box_integral(const Field& f, double lox, double hix, double loy,
                                     double hiy, double h0, double tol = 1e-9, int max_iter = 5) {
    double prev = box_simpson(f, lox, hix, loy, hiy, h0);
    for (int it = 0; it < max_iter; ++it) {
        h0 /= 2;
        double cur = box_simpson(f, lox, hix, loy, hiy, h0);
        double extrap = (16.0 * cur - prev) / 15.0;
        if (std::fabs(cur - prev) / 15.0 <= tol * std::max(1.0, std::fabs(extrap))) return extrap;
        prev = cur;
    }
    return prev;
}

inline std::shared_ptr<MollifiedField> stage_base(const StepFunction2D& p, double eps_tile) {
    return std::make_shared<MollifiedField>(p, eps_tile);
}

// mass of the unit-scale, unit-amplitude plateau bump, cached
inline double unit_bump_mass() {
    static const double m = [] {
        PlateauBump u(0, 0, 1.0, 1.0);
        Field f = [&u](double x, double y) { return u.value(x, y); };
        return converged_box_integral(f, -2, 2, -2, 2, 1.0 / 64, 1e-12, 5);
    }();
    return m;
}

}  // namespace detail

struct AssemblyParams {
    double h = 1.0 / 512;   // build resolution
    double kappa = 6.0;     // effective smoothing = kappa * h in window coordinates
    double floor = 0.0;     // zero set of the density for the ratio drift
    // per-stage mollification widths in stage coordinates; when set they
    // override the kappa * h coupling and the tiles carry the stage-native
    // smoothing (sub-grid structure included)
    std::vector<double> stage_eps;
};

// b = v / rho where rho > floor, 0 elsewhere.
inline std::pair<Field, Field> ratio_drift(const Field& vx, const Field& vy, const Field& rho,
                                           double floor) {
    Field bx = [vx, rho, floor](double x, double y) {
        double p = rho(x, y);
        return p > floor ? vx(x, y) / p : 0.0;
    };
    Field by = [vy, rho, floor](double x, double y) {
        double p = rho(x, y);
        return p > floor ? vy(x, y) / p : 0.0;
    };
    return {bx, by};
}

namespace detail {

inline void attach_fields(FPKAssembly& A, double floor) {
    auto tiles = std::make_shared<std::vector<Tile>>(A.tiles);
    double Z = A.normalization;
    A.rho = [tiles, Z](double x, double y) {
        double s = 0;
        for (const auto& t : *tiles) s += t.density(x, y);
        return s / Z;
    };
    A.drho_x = [tiles, Z](double x, double y) {
        double s = 0;
        for (const auto& t : *tiles) s += t.density_grad(x, y)[0];
        return s / Z;
    };
    A.drho_y = [tiles, Z](double x, double y) {
        double s = 0;
        for (const auto& t : *tiles) s += t.density_grad(x, y)[1];
        return s / Z;
    };
    A.vx = [tiles, Z](double x, double y) {
        double s = 0;
        for (const auto& t : *tiles) s += t.numerator(x, y)[0];
        return s / Z;
    };
    A.vy = [tiles, Z](double x, double y) {
        double s = 0;
        for (const auto& t : *tiles) s += t.numerator(x, y)[1];
        return s / Z;
    };
    auto bb = ratio_drift(A.vx, A.vy, A.rho, floor);
    A.bx = bb.first;
    A.by = bb.second;
}

inline json tile_json(const Tile& t) {
    return json{{"n", t.spec.n},       {"stage", t.stage},   {"cx", t.spec.cx},
                {"cy", t.spec.cy},     {"b_half", t.spec.b_half}, {"d_half", t.spec.d_half},
                {"fscale", t.fscale},  {"bump_scale", t.bump.scale()},
                {"amp_f", t.amp_f},    {"amp_b", t.amp_b},
                {"grad_mass_d", t.grad_mass_d}};
}

}  // namespace detail

// Overlapping squares with per-tile gradient-mass normalization: tile n
// carries integral_{D_n} |grad f_n| = 1/(2n) before the probability
// normalization, which is the desk-scale stand-in for the unboundedly
// growing construction.
inline FPKAssembly assemble_overlapping(const TilePlan& plan,
                                        const std::vector<ConstructionState>& stages,
                                        const AssemblyParams& par) {
    if (plan.mode != TilePlan::Mode::overlapping) throw PlanError("plan mode is not overlapping");
    if (stages.empty()) throw PlanError("no stages provided");
    const double fscale = 0.28;
    double bump_scale = 0.3;

    FPKAssembly A;
    A.mode = "overlapping";
    A.window_lo = plan.window_lo;
    A.window_hi = plan.window_hi;
    A.support_lo = plan.window_lo;
    A.support_hi = plan.window_hi;
    for (const auto& t : plan.tiles) {
        A.support_lo = std::min({A.support_lo, t.cx - 2 * 0.3, t.cy - 2 * 0.3});
        A.support_hi = std::max({A.support_hi, t.cx + 2 * 0.3, t.cy + 2 * 0.3});
    }
    A.h = par.h;

    // one mollified base per stage
    std::vector<std::shared_ptr<MollifiedField>> bases;
    std::vector<double> sup_qx_bound, grad_mass_unit, stage_mass;
    PlateauBump probe(0, 0, bump_scale, 1.0);
    for (std::size_t si = 0; si < stages.size(); ++si) {
        const auto& st = stages[si];
        double eps_stage = par.stage_eps.empty() ? par.kappa * par.h / fscale
                                                 : par.stage_eps.at(si);
        if (!probe.plateau_contains_box(fscale * (1.0 + eps_stage)))
            throw PlanError("tile smoothing too wide for the plateau; lower kappa or refine h");
        auto base = detail::stage_base(st.p, eps_stage);
        bases.push_back(base);
        sup_qx_bound.push_back(to_double(sup_norm_antiderivatives(st.p).first));
        stage_mass.push_back(to_double(-x_moment(st.p)));  // integral of q^x
        // gradient mass of the unit-amplitude mapped field over D
        Field gm = [&base, fscale](double x, double y) {
            auto wx = base->x_weights(x / fscale);
            auto wy = base->y_weights(y / fscale);
            double gx = base->q(wx, wy) / fscale;
            double gy = base->dyy_g(wx, wy) / fscale;
            return std::hypot(gx, gy);
        };
        grad_mass_unit.push_back(detail::box_simpson(gm, -0.25, 0.25, -0.25, 0.25, par.h / 2));
    }

    for (const auto& spec : plan.tiles) {
        int stage_idx = std::min<int>(spec.n, static_cast<int>(stages.size())) - 1;
        Tile t(spec, stage_idx + 1, bases[stage_idx], bump_scale, fscale);
        double target = 1.0 / (2.0 * spec.n);
        t.amp_f = target / grad_mass_unit[stage_idx];
        t.amp_b = t.amp_f * sup_qx_bound[stage_idx] * 1.000001;
        t.grad_mass_d = target;
        A.tiles.push_back(std::move(t));
    }

    // exact normalization: tile mass = amp_f fscale^2 integral(q^x) + bump mass
    double mass = 0;
    for (const auto& t : A.tiles) {
        mass += t.amp_f * fscale * fscale * stage_mass[t.stage - 1] +
                t.amp_b * bump_scale * bump_scale * detail::unit_bump_mass();
    }
    A.normalization = mass;
    A.scale_k = 1.0 / mass;
    detail::attach_fields(A, par.floor);

    // positivity on the window interior
    {
        int n = 257;
        double span = A.window_hi - A.window_lo;
        for (int j = 1; j + 1 <= n; ++j)
            for (int i = 1; i + 1 <= n; ++i) {
                double x = A.window_lo + span * i / n, y = A.window_lo + span * j / n;
                if (!(A.rho(x, y) > 0))
                    throw PlanError("coverage gap: density vanishes at (" + std::to_string(x) +
                                    ", " + std::to_string(y) + ")");
            }
        A.strictly_positive = false;  // positive on the window, zero outside
    }

    A.recipe = json{{"mode", A.mode},
                    {"h", par.h},
                    {"kappa", par.kappa},
                    {"window", {A.window_lo, A.window_hi}},
                    {"normalization", A.normalization},
                    {"scale_k", A.scale_k},
                    {"substitution",
                     "finite-tile assembly; per-tile amplitudes normalized so the D_n gradient "
                     "masses follow the 1/(2n) series, standing in for the non-constructive "
                     "unbounded-gradient density"},
                    {"tiles", json::array()}};
    for (const auto& t : A.tiles) A.recipe["tiles"].push_back(detail::tile_json(t));
    return A;
}

// Disjoint squares, Corollary-style: w = sum n^-1 w_n with ||f_n||_inf = 1/n
// and a 1/n bump, so the tile-n density amplitude decays like n^-2.
inline FPKAssembly assemble_disjoint(const TilePlan& plan,
                                     const std::vector<ConstructionState>& stages,
                                     const AssemblyParams& par) {
    if (plan.mode != TilePlan::Mode::disjoint) throw PlanError("plan mode is not disjoint");
    if (stages.empty()) throw PlanError("no stages provided");
    const double fscale = 0.23;
    double bump_scale = 0.25;

    FPKAssembly A;
    A.mode = "disjoint";
    A.window_lo = plan.window_lo;
    A.window_hi = plan.window_hi;
    A.support_lo = plan.window_lo;
    A.support_hi = plan.window_hi;
    A.h = par.h;

    std::vector<std::shared_ptr<MollifiedField>> bases;
    std::vector<double> sup_qx_bound, stage_mass;
    PlateauBump probe(0, 0, bump_scale, 1.0);
    for (std::size_t si = 0; si < stages.size(); ++si) {
        const auto& st = stages[si];
        double eps_stage = par.stage_eps.empty() ? par.kappa * par.h / fscale
                                                 : par.stage_eps.at(si);
        if (!probe.plateau_contains_box(fscale * (1.0 + eps_stage)))
            throw PlanError("tile smoothing too wide for the plateau; lower kappa or refine h");
        bases.push_back(detail::stage_base(st.p, eps_stage));
        sup_qx_bound.push_back(to_double(sup_norm_antiderivatives(st.p).first));
        stage_mass.push_back(to_double(-x_moment(st.p)));
    }

    for (const auto& spec : plan.tiles) {
        int stage_idx = std::min<int>(spec.n, static_cast<int>(stages.size())) - 1;
        Tile t(spec, stage_idx + 1, bases[stage_idx], bump_scale, fscale);
        // combined n^-1 series weight and 1/n tile amplitudes
        double nn = static_cast<double>(spec.n);
        t.amp_f = 1.0 / (nn * nn * sup_qx_bound[stage_idx]);
        t.amp_b = 1.0 / (nn * nn);
        A.tiles.push_back(std::move(t));
    }

    double mass = 0;
    for (const auto& t : A.tiles) {
        mass += t.amp_f * fscale * fscale * stage_mass[t.stage - 1] +
                t.amp_b * bump_scale * bump_scale * detail::unit_bump_mass();
    }
    A.normalization = mass;
    A.scale_k = 1.0 / mass;
    detail::attach_fields(A, par.floor);

    A.recipe = json{{"mode", A.mode},
                    {"h", par.h},
                    {"kappa", par.kappa},
                    {"window", {A.window_lo, A.window_hi}},
                    {"normalization", A.normalization},
                    {"tiles", json::array()}};
    for (const auto& t : A.tiles) A.recipe["tiles"].push_back(detail::tile_json(t));
    return A;
}

// Gaussian variant: density proportional to w + rho_2 with drift
// b = (v - x rho_2)/(w + rho_2); b(x) = -x off the support of w.
inline FPKAssembly gaussian_variant(const FPKAssembly& disjoint, double window_half = 6.5) {
    FPKAssembly A;
    A.mode = "gaussian";
    A.window_lo = -window_half;
    A.window_hi = window_half;
    A.support_lo = -window_half;
    A.support_hi = window_half;
    A.h = disjoint.h;
    A.tiles = disjoint.tiles;
    A.strictly_positive = true;

    double w_mass = disjoint.normalization;  // unnormalized tile mass
    double g_mass = std::erf(window_half / std::sqrt(2.0));
    g_mass *= g_mass;  // integral of rho_2 over the square window
    double Z = w_mass + g_mass;
    A.normalization = Z;
    A.scale_k = 1.0 / Z;

    auto tiles = std::make_shared<std::vector<Tile>>(A.tiles);
    auto rho2 = [](double x, double y) {
        return std::exp(-0.5 * (x * x + y * y)) / (2.0 * M_PI);
    };
    A.rho = [tiles, rho2, Z](double x, double y) {
        double s = rho2(x, y);
        for (const auto& t : *tiles) s += t.density(x, y);
        return s / Z;
    };
    A.drho_x = [tiles, rho2, Z](double x, double y) {
        double s = -x * rho2(x, y);
        for (const auto& t : *tiles) s += t.density_grad(x, y)[0];
        return s / Z;
    };
    A.drho_y = [tiles, rho2, Z](double x, double y) {
        double s = -y * rho2(x, y);
        for (const auto& t : *tiles) s += t.density_grad(x, y)[1];
        return s / Z;
    };
    A.vx = [tiles, rho2, Z](double x, double y) {
        double s = -x * rho2(x, y);
        for (const auto& t : *tiles) s += t.numerator(x, y)[0];
        return s / Z;
    };
    A.vy = [tiles, rho2, Z](double x, double y) {
        double s = -y * rho2(x, y);
        for (const auto& t : *tiles) s += t.numerator(x, y)[1];
        return s / Z;
    };
    // rho > 0 everywhere here, so the drift is the plain quotient
    auto bb = ratio_drift(A.vx, A.vy, A.rho, 0.0);
    A.bx = bb.first;
    A.by = bb.second;

    A.recipe = disjoint.recipe;
    A.recipe["mode"] = "gaussian";
    A.recipe["window"] = {A.window_lo, A.window_hi};
    A.recipe["normalization"] = Z;
    return A;
}

// ----------------------------------------------------------------------
// Corollary-style scaling of a single g: f = dy g, v = (0, lap g).

struct DerivedFV {
    Field f, vx, vy;
    double lambda = 0;       // amplitude applied to g
    double f_sup = 0;        // achieved ||f||_inf bound (lambda * sup |q^x|)
    double second_l1 = 0;    // achieved ||dxx g||_1 + ||dyy g||_1
    double gx_sup = 0, gy_sup = 0;
    int max_feasible_n = 0;
};

inline DerivedFV derive_f_v_scaled(std::shared_ptr<MollifiedField> base, const NormReport& r) {
    DerivedFV d;
    if (r.mixed_l1 == 0) {
        d.f = [](double, double) { return 0.0; };
        d.vx = d.f;
        d.vy = d.f;
        return d;
    }
    d.lambda = 1.0 / r.mixed_l1;
    d.second_l1 = d.lambda * (r.xx_l1 + r.yy_l1);
    d.gx_sup = d.lambda * r.x_sup;
    d.gy_sup = d.lambda * r.y_sup;
    d.f_sup = d.gy_sup;
    double worst = std::max({r.xx_l1 + r.yy_l1, r.x_sup, r.y_sup});
    d.max_feasible_n = static_cast<int>(std::floor(r.mixed_l1 / worst));
    double lam = d.lambda;
    d.f = [base, lam](double x, double y) { return lam * base->qx(x, y); };
    d.vx = [](double, double) { return 0.0; };
    d.vy = [base, lam](double x, double y) { return lam * base->lap_g(x, y); };
    return d;
}

inline DerivedFV derive_f_v(std::shared_ptr<MollifiedField> base, const NormReport& r, int n) {
    if (n < 1) throw ParameterError("n must be >= 1");
    DerivedFV d = derive_f_v_scaled(base, r);
    if (r.mixed_l1 == 0) return d;
    if (n > d.max_feasible_n)
        throw CapabilityError("requested n = " + std::to_string(n) +
                              " exceeds the achievable scaling; max feasible n = " +
                              std::to_string(d.max_feasible_n));
    return d;
}

struct BumpCorrected {
    Field w;         // f + u_n >= 0
    Field ux, uy;    // grad u_n, to be added to the divergence field
    PlateauBump u;
    BumpCorrected(Field w_, Field ux_, Field uy_, PlateauBump u_)
        : w(std::move(w_)), ux(std::move(ux_)), uy(std::move(uy_)), u(u_) {}
};

// w = f + u_n with the fixed plateau profile: u_n = 1/n on [-1,1]^2, support
// inside [-2,2]^2, |grad u_n| <= 2/n.
inline BumpCorrected bump_correction(const Field& f, double f_sup_bound, int n) {
    if (n < 1) throw ParameterError("n must be >= 1");
    if (f_sup_bound > 1.0 / n + 1e-12)
        throw ParameterError("bump_correction: ||f||_inf exceeds 1/n");
    PlateauBump u(0, 0, 1.0, 1.0 / n);
    Field w = [f, u](double x, double y) { return f(x, y) + u.value(x, y); };
    Field ux = [u](double x, double y) { return u.gradient(x, y)[0]; };
    Field uy = [u](double x, double y) { return u.gradient(x, y)[1]; };
    return BumpCorrected(std::move(w), std::move(ux), std::move(uy), u);
}

// S_N = sum_{n <= N} integral over D_n of |grad rho| for the requested cuts;
// quadrature resolution is detached from the build bookkeeping.
inline std::vector<double> gradient_mass_partial_sums(const FPKAssembly& A,
                                                      const std::vector<int>& cuts = {1, 2, 4, 9}) {
    if (A.mode != "overlapping") throw PlanError("gradient masses need an overlapping assembly");
    std::vector<double> tile_mass;
    for (const auto& t : A.tiles) {
        Field gm = [&A](double x, double y) {
            return std::hypot(A.drho_x(x, y), A.drho_y(x, y));
        };
        double dh = t.spec.d_half;
        tile_mass.push_back(detail::box_simpson(gm, t.spec.cx - dh, t.spec.cx + dh,
                                                t.spec.cy - dh, t.spec.cy + dh, A.h / 3));
    }
    std::vector<double> out;
    for (int cut : cuts) {
        if (cut > static_cast<int>(tile_mass.size())) break;
        double s = 0;
        for (int n = 0; n < cut; ++n) s += tile_mass[n];
        out.push_back(s);
    }
    return out;
}

// ----------------------------------------------------------------------
// materialization

inline void write_assembly(const FPKAssembly& A, const std::string& dir, double h_csv) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    long n = static_cast<long>(std::ceil((A.window_hi - A.window_lo) / h_csv)) + 1;
    if (n % 2 == 0) ++n;
    if (n > 4609) throw CapabilityError("csv grid too large; coarsen h_csv");
    double h = (A.window_hi - A.window_lo) / (n - 1);
    auto dump = [&](const Field& f, const std::string& name) {
        GridField g(A.window_lo, A.window_lo, h, static_cast<int>(n), static_cast<int>(n));
        parallel_blocks(static_cast<std::size_t>(n), worker_count() * 2,
                        [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                            for (std::size_t j = jlo; j < jhi; ++j)
                                for (long i = 0; i < n; ++i)
                                    g.at(static_cast<int>(i), static_cast<int>(j)) =
                                        f(g.x(static_cast<int>(i)), g.y(static_cast<int>(j)));
                        });
        write_csv(g, dir + "/" + name + ".csv");
    };
    dump(A.rho, "rho");
    dump(A.bx, "bx");
    dump(A.by, "by");
    dump(A.vx, "vx");
    dump(A.vy, "vy");
    std::ofstream rec(dir + "/recipe.json");
    rec << A.recipe.dump(2) << "\n";
}

}  // namespace fpk
