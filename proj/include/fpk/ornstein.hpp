#pragma once

#include "fpk/step_function.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fpk {

// Constants recorded by the construction. C1 bounds the mass growth from
// below (||p_n||_1 > C1*delta*n), C2 bounds the variation ratio of property 5.
// Both leave the margin the induction needs at every stage.
inline const Rational kC1 = Rational(1, 5);
inline const Rational kC2 = Rational(3);
// A refinement step is accepted only if it realizes at least this fraction of
// the limiting mass gain (delta/2) * integral Var_y p_n^x dx; together with
// C1 = 1/5 < C3/3 this keeps ||p_n||_1 > C1*delta*n at every stage.
inline const Rational kGainMargin = Rational(2, 3);

struct PropertyReport {
    int stage = 0;
    Rational delta;

    bool partition_ok = false;       // 1) rectangle partition, values on open cells
    bool support_ok = false;         // 2) zero extension outside [-1,1]^2
    Rational max_row_residual;       // 3) max |integral of a row|
    Rational max_col_residual;       //    max |integral of a column|
    Rational l1;                     // 4)
    Rational l1_lower_bound;         //    C1 * delta * n
    Rational int_var_x;              // 5) integral Var_x p^y dy
    Rational ratio5;                 //    int_var_x / (delta * l1)
    Rational int_var_y;              // 6) integral Var_y p^x dx
    Rational c3;                     //    stage-1 value of the same integral
    Rational monotone_lo, monotone_hi;  // 7) re-derived monotonicity interval
    Rational max_drop;               //    largest adjacent-cell drop of p^x inside it
    Rational drop_bound;             //    2^-(n-1)
    bool monotone_ok = false;
    Rational sup_fx, sup_fy;         // 8)
    Rational sup_fy_bound;           //    delta * (2 - 2^-(n-1))
    bool odd_ok = false;             // 9)
    Rational ek52_lhs, ek52_rhs;     // inequality (ek5.2) with the recorded C2
    bool ek52_holds = false;

    bool properties_1_to_3_ok() const {
        return partition_ok && support_ok && max_row_residual == 0 && max_col_residual == 0;
    }
    bool all_pass() const {
        return properties_1_to_3_ok() && l1 > l1_lower_bound && int_var_x < kC2 * delta * l1 &&
               int_var_y == c3 && monotone_ok && sup_fx <= 1 && sup_fy <= sup_fy_bound && odd_ok;
    }
};

struct ConstructionState {
    int n = 0;
    Rational delta;
    StepFunction2D p;
    std::vector<Rational> alpha_history;
    Rational c3;  // integral Var_y p_1^x dx, frozen at stage 1
    PropertyReport report;
};

namespace detail {

// x-antiderivative profile of one row: prefix sums of value * width.
inline std::vector<Rational> row_antideriv_at_breakpoints(const StepFunction2D& f, std::size_t j) {
    std::vector<Rational> a(f.ncx() + 1, Rational(0));
    for (std::size_t i = 0; i < f.ncx(); ++i) a[i + 1] = a[i] + f.cell(i, j) * f.xgrid().width(i);
    return a;
}

// p^x(x, row j) for arbitrary x, from the breakpoint prefix values.
inline Rational eval_row_antideriv(const StepFunction2D& f, const std::vector<Rational>& prefix,
                                   std::size_t j, const Rational& x) {
    const auto& xs = f.xgrid().points();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return Rational(0);
    std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    if (i + 1 >= xs.size()) return prefix.back();
    return prefix[i] + f.cell(i, j) * (x - xs[i]);
}

}  // namespace detail

inline PropertyReport verify_properties(const ConstructionState& st);

// The spec's p_1: +1 on (-1/2,0)x(-d,-d/4) and (0,1/2)x(d/4,d),
// -1 on (0,1/2)x(-d,-d/4) and (-1/2,0)x(d/4,d), 0 elsewhere.
inline ConstructionState build_p1(const Rational& delta) {
    if (!(delta > 0 && delta < 1)) throw ParameterError("delta must lie in (0,1)");
    Partition1D xs({Rational(-1), Rational(-1, 2), Rational(0), Rational(1, 2), Rational(1)});
    Partition1D ys({Rational(-1), -delta, -delta / 4, delta / 4, delta, Rational(1)});
    StepFunction2D p = StepFunction2D::zero(xs, ys);
    p.cell(1, 1) = 1;
    p.cell(2, 1) = -1;
    p.cell(1, 3) = -1;
    p.cell(2, 3) = 1;
    ConstructionState st;
    st.n = 1;
    st.delta = delta;
    st.p = std::move(p);
    st.c3 = integral_var_y_of_x_antideriv(st.p);
    st.report = verify_properties(st);
    if (!st.report.all_pass()) throw AssemblyError("p_1 failed its own property report");
    return st;
}

// One refinement step p_n -> p_{n+1}. Every interior y-breakpoint carries a
// genuine jump of p_n, and each gets a strip of width alpha; the strip content
// is the average r_1 of the adjacent rows plus the checkerboard r_2 whose
// amplitudes transfer the x-antiderivative drop. Constructed for y < 0 and
// extended to y > 0 by oddness.
inline ConstructionState refine_step(const ConstructionState& st, const Rational& alpha) {
    const StepFunction2D& p = st.p;
    const Rational& delta = st.delta;
    if (!(alpha > 0)) throw ParameterError("alpha must be positive");
    Rational cells = 2 * delta / alpha;
    if (!is_integer(cells)) throw ParameterError("2*delta/alpha must be an integer");

    const auto& ys = p.ygrid().points();
    std::size_t nby = ys.size();
    // strips sit at all interior breakpoints; adjacent strips must not touch
    Rational min_gap = ys[1] - ys[0];
    for (std::size_t k = 1; k + 1 < nby; ++k) min_gap = std::min(min_gap, Rational(ys[k + 1] - ys[k]));
    if (!(alpha < min_gap))
        throw ParameterError("alpha too large: strips would overlap or exit their intervals");

    // new y-partition: old breakpoints plus strip edges
    std::vector<Rational> nys;
    for (std::size_t k = 0; k < nby; ++k) {
        if (k > 0 && k + 1 < nby) nys.push_back(ys[k] - alpha / 2);
        nys.push_back(ys[k]);
        if (k > 0 && k + 1 < nby) nys.push_back(ys[k] + alpha / 2);
    }
    Partition1D new_ys{nys};

    // new x-partition: old breakpoints plus the K_k lattice of pitch alpha/delta,
    // halved once more for the checkerboard quarters
    Rational half_w = alpha / (2 * delta);
    std::vector<Rational> fine;
    for (Rational x(-1); x <= 1; x += half_w) fine.push_back(x);
    Partition1D new_xs = Partition1D::merged(p.xgrid(), Partition1D{fine});

    // per-row antiderivative prefixes of p_n for the beta amplitudes
    std::vector<std::vector<Rational>> prefixes(p.ncy());
    for (std::size_t j = 0; j < p.ncy(); ++j) prefixes[j] = detail::row_antideriv_at_breakpoints(p, j);

    Rational kw = alpha / delta;

    // value of p_{n+1} at a point interior to a negative-side strip around ys[k]
    auto strip_value = [&](std::size_t k, const Rational& x, const Rational& y) -> Rational {
        std::size_t j_below = k - 1, j_above = k;
        Rational below_mid = (ys[k - 1] + ys[k]) / 2;
        Rational above_mid = (ys[k] + ys[k + 1]) / 2;
        Rational r1 = (p.at(x, below_mid) + p.at(x, above_mid)) / 2;
        // K-cell containing x and its center; cell midpoints never hit a K boundary
        Rational rel = (x + 1) / kw;
        BigInt kk = numerator(rel) / denominator(rel);
        Rational xk = Rational(-1) + (2 * Rational(kk) + 1) * kw / 2;
        Rational drop = detail::eval_row_antideriv(p, prefixes[j_below], j_below, xk) -
                        detail::eval_row_antideriv(p, prefixes[j_above], j_above, xk);
        Rational beta = delta / (2 * alpha) * drop;
        bool left_half = x < xk;
        bool lower_half = y < ys[k];
        // +beta on lower-left and upper-right quarters
        Rational sgn = (left_half == lower_half) ? Rational(1) : Rational(-1);
        return r1 + sgn * beta;
    };

    StepFunction2D out = StepFunction2D::zero(new_xs, new_ys);
    for (std::size_t j = 0; j < new_ys.n_cells(); ++j) {
        Rational ym = new_ys.midpoint(j);
        // locate a strip containing ym: check the two nearest old breakpoints
        std::optional<std::size_t> strip;
        {
            auto it = std::lower_bound(ys.begin(), ys.end(), ym);
            std::size_t idx = static_cast<std::size_t>(it - ys.begin());
            for (std::size_t cand : {idx, idx > 0 ? idx - 1 : idx}) {
                if (cand == 0 || cand + 1 >= nby) continue;
                if (ym > ys[cand] - alpha / 2 && ym < ys[cand] + alpha / 2) strip = cand;
            }
        }
        for (std::size_t i = 0; i < new_xs.n_cells(); ++i) {
            Rational xm = new_xs.midpoint(i);
            if (!strip) {
                out.cell(i, j) = p.at(xm, ym);
            } else if (ys[*strip] < 0) {
                out.cell(i, j) = strip_value(*strip, xm, ym);
            } else {
                // property 9 extension: p(x, y) = -p(x, -y)
                std::size_t mk = nby - 1 - *strip;
                out.cell(i, j) = -strip_value(mk, xm, -ym);
            }
        }
    }

    ConstructionState next;
    next.n = st.n + 1;
    next.delta = delta;
    next.p = std::move(out);
    next.alpha_history = st.alpha_history;
    next.alpha_history.push_back(alpha);
    next.c3 = st.c3;
    next.report = verify_properties(next);
    return next;
}

// Largest admissible alpha of the form (shortest y-interval)/2^k, k >= 2, for
// which 2*delta/alpha is an integer, strips fit, and the refined function
// keeps properties 4) and 5) with margin. Halving terminates by the limit
// identity; 40 halvings without success raise a diagnostic.
inline Rational select_alpha(const ConstructionState& st, const Rational& delta) {
    const auto& ys = st.p.ygrid().points();
    Rational shortest = ys[1] - ys[0];
    for (std::size_t k = 1; k + 1 < ys.size(); ++k)
        shortest = std::min(shortest, Rational(ys[k + 1] - ys[k]));
    Rational gain_target = kGainMargin * (delta / 2) * integral_var_y_of_x_antideriv(st.p);
    Rational l1_before = l1_norm(st.p);
    for (unsigned k = 2; k <= 40; ++k) {
        Rational alpha = shortest * pow2_inv(k);
        if (!is_integer(2 * delta / alpha)) continue;
        if (!(alpha < shortest)) continue;
        ConstructionState trial;
        try {
            trial = refine_step(st, alpha);
        } catch (const ParameterError&) {
            continue;
        }
        Rational l1_after = l1_norm(trial.p);
        bool gain_ok = l1_after - l1_before >= gain_target;
        bool prop4_ok = l1_after > kC1 * delta * (st.n + 1);
        bool prop5_ok = trial.report.int_var_x < kC2 * delta * l1_after;
        if (gain_ok && prop4_ok && prop5_ok) return alpha;
    }
    throw ParameterError("select_alpha: no admissible alpha within 40 halvings");
}

inline std::vector<ConstructionState> construct_sequence(const Rational& delta, int stages) {
    if (stages < 1) throw ParameterError("stages must be >= 1");
    std::vector<ConstructionState> out;
    out.push_back(build_p1(delta));
    for (int n = 1; n < stages; ++n) {
        Rational alpha = select_alpha(out.back(), delta);
        out.push_back(refine_step(out.back(), alpha));
        if (!out.back().report.all_pass())
            throw AssemblyError("stage " + std::to_string(n + 1) + " failed verification");
    }
    return out;
}

// Exact evaluation of properties 1)-9) and the (ek5.2) bookkeeping.
inline PropertyReport verify_properties(const ConstructionState& st) {
    const StepFunction2D& p = st.p;
    PropertyReport r;
    r.stage = st.n;
    r.delta = st.delta;

    r.partition_ok = p.xgrid().lo() == -1 && p.xgrid().hi() == 1 && p.ygrid().lo() == -1 &&
                     p.ygrid().hi() == 1;
    r.support_ok = r.partition_ok;  // the function is the zero extension of its values

    // property 3: all line integrals vanish
    r.max_row_residual = 0;
    for (std::size_t j = 0; j < p.ncy(); ++j) {
        Rational s(0);
        for (std::size_t i = 0; i < p.ncx(); ++i) s += p.cell(i, j) * p.xgrid().width(i);
        r.max_row_residual = std::max(r.max_row_residual, rat_abs(s));
    }
    r.max_col_residual = 0;
    for (std::size_t i = 0; i < p.ncx(); ++i) {
        Rational s(0);
        for (std::size_t j = 0; j < p.ncy(); ++j) s += p.cell(i, j) * p.ygrid().width(j);
        r.max_col_residual = std::max(r.max_col_residual, rat_abs(s));
    }

    r.l1 = l1_norm(p);
    r.l1_lower_bound = kC1 * st.delta * st.n;
    r.int_var_x = integral_var_x_of_y_antideriv(p);
    r.ratio5 = r.l1 == 0 ? Rational(0) : r.int_var_x / (st.delta * r.l1);
    r.int_var_y = integral_var_y_of_x_antideriv(p);
    r.c3 = st.c3;

    // property 7: re-derive the maximal interval around y = 0 on which every
    // x-antiderivative profile is nonincreasing in y, then bound the drops.
    std::size_t ny = p.ncy();
    std::size_t mid = 0;
    for (std::size_t j = 0; j < ny; ++j)
        if (p.ygrid().point(j) < 0 && p.ygrid().point(j + 1) > 0) mid = j;
    // levels[j][i] = p^x at x-breakpoint i for a height inside y-cell j
    std::vector<std::vector<Rational>> levels(ny, std::vector<Rational>(p.ncx() + 1, Rational(0)));
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < p.ncx(); ++i)
            levels[j][i + 1] = levels[j][i] + p.cell(i, j) * p.xgrid().width(i);
    }
    auto nonincreasing_across = [&](std::size_t j) {  // from cell j to cell j+1
        for (std::size_t i = 0; i <= p.ncx(); ++i)
            if (levels[j + 1][i] > levels[j][i]) return false;
        return true;
    };
    std::size_t lo = mid, hi = mid;
    while (lo > 0 && nonincreasing_across(lo - 1)) --lo;
    while (hi + 1 < ny && nonincreasing_across(hi)) ++hi;
    r.monotone_lo = p.ygrid().point(lo);
    r.monotone_hi = p.ygrid().point(hi + 1);
    r.max_drop = 0;
    for (std::size_t j = lo; j < hi; ++j)
        for (std::size_t i = 0; i <= p.ncx(); ++i)
            r.max_drop = std::max(r.max_drop, Rational(levels[j][i] - levels[j + 1][i]));
    r.drop_bound = st.n >= 1 ? pow2_inv(static_cast<unsigned>(st.n - 1)) : Rational(1);
    r.monotone_ok = r.monotone_lo < 0 && r.monotone_hi > 0 && r.max_drop <= r.drop_bound;

    auto sups = sup_norm_antiderivatives(p);
    r.sup_fx = sups.first;
    r.sup_fy = sups.second;
    r.sup_fy_bound = st.delta * (2 - r.drop_bound);

    // property 9: odd partition and odd values
    r.odd_ok = p.ygrid().odd_symmetric();
    if (r.odd_ok) {
        for (std::size_t j = 0; j < ny && r.odd_ok; ++j)
            for (std::size_t i = 0; i < p.ncx(); ++i)
                if (p.cell(i, j) != -p.cell(i, ny - 1 - j)) {
                    r.odd_ok = false;
                    break;
                }
    }

    r.ek52_lhs = r.int_var_x + r.int_var_y + r.sup_fx + r.sup_fy;
    r.ek52_rhs = kC2 * st.delta * r.l1;
    r.ek52_holds = r.ek52_lhs < r.ek52_rhs;
    return r;
}

inline json to_json(const PropertyReport& r) {
    return json{{"stage", r.stage},
                {"delta", to_string(r.delta)},
                {"partition_ok", r.partition_ok},
                {"support_ok", r.support_ok},
                {"max_row_residual", to_string(r.max_row_residual)},
                {"max_col_residual", to_string(r.max_col_residual)},
                {"l1", to_string(r.l1)},
                {"l1_lower_bound", to_string(r.l1_lower_bound)},
                {"int_var_x", to_string(r.int_var_x)},
                {"ratio5", to_string(r.ratio5)},
                {"int_var_y", to_string(r.int_var_y)},
                {"c3", to_string(r.c3)},
                {"monotone_interval", {to_string(r.monotone_lo), to_string(r.monotone_hi)}},
                {"max_drop", to_string(r.max_drop)},
                {"drop_bound", to_string(r.drop_bound)},
                {"monotone_ok", r.monotone_ok},
                {"sup_fx", to_string(r.sup_fx)},
                {"sup_fy", to_string(r.sup_fy)},
                {"sup_fy_bound", to_string(r.sup_fy_bound)},
                {"odd_ok", r.odd_ok},
                {"ek52_lhs", to_string(r.ek52_lhs)},
                {"ek52_rhs", to_string(r.ek52_rhs)},
                {"ek52_holds", r.ek52_holds},
                {"all_pass", r.all_pass()}};
}

}  // namespace fpk
