#pragma once

#include "fpk/partition.hpp"
#include "fpk/rational.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <utility>
#include <vector>

namespace fpk {

using json = nlohmann::json;

// 1-D slice of a step function: breakpoints plus one value per open cell.
struct LineProfile {
    char axis = 'x';        // axis the profile varies along
    Rational coordinate;    // the fixed coordinate on the other axis
    std::vector<Rational> breakpoints;
    std::vector<Rational> values;
};

// Piecewise-constant function on a rational rectangle partition. Values live
// on open cells only; boundaries carry no data.
class StepFunction2D {
  public:
    StepFunction2D() = default;
    StepFunction2D(Partition1D xgrid, Partition1D ygrid, std::vector<Rational> values)
        : xs_(std::move(xgrid)), ys_(std::move(ygrid)), v_(std::move(values)) {
        if (v_.size() != xs_.n_cells() * ys_.n_cells())
            throw ParameterError("value matrix does not match partition dimensions");
    }

    static StepFunction2D zero(Partition1D xgrid, Partition1D ygrid) {
        std::size_t n = xgrid.n_cells() * ygrid.n_cells();
        return StepFunction2D(std::move(xgrid), std::move(ygrid), std::vector<Rational>(n, Rational(0)));
    }

    const Partition1D& xgrid() const { return xs_; }
    const Partition1D& ygrid() const { return ys_; }
    std::size_t ncx() const { return xs_.n_cells(); }
    std::size_t ncy() const { return ys_.n_cells(); }

    const Rational& cell(std::size_t ix, std::size_t iy) const { return v_[iy * ncx() + ix]; }
    Rational& cell(std::size_t ix, std::size_t iy) { return v_[iy * ncx() + ix]; }

    // Value at a point interior to some cell; throws on cell boundaries.
    const Rational& at(const Rational& x, const Rational& y) const {
        return cell(xs_.cell_containing(x), ys_.cell_containing(y));
    }

    LineProfile row_profile(const Rational& y0) const {
        std::size_t j = ys_.cell_containing(y0);
        LineProfile p;
        p.axis = 'x';
        p.coordinate = y0;
        p.breakpoints = xs_.points();
        p.values.reserve(ncx());
        for (std::size_t i = 0; i < ncx(); ++i) p.values.push_back(cell(i, j));
        return p;
    }

    LineProfile column_profile(const Rational& x0) const {
        std::size_t i = xs_.cell_containing(x0);
        LineProfile p;
        p.axis = 'y';
        p.coordinate = x0;
        p.breakpoints = ys_.points();
        p.values.reserve(ncy());
        for (std::size_t j = 0; j < ncy(); ++j) p.values.push_back(cell(i, j));
        return p;
    }

  private:
    Partition1D xs_, ys_;
    std::vector<Rational> v_;  // row-major, x fastest
};

inline Rational l1_norm(const StepFunction2D& f) {
    Rational s(0);
    for (std::size_t j = 0; j < f.ncy(); ++j) {
        Rational h = f.ygrid().width(j);
        for (std::size_t i = 0; i < f.ncx(); ++i) s += rat_abs(f.cell(i, j)) * f.xgrid().width(i) * h;
    }
    return s;
}

namespace detail {

// Integral of a 1-D step profile (breaks b, values v) from b.front() to t,
// with t clamped into [b.front(), b.back()].
inline Rational prefix_integral(const std::vector<Rational>& b, const std::vector<Rational>& v,
                                const Rational& t) {
    Rational s(0);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        if (t <= b[i]) break;
        const Rational& right = t < b[i + 1] ? t : b[i + 1];
        s += v[i] * (right - b[i]);
    }
    return s;
}

// Exact integral of |a + b t| over t in [0, w].
inline Rational integral_abs_linear(const Rational& a, const Rational& b, const Rational& w) {
    if (b == 0) return rat_abs(a) * w;
    Rational root = -a / b;
    auto F = [&](const Rational& t) { return a * t + b * t * t / 2; };
    if (root > 0 && root < w) return rat_abs(F(root)) + rat_abs(F(w) - F(root));
    return rat_abs(F(w));
}

}  // namespace detail

// psi^x(x0, y0) = integral of f(., y0) from the left edge to x0.
inline Rational x_antiderivative(const StepFunction2D& f, const Rational& x0, const Rational& y0) {
    LineProfile row = f.row_profile(y0);
    return detail::prefix_integral(row.breakpoints, row.values, x0);
}

inline Rational y_antiderivative(const StepFunction2D& f, const Rational& x0, const Rational& y0) {
    LineProfile col = f.column_profile(x0);
    return detail::prefix_integral(col.breakpoints, col.values, y0);
}

// Total variation in x of x -> f^y(x, y0): the sum of absolute jumps of a
// step function of x, computed exactly.
inline Rational var_x_of_y_antideriv(const StepFunction2D& f, const Rational& y0) {
    std::size_t j = f.ygrid().cell_containing(y0);
    Rational t = y0 - f.ygrid().point(j);
    std::size_t nx = f.ncx();
    Rational var(0);
    Rational prev(0);
    for (std::size_t i = 0; i < nx; ++i) {
        Rational c(0);
        for (std::size_t jj = 0; jj < j; ++jj) c += f.cell(i, jj) * f.ygrid().width(jj);
        c += f.cell(i, j) * t;
        if (i > 0) var += rat_abs(c - prev);
        prev = c;
    }
    return var;
}

inline Rational var_y_of_x_antideriv(const StepFunction2D& f, const Rational& x0) {
    std::size_t i = f.xgrid().cell_containing(x0);
    Rational t = x0 - f.xgrid().point(i);
    std::size_t ny = f.ncy();
    Rational var(0);
    Rational prev(0);
    for (std::size_t j = 0; j < ny; ++j) {
        Rational c(0);
        for (std::size_t ii = 0; ii < i; ++ii) c += f.cell(ii, j) * f.xgrid().width(ii);
        c += f.cell(i, j) * t;
        if (j > 0) var += rat_abs(c - prev);
        prev = c;
    }
    return var;
}

// integral over y of Var_x f^y(y). Within y-cell j at offset t the jump across
// x-breakpoint i is linear in t, so each piece integrates in closed form.
inline Rational integral_var_x_of_y_antideriv(const StepFunction2D& f) {
    std::size_t nx = f.ncx(), ny = f.ncy();
    // prefix[i] = integral of f(x_i-cell, .) over all y-cells below the current one
    std::vector<Rational> prefix(nx, Rational(0));
    Rational total(0);
    for (std::size_t j = 0; j < ny; ++j) {
        Rational h = f.ygrid().width(j);
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            Rational a = prefix[i + 1] - prefix[i];
            Rational b = f.cell(i + 1, j) - f.cell(i, j);
            total += detail::integral_abs_linear(a, b, h);
        }
        for (std::size_t i = 0; i < nx; ++i) prefix[i] += f.cell(i, j) * h;
    }
    return total;
}

inline Rational integral_var_y_of_x_antideriv(const StepFunction2D& f) {
    std::size_t nx = f.ncx(), ny = f.ncy();
    std::vector<Rational> prefix(ny, Rational(0));
    Rational total(0);
    for (std::size_t i = 0; i < nx; ++i) {
        Rational w = f.xgrid().width(i);
        for (std::size_t j = 0; j + 1 < ny; ++j) {
            Rational a = prefix[j + 1] - prefix[j];
            Rational b = f.cell(i, j + 1) - f.cell(i, j);
            total += detail::integral_abs_linear(a, b, w);
        }
        for (std::size_t j = 0; j < ny; ++j) prefix[j] += f.cell(i, j) * w;
    }
    return total;
}

// (sup |f^x|, sup |f^y|). f^x is piecewise linear in x on each y-strip, so the
// supremum is attained at an x-breakpoint of some strip; likewise for f^y.
inline std::pair<Rational, Rational> sup_norm_antiderivatives(const StepFunction2D& f) {
    Rational sup_fx(0), sup_fy(0);
    for (std::size_t j = 0; j < f.ncy(); ++j) {
        Rational p(0);
        for (std::size_t i = 0; i < f.ncx(); ++i) {
            p += f.cell(i, j) * f.xgrid().width(i);
            if (rat_abs(p) > sup_fx) sup_fx = rat_abs(p);
        }
    }
    for (std::size_t i = 0; i < f.ncx(); ++i) {
        Rational p(0);
        for (std::size_t j = 0; j < f.ncy(); ++j) {
            p += f.cell(i, j) * f.ygrid().width(j);
            if (rat_abs(p) > sup_fy) sup_fy = rat_abs(p);
        }
    }
    return {sup_fx, sup_fy};
}

// first x-moment: integral of x * f(x, y) over the domain
inline Rational x_moment(const StepFunction2D& f) {
    Rational s(0);
    for (std::size_t j = 0; j < f.ncy(); ++j) {
        Rational h = f.ygrid().width(j);
        for (std::size_t i = 0; i < f.ncx(); ++i) {
            const Rational& a = f.xgrid().point(i);
            const Rational& b = f.xgrid().point(i + 1);
            s += f.cell(i, j) * (b * b - a * a) / 2 * h;
        }
    }
    return s;
}

enum class CombineOp { add, sub };

// Exact algebra on the common refinement. Domains may differ; each operand is
// extended by zero onto the union box.
inline StepFunction2D combine(const StepFunction2D& f, const StepFunction2D& g, CombineOp op) {
    Partition1D xs = Partition1D::merged(f.xgrid(), g.xgrid());
    Partition1D ys = Partition1D::merged(f.ygrid(), g.ygrid());
    StepFunction2D out = StepFunction2D::zero(xs, ys);
    auto sample = [](const StepFunction2D& s, const Rational& x, const Rational& y) -> Rational {
        if (x <= s.xgrid().lo() || x >= s.xgrid().hi()) return Rational(0);
        if (y <= s.ygrid().lo() || y >= s.ygrid().hi()) return Rational(0);
        return s.at(x, y);
    };
    for (std::size_t j = 0; j < ys.n_cells(); ++j) {
        Rational ym = ys.midpoint(j);
        for (std::size_t i = 0; i < xs.n_cells(); ++i) {
            Rational xm = xs.midpoint(i);
            Rational a = sample(f, xm, ym);
            Rational b = sample(g, xm, ym);
            out.cell(i, j) = op == CombineOp::add ? Rational(a + b) : Rational(a - b);
        }
    }
    return out;
}

inline StepFunction2D scale(const StepFunction2D& f, const Rational& c) {
    StepFunction2D out = f;
    for (std::size_t j = 0; j < out.ncy(); ++j)
        for (std::size_t i = 0; i < out.ncx(); ++i) out.cell(i, j) *= c;
    return out;
}

inline StepFunction2D translate(const StepFunction2D& f, const Rational& dx, const Rational& dy) {
    std::vector<Rational> xs = f.xgrid().points(), ys = f.ygrid().points();
    for (auto& p : xs) p += dx;
    for (auto& p : ys) p += dy;
    return StepFunction2D(Partition1D(std::move(xs)), Partition1D(std::move(ys)),
                          [&] {
                              std::vector<Rational> v;
                              v.reserve(f.ncx() * f.ncy());
                              for (std::size_t j = 0; j < f.ncy(); ++j)
                                  for (std::size_t i = 0; i < f.ncx(); ++i) v.push_back(f.cell(i, j));
                              return v;
                          }());
}

// f~(x, y) = -f(x, -y)
inline StepFunction2D reflect_odd_y(const StepFunction2D& f) {
    std::vector<Rational> ys = f.ygrid().points();
    std::size_t ny = f.ncy();
    std::vector<Rational> rys(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) rys[k] = -ys[ys.size() - 1 - k];
    std::vector<Rational> v(f.ncx() * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < f.ncx(); ++i) v[j * f.ncx() + i] = -f.cell(i, ny - 1 - j);
    return StepFunction2D(f.xgrid(), Partition1D(std::move(rys)), std::move(v));
}

// Cell-by-cell equality on the common refinement (ignores partition identity).
inline bool value_equal(const StepFunction2D& f, const StepFunction2D& g) {
    if (f.xgrid().lo() != g.xgrid().lo() || f.xgrid().hi() != g.xgrid().hi()) return false;
    if (f.ygrid().lo() != g.ygrid().lo() || f.ygrid().hi() != g.ygrid().hi()) return false;
    Partition1D xs = Partition1D::merged(f.xgrid(), g.xgrid());
    Partition1D ys = Partition1D::merged(f.ygrid(), g.ygrid());
    for (std::size_t j = 0; j < ys.n_cells(); ++j)
        for (std::size_t i = 0; i < xs.n_cells(); ++i) {
            Rational xm = xs.midpoint(i), ym = ys.midpoint(j);
            if (f.at(xm, ym) != g.at(xm, ym)) return false;
        }
    return true;
}

inline json to_json(const StepFunction2D& f) {
    json jx = json::array(), jy = json::array(), jv = json::array();
    for (const auto& p : f.xgrid().points()) jx.push_back(to_string(p));
    for (const auto& p : f.ygrid().points()) jy.push_back(to_string(p));
    for (std::size_t j = 0; j < f.ncy(); ++j) {
        json row = json::array();
        for (std::size_t i = 0; i < f.ncx(); ++i) row.push_back(to_string(f.cell(i, j)));
        jv.push_back(std::move(row));
    }
    return json{{"xgrid", jx}, {"ygrid", jy}, {"values", jv}};
}

inline StepFunction2D step_function_from_json(const json& j) {
    std::vector<Rational> xs, ys, v;
    for (const auto& s : j.at("xgrid")) xs.push_back(parse_rational(s.get<std::string>()));
    for (const auto& s : j.at("ygrid")) ys.push_back(parse_rational(s.get<std::string>()));
    for (const auto& row : j.at("values"))
        for (const auto& s : row) v.push_back(parse_rational(s.get<std::string>()));
    return StepFunction2D(Partition1D(std::move(xs)), Partition1D(std::move(ys)), std::move(v));
}

}  // namespace fpk
