#pragma once

#include "fpk/rational.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

namespace fpk {

// Strictly increasing breakpoints of a 1-D rectangle partition.
class Partition1D {
  public:
    Partition1D() = default;
    explicit Partition1D(std::vector<Rational> pts) : pts_(std::move(pts)) {
        if (pts_.size() < 2) throw ParameterError("partition needs at least two breakpoints");
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i)
            if (!(pts_[i] < pts_[i + 1]))
                throw ParameterError("partition breakpoints must be strictly increasing");
    }

    const std::vector<Rational>& points() const { return pts_; }
    std::size_t n_cells() const { return pts_.size() - 1; }
    const Rational& lo() const { return pts_.front(); }
    const Rational& hi() const { return pts_.back(); }
    const Rational& point(std::size_t i) const { return pts_[i]; }
    Rational width(std::size_t cell) const { return pts_[cell + 1] - pts_[cell]; }
    Rational midpoint(std::size_t cell) const { return (pts_[cell] + pts_[cell + 1]) / 2; }

    bool is_breakpoint(const Rational& t) const {
        return std::binary_search(pts_.begin(), pts_.end(), t);
    }

    // Cell whose open interior contains t; throws if t is a breakpoint or outside.
    std::size_t cell_containing(const Rational& t) const {
        auto it = std::upper_bound(pts_.begin(), pts_.end(), t);
        if (it == pts_.begin() || it == pts_.end())
            throw UndefinedLineError("coordinate outside partition: " + to_string(t));
        std::size_t cell = static_cast<std::size_t>(it - pts_.begin()) - 1;
        if (pts_[cell] == t)
            throw UndefinedLineError("coordinate on a breakpoint: " + to_string(t));
        return cell;
    }

    bool odd_symmetric() const {
        std::size_t n = pts_.size();
        for (std::size_t i = 0; i < n; ++i)
            if (pts_[i] != -pts_[n - 1 - i]) return false;
        return true;
    }

    static Partition1D merged(const Partition1D& a, const Partition1D& b) {
        std::vector<Rational> out;
        out.reserve(a.pts_.size() + b.pts_.size());
        std::merge(a.pts_.begin(), a.pts_.end(), b.pts_.begin(), b.pts_.end(),
                   std::back_inserter(out));
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return Partition1D(std::move(out));
    }

  private:
    std::vector<Rational> pts_;
};

}  // namespace fpk
