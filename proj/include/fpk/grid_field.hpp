#pragma once

#include "fpk/rational.hpp"
#include "fpk/util.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace fpk {

// Uniform node-centered sampling of a scalar field, row-major with x fastest.
struct GridField {
    double x0 = 0, y0 = 0;
    double h = 1;
    int nx = 0, ny = 0;
    std::vector<double> v;

    GridField() = default;
    GridField(double x0_, double y0_, double h_, int nx_, int ny_)
        : x0(x0_), y0(y0_), h(h_), nx(nx_), ny(ny_), v(static_cast<std::size_t>(nx_) * ny_, 0.0) {}

    double x(int i) const { return x0 + i * h; }
    double y(int j) const { return y0 + j * h; }
    double extent_x() const { return (nx - 1) * h; }
    double extent_y() const { return (ny - 1) * h; }
    double& at(int i, int j) { return v[static_cast<std::size_t>(j) * nx + i]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(j) * nx + i]; }

    double max_abs() const {
        double m = 0;
        for (double t : v) m = std::max(m, std::fabs(t));
        return m;
    }

    // composite Simpson over the whole grid of fn(value); nx, ny must be odd
    template <typename Fn>
    double simpson(Fn&& fn) const {
        double total = 0;
        for (int j = 0; j < ny; ++j) {
            double wy = simpson_weight(j, ny, h);
            double row = 0;
            for (int i = 0; i < nx; ++i) row += simpson_weight(i, nx, h) * fn(at(i, j));
            total += wy * row;
        }
        return total;
    }

    double integral() const {
        return simpson([](double t) { return t; });
    }
    double l1() const {
        return simpson([](double t) { return std::fabs(t); });
    }
    double lp(double p) const {
        return std::pow(simpson([p](double t) { return std::pow(std::fabs(t), p); }), 1.0 / p);
    }
};

inline void write_csv(const GridField& g, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open for writing: " + path);
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", g.x0, g.y0, g.extent_x(), g.extent_y(),
                 g.h, g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i)
            std::fprintf(f, "%.17g%c", g.at(i, j), i + 1 == g.nx ? '\n' : ',');
    }
    std::fclose(f);
}

inline GridField read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty grid csv: " + path);
    GridField g;
    double ex, ey;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg,%d,%d", &g.x0, &g.y0, &ex, &ey, &g.h, &g.nx,
                    &g.ny) != 7)
        throw ConfigError("bad grid csv header: " + path);
    g.v.resize(static_cast<std::size_t>(g.nx) * g.ny);
    std::size_t idx = 0;
    while (std::getline(in, line) && idx < g.v.size()) {
        std::size_t pos = 0;
        while (pos <= line.size() && idx < g.v.size()) {
            std::size_t c = line.find(',', pos);
            std::size_t len = (c == std::string::npos) ? line.size() - pos : c - pos;
            if (len > 0) g.v[idx++] = std::stod(line.substr(pos, len));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
    }
    if (idx != g.v.size()) throw ConfigError("grid csv truncated: " + path);
    return g;
}

}  // namespace fpk
