#pragma once

// Tensor-product quadrature over boxes in R^d, d <= 3.

#include "ppstein/point_process.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace ppstein {

/// Midpoint rule over the box [lo, hi] with `resolution` cells per axis.
template <class Fn>
double midpoint_integral(std::size_t dim, const Point& lo, const Point& hi,
                         std::size_t resolution, Fn&& fn)
{
    std::array<double, kMaxDim> h{0.0, 0.0, 0.0};
    double cell = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
        h[i] = (hi[i] - lo[i]) / static_cast<double>(resolution);
        cell *= h[i];
    }
    if (!(cell > 0.0)) {
        return 0.0;
    }
    const std::size_t n2 = dim >= 2 ? resolution : 1;
    const std::size_t n3 = dim >= 3 ? resolution : 1;
    double total = 0.0;
    for (std::size_t a = 0; a < resolution; ++a) {
        double slab = 0.0;
        for (std::size_t b = 0; b < n2; ++b) {
            for (std::size_t c = 0; c < n3; ++c) {
                const Point u{lo[0] + (static_cast<double>(a) + 0.5) * h[0],
                              dim >= 2 ? lo[1] + (static_cast<double>(b) + 0.5) * h[1] : 0.0,
                              dim >= 3 ? lo[2] + (static_cast<double>(c) + 0.5) * h[2] : 0.0};
                slab += fn(u);
            }
        }
        total += slab;
    }
    return total * cell;
}

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights by Newton iteration on P_n.
inline GaussRule gauss_legendre(std::size_t n)
{
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const auto nd = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const auto kd = static_cast<double>(k);
                const double p2 = ((2.0 * kd - 1.0) * x * p1 - (kd - 1.0) * p0) / kd;
                p0 = p1;
                p1 = p2;
            }
            dp = nd * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) {
                break;
            }
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Per-axis Gauss order for window integrals of section volumes and their
/// powers. Piecewise polynomial in d = 1; in d = 3 every node costs a slice
/// integration, so the grid stays small.
inline std::size_t section_gauss_order(std::size_t dim)
{
    return dim == 2 ? 24 : 8;
}

/// Integral over the window of a function that is smooth on the product
/// pieces cut by `kinks` (the same cut positions on every axis). Each piece
/// gets an `order`-point Gauss-Legendre rule per axis.
template <class Fn>
double piecewise_gauss_integral(const Window& window, const std::vector<double>& kinks, Fn&& fn,
                                std::size_t order = 16)
{
    const GaussRule g = gauss_legendre(order);
    std::array<std::vector<double>, kMaxDim> xs;
    std::array<std::vector<double>, kMaxDim> ws;
    for (std::size_t axis = 0; axis < window.dim; ++axis) {
        const double h = window.half_width[axis];
        std::vector<double> cuts{-h, h};
        for (double k : kinks) {
            if (k > -h && k < h) {
                cuts.push_back(k);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double mid = 0.5 * (cuts[s] + cuts[s + 1]);
            const double half = 0.5 * (cuts[s + 1] - cuts[s]);
            for (std::size_t k = 0; k < order; ++k) {
                xs[axis].push_back(mid + half * g.nodes[k]);
                ws[axis].push_back(half * g.weights[k]);
            }
        }
    }
    for (std::size_t axis = window.dim; axis < kMaxDim; ++axis) {
        xs[axis] = {0.0};
        ws[axis] = {1.0};
    }
    double total = 0.0;
    for (std::size_t a = 0; a < xs[0].size(); ++a) {
        for (std::size_t b = 0; b < xs[1].size(); ++b) {
            for (std::size_t c = 0; c < xs[2].size(); ++c) {
                total += ws[0][a] * ws[1][b] * ws[2][c] * fn(Point{xs[0][a], xs[1][b], xs[2][c]});
            }
        }
    }
    return total;
}

}  // namespace ppstein
