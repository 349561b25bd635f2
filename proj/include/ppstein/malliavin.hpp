#pragma once

// Add-one cost D, the smoothed gradient -DL^{-1} for finite-chaos functionals,
// and the carre du champ <DF, -DL^{-1}F>_{L^2(mu)}.

#include "ppstein/chaos.hpp"
#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>

namespace ppstein {

struct Functional {
    std::function<double(const PointConfiguration&)> evaluator;
    std::optional<FiniteChaosFunctional> chaos;
    bool integer_valued = false;

    double operator()(const PointConfiguration& omega) const { return evaluator(omega); }
};

/// eta(B) as a functional with its first-chaos structure.
inline Functional count_functional(const Window& window, double intensity, const Box& box)
{
    return {[box](const PointConfiguration& omega) { return static_cast<double>(count_in(omega, box)); },
            count_chaos(window, intensity, box), true};
}

inline Functional edge_count_functional(const ConnectionRule& rule, double lambda,
                                        const Window& window)
{
    return {[rule](const PointConfiguration& omega) { return static_cast<double>(edge_count(omega, rule)); },
            edge_count_chaos(rule, lambda, window), true};
}

/// D_z F(omega) = F(omega + delta_z) - F(omega).
inline double diff(const Functional& f, const PointConfiguration& omega, const Point& z)
{
    return f(add_point(omega, z)) - f(omega);
}

namespace detail {

inline double second_order_sum(const SecondOrderKernel& k, const PointConfiguration& omega,
                               const Point& z)
{
    double s = 0.0;
    for (const auto& x : omega.points()) {
        s += k.g(z, x);
    }
    return s;
}

}  // namespace detail

/// D_z F = g_1(z) + 2 I_1(g_2(z, .)), with I_1(g_2(z, .)) = sum_x g_2(z, x) -
/// int g_2(z, y) mu(dy). The deterministic parts are combined first so that
/// cancelling compensators cancel exactly.
inline double diff_chaos(const FiniteChaosFunctional& f, const PointConfiguration& omega,
                         const Point& z)
{
    double det = f.first ? f.first->g(z) : 0.0;
    double random = 0.0;
    if (f.second) {
        det -= 2.0 * f.second->row_compensator(z);
        random = 2.0 * detail::second_order_sum(*f.second, omega, z);
    }
    return det + random;
}

inline double diff_chaos(const Functional& f, const PointConfiguration& omega, const Point& z)
{
    if (!f.chaos) {
        throw std::domain_error("diff_chaos: functional has no chaos structure");
    }
    return diff_chaos(*f.chaos, omega, z);
}

/// -D_z L^{-1} F = g_1(z) + I_1(g_2(z, .)).
inline double neg_DLinv(const FiniteChaosFunctional& f, const PointConfiguration& omega,
                        const Point& z)
{
    double det = f.first ? f.first->g(z) : 0.0;
    double random = 0.0;
    if (f.second) {
        det -= f.second->row_compensator(z);
        random = detail::second_order_sum(*f.second, omega, z);
    }
    return det + random;
}

inline double neg_DLinv(const Functional& f, const PointConfiguration& omega, const Point& z)
{
    if (!f.chaos) {
        throw std::domain_error("neg_DLinv: functional has no chaos structure");
    }
    return neg_DLinv(*f.chaos, omega, z);
}

enum class ZIntegration { stratified, quadrature };

struct ZIntegral {
    double value = 0.0;
    double error = 0.0;
};

/// intensity * int_W fn(z) dz. Stratified: one uniform point in each of m^d
/// congruent cells, m = round(n_z^{1/d}); error from the spread of the cell
/// values. Quadrature: cell midpoints, error from halving the resolution.
template <class Fn>
ZIntegral integrate_z(const ProcessModel& model, std::size_t n_z, const RngStream& stream,
                      ZIntegration mode, Fn&& fn)
{
    const Window& w = model.window;
    const std::size_t dim = w.dim;
    const auto m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n_z), 1.0 / static_cast<double>(dim)))));
    const double scale = model.intensity * w.volume();

    auto grid_mean = [&](std::size_t per_axis, Engine* eng, double* second_moment) {
        const std::size_t n2 = dim >= 2 ? per_axis : 1;
        const std::size_t n3 = dim >= 3 ? per_axis : 1;
        const auto pd = static_cast<double>(per_axis);
        double sum = 0.0;
        double sq = 0.0;
        std::size_t count = 0;
        for (std::size_t a = 0; a < per_axis; ++a) {
            for (std::size_t b = 0; b < n2; ++b) {
                for (std::size_t c = 0; c < n3; ++c) {
                    const std::array<std::size_t, kMaxDim> cell{a, b, c};
                    Point z{0.0, 0.0, 0.0};
                    for (std::size_t i = 0; i < dim; ++i) {
                        const double u = eng ? uniform01(*eng) : 0.5;
                        z[i] = -w.half_width[i] + 2.0 * w.half_width[i] * (static_cast<double>(cell[i]) + u) / pd;
                    }
                    const double v = fn(z);
                    sum += v;
                    sq += v * v;
                    ++count;
                }
            }
        }
        if (second_moment) {
            *second_moment = sq / static_cast<double>(count);
        }
        return sum / static_cast<double>(count);
    };

    if (model.intensity == 0.0) {
        return {0.0, 0.0};
    }
    if (mode == ZIntegration::quadrature) {
        const double fine = grid_mean(m, nullptr, nullptr);
        const double coarse = m >= 2 ? grid_mean(m / 2, nullptr, nullptr) : fine;
        return {scale * fine, scale * std::abs(fine - coarse)};
    }
    Engine eng = stream.engine();
    double second = 0.0;
    const double mean = grid_mean(m, &eng, &second);
    const double cells = std::pow(static_cast<double>(m), static_cast<double>(dim));
    const double var = std::max(0.0, second - mean * mean);
    return {scale * mean, scale * std::sqrt(var / cells)};
}

/// <DF, -DL^{-1}F>_{L^2(mu)} for a finite-chaos functional. Exact when F is in
/// the first chaos with a known int g_1^2 dmu; otherwise integrated over z.
inline ZIntegral carre_du_champ(const FiniteChaosFunctional& f, const PointConfiguration& omega,
                                std::size_t n_z, const RngStream& stream,
                                ZIntegration mode = ZIntegration::stratified)
{
    if (!f.second) {
        if (!f.first) {
            return {0.0, 0.0};
        }
        if (f.first->square_integral) {
            return {*f.first->square_integral, 0.0};
        }
    }
    return integrate_z(f.model, n_z, stream, mode, [&](const Point& z) {
        return diff_chaos(f, omega, z) * neg_DLinv(f, omega, z);
    });
}

inline ZIntegral carre_du_champ(const Functional& f, const PointConfiguration& omega,
                                std::size_t n_z, const RngStream& stream,
                                ZIntegration mode = ZIntegration::stratified)
{
    if (!f.chaos) {
        throw std::domain_error("carre_du_champ: functional has no chaos structure");
    }
    return carre_du_champ(*f.chaos, omega, n_z, stream, mode);
}

}  // namespace ppstein
