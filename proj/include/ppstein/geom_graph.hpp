#pragma once

// Stationary random geometric graphs: connection rules, a grid index for
// fixed-radius neighbour queries, occupation coefficients and Campbell means.

#include "ppstein/errors.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ppstein {

inline double squared_norm(const Point& u, std::size_t dim)
{
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        s += u[i] * u[i];
    }
    return s;
}

inline Point difference(const Point& x, const Point& y)
{
    return {x[0] - y[0], x[1] - y[1], x[2] - y[2]};
}

/// Volume of the unit ball in R^d.
inline double unit_ball_volume(std::size_t d)
{
    return std::pow(std::numbers::pi, 0.5 * static_cast<double>(d)) /
           std::tgamma(0.5 * static_cast<double>(d) + 1.0);
}

/// Punctured ball 0 < |u| < delta.
struct GilbertRule {
    double delta = 0.0;
};

/// Open shell inner < |u| < outer.
struct AnnulusRule {
    double inner = 0.0;
    double outer = 0.0;
};

/// User-supplied indicator on difference vectors. `radius` must bound the
/// support: indicator(u) implies |u| < radius.
struct CustomRule {
    std::function<bool(const Point&)> indicator;
    double radius = 0.0;
    std::string name = "custom";
};

/// Symmetric connection set H^ in R^d given as an indicator on x - y. The
/// origin is never connected.
class ConnectionRule {
  public:
    using Kind = std::variant<GilbertRule, AnnulusRule, CustomRule>;

    static ConnectionRule gilbert(std::size_t dim, double delta)
    {
        if (!(delta > 0.0) || !std::isfinite(delta)) {
            throw std::domain_error("gilbert rule: delta must be positive");
        }
        return ConnectionRule(dim, GilbertRule{delta});
    }

    static ConnectionRule annulus(std::size_t dim, double inner, double outer)
    {
        if (!(inner >= 0.0) || !(outer > inner) || !std::isfinite(outer)) {
            throw std::domain_error("annulus rule: need 0 <= inner < outer");
        }
        return ConnectionRule(dim, AnnulusRule{inner, outer});
    }

    static ConnectionRule custom(std::size_t dim, std::function<bool(const Point&)> indicator,
                                 double radius, std::string name = "custom")
    {
        if (!indicator || !(radius > 0.0) || !std::isfinite(radius)) {
            throw std::domain_error("custom rule: indicator and a positive radius bound required");
        }
        return ConnectionRule(dim, CustomRule{std::move(indicator), radius, std::move(name)});
    }

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] const Kind& kind() const { return kind_; }

    [[nodiscard]] const GilbertRule* as_gilbert() const { return std::get_if<GilbertRule>(&kind_); }
    [[nodiscard]] const AnnulusRule* as_annulus() const { return std::get_if<AnnulusRule>(&kind_); }

    /// Interaction radius: connected differences satisfy |u| < radius().
    [[nodiscard]] double radius() const
    {
        if (const auto* g = as_gilbert()) {
            return g->delta;
        }
        if (const auto* a = as_annulus()) {
            return a->outer;
        }
        return std::get<CustomRule>(kind_).radius;
    }

    /// Indicator of u in H^. Strict inequalities throughout.
    [[nodiscard]] bool contains(const Point& u) const
    {
        const double r2 = squared_norm(u, dim_);
        if (r2 == 0.0) {
            return false;
        }
        if (const auto* g = as_gilbert()) {
            return r2 < g->delta * g->delta;
        }
        if (const auto* a = as_annulus()) {
            return r2 > a->inner * a->inner && r2 < a->outer * a->outer;
        }
        return std::get<CustomRule>(kind_).indicator(u);
    }

    [[nodiscard]] bool connects(const Point& x, const Point& y) const
    {
        return contains(difference(x, y));
    }

    /// For d = 1 Gilbert and annulus rules: H^ as a finite union of open
    /// intervals (the origin, a null set, is not removed).
    [[nodiscard]] std::optional<std::vector<std::pair<double, double>>> intervals_1d() const
    {
        if (dim_ != 1) {
            return std::nullopt;
        }
        if (const auto* g = as_gilbert()) {
            return std::vector<std::pair<double, double>>{{-g->delta, g->delta}};
        }
        if (const auto* a = as_annulus()) {
            if (a->inner == 0.0) {
                return std::vector<std::pair<double, double>>{{-a->outer, a->outer}};
            }
            return std::vector<std::pair<double, double>>{{-a->outer, -a->inner},
                                                          {a->inner, a->outer}};
        }
        return std::nullopt;
    }

    [[nodiscard]] std::string describe() const
    {
        if (const auto* g = as_gilbert()) {
            return "gilbert(delta=" + std::to_string(g->delta) + ")";
        }
        if (const auto* a = as_annulus()) {
            return "annulus(" + std::to_string(a->inner) + "," + std::to_string(a->outer) + ")";
        }
        return std::get<CustomRule>(kind_).name;
    }

  private:
    ConnectionRule(std::size_t dim, Kind kind) : dim_(dim), kind_(std::move(kind))
    {
        if (dim_ < 1 || dim_ > kMaxDim) {
            throw std::domain_error("ConnectionRule: dimension must be 1, 2 or 3");
        }
    }

    std::size_t dim_ = 1;
    Kind kind_;
};

/// H^_lambda = lambda^{-1/d} G^: indicator(u) = base(lambda^{1/d} u).
inline ConnectionRule scaled_rule(const ConnectionRule& base, double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::domain_error("scaled_rule: lambda must be positive");
    }
    const double shrink = std::pow(lambda, -1.0 / static_cast<double>(base.dim()));
    if (const auto* g = base.as_gilbert()) {
        return ConnectionRule::gilbert(base.dim(), shrink * g->delta);
    }
    if (const auto* a = base.as_annulus()) {
        return ConnectionRule::annulus(base.dim(), shrink * a->inner, shrink * a->outer);
    }
    const auto& c = std::get<CustomRule>(base.kind());
    auto indicator = [inner = c.indicator, shrink](const Point& u) {
        return inner(Point{u[0] / shrink, u[1] / shrink, u[2] / shrink});
    };
    return ConnectionRule::custom(base.dim(), indicator, shrink * c.radius, c.name + "(scaled)");
}

/// Symmetry (H^ = -H^) and no-loop check on random difference vectors in the
/// rule's bounding cube.
inline bool rule_is_symmetric(const ConnectionRule& rule, std::size_t samples, Engine& eng)
{
    if (rule.contains(Point{0.0, 0.0, 0.0})) {
        return false;
    }
    const double r = rule.radius();
    for (std::size_t s = 0; s < samples; ++s) {
        Point u{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < rule.dim(); ++i) {
            u[i] = uniform(eng, -r, r);
        }
        const Point minus_u{-u[0], -u[1], -u[2]};
        if (rule.contains(u) != rule.contains(minus_u)) {
            return false;
        }
    }
    return true;
}

/// Uniform grid over the window with cells at least `cell_size` wide. Points
/// are bucketed by sorting on their linear cell key, so a query visits the
/// 3^d cells around the query point.
class GridIndex {
  public:
    GridIndex(const PointConfiguration& omega, double cell_size) : omega_(&omega)
    {
        const Window& w = omega.window();
        stride_ = {0, 0, 0};
        std::uint64_t stride = 1;
        for (std::size_t i = 0; i < w.dim; ++i) {
            const double extent = 2.0 * w.half_width[i];
            double n = cell_size > 0.0 ? std::floor(extent / cell_size) : 1.0;
            n = std::clamp(n, 1.0, static_cast<double>(1u << 20));
            cells_[i] = static_cast<std::int64_t>(n);
            width_[i] = extent / n;
            stride_[i] = stride;
            stride *= static_cast<std::uint64_t>(cells_[i]);
        }
        entries_.reserve(omega.size());
        for (std::size_t j = 0; j < omega.size(); ++j) {
            entries_.emplace_back(key_of(cell_of(omega[j])), static_cast<std::uint32_t>(j));
        }
        std::sort(entries_.begin(), entries_.end());
    }

    /// Calls fn(j) for every point j in the cells adjacent to z.
    template <class Fn>
    void for_each_near(const Point& z, Fn&& fn) const
    {
        const auto centre = cell_of(z);
        const std::size_t dim = omega_->dim();
        std::array<std::int64_t, kMaxDim> offset{-1, -1, -1};
        for (std::size_t i = dim; i < kMaxDim; ++i) {
            offset[i] = 0;
        }
        for (;;) {
            std::array<std::int64_t, kMaxDim> cell = centre;
            bool inside = true;
            for (std::size_t i = 0; i < dim; ++i) {
                cell[i] += offset[i];
                inside = inside && cell[i] >= 0 && cell[i] < cells_[i];
            }
            if (inside) {
                const std::uint64_t key = key_of(cell);
                auto it = std::lower_bound(entries_.begin(), entries_.end(),
                                           std::pair<std::uint64_t, std::uint32_t>{key, 0});
                for (; it != entries_.end() && it->first == key; ++it) {
                    fn(static_cast<std::size_t>(it->second));
                }
            }
            std::size_t i = 0;
            while (i < dim && offset[i] == 1) {
                offset[i] = -1;
                ++i;
            }
            if (i == dim) {
                break;
            }
            ++offset[i];
        }
    }

    [[nodiscard]] const PointConfiguration& configuration() const { return *omega_; }

  private:
    [[nodiscard]] std::array<std::int64_t, kMaxDim> cell_of(const Point& p) const
    {
        std::array<std::int64_t, kMaxDim> c{0, 0, 0};
        const Window& w = omega_->window();
        for (std::size_t i = 0; i < w.dim; ++i) {
            const auto k = static_cast<std::int64_t>(std::floor((p[i] + w.half_width[i]) / width_[i]));
            c[i] = std::clamp<std::int64_t>(k, 0, cells_[i] - 1);
        }
        return c;
    }

    [[nodiscard]] std::uint64_t key_of(const std::array<std::int64_t, kMaxDim>& c) const
    {
        std::uint64_t key = 0;
        for (std::size_t i = 0; i < omega_->dim(); ++i) {
            key += static_cast<std::uint64_t>(c[i]) * stride_[i];
        }
        return key;
    }

    const PointConfiguration* omega_;
    std::array<std::int64_t, kMaxDim> cells_{1, 1, 1};
    std::array<double, kMaxDim> width_{1.0, 1.0, 1.0};
    std::array<std::uint64_t, kMaxDim> stride_{};
    std::vector<std::pair<std::uint64_t, std::uint32_t>> entries_;
};

/// #{y in omega : z - y in H^}, using a prebuilt index.
inline std::size_t degree(const GridIndex& index, const ConnectionRule& rule, const Point& z)
{
    std::size_t n = 0;
    const auto& omega = index.configuration();
    index.for_each_near(z, [&](std::size_t j) { n += rule.connects(z, omega[j]) ? 1 : 0; });
    return n;
}

inline std::size_t degree(const PointConfiguration& omega, const ConnectionRule& rule,
                          const Point& z)
{
    const GridIndex index(omega, rule.radius());
    return degree(index, rule, z);
}

/// Number of unordered connected pairs.
inline std::uint64_t edge_count(const PointConfiguration& omega, const ConnectionRule& rule)
{
    const GridIndex index(omega, rule.radius());
    std::uint64_t edges = 0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        index.for_each_near(omega[i], [&](std::size_t j) {
            if (j > i && rule.connects(omega[i], omega[j])) {
                ++edges;
            }
        });
    }
    return edges;
}

namespace detail {

// Area of the disc |u| < r intersected with the half-plane {u_1 >= t}.
inline double disc_segment(double r, double t)
{
    if (t >= r) {
        return 0.0;
    }
    if (t <= -r) {
        return std::numbers::pi * r * r;
    }
    return r * r * std::acos(t / r) - t * std::sqrt(r * r - t * t);
}

// Area of the disc |u| < r intersected with {u_1 >= a, u_2 >= b}.
inline double disc_quadrant(double r, double a, double b)
{
    if (a < 0.0) {
        return disc_segment(r, b) - disc_quadrant(r, -a, b);
    }
    if (b < 0.0) {
        return disc_segment(r, a) - disc_quadrant(r, a, -b);
    }
    if (a * a + b * b >= r * r) {
        return 0.0;
    }
    const double s = std::sqrt(r * r - b * b);
    auto primitive = [r](double u) {
        const double x = std::clamp(u / r, -1.0, 1.0);
        return 0.5 * (u * std::sqrt(std::max(0.0, r * r - u * u)) + r * r * std::asin(x));
    };
    return primitive(s) - primitive(a) - b * (s - a);
}

}  // namespace detail

/// Area of the disc of radius r centred at c intersected with the rectangle
/// [lo_1, hi_1] x [lo_2, hi_2].
inline double disc_rectangle_area(const Point& c, double r, const Point& lo, const Point& hi)
{
    const double x0 = lo[0] - c[0];
    const double x1 = hi[0] - c[0];
    const double y0 = lo[1] - c[1];
    const double y1 = hi[1] - c[1];
    const double area = detail::disc_quadrant(r, x0, y0) - detail::disc_quadrant(r, x1, y0) -
                        detail::disc_quadrant(r, x0, y1) + detail::disc_quadrant(r, x1, y1);
    return std::max(0.0, area);
}

namespace detail {

// Volume of the ball |y - c| < r inside the box [lo, hi] in R^3: slices along
// the last axis are disc-rectangle areas, integrated by Gauss-Legendre on
// panels split where a slice circle passes a box edge or corner. The slice
// area has (t - t*)^{3/2} terms at the cuts; t = a + (b - a)(3u^2 - 2u^3)
// smooths them out.
inline double ball_box_volume(const Point& c, double r, const Point& lo, const Point& hi)
{
    const double t0 = std::max(-r, lo[2] - c[2]);
    const double t1 = std::min(r, hi[2] - c[2]);
    if (!(t1 > t0)) {
        return 0.0;
    }
    const std::array<double, 2> ex{lo[0] - c[0], hi[0] - c[0]};
    const std::array<double, 2> ey{lo[1] - c[1], hi[1] - c[1]};
    std::vector<double> cuts{t0, t1};
    auto add = [&](double e2) {
        if (e2 < r * r) {
            const double t = std::sqrt(r * r - e2);
            for (double v : {-t, t}) {
                if (v > t0 && v < t1) {
                    cuts.push_back(v);
                }
            }
        }
    };
    for (double a : ex) {
        add(a * a);
        for (double b : ey) {
            add(a * a + b * b);
        }
    }
    for (double b : ey) {
        add(b * b);
    }
    std::sort(cuts.begin(), cuts.end());
    static const GaussRule g = gauss_legendre(20);
    double vol = 0.0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double len = cuts[s + 1] - cuts[s];
        for (std::size_t k = 0; k < g.nodes.size(); ++k) {
            const double u = 0.5 * (g.nodes[k] + 1.0);
            const double t = cuts[s] + len * u * u * (3.0 - 2.0 * u);
            const double jac = 0.5 * g.weights[k] * len * 6.0 * u * (1.0 - u);
            const double rs = std::sqrt(std::max(0.0, r * r - t * t));
            if (rs > 0.0) {
                vol += jac * disc_rectangle_area(c, rs, lo, hi);
            }
        }
    }
    return vol;
}

}  // namespace detail

/// l({y in W : x - y in H^}), the volume of the section of H at x.
/// Exact for Gilbert/annulus rules when d <= 2 or when the shell around x fits
/// in the window; slice integration for d = 3 balls and shells cut by the
/// window; midpoint quadrature with `resolution` cells per axis otherwise.
inline double section_volume(const ConnectionRule& rule, const Window& window, const Point& x,
                             std::size_t resolution = 64)
{
    const std::size_t dim = rule.dim();
    if (auto intervals = rule.intervals_1d()) {
        const double h = window.half_width[0];
        double len = 0.0;
        for (const auto& [lo, hi] : *intervals) {
            len += std::max(0.0, std::min(x[0] + hi, h) - std::max(x[0] + lo, -h));
        }
        return len;
    }
    if (dim == 2 && (rule.as_gilbert() || rule.as_annulus())) {
        const Point lo{-window.half_width[0], -window.half_width[1], 0.0};
        const Point hi{window.half_width[0], window.half_width[1], 0.0};
        if (const auto* g = rule.as_gilbert()) {
            return disc_rectangle_area(x, g->delta, lo, hi);
        }
        const auto* a = rule.as_annulus();
        return std::max(0.0, disc_rectangle_area(x, a->outer, lo, hi) -
                                 (a->inner > 0.0 ? disc_rectangle_area(x, a->inner, lo, hi) : 0.0));
    }
    const double r = rule.radius();
    bool interior = true;
    for (std::size_t i = 0; i < dim; ++i) {
        interior = interior && std::abs(x[i]) + r <= window.half_width[i];
    }
    if (interior && (rule.as_gilbert() || rule.as_annulus())) {
        const double kappa = unit_ball_volume(dim);
        const auto dd = static_cast<double>(dim);
        if (const auto* g = rule.as_gilbert()) {
            return kappa * std::pow(g->delta, dd);
        }
        const auto* a = rule.as_annulus();
        return kappa * (std::pow(a->outer, dd) - std::pow(a->inner, dd));
    }
    if (dim == 3 && (rule.as_gilbert() || rule.as_annulus())) {
        const Point lo{-window.half_width[0], -window.half_width[1], -window.half_width[2]};
        const Point hi{window.half_width[0], window.half_width[1], window.half_width[2]};
        if (const auto* g = rule.as_gilbert()) {
            return detail::ball_box_volume(x, g->delta, lo, hi);
        }
        const auto* a = rule.as_annulus();
        return std::max(0.0, detail::ball_box_volume(x, a->outer, lo, hi) -
                                 (a->inner > 0.0 ? detail::ball_box_volume(x, a->inner, lo, hi) : 0.0));
    }
    Point lo{0.0, 0.0, 0.0};
    Point hi{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
        lo[i] = std::max(x[i] - r, -window.half_width[i]);
        hi[i] = std::min(x[i] + r, window.half_width[i]);
        if (!(hi[i] > lo[i])) {
            return 0.0;
        }
    }
    return midpoint_integral(dim, lo, hi, resolution,
                             [&](const Point& y) { return rule.connects(x, y) ? 1.0 : 0.0; });
}

/// Positions where x -> section_volume(rule, window, x) has kinks along an
/// axis: a boundary sphere of H^ + x touching a window face.
inline std::vector<double> section_kinks(const ConnectionRule& rule, const Window& window)
{
    std::vector<double> radii{rule.radius()};
    if (const auto* a = rule.as_annulus(); a && a->inner > 0.0) {
        radii.push_back(a->inner);
    }
    std::vector<double> kinks;
    for (std::size_t i = 0; i < window.dim; ++i) {
        for (double r : radii) {
            kinks.push_back(window.half_width[i] - r);
            kinks.push_back(r - window.half_width[i]);
        }
    }
    return kinks;
}

/// Occupation coefficients psi = l(H^ n W), psi_hat = l(H^ n W^), psi_check =
/// l(H^ n W_check) with W = [-1/2,1/2]^d, W^ = [-1,1]^d, W_check = [-1/4,1/4]^d.
struct OccupationReport {
    double psi = 0.0;
    double psi_hat = 0.0;
    double psi_check = 0.0;
    double ratio = 0.0;                  // psi_hat / psi_check
    std::optional<double> closed_form;   // kappa_d delta^d for Gilbert rules with delta <= 1/4
};

/// Midpoint quadrature on a grid whose cell boundaries include +-1/4, +-1/2
/// and +-1, so the three nested estimates are ordered by construction. In
/// d = 1 the rule's interval endpoints are boundaries too, which makes it exact.
inline OccupationReport occupation(const ConnectionRule& rule, std::size_t resolution)
{
    if (resolution < 64) {
        throw std::domain_error("occupation: resolution must be at least 64");
    }
    const std::size_t dim = rule.dim();
    const double reach = std::min(rule.radius(), 1.0);

    // Per-axis cells: breakpoints of the three windows inside [-reach, reach].
    std::vector<double> marks{-reach, reach};
    std::vector<double> breaks{-1.0, -0.5, -0.25, 0.25, 0.5, 1.0};
    if (auto intervals = rule.intervals_1d()) {
        for (const auto& [lo, hi] : *intervals) {
            breaks.push_back(lo);
            breaks.push_back(hi);
        }
    }
    for (double b : breaks) {
        if (b > -reach && b < reach) {
            marks.push_back(b);
        }
    }
    std::sort(marks.begin(), marks.end());
    std::vector<double> centres;
    std::vector<double> widths;
    for (std::size_t s = 0; s + 1 < marks.size(); ++s) {
        const double len = marks[s + 1] - marks[s];
        const auto n = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(resolution) * len /
                                                      (2.0 * reach))));
        for (std::size_t k = 0; k < n; ++k) {
            centres.push_back(marks[s] + (static_cast<double>(k) + 0.5) * len / static_cast<double>(n));
            widths.push_back(len / static_cast<double>(n));
        }
    }
    const std::size_t m = centres.size();
    const std::size_t n2 = dim >= 2 ? m : 1;
    const std::size_t n3 = dim >= 3 ? m : 1;
    OccupationReport rep;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < n2; ++b) {
            for (std::size_t c = 0; c < n3; ++c) {
                const Point u{centres[a], dim >= 2 ? centres[b] : 0.0, dim >= 3 ? centres[c] : 0.0};
                if (!rule.contains(u)) {
                    continue;
                }
                const double vol = widths[a] * (dim >= 2 ? widths[b] : 1.0) * (dim >= 3 ? widths[c] : 1.0);
                double linf = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    linf = std::max(linf, std::abs(u[i]));
                }
                if (linf <= 1.0) {
                    rep.psi_hat += vol;
                }
                if (linf <= 0.5) {
                    rep.psi += vol;
                }
                if (linf <= 0.25) {
                    rep.psi_check += vol;
                }
            }
        }
    }
    rep.ratio = rep.psi_check > 0.0 ? rep.psi_hat / rep.psi_check
                                    : std::numeric_limits<double>::infinity();
    if (const auto* g = rule.as_gilbert(); g && g->delta <= 0.25) {
        rep.closed_form = unit_ball_volume(dim) * std::pow(g->delta, static_cast<double>(dim));
    }
    return rep;
}

/// psi = l(H^ n W) alone: exact for d = 1 interval rules and for balls and
/// shells inside W, quadrature otherwise.
inline double occupation_psi(const ConnectionRule& rule, std::size_t resolution = 256)
{
    if (auto intervals = rule.intervals_1d()) {
        double len = 0.0;
        for (const auto& [lo, hi] : *intervals) {
            len += std::max(0.0, std::min(hi, 0.5) - std::max(lo, -0.5));
        }
        return len;
    }
    const auto dd = static_cast<double>(rule.dim());
    if (rule.radius() <= 0.5) {
        if (const auto* g = rule.as_gilbert()) {
            return unit_ball_volume(rule.dim()) * std::pow(g->delta, dd);
        }
        if (const auto* a = rule.as_annulus()) {
            return unit_ball_volume(rule.dim()) * (std::pow(a->outer, dd) - std::pow(a->inner, dd));
        }
    }
    return occupation(rule, resolution).psi;
}

/// E[F*] = (lambda^2 / 2) l^2(H n (W x W)) for Gilbert rules with delta <= 1
/// on the unit window, via the integral of prod_i (1 - |u_i|) over the ball.
inline std::optional<double> campbell_mean_closed_form(const ConnectionRule& rule, double lambda)
{
    const auto* g = rule.as_gilbert();
    if (!g || g->delta > 1.0) {
        return std::nullopt;
    }
    const double d = g->delta;
    double pair_measure = 0.0;
    switch (rule.dim()) {
        case 1:
            pair_measure = 2.0 * d - d * d;
            break;
        case 2:
            pair_measure = d * d * (std::numbers::pi - 8.0 * d / 3.0 + d * d / 2.0);
            break;
        default:
            pair_measure = 4.0 * std::numbers::pi * d * d * d / 3.0 -
                           1.5 * std::numbers::pi * std::pow(d, 4) + 1.6 * std::pow(d, 5) -
                           std::pow(d, 6) / 6.0;
            break;
    }
    return 0.5 * lambda * lambda * pair_measure;
}

/// E[F*] = (lambda^2/2) int_W int_W 1_H(x, y) dx dy, evaluated as the integral
/// of 1_H^(u) prod_i (2h_i - |u_i|)_+ over the difference variable u by the
/// midpoint rule with `resolution` cells per axis.
inline double campbell_mean(const ConnectionRule& rule, double lambda, std::size_t resolution,
                            const Window& window)
{
    if (!(lambda >= 0.0)) {
        throw std::domain_error("campbell_mean: lambda must be nonnegative");
    }
    if (lambda == 0.0) {
        return 0.0;
    }
    const std::size_t dim = rule.dim();
    Point lo{0.0, 0.0, 0.0};
    Point hi{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
        const double reach = std::min(rule.radius(), 2.0 * window.half_width[i]);
        lo[i] = -reach;
        hi[i] = reach;
    }
    const double pair_measure = midpoint_integral(dim, lo, hi, resolution, [&](const Point& u) {
        if (!rule.contains(u)) {
            return 0.0;
        }
        double w = 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            w *= std::max(0.0, 2.0 * window.half_width[i] - std::abs(u[i]));
        }
        return w;
    });
    return 0.5 * lambda * lambda * pair_measure;
}

inline double campbell_mean(const ConnectionRule& rule, double lambda, std::size_t resolution)
{
    return campbell_mean(rule, lambda, resolution, Window::unit(rule.dim()));
}

/// Closed form when available, quadrature otherwise.
inline double expected_edge_count(const ConnectionRule& rule, double lambda,
                                  std::size_t resolution = 512)
{
    if (auto exact = campbell_mean_closed_form(rule, lambda)) {
        return *exact;
    }
    return campbell_mean(rule, lambda, resolution);
}

/// Gilbert radius delta <= 1/4 for which E[F*] equals target_mean, by bisection.
inline double calibrate_delta(std::size_t dim, double lambda, double target_mean)
{
    if (!(lambda > 0.0) || !(target_mean > 0.0)) {
        throw CalibrationError("calibrate_delta: lambda and target must be positive");
    }
    auto mean_at = [&](double delta) {
        return *campbell_mean_closed_form(ConnectionRule::gilbert(dim, delta), lambda);
    };
    double lo = 0.0;
    double hi = 0.25;
    if (mean_at(hi) < target_mean) {
        throw CalibrationError("calibrate_delta: target mean " + std::to_string(target_mean) +
                               " needs delta > 1/4 at lambda = " + std::to_string(lambda));
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (mean_at(mid) < target_mean) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double lo_err = std::abs(mean_at(lo) - target_mean);
    const double hi_err = std::abs(mean_at(hi) - target_mean);
    return (lo > 0.0 && lo_err < hi_err) ? lo : hi;
}

}  // namespace ppstein
