#pragma once

// Homogeneous Poisson point processes on centred rectangular windows.

#include "ppstein/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppstein {

inline constexpr std::size_t kMaxDim = 3;

/// A point of R^d, d <= 3; coordinates at index >= d are zero.
using Point = std::array<double, kMaxDim>;

/// Centred box prod_i [-h_i, h_i]; the default is W = [-1/2, 1/2]^d.
struct Window {
    std::size_t dim = 1;
    Point half_width{0.5, 0.5, 0.5};

    static Window unit(std::size_t d) { return cube(d, 0.5); }

    static Window cube(std::size_t d, double half)
    {
        Window w;
        w.dim = d;
        w.half_width = {0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < d && i < kMaxDim; ++i) {
            w.half_width[i] = half;
        }
        w.validate();
        return w;
    }

    void validate() const
    {
        if (dim < 1 || dim > kMaxDim) {
            throw std::domain_error("Window: dimension must be 1, 2 or 3");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            if (!(half_width[i] > 0.0) || !std::isfinite(half_width[i])) {
                throw std::domain_error("Window: half widths must be positive");
            }
        }
    }

    [[nodiscard]] double volume() const
    {
        double v = 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            v *= 2.0 * half_width[i];
        }
        return v;
    }

    [[nodiscard]] bool contains(const Point& p) const
    {
        for (std::size_t i = 0; i < dim; ++i) {
            if (!(std::abs(p[i]) <= half_width[i])) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const Window&, const Window&) = default;
};

/// Axis-aligned half-open box prod_i [lo_i, hi_i).
struct Box {
    std::size_t dim = 1;
    Point lo{};
    Point hi{};

    [[nodiscard]] double volume() const
    {
        double v = 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            v *= std::max(0.0, hi[i] - lo[i]);
        }
        return v;
    }

    [[nodiscard]] bool contains(const Point& p) const
    {
        for (std::size_t i = 0; i < dim; ++i) {
            if (!(p[i] >= lo[i] && p[i] < hi[i])) {
                return false;
            }
        }
        return true;
    }

    static Box of(const Window& w)
    {
        Box b;
        b.dim = w.dim;
        for (std::size_t i = 0; i < w.dim; ++i) {
            b.lo[i] = -w.half_width[i];
            b.hi[i] = std::nextafter(w.half_width[i], 2.0 * w.half_width[i] + 1.0);
        }
        return b;
    }
};

/// Finite point configuration in a window. Value type: operations that add
/// points return a new configuration.
class PointConfiguration {
  public:
    PointConfiguration() = default;

    explicit PointConfiguration(Window window, std::vector<Point> points = {},
                                std::optional<RngStream> provenance = std::nullopt)
        : window_(window), points_(std::move(points)), provenance_(provenance)
    {
        window_.validate();
        for (const auto& p : points_) {
            if (!window_.contains(p)) {
                throw std::domain_error("PointConfiguration: point outside the window");
            }
        }
    }

    [[nodiscard]] const Window& window() const { return window_; }
    [[nodiscard]] std::size_t dim() const { return window_.dim; }
    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] bool empty() const { return points_.empty(); }
    [[nodiscard]] std::span<const Point> points() const { return points_; }
    [[nodiscard]] const Point& operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] const std::optional<RngStream>& provenance() const { return provenance_; }

    friend bool operator==(const PointConfiguration&, const PointConfiguration&) = default;

  private:
    Window window_{};
    std::vector<Point> points_;
    std::optional<RngStream> provenance_;
};

/// Poisson process with intensity `intensity` (points per unit volume) on the
/// window: N ~ Po(intensity * vol), then N iid uniform points.
inline PointConfiguration sample_process(const Window& window, double intensity,
                                         const RngStream& stream)
{
    window.validate();
    if (!(intensity >= 0.0) || !std::isfinite(intensity)) {
        throw std::domain_error("sample_process: intensity must be finite and nonnegative");
    }
    Engine eng = stream.engine();
    const std::uint64_t n = sample_poisson_count(eng, intensity * window.volume());
    std::vector<Point> pts(n, Point{0.0, 0.0, 0.0});
    for (auto& p : pts) {
        for (std::size_t i = 0; i < window.dim; ++i) {
            p[i] = uniform(eng, -window.half_width[i], window.half_width[i]);
        }
    }
    return PointConfiguration(window, std::move(pts), stream);
}

/// omega + delta_z.
inline PointConfiguration add_point(const PointConfiguration& omega, const Point& z)
{
    if (!omega.window().contains(z)) {
        throw std::domain_error("add_point: point outside the window");
    }
    std::vector<Point> pts(omega.points().begin(), omega.points().end());
    pts.push_back(z);
    return PointConfiguration(omega.window(), std::move(pts), omega.provenance());
}

inline std::size_t count_in(const PointConfiguration& omega, const Box& box)
{
    std::size_t n = 0;
    for (const auto& p : omega.points()) {
        n += box.contains(p) ? 1 : 0;
    }
    return n;
}

/// Text dump: a header `# d=<d> lambda=<l> seed=<s> stream=<i>` followed by one
/// point per line. Coordinates use the shortest round-trip decimal form.
inline void write_configuration(std::ostream& os, const PointConfiguration& omega,
                                double intensity)
{
    const RngStream src = omega.provenance().value_or(RngStream{});
    os << fmt::format("# d={} lambda={} seed={} stream={}\n", omega.dim(), intensity,
                      src.master_seed, src.stream_id);
    for (const auto& p : omega.points()) {
        for (std::size_t i = 0; i < omega.dim(); ++i) {
            os << (i == 0 ? "" : " ") << fmt::format("{}", p[i]);
        }
        os << '\n';
    }
}

struct ConfigurationDump {
    PointConfiguration configuration;
    double intensity = 0.0;
};

/// Parses write_configuration output into the unit window of the dumped dimension.
inline ConfigurationDump read_configuration(std::istream& is)
{
    std::string header;
    if (!std::getline(is, header) || header.rfind("# d=", 0) != 0) {
        throw std::runtime_error("read_configuration: missing header");
    }
    std::size_t d = 0;
    double intensity = 0.0;
    unsigned long long seed = 0;
    unsigned long long stream = 0;
    if (std::sscanf(header.c_str(), "# d=%zu lambda=%lf seed=%llu stream=%llu", &d, &intensity,
                    &seed, &stream) != 4) {
        throw std::runtime_error("read_configuration: malformed header");
    }
    const Window window = Window::unit(d);
    std::vector<Point> pts;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        Point p{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < d; ++i) {
            if (!(ls >> p[i])) {
                throw std::runtime_error("read_configuration: malformed point line");
            }
        }
        pts.push_back(p);
    }
    return {PointConfiguration(window, std::move(pts), RngStream{seed, stream}), intensity};
}

}  // namespace ppstein
