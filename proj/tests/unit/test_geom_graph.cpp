#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/rng.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

using namespace ppstein;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::size_t brute_degree(const PointConfiguration& omega, const ConnectionRule& rule, const Point& z)
{
    std::size_t n = 0;
    for (const auto& y : omega.points()) {
        double s = 0.0;
        for (std::size_t i = 0; i < omega.dim(); ++i) {
            s += (z[i] - y[i]) * (z[i] - y[i]);
        }
        const double r = std::sqrt(s);
        if (const auto* g = rule.as_gilbert()) {
            n += (r > 0.0 && r < g->delta) ? 1 : 0;
        } else if (const auto* a = rule.as_annulus()) {
            n += (r > a->inner && r < a->outer) ? 1 : 0;
        }
    }
    return n;
}

std::uint64_t brute_edges(const PointConfiguration& omega, const ConnectionRule& rule)
{
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        for (std::size_t j = i + 1; j < omega.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < omega.dim(); ++k) {
                s += (omega[i][k] - omega[j][k]) * (omega[i][k] - omega[j][k]);
            }
            const double r = std::sqrt(s);
            if (const auto* g = rule.as_gilbert()) {
                n += (r > 0.0 && r < g->delta) ? 1 : 0;
            } else if (const auto* a = rule.as_annulus()) {
                n += (r > a->inner && r < a->outer) ? 1 : 0;
            }
        }
    }
    return n;
}

PointConfiguration line(std::vector<double> xs)
{
    std::vector<Point> pts;
    for (double x : xs) {
        pts.push_back({x, 0.0, 0.0});
    }
    return PointConfiguration(Window::unit(1), pts);
}

}  // namespace

TEST_CASE("connection rules", "[rule]")
{
    const auto g = ConnectionRule::gilbert(2, 0.1);
    CHECK_FALSE(g.contains({0.0, 0.0, 0.0}));
    CHECK(g.contains({0.05, 0.05, 0.0}));
    CHECK_FALSE(g.contains({0.1, 0.0, 0.0}));
    const auto a = ConnectionRule::annulus(1, 0.3, 0.6);
    CHECK_FALSE(a.contains({0.3, 0.0, 0.0}));
    CHECK(a.contains({-0.4, 0.0, 0.0}));
    CHECK(a.radius() == 0.6);
    CHECK_THROWS_AS(ConnectionRule::gilbert(1, 0.0), std::domain_error);
    CHECK_THROWS_AS(ConnectionRule::annulus(1, 0.5, 0.4), std::domain_error);
    CHECK_THROWS_AS(ConnectionRule::custom(1, nullptr, 1.0), std::domain_error);

    Engine eng = RngStream{1, 1}.engine();
    const auto box_rule = ConnectionRule::custom(
        2, [](const Point& u) { return (u[0] != 0.0 || u[1] != 0.0) && std::abs(u[0]) < 0.1 && std::abs(u[1]) < 0.05; },
        0.2, "box");
    for (const auto& r : {g, a, ConnectionRule::gilbert(3, 0.2), ConnectionRule::annulus(2, 0.05, 0.1), box_rule}) {
        CHECK(rule_is_symmetric(r, 10'000, eng));
    }
    const auto lopsided = ConnectionRule::custom(1, [](const Point& u) { return u[0] > 0.0 && u[0] < 0.1; }, 0.1);
    CHECK_FALSE(rule_is_symmetric(lopsided, 10'000, eng));
    const auto loop = ConnectionRule::custom(1, [](const Point& u) { return std::abs(u[0]) < 0.1; }, 0.1);
    CHECK_FALSE(loop.contains({0.0, 0.0, 0.0}));
    CHECK(rule_is_symmetric(loop, 10, eng));
}

TEST_CASE("scaled_rule", "[rule]")
{
    const auto g = ConnectionRule::gilbert(2, 0.2);
    CHECK(scaled_rule(g, 1.0).as_gilbert()->delta == 0.2);
    CHECK_THAT(scaled_rule(g, 4.0).as_gilbert()->delta, WithinRel(0.1, 1e-15));
    CHECK_THAT(scaled_rule(ConnectionRule::gilbert(3, 0.2), 8.0).as_gilbert()->delta, WithinRel(0.1, 1e-15));
    CHECK_THROWS_AS(scaled_rule(g, 0.0), std::domain_error);

    // A custom rule goes through the generic path.
    const auto diamond = ConnectionRule::custom(
        2, [](const Point& u) { const double s = std::abs(u[0]) + std::abs(u[1]); return s > 0.0 && s < 0.2; }, 0.2);
    const double base = occupation(diamond, 512).psi_check;
    const double scaled = occupation(scaled_rule(diamond, 4.0), 512).psi_check;
    CHECK_THAT(scaled, WithinRel(base / 4.0, 1e-2));
    CHECK_THAT(base, WithinRel(0.08, 1e-2));
}

TEST_CASE("degree and edge count examples", "[graph]")
{
    const auto rule = ConnectionRule::gilbert(1, 0.1);
    CHECK(degree(PointConfiguration(Window::unit(1)), rule, {0.0, 0.0, 0.0}) == 0);
    const auto omega = line({-0.05, 0.03, 0.4});
    CHECK(degree(omega, rule, {0.0, 0.0, 0.0}) == 2);
    CHECK(edge_count(omega, rule) == 1);
    // z coinciding with a point of omega is not a neighbour of itself.
    CHECK(degree(omega, rule, {0.03, 0.0, 0.0}) == 1);

    const auto clusters = line({-0.45, -0.44, -0.43, 0.40, 0.41, 0.42});
    CHECK(edge_count(clusters, rule) == edge_count(line({-0.45, -0.44, -0.43}), rule) +
                                            edge_count(line({0.40, 0.41, 0.42}), rule));
    CHECK(edge_count(clusters, rule) == 6);
}

TEST_CASE("grid queries agree with brute force", "[graph][property]")
{
    const std::vector<std::pair<ConnectionRule, double>> cases{
        {ConnectionRule::gilbert(1, 0.05), 60.0},   {ConnectionRule::gilbert(2, 0.08), 80.0},
        {ConnectionRule::gilbert(3, 0.15), 60.0},   {ConnectionRule::annulus(2, 0.05, 0.12), 70.0},
        {ConnectionRule::gilbert(2, 0.7), 30.0},    {ConnectionRule::annulus(1, 0.3, 0.6), 20.0}};
    std::size_t trial = 0;
    for (const auto& [rule, lambda] : cases) {
        for (int t = 0; t < 100; ++t, ++trial) {
            const auto omega = sample_process(Window::unit(rule.dim()), lambda, {31, trial});
            const auto edges = edge_count(omega, rule);
            REQUIRE(edges == brute_edges(omega, rule));
            const GridIndex index(omega, rule.radius());
            std::uint64_t degree_sum = 0;
            for (const auto& z : omega.points()) {
                const auto d = degree(index, rule, z);
                REQUIRE(d == brute_degree(omega, rule, z));
                degree_sum += d;
            }
            CHECK(degree_sum == 2 * edges);
            Engine eng = RngStream{32, trial}.engine();
            Point z{0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < rule.dim(); ++i) {
                z[i] = uniform(eng, -0.5, 0.5);
            }
            CHECK(degree(index, rule, z) == brute_degree(omega, rule, z));
        }
    }
}

TEST_CASE("occupation coefficients", "[occupation]")
{
    CHECK_THROWS_AS(occupation(ConnectionRule::gilbert(1, 0.1), 32), std::domain_error);

    const auto one = occupation(ConnectionRule::gilbert(1, 0.1), 64);
    CHECK_THAT(one.psi, WithinAbs(0.2, 1e-12));
    CHECK_THAT(one.psi_hat, WithinAbs(0.2, 1e-12));
    CHECK_THAT(one.psi_check, WithinAbs(0.2, 1e-12));
    CHECK_THAT(*one.closed_form, WithinAbs(0.2, 1e-15));

    const auto two = occupation(ConnectionRule::gilbert(2, 0.1), 512);
    CHECK_THAT(two.psi, WithinRel(std::numbers::pi * 0.01, 1e-2));
    CHECK_THAT(*two.closed_form, WithinRel(0.031416, 1e-5));

    const auto ann = occupation(ConnectionRule::annulus(1, 0.3, 0.6), 256);
    CHECK_THAT(ann.psi, WithinAbs(0.4, 1e-12));
    CHECK_THAT(occupation_psi(ConnectionRule::annulus(1, 0.3, 0.6)), WithinAbs(0.4, 1e-15));

    for (const auto& r : {ConnectionRule::gilbert(2, 0.4), ConnectionRule::gilbert(3, 0.9),
                          ConnectionRule::annulus(2, 0.2, 0.7), ConnectionRule::gilbert(1, 2.0)}) {
        const auto rep = occupation(r, 96);
        CHECK(0.0 <= rep.psi_check);
        CHECK(rep.psi_check <= rep.psi);
        CHECK(rep.psi <= rep.psi_hat);
        CHECK(rep.ratio >= 1.0);
    }
}

TEST_CASE("campbell mean", "[campbell]")
{
    const auto g = ConnectionRule::gilbert(1, 0.1);
    CHECK_THAT(*campbell_mean_closed_form(g, 10.0), WithinAbs(9.5, 1e-12));
    CHECK(campbell_mean(g, 0.0, 64) == 0.0);

    // Direct 2-D midpoint rule over W x W of the indicator.
    const int n = 2000;
    double direct = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double x = -0.5 + (i + 0.5) / n;
            const double y = -0.5 + (j + 0.5) / n;
            const double r = std::abs(x - y);
            direct += (r > 0.0 && r < 0.1) ? 1.0 : 0.0;
        }
    }
    direct *= 50.0 / (static_cast<double>(n) * n);
    CHECK_THAT(direct, WithinRel(9.5, 2e-3));
    CHECK_THAT(campbell_mean(g, 10.0, 512), WithinRel(9.5, 1e-4));

    const auto g2 = ConnectionRule::gilbert(2, 0.05);
    const double exact = *campbell_mean_closed_form(g2, 20.0);
    const double q512 = campbell_mean(g2, 20.0, 512);
    const double q1024 = campbell_mean(g2, 20.0, 1024);
    CHECK_THAT(q512, WithinRel(exact, 1e-2));
    CHECK_THAT(q1024, WithinRel(q512, 1e-2));
    CHECK(exact < 200.0 * std::numbers::pi * 0.0025);

    // Monte Carlo over uniform pairs for the d = 2 and d = 3 closed forms.
    Engine eng = RngStream{40, 0}.engine();
    for (std::size_t d : {2u, 3u}) {
        const double delta = 0.3;
        const std::size_t pairs = 2'000'000;
        std::size_t hits = 0;
        for (std::size_t s = 0; s < pairs; ++s) {
            double r2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double u = uniform01(eng) - uniform01(eng);
                r2 += u * u;
            }
            hits += r2 < delta * delta ? 1 : 0;
        }
        const double p = static_cast<double>(hits) / static_cast<double>(pairs);
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(pairs));
        const double pm = *campbell_mean_closed_form(ConnectionRule::gilbert(d, delta), 1.0) * 2.0;
        CHECK(std::abs(p - pm) <= 3.0 * se);
        CHECK_THAT(campbell_mean(ConnectionRule::gilbert(d, delta), 1.0, d == 2 ? 512 : 96) * 2.0,
                   WithinRel(pm, 1e-2));
    }
}

TEST_CASE("edge count mean matches Campbell", "[campbell][property]")
{
    const auto rule = ConnectionRule::gilbert(2, 0.06);
    const double lambda = 40.0;
    const std::size_t reps = 10'000;
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto e = static_cast<double>(edge_count(sample_process(Window::unit(2), lambda, {41, i}), rule));
        sum += e;
        sq += e * e;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sq / reps - mean * mean) / reps);
    CHECK(std::abs(mean - *campbell_mean_closed_form(rule, lambda)) <= 3.0 * se);
}

TEST_CASE("section volume", "[campbell]")
{
    const Window w = Window::unit(2);
    const auto g = ConnectionRule::gilbert(2, 0.2);
    CHECK_THAT(section_volume(g, w, {0.0, 0.0, 0.0}), WithinRel(std::numbers::pi * 0.04, 1e-12));
    CHECK_THAT(section_volume(g, w, {0.5, 0.5, 0.0}), WithinRel(std::numbers::pi * 0.01, 1e-12));
    CHECK_THAT(section_volume(g, w, {0.5, 0.0, 0.0}), WithinRel(std::numbers::pi * 0.02, 1e-12));
    CHECK_THAT(section_volume(ConnectionRule::gilbert(1, 0.1), Window::unit(1), {0.45, 0.0, 0.0}),
               WithinAbs(0.15, 1e-15));

    // Fine grid count oracle at an off-centre point.
    const Point x{0.37, -0.41, 0.0};
    const int n = 4000;
    double count = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double y0 = -0.5 + (i + 0.5) / n;
            const double y1 = -0.5 + (j + 0.5) / n;
            const double r2 = (x[0] - y0) * (x[0] - y0) + (x[1] - y1) * (x[1] - y1);
            count += (r2 > 0.0 && r2 < 0.04) ? 1.0 : 0.0;
        }
    }
    CHECK_THAT(section_volume(g, w, x), WithinRel(count / (static_cast<double>(n) * n), 1e-3));
}

TEST_CASE("calibrate_delta", "[campbell]")
{
    const double delta = calibrate_delta(1, 100.0, 1.0);
    CHECK_THAT(delta, WithinRel(1.0 - std::sqrt(1.0 - 2e-4), 1e-9));
    CHECK_THAT(delta, WithinRel(1.0000e-4, 1e-4));
    CHECK(calibrate_delta(1, 200.0, 1.0) < delta);
    for (std::size_t d : {1u, 2u, 3u}) {
        const double dd = calibrate_delta(d, 50.0, 1.0);
        CHECK_THAT(*campbell_mean_closed_form(ConnectionRule::gilbert(d, dd), 50.0), WithinRel(1.0, 1e-9));
    }
    CHECK_THROWS_AS(calibrate_delta(1, 2.0, 100.0), CalibrationError);
    CHECK_THROWS_AS(calibrate_delta(1, 0.0, 1.0), CalibrationError);
}

TEST_CASE("section volume in three dimensions", "[campbell]")
{
    const Window w = Window::unit(3);
    const auto g = ConnectionRule::gilbert(3, 0.2);
    const double ball = 4.0 / 3.0 * std::numbers::pi * 0.008;
    CHECK_THAT(section_volume(g, w, {0.0, 0.0, 0.0}), WithinRel(ball, 1e-12));
    CHECK_THAT(section_volume(g, w, {0.5, 0.0, 0.0}), WithinRel(ball / 2.0, 1e-8));
    CHECK_THAT(section_volume(g, w, {0.5, 0.5, 0.0}), WithinRel(ball / 4.0, 1e-8));
    CHECK_THAT(section_volume(g, w, {0.5, -0.5, 0.5}), WithinRel(ball / 8.0, 1e-8));
    // A ball cut by a single face at distance t keeps a cap of known volume.
    const double t = 0.08;
    const double h = 0.2 - t;
    const double cap = std::numbers::pi * h * h * (3.0 * 0.2 - h) / 3.0;
    CHECK_THAT(section_volume(g, w, {0.5 - t, 0.0, 0.0}), WithinRel(ball - cap, 1e-8));

    // Monte Carlo oracle where the ball meets an edge and a corner region.
    const Point x{0.41, -0.37, 0.33};
    const double r = 0.2;
    Engine eng = RngStream{42, 0}.engine();
    const std::size_t samples = 4'000'000;
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        Point y{0.0, 0.0, 0.0};
        double d2 = 0.0;
        bool inside = true;
        for (std::size_t i = 0; i < 3; ++i) {
            y[i] = x[i] + uniform(eng, -r, r);
            d2 += (y[i] - x[i]) * (y[i] - x[i]);
            inside = inside && std::abs(y[i]) <= 0.5;
        }
        hits += (inside && d2 < r * r) ? 1 : 0;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    const double cube = std::pow(2.0 * r, 3);
    const double se = cube * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    CHECK(std::abs(section_volume(g, w, x) - cube * p) <= 3.0 * se);
    const auto a = ConnectionRule::annulus(3, 0.1, 0.2);
    CHECK_THAT(section_volume(a, w, x),
               WithinRel(section_volume(g, w, x) - section_volume(ConnectionRule::gilbert(3, 0.1), w, x), 1e-12));
}
