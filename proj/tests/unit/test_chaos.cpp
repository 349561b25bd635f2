#include "ppstein/chaos.hpp"
#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/rng.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

using namespace ppstein;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Stats {
    double mean = 0.0;
    double var = 0.0;
    double se = 0.0;
};

Stats stats(const std::vector<double>& x)
{
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) {
        s += v;
    }
    const double m = s / n;
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    const double var = ss / (n - 1.0);
    return {m, var, std::sqrt(var / n)};
}

DiscretizedSpace random_space(std::size_t n, Engine& eng)
{
    std::vector<double> w(n);
    for (auto& v : w) {
        v = uniform(eng, 0.05, 0.5);
    }
    return DiscretizedSpace(w);
}

// Smooth first-order kernels on W = [-1/2, 1/2] with mu = lambda dx.
FirstOrderKernel linear_kernel(double lambda)
{
    return {[](const Point& x) { return x[0] + 0.3; }, lambda * 0.3,
            lambda * (1.0 / 12.0 + 0.09), {}};
}

FirstOrderKernel cosine_kernel(double lambda)
{
    return {[](const Point& x) { return std::cos(x[0]); }, lambda * 2.0 * std::sin(0.5), std::nullopt, {}};
}

// int_{-1/2}^{1/2} (x + 0.3) cos x dx = 0.6 sin(1/2).
FirstOrderKernel product_kernel(double lambda)
{
    return {[](const Point& x) { return (x[0] + 0.3) * std::cos(x[0]); }, lambda * 0.6 * std::sin(0.5),
            std::nullopt, {}};
}

}  // namespace

TEST_CASE("first-order integrals", "[integrals]")
{
    const auto omega = sample_process(Window::unit(2), 30.0, {1, 1});
    const FirstOrderKernel zero{[](const Point&) { return 0.0; }, 0.0, 0.0, {}};
    CHECK(eval_I1(zero, omega) == 0.0);

    Box b;
    b.dim = 2;
    b.lo = {-0.2, -0.5, 0.0};
    b.hi = {0.3, 0.1, 0.0};
    const auto chaos = count_chaos(Window::unit(2), 30.0, b);
    CHECK_THAT(eval_I1(*chaos.first, omega),
               WithinAbs(static_cast<double>(count_in(omega, b)) - 30.0 * 0.3, 1e-12));
    CHECK_THAT(evaluate(chaos, omega), WithinAbs(static_cast<double>(count_in(omega, b)), 1e-12));
}

TEST_CASE("first-order moments", "[integrals][property]")
{
    const double lambda = 40.0;
    const auto g = linear_kernel(lambda);
    std::vector<double> x(10'000);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = eval_I1(g, sample_process(Window::unit(1), lambda, {2, i}));
    }
    const Stats s = stats(x);
    CHECK(std::abs(s.mean) <= 3.0 * s.se);
    CHECK_THAT(s.var, WithinRel(*g.square_integral, 0.05));
}

TEST_CASE("second-order integrals", "[integrals]")
{
    const SecondOrderKernel zero{[](const Point&, const Point&) { return 0.0; },
                                 [](const Point&) { return 0.0; }, 0.0};
    CHECK(eval_I2(zero, sample_process(Window::unit(1), 20.0, {3, 0})) == 0.0);

    // Edge kernel moments: E[I_2] = 0 and E[I_2^2] = 2 ||f_2||^2 = (lambda^2 / 2) (2 delta - delta^2).
    const double lambda = 30.0;
    const double delta = 0.1;
    const auto chaos = edge_count_chaos(ConnectionRule::gilbert(1, delta), lambda, Window::unit(1));
    std::vector<double> x(10'000);
    std::vector<double> x2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = eval_I2(*chaos.second, sample_process(Window::unit(1), lambda, {4, i}));
        x2[i] = x[i] * x[i];
    }
    const Stats s = stats(x);
    const Stats s2 = stats(x2);
    const double target = 0.5 * lambda * lambda * (2.0 * delta - delta * delta);
    CHECK(std::abs(s.mean) <= 3.0 * s.se);
    CHECK_THAT(s2.mean, WithinRel(target, 0.05));
    CHECK(std::abs(s2.mean - target) <= 3.0 * s2.se);
}

TEST_CASE("edge count chaotic reconstruction", "[integrals][property]")
{
    SECTION("d = 1 closed-form compensators")
    {
        const auto rule = ConnectionRule::gilbert(1, 0.08);
        const auto chaos = edge_count_chaos(rule, 50.0, Window::unit(1));
        CHECK_THAT(chaos.constant, WithinAbs(1250.0 * (0.16 - 0.0064), 1e-12));
        for (std::size_t i = 0; i < 300; ++i) {
            const auto omega = sample_process(Window::unit(1), 50.0, {5, i});
            REQUIRE_THAT(evaluate(chaos, omega),
                         WithinAbs(static_cast<double>(edge_count(omega, rule)), 1e-10));
        }
    }
    SECTION("d = 2 quadrature compensators")
    {
        const auto rule = ConnectionRule::gilbert(2, 0.1);
        const auto chaos = edge_count_chaos(rule, 40.0, Window::unit(2));
        for (std::size_t i = 0; i < 100; ++i) {
            const auto omega = sample_process(Window::unit(2), 40.0, {6, i});
            REQUIRE_THAT(evaluate(chaos, omega),
                         WithinAbs(static_cast<double>(edge_count(omega, rule)), 1e-6));
        }
    }
    SECTION("annulus rule on a non-unit window")
    {
        const auto rule = ConnectionRule::annulus(1, 0.05, 0.2);
        const Window w = Window::cube(1, 0.8);
        const auto chaos = edge_count_chaos(rule, 15.0, w);
        for (std::size_t i = 0; i < 100; ++i) {
            const auto omega = sample_process(w, 15.0, {7, i});
            REQUIRE_THAT(evaluate(chaos, omega),
                         WithinAbs(static_cast<double>(edge_count(omega, rule)), 1e-8));
        }
    }
}

TEST_CASE("pathwise product formula for first-order integrals", "[integrals][property]")
{
    const double lambda = 25.0;
    const auto f = linear_kernel(lambda);
    const auto g = cosine_kernel(lambda);
    const auto fg = product_kernel(lambda);
    const auto fg_sym = tensor_kernel(f, g);
    for (std::size_t i = 0; i < 500; ++i) {
        const auto omega = sample_process(Window::unit(1), lambda, {8, i});
        const double lhs = eval_I1(f, omega) * eval_I1(g, omega);
        const double rhs = eval_I2(fg_sym, omega) + eval_I1(fg, omega) + fg.compensator;
        REQUIRE_THAT(lhs, WithinAbs(rhs, 1e-8));
    }
}

TEST_CASE("contractions on a single cell", "[contract]")
{
    const DiscretizedSpace one({0.7});
    const DiscretizedKernel f(one, 1, {3.0});
    const auto full = contract(f, f, 1, 1);
    CHECK(full.order() == 0);
    CHECK_THAT(full[0], WithinRel(9.0 * 0.7, 1e-15));
    const auto partial = contract(f, f, 1, 0);
    CHECK(partial.order() == 1);
    CHECK(partial[0] == 9.0);
    CHECK_THROWS_AS(contract(f, f, 2, 0), std::domain_error);
    CHECK_THROWS_AS(contract(f, f, 0, 1), std::domain_error);
    CHECK_THROWS_AS(contract(f, DiscretizedKernel(DiscretizedSpace({0.5}), 1, {1.0}), 1, 1), std::domain_error);
}

TEST_CASE("contractions against nested loops", "[contract]")
{
    Engine eng = RngStream{9, 0}.engine();
    const std::size_t n = 6;
    const auto space = random_space(n, eng);
    const auto f = random_symmetric_kernel(space, 2, eng);
    const auto g = random_symmetric_kernel(space, 2, eng);
    const auto w = space.weights();

    const auto outer = contract(f, g, 0, 0);
    const auto r1l0 = contract(f, g, 1, 0);
    const auto r1l1 = contract(f, g, 1, 1);
    const auto r2l1 = contract(f, g, 2, 1);
    const auto r2l2 = contract(f, g, 2, 2);
    CHECK(outer.order() == 4);
    CHECK(r1l0.order() == 3);
    CHECK(r1l1.order() == 2);
    CHECK(r2l1.order() == 1);
    CHECK(r2l2.order() == 0);

    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        double diag = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t c = 0; c < n; ++c) {
                CHECK(r1l0.at({a, b, c}) == f.at({a, b}) * g.at({a, c}));
                double s = 0.0;
                for (std::size_t z = 0; z < n; ++z) {
                    s += w[z] * f.at({z, b}) * g.at({z, c});
                }
                if (a == 0) {
                    CHECK_THAT(r1l1.at({b, c}), WithinAbs(s, 1e-14));
                }
                for (std::size_t d = 0; d < n; ++d) {
                    REQUIRE(outer.at({a, b, c, d}) == f.at({a, b}) * g.at({c, d}));
                }
            }
            diag += w[b] * f.at({b, a}) * g.at({b, a});
            total += w[a] * w[b] * f.at({a, b}) * g.at({a, b});
        }
        CHECK_THAT(r2l1.at({a}), WithinAbs(diag, 1e-14));
    }
    CHECK_THAT(r2l2[0], WithinAbs(total, 1e-13));
    CHECK_THAT(r2l2[0], WithinAbs(inner_product(f, g), 1e-13));
}

TEST_CASE("contraction symmetry and order", "[contract][property]")
{
    Engine eng = RngStream{10, 0}.engine();
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = 2 + static_cast<std::size_t>(uniform01(eng) * 5);
        const auto space = random_space(n, eng);
        const std::size_t p = 1 + static_cast<std::size_t>(uniform01(eng) * 3);
        const std::size_t q = 1 + static_cast<std::size_t>(uniform01(eng) * 3);
        const auto f = random_symmetric_kernel(space, p, eng);
        const auto g = random_symmetric_kernel(space, q, eng);
        for (std::size_t r = 0; r <= std::min(p, q); ++r) {
            for (std::size_t l = 0; l <= r; ++l) {
                CHECK(contract(f, g, r, l).order() == p + q - r - l);
            }
            if (p == q) {
                // Equal up to exchanging the t and s argument blocks.
                const auto a = contract(f, g, r, r);
                const auto b = contract(g, f, r, r);
                const std::size_t k = p - r;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    auto idx = a.unflat(i);
                    std::rotate(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
                    CHECK_THAT(a[i], WithinAbs(b.at(idx), 1e-12));
                }
                const auto sa = symmetrize(a);
                const auto sb = symmetrize(b);
                for (std::size_t i = 0; i < sa.size(); ++i) {
                    CHECK_THAT(sa[i], WithinAbs(sb[i], 1e-12));
                }
            }
        }
    }
}

TEST_CASE("symmetrization", "[contract][property]")
{
    Engine eng = RngStream{11, 0}.engine();
    for (std::size_t q : {1u, 2u, 3u}) {
        const auto space = random_space(5, eng);
        DiscretizedKernel f(space, q);
        for (std::size_t i = 0; i < f.size(); ++i) {
            f[i] = uniform(eng, -1.0, 1.0);
        }
        const auto s = symmetrize(f);
        CHECK(is_symmetric(s, 1e-15));
        CHECK(l2_norm(s) <= l2_norm(f) + 1e-14);
        const auto ss = symmetrize(s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK_THAT(ss[i], WithinAbs(s[i], 1e-15));
        }
        if (q >= 2) {
            CHECK_FALSE(is_symmetric(f, 1e-15));
        }
    }
}

TEST_CASE("Fubini identity for contractions", "[contract][property]")
{
    const DiscretizedSpace zspace = DiscretizedSpace::uniform(4, 1.0);
    CHECK(fubini_check(DiscretizedKernel(zspace, 2), DiscretizedKernel(zspace, 3), 1) == 0.0);
    CHECK_THROWS_AS(fubini_check(DiscretizedKernel(zspace, 3), DiscretizedKernel(zspace, 2), 1), std::domain_error);

    Engine eng = RngStream{12, 0}.engine();
    for (int t = 0; t < 100; ++t) {
        std::size_t p = 1 + static_cast<std::size_t>(uniform01(eng) * 3);
        std::size_t q = 1 + static_cast<std::size_t>(uniform01(eng) * 3);
        if (p > q) {
            std::swap(p, q);
        }
        const std::size_t n_max = p + q >= 5 ? 10 : 20;
        const std::size_t n = 2 + static_cast<std::size_t>(uniform01(eng) * static_cast<double>(n_max - 1));
        const auto space = random_space(n, eng);
        const auto f = random_symmetric_kernel(space, p, eng);
        const auto g = random_symmetric_kernel(space, q, eng);
        for (std::size_t r = 1; r <= p; ++r) {
            INFO("p=" << p << " q=" << q << " r=" << r << " n=" << n);
            CHECK(fubini_check(f, g, r) < 1e-10);
        }
    }
}

TEST_CASE("product formula terms", "[product]")
{
    Engine eng = RngStream{13, 0}.engine();
    const auto space = random_space(4, eng);
    const auto f1 = random_symmetric_kernel(space, 1, eng);
    const auto g1 = random_symmetric_kernel(space, 1, eng);

    const auto t11 = product_formula_terms(f1, g1);
    REQUIRE(t11.size() == 3);
    CHECK(t11[0].order == 2);
    CHECK(t11[0].coefficient == 1.0);
    CHECK(t11[1].order == 1);
    CHECK(t11[1].coefficient == 1.0);
    CHECK(t11[2].order == 0);
    CHECK(t11[2].coefficient == 1.0);
    for (std::size_t a = 0; a < 4; ++a) {
        CHECK_THAT(t11[1].kernel.at({a}), WithinAbs(f1[a] * g1[a], 1e-15));
        for (std::size_t b = 0; b < 4; ++b) {
            CHECK_THAT(t11[0].kernel.at({a, b}), WithinAbs(0.5 * (f1[a] * g1[b] + f1[b] * g1[a]), 1e-15));
        }
    }
    CHECK_THAT(t11[2].kernel[0], WithinAbs(inner_product(f1, g1), 1e-15));

    // Second-order kernels: one term per (r, l) with 0 <= l <= r <= 2.
    const auto f2 = random_symmetric_kernel(space, 2, eng);
    const auto t22 = product_formula_terms(f2, f2);
    REQUIRE(t22.size() == 6);
    auto coef = [&](std::size_t r, std::size_t l) {
        for (const auto& t : t22) {
            if (t.r == r && t.l == l) {
                return t.coefficient;
            }
        }
        return -1.0;
    };
    CHECK(coef(0, 0) == 1.0);
    CHECK(coef(1, 0) == 4.0);
    CHECK(coef(1, 1) == 4.0);
    CHECK(coef(2, 0) == 2.0);
    CHECK(coef(2, 1) == 4.0);
    CHECK(coef(2, 2) == 2.0);
    for (const auto& t : t22) {
        CHECK(t.order == 4 - t.r - t.l);
        CHECK(is_symmetric(t.kernel, 1e-14));
    }

    CHECK(product_formula_terms(random_symmetric_kernel(space, 3, eng), random_symmetric_kernel(space, 2, eng)).size() == 6);
    const DiscretizedSpace tiny = DiscretizedSpace::uniform(2, 1.0);
    CHECK_THROWS_AS(product_formula_terms(DiscretizedKernel(tiny, 4), DiscretizedKernel(tiny, 1)), ValidationError);
}

TEST_CASE("perturbed chaos conditions", "[conditions]")
{
    for (std::size_t q : {1u, 2u, 3u}) {
        const auto space = DiscretizedSpace::uniform(8, 3.0);
        const auto f = indicator_kernel(space, q, [](const std::vector<std::size_t>& idx) {
            std::size_t s = 0;
            for (auto i : idx) {
                s += i;
            }
            return s % 3 != 1;
        });
        CHECK(is_symmetric(f));
        CHECK(chaos_limit_row(f).condition_iii == 0.0);
    }

    Engine eng = RngStream{14, 0}.engine();
    const auto space = random_space(6, eng);
    const auto f = random_symmetric_kernel(space, 3, eng);
    DiscretizedKernel tf = f;
    for (std::size_t i = 0; i < tf.size(); ++i) {
        tf[i] *= 2.5;
    }
    const auto a = chaos_limit_row(f);
    const auto b = chaos_limit_row(tf);
    REQUIRE(a.star_norms.size() == b.star_norms.size());
    CHECK(a.star_norms.size() == 5);
    for (std::size_t k = 0; k < a.star_norms.size(); ++k) {
        CHECK_THAT(b.star_norms[k].value, WithinRel(6.25 * a.star_norms[k].value, 1e-12));
    }
    CHECK_THAT(b.l4, WithinRel(2.5 * a.l4, 1e-12));
    CHECK(a.assumption_norms.size() == 3);
    CHECK(a.bounded);

    // Direct evaluation of the unfactored (iii) integrand.
    double direct = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = f[i];
        direct += (v * v + 36.0 * std::pow(v, 4) - 12.0 * std::pow(v, 3)) * f.cell_measure(i);
    }
    CHECK_THAT(a.condition_iii, WithinRel(direct, 1e-10));
}

TEST_CASE("Gilbert kernel family contractions decrease along lambda", "[conditions]")
{
    std::vector<DiscretizedKernel> family;
    for (double lambda : {25.0, 50.0, 100.0, 200.0}) {
        family.push_back(gilbert_kernel_1d(20, lambda, calibrate_delta(1, lambda, 1.0)));
    }
    const auto rows = chaos_limit_conditions(family);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].star_norms.size(); ++k) {
            CHECK(rows[i].star_norms[k].value < rows[i - 1].star_norms[k].value);
        }
    }
    // The discretized family keeps the Campbell mean: 2 int f_2 dmu^2 = 2 E[F*] / ... = 1.
    for (std::size_t i = 0; i < family.size(); ++i) {
        double mass = 0.0;
        for (std::size_t c = 0; c < family[i].size(); ++c) {
            mass += family[i][c] * family[i].cell_measure(c);
        }
        CHECK_THAT(mass, WithinRel(1.0, 1e-9));
    }

    std::ostringstream os;
    write_conditions_csv(os, rows, {25, 50, 100, 200});
    const std::string csv = os.str();
    CHECK(csv.rfind("index,label,star_1_1,star_2_1,l4,condition_iii,assumption_1,assumption_2,bounded\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("smooth vanishing perturbation diagnostics", "[svp]")
{
    const FirstOrderKernel zero{[](const Point&) { return 0.0; }, 0.0, 0.0, {}};
    const auto z = svp_row(10.0, zero, Window::unit(1));
    CHECK(z.second_moment == 0.0);
    CHECK(z.derivative_l2 == 0.0);
    CHECK(z.derivative_l4 == 0.0);

    const auto rows = svp_diagnostics({25, 50, 100, 200, 400}, [](double lambda) {
        return *edge_count_chaos(ConnectionRule::gilbert(1, calibrate_delta(1, lambda, 1.0)), lambda,
                                 Window::unit(1)).first;
    }, Window::unit(1));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].second_moment < rows[i - 1].second_moment);
        CHECK(rows[i].derivative_l2 < rows[i - 1].derivative_l2);
        CHECK(rows[i].derivative_l4 < rows[i - 1].derivative_l4);
    }

    // Isometry check against simulation for the lambda = 50 kernel.
    const double delta = calibrate_delta(1, 50.0, 1.0);
    const auto g = *edge_count_chaos(ConnectionRule::gilbert(1, delta), 50.0, Window::unit(1)).first;
    std::vector<double> sq(20'000);
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double v = eval_I1(g, sample_process(Window::unit(1), 50.0, {15, i}));
        sq[i] = v * v;
    }
    const Stats s = stats(sq);
    CHECK(std::abs(s.mean - rows[1].second_moment) <= 3.0 * s.se);
}
