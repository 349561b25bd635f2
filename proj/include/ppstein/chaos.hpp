#pragma once

// Wiener-Ito integrals of order 1 and 2 evaluated pathwise on simulated
// configurations, plus dense discretized kernels for contraction reports.

#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ppstein {

/// Control measure mu = intensity * Lebesgue restricted to the window.
struct ProcessModel {
    Window window = Window::unit(1);
    double intensity = 0.0;
};

struct FirstOrderKernel {
    std::function<double(const Point&)> g;
    double compensator = 0.0;                 // int g dmu
    std::optional<double> square_integral;    // int g^2 dmu, when known exactly
    std::vector<double> kinks;                // axis cuts where g is not smooth
};

/// Symmetric kernel vanishing on the diagonal.
struct SecondOrderKernel {
    std::function<double(const Point&, const Point&)> g;
    std::function<double(const Point&)> row_compensator;  // x -> int g(x, y) mu(dy)
    double compensator = 0.0;                              // int int g dmu^2
};

/// F = constant + I_1(g_1) + I_2(g_2).
struct FiniteChaosFunctional {
    double constant = 0.0;
    std::optional<FirstOrderKernel> first;
    std::optional<SecondOrderKernel> second;
    ProcessModel model;
    bool integer_valued = false;
};

/// sum_{x in omega} g(x) - int g dmu.
inline double eval_I1(const FirstOrderKernel& k, const PointConfiguration& omega)
{
    double s = 0.0;
    for (const auto& x : omega.points()) {
        s += k.g(x);
    }
    return s - k.compensator;
}

/// Compensated double sum over ordered pairs of distinct points:
/// sum_{x != y} g(x,y) - 2 sum_x int g(x,y) mu(dy) + int int g dmu^2.
inline double eval_I2(const SecondOrderKernel& k, const PointConfiguration& omega)
{
    const auto pts = omega.points();
    double pairs = 0.0;
    double rows = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i != j) {
                pairs += k.g(pts[i], pts[j]);
            }
        }
        rows += k.row_compensator(pts[i]);
    }
    return pairs - 2.0 * rows + k.compensator;
}

inline double evaluate(const FiniteChaosFunctional& f, const PointConfiguration& omega)
{
    double v = f.constant;
    if (f.first) {
        v += eval_I1(*f.first, omega);
    }
    if (f.second) {
        v += eval_I2(*f.second, omega);
    }
    return v;
}

/// eta(B) - mu(B) as a first-chaos functional: constant mu(B), g_1 = 1_B.
inline FiniteChaosFunctional count_chaos(const Window& window, double intensity, const Box& box)
{
    Box clipped = box;
    for (std::size_t i = 0; i < window.dim; ++i) {
        clipped.lo[i] = std::max(box.lo[i], -window.half_width[i]);
        clipped.hi[i] = std::min(box.hi[i], window.half_width[i]);
    }
    const double mass = intensity * clipped.volume();
    FirstOrderKernel g1{[box](const Point& x) { return box.contains(x) ? 1.0 : 0.0; }, mass, mass, {}};
    for (std::size_t i = 0; i < window.dim; ++i) {
        g1.kinks.push_back(clipped.lo[i]);
        g1.kinks.push_back(clipped.hi[i]);
    }
    return {mass, std::move(g1), std::nullopt, {window, intensity}, true};
}

/// Chaotic decomposition of the edge count F* = (1/2) sum_{x != y} 1_H(x, y):
/// constant E[F*], f_1(z) = lambda l((z - H^) n W), f_2 = (1/2) 1_H on W x W.
/// The constant and int int f_2 use the Campbell mean (closed form when
/// available); int f_1 dmu is integrated independently by piecewise
/// Gauss-Legendre quadrature.
inline FiniteChaosFunctional edge_count_chaos(const ConnectionRule& rule, double lambda,
                                              const Window& window, std::size_t resolution = 512)
{
    if (rule.dim() != window.dim) {
        throw std::domain_error("edge_count_chaos: rule and window dimensions differ");
    }
    std::optional<double> exact;
    if (window == Window::unit(rule.dim())) {
        exact = campbell_mean_closed_form(rule, lambda);
    }
    const double mean = exact ? *exact : campbell_mean(rule, lambda, resolution, window);

    auto f1 = [rule, window, lambda](const Point& z) {
        return window.contains(z) ? lambda * section_volume(rule, window, z) : 0.0;
    };
    const std::vector<double> kinks = section_kinks(rule, window);
    const std::size_t order = section_gauss_order(rule.dim());
    const double comp1 = lambda * piecewise_gauss_integral(window, kinks, f1, order);

    SecondOrderKernel f2{
        [rule, window](const Point& x, const Point& y) {
            return window.contains(x) && window.contains(y) && rule.connects(x, y) ? 0.5 : 0.0;
        },
        [f1](const Point& x) { return 0.5 * f1(x); },
        mean,
    };
    return {mean, FirstOrderKernel{f1, comp1, std::nullopt, kinks}, std::move(f2),
            {window, lambda}, true};
}

/// Symmetrized tensor product h(x, y) = (f(x) g(y) + f(y) g(x)) / 2 as a
/// second-order kernel.
inline SecondOrderKernel tensor_kernel(const FirstOrderKernel& f, const FirstOrderKernel& g)
{
    return {
        [f, g](const Point& x, const Point& y) { return 0.5 * (f.g(x) * g.g(y) + f.g(y) * g.g(x)); },
        [f, g](const Point& x) { return 0.5 * (f.g(x) * g.compensator + g.g(x) * f.compensator); },
        f.compensator * g.compensator,
    };
}

// ---------------------------------------------------------------------------
// Discretized kernels

/// Finite stand-in for (Z, mu): n cells with positive weights.
class DiscretizedSpace {
  public:
    explicit DiscretizedSpace(std::vector<double> weights) : weights_(std::move(weights))
    {
        if (weights_.empty()) {
            throw std::domain_error("DiscretizedSpace: need at least one cell");
        }
        for (double w : weights_) {
            if (!(w > 0.0) || !std::isfinite(w)) {
                throw std::domain_error("DiscretizedSpace: weights must be positive and finite");
            }
        }
    }

    static DiscretizedSpace uniform(std::size_t n, double total_mass)
    {
        return DiscretizedSpace(std::vector<double>(n, total_mass / static_cast<double>(n)));
    }

    [[nodiscard]] std::size_t size() const { return weights_.size(); }
    [[nodiscard]] double weight(std::size_t i) const { return weights_[i]; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] double total_mass() const
    {
        return std::accumulate(weights_.begin(), weights_.end(), 0.0);
    }

    friend bool operator==(const DiscretizedSpace&, const DiscretizedSpace&) = default;

  private:
    std::vector<double> weights_;
};

/// Dense order-q tensor over a discretized space; axis 0 is the most
/// significant index. Order 0 holds a single scalar.
class DiscretizedKernel {
  public:
    DiscretizedKernel(DiscretizedSpace space, std::size_t order)
        : space_(std::move(space)), order_(order), values_(ipow(space_.size(), order), 0.0)
    {
    }

    DiscretizedKernel(DiscretizedSpace space, std::size_t order, std::vector<double> values)
        : space_(std::move(space)), order_(order), values_(std::move(values))
    {
        if (values_.size() != ipow(space_.size(), order_)) {
            throw std::domain_error("DiscretizedKernel: value count does not match n^q");
        }
    }

    [[nodiscard]] const DiscretizedSpace& space() const { return space_; }
    [[nodiscard]] std::size_t order() const { return order_; }
    [[nodiscard]] std::size_t n() const { return space_.size(); }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double& operator[](std::size_t flat) { return values_[flat]; }
    [[nodiscard]] double operator[](std::size_t flat) const { return values_[flat]; }

    [[nodiscard]] std::size_t flat(const std::vector<std::size_t>& idx) const
    {
        std::size_t f = 0;
        for (std::size_t k = 0; k < order_; ++k) {
            if (idx[k] >= n()) {
                throw std::domain_error("DiscretizedKernel: index out of range");
            }
            f = f * n() + idx[k];
        }
        return f;
    }

    [[nodiscard]] std::vector<std::size_t> unflat(std::size_t f) const
    {
        std::vector<std::size_t> idx(order_);
        for (std::size_t k = order_; k-- > 0;) {
            idx[k] = f % n();
            f /= n();
        }
        return idx;
    }

    [[nodiscard]] double at(const std::vector<std::size_t>& idx) const { return values_[flat(idx)]; }

    /// Product of cell weights along the multi-index.
    [[nodiscard]] double cell_measure(std::size_t f) const
    {
        double m = 1.0;
        for (std::size_t k = 0; k < order_; ++k) {
            m *= space_.weight(f % n());
            f /= n();
        }
        return m;
    }

    static std::size_t ipow(std::size_t base, std::size_t e)
    {
        std::size_t r = 1;
        for (std::size_t i = 0; i < e; ++i) {
            r *= base;
        }
        return r;
    }

  private:
    DiscretizedSpace space_;
    std::size_t order_ = 0;
    std::vector<double> values_;
};

/// int |f|^p dmu^q.
inline double power_integral(const DiscretizedKernel& f, double p)
{
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] != 0.0) {
            s += std::pow(std::abs(f[i]), p) * f.cell_measure(i);
        }
    }
    return s;
}

inline double inner_product(const DiscretizedKernel& f, const DiscretizedKernel& g)
{
    if (f.order() != g.order() || !(f.space() == g.space())) {
        throw std::domain_error("inner_product: kernels live on different spaces");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        s += f[i] * g[i] * f.cell_measure(i);
    }
    return s;
}

inline double l2_norm(const DiscretizedKernel& f) { return std::sqrt(power_integral(f, 2.0)); }
inline double l4_norm(const DiscretizedKernel& f) { return std::pow(power_integral(f, 4.0), 0.25); }

/// Average over all permutations of the arguments.
inline DiscretizedKernel symmetrize(const DiscretizedKernel& f)
{
    const std::size_t q = f.order();
    DiscretizedKernel out(f.space(), q);
    std::vector<std::size_t> perm(q);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t count = 0;
    do {
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto idx = f.unflat(i);
            std::vector<std::size_t> permuted(q);
            for (std::size_t k = 0; k < q; ++k) {
                permuted[k] = idx[perm[k]];
            }
            out[i] += f.at(permuted);
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] /= static_cast<double>(count);
    }
    return out;
}

inline bool is_symmetric(const DiscretizedKernel& f, double tol = 0.0)
{
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto idx = f.unflat(i);
        std::sort(idx.begin(), idx.end());
        do {
            if (std::abs(f.at(idx) - f[i]) > tol) {
                return false;
            }
        } while (std::next_permutation(idx.begin(), idx.end()));
    }
    return true;
}

/// f *_r^l g: identify r arguments of f and g and integrate l of them.
/// f is read as f(z_1..z_l, gamma_1..gamma_{r-l}, t_1..t_{p-r}) and g as
/// g(z, gamma, s_1..s_{q-r}); the result has arguments (gamma, t, s).
inline DiscretizedKernel contract(const DiscretizedKernel& f, const DiscretizedKernel& g,
                                  std::size_t r, std::size_t l)
{
    const std::size_t p = f.order();
    const std::size_t q = g.order();
    if (r > std::min(p, q) || l > r) {
        throw std::domain_error("contract: need 0 <= l <= r <= min(p, q)");
    }
    if (!(f.space() == g.space())) {
        throw std::domain_error("contract: kernels live on different spaces");
    }
    const std::size_t n = f.n();
    const std::size_t out_order = p + q - r - l;
    DiscretizedKernel out(f.space(), out_order);
    const std::size_t z_count = DiscretizedKernel::ipow(n, l);

    std::vector<std::size_t> fi(p);
    std::vector<std::size_t> gi(q);
    for (std::size_t o = 0; o < out.size(); ++o) {
        const auto oi = out.unflat(o);
        // gamma = oi[0..r-l), t = oi[r-l .. r-l+p-r), s = rest
        for (std::size_t k = 0; k < r - l; ++k) {
            fi[l + k] = oi[k];
            gi[l + k] = oi[k];
        }
        for (std::size_t k = 0; k < p - r; ++k) {
            fi[r + k] = oi[r - l + k];
        }
        for (std::size_t k = 0; k < q - r; ++k) {
            gi[r + k] = oi[r - l + (p - r) + k];
        }
        double acc = 0.0;
        for (std::size_t zf = 0; zf < z_count; ++zf) {
            std::size_t rem = zf;
            double w = 1.0;
            for (std::size_t k = l; k-- > 0;) {
                const std::size_t zk = rem % n;
                rem /= n;
                fi[k] = zk;
                gi[k] = zk;
                w *= f.space().weight(zk);
            }
            acc += w * f.at(fi) * g.at(gi);
        }
        out[o] = acc;
    }
    return out;
}

/// Relative discrepancy between the two sides of
/// int (f *_r^0 g)^2 dmu^{p+q-r} = int (f *_p^{p-r} f)(g *_q^{q-r} g) dmu^r.
inline double fubini_check(const DiscretizedKernel& f, const DiscretizedKernel& g, std::size_t r)
{
    const std::size_t p = f.order();
    const std::size_t q = g.order();
    if (!(1 <= r && r <= p && p <= q)) {
        throw std::domain_error("fubini_check: need 1 <= r <= p <= q");
    }
    const double lhs = power_integral(contract(f, g, r, 0), 2.0);
    const double rhs = inner_product(contract(f, f, p, p - r), contract(g, g, q, q - r));
    const double scale = std::max(std::abs(lhs), 1e-300);
    return std::abs(lhs - rhs) / scale;
}

inline double binomial(std::size_t n, std::size_t k)
{
    double b = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        b = b * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return std::round(b);
}

inline double factorial(std::size_t n)
{
    double f = 1.0;
    for (std::size_t i = 2; i <= n; ++i) {
        f *= static_cast<double>(i);
    }
    return f;
}

struct ProductTerm {
    std::size_t r = 0;
    std::size_t l = 0;
    std::size_t order = 0;
    double coefficient = 0.0;
    DiscretizedKernel kernel;
};

/// Terms of I_p(f) I_q(g) = sum_{r,l} r! C(p,r) C(q,r) C(r,l) I_{p+q-r-l}(sym(f *_r^l g)).
inline std::vector<ProductTerm> product_formula_terms(const DiscretizedKernel& f,
                                                      const DiscretizedKernel& g)
{
    const std::size_t p = f.order();
    const std::size_t q = g.order();
    if (p > 3 || q > 3) {
        throw ValidationError("product_formula_terms: orders above 3 are not supported");
    }
    std::vector<ProductTerm> terms;
    for (std::size_t r = 0; r <= std::min(p, q); ++r) {
        for (std::size_t l = 0; l <= r; ++l) {
            const double coef = factorial(r) * binomial(p, r) * binomial(q, r) * binomial(r, l);
            terms.push_back({r, l, p + q - r - l, coef, symmetrize(contract(f, g, r, l))});
        }
    }
    return terms;
}

struct StarNorm {
    std::size_t r = 0;
    std::size_t l = 0;
    double value = 0.0;
};

/// Hypotheses of the perturbed-chaos Poisson limit theorem for one kernel.
struct ChaosConditionRow {
    std::size_t index = 0;
    std::vector<StarNorm> star_norms;         // ||f *_r^l f||, r = 1..q, l = 1..min(r, q-1)
    double l4 = 0.0;                          // ||f||_{L^4}
    double condition_iii = 0.0;               // int f^2 + q!^2 f^4 - 2 q! f^3
    std::vector<double> assumption_norms;     // ||f *_q^{q-r} f||_{L^2(mu^r)}, r = 1..q
    bool bounded = true;                      // finite values on a finite-mass space
};

inline ChaosConditionRow chaos_limit_row(const DiscretizedKernel& f, std::size_t index = 0)
{
    const std::size_t q = f.order();
    if (q < 1) {
        throw std::domain_error("chaos_limit_conditions: order must be at least 1");
    }
    ChaosConditionRow row;
    row.index = index;
    for (std::size_t r = 1; r <= q; ++r) {
        for (std::size_t l = 1; l <= std::min(r, q - 1); ++l) {
            row.star_norms.push_back({r, l, l2_norm(contract(f, f, r, l))});
        }
    }
    row.l4 = l4_norm(f);
    // f^2 + q!^2 f^4 - 2 q! f^3 = f^2 (1 - q! f)^2, evaluated in factored form.
    const double qf = factorial(q);
    double cond = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double v = f[i];
        if (!std::isfinite(v)) {
            row.bounded = false;
        }
        const double t = 1.0 - qf * v;
        cond += v * v * t * t * f.cell_measure(i);
    }
    row.condition_iii = cond;
    for (std::size_t r = 1; r <= q; ++r) {
        row.assumption_norms.push_back(l2_norm(contract(f, f, q, q - r)));
    }
    return row;
}

inline std::vector<ChaosConditionRow> chaos_limit_conditions(const std::vector<DiscretizedKernel>& family)
{
    std::vector<ChaosConditionRow> rows;
    rows.reserve(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        rows.push_back(chaos_limit_row(family[i], i));
    }
    return rows;
}

/// CSV: index, star norms, l4, condition_iii, assumption norms, bounded.
inline void write_conditions_csv(std::ostream& os, const std::vector<ChaosConditionRow>& rows,
                                 const std::vector<double>& labels = {},
                                 const std::vector<double>& fubini = {})
{
    if (rows.empty()) {
        return;
    }
    os << "index";
    if (!labels.empty()) {
        os << ",label";
    }
    for (const auto& s : rows.front().star_norms) {
        os << fmt::format(",star_{}_{}", s.r, s.l);
    }
    os << ",l4,condition_iii";
    for (std::size_t r = 1; r <= rows.front().assumption_norms.size(); ++r) {
        os << fmt::format(",assumption_{}", r);
    }
    os << ",bounded";
    if (!fubini.empty()) {
        os << ",fubini";
    }
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        os << row.index;
        if (!labels.empty()) {
            os << fmt::format(",{}", labels[i]);
        }
        for (const auto& s : row.star_norms) {
            os << fmt::format(",{}", s.value);
        }
        os << fmt::format(",{},{}", row.l4, row.condition_iii);
        for (double a : row.assumption_norms) {
            os << fmt::format(",{}", a);
        }
        os << (row.bounded ? ",1" : ",0");
        if (!fubini.empty()) {
            os << fmt::format(",{}", fubini[i]);
        }
        os << '\n';
    }
}

inline DiscretizedKernel random_symmetric_kernel(const DiscretizedSpace& space, std::size_t q,
                                                 Engine& eng)
{
    DiscretizedKernel f(space, q);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = uniform(eng, -1.0, 1.0);
    }
    return symmetrize(f);
}

/// (1/q!) 1_H on the off-diagonal cells selected by `in_set` (called with the
/// sorted multi-index, so the result is symmetric).
template <class Pred>
DiscretizedKernel indicator_kernel(const DiscretizedSpace& space, std::size_t q, Pred&& in_set)
{
    DiscretizedKernel f(space, q);
    const double v = 1.0 / factorial(q);
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto idx = f.unflat(i);
        std::sort(idx.begin(), idx.end());
        const bool diagonal = std::adjacent_find(idx.begin(), idx.end()) != idx.end();
        if (!diagonal && in_set(idx)) {
            f[i] = v;
        }
    }
    return f;
}

namespace detail {

// int_a^b of the triangle density (h - |u - m|)_+ du.
inline double triangle_mass(double m, double h, double a, double b)
{
    auto primitive = [m, h](double u) {
        const double t = std::clamp(u - m, -h, h);
        return t >= 0.0 ? 0.5 * h * h + h * t - 0.5 * t * t : 0.5 * (h + t) * (h + t);
    };
    return a < b ? primitive(b) - primitive(a) : 0.0;
}

}  // namespace detail

/// Cell average of f_2 = (1/2) 1_{|x - y| < delta} on n equal cells of
/// [-1/2, 1/2], with mu = lambda * Lebesgue (weights lambda / n). Exact: the
/// difference of two uniform cell points has a triangular density.
inline DiscretizedKernel gilbert_kernel_1d(std::size_t n, double lambda, double delta)
{
    const auto space = DiscretizedSpace::uniform(n, lambda);
    DiscretizedKernel f(space, 2);
    const double h = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double m = (static_cast<double>(i) - static_cast<double>(j)) * h;
            const double area = detail::triangle_mass(m, h, -delta, delta);
            f[i * n + j] = 0.5 * area / (h * h);
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Smooth vanishing perturbation diagnostics for B = I_1(g)

struct SvpRow {
    double lambda = 0.0;
    double second_moment = 0.0;    // E[B^2] = int g^2 dmu
    double derivative_l2 = 0.0;    // E ||DB||^2_{L^2(mu)} = int g^2 dmu
    double derivative_l4 = 0.0;    // E ||DB||^4_{L^4(mu)} = int g^4 dmu
};

/// For B = I_1(g) one has D_z B = g(z), so the three quantities reduce to
/// deterministic integrals of g against mu.
inline SvpRow svp_row(double lambda, const FirstOrderKernel& g, const Window& window)
{
    const std::size_t order = section_gauss_order(window.dim);
    const double g2 = lambda * piecewise_gauss_integral(
                                   window, g.kinks, [&](const Point& z) { return std::pow(g.g(z), 2); },
                                   order);
    const double g4 = lambda * piecewise_gauss_integral(
                                   window, g.kinks, [&](const Point& z) { return std::pow(g.g(z), 4); },
                                   order);
    return {lambda, g2, g2, g4};
}

template <class Family>
std::vector<SvpRow> svp_diagnostics(const std::vector<double>& lambdas, Family&& family,
                                    const Window& window)
{
    std::vector<SvpRow> rows;
    for (double lambda : lambdas) {
        rows.push_back(svp_row(lambda, family(lambda), window));
    }
    return rows;
}

}  // namespace ppstein
