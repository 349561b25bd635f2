#pragma once

// Poisson-law arithmetic, the Chen-Stein equation and total-variation
// distances between laws on the nonnegative integers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppstein {

/// Upper tail mass allowed by truncate_poisson.
inline constexpr double kPoissonTailTolerance = 1e-13;

/// log(k!) with an exact integer product for k <= 20.
inline double log_factorial(std::uint64_t k)
{
    if (k <= 20) {
        std::uint64_t fact = 1;
        for (std::uint64_t i = 2; i <= k; ++i) {
            fact *= i;
        }
        return std::log(static_cast<double>(fact));
    }
    return std::lgamma(static_cast<double>(k) + 1.0);
}

/// e^{-c} c^k / k!, evaluated in log space.
inline double poisson_pmf(double c, std::uint64_t k)
{
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw std::domain_error("poisson_pmf: mean must be finite and nonnegative");
    }
    if (c == 0.0) {
        return k == 0 ? 1.0 : 0.0;
    }
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(c) - c - log_factorial(k));
}

/// Probability mass function on {0, ..., k_max} together with a bound on the
/// mass that lies beyond k_max.
struct IntegerPmf {
    std::vector<double> weights;
    double tail_bound = 0.0;

    [[nodiscard]] std::size_t k_max() const { return weights.empty() ? 0 : weights.size() - 1; }

    [[nodiscard]] double operator()(std::size_t k) const
    {
        return k < weights.size() ? weights[k] : 0.0;
    }

    [[nodiscard]] double total_mass() const
    {
        return std::accumulate(weights.begin(), weights.end(), 0.0);
    }

    /// Nonnegative weights whose mass plus tail bound is 1 within 1e-12.
    [[nodiscard]] bool is_valid(double tol = 1e-12) const
    {
        if (weights.empty() || !(tail_bound >= 0.0)) {
            return false;
        }
        for (double w : weights) {
            if (!(w >= 0.0)) {
                return false;
            }
        }
        const double mass = total_mass() + tail_bound;
        return mass >= 1.0 - tol && mass <= 1.0 + tol;
    }
};

namespace detail {

// Chernoff bound on log P(Po(c) >= m), valid for m > c.
inline double log_chernoff_tail(double c, std::uint64_t m)
{
    const double md = static_cast<double>(m);
    return -c + md * (1.0 + std::log(c) - std::log(md));
}

}  // namespace detail

/// Smallest k_max such that the Chernoff bound on P(Po(c) > k_max) is at most
/// kPoissonTailTolerance; the search starts from ceil(c + 10 sqrt(c) + 20).
inline std::uint64_t poisson_truncation_point(double c)
{
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw std::domain_error("truncate_poisson: mean must be finite and nonnegative");
    }
    if (c == 0.0) {
        return 0;
    }
    const double log_tol = std::log(kPoissonTailTolerance);
    // m is the first omitted index, m = k_max + 1.
    auto m = static_cast<std::uint64_t>(std::ceil(c + 10.0 * std::sqrt(c) + 20.0)) + 1;
    while (detail::log_chernoff_tail(c, m) > log_tol) {
        ++m;
    }
    while (m > 1 && static_cast<double>(m - 1) > c &&
           detail::log_chernoff_tail(c, m - 1) <= log_tol) {
        --m;
    }
    return m - 1;
}

inline IntegerPmf truncate_poisson(double c)
{
    const std::uint64_t k_max = poisson_truncation_point(c);
    IntegerPmf pmf;
    pmf.weights.resize(k_max + 1);
    for (std::uint64_t k = 0; k <= k_max; ++k) {
        pmf.weights[k] = poisson_pmf(c, k);
    }
    pmf.tail_bound = c == 0.0 ? 0.0 : std::exp(detail::log_chernoff_tail(c, k_max + 1));
    return pmf;
}

struct TvResult {
    double distance = 0.0;
    double error_bar = 0.0;
};

/// Half the l1 distance over the union of supports; the omitted tails are
/// reported as an error bar.
inline TvResult tv_exact(const IntegerPmf& p, const IntegerPmf& q)
{
    const std::size_t n = std::max(p.weights.size(), q.weights.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sum += std::abs(p(k) - q(k));
    }
    return {0.5 * sum, 0.5 * (p.tail_bound + q.tail_bound)};
}

/// Plug-in total variation between the empirical law of `samples` and Po(c).
/// The estimator is biased upward; error_bar = sqrt(K_eff / n) with K_eff the
/// number of distinct observed values plus k_max of the truncated Po(c).
inline TvResult tv_empirical(std::span<const std::uint64_t> samples, double c)
{
    if (samples.empty()) {
        throw std::domain_error("tv_empirical: empty sample");
    }
    if (samples.size() < 100) {
        throw std::domain_error("tv_empirical: at least 100 samples are required");
    }
    const IntegerPmf target = truncate_poisson(c);

    std::vector<std::uint64_t> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());

    double sum = 0.0;
    double covered_target = 0.0;
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const double p_hat = static_cast<double>(j - i) / n;
        const double p_target = target(static_cast<std::size_t>(
            std::min<std::uint64_t>(sorted[i], std::numeric_limits<std::size_t>::max())));
        sum += std::abs(p_hat - p_target);
        covered_target += p_target;
        ++distinct;
        i = j;
    }
    sum += std::max(0.0, target.total_mass() - covered_target);

    const double k_eff = static_cast<double>(distinct + target.k_max());
    return {0.5 * sum, std::sqrt(k_eff / n)};
}

/// Solution of c f(k+1) - k f(k) = 1_A(k) - P(Po(c) in A) on {0, ..., k_max + 1}
/// with the boundary value f(0) chosen so that the second difference at 0
/// vanishes.
struct SteinSolution {
    double c = 0.0;
    std::vector<std::uint64_t> target_set;  // sorted, unique
    std::vector<double> values;             // f(0), ..., f(k_max + 1)
    double target_probability = 0.0;        // P(Po(c) in A)

    [[nodiscard]] std::size_t k_max() const { return values.size() - 2; }

    [[nodiscard]] bool in_target(std::uint64_t k) const
    {
        return std::binary_search(target_set.begin(), target_set.end(), k);
    }

    /// |c f(k+1) - k f(k) - 1_A(k) + P(Po(c) in A)|, for k <= k_max.
    [[nodiscard]] double residual(std::size_t k) const
    {
        const double indicator = in_target(k) ? 1.0 : 0.0;
        return std::abs(c * values[k + 1] - static_cast<double>(k) * values[k] - indicator +
                        target_probability);
    }

    [[nodiscard]] double max_residual() const
    {
        double worst = 0.0;
        for (std::size_t k = 0; k <= k_max(); ++k) {
            worst = std::max(worst, residual(k));
        }
        return worst;
    }
};

/// Solves the Chen-Stein equation for the target set A.
///
/// The recursion f(k+1) = (k f(k) + 1_A(k) - P(A)) / c amplifies rounding by
/// k / c per step once k > c, so it is evaluated through its closed form
///   f(k+1) = [P(A n {0..k}) - P(A) P({0..k})] / (c p_k),
/// switching to the equivalent tail form
///   f(k+1) = [P(A) P({>k}) - P(A n {>k})] / (c p_k)
/// once P({0..k}) exceeds one half. Both are the unique solution of the same
/// recursion started from f(1) = (1_A(0) - P(A)) / c.
inline SteinSolution stein_solve(double c, std::vector<std::uint64_t> target_set)
{
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw std::domain_error("stein_solve: mean must be positive");
    }
    const std::uint64_t k_max = poisson_truncation_point(c);
    std::sort(target_set.begin(), target_set.end());
    target_set.erase(std::unique(target_set.begin(), target_set.end()), target_set.end());
    if (!target_set.empty() && target_set.back() > k_max) {
        throw std::domain_error("stein_solve: target set exceeds k_max = " +
                                std::to_string(k_max));
    }

    // Extend the pmf past k_max so that upper tails are accurate in relative terms.
    std::vector<double> pmf;
    for (std::uint64_t k = 0;; ++k) {
        const double p = poisson_pmf(c, k);
        pmf.push_back(p);
        if (k > k_max + 1 && (p == 0.0 || p < 1e-40 * pmf[k_max + 1])) {
            break;
        }
    }
    std::vector<char> in_a(k_max + 1, 0);
    for (auto k : target_set) {
        in_a[k] = 1;
    }
    // upper[k] = P(Po(c) >= k), upper_a[k] = P(Po(c) in A, >= k)
    std::vector<double> upper(pmf.size() + 1, 0.0);
    std::vector<double> upper_a(pmf.size() + 1, 0.0);
    for (std::size_t k = pmf.size(); k-- > 0;) {
        upper[k] = upper[k + 1] + pmf[k];
        upper_a[k] = upper_a[k + 1] + ((k <= k_max && in_a[k]) ? pmf[k] : 0.0);
    }
    const double prob_a = upper_a[0];

    SteinSolution sol;
    sol.c = c;
    sol.target_set = std::move(target_set);
    sol.target_probability = prob_a;
    sol.values.assign(k_max + 2, 0.0);

    double lower = 0.0;    // P({0..k})
    double lower_a = 0.0;  // P(A n {0..k})
    for (std::uint64_t k = 0; k <= k_max; ++k) {
        lower += pmf[k];
        lower_a += in_a[k] ? pmf[k] : 0.0;
        double numerator = 0.0;
        if (lower <= 0.5) {
            numerator = lower_a - prob_a * lower;
        } else {
            numerator = prob_a * upper[k + 1] - upper_a[k + 1];
        }
        sol.values[k + 1] = numerator / (c * pmf[k]);
    }
    sol.values[0] = k_max >= 1 ? 2.0 * sol.values[1] - sol.values[2] : sol.values[1];
    return sol;
}

struct MagicFactors {
    double sup_f = 0.0;          // over 0 <= k <= k_max
    double sup_delta_f = 0.0;    // over 0 <= k <= k_max
    double sup_delta2_f = 0.0;   // over 0 <= k < k_max
    double sup_f_positive = 0.0; // |f| over 1 <= k <= k_max, f(0) excluded
};

inline MagicFactors magic_factors(const SteinSolution& s)
{
    MagicFactors m;
    const auto& f = s.values;
    const std::size_t k_max = s.k_max();
    for (std::size_t k = 0; k <= k_max; ++k) {
        m.sup_f = std::max(m.sup_f, std::abs(f[k]));
        if (k >= 1) {
            m.sup_f_positive = std::max(m.sup_f_positive, std::abs(f[k]));
        }
        m.sup_delta_f = std::max(m.sup_delta_f, std::abs(f[k + 1] - f[k]));
        if (k + 2 < f.size()) {
            m.sup_delta2_f = std::max(m.sup_delta2_f, std::abs(f[k + 2] - 2.0 * f[k + 1] + f[k]));
        }
    }
    return m;
}

/// Reference bounds min(1, sqrt(2/(c e))), (1 - e^{-c})/c and (2 - 2e^{-c})/c^2.
inline MagicFactors magic_factor_bounds(double c)
{
    const double one_minus = -std::expm1(-c);
    MagicFactors b;
    b.sup_f = std::min(1.0, std::sqrt(2.0 / (c * std::exp(1.0))));
    b.sup_f_positive = b.sup_f;
    b.sup_delta_f = one_minus / c;
    b.sup_delta2_f = 2.0 * one_minus / (c * c);
    return b;
}

struct MagicFactorCheck {
    bool f_ok = true;
    bool delta_f_ok = true;
    bool delta2_f_ok = true;

    [[nodiscard]] bool all() const { return f_ok && delta_f_ok && delta2_f_ok; }
};

inline MagicFactorCheck check_magic_factors(const MagicFactors& m, double c, double slack = 1e-12)
{
    const MagicFactors b = magic_factor_bounds(c);
    return {m.sup_f <= b.sup_f + slack, m.sup_delta_f <= b.sup_delta_f + slack,
            m.sup_delta2_f <= b.sup_delta2_f + slack};
}

}  // namespace ppstein
