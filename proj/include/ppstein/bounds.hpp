#pragma once

// Monte Carlo assembly of the explicit Malliavin-Stein total-variation bound
// and the rate experiment for edge counts of sparse Gilbert graphs.

#include "ppstein/chaos.hpp"
#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/malliavin.hpp"
#include "ppstein/parallel.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/stein_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace ppstein {

/// Per-replication quantities; every integral is against mu = lambda * l.
struct ReplicationTerms {
    double F = 0.0;
    double cdc = 0.0;          // <DF, -DL^{-1}F>
    double term2 = 0.0;        // int |D F (D F - 1) D L^{-1} F| dmu
    double xi1_sq = 0.0;       // int (D L^{-1} F)^2 dmu
    double xi2_sq = 0.0;       // int (D F)^2 (D F - 1)^2 dmu
    double inner_error = 0.0;  // z-integration error estimate for cdc
};

/// Any functional with a finite-chaos structure; z-integrals by integrate_z.
class GenericChaosModel {
  public:
    GenericChaosModel(Functional f, std::size_t n_z = 256,
                      ZIntegration mode = ZIntegration::stratified)
        : f_(std::move(f)), n_z_(n_z), mode_(mode)
    {
        if (!f_.chaos) {
            throw std::domain_error("GenericChaosModel: functional has no chaos structure");
        }
    }

    [[nodiscard]] const ProcessModel& process() const { return f_.chaos->model; }
    [[nodiscard]] double mean() const { return f_.chaos->constant; }
    [[nodiscard]] bool integer_valued() const { return f_.integer_valued; }

    ReplicationTerms operator()(const RngStream& stream) const
    {
        const auto& chaos = *f_.chaos;
        const auto omega = sample_process(chaos.model.window, chaos.model.intensity, stream);
        ReplicationTerms t;
        t.F = f_(omega);
        const auto cdc = carre_du_champ(chaos, omega, n_z_, stream.child(1), mode_);
        t.cdc = cdc.value;
        t.inner_error = cdc.error;
        t.term2 = integrate_z(chaos.model, n_z_, stream.child(2), mode_, [&](const Point& z) {
                      const double d = diff_chaos(chaos, omega, z);
                      return std::abs(d * (d - 1.0) * neg_DLinv(chaos, omega, z));
                  }).value;
        t.xi1_sq = integrate_z(chaos.model, n_z_, stream.child(3), mode_, [&](const Point& z) {
                       const double g = neg_DLinv(chaos, omega, z);
                       return g * g;
                   }).value;
        t.xi2_sq = integrate_z(chaos.model, n_z_, stream.child(4), mode_, [&](const Point& z) {
                       const double d = diff_chaos(chaos, omega, z);
                       return d * d * (d - 1.0) * (d - 1.0);
                   }).value;
        return t;
    }

  private:
    Functional f_;
    std::size_t n_z_;
    ZIntegration mode_;
};

/// Edge count F* of the graph with connection rule H^ on the window, using
/// D_z F* = deg(z) and -D_z L^{-1} F* = (f_1(z) + deg(z)) / 2.
/// d = 1: exact piecewise integration over the arrangement of neighbourhood
/// intervals. d >= 2: the integrands vanish off the union of neighbourhoods
/// (apart from f_1^2 / 4, integrated deterministically), so z is sampled in
/// stratified cubes around each point with weight 1_H(z - y) / deg(z).
class EdgeCountModel {
  public:
    EdgeCountModel(ConnectionRule rule, double lambda, Window window,
                   std::size_t strata_per_axis = 4)
        : rule_(std::move(rule)),
          window_(window),
          lambda_(lambda),
          strata_(std::max<std::size_t>(1, strata_per_axis)),
          chaos_(edge_count_chaos(rule_, lambda, window))
    {
        const auto& f1 = *chaos_.first;
        xi1_base_ = lambda_ * piecewise_gauss_integral(
                                  window_, f1.kinks,
                                  [&](const Point& z) { return 0.25 * f1.g(z) * f1.g(z); },
                                  section_gauss_order(window_.dim));
    }

    EdgeCountModel(ConnectionRule rule, double lambda)
        : EdgeCountModel(rule, lambda, Window::unit(rule.dim()))
    {
    }

    [[nodiscard]] ProcessModel process() const { return {window_, lambda_}; }
    [[nodiscard]] double mean() const { return chaos_.constant; }
    [[nodiscard]] bool integer_valued() const { return true; }
    [[nodiscard]] const FiniteChaosFunctional& chaos() const { return chaos_; }
    [[nodiscard]] const ConnectionRule& rule() const { return rule_; }

    [[nodiscard]] double f1(const Point& z) const { return lambda_ * section_volume(rule_, window_, z); }

    ReplicationTerms operator()(const RngStream& stream) const
    {
        const auto omega = sample_process(window_, lambda_, stream);
        return terms(omega, stream.child(1));
    }

    [[nodiscard]] ReplicationTerms terms(const PointConfiguration& omega, const RngStream& inner) const
    {
        if (rule_.intervals_1d()) {
            return exact_1d(omega);
        }
        return localized(omega, inner);
    }

  private:
    struct Accumulator {
        double cdc = 0.0;
        double term2 = 0.0;
        double xi1 = 0.0;
        double xi2 = 0.0;
    };

    [[nodiscard]] ReplicationTerms exact_1d(const PointConfiguration& omega) const
    {
        const double h = window_.half_width[0];
        const auto intervals = *rule_.intervals_1d();
        std::vector<std::pair<double, int>> events;
        events.reserve(2 * intervals.size() * omega.size() + 8);
        for (const auto& y : omega.points()) {
            for (const auto& [a, b] : intervals) {
                events.emplace_back(std::clamp(y[0] + a, -h, h), 1);
                events.emplace_back(std::clamp(y[0] + b, -h, h), -1);
            }
        }
        events.emplace_back(-h, 0);
        events.emplace_back(h, 0);
        for (double k : chaos_.first->kinks) {
            if (k > -h && k < h) {
                events.emplace_back(k, 0);
            }
        }
        std::sort(events.begin(), events.end());

        // Between breakpoints deg is constant and f_1 is affine, so Simpson's
        // rule is exact for every integrand below (at most quadratic in f_1).
        double cdc = 0.0;
        double term2 = 0.0;
        double xi1 = 0.0;
        double xi2 = 0.0;
        long deg = 0;
        for (std::size_t i = 0; i + 1 < events.size(); ++i) {
            deg += events[i].second;
            const double a = events[i].first;
            const double b = events[i + 1].first;
            if (!(b > a)) {
                continue;
            }
            const auto k = static_cast<double>(deg);
            const double fa = f1(Point{a, 0.0, 0.0});
            const double fm = f1(Point{0.5 * (a + b), 0.0, 0.0});
            const double fb = f1(Point{b, 0.0, 0.0});
            auto simpson = [&](auto&& g) { return (b - a) / 6.0 * (g(fa) + 4.0 * g(fm) + g(fb)); };
            xi1 += simpson([&](double f) { return 0.25 * (f + k) * (f + k); });
            if (deg > 0) {
                cdc += simpson([&](double f) { return 0.5 * k * (f + k); });
                term2 += simpson([&](double f) { return 0.5 * k * (k - 1.0) * (f + k); });
                xi2 += (b - a) * k * k * (k - 1.0) * (k - 1.0);
            }
        }
        ReplicationTerms t;
        t.F = static_cast<double>(edge_count(omega, rule_));
        t.cdc = lambda_ * cdc;
        t.term2 = lambda_ * term2;
        t.xi1_sq = lambda_ * xi1;
        t.xi2_sq = lambda_ * xi2;
        return t;
    }

    [[nodiscard]] ReplicationTerms localized(const PointConfiguration& omega, const RngStream& inner) const
    {
        const std::size_t dim = window_.dim;
        const double r = rule_.radius();
        const GridIndex index(omega, r);
        Engine eng = inner.engine();
        const std::size_t s2 = dim >= 2 ? strata_ : 1;
        const std::size_t s3 = dim >= 3 ? strata_ : 1;
        const double cells = static_cast<double>(strata_ * s2 * s3);

        Accumulator total;
        double cdc_var = 0.0;
        for (const auto& y : omega.points()) {
            Point lo{0.0, 0.0, 0.0};
            Point hi{0.0, 0.0, 0.0};
            double vol = 1.0;
            for (std::size_t i = 0; i < dim; ++i) {
                lo[i] = std::max(y[i] - r, -window_.half_width[i]);
                hi[i] = std::min(y[i] + r, window_.half_width[i]);
                vol *= hi[i] - lo[i];
            }
            Accumulator local;
            double cdc_sq = 0.0;
            for (std::size_t a = 0; a < strata_; ++a) {
                for (std::size_t b = 0; b < s2; ++b) {
                    for (std::size_t c = 0; c < s3; ++c) {
                        const std::array<std::size_t, kMaxDim> cell{a, b, c};
                        Point z{0.0, 0.0, 0.0};
                        for (std::size_t i = 0; i < dim; ++i) {
                            const double u = (static_cast<double>(cell[i]) + uniform01(eng)) /
                                             static_cast<double>(strata_);
                            z[i] = lo[i] + (hi[i] - lo[i]) * u;
                        }
                        if (!rule_.connects(z, y)) {
                            continue;
                        }
                        const auto k = static_cast<double>(degree(index, rule_, z));
                        const double f = f1(z);
                        const double w = vol / k;
                        const double cdc_z = w * 0.5 * k * (f + k);
                        local.cdc += cdc_z;
                        cdc_sq += cdc_z * cdc_z;
                        local.term2 += w * 0.5 * k * (k - 1.0) * (f + k);
                        local.xi1 += w * 0.25 * ((f + k) * (f + k) - f * f);
                        local.xi2 += w * k * k * (k - 1.0) * (k - 1.0);
                    }
                }
            }
            const double mean = local.cdc / cells;
            cdc_var += std::max(0.0, cdc_sq / cells - mean * mean) / cells;
            total.cdc += mean;
            total.term2 += local.term2 / cells;
            total.xi1 += local.xi1 / cells;
            total.xi2 += local.xi2 / cells;
        }
        ReplicationTerms t;
        t.F = static_cast<double>(edge_count(omega, rule_));
        t.cdc = lambda_ * total.cdc;
        t.term2 = lambda_ * total.term2;
        t.xi1_sq = xi1_base_ + lambda_ * total.xi1;
        t.xi2_sq = lambda_ * total.xi2;
        t.inner_error = lambda_ * std::sqrt(cdc_var);
        return t;
    }

    ConnectionRule rule_;
    Window window_;
    double lambda_;
    std::size_t strata_;
    FiniteChaosFunctional chaos_;
    double xi1_base_ = 0.0;
};

/// Replication i uses stream (master_seed, stream_prefix | i).
template <class Model>
std::vector<ReplicationTerms> simulate(const Model& model, std::size_t reps, std::uint64_t master_seed,
                                       std::size_t workers, std::uint64_t stream_prefix = 0)
{
    return parallel_map<ReplicationTerms>(reps, workers, [&](std::size_t i) {
        return model(RngStream{master_seed, stream_prefix | static_cast<std::uint64_t>(i)});
    });
}

namespace detail {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    double var = 0.0;  // unbiased sample variance
};

template <class Fn>
MeanSe mean_se(const std::vector<ReplicationTerms>& s, Fn&& fn)
{
    MeanSe r;
    const auto n = static_cast<double>(s.size());
    if (s.empty()) {
        return r;
    }
    for (const auto& t : s) {
        r.mean += fn(t);
    }
    r.mean /= n;
    double ss = 0.0;
    for (const auto& t : s) {
        const double d = fn(t) - r.mean;
        ss += d * d;
    }
    r.var = s.size() > 1 ? ss / (n - 1.0) : 0.0;
    r.se = std::sqrt(r.var / n);
    return r;
}

// sqrt of a mean with a delta-method standard error.
inline std::pair<double, double> sqrt_with_se(const MeanSe& m)
{
    const double v = std::sqrt(std::max(0.0, m.mean));
    return {v, v > 0.0 ? m.se / (2.0 * v) : 0.0};
}

inline double stein_prefactor(double c) { return -std::expm1(-c) / c; }

}  // namespace detail

enum class Term1Form { l1, l2 };

struct BoundReport {
    double c = 0.0;              // target Poisson mean
    double c_prime = 0.0;        // E[F] from the chaos constant
    double mean_shift = 0.0;     // |c - c'|
    Term1Form form = Term1Form::l1;
    double term1 = 0.0;
    double term1_stderr = 0.0;
    double term2 = 0.0;
    double term2_stderr = 0.0;
    double prefactor1 = 0.0;     // (1 - e^{-c'}) / c'
    double prefactor2 = 0.0;     // (1 - e^{-c'}) / c'^2
    double total = 0.0;
    double total_stderr = 0.0;
    double term1_sup = 0.0;      // largest per-replication term1 contribution
    double term2_sup = 0.0;
    double inner_error = 0.0;    // mean z-integration error of the cdc
    double mean_F = 0.0;
    double var_F = 0.0;
    double tv_emp = std::numeric_limits<double>::quiet_NaN();
    double tv_err = std::numeric_limits<double>::quiet_NaN();
    std::size_t reps = 0;
    std::uint64_t seed = 0;
};

inline std::vector<std::uint64_t> integer_samples(const std::vector<ReplicationTerms>& s)
{
    std::vector<std::uint64_t> out;
    out.reserve(s.size());
    for (const auto& t : s) {
        if (!(t.F >= 0.0) || t.F != std::floor(t.F) || t.F > 9.0e15) {
            throw ContractViolation("bound assembly needs a Z_+-valued functional, got " +
                                    std::to_string(t.F));
        }
        out.push_back(static_cast<std::uint64_t>(t.F));
    }
    return out;
}

/// total = |c - c'| + (1 - e^{-c'})/c' * term1 + (1 - e^{-c'})/c'^2 * term2,
/// with term1 = E|c' - cdc| (L1) or sqrt(E (c' - cdc)^2) (L2).
inline BoundReport assemble_bound(const std::vector<ReplicationTerms>& s, double c, double c_prime,
                                  std::uint64_t seed, Term1Form form = Term1Form::l1)
{
    if (!(c > 0.0)) {
        throw std::domain_error("assemble_bound: target mean must be positive");
    }
    if (!(c_prime > 0.0)) {
        throw ContractViolation("assemble_bound: E[F] must be positive");
    }
    const auto ints = integer_samples(s);
    BoundReport b;
    b.c = c;
    b.c_prime = c_prime;
    b.mean_shift = std::abs(c - c_prime);
    b.form = form;
    b.reps = s.size();
    b.seed = seed;
    b.prefactor1 = detail::stein_prefactor(c_prime);
    b.prefactor2 = b.prefactor1 / c_prime;

    const auto t2 = detail::mean_se(s, [](const ReplicationTerms& t) { return t.term2; });
    b.term2 = t2.mean;
    b.term2_stderr = t2.se;
    for (const auto& t : s) {
        b.term1_sup = std::max(b.term1_sup, std::abs(c_prime - t.cdc));
        b.term2_sup = std::max(b.term2_sup, t.term2);
    }
    if (form == Term1Form::l1) {
        const auto t1 = detail::mean_se(s, [&](const ReplicationTerms& t) { return std::abs(c_prime - t.cdc); });
        b.term1 = t1.mean;
        b.term1_stderr = t1.se;
        b.total_stderr = detail::mean_se(s, [&](const ReplicationTerms& t) {
                             return b.prefactor1 * std::abs(c_prime - t.cdc) + b.prefactor2 * t.term2;
                         }).se;
    } else {
        const auto sq = detail::mean_se(s, [&](const ReplicationTerms& t) {
            return (c_prime - t.cdc) * (c_prime - t.cdc);
        });
        std::tie(b.term1, b.term1_stderr) = detail::sqrt_with_se(sq);
        const double slope = b.term1 > 0.0 ? 0.5 / b.term1 : 0.0;
        b.total_stderr = detail::mean_se(s, [&](const ReplicationTerms& t) {
                             return b.prefactor1 * slope * (c_prime - t.cdc) * (c_prime - t.cdc) +
                                    b.prefactor2 * t.term2;
                         }).se;
    }
    b.total = b.mean_shift + b.prefactor1 * b.term1 + b.prefactor2 * b.term2;
    b.inner_error = detail::mean_se(s, [](const ReplicationTerms& t) { return t.inner_error; }).mean;

    const auto f = detail::mean_se(s, [](const ReplicationTerms& t) { return t.F; });
    b.mean_F = f.mean;
    b.var_F = f.var;
    if (ints.size() >= 100) {
        const auto tv = tv_empirical(ints, c);
        b.tv_emp = tv.distance;
        b.tv_err = tv.error_bar;
    }
    return b;
}

/// Combined standard error for comparing tv_emp with the bound.
inline double combined_stderr(const BoundReport& b)
{
    return std::hypot(b.total_stderr, std::isnan(b.tv_err) ? 0.0 : b.tv_err);
}

template <class Model>
BoundReport estimate_bound(const Model& model, double c, std::size_t reps, std::uint64_t seed,
                           std::size_t workers = 1, Term1Form form = Term1Form::l1,
                           std::uint64_t stream_prefix = 0)
{
    if (!model.integer_valued()) {
        throw ContractViolation("estimate_bound: functional is not flagged integer-valued");
    }
    const auto samples = simulate(model, reps, seed, workers, stream_prefix);
    return assemble_bound(samples, c, model.mean(), seed, form);
}

inline BoundReport estimate_bound(const Functional& f, double c, std::size_t reps, std::uint64_t seed,
                                  std::size_t workers = 1, Term1Form form = Term1Form::l1)
{
    if (!f.integer_valued) {
        throw ContractViolation("estimate_bound: functional is not flagged integer-valued");
    }
    return estimate_bound(GenericChaosModel(f), c, reps, seed, workers, form);
}

struct XiReport {
    double xi0 = 0.0;
    double xi0_err = 0.0;
    double xi1 = 0.0;
    double xi1_err = 0.0;
    double xi2 = 0.0;
    double xi2_err = 0.0;
    double lambda = 0.0;
    double psi = 0.0;
    double lambda_psi = 0.0;
    double bound = 0.0;   // |c - c'| + p1 Xi_0 + p2 Xi_1 Xi_2
};

inline XiReport xi_from(const std::vector<ReplicationTerms>& s, double c, double c_prime,
                        double lambda, double psi)
{
    XiReport x;
    x.lambda = lambda;
    x.psi = psi;
    x.lambda_psi = lambda * psi;
    std::tie(x.xi0, x.xi0_err) = detail::sqrt_with_se(detail::mean_se(
        s, [&](const ReplicationTerms& t) { return (c_prime - t.cdc) * (c_prime - t.cdc); }));
    std::tie(x.xi1, x.xi1_err) =
        detail::sqrt_with_se(detail::mean_se(s, [](const ReplicationTerms& t) { return t.xi1_sq; }));
    std::tie(x.xi2, x.xi2_err) =
        detail::sqrt_with_se(detail::mean_se(s, [](const ReplicationTerms& t) { return t.xi2_sq; }));
    if (c_prime > 0.0) {
        const double p1 = detail::stein_prefactor(c_prime);
        x.bound = std::abs(c - c_prime) + p1 * x.xi0 + p1 / c_prime * x.xi1 * x.xi2;
    }
    return x;
}

/// Xi_0, Xi_1, Xi_2 for the edge count of `rule` at intensity lambda.
inline XiReport xi_estimates(const ConnectionRule& rule, double lambda, double c, std::size_t reps,
                             std::uint64_t seed, std::size_t workers = 1)
{
    const EdgeCountModel model(rule, lambda);
    const auto s = simulate(model, reps, seed, workers);
    return xi_from(s, c, model.mean(), lambda, occupation_psi(rule));
}

struct VarianceCheck {
    double var_mc = 0.0;
    double cdc_mean = 0.0;
    double stderr_ = 0.0;
    double z_score = 0.0;
};

/// Compares the sample variance of F with the mean carre du champ through the
/// paired per-replication difference cdc_i - n/(n-1) (F_i - mean F)^2.
inline VarianceCheck variance_check(const std::vector<ReplicationTerms>& s)
{
    VarianceCheck v;
    if (s.size() < 2) {
        return v;
    }
    const auto f = detail::mean_se(s, [](const ReplicationTerms& t) { return t.F; });
    const auto n = static_cast<double>(s.size());
    const auto d = detail::mean_se(s, [&](const ReplicationTerms& t) {
        return t.cdc - n / (n - 1.0) * (t.F - f.mean) * (t.F - f.mean);
    });
    v.var_mc = f.var;
    v.cdc_mean = detail::mean_se(s, [](const ReplicationTerms& t) { return t.cdc; }).mean;
    v.stderr_ = d.se;
    if (d.se > 0.0) {
        v.z_score = d.mean / d.se;
    } else {
        v.z_score = d.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d.mean);
    }
    return v;
}

template <class Model>
VarianceCheck variance_check(const Model& model, std::size_t reps, std::uint64_t seed,
                             std::size_t workers = 1)
{
    return variance_check(simulate(model, reps, seed, workers));
}

struct RateRow {
    double lambda = 0.0;
    double delta = 0.0;
    double psi = 0.0;
    double lambda_psi = 0.0;
    std::size_t reps = 0;
    double mean_F = 0.0;
    double var_F = 0.0;
    double tv_emp = 0.0;
    double tv_err = 0.0;
    XiReport xi;
    BoundReport bound;
};

struct RateError {
    double lambda = 0.0;
    std::string message;
};

struct RateResult {
    std::vector<RateRow> rows;
    std::vector<RateError> errors;
    std::optional<double> slope;   // least-squares slope of log tv_emp against log lambda
};

struct RateConfig {
    std::size_t dim = 1;
    double c = 2.0;                 // graph limit mean is c / 2
    std::vector<double> lambdas{25, 50, 100, 200, 400};
    std::size_t reps = 100000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    Term1Form form = Term1Form::l1;
};

inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            pts.emplace_back(std::log(x[i]), std::log(y[i]));
        }
    }
    if (pts.size() < 2) {
        return std::nullopt;
    }
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [a, b] : pts) {
        mx += a;
        my += b;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [a, b] : pts) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if (sxx == 0.0) {
        return std::nullopt;
    }
    return sxy / sxx;
}

/// Calibrated Gilbert family: delta_lambda chosen so E[F*] = c / 2, compared
/// with Po(c / 2). Row k uses stream ids (k << 40) | i.
inline RateResult rate_experiment(const RateConfig& cfg)
{
    if (cfg.lambdas.empty()) {
        throw ValidationError("rate_experiment: empty lambda grid");
    }
    if (!(cfg.c > 0.0)) {
        throw ValidationError("rate_experiment: c must be positive");
    }
    for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
        if (!(cfg.lambdas[i] > 0.0) || (i > 0 && !(cfg.lambdas[i] > cfg.lambdas[i - 1]))) {
            throw ValidationError("rate_experiment: lambda grid must be positive and increasing");
        }
    }
    if (cfg.reps < 100) {
        throw ValidationError("rate_experiment: need at least 100 replications");
    }
    RateResult result;
    const double target = 0.5 * cfg.c;
    for (std::size_t k = 0; k < cfg.lambdas.size(); ++k) {
        const double lambda = cfg.lambdas[k];
        double delta = 0.0;
        try {
            delta = calibrate_delta(cfg.dim, lambda, target);
        } catch (const CalibrationError& e) {
            result.errors.push_back({lambda, e.what()});
            continue;
        }
        const auto rule = ConnectionRule::gilbert(cfg.dim, delta);
        const EdgeCountModel model(rule, lambda);
        const auto s = simulate(model, cfg.reps, cfg.seed, cfg.workers, static_cast<std::uint64_t>(k) << 40);
        RateRow row;
        row.lambda = lambda;
        row.delta = delta;
        row.psi = occupation_psi(rule);
        row.lambda_psi = lambda * row.psi;
        row.reps = cfg.reps;
        row.bound = assemble_bound(s, target, model.mean(), cfg.seed, cfg.form);
        row.xi = xi_from(s, target, model.mean(), lambda, row.psi);
        row.mean_F = row.bound.mean_F;
        row.var_F = row.bound.var_F;
        row.tv_emp = row.bound.tv_emp;
        row.tv_err = row.bound.tv_err;
        result.rows.push_back(row);
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& r : result.rows) {
        xs.push_back(r.lambda);
        ys.push_back(r.tv_emp);
    }
    result.slope = loglog_slope(xs, ys);
    return result;
}

}  // namespace ppstein
