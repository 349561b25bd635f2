#pragma once

// Batch experiment runner. Every subcommand is a pure function of the JSON
// config, the --set overrides and the master seed; output bytes do not depend
// on --workers.

#include "ppstein/bounds.hpp"
#include "ppstein/chaos.hpp"
#include "ppstein/errors.hpp"
#include "ppstein/geom_graph.hpp"
#include "ppstein/malliavin.hpp"
#include "ppstein/point_process.hpp"
#include "ppstein/stein_core.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ppstein::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kInvariantFailure = 1, kValidation = 2 };

struct Options {
    std::string subcommand;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string out_path;
    std::string format = "csv";
    std::vector<std::string> overrides;
};

struct Outcome {
    int code = kOk;
    std::string output;
};

// ---------------------------------------------------------------------------
// Config access

/// Applies `a.b.c=value`; value is parsed as JSON, or taken as a string.
inline void apply_override(json& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ValidationError("--set: empty key component in '" + key + "'");
        }
        if (!node->is_object()) {
            *node = json::object();
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    *node = std::move(value);
}

inline double get_number(const json& cfg, const char* key, double fallback)
{
    if (!cfg.contains(key)) {
        return fallback;
    }
    const auto& v = cfg.at(key);
    if (!v.is_number()) {
        throw ValidationError(fmt::format("config field '{}' must be a number", key));
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw ValidationError(fmt::format("config field '{}' must be finite", key));
    }
    return d;
}

inline std::size_t get_count(const json& cfg, const char* key, std::size_t fallback)
{
    if (!cfg.contains(key)) {
        return fallback;
    }
    const auto& v = cfg.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ValidationError(fmt::format("config field '{}' must be a nonnegative integer", key));
    }
    return v.get<std::size_t>();
}

inline bool get_bool(const json& cfg, const char* key, bool fallback)
{
    if (!cfg.contains(key)) {
        return fallback;
    }
    if (!cfg.at(key).is_boolean()) {
        throw ValidationError(fmt::format("config field '{}' must be a boolean", key));
    }
    return cfg.at(key).get<bool>();
}

inline std::string get_string(const json& cfg, const char* key, const std::string& fallback)
{
    if (!cfg.contains(key)) {
        return fallback;
    }
    if (!cfg.at(key).is_string()) {
        throw ValidationError(fmt::format("config field '{}' must be a string", key));
    }
    return cfg.at(key).get<std::string>();
}

inline std::vector<double> get_numbers(const json& cfg, const char* key, std::vector<double> fallback)
{
    if (!cfg.contains(key)) {
        return fallback;
    }
    const auto& v = cfg.at(key);
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number()) {
                throw ValidationError(fmt::format("config field '{}' must hold numbers", key));
            }
            out.push_back(e.get<double>());
        }
    } else {
        throw ValidationError(fmt::format("config field '{}' must be a number or an array", key));
    }
    for (double d : out) {
        if (!std::isfinite(d)) {
            throw ValidationError(fmt::format("config field '{}' must be finite", key));
        }
    }
    return out;
}

inline std::size_t get_dimension(const json& cfg, std::size_t fallback)
{
    const std::size_t d = get_count(cfg, "d", fallback);
    if (d < 1 || d > kMaxDim) {
        throw ValidationError("config field 'd' must be 1, 2 or 3");
    }
    return d;
}

/// {"kind": "gilbert", "delta": 0.1} or {"kind": "annulus", "inner": .., "outer": ..}.
inline ConnectionRule parse_rule(const json& spec, std::size_t dim)
{
    if (!spec.is_object()) {
        throw ValidationError("rule must be an object");
    }
    const std::string kind = get_string(spec, "kind", "gilbert");
    try {
        if (kind == "gilbert") {
            return ConnectionRule::gilbert(dim, get_number(spec, "delta", 0.1));
        }
        if (kind == "annulus") {
            return ConnectionRule::annulus(dim, get_number(spec, "inner", 0.0), get_number(spec, "outer", 0.1));
        }
    } catch (const std::domain_error& e) {
        throw ValidationError(e.what());
    }
    throw ValidationError("unknown rule kind '" + kind + "'");
}

inline bool want_json(const Options& opt) { return opt.format == "json"; }

inline std::string num(double v) { return fmt::format("{}", v); }

// ---------------------------------------------------------------------------
// stein-check

inline Outcome cmd_stein_check(const json& cfg, const Options& opt, std::uint64_t seed, std::ostream& log)
{
    const auto cs = get_numbers(cfg, "c", {0.5, 1.0, 2.0, 5.0, 10.0});
    const std::size_t subsets = get_count(cfg, "subsets", 200);
    for (double c : cs) {
        if (!(c > 0.0)) {
            throw ValidationError(fmt::format("stein-check: c must be positive, got {}", c));
        }
    }
    std::vector<std::vector<std::uint64_t>> explicit_sets;
    if (cfg.contains("sets")) {
        if (!cfg.at("sets").is_array()) {
            throw ValidationError("stein-check: 'sets' must be an array of arrays");
        }
        for (const auto& s : cfg.at("sets")) {
            if (!s.is_array()) {
                throw ValidationError("stein-check: 'sets' must be an array of arrays");
            }
            std::vector<std::uint64_t> set;
            for (const auto& k : s) {
                if (!k.is_number_integer() || k.get<long long>() < 0) {
                    throw ValidationError("stein-check: set elements must be nonnegative integers");
                }
                set.push_back(k.get<std::uint64_t>());
            }
            explicit_sets.push_back(std::move(set));
        }
    }
    for (double c : cs) {
        const std::uint64_t k_max = poisson_truncation_point(c);
        for (const auto& s : explicit_sets) {
            for (auto k : s) {
                if (k > k_max) {
                    throw ValidationError(fmt::format("stein-check: element {} exceeds k_max = {} at c = {}", k, k_max, c));
                }
            }
        }
    }

    const auto started = std::chrono::steady_clock::now();
    std::ostringstream csv;
    json rows = json::array();
    csv << "c,set,size,max_residual,sup_f,bound_f,sup_delta_f,bound_delta_f,sup_delta2_f,bound_delta2_f,pass\n";
    bool all_pass = true;
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
        const double c = cs[ci];
        const std::uint64_t k_max = poisson_truncation_point(c);
        std::vector<std::vector<std::uint64_t>> sets;
        for (std::size_t s = 0; s < subsets; ++s) {
            Engine eng = RngStream{seed, (static_cast<std::uint64_t>(ci) << 32) | s}.engine();
            std::vector<std::uint64_t> set;
            for (std::uint64_t k = 0; k <= k_max; ++k) {
                if (uniform01(eng) < 0.5) {
                    set.push_back(k);
                }
            }
            sets.push_back(std::move(set));
        }
        sets.insert(sets.end(), explicit_sets.begin(), explicit_sets.end());
        const MagicFactors bounds = magic_factor_bounds(c);
        for (std::size_t si = 0; si < sets.size(); ++si) {
            const auto sol = stein_solve(c, sets[si]);
            const auto m = magic_factors(sol);
            const auto check = check_magic_factors(m, c);
            const double residual = sol.max_residual();
            const bool pass = residual <= 1e-10 && check.all();
            if (!pass) {
                all_pass = false;
                std::string which;
                which += residual <= 1e-10 ? "" : " residual";
                which += check.f_ok ? "" : " sup_f";
                which += check.delta_f_ok ? "" : " sup_delta_f";
                which += check.delta2_f_ok ? "" : " sup_delta2_f";
                log << fmt::format("violation c={} set={} [{}]:{}\n", c, si,
                                   fmt::join(sol.target_set, " "), which);
            }
            csv << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", c, si, sol.target_set.size(), residual,
                               m.sup_f, bounds.sup_f, m.sup_delta_f, bounds.sup_delta_f, m.sup_delta2_f,
                               bounds.sup_delta2_f, pass ? 1 : 0);
            rows.push_back({{"c", c},
                            {"set", si},
                            {"size", sol.target_set.size()},
                            {"max_residual", residual},
                            {"sup_f", m.sup_f},
                            {"bound_f", bounds.sup_f},
                            {"sup_delta_f", m.sup_delta_f},
                            {"bound_delta_f", bounds.sup_delta_f},
                            {"sup_delta2_f", m.sup_delta2_f},
                            {"bound_delta2_f", bounds.sup_delta2_f},
                            {"pass", pass}});
        }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log << fmt::format("stein-check: {} in {:.3f} s\n", all_pass ? "pass" : "FAIL", seconds);
    Outcome o;
    o.code = all_pass ? kOk : kInvariantFailure;
    o.output = want_json(opt) ? json{{"rows", rows}, {"pass", all_pass}, {"seed", seed}}.dump(2) + "\n" : csv.str();
    return o;
}

// ---------------------------------------------------------------------------
// rate

inline const char* kRateColumns =
    "lambda,delta,psi,lambda_psi,reps,mean_F,var_F,tv_emp,tv_err,xi0,xi0_err,xi1,xi1_err,xi2,xi2_err,"
    "bound_total,seed";

inline Outcome cmd_rate(const json& cfg, const Options& opt, std::uint64_t seed, std::ostream& log)
{
    RateConfig rc;
    rc.dim = get_dimension(cfg, 1);
    rc.c = get_number(cfg, "c", 2.0);
    rc.lambdas = get_numbers(cfg, "lambdas", {25, 50, 100, 200, 400});
    rc.reps = get_count(cfg, "reps", 100000);
    rc.seed = seed;
    rc.workers = opt.workers;
    const std::string form = get_string(cfg, "term1", "l1");
    if (form != "l1" && form != "l2") {
        throw ValidationError("rate: 'term1' must be \"l1\" or \"l2\"");
    }
    rc.form = form == "l1" ? Term1Form::l1 : Term1Form::l2;
    if (rc.lambdas.empty()) {
        throw ValidationError("rate: empty lambda grid");
    }
    const RateResult r = rate_experiment(rc);
    for (const auto& e : r.errors) {
        log << fmt::format("rate: lambda={} skipped: {}\n", e.lambda, e.message);
    }

    Outcome o;
    o.code = r.rows.empty() ? kInvariantFailure : kOk;
    if (want_json(opt)) {
        json rows = json::array();
        for (const auto& row : r.rows) {
            rows.push_back({{"lambda", row.lambda},     {"delta", row.delta},
                            {"psi", row.psi},           {"lambda_psi", row.lambda_psi},
                            {"reps", row.reps},         {"mean_F", row.mean_F},
                            {"var_F", row.var_F},       {"tv_emp", row.tv_emp},
                            {"tv_err", row.tv_err},     {"xi0", row.xi.xi0},
                            {"xi0_err", row.xi.xi0_err}, {"xi1", row.xi.xi1},
                            {"xi1_err", row.xi.xi1_err}, {"xi2", row.xi.xi2},
                            {"xi2_err", row.xi.xi2_err}, {"bound_total", row.bound.total},
                            {"seed", seed},             {"bound_stderr", row.bound.total_stderr},
                            {"term1", row.bound.term1}, {"term2", row.bound.term2},
                            {"xi_bound", row.xi.bound}});
        }
        json errors = json::array();
        for (const auto& e : r.errors) {
            errors.push_back({{"lambda", e.lambda}, {"error", e.message}});
        }
        json footer = {{"slope", r.slope ? json(*r.slope) : json(nullptr)}, {"errors", errors}, {"seed", seed}};
        o.output = json{{"rows", rows}, {"footer", footer}}.dump(2) + "\n";
        return o;
    }
    std::ostringstream csv;
    csv << kRateColumns << '\n';
    for (const auto& row : r.rows) {
        csv << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", row.lambda, row.delta, row.psi,
                           row.lambda_psi, row.reps, row.mean_F, row.var_F, row.tv_emp, row.tv_err, row.xi.xi0,
                           row.xi.xi0_err, row.xi.xi1, row.xi.xi1_err, row.xi.xi2, row.xi.xi2_err,
                           row.bound.total, seed);
    }
    for (const auto& row : r.rows) {
        csv << fmt::format("# lambda={} bound_stderr={} term1={} term2={} xi_bound={}\n", row.lambda,
                           row.bound.total_stderr, row.bound.term1, row.bound.term2, row.xi.bound);
    }
    for (const auto& e : r.errors) {
        csv << fmt::format("# error lambda={} {}\n", e.lambda, e.message);
    }
    csv << "# slope=" << (r.slope ? num(*r.slope) : std::string("nan")) << '\n';
    o.output = csv.str();
    return o;
}

// ---------------------------------------------------------------------------
// contraction

inline Outcome cmd_contraction(const json& cfg, const Options& opt, std::uint64_t seed, std::ostream& log)
{
    const std::string family = get_string(cfg, "family", "gilbert");
    const std::size_t q = get_count(cfg, "q", 2);
    const std::size_t n = get_count(cfg, "n", 20);
    if (q < 1 || q > 3) {
        throw ValidationError(fmt::format("contraction: q = {} outside the supported range 1..3", q));
    }
    if (n < 1 || n > 30) {
        throw ValidationError(fmt::format("contraction: n = {} outside the supported range 1..30", n));
    }
    std::vector<DiscretizedKernel> kernels;
    std::vector<double> labels;
    if (family == "gilbert") {
        if (q != 2) {
            throw ValidationError("contraction: the gilbert family is of order 2");
        }
        const double c = get_number(cfg, "c", 2.0);
        for (double lambda : get_numbers(cfg, "lambdas", {25, 50, 100, 200})) {
            double delta = 0.0;
            try {
                delta = calibrate_delta(1, lambda, 0.5 * c);
            } catch (const CalibrationError& e) {
                throw ValidationError(e.what());
            }
            kernels.push_back(gilbert_kernel_1d(n, lambda, delta));
            labels.push_back(lambda);
        }
    } else if (family == "indicator" || family == "random") {
        const std::size_t count = get_count(cfg, "count", 5);
        const double mass = get_number(cfg, "mass", 1.0);
        if (!(mass > 0.0)) {
            throw ValidationError("contraction: 'mass' must be positive");
        }
        const auto space = DiscretizedSpace::uniform(n, mass);
        for (std::size_t i = 0; i < count; ++i) {
            Engine eng = RngStream{seed, i}.engine();
            if (family == "random") {
                kernels.push_back(random_symmetric_kernel(space, q, eng));
            } else {
                std::vector<int> chosen(DiscretizedKernel::ipow(n, q), -1);
                DiscretizedKernel shape(space, q);
                kernels.push_back(indicator_kernel(space, q, [&](const std::vector<std::size_t>& idx) {
                    int& slot = chosen[shape.flat(idx)];
                    if (slot < 0) {
                        slot = uniform01(eng) < 0.5 ? 1 : 0;
                    }
                    return slot == 1;
                }));
            }
            labels.push_back(static_cast<double>(i));
        }
    } else {
        throw ValidationError("contraction: unknown family '" + family + "'");
    }
    if (kernels.empty()) {
        throw ValidationError("contraction: empty family");
    }

    const auto rows = chaos_limit_conditions(kernels);
    std::vector<double> fubini;
    bool ok = true;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        const auto& f = kernels[i];
        const auto& next = kernels[(i + 1) % kernels.size()];
        const auto& g = next.space() == f.space() ? next : f;
        double worst = 0.0;
        for (std::size_t r = 1; r <= q; ++r) {
            worst = std::max(worst, fubini_check(f, g, r));
        }
        fubini.push_back(worst);
        if (worst >= 1e-10) {
            ok = false;
            log << fmt::format("contraction: fubini discrepancy {} at index {}\n", worst, i);
        }
        if (family == "indicator" && rows[i].condition_iii != 0.0) {
            ok = false;
            log << fmt::format("contraction: condition (iii) = {} at index {}\n", rows[i].condition_iii, i);
        }
    }
    Outcome o;
    o.code = ok ? kOk : kInvariantFailure;
    if (want_json(opt)) {
        json out = json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            json stars = json::array();
            for (const auto& s : rows[i].star_norms) {
                stars.push_back({{"r", s.r}, {"l", s.l}, {"norm", s.value}});
            }
            out.push_back({{"index", rows[i].index},
                           {"label", labels[i]},
                           {"star_norms", stars},
                           {"l4", rows[i].l4},
                           {"condition_iii", rows[i].condition_iii},
                           {"assumption_norms", rows[i].assumption_norms},
                           {"bounded", rows[i].bounded},
                           {"fubini", fubini[i]}});
        }
        o.output = json{{"family", family}, {"q", q}, {"n", n}, {"rows", out}}.dump(2) + "\n";
    } else {
        std::ostringstream csv;
        write_conditions_csv(csv, rows, labels, fubini);
        o.output = csv.str();
    }
    return o;
}

// ---------------------------------------------------------------------------
// sanity

struct SanityCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

inline Outcome cmd_sanity(const json& cfg, const Options& opt, std::uint64_t seed, std::ostream& log)
{
    const std::size_t dim = get_dimension(cfg, 1);
    const double c = get_number(cfg, "c", 2.0);
    const double lambda = get_number(cfg, "lambda", 100.0);
    const std::size_t reps = get_count(cfg, "reps", 10000);
    const std::size_t configs = get_count(cfg, "configs", 1000);
    const bool broken = get_bool(cfg, "break_kernel", false);
    if (reps < 100) {
        throw ValidationError("sanity: need at least 100 replications");
    }
    if (!(lambda > 0.0) || !(c > 0.0)) {
        throw ValidationError("sanity: lambda and c must be positive");
    }
    double delta = 0.0;
    try {
        delta = calibrate_delta(dim, lambda, 0.5 * c);
    } catch (const CalibrationError& e) {
        throw ValidationError(e.what());
    }
    const Window window = Window::unit(dim);
    const auto rule = ConnectionRule::gilbert(dim, delta);
    std::vector<SanityCheck> checks;

    // eta(A): both bound terms vanish in every replication.
    {
        Box a;
        a.dim = dim;
        for (std::size_t i = 0; i < dim; ++i) {
            a.lo[i] = -0.25;
            a.hi[i] = 0.25;
        }
        const Functional f = count_functional(window, lambda, a);
        const auto samples = simulate(GenericChaosModel(f), reps, seed, opt.workers, std::uint64_t{1} << 40);
        const auto b = assemble_bound(samples, f.chaos->constant, f.chaos->constant, seed);
        const double worst = std::max({b.term1_sup, b.term2_sup, b.total});
        checks.push_back({"count_zero_bound", worst, 0.0, worst == 0.0});
    }

    // Variance identity for the calibrated edge count.
    {
        const EdgeCountModel model(rule, lambda);
        const auto v = variance_check(simulate(model, reps, seed, opt.workers, std::uint64_t{2} << 40));
        checks.push_back({"variance_identity", std::abs(v.z_score), 3.0, std::abs(v.z_score) <= 3.0});
    }

    // Pathwise chaotic reconstruction, add-one cost and -DL^{-1}.
    {
        auto chaos = edge_count_chaos(rule, lambda, window);
        if (broken) {
            chaos.second->g = [rule](const Point& x, const Point& y) {
                return rule.connects(x, y) ? (x[0] > y[0] ? 0.5 : 0.25) : 0.0;
            };
        }
        const Functional f{[rule](const PointConfiguration& w) { return static_cast<double>(edge_count(w, rule)); },
                           chaos, true};
        const double tol = dim == 1 ? 1e-10 : 1e-6;
        double recon = 0.0;
        double diff_gap = 0.0;
        double neg_gap = 0.0;
        for (std::size_t i = 0; i < configs; ++i) {
            const RngStream stream{seed, (std::uint64_t{3} << 40) | i};
            const auto omega = sample_process(window, lambda, stream);
            recon = std::max(recon, std::abs(evaluate(chaos, omega) - f(omega)));
            Engine eng = stream.child(1).engine();
            Point z{0.0, 0.0, 0.0};
            for (std::size_t k = 0; k < dim; ++k) {
                z[k] = uniform(eng, -0.5, 0.5);
            }
            diff_gap = std::max(diff_gap, std::abs(diff_chaos(chaos, omega, z) - diff(f, omega, z)));
            const double expected = 0.5 * (chaos.first->g(z) + static_cast<double>(degree(omega, rule, z)));
            neg_gap = std::max(neg_gap, std::abs(neg_DLinv(chaos, omega, z) - expected));
        }
        checks.push_back({"chaotic_reconstruction", recon, tol, recon <= tol});
        checks.push_back({"add_one_cost", diff_gap, 0.0, diff_gap == 0.0});
        checks.push_back({"neg_DLinv", neg_gap, 1e-8, neg_gap <= 1e-8});
    }

    bool ok = true;
    for (const auto& ch : checks) {
        if (!ch.pass) {
            ok = false;
            log << fmt::format("sanity: FAILED {} (value {}, threshold {})\n", ch.name, ch.value, ch.threshold);
        }
    }
    Outcome o;
    o.code = ok ? kOk : kInvariantFailure;
    if (want_json(opt)) {
        json rows = json::array();
        for (const auto& ch : checks) {
            rows.push_back({{"invariant", ch.name}, {"value", ch.value}, {"threshold", ch.threshold}, {"pass", ch.pass}});
        }
        o.output = json{{"checks", rows}, {"pass", ok}, {"seed", seed}}.dump(2) + "\n";
    } else {
        std::ostringstream csv;
        csv << "invariant,value,threshold,pass\n";
        for (const auto& ch : checks) {
            csv << fmt::format("{},{},{},{}\n", ch.name, ch.value, ch.threshold, ch.pass ? 1 : 0);
        }
        o.output = csv.str();
    }
    return o;
}

// ---------------------------------------------------------------------------
// sample, occupation

inline Outcome cmd_sample(const json& cfg, const Options& opt, std::uint64_t seed, std::ostream&)
{
    const std::size_t dim = get_dimension(cfg, 1);
    const double lambda = get_number(cfg, "lambda", 100.0);
    const std::size_t stream = get_count(cfg, "stream", 0);
    if (!(lambda >= 0.0)) {
        throw ValidationError("sample: lambda must be nonnegative");
    }
    const auto omega = sample_process(Window::unit(dim), lambda, RngStream{seed, stream});
    Outcome o;
    if (want_json(opt)) {
        json pts = json::array();
        for (const auto& p : omega.points()) {
            pts.push_back(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(dim)));
        }
        o.output = json{{"d", dim}, {"lambda", lambda}, {"seed", seed}, {"stream", stream}, {"points", pts}}.dump(2) + "\n";
    } else {
        std::ostringstream os;
        write_configuration(os, omega, lambda);
        o.output = os.str();
    }
    return o;
}

inline Outcome cmd_occupation(const json& cfg, const Options& opt, std::uint64_t, std::ostream&)
{
    const std::size_t dim = get_dimension(cfg, 2);
    const std::size_t resolution = get_count(cfg, "resolution", 512);
    if (resolution < 64) {
        throw ValidationError("occupation: resolution must be at least 64");
    }
    ConnectionRule rule = parse_rule(cfg.contains("rule") ? cfg.at("rule") : json{{"kind", "gilbert"}, {"delta", 0.1}}, dim);
    if (cfg.contains("lambda")) {
        const double lambda = get_number(cfg, "lambda", 1.0);
        if (!(lambda > 0.0)) {
            throw ValidationError("occupation: lambda must be positive");
        }
        rule = scaled_rule(rule, lambda);
    }
    const auto rep = occupation(rule, resolution);
    Outcome o;
    if (want_json(opt)) {
        o.output = json{{"rule", rule.describe()},
                        {"psi", rep.psi},
                        {"psi_hat", rep.psi_hat},
                        {"psi_check", rep.psi_check},
                        {"ratio", std::isfinite(rep.ratio) ? json(rep.ratio) : json(nullptr)},
                        {"closed_form", rep.closed_form ? json(*rep.closed_form) : json(nullptr)}}
                       .dump(2) +
                   "\n";
    } else {
        o.output = fmt::format("psi,psi_hat,psi_check,ratio,closed_form\n{},{},{},{},{}\n", rep.psi, rep.psi_hat,
                               rep.psi_check, rep.ratio, rep.closed_form ? num(*rep.closed_form) : std::string());
    }
    return o;
}

// ---------------------------------------------------------------------------
// Entry point

inline Outcome dispatch(const Options& opt, std::ostream& log)
{
    json cfg = json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) {
            throw ValidationError("cannot open config file '" + opt.config_path + "'");
        }
        cfg = json::parse(in, nullptr, false);
        if (cfg.is_discarded() || !cfg.is_object()) {
            throw ValidationError("config file '" + opt.config_path + "' is not a JSON object");
        }
    }
    for (const auto& s : opt.overrides) {
        apply_override(cfg, s);
    }
    std::uint64_t seed = 0;
    if (opt.seed) {
        seed = *opt.seed;
    } else if (cfg.contains("seed") && cfg.at("seed").is_number_unsigned()) {
        seed = cfg.at("seed").get<std::uint64_t>();
    } else {
        throw ValidationError("a master seed is required (--seed or config field 'seed')");
    }
    if (opt.format != "csv" && opt.format != "json") {
        throw ValidationError("--format must be csv or json");
    }
    if (opt.workers < 1) {
        throw ValidationError("--workers must be at least 1");
    }
    if (opt.subcommand == "stein-check") {
        return cmd_stein_check(cfg, opt, seed, log);
    }
    if (opt.subcommand == "rate") {
        return cmd_rate(cfg, opt, seed, log);
    }
    if (opt.subcommand == "contraction") {
        return cmd_contraction(cfg, opt, seed, log);
    }
    if (opt.subcommand == "sanity") {
        return cmd_sanity(cfg, opt, seed, log);
    }
    if (opt.subcommand == "sample") {
        return cmd_sample(cfg, opt, seed, log);
    }
    if (opt.subcommand == "occupation") {
        return cmd_occupation(cfg, opt, seed, log);
    }
    throw ValidationError("unknown subcommand '" + opt.subcommand + "'");
}

/// Parses argv, runs the subcommand and writes its report to --out (or `out`).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Poisson approximation toolkit: Stein-equation checks, chaos contractions and "
                 "Malliavin-Stein bounds for random geometric graphs"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "JSON config file");
    app.add_option("--seed", opt.seed, "master seed (u64)");
    app.add_option("--workers", opt.workers, "replication worker threads");
    app.add_option("--out", opt.out_path, "output path (default: stdout)");
    app.add_option("--format", opt.format, "csv or json");
    app.add_option("--set", opt.overrides, "override a config field: key=value (dotted keys)");
    for (const char* name : {"stein-check", "rate", "contraction", "sanity", "sample", "occupation"}) {
        app.add_subcommand(name)->callback([&opt, name] { opt.subcommand = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kValidation;
    }

    try {
        const Outcome o = dispatch(opt, err);
        if (opt.out_path.empty()) {
            out << o.output;
        } else {
            std::ofstream file(opt.out_path, std::ios::binary);
            if (!file) {
                err << "error: cannot write '" << opt.out_path << "'\n";
                return kValidation;
            }
            file << o.output;
        }
        return o.code;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const json::exception& e) {
        err << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInvariantFailure;
    }
}

}  // namespace ppstein::cli
