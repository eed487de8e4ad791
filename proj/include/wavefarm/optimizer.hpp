#pragma once

// Concurrent plant / control / layout optimization: maximize expected power
// per unit volume subject to spacing and box constraints, by differential
// evolution (rand/1/bin) with quadratic exterior penalties.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/farm_dynamics.hpp"
#include "wavefarm/parallel.hpp"
#include "wavefarm/rng.hpp"
#include "wavefarm/surrogate.hpp"

namespace wavefarm {

struct Bounds {
    double radius_min = 0.5, radius_max = 10.0;
    double draft_min = 0.5, draft_max = 10.0;
    double k_pto_min = -3e8, k_pto_max = 3e8;
    double b_pto_min = 0.0, b_pto_max = 3e8;
    double box_half_width = 0.0;  // layout coordinates in [-w, w]

    /// Default bounds with the farm box 0.5 sqrt(20000 N).
    static Bounds for_farm(std::size_t n_wec) {
        Bounds b;
        b.box_half_width = 0.5 * std::sqrt(20000.0 * static_cast<double>(n_wec));
        return b;
    }

    void validate() const {
        if (!(radius_min > 0.0 && radius_min <= radius_max) || !(draft_min > 0.0 && draft_min <= draft_max) ||
            !(k_pto_min <= k_pto_max) || !(b_pto_min >= 0.0 && b_pto_min <= b_pto_max) || !(box_half_width >= 0.0))
            throw ConfigError("optimizer bounds are inconsistent");
    }
};

/// x = [R, D, K_1..K_N, B_1..B_N, x_2, y_2, ..., x_N, y_N]; body 1 sits at the origin.
struct DesignVector {
    std::size_t n_wec = 1;
    Eigen::VectorXd x;

    static std::size_t dimension(std::size_t n_wec) { return 2 + 2 * n_wec + 2 * (n_wec - 1); }

    double radius() const { return x(0); }
    double draft() const { return x(1); }

    std::vector<Eigen::Vector2d> layout() const {
        std::vector<Eigen::Vector2d> pts{Eigen::Vector2d::Zero()};
        const Eigen::Index base = 2 + 2 * static_cast<Eigen::Index>(n_wec);
        for (std::size_t p = 1; p < n_wec; ++p) {
            const Eigen::Index i = base + 2 * static_cast<Eigen::Index>(p - 1);
            pts.emplace_back(x(i), x(i + 1));
        }
        return pts;
    }

    FarmDesign farm() const {
        const auto n = static_cast<Eigen::Index>(n_wec);
        return {{radius(), draft()}, {x.segment(2, n), x.segment(2 + n, n)}, layout()};
    }

    static DesignVector from_farm(const FarmDesign& d) {
        const auto n = d.size();
        DesignVector v;
        v.n_wec = static_cast<std::size_t>(n);
        v.x.resize(static_cast<Eigen::Index>(dimension(v.n_wec)));
        v.x(0) = d.geometry.radius;
        v.x(1) = d.geometry.draft;
        v.x.segment(2, n) = d.pto.stiffness;
        v.x.segment(2 + n, n) = d.pto.damping;
        for (Eigen::Index p = 1; p < n; ++p) v.x.segment(2 + 2 * n + 2 * (p - 1), 2) = d.layout[p];
        return v;
    }
};

inline Eigen::VectorXd lower_bounds(const Bounds& b, std::size_t n_wec) {
    const auto n = static_cast<Eigen::Index>(n_wec);
    Eigen::VectorXd lo(static_cast<Eigen::Index>(DesignVector::dimension(n_wec)));
    lo(0) = b.radius_min;
    lo(1) = b.draft_min;
    lo.segment(2, n).setConstant(b.k_pto_min);
    lo.segment(2 + n, n).setConstant(b.b_pto_min);
    lo.tail(2 * (n - 1)).setConstant(-b.box_half_width);
    return lo;
}

inline Eigen::VectorXd upper_bounds(const Bounds& b, std::size_t n_wec) {
    const auto n = static_cast<Eigen::Index>(n_wec);
    Eigen::VectorXd hi(static_cast<Eigen::Index>(DesignVector::dimension(n_wec)));
    hi(0) = b.radius_max;
    hi(1) = b.draft_max;
    hi.segment(2, n).setConstant(b.k_pto_max);
    hi.segment(2 + n, n).setConstant(b.b_pto_max);
    hi.tail(2 * (n - 1)).setConstant(b.box_half_width);
    return hi;
}

/// 2R + s_d - L_pq for every pair p < q; feasible iff all <= 0.
inline Eigen::VectorXd distance_constraints(const std::vector<Eigen::Vector2d>& layout, double radius) {
    const auto n = layout.size();
    Eigen::VectorXd r(static_cast<Eigen::Index>(n * (n - (n > 0 ? 1 : 0)) / 2));
    Eigen::Index i = 0;
    const double need = min_spacing(radius);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) r(i++) = need - (layout[p] - layout[q]).norm();
    return r;
}

/// Distance residuals followed by bound residuals (lo - x, x - hi).
inline Eigen::VectorXd constraint_residuals(const DesignVector& d, const Bounds& b) {
    const Eigen::VectorXd dist = distance_constraints(d.layout(), d.radius());
    const Eigen::VectorXd lo = lower_bounds(b, d.n_wec) - d.x;
    const Eigen::VectorXd hi = d.x - upper_bounds(b, d.n_wec);
    Eigen::VectorXd r(dist.size() + lo.size() + hi.size());
    r << dist, lo, hi;
    return r;
}

inline constexpr double kFeasibilityTolerance = 1e-9;

inline bool is_feasible(const DesignVector& d, const Bounds& b) {
    const auto r = constraint_residuals(d, b);
    return r.size() == 0 || r.maxCoeff() <= kFeasibilityTolerance;
}

/// Immutable inputs shared by all objective evaluations.
class EvaluationContext {
public:
    EvaluationContext(const SurrogateBundle& bundle, const WaveClimate& climate, Efficiencies eff = {})
        : bundle_(&bundle), weights_(climate, bundle.grid), eff_(eff) {}

    const SurrogateBundle& bundle() const { return *bundle_; }
    const ClimateWeights& weights() const { return weights_; }
    const Efficiencies& efficiencies() const { return eff_; }

    /// Expected power per unit volume; infeasible layouts are evaluated with clamped inputs.
    double power_per_volume(const FarmDesign& design) const {
        const auto m = assemble_farm(*bundle_, design.geometry, design.layout, NormalizeMode::permissive);
        const auto pm = regular_power_curve(m, design, bundle_->env);
        return wavefarm::power_per_volume(weights_.average_power(pm, eff_), design.geometry);
    }

private:
    const SurrogateBundle* bundle_;
    ClimateWeights weights_;
    Efficiencies eff_;
};

/// Raw evaluation record; the penalized objective also needs rho_pen.
struct Evaluation {
    double p_v = 0.0;
    double violation = 0.0;  // sum max(0, r)^2
    bool feasible = false;
    bool singular = false;
    std::string failure;

    double objective(double rho_pen) const {
        return (singular ? 0.0 : -p_v) + rho_pen * violation + (singular ? rho_pen : 0.0);
    }
};

inline Evaluation evaluate_design(const DesignVector& d, const Bounds& b, const EvaluationContext& ctx) {
    Evaluation e;
    const auto r = constraint_residuals(d, b);
    for (Eigen::Index i = 0; i < r.size(); ++i) e.violation += std::pow(std::max(0.0, r(i)), 2);
    e.feasible = r.size() == 0 || r.maxCoeff() <= kFeasibilityTolerance;
    try {
        e.p_v = ctx.power_per_volume(d.farm());
        if (!std::isfinite(e.p_v)) throw SingularityError("non-finite power", 0.0);
    } catch (const SingularityError& ex) {
        e.singular = true;
        e.p_v = 0.0;
        e.failure = ex.what();
    } catch (const DomainError& ex) {
        e.singular = true;
        e.p_v = 0.0;
        e.failure = ex.what();
    }
    return e;
}

/// Penalized objective -p_v + rho_pen sum max(0, r)^2 (+ rho_pen if singular).
inline double evaluate(const DesignVector& d, const Bounds& b, const EvaluationContext& ctx, double rho_pen) {
    return evaluate_design(d, b, ctx).objective(rho_pen);
}

/// Uniform plant/control sample with a sequentially placed, spacing-feasible layout.
inline DesignVector random_feasible(std::size_t n_wec, const Bounds& b, std::uint64_t seed,
                                    std::size_t max_tries = 100) {
    if (n_wec < 1) throw ConfigError("random_feasible: need at least one WEC");
    b.validate();
    Rng rng(seed);
    const auto lo = lower_bounds(b, n_wec), hi = upper_bounds(b, n_wec);
    DesignVector d;
    d.n_wec = n_wec;
    d.x.resize(lo.size());
    const auto n = static_cast<Eigen::Index>(n_wec);
    for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
        for (Eigen::Index i = 0; i < 2 + 2 * n; ++i) d.x(i) = rng.uniform(lo(i), hi(i));
        const double need = min_spacing(d.radius());
        std::vector<Eigen::Vector2d> placed{Eigen::Vector2d::Zero()};
        bool ok = true;
        for (std::size_t p = 1; p < n_wec && ok; ++p) {
            ok = false;
            for (std::size_t t = 0; t < 100 && !ok; ++t) {
                const Eigen::Vector2d c(rng.uniform(-b.box_half_width, b.box_half_width),
                                        rng.uniform(-b.box_half_width, b.box_half_width));
                ok = std::all_of(placed.begin(), placed.end(), [&](const auto& q) { return (c - q).norm() >= need; });
                if (ok) placed.push_back(c);
            }
        }
        if (!ok) continue;
        for (std::size_t p = 1; p < n_wec; ++p) d.x.segment(2 + 2 * n + 2 * static_cast<Eigen::Index>(p - 1), 2) = placed[p];
        return d;
    }
    throw ConfigError("random_feasible: no spacing-feasible layout found in " + std::to_string(max_tries) +
                      " tries; reduce the radius bound or enlarge the farm box");
}

struct OptimizerConfig {
    std::size_t budget = 300;
    std::size_t population = 0;  // 0 selects 15 + N
    double mutation = 0.7;
    double crossover = 0.9;
    double penalty_scale = 1e6;
    std::size_t max_tries = 100;
    std::size_t threads = 1;
    std::uint64_t seed = 1;
};

struct TraceEntry {
    std::size_t evaluation;  // 1-based
    double objective;        // this evaluation's penalized objective
    double best_penalized;   // best penalized objective so far
    double best_feasible;    // best feasible objective (-p_v) so far; NaN before the first
};

struct OptimResult {
    DesignVector best;
    double objective = 0.0;  // -p_v when feasible, penalized otherwise
    double p_v = 0.0;
    Eigen::VectorXd residuals;
    bool feasible = false;
    double rho_pen = 0.0;
    std::size_t evaluations = 0;
    std::size_t generations = 0;
    std::vector<TraceEntry> trace;
};

/// Differential evolution over the design vector with an exact evaluation budget.
/// Candidates of each generation come from the stream (seed, generation) and are
/// evaluated independently, so the evaluated set does not depend on `threads`.
inline OptimResult optimize(std::size_t n_wec, const Bounds& bounds, const EvaluationContext& ctx,
                            const OptimizerConfig& cfg) {
    bounds.validate();
    if (n_wec < 1) throw ConfigError("optimize: need at least one WEC");
    const std::size_t pop = cfg.population ? cfg.population : 15 + n_wec;
    if (pop < 4) throw ConfigError("optimize: population must be at least 4");
    if (cfg.budget < pop) throw ConfigError("optimize: budget must be at least the population size");
    const auto lo = lower_bounds(bounds, n_wec), hi = upper_bounds(bounds, n_wec);
    const Eigen::Index dim = lo.size();

    std::vector<DesignVector> members(pop);
    for (std::size_t i = 0; i < pop; ++i) {
        const auto s = Rng::stream(cfg.seed, i).bits();
        try {
            members[i] = random_feasible(n_wec, bounds, s, cfg.max_tries);
        } catch (const ConfigError&) {
            // Fall back to an unconstrained uniform point; penalties steer it.
            Rng r(s);
            members[i].n_wec = n_wec;
            members[i].x.resize(dim);
            for (Eigen::Index j = 0; j < dim; ++j) members[i].x(j) = r.uniform(lo(j), hi(j));
        }
    }
    std::vector<Evaluation> evals(pop);
    parallel_for(pop, cfg.threads, [&](std::size_t i) { evals[i] = evaluate_design(members[i], bounds, ctx); });

    OptimResult res;
    double scale = 0.0;
    std::size_t counted = 0;
    for (const auto& e : evals)
        if (!e.singular) {
            scale += std::abs(e.p_v);
            ++counted;
        }
    scale = counted ? scale / static_cast<double>(counted) : 0.0;
    res.rho_pen = cfg.penalty_scale * (scale > 0.0 ? scale : 1.0);

    double best_pen = std::numeric_limits<double>::infinity();
    double best_feas = std::numeric_limits<double>::quiet_NaN();
    DesignVector best_feas_design, best_pen_design;
    Evaluation best_feas_eval, best_pen_eval;
    auto record = [&](const DesignVector& d, const Evaluation& e) {
        const double obj = e.objective(res.rho_pen);
        ++res.evaluations;
        if (obj < best_pen) {
            best_pen = obj;
            best_pen_design = d;
            best_pen_eval = e;
        }
        if (e.feasible && !e.singular && (std::isnan(best_feas) || obj < best_feas)) {
            best_feas = obj;
            best_feas_design = d;
            best_feas_eval = e;
        }
        res.trace.push_back({res.evaluations, obj, best_pen, best_feas});
    };
    for (std::size_t i = 0; i < pop; ++i) record(members[i], evals[i]);

    const double f = cfg.mutation, cr = cfg.crossover;
    std::size_t generation = 0;
    while (res.evaluations < cfg.budget) {
        ++generation;
        Rng rng = Rng::stream(cfg.seed ^ 0xD1FFE5ULL, generation);
        const std::size_t n_trials = std::min(pop, cfg.budget - res.evaluations);
        std::vector<DesignVector> trials(n_trials);
        for (std::size_t i = 0; i < n_trials; ++i) {
            std::size_t r1, r2, r3;
            do r1 = rng.index(pop); while (r1 == i);
            do r2 = rng.index(pop); while (r2 == i || r2 == r1);
            do r3 = rng.index(pop); while (r3 == i || r3 == r1 || r3 == r2);
            const auto j_rand = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim)));
            DesignVector t = members[i];
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (j != j_rand && !(rng.uniform() < cr)) continue;
                double v = members[r1].x(j) + f * (members[r2].x(j) - members[r3].x(j));
                if (v < lo(j)) v = 0.5 * (lo(j) + members[i].x(j));
                if (v > hi(j)) v = 0.5 * (hi(j) + members[i].x(j));
                t.x(j) = v;
            }
            trials[i] = std::move(t);
        }
        std::vector<Evaluation> trial_evals(n_trials);
        parallel_for(n_trials, cfg.threads,
                     [&](std::size_t i) { trial_evals[i] = evaluate_design(trials[i], bounds, ctx); });
        for (std::size_t i = 0; i < n_trials; ++i) {
            record(trials[i], trial_evals[i]);
            if (trial_evals[i].objective(res.rho_pen) <= evals[i].objective(res.rho_pen)) {
                members[i] = std::move(trials[i]);
                evals[i] = trial_evals[i];
            }
        }
    }
    res.generations = generation;

    res.feasible = !std::isnan(best_feas);
    res.best = res.feasible ? best_feas_design : best_pen_design;
    const auto& be = res.feasible ? best_feas_eval : best_pen_eval;
    res.objective = be.objective(res.rho_pen);
    res.p_v = be.p_v;
    res.residuals = distance_constraints(res.best.layout(), res.best.radius());
    return res;
}

}  // namespace wavefarm
