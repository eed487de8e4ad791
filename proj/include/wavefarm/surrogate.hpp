#pragma once

// Hydrodynamic surrogates: 10 shape networks (one per normalized output) plus
// 20 auxiliary networks predicting the per-design range/offset that maps each
// frequency profile onto [-1, 1]. Farm matrices are assembled from one- and
// two-body predictions with a many-body expansion truncated at pairs.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/hydro_oracle.hpp"
#include "wavefarm/neural.hpp"
#include "wavefarm/wave_climate.hpp"

namespace wavefarm {

// ---------------------------------------------------------------------------
// Normalization

struct ReferenceMaxima {
    double radius = 20.0;
    double draft = 20.0;
    double omega = 7.0;
    double distance = 1000.0;
    double theta = kPi;

    bool operator==(const ReferenceMaxima&) const = default;
};

enum class NormalizeMode { strict, permissive };

struct NormalizedInputs {
    double radius, draft, omega;
    double distance = 0.0, theta = 0.0;
    bool clamped = false;  // permissive mode moved at least one component into range

    std::array<double, 3> v1() const { return {radius, draft, omega}; }
    std::array<double, 5> v2() const { return {radius, draft, distance, theta, omega}; }
};

namespace detail {

inline double normalize_component(double value, double max, const char* name, NormalizeMode mode, bool& clamped,
                                  bool allow_zero) {
    double x = value / max;
    const bool low = allow_zero ? !(x >= 0.0) : !(x > 0.0);
    const bool high = x > 1.0 + 1e-12;
    if (low || high || !std::isfinite(x)) {
        if (mode == NormalizeMode::strict)
            throw DomainError(std::string("normalize: ") + name + " = " + std::to_string(value) +
                              " outside (0, " + std::to_string(max) + "]");
        clamped = true;
        x = std::clamp(std::isfinite(x) ? x : 1.0, 0.0, 1.0);
    }
    return x;
}

}  // namespace detail

inline NormalizedInputs normalize_inputs(const ReferenceMaxima& m, double radius, double draft, double omega,
                                         NormalizeMode mode = NormalizeMode::strict) {
    NormalizedInputs n{};
    n.radius = detail::normalize_component(radius, m.radius, "R", mode, n.clamped, false);
    n.draft = detail::normalize_component(draft, m.draft, "D", mode, n.clamped, false);
    n.omega = detail::normalize_component(omega, m.omega, "omega", mode, n.clamped, false);
    return n;
}

inline NormalizedInputs normalize_inputs(const ReferenceMaxima& m, const PairConfig& pair, double omega,
                                         NormalizeMode mode = NormalizeMode::strict) {
    auto n = normalize_inputs(m, pair.geometry.radius, pair.geometry.draft, omega, mode);
    n.distance = detail::normalize_component(pair.distance, m.distance, "d", mode, n.clamped, false);
    n.theta = detail::normalize_component(pair.theta, m.theta, "theta", mode, n.clamped, true);
    return n;
}

struct PhysicalInputs {
    double radius, draft, omega, distance, theta;
};

inline PhysicalInputs denormalize_inputs(const ReferenceMaxima& m, const NormalizedInputs& n) {
    return {n.radius * m.radius, n.draft * m.draft, n.omega * m.omega, n.distance * m.distance, n.theta * m.theta};
}

enum class Quantity { added_mass, damping, excitation };

inline Quantity target_quantity(const std::string& name) {
    if (name[0] == 'a') return Quantity::added_mass;
    if (name[0] == 'b') return Quantity::damping;
    return Quantity::excitation;
}

/// Physical value per unit normalized value: rho pi R^2 D, omega rho pi R^2 D, rho g pi R^2 D.
inline double output_scale(Quantity q, const WecGeometry& geom, double omega, const Environment& env) {
    const double mass = env.rho * geom.volume();
    switch (q) {
        case Quantity::added_mass: return mass;
        case Quantity::damping: return omega * mass;
        case Quantity::excitation: return env.g * mass;
    }
    return 1.0;
}

inline double normalize_output(Quantity q, double value, const WecGeometry& geom, double omega,
                               const Environment& env) {
    return value / output_scale(q, geom, omega, env);
}

inline double denormalize_output(Quantity q, double value, const WecGeometry& geom, double omega,
                                 const Environment& env) {
    return value * output_scale(q, geom, omega, env);
}

// ---------------------------------------------------------------------------
// Spike cleaning

/// Replaces isolated outliers in a frequency profile. A point's residual is
/// its distance from the value predicted by its neighbours (their mean in the
/// interior, a linear extrapolation at the ends); its local scale is the
/// largest step among nearby points that excludes it. The point with the
/// largest residual / scale ratio above `threshold` is replaced by the
/// neighbour mean (the single neighbour at an endpoint) and the scan repeats.
inline std::vector<double> clean_spikes(std::span<const double> series, double threshold = 5.0) {
    const std::size_t n = series.size();
    if (n < 3) throw DomainError("clean_spikes: need at least 3 points");
    std::vector<double> out(series.begin(), series.end());
    double peak = 0.0;
    for (double x : series) peak = std::max(peak, std::abs(x));
    const double floor = 1e-12 * peak;
    if (!(floor > 0.0)) return out;

    auto step = [&](std::size_t i, std::size_t j) { return (i < n && j < n) ? std::abs(out[j] - out[i]) : 0.0; };
    auto ratio = [&](std::size_t i) {
        double r, scale;
        if (i == 0) {
            r = out[0] - (2.0 * out[1] - out[2]);
            scale = std::max(step(1, 2), step(2, 3));
        } else if (i + 1 == n) {
            r = out[n - 1] - (2.0 * out[n - 2] - out[n - 3]);
            scale = std::max(step(n - 3, n - 2), n >= 4 ? step(n - 4, n - 3) : 0.0);
        } else {
            r = out[i] - 0.5 * (out[i - 1] + out[i + 1]);
            scale = std::max({step(i - 1, i + 1), i >= 2 ? step(i - 2, i - 1) : 0.0, step(i + 1, i + 2)});
        }
        return std::abs(r) / std::max(scale, floor);
    };
    for (std::size_t pass = 0; pass < n; ++pass) {
        std::size_t worst = 0;
        double worst_r = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (const double r = ratio(i); r > worst_r) {
                worst_r = r;
                worst = i;
            }
        if (!(worst_r > threshold)) break;
        if (worst == 0) out[0] = out[1];
        else if (worst + 1 == n) out[n - 1] = out[n - 2];
        else out[worst] = 0.5 * (out[worst - 1] + out[worst + 1]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output scaling

/// Linear map x = offset + range * s taking a profile onto s in [-1, 1].
struct ProfileScale {
    double range = 1.0;
    double offset = 0.0;
    bool constant = false;

    double to_unit(double x) const { return constant ? 0.0 : (x - offset) / range; }
    double from_unit(double s) const { return offset + range * s; }
};

inline ProfileScale fit_profile_scale(std::span<const double> profile) {
    const auto [lo, hi] = std::minmax_element(profile.begin(), profile.end());
    ProfileScale s;
    s.offset = 0.5 * (*lo + *hi);
    s.range = 0.5 * (*hi - *lo);
    const double floor = 1e-12 * std::max(1.0, std::abs(s.offset));
    if (!(s.range > floor)) {
        // Degenerate profile: keep a positive placeholder range; unit values are 0.
        s.range = floor;
        s.constant = true;
    }
    return s;
}

/// Auxiliary networks predicting (range, offset) from a design's non-frequency
/// inputs. range is regressed in log space; offset through
/// u = offset / (|offset| + range), which stays in (-1, 1).
struct ScalingModel {
    MlpModel range_net;
    MlpModel offset_net;
    double log_range_mean = 0.0, log_range_std = 1.0;
    double u_mean = 0.0, u_std = 1.0;

    ProfileScale predict(const Eigen::VectorXd& design_inputs) const {
        const double lr = mlp_forward(range_net, design_inputs)(0) * log_range_std + log_range_mean;
        const double u = std::clamp(mlp_forward(offset_net, design_inputs)(0) * u_std + u_mean, -0.999999, 0.999999);
        ProfileScale s;
        s.range = std::exp(lr);
        s.offset = u * s.range / (1.0 - std::abs(u));
        return s;
    }
};

struct ScalingFitReport {
    double range_rel_error = 0.0;   // mean |r_hat - r| / r over held-out records
    double offset_rel_error = 0.0;  // mean |o_hat - o| / (|o| + r) over held-out records
};

/// Per-record scales of every profile plus auxiliary networks trained on them.
struct OutputScaling {
    std::vector<ProfileScale> record_scales;
    ScalingModel model;
    ScalingFitReport report;
};

/// Fits per-record scales for one target (rows = records, profile over omega)
/// and trains the auxiliary range/offset networks on `design_inputs`
/// (rows = records, columns = normalized non-frequency inputs).
inline OutputScaling fit_scaling(const std::vector<std::vector<double>>& profiles, const Eigen::MatrixXd& design_inputs,
                                 std::size_t hidden, const TrainConfig& cfg) {
    if (profiles.size() != static_cast<std::size_t>(design_inputs.rows()))
        throw DomainError("fit_scaling: profile/design count mismatch");
    OutputScaling out;
    const auto n = static_cast<Eigen::Index>(profiles.size());
    Eigen::MatrixXd log_range(n, 1), u(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto s = fit_profile_scale(profiles[static_cast<std::size_t>(r)]);
        out.record_scales.push_back(s);
        log_range(r, 0) = std::log(s.range);
        u(r, 0) = s.offset / (std::abs(s.offset) + s.range);
    }
    auto standardize = [](Eigen::MatrixXd& v, double& mean, double& sd) {
        mean = v.mean();
        sd = std::sqrt((v.array() - mean).square().sum() / std::max<Eigen::Index>(1, v.size() - 1));
        if (!(sd > 1e-12)) sd = 1.0;
        v = ((v.array() - mean) / sd).matrix();
    };
    standardize(log_range, out.model.log_range_mean, out.model.log_range_std);
    standardize(u, out.model.u_mean, out.model.u_std);

    const std::vector<std::size_t> sizes{static_cast<std::size_t>(design_inputs.cols()), hidden, 1};
    auto [range_net, range_rep] = mlp_train(mlp_init(sizes, cfg.seed + 101), design_inputs, log_range, cfg);
    auto [offset_net, offset_rep] = mlp_train(mlp_init(sizes, cfg.seed + 202), design_inputs, u, cfg);
    out.model.range_net = std::move(range_net);
    out.model.offset_net = std::move(offset_net);

    // Held-out error in physical (range, offset) terms on the auxiliary test split.
    const auto split = split_indices(profiles.size(), cfg);
    double er = 0.0, eo = 0.0;
    for (auto idx : split.test) {
        const auto& truth = out.record_scales[idx];
        const auto pred = out.model.predict(design_inputs.row(static_cast<Eigen::Index>(idx)).transpose());
        er += std::abs(pred.range - truth.range) / truth.range;
        eo += std::abs(pred.offset - truth.offset) / (std::abs(truth.offset) + truth.range);
    }
    if (!split.test.empty()) {
        out.report.range_rel_error = er / static_cast<double>(split.test.size());
        out.report.offset_rel_error = eo / static_cast<double>(split.test.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundle

struct TargetModel {
    std::string name;
    MlpModel shape;
    ScalingModel scaling;
    // Training diagnostics.
    double shape_test_rmse = 0.0;
    double range_rel_error = 0.0;
    double offset_rel_error = 0.0;
    std::size_t shape_epochs = 0;
};

struct SurrogateBundle {
    Environment env;
    ReferenceMaxima maxima;
    FrequencyGrid grid;
    /// Oracle-as-surrogate: predictions come straight from the analytical oracle.
    bool bypass = false;
    std::vector<TargetModel> one_body;  // a, b, fe_re, fe_im
    std::vector<TargetModel> two_body;  // a11, a12, b11, b12, fe_re, fe_im

    std::size_t model_count() const { return 3 * (one_body.size() + two_body.size()); }

    /// Bundle whose predictions are the oracle itself.
    static SurrogateBundle oracle(const FrequencyGrid& grid, const Environment& env = {},
                                  const ReferenceMaxima& maxima = {}) {
        SurrogateBundle b;
        b.env = env;
        b.grid = grid;
        b.maxima = maxima;
        b.maxima.omega = grid.max();
        b.bypass = true;
        return b;
    }
};

struct BundleTrainConfig {
    std::size_t hidden_one_body = 32;
    std::size_t hidden_two_body = 64;
    std::size_t hidden_aux = 8;
    TrainConfig shape;
    TrainConfig aux;
    bool clean_spikes = false;
    double spike_threshold = 5.0;
    ReferenceMaxima maxima;
    /// Optional progress sink, called once per trained target.
    std::function<void(const TargetModel&)> on_target;
};

namespace detail {

inline Eigen::VectorXd design_vector(BodyKind kind, const NormalizedInputs& n) {
    if (kind == BodyKind::one) return Eigen::Vector2d(n.radius, n.draft);
    return Eigen::Vector4d(n.radius, n.draft, n.distance, n.theta);
}

inline TargetModel train_target(const HydroDataset& ds, std::size_t target, const SurrogateBundle& bundle,
                                const BundleTrainConfig& cfg, std::uint64_t seed_offset) {
    const auto& name = target_names(ds.kind)[target];
    const auto q = target_quantity(name);
    const std::size_t n_w = ds.grid.size();
    const auto n_rec = static_cast<Eigen::Index>(ds.records.size());
    const std::size_t n_design = input_count(ds.kind);

    std::vector<std::vector<double>> profiles;
    Eigen::MatrixXd design(n_rec, static_cast<Eigen::Index>(n_design));
    std::vector<NormalizedInputs> norm_in;
    for (Eigen::Index r = 0; r < n_rec; ++r) {
        const auto& rec = ds.records[static_cast<std::size_t>(r)];
        const WecGeometry geom{rec.radius, rec.draft};
        NormalizedInputs n = ds.kind == BodyKind::one
                                 ? normalize_inputs(bundle.maxima, rec.radius, rec.draft, ds.grid.max())
                                 : normalize_inputs(bundle.maxima, {geom, rec.distance, rec.theta}, ds.grid.max());
        norm_in.push_back(n);
        design.row(r) = design_vector(ds.kind, n).transpose();
        std::vector<double> p(n_w);
        for (std::size_t w = 0; w < n_w; ++w)
            p[w] = normalize_output(q, rec.values[target][w], geom, ds.grid[w], bundle.env);
        if (cfg.clean_spikes && n_w >= 3) p = clean_spikes(p, cfg.spike_threshold);
        profiles.push_back(std::move(p));
    }

    TrainConfig aux_cfg = cfg.aux;
    aux_cfg.seed = cfg.aux.seed + seed_offset;
    auto scaling = fit_scaling(profiles, design, cfg.hidden_aux, aux_cfg);

    const std::size_t n_in = n_design + 1;
    Eigen::MatrixXd x(n_rec * static_cast<Eigen::Index>(n_w), static_cast<Eigen::Index>(n_in));
    Eigen::MatrixXd y(x.rows(), 1);
    Eigen::Index row = 0;
    for (Eigen::Index r = 0; r < n_rec; ++r) {
        const auto& s = scaling.record_scales[static_cast<std::size_t>(r)];
        for (std::size_t w = 0; w < n_w; ++w, ++row) {
            x.row(row).head(static_cast<Eigen::Index>(n_design)) = design.row(r);
            x(row, static_cast<Eigen::Index>(n_design)) = ds.grid[w] / bundle.maxima.omega;
            y(row, 0) = s.to_unit(profiles[static_cast<std::size_t>(r)][w]);
        }
    }
    TrainConfig shape_cfg = cfg.shape;
    shape_cfg.seed = cfg.shape.seed + seed_offset;
    const std::size_t hidden = ds.kind == BodyKind::one ? cfg.hidden_one_body : cfg.hidden_two_body;
    auto [net, rep] = mlp_train(mlp_init({n_in, hidden, 1}, shape_cfg.seed), x, y, shape_cfg);

    TargetModel tm;
    tm.name = name;
    tm.shape = std::move(net);
    tm.scaling = std::move(scaling.model);
    tm.shape_test_rmse = std::sqrt(rep.test_mse);
    tm.shape_epochs = rep.stop_epoch;
    tm.range_rel_error = scaling.report.range_rel_error;
    tm.offset_rel_error = scaling.report.offset_rel_error;
    return tm;
}

inline void check_dataset_range(const HydroDataset& ds, const ReferenceMaxima& m) {
    for (const auto& rec : ds.records) {
        if (ds.kind == BodyKind::one) normalize_inputs(m, rec.radius, rec.draft, ds.grid.max());
        else normalize_inputs(m, {{rec.radius, rec.draft}, rec.distance, rec.theta}, ds.grid.max());
    }
}

}  // namespace detail

/// Trains the 10 shape networks and their 20 auxiliary scaling networks.
inline SurrogateBundle train_bundle(const HydroDataset& one, const HydroDataset& two, const BundleTrainConfig& cfg,
                                    const Environment& env = {}) {
    if (one.kind != BodyKind::one || two.kind != BodyKind::two)
        throw DataError("train_bundle: expected a one-body and a two-body dataset");
    if (!(one.grid == two.grid)) throw DataError("train_bundle: datasets use different frequency grids");
    if (one.depth != two.depth) throw DataError("train_bundle: datasets use different water depths");
    SurrogateBundle bundle;
    bundle.env = env;
    bundle.env.depth = one.depth;
    bundle.grid = one.grid;
    bundle.maxima = cfg.maxima;
    bundle.maxima.omega = one.grid.max();
    detail::check_dataset_range(one, bundle.maxima);
    detail::check_dataset_range(two, bundle.maxima);

    std::uint64_t offset = 0;
    for (const auto* ds : {&one, &two}) {
        auto& dst = ds->kind == BodyKind::one ? bundle.one_body : bundle.two_body;
        for (std::size_t t = 0; t < target_names(ds->kind).size(); ++t) {
            try {
                dst.push_back(detail::train_target(*ds, t, bundle, cfg, 1000 * ++offset));
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(ds->kind == BodyKind::one ? "one-body" : "two-body") + " target `" +
                                    target_names(ds->kind)[t] + "`: " + e.what());
            }
            if (cfg.on_target) cfg.on_target(dst.back());
        }
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Prediction

/// Normalized one-body outputs over a set of frequencies.
struct OneBodyProfiles {
    std::vector<double> a, b;
    std::vector<cplx> fe;
};

/// Normalized two-body outputs (body 1 of the pair) over a set of frequencies.
struct TwoBodyProfiles {
    std::vector<double> a11, a12, b11, b12;
    std::vector<cplx> fe11;
};

namespace detail {

inline std::vector<double> eval_target(const TargetModel& tm, const Eigen::VectorXd& design,
                                       std::span<const double> omegas, double omega_max) {
    const auto n_w = static_cast<Eigen::Index>(omegas.size());
    const auto n_d = design.size();
    Eigen::MatrixXd x(n_w, n_d + 1);
    for (Eigen::Index w = 0; w < n_w; ++w) {
        x.row(w).head(n_d) = design.transpose();
        x(w, n_d) = omegas[static_cast<std::size_t>(w)] / omega_max;
    }
    const Eigen::MatrixXd s = mlp_forward_batch(tm.shape, x);
    const auto scale = tm.scaling.predict(design);
    std::vector<double> out(omegas.size());
    for (std::size_t w = 0; w < omegas.size(); ++w) out[w] = scale.from_unit(s(static_cast<Eigen::Index>(w), 0));
    return out;
}

inline void check_omegas(const SurrogateBundle& b, std::span<const double> omegas, NormalizeMode mode) {
    bool clamped = false;
    for (double w : omegas) normalize_component(w, b.maxima.omega, "omega", mode, clamped, false);
}

}  // namespace detail

/// Raw (unsymmetrized) normalized one-body outputs.
inline OneBodyProfiles normalized_one_body(const SurrogateBundle& b, const WecGeometry& geom,
                                           std::span<const double> omegas,
                                           NormalizeMode mode = NormalizeMode::strict) {
    detail::check_omegas(b, omegas, mode);
    OneBodyProfiles p;
    p.a.resize(omegas.size());
    p.b.resize(omegas.size());
    p.fe.resize(omegas.size());
    if (b.bypass) {
        normalize_inputs(b.maxima, geom.radius, geom.draft, b.maxima.omega, mode);
        for (std::size_t w = 0; w < omegas.size(); ++w) {
            const auto c = single_body(geom, omegas[w], b.env);
            p.a[w] = normalize_output(Quantity::added_mass, c.added_mass, geom, omegas[w], b.env);
            p.b[w] = normalize_output(Quantity::damping, c.damping, geom, omegas[w], b.env);
            p.fe[w] = c.excitation / output_scale(Quantity::excitation, geom, omegas[w], b.env);
        }
        return p;
    }
    const auto n = normalize_inputs(b.maxima, geom.radius, geom.draft, b.maxima.omega, mode);
    const Eigen::VectorXd design = detail::design_vector(BodyKind::one, n);
    p.a = detail::eval_target(b.one_body[0], design, omegas, b.maxima.omega);
    p.b = detail::eval_target(b.one_body[1], design, omegas, b.maxima.omega);
    const auto re = detail::eval_target(b.one_body[2], design, omegas, b.maxima.omega);
    const auto im = detail::eval_target(b.one_body[3], design, omegas, b.maxima.omega);
    for (std::size_t w = 0; w < omegas.size(); ++w) p.fe[w] = cplx(re[w], im[w]);
    return p;
}

/// Raw normalized two-body outputs at the pair's angle (no radiation symmetrization).
inline TwoBodyProfiles normalized_two_body_raw(const SurrogateBundle& b, const PairConfig& pair,
                                               std::span<const double> omegas,
                                               NormalizeMode mode = NormalizeMode::strict) {
    detail::check_omegas(b, omegas, mode);
    const auto n = normalize_inputs(b.maxima, pair, b.maxima.omega, mode);
    TwoBodyProfiles p;
    const std::size_t n_w = omegas.size();
    if (b.bypass) {
        const auto& g = pair.geometry;
        p.a11.resize(n_w); p.a12.resize(n_w); p.b11.resize(n_w); p.b12.resize(n_w); p.fe11.resize(n_w);
        for (std::size_t w = 0; w < n_w; ++w) {
            const auto c = pair_body(pair, omegas[w], b.env);
            const double sa = output_scale(Quantity::added_mass, g, omegas[w], b.env);
            const double sb = output_scale(Quantity::damping, g, omegas[w], b.env);
            const double sf = output_scale(Quantity::excitation, g, omegas[w], b.env);
            p.a11[w] = c.a11 / sa;
            p.a12[w] = c.a12 / sa;
            p.b11[w] = c.b11 / sb;
            p.b12[w] = c.b12 / sb;
            p.fe11[w] = c.fe1 / sf;
        }
        return p;
    }
    const Eigen::VectorXd design = detail::design_vector(BodyKind::two, n);
    p.a11 = detail::eval_target(b.two_body[0], design, omegas, b.maxima.omega);
    p.a12 = detail::eval_target(b.two_body[1], design, omegas, b.maxima.omega);
    p.b11 = detail::eval_target(b.two_body[2], design, omegas, b.maxima.omega);
    p.b12 = detail::eval_target(b.two_body[3], design, omegas, b.maxima.omega);
    const auto re = detail::eval_target(b.two_body[4], design, omegas, b.maxima.omega);
    const auto im = detail::eval_target(b.two_body[5], design, omegas, b.maxima.omega);
    p.fe11.resize(n_w);
    for (std::size_t w = 0; w < n_w; ++w) p.fe11[w] = cplx(re[w], im[w]);
    return p;
}

namespace detail {

/// Radiation depends on distance only: average the nets over theta and pi - theta.
inline void symmetrize_radiation(TwoBodyProfiles& p, const TwoBodyProfiles& mirror) {
    for (std::size_t w = 0; w < p.a11.size(); ++w) {
        p.a11[w] = 0.5 * (p.a11[w] + mirror.a11[w]);
        p.a12[w] = 0.5 * (p.a12[w] + mirror.a12[w]);
        p.b11[w] = 0.5 * (p.b11[w] + mirror.b11[w]);
        p.b12[w] = 0.5 * (p.b12[w] + mirror.b12[w]);
    }
}

}  // namespace detail

/// Normalized two-body outputs with angle-independent radiation entries.
inline TwoBodyProfiles normalized_two_body(const SurrogateBundle& b, const PairConfig& pair,
                                           std::span<const double> omegas,
                                           NormalizeMode mode = NormalizeMode::strict) {
    auto p = normalized_two_body_raw(b, pair, omegas, mode);
    PairConfig mirror = pair;
    mirror.theta = kPi - pair.theta;
    detail::symmetrize_radiation(p, normalized_two_body_raw(b, mirror, omegas, mode));
    return p;
}

/// Physical one-body coefficients; independent of where the body sits.
inline SingleBodyCoefficients predict_1body(const SurrogateBundle& b, const WecGeometry& geom, double omega) {
    const double w[1] = {omega};
    const auto p = normalized_one_body(b, geom, w);
    return {denormalize_output(Quantity::added_mass, p.a[0], geom, omega, b.env),
            denormalize_output(Quantity::damping, p.b[0], geom, omega, b.env),
            p.fe[0] * output_scale(Quantity::excitation, geom, omega, b.env)};
}

inline PairCoefficients predict_2body(const SurrogateBundle& b, const PairConfig& pair, double omega) {
    const double w[1] = {omega};
    const auto p = normalized_two_body(b, pair, w);
    const auto& g = pair.geometry;
    const double sa = output_scale(Quantity::added_mass, g, omega, b.env);
    const double sb = output_scale(Quantity::damping, g, omega, b.env);
    const double sf = output_scale(Quantity::excitation, g, omega, b.env);
    return {p.a11[0] * sa, p.a12[0] * sa, p.b11[0] * sb, p.b12[0] * sb, p.fe11[0] * sf};
}

// ---------------------------------------------------------------------------
// Additive effects and farm assembly

/// Normalized pairwise corrections for body 1 of a cluster.
///
/// Radiation: da11 = f2_a11 - f1_a, da12 = f2_a12, likewise for damping.
/// Excitation: dfe11 = (f1_fe - f2_fe11) * exp(i k L), i.e. single minus pair,
/// with L the offset from the body to the phase reference, so L = -x for a
/// body at x and exp(i k L) is that body's incident-wave phase exp(-i k x).
struct AdditiveEffects {
    double d_a11, d_a12, d_b11, d_b12;
    cplx d_fe11;
};

inline AdditiveEffects additive_effects(const SurrogateBundle& b, const PairConfig& pair, double omega,
                                        double offset_l = 0.0) {
    const double w[1] = {omega};
    const auto one = normalized_one_body(b, pair.geometry, w);
    const auto two = normalized_two_body(b, pair, w);
    const double k = solve_dispersion(omega, b.env.depth, b.env.g);
    return {two.a11[0] - one.a[0], two.a12[0], two.b11[0] - one.b[0], two.b12[0],
            (one.fe[0] - two.fe11[0]) * std::exp(cplx(0.0, k * offset_l))};
}

/// Per-frequency farm coefficient matrices.
struct FarmMatrices {
    std::vector<double> omegas;
    std::vector<Eigen::MatrixXd> added_mass;
    std::vector<Eigen::MatrixXd> damping;
    std::vector<Eigen::VectorXcd> excitation;

    std::size_t size() const { return omegas.size(); }
    Eigen::Index bodies() const { return added_mass.empty() ? 0 : added_mass.front().rows(); }
};

/// Many-body expansion truncated at pairs:
///   A_pp = a + sum_q (a11(p,q) - a),  A_pq = a12(p,q)
///   Fe_p = fe exp(-i k x_p) - sum_q dfe11(p,q)
/// Body positions are metres in the farm frame; waves travel along +x.
inline FarmMatrices assemble_farm(const SurrogateBundle& b, const WecGeometry& geom,
                                  const std::vector<Eigen::Vector2d>& positions, std::span<const double> omegas,
                                  NormalizeMode mode = NormalizeMode::strict) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    if (n < 1) throw DomainError("assemble_farm: need at least one body");
    const std::size_t n_w = omegas.size();
    for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = p + 1; q < n; ++q) {
            const double dist = (positions[p] - positions[q]).norm();
            if (mode == NormalizeMode::strict && dist < min_spacing(geom.radius) * (1.0 - 1e-12))
                throw DomainError("assemble_farm: bodies " + std::to_string(p) + " and " + std::to_string(q) +
                                  " closer than 2R + s_d");
        }

    const auto one = normalized_one_body(b, geom, omegas, mode);
    std::vector<double> k(n_w);
    for (std::size_t w = 0; w < n_w; ++w) k[w] = solve_dispersion(omegas[w], b.env.depth, b.env.g);

    // Normalized accumulators.
    std::vector<Eigen::MatrixXd> an(n_w, Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::MatrixXd> bn(n_w, Eigen::MatrixXd::Zero(n, n));
    std::vector<Eigen::VectorXcd> fn(n_w, Eigen::VectorXcd::Zero(n));
    for (std::size_t w = 0; w < n_w; ++w) {
        for (Eigen::Index p = 0; p < n; ++p) {
            an[w](p, p) = one.a[w];
            bn[w](p, p) = one.b[w];
            fn[w](p) = one.fe[w] * std::exp(cplx(0.0, -k[w] * positions[p].x()));
        }
    }
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) {
            const auto rel = relative_placement(positions[p], positions[q]);
            const PairConfig fwd{geom, rel.distance, rel.theta};
            const PairConfig back{geom, rel.distance, kPi - rel.theta};
            auto from_p = normalized_two_body_raw(b, fwd, omegas, mode);
            const auto from_q = normalized_two_body_raw(b, back, omegas, mode);
            const auto fe_p = from_p.fe11;
            detail::symmetrize_radiation(from_p, from_q);
            for (std::size_t w = 0; w < n_w; ++w) {
                const double da11 = from_p.a11[w] - one.a[w];
                const double db11 = from_p.b11[w] - one.b[w];
                an[w](p, p) += da11;
                an[w](q, q) += da11;
                bn[w](p, p) += db11;
                bn[w](q, q) += db11;
                an[w](p, q) = an[w](q, p) = from_p.a12[w];
                bn[w](p, q) = bn[w](q, p) = from_p.b12[w];
                const cplx phase_p = std::exp(cplx(0.0, -k[w] * positions[p].x()));
                const cplx phase_q = std::exp(cplx(0.0, -k[w] * positions[q].x()));
                fn[w](p) -= (one.fe[w] - fe_p[w]) * phase_p;
                fn[w](q) -= (one.fe[w] - from_q.fe11[w]) * phase_q;
            }
        }
    }

    FarmMatrices out;
    out.omegas.assign(omegas.begin(), omegas.end());
    for (std::size_t w = 0; w < n_w; ++w) {
        const double sa = output_scale(Quantity::added_mass, geom, omegas[w], b.env);
        const double sb = output_scale(Quantity::damping, geom, omegas[w], b.env);
        const double sf = output_scale(Quantity::excitation, geom, omegas[w], b.env);
        out.added_mass.push_back(an[w] * sa);
        out.damping.push_back(bn[w] * sb);
        out.excitation.push_back(fn[w] * sf);
    }
    return out;
}

inline FarmMatrices assemble_farm(const SurrogateBundle& b, const WecGeometry& geom,
                                  const std::vector<Eigen::Vector2d>& positions,
                                  NormalizeMode mode = NormalizeMode::strict) {
    return assemble_farm(b, geom, positions, b.grid.omegas(), mode);
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline nlohmann::json target_to_json(const TargetModel& t) {
    return {{"name", t.name},
            {"shape", mlp_to_json(t.shape)},
            {"range_net", mlp_to_json(t.scaling.range_net)},
            {"offset_net", mlp_to_json(t.scaling.offset_net)},
            {"log_range_mean", t.scaling.log_range_mean},
            {"log_range_std", t.scaling.log_range_std},
            {"offset_u_mean", t.scaling.u_mean},
            {"offset_u_std", t.scaling.u_std},
            {"shape_test_rmse", t.shape_test_rmse},
            {"range_rel_error", t.range_rel_error},
            {"offset_rel_error", t.offset_rel_error},
            {"shape_epochs", t.shape_epochs}};
}

inline TargetModel target_from_json(const nlohmann::json& j) {
    TargetModel t;
    t.name = j.at("name").get<std::string>();
    t.shape = mlp_from_json(j.at("shape"));
    t.scaling.range_net = mlp_from_json(j.at("range_net"));
    t.scaling.offset_net = mlp_from_json(j.at("offset_net"));
    t.scaling.log_range_mean = j.at("log_range_mean").get<double>();
    t.scaling.log_range_std = j.at("log_range_std").get<double>();
    t.scaling.u_mean = j.at("offset_u_mean").get<double>();
    t.scaling.u_std = j.at("offset_u_std").get<double>();
    t.shape_test_rmse = j.value("shape_test_rmse", 0.0);
    t.range_rel_error = j.value("range_rel_error", 0.0);
    t.offset_rel_error = j.value("offset_rel_error", 0.0);
    t.shape_epochs = j.value("shape_epochs", std::size_t{0});
    return t;
}

}  // namespace detail

inline nlohmann::json bundle_to_json(const SurrogateBundle& b) {
    nlohmann::json j;
    j["format"] = "wavefarm-bundle";
    j["version"] = 1;
    j["bypass"] = b.bypass;
    j["env"] = {{"rho", b.env.rho}, {"g", b.env.g}, {"depth", b.env.depth}};
    j["maxima"] = {{"radius", b.maxima.radius},
                   {"draft", b.maxima.draft},
                   {"omega", b.maxima.omega},
                   {"distance", b.maxima.distance},
                   {"theta", b.maxima.theta}};
    j["grid"] = b.grid.omegas();
    j["model_count"] = b.model_count();
    auto& one = j["one_body"] = nlohmann::json::array();
    for (const auto& t : b.one_body) one.push_back(detail::target_to_json(t));
    auto& two = j["two_body"] = nlohmann::json::array();
    for (const auto& t : b.two_body) two.push_back(detail::target_to_json(t));
    return j;
}

inline SurrogateBundle bundle_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "wavefarm-bundle") throw DataError("not a wavefarm-bundle document");
    if (j.value("version", 0) != 1) throw DataError("unsupported wavefarm-bundle version");
    SurrogateBundle b;
    b.bypass = j.at("bypass").get<bool>();
    b.env = {j.at("env").at("rho").get<double>(), j.at("env").at("g").get<double>(),
             j.at("env").at("depth").get<double>()};
    const auto& m = j.at("maxima");
    b.maxima = {m.at("radius").get<double>(), m.at("draft").get<double>(), m.at("omega").get<double>(),
                m.at("distance").get<double>(), m.at("theta").get<double>()};
    b.grid = FrequencyGrid(j.at("grid").get<std::vector<double>>());
    for (const auto& t : j.at("one_body")) b.one_body.push_back(detail::target_from_json(t));
    for (const auto& t : j.at("two_body")) b.two_body.push_back(detail::target_from_json(t));
    if (!b.bypass && (b.one_body.size() != 4 || b.two_body.size() != 6))
        throw DataError("wavefarm-bundle: expected 4 one-body and 6 two-body targets");
    return b;
}

inline void save_bundle(const SurrogateBundle& b, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write bundle: " + path);
    out << bundle_to_json(b).dump(1) << "\n";
}

inline SurrogateBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open bundle: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bundle " + path + ": " + e.what());
    }
    return bundle_from_json(j);
}

}  // namespace wavefarm
