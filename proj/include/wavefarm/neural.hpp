#pragma once

// Shallow feedforward networks: tanh hidden layers, linear output, trained
// full-batch with validation-based early stopping.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/rng.hpp"

namespace wavefarm {

enum class Activation { tanh, identity };

inline const char* activation_name(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

inline Activation activation_from_name(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw DataError("unknown activation: " + s);
}

struct MlpModel {
    std::vector<std::size_t> sizes;          // input, hidden..., output
    std::vector<Eigen::MatrixXd> weights;    // [layer] out x in
    std::vector<Eigen::VectorXd> biases;     // [layer] out
    std::vector<Activation> activations;     // [layer]

    std::size_t input_size() const { return sizes.front(); }
    std::size_t output_size() const { return sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
        return n;
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    Eigen::VectorXd parameters() const {
        Eigen::VectorXd p(parameter_count());
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
                for (Eigen::Index j = 0; j < weights[l].cols(); ++j) p(k++) = weights[l](i, j);
            for (Eigen::Index i = 0; i < biases[l].size(); ++i) p(k++) = biases[l](i);
        }
        return p;
    }

    void set_parameters(const Eigen::VectorXd& p) {
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
                for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = p(k++);
            for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = p(k++);
        }
    }

    bool operator==(const MlpModel& o) const {
        if (sizes != o.sizes || activations != o.activations) return false;
        for (std::size_t l = 0; l < weights.size(); ++l)
            if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
        return true;
    }
};

/// Fan-in scaled uniform initialization, U(-sqrt(3/fan_in), sqrt(3/fan_in)); zero biases.
inline MlpModel mlp_init(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    if (sizes.size() < 3) throw DomainError("mlp_init: need input, at least one hidden, and output layer");
    for (auto s : sizes)
        if (s == 0) throw DomainError("mlp_init: layer width must be >= 1");
    MlpModel m;
    m.sizes = sizes;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double scale = std::sqrt(3.0 / static_cast<double>(sizes[l]));
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-scale, scale);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1])));
        m.activations.push_back(l + 2 == sizes.size() ? Activation::identity : Activation::tanh);
    }
    return m;
}

namespace detail {

inline void apply_activation(Activation a, Eigen::MatrixXd& z) {
    if (a == Activation::tanh) z = z.array().tanh().matrix();
}

/// Layer outputs for a column-major batch (features x samples); [0] is the input.
inline std::vector<Eigen::MatrixXd> forward_trace(const MlpModel& m, const Eigen::MatrixXd& x_cols) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(m.layer_count() + 1);
    acts.push_back(x_cols);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        Eigen::MatrixXd z = m.weights[l] * acts.back();
        z.colwise() += m.biases[l];
        apply_activation(m.activations[l], z);
        acts.push_back(std::move(z));
    }
    return acts;
}

/// Derivative of the activation expressed through its output.
inline Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& out) {
    if (a == Activation::tanh) return (1.0 - out.array().square()).matrix();
    return Eigen::MatrixXd::Ones(out.rows(), out.cols());
}

}  // namespace detail

inline Eigen::VectorXd mlp_forward(const MlpModel& m, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != m.input_size())
        throw DomainError("mlp_forward: input has " + std::to_string(x.size()) + " entries, model expects " +
                          std::to_string(m.input_size()));
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        Eigen::VectorXd z = m.weights[l] * a + m.biases[l];
        if (m.activations[l] == Activation::tanh) z = z.array().tanh().matrix();
        a = std::move(z);
    }
    return a;
}

/// Batched forward pass; rows of `inputs` are samples. Returns samples x outputs.
inline Eigen::MatrixXd mlp_forward_batch(const MlpModel& m, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != m.input_size())
        throw DomainError("mlp_forward_batch: input width mismatch");
    return detail::forward_trace(m, inputs.transpose()).back().transpose();
}

/// Gradient of 0.5 * sum of squared errors over a batch (rows are samples).
inline Eigen::VectorXd sse_gradient(const MlpModel& m, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    const auto acts = detail::forward_trace(m, inputs.transpose());
    Eigen::MatrixXd delta = acts.back() - targets.transpose();
    std::vector<Eigen::MatrixXd> gw(m.layer_count());
    std::vector<Eigen::VectorXd> gb(m.layer_count());
    for (std::size_t l = m.layer_count(); l-- > 0;) {
        delta = (delta.array() * detail::activation_slope(m.activations[l], acts[l + 1]).array()).matrix();
        gw[l] = delta * acts[l].transpose();
        gb[l] = delta.rowwise().sum();
        if (l > 0) delta = m.weights[l].transpose() * delta;
    }
    Eigen::VectorXd g(m.parameter_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        for (Eigen::Index i = 0; i < gw[l].rows(); ++i)
            for (Eigen::Index j = 0; j < gw[l].cols(); ++j) g(k++) = gw[l](i, j);
        for (Eigen::Index i = 0; i < gb[l].size(); ++i) g(k++) = gb[l](i);
    }
    return g;
}

/// Jacobian of the outputs w.r.t. the flattened parameters. Rows are ordered
/// (output-major, then sample): row o * n + s.
inline Eigen::MatrixXd output_jacobian(const MlpModel& m, const Eigen::MatrixXd& inputs) {
    const auto acts = detail::forward_trace(m, inputs.transpose());
    const Eigen::Index n = inputs.rows();
    const auto n_out = static_cast<Eigen::Index>(m.output_size());
    Eigen::MatrixXd jac(n * n_out, static_cast<Eigen::Index>(m.parameter_count()));
    std::vector<Eigen::Index> offset(m.layer_count());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        offset[l] = k;
        k += m.weights[l].size() + m.biases[l].size();
    }
    for (Eigen::Index o = 0; o < n_out; ++o) {
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n_out, n);
        delta.row(o).setOnes();
        for (std::size_t l = m.layer_count(); l-- > 0;) {
            delta = (delta.array() * detail::activation_slope(m.activations[l], acts[l + 1]).array()).matrix();
            const Eigen::Index rows = m.weights[l].rows();
            const Eigen::Index cols = m.weights[l].cols();
            auto block = jac.middleRows(o * n, n);
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j)
                    block.col(offset[l] + i * cols + j) = (delta.row(i).array() * acts[l].row(j).array()).transpose();
                block.col(offset[l] + rows * cols + i) = delta.row(i).transpose();
            }
            if (l > 0) delta = m.weights[l].transpose() * delta;
        }
    }
    return jac;
}

inline double mse(const MlpModel& m, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    if (inputs.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
    return (mlp_forward_batch(m, inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

// ---------------------------------------------------------------------------
// Training

enum class TrainMethod { levenberg_marquardt, gradient_descent };

struct TrainConfig {
    std::size_t max_epochs = 300;
    /// Consecutive epochs without a new best validation MSE before stopping.
    std::size_t patience = 50;
    TrainMethod method = TrainMethod::levenberg_marquardt;

    // Gradient descent: step grows by lr_increase on success, halves on loss increase.
    double learning_rate = 0.01;
    double lr_increase = 1.05;

    // Levenberg-Marquardt damping schedule.
    double mu_init = 1e-3;
    double mu_decrease = 0.1;
    double mu_increase = 10.0;
    double mu_max = 1e10;

    double train_fraction = 0.70;
    double validation_fraction = 0.15;
    double test_fraction = 0.15;
    std::uint64_t seed = 1;

    /// Protocol used for the published networks: 30000 epochs, 10000 validation failures.
    static TrainConfig paper() {
        TrainConfig c;
        c.max_epochs = 30000;
        c.patience = 10000;
        return c;
    }

    void validate() const {
        if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9)
            throw ConfigError("TrainConfig: split fractions must sum to 1");
        if (train_fraction <= 0.0 || validation_fraction < 0.0 || test_fraction < 0.0)
            throw ConfigError("TrainConfig: split fractions must be non-negative with a non-empty training split");
        if (patience > max_epochs) throw ConfigError("TrainConfig: patience must not exceed max_epochs");
        if (max_epochs == 0) throw ConfigError("TrainConfig: max_epochs must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> train_mse;       // after each epoch
    std::vector<double> validation_mse;  // after each epoch
    std::size_t best_epoch = 0;          // 0 = initial parameters
    std::size_t stop_epoch = 0;
    double best_validation_mse = 0.0;
    double test_mse = 0.0;
    std::string stop_reason;

    bool operator==(const TrainReport&) const = default;
};

struct DataSplit {
    std::vector<std::size_t> train, validation, test;
};

inline DataSplit split_indices(std::size_t n, const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    const auto perm = rng.permutation(n);
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    n_val = std::min(n_val, n - n_train);
    DataSplit s;
    s.train.assign(perm.begin(), perm.begin() + n_train);
    s.validation.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    s.test.assign(perm.begin() + n_train + n_val, perm.end());
    return s;
}

namespace detail {

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

/// Column-stacked residual in output-major order, matching output_jacobian rows.
inline Eigen::VectorXd stacked_residual(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::MatrixXd e = mlp_forward_batch(m, x) - y;
    return Eigen::Map<const Eigen::VectorXd>(e.data(), e.size());
}

}  // namespace detail

/// Trains `model` in place on a seeded train/validation/test split and returns
/// the parameters of the epoch with the lowest validation MSE.
inline std::pair<MlpModel, TrainReport> mlp_train(MlpModel model, const Eigen::MatrixXd& inputs,
                                                  const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
    cfg.validate();
    if (inputs.rows() != targets.rows()) throw DomainError("mlp_train: input/target row mismatch");
    if (inputs.rows() < 10) throw DomainError("mlp_train: need at least 10 samples");
    if (static_cast<std::size_t>(inputs.cols()) != model.input_size() ||
        static_cast<std::size_t>(targets.cols()) != model.output_size())
        throw DomainError("mlp_train: data dimensions do not match the model");
    if (!targets.allFinite() || !inputs.allFinite()) throw DomainError("mlp_train: non-finite training data");

    const auto split = split_indices(static_cast<std::size_t>(inputs.rows()), cfg);
    const Eigen::MatrixXd xt = detail::take_rows(inputs, split.train);
    const Eigen::MatrixXd yt = detail::take_rows(targets, split.train);
    const Eigen::MatrixXd xv = detail::take_rows(inputs, split.validation);
    const Eigen::MatrixXd yv = detail::take_rows(targets, split.validation);
    const Eigen::MatrixXd xs = detail::take_rows(inputs, split.test);
    const Eigen::MatrixXd ys = detail::take_rows(targets, split.test);
    const bool has_val = xv.rows() > 0;

    TrainReport report;
    Eigen::VectorXd params = model.parameters();
    Eigen::VectorXd best_params = params;
    double best_val = has_val ? mse(model, xv, yv) : mse(model, xt, yt);
    report.best_validation_mse = best_val;
    std::size_t fails = 0;

    double train_loss = mse(model, xt, yt);
    if (!std::isfinite(train_loss) || !std::isfinite(best_val))
        throw TrainingError("mlp_train: non-finite loss at initialization (check target scaling)");
    double mu = cfg.mu_init;
    double lr = cfg.learning_rate;
    const auto n_params = static_cast<Eigen::Index>(model.parameter_count());

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        bool stalled = false;
        if (cfg.method == TrainMethod::levenberg_marquardt) {
            const Eigen::MatrixXd jac = output_jacobian(model, xt);
            const Eigen::VectorXd res = detail::stacked_residual(model, xt, yt);
            Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(n_params, n_params);
            jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
            jtj.triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
            const Eigen::VectorXd grad = jac.transpose() * res;
            if (grad.norm() < 1e-14) {
                report.stop_reason = "gradient below tolerance";
                report.stop_epoch = epoch - 1;
                break;
            }
            while (true) {
                Eigen::MatrixXd lhs = jtj;
                lhs.diagonal().array() += mu;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
                Eigen::VectorXd step = ldlt.solve(grad);
                if (ldlt.info() == Eigen::Success && step.allFinite()) {
                    model.set_parameters(params - step);
                    const double trial = mse(model, xt, yt);
                    if (trial < train_loss) {
                        params -= step;
                        train_loss = trial;
                        mu = std::max(mu * cfg.mu_decrease, 1e-20);
                        break;
                    }
                }
                mu *= cfg.mu_increase;
                if (mu > cfg.mu_max) {
                    model.set_parameters(params);
                    stalled = true;
                    break;
                }
            }
            if (stalled) {
                report.stop_reason = "mu exceeded mu_max";
                report.stop_epoch = epoch - 1;
                break;
            }
        } else {
            const Eigen::VectorXd grad = sse_gradient(model, xt, yt) * (2.0 / static_cast<double>(yt.size()));
            while (true) {
                model.set_parameters(params - lr * grad);
                const double trial = mse(model, xt, yt);
                if (std::isfinite(trial) && trial <= train_loss) {
                    params -= lr * grad;
                    train_loss = trial;
                    lr *= cfg.lr_increase;
                    break;
                }
                lr *= 0.5;
                if (lr < 1e-300) {
                    model.set_parameters(params);
                    stalled = true;
                    break;
                }
            }
            if (stalled) {
                report.stop_reason = "step size underflow";
                report.stop_epoch = epoch - 1;
                break;
            }
        }
        if (!std::isfinite(train_loss))
            throw TrainingError("mlp_train: non-finite training loss at epoch " + std::to_string(epoch));

        const double val = has_val ? mse(model, xv, yv) : train_loss;
        if (!std::isfinite(val))
            throw TrainingError("mlp_train: non-finite validation loss at epoch " + std::to_string(epoch));
        report.train_mse.push_back(train_loss);
        report.validation_mse.push_back(val);
        report.stop_epoch = epoch;
        if (val < best_val) {
            best_val = val;
            best_params = params;
            report.best_epoch = epoch;
            fails = 0;
        } else if (++fails > cfg.patience) {
            report.stop_reason = "validation failures exceeded patience";
            break;
        }
        if (epoch == cfg.max_epochs) report.stop_reason = "max epochs";
    }
    model.set_parameters(best_params);
    report.best_validation_mse = best_val;
    report.test_mse = xs.rows() > 0 ? mse(model, xs, ys) : std::numeric_limits<double>::quiet_NaN();
    return {std::move(model), std::move(report)};
}

/// Largest relative discrepancy between the back-propagated gradient of
/// 0.5 * ||f(x) - y||^2 and a central finite difference with step epsilon.
inline double gradient_check(const MlpModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw DomainError("gradient_check: epsilon must lie in (0, 1e-3]");
    const Eigen::MatrixXd xi = x.transpose();
    const Eigen::MatrixXd yi = y.transpose();
    const Eigen::VectorXd analytic = sse_gradient(model, xi, yi);
    MlpModel probe = model;
    const Eigen::VectorXd p0 = model.parameters();
    auto loss = [&](const Eigen::VectorXd& p) {
        probe.set_parameters(p);
        return 0.5 * (mlp_forward(probe, x) - y).squaredNorm();
    };
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
        Eigen::VectorXd p = p0;
        p(i) = p0(i) + epsilon;
        const double up = loss(p);
        p(i) = p0(i) - epsilon;
        const double down = loss(p);
        const double numeric = (up - down) / (2.0 * epsilon);
        const double scale = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-7});
        const double diff = std::abs(analytic(i) - numeric);
        if (diff == 0.0) continue;
        worst = std::max(worst, diff / scale);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json mlp_to_json(const MlpModel& m) {
    nlohmann::json j;
    j["format"] = "wavefarm-mlp";
    j["version"] = 1;
    j["sizes"] = m.sizes;
    auto& acts = j["activations"] = nlohmann::json::array();
    auto& ws = j["weights"] = nlohmann::json::array();
    auto& bs = j["biases"] = nlohmann::json::array();
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        acts.push_back(activation_name(m.activations[l]));
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(m.weights[l].size()));
        for (Eigen::Index i = 0; i < m.weights[l].rows(); ++i)
            for (Eigen::Index k = 0; k < m.weights[l].cols(); ++k) w.push_back(m.weights[l](i, k));
        ws.push_back(w);
        bs.push_back(std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size()));
    }
    return j;
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "wavefarm-mlp") throw DataError("not a wavefarm-mlp document");
    if (j.value("version", 0) != 1) throw DataError("unsupported wavefarm-mlp version");
    MlpModel m;
    m.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    if (m.sizes.size() < 2) throw DataError("wavefarm-mlp: need at least two layer sizes");
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    const auto& as = j.at("activations");
    if (ws.size() + 1 != m.sizes.size() || bs.size() != ws.size() || as.size() != ws.size())
        throw DataError("wavefarm-mlp: layer count mismatch");
    for (std::size_t l = 0; l < ws.size(); ++l) {
        const auto w = ws[l].get<std::vector<double>>();
        const auto b = bs[l].get<std::vector<double>>();
        const auto rows = static_cast<Eigen::Index>(m.sizes[l + 1]);
        const auto cols = static_cast<Eigen::Index>(m.sizes[l]);
        if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
            throw DataError("wavefarm-mlp: layer " + std::to_string(l) + " has inconsistent dimensions");
        Eigen::MatrixXd wm(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index k = 0; k < cols; ++k) wm(i, k) = w[static_cast<std::size_t>(i * cols + k)];
        m.weights.push_back(std::move(wm));
        m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
        m.activations.push_back(activation_from_name(as[l].get<std::string>()));
    }
    return m;
}

}  // namespace wavefarm
