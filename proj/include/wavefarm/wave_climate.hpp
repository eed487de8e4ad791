#pragma once

// Spectral sea states, dispersion, irregular-wave synthesis and the
// probabilistic (Hs, Tp) wave climate evaluated on Gauss-Legendre nodes.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/rng.hpp"

namespace wavefarm {

struct SeaState {
    double hs;              // significant wave height, m
    double tp;              // peak period, s
    double beta_w = 0.0;    // incident direction, rad; only head seas along +x are modelled
};

/// Strictly increasing set of radial frequencies with trapezoidal cell widths.
class FrequencyGrid {
public:
    FrequencyGrid() = default;

    explicit FrequencyGrid(std::vector<double> omegas) : omegas_(std::move(omegas)) {
        if (omegas_.empty()) throw DomainError("FrequencyGrid: no frequencies");
        for (std::size_t i = 0; i < omegas_.size(); ++i) {
            if (!(omegas_[i] > 0.0) || !std::isfinite(omegas_[i]))
                throw DomainError("FrequencyGrid: frequencies must be positive and finite");
            if (i > 0 && !(omegas_[i] > omegas_[i - 1]))
                throw DomainError("FrequencyGrid: frequencies must be strictly increasing");
        }
    }

    static FrequencyGrid evenly_spaced(double omega_min, double omega_max, std::size_t n) {
        if (n == 0) throw DomainError("FrequencyGrid: n must be >= 1");
        if (n == 1) return FrequencyGrid({omega_min});
        if (!(omega_max > omega_min)) throw DomainError("FrequencyGrid: omega_max must exceed omega_min");
        std::vector<double> w(n);
        const double step = (omega_max - omega_min) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) w[i] = omega_min + step * static_cast<double>(i);
        w.back() = omega_max;
        return FrequencyGrid(std::move(w));
    }

    std::size_t size() const { return omegas_.size(); }
    double operator[](std::size_t i) const { return omegas_[i]; }
    const std::vector<double>& omegas() const { return omegas_; }
    double min() const { return omegas_.front(); }
    double max() const { return omegas_.back(); }

    /// Quadrature widths d_omega_k: half the distance to each neighbour.
    std::vector<double> widths() const {
        const std::size_t n = omegas_.size();
        std::vector<double> dw(n, 0.0);
        if (n == 1) return dw;
        for (std::size_t k = 0; k < n; ++k) {
            const double lo = k == 0 ? omegas_[0] : 0.5 * (omegas_[k - 1] + omegas_[k]);
            const double hi = k + 1 == n ? omegas_[n - 1] : 0.5 * (omegas_[k] + omegas_[k + 1]);
            dw[k] = hi - lo;
        }
        return dw;
    }

    bool operator==(const FrequencyGrid&) const = default;

private:
    std::vector<double> omegas_;
};

// ---------------------------------------------------------------------------
// JONSWAP

/// Peak-enhancement factor from the steepness ratio Tp / sqrt(Hs).
inline double jonswap_gamma(double hs, double tp) {
    const double ratio = tp / std::sqrt(hs);
    if (ratio <= 3.6) return 5.0;
    if (ratio <= 5.0) return std::exp(5.75 - 1.15 * ratio);
    return 1.0;
}

/// JONSWAP spectral density S(omega) in m^2 s, with omega_p = 2 pi / Tp.
inline double jonswap_spectrum(double hs, double tp, double omega) {
    if (!(hs > 0.0) || !(tp > 0.0) || !(omega > 0.0))
        throw DomainError("jonswap_spectrum: Hs, Tp and omega must be positive");
    const double wp = kTwoPi / tp;
    const double gamma = jonswap_gamma(hs, tp);
    const double sigma = omega <= wp ? 0.07 : 0.09;
    const double dev = omega / wp - 1.0;
    const double r = std::exp(-dev * dev / (2.0 * sigma * sigma));
    const double beta = 1.25 * std::pow(wp, 4);
    const double c_gamma = 1.0 - 0.287 * std::log(gamma);
    const double alpha = beta / 4.0 * hs * hs * c_gamma * std::pow(gamma, r);
    return alpha * std::pow(omega, -5) * std::exp(-beta * std::pow(omega, -4));
}

/// Callable spectrum handle for a fixed sea state.
struct JonswapSpectrum {
    double hs;
    double tp;
    double operator()(double omega) const { return jonswap_spectrum(hs, tp, omega); }
};

// ---------------------------------------------------------------------------
// Dispersion

/// Wavenumber k solving omega^2 = g k tanh(k h).
inline double solve_dispersion(double omega, double depth, double g) {
    if (!(omega > 0.0) || !(depth > 0.0) || !(g > 0.0))
        throw DomainError("solve_dispersion: omega, depth and g must be positive");
    const double w2 = omega * omega;
    auto residual = [&](double k) { return g * k * std::tanh(k * depth) - w2; };
    // tanh(kh) <= min(1, kh) gives a lower bound; the residual is increasing in k.
    double lo = std::max(w2 / g, omega / std::sqrt(g * depth));
    double hi = 2.0 * lo;
    while (residual(hi) < 0.0) hi *= 2.0;
    if (residual(lo) >= 0.0) return lo;

    double k = std::max(w2 / (g * std::sqrt(std::tanh(w2 * depth / g))), lo);
    if (!(k < hi)) k = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = residual(k);
        if (std::abs(f) <= 1e-14 * w2) break;
        if (f < 0.0) lo = k; else hi = k;
        const double th = std::tanh(k * depth);
        const double df = g * th + g * k * depth * (1.0 - th * th);
        double next = k - f / df;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - k) <= 1e-16 * k) {
            k = next;
            break;
        }
        k = next;
    }
    return k;
}

inline std::vector<double> wavenumbers(const FrequencyGrid& grid, const Environment& env) {
    std::vector<double> k(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) k[i] = solve_dispersion(grid[i], env.depth, env.g);
    return k;
}

// ---------------------------------------------------------------------------
// Irregular waves

struct WaveSignal {
    std::vector<double> amplitudes;   // H_i / 2, m
    std::vector<double> wavenumbers;  // 1/m
    std::vector<double> frequencies;  // rad/s
    std::vector<double> phases;       // rad, [0, 2 pi)

    std::size_t size() const { return amplitudes.size(); }

    /// Free-surface elevation eta(x, t).
    double elevation(double x, double t) const {
        double eta = 0.0;
        for (std::size_t i = 0; i < amplitudes.size(); ++i)
            eta += amplitudes[i] * std::cos(wavenumbers[i] * x - frequencies[i] * t + phases[i]);
        return eta;
    }
};

/// Superposition of n_r regular components drawn from a spectrum on equal
/// frequency bins over [omega_min, omega_max]; H_i = 2 sqrt(2 S(omega_i) d_omega).
template <class Spectrum>
WaveSignal synthesize_wave(const Spectrum& spectrum, std::size_t n_r, std::uint64_t seed,
                           double omega_min = 0.1, double omega_max = 7.0,
                           const Environment& env = {}) {
    if (n_r == 0) throw DomainError("synthesize_wave: n_r must be >= 1");
    if (!(omega_max > omega_min) || !(omega_min > 0.0))
        throw DomainError("synthesize_wave: invalid frequency range");
    WaveSignal sig;
    sig.amplitudes.resize(n_r);
    sig.wavenumbers.resize(n_r);
    sig.frequencies.resize(n_r);
    sig.phases.resize(n_r);
    const double dw = (omega_max - omega_min) / static_cast<double>(n_r);
    Rng rng(seed);
    for (std::size_t i = 0; i < n_r; ++i) {
        const double w = omega_min + (static_cast<double>(i) + 0.5) * dw;
        const double s = spectrum(w);
        sig.frequencies[i] = w;
        sig.amplitudes[i] = std::sqrt(2.0 * std::max(s, 0.0) * dw);
        sig.wavenumbers[i] = solve_dispersion(w, env.depth, env.g);
        sig.phases[i] = kTwoPi * rng.uniform();
    }
    return sig;
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b].
inline QuadratureRule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0) {
    if (n == 0) throw DomainError("gauss_legendre: n must be >= 1");
    if (!(a < b)) throw DomainError("gauss_legendre: require a < b");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
            }
            dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        if (n % 2 == 1 && i == m - 1) z = 0.0;
        // Recompute derivative at the converged root.
        double p0 = 1.0, p1 = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
        }
        dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = mid - half * z;
        rule.nodes[n - 1 - i] = mid + half * z;
        rule.weights[i] = half * w;
        rule.weights[n - 1 - i] = half * w;
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Wave climate

struct WaveSample {
    int year;
    double hs;
    double tp;
};

struct ClimateBox {
    double hs_min = 0.25;
    double hs_max = 8.0;
    double tp_min = 2.0;
    double tp_max = 20.0;
};

struct ClimateOptions {
    std::size_t n_gq = 20;
    ClimateBox box;
    /// Kernel bandwidths (m, s); non-positive selects Silverman's rule per year.
    double bandwidth_hs = 0.0;
    double bandwidth_tp = 0.0;
    /// Expected number of years; 0 accepts whatever the samples contain.
    std::size_t n_yr = 0;
};

/// Per-year joint (Hs, Tp) densities on a tensor Gauss-Legendre grid.
struct WaveClimate {
    std::vector<double> hs_nodes, tp_nodes;
    std::vector<double> hs_weights, tp_weights;
    std::vector<int> years;
    std::vector<Eigen::MatrixXd> prob;  // [year](i_hs, j_tp)

    std::size_t n_years() const { return prob.size(); }

    /// Sum_ij w_i w_j p(i, j) for one year.
    double weighted_total(std::size_t year) const {
        double s = 0.0;
        for (std::size_t i = 0; i < hs_nodes.size(); ++i)
            for (std::size_t j = 0; j < tp_nodes.size(); ++j)
                s += hs_weights[i] * tp_weights[j] * prob[year](i, j);
        return s;
    }

    /// Year-averaged quadrature mass per node, (1/n_yr) sum_y w_i w_j p_y(i, j).
    Eigen::MatrixXd mean_node_mass() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(hs_nodes.size(), tp_nodes.size());
        for (const auto& p : prob)
            for (std::size_t i = 0; i < hs_nodes.size(); ++i)
                for (std::size_t j = 0; j < tp_nodes.size(); ++j)
                    m(i, j) += hs_weights[i] * tp_weights[j] * p(i, j);
        if (!prob.empty()) m /= static_cast<double>(prob.size());
        return m;
    }
};

namespace detail {

inline double sample_stddev(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Gaussian kernel density estimate of each year's (Hs, Tp) samples evaluated
/// at the quadrature nodes, renormalized to unit quadrature mass on the box.
inline WaveClimate estimate_climate(const std::vector<WaveSample>& samples, const ClimateOptions& opt) {
    if (opt.n_gq == 0) throw DomainError("estimate_climate: n_gq must be >= 1");
    std::map<int, std::vector<const WaveSample*>> by_year;
    for (const auto& s : samples) {
        if (!(s.hs > 0.0) || !(s.tp > 0.0))
            throw DataError("estimate_climate: non-positive Hs/Tp in year " + std::to_string(s.year));
        by_year[s.year].push_back(&s);
    }
    if (by_year.empty()) throw DataError("estimate_climate: no samples");
    if (opt.n_yr != 0 && by_year.size() != opt.n_yr)
        throw DataError("estimate_climate: expected " + std::to_string(opt.n_yr) + " years, found " +
                        std::to_string(by_year.size()));

    WaveClimate c;
    const auto qh = gauss_legendre(opt.n_gq, opt.box.hs_min, opt.box.hs_max);
    const auto qt = gauss_legendre(opt.n_gq, opt.box.tp_min, opt.box.tp_max);
    c.hs_nodes = qh.nodes;
    c.hs_weights = qh.weights;
    c.tp_nodes = qt.nodes;
    c.tp_weights = qt.weights;

    for (const auto& [year, recs] : by_year) {
        if (recs.size() < 2)
            throw DataError("estimate_climate: year " + std::to_string(year) + " has fewer than 2 samples");
        std::vector<double> hs, tp;
        for (const auto* r : recs) {
            hs.push_back(r->hs);
            tp.push_back(r->tp);
        }
        double bh = opt.bandwidth_hs;
        double bt = opt.bandwidth_tp;
        // Silverman, d = 2: h_j = sigma_j n^(-1/6).
        const double factor = std::pow(static_cast<double>(recs.size()), -1.0 / 6.0);
        if (!(bh > 0.0)) bh = detail::sample_stddev(hs) * factor;
        if (!(bt > 0.0)) bt = detail::sample_stddev(tp) * factor;
        if (!(bh > 0.0) || !(bt > 0.0))
            throw DataError("estimate_climate: year " + std::to_string(year) +
                            " samples have no spread in Hs or Tp; supply at least two distinct values "
                            "per dimension or an explicit bandwidth");

        Eigen::MatrixXd p(opt.n_gq, opt.n_gq);
        const double norm = 1.0 / (kTwoPi * bh * bt * static_cast<double>(recs.size()));
        for (std::size_t i = 0; i < opt.n_gq; ++i) {
            for (std::size_t j = 0; j < opt.n_gq; ++j) {
                double s = 0.0;
                for (std::size_t n = 0; n < hs.size(); ++n) {
                    const double zh = (c.hs_nodes[i] - hs[n]) / bh;
                    const double zt = (c.tp_nodes[j] - tp[n]) / bt;
                    s += std::exp(-0.5 * (zh * zh + zt * zt));
                }
                p(i, j) = s * norm;
            }
        }
        c.years.push_back(year);
        c.prob.push_back(std::move(p));
        const double total = c.weighted_total(c.prob.size() - 1);
        if (!(total > 0.0) || !std::isfinite(total))
            throw DataError("estimate_climate: year " + std::to_string(year) +
                            " has no probability mass inside the quadrature box");
        c.prob.back() /= total;
    }
    return c;
}

/// Reads delimited `year, Hs, Tp` records; the first line is a header.
inline std::vector<WaveSample> read_wave_samples(std::istream& in, const std::string& source = "<stream>") {
    std::vector<WaveSample> out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        if (line[0] == '#') continue;
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ss(line);
        double year, hs, tp;
        if (!(ss >> year >> hs >> tp))
            throw DataError(source + ":" + std::to_string(lineno) + ": expected `year, Hs, Tp`");
        std::string extra;
        if (ss >> extra) throw DataError(source + ":" + std::to_string(lineno) + ": too many columns");
        out.push_back({static_cast<int>(year), hs, tp});
    }
    if (!header_seen) throw DataError(source + ": missing header line");
    return out;
}

inline std::vector<WaveSample> read_wave_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open wave sample file: " + path);
    return read_wave_samples(in, path);
}

inline nlohmann::json climate_to_json(const WaveClimate& c) {
    nlohmann::json j;
    j["format"] = "wavefarm-climate";
    j["version"] = 1;
    j["hs_nodes"] = c.hs_nodes;
    j["hs_weights"] = c.hs_weights;
    j["tp_nodes"] = c.tp_nodes;
    j["tp_weights"] = c.tp_weights;
    j["years"] = c.years;
    auto& probs = j["prob"] = nlohmann::json::array();
    for (const auto& p : c.prob) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            std::vector<double> row(p.cols());
            for (Eigen::Index k = 0; k < p.cols(); ++k) row[k] = p(i, k);
            rows.push_back(row);
        }
        probs.push_back(rows);
    }
    return j;
}

inline WaveClimate climate_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "wavefarm-climate") throw DataError("not a wavefarm climate document");
    if (j.value("version", 0) != 1) throw DataError("unsupported climate version");
    WaveClimate c;
    c.hs_nodes = j.at("hs_nodes").get<std::vector<double>>();
    c.hs_weights = j.at("hs_weights").get<std::vector<double>>();
    c.tp_nodes = j.at("tp_nodes").get<std::vector<double>>();
    c.tp_weights = j.at("tp_weights").get<std::vector<double>>();
    c.years = j.at("years").get<std::vector<int>>();
    for (const auto& rows : j.at("prob")) {
        Eigen::MatrixXd p(c.hs_nodes.size(), c.tp_nodes.size());
        if (rows.size() != c.hs_nodes.size()) throw DataError("climate: probability matrix shape mismatch");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto r = rows[i].get<std::vector<double>>();
            if (r.size() != c.tp_nodes.size()) throw DataError("climate: probability matrix shape mismatch");
            for (std::size_t k = 0; k < r.size(); ++k) p(i, k) = r[k];
        }
        c.prob.push_back(std::move(p));
    }
    if (c.prob.size() != c.years.size()) throw DataError("climate: year count mismatch");
    return c;
}

}  // namespace wavefarm
