#pragma once

// Frequency-domain heave response of a farm and the power pipeline from
// regular-wave absorbed power to expected power per unit device volume.

#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/hydro_oracle.hpp"
#include "wavefarm/surrogate.hpp"
#include "wavefarm/wave_climate.hpp"

namespace wavefarm {

struct Hydrostatics {
    double mass;       // rho pi R^2 D
    double stiffness;  // rho g pi R^2
};

inline Hydrostatics hydrostatics(const WecGeometry& geom, const Environment& env = {}) {
    return {env.rho * geom.volume(), env.rho * env.g * geom.waterplane_area()};
}

/// Per-device PTO spring and damper.
struct PtoParams {
    Eigen::VectorXd stiffness;  // N/m
    Eigen::VectorXd damping;    // N s/m

    static PtoParams uniform(Eigen::Index n, double k, double b) {
        return {Eigen::VectorXd::Constant(n, k), Eigen::VectorXd::Constant(n, b)};
    }
};

struct FarmDesign {
    WecGeometry geometry;
    PtoParams pto;
    std::vector<Eigen::Vector2d> layout;

    Eigen::Index size() const { return static_cast<Eigen::Index>(layout.size()); }
};

inline constexpr double kMaxConditionNumber = 1e12;

/// H = [-w^2 (M + A) + G I + K_pto + i w (B + B_pto)]^-1.
inline Eigen::MatrixXcd transfer_matrix(double omega, double mass, const Eigen::MatrixXd& added_mass,
                                        const Eigen::MatrixXd& damping, double stiffness, const PtoParams& pto) {
    const Eigen::Index n = added_mass.rows();
    if (added_mass.cols() != n || damping.rows() != n || damping.cols() != n || pto.stiffness.size() != n ||
        pto.damping.size() != n)
        throw DomainError("transfer_matrix: dimension mismatch");
    Eigen::MatrixXd re = -omega * omega * added_mass;
    re.diagonal().array() += -omega * omega * mass + stiffness + pto.stiffness.array();
    Eigen::MatrixXd im = omega * damping;
    im.diagonal() += omega * pto.damping;
    Eigen::MatrixXcd z(n, n);
    z.real() = re;
    z.imag() = im;

    // Conditioning is measured against the magnitude of the individual terms, so
    // near-cancellation is caught even for a single body.
    Eigen::MatrixXd terms = (omega * omega * added_mass).cwiseAbs() + (omega * damping).cwiseAbs();
    terms.diagonal().array() +=
        omega * omega * mass + std::abs(stiffness) + pto.stiffness.array().abs() + omega * pto.damping.array().abs();
    auto norm1 = [](const auto& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); };
    const double zn = norm1(z);
    if (!std::isfinite(zn) || zn == 0.0)
        throw SingularityError("transfer matrix denominator is singular", omega);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(z);
    Eigen::MatrixXcd h = lu.inverse();
    const double cond = norm1(terms) * norm1(h);
    if (!std::isfinite(cond) || cond > kMaxConditionNumber)
        throw SingularityError("transfer matrix denominator is ill-conditioned (cond1 = " + std::to_string(cond) + ")",
                               omega);
    return h;
}

struct Response {
    Eigen::VectorXcd displacement;
    Eigen::VectorXcd velocity;
    Eigen::VectorXcd acceleration;
};

inline Response response(const Eigen::MatrixXcd& h, const Eigen::VectorXcd& excitation, double omega) {
    if (h.cols() != excitation.size()) throw DomainError("response: dimension mismatch");
    Response r;
    r.displacement = h * excitation;
    r.velocity = cplx(0.0, omega) * r.displacement;
    r.acceleration = -omega * omega * r.displacement;
    return r;
}

/// p_m = 1/2 w^2 xi^H B_pto xi.
inline double power_regular(double omega, const Eigen::VectorXcd& xi, const Eigen::VectorXd& pto_damping) {
    if (xi.size() != pto_damping.size()) throw DomainError("power_regular: dimension mismatch");
    return 0.5 * omega * omega * (pto_damping.array() * xi.array().abs2()).sum();
}

/// Absorbed regular-wave power (unit amplitude) at every frequency of the matrices.
inline std::vector<double> regular_power_curve(const FarmMatrices& m, const FarmDesign& design,
                                               const Environment& env = {}) {
    const auto hs = hydrostatics(design.geometry, env);
    if (m.bodies() != design.size()) throw DomainError("regular_power_curve: farm size mismatch");
    std::vector<double> out(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double w = m.omegas[k];
        const auto h = transfer_matrix(w, hs.mass, m.added_mass[k], m.damping[k], hs.stiffness, design.pto);
        out[k] = power_regular(w, h * m.excitation[k], design.pto.damping);
    }
    return out;
}

/// p_i = sum_k 2 dw_k S(Hs, Tp, w_k) p_m(w_k).
inline double power_sea_state(const SeaState& sea, const FrequencyGrid& grid, const std::vector<double>& pm) {
    if (pm.size() != grid.size()) throw DomainError("power_sea_state: power curve does not match the grid");
    const auto dw = grid.widths();
    double p = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) p += 2.0 * dw[k] * jonswap_spectrum(sea.hs, sea.tp, grid[k]) * pm[k];
    return p;
}

/// p_a = eta (1 / n_yr) sum_y sum_ij w_i w_j p_r(i, j, y) p_i(i, j).
inline double average_power(const WaveClimate& climate, const Eigen::MatrixXd& p_i, const Efficiencies& eff = {}) {
    if (p_i.rows() != static_cast<Eigen::Index>(climate.hs_nodes.size()) ||
        p_i.cols() != static_cast<Eigen::Index>(climate.tp_nodes.size()))
        throw DataError("average_power: sea-state powers do not match the climate nodes");
    if (climate.n_years() == 0) throw DataError("average_power: climate has no years");
    return eff.product() * (climate.mean_node_mass().array() * p_i.array()).sum();
}

inline double power_per_volume(double p_a, const WecGeometry& geom) {
    if (!(geom.radius > 0.0) || !(geom.draft > 0.0)) throw DomainError("power_per_volume: R and D must be positive");
    return p_a / geom.volume();
}

/// Climate-integrated spectral weights: p_a = eta sum_k c_k p_m(w_k) with
/// c_k = sum_ij mass_ij 2 dw_k S(Hs_i, Tp_j, w_k). Precomputed once per
/// (climate, grid) pair so each design evaluation is a dot product.
class ClimateWeights {
public:
    ClimateWeights(const WaveClimate& climate, const FrequencyGrid& grid) : grid_(grid) {
        const auto mass = climate.mean_node_mass();
        const auto dw = grid.widths();
        coeffs_.assign(grid.size(), 0.0);
        for (std::size_t i = 0; i < climate.hs_nodes.size(); ++i)
            for (std::size_t j = 0; j < climate.tp_nodes.size(); ++j) {
                const double m = mass(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (m == 0.0) continue;
                for (std::size_t k = 0; k < grid.size(); ++k)
                    coeffs_[k] += m * 2.0 * dw[k] *
                                  jonswap_spectrum(climate.hs_nodes[i], climate.tp_nodes[j], grid[k]);
            }
    }

    const FrequencyGrid& grid() const { return grid_; }
    const std::vector<double>& coefficients() const { return coeffs_; }

    double average_power(const std::vector<double>& pm, const Efficiencies& eff = {}) const {
        if (pm.size() != coeffs_.size()) throw DomainError("ClimateWeights: power curve does not match the grid");
        double s = 0.0;
        for (std::size_t k = 0; k < pm.size(); ++k) s += coeffs_[k] * pm[k];
        return eff.product() * s;
    }

private:
    FrequencyGrid grid_;
    std::vector<double> coeffs_;
};

struct PowerResult {
    std::vector<double> omegas;
    std::vector<double> p_m;  // W per unit amplitude^2, per frequency
    Eigen::MatrixXd p_i;      // W, per (Hs node, Tp node)
    double p_a = 0.0;         // W
    double p_v = 0.0;         // W/m^3
};

/// Full pipeline for one design: assembly, motions, sea-state and expected power.
inline PowerResult evaluate_power(const FarmDesign& design, const SurrogateBundle& bundle, const WaveClimate& climate,
                                  const Efficiencies& eff = {}, NormalizeMode mode = NormalizeMode::strict) {
    const auto m = assemble_farm(bundle, design.geometry, design.layout, mode);
    PowerResult r;
    r.omegas = m.omegas;
    r.p_m = regular_power_curve(m, design, bundle.env);
    r.p_i.resize(static_cast<Eigen::Index>(climate.hs_nodes.size()), static_cast<Eigen::Index>(climate.tp_nodes.size()));
    for (std::size_t i = 0; i < climate.hs_nodes.size(); ++i)
        for (std::size_t j = 0; j < climate.tp_nodes.size(); ++j)
            r.p_i(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                power_sea_state({climate.hs_nodes[i], climate.tp_nodes[j]}, bundle.grid, r.p_m);
    r.p_a = average_power(climate, r.p_i, eff);
    r.p_v = power_per_volume(r.p_a, design.geometry);
    return r;
}

inline nlohmann::json power_result_to_json(const PowerResult& r) {
    return {{"format", "wavefarm-power"}, {"version", 1},  {"p_a", r.p_a},
            {"p_v", r.p_v},               {"omegas", r.omegas}, {"p_m", r.p_m}};
}

/// One row per climate node: hs, tp, p_i.
inline void write_power_csv(const PowerResult& r, const WaveClimate& climate, std::ostream& out) {
    out << "# wavefarm-power v1\n"
        << "hs,tp,p_i\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < climate.hs_nodes.size(); ++i)
        for (std::size_t j = 0; j < climate.tp_nodes.size(); ++j)
            out << climate.hs_nodes[i] << ',' << climate.tp_nodes[j] << ','
                << r.p_i(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
}

}  // namespace wavefarm
