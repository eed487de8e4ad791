#pragma once

// Analytical point-absorber coefficients standing in for a BEM solver, the
// training-set designs built on top of them, and the interchange formats
// used to persist or import per-frequency coefficient tables.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/rng.hpp"
#include "wavefarm/special_functions.hpp"
#include "wavefarm/wave_climate.hpp"

namespace wavefarm {

using cplx = std::complex<double>;

struct WecGeometry {
    double radius;  // m
    double draft;   // m

    double volume() const { return kPi * radius * radius * draft; }
    double waterplane_area() const { return kPi * radius * radius; }
};

/// Two identical bodies; body 2 sits at distance d and angle theta from body 1.
struct PairConfig {
    WecGeometry geometry;
    double distance;  // m
    double theta;     // rad, folded into [0, pi]
};

struct SingleBodyCoefficients {
    double added_mass;  // kg
    double damping;     // kg/s
    cplx excitation;    // N per metre of wave amplitude
};

struct PairCoefficients {
    double a11, a12;  // kg
    double b11, b12;  // kg/s
    cplx fe1;         // N/m, body 1 at the origin
};

// ---------------------------------------------------------------------------
// Oracle

/// Single heaving cylinder at the origin.
inline SingleBodyCoefficients single_body(const WecGeometry& geom, double omega, const Environment& env = {}) {
    const double k = solve_dispersion(omega, env.depth, env.g);
    const double fe = env.rho * env.g * geom.waterplane_area() * std::exp(-k * geom.draft);
    const double b = std::pow(omega, 3) * fe * fe / (2.0 * env.rho * std::pow(env.g, 3));
    const double a = env.rho * geom.volume() * (0.35 + 0.5 * std::exp(-k * geom.radius));
    return {a, b, cplx(fe, 0.0)};
}

/// Pairwise coefficients for body 1 of a two-body cluster.
inline PairCoefficients pair_body(const PairConfig& pair, double omega, const Environment& env = {}) {
    const double r = pair.geometry.radius;
    const double d = pair.distance;
    if (!(d >= min_spacing(r) * (1.0 - 1e-12)))
        throw DomainError("pair_body: distance " + std::to_string(d) + " m is below 2R + s_d = " +
                          std::to_string(min_spacing(r)) + " m");
    if (!(pair.theta >= 0.0 && pair.theta <= kPi)) throw DomainError("pair_body: theta must lie in [0, pi]");

    const auto single = single_body(pair.geometry, omega, env);
    const double k = solve_dispersion(omega, env.depth, env.g);
    const double kd = k * d;
    const double j0 = bessel_j0(kd);
    const double y0 = bessel_y0(kd);
    const double self = 1.0 + 0.1 * j0 * std::exp(-d / (50.0 * r));

    PairCoefficients out;
    out.a11 = single.added_mass * self;
    out.b11 = single.damping * self;
    out.b12 = single.damping * j0;
    out.a12 = -(single.damping / omega) * y0;
    const cplx scatter = 0.15 * std::exp(cplx(0.0, kd)) / std::sqrt(std::max(kd, 1.0)) * std::cos(pair.theta);
    out.fe1 = single.excitation * (1.0 + scatter);
    return out;
}

/// Distance and folded angle of body q as seen from body p. The angle is taken
/// from the wave direction (+x) in [0, 2 pi) and reflected into [0, pi].
struct RelativePlacement {
    double distance;
    double theta;
};

inline RelativePlacement relative_placement(const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
    const Eigen::Vector2d dq = q - p;
    double theta = std::atan2(dq.y(), dq.x());
    if (theta < 0.0) theta += kTwoPi;
    if (theta > kPi) theta = kTwoPi - theta;
    return {dq.norm(), std::clamp(theta, 0.0, kPi)};
}

/// Farm coefficients built directly from the oracle's one- and two-body
/// solutions (pairwise many-body truncation), independent of any surrogate.
struct DirectFarmCoefficients {
    Eigen::MatrixXd added_mass;
    Eigen::MatrixXd damping;
    Eigen::VectorXcd excitation;
};

inline DirectFarmCoefficients oracle_farm(const WecGeometry& geom, const std::vector<Eigen::Vector2d>& positions,
                                          double omega, const Environment& env = {}) {
    const auto n = static_cast<Eigen::Index>(positions.size());
    const auto single = single_body(geom, omega, env);
    const double k = solve_dispersion(omega, env.depth, env.g);
    DirectFarmCoefficients out;
    out.added_mass = Eigen::MatrixXd::Constant(n, n, 0.0);
    out.damping = Eigen::MatrixXd::Constant(n, n, 0.0);
    out.excitation = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index p = 0; p < n; ++p) {
        out.added_mass(p, p) = single.added_mass;
        out.damping(p, p) = single.damping;
        cplx fe = single.excitation;
        for (Eigen::Index q = 0; q < n; ++q) {
            if (q == p) continue;
            const auto rel = relative_placement(positions[p], positions[q]);
            const auto pc = pair_body({geom, rel.distance, rel.theta}, omega, env);
            out.added_mass(p, p) += pc.a11 - single.added_mass;
            out.damping(p, p) += pc.b11 - single.damping;
            out.added_mass(p, q) = pc.a12;
            out.damping(p, q) = pc.b12;
            fe += pc.fe1 - single.excitation;
        }
        out.excitation(p) = fe * std::exp(cplx(0.0, -k * positions[p].x()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

enum class BodyKind { one, two };

inline const std::vector<std::string>& target_names(BodyKind kind) {
    static const std::vector<std::string> one{"a", "b", "fe_re", "fe_im"};
    static const std::vector<std::string> two{"a11", "a12", "b11", "b12", "fe_re", "fe_im"};
    return kind == BodyKind::one ? one : two;
}

inline std::size_t input_count(BodyKind kind) { return kind == BodyKind::one ? 2 : 4; }

/// One sampled design: its non-frequency inputs and per-target frequency profiles.
struct HydroRecord {
    double radius = 0.0;
    double draft = 0.0;
    double distance = 0.0;  // two-body only
    double theta = 0.0;     // two-body only
    std::vector<std::vector<double>> values;  // [target][omega]

    bool operator==(const HydroRecord&) const = default;
};

struct HydroDataset {
    BodyKind kind = BodyKind::one;
    FrequencyGrid grid;
    double depth = 50.0;
    std::vector<HydroRecord> records;

    bool operator==(const HydroDataset&) const = default;
};

inline HydroRecord oracle_record(BodyKind kind, const WecGeometry& geom, double distance, double theta,
                                 const FrequencyGrid& grid, const Environment& env) {
    HydroRecord rec;
    rec.radius = geom.radius;
    rec.draft = geom.draft;
    rec.values.assign(target_names(kind).size(), std::vector<double>(grid.size()));
    if (kind == BodyKind::one) {
        for (std::size_t w = 0; w < grid.size(); ++w) {
            const auto c = single_body(geom, grid[w], env);
            rec.values[0][w] = c.added_mass;
            rec.values[1][w] = c.damping;
            rec.values[2][w] = c.excitation.real();
            rec.values[3][w] = c.excitation.imag();
        }
    } else {
        rec.distance = distance;
        rec.theta = theta;
        for (std::size_t w = 0; w < grid.size(); ++w) {
            const auto c = pair_body({geom, distance, theta}, grid[w], env);
            rec.values[0][w] = c.a11;
            rec.values[1][w] = c.a12;
            rec.values[2][w] = c.b11;
            rec.values[3][w] = c.b12;
            rec.values[4][w] = c.fe1.real();
            rec.values[5][w] = c.fe1.imag();
        }
    }
    return rec;
}

/// Sampling ranges for the training designs.
struct DataGenOptions {
    double radius_min = 0.5, radius_max = 20.0;
    double draft_min = 0.5, draft_max = 20.0;
    double distance_max = 1000.0;
    double aspect_min = 0.1, aspect_max = 10.0;  // D / R
    std::size_t n_s1 = 225;
    std::size_t n_s2 = 1000;
    std::uint64_t seed = 1;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> near_square_factors(std::size_t n) {
    std::size_t a = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
    while (a > 1 && n % a != 0) --a;
    return {a, n / a};
}

inline bool aspect_ok(const DataGenOptions& o, double r, double d) {
    const double ratio = d / r;
    return ratio >= o.aspect_min && ratio <= o.aspect_max;
}

}  // namespace detail

/// Latin-hypercube design of n points in [0, 1)^dims.
inline std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dims, Rng& rng) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(dims));
    for (std::size_t d = 0; d < dims; ++d) {
        const auto perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i)
            pts[i][d] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    }
    return pts;
}

/// Uniform (R, D) grid for the single body; LHS over (R, D, log d, theta) for pairs.
inline std::pair<HydroDataset, HydroDataset> generate_training_data(const DataGenOptions& opt,
                                                                    const FrequencyGrid& grid,
                                                                    const Environment& env = {}) {
    if (opt.n_s1 == 0 || opt.n_s2 == 0) throw DomainError("generate_training_data: sample counts must be >= 1");
    if (!(opt.radius_max >= opt.radius_min && opt.radius_min > 0.0) ||
        !(opt.draft_max >= opt.draft_min && opt.draft_min > 0.0) || !(opt.aspect_max >= opt.aspect_min))
        throw DomainError("generate_training_data: invalid sampling ranges");

    HydroDataset one{BodyKind::one, grid, env.depth, {}};
    HydroDataset two{BodyKind::two, grid, env.depth, {}};

    const auto [n_r, n_d] = detail::near_square_factors(opt.n_s1);
    for (std::size_t i = 0; i < n_r; ++i) {
        const double r = n_r == 1 ? 0.5 * (opt.radius_min + opt.radius_max)
                                  : opt.radius_min + (opt.radius_max - opt.radius_min) * i / (n_r - 1.0);
        const double lo = std::max(opt.draft_min, opt.aspect_min * r);
        const double hi = std::min(opt.draft_max, opt.aspect_max * r);
        if (lo > hi)
            throw DomainError("generate_training_data: no admissible draft for radius " + std::to_string(r));
        for (std::size_t j = 0; j < n_d; ++j) {
            const double d = n_d == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * j / (n_d - 1.0);
            one.records.push_back(oracle_record(BodyKind::one, {r, d}, 0.0, 0.0, grid, env));
        }
    }

    std::size_t batch = 0;
    while (two.records.size() < opt.n_s2) {
        if (batch > 1000) throw DomainError("generate_training_data: two-body ranges admit too few designs");
        Rng rng = Rng::stream(opt.seed, batch++);
        const std::size_t need = opt.n_s2 - two.records.size();
        for (const auto& u : latin_hypercube(need, 4, rng)) {
            const double r = opt.radius_min + u[0] * (opt.radius_max - opt.radius_min);
            const double d = opt.draft_min + u[1] * (opt.draft_max - opt.draft_min);
            const double dmin = min_spacing(r);
            if (!detail::aspect_ok(opt, r, d) || !(dmin < opt.distance_max)) continue;
            const double dist = std::exp(std::log(dmin) + u[2] * (std::log(opt.distance_max) - std::log(dmin)));
            const double theta = u[3] * kPi;
            two.records.push_back(oracle_record(BodyKind::two, {r, d}, dist, theta, grid, env));
        }
    }
    return {std::move(one), std::move(two)};
}

// ---------------------------------------------------------------------------
// Interchange files

namespace detail {

inline std::string fmt_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::vector<double> parse_numbers(const std::string& line, bool& ok) {
    std::vector<double> v;
    const char* p = line.data();
    const char* end = p + line.size();
    ok = true;
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
        if (p >= end) break;
        double x;
        auto res = std::from_chars(p, end, x);
        if (res.ec != std::errc()) {
            ok = false;
            return v;
        }
        v.push_back(x);
        p = res.ptr;
    }
    return v;
}

inline std::map<std::string, std::string> parse_key_values(const std::string& line) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos && eq > 0) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline const char* kind_name(BodyKind k) { return k == BodyKind::one ? "one" : "two"; }

}  // namespace detail

inline void save_dataset(const HydroDataset& ds, std::ostream& out) {
    out << "# wavefarm-hydro v1 kind=" << detail::kind_name(ds.kind) << " h=" << detail::fmt_double(ds.depth)
        << " n_w=" << ds.grid.size() << "\n";
    out << (ds.kind == BodyKind::one ? "# R D omega" : "# R D d theta omega");
    for (const auto& name : target_names(ds.kind)) out << ' ' << name;
    out << "\n";
    for (const auto& rec : ds.records) {
        for (std::size_t w = 0; w < ds.grid.size(); ++w) {
            out << detail::fmt_double(rec.radius) << ' ' << detail::fmt_double(rec.draft);
            if (ds.kind == BodyKind::two)
                out << ' ' << detail::fmt_double(rec.distance) << ' ' << detail::fmt_double(rec.theta);
            out << ' ' << detail::fmt_double(ds.grid[w]);
            for (const auto& target : rec.values) out << ' ' << detail::fmt_double(target[w]);
            out << "\n";
        }
    }
}

inline void save_dataset(const HydroDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset: " + path);
    save_dataset(ds, out);
    if (!out) throw DataError("write failed: " + path);
}

inline HydroDataset load_dataset(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ":1: empty file, expected wavefarm-hydro header");
    if (line.rfind("# wavefarm-hydro v1", 0) != 0)
        throw DataError(source + ":1: missing `# wavefarm-hydro v1` header");
    auto kv = detail::parse_key_values(line);
    HydroDataset ds;
    if (kv["kind"] == "one") ds.kind = BodyKind::one;
    else if (kv["kind"] == "two") ds.kind = BodyKind::two;
    else throw DataError(source + ":1: kind must be `one` or `two`");
    std::size_t n_w = 0;
    try {
        ds.depth = std::stod(kv.at("h"));
        n_w = std::stoul(kv.at("n_w"));
    } catch (const std::exception&) {
        throw DataError(source + ":1: header must declare h=<m> and n_w=<int>");
    }
    if (n_w == 0) throw DataError(source + ":1: n_w must be positive");

    const std::size_t n_in = input_count(ds.kind);
    const std::size_t n_out = target_names(ds.kind).size();
    const std::size_t n_cols = n_in + 1 + n_out;

    std::vector<double> omegas;
    HydroRecord rec;
    std::size_t row_in_rec = 0;
    std::size_t lineno = 1;
    std::size_t rec_start_line = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        bool ok;
        const auto v = detail::parse_numbers(line, ok);
        if (!ok) throw DataError(source + ":" + std::to_string(lineno) + ": non-numeric field");
        if (v.empty()) continue;
        if (v.size() != n_cols)
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(n_cols) +
                            " columns for kind=" + detail::kind_name(ds.kind) + ", found " +
                            std::to_string(v.size()) + " (schema mismatch)");
        for (double x : v)
            if (!std::isfinite(x)) throw DataError(source + ":" + std::to_string(lineno) + ": non-finite value");
        if (row_in_rec == 0) {
            rec = HydroRecord{};
            rec.radius = v[0];
            rec.draft = v[1];
            if (ds.kind == BodyKind::two) {
                rec.distance = v[2];
                rec.theta = v[3];
            }
            rec.values.assign(n_out, std::vector<double>(n_w));
            rec_start_line = lineno;
        } else {
            const bool same = v[0] == rec.radius && v[1] == rec.draft &&
                              (ds.kind == BodyKind::one || (v[2] == rec.distance && v[3] == rec.theta));
            if (!same)
                throw DataError(source + ":" + std::to_string(lineno) + ": record starting at line " +
                                std::to_string(rec_start_line) + " ended after " + std::to_string(row_in_rec) +
                                " of " + std::to_string(n_w) + " frequencies");
        }
        const double omega = v[n_in];
        if (ds.records.empty()) {
            omegas.push_back(omega);
        } else if (omega != omegas[row_in_rec]) {
            throw DataError(source + ":" + std::to_string(lineno) + ": frequency " + detail::fmt_double(omega) +
                            " inconsistent with the grid of the first record");
        }
        for (std::size_t t = 0; t < n_out; ++t) rec.values[t][row_in_rec] = v[n_in + 1 + t];
        if (++row_in_rec == n_w) {
            ds.records.push_back(std::move(rec));
            row_in_rec = 0;
        }
    }
    if (row_in_rec != 0)
        throw DataError(source + ":" + std::to_string(lineno) + ": truncated record starting at line " +
                        std::to_string(rec_start_line) + " (" + std::to_string(row_in_rec) + " of " +
                        std::to_string(n_w) + " frequencies)");
    if (ds.records.empty()) throw DataError(source + ": dataset has no records");
    try {
        ds.grid = FrequencyGrid(omegas);
    } catch (const DomainError& e) {
        throw DataError(source + ": invalid frequency grid: " + e.what());
    }
    return ds;
}

inline HydroDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    return load_dataset(in, path);
}

/// Writes one BEM-style table per record: key=value comment header, then
/// `omega <targets...>` rows. import_bem_tables reads this layout back.
inline void write_bem_tables(const HydroDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        char name[32];
        std::snprintf(name, sizeof name, "record_%05zu.dat", r);
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        const auto& rec = ds.records[r];
        out << "# wavefarm-bem kind=" << detail::kind_name(ds.kind) << " h=" << detail::fmt_double(ds.depth)
            << " R=" << detail::fmt_double(rec.radius) << " D=" << detail::fmt_double(rec.draft);
        if (ds.kind == BodyKind::two)
            out << " d=" << detail::fmt_double(rec.distance) << " theta=" << detail::fmt_double(rec.theta);
        out << "\n# omega";
        for (const auto& name_t : target_names(ds.kind)) out << ' ' << name_t;
        out << "\n";
        for (std::size_t w = 0; w < ds.grid.size(); ++w) {
            out << detail::fmt_double(ds.grid[w]);
            for (const auto& t : rec.values) out << ' ' << detail::fmt_double(t[w]);
            out << "\n";
        }
    }
}

/// Reads a directory of per-record coefficient tables (files sorted by name).
/// Lines starting with '#' or a letter (Tecplot TITLE/VARIABLES/ZONE headers)
/// are comments; `key=value` tokens in them supply R, D, d, theta and h.
inline HydroDataset import_bem_tables(const std::filesystem::path& dir, double default_depth = 50.0) {
    if (!std::filesystem::is_directory(dir)) throw DataError("BEM table directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("BEM table directory is empty: " + dir.string());

    HydroDataset ds;
    ds.depth = default_depth;
    bool kind_known = false;
    std::vector<double> grid;
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::map<std::string, std::string> kv;
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            if (line[first] == '#' || std::isalpha(static_cast<unsigned char>(line[first]))) {
                for (auto& [k, v] : detail::parse_key_values(line)) kv[k] = v;
                continue;
            }
            bool ok;
            auto v = detail::parse_numbers(line, ok);
            if (!ok) throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field");
            rows.push_back(std::move(v));
        }
        if (rows.empty()) throw DataError(path.string() + ": no coefficient rows (empty dataset)");

        const std::size_t cols = rows.front().size();
        BodyKind kind;
        if (cols == 5) kind = BodyKind::one;
        else if (cols == 7) kind = BodyKind::two;
        else
            throw DataError(path.string() + ": expected 5 columns (omega a b fe_re fe_im) or 7 columns "
                            "(omega a11 a12 b11 b12 fe_re fe_im), found " + std::to_string(cols));
        if (!kind_known) {
            ds.kind = kind;
            kind_known = true;
        } else if (kind != ds.kind) {
            throw DataError(path.string() + ": mixes one-body and two-body tables");
        }

        auto need = [&](const char* key) {
            auto it = kv.find(key);
            if (it == kv.end())
                throw DataError(path.string() + ": header must provide " + key + "=<value>");
            return std::stod(it->second);
        };
        HydroRecord rec;
        rec.radius = need("R");
        rec.draft = need("D");
        if (kind == BodyKind::two) {
            rec.distance = need("d");
            rec.theta = need("theta");
        }
        if (kv.count("h")) ds.depth = std::stod(kv["h"]);
        const std::size_t n_out = cols - 1;
        rec.values.assign(n_out, std::vector<double>(rows.size()));
        std::vector<double> omegas(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != cols)
                throw DataError(path.string() + ": ragged row " + std::to_string(i + 1) + " (expected " +
                                std::to_string(cols) + " columns)");
            omegas[i] = rows[i][0];
            if (i > 0 && !(omegas[i] > omegas[i - 1]))
                throw DataError(path.string() + ": omega column is not strictly increasing at row " +
                                std::to_string(i + 1));
            for (std::size_t t = 0; t < n_out; ++t) rec.values[t][i] = rows[i][t + 1];
        }
        if (grid.empty()) grid = omegas;
        else if (grid != omegas) throw DataError(path.string() + ": frequency grid differs from earlier tables");
        ds.records.push_back(std::move(rec));
    }
    ds.grid = FrequencyGrid(grid);
    return ds;
}

}  // namespace wavefarm
