// wavefarm: batch driver for data generation, surrogate training and
// validation, farm optimization and report consolidation.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wavefarm/wavefarm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wavefarm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;

constexpr const char* kOutEnv = "WAVEFARM_OUT";

// ---------------------------------------------------------------------------
// Configuration

json default_config(const std::string& preset) {
    json c = {
        {"preset", preset},
        {"seed", 1},
        {"threads", 1},
        {"environment", {{"rho", 1025.0}, {"g", 9.81}, {"depth", 50.0}}},
        {"grid", {{"omega_min", 0.1}, {"omega_max", 7.0}, {"n_w", 25}}},
        {"data",
         {{"n_s1", 60},
          {"n_s2", 200},
          {"radius_min", 0.5},
          {"radius_max", 20.0},
          {"draft_min", 0.5},
          {"draft_max", 20.0},
          {"distance_max", 1000.0},
          {"aspect_min", 0.1},
          {"aspect_max", 10.0},
          {"one_body", "hydro_one.dat"},
          {"two_body", "hydro_two.dat"}}},
        {"train",
         {{"bypass", false},
          {"method", "lm"},
          {"hidden_one_body", 32},
          {"hidden_two_body", 64},
          {"hidden_aux", 8},
          {"max_epochs", 300},
          {"patience", 50},
          {"aux_max_epochs", 300},
          {"aux_patience", 50},
          {"learning_rate", 0.01},
          {"train_fraction", 0.70},
          {"validation_fraction", 0.15},
          {"test_fraction", 0.15},
          {"clean_spikes", false},
          {"spike_threshold", 5.0},
          {"maxima", {{"radius", 20.0}, {"draft", 20.0}, {"distance", 1000.0}, {"theta", kPi}}},
          {"bundle", "bundle.json"}}},
        {"climate",
         {{"samples", "data/synthetic_waves.csv"},
          {"n_gq", 6},
          {"n_yr", 30},
          {"bandwidth_hs", 0.0},
          {"bandwidth_tp", 0.0},
          {"hs_min", 0.25},
          {"hs_max", 8.0},
          {"tp_min", 2.0},
          {"tp_max", 20.0}}},
        {"validate", {{"radius", 8.0}, {"draft", 4.0}, {"distance", 200.0}, {"theta", 0.078}}},
        {"optimize",
         {{"n_wec", 3},
          {"budget", 300},
          {"population", 0},
          {"mutation", 0.7},
          {"crossover", 0.9},
          {"penalty_scale", 1e6},
          {"max_tries", 100},
          {"efficiency", {{"pcc", 0.8}, {"oa", 0.95}, {"t", 0.98}}},
          {"bounds",
           {{"radius_min", 0.5},
            {"radius_max", 10.0},
            {"draft_min", 0.5},
            {"draft_max", 10.0},
            {"k_pto_min", -3e8},
            {"k_pto_max", 3e8},
            {"b_pto_min", 0.0},
            {"b_pto_max", 3e8},
            {"box_half_width", 0.0}}}}},
    };
    if (preset == "paper") {
        c["grid"]["n_w"] = 50;
        c["data"]["n_s1"] = 225;
        c["data"]["n_s2"] = 1000;
        c["train"]["max_epochs"] = 30000;
        c["train"]["patience"] = 10000;
        c["train"]["aux_max_epochs"] = 30000;
        c["train"]["aux_patience"] = 10000;
        c["climate"]["n_gq"] = 20;
    } else if (preset != "desk") {
        throw ConfigError("unknown preset `" + preset + "` (expected desk or paper)");
    }
    return c;
}

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

void merge_config(json& base, const json& overlay, const std::string& where) {
    if (!overlay.is_object()) throw ConfigError("config " + (where.empty() ? "root" : where) + " must be an object");
    for (const auto& [key, value] : overlay.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key `" + path + "`");
        auto& slot = base[key];
        if (slot.is_object()) {
            merge_config(slot, value, path);
        } else {
            if (!same_kind(slot, value)) throw ConfigError("config key `" + path + "` has the wrong type");
            slot = value;
        }
    }
}

void apply_set(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got `" + assignment + "`");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    // Build a nested overlay from the dotted key so merge_config validates it.
    json overlay = value;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
    merge_config(cfg, overlay, "");
}

template <class T>
T get(const json& cfg, const std::string& dotted) {
    const json* node = &cfg;
    std::stringstream ss(dotted);
    for (std::string p; std::getline(ss, p, '.');) node = &node->at(p);
    try {
        if constexpr (std::is_unsigned_v<T>) {
            if (node->is_number_float() || node->get<long long>() < 0)
                throw ConfigError("config key `" + dotted + "` must be a non-negative integer");
        }
        return node->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key `" + dotted + "` has the wrong type");
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

struct Context {
    json cfg;
    fs::path out;

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : out / path;
    }
    std::uint64_t seed() const { return get<std::uint64_t>(cfg, "seed"); }
    std::size_t threads() const { return std::max<std::size_t>(1, get<std::size_t>(cfg, "threads")); }

    Environment env() const {
        return {get<double>(cfg, "environment.rho"), get<double>(cfg, "environment.g"),
                get<double>(cfg, "environment.depth")};
    }
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string num(double x) { return json(x).dump(); }

// ---------------------------------------------------------------------------
// gen-data

int cmd_gen_data(const Context& ctx) {
    const auto& c = ctx.cfg;
    const auto grid = FrequencyGrid::evenly_spaced(get<double>(c, "grid.omega_min"), get<double>(c, "grid.omega_max"),
                                                   get<std::size_t>(c, "grid.n_w"));
    DataGenOptions o;
    o.n_s1 = get<std::size_t>(c, "data.n_s1");
    o.n_s2 = get<std::size_t>(c, "data.n_s2");
    o.radius_min = get<double>(c, "data.radius_min");
    o.radius_max = get<double>(c, "data.radius_max");
    o.draft_min = get<double>(c, "data.draft_min");
    o.draft_max = get<double>(c, "data.draft_max");
    o.distance_max = get<double>(c, "data.distance_max");
    o.aspect_min = get<double>(c, "data.aspect_min");
    o.aspect_max = get<double>(c, "data.aspect_max");
    o.seed = ctx.seed();
    HydroDataset one, two;
    try {
        std::tie(one, two) = generate_training_data(o, grid, ctx.env());
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    save_dataset(one, ctx.resolve(get<std::string>(c, "data.one_body")).string());
    save_dataset(two, ctx.resolve(get<std::string>(c, "data.two_body")).string());
    std::cout << "one-body records: " << one.records.size() << "\n"
              << "two-body records: " << two.records.size() << "\n"
              << "lhs seed: " << o.seed << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

TrainConfig train_config(const json& c, bool aux, std::uint64_t seed) {
    TrainConfig t;
    const auto method = get<std::string>(c, "train.method");
    if (method == "lm") t.method = TrainMethod::levenberg_marquardt;
    else if (method == "gd") t.method = TrainMethod::gradient_descent;
    else throw ConfigError("train.method must be `lm` or `gd`");
    t.max_epochs = get<std::size_t>(c, aux ? "train.aux_max_epochs" : "train.max_epochs");
    t.patience = get<std::size_t>(c, aux ? "train.aux_patience" : "train.patience");
    t.learning_rate = get<double>(c, "train.learning_rate");
    t.train_fraction = get<double>(c, "train.train_fraction");
    t.validation_fraction = get<double>(c, "train.validation_fraction");
    t.test_fraction = get<double>(c, "train.test_fraction");
    t.seed = seed;
    t.validate();
    return t;
}

ReferenceMaxima maxima_from(const json& c) {
    ReferenceMaxima m;
    m.radius = get<double>(c, "train.maxima.radius");
    m.draft = get<double>(c, "train.maxima.draft");
    m.distance = get<double>(c, "train.maxima.distance");
    m.theta = get<double>(c, "train.maxima.theta");
    return m;
}

int cmd_train(const Context& ctx) {
    const auto& c = ctx.cfg;
    SurrogateBundle bundle;
    if (get<bool>(c, "train.bypass")) {
        const auto grid = FrequencyGrid::evenly_spaced(get<double>(c, "grid.omega_min"),
                                                       get<double>(c, "grid.omega_max"), get<std::size_t>(c, "grid.n_w"));
        bundle = SurrogateBundle::oracle(grid, ctx.env(), maxima_from(c));
    } else {
        const auto one = load_dataset(ctx.resolve(get<std::string>(c, "data.one_body")).string());
        const auto two = load_dataset(ctx.resolve(get<std::string>(c, "data.two_body")).string());
        BundleTrainConfig bc;
        bc.hidden_one_body = get<std::size_t>(c, "train.hidden_one_body");
        bc.hidden_two_body = get<std::size_t>(c, "train.hidden_two_body");
        bc.hidden_aux = get<std::size_t>(c, "train.hidden_aux");
        bc.shape = train_config(c, false, ctx.seed());
        bc.aux = train_config(c, true, ctx.seed());
        bc.clean_spikes = get<bool>(c, "train.clean_spikes");
        bc.spike_threshold = get<double>(c, "train.spike_threshold");
        bc.maxima = maxima_from(c);
        bc.on_target = [](const TargetModel& t) {
            std::cerr << "trained " << t.name << ": test RMSE " << t.shape_test_rmse << "\n";
        };
        try {
            bundle = train_bundle(one, two, bc, ctx.env());
        } catch (const DomainError& e) {
            throw DataError(e.what());
        }
    }
    save_bundle(bundle, ctx.resolve(get<std::string>(c, "train.bundle")).string());

    json models = json::array();
    std::ostringstream csv;
    csv << "# wavefarm-train-metrics v1\n"
        << "kind,target,model,metric,value\n";
    for (const auto* group : {&bundle.one_body, &bundle.two_body}) {
        const std::string kind = group == &bundle.one_body ? "one" : "two";
        for (const auto& t : *group) {
            const std::pair<const char*, double> rows[] = {
                {"shape", t.shape_test_rmse}, {"range", t.range_rel_error}, {"offset", t.offset_rel_error}};
            for (const auto& [model, value] : rows) {
                const std::string metric = std::string(model) == "shape" ? "test_rmse" : "test_rel_error";
                models.push_back({{"kind", kind}, {"target", t.name}, {"model", model}, {"metric", metric},
                                  {"value", value}});
                csv << kind << ',' << t.name << ',' << model << ',' << metric << ',' << num(value) << '\n';
            }
        }
    }
    write_json(ctx.out / "train_metrics.json", {{"format", "wavefarm-train-metrics"},
                                                {"version", 1},
                                                {"bypass", bundle.bypass},
                                                {"model_count", bundle.model_count()},
                                                {"models", models}});
    std::ofstream(ctx.out / "train_metrics.csv", std::ios::binary) << csv.str();

    std::cout << "models: " << bundle.model_count() << (bundle.bypass ? " (oracle bypass)" : "") << "\n";
    for (const auto* group : {&bundle.one_body, &bundle.two_body})
        for (const auto& t : *group)
            std::cout << (group == &bundle.one_body ? "one " : "two ") << std::left << std::setw(6) << t.name
                      << " test RMSE " << num(t.shape_test_rmse) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

struct ErrorStats {
    double max = 0.0, sum = 0.0;
    std::size_t n = 0;
};

int cmd_validate(const Context& ctx) {
    const auto& c = ctx.cfg;
    const auto bundle = load_bundle(ctx.resolve(get<std::string>(c, "train.bundle")).string());
    const WecGeometry geom{get<double>(c, "validate.radius"), get<double>(c, "validate.draft")};
    const PairConfig pair{geom, get<double>(c, "validate.distance"), get<double>(c, "validate.theta")};
    const auto& w = bundle.grid.omegas();

    std::vector<std::string> names;
    std::vector<std::vector<double>> truth, pred;
    OneBodyProfiles s1;
    TwoBodyProfiles s2;
    try {
        s1 = normalized_one_body(bundle, geom, w);
        s2 = normalized_two_body(bundle, pair, w);
        if (pair.distance < min_spacing(geom.radius)) throw DomainError("validate: distance below 2R + s_d");
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    auto add = [&](const std::string& name) {
        names.push_back(name);
        truth.emplace_back(w.size());
        pred.emplace_back(w.size());
    };
    for (const auto& n : {"a", "b", "fe_re", "fe_im"}) add(std::string("one.") + n);
    for (const auto& n : {"a11", "a12", "b11", "b12", "fe_re", "fe_im"}) add(std::string("two.") + n);

    for (std::size_t k = 0; k < w.size(); ++k) {
        const auto o1 = single_body(geom, w[k], bundle.env);
        const auto o2 = pair_body(pair, w[k], bundle.env);
        const double sa = output_scale(Quantity::added_mass, geom, w[k], bundle.env);
        const double sb = output_scale(Quantity::damping, geom, w[k], bundle.env);
        const double sf = output_scale(Quantity::excitation, geom, w[k], bundle.env);
        // Both sides pass through the same normalized representation.
        const double sc[10] = {sa, sb, sf, sf, sa, sa, sb, sb, sf, sf};
        const double t[10] = {o1.added_mass / sa, o1.damping / sb, o1.excitation.real() / sf,
                              o1.excitation.imag() / sf, o2.a11 / sa, o2.a12 / sa, o2.b11 / sb, o2.b12 / sb,
                              o2.fe1.real() / sf, o2.fe1.imag() / sf};
        const double p[10] = {s1.a[k],   s1.b[k],   s1.fe[k].real(), s1.fe[k].imag(),   s2.a11[k],
                              s2.a12[k], s2.b11[k], s2.b12[k],       s2.fe11[k].real(), s2.fe11[k].imag()};
        for (std::size_t i = 0; i < 10; ++i) {
            truth[i][k] = t[i] * sc[i];
            pred[i][k] = p[i] * sc[i];
        }
    }

    auto write_sweep = [&](const fs::path& path, std::size_t lo, std::size_t hi) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path.string());
        out << "# wavefarm-validate v1\nomega";
        for (std::size_t i = lo; i < hi; ++i) out << ',' << names[i].substr(4) << "_oracle," << names[i].substr(4) << "_surrogate";
        out << '\n';
        for (std::size_t k = 0; k < w.size(); ++k) {
            out << num(w[k]);
            for (std::size_t i = lo; i < hi; ++i) out << ',' << num(truth[i][k]) << ',' << num(pred[i][k]);
            out << '\n';
        }
    };
    write_sweep(ctx.out / "validate_one.csv", 0, 4);
    write_sweep(ctx.out / "validate_two.csv", 4, 10);

    // Error relative to the largest oracle magnitude of each sweep.
    json summary = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) {
        double scale = 0.0;
        for (double v : truth[i]) scale = std::max(scale, std::abs(v));
        ErrorStats s;
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double e = scale > 0.0 ? std::abs(pred[i][k] - truth[i][k]) / scale
                                         : std::abs(pred[i][k] - truth[i][k]);
            s.max = std::max(s.max, e);
            s.sum += e;
            ++s.n;
        }
        summary[names[i]] = {{"max_rel_error", s.max}, {"mean_rel_error", s.sum / static_cast<double>(s.n)}};
        std::cout << std::left << std::setw(10) << names[i] << " max " << num(s.max) << " mean "
                  << num(s.sum / static_cast<double>(s.n)) << "\n";
    }
    write_json(ctx.out / "validate_summary.json",
               {{"format", "wavefarm-validate"},
                {"version", 1},
                {"bypass", bundle.bypass},
                {"query", {{"radius", geom.radius}, {"draft", geom.draft}, {"distance", pair.distance},
                           {"theta", pair.theta}}},
                {"n_w", w.size()},
                {"errors", summary}});
    return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize

WaveClimate build_climate(const Context& ctx) {
    const auto& c = ctx.cfg;
    ClimateOptions o;
    o.n_gq = get<std::size_t>(c, "climate.n_gq");
    o.n_yr = get<std::size_t>(c, "climate.n_yr");
    o.bandwidth_hs = get<double>(c, "climate.bandwidth_hs");
    o.bandwidth_tp = get<double>(c, "climate.bandwidth_tp");
    o.box = {get<double>(c, "climate.hs_min"), get<double>(c, "climate.hs_max"), get<double>(c, "climate.tp_min"),
             get<double>(c, "climate.tp_max")};
    const fs::path samples(get<std::string>(c, "climate.samples"));
    return estimate_climate(read_wave_samples(samples.string()), o);
}

int cmd_optimize(const Context& ctx) {
    const auto& c = ctx.cfg;
    const auto start = std::chrono::steady_clock::now();
    const auto bundle = load_bundle(ctx.resolve(get<std::string>(c, "train.bundle")).string());
    const auto climate = build_climate(ctx);
    write_json(ctx.out / "climate.json", climate_to_json(climate));

    const auto n_wec = get<std::size_t>(c, "optimize.n_wec");
    if (n_wec < 1) throw ConfigError("optimize.n_wec must be >= 1");
    Bounds b = Bounds::for_farm(n_wec);
    b.radius_min = get<double>(c, "optimize.bounds.radius_min");
    b.radius_max = get<double>(c, "optimize.bounds.radius_max");
    b.draft_min = get<double>(c, "optimize.bounds.draft_min");
    b.draft_max = get<double>(c, "optimize.bounds.draft_max");
    b.k_pto_min = get<double>(c, "optimize.bounds.k_pto_min");
    b.k_pto_max = get<double>(c, "optimize.bounds.k_pto_max");
    b.b_pto_min = get<double>(c, "optimize.bounds.b_pto_min");
    b.b_pto_max = get<double>(c, "optimize.bounds.b_pto_max");
    if (const double w = get<double>(c, "optimize.bounds.box_half_width"); w > 0.0) b.box_half_width = w;

    OptimizerConfig oc;
    oc.budget = get<std::size_t>(c, "optimize.budget");
    oc.population = get<std::size_t>(c, "optimize.population");
    oc.mutation = get<double>(c, "optimize.mutation");
    oc.crossover = get<double>(c, "optimize.crossover");
    oc.penalty_scale = get<double>(c, "optimize.penalty_scale");
    oc.max_tries = get<std::size_t>(c, "optimize.max_tries");
    oc.threads = ctx.threads();
    oc.seed = ctx.seed();
    const Efficiencies eff{get<double>(c, "optimize.efficiency.pcc"), get<double>(c, "optimize.efficiency.oa"),
                           get<double>(c, "optimize.efficiency.t")};

    const EvaluationContext ec(bundle, climate, eff);
    const auto res = optimize(n_wec, b, ec, oc);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto farm = res.best.farm();
    json layout = json::array();
    for (const auto& p : farm.layout) layout.push_back({p.x(), p.y()});
    std::vector<double> k(farm.pto.stiffness.data(), farm.pto.stiffness.data() + farm.pto.stiffness.size());
    std::vector<double> bp(farm.pto.damping.data(), farm.pto.damping.data() + farm.pto.damping.size());
    std::vector<double> resid(res.residuals.data(), res.residuals.data() + res.residuals.size());
    const json report = {
        {"format", "wavefarm-optimize-report"},
        {"version", 1},
        {"n_wec", n_wec},
        {"seed", oc.seed},
        {"config_hash", hex(fnv1a(c.dump()))},
        {"bypass", bundle.bypass},
        {"feasible", res.feasible},
        {"objective", res.objective},
        {"p_v", res.p_v},
        {"volume", farm.geometry.volume()},
        {"design", {{"radius", farm.geometry.radius}, {"draft", farm.geometry.draft}, {"k_pto", k}, {"b_pto", bp},
                    {"layout", layout}}},
        {"distance_residuals", resid},
        {"rho_pen", res.rho_pen},
        {"evaluations", res.evaluations},
        {"generations", res.generations},
        {"budget", oc.budget},
    };
    write_json(ctx.out / "report.json", report);
    write_json(ctx.out / "timing.json", {{"format", "wavefarm-timing"}, {"version", 1}, {"wall_time_s", wall},
                                         {"threads", oc.threads}});
    {
        std::ofstream out(ctx.out / "trace.csv", std::ios::binary);
        out << "# wavefarm-trace v1\nevaluation,objective,best_penalized,best_feasible\n";
        for (const auto& t : res.trace)
            out << t.evaluation << ',' << num(t.objective) << ',' << num(t.best_penalized) << ','
                << (std::isnan(t.best_feasible) ? std::string("nan") : num(t.best_feasible)) << '\n';
    }
    {
        std::ofstream out(ctx.out / "layout.csv", std::ios::binary);
        out << "# wavefarm-layout v1\nbody,x,y,k_pto,b_pto\n";
        for (Eigen::Index p = 0; p < farm.size(); ++p)
            out << p + 1 << ',' << num(farm.layout[p].x()) << ',' << num(farm.layout[p].y()) << ','
                << num(farm.pto.stiffness(p)) << ',' << num(farm.pto.damping(p)) << '\n';
    }
    std::cout << "N = " << n_wec << ", evaluations " << res.evaluations << ", feasible "
              << (res.feasible ? "yes" : "no") << "\n"
              << "R = " << num(farm.geometry.radius) << " m, D = " << num(farm.geometry.draft) << " m\n"
              << "p_v = " << num(res.p_v) << " W/m^3\n";
    std::cerr << "wall time " << wall << " s\n";
    if (!res.feasible) {
        std::cerr << "no feasible design found\n";
        return kExitInfeasible;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

/// Report location relative to the output directory when it lies inside it.
std::string source_name(const fs::path& report, const fs::path& out) {
    const auto rel = fs::weakly_canonical(report).lexically_relative(fs::weakly_canonical(out));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return report.generic_string();
}

int cmd_report(const Context& ctx, const std::vector<std::string>& inputs) {
    if (inputs.empty()) throw ConfigError("report: at least one report.json is required");
    struct Row {
        std::size_t n;
        double r, d, p_v;
        json runtime;
        std::uint64_t seed;
        bool feasible;
        std::string source;
    };
    std::vector<Row> rows;
    for (const auto& in : inputs) {
        fs::path path(in);
        if (fs::is_directory(path)) path /= "report.json";
        const auto j = read_json(path);
        if (j.value("format", "") != "wavefarm-optimize-report")
            throw DataError(path.string() + ": not a wavefarm optimization report");
        if (j.value("version", 0) != 1)
            throw DataError(path.string() + ": unsupported report version " + j.value("version", json()).dump());
        json runtime = nullptr;
        const auto timing = path.parent_path() / "timing.json";
        if (fs::exists(timing)) runtime = read_json(timing).value("wall_time_s", json());
        try {
            rows.push_back({j.at("n_wec").get<std::size_t>(), j.at("design").at("radius").get<double>(),
                            j.at("design").at("draft").get<double>(), j.at("p_v").get<double>(), runtime,
                            j.at("seed").get<std::uint64_t>(), j.at("feasible").get<bool>(),
                            source_name(path, ctx.out)});
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.n < b.n; });
    json table = json::array(), timing = json::array();
    std::ofstream csv(ctx.out / "summary.csv", std::ios::binary);
    std::ofstream tcsv(ctx.out / "timing_summary.csv", std::ios::binary);
    csv << "# wavefarm-summary v1\nrow,n_wec,radius,draft,p_v,seed,feasible,source\n";
    tcsv << "# wavefarm-timing-summary v1\nrow,n_wec,runtime_s\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        table.push_back({{"row", i}, {"n_wec", r.n}, {"radius", r.r}, {"draft", r.d}, {"p_v", r.p_v},
                         {"seed", r.seed}, {"feasible", r.feasible}, {"source", r.source}});
        timing.push_back({{"row", i}, {"n_wec", r.n}, {"runtime_s", r.runtime}});
        csv << i << ',' << r.n << ',' << num(r.r) << ',' << num(r.d) << ',' << num(r.p_v) << ',' << r.seed << ','
            << (r.feasible ? 1 : 0) << ',' << r.source << '\n';
        tcsv << i << ',' << r.n << ',' << (r.runtime.is_number() ? num(r.runtime.get<double>()) : std::string(""))
             << '\n';
    }
    write_json(ctx.out / "summary.json", {{"format", "wavefarm-summary"}, {"version", 1}, {"rows", table}});
    write_json(ctx.out / "timing_summary.json",
               {{"format", "wavefarm-timing-summary"}, {"version", 1}, {"rows", timing}});
    std::cout << "rows: " << rows.size() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wavefarm: surrogate-assisted wave energy farm design"};
    app.require_subcommand(1);
    std::string config_path, preset = "desk", out_dir;
    std::vector<std::string> sets, report_inputs;
    std::int64_t seed = -1, threads = -1;
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--preset", preset, "Parameter preset")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--seed", seed, "Random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, std::string("Output directory (default $") + kOutEnv + " or ./wavefarm_out)");
    app.add_option("--set", sets, "Override a config value, e.g. --set optimize.n_wec=5");

    auto* gen = app.add_subcommand("gen-data", "Generate one- and two-body oracle training datasets")->fallthrough();
    auto* train = app.add_subcommand("train", "Train the surrogate bundle")->fallthrough();
    auto* validate = app.add_subcommand("validate", "Compare surrogate and oracle frequency sweeps")->fallthrough();
    auto* opt = app.add_subcommand("optimize", "Optimize plant, control and layout")->fallthrough();
    auto* report = app.add_subcommand("report", "Merge optimization reports")->fallthrough();
    report->add_option("reports", report_inputs, "report.json files or run directories")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        Context ctx;
        ctx.cfg = default_config(preset);
        if (!config_path.empty()) {
            json file;
            try {
                std::ifstream in(config_path);
                file = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError(config_path + ": " + e.what());
            }
            if (file.contains("preset")) {
                const auto p = file["preset"].get<std::string>();
                if (app.count("--preset") == 0) ctx.cfg = default_config(p);
            }
            merge_config(ctx.cfg, file, "");
        }
        for (const auto& s : sets) apply_set(ctx.cfg, s);
        if (seed >= 0) ctx.cfg["seed"] = seed;
        if (threads > 0) ctx.cfg["threads"] = threads;

        if (out_dir.empty()) {
            const char* env = std::getenv(kOutEnv);
            out_dir = env && *env ? env : "wavefarm_out";
        }
        ctx.out = out_dir;
        std::error_code ec;
        fs::create_directories(ctx.out, ec);
        if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());

        if (gen->parsed()) return cmd_gen_data(ctx);
        if (train->parsed()) return cmd_train(ctx);
        if (validate->parsed()) return cmd_validate(ctx);
        if (opt->parsed()) return cmd_optimize(ctx);
        if (report->parsed()) return cmd_report(ctx, report_inputs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
