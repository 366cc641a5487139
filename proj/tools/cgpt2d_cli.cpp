// Command-line front end: configuration file + flag plumbing around the
// forward, oracle, MSR, and inversion pipelines.  Exit codes: 0 success,
// 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cgpt/boundary_ops.hpp"
#include "cgpt/cgpt.hpp"
#include "cgpt/field.hpp"
#include "cgpt/inverse.hpp"
#include "cgpt/mesh.hpp"
#include "cgpt/msr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cgpt;

namespace {

struct RunConfig {
    std::string command;
    std::string sigma = "benchmark1";  // benchmark1..4 | constant | radial
    double sigma_a = 1.0;              // benchmark2 y^5 coefficient / radial r^2 coefficient
    double sigma_b = 1.0;              // benchmark2 x^3 coefficient
    double sigma_value = 2.0;          // constant profile value
    int level = 4;
    int base_boundary = 16;
    int order = 3;
    int operator_order = 0;  // 0 = automatic margin
    int sensors = 32;
    double sensor_radius = 3.0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string cgpt_in;    // msr-sim input
    std::string msr_in;     // msr-recover input
    std::string target_in;  // invert target CGPT JSON
    // inversion schedule and solver knobs
    std::vector<int> orders{1, 2, 3};
    std::vector<int> levels{2, 3, 4};
    std::vector<int> max_iters{400, 400, 400};
    std::string weights = "unit";      // unit | inverse-mn
    std::string functional = "s1";     // s1 | s2
    std::string stepper = "landweber"; // landweber | newton
    double t0 = 1.0;
    double shrink = 0.5;
    double slope = 1e-4;
    int max_backtracks = 40;
    double q = 0.0;
    std::string penalty = "l2";  // l2 | linf
    double delta = 0.0;
    double tau = 1.2;
    double clamp = 10.0;
    double initial_value = 1.0;
    int target_level = 0;  // end-to-end truth level; 0 = final level + 1
    int target_order = 0;  // end-to-end target order; 0 = final order
    std::string out = "out";
};

const std::set<std::string> kKnownKeys = {
    "command",      "sigma",       "sigma_a",       "sigma_b",     "sigma_value",
    "level",        "base_boundary", "order",       "operator_order", "sensors",
    "sensor_radius", "noise",      "seed",          "cgpt_in",     "msr_in",
    "target_in",    "orders",      "levels",        "max_iters",   "weights",
    "functional",   "stepper",     "t0",            "shrink",      "slope",
    "max_backtracks", "q",         "penalty",       "delta",       "tau",
    "clamp",        "initial_value", "target_level", "target_order", "out"};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void apply_json(RunConfig& c, const json& j) {
    for (const auto& [key, value] : j.items()) {
        if (!kKnownKeys.count(key)) throw ConfigError("unknown config key: " + key);
        try {
            if (key == "command") c.command = value.get<std::string>();
            else if (key == "sigma") c.sigma = value.get<std::string>();
            else if (key == "sigma_a") c.sigma_a = value.get<double>();
            else if (key == "sigma_b") c.sigma_b = value.get<double>();
            else if (key == "sigma_value") c.sigma_value = value.get<double>();
            else if (key == "level") c.level = value.get<int>();
            else if (key == "base_boundary") c.base_boundary = value.get<int>();
            else if (key == "order") c.order = value.get<int>();
            else if (key == "operator_order") c.operator_order = value.get<int>();
            else if (key == "sensors") c.sensors = value.get<int>();
            else if (key == "sensor_radius") c.sensor_radius = value.get<double>();
            else if (key == "noise") c.noise = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "cgpt_in") c.cgpt_in = value.get<std::string>();
            else if (key == "msr_in") c.msr_in = value.get<std::string>();
            else if (key == "target_in") c.target_in = value.get<std::string>();
            else if (key == "orders") c.orders = value.get<std::vector<int>>();
            else if (key == "levels") c.levels = value.get<std::vector<int>>();
            else if (key == "max_iters") c.max_iters = value.get<std::vector<int>>();
            else if (key == "weights") c.weights = value.get<std::string>();
            else if (key == "functional") c.functional = value.get<std::string>();
            else if (key == "stepper") c.stepper = value.get<std::string>();
            else if (key == "t0") c.t0 = value.get<double>();
            else if (key == "shrink") c.shrink = value.get<double>();
            else if (key == "slope") c.slope = value.get<double>();
            else if (key == "max_backtracks") c.max_backtracks = value.get<int>();
            else if (key == "q") c.q = value.get<double>();
            else if (key == "penalty") c.penalty = value.get<std::string>();
            else if (key == "delta") c.delta = value.get<double>();
            else if (key == "tau") c.tau = value.get<double>();
            else if (key == "clamp") c.clamp = value.get<double>();
            else if (key == "initial_value") c.initial_value = value.get<double>();
            else if (key == "target_level") c.target_level = value.get<int>();
            else if (key == "target_order") c.target_order = value.get<int>();
            else if (key == "out") c.out = value.get<std::string>();
        } catch (const json::exception&) {
            throw ConfigError("bad value for config key: " + key);
        }
    }
}

void validate(const RunConfig& c) {
    const std::set<std::string> commands = {"forward",     "oracle-radial", "msr-sim",
                                            "msr-recover", "invert",        "end-to-end"};
    if (!commands.count(c.command)) throw ConfigError("invalid or missing value for key: command");
    const std::set<std::string> sigmas = {"benchmark1", "benchmark2", "benchmark3",
                                          "benchmark4", "constant",   "radial"};
    if (!sigmas.count(c.sigma)) throw ConfigError("invalid value for key: sigma");
    if (c.order < 1) throw ConfigError("out-of-range value for key: order");
    if (c.level < 0) throw ConfigError("out-of-range value for key: level");
    if (c.base_boundary < 8 || c.base_boundary % 2)
        throw ConfigError("out-of-range value for key: base_boundary");
    if (c.sigma == "constant" && c.sigma_value <= 0.0)
        throw ConfigError("out-of-range value for key: sigma_value");
    if (c.command == "msr-sim" || c.command == "msr-recover" || c.command == "end-to-end") {
        if (c.sensors < 2) throw ConfigError("out-of-range value for key: sensors");
        if (c.sensor_radius <= 1.1) throw ConfigError("out-of-range value for key: sensor_radius");
        if (c.noise < 0.0) throw ConfigError("out-of-range value for key: noise");
    }
    if (c.command == "invert" || c.command == "end-to-end") {
        if (c.orders.empty() || c.orders.size() != c.levels.size() ||
            c.orders.size() != c.max_iters.size())
            throw ConfigError("out-of-range value for key: orders (schedule arrays must be "
                              "nonempty and equally sized)");
        for (size_t i = 0; i < c.orders.size(); ++i) {
            if (c.orders[i] < 1) throw ConfigError("out-of-range value for key: orders");
            if (c.levels[i] < 0) throw ConfigError("out-of-range value for key: levels");
            if (c.max_iters[i] < 0) throw ConfigError("out-of-range value for key: max_iters");
            if (i && (c.orders[i] < c.orders[i - 1] || c.levels[i] < c.levels[i - 1]))
                throw ConfigError("out-of-range value for key: orders (schedule must be "
                                  "nondecreasing)");
        }
        if (c.weights != "unit" && c.weights != "inverse-mn")
            throw ConfigError("invalid value for key: weights");
        if (c.functional != "s1" && c.functional != "s2")
            throw ConfigError("invalid value for key: functional");
        if (c.stepper != "landweber" && c.stepper != "newton")
            throw ConfigError("invalid value for key: stepper");
        if (c.penalty != "l2" && c.penalty != "linf")
            throw ConfigError("invalid value for key: penalty");
        if (c.tau <= 1.0) throw ConfigError("out-of-range value for key: tau");
        if (c.t0 <= 0.0) throw ConfigError("out-of-range value for key: t0");
        if (c.clamp <= 1.0) throw ConfigError("out-of-range value for key: clamp");
        if (c.q < 0.0) throw ConfigError("out-of-range value for key: q");
        if (c.delta < 0.0) throw ConfigError("out-of-range value for key: delta");
        if (c.initial_value <= 0.0) throw ConfigError("out-of-range value for key: initial_value");
    }
}

json to_json(const RunConfig& c) {
    return {{"command", c.command},
            {"sigma", c.sigma},
            {"sigma_a", c.sigma_a},
            {"sigma_b", c.sigma_b},
            {"sigma_value", c.sigma_value},
            {"level", c.level},
            {"base_boundary", c.base_boundary},
            {"order", c.order},
            {"operator_order", c.operator_order},
            {"sensors", c.sensors},
            {"sensor_radius", c.sensor_radius},
            {"noise", c.noise},
            {"seed", c.seed},
            {"cgpt_in", c.cgpt_in},
            {"msr_in", c.msr_in},
            {"target_in", c.target_in},
            {"orders", c.orders},
            {"levels", c.levels},
            {"max_iters", c.max_iters},
            {"weights", c.weights},
            {"functional", c.functional},
            {"stepper", c.stepper},
            {"t0", c.t0},
            {"shrink", c.shrink},
            {"slope", c.slope},
            {"max_backtracks", c.max_backtracks},
            {"q", c.q},
            {"penalty", c.penalty},
            {"delta", c.delta},
            {"tau", c.tau},
            {"clamp", c.clamp},
            {"initial_value", c.initial_value},
            {"target_level", c.target_level},
            {"target_order", c.target_order},
            {"out", c.out}};
}

DiskMesh mesh_at_level(int level, int base) {
    DiskMesh m = build_disk_mesh(base);
    for (int l = 0; l < level; ++l) m = refine_mesh(m);
    return m;
}

ConductivityField make_sigma(const RunConfig& c, const DiskMesh& mesh) {
    if (c.sigma == "constant") return constant_field(mesh, c.sigma_value);
    if (c.sigma == "radial")
        return project_fn(mesh, [&](double x, double y) {
            const double r2 = x * x + y * y;
            return 1.0 + c.sigma_a * r2;
        });
    const int kind = c.sigma.back() - '0';
    return project_sigma(AnalyticSigma{kind, c.sigma_a, c.sigma_b}, mesh);
}

std::optional<AnalyticSigma> analytic_truth(const RunConfig& c) {
    if (c.sigma == "constant" || c.sigma == "radial") return std::nullopt;
    return AnalyticSigma{c.sigma.back() - '0', c.sigma_a, c.sigma_b};
}

InversionConfig make_inversion_config(const RunConfig& c) {
    InversionConfig cfg;
    for (size_t i = 0; i < c.orders.size(); ++i)
        cfg.schedule.push_back({c.orders[i], c.levels[i], c.max_iters[i]});
    cfg.weight_scheme = c.weights == "unit" ? WeightScheme::Unit : WeightScheme::InverseMN;
    cfg.functional = c.functional == "s1" ? FunctionalKind::S1 : FunctionalKind::S2;
    cfg.stepper = c.stepper == "landweber" ? StepperKind::Landweber : StepperKind::Newton;
    cfg.t0 = c.t0;
    cfg.shrink = c.shrink;
    cfg.slope = c.slope;
    cfg.max_backtracks = c.max_backtracks;
    cfg.q = c.q;
    cfg.penalty = c.penalty == "l2" ? PenaltyNorm::L2 : PenaltyNorm::Linf;
    cfg.delta = c.delta;
    cfg.tau = c.tau;
    cfg.clamp_c = c.clamp;
    cfg.initial_value = c.initial_value;
    cfg.base_boundary = c.base_boundary;
    return cfg;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream f(path);
    f << j.dump(2) << "\n";
}

int run_invert(const RunConfig& c, const TargetData& target) {
    InversionConfig cfg = make_inversion_config(c);
    cfg.validate();
    const int max_level = std::max(c.levels.back(), c.target_level);
    MeshHierarchy meshes(c.base_boundary, max_level);

    auto [sigma, history] = recursive_reconstruct(target, cfg, meshes);

    const fs::path out(c.out);
    dump_history_csv(history, (out / "history.csv").string());
    dump_field_csv(sigma, (out / "sigma.csv").string());

    json summary;
    summary["iterations"] = history.records.empty() ? 0 : history.records.back().k;
    summary["stop_reason"] = history.stop_reason;
    if (!history.records.empty()) {
        summary["final_eps_M"] = history.records.back().eps_M;
        const double es = history.records.back().eps_sigma;
        if (std::isfinite(es)) summary["final_eps_sigma"] = es;
        summary["final_functional"] = history.records.back().functional;
    }
    summary["residual_frobenius"] =
        history.records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : std::sqrt(history.records.back().eps_M);
    summary["stages"] = history.stage_starts.size();
    write_json(summary, out / "summary.json");
    return 0;
}

int run_pipeline(const RunConfig& c) {
    const fs::path out(c.out);
    if (c.command == "forward") {
        const DiskMesh mesh = mesh_at_level(c.level, c.base_boundary);
        const CgptMatrix m =
            compute_cgpt(mesh, make_sigma(c, mesh), c.order, c.operator_order);
        save_cgpt_json(m, (out / "cgpt.json").string());
        return 0;
    }
    if (c.command == "oracle-radial") {
        std::function<double(double)> profile;
        if (c.sigma == "constant") {
            const double v = c.sigma_value;
            profile = [v](double) { return v; };
        } else if (c.sigma == "radial") {
            const double a = c.sigma_a;
            profile = [a](double r) { return 1.0 + a * r * r; };
        } else {
            throw ConfigError("invalid value for key: sigma (oracle-radial needs a radial "
                              "profile: constant or radial)");
        }
        save_cgpt_json(radial_cgpt_oracle(profile, c.order), (out / "oracle_cgpt.json").string());
        return 0;
    }
    if (c.command == "msr-sim") {
        CgptMatrix m;
        if (!c.cgpt_in.empty()) {
            m = load_cgpt_json(c.cgpt_in);
        } else {
            const DiskMesh mesh = mesh_at_level(c.level, c.base_boundary);
            m = compute_cgpt(mesh, make_sigma(c, mesh), c.order, c.operator_order);
        }
        const SensorArray array(c.sensors, c.sensor_radius);
        const MsrMatrix v = simulate_msr(m, array, std::min(c.order, m.order), c.noise, c.seed);
        dump_msr_csv(v, (out / "msr.csv").string());
        return 0;
    }
    if (c.command == "msr-recover") {
        if (c.msr_in.empty()) throw ConfigError("invalid or missing value for key: msr_in");
        const MsrMatrix v = load_msr_csv(c.msr_in);
        const SensorArray array(c.sensors, c.sensor_radius);
        if (v.values.rows() != array.count)
            throw ConfigError("out-of-range value for key: sensors (MSR size mismatch)");
        save_cgpt_json(recover_cgpt(v, array, c.order), (out / "recovered_cgpt.json").string());
        return 0;
    }
    if (c.command == "invert") {
        if (c.target_in.empty()) throw ConfigError("invalid or missing value for key: target_in");
        TargetData target;
        target.y = load_cgpt_json(c.target_in);
        target.delta = c.delta;
        target.truth = analytic_truth(c);
        return run_invert(c, target);
    }
    // end-to-end: synthesize targets on a finer mesh, optionally pass them
    // through the sensor array with noise, then run the inversion.
    RunConfig cc = c;
    if (cc.target_level == 0) cc.target_level = cc.levels.back() + 1;
    if (cc.target_order == 0) cc.target_order = cc.orders.back();
    const DiskMesh truth_mesh = mesh_at_level(cc.target_level, cc.base_boundary);
    CgptMatrix y = compute_cgpt(truth_mesh, make_sigma(cc, truth_mesh), cc.target_order,
                                cc.operator_order);
    double delta = cc.delta;
    if (cc.noise > 0.0) {
        const SensorArray array(cc.sensors, cc.sensor_radius);
        const MsrMatrix v = simulate_msr(y, array, cc.target_order, cc.noise, cc.seed);
        dump_msr_csv(v, (fs::path(cc.out) / "msr.csv").string());
        const CgptMatrix rec = recover_cgpt(v, array, cc.target_order);
        if (delta <= 0.0) delta = (rec.assemble() - y.assemble()).norm();
        y = rec;
    }
    save_cgpt_json(y, (fs::path(cc.out) / "target_cgpt.json").string());
    TargetData target;
    target.y = y;
    target.delta = delta;
    target.truth = analytic_truth(cc);
    return run_invert(cc, target);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CGPT toolkit for conductivity imaging on the unit disk"};
    app.require_subcommand(0, 1);

    RunConfig cfg;
    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file (flags override it)");

    // Flag presence is tracked so that flags win over file values.
    json flag_values = json::object();
    auto opt = [&](CLI::App* cmd, const std::string& key, const std::string& desc) {
        cmd->add_option_function<std::string>(
            "--" + key, [&flag_values, key](const std::string& v) { flag_values[key] = v; }, desc);
    };
    std::vector<std::string> scalar_keys = {
        "sigma",   "sigma_a", "sigma_b", "sigma_value", "level",          "base_boundary",
        "order",   "operator_order", "sensors", "sensor_radius", "noise", "seed",
        "cgpt_in", "msr_in",  "target_in", "weights",   "functional",     "stepper",
        "t0",      "shrink",  "slope",   "max_backtracks", "q",           "penalty",
        "delta",   "tau",     "clamp",   "initial_value", "target_level", "target_order",
        "out"};
    std::vector<std::string> list_keys = {"orders", "levels", "max_iters"};

    std::vector<CLI::App*> subs;
    for (const char* name :
         {"forward", "oracle-radial", "msr-sim", "msr-recover", "invert", "end-to-end"}) {
        CLI::App* sub = app.add_subcommand(name, "");
        for (const auto& k : scalar_keys) opt(sub, k, "");
        for (const auto& k : list_keys) opt(sub, k, "comma-separated list");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot open config file: " + config_path);
            json file_json;
            try {
                f >> file_json;
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
            }
            apply_json(cfg, file_json);
        }
        if (!app.get_subcommands().empty()) cfg.command = app.get_subcommands()[0]->get_name();

        // Coerce flag strings onto the typed config via a JSON shim.
        json flag_json = json::object();
        for (const auto& [key, value] : flag_values.items()) {
            const std::string s = value.get<std::string>();
            if (key == "orders" || key == "levels" || key == "max_iters") {
                std::vector<int> items;
                std::istringstream ss(s);
                std::string cell;
                while (std::getline(ss, cell, ',')) items.push_back(std::stoi(cell));
                flag_json[key] = items;
            } else if (key == "sigma" || key == "cgpt_in" || key == "msr_in" ||
                       key == "target_in" || key == "weights" || key == "functional" ||
                       key == "stepper" || key == "penalty" || key == "out") {
                flag_json[key] = s;
            } else if (key == "level" || key == "base_boundary" || key == "order" ||
                       key == "operator_order" || key == "sensors" || key == "max_backtracks" ||
                       key == "target_level" || key == "target_order") {
                flag_json[key] = std::stoi(s);
            } else if (key == "seed") {
                flag_json[key] = static_cast<std::uint64_t>(std::stoull(s));
            } else {
                flag_json[key] = std::stod(s);
            }
        }
        apply_json(cfg, flag_json);
        validate(cfg);

        fs::create_directories(cfg.out);
        write_json(to_json(cfg), fs::path(cfg.out) / "resolved_config.json");
        return run_pipeline(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
