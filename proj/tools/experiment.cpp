#include "experiment.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <set>

#include "greenfarm/errors.hpp"

namespace greenfarm::cli {

namespace {

using nlohmann::json;

// Reads one JSON object, tracking the dotted path for error messages and
// rejecting keys nobody asked for.
class Section {
public:
    Section(const json& node, std::string path, std::initializer_list<const char*> allowed)
        : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& item : node_.items()) {
            if (!ok.count(item.key())) throw ConfigError("unknown key '" + join(item.key()) + "'");
        }
    }

    [[nodiscard]] bool has(const char* key) const { return node_.contains(key); }

    [[nodiscard]] const json& at(const char* key) const {
        if (!node_.contains(key)) throw ConfigError("missing key '" + join(key) + "'");
        return node_.at(key);
    }

    [[nodiscard]] std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    double number(const char* key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    double number(const char* key) const {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(join(key) + ": expected a number");
        return v.get<double>();
    }

    int integer(const char* key, int fallback) const { return has(key) ? integer(key) : fallback; }
    int integer(const char* key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError(join(key) + ": expected an integer");
        return v.get<int>();
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_number_unsigned()) throw ConfigError(join(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string string(const char* key) const {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(join(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const char* key) const {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError(join(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(join(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

private:
    const json& node_;
    std::string path_;
};

std::string type_of(const json& node, const std::string& path) {
    if (!node.is_object() || !node.contains("type") || !node.at("type").is_string()) {
        throw ConfigError(path + ": expected an object with a string 'type'");
    }
    return node.at("type").get<std::string>();
}

[[noreturn]] void bad_type(const std::string& path, const std::string& type) {
    throw ConfigError(path + ".type: unknown type '" + type + "'");
}

PolicySpec parse_policy(const json& node, const std::string& path) {
    const std::string type = type_of(node, path);
    if (type == "static") {
        Section s(node, path, {"type", "n"});
        return StaticPolicy{s.integer("n")};
    }
    if (type == "adaptive") {
        Section s(node, path, {"type", "epsilon", "granularity"});
        AdaptivePolicy p;
        p.options.epsilon = s.number("epsilon", 0.0);
        p.options.granularity = s.integer("granularity", 1);
        return p;
    }
    bad_type(path, type);
}

ArrivalSpec parse_arrivals(const json& node, const std::string& path, const std::filesystem::path& base) {
    const std::string type = type_of(node, path);
    if (type == "poisson") {
        Section s(node, path, {"type", "rate"});
        return PoissonArrivals{s.number("rate")};
    }
    if (type == "lognormal") {
        Section s(node, path, {"type", "mean_interval", "rate", "scv"});
        if (s.has("mean_interval") == s.has("rate")) {
            throw ConfigError(path + ": give exactly one of 'mean_interval' and 'rate'");
        }
        const double mean = s.has("rate") ? 1.0 / s.number("rate") : s.number("mean_interval");
        return LogNormalRenewal{mean, s.number("scv")};
    }
    if (type == "trace") {
        Section s(node, path, {"type", "path", "scale"});
        std::filesystem::path file = s.string("path");
        if (file.is_relative() && !base.empty()) file = base / file;
        const double scale = s.number("scale", 1.0);
        if (!(scale > 0.0)) throw ConfigError(path + ".scale: must be > 0");
        auto trace = std::make_shared<const RateTrace>(load_trace(file, scale));
        return TraceArrivals{std::move(trace), file.string(), scale};
    }
    bad_type(path, type);
}

PatienceSpec parse_patience(const json& node, const std::string& path) {
    const std::string type = type_of(node, path);
    if (type == "exponential") {
        Section s(node, path, {"type", "theta", "mean"});
        if (s.has("theta") == s.has("mean")) throw ConfigError(path + ": give exactly one of 'theta' and 'mean'");
        return ExponentialPatience{s.has("theta") ? s.number("theta") : 1.0 / s.number("mean")};
    }
    if (type == "lognormal") {
        Section s(node, path, {"type", "mean", "scv"});
        return LogNormalPatience{s.number("mean"), s.number("scv")};
    }
    if (type == "infinite") {
        Section s(node, path, {"type"});
        return InfinitePatience{};
    }
    bad_type(path, type);
}

ForecasterSpec parse_forecaster(const json& node, const std::string& path) {
    const std::string type = type_of(node, path);
    if (type == "oracle") {
        Section s(node, path, {"type"});
        return OracleForecaster{};
    }
    if (type == "oracle_laplace") {
        Section s(node, path, {"type", "error"});
        return OracleWithLaplaceError{s.number("error")};
    }
    if (type == "last_window") {
        Section s(node, path, {"type"});
        return LastWindowForecaster{};
    }
    bad_type(path, type);
}

WorkloadSpec parse_workload(const json& node, const std::filesystem::path& base) {
    Section s(node, "workload", {"arrivals", "service", "patience", "forecaster"});
    WorkloadSpec w;
    if (s.has("arrivals")) w.arrivals = parse_arrivals(s.at("arrivals"), "workload.arrivals", base);
    if (s.has("service")) {
        const json& svc = s.at("service");
        const std::string type = type_of(svc, "workload.service");
        if (type != "exponential") bad_type("workload.service", type);
        Section e(svc, "workload.service", {"type", "mu"});
        w.service.mu = e.number("mu");
    }
    if (s.has("patience")) w.patience = parse_patience(s.at("patience"), "workload.patience");
    if (s.has("forecaster")) w.forecaster = parse_forecaster(s.at("forecaster"), "workload.forecaster");
    return w;
}

EconomicModel parse_economics(const json& node) {
    Section s(node, "economics",
              {"income_per_job", "tariff_per_kwh", "cost_multiplier", "idle_watts", "busy_watts",
               "switching_watts", "pue", "occupancy"});
    EconomicModel e;
    e.income_per_job = s.number("income_per_job", e.income_per_job);
    e.tariff_per_kwh = s.number("tariff_per_kwh", e.tariff_per_kwh);
    e.cost_multiplier = s.number("cost_multiplier", e.cost_multiplier);
    const double idle = s.number("idle_watts", e.power.idle_watts);
    const double busy = s.number("busy_watts", e.power.busy_watts);
    const double switching = s.number("switching_watts", busy);
    const double pue = s.number("pue", 1.0);
    try {
        e.power = PowerProfile::from_hardware(idle, busy, pue, switching);
    } catch (const DomainError& err) {
        throw ConfigError(std::string("economics: ") + err.what());
    }
    if (s.has("occupancy")) {
        const std::string mode = s.string("occupancy");
        if (mode == "fractional") {
            e.occupancy_mode = OccupancyMode::Fractional;
        } else if (mode == "ceiling") {
            e.occupancy_mode = OccupancyMode::Ceiling;
        } else {
            throw ConfigError("economics.occupancy: expected 'fractional' or 'ceiling'");
        }
    }
    return e;
}

ReconfigCost parse_reconfig(const json& node) {
    Section s(node, "reconfig", {"boot_s", "component_costs", "window_s"});
    ReconfigCost r;
    r.boot_seconds = s.number("boot_s", r.boot_seconds);
    if (s.has("component_costs")) r.component_costs = s.numbers("component_costs");
    r.window_seconds = s.number("window_s", r.window_seconds);
    return r;
}

}  // namespace

std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : source.dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

SystemParams ExperimentConfig::analytic_load(int n) const {
    return {sim.workload.mean_arrival_rate(0.0, sim.duration), sim.workload.service.mu,
            sim.workload.abandonment_rate(), n};
}

std::string hash_hex(std::uint64_t hash) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

ExperimentConfig parse_experiment(const json& doc, const std::filesystem::path& base_dir) {
    Section root(doc, "",
                 {"capacity", "initial_n", "duration_s", "warmup_s", "sample_interval_s", "seed", "policy",
                  "workload", "economics", "reconfig", "optimize", "analyze", "sweep", "sensitivity"});
    ExperimentConfig cfg;
    cfg.source = doc;
    SimConfig& sim = cfg.sim;
    sim.capacity = root.integer("capacity", sim.capacity);
    sim.initial_n = root.integer("initial_n", sim.initial_n);
    sim.duration = root.number("duration_s", sim.duration);
    sim.warmup = root.number("warmup_s", sim.warmup);
    sim.sample_interval = root.number("sample_interval_s", sim.sample_interval);
    sim.seed = root.unsigned_integer("seed", sim.seed);
    if (root.has("policy")) sim.policy = parse_policy(root.at("policy"), "policy");
    if (root.has("workload")) sim.workload = parse_workload(root.at("workload"), base_dir);
    if (root.has("economics")) sim.econ = parse_economics(root.at("economics"));
    if (root.has("reconfig")) sim.reconfig = parse_reconfig(root.at("reconfig"));

    if (root.has("optimize")) {
        Section s(root.at("optimize"), "optimize", {"n_current"});
        cfg.n_current = s.integer("n_current", 0);
    }
    if (root.has("analyze")) {
        Section s(root.at("analyze"), "analyze", {"n_min", "n_max"});
        cfg.analyze.n_min = s.integer("n_min", 0);
        if (s.has("n_max")) cfg.analyze.n_max = s.integer("n_max");
    }
    if (root.has("sweep")) {
        Section s(root.at("sweep"), "sweep", {"lambda", "policies"});
        cfg.sweep.lambdas = s.numbers("lambda");
        if (s.has("policies")) {
            const json& list = s.at("policies");
            if (!list.is_array()) throw ConfigError("sweep.policies: expected an array");
            for (std::size_t i = 0; i < list.size(); ++i) {
                cfg.sweep.policies.push_back(parse_policy(list[i], "sweep.policies[" + std::to_string(i) + "]"));
            }
        }
    }
    if (root.has("sensitivity")) {
        Section s(root.at("sensitivity"), "sensitivity", {"errors"});
        if (s.has("errors")) cfg.sensitivity.errors = s.numbers("errors");
    }

    sim.validate();
    const int n_max = cfg.analyze.n_max.value_or(sim.capacity);
    if (cfg.analyze.n_min < 0 || n_max < cfg.analyze.n_min) {
        throw ConfigError("analyze: need 0 <= n_min <= n_max");
    }
    if (cfg.n_current < 0 || cfg.n_current > sim.capacity) {
        throw ConfigError("optimize.n_current must lie in [0, capacity]");
    }
    for (const double l : cfg.sweep.lambdas) {
        if (!(l >= 0.0)) throw ConfigError("sweep.lambda: rates must be >= 0");
    }
    for (const auto& p : cfg.sweep.policies) {
        SimConfig probe = sim;
        probe.policy = p;
        probe.validate();
    }
    for (const double e : cfg.sensitivity.errors) {
        if (!(e >= 0.0)) throw ConfigError("sensitivity.errors: fractions must be >= 0");
    }
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_experiment(doc, path.parent_path());
}

}  // namespace greenfarm::cli
