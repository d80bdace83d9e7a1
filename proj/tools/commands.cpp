#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <thread>
#include <tuple>

#include "CLI11.hpp"
#include "greenfarm/allocator.hpp"
#include "greenfarm/errors.hpp"
#include "greenfarm/queueing.hpp"

namespace greenfarm::cli {

namespace {

using nlohmann::json;

std::uint64_t effective_seed(const ExperimentConfig& cfg, const RunOptions& opt) {
    return opt.seed.value_or(cfg.sim.seed);
}

SimConfig base_sim(const ExperimentConfig& cfg, const RunOptions& opt) {
    SimConfig sim = cfg.sim;
    sim.seed = effective_seed(cfg, opt);
    return sim;
}

std::filesystem::path prepare(const RunOptions& opt, const char* name) {
    std::filesystem::create_directories(opt.out_dir);
    return opt.out_dir / name;
}

// Opens a CSV with the provenance comment and header already written.
std::ofstream open_csv(const ExperimentConfig& cfg, const RunOptions& opt, const char* name,
                       const char* header) {
    const auto path = prepare(opt, name);
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << "# config_hash=" << hash_hex(cfg.hash()) << " seed=" << effective_seed(cfg, opt) << '\n'
      << header << '\n'
      << std::setprecision(6);
    return f;
}

void write_json(const RunOptions& opt, const char* name, const std::string& text) {
    const auto path = prepare(opt, name);
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text << '\n';
}

// Runs fn(0..count-1) on up to hardware_concurrency threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t count, const std::function<T(std::size_t)>& fn) {
    std::vector<T> results(count);
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::string policy_label(const PolicySpec& p) {
    if (const auto* s = std::get_if<StaticPolicy>(&p)) return "static_" + std::to_string(s->n);
    return "adaptive";
}

ArrivalSpec arrivals_at_rate(const ArrivalSpec& family, double rate) {
    if (const auto* l = std::get_if<LogNormalRenewal>(&family)) {
        if (rate <= 0.0) throw ConfigError("sweep.lambda: log-normal arrivals need rates > 0");
        return LogNormalRenewal{1.0 / rate, l->scv};
    }
    if (std::holds_alternative<TraceArrivals>(family)) {
        throw ConfigError("sweep: trace arrivals cannot be swept over lambda");
    }
    return PoissonArrivals{rate};
}

double mean_of_runs(const ReplicatedReport& rep, double SimReport::*field) {
    double sum = 0.0;
    for (const auto& r : rep.runs) sum += r.*field;
    return sum / static_cast<double>(rep.runs.size());
}

}  // namespace

void cmd_analyze(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
    const auto& econ = cfg.sim.econ;
    const int n_min = cfg.analyze.n_min;
    const int n_max = cfg.analyze.n_max.value_or(cfg.sim.capacity);
    auto csv = open_csv(cfg, opt, "analyze.csv", "n,throughput,P_ab,power_w,revenue_per_hour");

    int best_n = n_min;
    double best_r = -INFINITY;
    int sign_changes = 0;
    double prev_r = NAN;
    int prev_sign = 0;
    for (int n = n_min; n <= n_max; ++n) {
        const SystemParams p = cfg.analytic_load(n);
        const SteadyState s = steady_state(p);
        const double busy = charged_occupancy(s.throughput, n, p.mu, econ.occupancy_mode);
        const double watts = power_draw(n, busy, econ.power);
        const double r = revenue_rate(p, econ);
        csv << n << ',' << s.throughput << ',' << s.abandon_prob << ',' << watts << ','
            << per_second_to_per_hour(r) << '\n';
        if (r > best_r) {
            best_r = r;
            best_n = n;
        }
        if (!std::isnan(prev_r) && r != prev_r) {
            const int sign = r > prev_r ? 1 : -1;
            if (prev_sign != 0 && sign != prev_sign) ++sign_changes;
            prev_sign = sign;
        }
        prev_r = r;
    }
    out << "argmax_n=" << best_n << " peak_revenue_per_hour=" << std::setprecision(6)
        << per_second_to_per_hour(best_r) << " unimodal=" << (sign_changes <= 1 ? "yes" : "no") << '\n';
}

void cmd_optimize(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
    const SystemParams load = cfg.analytic_load(0);
    AllocatorOptions options;
    if (const auto* a = std::get_if<AdaptivePolicy>(&cfg.sim.policy)) options = a->options;
    const AllocationDecision d = optimize_allocation(cfg.n_current, cfg.sim.capacity, load, cfg.sim.econ,
                                                     cfg.sim.reconfig, options);
    const auto [n_star, r_star] = exhaustive_optimal(cfg.sim.capacity, load, cfg.sim.econ);
    json j;
    j["lambda"] = load.lambda;
    j["mu"] = load.mu;
    j["theta"] = load.theta;
    j["capacity"] = cfg.sim.capacity;
    j["n_current"] = cfg.n_current;
    j["n_new"] = d.n_new;
    j["changed"] = d.changed;
    j["predicted_delta_per_s"] = d.predicted_delta;
    j["predicted_delta_per_hour"] = per_second_to_per_hour(d.predicted_delta);
    j["evaluations"] = d.evaluations;
    j["exhaustive_n_star"] = n_star;
    j["exhaustive_revenue_per_hour"] = per_second_to_per_hour(r_star);
    j["config_hash"] = hash_hex(cfg.hash());
    const std::string text = j.dump(2);
    write_json(opt, "optimize.json", text);
    out << text << '\n';
}

void cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
    const SimConfig sim = base_sim(cfg, opt);
    // a single run keeps the seed as given
    ReplicatedReport rep;
    if (opt.replications == 1) {
        rep.runs.push_back(run(sim));
        rep.revenue_per_hour = rep.runs.front().revenue_per_hour;
    } else {
        rep = run_replications(sim, opt.replications);
    }
    write_json(opt, "simulate.json", opt.replications == 1 ? to_json(rep.runs.front()) : to_json(rep));
    {
        const auto path = prepare(opt, "windows.csv");
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write " + path.string());
        f << "# config_hash=" << hash_hex(cfg.hash()) << " seed=" << sim.seed << '\n';
        write_window_csv(f, rep.runs.front().windows);
    }
    out << std::setprecision(6) << "revenue_per_hour=" << rep.revenue_per_hour.mean;
    if (rep.revenue_per_hour.half_width) out << " +- " << *rep.revenue_per_hour.half_width;
    out << " lost_pct=" << 100.0 * mean_of_runs(rep, &SimReport::lost_fraction)
        << " energy_kwh=" << mean_of_runs(rep, &SimReport::energy_kwh) << '\n';
}

void cmd_sweep(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
    if (cfg.sweep.lambdas.empty()) throw ConfigError("sweep.lambda: need at least one rate");
    std::vector<PolicySpec> policies = cfg.sweep.policies;
    if (policies.empty()) {
        policies = {StaticPolicy{cfg.sim.capacity / 2}, StaticPolicy{cfg.sim.capacity}, AdaptivePolicy{}};
    }
    const SimConfig base = base_sim(cfg, opt);
    struct Point {
        std::size_t policy;
        double lambda;
    };
    std::vector<Point> points;
    for (std::size_t p = 0; p < policies.size(); ++p) {
        for (const double l : cfg.sweep.lambdas) points.push_back({p, l});
    }
    const auto reports = parallel_map<ReplicatedReport>(points.size(), [&](std::size_t i) {
        SimConfig sim = base;
        sim.policy = policies[points[i].policy];
        sim.workload.arrivals = arrivals_at_rate(base.workload.arrivals, points[i].lambda);
        return run_replications(sim, opt.replications);
    });

    auto csv = open_csv(cfg, opt, "sweep.csv",
                        "policy,lambda,revenue_per_hour,revenue_ci95,energy_kwh_per_hour,lost_pct,"
                        "mean_active_servers");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& rep = reports[i];
        const double hours = mean_of_runs(rep, &SimReport::measured_seconds) / kSecondsPerHour;
        csv << policy_label(policies[points[i].policy]) << ',' << points[i].lambda << ','
            << rep.revenue_per_hour.mean << ',';
        if (rep.revenue_per_hour.half_width) csv << *rep.revenue_per_hour.half_width; else csv << "nan";
        csv << ',' << mean_of_runs(rep, &SimReport::energy_kwh) / hours << ','
            << 100.0 * mean_of_runs(rep, &SimReport::lost_fraction) << ','
            << mean_of_runs(rep, &SimReport::mean_active_servers) << '\n';
    }
    out << "sweep: " << points.size() << " points written to " << (opt.out_dir / "sweep.csv").string() << '\n';
}

void cmd_sensitivity(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out) {
    const auto& errors = cfg.sensitivity.errors;
    if (errors.empty()) throw ConfigError("sensitivity.errors: need at least one error level");
    SimConfig base = base_sim(cfg, opt);
    if (!std::holds_alternative<AdaptivePolicy>(base.policy)) base.policy = AdaptivePolicy{};
    const auto reports = parallel_map<ReplicatedReport>(errors.size(), [&](std::size_t i) {
        SimConfig sim = base;
        if (errors[i] > 0.0) {
            sim.workload.forecaster = OracleWithLaplaceError{errors[i]};
        } else {
            sim.workload.forecaster = OracleForecaster{};
        }
        return run_replications(sim, opt.replications);
    });

    auto csv = open_csv(cfg, opt, "sensitivity.csv", "error_pct,lost_jobs_pct,cumulative_revenue,cumulative_kwh");
    for (std::size_t i = 0; i < errors.size(); ++i) {
        csv << 100.0 * errors[i] << ',' << 100.0 * mean_of_runs(reports[i], &SimReport::lost_fraction) << ','
            << mean_of_runs(reports[i], &SimReport::revenue_usd) << ','
            << mean_of_runs(reports[i], &SimReport::energy_kwh) << '\n';
    }

    // Cumulative curves over time from the first replication.
    auto series = open_csv(cfg, opt, "sensitivity_series.csv",
                           "error_pct,window_start_h,cumulative_revenue,cumulative_kwh");
    for (std::size_t i = 0; i < errors.size(); ++i) {
        double revenue = 0.0;
        double kwh = 0.0;
        for (const auto& w : reports[i].runs.front().windows) {
            revenue += w.revenue_usd;
            kwh += w.energy_kwh;
            series << 100.0 * errors[i] << ',' << w.start / kSecondsPerHour << ',' << revenue << ',' << kwh
                   << '\n';
        }
    }
    out << "sensitivity: " << errors.size() << " error levels written to "
        << (opt.out_dir / "sensitivity.csv").string() << '\n';
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Profit-optimal server allocation: analytics and simulation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::size_t replications = 1;
    app.add_option("--config", config_path, "experiment file (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--replications", replications, "independent replications")->check(CLI::PositiveNumber);

    using Command = void (*)(const ExperimentConfig&, const RunOptions&, std::ostream&);
    const std::vector<std::tuple<const char*, const char*, Command>> commands = {
        {"analyze", "revenue, throughput and power for every n", cmd_analyze},
        {"optimize", "binary-search allocation for the configured load", cmd_optimize},
        {"simulate", "run the simulator; report JSON and window CSV", cmd_simulate},
        {"sweep", "simulate every policy over a list of arrival rates", cmd_sweep},
        {"sensitivity", "adaptive policy under Laplace forecast errors", cmd_sensitivity},
    };
    for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_experiment(config_path);
        } else {
            cfg.sim.validate();
        }
        RunOptions opt;
        opt.out_dir = out_dir;
        if (seed_opt->count() > 0) opt.seed = seed;
        opt.replications = replications;
        for (const auto& [name, help, fn] : commands) {
            if (app.got_subcommand(name)) fn(cfg, opt, out);
        }
        return kExitOk;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace greenfarm::cli
