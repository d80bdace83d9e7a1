#include "greenfarm/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <queue>

#include "greenfarm/errors.hpp"

namespace greenfarm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum Stream : std::uint64_t { kArrivalStream = 1, kServiceStream, kPatienceStream, kForecastStream };

// Bitset of idle servers with O(S/64) lowest/highest lookup.
class IdlePool {
public:
    explicit IdlePool(int size) : words_((static_cast<std::size_t>(size) + 63) / 64, 0) {}

    void insert(int i) {
        words_[static_cast<std::size_t>(i) >> 6] |= bit(i);
        ++count_;
    }
    void erase(int i) {
        words_[static_cast<std::size_t>(i) >> 6] &= ~bit(i);
        --count_;
    }
    [[nodiscard]] int count() const noexcept { return count_; }
    [[nodiscard]] int lowest() const {
        for (std::size_t w = 0; w < words_.size(); ++w) {
            if (words_[w] != 0) return static_cast<int>(w * 64 + std::countr_zero(words_[w]));
        }
        return -1;
    }
    [[nodiscard]] int highest() const {
        for (std::size_t w = words_.size(); w-- > 0;) {
            if (words_[w] != 0) return static_cast<int>(w * 64 + 63 - std::countl_zero(words_[w]));
        }
        return -1;
    }

private:
    static std::uint64_t bit(int i) { return std::uint64_t{1} << (static_cast<unsigned>(i) & 63u); }
    std::vector<std::uint64_t> words_;
    int count_ = 0;
};

// Timed server event: completion or end of a boot/shutdown.
struct Timed {
    double time;
    int server;
    bool operator>(const Timed& o) const { return time != o.time ? time > o.time : server > o.server; }
};
using MinHeap = std::priority_queue<Timed, std::vector<Timed>, std::greater<>>;

struct Bucket {
    double start = 0.0;
    std::uint64_t completions = 0;
    std::uint64_t abandonments = 0;
    double energy_joules = 0.0;
    double wear_usd = 0.0;
};

struct OpenWindow {
    WindowRecord record;
    std::uint64_t arrivals = 0;
    double energy_joules = 0.0;
    double wear_usd = 0.0;
    bool observed = false;  // lambda_observed frozen at the decision
};

class Simulation {
public:
    Simulation(const SimConfig& cfg, const SimObserver& observer)
        : cfg_(cfg),
          observer_(observer),
          arrivals_(cfg.workload.arrivals, make_rng(cfg.seed, kArrivalStream)),
          service_(cfg.workload.service, make_rng(cfg.seed, kServiceStream)),
          patience_(cfg.workload.patience, make_rng(cfg.seed, kPatienceStream)),
          forecaster_(cfg.workload, make_rng(cfg.seed, kForecastStream)),
          servers_(static_cast<std::size_t>(cfg.capacity)),
          idle_(cfg.capacity),
          adaptive_(std::holds_alternative<AdaptivePolicy>(cfg.policy)),
          price_(cfg.econ.price_per_joule()),
          wear_(cfg.reconfig.wear_cost_per_change()) {}

    SimReport execute();

private:
    // --- event handlers ---
    void on_arrival();
    void on_completion(int server);
    void on_transition(int server);
    void on_window_end();
    void on_sample_boundary();
    void on_warmup_end();

    // --- helpers ---
    void advance(double t);
    void start_service(int server, const Job& job);
    void dispatch(int server);
    void abandon(const Job& job);
    void count_completion();
    void boot(int server);
    void shut_down(int server);
    void apply_target(int target);
    void decide(double observed_rate);
    void open_window(double start, int n, double forecast);
    void close_window(double end);
    void record_wear();
    [[nodiscard]] int active_servers() const noexcept { return idle_.count() + busy_ - draining_ + booting_; }
    [[nodiscard]] bool measuring() const noexcept { return now_ >= cfg_.warmup; }
    void emit(SimEventKind kind, double effective, std::uint64_t job, int server) const {
        if (observer_) observer_({kind, now_, effective, job, server, target_});
    }

    const SimConfig& cfg_;
    const SimObserver& observer_;
    ArrivalStream arrivals_;
    ServiceSampler service_;
    PatienceSampler patience_;
    Forecaster forecaster_;

    std::vector<ServerState> servers_;
    IdlePool idle_;
    MinHeap completions_;
    MinHeap transitions_;
    std::deque<Job> queue_;

    const bool adaptive_;
    const double price_;
    const double wear_;

    double now_ = 0.0;
    double last_advance_ = 0.0;
    double next_arrival_ = kInf;
    double next_window_end_ = kInf;
    double next_sample_ = kInf;
    bool warmup_pending_ = false;
    std::uint64_t next_job_id_ = 0;
    std::uint64_t first_measured_job_ = 0;

    int busy_ = 0;
    int draining_ = 0;
    int booting_ = 0;
    int shutting_ = 0;
    int target_ = 0;
    bool awaiting_boot_ = false;
    double pending_forecast_ = kNaN;

    // whole-run counters
    std::uint64_t arrived_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t abandoned_ = 0;
    std::uint64_t state_changes_ = 0;
    std::uint64_t invocations_ = 0;

    // measured-period accumulators
    std::uint64_t measured_completed_ = 0;
    std::uint64_t measured_abandoned_ = 0;
    std::uint64_t measured_completions_in_period_ = 0;
    double energy_joules_ = 0.0;
    double wear_usd_ = 0.0;
    double busy_area_ = 0.0;
    double active_area_ = 0.0;
    double queue_area_ = 0.0;

    std::vector<Bucket> buckets_;
    std::vector<WindowRecord> closed_windows_;
    OpenWindow window_;
};

void Simulation::advance(double t) {
    const double dt = t - last_advance_;
    if (dt > 0.0) {
        const int idle = idle_.count();
        const double watts = idle * cfg_.econ.power.idle_watts + busy_ * cfg_.econ.power.busy_watts +
                             (booting_ + shutting_) * cfg_.econ.power.switching_watts;
        const double joules = watts * dt;
        window_.energy_joules += joules;
        if (last_advance_ >= cfg_.warmup) {
            energy_joules_ += joules;
            busy_area_ += busy_ * dt;
            active_area_ += (idle + busy_) * dt;
            if (!buckets_.empty()) buckets_.back().energy_joules += joules;
        }
    }
    last_advance_ = t;
    now_ = t;
}

void Simulation::record_wear() {
    ++state_changes_;
    window_.wear_usd += wear_;
    if (measuring()) {
        wear_usd_ += wear_;
        if (!buckets_.empty()) buckets_.back().wear_usd += wear_;
    }
}

void Simulation::start_service(int server, const Job& job) {
    auto& s = servers_[static_cast<std::size_t>(server)];
    s.phase = ServerPhase::Busy;
    s.job = job.id;
    ++busy_;
    if (now_ > cfg_.warmup) queue_area_ += now_ - std::max(job.arrival_time, cfg_.warmup);
    completions_.push({now_ + job.service_demand, server});
    emit(SimEventKind::ServiceStart, now_, job.id, server);
}

void Simulation::abandon(const Job& job) {
    const double at = job.patience_deadline;
    ++abandoned_;
    if (at > cfg_.warmup) queue_area_ += at - std::max(job.arrival_time, cfg_.warmup);
    if (job.arrival_time >= cfg_.warmup) ++measured_abandoned_;

    // Attribute to the window and batch containing the deadline.
    if (at >= window_.record.start) {
        ++window_.record.abandonments;
    } else {
        auto it = std::upper_bound(closed_windows_.begin(), closed_windows_.end(), at,
                                   [](double v, const WindowRecord& w) { return v < w.start; });
        if (it != closed_windows_.begin()) ++std::prev(it)->abandonments;
    }
    auto bt = std::upper_bound(buckets_.begin(), buckets_.end(), at,
                               [](double v, const Bucket& b) { return v < b.start; });
    if (bt != buckets_.begin()) ++std::prev(bt)->abandonments;
    emit(SimEventKind::Abandonment, at, job.id, -1);
}

void Simulation::dispatch(int server) {
    while (!queue_.empty()) {
        const Job job = queue_.front();
        queue_.pop_front();
        if (job.patience_deadline <= now_) {
            abandon(job);
            continue;
        }
        start_service(server, job);
        return;
    }
    servers_[static_cast<std::size_t>(server)].phase = ServerPhase::Idle;
    idle_.insert(server);
}

void Simulation::on_arrival() {
    Job job;
    job.id = next_job_id_++;
    job.arrival_time = now_;
    job.service_demand = service_.next();
    job.patience_deadline = now_ + patience_.next();
    ++arrived_;
    ++window_.arrivals;
    emit(SimEventKind::Arrival, now_, job.id, -1);

    if (idle_.count() > 0) {
        const int server = idle_.lowest();
        idle_.erase(server);
        start_service(server, job);
    } else {
        queue_.push_back(job);
    }
    next_arrival_ = arrivals_.next(now_);
}

void Simulation::count_completion() {
    ++completed_;
    ++window_.record.completions;
    if (measuring()) {
        ++measured_completions_in_period_;
        if (!buckets_.empty()) ++buckets_.back().completions;
    }
}

void Simulation::on_completion(int server) {
    auto& s = servers_[static_cast<std::size_t>(server)];
    const std::uint64_t job = s.job;
    --busy_;
    count_completion();
    // Job ids follow arrival order, so the id tells whether it arrived after warmup.
    if (job >= first_measured_job_) ++measured_completed_;
    emit(SimEventKind::Completion, now_, job, server);
    if (s.draining) {
        s.draining = false;
        --draining_;
        shut_down(server);
        return;
    }
    dispatch(server);
}

void Simulation::boot(int server) {
    auto& s = servers_[static_cast<std::size_t>(server)];
    s.phase = ServerPhase::Booting;
    s.ready_at = now_ + cfg_.reconfig.boot_seconds;
    ++booting_;
    record_wear();
    transitions_.push({s.ready_at, server});
}

void Simulation::shut_down(int server) {
    auto& s = servers_[static_cast<std::size_t>(server)];
    s.phase = ServerPhase::ShuttingDown;
    s.ready_at = now_ + cfg_.reconfig.boot_seconds;
    ++shutting_;
    record_wear();
    transitions_.push({s.ready_at, server});
}

void Simulation::on_transition(int server) {
    auto& s = servers_[static_cast<std::size_t>(server)];
    if (s.phase == ServerPhase::Booting) {
        --booting_;
        emit(SimEventKind::BootComplete, now_, 0, server);
        dispatch(server);
        if (awaiting_boot_ && booting_ == 0) {
            awaiting_boot_ = false;
            close_window(now_);
            open_window(now_, target_, pending_forecast_);
        }
    } else {
        --shutting_;
        s.phase = ServerPhase::Off;
        emit(SimEventKind::ShutdownComplete, now_, 0, server);
    }
}

void Simulation::apply_target(int target) {
    int active = active_servers();
    // Keep draining servers first: they are already powered.
    for (int i = cfg_.capacity - 1; i >= 0 && active < target && draining_ > 0; --i) {
        auto& s = servers_[static_cast<std::size_t>(i)];
        if (s.phase == ServerPhase::Busy && s.draining) {
            s.draining = false;
            --draining_;
            ++active;
        }
    }
    for (int i = 0; i < cfg_.capacity && active < target; ++i) {
        if (servers_[static_cast<std::size_t>(i)].phase == ServerPhase::Off) {
            boot(i);
            ++active;
        }
    }
    while (active > target && idle_.count() > 0) {
        const int i = idle_.highest();
        idle_.erase(i);
        shut_down(i);
        --active;
    }
    for (int i = cfg_.capacity - 1; i >= 0 && active > target; --i) {
        auto& s = servers_[static_cast<std::size_t>(i)];
        if (s.phase == ServerPhase::Busy && !s.draining) {
            s.draining = true;
            ++draining_;
            --active;
        }
    }
    target_ = active;
}

void Simulation::decide(double observed_rate) {
    const auto& policy = std::get<AdaptivePolicy>(cfg_.policy);
    const double t = cfg_.window_length();
    const double forecast = forecaster_.forecast(now_, t, observed_rate);
    SystemParams load{forecast, cfg_.workload.service.mu, cfg_.workload.abandonment_rate(), 0};
    const int available = cfg_.capacity - shutting_ - draining_;
    const int current = active_servers();
    ++invocations_;
    pending_forecast_ = forecast;
    if (available >= 1) {
        const AllocationDecision d =
            optimize_allocation(std::min(current, available), available, load, cfg_.econ, cfg_.reconfig,
                                policy.options);
        if (d.changed) apply_target(d.n_new);
    }
    target_ = active_servers();
    emit(SimEventKind::Decision, now_, 0, -1);
}

void Simulation::open_window(double start, int n, double forecast) {
    window_ = OpenWindow{};
    window_.record.start = start;
    window_.record.n = n;
    window_.record.lambda_forecast = forecast;
    next_window_end_ = start + cfg_.window_length();
}

void Simulation::close_window(double end) {
    auto& r = window_.record;
    if (!window_.observed) {
        const double span = end - r.start;
        r.lambda_observed = span > 0.0 ? static_cast<double>(window_.arrivals) / span : 0.0;
    }
    r.energy_kwh = joules_to_kwh(window_.energy_joules);
    r.revenue_usd = cfg_.econ.income_per_job * static_cast<double>(r.completions) -
                    price_ * window_.energy_joules - window_.wear_usd;
    closed_windows_.push_back(r);
}

void Simulation::on_window_end() {
    auto& r = window_.record;
    const double span = now_ - r.start;
    r.lambda_observed = span > 0.0 ? static_cast<double>(window_.arrivals) / span : 0.0;
    window_.observed = true;

    if (!adaptive_) {
        close_window(now_);
        open_window(now_, target_, kNaN);
        return;
    }
    decide(r.lambda_observed);
    if (booting_ > 0) {
        // Scale-up: the next window starts once every booting server is ready.
        awaiting_boot_ = true;
        next_window_end_ = kInf;
        return;
    }
    close_window(now_);
    open_window(now_, target_, pending_forecast_);
}

void Simulation::on_sample_boundary() {
    buckets_.push_back(Bucket{now_});
    next_sample_ = now_ + cfg_.sample_interval;
}

void Simulation::on_warmup_end() {
    warmup_pending_ = false;
    first_measured_job_ = next_job_id_;
    buckets_.push_back(Bucket{now_});
    next_sample_ = now_ + cfg_.sample_interval;
}

SimReport Simulation::execute() {
    // Initial allocation: static n, or initial_n for the adaptive policy.
    const int initial =
        adaptive_ ? cfg_.initial_n : std::get<StaticPolicy>(cfg_.policy).n;
    for (int i = 0; i < initial; ++i) {
        servers_[static_cast<std::size_t>(i)].phase = ServerPhase::Idle;
        idle_.insert(i);
    }
    target_ = initial;
    open_window(0.0, initial, kNaN);
    if (cfg_.warmup > 0.0) {
        warmup_pending_ = true;
        first_measured_job_ = std::numeric_limits<std::uint64_t>::max();
    } else {
        on_warmup_end();
    }
    next_arrival_ = arrivals_.next(0.0);

    if (adaptive_ && !forecaster_.needs_history()) {
        decide(kNaN);
        window_.record.n = target_;
        window_.record.lambda_forecast = pending_forecast_;
        if (booting_ > 0) {
            // Servers powered at t = 0 belong to the first window; it starts when they are ready.
            awaiting_boot_ = true;
            next_window_end_ = kInf;
        }
    }

    const double end = cfg_.duration;
    while (true) {
        const double t_completion = completions_.empty() ? kInf : completions_.top().time;
        const double t_transition = transitions_.empty() ? kInf : transitions_.top().time;
        const double t_warmup = warmup_pending_ ? cfg_.warmup : kInf;
        const double t_next = std::min({t_completion, t_transition, next_arrival_, next_window_end_,
                                         next_sample_, t_warmup, end});
        if (t_next >= end) {
            advance(end);
            break;
        }
        advance(t_next);
        if (t_warmup == t_next) {
            on_warmup_end();
        } else if (t_transition == t_next) {
            const int server = transitions_.top().server;
            transitions_.pop();
            on_transition(server);
        } else if (t_completion == t_next) {
            const int server = completions_.top().server;
            completions_.pop();
            on_completion(server);
        } else if (next_arrival_ == t_next) {
            on_arrival();
        } else if (next_window_end_ == t_next) {
            on_window_end();
        } else {
            on_sample_boundary();
        }
    }

    // Waiting jobs whose patience ran out before the end are abandonments.
    std::uint64_t waiting_left = 0;
    for (const Job& job : queue_) {
        if (job.patience_deadline <= end) {
            abandon(job);
        } else {
            ++waiting_left;
            if (end > cfg_.warmup) queue_area_ += end - std::max(job.arrival_time, cfg_.warmup);
        }
    }
    close_window(end);

    SimReport rep;
    rep.seed = cfg_.seed;
    rep.measured_seconds = end - cfg_.warmup;
    const double hours = rep.measured_seconds / kSecondsPerHour;
    for (const Bucket& b : buckets_) {
        const double len = std::min(b.start + cfg_.sample_interval, end) - b.start;
        if (len < cfg_.sample_interval * (1.0 - 1e-9)) continue;  // partial batch
        const double usd = cfg_.econ.income_per_job * static_cast<double>(b.completions) -
                           price_ * b.energy_joules - b.wear_usd;
        rep.revenue_samples.push_back(usd / (len / kSecondsPerHour));
    }
    rep.revenue_per_hour = summarize(rep.revenue_samples);
    rep.revenue_usd = cfg_.econ.income_per_job * static_cast<double>(measured_completions_in_period_) -
                      price_ * energy_joules_ - wear_usd_;
    if (rep.revenue_samples.empty() && hours > 0.0) rep.revenue_per_hour.mean = rep.revenue_usd / hours;
    rep.energy_kwh = joules_to_kwh(energy_joules_);
    const std::uint64_t resolved = measured_completed_ + measured_abandoned_;
    rep.lost_fraction = resolved > 0 ? static_cast<double>(measured_abandoned_) / static_cast<double>(resolved) : 0.0;
    rep.throughput = static_cast<double>(measured_completions_in_period_) / rep.measured_seconds;
    rep.mean_queue_len = queue_area_ / rep.measured_seconds;
    rep.mean_in_system = (queue_area_ + busy_area_) / rep.measured_seconds;
    rep.mean_active_servers = active_area_ / rep.measured_seconds;
    rep.arrivals = arrived_;
    rep.completions = completed_;
    rep.abandonments = abandoned_;
    rep.in_flight = waiting_left + static_cast<std::uint64_t>(busy_);
    rep.state_changes = state_changes_;
    rep.policy_invocations = invocations_;
    rep.windows = std::move(closed_windows_);
    return rep;
}

}  // namespace

void SimConfig::validate() const {
    if (capacity < 1) throw ConfigError("capacity must be >= 1");
    if (initial_n < 0 || initial_n > capacity) throw ConfigError("initial_n must lie in [0, capacity]");
    if (const auto* s = std::get_if<StaticPolicy>(&policy)) {
        if (s->n < 0 || s->n > capacity) throw ConfigError("static n must lie in [0, capacity]");
    } else {
        const auto& a = std::get<AdaptivePolicy>(policy);
        if (a.options.granularity < 1) throw ConfigError("granularity must be >= 1");
        if (!(a.options.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
    }
    if (!(duration > warmup) || !std::isfinite(duration)) throw ConfigError("duration must exceed warmup");
    if (!(warmup >= 0.0)) throw ConfigError("warmup must be >= 0");
    if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
        throw ConfigError("sample_interval must be > 0");
    }
    workload.validate();
    try {
        econ.validate();
        reconfig.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

SimReport run(const SimConfig& config, const SimObserver& observer) {
    config.validate();
    Simulation sim(config, observer);
    return sim.execute();
}

std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t index) {
    // splitmix64 step
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

ReplicatedReport run_replications(const SimConfig& config, std::size_t replications) {
    if (replications == 0) throw ConfigError("replications must be >= 1");
    ReplicatedReport out;
    out.runs.reserve(replications);
    for (std::size_t i = 0; i < replications; ++i) {
        SimConfig c = config;
        c.seed = replication_seed(config.seed, i);
        out.runs.push_back(run(c));
    }
    auto collect = [&](auto field) {
        std::vector<double> v;
        v.reserve(out.runs.size());
        for (const auto& r : out.runs) v.push_back(field(r));
        return summarize(v);
    };
    if (replications == 1) {
        const SimReport& r = out.runs.front();
        out.revenue_per_hour = r.revenue_per_hour;
    } else {
        out.revenue_per_hour = collect([](const SimReport& r) { return r.revenue_per_hour.mean; });
    }
    out.lost_fraction = collect([](const SimReport& r) { return r.lost_fraction; });
    out.throughput = collect([](const SimReport& r) { return r.throughput; });
    out.energy_kwh = collect([](const SimReport& r) { return r.energy_kwh; });
    out.mean_queue_len = collect([](const SimReport& r) { return r.mean_queue_len; });
    return out;
}

}  // namespace greenfarm
