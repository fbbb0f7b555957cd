#include "abandonq/des.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"

namespace abandonq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.order > b.order;
    }
};

}  // namespace

double QueueModel::fluid_queue() const {
    return std::max(0.0, servers * mu() * (rho() - 1.0) * gamma());
}

double QueueModel::fluid_wait() const { return std::max(0.0, gamma() * std::log(rho())); }

std::string validate(const QueueModel& model) {
    if (model.servers < 1) throw Error(Errc::InvalidParams, "servers must be >= 1");
    if (!(model.rho() > 1.0)) {
        std::ostringstream os;
        os << "model is not overloaded (rho = " << model.rho() << ")";
        return os.str();
    }
    return {};
}

void validate(const SimConfig& config) {
    if (!(config.horizon > 0.0) || !(config.warmup >= 0.0) || !(config.warmup < config.horizon)) {
        throw Error(Errc::InvalidParams, "need 0 <= warmup < horizon");
    }
    if (!(config.probe_interval >= 0.0)) throw Error(Errc::InvalidParams, "probe_interval must be >= 0");
    if (config.replications < 1) throw Error(Errc::InvalidParams, "replications must be >= 1");
}

void SystemState::push(double time, EventType type, std::uint64_t payload) {
    heap_.push_back(Event{time, (static_cast<std::uint64_t>(type) << 56) | next_seq_++, payload});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
}

Event SystemState::pop() {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event e = heap_.back();
    heap_.pop_back();
    return e;
}

std::vector<double> SystemState::live_deadlines() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(waiting));
    for (const auto& w : buffer) {
        if (!w.abandoned) out.push_back(w.deadline);
    }
    return out;
}

SystemState init_state(const QueueModel& model, const EquilibriumSpec& service_eq,
                       const EquilibriumSpec& arrival_eq, StreamSet& streams) {
    SystemState st;
    const int n = model.servers;
    st.servers = n;
    st.completion.assign(static_cast<std::size_t>(n), kInf);
    for (int j = 0; j < n; ++j) {
        const double t = sample_equilibrium(service_eq, streams.services);
        st.completion[static_cast<std::size_t>(j)] = t;
        st.push(t, EventType::Completion, static_cast<std::uint64_t>(j));
    }
    const auto preload = static_cast<long long>(std::llround(model.fluid_queue()));
    for (long long k = 0; k < preload; ++k) {
        const double d = sample(model.patience, streams.patiences);
        st.buffer.push_back({0.0, d, false});
        st.push(d, EventType::Abandonment, static_cast<std::uint64_t>(k));
    }
    st.waiting = preload;
    st.x = n + preload;
    st.x0 = st.x;
    st.patience_residual_approximate = preload > 0 && model.patience.family() != Family::Exponential;
    st.push(sample_equilibrium(arrival_eq, streams.arrivals), EventType::Arrival, 0);
    return st;
}

double probe_virtual_wait(double now, std::span<const double> completions,
                          std::span<const double> deadlines, const DistSpec& service,
                          RngStream& probe_rng) {
    std::vector<double> heap;
    heap.reserve(completions.size());
    for (double c : completions) {
        if (!std::isfinite(c)) return 0.0;  // an idle server
        heap.push_back(c);
    }
    if (heap.empty()) return 0.0;
    const auto later = std::greater<double>{};
    std::make_heap(heap.begin(), heap.end(), later);
    std::size_t k = 0;
    for (;;) {
        std::pop_heap(heap.begin(), heap.end(), later);
        const double t = heap.back();
        heap.pop_back();
        while (k < deadlines.size() && deadlines[k] < t) ++k;
        if (k == deadlines.size()) return t - now;
        ++k;
        heap.push_back(t + sample(service, probe_rng));
        std::push_heap(heap.begin(), heap.end(), later);
    }
}

double probe_virtual_wait(const SystemState& state, const DistSpec& service, RngStream& probe_rng) {
    if (state.x < state.servers) return 0.0;
    const auto deadlines = state.live_deadlines();
    return probe_virtual_wait(state.now, state.completion, deadlines, service, probe_rng);
}

double effective_probe_interval(const QueueModel& model, const SimConfig& config) {
    return config.probe_interval > 0.0 ? config.probe_interval : model.gamma() / 10.0;
}

namespace {

ReplicationStats run_one(const QueueModel& model, const SimConfig& config,
                         const EquilibriumSpec& service_eq, const EquilibriumSpec& arrival_eq,
                         std::uint64_t replication) {
    StreamSet streams = StreamSet::for_replication(config.seed, replication);
    SystemState st = init_state(model, service_eq, arrival_eq, streams);
    const int n = model.servers;
    const bool perturbed = config.mode == SimMode::Perturbed;
    const double horizon = config.horizon;
    const double warmup = config.warmup;
    const double probe_dt = effective_probe_interval(model, config);

    ReplicationStats out;
    out.replication = replication;
    out.x0 = st.x0;

    std::vector<double> hist(static_cast<std::size_t>(st.x + 64), 0.0);
    double below = 0.0;
    double t_acc = 0.0;
    auto accumulate = [&](double t_to) {
        const double lo = std::max(t_acc, warmup);
        if (t_to > lo) {
            const double dt = t_to - lo;
            const auto idx = static_cast<std::size_t>(std::max<long long>(st.x, 0));
            if (idx >= hist.size()) hist.resize(idx + 64, 0.0);
            hist[idx] += dt;
            if (st.x < n) below += dt;
        }
        t_acc = t_to;
    };

    std::vector<double> probes;
    double next_probe = warmup;
    auto do_probe = [&](double s) {
        accumulate(s);
        const double saved = st.now;
        st.now = s;
        probes.push_back(probe_virtual_wait(st, model.service, streams.probes));
        st.now = saved;
    };

    if (config.trace_limit > 0) out.trace.emplace_back(0.0, st.x);

    std::uint64_t arrivals_obs = 0;
    std::uint64_t abandon_obs = 0;

    auto start_service = [&](std::size_t j, double t) {
        const double done = t + sample(model.service, streams.services);
        st.completion[j] = done;
        st.push(done, EventType::Completion, j);
    };
    auto join_buffer = [&](double t) {
        const double d = t + sample(model.patience, streams.patiences);
        st.buffer.push_back({t, d, false});
        st.push(d, EventType::Abandonment, st.buffer_head_seq + st.buffer.size() - 1);
        ++st.waiting;
    };
    auto drop_dead_head = [&] {
        while (!st.buffer.empty() && st.buffer.front().abandoned) {
            st.buffer.pop_front();
            ++st.buffer_head_seq;
        }
    };

    while (!st.empty()) {
        if (st.top().time > horizon) break;
        while (next_probe <= st.top().time) {
            do_probe(next_probe);
            next_probe += probe_dt;
        }
        const Event ev = st.pop();
        if (ev.time < st.now) {
            throw Error(Errc::EventOrderViolation, "event clock moved backwards");
        }
        accumulate(ev.time);
        st.now = ev.time;
        const auto type = static_cast<EventType>(ev.order >> 56);
        switch (type) {
            case EventType::Arrival: {
                ++st.arrivals;
                if (ev.time >= warmup) ++arrivals_obs;
                st.push(ev.time + sample(model.arrival, streams.arrivals), EventType::Arrival, 0);
                if (perturbed) {
                    ++st.x;
                    if (st.x > n) join_buffer(ev.time);
                } else if (!st.idle.empty()) {
                    const int j = st.idle.back();
                    st.idle.pop_back();
                    ++st.x;
                    start_service(static_cast<std::size_t>(j), ev.time);
                } else {
                    ++st.x;
                    join_buffer(ev.time);
                }
                break;
            }
            case EventType::Completion: {
                const auto j = static_cast<std::size_t>(ev.payload);
                ++st.completions;
                --st.x;
                drop_dead_head();
                if (!st.buffer.empty()) {
                    st.buffer.pop_front();
                    ++st.buffer_head_seq;
                    --st.waiting;
                    start_service(j, ev.time);
                } else if (perturbed) {
                    ++st.phantom_services;
                    start_service(j, ev.time);
                } else {
                    st.completion[j] = kInf;
                    st.idle.push_back(static_cast<int>(j));
                }
                break;
            }
            case EventType::Abandonment: {
                if (ev.payload < st.buffer_head_seq) break;  // already admitted
                auto& entry = st.buffer[static_cast<std::size_t>(ev.payload - st.buffer_head_seq)];
                if (entry.abandoned) break;
                entry.abandoned = true;
                --st.waiting;
                --st.x;
                ++st.abandonments;
                if (ev.time >= warmup) ++abandon_obs;
                drop_dead_head();
                break;
            }
        }
        if (st.x < n && out.first_idle_time < 0.0) out.first_idle_time = ev.time;
        if (out.trace.size() < config.trace_limit) out.trace.emplace_back(ev.time, st.x);
    }
    while (next_probe <= horizon) {
        do_probe(next_probe);
        next_probe += probe_dt;
    }
    accumulate(horizon);

    const double obs = horizon - warmup;
    out.observed_time = obs;
    out.arrivals = st.arrivals;
    out.abandonments = st.abandonments;
    out.completions = st.completions;
    out.phantom_services = st.phantom_services;
    out.x_end = st.x;
    out.time_below_n = below / obs;
    out.abandon_fraction =
        arrivals_obs > 0 ? static_cast<double>(abandon_obs) / static_cast<double>(arrivals_obs) : 0.0;
    out.abandonment_rate = static_cast<double>(abandon_obs) / obs;

    while (!hist.empty() && hist.back() == 0.0) hist.pop_back();
    for (double& h : hist) h /= obs;
    const double q = model.fluid_queue();
    const double scale = std::sqrt(n * model.gamma());
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t x = 0; x < hist.size(); ++x) {
        const double qx = std::max(0.0, static_cast<double>(x) - n);
        m1 += hist[x] * qx;
        m2 += hist[x] * qx * qx;
    }
    out.queue_mean = m1;
    out.queue_var = m2 - m1 * m1;
    for (double a : config.tail_points) {
        double tail = 0.0;
        for (std::size_t x = 0; x < hist.size(); ++x) {
            if ((static_cast<double>(x) - n - q) / scale > a) tail += hist[x];
        }
        out.queue_tail.push_back(tail);
    }
    out.histogram = std::move(hist);

    out.probes = probes.size();
    out.wait_mean = stats::mean(probes);
    out.wait_var = stats::variance(probes);
    const double w = model.fluid_wait();
    const double wscale = std::sqrt(n / model.gamma());
    for (double a : config.tail_points) {
        std::size_t above = 0;
        for (double v : probes) above += (wscale * (v - w) > a) ? 1 : 0;
        out.wait_tail.push_back(probes.empty() ? 0.0
                                               : static_cast<double>(above) / probes.size());
    }
    return out;
}

}  // namespace

ReplicationStats run_replication(const QueueModel& model, const SimConfig& config,
                                 std::uint64_t replication) {
    validate(model);
    validate(config);
    return run_one(model, config, make_equilibrium(model.service), make_equilibrium(model.arrival),
                   replication);
}

std::vector<ReplicationStats> run_replications(const QueueModel& model, const SimConfig& config,
                                               Exec exec) {
    validate(model);
    validate(config);
    const EquilibriumSpec service_eq = make_equilibrium(model.service);
    const EquilibriumSpec arrival_eq = make_equilibrium(model.arrival);
    const int reps = config.replications;
    std::vector<ReplicationStats> out(static_cast<std::size_t>(reps));
    if (exec == Exec::Serial) {
        for (int r = 0; r < reps; ++r) {
            out[static_cast<std::size_t>(r)] =
                run_one(model, config, service_eq, arrival_eq, static_cast<std::uint64_t>(r));
        }
        return out;
    }
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < reps; ++r) {
        try {
            out[static_cast<std::size_t>(r)] =
                run_one(model, config, service_eq, arrival_eq, static_cast<std::uint64_t>(r));
        } catch (...) {
#pragma omp critical(abandonq_des_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::string_view to_string(Measure measure) noexcept {
    switch (measure) {
        case Measure::AbdFraction: return "AbdFraction";
        case Measure::QueueMean: return "QueueMean";
        case Measure::QueueVar: return "QueueVar";
        case Measure::WaitMean: return "WaitMean";
        case Measure::WaitVar: return "WaitVar";
        case Measure::QueueTail: return "QueueTail";
        case Measure::WaitTail: return "WaitTail";
        case Measure::StateHistogram: return "StateHistogram";
    }
    return "?";
}

std::string SimEstimate::label() const {
    std::string out(to_string(measure));
    if (measure == Measure::QueueTail || measure == Measure::WaitTail) {
        std::ostringstream os;
        os << "(" << a << ")";
        out += os.str();
    }
    return out;
}

const SimEstimate& SimSummary::get(Measure measure, double a) const {
    for (const auto& e : estimates) {
        if (e.measure == measure && std::abs(e.a - a) < 1e-12) return e;
    }
    throw Error(Errc::InvalidParams, "no estimate for " + std::string(to_string(measure)));
}

SimSummary aggregate(const SimConfig& config, std::span<const ReplicationStats> reps) {
    if (reps.size() < 2) {
        throw Error(Errc::InsufficientReplications, "aggregate needs at least two replications");
    }
    SimSummary summary;
    const int r = static_cast<int>(reps.size());
    auto add = [&](Measure m, double a, auto&& field) {
        std::vector<double> xs;
        xs.reserve(reps.size());
        for (const auto& rep : reps) xs.push_back(field(rep));
        double hw = stats::half_width_95(xs);
        if (!(hw >= 0.0)) hw = 0.0;
        summary.estimates.push_back(SimEstimate{m, a, stats::mean(xs), hw, r});
    };
    add(Measure::AbdFraction, 0.0, [](const auto& s) { return s.abandon_fraction; });
    add(Measure::QueueMean, 0.0, [](const auto& s) { return s.queue_mean; });
    add(Measure::QueueVar, 0.0, [](const auto& s) { return s.queue_var; });
    add(Measure::WaitMean, 0.0, [](const auto& s) { return s.wait_mean; });
    add(Measure::WaitVar, 0.0, [](const auto& s) { return s.wait_var; });
    for (std::size_t i = 0; i < config.tail_points.size(); ++i) {
        add(Measure::QueueTail, config.tail_points[i], [i](const auto& s) { return s.queue_tail[i]; });
    }
    for (std::size_t i = 0; i < config.tail_points.size(); ++i) {
        add(Measure::WaitTail, config.tail_points[i], [i](const auto& s) { return s.wait_tail[i]; });
    }

    std::size_t width = 0;
    for (const auto& rep : reps) width = std::max(width, rep.histogram.size());
    summary.histogram.assign(width, 0.0);
    for (const auto& rep : reps) {
        for (std::size_t x = 0; x < rep.histogram.size(); ++x) summary.histogram[x] += rep.histogram[x];
    }
    double total = 0.0;
    for (double h : summary.histogram) total += h;
    for (double& h : summary.histogram) h /= total;

    for (const auto& rep : reps) {
        if (!rep.flow_conserved()) {
            summary.diagnostics.push_back("flow conservation violated in replication " +
                                          std::to_string(rep.replication));
        }
    }
    return summary;
}

SimSummary simulate(const QueueModel& model, const SimConfig& config, Exec exec) {
    const auto reps = run_replications(model, config, exec);
    SimSummary summary = aggregate(config, reps);
    if (auto warning = validate(model); !warning.empty()) summary.diagnostics.push_back(warning);
    if (model.patience.family() != Family::Exponential) {
        summary.diagnostics.push_back(
            "initial waiting customers use fresh patience draws (approximate for non-exponential "
            "patience)");
    }
    return summary;
}

}  // namespace abandonq
