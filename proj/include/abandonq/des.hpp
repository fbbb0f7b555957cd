#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abandonq/distributions.hpp"
#include "abandonq/rng.hpp"

namespace abandonq {

/// G/GI/n+GI queue: interarrival, service and patience laws plus n servers.
struct QueueModel {
    int servers = 1;
    DistSpec arrival = exponential(1.0);
    DistSpec service = exponential(1.0);
    DistSpec patience = exponential(1.0);

    double lambda() const { return arrival.rate(); }
    double mu() const { return service.rate(); }
    double rho() const { return lambda() / (servers * mu()); }
    double gamma() const { return patience.mean(); }
    /// Fluid queue content n mu (rho - 1) gamma, clamped at 0.
    double fluid_queue() const;
    /// Fluid virtual wait gamma log rho, clamped at 0.
    double fluid_wait() const;
};

/// Throws Error{InvalidParams}. Returns a warning string (empty if none)
/// when the model is not overloaded.
std::string validate(const QueueModel& model);

enum class SimMode { Standard, Perturbed };

struct SimConfig {
    double horizon = 1e5;
    double warmup = 1e4;
    int replications = 10;
    /// Spacing of virtual-wait probes; 0 selects gamma / 10.
    double probe_interval = 0.0;
    std::uint64_t seed = 20130901;
    SimMode mode = SimMode::Standard;
    std::vector<double> tail_points{0.5, 1.0, 2.0};
    /// Record (time, X) after every event, up to this many entries.
    std::size_t trace_limit = 0;
};

void validate(const SimConfig& config);

enum class EventType : std::uint8_t { Completion = 0, Abandonment = 1, Arrival = 2 };

struct Event {
    double time;
    std::uint64_t order;    // (type << 56) | insertion sequence
    std::uint64_t payload;  // server index or buffer sequence number
};

/// Full mutable state of one replication.
class SystemState {
public:
    struct Waiting {
        double arrival;
        double deadline;
        bool abandoned;
    };

    double now = 0.0;
    int servers = 0;
    long long x = 0;  // customers in system (perturbed mode: Y, may drop below n)
    long long x0 = 0;
    long long waiting = 0;  // live customers in the buffer
    std::vector<double> completion;  // per server; +inf when idle
    std::vector<int> idle;           // stack of idle servers
    std::deque<Waiting> buffer;      // FIFO, abandoned entries removed lazily
    std::uint64_t buffer_head_seq = 0;

    std::uint64_t arrivals = 0;
    std::uint64_t abandonments = 0;
    std::uint64_t completions = 0;
    std::uint64_t phantom_services = 0;
    bool patience_residual_approximate = false;

    void push(double time, EventType type, std::uint64_t payload);
    Event pop();
    const Event& top() const { return heap_.front(); }
    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }

    /// Deadlines of live waiting customers in FIFO order.
    std::vector<double> live_deadlines() const;

private:
    std::vector<Event> heap_;
    std::uint64_t next_seq_ = 0;
};

/// All n servers busy with residual services drawn from the service
/// equilibrium law, plus round(q) waiting customers with fresh patience.
/// The first arrival is scheduled from the arrival equilibrium law.
SystemState init_state(const QueueModel& model, const EquilibriumSpec& service_eq,
                       const EquilibriumSpec& arrival_eq, StreamSet& streams);

/// Stopped-arrival virtual wait from a snapshot at time `now`: elapsed time
/// until a server frees with no live customer left to admit. Completion times
/// are +inf for idle servers; deadlines are in FIFO order.
double probe_virtual_wait(double now, std::span<const double> completions,
                          std::span<const double> deadlines, const DistSpec& service,
                          RngStream& probe_rng);
double probe_virtual_wait(const SystemState& state, const DistSpec& service, RngStream& probe_rng);

/// Raw per-replication output.
struct ReplicationStats {
    std::uint64_t replication = 0;
    double observed_time = 0.0;

    double abandon_fraction = 0.0;
    double abandonment_rate = 0.0;
    double queue_mean = 0.0;
    double queue_var = 0.0;
    double wait_mean = 0.0;
    double wait_var = 0.0;
    std::vector<double> queue_tail;  // per SimConfig::tail_points
    std::vector<double> wait_tail;
    std::vector<double> histogram;  // time fraction per X value
    std::size_t probes = 0;

    // whole-run counters, for conservation checks
    long long x0 = 0;
    long long x_end = 0;
    std::uint64_t arrivals = 0;
    std::uint64_t abandonments = 0;
    std::uint64_t completions = 0;
    std::uint64_t phantom_services = 0;

    double time_below_n = 0.0;  // fraction of observed time with X < n
    double first_idle_time = -1.0;  // -1 if X never dropped below n
    std::vector<std::pair<double, long long>> trace;

    bool flow_conserved() const {
        return static_cast<long long>(arrivals) + x0 ==
               static_cast<long long>(completions + abandonments) + x_end;
    }
};

/// Probe spacing actually used for a model.
double effective_probe_interval(const QueueModel& model, const SimConfig& config);

ReplicationStats run_replication(const QueueModel& model, const SimConfig& config,
                                 std::uint64_t replication);

enum class Exec { Serial, Parallel };

/// Serial reference loop or OpenMP loop over replications; both produce
/// identical results in replication order.
std::vector<ReplicationStats> run_replications(const QueueModel& model, const SimConfig& config,
                                               Exec exec = Exec::Parallel);

enum class Measure {
    AbdFraction,
    QueueMean,
    QueueVar,
    WaitMean,
    WaitVar,
    QueueTail,
    WaitTail,
    StateHistogram,
};

std::string_view to_string(Measure measure) noexcept;

struct SimEstimate {
    Measure measure;
    double a = 0.0;  // threshold for the tail measures
    double value = 0.0;
    double half_width_95 = 0.0;
    int replications = 0;

    std::string label() const;
};

struct SimSummary {
    std::vector<SimEstimate> estimates;
    std::vector<double> histogram;  // averaged across replications, sums to 1
    std::vector<std::string> diagnostics;

    const SimEstimate& get(Measure measure, double a = 0.0) const;
};

/// Across-replication means with Student-t 95% half-widths.
/// Throws Error{InsufficientReplications} for fewer than two replications.
SimSummary aggregate(const SimConfig& config, std::span<const ReplicationStats> reps);

SimSummary simulate(const QueueModel& model, const SimConfig& config, Exec exec = Exec::Parallel);

}  // namespace abandonq
