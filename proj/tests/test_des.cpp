#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "abandonq/des.hpp"
#include "abandonq/diffusion.hpp"
#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"
#include "oracles.hpp"

using namespace abandonq;

namespace {

QueueModel mgn(int n, DistSpec service, double gamma, double rho = 1.2) {
    QueueModel m;
    m.servers = n;
    m.service = service;
    m.arrival = exponential(service.mean() / (rho * n));
    m.patience = exponential(gamma);
    return m;
}

SimConfig cfg(double horizon, int reps, std::uint64_t seed = 1) {
    SimConfig c;
    c.horizon = horizon;
    c.warmup = horizon / 10.0;
    c.replications = reps;
    c.seed = seed;
    return c;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("des") {

TEST_CASE("initial state preloads the fluid queue") {
    struct Case {
        int n;
        double rho;
        double gamma;
        long long x0;
    };
    for (const Case c : {Case{100, 1.2, 10.0, 300}, Case{5, 1.2, 50.0, 55}, Case{100, 1.0 + 1e-9, 10.0, 100}}) {
        const QueueModel m = mgn(c.n, exponential(1.0), c.gamma, c.rho);
        StreamSet streams = StreamSet::for_replication(1, 0);
        SystemState st = init_state(m, make_equilibrium(m.service), make_equilibrium(m.arrival), streams);
        CHECK(st.x == c.x0);
        CHECK(st.waiting == c.x0 - c.n);
        CHECK(st.idle.empty());
        CHECK(st.pending() >= static_cast<std::size_t>(c.n) + 1);
    }
}

TEST_CASE("model and config validation") {
    QueueModel m = mgn(10, exponential(1.0), 1.0, 0.8);
    CHECK_FALSE(validate(m).empty());  // underloaded: warning only
    CHECK(validate(mgn(10, exponential(1.0), 1.0)).empty());
    m.servers = 0;
    CHECK_THROWS_AS(validate(m), Error);
    SimConfig c = cfg(100.0, 2);
    c.warmup = 200.0;
    CHECK_THROWS_AS(validate(c), Error);
    c = cfg(100.0, 0);
    CHECK_THROWS_AS(validate(c), Error);
    c = cfg(100.0, 2);
    c.probe_interval = -1.0;
    CHECK_THROWS_AS(validate(c), Error);
    CHECK(effective_probe_interval(mgn(10, exponential(1.0), 5.0), cfg(100.0, 2)) == doctest::Approx(0.5));
}

TEST_CASE("event ordering breaks ties by type then insertion") {
    SystemState st;
    st.push(1.0, EventType::Arrival, 0);
    st.push(1.0, EventType::Abandonment, 1);
    st.push(1.0, EventType::Completion, 2);
    st.push(0.5, EventType::Arrival, 3);
    st.push(1.0, EventType::Completion, 4);
    std::vector<std::uint64_t> got;
    while (!st.empty()) got.push_back(st.pop().payload);
    CHECK(got == std::vector<std::uint64_t>{3, 2, 4, 1, 0});
}

TEST_CASE("probe trivial cases") {
    RngStream r(1, Stream::Probes);
    const DistSpec svc = exponential(1.0);
    // one idle server: the stopped system is already below n
    const std::vector<double> c1{3.0, kInf, 4.0};
    CHECK(probe_virtual_wait(2.0, c1, {}, svc, r) == 0.0);
    // every waiting customer has already expired: first completion ends it
    const std::vector<double> c2{3.5, 2.7, 4.0};
    const std::vector<double> dead{1.0, 1.5, 2.0};
    CHECK(probe_virtual_wait(2.0, c2, dead, svc, r) == doctest::Approx(0.7));
    // one live customer: it takes the first free server, the second completion ends the wait
    const std::vector<double> live{9.0};
    CHECK(probe_virtual_wait(2.0, c2, live, deterministic(10.0), r) == doctest::Approx(1.5));
}

TEST_CASE("M/M/100+M abandonment fraction") {
    const QueueModel m = mgn(100, exponential(1.0), 10.0);
    SimConfig c = cfg(1e5, 2, 3);
    const ReplicationStats rs = run_replication(m, c, 0);
    CHECK(rs.flow_conserved());
    CHECK(std::abs(rs.abandon_fraction - 1.0 / 6.0) < 0.002);

    // birth-death oracle for the exact abandonment fraction
    const auto pmf = oracle::erlang_a_pmf(100, 120.0, 1.0, 10.0, 800);
    double ab = 0.0;
    for (std::size_t x = 101; x < pmf.size(); ++x) ab += pmf[x] * static_cast<double>(x - 100) / 10.0;
    CHECK(std::abs(rs.abandon_fraction - ab / 120.0) < 0.002);
}

TEST_CASE("huge patience with rho < 1 gives no abandonments") {
    const QueueModel m = mgn(10, exponential(1.0), 1e9, 0.8);
    const ReplicationStats rs = run_replication(m, cfg(2e3, 2), 0);
    CHECK(rs.abandonments == 0);
    CHECK(rs.flow_conserved());
}

TEST_CASE("perturbed and standard paths coincide until the first idle epoch") {
    const QueueModel m = mgn(100, deterministic(1.0), 10.0);
    SimConfig c = cfg(2e3, 2, 11);
    c.warmup = 0.0;
    c.trace_limit = 2'000'000;
    const ReplicationStats std_run = run_replication(m, c, 0);
    c.mode = SimMode::Perturbed;
    const ReplicationStats pert = run_replication(m, c, 0);
    CHECK(pert.time_below_n < 1e-3);
    CHECK(std_run.time_below_n < 1e-3);
    const double tau = std_run.first_idle_time < 0.0 ? kInf : std_run.first_idle_time;
    std::size_t compared = 0;
    for (std::size_t i = 0; i < std::min(std_run.trace.size(), pert.trace.size()); ++i) {
        if (std_run.trace[i].first >= tau) break;
        REQUIRE(std_run.trace[i] == pert.trace[i]);
        ++compared;
    }
    CHECK(compared > 100'000);
    CHECK(pert.completions == std_run.completions - (std_run.completions - pert.completions));
    CHECK(pert.flow_conserved() == (pert.phantom_services == 0));
}

TEST_CASE("M/D/100+M gamma=10 virtual wait mean") {
    const SimSummary s = simulate(mgn(100, deterministic(1.0), 10.0), cfg(2e4, 4, 5));
    CHECK(s.get(Measure::WaitMean).value == doctest::Approx(1.826).epsilon(0.01 / 1.826));
    CHECK(s.get(Measure::AbdFraction).value == doctest::Approx(0.1667).epsilon(0.01));
}

TEST_CASE("M/E2/100+M gamma=10 queue variance") {
    const SimSummary s = simulate(mgn(100, erlang2(1.0), 10.0), cfg(2e4, 4, 6));
    CHECK(std::abs(s.get(Measure::QueueVar).value - 956.4) < 30.0);
    CHECK(std::abs(s.get(Measure::QueueMean).value - 199.9) < 1.0);
}

TEST_CASE("M/D/5+M gamma=50 wait tail at a = 1") {
    const SimSummary s = simulate(mgn(5, deterministic(1.0), 50.0), cfg(1e5, 10, 7));
    CHECK(std::abs(s.get(Measure::WaitTail, 1.0).value - 0.0826) < 0.005);
}

TEST_CASE("abandonment rate equals time-average queue over gamma") {
    const QueueModel m = mgn(20, erlang2(1.0), 2.0);
    SimConfig c = cfg(2e4, 8, 8);
    const auto reps = run_replications(m, c);
    std::vector<double> diff;
    for (const auto& r : reps) {
        CHECK(r.flow_conserved());
        diff.push_back(r.abandonment_rate - r.queue_mean / 2.0);
    }
    const double se = std::sqrt(stats::variance(diff) / diff.size());
    CHECK(std::abs(stats::mean(diff)) < 3.0 * se + 1e-12);
}

TEST_CASE("aggregate semantics") {
    SimConfig c = cfg(100.0, 3);
    ReplicationStats r;
    r.abandon_fraction = 0.2;
    r.queue_mean = 4.0;
    r.queue_var = 1.0;
    r.wait_mean = 0.5;
    r.wait_var = 0.1;
    r.queue_tail = {0.3, 0.2, 0.1};
    r.wait_tail = {0.3, 0.2, 0.1};
    r.histogram = {0.25, 0.25, 0.5};
    std::vector<ReplicationStats> reps(3, r);
    const SimSummary s = aggregate(c, reps);
    for (const auto& e : s.estimates) CHECK(e.half_width_95 == 0.0);
    CHECK(s.get(Measure::QueueMean).value == 4.0);
    CHECK(s.get(Measure::WaitTail, 2.0).value == 0.1);
    CHECK_THROWS_AS(aggregate(c, std::span(reps).first(1)), Error);
}

TEST_CASE("histogram, determinism, serial equals parallel") {
    const QueueModel m = mgn(10, lognormal(1.0, 1.52), 3.0);
    const SimConfig c = cfg(3e3, 4, 9);
    const SimSummary a = simulate(m, c, Exec::Serial);
    const SimSummary b = simulate(m, c, Exec::Parallel);
    const SimSummary again = simulate(m, c, Exec::Serial);
    const double total = std::accumulate(a.histogram.begin(), a.histogram.end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-12);
    REQUIRE(a.estimates.size() == b.estimates.size());
    for (std::size_t i = 0; i < a.estimates.size(); ++i) {
        CHECK(a.estimates[i].value == b.estimates[i].value);
        CHECK(a.estimates[i].half_width_95 == b.estimates[i].half_width_95);
        CHECK(a.estimates[i].value == again.estimates[i].value);
    }
    CHECK(a.histogram == b.histogram);
    const double abd = a.get(Measure::AbdFraction).value;
    CHECK(abd >= 0.0);
    CHECK(abd <= 1.0);
}

TEST_CASE("queue mean increases with patience") {
    double prev = -1.0;
    for (double gamma : {0.5, 2.0, 8.0}) {
        const double q = simulate(mgn(20, exponential(1.0), gamma), cfg(5e3, 3, 10)).get(Measure::QueueMean).value;
        CHECK(q > prev);
        prev = q;
    }
}

TEST_CASE("general patience: Erlang2 queue mean against the extension") {
    QueueModel m = mgn(100, exponential(1.0), 1.0);
    m.patience = erlang2(5.0);
    const SimSummary s = simulate(m, cfg(1e4, 4, 12));
    const GaussianApprox g = general_patience(100, 1.0, 1.2, m.patience, 1.0, 1.0);
    CHECK(s.get(Measure::QueueMean).value == doctest::Approx(g.q).epsilon(0.05));
}

}  // TEST_SUITE
