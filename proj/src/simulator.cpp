#include "qdelay/simulator.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "csv.hpp"

namespace qdelay {
namespace {

enum class EventKind : int { departure = 0, arrival = 1 };

struct Event {
    double time;
    EventKind kind;
    std::size_t customer;
    int server;

    auto key() const { return std::tuple(time, static_cast<int>(kind), customer); }
    bool operator>(const Event& other) const { return key() > other.key(); }
};

struct ServiceEntry {
    double time;
    double wait;
};

}  // namespace

void validate(const SimConfig& cfg) {
    if (cfg.servers < 1) throw std::invalid_argument("sim: servers must be >= 1");
    if (cfg.customers == 0 && !(cfg.max_time > 0.0)) {
        throw std::invalid_argument("sim: a positive customer count or max_time is required");
    }
    if (cfg.max_time < 0.0) throw std::invalid_argument("sim: max_time must be >= 0");
    validate(cfg.arrival);
    validate(cfg.service);
}

SimOutput run(const SimConfig& cfg) {
    validate(cfg);
    RandomStream gaps(cfg.seed, StreamId::arrivals);
    RandomStream thinning(cfg.seed, StreamId::thinning);
    RandomStream services(cfg.seed, StreamId::services);

    std::vector<double> arrivals;
    std::vector<double> durations;
    if (cfg.customers > 0) {
        arrivals.reserve(cfg.customers);
        durations.reserve(cfg.customers);
    }
    double now = 0.0;
    for (;;) {
        if (cfg.customers > 0 && arrivals.size() >= cfg.customers) break;
        const double t = next_arrival(cfg.arrival, now, gaps, thinning);
        if (cfg.max_time > 0.0 && t > cfg.max_time) break;
        arrivals.push_back(t);
        durations.push_back(sample_service(cfg.service, services));
        now = t;
    }
    return simulate_trace(cfg.servers, arrivals, durations, cfg.warmup);
}

SimOutput simulate_trace(int servers, std::span<const double> arrival_times, std::span<const double> service_durations,
                         std::size_t warmup) {
    if (servers < 1) throw std::invalid_argument("simulate_trace: servers must be >= 1");
    if (arrival_times.size() != service_durations.size()) {
        throw std::invalid_argument("simulate_trace: arrival and service traces differ in length");
    }
    const std::size_t n = arrival_times.size();

    SimOutput out;
    out.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && arrival_times[i] < arrival_times[i - 1]) {
            throw std::invalid_argument("simulate_trace: arrival times must be nondecreasing");
        }
        if (!(service_durations[i] > 0.0)) throw std::invalid_argument("simulate_trace: service durations must be > 0");
        auto& r = out.records[i];
        r.id = i;
        r.arrival_time = arrival_times[i];
        r.service_duration = service_durations[i];
        r.warmup = i < warmup;
    }

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::priority_queue<int, std::vector<int>, std::greater<>> idle;
    for (int s = 0; s < servers; ++s) idle.push(s);
    std::deque<std::size_t> queue;
    std::vector<ServiceEntry> entries;
    entries.reserve(n);
    std::size_t started = 0;

    auto start_service = [&](std::size_t id, int server, double now) {
        auto& r = out.records[id];
        r.service_start = now;
        r.wait = now - r.arrival_time;
        r.entered_service_rank = started++;
        entries.push_back({now, r.wait});
        events.push({now + r.service_duration, EventKind::departure, id, server});
    };

    if (n > 0) events.push({arrival_times[0], EventKind::arrival, 0, -1});

    while (started < n) {
        const Event ev = events.top();
        events.pop();
        if (ev.kind == EventKind::arrival) {
            auto& r = out.records[ev.customer];
            ++out.arrivals;
            for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
                if (it->time < ev.time) {
                    r.les = it->wait;
                    break;
                }
            }
            r.hol = queue.empty() ? 0.0 : ev.time - out.records[queue.front()].arrival_time;
            if (!idle.empty()) {
                const int server = idle.top();
                idle.pop();
                start_service(ev.customer, server, ev.time);
            } else {
                queue.push_back(ev.customer);
            }
            if (ev.customer + 1 < n) events.push({arrival_times[ev.customer + 1], EventKind::arrival, ev.customer + 1, -1});
        } else {
            ++out.completions;
            if (!queue.empty()) {
                const std::size_t next = queue.front();
                queue.pop_front();
                start_service(next, ev.server, ev.time);
            } else {
                idle.push(ev.server);
            }
        }
        if (!idle.empty() && !queue.empty()) throw std::logic_error("simulate_trace: idle server while customers queue");
    }
    return out;
}

ErlangC erlang_c_oracle(int servers, double lambda, double mu) {
    if (servers < 1) throw std::invalid_argument("erlang_c_oracle: servers must be >= 1");
    if (!(lambda >= 0.0) || !(mu > 0.0)) throw std::invalid_argument("erlang_c_oracle: need lambda >= 0 and mu > 0");
    const double c = servers;
    if (!(lambda < c * mu)) throw std::invalid_argument("erlang_c_oracle: unstable regime, lambda must be < c * mu");
    const double load = lambda / mu;
    // Erlang-B by the stable recurrence B(k) = a B(k-1) / (k + a B(k-1)).
    double b = 1.0;
    for (int k = 1; k <= servers; ++k) b = load * b / (k + load * b);
    const double p_wait = c * b / (c - load * (1.0 - b));
    const double given_delayed = 1.0 / (c * mu - lambda);
    return {p_wait, p_wait * given_delayed, given_delayed};
}

void write_customer_csv(const SimOutput& out, const std::string& path) {
    csv::Writer w(path);
    w.line("id,arrival_time,service_start,service_duration,wait,les,hol");
    for (const auto& r : out.records) {
        w.row(r.id, r.arrival_time, r.service_start, r.service_duration, r.wait, r.les, r.hol);
    }
    w.close();
}

SimOutput read_customer_csv(const std::string& path, std::size_t warmup) {
    csv::Reader reader(path);
    reader.expect_header({"id", "arrival_time", "service_start", "service_duration", "wait", "les", "hol"});
    SimOutput out;
    std::vector<double> fields;
    while (reader.next(fields)) {
        CustomerRecord r;
        r.id = static_cast<std::size_t>(fields[0]);
        if (static_cast<double>(r.id) != fields[0] || r.id != out.records.size()) {
            throw FormatError(reader.where() + ": customer ids must be consecutive from 0");
        }
        r.arrival_time = fields[1];
        r.service_start = fields[2];
        r.service_duration = fields[3];
        r.wait = fields[4];
        r.les = fields[5];
        r.hol = fields[6];
        r.warmup = r.id < warmup;
        out.records.push_back(r);
    }
    // FCFS: service order equals arrival order.
    for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].entered_service_rank = i;
    out.arrivals = out.records.size();
    for (const auto& r : out.records) {
        if (r.service_start + r.service_duration <= out.records.back().service_start) ++out.completions;
    }
    return out;
}

}  // namespace qdelay
