#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdelay/arrivals.hpp"
#include "qdelay/service.hpp"

namespace qdelay {

struct SimConfig {
    int servers = 20;
    /// Total customers to generate, warmup included. Zero means unbounded
    /// (then `max_time` must be set).
    std::size_t customers = 0;
    /// Stop generating arrivals after this time. Zero means unbounded.
    double max_time = 0.0;
    std::size_t warmup = 10000;
    ArrivalProcess arrival = HomogeneousPoisson{19.0};
    ServiceDistribution service = Exponential{1.0};
    std::uint64_t seed = 1;
};

void validate(const SimConfig& cfg);

/// One simulated customer.
struct CustomerRecord {
    std::size_t id = 0;
    double arrival_time = 0.0;
    double service_start = 0.0;
    double service_duration = 0.0;
    double wait = 0.0;
    /// Wait of the last customer to enter service strictly before this
    /// arrival; -1 when nobody has entered service yet.
    double les = -1.0;
    /// Elapsed wait of the head of the queue at this arrival; 0 when empty.
    double hol = 0.0;
    std::size_t entered_service_rank = 0;
    bool warmup = false;
};

struct SimOutput {
    std::vector<CustomerRecord> records;  // ordered by arrival
    std::size_t arrivals = 0;
    std::size_t completions = 0;
};

/// Generates arrival instants and service durations from the configured laws
/// and runs the event engine on them.
SimOutput run(const SimConfig& cfg);

/// Event-driven FCFS c-server engine over a fixed trace. Arrival times must be
/// nondecreasing; the i-th customer receives service_durations[i].
SimOutput simulate_trace(int servers, std::span<const double> arrival_times, std::span<const double> service_durations,
                         std::size_t warmup = 0);

struct ErlangC {
    double p_wait = 0.0;
    double mean_wait = 0.0;
    double mean_wait_given_delayed = 0.0;
};

/// Steady-state M/M/c delay quantities. Requires lambda < c * mu.
ErlangC erlang_c_oracle(int servers, double lambda, double mu);

/// Customer CSV: id,arrival_time,service_start,service_duration,wait,les,hol
void write_customer_csv(const SimOutput& out, const std::string& path);

/// Reads a customer CSV. Records with id < warmup are flagged as warmup.
SimOutput read_customer_csv(const std::string& path, std::size_t warmup);

}  // namespace qdelay
