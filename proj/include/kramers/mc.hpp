#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "kramers/field.hpp"
#include "kramers/landscape.hpp"
#include "kramers/region.hpp"

namespace kramers {

struct SimConfig {
    double h = 0.4;
    double dt = 5e-4;
    std::uint64_t max_steps = 10'000'000;
    std::uint64_t seed = 1;
    int n_paths = 1000;
    std::vector<Vec> starts;          // cycled over path index
    int threads = 0;                  // 0: hardware concurrency
    std::uint32_t stream_context = 0; // folded into the per-path stream key
};

struct PathRecord {
    double tau = 0;
    Point exit_pos{};
    std::uint64_t steps = 0;
    bool censored = false;
    bool poisoned = false;  // non-finite drift encountered
};

struct ExitSummary {
    double mean = 0;
    double variance = 0;
    double std_error = 0;
    int n_uncensored = 0;
    double censor_fraction = 0;
    bool reliable = true;  // censoring fraction <= 1%
};

struct ExitSampleSet {
    SimConfig config;
    int dimension = 0;
    std::vector<PathRecord> records;
    ExitSummary summary;
};

// Euler-Maruyama exit sampling from the region.  Paths are keyed by index
// into counter-based streams, so the result is bitwise independent of the
// worker count.
ExitSampleSet sample_exits(const CompiledVectorField& b, const Region& region,
                           const SimConfig& cfg);

// CSV export: "path,tau,exit_x1,...,exit_xd,steps,censored".
void write_csv(const ExitSampleSet& set, std::ostream& os);

struct CommittorResult {
    double estimate = 0;
    double lo = 0;  // Wilson 95% interval
    double hi = 0;
    int n_paths = 0;
};

// Probability of reaching the ball B(center, radius) before leaving the
// region.  Starts inside B count as immediate hits.
CommittorResult committor(const CompiledVectorField& b, const Region& region, const Vec& center,
                          double radius, const SimConfig& cfg);

struct KsResult {
    double statistic = 0;
    double p_value = 0;
    bool pass95 = false;
    int n = 0;
};

// Kolmogorov-Smirnov test of rate * tau against the unit exponential law.
KsResult exit_law_test(const ExitSampleSet& samples, double rate);

struct ArrheniusFit {
    double slope = 0;      // estimate of twice the barrier
    double intercept = 0;  // log prefactor
};

// Least squares of ln(mean) against 1/h; needs >= 3 distinct h.
ArrheniusFit arrhenius_fit(const std::vector<std::pair<double, double>>& h_and_mean);

struct LevelingResult {
    double max_spread = 0;       // max |mean_i / mean_0 - 1|
    double noise_bound = 0;      // 3 combined standard errors, relative
    bool within_noise = false;
    std::vector<double> means;
    std::vector<double> std_errors;
};

LevelingResult leveling_check(const CompiledVectorField& b, const Region& region,
                              const ScalarField& f, const CriticalPoint& x0,
                              const SimConfig& cfg, const std::vector<Vec>& starts);

}  // namespace kramers
