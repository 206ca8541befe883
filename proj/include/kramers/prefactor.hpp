#pragma once

#include <string>
#include <vector>

#include "kramers/landscape.hpp"

namespace kramers {

struct PrefactorTerm {
    Vec z;
    int case_id = 0;
    double contribution = 0;  // the summand of the matching kappa formula
};

// Sharp small-noise rate prediction
//   lambda(h) = (kappa1 / sqrt(h) + kappa2) * exp(-2 barrier / h)
// with kappa1 collecting non-critical boundary minimizers and kappa2 the
// boundary saddles.  The L- and P-normalizations differ by a factor 2.
struct KramersPrediction {
    double barrier = 0;
    double kappa1 = 0;  // L-convention
    double kappa2 = 0;
    std::vector<PrefactorTerm> terms;

    double kappa1_P() const { return 2 * kappa1; }
    double kappa2_P() const { return 2 * kappa2; }
    double lambda(double h) const;
    double mean_exit_time(double h) const;
    // Error order of the prefactor: O(h^(1/4)) in general, O(h^(1/2)) when
    // either kappa vanishes.
    std::string validity_note() const;
};

struct AssumptionGateError : std::runtime_error {
    std::string clause;
    explicit AssumptionGateError(const std::string& cl)
        : std::runtime_error("assumption verdict failed: " + cl), clause(cl) {}
};

// Requires a passing AssumptionReport; throws AssumptionGateError otherwise.
KramersPrediction prefactors(const AssumptionReport& rep);

// 2 * (min_boundary f - f(x0)): the log-asymptotic slope of both the rate
// and the mean exit time.  Requires the One-Well verdict.
double arrhenius_exponent(const AssumptionReport& rep);

}  // namespace kramers
