#include "kramers/prefactor.hpp"

#include <cmath>
#include <numbers>

namespace kramers {

double KramersPrediction::lambda(double h) const {
    if (h <= 0) throw std::runtime_error("lambda(h) requires h > 0");
    return (kappa1 / std::sqrt(h) + kappa2) * std::exp(-2 * barrier / h);
}

double KramersPrediction::mean_exit_time(double h) const { return 1.0 / lambda(h); }

std::string KramersPrediction::validity_note() const {
    if (kappa1 == 0 || kappa2 == 0) return "relative error O(h^1/2)";
    return "relative error O(h^1/4)";
}

KramersPrediction prefactors(const AssumptionReport& rep) {
    if (!rep.all_ok()) throw AssumptionGateError(rep.first_failure());

    KramersPrediction out;
    out.barrier = rep.barrier;
    const double det_h0 = rep.x0->hessian.determinant();
    if (det_h0 <= 0)
        throw AssumptionGateError("One-Well (Hessian at the minimum is not positive definite)");
    const double root_det_h0 = std::sqrt(det_h0);

    double sum1 = 0, sum2 = 0;
    for (const auto& m : rep.minimizers) {
        PrefactorTerm term;
        term.z = m.z;
        term.case_id = m.case_id;
        if (m.case_id == 1) {
            if (m.det_hess_boundary <= 0)
                throw AssumptionGateError(
                    "Normal (boundary Hessian determinant is not positive at a "
                    "non-critical minimizer)");
            term.contribution = m.dn_f / std::sqrt(m.det_hess_boundary);
            sum1 += term.contribution;
        } else {
            const double det_hz = m.saddle->base.hessian.determinant();
            if (det_hz >= 0)
                throw AssumptionGateError("Normal (boundary saddle determinant is not negative)");
            term.contribution = 2 * std::abs(m.saddle->mu) / std::sqrt(-det_hz);
            sum2 += term.contribution;
        }
        out.terms.push_back(std::move(term));
    }
    out.kappa1 = root_det_h0 / std::sqrt(std::numbers::pi) * sum1;
    out.kappa2 = root_det_h0 / (2 * std::numbers::pi) * sum2;
    return out;
}

double arrhenius_exponent(const AssumptionReport& rep) {
    if (!rep.onewell_ok) throw AssumptionGateError("One-Well");
    return 2 * rep.barrier;
}

}  // namespace kramers
