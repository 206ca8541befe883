#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kramers/field.hpp"
#include "kramers/region.hpp"
#include "kramers/torus.hpp"

namespace kramers {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Tolerances {
    double newton_grad = 1e-10;       // scaled by (1 + |H| L)
    double dedup_dist = 1e-6;         // scaled by L
    double morse_ratio = 1e-8;        // min|eig| / max|eig| of the Hessian
    double grad_case_rel = 1e-6;      // case 1 vs case 2 decision, scaled by max |grad f|
    double angle = 1e-6;              // radians, xi vs n
    double ell_at_min = 1e-8;         // |ell(z)| in case 1
    double ortho_rel = 1e-10;         // |ell . grad f| <= tol * (1 + |grad f|^2)
    double divfree_rel = 1e-10;
    double boundary_det_degenerate = 1e-8;
    double small_eig_c = 0.1;         // threshold factor: c * minEig(Hess f(x0)) * h
};

struct CriticalPoint {
    Vec z;
    Mat hessian;
    int morse_index = 0;
    double grad_residual = 0;
    double f_value = 0;
};

struct MorseViolation : std::runtime_error {
    explicit MorseViolation(const std::string& where)
        : std::runtime_error("degenerate Hessian at critical point near " + where) {}
};

struct OrthoViolation : std::runtime_error {
    explicit OrthoViolation(const std::string& what) : std::runtime_error(what) {}
};

struct SaddleData {
    CriticalPoint base;
    Mat Lmat;        // Jac ell at z
    Mat M;           // Hess f(z) + Lmat^T
    double mu = 0;   // the real negative eigenvalue of M
    Vec xi;          // real unit eigenvector of M for mu
    double lambda_neg = 0;  // negative eigenvalue of Hess f(z)
};

// Eigenstructure of Hess f + Lmat^T at an index-1 critical point.  Throws
// OrthoViolation when the count of negative-real-part eigenvalues is not 1.
SaddleData saddle_data_from_matrices(const Mat& H, const Mat& Lmat);

std::vector<CriticalPoint> find_critical_points(const ScalarField& f, const Torus& torus,
                                                int grid_per_axis,
                                                const Tolerances& tol = {});

SaddleData saddle_analysis(const CriticalPoint& z, const ScalarField& f, const VectorField& ell);

struct BoundaryMinimizer {
    Vec z;
    Vec normal;
    double f_value = 0;
    int case_id = 0;  // 1: grad f != 0, 2: grad f = 0 (saddle on the boundary)
    // case 1 data
    double dn_f = 0;                  // normal derivative of f
    double det_hess_boundary = 0;     // det Hess(f restricted to the boundary)
    double ell_norm = 0;
    bool near_degenerate = false;
    // case 2 data
    std::optional<SaddleData> saddle;
    double angle = 0;  // angle between xi and the normal, mod sign
    bool normal_ok = false;
};

struct AssumptionReport {
    double ortho_residual = 0;    // max |ell . grad f| over samples
    double drift_residual = 0;    // max |b + grad f + ell|
    double divfree_residual = 0;  // max |div ell|
    int critical_in_omega = 0;
    int minima_in_omega = 0;
    bool interior_point_is_min = false;
    double f_x0 = 0;
    double f_boundary_min = 0;
    double barrier = 0;  // min_boundary f - f(x0)
    std::vector<BoundaryMinimizer> minimizers;
    std::optional<CriticalPoint> x0;

    bool ortho_ok = false;
    bool divfree_ok = false;
    bool onewell_ok = false;
    bool normal_ok = false;
    bool all_ok() const { return ortho_ok && divfree_ok && onewell_ok && normal_ok; }
    std::string first_failure() const;
};

AssumptionReport validate_assumptions(const ScalarField& f, const VectorField& ell,
                                      const Region& region,
                                      const std::vector<CriticalPoint>& crit, int samples,
                                      const Tolerances& tol = {}, std::uint64_t scan_seed = 1,
                                      int boundary_samples = 192);

struct FlowResult {
    std::vector<Vec> trajectory;  // decimated nodes, unwrapped coordinates
    bool converged = false;
    int limit_index = -1;  // into the known critical point list
    double t_end = 0;
    double f_end = 0;
};

struct FlowStepError : std::runtime_error {
    explicit FlowStepError(double t)
        : std::runtime_error("f increased beyond tolerance at t = " + std::to_string(t) +
                             "; decrease dt") {}
};

FlowResult integrate_flow(const CompiledVectorField& b, const ScalarField& f, const Vec& x0,
                          double t_max, double dt, const std::vector<CriticalPoint>& known,
                          const Torus& torus);

// True iff the flow from x0 stays in the region and converges to target.
bool basin_membership(const Region& region, const CriticalPoint& target, const Vec& x0,
                      const CompiledVectorField& b, const ScalarField& f, double t_max, double dt);

}  // namespace kramers
