#pragma once

#include <Eigen/Sparse>
#include <complex>
#include <iosfwd>

#include "kramers/landscape.hpp"
#include "kramers/prefactor.hpp"

namespace kramers {

enum class OperatorTag { P, PStar, ReP, L };

// Finite-difference discretization of the conjugated generator on the grid
// points of the torus that fall inside the region (sharp Dirichlet masking).
//
//   P    = -h^2 Lap + |grad f|^2 - h Lap f + 2 h ell . grad
//   P*   = symmetric part minus the drift minus 2 h div ell
//   ReP  = (P + P*)/2 = Witten part - h div ell   (exactly symmetric)
//   L    = (2h)^{-1} E P E^{-1} with E = diag(e^{f/h}); the generator form,
//          assembled by exact conjugation so its spectrum is lambda_P / (2h).
//
// The drift uses central differences with edge-averaged coefficients, which
// makes the drift matrix exactly skew-symmetric; P and P* are then exact
// transposes whenever div ell = 0.
struct GridOperator {
    OperatorTag tag = OperatorTag::P;
    int d = 0;
    int n = 0;          // grid points per axis
    double h = 0;
    double dx = 0;
    Torus torus;
    std::vector<std::int64_t> node_of_cell;  // grid cell -> interior index or -1
    std::vector<std::array<int, 3>> cells;   // interior index -> grid multi-index
    std::vector<double> fvals;               // f at interior nodes
    Eigen::SparseMatrix<double> A;

    std::size_t size() const { return cells.size(); }
    void node_coords(std::size_t k, double* x) const;
};

GridOperator assemble(const ScalarField& f, const VectorField& ell, const Region& region,
                      int n_per_axis, double h, OperatorTag tag);

struct SpectralResult {
    std::complex<double> lambda1;
    Eigen::VectorXd eigenvector;  // sign-normalized: nonnegative mean
    double residual = 0;
    int iterations = 0;
    double negativity_fraction = 0;
};

// Principal eigenvalue by inverse power iteration (sparse LU at shift 0);
// the imaginary part is estimated from a shift-invert Arnoldi run.
SpectralResult principal_eig(const GridOperator& op);

// Number of eigenvalues with real part below the threshold, from converged
// shift-invert Arnoldi Ritz values.
int small_eig_count(const GridOperator& op, double threshold);

// CSV export "i1,...,id,x1,...,xd,value".
void write_eigenvector_csv(const GridOperator& op, const Eigen::VectorXd& v, std::ostream& os);

struct ConcentrationReport {
    double l2_distance = 0;       // || v - u_eta ||_2, both unit vectors
    double exterior_mass_ratio = 0;
    double eta = 0;
};

// Distance of the principal eigenvector to the normalized cut-off Gibbs
// profile on the sublevel component of x0.
ConcentrationReport eigenfunction_concentration(const GridOperator& op, const Eigen::VectorXd& v,
                                                double eta, double f_boundary_min, const Vec& x0);

struct QuasimodeParams {
    int n_per_axis = 192;
    double delta1 = 0;         // collar depth; default 0.1 L
    double blend_scale = 0;    // tangential blending scale; default 0.1 L
};

struct QuasimodeReport {
    double e1 = 0;
    double e1_predicted = 0;   // (kappa1_P sqrt(h) + kappa2_P h) exp(-2 barrier / h)
    double e2_ratio = 0;       // ||P f1||^2 / <P f1, f1>
    double e3 = 0;             // ||P* f1||^2
    double e3_predicted_scale = 0;
    double strip_min_above_x0 = 0;  // min of f - f(x0) on the support of grad phi
};

// Rayleigh diagnostics of the boundary-collar quasi-mode phi e^{-f/h}/Z.
QuasimodeReport quasimode_rayleigh(const ScalarField& f, const VectorField& ell,
                                   const Region& region, double h,
                                   const KramersPrediction& pred,
                                   const AssumptionReport& assumptions,
                                   const QuasimodeParams& params = {});

}  // namespace kramers
