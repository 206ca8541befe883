#include "kramers/spectral.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace kramers {

namespace {

std::size_t cell_count(int d, int n) {
    std::size_t t = 1;
    for (int i = 0; i < d; ++i) t *= static_cast<std::size_t>(n);
    return t;
}

std::size_t cell_index(const int* idx, int d, int n) {
    std::size_t c = 0;
    for (int i = d - 1; i >= 0; --i) c = c * static_cast<std::size_t>(n) + static_cast<std::size_t>(idx[i]);
    return c;
}

}  // namespace

void GridOperator::node_coords(std::size_t k, double* x) const {
    for (int i = 0; i < d; ++i) x[i] = dx * cells[k][static_cast<std::size_t>(i)];
}

GridOperator assemble(const ScalarField& f, const VectorField& ell, const Region& region,
                      int n_per_axis, double h, OperatorTag tag) {
    const int d = f.dimension();
    if (d > 3) throw std::runtime_error("assemble: grids support d <= 3");
    if (n_per_axis < 16) throw std::runtime_error("assemble: n_per_axis must be >= 16");

    GridOperator op;
    op.tag = tag;
    op.d = d;
    op.n = n_per_axis;
    op.h = h;
    op.torus = region.torus();
    op.dx = op.torus.L / n_per_axis;

    const std::size_t total = cell_count(d, n_per_axis);
    op.node_of_cell.assign(total, -1);

    // Interior nodes: grid points with g < 0, in lexicographic order.
    int idx[3] = {0, 0, 0};
    double x[kMaxDim];
    for (std::size_t c = 0; c < total; ++c) {
        std::size_t rem = c;
        for (int i = 0; i < d; ++i) {
            idx[i] = static_cast<int>(rem % static_cast<std::size_t>(n_per_axis));
            rem /= static_cast<std::size_t>(n_per_axis);
        }
        for (int i = 0; i < d; ++i) x[i] = op.dx * idx[i];
        if (region.contains(x)) {
            op.node_of_cell[c] = static_cast<std::int64_t>(op.cells.size());
            op.cells.push_back({idx[0], idx[1], idx[2]});
        }
    }
    if (op.cells.empty()) throw std::runtime_error("assemble: the region contains no grid node");

    const auto na = static_cast<Eigen::Index>(op.cells.size());
    op.fvals.resize(op.cells.size());

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(op.cells.size() * static_cast<std::size_t>(2 * d + 1));

    const double inv_dx2 = 1.0 / (op.dx * op.dx);
    const double inv_2dx = 1.0 / (2 * op.dx);
    const double drift_sign = tag == OperatorTag::PStar ? -1.0 : 1.0;

    std::vector<double> ell_vals;  // d components per interior node
    if (!ell.is_zero()) ell_vals.resize(op.cells.size() * static_cast<std::size_t>(d));

    double lv[kMaxDim];
    for (std::size_t k = 0; k < op.cells.size(); ++k) {
        op.node_coords(k, x);
        op.fvals[k] = f.value(x);
        if (!ell.is_zero()) {
            ell.value(x, lv);
            for (int i = 0; i < d; ++i) ell_vals[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = lv[i];
        }
    }

    // Witten part in detailed-balance form: off-diagonals -h^2/dx^2, the
    // diagonal collects exp((f_i - f_j)/h) edge weights over all 2d
    // neighbors (masked ones included: they act as killing terms).  This is
    // the exponentially fitted version of -h^2 Lap + |grad f|^2 - h Lap f:
    // same stencil and second-order consistency, but positive semidefinite
    // edge by edge and with e^{-f/h} as the exact kernel of the unmasked
    // operator, so the exponentially small Dirichlet eigenvalues are not
    // buried under truncation error.
    for (std::size_t k = 0; k < op.cells.size(); ++k) {
        op.node_coords(k, x);
        double diag = 0;
        for (int axis = 0; axis < d; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                int nb[3] = {op.cells[k][0], op.cells[k][1], op.cells[k][2]};
                nb[axis] = (nb[axis] + dir + op.n) % op.n;
                double xnb[kMaxDim];
                for (int i = 0; i < d; ++i) xnb[i] = op.dx * nb[i];
                const double fnb = f.value(xnb);
                diag += h * h * inv_dx2 * std::exp((op.fvals[k] - fnb) / h);

                const std::int64_t j = op.node_of_cell[cell_index(nb, d, op.n)];
                if (j < 0) continue;  // Dirichlet neighbor
                double val = -h * h * inv_dx2;
                if (!ell.is_zero() && tag != OperatorTag::ReP) {
                    const double la = ell_vals[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(axis)];
                    const double lb = ell_vals[static_cast<std::size_t>(j) * static_cast<std::size_t>(d) +
                                               static_cast<std::size_t>(axis)];
                    // Edge-averaged coefficient keeps the drift matrix skew.
                    val += drift_sign * dir * 2 * h * 0.5 * (la + lb) * inv_2dx;
                }
                trip.emplace_back(static_cast<int>(k), static_cast<int>(j), val);
            }
        }
        if ((tag == OperatorTag::PStar || tag == OperatorTag::ReP) && !ell.is_zero()) {
            const double divl = ell.divergence(x);
            diag += (tag == OperatorTag::PStar ? -2.0 : -1.0) * h * divl;
        }
        trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
    }

    op.A.resize(na, na);
    op.A.setFromTriplets(trip.begin(), trip.end());

    if (tag == OperatorTag::L) {
        // Exact conjugation of the assembled P matrix: entries pick up
        // e^{(f_i - f_j)/h} / (2h); the spectrum becomes lambda_P / (2h).
        for (int col = 0; col < op.A.outerSize(); ++col) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(op.A, col); it; ++it) {
                const double fi = op.fvals[static_cast<std::size_t>(it.row())];
                const double fj = op.fvals[static_cast<std::size_t>(it.col())];
                it.valueRef() *= std::exp((fi - fj) / h) / (2 * h);
            }
        }
    }
    op.A.makeCompressed();
    return op;
}

namespace {

struct ArnoldiResult {
    std::vector<std::complex<double>> ritz;       // eigenvalue estimates of A
    std::vector<double> residuals;                // shift-invert residual per pair
};

// Shift-invert Arnoldi at shift 0 with full orthogonalization.
ArnoldiResult arnoldi_smallest(const Eigen::SparseMatrix<double>& A,
                               const Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu, int m) {
    const Eigen::Index n = A.rows();
    m = std::min<int>(m, static_cast<int>(n));
    Eigen::MatrixXd V(n, m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    V.col(0) = Eigen::VectorXd::Ones(n).normalized();
    int steps = m;
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd w = lu.solve(V.col(j));
        for (int i = 0; i <= j; ++i) {
            H(i, j) = V.col(i).dot(w);
            w -= H(i, j) * V.col(i);
        }
        // One re-orthogonalization pass.
        for (int i = 0; i <= j; ++i) {
            const double corr = V.col(i).dot(w);
            H(i, j) += corr;
            w -= corr * V.col(i);
        }
        H(j + 1, j) = w.norm();
        if (H(j + 1, j) < 1e-14) {
            steps = j + 1;
            break;
        }
        V.col(j + 1) = w / H(j + 1, j);
    }

    Eigen::MatrixXd Hm = H.topLeftCorner(steps, steps);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Hm);
    ArnoldiResult out;
    const double hlast = steps < m ? 0.0 : H(steps, steps - 1);
    for (int i = 0; i < steps; ++i) {
        const std::complex<double> mu = es.eigenvalues()[i];
        if (std::abs(mu) < 1e-300) continue;
        out.ritz.push_back(1.0 / mu);
        const std::complex<double> ylast = es.eigenvectors()(steps - 1, i);
        out.residuals.push_back(std::abs(hlast * ylast) / std::abs(mu));
    }
    return out;
}

}  // namespace

SpectralResult principal_eig(const GridOperator& op) {
    const Eigen::Index n = op.A.rows();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(op.A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("principal_eig: sparse factorization failed");

    // Relative residuals bottom out at eps * |A| / |lambda|; exponentially
    // small eigenvalues cannot reach 1e-10 in double precision.
    double anorm = 0;
    for (int c = 0; c < op.A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator entry(op.A, c); entry; ++entry)
            anorm = std::max(anorm, std::abs(entry.value()));

    Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
    double lambda = 0, lambda_prev = 0, resid = 1e300;
    int it = 0;
    for (; it < 10000; ++it) {
        Eigen::VectorXd w = lu.solve(v);
        v = w.normalized();
        const Eigen::VectorXd av = op.A * v;
        lambda = v.dot(av);
        resid = (av - lambda * v).norm() / std::abs(lambda);
        const double eps_rel = 2.2e-16 * anorm / std::abs(lambda);
        if (it > 0 &&
            std::abs(lambda - lambda_prev) <= std::max(1e-12, 10 * eps_rel) * std::abs(lambda) &&
            resid <= std::max(1e-10, 200 * eps_rel))
            break;
        lambda_prev = lambda;
    }
    if (it >= 10000) throw std::runtime_error("principal_eig: no convergence in 10^4 iterations");

    SpectralResult res;
    res.iterations = it + 1;
    if (v.sum() < 0) v = -v;
    res.eigenvector = v;
    res.residual = resid;
    res.negativity_fraction =
        static_cast<double>((v.array() < 0).count()) / static_cast<double>(n);

    // Imaginary part estimate via a short shift-invert Arnoldi run.
    double im = 0;
    const auto ar = arnoldi_smallest(op.A, lu, std::min<int>(25, static_cast<int>(n)));
    double best = 1e300;
    for (std::size_t i = 0; i < ar.ritz.size(); ++i) {
        const double gap = std::abs(ar.ritz[i] - std::complex<double>(lambda, 0.0));
        if (gap < best) {
            best = gap;
            im = ar.ritz[i].imag();
        }
    }
    res.lambda1 = {lambda, im};
    return res;
}

int small_eig_count(const GridOperator& op, double threshold) {
    if (threshold <= 0) throw std::runtime_error("small_eig_count: threshold must be positive");
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(op.A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("small_eig_count: sparse factorization failed");
    const auto ar = arnoldi_smallest(op.A, lu, std::min<int>(40, static_cast<int>(op.A.rows())));
    int count = 0;
    for (std::size_t i = 0; i < ar.ritz.size(); ++i) {
        if (ar.ritz[i].real() >= threshold) continue;
        if (ar.residuals[i] <= 1e-8) ++count;
    }
    return count;
}

void write_eigenvector_csv(const GridOperator& op, const Eigen::VectorXd& v, std::ostream& os) {
    auto fmt = [](double val) {
        char buf[40];
        auto r = std::to_chars(buf, buf + sizeof(buf), val);
        return std::string(buf, r.ptr);
    };
    for (int i = 1; i <= op.d; ++i) os << "i" << i << ',';
    for (int i = 1; i <= op.d; ++i) os << 'x' << i << ',';
    os << "value\n";
    double x[kMaxDim];
    for (std::size_t k = 0; k < op.size(); ++k) {
        op.node_coords(k, x);
        for (int i = 0; i < op.d; ++i) os << op.cells[k][static_cast<std::size_t>(i)] << ',';
        for (int i = 0; i < op.d; ++i) os << fmt(x[i]) << ',';
        os << fmt(v[static_cast<Eigen::Index>(k)]) << '\n';
    }
}

namespace {

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (10 + t * (-15 + 6 * t));
}

// Flood fill of {f < level} grid components from a trusted seed node.
std::vector<char> sublevel_component(const GridOperator& op, double level, std::size_t seed_node) {
    std::vector<char> in(op.size(), 0);
    if (op.fvals[seed_node] >= level) return in;
    std::vector<std::size_t> stack{seed_node};
    in[seed_node] = 1;
    while (!stack.empty()) {
        const std::size_t k = stack.back();
        stack.pop_back();
        for (int axis = 0; axis < op.d; ++axis) {
            for (int dir = -1; dir <= 1; dir += 2) {
                int nb[3] = {op.cells[k][0], op.cells[k][1], op.cells[k][2]};
                nb[axis] = (nb[axis] + dir + op.n) % op.n;
                const std::int64_t j = op.node_of_cell[cell_index(nb, op.d, op.n)];
                if (j < 0 || in[static_cast<std::size_t>(j)]) continue;
                if (op.fvals[static_cast<std::size_t>(j)] < level) {
                    in[static_cast<std::size_t>(j)] = 1;
                    stack.push_back(static_cast<std::size_t>(j));
                }
            }
        }
    }
    return in;
}

std::size_t nearest_node(const GridOperator& op, const Vec& x0) {
    double best = 1e300;
    std::size_t arg = 0;
    double x[kMaxDim];
    for (std::size_t k = 0; k < op.size(); ++k) {
        op.node_coords(k, x);
        const double dist = op.torus.distance2(x, x0.data());
        if (dist < best) {
            best = dist;
            arg = k;
        }
    }
    return arg;
}

}  // namespace

ConcentrationReport eigenfunction_concentration(const GridOperator& op, const Eigen::VectorXd& v,
                                                double eta, double f_boundary_min,
                                                const Vec& x0) {
    ConcentrationReport rep;
    rep.eta = eta;
    const std::size_t seed = nearest_node(op, x0);
    const double level_full = f_boundary_min - eta;     // chi = 1 below
    const double level_zero = f_boundary_min - eta / 2; // chi = 0 above
    if (op.fvals[seed] >= level_full)
        throw std::runtime_error("eigenfunction_concentration: sublevel set is empty on the grid");

    const auto comp = sublevel_component(op, level_zero, seed);
    Eigen::VectorXd u(static_cast<Eigen::Index>(op.size()));
    for (std::size_t k = 0; k < op.size(); ++k) {
        if (!comp[k]) {
            u[static_cast<Eigen::Index>(k)] = 0;
            continue;
        }
        const double chi = smoothstep((level_zero - op.fvals[k]) / (eta / 2));
        u[static_cast<Eigen::Index>(k)] = chi * std::exp(-(op.fvals[k] - op.fvals[seed]) / op.h);
    }
    u.normalize();

    Eigen::VectorXd vn = v.normalized();
    if (vn.dot(u) < 0) vn = -vn;
    rep.l2_distance = (vn - u).norm();

    // Mass ratio outside the closed sublevel set C(eta).
    const auto c_eta = sublevel_component(op, level_full, seed);
    double inside = 0, outside = 0;
    for (std::size_t k = 0; k < op.size(); ++k) {
        const double w = vn[static_cast<Eigen::Index>(k)] *
                         std::exp(-(op.fvals[k] - op.fvals[seed]) / op.h);
        if (c_eta[k]) inside += w;
        else outside += w;
    }
    rep.exterior_mass_ratio = outside / (inside + outside);
    return rep;
}

QuasimodeReport quasimode_rayleigh(const ScalarField& f, const VectorField& ell,
                                   const Region& region, double h,
                                   const KramersPrediction& pred,
                                   const AssumptionReport& assumptions,
                                   const QuasimodeParams& params) {
    if (!assumptions.normal_ok)
        throw AssumptionGateError("Normal (required by the quasi-mode construction)");
    const int d = f.dimension();
    const double L = region.torus().L;
    const double delta1 = params.delta1 > 0 ? params.delta1 : 0.1 * L;
    const double blend = params.blend_scale > 0 ? params.blend_scale : 0.1 * L;

    // Per-minimizer ramp profiles Phi(v_d) on [-2 delta1, 0]:
    //   case 1: weight exp(2 mu t / h) with mu = dn_f(z) > 0,
    //   case 2: weight exp(-|mu| t^2 / h), mu the negative drift eigenvalue;
    // chi is 1 on [-delta1/2, 0] and vanishes below -delta1.
    const int table_n = 2048;
    const auto& mins = assumptions.minimizers;
    std::vector<std::vector<double>> profile(mins.size());
    const double tstep = 2 * delta1 / table_n;
    for (std::size_t mz = 0; mz < mins.size(); ++mz) {
        const auto& m = mins[mz];
        auto weight = [&](double t) {
            const double chi =
                t >= -delta1 / 2 ? 1.0 : smoothstep((t + delta1) / (delta1 / 2));
            if (m.case_id == 1) return chi * std::exp(2 * m.dn_f * t / h);
            return chi * std::exp(-std::abs(m.saddle->mu) * t * t / h);
        };
        std::vector<double> cum(table_n + 1, 0.0);
        for (int i = 1; i <= table_n; ++i) {
            const double t1 = -2 * delta1 + (i - 1) * tstep;
            const double t2 = t1 + tstep;
            cum[static_cast<std::size_t>(i)] =
                cum[static_cast<std::size_t>(i - 1)] + 0.5 * (weight(t1) + weight(t2)) * tstep;
        }
        const double total = cum.back();
        // Phi(v_d) = integral from v_d to 0 over the full integral.
        auto& tab = profile[mz];
        tab.resize(table_n + 1);
        for (int i = 0; i <= table_n; ++i)
            tab[static_cast<std::size_t>(i)] = (total - cum[static_cast<std::size_t>(i)]) / total;
    }
    auto profile_at = [&](std::size_t mz, double vd) {
        if (vd <= -2 * delta1) return 1.0;
        if (vd >= 0) return 0.0;
        const double s = (vd + 2 * delta1) / tstep;
        const auto i = static_cast<std::size_t>(s);
        const double frac = s - static_cast<double>(i);
        const auto& tab = profile[mz];
        if (i + 1 >= tab.size()) return tab.back();
        return tab[i] * (1 - frac) + tab[i + 1] * frac;
    };

    const GridOperator P = assemble(f, ell, region, params.n_per_axis, h, OperatorTag::P);
    const GridOperator Pstar = assemble(f, ell, region, params.n_per_axis, h, OperatorTag::PStar);

    // Collar quasi-mode: phi depends on the signed boundary coordinate
    // v_d = g/|grad g| and rises from 0 on the boundary to 1 at depth
    // delta1; near each boundary minimizer it is the matching local profile,
    // blended tangentially.
    const std::size_t na = P.size();
    Eigen::VectorXd phi(static_cast<Eigen::Index>(na));
    double x[kMaxDim], gg[kMaxDim];
    const double f0 = assumptions.f_x0;
    double strip_min = 1e300;
    for (std::size_t k = 0; k < na; ++k) {
        P.node_coords(k, x);
        const double g = region.gval(x);
        double val = 1.0;
        // Quick depth bound: |v_d| >= |g| / max|grad g|.
        if (-g < 2 * delta1 * region.grad_bound()) {
            region.ggrad(x, gg);
            double gn = 0;
            for (int i = 0; i < d; ++i) gn += gg[i] * gg[i];
            gn = std::sqrt(gn);
            const double vd = g / std::max(gn, 1e-14);
            if (vd > -2 * delta1) {
                double wsum = 0, psum = 0;
                for (std::size_t mz = 0; mz < mins.size(); ++mz) {
                    const double dist = region.torus().distance(x, mins[mz].z.data());
                    const double w = std::exp(-(dist * dist) / (blend * blend));
                    wsum += w;
                    psum += w * profile_at(mz, vd);
                }
                if (wsum > 1e-280) {
                    val = psum / wsum;
                } else {
                    // Far from every minimizer: use the first profile shape
                    // (identical ramps up to the mu constant).
                    val = profile_at(0, vd);
                }
                if (val > 1e-12 && val < 1 - 1e-12)
                    strip_min = std::min(strip_min, P.fvals[k] - f0);
            }
        }
        phi[static_cast<Eigen::Index>(k)] = val;
    }

    // f1 = phi e^{-f/h}, normalized on the grid.
    Eigen::VectorXd v(static_cast<Eigen::Index>(na));
    for (std::size_t k = 0; k < na; ++k)
        v[static_cast<Eigen::Index>(k)] =
            phi[static_cast<Eigen::Index>(k)] * std::exp(-(P.fvals[k] - f0) / h);
    const double nrm = v.norm();
    if (nrm == 0) throw std::runtime_error("quasimode_rayleigh: profile support escapes the region");
    v /= nrm;

    // The deep region must exist (the collar fits inside the region).
    if (phi.maxCoeff() < 1 - 1e-9)
        throw std::runtime_error("quasimode_rayleigh: profile support escapes the region");

    QuasimodeReport rep;
    const Eigen::VectorXd Av = P.A * v;
    const Eigen::VectorXd Asv = Pstar.A * v;
    rep.e1 = v.dot(Av);
    rep.e1_predicted = (pred.kappa1_P() * std::sqrt(h) + pred.kappa2_P() * h) *
                       std::exp(-2 * pred.barrier / h);
    rep.e2_ratio = Av.squaredNorm() / rep.e1;
    rep.e3 = Asv.squaredNorm();
    rep.e3_predicted_scale = rep.e1 * h;
    rep.strip_min_above_x0 = strip_min;
    return rep;
}

}  // namespace kramers
