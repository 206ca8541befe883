#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <vector>

#include "kramers/field.hpp"
#include "kramers/landscape.hpp"
#include "kramers/region.hpp"

namespace kramers {

// Discrete path with uniform time step T/N.  Node coordinates are stored
// unwrapped (consecutive increments are min-image), which keeps the action
// differentiable across the periodic seam.
struct ActionPath {
    std::vector<Vec> nodes;
    double T = 1;
    double dt() const { return T / static_cast<double>(nodes.size() - 1); }
};

struct ActionValue {
    double value = 0;
    std::vector<double> per_segment;
};

// Midpoint quadrature of (1/2) int |phi' - b(phi)|^2 dt.
ActionValue action(const ActionPath& path, const CompiledVectorField& b);

struct MamOptions {
    int max_iterations = 10000;
    double grad_tol = 1e-8;
    double penalty_weight = 1e6;  // applied to max(g, 0)^2 at interior nodes
    double flow_dt = 1e-3;
    double flow_t_max = 60.0;
};

struct MamResult {
    double value = 0;  // quasi-potential estimate
    ActionPath path;
    double grad_norm = 0;
    int iterations = 0;
    double T = 0;
    bool monotone = true;  // line search never increased the objective
};

// Local minimization of the discrete action over interior nodes for each T
// in the grid, from the straight-segment initializer and from flow-based
// (heteroclinic) initializers; returns the best result.
MamResult minimize_action(const Vec& x, const Vec& y, const CompiledVectorField& b,
                          const CompiledVectorField& ascent, const Region* constraint,
                          int n_segments, const std::vector<double>& t_grid,
                          const MamOptions& opts = {});

// CSV export "k,t,x1,...,xd".
void write_path_csv(const ActionPath& path, const Torus& torus, std::ostream& os);

struct WGraphResult {
    double bound = 0;
    std::vector<int> targets;  // per stable index: arrow target (p_s = boundary)
};

// Minimum over boundary-rooted arrow graphs of the summed quasi-potential:
// every stable node carries exactly one outgoing arrow, no cycles.  V is
// (p_s+1) x (p_s+1); index p_s is the boundary node.
WGraphResult wgraph_bound(int p_s, const Eigen::MatrixXd& V);

}  // namespace kramers
