#include "kramers/action.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <ostream>

namespace kramers {

namespace {

// Objective = midpoint action + penalty keeping interior nodes in the
// closed region; gradient with respect to the interior nodes.
struct Objective {
    const CompiledVectorField* b;
    const Region* constraint;
    double penalty;
    int d;
    mutable TapeRunner value_run;
    mutable TapeRunner jac_run;

    Objective(const CompiledVectorField* field, const Region* region, double pen, int dim)
        : b(field), constraint(region), penalty(pen), d(dim),
          value_run(field->tape()), jac_run(field->jacobian_tape()) {}

    double eval(const ActionPath& path, Eigen::VectorXd* grad) const {
        const auto n_nodes = path.nodes.size();
        const auto n_seg = n_nodes - 1;
        const double dt = path.dt();
        if (grad) grad->setZero();

        double total = 0;
        double bv[kMaxDim], jb[kMaxDim * kMaxDim];
        std::vector<Vec> residual(n_seg);  // v_k - b(midpoint_k)
        for (std::size_t k = 0; k < n_seg; ++k) {
            Vec mid = 0.5 * (path.nodes[k] + path.nodes[k + 1]);
            value_run(mid.data(), bv);
            Vec r = (path.nodes[k + 1] - path.nodes[k]) / dt;
            for (int i = 0; i < d; ++i) r[i] -= bv[i];
            residual[k] = r;
            total += 0.5 * dt * r.squaredNorm();
        }
        if (grad) {
            for (std::size_t j = 1; j < n_nodes - 1; ++j) {
                Vec g = residual[j - 1] - residual[j];
                // Jacobian terms from the midpoints adjacent to node j.
                for (int side = 0; side < 2; ++side) {
                    const std::size_t k = j - 1 + static_cast<std::size_t>(side);
                    Vec mid = 0.5 * (path.nodes[k] + path.nodes[k + 1]);
                    jac_run(mid.data(), jb);
                    for (int i = 0; i < d; ++i) {
                        double acc = 0;
                        for (int m = 0; m < d; ++m) acc += jb[m * d + i] * residual[k][m];
                        g[i] -= 0.5 * dt * acc;
                    }
                }
                grad->segment(static_cast<Eigen::Index>((j - 1) * static_cast<std::size_t>(d)), d) = g;
            }
        }
        if (constraint) {
            double gg[kMaxDim];
            for (std::size_t j = 1; j < n_nodes - 1; ++j) {
                const double gv = constraint->gval(path.nodes[j].data());
                if (gv > 0) {
                    total += penalty * gv * gv;
                    if (grad) {
                        constraint->ggrad(path.nodes[j].data(), gg);
                        for (int i = 0; i < d; ++i)
                            (*grad)[static_cast<Eigen::Index>((j - 1) * static_cast<std::size_t>(d)) + i] +=
                                2 * penalty * gv * gg[i];
                    }
                }
            }
        }
        return total;
    }
};

void pack(const ActionPath& path, Eigen::VectorXd& x) {
    const int d = static_cast<int>(path.nodes.front().size());
    for (std::size_t j = 1; j + 1 < path.nodes.size(); ++j)
        x.segment(static_cast<Eigen::Index>((j - 1) * static_cast<std::size_t>(d)), d) = path.nodes[j];
}

void unpack(const Eigen::VectorXd& x, ActionPath& path) {
    const int d = static_cast<int>(path.nodes.front().size());
    for (std::size_t j = 1; j + 1 < path.nodes.size(); ++j)
        path.nodes[j] = x.segment(static_cast<Eigen::Index>((j - 1) * static_cast<std::size_t>(d)), d);
}

// Resample a polyline to n_segments+1 nodes, uniform in arclength.
std::vector<Vec> resample(const std::vector<Vec>& raw, int n_segments) {
    std::vector<double> s(raw.size(), 0.0);
    for (std::size_t i = 1; i < raw.size(); ++i) s[i] = s[i - 1] + (raw[i] - raw[i - 1]).norm();
    const double total = s.back();
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(n_segments) + 1);
    std::size_t seg = 0;
    for (int k = 0; k <= n_segments; ++k) {
        const double target = total * k / n_segments;
        while (seg + 1 < raw.size() - 1 && s[seg + 1] < target) ++seg;
        const double span = s[seg + 1] - s[seg];
        const double w = span > 0 ? (target - s[seg]) / span : 0.0;
        out.push_back((1 - w) * raw[seg] + w * raw[seg + 1]);
    }
    return out;
}

// Integrate a flow from x toward y; returns the polyline truncated at the
// closest approach to y (unwrapped coordinates starting at x).
std::vector<Vec> flow_polyline(const CompiledVectorField& field, const Vec& x, const Vec& y,
                               const Torus& torus, double dt, double t_max,
                               bool backward = false) {
    const int d = static_cast<int>(x.size());
    Vec pos = x;
    // Work with the min-image target relative to the running position.
    std::vector<Vec> traj{pos};
    double best = 1e300;
    std::size_t best_idx = 0;
    double k1[kMaxDim], k2[kMaxDim], k3[kMaxDim], k4[kMaxDim], xt[kMaxDim];
    const auto steps = static_cast<long long>(t_max / dt);
    if (backward) dt = -dt;
    for (long long s = 0; s < steps; ++s) {
        field.value(pos.data(), k1);
        for (int i = 0; i < d; ++i) xt[i] = pos[i] + 0.5 * dt * k1[i];
        field.value(xt, k2);
        for (int i = 0; i < d; ++i) xt[i] = pos[i] + 0.5 * dt * k2[i];
        field.value(xt, k3);
        for (int i = 0; i < d; ++i) xt[i] = pos[i] + dt * k3[i];
        field.value(xt, k4);
        for (int i = 0; i < d; ++i) pos[i] += dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        traj.push_back(pos);
        double dist = 0;
        for (int i = 0; i < d; ++i) {
            const double dv = torus.min_image1(pos[i] - y[i]);
            dist += dv * dv;
        }
        if (dist < best) {
            best = dist;
            best_idx = traj.size() - 1;
            if (best < 1e-10) break;
        }
    }
    traj.resize(best_idx + 1);
    return traj;
}

ActionPath make_path(std::vector<Vec> nodes, double T) {
    ActionPath p;
    p.nodes = std::move(nodes);
    p.T = T;
    return p;
}

// L-BFGS with Armijo backtracking over the interior nodes.
MamResult optimize(ActionPath path, const Objective& obj, const MamOptions& opts) {
    const int d = static_cast<int>(path.nodes.front().size());
    const auto n_free = static_cast<Eigen::Index>((path.nodes.size() - 2) * static_cast<std::size_t>(d));
    Eigen::VectorXd x(n_free), grad(n_free), x_new(n_free), grad_new(n_free);
    pack(path, x);
    double fx = obj.eval(path, &grad);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    const int mem = 8;

    MamResult res;
    res.monotone = true;
    int it = 0;
    int stalled = 0;
    for (; it < opts.max_iterations; ++it) {
        if (grad.norm() <= opts.grad_tol) break;
        if (stalled >= 40) break;  // value converged beyond double precision

        // Two-loop recursion.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[static_cast<std::size_t>(i)] =
                rho_hist[static_cast<std::size_t>(i)] * s_hist[static_cast<std::size_t>(i)].dot(q);
            q -= alpha[static_cast<std::size_t>(i)] * y_hist[static_cast<std::size_t>(i)];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        if (dir.dot(grad) >= 0) dir = -grad;

        // Armijo backtracking keeps the objective non-increasing.
        double step = 1.0;
        const double slope = dir.dot(grad);
        bool accepted = false;
        double f_new = fx;
        for (int bt = 0; bt < 50; ++bt) {
            x_new = x + step * dir;
            unpack(x_new, path);
            f_new = obj.eval(path, nullptr);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        if (f_new > fx) res.monotone = false;
        if (fx - f_new <= 1e-10 * (1 + std::abs(fx))) ++stalled;
        else stalled = 0;

        unpack(x_new, path);
        obj.eval(path, &grad_new);
        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd yv = grad_new - grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > mem) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x.swap(x_new);
        grad.swap(grad_new);
        fx = f_new;
    }
    unpack(x, path);
    res.value = fx;
    res.path = std::move(path);
    res.grad_norm = grad.norm();
    res.iterations = it;
    res.T = res.path.T;
    return res;
}

}  // namespace

ActionValue action(const ActionPath& path, const CompiledVectorField& b) {
    if (path.nodes.size() < 3) throw std::runtime_error("action: need at least 2 segments");
    const int d = static_cast<int>(path.nodes.front().size());
    const double dt = path.dt();
    ActionValue out;
    double bv[kMaxDim];
    for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) {
        Vec mid = 0.5 * (path.nodes[k] + path.nodes[k + 1]);
        b.value(mid.data(), bv);
        double r2 = 0;
        for (int i = 0; i < d; ++i) {
            const double r = (path.nodes[k + 1][i] - path.nodes[k][i]) / dt - bv[i];
            r2 += r * r;
        }
        out.per_segment.push_back(0.5 * dt * r2);
        out.value += out.per_segment.back();
    }
    return out;
}

MamResult minimize_action(const Vec& x, const Vec& y, const CompiledVectorField& b,
                          const CompiledVectorField& ascent, const Region* constraint,
                          int n_segments, const std::vector<double>& t_grid,
                          const MamOptions& opts) {
    if (n_segments < 16) throw std::runtime_error("minimize_action: need at least 16 segments");
    if (t_grid.empty()) throw std::runtime_error("minimize_action: empty T grid");
    const int d = static_cast<int>(x.size());
    const Torus torus = constraint ? constraint->torus()
                                   : Torus{d, 1e9};  // effectively flat when unconstrained

    // Initializer A: straight min-image segment.
    std::vector<std::vector<Vec>> initializers;
    {
        Vec delta = y - x;
        for (int i = 0; i < d; ++i) delta[i] = torus.min_image1(delta[i]);
        std::vector<Vec> straight;
        for (int k = 0; k <= n_segments; ++k)
            straight.push_back(x + (static_cast<double>(k) / n_segments) * delta);
        initializers.push_back(std::move(straight));
    }
    // Initializers B and C: ascent flow (the expected uphill minimizer
    // shape) and descent flow, both nudged from x toward y and capped with a
    // straight closing segment.
    Vec delta = y - x;
    for (int i = 0; i < d; ++i) delta[i] = torus.min_image1(delta[i]);
    if (delta.norm() > 0) {
        for (const CompiledVectorField* field : {&ascent, &b}) {
            Vec start = x + 1e-3 * delta.normalized();
            auto poly = flow_polyline(*field, start, y, torus, opts.flow_dt, opts.flow_t_max);
            poly.insert(poly.begin(), x);
            // Close the gap to y in the unwrapped frame of the last node.
            Vec gap = y - poly.back();
            for (int i = 0; i < d; ++i) gap[i] = torus.min_image1(gap[i]);
            poly.push_back(poly.back() + gap);
            initializers.push_back(resample(poly, n_segments));
        }
        // Initializer D: reverse-time ascent from y back toward x; robust
        // when the uphill heteroclinic cannot be hit by forward shooting.
        {
            Vec start = y - 1e-3 * delta.normalized();
            auto poly = flow_polyline(ascent, start, x, torus, opts.flow_dt, opts.flow_t_max,
                                      /*backward=*/true);
            std::reverse(poly.begin(), poly.end());
            Vec gap = poly.front() - x;
            for (int i = 0; i < d; ++i) gap[i] = torus.min_image1(gap[i]);
            poly.insert(poly.begin(), poly.front() - gap);
            Vec end_gap = y - poly.back();
            for (int i = 0; i < d; ++i) end_gap[i] = torus.min_image1(end_gap[i]);
            poly.push_back(poly.back() + end_gap);
            initializers.push_back(resample(poly, n_segments));
        }
    }

    Objective obj(&b, constraint, opts.penalty_weight, d);
    std::optional<MamResult> best;
    for (double T : t_grid) {
        for (const auto& init : initializers) {
            ActionPath p = make_path(init, T);
            MamResult r = optimize(std::move(p), obj, opts);
            if (!std::isfinite(r.value))
                throw std::runtime_error("minimize_action: non-finite action during optimization");
            if (!best || r.value < best->value) best = std::move(r);
        }
    }
    return *best;
}

void write_path_csv(const ActionPath& path, const Torus& torus, std::ostream& os) {
    auto fmt = [](double v) {
        char buf[40];
        auto r = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, r.ptr);
    };
    os << "k,t";
    for (int i = 1; i <= torus.d; ++i) os << ",x" << i;
    os << '\n';
    const double dt = path.dt();
    for (std::size_t k = 0; k < path.nodes.size(); ++k) {
        os << k << ',' << fmt(static_cast<double>(k) * dt);
        Vec z = path.nodes[k];
        torus.canonical(z.data());
        for (int i = 0; i < torus.d; ++i) os << ',' << fmt(z[i]);
        os << '\n';
    }
}

WGraphResult wgraph_bound(int p_s, const Eigen::MatrixXd& V) {
    if (p_s > 6) throw std::runtime_error("wgraph_bound: more than 6 stable sets");
    if (p_s < 1) throw std::runtime_error("wgraph_bound: need at least one stable set");
    if (V.rows() != p_s + 1 || V.cols() != p_s + 1)
        throw std::runtime_error("wgraph_bound: V must be (p_s+1) x (p_s+1)");

    WGraphResult best;
    best.bound = 1e300;
    std::vector<int> target(static_cast<std::size_t>(p_s), 0);
    const auto total = static_cast<long long>(std::pow(p_s + 1, p_s));
    for (long long code = 0; code < total; ++code) {
        long long rem = code;
        bool valid = true;
        for (int i = 0; i < p_s; ++i) {
            target[static_cast<std::size_t>(i)] = static_cast<int>(rem % (p_s + 1));
            rem /= (p_s + 1);
            if (target[static_cast<std::size_t>(i)] == i) valid = false;  // no self arrow
        }
        if (!valid) continue;
        // Every node must reach the boundary (index p_s): no cycles.
        for (int i = 0; i < p_s && valid; ++i) {
            int cur = i;
            for (int hop = 0; hop <= p_s; ++hop) {
                cur = target[static_cast<std::size_t>(cur)];
                if (cur == p_s) break;
                if (hop == p_s) valid = false;
            }
        }
        if (!valid) continue;
        double sum = 0;
        for (int i = 0; i < p_s; ++i) sum += V(i, target[static_cast<std::size_t>(i)]);
        if (sum < best.bound) {
            best.bound = sum;
            best.targets = target;
        }
    }
    return best;
}

}  // namespace kramers
