#include "kramers/mc.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <ostream>
#include <thread>

#include "kramers/philox.hpp"

namespace kramers {

namespace {

// Uniform cell grid with a certified clearance-to-boundary radius per cell.
// In the metastable regime almost every step starts deep inside the region,
// where one table lookup replaces the g evaluation.
class SafeCellMask {
public:
    SafeCellMask(const Region& region, int cells_per_axis)
        : d_(region.dimension()), n_(cells_per_axis), inv_dx_(cells_per_axis / region.torus().L) {
        const double L = region.torus().L;
        const double dx = L / n_;
        const double half_diag = 0.5 * dx * std::sqrt(static_cast<double>(d_));
        const double gb = region.grad_bound();
        std::size_t total = 1;
        for (int i = 0; i < d_; ++i) total *= static_cast<std::size_t>(n_);
        clearance_.resize(total);
        std::vector<double> corner(static_cast<std::size_t>(d_));
        for (std::size_t c = 0; c < total; ++c) {
            std::size_t idx[kMaxDim];
            std::size_t rem = c;
            for (int i = 0; i < d_; ++i) {
                idx[i] = rem % static_cast<std::size_t>(n_);
                rem /= static_cast<std::size_t>(n_);
            }
            double min_neg_g = 1e300;
            const int corners = 1 << d_;
            for (int k = 0; k < corners; ++k) {
                for (int i = 0; i < d_; ++i)
                    corner[static_cast<std::size_t>(i)] =
                        dx * (static_cast<double>(idx[i]) + ((k >> i) & 1));
                min_neg_g = std::min(min_neg_g, -region.gval(corner.data()));
            }
            // |grad g| <= gb certifies: any cell point is at least this far
            // from the zero set of g.
            clearance_[c] = std::max(0.0, (min_neg_g - gb * half_diag) / gb);
        }
    }

    double clearance(const double* x_canonical) const {
        std::size_t c = 0;
        for (int i = d_ - 1; i >= 0; --i) {
            auto k = static_cast<std::size_t>(x_canonical[i] * inv_dx_);
            if (k >= static_cast<std::size_t>(n_)) k = static_cast<std::size_t>(n_) - 1;
            c = c * static_cast<std::size_t>(n_) + k;
        }
        return clearance_[c];
    }

private:
    int d_;
    int n_;
    double inv_dx_;
    std::vector<double> clearance_;
};

struct StepperShared {
    const CompiledVectorField* b;
    const Region* region;
    const SafeCellMask* mask;
    const SimConfig* cfg;
    int d;
    double sigma;  // sqrt(h dt)
};

// Compile-time dimension keeps the inner loops unrolled and the state in
// registers.
template <int D>
PathRecord run_path(const StepperShared& sh, TapeRunner& drift, int path_index,
                    std::vector<CrossingHit>& hits) {
    const Torus& torus = sh.region->torus();
    const SimConfig& cfg = *sh.cfg;
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(path_index), cfg.stream_context);

    double x[D], bv[D], z[D], delta[D], xn[D];
    const Vec& start = cfg.starts[static_cast<std::size_t>(path_index) % cfg.starts.size()];
    for (int i = 0; i < D; ++i) x[i] = start[i];
    torus.canonical(x);

    PathRecord rec;
    const double dt = cfg.dt;
    const double L = torus.L;
    const double gb = sh.region->grad_bound();
    for (std::uint64_t step = 0; step < cfg.max_steps; ++step) {
        drift(x, bv);
        double bsum = 0;
        for (int i = 0; i < D; ++i) bsum += bv[i];
        if (!std::isfinite(bsum)) {
            rec.poisoned = true;
            rec.censored = true;
            rec.steps = step;
            return rec;
        }
        for (int i = 0; i + 1 < D; i += 2) rng.normal_pair(z[i], z[i + 1]);
        if constexpr (D & 1) z[D - 1] = rng.normal();

        double len2 = 0;
        for (int i = 0; i < D; ++i) {
            delta[i] = bv[i] * dt + sh.sigma * z[i];
            len2 += delta[i] * delta[i];
        }

        const double clear = sh.mask->clearance(x);
        if (clear * clear <= len2) {
            // Near the boundary: look for the first crossing on the step
            // segment (this also catches thin exterior slivers straddled by
            // the endpoints).
            const double len = std::sqrt(len2);
            const double g0 = sh.region->gval(x);
            for (int i = 0; i < D; ++i) xn[i] = x[i] + delta[i];
            const double g1 = sh.region->gval(xn);
            if (std::max(g0, g1) + 0.5 * len * gb >= 0) {
                sh.region->crossings_on_segment(x, delta, hits);
                if (!hits.empty()) {
                    const CrossingHit& hit = hits.front();
                    rec.tau = (static_cast<double>(step) + hit.t) * dt;
                    rec.steps = step + 1;
                    for (int i = 0; i < D; ++i)
                        rec.exit_pos[static_cast<std::size_t>(i)] =
                            hit.point[static_cast<std::size_t>(i)];
                    return rec;
                }
            }
        }
        for (int i = 0; i < D; ++i) {
            double xi = x[i] + delta[i];
            if (xi >= L) {
                xi -= L;
            } else if (xi < 0) {
                xi += L;
            }
            if (xi < 0 || xi >= L) xi = torus.wrap(xi);  // giant step fallback
            x[i] = xi;
        }
    }
    rec.censored = true;
    rec.steps = cfg.max_steps;
    return rec;
}

using PathRunner = PathRecord (*)(const StepperShared&, TapeRunner&, int,
                                  std::vector<CrossingHit>&);

PathRunner select_runner(int d) {
    switch (d) {
        case 1: return &run_path<1>;
        case 2: return &run_path<2>;
        case 3: return &run_path<3>;
        case 4: return &run_path<4>;
        case 5: return &run_path<5>;
        case 6: return &run_path<6>;
        case 7: return &run_path<7>;
        default: return &run_path<8>;
    }
}

void summarize(ExitSampleSet& set) {
    double sum = 0;
    int n = 0, censored = 0;
    for (const auto& r : set.records) {
        if (r.censored) {
            ++censored;
            continue;
        }
        sum += r.tau;
        ++n;
    }
    ExitSummary& s = set.summary;
    s.n_uncensored = n;
    s.censor_fraction =
        set.records.empty() ? 0 : static_cast<double>(censored) / static_cast<double>(set.records.size());
    s.reliable = s.censor_fraction <= 0.01;
    if (n == 0) return;
    s.mean = sum / n;
    double sum2 = 0;
    for (const auto& r : set.records)
        if (!r.censored) sum2 += (r.tau - s.mean) * (r.tau - s.mean);
    s.variance = n > 1 ? sum2 / (n - 1) : 0;
    s.std_error = n > 1 ? std::sqrt(s.variance / n) : 0;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace

ExitSampleSet sample_exits(const CompiledVectorField& b, const Region& region,
                           const SimConfig& cfg) {
    if (cfg.starts.empty()) throw std::runtime_error("sample_exits: no start points");
    if (cfg.dt <= 0 || cfg.h < 0) throw std::runtime_error("sample_exits: invalid h or dt");
    if (cfg.n_paths < 1) throw std::runtime_error("sample_exits: n_paths must be >= 1");
    for (const auto& s : cfg.starts)
        if (!region.contains(s.data()))
            throw std::runtime_error("sample_exits: a start point lies outside the region");

    const SafeCellMask mask(region, region.dimension() <= 2 ? 256 : 48);
    StepperShared sh{&b, &region, &mask, &cfg, region.dimension(), std::sqrt(cfg.h * cfg.dt)};

    ExitSampleSet set;
    set.config = cfg;
    set.dimension = region.dimension();
    set.records.resize(static_cast<std::size_t>(cfg.n_paths));

    std::atomic<int> next{0};
    const PathRunner runner = select_runner(region.dimension());
    auto worker = [&]() {
        TapeRunner drift(b.tape());
        std::vector<CrossingHit> hits;
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.n_paths) break;
            set.records[static_cast<std::size_t>(i)] = runner(sh, drift, i, hits);
        }
    };
    const int nw = std::min(resolve_threads(cfg.threads), cfg.n_paths);
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    summarize(set);
    return set;
}

void write_csv(const ExitSampleSet& set, std::ostream& os) {
    auto fmt = [](double v) {
        char buf[40];
        auto r = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, r.ptr);
    };
    os << "path,tau";
    for (int i = 1; i <= set.dimension; ++i) os << ",exit_x" << i;
    os << ",steps,censored\n";
    for (std::size_t i = 0; i < set.records.size(); ++i) {
        const auto& r = set.records[i];
        os << i << ',' << fmt(r.tau);
        for (int k = 0; k < set.dimension; ++k)
            os << ',' << fmt(r.exit_pos[static_cast<std::size_t>(k)]);
        os << ',' << r.steps << ',' << (r.censored ? 1 : 0) << '\n';
    }
}

CommittorResult committor(const CompiledVectorField& b, const Region& region, const Vec& center,
                          double radius, const SimConfig& cfg) {
    const int d = region.dimension();
    const Torus& torus = region.torus();
    if (cfg.starts.empty()) throw std::runtime_error("committor: no start points");
    {
        // The target ball must sit inside the region: probe its sphere.
        RandomStream probe(7, 7);
        double p[kMaxDim], dir[kMaxDim];
        for (int k = 0; k < 200; ++k) {
            double norm2 = 0;
            for (int i = 0; i < d; ++i) {
                dir[i] = probe.normal();
                norm2 += dir[i] * dir[i];
            }
            const double scale = radius / std::sqrt(norm2);
            for (int i = 0; i < d; ++i) p[i] = center[i] + dir[i] * scale;
            if (!region.contains(p))
                throw std::runtime_error("committor: target ball is not inside the region");
        }
    }

    const SafeCellMask mask(region, d <= 2 ? 256 : 48);
    const double sigma = std::sqrt(cfg.h * cfg.dt);
    const double r2 = radius * radius;
    const double gb = region.grad_bound();
    std::atomic<int> next{0};
    std::vector<int> outcome(static_cast<std::size_t>(cfg.n_paths), -1);  // 1 hit, 0 exit

    auto worker = [&]() {
        TapeRunner drift(b.tape());
        std::vector<CrossingHit> hits;
        double x[kMaxDim], bv[kMaxDim], z[kMaxDim], delta[kMaxDim], xn[kMaxDim];
        for (;;) {
            const int pi = next.fetch_add(1);
            if (pi >= cfg.n_paths) break;
            RandomStream rng(cfg.seed, static_cast<std::uint64_t>(pi),
                             cfg.stream_context ^ 0x9e37u);
            const Vec& start = cfg.starts[static_cast<std::size_t>(pi) % cfg.starts.size()];
            for (int i = 0; i < d; ++i) x[i] = start[i];
            torus.canonical(x);
            int res = -1;
            if (torus.distance2(x, center.data()) <= r2) res = 1;  // started inside B
            for (std::uint64_t step = 0; res < 0 && step < cfg.max_steps; ++step) {
                drift(x, bv);
                bool finite = true;
                for (int i = 0; i < d; ++i) finite = finite && std::isfinite(bv[i]);
                if (!finite) break;
                for (int i = 0; i + 1 < d; i += 2) rng.normal_pair(z[i], z[i + 1]);
                if (d & 1) z[d - 1] = rng.normal();
                double len2 = 0;
                for (int i = 0; i < d; ++i) {
                    delta[i] = bv[i] * cfg.dt + sigma * z[i];
                    len2 += delta[i] * delta[i];
                }
                const double len = std::sqrt(len2);
                if (mask.clearance(x) <= len) {
                    const double g0 = region.gval(x);
                    for (int i = 0; i < d; ++i) xn[i] = x[i] + delta[i];
                    const double g1 = region.gval(xn);
                    if (std::max(g0, g1) + 0.5 * len * gb >= 0) {
                        region.crossings_on_segment(x, delta, hits);
                        if (!hits.empty()) {
                            res = 0;
                            break;
                        }
                    }
                }
                for (int i = 0; i < d; ++i) x[i] += delta[i];
                torus.canonical(x);
                if (torus.distance2(x, center.data()) <= r2) res = 1;
            }
            outcome[static_cast<std::size_t>(pi)] = res;
        }
    };
    const int nw = std::min(resolve_threads(cfg.threads), cfg.n_paths);
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    int hit = 0, resolved = 0;
    for (int v : outcome) {
        if (v >= 0) ++resolved;
        if (v == 1) ++hit;
    }
    CommittorResult out;
    out.n_paths = resolved;
    if (resolved == 0) return out;
    const double p = static_cast<double>(hit) / resolved;
    out.estimate = p;
    const double zq = 1.959963984540054;  // 95% normal quantile
    const double n = resolved;
    const double denom = 1 + zq * zq / n;
    const double center_w = (p + zq * zq / (2 * n)) / denom;
    const double half = zq * std::sqrt(p * (1 - p) / n + zq * zq / (4 * n * n)) / denom;
    out.lo = std::max(0.0, center_w - half);
    out.hi = std::min(1.0, center_w + half);
    return out;
}

KsResult exit_law_test(const ExitSampleSet& samples, double rate) {
    std::vector<double> y;
    y.reserve(samples.records.size());
    for (const auto& r : samples.records)
        if (!r.censored) y.push_back(rate * r.tau);
    if (y.size() < 100)
        throw std::runtime_error("exit_law_test: needs at least 100 uncensored samples");
    std::sort(y.begin(), y.end());
    const auto n = static_cast<double>(y.size());
    double d_stat = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double F = 1 - std::exp(-y[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d_stat = std::max(d_stat, std::max(std::abs(F - lo), std::abs(F - hi)));
    }
    KsResult out;
    out.n = static_cast<int>(y.size());
    out.statistic = d_stat;
    const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d_stat;
    double p = 0;
    for (int k = 1; k <= 100; ++k) {
        const double term = 2 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lam * lam);
        p += term;
        if (std::abs(term) < 1e-12) break;
    }
    out.p_value = std::clamp(p, 0.0, 1.0);
    out.pass95 = out.p_value >= 0.05;
    return out;
}

ArrheniusFit arrhenius_fit(const std::vector<std::pair<double, double>>& h_and_mean) {
    if (h_and_mean.size() < 3)
        throw std::runtime_error("arrhenius_fit: needs at least 3 (h, mean) points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto n = static_cast<double>(h_and_mean.size());
    for (const auto& [h, mean] : h_and_mean) {
        const double x = 1 / h, y = std::log(mean);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    ArrheniusFit fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

LevelingResult leveling_check(const CompiledVectorField& b, const Region& region,
                              const ScalarField& f, const CriticalPoint& x0,
                              const SimConfig& cfg, const std::vector<Vec>& starts) {
    LevelingResult out;
    for (const auto& s : starts) {
        if (!basin_membership(region, x0, s, b, f, 100.0, 1e-3))
            throw std::runtime_error("leveling_check: a start is not in the attraction basin");
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
        SimConfig c = cfg;
        c.starts = {starts[i]};
        c.stream_context = cfg.stream_context + 101 * static_cast<std::uint32_t>(i + 1);
        const auto set = sample_exits(b, region, c);
        out.means.push_back(set.summary.mean);
        out.std_errors.push_back(set.summary.std_error);
    }
    const double m0 = out.means.front();
    const double se0 = out.std_errors.front();
    for (std::size_t i = 1; i < out.means.size(); ++i) {
        out.max_spread = std::max(out.max_spread, std::abs(out.means[i] / m0 - 1));
        const double noise = 3 * std::sqrt(out.std_errors[i] * out.std_errors[i] + se0 * se0) / m0;
        out.noise_bound = std::max(out.noise_bound, noise);
    }
    out.within_noise = out.max_spread <= out.noise_bound;
    return out;
}

}  // namespace kramers
