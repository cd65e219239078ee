#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/leverage.hpp"
#include "roughlv/parallel.hpp"
#include "roughlv/params.hpp"
#include "roughlv/path_batch.hpp"

namespace roughlv {

/// Discretisation of the variance factors.
enum class VarianceScheme {
    /// Factors are moved by a common increment along a CIR path of the
    /// aggregate variance (quadratic-exponential step), then decay exactly.
    /// Keeps the variance non-negative.
    qe,
    /// Full-truncation Euler with implicit factor mean reversion.
    euler,
};

struct SimConfig {
    std::size_t n_paths = 100000;
    std::vector<double> time_grid;  ///< observation times, strictly increasing, first > 0
    std::uint64_t seed = 42;
    bool antithetic = false;
    /// Upper bound on the time step; observation intervals are split evenly.
    double max_step = std::numeric_limits<double>::infinity();
    bool store_factors = false;
    unsigned threads = 1;
    VarianceScheme scheme = VarianceScheme::qe;

    void validate() const {
        if (n_paths < 2) throw ConfigError("need at least two paths");
        if (antithetic && n_paths % 2 != 0) throw ConfigError("antithetic sampling needs an even path count");
        if (time_grid.empty()) throw ConfigError("time grid is empty");
        if (!(time_grid.front() > 0.0)) throw ConfigError("first grid time must be positive");
        for (std::size_t i = 1; i < time_grid.size(); ++i)
            if (!(time_grid[i] > time_grid[i - 1])) throw ConfigError("time grid must be strictly increasing");
        if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
    }
};

namespace detail {

/// Paths per random-number stream. Streams are keyed by (seed, block) so
/// results do not depend on the number of worker threads.
inline constexpr std::size_t block_size = 256;

/// Time steps refining the observation grid.
struct StepPlan {
    std::vector<double> start;     ///< start time of each step
    std::vector<double> length;    ///< step length
    std::vector<long> observation; ///< grid index observed at step end, or -1

    explicit StepPlan(const SimConfig& cfg) {
        double t0 = 0.0;
        for (std::size_t j = 0; j < cfg.time_grid.size(); ++j) {
            const double span = cfg.time_grid[j] - t0;
            const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(span / cfg.max_step - 1e-9)));
            for (std::size_t s = 0; s < m; ++s) {
                const double a = t0 + span * static_cast<double>(s) / static_cast<double>(m);
                const double b = s + 1 == m ? cfg.time_grid[j] : t0 + span * static_cast<double>(s + 1) / static_cast<double>(m);
                start.push_back(a);
                length.push_back(b - a);
                observation.push_back(s + 1 == m ? static_cast<long>(j) : -1);
            }
            t0 = cfg.time_grid[j];
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return start.size(); }
    [[nodiscard]] double end(std::size_t s) const noexcept { return start[s] + length[s]; }
};

/// One random-number stream driving a block of paths.
class BlockStream {
public:
    BlockStream(std::uint64_t seed, std::size_t block) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
        engine_.seed(seq);
    }

    /// Standard normals (z1, z2) for each path of the block at one step.
    void draw(std::span<double> z1, std::span<double> z2, bool antithetic) {
        if (!antithetic) {
            for (std::size_t p = 0; p < z1.size(); ++p) {
                z1[p] = normal_(engine_);
                z2[p] = normal_(engine_);
            }
            return;
        }
        for (std::size_t p = 0; p + 1 < z1.size(); p += 2) {
            z1[p] = normal_(engine_);
            z2[p] = normal_(engine_);
            z1[p + 1] = -z1[p];
            z2[p + 1] = -z2[p];
        }
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

/// What the spot needs from one variance step: the integrated variance
/// int v dt and the stochastic integral int sqrt(v) dB.
struct VarianceIncrement {
    double integrated;
    double noise;
};

/// Per-step update of the lift factors and the aggregate variance, shared by
/// the pure lift and the HMLV dynamics. The scheme consumes the normals
/// (z1, z2) of one path and one step.
///
/// Euler: B = z1, W = rho z1 + sqrt(1 - rho^2) z2, factors
///   v^i <- (v^i - lambda v+ h + nu sqrt(v+) dW) / (1 + gamma_i h).
/// QE: with u^i = v^i + lambda theta (1 - exp(-gamma_i t)) / gamma_i all
/// factors share the increment dZ = lambda (theta - v) dt + nu sqrt(v) dW.
/// Over a step the factors first decay by exp(-gamma_i h); the aggregate then
/// follows a CIR path with speed C lambda and vol-of-variance C nu, where
/// C = sum_i c_i (1 - exp(-gamma_i h)) / (gamma_i h) is the step-averaged
/// kernel mass, and each factor takes its share of the implied increment.
/// z1 drives the CIR step; the spot uses the trapezoidal integrated variance.
class VarianceStepper {
public:
    VarianceStepper(const ModelParams& p, const LiftSpec& lift, const StepPlan& plan, VarianceScheme scheme)
        : p_(p), lift_(lift), scheme_(scheme), rho_perp_(std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho))) {
        for (const auto& n : lift.nodes) weights_.push_back(n.weight);
        table_of_step_.reserve(plan.size());
        for (std::size_t s = 0; s < plan.size(); ++s) {
            if (s == 0 || plan.length[s] != plan.length[s - 1]) tables_.push_back(make_table(plan.length[s]));
            table_of_step_.push_back(tables_.size() - 1);
            drift_part_.push_back(p.v0 + p.lambda * p.theta * lift.integrated_kernel(plan.end(s)));
        }
    }

    [[nodiscard]] std::size_t factor_count() const noexcept { return weights_.size(); }

    /// First half of step s for one path: decays the factors and returns the
    /// aggregate variance the step starts from (before truncation). For the
    /// Euler scheme this is the current variance.
    double prepare(std::size_t s, double* factors, double v) const {
        if (scheme_ == VarianceScheme::euler) return v;
        const Table& tb = tables_[table_of_step_[s]];
        double a = p_.v0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            factors[i] *= tb.decay[i];
            a += weights_[i] * factors[i];
        }
        return a;
    }

    /// Second half of step s: consumes the normals, updates factors and the
    /// aggregate variance `v`; `start` is the value returned by prepare.
    VarianceIncrement complete(std::size_t s, double* factors, double& v, double start, double z1, double z2) const {
        const Table& tb = tables_[table_of_step_[s]];
        const std::size_t n = weights_.size();
        const double x0 = std::max(start, 0.0);
        if (scheme_ == VarianceScheme::euler) {
            const double sv = std::sqrt(x0);
            const double dw = tb.sqrt_h * (p_.rho * z1 + rho_perp_ * z2);
            const double shock = -p_.lambda * x0 * tb.h + p_.nu * sv * dw;
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                factors[i] = (factors[i] + shock) * tb.decay[i];
                sum += weights_[i] * factors[i];
            }
            v = drift_part_[s] + sum;
            return {x0 * tb.h, sv * tb.sqrt_h * z1};
        }

        double x;
        double noise;
        if (tb.sigma > 0.0) {
            x = cir_step(tb, x0, z1);
            const double integrated = 0.5 * (x0 + x) * tb.h;
            const double w_int = (x - x0 - tb.kappa * p_.theta * tb.h + tb.kappa * integrated) / tb.sigma;
            noise = p_.rho * w_int + rho_perp_ * std::sqrt(integrated) * z2;
        } else {
            x = p_.theta + (x0 - p_.theta) * tb.ek;
            noise = std::sqrt(0.5 * (x0 + x) * tb.h) * (p_.rho * z1 + rho_perp_ * z2);
        }
        const double dz = (x - start) / tb.mass;
        for (std::size_t i = 0; i < n; ++i) factors[i] += tb.share[i] * dz;
        v = x;
        return {0.5 * (x0 + x) * tb.h, noise};
    }

    /// Both halves of step s.
    VarianceIncrement advance(std::size_t s, double* factors, double& v, double z1, double z2) const {
        return complete(s, factors, v, prepare(s, factors, v), z1, z2);
    }

    /// Writes the factors v^i at time t given the internal state.
    void export_factors(double t, const double* state, double* out) const {
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (scheme_ == VarianceScheme::euler) {
                out[i] = state[i];
                continue;
            }
            const double g = lift_.nodes[i].speed;
            const double phi = g > 0.0 ? -std::expm1(-g * t) / g : t;
            out[i] = state[i] - p_.lambda * p_.theta * phi;
        }
    }

private:
    struct Table {
        double h;
        double sqrt_h;
        std::vector<double> decay;  ///< Euler: 1/(1 + gamma h); QE: exp(-gamma h)
        std::vector<double> share;  ///< QE: (1 - exp(-gamma h)) / (gamma h)
        double mass = 0.0;          ///< QE: sum_i c_i share_i
        double kappa = 0.0;
        double sigma = 0.0;
        double ek = 1.0;     ///< exp(-kappa h)
        double f = 0.0;      ///< (1 - exp(-kappa h)) / kappa
    };

    [[nodiscard]] Table make_table(double h) const {
        Table tb;
        tb.h = h;
        tb.sqrt_h = std::sqrt(h);
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            const double gh = lift_.nodes[i].speed * h;
            if (scheme_ == VarianceScheme::euler) {
                tb.decay.push_back(1.0 / (1.0 + gh));
                continue;
            }
            tb.decay.push_back(std::exp(-gh));
            tb.share.push_back(gh > 1e-12 ? -std::expm1(-gh) / gh : 1.0 - 0.5 * gh);
            tb.mass += weights_[i] * tb.share.back();
        }
        tb.kappa = tb.mass * p_.lambda;
        tb.sigma = tb.mass * p_.nu;
        tb.ek = std::exp(-tb.kappa * h);
        tb.f = tb.kappa * h > 1e-12 ? -std::expm1(-tb.kappa * h) / tb.kappa : h;
        return tb;
    }

    /// Quadratic-exponential sample of a CIR transition from x0 over one step.
    [[nodiscard]] double cir_step(const Table& tb, double x0, double z) const {
        const double m = p_.theta + (x0 - p_.theta) * tb.ek;
        const double s2 = tb.sigma * tb.sigma * tb.f * (x0 * tb.ek + 0.5 * p_.theta * (1.0 - tb.ek));
        const double psi = s2 / (m * m);
        if (psi <= 1.5) {
            const double r = 2.0 / psi;
            const double b2 = r - 1.0 + std::sqrt(r) * std::sqrt(r - 1.0);
            const double b = std::sqrt(b2);
            return m / (1.0 + b2) * (b + z) * (b + z);
        }
        const double prob_zero = (psi - 1.0) / (psi + 1.0);
        const double upper = 0.5 * std::erfc(z / std::numbers::sqrt2);  // 1 - Phi(z)
        if (upper >= 1.0 - prob_zero) return 0.0;
        const double beta = (1.0 - prob_zero) / m;
        return std::log((1.0 - prob_zero) / upper) / beta;
    }

    ModelParams p_;
    const LiftSpec& lift_;
    VarianceScheme scheme_;
    double rho_perp_;
    std::vector<double> weights_;
    std::vector<Table> tables_;
    std::vector<std::size_t> table_of_step_;
    std::vector<double> drift_part_;  ///< Euler: v0 + lambda theta int_0^t K_n at each step end
};

inline PathBatch empty_batch(const SimConfig& cfg, std::size_t n_factors) {
    PathBatch b;
    b.grid = cfg.time_grid;
    b.n_paths = cfg.n_paths;
    b.n_factors = cfg.store_factors ? n_factors : 0;
    b.spot.resize(cfg.n_paths * cfg.time_grid.size());
    b.variance.resize(cfg.n_paths * cfg.time_grid.size());
    if (cfg.store_factors) b.factors.resize(cfg.n_paths * cfg.time_grid.size() * n_factors);
    b.seed = cfg.seed;
    b.antithetic = cfg.antithetic;
    return b;
}

}  // namespace detail

/// Simulation of the lifted rough-Heston model
///   d log S = -v/2 dt + sqrt(v) dB,
///   dv^i = -(gamma_i v^i + lambda v) dt + nu sqrt(v) dW,  v^i_0 = 0,
///   v = v0 + sum_i c_i (v^i + lambda theta (1 - exp(-gamma_i t)) / gamma_i),
/// with d<B, W> = rho dt, using the scheme selected in the config.
inline PathBatch simulate_lift(const ModelParams& params, const LiftSpec& lift, const SimConfig& config) {
    params.validate();
    lift.validate();
    config.validate();

    const detail::StepPlan plan(config);
    const detail::VarianceStepper stepper(params, lift, plan, config.scheme);
    const std::size_t nf = lift.size();
    const std::size_t n_times = config.time_grid.size();
    const std::size_t n_blocks = (config.n_paths + detail::block_size - 1) / detail::block_size;

    PathBatch batch = detail::empty_batch(config, nf);

    parallel_for(n_blocks, config.threads, [&](std::size_t block) {
        const std::size_t first = block * detail::block_size;
        const std::size_t count = std::min(detail::block_size, config.n_paths - first);
        detail::BlockStream stream(config.seed, block);
        std::vector<double> factors(count * nf, 0.0);
        std::vector<double> log_spot(count, 0.0), var(count, params.v0), z1(count), z2(count);

        for (std::size_t s = 0; s < plan.size(); ++s) {
            stream.draw(z1, z2, config.antithetic);
            for (std::size_t p = 0; p < count; ++p) {
                const auto inc = stepper.advance(s, factors.data() + p * nf, var[p], z1[p], z2[p]);
                log_spot[p] += -0.5 * inc.integrated + inc.noise;
                if (!std::isfinite(var[p]) || !std::isfinite(log_spot[p]))
                    throw SimulationError("non-finite state in lift simulation", s);
            }
            const long obs = plan.observation[s];
            if (obs < 0) continue;
            const auto o = static_cast<std::size_t>(obs);
            for (std::size_t p = 0; p < count; ++p) {
                const std::size_t row = (first + p) * n_times + o;
                batch.spot[row] = std::exp(log_spot[p]);
                batch.variance[row] = std::max(var[p], 0.0);
                if (config.store_factors)
                    stepper.export_factors(plan.end(s), factors.data() + p * nf, batch.factors.data() + row * nf);
            }
        }
    });
    return batch;
}

struct HmlvResult {
    PathBatch paths;
    LeverageRecord leverage;
};

/// Particle simulation of the lift with a local-volatility term:
///   d log S = -s^2/2 dt + s dB,  s = eta_hat(t, S) sqrt(v / E[v | S]).
/// E[v | S] is estimated from the particle cloud at the start of every step;
/// variance dynamics are those of simulate_lift, driven by the same random
/// streams. `local_vol` is any callable (t, k) -> eta_hat.
template <class LocalVol>
HmlvResult simulate_hmlv(const ModelParams& params, const LiftSpec& lift, const LocalVol& local_vol,
                         const SimConfig& config, std::size_t bins = 0) {
    params.validate();
    lift.validate();
    config.validate();
    if (bins == 0) bins = default_bin_count(config.n_paths);

    const detail::StepPlan plan(config);
    const detail::VarianceStepper stepper(params, lift, plan, config.scheme);
    const std::size_t nf = lift.size();
    const std::size_t m = config.n_paths;
    const std::size_t n_times = config.time_grid.size();
    const std::size_t n_blocks = (m + detail::block_size - 1) / detail::block_size;

    HmlvResult result{detail::empty_batch(config, nf), {}};
    std::vector<detail::BlockStream> streams;
    for (std::size_t b = 0; b < n_blocks; ++b) streams.emplace_back(config.seed, b);
    std::vector<double> factors(m * nf, 0.0);
    std::vector<double> log_spot(m, 0.0), spot(m, 1.0), var(m, params.v0), var_pos(m), z1(m), z2(m);
    std::vector<std::size_t> clamped(n_blocks);

    for (std::size_t s = 0; s < plan.size(); ++s) {
        const double t = plan.start[s];
        const double h = plan.length[s];
        // At t = 0 every particle sits at S = 1; evaluate the surface just after the origin.
        const double t_eval = t > 0.0 ? t : 0.5 * h;
        for (std::size_t p = 0; p < m; ++p) var_pos[p] = std::max(var[p], 0.0);
        const BinnedConditionalMean cond(spot, var_pos, bins);

        parallel_for(n_blocks, config.threads, [&](std::size_t block) {
            const std::size_t first = block * detail::block_size;
            const std::size_t count = std::min(detail::block_size, m - first);
            std::span<double> zb1(z1.data() + first, count), zb2(z2.data() + first, count);
            streams[block].draw(zb1, zb2, config.antithetic);
            std::size_t clamps = 0;
            for (std::size_t q = 0; q < count; ++q) {
                const std::size_t p = first + q;
                double ce = cond(spot[p]);
                if (ce < variance_floor) {
                    ++clamps;
                    ce = variance_floor;
                }
                const double lev = local_vol(t_eval, spot[p]) / std::sqrt(ce);
                const auto inc = stepper.advance(s, factors.data() + p * nf, var[p], zb1[q], zb2[q]);
                log_spot[p] += -0.5 * lev * lev * inc.integrated + lev * inc.noise;
                spot[p] = std::exp(log_spot[p]);
            }
            clamped[block] = clamps;
        });

        for (std::size_t p = 0; p < m; ++p)
            if (!std::isfinite(var[p]) || !std::isfinite(log_spot[p]))
                throw SimulationError("non-finite state in HMLV simulation", s);

        LeverageStep rec{t, cond.snapshot(), 0, m};
        for (auto c : clamped) rec.clamped += c;
        for (auto c : rec.bins.counts) rec.min_bin_population = std::min(rec.min_bin_population, c);
        result.leverage.steps.push_back(std::move(rec));

        const long obs = plan.observation[s];
        if (obs < 0) continue;
        const auto o = static_cast<std::size_t>(obs);
        for (std::size_t p = 0; p < m; ++p) {
            const std::size_t row = p * n_times + o;
            result.paths.spot[row] = spot[p];
            result.paths.variance[row] = std::max(var[p], 0.0);
            if (config.store_factors)
                stepper.export_factors(plan.end(s), factors.data() + p * nf, result.paths.factors.data() + row * nf);
        }
    }
    return result;
}

/// Per grid time: mean and standard error of spot and variance.
inline void write_summary(std::ostream& out, const PathBatch& batch) {
    out << "time,spot_mean,spot_stderr,variance_mean,variance_stderr\n";
    char buf[200];
    std::vector<double> s(batch.n_paths), v(batch.n_paths);
    for (std::size_t j = 0; j < batch.n_times(); ++j) {
        for (std::size_t p = 0; p < batch.n_paths; ++p) {
            s[p] = batch.spot_at(p, j);
            v[p] = batch.variance_at(p, j);
        }
        const auto ss = path_stats(batch, s);
        const auto vs = path_stats(batch, v);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", batch.grid[j], ss.mean, ss.stderr_, vs.mean,
                      vs.stderr_);
        out << buf;
    }
}

/// One row per path, one column per grid time.
inline void write_path_matrix(std::ostream& out, const PathBatch& batch, bool variance) {
    char buf[32];
    for (std::size_t j = 0; j < batch.n_times(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", batch.grid[j]);
        out << (j ? "," : "") << "t=" << buf;
    }
    out << '\n';
    for (std::size_t p = 0; p < batch.n_paths; ++p) {
        for (std::size_t j = 0; j < batch.n_times(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", variance ? batch.variance_at(p, j) : batch.spot_at(p, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace roughlv
