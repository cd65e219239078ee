#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "roughlv/error.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/params.hpp"

namespace roughlv {

using cplx = std::complex<double>;

namespace detail {

/// F(a, psi) = (-a^2 - i a)/2 + (i a rho nu - lambda) psi + nu^2 psi^2 / 2.
struct RiccatiForcing {
    cplx constant;
    cplx linear;
    double quadratic;

    RiccatiForcing(cplx a, const ModelParams& p)
        : constant(0.5 * (-a * a - cplx(0.0, 1.0) * a)),
          linear(cplx(0.0, 1.0) * a * p.rho * p.nu - p.lambda),
          quadratic(0.5 * p.nu * p.nu) {}

    [[nodiscard]] cplx operator()(cplx psi) const { return constant + linear * psi + quadratic * psi * psi; }
};

inline constexpr double overflow_guard = 1e150;

}  // namespace detail

/// Characteristic function E[exp(i a log S_t)] of the classical Heston model
/// (the H = 1/2 case), in the formulation without branch-cut discontinuities.
inline cplx heston_char_fn(cplx a, double t, const ModelParams& p) {
    const cplx i(0.0, 1.0);
    if (p.nu < 1e-12) {
        // Deterministic variance: log S_t is Gaussian with integrated variance w.
        const double w = p.theta * t + (p.v0 - p.theta) * LiftSpec::exp_integral(p.lambda, t);
        return std::exp(-0.5 * (a * a + i * a) * w);
    }
    const double nu2 = p.nu * p.nu;
    const cplx beta = p.lambda - p.rho * p.nu * i * a;
    const cplx d = std::sqrt(beta * beta + nu2 * (i * a + a * a));
    const cplx bm = beta - d;
    const cplx g = bm / (beta + d);
    const cplx e = std::exp(-d * t);
    const cplx big_d = bm / nu2 * (1.0 - e) / (1.0 - g * e);
    const cplx big_c = p.lambda * p.theta / nu2 * (bm * t - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
    return std::exp(big_c + p.v0 * big_d);
}

/// Solution of the fractional Riccati equation D^alpha psi = F(a, psi),
/// psi(0) = 0, on a uniform grid.
struct CharFnSolution {
    cplx argument;
    std::vector<double> t_grid;
    std::vector<cplx> psi_values;
    double alpha;
    cplx integral;             ///< I^1 psi at the final time
    cplx fractional_integral;  ///< I^(1-alpha) psi at the final time

    /// exp(theta lambda I^1 psi + v0 I^(1-alpha) psi).
    [[nodiscard]] cplx char_fn(const ModelParams& p) const {
        return std::exp(p.theta * p.lambda * integral + p.v0 * fractional_integral);
    }
};

namespace detail {

/// Product-trapezoid weights for I^r f(t_N) on a uniform grid with N steps,
/// scaled by Gamma(r + 2) / h^r. Entry j multiplies f(t_j).
inline std::vector<double> fractional_trapezoid_weights(std::size_t n, double r) {
    std::vector<double> w(n + 1);
    const auto nn = static_cast<double>(n);
    w[0] = std::pow(nn - 1.0, r + 1.0) - (nn - 1.0 - r) * std::pow(nn, r);
    for (std::size_t j = 1; j < n; ++j) {
        const auto m = static_cast<double>(n - j);
        w[j] = std::pow(m + 1.0, r + 1.0) + std::pow(m - 1.0, r + 1.0) - 2.0 * std::pow(m, r + 1.0);
    }
    w[n] = 1.0;
    return w;
}

/// Fractional Adams predictor-corrector for a batch of Fourier arguments.
struct AdamsResult {
    std::vector<cplx> integral;
    std::vector<cplx> fractional_integral;
};

/// Root of q psi^2 + (b - 1) psi + c = 0 on the branch that tends to
/// c / (1 - b) as q -> 0.
inline cplx small_root(double q, cplx b, cplx c) {
    const cplx m = 1.0 - b;
    cplx r = std::sqrt(m * m - 4.0 * q * c);
    if ((r * std::conj(m)).real() < 0.0) r = -r;
    return 2.0 * c / (m + r);
}

/// Fractional Adams scheme for a batch of Fourier arguments. The corrector
///   psi_{k+1} = h^alpha / Gamma(alpha+2) (F(psi_{k+1}) + sum_j A_{j,k+1} F(psi_j))
/// is quadratic in psi_{k+1} and is solved exactly, which keeps the scheme
/// stable for the large arguments met in the Fourier tail.
inline AdamsResult adams_batch(std::span<const cplx> args, double t, const ModelParams& p, std::size_t steps,
                               std::vector<std::vector<cplx>>* paths = nullptr) {
    if (steps < 16) throw ConfigError("fractional Riccati solver needs at least 16 steps");
    if (!(t > 0.0)) throw DomainError("maturity must be positive");
    const double alpha = p.alpha();
    const std::size_t n = steps;
    const double h = t / static_cast<double>(n);
    const double corr_scale = std::pow(h, alpha) / std::tgamma(alpha + 2.0);
    // A(m) = (m+2)^(alpha+1) + m^(alpha+1) - 2 (m+1)^(alpha+1); a0 is the weight of the initial point.
    std::vector<double> ca(n), a0(n);
    for (std::size_t m = 0; m < n; ++m) {
        const auto x = static_cast<double>(m);
        ca[m] = std::pow(x + 2.0, alpha + 1.0) + std::pow(x, alpha + 1.0) - 2.0 * std::pow(x + 1.0, alpha + 1.0);
        a0[m] = std::pow(x, alpha + 1.0) - (x - alpha) * std::pow(x + 1.0, alpha);
    }
    const auto frac_w = fractional_trapezoid_weights(n, 1.0 - alpha);
    const double frac_scale = std::pow(h, 1.0 - alpha) / std::tgamma(3.0 - alpha);

    AdamsResult out{std::vector<cplx>(args.size()), std::vector<cplx>(args.size())};
    std::vector<cplx> forcing(n + 1), psi(n + 1);
    if (paths) paths->assign(args.size(), {});

    for (std::size_t q = 0; q < args.size(); ++q) {
        const RiccatiForcing f(args[q], p);
        psi[0] = 0.0;
        forcing[0] = f(0.0);
        for (std::size_t k = 0; k < n; ++k) {
            cplx hist = a0[k] * forcing[0];
            for (std::size_t j = 1; j <= k; ++j) hist += ca[k - j] * forcing[j];
            psi[k + 1] = small_root(corr_scale * f.quadratic, corr_scale * f.linear,
                                    corr_scale * (f.constant + hist));
            if (!(std::abs(psi[k + 1]) < overflow_guard))
                throw SolverError("fractional Riccati solution diverged", k + 1);
            forcing[k + 1] = f(psi[k + 1]);
        }
        cplx trap = 0.5 * (psi[0] + psi[n]);
        for (std::size_t j = 1; j < n; ++j) trap += psi[j];
        out.integral[q] = h * trap;
        cplx frac = 0.0;
        for (std::size_t j = 0; j <= n; ++j) frac += frac_w[j] * psi[j];
        out.fractional_integral[q] = frac_scale * frac;
        if (paths) (*paths)[q] = psi;
    }
    return out;
}

}  // namespace detail

/// Fractional Adams solution of D^alpha psi = F(a, psi), alpha = H + 1/2, on
/// `steps` uniform intervals of [0, t]. For alpha = 1 this is the trapezoidal rule.
inline CharFnSolution fractional_riccati_solve(cplx a, double t, const ModelParams& params, std::size_t steps) {
    std::vector<std::vector<cplx>> paths;
    const cplx arg[1] = {a};
    const auto res = detail::adams_batch(arg, t, params, steps, &paths);
    CharFnSolution sol{a, {}, std::move(paths[0]), params.alpha(), res.integral[0], res.fractional_integral[0]};
    sol.t_grid.resize(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) sol.t_grid[j] = t * static_cast<double>(j) / static_cast<double>(steps);
    return sol;
}

/// Characteristic function of the rough-Heston log-price for a batch of arguments.
inline std::vector<cplx> rough_heston_char_fn(std::span<const cplx> args, double t, const ModelParams& p,
                                              std::size_t steps) {
    const auto res = detail::adams_batch(args, t, p, steps);
    std::vector<cplx> out(args.size());
    for (std::size_t q = 0; q < args.size(); ++q)
        out[q] = std::exp(p.theta * p.lambda * res.integral[q] + p.v0 * res.fractional_integral[q]);
    return out;
}

/// Characteristic function of the log-price of the lifted model. The lift is
/// affine: with psi_i' = -gamma_i psi_i + F(a, sum_j c_j psi_j), psi_i(0) = 0,
///   log E[exp(i a log S_t)] = v0 int_0^t F ds + lambda theta sum_i c_i int_0^t psi_i ds.
/// Integrated with an implicit exponential trapezoid rule on the graded grid
/// s_j = t (j / steps)^2.
inline std::vector<cplx> lift_char_fn(std::span<const cplx> args, double t, const ModelParams& p,
                                      const LiftSpec& lift, std::size_t steps) {
    if (!(t > 0.0)) throw DomainError("maturity must be positive");
    if (steps < 8) throw ConfigError("lift Riccati solver needs at least 8 steps");
    const std::size_t n = lift.size();
    std::vector<double> grid(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) {
        const double x = static_cast<double>(j) / static_cast<double>(steps);
        grid[j] = t * x * x;
    }
    // Per step and node: exp(-gamma h), int_0^h exp(-gamma(h-r)) dr, int_0^h exp(-gamma(h-r)) r/h dr.
    std::vector<double> decay(steps * n), w_const(steps * n), w_lin(steps * n), w_lin_sum(steps, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        const double h = grid[s + 1] - grid[s];
        for (std::size_t i = 0; i < n; ++i) {
            const double g = lift.nodes[i].speed;
            const double x = g * h;
            const std::size_t idx = s * n + i;
            decay[idx] = std::exp(-x);
            if (x < 1e-4) {
                w_const[idx] = h * (1.0 - x / 2.0 + x * x / 6.0);
                w_lin[idx] = h * (0.5 - x / 6.0 + x * x / 24.0);
            } else {
                w_const[idx] = -std::expm1(-x) / g;
                w_lin[idx] = (h - w_const[idx]) / x;
            }
            w_lin_sum[s] += lift.nodes[i].weight * w_lin[idx];
        }
    }

    // With F linear in time over a step, the aggregate Z = sum_i c_i psi_i at
    // the step end solves Z = P + W F(Z); the quadratic is solved exactly.
    std::vector<cplx> out(args.size());
    std::vector<cplx> psi(n), prev(n), chi(n);
    for (std::size_t q = 0; q < args.size(); ++q) {
        const detail::RiccatiForcing f(args[q], p);
        std::fill(psi.begin(), psi.end(), cplx(0.0));
        std::fill(chi.begin(), chi.end(), cplx(0.0));
        cplx f0 = f(0.0);
        cplx big_f = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const double h = grid[s + 1] - grid[s];
            const std::size_t base = s * n;
            prev = psi;
            cplx known = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                known += lift.nodes[i].weight *
                         (decay[base + i] * prev[i] + (w_const[base + i] - w_lin[base + i]) * f0);
            const double w = w_lin_sum[s];
            const cplx agg = detail::small_root(w * f.quadratic, w * f.linear, known + w * f.constant);
            if (!(std::abs(agg) < detail::overflow_guard)) throw SolverError("lift Riccati solution diverged", s + 1);
            const cplx f1 = f(agg);
            for (std::size_t i = 0; i < n; ++i) {
                psi[i] = decay[base + i] * prev[i] + w_const[base + i] * f0 + w_lin[base + i] * (f1 - f0);
                chi[i] += 0.5 * h * (prev[i] + psi[i]);
            }
            big_f += 0.5 * h * (f0 + f1);
            f0 = f1;
        }
        cplx acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += lift.nodes[i].weight * chi[i];
        out[q] = std::exp(p.v0 * big_f + p.lambda * p.theta * acc);
    }
    return out;
}

/// Controls of the damped Fourier inversion.
struct FourierConfig {
    double damping = 0.75;
    double rel_tol = 1e-9;          ///< successive refinements must agree to this relative...
    double abs_tol = 1e-14;         ///< ...or absolute tolerance
    double truncation = 40.0;       ///< initial cut-off in units of 1/(vol_scale sqrt t)
    double first_panel = 0.05;      ///< width of the panel at the origin
    std::size_t max_refinements = 5;
    std::size_t riccati_steps = 1024;  ///< grid size of the Riccati solvers
};

namespace detail {

struct FourierNodes {
    std::vector<double> u;
    std::vector<double> w;
};

/// Gauss-Legendre (order 20) nodes on [0, first] followed by geometric panels
/// of ratio 2^(1/split) up to `upper`.
inline FourierNodes fourier_nodes(double first, double upper, std::size_t split) {
    using gauss = boost::math::quadrature::gauss<double, 20>;
    std::vector<double> edges{0.0};
    const std::size_t sub = split;
    for (std::size_t i = 0; i < sub; ++i) edges.push_back(first * static_cast<double>(i + 1) / static_cast<double>(sub));
    const double ratio = std::pow(2.0, 1.0 / static_cast<double>(split));
    while (edges.back() < upper) edges.push_back(edges.back() * ratio);

    FourierNodes nodes;
    const auto& x = gauss::abscissa();
    const auto& wt = gauss::weights();
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        const double mid = 0.5 * (edges[e] + edges[e + 1]);
        const double half = 0.5 * (edges[e + 1] - edges[e]);
        for (std::size_t i = 0; i < x.size(); ++i) {
            nodes.u.push_back(mid - half * x[i]);
            nodes.w.push_back(half * wt[i]);
            if (x[i] != 0.0) {
                nodes.u.push_back(mid + half * x[i]);
                nodes.w.push_back(half * wt[i]);
            }
        }
    }
    return nodes;
}

}  // namespace detail

/// Undiscounted call prices (forward 1) by the damped Fourier representation
///   C(k) = exp(-a x) / pi int_0^inf Re[exp(-i u x) phi(u - (a+1) i) / ((a + i u)(a + 1 + i u))] du,
/// x = log k. `char_fn` maps a span of complex arguments to E[exp(i z log S_t)].
/// `vol_scale` is a rough volatility level setting the integration scale.
/// Panels are refined until two successive rules agree.
template <class CharFn>
std::vector<double> fourier_call_prices(double t, std::span<const double> strikes, CharFn&& char_fn,
                                        double vol_scale, const FourierConfig& cfg = {}) {
    if (!(t > 0.0)) throw DomainError("maturity must be positive");
    for (double k : strikes)
        if (!(k > 0.0)) throw DomainError("strikes must be positive");
    const double a = cfg.damping;
    const double scale = 1.0 / (vol_scale * std::sqrt(t));
    double upper = cfg.truncation * std::max(1.0, scale);

    auto evaluate = [&](std::size_t split, double& tail) {
        const auto nodes = detail::fourier_nodes(cfg.first_panel, upper, split);
        std::vector<cplx> args(nodes.u.size());
        for (std::size_t i = 0; i < args.size(); ++i) args[i] = cplx(nodes.u[i], -(a + 1.0));
        const std::vector<cplx> phi = char_fn(std::span<const cplx>(args));
        tail = 0.0;
        const std::size_t last = nodes.u.size() > 20 ? nodes.u.size() - 20 : 0;
        for (std::size_t i = last; i < nodes.u.size(); ++i) tail = std::max(tail, std::abs(phi[i]) / nodes.u[i]);
        std::vector<double> prices;
        prices.reserve(strikes.size());
        for (double k : strikes) {
            const double x = std::log(k);
            double sum = 0.0;
            for (std::size_t i = 0; i < nodes.u.size(); ++i) {
                const double u = nodes.u[i];
                const cplx den = cplx(a, u) * cplx(a + 1.0, u);
                sum += nodes.w[i] * (std::exp(cplx(0.0, -u * x)) * phi[i] / den).real();
            }
            prices.push_back(std::exp(-a * x) / std::numbers::pi * sum);
        }
        return prices;
    };

    double tail = 0.0;
    std::vector<double> coarse = evaluate(1, tail);
    for (int grow = 0; tail > 0.1 * cfg.abs_tol && grow < 40; ++grow) {
        upper *= 2.0;
        coarse = evaluate(1, tail);
    }
    std::size_t split = 1;
    for (std::size_t r = 0; r < cfg.max_refinements; ++r) {
        split *= 2;
        const std::vector<double> fine = evaluate(split, tail);
        bool ok = true;
        for (std::size_t j = 0; j < fine.size(); ++j) {
            const double diff = std::abs(fine[j] - coarse[j]);
            if (!(diff <= std::max(cfg.rel_tol * std::abs(fine[j]), cfg.abs_tol))) ok = false;
        }
        if (ok) return fine;
        coarse = fine;
    }
    throw PricingError("Fourier quadrature did not converge");
}

/// Call prices of the classical Heston model (parameters' H ignored).
inline std::vector<double> heston_call_prices(double t, std::span<const double> strikes, const ModelParams& p,
                                              const FourierConfig& cfg = {}) {
    auto cf = [&](std::span<const cplx> z) {
        std::vector<cplx> out(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = heston_char_fn(z[i], t, p);
        return out;
    };
    return fourier_call_prices(t, strikes, cf, std::sqrt(std::max(p.v0, p.theta)), cfg);
}

/// Call prices of the rough-Heston model from the fractional Riccati solver.
inline std::vector<double> rough_heston_call_prices(double t, std::span<const double> strikes, const ModelParams& p,
                                                    const FourierConfig& cfg = {}) {
    p.validate();
    auto cf = [&](std::span<const cplx> z) { return rough_heston_char_fn(z, t, p, cfg.riccati_steps); };
    return fourier_call_prices(t, strikes, cf, std::sqrt(std::max(p.v0, p.theta)), cfg);
}

inline double rough_heston_cf_price(double t, double k, const ModelParams& p, const FourierConfig& cfg = {}) {
    const double strikes[1] = {k};
    return rough_heston_call_prices(t, strikes, p, cfg)[0];
}

/// Call prices of the lifted model from its multi-factor Riccati system.
inline std::vector<double> lift_call_prices(double t, std::span<const double> strikes, const ModelParams& p,
                                            const LiftSpec& lift, const FourierConfig& cfg = {}) {
    p.validate();
    lift.validate();
    auto cf = [&](std::span<const cplx> z) { return lift_char_fn(z, t, p, lift, cfg.riccati_steps); };
    return fourier_call_prices(t, strikes, cf, std::sqrt(std::max(p.v0, p.theta)), cfg);
}

}  // namespace roughlv
