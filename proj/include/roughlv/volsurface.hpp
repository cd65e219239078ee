#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/vanilla.hpp"

namespace roughlv {

// ---------------------------------------------------------------------------
// Singular coordinates theta = t, zeta = t^(H-1/2) log k
// ---------------------------------------------------------------------------

struct SingularPoint {
    double theta;
    double zeta;
};

inline SingularPoint to_singular_coords(double t, double k, double hurst) {
    if (!(t > 0.0)) throw DomainError("singular coordinates need t > 0");
    if (!(k > 0.0)) throw DomainError("singular coordinates need k > 0");
    return {t, std::pow(t, hurst - 0.5) * std::log(k)};
}

struct TimeStrike {
    double t;
    double k;
};

inline TimeStrike from_singular_coords(double theta, double zeta, double hurst) {
    if (!(theta > 0.0)) throw DomainError("singular coordinates need theta > 0");
    return {theta, std::exp(zeta * std::pow(theta, 0.5 - hurst))};
}

// ---------------------------------------------------------------------------
// Dupire local volatility from implied volatility
// ---------------------------------------------------------------------------

/// Implied volatility and the derivatives entering the Dupire formula at one (t, k).
struct ImpliedVolJet {
    double sigma;
    double d_t;
    double d_k;
    double d_kk;
};

/// Local volatility from an implied-volatility jet:
///   eta^2 = (s^2 + 2 s t s_t) /
///           (1 + 2 k sqrt(t) (y + s sqrt(t)) s_k + k^2 s t s_kk + k^2 t y (y + s sqrt(t)) s_k^2),
/// y = -log(k) / (s sqrt(t)) - s sqrt(t) / 2.
inline double dupire_local_vol(const ImpliedVolJet& jet, double t, double k) {
    if (!(t > 0.0) || !(k > 0.0)) throw DomainError("dupire_local_vol needs t > 0, k > 0");
    const double s = jet.sigma;
    const double sqrt_t = std::sqrt(t);
    const double y = -std::log(k) / (s * sqrt_t) - 0.5 * s * sqrt_t;
    const double num = s * s + 2.0 * s * t * jet.d_t;
    const double den = 1.0 + 2.0 * k * sqrt_t * (y + s * sqrt_t) * jet.d_k + k * k * s * t * jet.d_kk +
                       k * k * t * y * (y + s * sqrt_t) * jet.d_k * jet.d_k;
    if (!(den > 0.0)) throw ArbitrageError("non-positive Dupire denominator (butterfly arbitrage)", t, k);
    if (!(num >= 0.0)) throw ArbitrageError("negative Dupire numerator (calendar arbitrage)", t, k);
    return std::sqrt(num / den);
}

/// Dupire local volatility of a smooth implied-volatility function sigma(t, k)
/// with derivatives from central differences: relative bump 1e-4 in k and
/// absolute bump 1e-4 in t (halved towards zero for very short maturities).
template <class ImpliedVol>
double dupire_local_vol(const ImpliedVol& sigma, double t, double k) {
    const double hk = 1e-4 * k;
    const double ht = std::min(1e-4, 0.5 * t);
    const double s0 = sigma(t, k);
    const double sp = sigma(t, k + hk);
    const double sm = sigma(t, k - hk);
    const ImpliedVolJet jet{s0, (sigma(t + ht, k) - sigma(t - ht, k)) / (2.0 * ht), (sp - sm) / (2.0 * hk),
                            (sp - 2.0 * s0 + sm) / (hk * hk)};
    return dupire_local_vol(jet, t, k);
}

// ---------------------------------------------------------------------------
// Monotone cubic interpolation
// ---------------------------------------------------------------------------

/// Cubic Hermite interpolant with Fritsch-Carlson derivative limiting: monotone
/// on every interval where the data are monotone, never leaving the range of
/// the two bracketing nodes. Constant extrapolation beyond the end nodes.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n == 0 || y_.size() != n) throw ConfigError("monotone cubic needs matching non-empty nodes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw ConfigError("monotone cubic abscissae must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 1) return;

        std::vector<double> secant(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) secant[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_[0] = secant[0];
        m_[n - 1] = secant[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            m_[i] = secant[i - 1] * secant[i] <= 0.0 ? 0.0 : 0.5 * (secant[i - 1] + secant[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (secant[i] == 0.0) {
                m_[i] = m_[i + 1] = 0.0;
                continue;
            }
            const double a = m_[i] / secant[i];
            const double b = m_[i + 1] / secant[i];
            // Opposite-signed end tangents are zeroed to keep the piece monotone.
            if (a < 0.0) m_[i] = 0.0;
            if (b < 0.0) m_[i + 1] = 0.0;
            const double r = a * a + b * b;
            if (r > 9.0) {
                const double tau = 3.0 / std::sqrt(r);
                m_[i] = tau * a * secant[i];
                m_[i + 1] = tau * b * secant[i];
            }
        }
    }

    [[nodiscard]] double operator()(double x) const {
        if (!(x > x_.front())) return y_.front();
        if (!(x < x_.back())) return y_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double s = (x - x_[i]) / h;
        const double s2 = s * s;
        const double s3 = s2 * s;
        const double v = (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * m_[i] +
                         (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * m_[i + 1];
        // The piece stays within its bracket; clamping removes rounding excursions.
        return std::clamp(v, std::min(y_[i], y_[i + 1]), std::max(y_[i], y_[i + 1]));
    }

    [[nodiscard]] const std::vector<double>& nodes() const noexcept { return x_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return y_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

// ---------------------------------------------------------------------------
// Quotes and local-volatility surfaces on a maturity x strike lattice
// ---------------------------------------------------------------------------

struct QuoteLattice {
    std::vector<double> maturities;
    std::vector<std::vector<double>> strikes;  ///< per maturity, moneyness
    std::vector<std::vector<double>> vols;     ///< per maturity, Black implied vols

    void validate() const {
        if (maturities.empty()) throw ConfigError("quote lattice is empty");
        if (strikes.size() != maturities.size() || vols.size() != maturities.size())
            throw ConfigError("quote lattice rows do not match maturities");
        for (std::size_t i = 0; i < maturities.size(); ++i) {
            if (!(maturities[i] > 0.0)) throw ConfigError("maturities must be positive");
            if (i > 0 && !(maturities[i] > maturities[i - 1])) throw ConfigError("maturities must be increasing");
            if (strikes[i].empty() || strikes[i].size() != vols[i].size())
                throw ConfigError("each maturity needs matching strikes and vols");
            for (std::size_t j = 0; j < strikes[i].size(); ++j) {
                if (!(strikes[i][j] > 0.0)) throw ConfigError("strikes must be positive");
                if (j > 0 && !(strikes[i][j] > strikes[i][j - 1])) throw ConfigError("strikes must be increasing");
                if (!(vols[i][j] > 0.0)) throw ConfigError("implied vols must be positive");
            }
        }
    }

    [[nodiscard]] std::size_t quote_count() const {
        std::size_t n = 0;
        for (const auto& row : strikes) n += row.size();
        return n;
    }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_number(const std::string& cell, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw ParseError("trailing characters in '" + cell + "'", line);
        return v;
    } catch (const std::invalid_argument&) {
        throw ParseError("not a number: '" + cell + "'", line);
    } catch (const std::out_of_range&) {
        throw ParseError("number out of range: '" + cell + "'", line);
    }
}

/// Rows of a three-column table with the given header; '#' lines are skipped.
inline std::vector<std::array<double, 3>> read_table(std::istream& in, const std::array<std::string, 3>& header) {
    std::vector<std::array<double, 3>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv(line);
        if (!seen_header) {
            if (cells.size() != 3 || cells[0] != header[0] || cells[1] != header[1] || cells[2] != header[2])
                throw ParseError("expected header '" + header[0] + "," + header[1] + "," + header[2] + "'", lineno);
            seen_header = true;
            continue;
        }
        if (cells.size() != 3) throw ParseError("expected 3 columns", lineno);
        rows.push_back({parse_number(cells[0], lineno), parse_number(cells[1], lineno), parse_number(cells[2], lineno)});
    }
    if (!seen_header) throw ParseError("missing header", lineno);
    return rows;
}

inline void group_rows(const std::vector<std::array<double, 3>>& rows, std::vector<double>& maturities,
                       std::vector<std::vector<double>>& strikes, std::vector<std::vector<double>>& values) {
    std::map<double, std::map<double, double>> grouped;
    for (const auto& r : rows) grouped[r[0]][r[1]] = r[2];
    for (const auto& [t, row] : grouped) {
        maturities.push_back(t);
        strikes.emplace_back();
        values.emplace_back();
        for (const auto& [k, v] : row) {
            strikes.back().push_back(k);
            values.back().push_back(v);
        }
    }
}

}  // namespace detail

/// Quotes from delimited text with header `maturity,strike,implied_vol`.
inline QuoteLattice read_quotes(std::istream& in) {
    QuoteLattice q;
    detail::group_rows(detail::read_table(in, {"maturity", "strike", "implied_vol"}), q.maturities, q.strikes, q.vols);
    try {
        q.validate();
    } catch (const ConfigError& e) {
        throw ParseError(std::string("invalid quote set: ") + e.what(), 0);
    }
    return q;
}

inline void write_quotes(std::ostream& out, const QuoteLattice& q) {
    out << "maturity,strike,implied_vol\n";
    char buf[128];
    for (std::size_t i = 0; i < q.maturities.size(); ++i)
        for (std::size_t j = 0; j < q.strikes[i].size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", q.maturities[i], q.strikes[i][j], q.vols[i][j]);
            out << buf;
        }
}

/// Local volatility eta_hat(t, k) defined by nodal values on a quote lattice:
/// piecewise constant in theta = t, with slice i covering (T_{i-1}, T_i]
/// (the first slice extended down to the origin, the last to infinity), and
/// along zeta = t^(H-1/2) log k a monotone cubic through the slice's nodes
/// (node zeta taken at the slice's own maturity) with flat extrapolation.
/// Below the cut-off delta the surface is flat in time at fixed zeta, or at
/// fixed strike when `flat_strike_below_delta` is set.
class LocalVolSurface {
public:
    LocalVolSurface() = default;

    LocalVolSurface(std::vector<double> maturities, std::vector<std::vector<double>> strikes,
                    std::vector<std::vector<double>> values, double hurst, double delta,
                    bool flat_strike_below_delta = false)
        : maturities_(std::move(maturities)),
          strikes_(std::move(strikes)),
          values_(std::move(values)),
          hurst_(hurst),
          delta_(delta),
          flat_strike_below_delta_(flat_strike_below_delta) {
        QuoteLattice{maturities_, strikes_, values_}.validate();
        if (!(hurst_ > 0.0 && hurst_ <= 0.5)) throw ConfigError("hurst must lie in (0, 1/2]");
        if (!(delta_ > 0.0)) throw ConfigError("delta cut-off must be positive");
        rebuild();
    }

    /// Surface with nodal values initialised to the quoted implied vols.
    static LocalVolSurface from_quotes(const QuoteLattice& q, double hurst, double delta,
                                       bool flat_strike_below_delta = false) {
        return {q.maturities, q.strikes, q.vols, hurst, delta, flat_strike_below_delta};
    }

    /// interpolate_psi: eta_hat(t, k) for t > 0, k > 0.
    [[nodiscard]] double operator()(double t, double k) const {
        const double log_k = std::log(k);
        double zeta;
        if (t < delta_ && flat_strike_below_delta_)
            zeta = std::pow(delta_, hurst_ - 0.5) * log_k;
        else
            zeta = log_k == 0.0 ? 0.0 : std::pow(t, hurst_ - 0.5) * log_k;
        return splines_[slice_index(t)](zeta);
    }

    /// Index of the maturity slice that governs time t.
    [[nodiscard]] std::size_t slice_index(double t) const {
        const auto it = std::lower_bound(maturities_.begin(), maturities_.end(), t);
        if (it == maturities_.end()) return maturities_.size() - 1;
        return static_cast<std::size_t>(it - maturities_.begin());
    }

    void set_nodal_values(std::vector<std::vector<double>> values) {
        values_ = std::move(values);
        QuoteLattice{maturities_, strikes_, values_}.validate();
        rebuild();
    }

    [[nodiscard]] const std::vector<double>& maturities() const noexcept { return maturities_; }
    [[nodiscard]] const std::vector<std::vector<double>>& strikes() const noexcept { return strikes_; }
    [[nodiscard]] const std::vector<std::vector<double>>& nodal_values() const noexcept { return values_; }
    [[nodiscard]] double hurst() const noexcept { return hurst_; }
    [[nodiscard]] double delta() const noexcept { return delta_; }
    [[nodiscard]] bool flat_strike_below_delta() const noexcept { return flat_strike_below_delta_; }

    /// The zeta-direction interpolant of one slice.
    [[nodiscard]] const MonotoneCubic& slice(std::size_t i) const { return splines_.at(i); }

private:
    void rebuild() {
        splines_.clear();
        for (std::size_t i = 0; i < maturities_.size(); ++i) {
            std::vector<double> z;
            for (double k : strikes_[i]) z.push_back(to_singular_coords(maturities_[i], k, hurst_).zeta);
            splines_.emplace_back(std::move(z), values_[i]);
        }
    }

    std::vector<double> maturities_;
    std::vector<std::vector<double>> strikes_;
    std::vector<std::vector<double>> values_;
    double hurst_ = 0.5;
    double delta_ = 1.0 / 730.0;
    bool flat_strike_below_delta_ = false;
    std::vector<MonotoneCubic> splines_;
};

/// eta_hat(t, k) of a nodal surface.
inline double interpolate_psi(const LocalVolSurface& surface, double t, double k) {
    if (!(t > 0.0) || !(k > 0.0)) throw DomainError("interpolate_psi needs t > 0, k > 0");
    return surface(t, k);
}

/// `# hurst=<H> delta=<delta> flat_strike=<0|1>` sidecar line, then
/// `maturity,strike,local_vol` rows.
inline void write_local_vol(std::ostream& out, const LocalVolSurface& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# hurst=%.17g delta=%.17g flat_strike=%d\n", s.hurst(), s.delta(),
                  s.flat_strike_below_delta() ? 1 : 0);
    out << buf << "maturity,strike,local_vol\n";
    for (std::size_t i = 0; i < s.maturities().size(); ++i)
        for (std::size_t j = 0; j < s.strikes()[i].size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.maturities()[i], s.strikes()[i][j],
                          s.nodal_values()[i][j]);
            out << buf;
        }
}

/// Reads write_local_vol output; the sidecar may follow other '#' lines.
inline LocalVolSurface read_local_vol(std::istream& in) {
    std::stringstream body;
    body << in.rdbuf();
    std::string line;
    double hurst = 0.0, delta = 0.0;
    int flat = 0;
    bool found = false;
    while (!found && std::getline(body, line) && !line.empty() && line[0] == '#')
        found = std::sscanf(line.c_str(), "# hurst=%lf delta=%lf flat_strike=%d", &hurst, &delta, &flat) >= 2;
    if (!found) throw ParseError("expected sidecar line '# hurst=<H> delta=<delta>'", 1);
    body.clear();
    body.seekg(0);
    std::vector<double> t;
    std::vector<std::vector<double>> k, v;
    detail::group_rows(detail::read_table(body, {"maturity", "strike", "local_vol"}), t, k, v);
    try {
        return {t, k, v, hurst, delta, flat != 0};
    } catch (const ConfigError& e) {
        throw ParseError(std::string("invalid local-vol surface: ") + e.what(), 0);
    }
}

// ---------------------------------------------------------------------------
// Forward Dupire PDE pricer and nodal calibration
// ---------------------------------------------------------------------------

struct PdeConfig {
    std::size_t space_nodes = 400;
    double width_sd = 6.0;          ///< half-width of the log-strike grid in total standard deviations
    double max_dt = 1.0 / 365.0;
    std::size_t rannacher_steps = 2;  ///< leading steps replaced by two implicit half-steps each

    void validate() const {
        if (space_nodes < 16) throw ConfigError("PDE grid needs at least 16 nodes");
        if (!(width_sd > 0.0)) throw ConfigError("PDE grid width must be positive");
        if (!(max_dt > 0.0)) throw ConfigError("PDE time step must be positive");
    }
};

namespace detail {

inline void solve_tridiagonal(const std::vector<double>& lower, std::vector<double> diag,
                              const std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

/// One theta-scheme step of C_t = 1/2 eta^2 (C_xx - C_x) with Dirichlet ends.
inline void theta_step(std::vector<double>& c, const std::vector<double>& half_var, double dx, double dt,
                       double theta) {
    const std::size_t n = c.size();
    const double a = 1.0 / (dx * dx) + 0.5 / dx;  // coefficient of C_{j-1}
    const double b = 1.0 / (dx * dx) - 0.5 / dx;  // coefficient of C_{j+1}
    std::vector<double> lower(n, 0.0), diag(n, 1.0), upper(n, 0.0), rhs(c);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double q = half_var[j];
        const double explicit_part = q * (a * c[j - 1] - (a + b) * c[j] + b * c[j + 1]);
        rhs[j] = c[j] + (1.0 - theta) * dt * explicit_part;
        lower[j] = -theta * dt * q * a;
        diag[j] = 1.0 + theta * dt * q * (a + b);
        upper[j] = -theta * dt * q * b;
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    c.swap(rhs);
}

/// Cubic Lagrange interpolation on a uniform grid.
inline double grid_interpolate(const std::vector<double>& c, double x0, double dx, double x) {
    const double s = (x - x0) / dx;
    auto i = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(c.size()) - 4);
    const double u = s - static_cast<double>(i);
    const auto at = [&](std::ptrdiff_t j) { return c[static_cast<std::size_t>(i + j)]; };
    return -at(0) * (u - 1) * (u - 2) * (u - 3) / 6.0 + at(1) * u * (u - 2) * (u - 3) / 2.0 -
           at(2) * u * (u - 1) * (u - 3) / 2.0 + at(3) * u * (u - 1) * (u - 2) / 6.0;
}

}  // namespace detail

/// Call prices under the one-factor dynamics dS = S eta(t, S) dW for the
/// lattice maturities and strikes, by a theta-scheme (Crank-Nicolson with a
/// Rannacher start) on the forward Dupire equation in log-strike.
template <class LocalVol>
std::vector<std::vector<double>> pde_call_prices(const LocalVol& eta, const std::vector<double>& maturities,
                                                 const std::vector<std::vector<double>>& strikes, double vol_scale,
                                                 const PdeConfig& cfg = {}) {
    cfg.validate();
    if (maturities.empty()) return {};
    const std::size_t n = cfg.space_nodes;
    const double half_width = cfg.width_sd * vol_scale * std::sqrt(maturities.back());
    double x_lo = -half_width, x_hi = half_width;
    for (const auto& row : strikes)
        for (double k : row) {
            x_lo = std::min(x_lo, std::log(k) - 0.1 * half_width);
            x_hi = std::max(x_hi, std::log(k) + 0.1 * half_width);
        }
    const double dx = (x_hi - x_lo) / static_cast<double>(n - 1);
    std::vector<double> x(n), strike(n), c(n), half_var(n);
    for (std::size_t j = 0; j < n; ++j) {
        x[j] = x_lo + dx * static_cast<double>(j);
        strike[j] = std::exp(x[j]);
        c[j] = std::max(1.0 - strike[j], 0.0);
        // Cell average of the payoff (1 - e^x)^+ in the cell holding the kink.
        const double lo = x[j] - 0.5 * dx;
        if (lo < 0.0 && x[j] + 0.5 * dx > 0.0) c[j] = (-lo - (1.0 - std::exp(lo))) / dx;
    }

    std::vector<std::vector<double>> out(maturities.size());
    double t = 0.0;
    std::size_t step = 0;
    const auto advance = [&](double dt, double theta) {
        const double tm = t + 0.5 * dt;
        for (std::size_t j = 1; j + 1 < n; ++j) {
            const double e = eta(tm, strike[j]);
            half_var[j] = 0.5 * e * e;
        }
        detail::theta_step(c, half_var, dx, dt, theta);
        t += dt;
    };
    for (std::size_t i = 0; i < maturities.size(); ++i) {
        const double gap = maturities[i] - t;
        const auto steps = static_cast<std::size_t>(std::ceil(gap / cfg.max_dt - 1e-9));
        const double dt = gap / static_cast<double>(std::max<std::size_t>(steps, 1));
        for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s, ++step) {
            if (step < cfg.rannacher_steps) {
                advance(0.5 * dt, 1.0);
                advance(0.5 * dt, 1.0);
            } else {
                advance(dt, 0.5);
            }
        }
        t = maturities[i];
        for (double v : c)
            if (!std::isfinite(v)) throw SolverError("PDE solution became non-finite", step);
        for (double k : strikes[i]) out[i].push_back(detail::grid_interpolate(c, x_lo, dx, std::log(k)));
    }
    return out;
}

/// Black implied vols of a lattice of call prices; strikes below the forward
/// are inverted through the put price for accuracy.
inline std::vector<std::vector<double>> lattice_implied_vols(const std::vector<double>& maturities,
                                                             const std::vector<std::vector<double>>& strikes,
                                                             const std::vector<std::vector<double>>& calls) {
    std::vector<std::vector<double>> out(maturities.size());
    for (std::size_t i = 0; i < maturities.size(); ++i)
        for (std::size_t j = 0; j < strikes[i].size(); ++j) {
            const double k = strikes[i][j];
            out[i].push_back(k < 1.0 ? implied_vol(calls[i][j] - (1.0 - k), maturities[i], k, OptionKind::put)
                                     : implied_vol(calls[i][j], maturities[i], k, OptionKind::call));
        }
    return out;
}

struct LocalVolCalibrationConfig {
    double tolerance = 1e-5;  ///< max absolute implied-vol error
    std::size_t max_iterations = 200;
    double delta = 1.0 / 730.0;
    bool flat_strike_below_delta = false;
    bool require_convergence = true;  ///< otherwise the best iterate is returned at the cap
    PdeConfig pde;
};

struct LocalVolCalibration {
    LocalVolSurface surface;
    std::vector<std::vector<double>> model_vols;
    std::vector<std::vector<double>> errors;  ///< model minus quoted implied vol
    std::vector<double> history;              ///< max absolute error per iteration
    [[nodiscard]] double max_error() const {
        double m = 0.0;
        for (const auto& row : errors)
            for (double e : row) m = std::max(m, std::abs(e));
        return m;
    }
};

namespace detail {

inline double quote_scale(const QuoteLattice& q) {
    double s = 0.0;
    for (const auto& row : q.vols)
        for (double v : row) s = std::max(s, v);
    return s;
}

inline double max_abs_error(const QuoteLattice& q, const std::vector<std::vector<double>>& model,
                            std::vector<std::vector<double>>& errors) {
    errors.assign(q.maturities.size(), {});
    double worst = 0.0;
    for (std::size_t i = 0; i < q.maturities.size(); ++i)
        for (std::size_t j = 0; j < q.strikes[i].size(); ++j) {
            errors[i].push_back(model[i][j] - q.vols[i][j]);
            worst = std::max(worst, std::abs(errors[i].back()));
        }
    return worst;
}

}  // namespace detail

inline LocalVolCalibration reprice_local_vol(const LocalVolSurface& surface, const QuoteLattice& q,
                                             const PdeConfig& pde = {}) {
    LocalVolCalibration r{surface, {}, {}, {}};
    const auto calls = pde_call_prices(surface, q.maturities, q.strikes, detail::quote_scale(q), pde);
    r.model_vols = lattice_implied_vols(q.maturities, q.strikes, calls);
    r.history.push_back(detail::max_abs_error(q, r.model_vols, r.errors));
    return r;
}

/// Fixed-point calibration of nodal local vols: start from the quoted vols
/// (or `initial` nodal values), reprice with the PDE and rescale each node by
/// (quoted / model)^w. The exponent w starts at 1 and is halved whenever the
/// error grows.
inline LocalVolCalibration calibrate_local_vol(const QuoteLattice& q, double hurst,
                                               const LocalVolCalibrationConfig& cfg = {},
                                               const std::vector<std::vector<double>>* initial = nullptr) {
    q.validate();
    for (std::size_t i = 0; i < q.maturities.size(); ++i)
        for (std::size_t j = 0; j < q.strikes[i].size(); ++j) {
            const double k = q.strikes[i][j];
            const double lo = std::max(1.0 - k, 0.0);
            const double price = black_price(q.maturities[i], k, q.vols[i][j]);
            if (!(price > lo && price < 1.0)) throw ArbitrageError("quote outside the no-arbitrage band", q.maturities[i], k);
        }

    auto surface = LocalVolSurface::from_quotes(q, hurst, cfg.delta, cfg.flat_strike_below_delta);
    if (initial) surface.set_nodal_values(*initial);
    auto best = reprice_local_vol(surface, q, cfg.pde);
    std::vector<double> history{best.max_error()};
    double exponent = 1.0;
    auto current = best;
    for (std::size_t it = 0; it < cfg.max_iterations && best.max_error() > cfg.tolerance; ++it) {
        auto nodes = current.surface.nodal_values();
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (std::size_t j = 0; j < nodes[i].size(); ++j)
                nodes[i][j] *= std::pow(q.vols[i][j] / current.model_vols[i][j], exponent);
        surface.set_nodal_values(std::move(nodes));
        auto next = reprice_local_vol(surface, q, cfg.pde);
        history.push_back(next.max_error());
        if (next.max_error() > current.max_error()) exponent *= 0.5;
        if (next.max_error() < best.max_error()) best = next;
        current = std::move(next);
    }
    best.history = std::move(history);
    if (cfg.require_convergence && best.max_error() > cfg.tolerance)
        throw CalibrationError("local-vol calibration did not reach tolerance", best.errors);
    return best;
}

}  // namespace roughlv
