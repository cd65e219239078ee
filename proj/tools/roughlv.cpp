// Command-line front end: lift, simulate, price, calibrate-lv,
// calibrate-leverage and skew-study, configured by an INI file plus
// section.key=value overrides.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "roughlv/fourier.hpp"
#include "roughlv/hmlv.hpp"
#include "roughlv/io.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/rough_mc.hpp"
#include "roughlv/skewlab.hpp"
#include "roughlv/vanilla.hpp"
#include "roughlv/volsurface.hpp"

using namespace roughlv;

namespace {

const std::set<std::string> known_keys{
    "model.v0", "model.theta", "model.lambda", "model.nu", "model.rho", "model.hurst",
    "lift.file", "lift.factors", "lift.horizon", "lift.short_scale", "lift.gamma_min", "lift.gamma_max",
    "lift.error_lo", "lift.error_hi", "lift.error_points",
    "sim.paths", "sim.maturities", "sim.antithetic", "sim.steps_per_year", "sim.scheme",
    "price.maturities", "price.strikes", "price.method",
    "quotes.file", "surface.file", "surface.delta", "surface.flat_strike_below_delta",
    "calibration.tolerance_bp", "calibration.max_iterations",
    "pde.space_nodes", "pde.width_sd", "pde.steps_per_year", "pde.rannacher_steps",
    "fourier.riccati_steps", "fourier.rel_tol",
    "leverage.paths", "leverage.steps_per_year", "leverage.antithetic", "leverage.passes", "leverage.tolerance_bp",
    "leverage.bins", "leverage.damping", "leverage.validation_seed",
    "skew.t_min", "skew.t_max", "skew.points", "skew.zeta_eps", "skew.slope_tolerance",
    "run.seed", "run.command", "output.dir"};

struct Context {
    ConfigTree& cfg;
    ArtifactWriter& out;
    std::uint64_t seed;
    unsigned threads;
    bool dump_paths;
};

QuoteLattice load_quotes(const ConfigTree& cfg) {
    const std::string file = cfg.text("quotes.file", "");
    if (file.empty()) throw ConfigError("quotes.file is required");
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open quote file " + file);
    return read_quotes(in);
}

LocalVolCalibrationConfig lv_calibration_config(const ConfigTree& cfg) {
    LocalVolCalibrationConfig c;
    c.tolerance = cfg.number("calibration.tolerance_bp", 0.1) * 1e-4;
    c.max_iterations = cfg.integer("calibration.max_iterations", c.max_iterations);
    c.delta = cfg.number("surface.delta", c.delta);
    c.flat_strike_below_delta = cfg.flag("surface.flat_strike_below_delta", false);
    c.pde.space_nodes = cfg.integer("pde.space_nodes", c.pde.space_nodes);
    c.pde.width_sd = cfg.number("pde.width_sd", c.pde.width_sd);
    c.pde.max_dt = 1.0 / cfg.number("pde.steps_per_year", 1.0 / c.pde.max_dt);
    c.pde.rannacher_steps = cfg.integer("pde.rannacher_steps", c.pde.rannacher_steps);
    c.pde.validate();
    return c;
}

FourierConfig fourier_config(const ConfigTree& cfg) {
    FourierConfig f;
    f.riccati_steps = cfg.integer("fourier.riccati_steps", f.riccati_steps);
    f.rel_tol = cfg.number("fourier.rel_tol", f.rel_tol);
    return f;
}

/// Table-1 style report: per quote, model vol and error in vol bps.
void write_error_table(std::ostream& os, const QuoteLattice& q, const std::vector<std::vector<double>>& model,
                       const std::vector<std::vector<double>>* stderr_vol) {
    os << "maturity,strike,quote_vol,model_vol,error_bp" << (stderr_vol ? ",stderr_bp" : "") << "\n";
    for (std::size_t i = 0; i < q.maturities.size(); ++i)
        for (std::size_t j = 0; j < q.strikes[i].size(); ++j) {
            os << fmt17(q.maturities[i]) << ',' << fmt17(q.strikes[i][j]) << ',' << fmt17(q.vols[i][j]) << ','
               << fmt17(model[i][j]) << ',' << fmt17((model[i][j] - q.vols[i][j]) * 1e4);
            if (stderr_vol) os << ',' << fmt17((*stderr_vol)[i][j] * 1e4);
            os << '\n';
        }
}

int cmd_lift(Context& c) {
    const auto p = model_from_config(c.cfg);
    const auto lift = lift_from_config(c.cfg, p.hurst);
    {
        auto os = c.out.open("");
        write_lift(os, lift);
    }
    const auto grid = log_ladder(c.cfg.number("lift.error_lo", 1e-3), c.cfg.number("lift.error_hi", 2.0),
                                 c.cfg.integer("lift.error_points", 200));
    auto os = c.out.open("kernel");
    os << "t,kernel,lift_kernel,relative_error\n";
    for (double t : grid) {
        const double k = fractional_kernel(t, p.hurst);
        const double kn = lift.kernel(t);
        os << fmt17(t) << ',' << fmt17(k) << ',' << fmt17(kn) << ',' << fmt17((kn - k) / k) << '\n';
    }
    const auto err = kernel_approx_error(lift, p.hurst, grid);
    std::printf("lift: %zu nodes, gamma in [%.6g, %.6g], kernel rms rel error %.3g\n", lift.size(),
                lift.nodes.front().speed, lift.nodes.back().speed, err.rms);
    return exit_ok;
}

int cmd_simulate(Context& c) {
    const auto p = model_from_config(c.cfg);
    const auto lift = lift_from_config(c.cfg, p.hurst);
    auto sim = sim_from_config(c.cfg, c.seed);
    sim.threads = c.threads;
    const auto batch = simulate_lift(p, lift, sim);
    {
        auto os = c.out.open("");
        write_summary(os, batch);
    }
    if (c.dump_paths) {
        auto spot = c.out.open("spot");
        write_path_matrix(spot, batch, false);
        auto var = c.out.open("variance");
        write_path_matrix(var, batch, true);
    }
    std::printf("simulate: %zu paths, %zu grid times\n", batch.n_paths, batch.n_times());
    return exit_ok;
}

int cmd_price(Context& c) {
    const auto p = model_from_config(c.cfg);
    const auto maturities = c.cfg.numbers("price.maturities", {0.25, 0.5, 1.0});
    const auto strikes = c.cfg.numbers("price.strikes", {0.9, 0.95, 1.0, 1.05, 1.1});
    const std::string method = c.cfg.text("price.method", "fourier");
    if (method != "fourier" && method != "lift" && method != "mc")
        throw ConfigError("price.method must be fourier, lift or mc");
    const auto fc = fourier_config(c.cfg);

    auto os = c.out.open("");
    os << "maturity,strike,kind,price,implied_vol,stderr,method\n";
    auto emit = [&](double t, double k, double price, double se) {
        const OptionKind kind = k < 1.0 ? OptionKind::put : OptionKind::call;
        const double vol = implied_vol(price, t, k, kind);
        os << fmt17(t) << ',' << fmt17(k) << ',' << (kind == OptionKind::put ? "put" : "call") << ','
           << fmt17(price) << ',' << fmt17(vol) << ',' << fmt17(se) << ',' << method << '\n';
    };
    if (method == "mc") {
        const auto lift = lift_from_config(c.cfg, p.hurst);
        auto sim = sim_from_config(c.cfg, c.seed);
        sim.time_grid = maturities;
        sim.validate();
        sim.threads = c.threads;
        const auto batch = simulate_lift(p, lift, sim);
        for (double t : maturities)
            for (double k : strikes) {
                const auto mc = mc_price(batch, t, k, k < 1.0 ? OptionKind::put : OptionKind::call);
                emit(t, k, mc.price, mc.stderr_);
            }
    } else {
        const LiftSpec lift = method == "lift" ? lift_from_config(c.cfg, p.hurst) : LiftSpec{};
        for (double t : maturities) {
            const auto calls = method == "lift" ? lift_call_prices(t, strikes, p, lift, fc)
                                                : rough_heston_call_prices(t, strikes, p, fc);
            for (std::size_t j = 0; j < strikes.size(); ++j) {
                const double k = strikes[j];
                emit(t, k, k < 1.0 ? calls[j] - (1.0 - k) : calls[j], 0.0);
            }
        }
    }
    std::printf("price: %zu maturities x %zu strikes (%s)\n", maturities.size(), strikes.size(), method.c_str());
    return exit_ok;
}

int cmd_calibrate_lv(Context& c) {
    const auto q = load_quotes(c.cfg);
    const double hurst = c.cfg.number("model.hurst", 0.1);
    auto lc = lv_calibration_config(c.cfg);
    lc.require_convergence = false;
    const auto cal = calibrate_local_vol(q, hurst, lc);
    {
        auto os = c.out.open("");
        write_error_table(os, q, cal.model_vols, nullptr);
    }
    {
        auto os = c.out.open("surface");
        write_local_vol(os, cal.surface);
    }
    {
        auto os = c.out.open("history");
        os << "iteration,max_error_bp\n";
        for (std::size_t i = 0; i < cal.history.size(); ++i) os << i << ',' << fmt17(cal.history[i] * 1e4) << '\n';
    }
    std::printf("calibrate-lv: max error %.4f bp after %zu iterations\n", cal.max_error() * 1e4, cal.history.size() - 1);
    if (cal.max_error() > lc.tolerance) throw CalibrationError("local-vol calibration did not reach tolerance", cal.errors);
    return exit_ok;
}

int cmd_calibrate_leverage(Context& c) {
    const auto p = model_from_config(c.cfg);
    const auto q = load_quotes(c.cfg);
    const auto lift = lift_from_config(c.cfg, p.hurst);
    auto lc = lv_calibration_config(c.cfg);

    LocalVolSurface surface;
    const std::string surface_file = c.cfg.text("surface.file", "");
    if (!surface_file.empty()) {
        std::ifstream in(surface_file);
        if (!in) throw ConfigError("cannot open surface file " + surface_file);
        surface = read_local_vol(in);
    } else {
        surface = calibrate_local_vol(q, p.hurst, lc).surface;
    }

    LeverageCalibrationConfig cfg;
    cfg.local_vol = lc;
    cfg.sim.n_paths = c.cfg.integer("leverage.paths", 10000);
    cfg.sim.max_step = 1.0 / c.cfg.number("leverage.steps_per_year", 1460.0);
    cfg.sim.seed = c.seed;
    cfg.sim.antithetic = c.cfg.flag("leverage.antithetic", true);
    cfg.sim.scheme = scheme_from_text(c.cfg.text("sim.scheme", "qe"));
    cfg.sim.threads = c.threads;
    cfg.max_passes = c.cfg.integer("leverage.passes", cfg.max_passes);
    cfg.tolerance = c.cfg.number("leverage.tolerance_bp", cfg.tolerance * 1e4) * 1e-4;
    cfg.repricing.bins = c.cfg.integer("leverage.bins", 0);
    cfg.damping = c.cfg.number("leverage.damping", cfg.damping);
    const auto result = calibrate_leverage(p, lift, surface, q, cfg);

    {
        auto os = c.out.open("");
        write_error_table(os, q, result.final.model_vols, &result.final.vol_stderr);
    }
    {
        auto os = c.out.open("surface");
        write_local_vol(os, result.surface);
    }
    {
        auto os = c.out.open("history");
        os << "pass,max_error_bp\n";
        for (std::size_t i = 0; i < result.history.size(); ++i) os << i << ',' << fmt17(result.history[i] * 1e4) << '\n';
    }
    {
        auto os = c.out.open("leverage");
        result.final.leverage.write_csv(os);
    }
    std::printf("calibrate-leverage: max error %.3f bp (initial %.3f bp), %zu passes\n", result.final.max_error * 1e4,
                result.initial.max_error * 1e4, result.history.size() - 1);
    if (c.cfg.has("leverage.validation_seed")) {
        auto sim = cfg.sim;
        sim.seed = c.cfg.integer("leverage.validation_seed", 0);
        const auto check = hmlv_reprice(p, lift, result.surface, q, sim, cfg.repricing);
        auto os = c.out.open("validation");
        write_error_table(os, q, check.model_vols, &check.vol_stderr);
        std::printf("  independent seed: max error %.3f bp (max stderr %.3f bp)\n", check.max_error * 1e4,
                    check.max_stderr * 1e4);
    }
    return exit_ok;
}

int cmd_skew_study(Context& c) {
    const auto p = model_from_config(c.cfg);
    const auto lift = lift_from_config(c.cfg, p.hurst);
    SkewStudyConfig sc;
    sc.hurst = p.hurst;
    sc.ladder = log_ladder(c.cfg.number("skew.t_min", 1e-6), c.cfg.number("skew.t_max", 1.0),
                           c.cfg.integer("skew.points", 40));
    sc.zeta_eps = c.cfg.number("skew.zeta_eps", sc.zeta_eps);
    sc.regression.tolerance = c.cfg.number("skew.slope_tolerance", sc.regression.tolerance);
    sc.threads = c.threads;
    auto fc = fourier_config(c.cfg);
    fc.riccati_steps = c.cfg.integer("fourier.riccati_steps", 256);
    const auto res = skew_ratio_study(p, lift, sc, fc);
    {
        auto os = c.out.open("");
        write_skew_study(os, res);
    }
    {
        auto os = c.out.open("summary");
        os << "quantity,value\n";
        os << "ratio," << fmt17(res.ratio) << '\n';
        os << "alpha_sigma," << fmt17(res.sigma_fit.alpha) << '\n';
        os << "alpha_eta," << fmt17(res.eta_fit.alpha) << '\n';
        os << "t_crit_sigma," << fmt17(res.sigma_fit.t_crit) << '\n';
        os << "t_crit_eta," << fmt17(res.eta_fit.t_crit) << '\n';
        os << "slope_sigma," << fmt17(res.sigma_fit.slope) << '\n';
        os << "slope_eta," << fmt17(res.eta_fit.slope) << '\n';
        os << "tau_short," << fmt17(res.tau_short) << '\n';
        os << "theory," << fmt17(p.hurst + 1.5) << '\n';
    }
    std::printf("skew-study: ratio %.4f (H + 3/2 = %.2f), tau_short %.3g\n", res.ratio, p.hurst + 1.5, res.tau_short);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rough local-stochastic volatility toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    std::string config_file, out_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 42;
    unsigned threads = 1;
    bool dump_paths = false;
    app.add_option("--config,-c", config_file, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "override as section.key=value (repeatable)");
    app.add_option("--out,-o", out_dir, "output directory (default $ROUGHLV_OUTPUT_DIR or .)");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--dump-paths", dump_paths, "simulate: also write spot and variance path matrices");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"lift", "build the Markovian lift and report the kernel error"},
        {"simulate", "simulate the lifted model and write per-time summaries"},
        {"price", "price vanilla options (fourier, lift or mc)"},
        {"calibrate-lv", "calibrate the local-vol surface to a quote file"},
        {"calibrate-leverage", "calibrate the HMLV leverage by the particle method"},
        {"skew-study", "small-time ATM skew ratio of local and implied volatility"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        ConfigTree cfg = config_file.empty() ? ConfigTree{} : ConfigTree::load(config_file);
        for (const auto& o : overrides) cfg.assign(o);
        if (seed_opt->count() == 0) seed = cfg.integer("run.seed", seed);
        cfg.set("run.seed", std::to_string(seed));
        cfg.set("run.command", command);
        const std::string canonical = cfg.canonical();
        ArtifactWriter writer(output_directory(out_dir.empty() ? cfg.text("output.dir", "") : out_dir), command,
                              fnv1a_hex(canonical), seed, canonical);
        std::vector<std::string> notes;
        for (const auto& k : cfg.unknown_keys(known_keys)) notes.push_back("unknown key " + k);
        for (const auto& n : notes) std::fprintf(stderr, "warning: %s\n", n.c_str());
        Context ctx{cfg, writer, seed, threads, dump_paths};
        int rc = exit_ok;
        if (command == "lift") rc = cmd_lift(ctx);
        else if (command == "simulate") rc = cmd_simulate(ctx);
        else if (command == "price") rc = cmd_price(ctx);
        else if (command == "calibrate-lv") rc = cmd_calibrate_lv(ctx);
        else if (command == "calibrate-leverage") rc = cmd_calibrate_leverage(ctx);
        else if (command == "skew-study") rc = cmd_skew_study(ctx);
        writer.write_manifest(notes);
        for (const auto& f : writer.files()) std::printf("  wrote %s\n", (writer.directory() / f).string().c_str());
        return rc;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_numerical;
    }
}
