#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "roughlv/error.hpp"
#include "roughlv/kernel_lift.hpp"
#include "roughlv/params.hpp"
#include "roughlv/rough_mc.hpp"

namespace roughlv {

inline constexpr const char* version = "1.0.0";

/// Process exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_data = 3, exit_numerical = 4 };

inline int exit_code_for(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::config: return exit_config;
        case ErrorCategory::data: return exit_data;
        case ErrorCategory::numerical: return exit_numerical;
    }
    return exit_numerical;
}

/// Flat key-value configuration: `section.key -> value`, read from INI text
/// and overridden by command-line assignments.
class ConfigTree {
public:
    ConfigTree() = default;

    /// Parses INI text; errors carry the line number.
    static ConfigTree parse(std::istream& in) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ParseError("config: " + e.message(), e.line());
        }
        ConfigTree cfg;
        for (const auto& [section, body] : tree) {
            if (body.empty()) throw ParseError("config: key '" + section + "' outside a section", 0);
            for (const auto& [key, value] : body) cfg.values_[section + "." + key] = value.data();
        }
        return cfg;
    }

    static ConfigTree load(const std::filesystem::path& file) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open config file " + file.string());
        return parse(in);
    }

    /// Applies `section.key=value`.
    void assign(const std::string& assignment) {
        const auto eq = assignment.find('=');
        const auto dot = assignment.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq)
            throw ConfigError("override must look like section.key=value: '" + assignment + "'");
        values_[assignment.substr(0, eq)] = assignment.substr(eq + 1);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return to_number(key, text(key, ""));
    }

    [[nodiscard]] std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key, "");
        std::size_t used = 0;
        try {
            const auto v = std::stoull(s, &used);
            if (used == s.size() && s.find('-') == std::string::npos) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("config " + key + ": expected a non-negative integer, got '" + s + "'");
    }

    [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key, "");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError("config " + key + ": expected true or false, got '" + s + "'");
    }

    /// Whitespace- or comma-separated numbers.
    [[nodiscard]] std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
        if (!has(key)) return fallback;
        std::string s = text(key, "");
        for (char& c : s)
            if (c == ',') c = ' ';
        std::istringstream in(s);
        std::vector<double> out;
        std::string cell;
        while (in >> cell) out.push_back(to_number(key, cell));
        if (out.empty()) throw ConfigError("config " + key + ": empty list");
        return out;
    }

    /// Keys not in `known`, for typo detection.
    [[nodiscard]] std::vector<std::string> unknown_keys(const std::set<std::string>& known) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!known.count(k)) out.push_back(k);
        return out;
    }

    /// Canonical `key=value` lines in key order.
    [[nodiscard]] std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

private:
    static double to_number(const std::string& key, const std::string& s) {
        std::size_t used = 0;
        try {
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("config " + key + ": expected a number, got '" + s + "'");
    }

    std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a hash, as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline ModelParams model_from_config(const ConfigTree& c) {
    ModelParams p;
    p.v0 = c.number("model.v0", p.v0);
    p.theta = c.number("model.theta", p.theta);
    p.lambda = c.number("model.lambda", p.lambda);
    p.nu = c.number("model.nu", p.nu);
    p.rho = c.number("model.rho", p.rho);
    p.hurst = c.number("model.hurst", p.hurst);
    p.validate();
    return p;
}

/// The lift from `lift.file`, or built from `lift.factors` with either
/// explicit `lift.horizon`/`lift.short_scale` or scales tuned to the speed
/// range `lift.gamma_min`/`lift.gamma_max`. H = 1/2 gives the single
/// Heston node.
inline LiftSpec lift_from_config(const ConfigTree& c, double hurst) {
    const std::string file = c.text("lift.file", "");
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open lift file " + file);
        return read_lift(in);
    }
    const auto n = static_cast<std::size_t>(c.integer("lift.factors", 20));
    if (hurst == 0.5) return build_lift(hurst, 1, 1.0, 0.5);
    if (c.has("lift.horizon") || c.has("lift.short_scale"))
        return build_lift(hurst, n, c.number("lift.horizon", 0.0), c.number("lift.short_scale", 0.0));
    const auto scales = tune_lift_scales(hurst, n, c.number("lift.gamma_min", 1.76e-4), c.number("lift.gamma_max", 6.42e3));
    return build_lift(hurst, n, scales.horizon, scales.short_scale);
}

inline VarianceScheme scheme_from_text(const std::string& s) {
    if (s == "qe") return VarianceScheme::qe;
    if (s == "euler") return VarianceScheme::euler;
    throw ConfigError("unknown variance scheme '" + s + "' (expected qe or euler)");
}

/// Simulation settings from the [sim] section; `steps_per_year` sets the
/// maximal time step.
inline SimConfig sim_from_config(const ConfigTree& c, std::uint64_t seed) {
    SimConfig s;
    s.n_paths = c.integer("sim.paths", 100000);
    s.time_grid = c.numbers("sim.maturities", {0.25, 0.5, 1.0});
    s.seed = seed;
    s.antithetic = c.flag("sim.antithetic", false);
    s.max_step = 1.0 / c.number("sim.steps_per_year", 365.0);
    s.scheme = scheme_from_text(c.text("sim.scheme", "qe"));
    s.validate();
    return s;
}

/// Writes `<command>_<hash>[_<suffix>].csv` files under one output directory,
/// each starting with a provenance header, and a manifest listing them.
class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path dir, std::string command, std::string hash, std::uint64_t seed,
                   std::string config_text)
        : dir_(std::move(dir)), command_(std::move(command)), hash_(std::move(hash)), seed_(seed),
          config_text_(std::move(config_text)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    /// Opens an artifact and writes its header lines; `suffix` may be empty.
    std::ofstream open(const std::string& suffix) {
        const std::string name = command_ + "_" + hash_ + (suffix.empty() ? "" : "_" + suffix) + ".csv";
        const auto path = dir_ / name;
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << header();
        files_.push_back(name);
        return out;
    }

    [[nodiscard]] std::string header() const {
        return std::string("# roughlv ") + version + " command=" + command_ + " config_hash=" + hash_ +
               " seed=" + std::to_string(seed_) + "\n";
    }

    /// Manifest: provenance, the effective configuration and the artifact list.
    void write_manifest(const std::vector<std::string>& notes = {}) const {
        const auto path = dir_ / (command_ + "_" + hash_ + "_manifest.txt");
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << header() << "[config]\n" << config_text_ << "[artifacts]\n";
        for (const auto& f : files_) out << f << "\n";
        if (!notes.empty()) {
            out << "[notes]\n";
            for (const auto& n : notes) out << n << "\n";
        }
    }

    [[nodiscard]] const std::vector<std::string>& files() const noexcept { return files_; }
    [[nodiscard]] const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    std::string command_;
    std::string hash_;
    std::uint64_t seed_;
    std::string config_text_;
    std::vector<std::string> files_;
};

/// `--out` if given, else $ROUGHLV_OUTPUT_DIR, else the working directory.
inline std::filesystem::path output_directory(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("ROUGHLV_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

/// Formats a double with 17 significant digits.
inline std::string fmt17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace roughlv
