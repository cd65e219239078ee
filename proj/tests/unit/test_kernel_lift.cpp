#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "roughlv/kernel_lift.hpp"

using namespace roughlv;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

double kernel_oracle(double t, double hurst) {
    const big h(hurst);
    const big v = boost::multiprecision::pow(big(t), h - big(0.5)) / boost::multiprecision::tgamma(h + big(0.5));
    return static_cast<double>(v);
}

/// Integral of gamma^power * mu(dgamma) over [lo, hi], in the variable u = log gamma.
double laplace_moment(double hurst, double lo, double hi, int power) {
    const double norm = 1.0 / (std::tgamma(hurst + 0.5) * std::tgamma(0.5 - hurst));
    auto f = [&](double u) { return norm * std::exp((power + 0.5 - hurst) * u); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, std::log(lo), std::log(hi), 10, 1e-14);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

}  // namespace

TEST(FractionalKernel, MatchesHighPrecisionGamma) {
    for (double h : {0.05, 0.1, 0.3, 0.5})
        for (double t : {1e-6, 1e-3, 0.5, 1.0, 7.0}) {
            const double ref = kernel_oracle(t, h);
            EXPECT_NEAR(fractional_kernel(t, h), ref, 1e-13 * ref) << "H=" << h << " t=" << t;
        }
}

TEST(FractionalKernel, RejectsNonPositiveTime) {
    EXPECT_THROW(fractional_kernel(0.0, 0.1), DomainError);
    EXPECT_THROW(fractional_kernel(-1.0, 0.1), DomainError);
    EXPECT_THROW(fractional_kernel(1.0, 0.7), DomainError);
}

TEST(BuildLift, NodesAreMassAndMeanOfLaplaceMeasure) {
    const double hurst = 0.1, horizon = 9559.78, short_scale = 1.048e-4;
    const std::size_t n = 20;
    const auto lift = build_lift(hurst, n, horizon, short_scale);
    ASSERT_EQ(lift.size(), n);
    const double ratio = std::pow(horizon / short_scale, 1.0 / n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = std::pow(ratio, static_cast<double>(i)) / horizon;
        const double hi = lo * ratio;
        const double mass = laplace_moment(hurst, lo, hi, 0);
        const double mean = laplace_moment(hurst, lo, hi, 1) / mass;
        EXPECT_NEAR(lift.nodes[i].weight, mass, 1e-10 * mass) << i;
        EXPECT_NEAR(lift.nodes[i].speed, mean, 1e-10 * mean) << i;
    }
}

TEST(BuildLift, HalfHurstIsExactSingleNode) {
    const auto lift = build_lift(0.5, 7, 10.0, 0.1);
    ASSERT_EQ(lift.size(), 1u);
    EXPECT_EQ(lift.nodes[0].weight, 1.0);
    EXPECT_EQ(lift.nodes[0].speed, 0.0);
    for (double t : {1e-4, 0.3, 5.0}) EXPECT_EQ(lift.kernel(t), fractional_kernel(t, 0.5));
}

TEST(BuildLift, PositiveIncreasingNodes) {
    for (std::size_t n : {1u, 5u, 20u, 500u}) {
        const auto lift = build_lift(0.1, n, 1e4, 1e-4);
        EXPECT_NO_THROW(lift.validate());
        for (const auto& node : lift.nodes) {
            EXPECT_GT(node.weight, 0.0);
            EXPECT_GT(node.speed, 0.0);
        }
    }
}

TEST(BuildLift, RejectsBadArguments) {
    EXPECT_THROW(build_lift(0.1, 0, 10.0, 0.1), ConfigError);
    EXPECT_THROW(build_lift(0.1, 5, 0.1, 10.0), ConfigError);
    EXPECT_THROW(build_lift(0.0, 5, 10.0, 0.1), ConfigError);
}

TEST(TuneLiftScales, ReproducesRequestedSpeedRange) {
    for (std::size_t n : {2u, 20u, 500u}) {
        const double gmin = n == 500 ? 3.74e-29 : 1.76e-4;
        const double gmax = n == 500 ? 2.70e28 : 6.42e3;
        const auto s = tune_lift_scales(0.1, n, gmin, gmax);
        const auto lift = build_lift(0.1, n, s.horizon, s.short_scale);
        EXPECT_NEAR(lift.nodes.front().speed, gmin, 1e-10 * gmin) << n;
        EXPECT_NEAR(lift.nodes.back().speed, gmax, 1e-10 * gmax) << n;
    }
    const auto s = tune_lift_scales(0.1, 20, 1.76e-4, 6.42e3);
    EXPECT_NEAR(s.horizon, 9559.78, 0.01);
    EXPECT_NEAR(s.short_scale, 1.048e-4, 1e-7);
}

TEST(KernelApprox, ConvergesToKernelAsFactorsGrow) {
    const auto s = tune_lift_scales(0.1, 20, 1.76e-4, 6.42e3);
    const auto grid = log_grid(1e-3, 2.0, 400);
    double previous = INFINITY;
    double first = 0.0;
    for (std::size_t n : {10u, 20u, 40u, 80u}) {
        const auto err = kernel_approx_error(build_lift(0.1, n, s.horizon, s.short_scale), 0.1, grid);
        EXPECT_LE(err.rms, previous) << n;
        EXPECT_LE(err.rms, err.sup);
        if (n == 10) first = err.rms;
        previous = err.rms;
    }
    EXPECT_LT(previous, 0.5 * first);
}

TEST(KernelApprox, LiftIsLaplaceTransformOfDiscreteMeasure) {
    // On its support the lift kernel is a quadrature of the exact Laplace
    // representation K(t) = int exp(-gamma t) mu(dgamma).
    const double hurst = 0.1;
    const double norm = 1.0 / (std::tgamma(hurst + 0.5) * std::tgamma(0.5 - hurst));
    for (double t : {1e-2, 0.1, 1.0}) {
        auto f = [&](double u) { return norm * std::exp((0.5 - hurst) * u - std::exp(u) * t); };
        const double full =
            boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -60.0, 12.0, 15, 1e-13);
        EXPECT_NEAR(full, fractional_kernel(t, hurst), 1e-9 * full);
    }
}

TEST(KernelApprox, RejectsBadGrid) {
    const auto lift = build_lift(0.1, 10, 100.0, 0.01);
    EXPECT_THROW(kernel_approx_error(lift, 0.1, std::vector<double>{}), ConfigError);
    EXPECT_THROW(kernel_approx_error(lift, 0.1, std::vector<double>{0.0, 1.0}), ConfigError);
    EXPECT_THROW(kernel_approx_error(lift, 0.1, std::vector<double>{1.0, 0.5}), ConfigError);
}

TEST(LiftIo, RoundTripIsExact) {
    const auto lift = build_lift(0.1, 20, 9559.78, 1.048e-4);
    std::stringstream ss;
    write_lift(ss, lift);
    const auto back = read_lift(ss);
    ASSERT_EQ(back.size(), lift.size());
    for (std::size_t i = 0; i < lift.size(); ++i) {
        EXPECT_EQ(back.nodes[i].weight, lift.nodes[i].weight);
        EXPECT_EQ(back.nodes[i].speed, lift.nodes[i].speed);
    }
}

TEST(LiftIo, ParseErrorCarriesLine) {
    std::istringstream in("# comment\n1.0 0.5\n2.0 oops\n");
    try {
        read_lift(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream unsorted("1.0 2.0\n1.0 1.0\n");
    EXPECT_THROW(read_lift(unsorted), ConfigError);
}
