#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "modlat/analysis.hpp"
#include "oracle/folded_noise.hpp"

using namespace modlat;

namespace {

const double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

TransformConfig unit_power(const ChannelModel& ch, QuantizerKind kind = QuantizerKind::scalar, std::size_t dim = 1) {
    TransformConfig cfg;
    cfg.lattice = scale_to_power(make_lattice(kind, dim), 1.0);
    cfg.channel = ch;
    return cfg;
}

ChannelModel awgn(double noise_variance) {
    ChannelModel ch;
    ch.noise_variance = noise_variance;
    return ch;
}

NoiseProfile profile_of(const TransformConfig& cfg, std::size_t trials, std::uint64_t seed) {
    return make_noise_profile(cfg.lattice, collect_noise(run_trials(cfg, MessageAssignment::uniform_random(), trials, seed)));
}

}  // namespace

TEST(Entropy, UniformOnVoronoiGivesLogVolume) {
    const auto lat = make_scalar(std::sqrt(12.0));
    Rng rng(1);
    Vec u(1000000);
    for (auto& v : u) v = sample_dither(lat, rng)[0];
    const auto e = estimate_entropy_folded(lat, u, 256);
    EXPECT_NEAR(e.nats, std::log(std::sqrt(12.0)), 0.02);
    EXPECT_FALSE(e.resolution_limited);
    EXPECT_NEAR(std::accumulate(e.probabilities.begin(), e.probabilities.end(), 0.0), 1.0, 1e-12);
}

TEST(Entropy, UniformOnE8GivesLogVolume) {
    const auto lat = make_lattice(QuantizerKind::E8, 8, 1.3);
    Rng rng(2);
    Vec u;
    for (int i = 0; i < 100000; ++i) {
        const Vec d = sample_dither(lat, rng);
        u.insert(u.end(), d.begin(), d.end());
    }
    EXPECT_NEAR(estimate_entropy_folded(lat, u, 64).nats, lat.log_volume_per_dim(), 0.02);
}

TEST(Entropy, NearZeroNoiseHitsResolutionFloor) {
    const auto lat = make_scalar(std::sqrt(12.0));
    Rng rng(3);
    Vec n(200000);
    for (auto& v : n) v = 1e-6 * rng.normal();
    const auto e = estimate_entropy_folded(lat, n, 256);
    EXPECT_TRUE(e.resolution_limited);
    EXPECT_GE(e.nats, lat.log_volume_per_dim() - std::log(256.0) - 1e-12);
    EXPECT_LT(e.nats, lat.log_volume_per_dim() - std::log(256.0) + 1.0);
}

TEST(Entropy, SmallGaussianNoiseMatchesAnalytic) {
    const auto lat = make_scalar(std::sqrt(12.0));
    const double sigma = 0.3;
    Rng rng(4);
    Vec n(1000000);
    for (auto& v : n) v = sigma * rng.normal();
    const double truth = 0.5 * std::log(kTwoPiE * sigma * sigma);
    EXPECT_NEAR(estimate_entropy_raw(n, 256).nats, truth, 0.05);
    Vec folded(n.size());
    for (std::size_t k = 0; k < n.size(); ++k) folded[k] = mod_lattice(lat, Vec{n[k]})[0];
    EXPECT_NEAR(estimate_entropy_folded(lat, folded, 256).nats, truth, 0.05);
}

TEST(Entropy, Errors) {
    const auto lat = make_scalar(1.0);
    EXPECT_THROW(estimate_entropy_folded(lat, Vec{}, 256), std::invalid_argument);
    EXPECT_THROW(estimate_entropy_folded(lat, Vec{0.1, 0.9}, 256), std::invalid_argument);
    EXPECT_THROW(estimate_entropy_raw(Vec{}, 256), std::invalid_argument);
}

TEST(Entropy, DoublingSamplesStaysWithinReportedUncertainty) {
    const auto lat = make_scalar(std::sqrt(12.0));
    for (int law = 0; law < 2; ++law) {
        Rng rng(5);
        Vec n(400000);
        for (auto& v : n) v = law == 0 ? sample_dither(lat, rng)[0] : mod_lattice(lat, Vec{0.8 * rng.normal()})[0];
        const auto half = estimate_entropy_folded(lat, std::span<const double>(n).first(200000), 256);
        const auto full = estimate_entropy_folded(lat, n, 256);
        EXPECT_LT(std::abs(full.nats - half.nats), half.uncertainty()) << law;
    }
}

TEST(Rate, PureUniformNoiseIsUseless) {
    const auto lat = make_scalar(std::sqrt(12.0));
    Rng rng(6);
    NoiseProfile p;
    Vec u(1000000);
    for (auto& v : u) v = sample_dither(lat, rng)[0];
    p.folded = estimate_entropy_folded(lat, u, 256);
    const auto r = achievable_rate(p, lat);
    EXPECT_NEAR(r.rate, 0.0, 0.02);
    EXPECT_GE(r.rate, 0.0);
}

TEST(Rate, NegativeEstimateIsClampedAndFlagged) {
    const auto lat = make_scalar(1.0);
    NoiseProfile p;
    p.folded.nats = 0.01;
    const auto r = achievable_rate(p, lat);
    EXPECT_TRUE(r.clamped);
    EXPECT_EQ(r.rate, 0.0);
    EXPECT_NEAR(r.unclamped, -0.01, 1e-15);
}

// The Gaussian approximation 1/2 log(q^2 / (2 pi e sigma_e^2)) ~ 0.026 nats is
// only a lower bound: N is not Gaussian (S is triangular) and folding lowers
// entropy further. The exact folded-noise entropy comes from quadrature.
TEST(Rate, AwgnLinearMatchesQuadrature) {
    auto cfg = unit_power(awgn(1.0));
    cfg.estimator = fit_estimator(cfg, EstimatorKind::linear, 400000, 7);
    const auto p = profile_of(cfg, 1000000, 8);
    const double q = cfg.lattice.scale();
    const double h = oracle::folded_linear_noise_entropy(std::sqrt(3.0), 1.0, cfg.estimator.alpha(),
                                                         cfg.estimator.beta(), q);
    EXPECT_NEAR(p.rate.rate, std::log(q) - h, 0.01);
    const double gaussian_bound = 0.5 * std::log(12.0 / (kTwoPiE * 2.0 / 3.0));
    EXPECT_GT(p.rate.rate, gaussian_bound);
    EXPECT_NEAR(p.mse.mse, 2.0 / 3.0, 0.02);
}

TEST(Rate, NonIncreasingInNoiseVariance) {
    double previous = std::numeric_limits<double>::infinity(), previous_unc = 0.0;
    for (double var : {0.1, 0.3, 1.0, 3.0, 10.0}) {
        auto cfg = unit_power(awgn(var));
        cfg.estimator = fit_estimator(cfg, EstimatorKind::linear, 200000, 9);
        const auto p = profile_of(cfg, 200000, 10);
        EXPECT_LE(p.rate.rate, previous + std::hypot(p.rate.uncertainty, previous_unc)) << var;
        previous = p.rate.rate;
        previous_unc = p.rate.uncertainty;
    }
}

TEST(Independence, PipelineGroupsAccept) {
    for (const auto& ch : channel_zoo(2, 1.0)) {
        auto cfg = unit_power(ch, QuantizerKind::hexagonal_A2, 2);
        if (ch.name == "clipped") cfg.lattice = scale_to_power(make_scalar(1.0), 1.0);
        cfg.estimator = fit_estimator(cfg, EstimatorKind::linear, 100000, 11);
        Rng msg(12);
        std::vector<std::vector<Vec>> tuples;
        for (int i = 0; i < 15; ++i) tuples.push_back(random_message_tuple(cfg.lattice, 2, msg));
        const auto noise = collect_noise(run_trials(cfg, MessageAssignment::fixed(tuples), 15 * 1500, 13));
        const auto rep = independence_report(cfg.lattice, noise.groups);
        EXPECT_EQ(rep.pairs, 105u);
        EXPECT_GE(rep.acceptance_fraction, 0.95) << ch.name;
    }
}

TEST(Independence, WithoutDitherNonlinearChannelFails) {
    auto cfg = unit_power(channel_zoo(2, 1.0)[1]);
    cfg.estimator = fit_estimator(cfg, EstimatorKind::linear, 100000, 14);
    cfg.use_dither = false;
    Rng msg(15);
    std::vector<std::vector<Vec>> tuples;
    for (int i = 0; i < 15; ++i) tuples.push_back(random_message_tuple(cfg.lattice, 2, msg));
    const auto noise = collect_noise(run_trials(cfg, MessageAssignment::fixed(tuples), 15 * 1500, 16));
    EXPECT_LT(independence_report(cfg.lattice, noise.groups).acceptance_fraction, 0.5);
}

TEST(Independence, RandomSplitsOfOnePoolCalibrate) {
    const auto lat = make_scalar(1.0);
    Rng rng(17);
    std::vector<NoiseGroup> groups(20);
    for (auto& g : groups) {
        for (int i = 0; i < 1000; ++i) g.folded.push_back(sample_dither(lat, rng)[0]);
        g.count = 1000;
    }
    const auto rep = independence_report(lat, groups);
    EXPECT_EQ(rep.pairs, 190u);
    EXPECT_GE(rep.acceptance_fraction, 0.95);
    EXPECT_EQ(rep.test, "ks");
}

TEST(Independence, InsufficientSamplesThrows) {
    const auto lat = make_scalar(1.0);
    std::vector<NoiseGroup> groups(2);
    groups[0].folded.assign(10, 0.0);
    groups[0].count = 10;
    groups[1] = groups[0];
    EXPECT_THROW(independence_report(lat, groups), std::invalid_argument);
    EXPECT_THROW(independence_report(lat, std::span<const NoiseGroup>(groups).first(1)), std::invalid_argument);
}

TEST(Independence, RelabelingMessagesLeavesProfileUnchanged) {
    auto cfg = unit_power(channel_zoo(2, 1.0)[2]);
    cfg.estimator = fit_estimator(cfg, EstimatorKind::binned_conditional_mean, 100000, 18);
    Rng msg(19);
    const auto tuple = random_message_tuple(cfg.lattice, 2, msg);
    auto shifted = tuple;
    for (auto& v : shifted) v = mod_lattice(cfg.lattice, Vec{v[0] + 0.77});
    const auto a = make_noise_profile(cfg.lattice, collect_noise(run_trials(cfg, MessageAssignment::fixed({tuple}), 200000, 20)));
    const auto b = make_noise_profile(cfg.lattice, collect_noise(run_trials(cfg, MessageAssignment::fixed({shifted}), 200000, 21)));
    EXPECT_NEAR(a.rate.rate, b.rate.rate, 2 * std::hypot(a.rate.uncertainty, b.rate.uncertainty));
}

namespace {

std::vector<ComparisonRow> compare(const ChannelModel& ch, std::uint64_t seed, std::size_t trials = 400000) {
    auto cfg = unit_power(ch);
    std::vector<TransformConfig> variants;
    for (auto kind : {EstimatorKind::identity, EstimatorKind::linear, EstimatorKind::binned_conditional_mean}) {
        auto v = cfg;
        v.estimator = fit_estimator(cfg, kind, 400000, seed);
        variants.push_back(v);
    }
    return compare_estimators(variants, MessageAssignment::uniform_random(), trials, seed + 1);
}

}  // namespace

TEST(Compare, ClippedChannelFavoursNonlinearEstimator) {
    const auto rows = compare(channel_zoo(2, 1.0)[1], 22);
    const auto& lin = rows[1].profile.rate;
    const auto& bin = rows[2].profile.rate;
    EXPECT_GT(bin.rate - lin.rate, std::hypot(bin.uncertainty, lin.uncertainty));
}

TEST(Compare, AwgnLinearAndBinnedAreClose) {
    const auto rows = compare(awgn(1.0), 23);
    const auto& lin = rows[1].profile.rate;
    const auto& bin = rows[2].profile.rate;
    // Not exactly equal: with uniform inputs E[S|Y] is slightly nonlinear.
    EXPECT_LT(std::abs(bin.rate - lin.rate), 0.01);
    EXPECT_GT(bin.rate - lin.rate, -std::hypot(bin.uncertainty, lin.uncertainty));
}

TEST(Compare, IdentityNeverBeatsBinned) {
    for (const auto& ch : channel_zoo(2, 1.0)) {
        const auto rows = compare(ch, 24, 200000);
        const auto& id = rows[0].profile.rate;
        const auto& bin = rows[2].profile.rate;
        EXPECT_LE(id.rate, bin.rate + std::hypot(bin.uncertainty, id.uncertainty)) << ch.name;
    }
}

TEST(Compare, MismatchedConfigsThrow) {
    auto a = unit_power(awgn(1.0));
    auto b = unit_power(awgn(2.0));
    const std::vector<TransformConfig> variants{a, b};
    EXPECT_THROW(compare_estimators(variants, MessageAssignment::uniform_random(), 10, 1), std::invalid_argument);
}
