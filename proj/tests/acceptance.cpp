// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "modlat/discrete.hpp"
#include "modlat/experiment.hpp"

using namespace modlat;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

TransformConfig scalar_config(const ChannelModel& ch) {
    TransformConfig cfg;
    cfg.lattice = scale_to_power(make_scalar(1.0), 1.0);
    cfg.channel = ch;
    return cfg;
}

Verdict noise_identity() {
    const auto start = std::chrono::steady_clock::now();
    std::size_t total = 0, passed = 0;
    double worst = 0.0;
    for (const auto& ch : channel_zoo(2, 1.0)) {
        for (auto kind : {EstimatorKind::linear, EstimatorKind::binned_conditional_mean}) {
            auto cfg = scalar_config(ch);
            cfg.estimator = fit_estimator(cfg, kind, 200000, 101);
            for (const auto& rec : run_trials(cfg, MessageAssignment::uniform_random(), 100000, 102)) {
                const double dev = identity_deviation(cfg.lattice, rec);
                worst = std::max(worst, dev);
                ++total;
                if (dev <= 1e-9) ++passed;
            }
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {passed == total && secs < 120.0,
            fmt("%zu/%zu trials over 6 channels x 2 estimators, max deviation %.2e, %.1f s", passed, total, worst, secs)};
}

Verdict dither_uniformity() {
    const std::vector<std::pair<QuantizerKind, std::size_t>> kinds{
        {QuantizerKind::scalar, 1}, {QuantizerKind::cubic, 2}, {QuantizerKind::hexagonal_A2, 2},
        {QuantizerKind::D4, 4},     {QuantizerKind::E8, 8}};
    std::size_t cases = 0, accepted = 0;
    std::string per_kind;
    for (const auto& [kind, dim] : kinds) {
        TransformConfig cfg;
        cfg.lattice = scale_to_power(make_lattice(kind, dim), 1.0);
        Rng msg(derive_seed(201, std::string(to_string(kind)), 0));
        std::size_t ok = 0;
        for (int m = 0; m < 10; ++m) {
            const Vec v = sample_dither(cfg.lattice, msg);
            const DitherSource dithers(cfg.lattice, derive_seed(202, "case", cases));
            Rng pure(203, "pure", cases);
            Vec sent, reference;
            sent.reserve(100000 * dim);
            reference.reserve(100000 * dim);
            for (std::uint64_t t = 0; t < 100000; ++t) {
                const Vec x = transmit_user(cfg, v, dithers.draw(t, 0));
                sent.insert(sent.end(), x.begin(), x.end());
                const Vec u = sample_dither(cfg.lattice, pure);
                reference.insert(reference.end(), u.begin(), u.end());
            }
            ++cases;
            if (two_sample_test(cfg.lattice, sent, reference).accepted(0.01)) ++ok;
        }
        accepted += ok;
        per_kind += fmt(" %s %zu/10", std::string(to_string(kind)).c_str(), ok);
    }
    const double frac = static_cast<double>(accepted) / static_cast<double>(cases);
    return {frac >= 0.95, fmt("accepted %zu/%zu (%.3f):%s", accepted, cases, frac, per_kind.c_str())};
}

IndependenceReport independence_for(TransformConfig cfg, std::uint64_t seed) {
    Rng msg(seed, "tuples", 0);
    std::vector<std::vector<Vec>> tuples;
    for (int g = 0; g < 15; ++g) tuples.push_back(random_message_tuple(cfg.lattice, cfg.num_users(), msg));
    const auto records = run_trials(cfg, MessageAssignment::fixed(std::move(tuples)), 15 * 1500, seed);
    return independence_report(cfg.lattice, collect_noise(records).groups, 0.01);
}

Verdict noise_independence() {
    bool pass = true;
    std::string detail;
    std::uint64_t seed = 301;
    for (const auto& ch : channel_zoo(2, 1.0)) {
        auto cfg = scalar_config(ch);
        cfg.estimator = fit_estimator(cfg, EstimatorKind::linear, 200000, seed);
        const auto rep = independence_for(cfg, ++seed);
        pass = pass && rep.pairs >= 100 && rep.acceptance_fraction >= 0.95;
        detail += fmt("%s %.3f, ", ch.name.c_str(), rep.acceptance_fraction);
    }
    auto control = scalar_config(channel_zoo(2, 1.0)[1]);
    control.estimator = fit_estimator(control, EstimatorKind::linear, 200000, 350);
    control.use_dither = false;
    const auto rep = independence_for(control, 351);
    pass = pass && rep.acceptance_fraction < 0.95;
    detail += fmt("undithered clipped control %.3f (105 pairs each)", rep.acceptance_fraction);
    return {pass, detail};
}

Verdict discrete_oracle() {
    using namespace discrete;
    std::vector<DiscreteSystem> systems{modular_adder(7, 2, 0.1), modular_adder(5, 3, 0.2)};
    {
        Rng rng(401);
        std::vector<double> table(25 * 9);
        for (std::size_t x = 0; x < 25; ++x) {
            double sum = 0.0;
            for (std::size_t y = 0; y < 9; ++y) sum += table[x * 9 + y] = rng.uniform();
            for (std::size_t y = 0; y < 9; ++y) table[x * 9 + y] /= sum;
        }
        systems.emplace_back(5, 2, 9, std::move(table), std::vector<int>{0, 3, 1, 4, 4, 2, 0, 1, 3});
    }
    {
        // y = min(x1 + x2, 7), read back mod 6
        std::vector<double> table(36 * 8, 0.0);
        for (int x2 = 0; x2 < 6; ++x2)
            for (int x1 = 0; x1 < 6; ++x1) table[static_cast<std::size_t>(x1 + 6 * x2) * 8 + std::min(x1 + x2, 7)] = 1.0;
        systems.emplace_back(6, 2, 8, std::move(table), std::vector<int>{0, 1, 2, 3, 4, 5, 0, 1});
    }
    double worst_exact = 0.0, worst_mc = 0.0;
    for (const auto& sys : systems) {
        std::vector<int> v(sys.users(), 0);
        const auto reference = exact_noise_distribution(sys, v);
        const std::size_t tuples = sys.input_tuples();
        for (std::size_t code = 0; code < tuples; ++code) {
            std::size_t c = code;
            for (auto& m : v) {
                m = static_cast<int>(c % static_cast<std::size_t>(sys.modulus()));
                c /= static_cast<std::size_t>(sys.modulus());
            }
            worst_exact = std::max(worst_exact, total_variation(reference, exact_noise_distribution(sys, v)));
        }
        worst_mc = std::max(worst_mc, total_variation(reference, simulate_discrete(sys, v, 100000, 402)));
    }
    return {worst_exact <= 1e-12 && worst_mc <= 0.05,
            fmt("%zu systems, max pairwise exact TV %.1e, max Monte Carlo TV %.4f at 1e5 trials", systems.size(),
                worst_exact, worst_mc)};
}

Verdict gaussian_anchors() {
    ChannelModel ch;
    ch.noise_variance = 1.0;
    auto cfg = scalar_config(ch);
    const auto train = generate_training_set(cfg, 1000000, 501);
    const auto test = generate_training_set(cfg, 1000000, 502);
    const auto lin = fit_linear_mmse(train);
    const double mse = evaluate_mse(lin, test).mse;
    const bool alpha_ok = std::abs(lin.alpha() - 2.0 / 3.0) <= 0.02;
    const bool mse_ok = std::abs(mse - 2.0 / 3.0) <= 0.02;

    // Binned means against the analytic linear conditional mean 2y/3 at the
    // bin midpoints, for bins inside the central 90% of outputs.
    const auto bin = fit_binned_conditional_mean(train, 64);
    Vec y = train.y;
    std::sort(y.begin(), y.end());
    const double lo = y[y.size() / 20], hi = y[y.size() - 1 - y.size() / 20];
    double worst = 0.0;
    for (std::size_t b = 0; b < bin.num_bins(); ++b) {
        const double a = bin.edges()[b], c = bin.edges()[b + 1];
        if (a < lo || c > hi) continue;
        worst = std::max(worst, std::abs(bin.means()[b] - 2.0 / 3.0 * 0.5 * (a + c)));
    }
    const double limit = 0.05 * std::sqrt(2.0);
    return {alpha_ok && mse_ok && worst < limit,
            fmt("alpha %.4f (%s), mse %.4f (%s), binned max deviation %.4f vs limit %.4f (%s)", lin.alpha(),
                alpha_ok ? "ok" : "out", mse, mse_ok ? "ok" : "out", worst, limit, worst < limit ? "ok" : "out")};
}

Verdict entropy_calibration() {
    const auto lat = make_scalar(std::sqrt(12.0));
    Rng rng(601);
    Vec u(1000000), g(1000000);
    for (auto& v : u) v = sample_dither(lat, rng)[0];
    const double sigma = 0.5;
    for (auto& v : g) v = sigma * rng.normal();
    const double hu = estimate_entropy_folded(lat, u, 256).nats;
    const double hg = estimate_entropy_raw(g, 256).nats;
    const double tu = lat.log_volume_per_dim();
    const double tg = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * sigma * sigma);
    return {std::abs(hu - tu) <= 0.02 && std::abs(hg - tg) <= 0.05,
            fmt("uniform %.4f vs %.4f, Gaussian %.4f vs %.4f", hu, tu, hg, tg)};
}

std::pair<double, double> binned_minus_linear(const ChannelModel& ch, std::uint64_t seed) {
    auto cfg = scalar_config(ch);
    std::vector<TransformConfig> variants(2, cfg);
    variants[0].estimator = fit_estimator(cfg, EstimatorKind::linear, 1000000, seed);
    variants[1].estimator = fit_estimator(cfg, EstimatorKind::binned_conditional_mean, 1000000, seed);
    const auto rows = compare_estimators(variants, MessageAssignment::uniform_random(), 400000, seed + 1);
    const auto& l = rows[0].profile.rate;
    const auto& b = rows[1].profile.rate;
    return {b.rate - l.rate, std::hypot(b.uncertainty, l.uncertainty)};
}

Verdict nonlinearity_benefit() {
    const auto [clip_gap, clip_unc] = binned_minus_linear(channel_zoo(2, 1.0)[1], 701);
    ChannelModel awgn;
    awgn.noise_variance = 1.0;
    const auto [awgn_gap, awgn_unc] = binned_minus_linear(awgn, 702);
    const bool clip_ok = clip_gap > clip_unc;
    const bool awgn_ok = std::abs(awgn_gap) <= awgn_unc;
    return {clip_ok && awgn_ok, fmt("clipped gap %.5f vs uncertainty %.5f (%s), AWGN gap %.5f vs uncertainty %.5f (%s)",
                                    clip_gap, clip_unc, clip_ok ? "ok" : "out", awgn_gap, awgn_unc,
                                    awgn_ok ? "ok" : "out")};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict reproducibility() {
    const auto root = fs::temp_directory_path() / "modlat_acceptance";
    fs::remove_all(root);
    std::size_t configs = 0, files = 0, mismatches = 0;
    for (const auto& entry : fs::directory_iterator(MODLAT_CONFIG_DIR)) {
        auto cfg = load_config(entry.path());
        const auto base = root / entry.path().stem();
        cfg.workers = 1;
        write_reports(run_experiment(cfg), base / "serial_a");
        write_reports(run_experiment(cfg), base / "serial_b");
        cfg.workers = 4;
        write_reports(run_experiment(cfg), base / "parallel");
        ++configs;
        for (const auto& f : fs::directory_iterator(base / "serial_a")) {
            ++files;
            const auto a = slurp(f.path());
            if (a != slurp(base / "serial_b" / f.path().filename()) || a != slurp(base / "parallel" / f.path().filename()))
                ++mismatches;
        }
    }
    fs::remove_all(root);
    return {configs > 0 && mismatches == 0,
            fmt("%zu configs, %zu report files, %zu differ across serial/serial/4-worker runs", configs, files, mismatches)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"1 noise identity", noise_identity},
        {"2 dither uniformity", dither_uniformity},
        {"3 noise independence", noise_independence},
        {"4 discrete oracle", discrete_oracle},
        {"5 Gaussian anchors", gaussian_anchors},
        {"6 entropy calibration", entropy_calibration},
        {"7 nonlinearity benefit", nonlinearity_benefit},
        {"8 reproducibility", reproducibility},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::printf("%s  %-24s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
