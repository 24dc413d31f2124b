#pragma once

// Config-driven experiments: parse and validate a JSON config, run
// fit -> trials -> analysis, and write plain-text reports.
//
// Randomness flows from run.seed alone. The estimator is fitted from the
// ("training", t) substreams of the seed, main trials use the seed directly,
// the independence suite uses derive_seed(seed, "independence", 0) and fixed
// message tuples come from Rng(seed, "tuples", 0). Worker count never changes
// any output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "modlat/analysis.hpp"
#include "modlat/pipeline.hpp"

namespace modlat {

using json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& reason)
        : std::runtime_error("config: " + field + ": " + reason), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    // lattice
    QuantizerKind lattice_kind = QuantizerKind::scalar;
    std::size_t dimension = 1;
    double power = 1.0;
    // channel (a zoo preset may fill these, explicit fields override)
    std::string channel_preset;
    ChannelModel channel;
    PreprocessMap preprocessor;
    // estimator
    EstimatorKind estimator = EstimatorKind::linear;
    std::size_t training_size = 200000;
    std::size_t bins = 64;
    std::size_t min_per_bin = 100;
    std::vector<EstimatorKind> compare;
    // run
    std::size_t trials = 100000;
    std::uint64_t seed = 0;
    MessageAssignment::Rule messages = MessageAssignment::Rule::uniform;
    std::size_t grid_points = 4;
    std::size_t groups = 0;
    std::size_t group_trials = 2000;
    std::size_t workers = 1;
    // analysis
    std::size_t entropy_bins = 256;
    double level = 0.01;
    // output
    std::string out_dir = "out";
    bool bits = false;
    bool raw_dump = false;

    /// Defaults-resolved config, as echoed into report headers. Omits the
    /// worker count and output directory, which never change report contents.
    json to_json() const;
};

namespace detail {

inline std::string_view to_string(MessageAssignment::Rule r) {
    switch (r) {
        case MessageAssignment::Rule::fixed: return "fixed";
        case MessageAssignment::Rule::uniform: return "uniform";
        case MessageAssignment::Rule::grid: return "grid";
    }
    return "?";
}

// Reads one block, tracking which keys were consumed so leftovers can be
// rejected as unknown fields.
class Block {
public:
    Block(const json& root, const std::string& name, bool required) : name_(name) {
        if (!root.contains(name)) {
            if (required) throw ConfigError(name, "missing required block");
            return;
        }
        node_ = &root.at(name);
        if (!node_->is_object()) throw ConfigError(name, "must be an object");
    }

    bool has(const std::string& key) const { return node_ && node_->contains(key); }

    const json& raw(const std::string& key) {
        seen_.push_back(key);
        return node_->at(key);
    }

    std::string path(const std::string& key) const { return name_ + "." + key; }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(key, raw(key));
    }

    template <class T>
    T require(const std::string& key) {
        if (!has(key)) throw ConfigError(path(key), "missing required field");
        return convert<T>(key, raw(key));
    }

    void finish() const {
        if (!node_) return;
        for (const auto& [key, _] : node_->items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) throw ConfigError(path(key), "unknown field");
    }

private:
    template <class T>
    T convert(const std::string& key, const json& v) const {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path(key), "must be a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path(key), "must be true or false");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
                throw ConfigError(path(key), "must be a non-negative integer");
            return v.get<T>();
        } else {
            if (!v.is_number()) throw ConfigError(path(key), "must be a number");
            const double d = v.get<double>();
            if (!std::isfinite(d)) throw ConfigError(path(key), "must be finite");
            return d;
        }
    }

    std::string name_;
    const json* node_ = nullptr;
    std::vector<std::string> seen_;
};

template <class F>
auto named(const std::string& field, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
    }
}

inline void reject_unknown_blocks(const json& root) {
    static const char* known[] = {"lattice", "channel", "preprocessor", "estimator", "run", "analysis", "output"};
    for (const auto& [key, _] : root.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            throw ConfigError(key, "unknown block");
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root) {
    using detail::Block;
    using detail::named;
    if (!root.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    detail::reject_unknown_blocks(root);
    ExperimentConfig c;

    Block lat(root, "lattice", true);
    const auto kind = lat.require<std::string>("kind");
    c.lattice_kind = named("lattice.kind", [&] { return parse_quantizer_kind(kind); });
    c.dimension = lat.get<std::size_t>("dimension", c.lattice_kind == QuantizerKind::scalar ? 1
                                                   : c.lattice_kind == QuantizerKind::hexagonal_A2 ? 2
                                                   : c.lattice_kind == QuantizerKind::D4 ? 4
                                                   : c.lattice_kind == QuantizerKind::E8 ? 8 : 1);
    c.power = lat.get<double>("power", c.power);
    if (!(c.power > 0.0)) throw ConfigError("lattice.power", "must be > 0");
    named("lattice.dimension", [&] { make_lattice(c.lattice_kind, c.dimension); return 0; });
    lat.finish();

    Block ch(root, "channel", true);
    c.channel.num_users = ch.get<std::size_t>("users", c.channel.num_users);
    if (c.channel.num_users == 0) throw ConfigError("channel.users", "must be >= 1");
    c.channel_preset = ch.get<std::string>("preset", "");
    if (!c.channel_preset.empty()) {
        bool found = false;
        for (const auto& m : channel_zoo(c.channel.num_users, c.power))
            if (m.name == c.channel_preset) {
                c.channel = m;
                found = true;
            }
        if (!found) throw ConfigError("channel.preset", "unknown zoo channel '" + c.channel_preset + "'");
    }
    c.channel.name = ch.get<std::string>("name", c.channel.name);
    if (ch.has("structure"))
        c.channel.structure = named("channel.structure", [&] { return parse_structure(ch.require<std::string>("structure")); });
    if (ch.has("noise_law"))
        c.channel.noise_law = named("channel.noise_law", [&] { return parse_noise_law(ch.require<std::string>("noise_law")); });
    c.channel.noise_variance = ch.get<double>("noise_variance", c.channel.noise_variance);
    c.channel.clip_level = ch.get<double>("clip_level", c.channel.clip_level);
    c.channel.cubic_coeff = ch.get<double>("cubic_coeff", c.channel.cubic_coeff);
    if (ch.has("gains")) {
        const auto& g = ch.raw("gains");
        if (!g.is_array()) throw ConfigError("channel.gains", "must be an array of numbers");
        c.channel.gains.clear();
        for (const auto& v : g) {
            if (!v.is_number()) throw ConfigError("channel.gains", "must be an array of numbers");
            c.channel.gains.push_back(v.get<double>());
        }
    }
    c.channel.mixture_weight = ch.get<double>("mixture_weight", c.channel.mixture_weight);
    c.channel.mixture_low = ch.get<double>("mixture_low", c.channel.mixture_low);
    c.channel.mixture_high = ch.get<double>("mixture_high", c.channel.mixture_high);
    named("channel", [&] { c.channel.validate(); return 0; });
    ch.finish();

    Block pre(root, "preprocessor", false);
    if (pre.has("kind"))
        c.preprocessor.kind = named("preprocessor.kind", [&] { return parse_preprocess_kind(pre.require<std::string>("kind")); });
    c.preprocessor.a = pre.get<double>("a", c.preprocessor.a);
    c.preprocessor.b = pre.get<double>("b", c.preprocessor.b);
    if ((c.preprocessor.kind == PreprocessKind::tanh_companding || c.preprocessor.kind == PreprocessKind::affine) &&
        c.preprocessor.a == 0.0)
        throw ConfigError("preprocessor.a", "must be nonzero");
    pre.finish();

    Block est(root, "estimator", false);
    if (est.has("kind"))
        c.estimator = named("estimator.kind", [&] { return parse_estimator_kind(est.require<std::string>("kind")); });
    c.training_size = est.get<std::size_t>("training_size", c.training_size);
    c.bins = est.get<std::size_t>("bins", c.bins);
    c.min_per_bin = est.get<std::size_t>("min_per_bin", c.min_per_bin);
    if (c.estimator != EstimatorKind::identity && c.training_size < kMinTrainingSize)
        throw ConfigError("estimator.training_size", "must be >= " + std::to_string(kMinTrainingSize));
    if (c.estimator == EstimatorKind::binned_conditional_mean && c.training_size < c.bins * c.min_per_bin)
        throw ConfigError("estimator.bins", "insufficient samples: " + std::to_string(c.bins) + " bins x " +
                                                std::to_string(c.min_per_bin) + " per bin exceeds training_size " +
                                                std::to_string(c.training_size));
    if (est.has("compare")) {
        const auto& list = est.raw("compare");
        if (!list.is_array()) throw ConfigError("estimator.compare", "must be an array of estimator kinds");
        for (const auto& v : list) {
            if (!v.is_string()) throw ConfigError("estimator.compare", "must be an array of estimator kinds");
            c.compare.push_back(named("estimator.compare", [&] { return parse_estimator_kind(v.get<std::string>()); }));
        }
    }
    est.finish();

    Block run(root, "run", true);
    c.trials = run.get<std::size_t>("trials", c.trials);
    if (c.trials == 0) throw ConfigError("run.trials", "must be >= 1");
    c.seed = run.require<std::uint64_t>("seed");
    const auto rule = run.get<std::string>("messages", "uniform");
    if (rule == "uniform") c.messages = MessageAssignment::Rule::uniform;
    else if (rule == "fixed") c.messages = MessageAssignment::Rule::fixed;
    else if (rule == "grid") c.messages = MessageAssignment::Rule::grid;
    else throw ConfigError("run.messages", "expected uniform, fixed or grid, got '" + rule + "'");
    c.grid_points = run.get<std::size_t>("grid_points", c.grid_points);
    if (c.grid_points == 0) throw ConfigError("run.grid_points", "must be >= 1");
    c.groups = run.get<std::size_t>("groups", c.messages == MessageAssignment::Rule::fixed ? 10 : 0);
    if (c.groups == 1) throw ConfigError("run.groups", "need 0 (no independence suite) or at least 2");
    if (c.messages == MessageAssignment::Rule::fixed && c.groups == 0)
        throw ConfigError("run.groups", "fixed message rule needs at least 2 groups");
    c.group_trials = run.get<std::size_t>("group_trials", c.group_trials);
    if (c.groups > 0 && c.group_trials < 1000) throw ConfigError("run.group_trials", "need at least 1000 per group");
    if (c.messages == MessageAssignment::Rule::fixed && c.trials < c.groups * 1000)
        throw ConfigError("run.trials", "fixed rule needs at least 1000 trials per group");
    c.workers = run.get<std::size_t>("workers", c.workers);
    if (c.workers == 0) throw ConfigError("run.workers", "must be >= 1");
    run.finish();

    Block an(root, "analysis", false);
    c.entropy_bins = an.get<std::size_t>("entropy_bins", c.entropy_bins);
    if (c.entropy_bins < 4 || c.entropy_bins % 2 != 0) throw ConfigError("analysis.entropy_bins", "must be even and >= 4");
    c.level = an.get<double>("independence_level", c.level);
    if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("analysis.independence_level", "must be in (0, 1)");
    an.finish();

    Block out(root, "output", false);
    c.out_dir = out.get<std::string>("dir", c.out_dir);
    const auto units = out.get<std::string>("units", "nats");
    if (units != "nats" && units != "bits") throw ConfigError("output.units", "expected nats or bits");
    c.bits = units == "bits";
    c.raw_dump = out.get<bool>("raw_dump", c.raw_dump);
    out.finish();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    json root;
    try {
        root = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(root);
}

inline json ExperimentConfig::to_json() const {
    json j;
    j["lattice"] = {{"kind", std::string(to_string(lattice_kind))}, {"dimension", dimension}, {"power", power}};
    json ch;
    if (!channel_preset.empty()) ch["preset"] = channel_preset;
    ch["name"] = channel.name;
    ch["users"] = channel.num_users;
    ch["structure"] = std::string(to_string(channel.structure));
    ch["noise_law"] = std::string(to_string(channel.noise_law));
    ch["noise_variance"] = channel.noise_variance;
    ch["clip_level"] = channel.clip_level;
    ch["cubic_coeff"] = channel.cubic_coeff;
    ch["gains"] = channel.gains;
    ch["mixture_weight"] = channel.mixture_weight;
    ch["mixture_low"] = channel.mixture_low;
    ch["mixture_high"] = channel.mixture_high;
    j["channel"] = ch;
    j["preprocessor"] = {{"kind", std::string(to_string(preprocessor.kind))}, {"a", preprocessor.a}, {"b", preprocessor.b}};
    json cmp = json::array();
    for (auto k : compare) cmp.push_back(std::string(to_string(k)));
    j["estimator"] = {{"kind", std::string(to_string(estimator))},
                      {"training_size", training_size},
                      {"bins", bins},
                      {"min_per_bin", min_per_bin},
                      {"compare", cmp}};
    j["run"] = {{"trials", trials},   {"seed", seed},     {"messages", std::string(detail::to_string(messages))},
                {"grid_points", grid_points}, {"groups", groups}, {"group_trials", group_trials}};
    j["analysis"] = {{"entropy_bins", entropy_bins}, {"independence_level", level}};
    j["output"] = {{"units", bits ? "bits" : "nats"}, {"raw_dump", raw_dump}};
    return j;
}

/// Writes `value` at a dotted path such as "channel.noise_variance". The
/// path must already name a numeric field of the effective config.
inline json set_parameter(const json& effective, const std::string& path, double value) {
    json out = effective;
    json* node = &out;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(key)) throw ConfigError(path, "unknown parameter path");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (!node->is_number()) throw ConfigError(path, "parameter is not numeric");
    if (node->is_number_integer()) {
        if (value != std::floor(value) || value < 0) throw ConfigError(path, "parameter needs a non-negative integer");
        *node = static_cast<std::uint64_t>(value);
    } else {
        *node = value;
    }
    return out;
}

struct ExperimentResult {
    ExperimentConfig config;
    Estimator estimator;
    NoiseProfile profile;
    double transmit_power = 0.0;  // measured E||x||^2 / n, averaged over users
    std::size_t identity_passed = 0;
    double identity_max_deviation = 0.0;
    bool has_independence = false;
    IndependenceReport independence;
    std::vector<ComparisonRow> comparison;
    std::vector<TrialRecord> records;  // kept only for the raw dump
};

inline TransformConfig transform_config(const ExperimentConfig& c) {
    TransformConfig t;
    t.lattice = scale_to_power(make_lattice(c.lattice_kind, c.dimension), c.power);
    t.channel = c.channel;
    t.preprocessor = Preprocessor::uniform(c.preprocessor, c.channel.num_users);
    return t;
}

inline Estimator fit_for(const ExperimentConfig& c, const TransformConfig& t, EstimatorKind kind) {
    try {
        return fit_estimator(t, kind, c.training_size, c.seed, c.bins, c.min_per_bin, c.workers);
    } catch (const InsufficientSamples& e) {
        throw ConfigError("estimator.bins", e.what());
    } catch (const DegenerateOutput& e) {
        throw ConfigError("channel", e.what());
    }
}

inline MessageAssignment message_assignment(const ExperimentConfig& c, const Lattice& lat) {
    switch (c.messages) {
        case MessageAssignment::Rule::uniform: return MessageAssignment::uniform_random();
        case MessageAssignment::Rule::grid: return MessageAssignment::grid(c.grid_points);
        case MessageAssignment::Rule::fixed: break;
    }
    Rng rng(c.seed, "tuples", 0);
    std::vector<std::vector<Vec>> tuples;
    for (std::size_t g = 0; g < c.groups; ++g) tuples.push_back(random_message_tuple(lat, c.channel.num_users, rng));
    return MessageAssignment::fixed(std::move(tuples));
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    ExperimentResult r;
    r.config = c;
    TransformConfig t = transform_config(c);
    t.estimator = fit_for(c, t, c.estimator);
    r.estimator = t.estimator;

    const auto ma = message_assignment(c, t.lattice);
    r.records = run_trials(t, ma, c.trials, c.seed, c.workers);
    double power = 0.0;
    for (const auto& rec : r.records) {
        const double dev = identity_deviation(t.lattice, rec);
        r.identity_max_deviation = std::max(r.identity_max_deviation, dev);
        if (dev <= 1e-9) ++r.identity_passed;
        for (const auto& x : rec.transmitted)
            for (double v : x) power += v * v;
    }
    r.transmit_power = power / static_cast<double>(c.trials * c.channel.num_users * c.dimension);

    const auto noise = collect_noise(r.records);
    r.profile = make_noise_profile(t.lattice, noise, c.entropy_bins);

    if (c.groups >= 2) {
        r.has_independence = true;
        if (c.messages == MessageAssignment::Rule::fixed) {
            r.independence = independence_report(t.lattice, noise.groups, c.level);
        } else {
            Rng rng(c.seed, "tuples", 0);
            std::vector<std::vector<Vec>> tuples;
            for (std::size_t g = 0; g < c.groups; ++g)
                tuples.push_back(random_message_tuple(t.lattice, c.channel.num_users, rng));
            const auto suite = run_trials(t, MessageAssignment::fixed(std::move(tuples)), c.groups * c.group_trials,
                                          derive_seed(c.seed, "independence", 0), c.workers);
            r.independence = independence_report(t.lattice, collect_noise(suite).groups, c.level);
        }
    }

    if (!c.compare.empty()) {
        std::vector<TransformConfig> variants;
        for (auto kind : c.compare) {
            auto v = t;
            v.estimator = kind == c.estimator ? r.estimator : fit_for(c, t, kind);
            variants.push_back(std::move(v));
        }
        r.comparison = compare_estimators(variants, ma, c.trials, c.seed, c.entropy_bins, c.workers);
    }
    if (!c.raw_dump) r.records.clear();
    return r;
}

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_header(std::ostream& os, const ExperimentConfig& c) {
    std::istringstream cfg(c.to_json().dump(2));
    for (std::string line; std::getline(cfg, line);) os << "# " << line << '\n';
}

inline std::ofstream open_report(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

}  // namespace detail

/// Writes summary.txt, histogram.csv, estimator.txt, and when configured
/// comparison.csv and trials.csv into `dir`.
///
/// trials.csv columns: index, label, then for each user i and coordinate j
/// v<i>_<j>, u<i>_<j>, x<i>_<j>; then per coordinate y_<j>, shat_<j>,
/// received_<j>, noise_<j>, folded_<j>.
inline void write_reports(const ExperimentResult& r, const std::filesystem::path& dir) {
    using detail::num;
    std::filesystem::create_directories(dir);
    const auto& c = r.config;
    const double unit = c.bits ? 1.0 / std::numbers::ln2 : 1.0;
    const auto& p = r.profile;

    {
        auto os = detail::open_report(dir / "summary.txt");
        detail::write_header(os, c);
        os << "units=" << (c.bits ? "bits" : "nats") << '\n';
        os << "lattice=" << to_string(c.lattice_kind) << '\n';
        os << "dimension=" << c.dimension << '\n';
        os << "lattice_scale=" << num(scale_to_power(make_lattice(c.lattice_kind, c.dimension), c.power).scale()) << '\n';
        os << "transmit_power=" << num(r.transmit_power) << '\n';
        os << "estimator=" << to_string(r.estimator.kind()) << '\n';
        os << "alpha=" << num(r.estimator.alpha()) << '\n';
        os << "beta=" << num(r.estimator.beta()) << '\n';
        os << "estimator_bins=" << r.estimator.num_bins() << '\n';
        os << "trials=" << c.trials << '\n';
        os << "mse=" << num(p.mse.mse) << '\n';
        os << "mse_se=" << num(p.mse.standard_error) << '\n';
        os << "entropy_folded=" << num(p.folded.nats * unit) << '\n';
        os << "entropy_folded_uncertainty=" << num(p.folded.uncertainty() * unit) << '\n';
        os << "entropy_raw=" << num(p.raw.nats * unit) << '\n';
        os << "entropy_raw_uncertainty=" << num(p.raw.uncertainty() * unit) << '\n';
        os << "entropy_bins=" << p.folded.bins << '\n';
        os << "resolution_limited=" << (p.folded.resolution_limited ? 1 : 0) << '\n';
        os << "log_volume_per_dim=" << num(p.log_volume_per_dim * unit) << '\n';
        os << "rate=" << num(p.rate.rate * unit) << '\n';
        os << "rate_unclamped=" << num(p.rate.unclamped * unit) << '\n';
        os << "rate_uncertainty=" << num(p.rate.uncertainty * unit) << '\n';
        os << "rate_clamped=" << (p.rate.clamped ? 1 : 0) << '\n';
        os << "identity_pass_rate=" << num(static_cast<double>(r.identity_passed) / static_cast<double>(c.trials)) << '\n';
        os << "identity_max_deviation=" << num(r.identity_max_deviation) << '\n';
        if (r.has_independence) {
            os << "independence_test=" << r.independence.test << '\n';
            os << "independence_groups=" << r.independence.groups << '\n';
            os << "independence_pairs=" << r.independence.pairs << '\n';
            os << "independence_acceptance=" << num(r.independence.acceptance_fraction) << '\n';
            os << "independence_worst_statistic=" << num(r.independence.worst_statistic) << '\n';
            os << "independence_worst_p_value=" << num(r.independence.worst_p_value) << '\n';
        }
    }
    {
        auto os = detail::open_report(dir / "histogram.csv");
        os << "bin,coord_lo,coord_hi,probability\n";
        const auto& pr = p.folded.probabilities;
        const double w = 1.0 / static_cast<double>(pr.size());
        for (std::size_t b = 0; b < pr.size(); ++b)
            os << b << ',' << num(b * w) << ',' << num((b + 1) * w) << ',' << num(pr[b]) << '\n';
    }
    {
        auto os = detail::open_report(dir / "estimator.txt");
        r.estimator.write(os);
    }
    if (!r.comparison.empty()) {
        auto os = detail::open_report(dir / "comparison.csv");
        os << "estimator,mse,mse_se,entropy_folded,entropy_raw,rate,rate_uncertainty,rate_clamped\n";
        for (const auto& row : r.comparison) {
            const auto& q = row.profile;
            os << row.estimator << ',' << num(q.mse.mse) << ',' << num(q.mse.standard_error) << ','
               << num(q.folded.nats * unit) << ',' << num(q.raw.nats * unit) << ',' << num(q.rate.rate * unit) << ','
               << num(q.rate.uncertainty * unit) << ',' << (q.rate.clamped ? 1 : 0) << '\n';
        }
    }
    if (c.raw_dump && !r.records.empty()) {
        auto os = detail::open_report(dir / "trials.csv");
        const std::size_t k = c.channel.num_users, n = c.dimension;
        os << "index,label";
        for (std::size_t i = 0; i < k; ++i)
            for (const char* f : {"v", "u", "x"})
                for (std::size_t j = 0; j < n; ++j) os << ',' << f << i << '_' << j;
        for (const char* f : {"y", "shat", "received", "noise", "folded"})
            for (std::size_t j = 0; j < n; ++j) os << ',' << f << '_' << j;
        os << '\n';
        for (const auto& rec : r.records) {
            os << rec.index << ',' << rec.label;
            for (std::size_t i = 0; i < k; ++i)
                for (const auto* vec : {&rec.messages[i], &rec.dithers[i], &rec.transmitted[i]})
                    for (double v : *vec) os << ',' << num(v);
            for (const auto* vec : {&rec.output, &rec.estimate, &rec.received, &rec.noise, &rec.folded})
                for (double v : *vec) os << ',' << num(v);
            os << '\n';
        }
    }
}

struct SweepPoint {
    double value = 0.0;
    ExperimentResult result;
};

/// One experiment per value. Every point reuses the base seed, so points
/// differ only through the swept parameter, and point i writes the same
/// reports as `run` into <out>/point_<i>. The combined table goes to
/// <out>/sweep.csv.
inline std::vector<SweepPoint> run_sweep(const json& effective, const std::string& path,
                                         const std::vector<double>& values, std::size_t workers,
                                         const std::filesystem::path& out) {
    if (values.empty()) throw ConfigError("--values", "empty value list");
    std::vector<SweepPoint> points;
    for (double v : values) {
        auto cfg = parse_config(set_parameter(effective, path, v));
        cfg.workers = workers;
        points.push_back({v, run_experiment(cfg)});
    }
    std::filesystem::create_directories(out);
    for (std::size_t i = 0; i < points.size(); ++i) write_reports(points[i].result, out / ("point_" + std::to_string(i)));

    auto os = detail::open_report(out / "sweep.csv");
    const auto& c0 = points.front().result.config;
    const double unit = c0.bits ? 1.0 / std::numbers::ln2 : 1.0;
    os << "parameter,value,alpha,mse,entropy_folded,entropy_raw,rate,rate_uncertainty,rate_clamped";
    for (auto k : c0.compare) os << ",rate_" << to_string(k) << ",rate_" << to_string(k) << "_uncertainty";
    os << '\n';
    for (const auto& pt : points) {
        const auto& p = pt.result.profile;
        using detail::num;
        os << path << ',' << num(pt.value) << ',' << num(pt.result.estimator.alpha()) << ',' << num(p.mse.mse) << ','
           << num(p.folded.nats * unit) << ',' << num(p.raw.nats * unit) << ',' << num(p.rate.rate * unit) << ','
           << num(p.rate.uncertainty * unit) << ',' << (p.rate.clamped ? 1 : 0);
        for (const auto& row : pt.result.comparison)
            os << ',' << num(row.profile.rate.rate * unit) << ',' << num(row.profile.rate.uncertainty * unit);
        os << '\n';
    }
    return points;
}

}  // namespace modlat
