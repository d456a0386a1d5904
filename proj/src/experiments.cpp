#include "sei/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "parallel.hpp"
#include "sei/error.hpp"
#include "sei/rng.hpp"

#ifndef SEI_VERSION_STRING
#define SEI_VERSION_STRING "unknown"
#endif

namespace sei {
namespace {

using nlohmann::json;

constexpr const char* kSweepHeader = "threshold,trials,wrong,inconclusive,max_votes_used,mean_votes_used";
constexpr const char* kFitHeader = "slope,intercept,r_squared";

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void validate_thresholds(const std::vector<double>& thresholds, const char* op) {
    for (double t : thresholds) {
        if (!(t > 0.0 && t < 0.5)) {
            throw std::invalid_argument(std::string(op) + ": threshold " + fmt17(t) + " outside (0, 0.5)");
        }
    }
    if (thresholds.size() < 2) return;
    const bool increasing = thresholds[1] > thresholds[0];
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        if (increasing ? !(thresholds[i] > thresholds[i - 1]) : !(thresholds[i] < thresholds[i - 1])) {
            throw std::invalid_argument(std::string(op) + ": thresholds must be strictly ordered");
        }
    }
}

StoppingConfig stopping_for(double threshold, const SweepOptions& options) {
    StoppingConfig cfg;
    cfg.acceptable_error = threshold;
    cfg.rule = options.rule;
    cfg.marginal = options.marginal;
    cfg.max_votes = options.max_votes;
    cfg.validate();
    return cfg;
}

SweepRow summarize(double threshold, const std::vector<Decision>& decisions, const std::vector<std::size_t>& truths) {
    SweepRow row;
    row.threshold = threshold;
    row.trials = decisions.size();
    double total_votes = 0.0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        if (!d.conclusive) {
            ++row.inconclusive;
        } else if (d.winner != truths[i]) {
            ++row.wrong;
        }
        row.max_votes_used = std::max(row.max_votes_used, d.votes_used);
        total_votes += static_cast<double>(d.votes_used);
    }
    row.mean_votes_used = decisions.empty() ? 0.0 : total_votes / static_cast<double>(decisions.size());
    return row;
}

json profile_to_json(const EmitterProfile& p) {
    return json{{"emitter_id", p.emitter_id},
                {"poly_coeffs", {p.poly_coeffs[0], p.poly_coeffs[1], p.poly_coeffs[2]}},
                {"iq_gain_imbalance", p.iq_gain_imbalance},
                {"iq_phase_skew_rad", p.iq_phase_skew_rad},
                {"dc_offset", {p.dc_offset.real(), p.dc_offset.imag()}}};
}

EmitterProfile profile_from_json(const json& j) {
    EmitterProfile p;
    p.emitter_id = j.at("emitter_id").get<int>();
    const auto poly = j.at("poly_coeffs").get<std::vector<double>>();
    if (poly.size() != 3) throw std::invalid_argument("poly_coeffs must have 3 entries");
    p.poly_coeffs = {poly[0], poly[1], poly[2]};
    p.iq_gain_imbalance = j.at("iq_gain_imbalance").get<double>();
    p.iq_phase_skew_rad = j.at("iq_phase_skew_rad").get<double>();
    const auto dc = j.at("dc_offset").get<std::vector<double>>();
    if (dc.size() != 2) throw std::invalid_argument("dc_offset must be [re, im]");
    p.dc_offset = {dc[0], dc[1]};
    p.validate();
    return p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::vector<std::vector<std::string>> read_csv_body(const std::filesystem::path& path, const char* header,
                                                    std::size_t columns) {
    std::ifstream is(path);
    if (!is) throw IoError(path.string(), "file not found");
    std::string line;
    if (!std::getline(is, line) || line != header) throw IoError(path.string(), std::string("expected header ") + header);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != columns) throw IoError(path.string(), "malformed row: " + line);
        rows.push_back(std::move(cells));
    }
    return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    os << text;
    if (!os) throw IoError(path.string(), "write failed");
}

}  // namespace

const char* tool_version() noexcept { return SEI_VERSION_STRING; }

void DatasetManifest::validate() const {
    if (emitters.size() < 2) throw std::invalid_argument("manifest: need at least 2 emitters");
    for (std::size_t i = 0; i < emitters.size(); ++i) {
        emitters[i].validate();
        for (std::size_t j = 0; j < i; ++j) {
            if (emitters[j].emitter_id == emitters[i].emitter_id) {
                throw std::invalid_argument("manifest: duplicate emitter_id " + std::to_string(emitters[i].emitter_id));
            }
        }
    }
    if (snr_levels_db.empty()) throw std::invalid_argument("manifest: snr_levels_db is empty");
    for (double s : snr_levels_db) {
        if (std::isnan(s) || s == -HUGE_VAL) throw std::invalid_argument("manifest: invalid SNR level");
    }
    if (runs_per_setup == 0) throw std::invalid_argument("manifest: runs_per_setup must be positive");
    if (samples_per_case == 0) throw std::invalid_argument("manifest: samples_per_case must be positive");
    if (block == 0 || subsample_length % block != 0 || subsample_length < 4) {
        throw std::invalid_argument("manifest: subsample_length " + std::to_string(subsample_length) +
                                    " must be >= 4 and divisible by block " + std::to_string(block));
    }
    if (signal_length < std::max(subsample_length, kMinSynthLength)) {
        throw std::invalid_argument("manifest: signal_length " + std::to_string(signal_length) + " is too short");
    }
}

DatasetManifest DatasetManifest::desk() {
    DatasetManifest m;
    m.emitters = default_emitter_profiles(4);
    m.snr_levels_db = {10.0, 20.0, 30.0};
    m.runs_per_setup = 2;
    m.samples_per_case = 50;
    m.subsample_length = 280;
    m.block = 5;
    m.seed = 1;
    m.signal_length = 100'000;
    return m;
}

DatasetManifest DatasetManifest::full() {
    DatasetManifest m;
    m.emitters = default_emitter_profiles(16);
    m.snr_levels_db.clear();
    for (int i = 0; i <= 10; ++i) m.snr_levels_db.push_back(3.0 * i);
    m.runs_per_setup = 2;
    m.samples_per_case = 200;
    m.subsample_length = 1120;
    m.block = 5;
    m.seed = 1;
    m.signal_length = kInferredRecordingLength;
    return m;
}

std::vector<CaseInfo> enumerate_cases(const DatasetManifest& manifest) {
    std::vector<CaseInfo> cases;
    cases.reserve(manifest.num_cases());
    for (std::size_t e = 0; e < manifest.emitters.size(); ++e) {
        for (std::size_t s = 0; s < manifest.snr_levels_db.size(); ++s) {
            for (std::size_t r = 0; r < manifest.runs_per_setup; ++r) {
                CaseInfo info;
                info.case_index = cases.size();
                info.emitter_id = manifest.emitters[e].emitter_id;
                info.emitter_index = e;
                info.snr_db = manifest.snr_levels_db[s];
                info.run = r;
                char id[64];
                std::snprintf(id, sizeof id, "e%02d_s%02zu_r%zu", info.emitter_id, s, r);
                info.case_id = id;
                cases.push_back(std::move(info));
            }
        }
    }
    return cases;
}

std::uint64_t case_signal_seed(const DatasetManifest& manifest, const CaseInfo& info) {
    // SNR level index and run only: emitters at the same setup share content.
    const auto snr_index = static_cast<std::uint64_t>(
        std::find(manifest.snr_levels_db.begin(), manifest.snr_levels_db.end(), info.snr_db) -
        manifest.snr_levels_db.begin());
    return CounterRng::keyed(manifest.seed, StreamPurpose::Baseline, snr_index, info.run)();
}

const char* split_name(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::uint64_t split_stream_seed(const DatasetManifest& manifest, Split split, std::size_t case_index) {
    const StreamPurpose purpose = split == Split::Train ? StreamPurpose::TrainSplit
                                  : split == Split::Val ? StreamPurpose::ValSplit
                                                        : StreamPurpose::TestSplit;
    return CounterRng::keyed(manifest.seed, purpose, case_index)();
}

const std::vector<StoredImage>& DatasetStore::split(Split s) const {
    return s == Split::Train ? train : s == Split::Val ? val : test;
}

std::vector<LabeledImage> DatasetStore::labeled(Split s) const {
    std::vector<LabeledImage> out;
    out.reserve(split(s).size());
    for (const auto& img : split(s)) out.push_back(img.item);
    return out;
}

DatasetStore build_dataset(const DatasetManifest& manifest) {
    manifest.validate();
    DatasetStore store;
    store.manifest = manifest;
    store.cases = enumerate_cases(manifest);
    const std::size_t per_case = manifest.samples_per_case;
    const std::size_t total = manifest.images_per_split();
    store.train.resize(total);
    store.val.resize(total);
    store.test.resize(total);
    const FeaturizeOptions featurize_options{manifest.block, manifest.scale};

    detail::parallel_for(store.cases.size(), [&](std::size_t c) {
        const CaseInfo& info = store.cases[c];
        const IqSignal signal = synthesize_emitter_signal(manifest.emitters[info.emitter_index],
                                                          manifest.signal_length, info.snr_db,
                                                          case_signal_seed(manifest, info));
        for (Split split : {Split::Train, Split::Val, Split::Test}) {
            auto& dest = split == Split::Train ? store.train : split == Split::Val ? store.val : store.test;
            const SubsampleSpec spec{manifest.subsample_length, split_stream_seed(manifest, split, c), true};
            for (std::size_t i = 0; i < per_case; ++i) {
                StoredImage& slot = dest[c * per_case + i];
                slot.case_index = c;
                slot.index = i;
                slot.item.label = info.emitter_index;
                slot.item.image = featurize(extract_subsample(signal, spec, i), featurize_options);
            }
        }
    });
    return store;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    json j;
    j["emitters"] = json::array();
    for (const auto& p : manifest.emitters) j["emitters"].push_back(profile_to_json(p));
    j["snr_levels_db"] = manifest.snr_levels_db;
    j["runs_per_setup"] = manifest.runs_per_setup;
    j["samples_per_case"] = manifest.samples_per_case;
    j["subsample_length"] = manifest.subsample_length;
    j["block"] = manifest.block;
    j["power_scale"] = manifest.scale == PowerScale::Linear ? "linear" : "log";
    j["seed"] = manifest.seed;
    j["signal_length"] = manifest.signal_length;
    j["tool_version"] = tool_version();
    return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        DatasetManifest m;
        m.emitters.clear();
        for (const auto& p : j.at("emitters")) m.emitters.push_back(profile_from_json(p));
        m.snr_levels_db = j.at("snr_levels_db").get<std::vector<double>>();
        m.runs_per_setup = j.at("runs_per_setup").get<std::size_t>();
        m.samples_per_case = j.at("samples_per_case").get<std::size_t>();
        m.subsample_length = j.at("subsample_length").get<std::size_t>();
        m.block = j.at("block").get<std::size_t>();
        m.scale = j.value("power_scale", std::string("linear")) == "log" ? PowerScale::Log : PowerScale::Linear;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.signal_length = j.at("signal_length").get<std::size_t>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

void write_dataset(const DatasetStore& store, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
    write_text(dir / "manifest.json", manifest_to_json(store.manifest));
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        const auto split_dir = dir / split_name(split);
        std::filesystem::create_directories(split_dir, ec);
        if (ec) throw IoError(split_dir.string(), "cannot create directory: " + ec.message());
        for (const auto& img : store.split(split)) {
            write_bsp(split_dir / (store.cases[img.case_index].case_id + "_" + std::to_string(img.index) + ".bsp"),
                      img.item.image);
        }
    }
}

DatasetStore read_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream is(manifest_path);
    if (!is) throw IoError(manifest_path.string(), "file not found");
    std::stringstream ss;
    ss << is.rdbuf();
    DatasetStore store;
    store.manifest = manifest_from_json(ss.str());
    store.cases = enumerate_cases(store.manifest);
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        auto& dest = split == Split::Train ? store.train : split == Split::Val ? store.val : store.test;
        for (const auto& info : store.cases) {
            for (std::size_t i = 0; i < store.manifest.samples_per_case; ++i) {
                StoredImage img;
                img.case_index = info.case_index;
                img.index = i;
                img.item.label = info.emitter_index;
                img.item.image = read_bsp(dir / split_name(split) / (info.case_id + "_" + std::to_string(i) + ".bsp"));
                img.item.image.source_emitter = info.emitter_id;
                dest.push_back(std::move(img));
            }
        }
    }
    return store;
}

DatasetStore build_dataset(const DatasetManifest& manifest, const std::filesystem::path& dir) {
    auto store = build_dataset(manifest);
    write_dataset(store, dir);
    return store;
}

ConfusionCaseVoter::ConfusionCaseVoter(ConfusionVoter voter, std::size_t cases_per_class)
    : voter_(std::move(voter)), cases_per_class_(cases_per_class) {
    if (cases_per_class_ == 0) throw std::invalid_argument("ConfusionCaseVoter: cases_per_class must be positive");
}

VoteSource ConfusionCaseVoter::votes(std::size_t case_index, std::uint64_t stream_key) const {
    if (case_index >= num_cases()) throw std::invalid_argument("ConfusionCaseVoter: case out of range");
    return [voter = voter_.with_seed(stream_key), truth = truth(case_index),
            draw = std::uint64_t{0}]() mutable -> std::optional<std::size_t> { return voter.sample(truth, draw++); };
}

PooledPredictionVoter::PooledPredictionVoter(const Classifier& model, const DatasetStore& store, Split split)
    : num_categories_(model.num_classes()) {
    const auto& images = store.split(split);
    truths_.resize(store.cases.size());
    predictions_.assign(store.cases.size(), {});
    for (const auto& info : store.cases) truths_[info.case_index] = info.emitter_index;
    std::vector<std::size_t> predicted(images.size());
    detail::parallel_for(images.size(), [&](std::size_t i) { predicted[i] = model.classify(images[i].item.image); });
    for (std::size_t i = 0; i < images.size(); ++i) predictions_[images[i].case_index].push_back(predicted[i]);
    for (std::size_t c = 0; c < predictions_.size(); ++c) {
        if (predictions_[c].empty()) {
            throw std::invalid_argument("PooledPredictionVoter: case " + store.cases[c].case_id + " has no images");
        }
    }
}

VoteSource PooledPredictionVoter::votes(std::size_t case_index, std::uint64_t stream_key) const {
    const auto& pool = predictions_.at(case_index);
    return [&pool, rng = CounterRng::keyed(stream_key, StreamPurpose::Identify, case_index)]() mutable
           -> std::optional<std::size_t> { return pool[static_cast<std::size_t>(rng.below(pool.size()))]; };
}

SweepResult accuracy_sweep(const CaseVoter& voter, const std::vector<double>& thresholds,
                           std::size_t trials_per_threshold, const SweepOptions& options) {
    validate_thresholds(thresholds, "accuracy_sweep");
    if (trials_per_threshold == 0) throw std::invalid_argument("accuracy_sweep: trials must be >= 1");
    SweepResult result;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const StoppingConfig cfg = stopping_for(thresholds[t], options);
        std::vector<Decision> decisions(trials_per_threshold);
        std::vector<std::size_t> truths(trials_per_threshold);
        detail::parallel_for(trials_per_threshold, [&](std::size_t j) {
            auto rng = CounterRng::keyed(options.seed, StreamPurpose::TrialCase, t, j);
            const auto case_index = static_cast<std::size_t>(rng.below(voter.num_cases()));
            truths[j] = voter.truth(case_index);
            decisions[j] = decide_sequential(voter.votes(case_index, rng()), voter.num_categories(), cfg);
        });
        result.rows.push_back(summarize(thresholds[t], decisions, truths));
    }
    return result;
}

SweepResult certainty_sweep(const CaseVoter& voter, const std::vector<double>& thresholds,
                            const SweepOptions& options) {
    validate_thresholds(thresholds, "certainty_sweep");
    SweepResult result;
    const std::size_t cases = voter.num_cases();
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const StoppingConfig cfg = stopping_for(thresholds[t], options);
        std::vector<Decision> decisions(cases);
        std::vector<std::size_t> truths(cases);
        detail::parallel_for(cases, [&](std::size_t c) {
            auto rng = CounterRng::keyed(options.seed, StreamPurpose::TrialCase, t, c + (std::uint64_t{1} << 40));
            truths[c] = voter.truth(c);
            decisions[c] = decide_sequential(voter.votes(c, rng()), voter.num_categories(), cfg);
        });
        result.rows.push_back(summarize(thresholds[t], decisions, truths));
    }
    return result;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0 && hi > lo) || count < 2) throw std::invalid_argument("log_spaced: need 0 < lo < hi and count >= 2");
    std::vector<double> out(count);
    const double a = std::log10(hi);
    const double b = std::log10(lo);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    out.front() = hi;
    out.back() = lo;
    return out;
}

FitResult linear_fit(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw std::invalid_argument("linear_fit: need at least 2 points");
    const double n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_fit: all x values are equal");
    FitResult fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
        const double r = y - (fit.slope * x + fit.intercept);
        ss_res += r * r;
    }
    if (syy == 0.0) {
        fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
    } else {
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

std::vector<std::pair<double, double>> max_votes_vs_log_threshold(const SweepResult& sweep) {
    std::vector<std::pair<double, double>> out;
    out.reserve(sweep.rows.size());
    for (const auto& row : sweep.rows) out.emplace_back(std::log10(row.threshold), static_cast<double>(row.max_votes_used));
    return out;
}

BaggingComparison bagging_comparison(long long n) {
    if (n < 1) throw std::invalid_argument("bagging_comparison: n must be >= 1");
    const double nd = static_cast<double>(n);
    return {1.0 / std::sqrt(nd), std::pow(10.0, -nd / 8.0)};
}

double binomial_upper_tail(std::size_t observed, std::size_t trials, double rate) {
    if (observed > trials) throw std::invalid_argument("binomial_upper_tail: observed > trials");
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("binomial_upper_tail: rate outside [0, 1]");
    if (observed == 0) return 1.0;
    if (rate == 0.0) return 0.0;
    if (rate == 1.0) return 1.0;
    // P(X >= k) = I_p(k, n - k + 1)
    return reg_incomplete_beta(rate, static_cast<double>(observed), static_cast<double>(trials - observed + 1));
}

std::string sweep_to_csv(const SweepResult& result) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& r : result.rows) {
        out += fmt17(r.threshold) + "," + std::to_string(r.trials) + "," + std::to_string(r.wrong) + "," +
               std::to_string(r.inconclusive) + "," + std::to_string(r.max_votes_used) + "," +
               fmt17(r.mean_votes_used) + "\n";
    }
    return out;
}

std::string fit_to_csv(const FitResult& result) {
    return std::string(kFitHeader) + "\n" + fmt17(result.slope) + "," + fmt17(result.intercept) + "," +
           fmt17(result.r_squared) + "\n";
}

void persist_results(const SweepResult& result, const std::filesystem::path& path) {
    write_text(path, sweep_to_csv(result));
}

void persist_results(const FitResult& result, const std::filesystem::path& path) {
    write_text(path, fit_to_csv(result));
}

SweepResult read_sweep_csv(const std::filesystem::path& path) {
    SweepResult result;
    try {
        for (const auto& cells : read_csv_body(path, kSweepHeader, 6)) {
            SweepRow r;
            r.threshold = std::stod(cells[0]);
            r.trials = std::stoull(cells[1]);
            r.wrong = std::stoull(cells[2]);
            r.inconclusive = std::stoull(cells[3]);
            r.max_votes_used = std::stoull(cells[4]);
            r.mean_votes_used = std::stod(cells[5]);
            result.rows.push_back(r);
        }
    } catch (const std::logic_error& e) {
        throw IoError(path.string(), std::string("unparseable value: ") + e.what());
    }
    return result;
}

FitResult read_fit_csv(const std::filesystem::path& path) {
    const auto rows = read_csv_body(path, kFitHeader, 3);
    if (rows.size() != 1) throw IoError(path.string(), "expected exactly one data row");
    try {
        return {std::stod(rows[0][0]), std::stod(rows[0][1]), std::stod(rows[0][2])};
    } catch (const std::logic_error& e) {
        throw IoError(path.string(), std::string("unparseable value: ") + e.what());
    }
}

}  // namespace sei
