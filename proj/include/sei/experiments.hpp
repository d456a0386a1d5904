#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sei/bispectrum.hpp"
#include "sei/classifier.hpp"
#include "sei/signal.hpp"
#include "sei/voting.hpp"

namespace sei {

struct DatasetManifest {
    std::vector<EmitterProfile> emitters;
    std::vector<double> snr_levels_db;
    std::size_t runs_per_setup = 2;
    std::size_t samples_per_case = 50;
    std::size_t subsample_length = 280;
    std::size_t block = 5;
    PowerScale scale = PowerScale::Log;  // linear is available via config
    std::uint64_t seed = 1;
    std::size_t signal_length = 100'000;

    std::size_t num_cases() const noexcept { return emitters.size() * snr_levels_db.size() * runs_per_setup; }
    std::size_t images_per_split() const noexcept { return num_cases() * samples_per_case; }
    std::size_t image_side() const noexcept { return block == 0 ? 0 : subsample_length / block; }

    void validate() const;

    /// 4 emitters x 3 SNR levels x 2 runs, 280-point subsamples (56x56 images).
    static DatasetManifest desk();
    /// 16 emitters x 11 SNR levels x 2 runs x 200 samples, 1120-point subsamples.
    static DatasetManifest full();
};

/// One recorded signal: an emitter at one SNR level in one run.
struct CaseInfo {
    std::string case_id;
    std::size_t case_index = 0;
    int emitter_id = 0;
    std::size_t emitter_index = 0;  // class label
    double snr_db = 0.0;
    std::size_t run = 0;
};

std::vector<CaseInfo> enumerate_cases(const DatasetManifest& manifest);

/// Synthesis seed of a case. Shared by all emitters at the same (SNR, run), so
/// they transmit identical content.
std::uint64_t case_signal_seed(const DatasetManifest& manifest, const CaseInfo& info);

enum class Split { Train, Val, Test };
const char* split_name(Split split) noexcept;

/// Subsample stream seed for a (split, case) pair; splits use disjoint keys.
std::uint64_t split_stream_seed(const DatasetManifest& manifest, Split split, std::size_t case_index);

struct StoredImage {
    std::size_t case_index = 0;
    std::size_t index = 0;
    LabeledImage item;
};

struct DatasetStore {
    DatasetManifest manifest;
    std::vector<CaseInfo> cases;
    std::vector<StoredImage> train;
    std::vector<StoredImage> val;
    std::vector<StoredImage> test;

    const std::vector<StoredImage>& split(Split s) const;
    std::vector<LabeledImage> labeled(Split s) const;
};

DatasetStore build_dataset(const DatasetManifest& manifest);

// On disk: <dir>/manifest.json plus <dir>/{train,val,test}/{case_id}_{index}.bsp
void write_dataset(const DatasetStore& store, const std::filesystem::path& dir);
DatasetStore read_dataset(const std::filesystem::path& dir);
DatasetStore build_dataset(const DatasetManifest& manifest, const std::filesystem::path& dir);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Something that can cast a stream of votes about a case with known truth.
class CaseVoter {
public:
    virtual ~CaseVoter() = default;
    virtual std::size_t num_categories() const = 0;
    virtual std::size_t num_cases() const = 0;
    virtual std::size_t truth(std::size_t case_index) const = 0;
    /// Independent vote stream per stream_key.
    virtual VoteSource votes(std::size_t case_index, std::uint64_t stream_key) const = 0;
};

/// Cases are classes repeated `cases_per_class` times; votes come from the
/// confusion matrix row of the true class.
class ConfusionCaseVoter : public CaseVoter {
public:
    ConfusionCaseVoter(ConfusionVoter voter, std::size_t cases_per_class = 1);

    std::size_t num_categories() const override { return voter_.num_classes(); }
    std::size_t num_cases() const override { return voter_.num_classes() * cases_per_class_; }
    std::size_t truth(std::size_t case_index) const override { return case_index % voter_.num_classes(); }
    VoteSource votes(std::size_t case_index, std::uint64_t stream_key) const override;

private:
    ConfusionVoter voter_;
    std::size_t cases_per_class_;
};

/// Votes are a classifier's predictions on subsamples drawn with replacement
/// from each case's pool of test images. Predictions are computed once.
class PooledPredictionVoter : public CaseVoter {
public:
    PooledPredictionVoter(const Classifier& model, const DatasetStore& store, Split split = Split::Test);

    std::size_t num_categories() const override { return num_categories_; }
    std::size_t num_cases() const override { return predictions_.size(); }
    std::size_t truth(std::size_t case_index) const override { return truths_.at(case_index); }
    VoteSource votes(std::size_t case_index, std::uint64_t stream_key) const override;

    const std::vector<std::vector<std::size_t>>& predictions() const noexcept { return predictions_; }

private:
    std::size_t num_categories_;
    std::vector<std::size_t> truths_;
    std::vector<std::vector<std::size_t>> predictions_;
};

struct SweepRow {
    double threshold = 0.0;
    std::size_t trials = 0;
    std::size_t wrong = 0;         // conclusive decisions naming the wrong category
    std::size_t inconclusive = 0;
    std::size_t max_votes_used = 0;
    double mean_votes_used = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

struct SweepOptions {
    StoppingRule rule = StoppingRule::Preponderance;
    MarginalConvention marginal = MarginalConvention::Aggregated;
    std::size_t max_votes = 10000;
    std::uint64_t seed = 0;
};

/// Each trial draws a true case uniformly and runs one sequential decision.
SweepResult accuracy_sweep(const CaseVoter& voter, const std::vector<double>& thresholds,
                           std::size_t trials_per_threshold, const SweepOptions& options);

/// One decision per case at each threshold; trials == number of cases.
SweepResult certainty_sweep(const CaseVoter& voter, const std::vector<double>& thresholds,
                            const SweepOptions& options);

/// `count` log-spaced values from hi down to lo inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

FitResult linear_fit(const std::vector<std::pair<double, double>>& points);

/// (log10 threshold, max votes used) pairs of a sweep.
std::vector<std::pair<double, double>> max_votes_vs_log_threshold(const SweepResult& sweep);

struct BaggingComparison {
    double gaussian_factor = 0.0;  // 1/sqrt(n)
    double voting_factor = 0.0;    // 10^(-n/8)
};

BaggingComparison bagging_comparison(long long n);

/// One-sided exact binomial test: P(X >= observed | trials, rate).
double binomial_upper_tail(std::size_t observed, std::size_t trials, double rate);

void persist_results(const SweepResult& result, const std::filesystem::path& path);
void persist_results(const FitResult& result, const std::filesystem::path& path);
std::string sweep_to_csv(const SweepResult& result);
std::string fit_to_csv(const FitResult& result);
SweepResult read_sweep_csv(const std::filesystem::path& path);
FitResult read_fit_csv(const std::filesystem::path& path);

/// Version string recorded in manifests.
const char* tool_version() noexcept;

}  // namespace sei
