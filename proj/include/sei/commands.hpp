#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sei/config.hpp"

namespace sei {

// File names inside the output directory.
inline constexpr const char* kDatasetDir = "dataset";
inline constexpr const char* kSignalsDir = "signals";
inline constexpr const char* kModelFile = "model.bin";
inline constexpr const char* kAccuracySweepFile = "accuracy_sweep.csv";
inline constexpr const char* kCertaintySweepFile = "certainty_sweep.csv";

/// Writes one iq32 recording per case under <out>/signals.
std::vector<std::filesystem::path> run_generate(const ToolConfig& config, const std::filesystem::path& out_dir,
                                                std::ostream& log);

/// Builds the feature store under <out>/dataset.
DatasetStore run_featurize(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Reuses <out>/dataset when its manifest matches the configuration.
DatasetStore load_or_build_dataset(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Trains the softmax baseline, saves <out>/model.bin and <out>/confusion.csv.
SoftmaxModel run_train(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct IdentifyReport {
    Decision decision;
    int winner_label = 0;  // emitter id of the winning class
    std::optional<int> true_label;
};

/// Streams subsamples of the recording through featurize -> classify ->
/// sequential voting. Writes <out>/decision.json.
IdentifyReport run_identify(const ToolConfig& config, const std::filesystem::path& signal_path,
                            const std::filesystem::path& model_path, const std::filesystem::path& out_dir,
                            std::ostream& log);

SweepResult run_sweep_accuracy(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log);
SweepResult run_sweep_certainty(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct SweepSummary {
    std::filesystem::path file;
    std::size_t thresholds = 0;
    std::size_t decisions = 0;
    std::size_t wrong = 0;
    std::size_t inconclusive = 0;
    std::optional<FitResult> fit;  // absent when fewer than two thresholds
};

/// Summarizes every sweep CSV in `results_dir` and fits max votes against
/// log10 threshold. Writes <stem>_fit.csv next to each fitted sweep.
std::vector<SweepSummary> run_report(const std::filesystem::path& results_dir, std::ostream& out);

}  // namespace sei
