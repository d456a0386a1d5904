// sei: sequential-voting emitter identification over bispectrum features.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sei/commands.hpp"
#include "sei/error.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kConfig = 2,
    kIo = 3,
    kNumeric = 4,
    kInconclusive = 5,
};

int fail(const char* category, const std::string& message, int code) {
    std::cerr << "error[" << category << "]: " << message << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential-voting specific emitter identification"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output_dir = "sei_out";
    std::optional<double> threshold;
    std::optional<std::string> rule;
    std::optional<std::string> preset;

    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--seed", seed, "Root random seed");
    app.add_option("--output-dir", output_dir, "Directory for all outputs")->capture_default_str();
    app.add_option("--threshold", threshold, "Acceptable error threshold E_AT in (0, 0.5)");
    app.add_option("--rule", rule, "Stopping rule")->check(CLI::IsMember({"preponderance", "favored"}));
    app.add_option("--preset", preset, "Size preset")->check(CLI::IsMember({"desk", "full"}));

    auto* generate = app.add_subcommand("generate", "Synthesize one iq32 recording per case");
    auto* featurize = app.add_subcommand("featurize", "Build the train/val/test bispectrum image store");
    auto* train = app.add_subcommand("train", "Train the softmax baseline classifier");
    auto* identify = app.add_subcommand("identify", "Identify the emitter of a recording");
    std::string signal_path;
    std::string model_path;
    identify->add_option("--signal", signal_path, "iq32 recording")->required();
    identify->add_option("--model", model_path, "Model file (default <output-dir>/model.bin)");
    auto* sweep_accuracy = app.add_subcommand("sweep-accuracy", "Observed error rate per acceptable error threshold");
    auto* sweep_certainty = app.add_subcommand("sweep-certainty", "Votes needed per acceptable error threshold");
    auto* report = app.add_subcommand("report", "Summarize sweep CSVs and fit votes against log10 threshold");
    std::string results_dir;
    report->add_option("results_dir", results_dir, "Directory of sweep CSVs (default <output-dir>)");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::optional<sei::Preset> preset_override =
            preset ? std::optional(sei::parse_preset(*preset)) : std::nullopt;
        sei::ToolConfig config = config_path.empty()
                                     ? sei::parse_config_text("{}", preset_override)
                                     : sei::parse_config(config_path, preset_override);
        if (seed) sei::apply_seed(config, *seed);
        if (threshold) config.stopping.acceptable_error = *threshold;
        if (rule) config.stopping.rule = sei::parse_stopping_rule(*rule);
        config.validate();

        const std::filesystem::path out = output_dir;
        std::cout << std::unitbuf;
        if (report->parsed()) {
            sei::run_report(results_dir.empty() ? out : std::filesystem::path(results_dir), std::cout);
            return kOk;
        }
        std::filesystem::create_directories(out);
        if (generate->parsed()) {
            sei::run_generate(config, out, std::cout);
        } else if (featurize->parsed()) {
            sei::run_featurize(config, out, std::cout);
        } else if (train->parsed()) {
            sei::run_train(config, out, std::cout);
        } else if (identify->parsed()) {
            const auto model = model_path.empty() ? out / sei::kModelFile : std::filesystem::path(model_path);
            const auto result = sei::run_identify(config, signal_path, model, out, std::cout);
            if (!result.decision.conclusive) {
                return fail("inconclusive",
                            result.decision.exhausted ? "vote source exhausted before reaching the threshold"
                                                      : "max_votes reached before reaching the threshold",
                            kInconclusive);
            }
        } else if (sweep_accuracy->parsed()) {
            sei::run_sweep_accuracy(config, out, std::cout);
        } else if (sweep_certainty->parsed()) {
            sei::run_sweep_certainty(config, out, std::cout);
        }
        return kOk;
    } catch (const sei::ConfigError& e) {
        return fail("config", e.what(), kConfig);
    } catch (const sei::IoError& e) {
        return fail("io", e.what(), kIo);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("io", e.what(), kIo);
    } catch (const sei::NumericError& e) {
        return fail("numeric", e.what(), kNumeric);
    } catch (const std::invalid_argument& e) {
        return fail("config", e.what(), kConfig);
    } catch (const std::exception& e) {
        return fail("error", e.what(), kOther);
    }
}
