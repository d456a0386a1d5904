#include "sei/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sei/error.hpp"
#include "sei/rng.hpp"

namespace sei {
namespace {

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

SweepOptions sweep_options(const ToolConfig& config) {
    SweepOptions o;
    o.rule = config.stopping.rule;
    o.marginal = config.stopping.marginal;
    o.max_votes = config.stopping.max_votes;
    o.seed = config.manifest.seed;
    return o;
}

void print_sweep(const SweepResult& result, std::ostream& log) {
    log << "threshold    trials  wrong  inconclusive  max_votes  mean_votes\n";
    for (const auto& r : result.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-11.4e %7zu %6zu %13zu %10zu %11.3f\n", r.threshold, r.trials, r.wrong,
                      r.inconclusive, r.max_votes_used, r.mean_votes_used);
        log << line;
    }
}

// Voter named by the configuration; the model voter keeps its inputs alive.
struct ConfiguredVoter {
    std::optional<SoftmaxModel> model;
    std::optional<DatasetStore> store;
    std::unique_ptr<CaseVoter> voter;
};

ConfiguredVoter make_voter(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    ConfiguredVoter v;
    if (config.sweep.voter == VoterKind::Confusion) {
        auto cv = ConfusionVoter::uniform_off_diagonal(config.sweep.confusion_classes, config.sweep.confusion_diagonal,
                                                       config.manifest.seed);
        v.voter = std::make_unique<ConfusionCaseVoter>(std::move(cv), config.sweep.cases_per_class);
        log << "voter: confusion matrix, diagonal " << config.sweep.confusion_diagonal << " over "
            << config.sweep.confusion_classes << " classes\n";
        return v;
    }
    v.model = SoftmaxModel::load(out_dir / kModelFile);
    v.store = load_or_build_dataset(config, out_dir, log);
    if (v.model->image_side() != config.image_side()) {
        throw ConfigError("model expects " + std::to_string(v.model->image_side()) + "-pixel images but the dataset has " +
                          std::to_string(config.image_side()));
    }
    v.voter = std::make_unique<PooledPredictionVoter>(*v.model, *v.store, Split::Test);
    log << "voter: trained model on " << v.store->cases.size() << " test cases\n";
    return v;
}

}  // namespace

std::vector<std::filesystem::path> run_generate(const ToolConfig& config, const std::filesystem::path& out_dir,
                                                std::ostream& log) {
    const auto dir = out_dir / kSignalsDir;
    ensure_dir(dir);
    std::vector<std::filesystem::path> written;
    for (const auto& info : enumerate_cases(config.manifest)) {
        const auto signal = synthesize_emitter_signal(config.manifest.emitters[info.emitter_index],
                                                      config.manifest.signal_length, info.snr_db,
                                                      case_signal_seed(config.manifest, info));
        const auto path = dir / (info.case_id + ".iq32");
        write_iq32(path, signal);
        written.push_back(path);
    }
    log << "wrote " << written.size() << " signals of " << config.manifest.signal_length << " points to "
        << dir.string() << "\n";
    return written;
}

DatasetStore run_featurize(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto dir = out_dir / kDatasetDir;
    auto store = build_dataset(config.manifest, dir);
    log << "wrote " << store.manifest.images_per_split() << " images per split (" << store.manifest.image_side() << "x"
        << store.manifest.image_side() << "x3) to " << dir.string() << "\n";
    return store;
}

DatasetStore load_or_build_dataset(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    const auto dir = out_dir / kDatasetDir;
    const auto manifest_path = dir / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        std::ifstream is(manifest_path);
        std::stringstream ss;
        ss << is.rdbuf();
        if (ss.str() == manifest_to_json(config.manifest)) {
            log << "using dataset in " << dir.string() << "\n";
            return read_dataset(dir);
        }
        log << "dataset in " << dir.string() << " does not match the configuration; rebuilding\n";
    }
    return run_featurize(config, out_dir, log);
}

SoftmaxModel run_train(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const auto store = load_or_build_dataset(config, out_dir, log);
    const auto train = store.labeled(Split::Train);
    const auto val = store.labeled(Split::Val);
    const std::size_t classes = store.manifest.emitters.size();
    TrainingReport report;
    auto model = train_softmax(train, val, classes, config.training, &report);
    model.save(out_dir / kModelFile);

    log << "trained " << report.epochs_run << " epochs (" << report.step_halvings << " step halvings), final loss "
        << fixed(report.epoch_losses.back(), 5) << "\n";
    log << "validation accuracy " << fixed(model.validation_accuracy, 4) << "; per class:";
    for (double a : model.per_class_validation_accuracy) log << " " << fixed(a, 3);
    log << "\n";
    if (std::any_of(model.per_class_validation_accuracy.begin(), model.per_class_validation_accuracy.end(),
                    [](double a) { return a <= 0.5; })) {
        log << "warning: some class is at or below 50% validation accuracy; preponderance voting may not converge\n";
    }

    const auto confusion = estimate_confusion(model, store.labeled(Split::Test), classes);
    std::ofstream cs(out_dir / "confusion.csv");
    if (!cs) throw IoError((out_dir / "confusion.csv").string(), "cannot open for writing");
    for (const auto& row : confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", row[j]);
            cs << (j ? "," : "") << buf;
        }
        cs << "\n";
    }
    log << "saved " << (out_dir / kModelFile).string() << "\n";
    return model;
}

IdentifyReport run_identify(const ToolConfig& config, const std::filesystem::path& signal_path,
                            const std::filesystem::path& model_path, const std::filesystem::path& out_dir,
                            std::ostream& log) {
    const auto model = SoftmaxModel::load(model_path);
    const auto signal = read_iq32(signal_path);
    if (model.image_side() != config.image_side()) {
        throw ConfigError("model expects " + std::to_string(model.image_side()) + "x" +
                          std::to_string(model.image_side()) + " images but subsample_length/block gives " +
                          std::to_string(config.image_side()));
    }
    if (model.num_classes() != config.manifest.emitters.size()) {
        throw ConfigError("model has " + std::to_string(model.num_classes()) + " classes but the configuration names " +
                          std::to_string(config.manifest.emitters.size()) + " emitters");
    }
    const SubsampleSpec spec{config.manifest.subsample_length,
                             CounterRng::keyed(config.manifest.seed, StreamPurpose::Identify)(), true};
    const FeaturizeOptions featurize_options{config.manifest.block, config.manifest.scale};
    std::uint64_t draw = 0;
    const VoteSource source = [&]() -> std::optional<std::size_t> {
        return model.classify(featurize(extract_subsample(signal, spec, draw++), featurize_options));
    };
    IdentifyReport report;
    report.decision = decide_sequential(source, model.num_classes(), config.stopping);
    report.winner_label = config.manifest.emitters[report.decision.winner].emitter_id;
    report.true_label = signal.emitter_id();

    const auto& d = report.decision;
    log << (d.conclusive ? "identified" : "inconclusive") << ": emitter " << report.winner_label << " after "
        << d.votes_used << " votes, certainty " << fixed(d.achieved_certainty, 12) << " (" << to_string(d.rule)
        << ", acceptable error " << sci(config.stopping.acceptable_error) << ")\n";

    ensure_dir(out_dir);
    nlohmann::json j;
    j["winner"] = d.winner;
    j["winner_label"] = report.winner_label;
    j["votes_used"] = d.votes_used;
    j["achieved_certainty"] = d.achieved_certainty;
    j["rule"] = std::string(to_string(d.rule));
    j["conclusive"] = d.conclusive;
    j["exhausted"] = d.exhausted;
    j["acceptable_error"] = config.stopping.acceptable_error;
    j["seed"] = config.manifest.seed;
    j["signal"] = signal_path.string();
    const auto path = out_dir / "decision.json";
    std::ofstream os(path);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    os << j.dump(2) << "\n";
    return report;
}

SweepResult run_sweep_accuracy(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const auto voter = make_voter(config, out_dir, log);
    const auto result = accuracy_sweep(*voter.voter, config.sweep.accuracy_thresholds,
                                       config.sweep.trials_per_threshold, sweep_options(config));
    print_sweep(result, log);
    persist_results(result, out_dir / kAccuracySweepFile);
    return result;
}

SweepResult run_sweep_certainty(const ToolConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const auto voter = make_voter(config, out_dir, log);
    const auto thresholds = log_spaced(config.sweep.certainty_min, config.sweep.certainty_max, config.sweep.certainty_points);
    const auto result = certainty_sweep(*voter.voter, thresholds, sweep_options(config));
    print_sweep(result, log);
    persist_results(result, out_dir / kCertaintySweepFile);
    return result;
}

std::vector<SweepSummary> run_report(const std::filesystem::path& results_dir, std::ostream& out) {
    if (!std::filesystem::is_directory(results_dir)) throw IoError(results_dir.string(), "not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(results_dir)) {
        const auto& p = entry.path();
        if (entry.is_regular_file() && p.extension() == ".csv" && p.stem().string().ends_with("sweep")) {
            files.push_back(p);
        }
    }
    if (files.empty()) throw IoError(results_dir.string(), "no sweep results (*sweep.csv) found");
    std::sort(files.begin(), files.end());

    std::vector<SweepSummary> summaries;
    for (const auto& file : files) {
        const auto sweep = read_sweep_csv(file);
        SweepSummary s;
        s.file = file;
        s.thresholds = sweep.rows.size();
        for (const auto& r : sweep.rows) {
            s.decisions += r.trials;
            s.wrong += r.wrong;
            s.inconclusive += r.inconclusive;
        }
        out << file.filename().string() << ": " << s.thresholds << " thresholds, " << s.decisions << " decisions, "
            << s.wrong << " wrong, " << s.inconclusive << " inconclusive\n";
        try {
            const auto fit = linear_fit(max_votes_vs_log_threshold(sweep));
            s.fit = fit;
            out << "  max votes = " << fixed(fit.slope, 4) << " * log10(E_AT) + " << fixed(fit.intercept, 4)
                << "  (R^2 = " << fixed(fit.r_squared, 4) << ")\n";
            out << "  votes per decade of error reduction: " << fixed(-fit.slope, 4) << "\n";
            persist_results(fit, file.parent_path() / (file.stem().string() + "_fit.csv"));
        } catch (const std::invalid_argument& e) {
            out << "  fit skipped: " << e.what() << "\n";
        }
        summaries.push_back(std::move(s));
    }
    return summaries;
}

}  // namespace sei
