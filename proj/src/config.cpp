#include "sei/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sei/error.hpp"

namespace sei {
namespace {

using nlohmann::json;

const std::set<std::string> kTopKeys{
    "preset",     "seed",         "num_emitters",     "snr_levels_db", "runs_per_setup", "samples_per_case",
    "subsample_length", "block",  "signal_length",    "power_scale",   "acceptable_error", "rule",
    "marginal",   "max_votes",    "training",         "sweep"};
const std::set<std::string> kTrainingKeys{"pooling",       "max_epochs", "batch_size",
                                          "learning_rate", "l2",         "accuracy_floor"};
const std::set<std::string> kSweepKeys{"voter",           "confusion_diagonal",   "confusion_classes",
                                       "cases_per_class", "accuracy_thresholds", "trials_per_threshold",
                                       "certainty_min",   "certainty_max",       "certainty_points"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown configuration key '" + prefix + key + "'");
    }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& path) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("configuration field '" + path + "' has the wrong type");
    }
}

std::size_t positive(const json& obj, const char* key, const std::string& path) {
    const auto v = field<long long>(obj, key, path);
    if (v <= 0) throw ConfigError("configuration field '" + path + "' must be a positive integer");
    return static_cast<std::size_t>(v);
}

std::string line_context(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Preset parse_preset(std::string_view name) {
    if (name == "desk") return Preset::Desk;
    if (name == "full") return Preset::Full;
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk|full)");
}

std::string_view to_string(Preset preset) noexcept { return preset == Preset::Desk ? "desk" : "full"; }

ToolConfig default_config(Preset preset) {
    ToolConfig c;
    c.preset = preset;
    c.manifest = preset == Preset::Desk ? DatasetManifest::desk() : DatasetManifest::full();
    return c;
}

void apply_seed(ToolConfig& config, std::uint64_t seed) {
    config.manifest.seed = seed;
    config.training.seed = seed;
}

void ToolConfig::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError("configuration field '" + key + "' " + why);
    };
    if (!(stopping.acceptable_error > 0.0 && stopping.acceptable_error < 0.5)) {
        fail("acceptable_error", "must lie in (0, 0.5)");
    }
    if (stopping.max_votes == 0) fail("max_votes", "must be positive");
    if (manifest.emitters.size() < 2) fail("num_emitters", "must be at least 2");
    if (manifest.snr_levels_db.empty()) fail("snr_levels_db", "must not be empty");
    if (manifest.subsample_length < 4) fail("subsample_length", "must be at least 4");
    if (manifest.block == 0 || manifest.subsample_length % manifest.block != 0) {
        fail("block", "must divide subsample_length (" + std::to_string(manifest.subsample_length) + ")");
    }
    if (manifest.signal_length < std::max(manifest.subsample_length, kMinSynthLength)) {
        fail("signal_length", "must be at least max(subsample_length, " + std::to_string(kMinSynthLength) + ")");
    }
    if (training.pooling == 0 || image_side() % training.pooling != 0) {
        fail("training.pooling", "must divide the image side (" + std::to_string(image_side()) + ")");
    }
    if (!(training.learning_rate > 0.0)) fail("training.learning_rate", "must be positive");
    if (!(training.l2 >= 0.0)) fail("training.l2", "must be non-negative");
    if (!(training.accuracy_floor >= 0.0 && training.accuracy_floor < 1.0)) {
        fail("training.accuracy_floor", "must lie in [0, 1)");
    }
    if (!(sweep.confusion_diagonal >= 0.0 && sweep.confusion_diagonal <= 1.0)) {
        fail("sweep.confusion_diagonal", "must lie in [0, 1]");
    }
    if (sweep.confusion_classes < 2) fail("sweep.confusion_classes", "must be at least 2");
    for (double t : sweep.accuracy_thresholds) {
        if (!(t > 0.0 && t < 0.5)) fail("sweep.accuracy_thresholds", "entries must lie in (0, 0.5)");
    }
    if (!(sweep.certainty_min > 0.0 && sweep.certainty_min < sweep.certainty_max && sweep.certainty_max < 0.5)) {
        fail("sweep.certainty_min", "and certainty_max must satisfy 0 < min < max < 0.5");
    }
    if (sweep.certainty_points < 2) fail("sweep.certainty_points", "must be at least 2");
}

ToolConfig parse_config_text(std::string_view text, std::optional<Preset> preset_override) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("configuration parse error at " + line_context(text, e.byte) + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
    reject_unknown(root, kTopKeys, "");

    Preset preset = Preset::Desk;
    if (root.contains("preset")) preset = parse_preset(field<std::string>(root, "preset", "preset"));
    if (preset_override) preset = *preset_override;
    ToolConfig c = default_config(preset);
    auto& m = c.manifest;

    if (root.contains("seed")) apply_seed(c, field<std::uint64_t>(root, "seed", "seed"));
    if (root.contains("num_emitters")) {
        const auto n = positive(root, "num_emitters", "num_emitters");
        if (n < 2) throw ConfigError("configuration field 'num_emitters' must be at least 2");
        m.emitters = default_emitter_profiles(static_cast<int>(n));
    }
    if (root.contains("snr_levels_db")) m.snr_levels_db = field<std::vector<double>>(root, "snr_levels_db", "snr_levels_db");
    if (root.contains("runs_per_setup")) m.runs_per_setup = positive(root, "runs_per_setup", "runs_per_setup");
    if (root.contains("samples_per_case")) m.samples_per_case = positive(root, "samples_per_case", "samples_per_case");
    if (root.contains("subsample_length")) m.subsample_length = positive(root, "subsample_length", "subsample_length");
    if (root.contains("block")) m.block = positive(root, "block", "block");
    if (root.contains("signal_length")) m.signal_length = positive(root, "signal_length", "signal_length");
    if (root.contains("power_scale")) {
        const auto s = field<std::string>(root, "power_scale", "power_scale");
        if (s == "linear") {
            m.scale = PowerScale::Linear;
        } else if (s == "log") {
            m.scale = PowerScale::Log;
        } else {
            throw ConfigError("configuration field 'power_scale' must be linear|log");
        }
    }
    if (root.contains("acceptable_error")) {
        c.stopping.acceptable_error = field<double>(root, "acceptable_error", "acceptable_error");
    }
    try {
        if (root.contains("rule")) c.stopping.rule = parse_stopping_rule(field<std::string>(root, "rule", "rule"));
        if (root.contains("marginal")) {
            c.stopping.marginal = parse_marginal_convention(field<std::string>(root, "marginal", "marginal"));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (root.contains("max_votes")) c.stopping.max_votes = positive(root, "max_votes", "max_votes");

    if (root.contains("training")) {
        const auto& t = root["training"];
        if (!t.is_object()) throw ConfigError("configuration field 'training' must be an object");
        reject_unknown(t, kTrainingKeys, "training.");
        if (t.contains("pooling")) c.training.pooling = positive(t, "pooling", "training.pooling");
        if (t.contains("max_epochs")) c.training.max_epochs = positive(t, "max_epochs", "training.max_epochs");
        if (t.contains("batch_size")) c.training.batch_size = positive(t, "batch_size", "training.batch_size");
        if (t.contains("learning_rate")) c.training.learning_rate = field<double>(t, "learning_rate", "training.learning_rate");
        if (t.contains("l2")) c.training.l2 = field<double>(t, "l2", "training.l2");
        if (t.contains("accuracy_floor")) c.training.accuracy_floor = field<double>(t, "accuracy_floor", "training.accuracy_floor");
    }
    if (root.contains("sweep")) {
        const auto& s = root["sweep"];
        if (!s.is_object()) throw ConfigError("configuration field 'sweep' must be an object");
        reject_unknown(s, kSweepKeys, "sweep.");
        if (s.contains("voter")) {
            const auto v = field<std::string>(s, "voter", "sweep.voter");
            if (v == "confusion") {
                c.sweep.voter = VoterKind::Confusion;
            } else if (v == "model") {
                c.sweep.voter = VoterKind::Model;
            } else {
                throw ConfigError("configuration field 'sweep.voter' must be confusion|model");
            }
        }
        if (s.contains("confusion_diagonal")) c.sweep.confusion_diagonal = field<double>(s, "confusion_diagonal", "sweep.confusion_diagonal");
        if (s.contains("confusion_classes")) c.sweep.confusion_classes = positive(s, "confusion_classes", "sweep.confusion_classes");
        if (s.contains("cases_per_class")) c.sweep.cases_per_class = positive(s, "cases_per_class", "sweep.cases_per_class");
        if (s.contains("accuracy_thresholds")) {
            c.sweep.accuracy_thresholds = field<std::vector<double>>(s, "accuracy_thresholds", "sweep.accuracy_thresholds");
        }
        if (s.contains("trials_per_threshold")) c.sweep.trials_per_threshold = positive(s, "trials_per_threshold", "sweep.trials_per_threshold");
        if (s.contains("certainty_min")) c.sweep.certainty_min = field<double>(s, "certainty_min", "sweep.certainty_min");
        if (s.contains("certainty_max")) c.sweep.certainty_max = field<double>(s, "certainty_max", "sweep.certainty_max");
        if (s.contains("certainty_points")) c.sweep.certainty_points = positive(s, "certainty_points", "sweep.certainty_points");
    }
    c.validate();
    return c;
}

ToolConfig parse_config(const std::filesystem::path& path, std::optional<Preset> preset_override) {
    std::ifstream is(path);
    if (!is) throw IoError(path.string(), "file not found");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str(), preset_override);
}

}  // namespace sei
