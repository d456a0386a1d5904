#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sei/classifier.hpp"
#include "sei/experiments.hpp"
#include "sei/voting.hpp"

namespace sei {

enum class Preset { Desk, Full };

Preset parse_preset(std::string_view name);
std::string_view to_string(Preset preset) noexcept;

enum class VoterKind { Confusion, Model };

struct SweepSettings {
    VoterKind voter = VoterKind::Confusion;
    double confusion_diagonal = 0.82;
    std::size_t confusion_classes = 16;
    std::size_t cases_per_class = 22;  // 16 x 22 = 352 cases
    std::vector<double> accuracy_thresholds{0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
    std::size_t trials_per_threshold = 10000;
    double certainty_min = 1e-12;
    double certainty_max = 1e-1;
    std::size_t certainty_points = 50;
};

/// Fully resolved configuration for one tool invocation.
struct ToolConfig {
    Preset preset = Preset::Desk;
    DatasetManifest manifest = DatasetManifest::desk();
    StoppingConfig stopping;
    TrainingConfig training;
    SweepSettings sweep;

    std::size_t image_side() const noexcept { return manifest.image_side(); }
    void validate() const;  // throws ConfigError naming the field
};

ToolConfig default_config(Preset preset = Preset::Desk);

/// Parses a JSON configuration. Every key is optional; unknown keys and
/// out-of-range values raise ConfigError naming the key. `preset_override`
/// takes precedence over a "preset" key in the text.
ToolConfig parse_config_text(std::string_view text, std::optional<Preset> preset_override = std::nullopt);
ToolConfig parse_config(const std::filesystem::path& path, std::optional<Preset> preset_override = std::nullopt);

/// Seed stored as the root of every random stream.
void apply_seed(ToolConfig& config, std::uint64_t seed);

}  // namespace sei
