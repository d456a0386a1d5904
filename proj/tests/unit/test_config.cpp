#include <doctest.h>

#include <fstream>

#include "sei/config.hpp"
#include "sei/error.hpp"
#include "support/oracles.hpp"

using namespace sei;

namespace {

std::string config_error(std::string_view text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("empty object gives desk defaults") {
    const auto c = parse_config_text("{}");
    const auto desk = DatasetManifest::desk();
    CHECK(c.preset == Preset::Desk);
    CHECK(manifest_to_json(c.manifest) == manifest_to_json(desk));
    CHECK(c.image_side() == 56);
    CHECK(c.stopping.acceptable_error == 1e-3);
    CHECK(c.stopping.rule == StoppingRule::Preponderance);
    CHECK(c.sweep.confusion_diagonal == 0.82);
    CHECK(c.sweep.confusion_classes == 16);
    CHECK(c.sweep.accuracy_thresholds == std::vector<double>{0.3, 0.1, 0.03, 0.01, 0.003, 0.001});
}

TEST_CASE("subsample length sets the image side") {
    const auto c = parse_config_text(R"({"subsample_length":1120})");
    CHECK(c.manifest.subsample_length == 1120);
    CHECK(c.image_side() == 224);
}

TEST_CASE("presets") {
    CHECK(parse_config_text(R"({"preset":"full"})").manifest.images_per_split() == 70'400);
    CHECK(parse_config_text(R"({"preset":"full"})", Preset::Desk).preset == Preset::Desk);
    CHECK(parse_config_text("{}", Preset::Full).image_side() == 224);
    CHECK(config_error(R"({"preset":"huge"})").find("huge") != std::string::npos);
    CHECK(to_string(parse_preset("full")) == "full");
}

TEST_CASE("overrides are applied") {
    const auto c = parse_config_text(R"({
        "seed": 9, "num_emitters": 3, "snr_levels_db": [5, 15], "runs_per_setup": 1,
        "samples_per_case": 7, "power_scale": "linear", "acceptable_error": 0.01,
        "rule": "favored", "marginal": "dirichlet", "max_votes": 77,
        "training": {"pooling": 2, "max_epochs": 3, "accuracy_floor": 0.9},
        "sweep": {"voter": "model", "confusion_diagonal": 0.6, "accuracy_thresholds": [0.2, 0.02],
                  "certainty_points": 5}
    })");
    CHECK(c.manifest.seed == 9);
    CHECK(c.training.seed == 9);
    CHECK(c.manifest.emitters.size() == 3);
    CHECK(c.manifest.snr_levels_db == std::vector<double>{5.0, 15.0});
    CHECK(c.manifest.images_per_split() == 3 * 2 * 1 * 7);
    CHECK(c.manifest.scale == PowerScale::Linear);
    CHECK(c.stopping.acceptable_error == 0.01);
    CHECK(c.stopping.rule == StoppingRule::Favored);
    CHECK(c.stopping.marginal == MarginalConvention::DirichletMarginal);
    CHECK(c.stopping.max_votes == 77);
    CHECK(c.training.pooling == 2);
    CHECK(c.training.max_epochs == 3);
    CHECK(c.training.accuracy_floor == 0.9);
    CHECK(c.sweep.voter == VoterKind::Model);
    CHECK(c.sweep.confusion_diagonal == 0.6);
    CHECK(c.sweep.accuracy_thresholds == std::vector<double>{0.2, 0.02});
    CHECK(c.sweep.certainty_points == 5);
}

TEST_CASE("out-of-range values are rejected by name") {
    CHECK(config_error(R"({"acceptable_error":0.7})").find("acceptable_error") != std::string::npos);
    CHECK(config_error(R"({"acceptable_error":0})").find("acceptable_error") != std::string::npos);
    CHECK(config_error(R"({"block":3})").find("block") != std::string::npos);
    CHECK(config_error(R"({"max_votes":0})").find("max_votes") != std::string::npos);
    CHECK(config_error(R"({"num_emitters":1})").find("num_emitters") != std::string::npos);
    CHECK(config_error(R"({"training":{"pooling":5}})").find("training.pooling") != std::string::npos);
    CHECK(config_error(R"({"sweep":{"accuracy_thresholds":[0.6]}})").find("accuracy_thresholds") !=
          std::string::npos);
    CHECK(config_error(R"({"rule":"plurality"})").find("plurality") != std::string::npos);
    CHECK(config_error(R"({"power_scale":"dB"})").find("power_scale") != std::string::npos);
    CHECK(config_error(R"({"seed":"x"})").find("seed") != std::string::npos);
}

TEST_CASE("unknown keys are named") {
    CHECK(config_error(R"({"thresold":0.1})").find("'thresold'") != std::string::npos);
    CHECK(config_error(R"({"training":{"epochs":3}})").find("'training.epochs'") != std::string::npos);
    CHECK(config_error(R"({"sweep":{"trials":3}})").find("'sweep.trials'") != std::string::npos);
}

TEST_CASE("parse errors report line context") {
    const auto msg = config_error("{\n  \"seed\": 1,\n  \"block\": ,\n}");
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(config_error("[1, 2]").find("object") != std::string::npos);
}

TEST_CASE("config files") {
    testing::TempDir d("cfg");
    {
        std::ofstream os(d / "c.json");
        os << R"({"samples_per_case": 4})";
    }
    CHECK(parse_config(d / "c.json").manifest.samples_per_case == 4);
    try {
        parse_config(d / "none.json");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("file not found") != std::string::npos);
    }
}

TEST_CASE("validate catches direct edits") {
    auto c = default_config();
    c.validate();
    c.stopping.acceptable_error = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = default_config();
    c.manifest.signal_length = 100;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
