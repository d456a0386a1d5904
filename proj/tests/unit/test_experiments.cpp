#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include "sei/error.hpp"
#include "sei/experiments.hpp"
#include "support/oracles.hpp"

using namespace sei;

namespace {

ConfusionCaseVoter perfect_voter(std::size_t n, std::size_t cases_per_class = 1) {
    Matrix eye(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) eye[i][i] = 1.0;
    return ConfusionCaseVoter(ConfusionVoter(eye, 0), cases_per_class);
}

// Smallest n with 0.5^(n+1) <= e.
std::size_t unanimous_votes_needed(double e) {
    std::size_t n = 1;
    while (std::pow(0.5, static_cast<double>(n + 1)) > e) ++n;
    return n;
}

DatasetManifest small_manifest() {
    auto m = DatasetManifest::desk();
    m.samples_per_case = 3;
    m.signal_length = 20'000;
    m.snr_levels_db = {10.0, 30.0};
    m.runs_per_setup = 1;
    return m;
}

std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream is(e.path(), std::ios::binary);
        out[std::filesystem::relative(e.path(), root).string()] =
            std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    return out;
}

class EmitterOracle : public Classifier {
public:
    std::size_t num_classes() const override { return 4; }
    std::vector<double> class_probabilities(const BispectrumImage& image) const override {
        std::vector<double> p(4, 0.0);
        p[static_cast<std::size_t>(image.source_emitter.value())] = 1.0;
        return p;
    }
};

}  // namespace

TEST_CASE("manifest arithmetic") {
    const auto desk = DatasetManifest::desk();
    CHECK(desk.emitters.size() == 4);
    CHECK(desk.num_cases() == 24);
    CHECK(desk.images_per_split() == 1200);
    CHECK(desk.image_side() == 56);
    const auto full = DatasetManifest::full();
    CHECK(full.images_per_split() == 200u * 2u * 11u * 16u);
    CHECK(full.images_per_split() == 70'400);
    CHECK(full.image_side() == 224);
    CHECK(full.signal_length == kInferredRecordingLength);
}

TEST_CASE("cases enumerate emitters, SNR levels and runs") {
    const auto m = small_manifest();
    const auto cases = enumerate_cases(m);
    REQUIRE(cases.size() == 8);
    CHECK(cases[0].case_id == "e00_s00_r0");
    CHECK(cases[7].case_id == "e03_s01_r0");
    CHECK(cases[7].emitter_index == 3);
    CHECK(cases[7].snr_db == 30.0);
    // Same setup, different emitters: identical content seed.
    CHECK(case_signal_seed(m, cases[0]) == case_signal_seed(m, cases[2]));
    CHECK(case_signal_seed(m, cases[0]) != case_signal_seed(m, cases[1]));
}

TEST_CASE("split streams are disjoint") {
    const auto m = small_manifest();
    CHECK(split_stream_seed(m, Split::Train, 0) != split_stream_seed(m, Split::Val, 0));
    CHECK(split_stream_seed(m, Split::Val, 0) != split_stream_seed(m, Split::Test, 0));
    CHECK(split_stream_seed(m, Split::Train, 0) != split_stream_seed(m, Split::Train, 1));
}

TEST_CASE("dataset build is deterministic and stores are byte-identical") {
    const auto m = small_manifest();
    const auto a = build_dataset(m);
    CHECK(a.train.size() == m.images_per_split());
    CHECK(a.val.size() == m.images_per_split());
    CHECK(a.test.size() == m.images_per_split());
    CHECK(a.train[0].item.image.width == 56);

    testing::TempDir d1("ds1"), d2("ds2");
    write_dataset(a, d1.path());
    write_dataset(build_dataset(m), d2.path());
    const auto t1 = read_tree(d1.path());
    const auto t2 = read_tree(d2.path());
    CHECK(t1.size() == 1 + 3 * m.images_per_split());
    CHECK(t1 == t2);

    const auto back = read_dataset(d1.path());
    CHECK(manifest_to_json(back.manifest) == manifest_to_json(m));
    REQUIRE(back.test.size() == a.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(back.test[i].item.label == a.test[i].item.label);
        CHECK(back.test[i].item.image.pixels == a.test[i].item.image.pixels);
    }
}

TEST_CASE("manifest json round trip and validation") {
    auto m = small_manifest();
    m.scale = PowerScale::Linear;
    m.emitters[1].dc_offset = {0.25, -0.5};
    const auto back = manifest_from_json(manifest_to_json(m));
    CHECK(manifest_to_json(back) == manifest_to_json(m));
    CHECK(back.scale == PowerScale::Linear);
    CHECK(back.emitters[1].dc_offset == cplx{0.25, -0.5});

    auto bad = small_manifest();
    bad.subsample_length = 281;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = small_manifest();
    bad.emitters.resize(1);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(manifest_from_json("{not json"), ConfigError);
}

TEST_CASE("reading a missing dataset reports the path") {
    testing::TempDir d("nods");
    try {
        read_dataset(d / "absent");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.path().find("manifest.json") != std::string::npos);
    }
}

TEST_CASE("perfect voter: zero wrong at every threshold") {
    const auto voter = perfect_voter(16, 2);
    SweepOptions opt;
    opt.seed = 3;
    const auto acc = accuracy_sweep(voter, {0.3, 0.1, 0.01, 0.001}, 200, opt);
    REQUIRE(acc.rows.size() == 4);
    for (const auto& row : acc.rows) {
        CHECK(row.trials == 200);
        CHECK(row.wrong == 0);
        CHECK(row.inconclusive == 0);
    }
}

TEST_CASE("sweep thresholds must lie in (0, 0.5) and be ordered") {
    const auto voter = perfect_voter(4);
    SweepOptions opt;
    CHECK_THROWS_AS(accuracy_sweep(voter, {0.5}, 10, opt), std::invalid_argument);
    CHECK_THROWS_AS(accuracy_sweep(voter, {0.0}, 10, opt), std::invalid_argument);
    CHECK_THROWS_AS(accuracy_sweep(voter, {0.1, -0.01}, 10, opt), std::invalid_argument);
    CHECK_THROWS_AS(certainty_sweep(voter, {0.7, 0.1}, opt), std::invalid_argument);
    CHECK_THROWS_AS(certainty_sweep(voter, {0.1, 0.2, 0.15}, opt), std::invalid_argument);
    CHECK_THROWS_AS(accuracy_sweep(voter, {0.1}, 0, opt), std::invalid_argument);
}

TEST_CASE("perfect voter certainty sweep follows the closed form") {
    const auto voter = perfect_voter(16);
    SweepOptions opt;
    const auto thresholds = log_spaced(1e-12, 1e-1, 50);
    const auto sweep = certainty_sweep(voter, thresholds, opt);
    REQUIRE(sweep.rows.size() == 50);
    for (const auto& row : sweep.rows) {
        CHECK(row.trials == 16);
        CHECK(row.wrong == 0);
        CHECK(row.max_votes_used == unanimous_votes_needed(row.threshold));
        CHECK(row.mean_votes_used == doctest::Approx(static_cast<double>(row.max_votes_used)));
    }
    const auto at_1e3 = certainty_sweep(voter, {1e-3}, opt);
    CHECK(at_1e3.rows[0].max_votes_used == 9);
    const auto fit = linear_fit(max_votes_vs_log_threshold(sweep));
    CHECK(fit.slope == doctest::Approx(-std::log2(10.0)).epsilon(0.02));
    CHECK(fit.r_squared > 0.99);
}

TEST_CASE("log_spaced endpoints and ordering") {
    const auto t = log_spaced(1e-12, 1e-1, 12);
    CHECK(t.front() == 1e-1);
    CHECK(t.back() == 1e-12);
    CHECK(t[1] == doctest::Approx(1e-2));
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] < t[i - 1]);
    CHECK_THROWS_AS(log_spaced(1e-1, 1e-12, 5), std::invalid_argument);
}

TEST_CASE("linear_fit examples") {
    std::vector<std::pair<double, double>> line;
    for (int i = 0; i < 15; ++i) {
        const double x = -15.0 + i;
        line.push_back({x, -7.77 * x + 12.98});
    }
    const auto f = linear_fit(line);
    CHECK(f.slope == doctest::Approx(-7.77).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(12.98).epsilon(1e-12));
    CHECK(std::abs(f.r_squared - 1.0) <= 1e-12);

    CHECK(linear_fit({{1.0, 2.0}, {3.0, -5.0}}).r_squared == doctest::Approx(1.0));

    std::vector<std::pair<double, double>> noisy;
    for (int x = 0; x < 10; ++x) noisy.push_back({double(x), x + (x % 2 == 0 ? 1.0 : -1.0)});
    const auto n = linear_fit(noisy);
    CHECK(n.slope >= 0.9);
    CHECK(n.slope <= 1.1);
    CHECK(n.r_squared < 1.0);
    // Hand OLS: xbar 4.5, Sxx 82.5, Sxy = 82.5 - 5 -> slope 77.5/82.5.
    CHECK(n.slope == doctest::Approx(77.5 / 82.5).epsilon(1e-12));

    CHECK(linear_fit({{0.0, 3.0}, {1.0, 3.0}, {2.0, 3.0}}).r_squared == 1.0);
    CHECK_THROWS_AS(linear_fit({{1.0, 2.0}, {1.0, 3.0}}), std::invalid_argument);
    CHECK_THROWS_AS(linear_fit({{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("bagging comparison") {
    const auto b72 = bagging_comparison(72);
    CHECK(std::abs(b72.gaussian_factor - 0.118) <= 0.001);
    CHECK(b72.voting_factor == doctest::Approx(1e-9).epsilon(1e-12));
    const auto b1 = bagging_comparison(1);
    CHECK(b1.gaussian_factor == 1.0);
    CHECK(b1.voting_factor == doctest::Approx(std::pow(10.0, -0.125)).epsilon(1e-14));
    CHECK(b1.voting_factor == doctest::Approx(0.7499).epsilon(1e-4));
    const auto b8 = bagging_comparison(8);
    CHECK(b8.gaussian_factor == doctest::Approx(0.35355).epsilon(1e-5));
    CHECK(b8.voting_factor == doctest::Approx(0.1).epsilon(1e-14));
    CHECK_THROWS_AS(bagging_comparison(0), std::invalid_argument);
}

TEST_CASE("binomial upper tail") {
    CHECK(binomial_upper_tail(0, 10, 0.3) == 1.0);
    CHECK(binomial_upper_tail(10, 10, 0.5) == doctest::Approx(std::pow(0.5, 10)));
    CHECK(binomial_upper_tail(2, 3, 0.5) == doctest::Approx(0.5));
    CHECK(binomial_upper_tail(1, 4, 0.0) == 0.0);
}

TEST_CASE("sweep CSV: header-only, exact round trip, fit row") {
    testing::TempDir d("csv");
    persist_results(SweepResult{}, d / "empty.csv");
    {
        std::ifstream is(d / "empty.csv");
        std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        CHECK(text == "threshold,trials,wrong,inconclusive,max_votes_used,mean_votes_used\n");
    }
    CHECK(read_sweep_csv(d / "empty.csv").rows.empty());

    SweepResult r;
    r.rows.push_back({0.1, 10000, 3, 0, 17, 5.123456789012345});
    r.rows.push_back({1.0 / 3.0 * 1e-7, 352, 0, 1, 130, 2.0 / 7.0});
    persist_results(r, d / "r.csv");
    const auto back = read_sweep_csv(d / "r.csv");
    REQUIRE(back.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.rows[i].threshold == r.rows[i].threshold);
        CHECK(back.rows[i].trials == r.rows[i].trials);
        CHECK(back.rows[i].wrong == r.rows[i].wrong);
        CHECK(back.rows[i].inconclusive == r.rows[i].inconclusive);
        CHECK(back.rows[i].max_votes_used == r.rows[i].max_votes_used);
        CHECK(back.rows[i].mean_votes_used == r.rows[i].mean_votes_used);
    }

    persist_results(FitResult{-7.77, 12.98, 0.982}, d / "fit.csv");
    {
        std::ifstream is(d / "fit.csv");
        std::string header, row, extra;
        std::getline(is, header);
        std::getline(is, row);
        CHECK(header == "slope,intercept,r_squared");
        CHECK_FALSE(std::getline(is, extra));
    }
    const auto fit = read_fit_csv(d / "fit.csv");
    CHECK(fit.slope == -7.77);
    CHECK(fit.intercept == 12.98);
    CHECK(fit.r_squared == 0.982);
    CHECK_THROWS_AS(read_sweep_csv(d / "missing.csv"), IoError);
    CHECK_THROWS_AS(read_sweep_csv(d / "fit.csv"), IoError);
}

TEST_CASE("pooled prediction voter with an oracle classifier") {
    const auto store = build_dataset(small_manifest());
    const PooledPredictionVoter voter(EmitterOracle{}, store);
    CHECK(voter.num_cases() == store.cases.size());
    CHECK(voter.num_categories() == 4);
    for (std::size_t c = 0; c < voter.num_cases(); ++c) CHECK(voter.truth(c) == store.cases[c].emitter_index);
    SweepOptions opt;
    const auto sweep = certainty_sweep(voter, {1e-2, 1e-6}, opt);
    for (const auto& row : sweep.rows) CHECK(row.wrong == 0);
    CHECK(sweep.rows[1].max_votes_used == unanimous_votes_needed(1e-6));
}

TEST_CASE("sweeps are reproducible for a seed") {
    const ConfusionCaseVoter voter(ConfusionVoter::uniform_off_diagonal(16, 0.82, 5), 2);
    SweepOptions opt;
    opt.seed = 17;
    const auto a = sweep_to_csv(accuracy_sweep(voter, {0.1, 0.01}, 500, opt));
    const auto b = sweep_to_csv(accuracy_sweep(voter, {0.1, 0.01}, 500, opt));
    CHECK(a == b);
    opt.seed = 18;
    CHECK(a != sweep_to_csv(accuracy_sweep(voter, {0.1, 0.01}, 500, opt)));
}
