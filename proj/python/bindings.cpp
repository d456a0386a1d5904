#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sei/commands.hpp"
#include "sei/error.hpp"

namespace py = pybind11;
using namespace sei;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

std::vector<cplx> to_vector(const CArray& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D complex array");
    return {a.data(), a.data() + a.size()};
}

py::array_t<cplx> grid_to_array(const BispectrumGrid& g) {
    const auto n = static_cast<py::ssize_t>(g.side());
    py::array_t<cplx> out({n, n});
    std::copy(g.values().begin(), g.values().end(), out.mutable_data());
    return out;
}

py::array_t<std::uint8_t> image_to_array(const BispectrumImage& img) {
    py::array_t<std::uint8_t> out({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width),
                                   static_cast<py::ssize_t>(BispectrumImage::kChannels)});
    std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
    return out;
}

PowerScale scale_from(const std::string& s) {
    if (s == "linear") return PowerScale::Linear;
    if (s == "log") return PowerScale::Log;
    throw std::invalid_argument("scale must be linear|log");
}

StoppingConfig stopping(double e, const std::string& rule, std::size_t max_votes, const std::string& marginal) {
    StoppingConfig c;
    c.acceptable_error = e;
    c.rule = parse_stopping_rule(rule);
    c.max_votes = max_votes;
    c.marginal = parse_marginal_convention(marginal);
    c.validate();
    return c;
}

py::dict decision_dict(const Decision& d) {
    py::dict out;
    out["winner"] = d.winner;
    out["votes_used"] = d.votes_used;
    out["achieved_certainty"] = d.achieved_certainty;
    out["rule"] = std::string(to_string(d.rule));
    out["conclusive"] = d.conclusive;
    out["exhausted"] = d.exhausted;
    return out;
}

py::list sweep_rows(const SweepResult& r) {
    py::list rows;
    for (const auto& row : r.rows) {
        py::dict d;
        d["threshold"] = row.threshold;
        d["trials"] = row.trials;
        d["wrong"] = row.wrong;
        d["inconclusive"] = row.inconclusive;
        d["max_votes_used"] = row.max_votes_used;
        d["mean_votes_used"] = row.mean_votes_used;
        rows.append(d);
    }
    return rows;
}

ToolConfig config_from(const std::string& json_text) { return parse_config_text(json_text); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bispectrum features and sequential voting for emitter identification";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("version", &tool_version);

    // voting
    m.def("reg_incomplete_beta", &reg_incomplete_beta, py::arg("x"), py::arg("a"), py::arg("b"));
    m.def(
        "preponderance_certainty",
        [](std::vector<std::uint64_t> counts, std::size_t category, const std::string& marginal) {
            return preponderance_certainty(VoteTally(std::move(counts)), category, parse_marginal_convention(marginal));
        },
        py::arg("counts"), py::arg("category"), py::arg("marginal") = "aggregated");
    m.def(
        "favored_certainty",
        [](std::vector<std::uint64_t> counts, std::size_t category) {
            return favored_certainty(VoteTally(std::move(counts)), category);
        },
        py::arg("counts"), py::arg("category"));
    m.def(
        "decide",
        [](const std::vector<std::size_t>& votes, std::size_t num_categories, double acceptable_error,
           const std::string& rule, std::size_t max_votes, const std::string& marginal) {
            std::size_t next = 0;
            const VoteSource source = [&]() -> std::optional<std::size_t> {
                if (next >= votes.size()) return std::nullopt;
                return votes[next++];
            };
            return decision_dict(
                decide_sequential(source, num_categories, stopping(acceptable_error, rule, max_votes, marginal)));
        },
        py::arg("votes"), py::arg("num_categories"), py::arg("acceptable_error") = 1e-3,
        py::arg("rule") = "preponderance", py::arg("max_votes") = 10000, py::arg("marginal") = "aggregated",
        "Sequential decision over a finite vote sequence.");

    // signals and features
    m.def(
        "synthesize",
        [](int emitter, std::size_t num_points, double snr_db, std::uint64_t seed, int num_emitters) {
            const auto profiles = default_emitter_profiles(num_emitters);
            const auto sig = synthesize_emitter_signal(profiles.at(static_cast<std::size_t>(emitter)), num_points,
                                                       snr_db, seed);
            py::array_t<cplx> out(static_cast<py::ssize_t>(sig.size()));
            std::copy(sig.samples().begin(), sig.samples().end(), out.mutable_data());
            return out;
        },
        py::arg("emitter"), py::arg("num_points"), py::arg("snr_db"), py::arg("seed") = 1,
        py::arg("num_emitters") = 4, "Complex baseband recording of a default emitter profile.");
    m.def(
        "bispectrum", [](const CArray& x) { return grid_to_array(bispectrum_fft(to_vector(x))); }, py::arg("x"));
    m.def(
        "bispectrum_lag_oracle", [](const CArray& x) { return grid_to_array(bispectrum_lag_oracle(to_vector(x))); },
        py::arg("x"));
    m.def(
        "featurize",
        [](const CArray& x, std::size_t block, const std::string& scale) {
            const IqSignal sig(to_vector(x), 1.0);
            return image_to_array(featurize(sig, {block, scale_from(scale)}));
        },
        py::arg("x"), py::arg("block") = 5, py::arg("scale") = "log", "Height x width x 3 uint8 image.");

    // experiments
    m.def(
        "linear_fit",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            if (x.size() != y.size()) throw std::invalid_argument("x and y differ in length");
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < x.size(); ++i) pts.emplace_back(x[i], y[i]);
            const auto f = linear_fit(pts);
            return py::make_tuple(f.slope, f.intercept, f.r_squared);
        },
        py::arg("x"), py::arg("y"), "(slope, intercept, r_squared)");
    m.def(
        "bagging_comparison",
        [](long long n) {
            const auto b = bagging_comparison(n);
            return py::make_tuple(b.gaussian_factor, b.voting_factor);
        },
        py::arg("n"));
    m.def(
        "confusion_accuracy_sweep",
        [](double diagonal, std::size_t classes, const std::vector<double>& thresholds, std::size_t trials,
           std::uint64_t seed) {
            const ConfusionCaseVoter voter(ConfusionVoter::uniform_off_diagonal(classes, diagonal, seed), 1);
            SweepOptions o;
            o.seed = seed;
            return sweep_rows(accuracy_sweep(voter, thresholds, trials, o));
        },
        py::arg("diagonal"), py::arg("classes"), py::arg("thresholds"), py::arg("trials"), py::arg("seed") = 0);

    // commands, configured by JSON text
    m.def("validate_config", [](const std::string& text) { config_from(text); }, py::arg("config") = "{}");
    m.def(
        "train",
        [](const std::filesystem::path& out_dir, const std::string& config) {
            std::ostringstream log;
            const auto model = run_train(config_from(config), out_dir, log);
            return py::make_tuple(model.per_class_validation_accuracy, log.str());
        },
        py::arg("out_dir"), py::arg("config") = "{}", "Returns (per-class validation accuracy, log).");
    m.def(
        "generate",
        [](const std::filesystem::path& out_dir, const std::string& config) {
            std::ostringstream log;
            return run_generate(config_from(config), out_dir, log);
        },
        py::arg("out_dir"), py::arg("config") = "{}");
    m.def(
        "identify",
        [](const std::filesystem::path& signal, const std::filesystem::path& model, const std::filesystem::path& out_dir,
           const std::string& config, std::optional<double> threshold) {
            auto c = config_from(config);
            if (threshold) c.stopping.acceptable_error = *threshold;
            c.validate();
            std::ostringstream log;
            const auto r = run_identify(c, signal, model, out_dir, log);
            auto d = decision_dict(r.decision);
            d["winner_label"] = r.winner_label;
            d["true_label"] = r.true_label;
            return d;
        },
        py::arg("signal"), py::arg("model"), py::arg("out_dir"), py::arg("config") = "{}",
        py::arg("threshold") = py::none());
    m.def(
        "sweep_accuracy",
        [](const std::filesystem::path& out_dir, const std::string& config) {
            std::ostringstream log;
            return sweep_rows(run_sweep_accuracy(config_from(config), out_dir, log));
        },
        py::arg("out_dir"), py::arg("config") = "{}");
    m.def(
        "sweep_certainty",
        [](const std::filesystem::path& out_dir, const std::string& config) {
            std::ostringstream log;
            return sweep_rows(run_sweep_certainty(config_from(config), out_dir, log));
        },
        py::arg("out_dir"), py::arg("config") = "{}");
    m.def(
        "report",
        [](const std::filesystem::path& results_dir) {
            std::ostringstream out;
            run_report(results_dir, out);
            return out.str();
        },
        py::arg("results_dir"));
}
