#include "sei/voting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sei/error.hpp"

namespace sei {
namespace {

constexpr double kCfTolerance = 1e-14;
constexpr int kCfMaxIterations = 500;
constexpr double kTiny = 1e-300;
constexpr double kStirlingMin = 10.0;

// lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2], z >= 10
double stirling_correction(double z) {
    const double r = 1.0 / z;
    const double r2 = r * r;
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188))));
}

// a ln x + b ln(1 - x) - ln B(a, b), arranged to avoid cancelling large terms.
double log_beta_kernel(double x, double a, double b) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (lo >= kStirlingMin) {
        const double sum = a + b;
        const double d = x * b - (1.0 - x) * a;  // x (a+b) - a
        return a * std::log1p(d / a) + b * std::log1p(-d / b) + 0.5 * std::log(a * b / sum) -
               0.5 * std::log(2.0 * std::numbers::pi) - stirling_correction(a) - stirling_correction(b) +
               stirling_correction(sum);
    }
    if (hi >= kStirlingMin) {
        // lgamma(hi + lo) - lgamma(hi) via the Stirling difference
        const double sum = hi + lo;
        const double gamma_ratio = (hi - 0.5) * std::log1p(lo / hi) + lo * std::log(sum) - lo -
                                   stirling_correction(hi) + stirling_correction(sum);
        return a * std::log(x) + b * std::log1p(-x) - std::lgamma(lo) + gamma_ratio;
    }
    return a * std::log(x) + b * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// Continued fraction for I_x(a,b) * a B(a,b) / (x^a (1-x)^b).
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kCfMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kCfTolerance) return h;
    }
    throw NumericError("reg_incomplete_beta: continued fraction did not converge for a=" + std::to_string(a) +
                       ", b=" + std::to_string(b) + ", x=" + std::to_string(x));
}

void check_category(const VoteTally& tally, std::size_t category, const char* op) {
    if (category >= tally.num_categories()) {
        throw std::invalid_argument(std::string(op) + ": category " + std::to_string(category) +
                                    " out of range for " + std::to_string(tally.num_categories()) + " categories");
    }
}

// Beta parameters whose CDF at 0.5 is the error of declaring `category`.
std::pair<double, double> preponderance_params(const VoteTally& tally, std::size_t category,
                                               MarginalConvention marginal) {
    const auto k = static_cast<double>(tally.count(category));
    const auto n = static_cast<double>(tally.total());
    const double rival_prior =
        marginal == MarginalConvention::Aggregated ? 1.0 : static_cast<double>(tally.num_categories() - 1);
    return {k + 1.0, n - k + rival_prior};
}

}  // namespace

double reg_incomplete_beta(double x, double a, double b) {
    if (!(std::isfinite(a) && a > 0.0) || !(std::isfinite(b) && b > 0.0)) {
        throw std::invalid_argument("reg_incomplete_beta: parameters must be positive and finite (a=" +
                                    std::to_string(a) + ", b=" + std::to_string(b) + ")");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument("reg_incomplete_beta: x must lie in [0, 1], got " + std::to_string(x));
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - reg_incomplete_beta(1.0 - x, b, a);
    const double front = std::exp(log_beta_kernel(x, a, b));
    return std::clamp(front * beta_continued_fraction(x, a, b) / a, 0.0, 1.0);
}

VoteTally::VoteTally(std::size_t num_categories) : counts_(num_categories, 0) {
    if (num_categories < 2) throw std::invalid_argument("VoteTally: need at least 2 categories");
}

VoteTally::VoteTally(std::vector<std::uint64_t> counts) : counts_(std::move(counts)) {
    if (counts_.size() < 2) throw std::invalid_argument("VoteTally: need at least 2 categories");
    for (auto c : counts_) total_ += c;
}

std::uint64_t VoteTally::count(std::size_t category) const {
    if (category >= counts_.size()) {
        throw std::invalid_argument("VoteTally: category " + std::to_string(category) + " out of range");
    }
    return counts_[category];
}

std::size_t VoteTally::leader() const noexcept {
    return static_cast<std::size_t>(std::max_element(counts_.begin(), counts_.end()) - counts_.begin());
}

VoteTally record_vote(const VoteTally& tally, std::size_t category) {
    check_category(tally, category, "record_vote");
    std::vector<std::uint64_t> counts(tally.counts().begin(), tally.counts().end());
    ++counts[category];
    return VoteTally(std::move(counts));
}

std::string_view to_string(StoppingRule rule) noexcept {
    return rule == StoppingRule::Preponderance ? "preponderance" : "favored";
}

StoppingRule parse_stopping_rule(std::string_view name) {
    if (name == "preponderance") return StoppingRule::Preponderance;
    if (name == "favored") return StoppingRule::Favored;
    throw std::invalid_argument("unknown stopping rule '" + std::string(name) + "' (expected preponderance|favored)");
}

std::string_view to_string(MarginalConvention convention) noexcept {
    return convention == MarginalConvention::Aggregated ? "aggregated" : "dirichlet";
}

MarginalConvention parse_marginal_convention(std::string_view name) {
    if (name == "aggregated") return MarginalConvention::Aggregated;
    if (name == "dirichlet") return MarginalConvention::DirichletMarginal;
    throw std::invalid_argument("unknown marginal convention '" + std::string(name) +
                                "' (expected aggregated|dirichlet)");
}

void StoppingConfig::validate() const {
    if (!(acceptable_error > 0.0 && acceptable_error < 0.5)) {
        throw std::invalid_argument("acceptable_error must lie in (0, 0.5), got " + std::to_string(acceptable_error));
    }
    if (max_votes == 0) throw std::invalid_argument("max_votes must be positive");
}

double preponderance_error(const VoteTally& tally, std::size_t category, MarginalConvention marginal) {
    check_category(tally, category, "preponderance_certainty");
    const auto [a, b] = preponderance_params(tally, category, marginal);
    return reg_incomplete_beta(0.5, a, b);
}

double preponderance_certainty(const VoteTally& tally, std::size_t category, MarginalConvention marginal) {
    return 1.0 - preponderance_error(tally, category, marginal);
}

double favored_error(const VoteTally& tally, std::size_t category) {
    check_category(tally, category, "favored_certainty");
    const double a = static_cast<double>(tally.count(category)) + 1.0;
    double err = 0.0;
    for (std::size_t j = 0; j < tally.num_categories(); ++j) {
        if (j == category) continue;
        err += reg_incomplete_beta(0.5, a, static_cast<double>(tally.count(j)) + 1.0);
    }
    return err;
}

double favored_certainty(const VoteTally& tally, std::size_t category) {
    return std::max(0.0, 1.0 - favored_error(tally, category));
}

std::optional<StopResult> check_stop(const VoteTally& tally, const StoppingConfig& config) {
    std::optional<StopResult> best;
    double best_error = 1.0;
    for (std::size_t i = 0; i < tally.num_categories(); ++i) {
        // F(0.5; a, b) >= 0.5 whenever a <= b, and acceptable_error < 0.5, so
        // such categories can never qualify.
        double error = 1.0;
        if (config.rule == StoppingRule::Preponderance) {
            const auto [a, b] = preponderance_params(tally, i, config.marginal);
            if (a <= b) continue;
            error = reg_incomplete_beta(0.5, a, b);
        } else {
            const auto k = tally.count(i);
            bool leads_all = true;
            for (std::size_t j = 0; j < tally.num_categories(); ++j) {
                if (j != i && tally.count(j) >= k) leads_all = false;
            }
            if (!leads_all) continue;
            error = favored_error(tally, i);
        }
        if (error <= config.acceptable_error && (!best || error < best_error)) {
            best = StopResult{i, std::max(0.0, 1.0 - error)};
            best_error = error;
        }
    }
    return best;
}

Decision decide_sequential(const VoteSource& source, std::size_t num_categories, const StoppingConfig& config) {
    config.validate();
    VoteTally tally(num_categories);
    Decision decision;
    decision.rule = config.rule;
    while (tally.total() < config.max_votes) {
        const auto vote = source();
        if (!vote) {
            decision.exhausted = true;
            break;
        }
        tally = record_vote(tally, *vote);
        if (const auto stop = check_stop(tally, config)) {
            decision.winner = stop->winner;
            decision.achieved_certainty = stop->certainty;
            decision.votes_used = static_cast<std::size_t>(tally.total());
            decision.conclusive = true;
            return decision;
        }
    }
    decision.winner = tally.leader();
    decision.votes_used = static_cast<std::size_t>(tally.total());
    decision.achieved_certainty = config.rule == StoppingRule::Preponderance
                                      ? preponderance_certainty(tally, decision.winner, config.marginal)
                                      : favored_certainty(tally, decision.winner);
    return decision;
}

}  // namespace sei
