#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sei {

/// Regularized incomplete Beta function I_x(a, b), i.e. the Beta CDF.
/// Continued fraction (modified Lentz) with the symmetry swap for
/// x > (a+1)/(a+b+2). Throws std::invalid_argument for x outside [0,1] or
/// non-positive / non-finite parameters, NumericError on non-convergence.
double reg_incomplete_beta(double x, double a, double b);

/// Per-category vote counts. Value type: recording a vote returns a new tally.
class VoteTally {
public:
    explicit VoteTally(std::size_t num_categories);
    VoteTally(std::vector<std::uint64_t> counts);

    std::size_t num_categories() const noexcept { return counts_.size(); }
    std::uint64_t total() const noexcept { return total_; }
    std::uint64_t count(std::size_t category) const;
    std::span<const std::uint64_t> counts() const noexcept { return counts_; }

    /// Index of the largest count, lowest index on ties.
    std::size_t leader() const noexcept;

    bool operator==(const VoteTally&) const = default;

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Returns a copy of `tally` with one more vote for `category`.
VoteTally record_vote(const VoteTally& tally, std::size_t category);

enum class StoppingRule { Preponderance, Favored };

/// How rival categories are merged for the preponderance rule.
///  Aggregated:        Beta(k_i + 1, n - k_i + 1), rivals merged before the +1.
///  DirichletMarginal: Beta(k_i + 1, n - k_i + N - 1), the exact marginal of
///                     Dirichlet(k + 1).
enum class MarginalConvention { Aggregated, DirichletMarginal };

std::string_view to_string(StoppingRule rule) noexcept;
StoppingRule parse_stopping_rule(std::string_view name);
std::string_view to_string(MarginalConvention convention) noexcept;
MarginalConvention parse_marginal_convention(std::string_view name);

struct StoppingConfig {
    double acceptable_error = 1e-3;
    StoppingRule rule = StoppingRule::Preponderance;
    std::size_t max_votes = 10000;
    MarginalConvention marginal = MarginalConvention::Aggregated;

    /// Throws std::invalid_argument unless 0 < acceptable_error < 0.5 and
    /// max_votes > 0.
    void validate() const;
};

struct Decision {
    std::size_t winner = 0;
    std::size_t votes_used = 0;
    double achieved_certainty = 0.0;
    StoppingRule rule = StoppingRule::Preponderance;
    bool conclusive = false;
    // Set when the vote source ran dry before a stop or the vote cap.
    bool exhausted = false;
};

/// P(p_category <= 0.5) under the posterior; the error the preponderance rule
/// would incur by declaring `category`.
double preponderance_error(const VoteTally& tally, std::size_t category,
                           MarginalConvention marginal = MarginalConvention::Aggregated);
double preponderance_certainty(const VoteTally& tally, std::size_t category,
                               MarginalConvention marginal = MarginalConvention::Aggregated);

/// Union bound over rivals j of F(0.5; k_i + 1, k_j + 1). May exceed 1.
double favored_error(const VoteTally& tally, std::size_t category);
double favored_certainty(const VoteTally& tally, std::size_t category);

struct StopResult {
    std::size_t winner = 0;
    double certainty = 0.0;
};

/// The category whose certainty reaches 1 - acceptable_error, if any. Ties go
/// to the higher certainty, then the lower index.
std::optional<StopResult> check_stop(const VoteTally& tally, const StoppingConfig& config);

/// Yields the next vote, or nullopt when the source is exhausted.
using VoteSource = std::function<std::optional<std::size_t>()>;

/// Draws votes one at a time and checks the stopping rule after each.
Decision decide_sequential(const VoteSource& source, std::size_t num_categories, const StoppingConfig& config);

}  // namespace sei
