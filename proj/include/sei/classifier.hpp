#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sei/bispectrum.hpp"

namespace sei {

struct LabeledImage {
    BispectrumImage image;
    std::size_t label = 0;
};

/// Anything that turns one bispectrum image into a vote.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::size_t num_classes() const = 0;
    /// Non-negative, sums to 1.
    virtual std::vector<double> class_probabilities(const BispectrumImage& image) const = 0;
    /// Argmax of class_probabilities, lowest index on ties.
    virtual std::size_t classify(const BispectrumImage& image) const;
};

/// Index of the maximum, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Mean of each pooling x pooling block per channel, scaled to [0, 1].
/// Layout: [channel][block row][block col].
std::vector<double> pooled_features(const BispectrumImage& image, std::size_t pooling);

class SoftmaxModel : public Classifier {
public:
    /// Zero-initialized model for square images of side `image_side`.
    SoftmaxModel(std::size_t num_classes, std::size_t image_side, std::size_t pooling);

    std::size_t num_classes() const override { return num_classes_; }
    std::size_t image_side() const noexcept { return image_side_; }
    std::size_t pooling() const noexcept { return pooling_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }

    std::vector<double> class_probabilities(const BispectrumImage& image) const override;
    std::vector<double> probabilities_from_features(std::span<const double> features) const;

    /// Row-major [num_classes x feature_dim].
    std::span<double> weights() noexcept { return weights_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<double> biases() noexcept { return biases_; }
    std::span<const double> biases() const noexcept { return biases_; }

    double validation_accuracy = 0.0;
    std::vector<double> per_class_validation_accuracy;

    void save(const std::filesystem::path& path) const;
    static SoftmaxModel load(const std::filesystem::path& path);

private:
    void check_image(const BispectrumImage& image) const;

    std::size_t num_classes_;
    std::size_t image_side_;
    std::size_t pooling_;
    std::size_t feature_dim_;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

struct ObjectiveValue {
    double loss = 0.0;
    std::vector<double> weight_grad;  // same layout as weights()
    std::vector<double> bias_grad;
};

/// Mean categorical cross-entropy over the given rows plus l2 * sum(W^2)
/// (biases unpenalized), with its exact gradient.
ObjectiveValue softmax_objective(const SoftmaxModel& model, std::span<const std::vector<double>> features,
                                 std::span<const std::size_t> labels, double l2);

struct TrainingConfig {
    std::size_t pooling = 4;
    std::size_t max_epochs = 300;
    std::size_t batch_size = 32;
    double learning_rate = 0.5;
    double l2 = 0.001;
    double accuracy_floor = 0.95;  // stop once every class beats this on validation
    std::uint64_t seed = 0;
};

struct TrainingReport {
    std::vector<double> epoch_losses;  // full training loss after each accepted epoch, starting at epoch 0
    std::size_t epochs_run = 0;
    std::size_t step_halvings = 0;
    bool reached_floor = false;
};

/// Mini-batch gradient descent. An epoch that raises the training loss is
/// rolled back and the step size halved, so epoch_losses never increases.
SoftmaxModel train_softmax(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                           std::size_t num_classes, const TrainingConfig& config, TrainingReport* report = nullptr);

/// Fraction of items of each class that the model labels correctly.
std::vector<double> per_class_accuracy(const Classifier& model, std::span<const LabeledImage> items,
                                       std::size_t num_classes);

using Matrix = std::vector<std::vector<double>>;

/// Synthetic voter defined by a row-stochastic matrix: row i is the
/// distribution of votes cast for an item whose true class is i.
class ConfusionVoter {
public:
    ConfusionVoter(Matrix matrix, std::uint64_t rng_seed);

    /// Diagonal `diagonal`, remaining mass spread evenly over the rivals.
    static ConfusionVoter uniform_off_diagonal(std::size_t num_classes, double diagonal, std::uint64_t rng_seed);

    std::size_t num_classes() const noexcept { return matrix_.size(); }
    const Matrix& matrix() const noexcept { return matrix_; }
    std::uint64_t rng_seed() const noexcept { return rng_seed_; }
    ConfusionVoter with_seed(std::uint64_t seed) const { return ConfusionVoter(*this, seed); }

    /// Categorical draw from row `true_class`, keyed by (seed, true_class, draw_index).
    std::size_t sample(std::size_t true_class, std::uint64_t draw_index) const;

private:
    ConfusionVoter(const ConfusionVoter& other, std::uint64_t seed)
        : matrix_(other.matrix_), cumulative_(other.cumulative_), rng_seed_(seed) {}

    Matrix matrix_;
    Matrix cumulative_;
    std::uint64_t rng_seed_;
};

std::size_t confusion_sample(const ConfusionVoter& voter, std::size_t true_class, std::uint64_t draw_index);

/// Row i = distribution of predictions over items of true class i.
Matrix estimate_confusion(const Classifier& model, std::span<const LabeledImage> items, std::size_t num_classes);

/// Same estimate from (true, predicted) label pairs.
Matrix confusion_from_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                  std::size_t num_classes);

}  // namespace sei
