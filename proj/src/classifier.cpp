#include "sei/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "byteio.hpp"
#include "sei/error.hpp"
#include "sei/rng.hpp"

namespace sei {
namespace {

constexpr const char* kModelFormat = "sei-softmax-v1";

void softmax_in_place(std::vector<double>& z) {
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

struct Parameters {
    std::vector<double> weights;
    std::vector<double> biases;
};

Parameters snapshot(const SoftmaxModel& m) {
    return {{m.weights().begin(), m.weights().end()}, {m.biases().begin(), m.biases().end()}};
}

void restore(SoftmaxModel& m, const Parameters& p) {
    std::copy(p.weights.begin(), p.weights.end(), m.weights().begin());
    std::copy(p.biases.begin(), p.biases.end(), m.biases().begin());
}

}  // namespace

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax: empty input");
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t Classifier::classify(const BispectrumImage& image) const {
    const auto p = class_probabilities(image);
    return argmax(p);
}

std::vector<double> pooled_features(const BispectrumImage& image, std::size_t pooling) {
    if (pooling == 0 || image.width % pooling != 0 || image.height % pooling != 0) {
        throw std::invalid_argument("pooled_features: image " + std::to_string(image.height) + "x" +
                                    std::to_string(image.width) + " is not divisible by pooling " +
                                    std::to_string(pooling));
    }
    const std::size_t rows = image.height / pooling;
    const std::size_t cols = image.width / pooling;
    std::vector<double> out(BispectrumImage::kChannels * rows * cols, 0.0);
    for (std::size_t r = 0; r < image.height; ++r) {
        for (std::size_t c = 0; c < image.width; ++c) {
            for (std::size_t ch = 0; ch < BispectrumImage::kChannels; ++ch) {
                out[(ch * rows + r / pooling) * cols + c / pooling] += image.at(r, c, ch);
            }
        }
    }
    const double scale = 1.0 / (255.0 * static_cast<double>(pooling * pooling));
    for (auto& v : out) v *= scale;
    return out;
}

SoftmaxModel::SoftmaxModel(std::size_t num_classes, std::size_t image_side, std::size_t pooling)
    : num_classes_(num_classes), image_side_(image_side), pooling_(pooling) {
    if (num_classes < 2) throw std::invalid_argument("SoftmaxModel: need at least 2 classes");
    if (pooling == 0 || image_side == 0 || image_side % pooling != 0) {
        throw std::invalid_argument("SoftmaxModel: image side " + std::to_string(image_side) +
                                    " is not divisible by pooling " + std::to_string(pooling));
    }
    const std::size_t cells = image_side / pooling;
    feature_dim_ = BispectrumImage::kChannels * cells * cells;
    weights_.assign(num_classes_ * feature_dim_, 0.0);
    biases_.assign(num_classes_, 0.0);
}

void SoftmaxModel::check_image(const BispectrumImage& image) const {
    if (image.width != image_side_ || image.height != image_side_) {
        throw std::invalid_argument("classify: image is " + std::to_string(image.height) + "x" +
                                    std::to_string(image.width) + " but the model expects " +
                                    std::to_string(image_side_) + "x" + std::to_string(image_side_));
    }
}

std::vector<double> SoftmaxModel::probabilities_from_features(std::span<const double> features) const {
    if (features.size() != feature_dim_) {
        throw std::invalid_argument("SoftmaxModel: feature length " + std::to_string(features.size()) +
                                    " != feature_dim " + std::to_string(feature_dim_));
    }
    std::vector<double> z(biases_);
    for (std::size_t k = 0; k < num_classes_; ++k) {
        const double* w = &weights_[k * feature_dim_];
        z[k] += std::inner_product(features.begin(), features.end(), w, 0.0);
    }
    softmax_in_place(z);
    return z;
}

std::vector<double> SoftmaxModel::class_probabilities(const BispectrumImage& image) const {
    check_image(image);
    return probabilities_from_features(pooled_features(image, pooling_));
}

void SoftmaxModel::save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["format"] = kModelFormat;
    header["num_classes"] = num_classes_;
    header["image_side"] = image_side_;
    header["pooling"] = pooling_;
    header["feature_dim"] = feature_dim_;
    header["validation_accuracy"] = validation_accuracy;
    header["per_class_validation_accuracy"] = per_class_validation_accuracy;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    os << header.dump() << '\n';
    for (double w : weights_) detail::put_f64(os, w);
    for (double b : biases_) detail::put_f64(os, b);
    if (!os) throw IoError(path.string(), "write failed");
}

SoftmaxModel SoftmaxModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string(), "file not found");
    std::string line;
    if (!std::getline(is, line)) throw IoError(path.string(), "missing model header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
        if (header.value("format", std::string{}) != kModelFormat) {
            throw IoError(path.string(), "not a " + std::string(kModelFormat) + " model file");
        }
        SoftmaxModel model(header.at("num_classes").get<std::size_t>(), header.at("image_side").get<std::size_t>(),
                           header.at("pooling").get<std::size_t>());
        if (header.at("feature_dim").get<std::size_t>() != model.feature_dim()) {
            throw IoError(path.string(), "feature_dim does not match image_side/pooling");
        }
        model.validation_accuracy = header.value("validation_accuracy", 0.0);
        model.per_class_validation_accuracy =
            header.value("per_class_validation_accuracy", std::vector<double>{});
        for (auto& w : model.weights_) w = detail::get_f64(is);
        for (auto& b : model.biases_) b = detail::get_f64(is);
        if (!is) throw IoError(path.string(), "truncated weight payload");
        if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string(), "trailing bytes after payload");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string(), std::string("malformed model header: ") + e.what());
    }
}

ObjectiveValue softmax_objective(const SoftmaxModel& model, std::span<const std::vector<double>> features,
                                 std::span<const std::size_t> labels, double l2) {
    if (features.size() != labels.size() || features.empty()) {
        throw std::invalid_argument("softmax_objective: need matching, non-empty features and labels");
    }
    const std::size_t k_classes = model.num_classes();
    const std::size_t dim = model.feature_dim();
    ObjectiveValue out;
    out.weight_grad.assign(k_classes * dim, 0.0);
    out.bias_grad.assign(k_classes, 0.0);
    const double inv_n = 1.0 / static_cast<double>(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (labels[i] >= k_classes) throw std::invalid_argument("softmax_objective: label out of range");
        auto p = model.probabilities_from_features(features[i]);
        out.loss -= std::log(std::max(p[labels[i]], 1e-300)) * inv_n;
        p[labels[i]] -= 1.0;
        for (std::size_t k = 0; k < k_classes; ++k) {
            const double g = p[k] * inv_n;
            out.bias_grad[k] += g;
            double* row = &out.weight_grad[k * dim];
            for (std::size_t d = 0; d < dim; ++d) row[d] += g * features[i][d];
        }
    }
    const auto w = model.weights();
    for (std::size_t j = 0; j < w.size(); ++j) {
        out.loss += l2 * w[j] * w[j];
        out.weight_grad[j] += 2.0 * l2 * w[j];
    }
    return out;
}

std::vector<double> per_class_accuracy(const Classifier& model, std::span<const LabeledImage> items,
                                       std::size_t num_classes) {
    std::vector<double> hits(num_classes, 0.0);
    std::vector<double> totals(num_classes, 0.0);
    for (const auto& item : items) {
        if (item.label >= num_classes) throw std::invalid_argument("per_class_accuracy: label out of range");
        totals[item.label] += 1.0;
        if (model.classify(item.image) == item.label) hits[item.label] += 1.0;
    }
    for (std::size_t k = 0; k < num_classes; ++k) hits[k] = totals[k] > 0 ? hits[k] / totals[k] : 0.0;
    return hits;
}

SoftmaxModel train_softmax(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                           std::size_t num_classes, const TrainingConfig& config, TrainingReport* report) {
    if (num_classes < 2) throw std::invalid_argument("train_softmax: need at least 2 classes");
    if (train.empty()) throw std::invalid_argument("train_softmax: empty training set");
    if (config.batch_size == 0 || !(config.learning_rate > 0.0) || config.l2 < 0.0) {
        throw std::invalid_argument("train_softmax: invalid training settings");
    }
    std::vector<std::size_t> per_class(num_classes, 0);
    for (const auto& item : train) {
        if (item.label >= num_classes) {
            throw std::invalid_argument("train_softmax: label " + std::to_string(item.label) + " out of range");
        }
        ++per_class[item.label];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (per_class[k] == 0) {
            throw std::invalid_argument("train_softmax: class " + std::to_string(k) + " missing from training data");
        }
    }
    const std::size_t side = train.front().image.width;
    SoftmaxModel model(num_classes, side, config.pooling);

    std::vector<std::vector<double>> features;
    std::vector<std::size_t> labels;
    features.reserve(train.size());
    for (const auto& item : train) {
        if (item.image.width != side || item.image.height != side) {
            throw std::invalid_argument("train_softmax: training images differ in size");
        }
        features.push_back(pooled_features(item.image, config.pooling));
        labels.push_back(item.label);
    }

    TrainingReport local;
    TrainingReport& rep = report != nullptr ? *report : local;
    rep = TrainingReport{};
    double step = config.learning_rate;
    double current_loss = softmax_objective(model, features, labels, config.l2).loss;
    rep.epoch_losses.push_back(current_loss);

    auto floor_met = [&] {
        if (val.empty()) return false;
        const auto acc = per_class_accuracy(model, val, num_classes);
        return std::all_of(acc.begin(), acc.end(), [&](double a) { return a > config.accuracy_floor; });
    };

    std::vector<std::size_t> order(features.size());
    std::vector<std::vector<double>> batch_x;
    std::vector<std::size_t> batch_y;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        ++rep.epochs_run;
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = CounterRng::keyed(config.seed, StreamPurpose::TrainShuffle, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
        }
        const Parameters before = snapshot(model);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            batch_x.clear();
            batch_y.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_x.push_back(features[order[i]]);
                batch_y.push_back(labels[order[i]]);
            }
            const auto g = softmax_objective(model, batch_x, batch_y, config.l2);
            auto w = model.weights();
            for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * g.weight_grad[j];
            auto b = model.biases();
            for (std::size_t j = 0; j < b.size(); ++j) b[j] -= step * g.bias_grad[j];
        }
        const double loss = softmax_objective(model, features, labels, config.l2).loss;
        if (!(loss <= current_loss)) {
            restore(model, before);
            step *= 0.5;
            ++rep.step_halvings;
            continue;
        }
        current_loss = loss;
        rep.epoch_losses.push_back(loss);
        if (floor_met()) {
            rep.reached_floor = true;
            break;
        }
    }
    if (!val.empty()) {
        model.per_class_validation_accuracy = per_class_accuracy(model, val, num_classes);
        std::size_t hits = 0;
        for (const auto& item : val) hits += model.classify(item.image) == item.label ? 1 : 0;
        model.validation_accuracy = static_cast<double>(hits) / static_cast<double>(val.size());
    }
    return model;
}

ConfusionVoter::ConfusionVoter(Matrix matrix, std::uint64_t rng_seed)
    : matrix_(std::move(matrix)), rng_seed_(rng_seed) {
    const std::size_t n = matrix_.size();
    if (n < 2) throw std::invalid_argument("ConfusionVoter: need at least 2 classes");
    cumulative_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = matrix_[i];
        if (row.size() != n) throw std::invalid_argument("ConfusionVoter: matrix is not square");
        double sum = 0.0;
        std::vector<double> cum(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (!(row[j] >= 0.0) || !std::isfinite(row[j])) {
                throw std::invalid_argument("ConfusionVoter: negative or non-finite entry in row " + std::to_string(i));
            }
            sum += row[j];
            cum[j] = sum;
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("ConfusionVoter: row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        cumulative_.push_back(std::move(cum));
    }
}

ConfusionVoter ConfusionVoter::uniform_off_diagonal(std::size_t num_classes, double diagonal, std::uint64_t rng_seed) {
    if (num_classes < 2 || !(diagonal >= 0.0 && diagonal <= 1.0)) {
        throw std::invalid_argument("ConfusionVoter::uniform_off_diagonal: invalid arguments");
    }
    const double off = (1.0 - diagonal) / static_cast<double>(num_classes - 1);
    Matrix m(num_classes, std::vector<double>(num_classes, off));
    for (std::size_t i = 0; i < num_classes; ++i) m[i][i] = diagonal;
    return ConfusionVoter(std::move(m), rng_seed);
}

std::size_t ConfusionVoter::sample(std::size_t true_class, std::uint64_t draw_index) const {
    if (true_class >= matrix_.size()) {
        throw std::invalid_argument("confusion_sample: class " + std::to_string(true_class) + " out of range");
    }
    const auto& cum = cumulative_[true_class];
    const double u = CounterRng::keyed(rng_seed_, StreamPurpose::Confusion, true_class, draw_index).uniform() *
                     cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t j = it == cum.end() ? cum.size() - 1 : static_cast<std::size_t>(it - cum.begin());
    // skip zero-probability entries that share the cumulative value
    while (matrix_[true_class][j] == 0.0 && j > 0) --j;
    return j;
}

std::size_t confusion_sample(const ConfusionVoter& voter, std::size_t true_class, std::uint64_t draw_index) {
    return voter.sample(true_class, draw_index);
}

Matrix confusion_from_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predicted,
                                  std::size_t num_classes) {
    if (num_classes < 2) throw std::invalid_argument("estimate_confusion: need at least 2 classes");
    if (truth.size() != predicted.size()) throw std::invalid_argument("estimate_confusion: length mismatch");
    Matrix counts(num_classes, std::vector<double>(num_classes, 0.0));
    std::vector<std::size_t> totals(num_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= num_classes || predicted[i] >= num_classes) {
            throw std::invalid_argument("estimate_confusion: label out of range");
        }
        counts[truth[i]][predicted[i]] += 1.0;
        ++totals[truth[i]];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (totals[k] == 0) throw std::invalid_argument("estimate_confusion: class " + std::to_string(k) + " is empty");
        for (auto& v : counts[k]) v /= static_cast<double>(totals[k]);
    }
    return counts;
}

Matrix estimate_confusion(const Classifier& model, std::span<const LabeledImage> items, std::size_t num_classes) {
    std::vector<std::size_t> truth;
    std::vector<std::size_t> predicted;
    truth.reserve(items.size());
    predicted.reserve(items.size());
    for (const auto& item : items) {
        truth.push_back(item.label);
        predicted.push_back(model.classify(item.image));
    }
    return confusion_from_predictions(truth, predicted, num_classes);
}

}  // namespace sei
