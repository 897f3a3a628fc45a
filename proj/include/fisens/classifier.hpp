#pragma once

#include "fisens/numerics.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace fisens {

enum class Activation { Sigmoid, Identity, ReLU };

std::string_view to_string(Activation a);
// Throws ValidationError for unknown names.
Activation activation_from_string(std::string_view name);

// One fully-connected layer: out = act(weights · in + bias).
struct Layer {
    DenseMatrix weights;  // rows = output width, cols = input width
    Vector bias;
    Activation activation = Activation::Identity;
};

/// Fully-connected network whose last layer emits the logits fed to softmax.
///
/// Parameters flatten layer-major; within a layer the weight matrix comes
/// first in row-major order (vec of the transpose), followed by the bias.
class ClassifierModel {
public:
    explicit ClassifierModel(std::vector<Layer> layers);

    /// Glorot-uniform weights and zero biases. `widths` lists the input
    /// dimension, every hidden width and finally the class count.
    static ClassifierModel initialized(std::span<const std::size_t> widths, Activation hidden,
                                       std::uint64_t seed);

    std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weights.cols()); }
    std::size_t class_count() const { return static_cast<std::size_t>(layers_.back().weights.rows()); }
    std::size_t layer_count() const { return layers_.size(); }
    const std::vector<Layer>& layers() const { return layers_; }
    const Layer& layer(std::size_t l) const { return layers_.at(l); }

    std::size_t param_count() const { return offsets_.back(); }
    std::size_t layer_param_offset(std::size_t l) const { return offsets_.at(l); }
    std::size_t layer_param_count(std::size_t l) const { return offsets_.at(l + 1) - offsets_.at(l); }

    Vector flatten() const;
    // Overwrites every parameter from a vector of length param_count().
    void unflatten(const Eigen::Ref<const Vector>& theta);

    bool operator==(const ClassifierModel& other) const;

private:
    void validate() const;

    std::vector<Layer> layers_;
    std::vector<std::size_t> offsets_;
};

// Row-major image geometry; channels are stored plane after plane.
struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    std::size_t size() const { return height * width * channels; }
    std::size_t pixels() const { return height * width; }
    std::size_t index(std::size_t row, std::size_t col, std::size_t channel = 0) const {
        return channel * height * width + row * width + col;
    }
    bool operator==(const ImageShape&) const = default;
};

struct LabeledDataset {
    std::vector<Vector> images;
    std::vector<int> labels;          // 0-based class indices
    std::vector<std::size_t> ids;     // stable per-sample identifiers
    ImageShape shape;

    std::size_t size() const { return images.size(); }
    // Throws ValidationError on inconsistent lengths, labels outside [0, classes) or pixels outside [0,1].
    void validate(std::size_t classes) const;
};

struct AllParams {};
struct LayerParams {
    std::size_t index = 0;  // 0-based trainable layer
};
using ParamSelection = std::variant<AllParams, LayerParams>;

Vector softmax(const Eigen::Ref<const Vector>& logits);
Vector log_softmax(const Eigen::Ref<const Vector>& logits);

Vector logits(const ClassifierModel& model, const Eigen::Ref<const Vector>& x);
Vector forward(const ClassifierModel& model, const Eigen::Ref<const Vector>& x);
Vector log_probabilities(const ClassifierModel& model, const Eigen::Ref<const Vector>& x);

// Smallest index wins ties.
std::size_t argmax(const Eigen::Ref<const Vector>& v);

/// Probabilities and per-class score rows ∂ log P(y|x,θ) from one forward pass.
struct LogProbGradients {
    Vector probs;
    DenseMatrix input;   // K × input_dim, empty unless requested
    DenseMatrix params;  // K × param_count, empty unless requested
};

LogProbGradients logprob_gradients(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                   bool want_input, bool want_params);

DenseMatrix logprob_grad_input(const ClassifierModel& model, const Eigen::Ref<const Vector>& x);
DenseMatrix logprob_grad_params(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                const ParamSelection& selection);

// [offset, offset + count) of the selected parameters inside flatten().
std::pair<std::size_t, std::size_t> param_range(const ClassifierModel& model,
                                                const ParamSelection& selection);

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.5;
    std::uint64_t seed = 1;
};

struct TrainResult {
    ClassifierModel model;
    std::vector<double> loss_trace;  // mean cross-entropy per epoch
};

/// Mini-batch SGD on mean cross-entropy. Deterministic for a given seed;
/// throws ComputeError if the loss becomes non-finite.
TrainResult train_sgd(const ClassifierModel& initial, const LabeledDataset& data, const TrainConfig& config);

double accuracy(const ClassifierModel& model, const LabeledDataset& data);

/// Largest relative error between analytic log-probability gradients (input
/// and all parameters, every class) and central differences with `step`.
double finite_diff_check(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, double step = 1e-4);

}  // namespace fisens
