#include "fisens/classifier.hpp"

#include "fisens/errors.hpp"
#include "fisens/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fisens {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

template <typename Derived>
void activate_in_place(Eigen::DenseBase<Derived>& v, Activation a) {
    switch (a) {
    case Activation::Identity: break;
    case Activation::Sigmoid: v = v.unaryExpr([](double z) { return sigmoid(z); }); break;
    case Activation::ReLU: v = v.derived().cwiseMax(0.0); break;
    }
}

// Activation derivative expressed through pre-activation `in` and output `out`.
template <typename In, typename Out>
auto activation_slope(const Eigen::DenseBase<In>& in, const Eigen::DenseBase<Out>& out, Activation a) {
    using Plain = typename In::PlainObject;
    switch (a) {
    case Activation::Sigmoid: return Plain(out.derived().array() * (1.0 - out.derived().array()));
    case Activation::ReLU: return Plain((in.derived().array() > 0.0).template cast<double>());
    case Activation::Identity: break;
    }
    return Plain(Plain::Ones(in.rows(), in.cols()));
}

struct ForwardTrace {
    std::vector<Vector> pre;   // i_l, one per layer
    std::vector<Vector> post;  // o_l; post[0] is the input
};

ForwardTrace trace_forward(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
        throw DimensionError("input has length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.input_dim()));
    }
    ForwardTrace t;
    t.post.reserve(model.layer_count() + 1);
    t.pre.reserve(model.layer_count());
    t.post.emplace_back(x);
    for (const Layer& layer : model.layers()) {
        Vector z = layer.weights * t.post.back() + layer.bias;
        t.pre.push_back(z);
        activate_in_place(z, layer.activation);
        t.post.push_back(std::move(z));
    }
    return t;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::ReLU;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

ClassifierModel::ClassifierModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
    validate();
    offsets_.assign(1, 0);
    for (const Layer& l : layers_) {
        offsets_.push_back(offsets_.back() + static_cast<std::size_t>(l.weights.size() + l.bias.size()));
    }
}

void ClassifierModel::validate() const {
    if (layers_.empty()) throw ValidationError("model has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        if (layer.weights.rows() < 1 || layer.weights.cols() < 1) {
            throw ValidationError("layer " + std::to_string(l) + " has an empty weight matrix");
        }
        if (layer.bias.size() != layer.weights.rows()) {
            throw DimensionError("layer " + std::to_string(l) + " bias length does not match its width");
        }
        if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
            throw DimensionError("layer " + std::to_string(l) + " does not chain with its predecessor");
        }
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
            throw ValidationError("layer " + std::to_string(l) + " has non-finite parameters");
        }
    }
    if (layers_.back().activation != Activation::Identity) {
        throw ValidationError("final layer must be linear (logits feed the softmax)");
    }
}

ClassifierModel ClassifierModel::initialized(std::span<const std::size_t> widths, Activation hidden,
                                             std::uint64_t seed) {
    if (widths.size() < 2) throw ValidationError("need at least an input width and a class count");
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(widths[l - 1]);
        const auto fan_out = static_cast<Eigen::Index>(widths[l]);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Layer layer;
        layer.weights.resize(fan_out, fan_in);
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
            layer.weights.data()[i] = rng.uniform(-limit, limit);
        }
        layer.bias = Vector::Zero(fan_out);
        layer.activation = (l + 1 == widths.size()) ? Activation::Identity : hidden;
        layers.push_back(std::move(layer));
    }
    return ClassifierModel(std::move(layers));
}

Vector ClassifierModel::flatten() const {
    Vector theta(static_cast<Eigen::Index>(param_count()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        const auto off = static_cast<Eigen::Index>(offsets_[l]);
        // Row-major storage already is vec(Θᵀ).
        theta.segment(off, layer.weights.size()) =
            Eigen::Map<const Vector>(layer.weights.data(), layer.weights.size());
        theta.segment(off + layer.weights.size(), layer.bias.size()) = layer.bias;
    }
    return theta;
}

void ClassifierModel::unflatten(const Eigen::Ref<const Vector>& theta) {
    if (static_cast<std::size_t>(theta.size()) != param_count()) {
        throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                             ", model has " + std::to_string(param_count()));
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Layer& layer = layers_[l];
        const auto off = static_cast<Eigen::Index>(offsets_[l]);
        Eigen::Map<Vector>(layer.weights.data(), layer.weights.size()) = theta.segment(off, layer.weights.size());
        layer.bias = theta.segment(off + layer.weights.size(), layer.bias.size());
    }
    validate();
}

bool ClassifierModel::operator==(const ClassifierModel& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& a = layers_[l];
        const Layer& b = other.layers_[l];
        if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
            a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
            return false;
        }
    }
    return true;
}

void LabeledDataset::validate(std::size_t classes) const {
    if (images.size() != labels.size() || images.size() != ids.size()) {
        throw ValidationError("dataset images, labels and ids differ in length");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
            throw ValidationError("sample " + std::to_string(ids[i]) + " has label " +
                                  std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
        }
        if (shape.size() != 0 && static_cast<std::size_t>(images[i].size()) != shape.size()) {
            throw DimensionError("sample " + std::to_string(ids[i]) + " does not match the image shape");
        }
        if (!images[i].allFinite() || images[i].minCoeff() < 0.0 || images[i].maxCoeff() > 1.0) {
            throw ValidationError("sample " + std::to_string(ids[i]) + " has pixels outside [0,1]");
        }
    }
}

Vector log_softmax(const Eigen::Ref<const Vector>& z) {
    const double top = z.maxCoeff();
    const double lse = top + std::log((z.array() - top).exp().sum());
    return z.array() - lse;
}

Vector softmax(const Eigen::Ref<const Vector>& z) {
    Vector e = (z.array() - z.maxCoeff()).exp();
    return e / e.sum();
}

Vector logits(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    return trace_forward(model, x).post.back();
}

Vector forward(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    return softmax(logits(model, x));
}

Vector log_probabilities(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    return log_softmax(logits(model, x));
}

std::size_t argmax(const Eigen::Ref<const Vector>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<std::size_t>(best);
}

LogProbGradients logprob_gradients(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                   bool want_input, bool want_params) {
    const ForwardTrace t = trace_forward(model, x);
    const auto k = static_cast<Eigen::Index>(model.class_count());

    LogProbGradients out;
    out.probs = softmax(t.post.back());
    if (!want_input && !want_params) return out;

    // Row y of delta holds ∂ log P(y) / ∂ i_l for the current layer.
    DenseMatrix delta = DenseMatrix::Identity(k, k) - Vector::Ones(k) * out.probs.transpose();
    if (want_params) out.params.resize(k, static_cast<Eigen::Index>(model.param_count()));

    for (std::size_t l = model.layer_count(); l-- > 0;) {
        const Layer& layer = model.layer(l);
        const Vector slope = activation_slope(t.pre[l], t.post[l + 1], layer.activation);
        delta = delta * slope.asDiagonal();
        if (want_params) {
            const auto off = static_cast<Eigen::Index>(model.layer_param_offset(l));
            const Vector& prev = t.post[l];
            const Eigen::Index rows = layer.weights.rows();
            const Eigen::Index cols = layer.weights.cols();
            for (Eigen::Index i = 0; i < rows; ++i) {
                out.params.block(0, off + i * cols, k, cols) = delta.col(i) * prev.transpose();
            }
            out.params.block(0, off + rows * cols, k, rows) = delta;
        }
        if (l > 0 || want_input) delta = delta * layer.weights;
    }
    if (want_input) out.input = std::move(delta);
    return out;
}

DenseMatrix logprob_grad_input(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    return logprob_gradients(model, x, true, false).input;
}

std::pair<std::size_t, std::size_t> param_range(const ClassifierModel& model, const ParamSelection& selection) {
    if (const auto* layer = std::get_if<LayerParams>(&selection)) {
        if (layer->index >= model.layer_count()) {
            throw ValidationError("layer index " + std::to_string(layer->index) + " out of range (model has " +
                                  std::to_string(model.layer_count()) + " layers)");
        }
        return {model.layer_param_offset(layer->index), model.layer_param_count(layer->index)};
    }
    return {0, model.param_count()};
}

DenseMatrix logprob_grad_params(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                const ParamSelection& selection) {
    const auto [offset, count] = param_range(model, selection);
    DenseMatrix all = logprob_gradients(model, x, false, true).params;
    if (count == model.param_count()) return all;
    return all.middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count));
}

TrainResult train_sgd(const ClassifierModel& initial, const LabeledDataset& data, const TrainConfig& config) {
    if (data.size() == 0) throw ValidationError("train_sgd: empty dataset");
    if (!(config.learning_rate > 0.0)) throw ValidationError("train_sgd: learning rate must be positive");
    if (config.batch_size == 0) throw ValidationError("train_sgd: batch size must be positive");
    data.validate(initial.class_count());

    TrainResult result{initial, {}};
    std::vector<Layer> layers = initial.layers();
    const std::size_t depth = layers.size();
    const auto k = static_cast<Eigen::Index>(initial.class_count());
    const auto dim = static_cast<Eigen::Index>(initial.input_dim());

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);

    using Batch = Eigen::MatrixXd;  // one sample per column
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const auto b = static_cast<Eigen::Index>(stop - start);

            std::vector<Batch> pre(depth), post(depth + 1);
            post[0].resize(dim, b);
            Batch target = Batch::Zero(k, b);
            for (Eigen::Index j = 0; j < b; ++j) {
                const std::size_t s = order[start + static_cast<std::size_t>(j)];
                post[0].col(j) = data.images[s];
                target(data.labels[s], j) = 1.0;
            }
            for (std::size_t l = 0; l < depth; ++l) {
                pre[l] = (layers[l].weights * post[l]).colwise() + layers[l].bias;
                post[l + 1] = pre[l];
                activate_in_place(post[l + 1], layers[l].activation);
            }
            Batch grad_logits(k, b);
            for (Eigen::Index j = 0; j < b; ++j) {
                const Vector lp = log_softmax(post[depth].col(j));
                loss_sum -= lp.dot(target.col(j));
                grad_logits.col(j) = lp.array().exp().matrix() - target.col(j);
            }
            if (!std::isfinite(loss_sum)) {
                throw ComputeError("train_sgd: loss became non-finite in epoch " + std::to_string(epoch + 1) +
                                   "; lower the learning rate");
            }

            const double step = config.learning_rate / static_cast<double>(b);
            Batch delta = std::move(grad_logits);
            for (std::size_t l = depth; l-- > 0;) {
                delta.array() *= activation_slope(pre[l], post[l + 1], layers[l].activation).array();
                Batch next;
                if (l > 0) next = layers[l].weights.transpose() * delta;
                layers[l].weights.noalias() -= step * (delta * post[l].transpose());
                layers[l].bias.noalias() -= step * delta.rowwise().sum();
                delta = std::move(next);
            }
        }
        result.loss_trace.push_back(loss_sum / static_cast<double>(data.size()));
    }
    result.model = ClassifierModel(std::move(layers));
    return result;
}

double accuracy(const ClassifierModel& model, const LabeledDataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (argmax(logits(model, data.images[i])) == static_cast<std::size_t>(data.labels[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double finite_diff_check(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, double step) {
    if (!(step > 0.0)) throw ValidationError("finite_diff_check: step must be positive");
    const LogProbGradients analytic = logprob_gradients(model, x, true, true);
    double worst = 0.0;

    auto compare = [&worst](const Vector& plus, const Vector& minus, double h, const auto& column) {
        const Vector numeric = (plus - minus) / (2.0 * h);
        for (Eigen::Index y = 0; y < numeric.size(); ++y) {
            worst = std::max(worst, relative_error(column(y), numeric[y]));
        }
    };

    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const Vector plus = log_probabilities(model, probe);
        probe[i] = x[i] - step;
        const Vector minus = log_probabilities(model, probe);
        probe[i] = x[i];
        compare(plus, minus, step, [&](Eigen::Index y) { return analytic.input(y, i); });
    }

    ClassifierModel shifted = model;
    const Vector theta = model.flatten();
    Vector probe_theta = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        probe_theta[i] = theta[i] + step;
        shifted.unflatten(probe_theta);
        const Vector plus = log_probabilities(shifted, x);
        probe_theta[i] = theta[i] - step;
        shifted.unflatten(probe_theta);
        const Vector minus = log_probabilities(shifted, x);
        probe_theta[i] = theta[i];
        compare(plus, minus, step, [&](Eigen::Index y) { return analytic.params(y, i); });
    }
    return worst;
}

}  // namespace fisens
