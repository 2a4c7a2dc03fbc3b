#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "topicdet/errors.hpp"
#include "topicdet/labeled_set.hpp"
#include "topicdet/util.hpp"

namespace topicdet {

struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
};

/// Balanced inverse-frequency weights N/(2 N+) and N/(2 N-).
inline ClassWeights balanced_class_weights(std::span<const int> y) {
    std::size_t pos = 0;
    for (int v : y) pos += v > 0;
    const std::size_t neg = y.size() - pos;
    if (pos == 0 || neg == 0) throw TrainingError("class weights need both classes");
    const double n = static_cast<double>(y.size());
    return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

struct LogisticConfig {
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    bool class_weighting = true;
    /// 0 = single linear layer + sigmoid. Otherwise a ReLU hidden layer of this width.
    std::size_t hidden_units = 0;
};

/// Binary "neural network" head over frozen embeddings: an optional ReLU
/// hidden layer followed by a linear unit and a sigmoid.
struct LogisticModel {
    std::size_t input_dim = 0;
    std::size_t hidden_units = 0;
    std::vector<double> hidden_weights;  // hidden_units x input_dim, row-major
    std::vector<double> hidden_bias;     // hidden_units
    std::vector<double> weights;         // hidden_units, or input_dim without a hidden layer
    double bias = 0.0;
    LogisticConfig config;
    ClassWeights class_weights;

    static LogisticModel zeros(std::size_t dim, std::size_t hidden = 0) {
        LogisticModel m;
        m.input_dim = dim;
        m.hidden_units = hidden;
        m.hidden_weights.assign(hidden * dim, 0.0);
        m.hidden_bias.assign(hidden, 0.0);
        m.weights.assign(hidden > 0 ? hidden : dim, 0.0);
        return m;
    }

    std::size_t parameter_count() const { return weights.size() + 1 + hidden_weights.size() + hidden_bias.size(); }

    /// Flat parameter layout: weights, bias, hidden weights, hidden bias.
    std::vector<double> parameters() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        p.insert(p.end(), weights.begin(), weights.end());
        p.push_back(bias);
        p.insert(p.end(), hidden_weights.begin(), hidden_weights.end());
        p.insert(p.end(), hidden_bias.begin(), hidden_bias.end());
        return p;
    }

    void set_parameters(std::span<const double> p) {
        if (p.size() != parameter_count()) throw InputError("parameter vector has the wrong length");
        auto it = p.begin();
        std::copy_n(it, weights.size(), weights.begin());
        it += static_cast<std::ptrdiff_t>(weights.size());
        bias = *it++;
        std::copy_n(it, hidden_weights.size(), hidden_weights.begin());
        it += static_cast<std::ptrdiff_t>(hidden_weights.size());
        std::copy_n(it, hidden_bias.size(), hidden_bias.begin());
    }

    /// Pre-sigmoid output. `hidden` receives the post-ReLU activations when the
    /// model has a hidden layer.
    double logit(std::span<const double> x, std::vector<double>* hidden = nullptr) const {
        if (hidden_units == 0) {
            return std::inner_product(x.begin(), x.end(), weights.begin(), bias);
        }
        std::vector<double> local;
        auto& h = hidden ? *hidden : local;
        h.assign(hidden_units, 0.0);
        for (std::size_t u = 0; u < hidden_units; ++u) {
            const double* row = hidden_weights.data() + u * input_dim;
            const double a = std::inner_product(x.begin(), x.end(), row, hidden_bias[u]);
            h[u] = a > 0.0 ? a : 0.0;
        }
        return std::inner_product(h.begin(), h.end(), weights.begin(), bias);
    }
};

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Weighted binary cross-entropy, averaged over `rows` (all samples when empty):
/// (1/|B|) sum_i c_i * (softplus(z_i) - t_i z_i), with c_i the class weight and
/// t_i in {0, 1}. When `grad` is non-null it receives dL/dparameters in the
/// layout of LogisticModel::parameters().
inline double weighted_loss(const LogisticModel& model, const LabeledSet& data, const ClassWeights& cw,
                            std::span<const std::size_t> rows = {}, std::vector<double>* grad = nullptr) {
    const std::size_t count = rows.empty() ? data.size() : rows.size();
    if (grad) grad->assign(model.parameter_count(), 0.0);
    const std::size_t d = model.input_dim;
    const std::size_t nw = model.weights.size();
    std::vector<double> hidden;
    double loss = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = rows.empty() ? k : rows[k];
        const auto& x = data.X[i];
        const double t = data.y[i] > 0 ? 1.0 : 0.0;
        const double c = data.y[i] > 0 ? cw.positive : cw.negative;
        const double z = model.logit(x, &hidden);
        loss += c * (softplus(z) - t * z);
        if (!grad) continue;
        const double dz = c * (sigmoid(z) - t);
        auto& g = *grad;
        if (model.hidden_units == 0) {
            for (std::size_t j = 0; j < d; ++j) g[j] += dz * x[j];
        } else {
            for (std::size_t u = 0; u < model.hidden_units; ++u) {
                g[u] += dz * hidden[u];
                if (hidden[u] <= 0.0) continue;
                const double dh = dz * model.weights[u];
                double* gw = g.data() + nw + 1 + u * d;
                for (std::size_t j = 0; j < d; ++j) gw[j] += dh * x[j];
                g[nw + 1 + model.hidden_weights.size() + u] += dh;
            }
        }
        g[nw] += dz;
    }
    const double scale = 1.0 / static_cast<double>(count);
    if (grad) {
        for (double& v : *grad) v *= scale;
    }
    return loss * scale;
}

struct LogisticFit {
    LogisticModel model;
    /// Full-data weighted loss after each epoch.
    std::vector<double> epoch_loss;
};

/// Seeded mini-batch gradient descent on the weighted cross-entropy. The
/// sample order is reshuffled at the start of every epoch.
inline LogisticFit fit_logistic(const LabeledSet& data, const LogisticConfig& config) {
    data.require_both_classes();
    if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (config.batch_size == 0) throw ValidationError("batch size must be positive");

    Rng rng(config.seed);
    LogisticFit fit;
    auto& model = fit.model;
    model = LogisticModel::zeros(data.dim(), config.hidden_units);
    model.config = config;
    model.class_weights = config.class_weighting ? balanced_class_weights(data.y) : ClassWeights{};
    if (config.hidden_units > 0) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(data.dim()));
        for (double& w : model.hidden_weights) w = (2.0 * uniform_real(rng) - 1.0) * scale;
        for (double& w : model.weights) w = (2.0 * uniform_real(rng) - 1.0) / std::sqrt(double(config.hidden_units));
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto len = std::min(config.batch_size, order.size() - start);
            weighted_loss(model, data, model.class_weights, std::span<const std::size_t>(order).subspan(start, len),
                          &grad);
            auto params = model.parameters();
            for (std::size_t p = 0; p < params.size(); ++p) params[p] -= config.learning_rate * grad[p];
            model.set_parameters(params);
        }
        fit.epoch_loss.push_back(weighted_loss(model, data, model.class_weights));
    }
    return fit;
}

inline LogisticModel train_logistic(const LabeledSet& data, const LogisticConfig& config) {
    return fit_logistic(data, config).model;
}

inline double predict_score(const LogisticModel& model, std::span<const double> x) {
    check_dimension(model.input_dim, x.size());
    return sigmoid(model.logit(x));
}

}  // namespace topicdet
