#include <algorithm>
#include <cmath>

#include "adapt/learners.hpp"

namespace adapt {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double row_norm_sq(const FeatureMatrix& x, std::size_t r) {
    if (x.is_sparse()) return static_cast<double>(x.active(r).size());
    double s = 0.0;
    for (double v : x.dense_row(r)) s += v * v;
    return s;
}

// Upper bound on the Hessian norm of the weighted mean loss, giving a step
// size that guarantees monotone descent for full-batch gradient descent.
double curvature_bound(const FeatureMatrix& x, const std::vector<double>& w, double factor, double l2) {
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        num += w[r] * (row_norm_sq(x, r) + 1.0);
        den += w[r];
    }
    return factor * (den > 0 ? num / den : 1.0) + l2;
}

}  // namespace

LogisticLearner LogisticLearner::from_weights(std::size_t dims, std::size_t num_classes, std::vector<double> weights,
                                              std::vector<double> bias, LogisticParams params) {
    LogisticLearner m(params);
    m.dims_ = dims;
    m.classes_ = num_classes;
    if (num_classes < 2) fail(ErrorKind::invalid_argument, "logistic model needs at least 2 classes");
    if (weights.size() != m.outputs() * dims || bias.size() != m.outputs()) {
        fail(ErrorKind::dimension_mismatch, "logistic weight shapes inconsistent with dims/classes");
    }
    m.weights_ = std::move(weights);
    m.bias_ = std::move(bias);
    m.trained_ = true;
    return m;
}

void LogisticLearner::train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                            const std::vector<double>& sample_weights, std::uint64_t) {
    if (classes_ == 2) {
        train_binary(x, targets, sample_weights);
    } else {
        train_multiclass(x, targets, sample_weights);
    }
}

void LogisticLearner::train_binary(const FeatureMatrix& x, const ProbabilityMatrix& t, const std::vector<double>& w) {
    const auto n = x.rows();
    const auto d = x.dims();
    weights_.assign(d, 0.0);
    bias_.assign(1, 0.0);
    double wsum = 0.0;
    for (double v : w) wsum += v;
    const double step = 1.0 / curvature_bound(x, w, 0.25, params_.l2);

    std::vector<double> grad(d);
    std::vector<double> z(n);
    auto loss_at = [&](const std::vector<double>& zz) {
        double l = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            // cross-entropy with target t1 = P(class 1)
            const double t1 = t(r, 1);
            l += w[r] * (t1 * softplus(-zz[r]) + (1.0 - t1) * softplus(zz[r]));
        }
        double reg = 0.0;
        for (double v : weights_) reg += v * v;
        return l / wsum + 0.5 * params_.l2 * reg;
    };

    for (std::size_t r = 0; r < n; ++r) z[r] = x.dot_row(r, weights_) + bias_[0];
    double loss = loss_at(z);
    iterations_ = 0;
    for (int it = 0; it < params_.max_iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double gb = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double g = w[r] * (sigmoid(z[r]) - t(r, 1)) / wsum;
            x.axpy_row(r, g, grad);
            gb += g;
        }
        for (std::size_t j = 0; j < d; ++j) weights_[j] -= step * (grad[j] + params_.l2 * weights_[j]);
        bias_[0] -= step * gb;
        for (std::size_t r = 0; r < n; ++r) z[r] = x.dot_row(r, weights_) + bias_[0];
        const double next = loss_at(z);
        ++iterations_;
        const bool converged = std::abs(loss - next) < params_.tolerance;
        loss = next;
        if (converged) break;
    }
}

void LogisticLearner::train_multiclass(const FeatureMatrix& x, const ProbabilityMatrix& t,
                                       const std::vector<double>& w) {
    const auto n = x.rows();
    const auto d = x.dims();
    const auto c = classes_;
    weights_.assign(c * d, 0.0);
    bias_.assign(c, 0.0);
    double wsum = 0.0;
    for (double v : w) wsum += v;
    const double step = 1.0 / curvature_bound(x, w, 0.5, params_.l2);

    std::vector<double> logits(n * c), grad(c * d), gb(c), p(c);
    auto compute_logits = [&] {
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < c; ++k) {
                logits[r * c + k] = x.dot_row(r, std::span<const double>(weights_).subspan(k * d, d)) + bias_[k];
            }
        }
    };
    auto softmax_row = [&](std::size_t r) {
        double m = logits[r * c];
        for (std::size_t k = 1; k < c; ++k) m = std::max(m, logits[r * c + k]);
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) s += (p[k] = std::exp(logits[r * c + k] - m));
        for (std::size_t k = 0; k < c; ++k) p[k] /= s;
        return m + std::log(s);  // log-sum-exp
    };
    auto loss_now = [&] {
        double l = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double lse = softmax_row(r);
            double ce = 0.0;
            for (std::size_t k = 0; k < c; ++k) ce += t(r, k) * (lse - logits[r * c + k]);
            l += w[r] * ce;
        }
        double reg = 0.0;
        for (double v : weights_) reg += v * v;
        return l / wsum + 0.5 * params_.l2 * reg;
    };

    compute_logits();
    double loss = loss_now();
    iterations_ = 0;
    for (int it = 0; it < params_.max_iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            softmax_row(r);
            for (std::size_t k = 0; k < c; ++k) {
                const double g = w[r] * (p[k] - t(r, k)) / wsum;
                x.axpy_row(r, g, std::span<double>(grad).subspan(k * d, d));
                gb[k] += g;
            }
        }
        for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] -= step * (grad[i] + params_.l2 * weights_[i]);
        for (std::size_t k = 0; k < c; ++k) bias_[k] -= step * gb[k];
        compute_logits();
        const double next = loss_now();
        ++iterations_;
        const bool converged = std::abs(loss - next) < params_.tolerance;
        loss = next;
        if (converged) break;
    }
}

ProbabilityMatrix LogisticLearner::predict(const FeatureMatrix& x) const {
    const auto n = x.rows();
    const auto d = dims_;
    const auto c = classes_;
    std::vector<double> probs(n * c);
    if (c == 2) {
        for (std::size_t r = 0; r < n; ++r) {
            const double p1 = sigmoid(x.dot_row(r, weights_) + bias_[0]);
            probs[r * 2 + 1] = p1;
            probs[r * 2] = 1.0 - p1;
        }
    } else {
        std::vector<double> z(c);
        for (std::size_t r = 0; r < n; ++r) {
            double m = -INFINITY;
            for (std::size_t k = 0; k < c; ++k) {
                z[k] = x.dot_row(r, std::span<const double>(weights_).subspan(k * d, d)) + bias_[k];
                m = std::max(m, z[k]);
            }
            double s = 0.0;
            for (std::size_t k = 0; k < c; ++k) s += (z[k] = std::exp(z[k] - m));
            for (std::size_t k = 0; k < c; ++k) probs[r * c + k] = z[k] / s;
        }
    }
    return {n, c, std::move(probs)};
}

Json LogisticLearner::parameters_json() const {
    return {{"weights", weights_}, {"bias", bias_}};
}

void LogisticLearner::load_parameters(const Json& j) {
    weights_ = j.at("weights").get<std::vector<double>>();
    bias_ = j.at("bias").get<std::vector<double>>();
    if (weights_.size() != outputs() * dims_ || bias_.size() != outputs()) {
        fail(ErrorKind::parse, "logistic parameters have wrong shape");
    }
}

}  // namespace adapt
