#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "adapt/learners.hpp"

namespace adapt {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;
using MapMat = Eigen::Map<Mat>;
using ConstMapMat = Eigen::Map<const Mat>;

constexpr std::size_t kPredictChunk = 1024;

Mat gather_rows(const FeatureMatrix& x, std::span<const std::size_t> rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(x.dims()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x.copy_row(rows[i], std::span<double>(out.row(static_cast<Eigen::Index>(i)).data(), x.dims()));
    }
    return out;
}

void softmax_rows(Mat& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - m).exp();
        z.row(r) /= z.row(r).sum();
    }
}

struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    Adam(double learning_rate, const std::vector<std::vector<double>>& shapes) : lr(learning_rate) {
        for (const auto& s : shapes) {
            m.emplace_back(s.size(), 0.0);
            v.emplace_back(s.size(), 0.0);
        }
    }

    void begin_step() { ++step; }

    void update(std::size_t slot, std::vector<double>& param, const double* grad) {
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        auto& ms = m[slot];
        auto& vs = v[slot];
        for (std::size_t i = 0; i < param.size(); ++i) {
            ms[i] = beta1 * ms[i] + (1.0 - beta1) * grad[i];
            vs[i] = beta2 * vs[i] + (1.0 - beta2) * grad[i] * grad[i];
            param[i] -= lr * (ms[i] / c1) / (std::sqrt(vs[i] / c2) + eps);
        }
    }
};

}  // namespace

void MlpLearner::train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                       const std::vector<double>& sample_weights, std::uint64_t seed) {
    widths_.clear();
    widths_.push_back(x.dims());
    for (int w : params_.layers) widths_.push_back(static_cast<std::size_t>(w));
    widths_.push_back(classes_);

    // He initialisation for the ReLU stack.
    Rng rng = make_rng(derive_seed(seed, 0x1a17));
    weights_.clear();
    bias_.clear();
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const double scale = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(1, widths_[l])));
        std::normal_distribution<double> init(0.0, scale);
        std::vector<double> w(widths_[l] * widths_[l + 1]);
        for (auto& v : w) v = init(rng);
        weights_.push_back(std::move(w));
        bias_.emplace_back(widths_[l + 1], 0.0);
    }
    run_epochs(x, targets, sample_weights, params_.epochs, derive_seed(seed, 0x7a11));
}

void MlpLearner::continue_training(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                                   const std::vector<double>& sample_weights, double epoch_fraction,
                                   std::uint64_t seed) {
    const int epochs = static_cast<int>(std::ceil(epoch_fraction * params_.epochs - 1e-12));
    run_epochs(x, targets, sample_weights, epochs, derive_seed(seed, 0xf17e));
}

void MlpLearner::run_epochs(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                            const std::vector<double>& sample_weights, int epochs, std::uint64_t seed) {
    const auto n = x.rows();
    const auto layers = weights_.size();
    if (n == 0 || epochs <= 0) return;

    std::vector<std::vector<double>> shapes;
    for (std::size_t l = 0; l < layers; ++l) {
        shapes.push_back(weights_[l]);
        shapes.push_back(bias_[l]);
    }
    Adam adam(params_.learning_rate, shapes);
    Rng rng = make_rng(seed);
    std::bernoulli_distribution keep(1.0 - params_.dropout);
    const double keep_scale = params_.dropout > 0.0 ? 1.0 / (1.0 - params_.dropout) : 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto batch = static_cast<std::size_t>(std::max(1, params_.batch_size));
    const auto c = static_cast<Eigen::Index>(classes_);

    std::vector<Mat> acts(layers + 1);   // post-activation (post-dropout) values per layer
    std::vector<Mat> masks(layers);      // dropout masks on hidden layers
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const auto end = std::min(n, start + batch);
            const auto rows = std::span<const std::size_t>(order).subspan(start, end - start);
            const auto b = static_cast<Eigen::Index>(rows.size());

            acts[0] = gather_rows(x, rows);
            for (std::size_t l = 0; l < layers; ++l) {
                ConstMapMat w(weights_[l].data(), static_cast<Eigen::Index>(widths_[l]),
                              static_cast<Eigen::Index>(widths_[l + 1]));
                Eigen::Map<const RowVec> bl(bias_[l].data(), static_cast<Eigen::Index>(widths_[l + 1]));
                Mat z = acts[l] * w;
                z.rowwise() += bl;
                if (l + 1 < layers) {
                    z = z.cwiseMax(0.0);
                    if (params_.dropout > 0.0) {
                        masks[l].resize(z.rows(), z.cols());
                        for (Eigen::Index i = 0; i < masks[l].size(); ++i) {
                            masks[l].data()[i] = keep(rng) ? keep_scale : 0.0;
                        }
                        z = z.cwiseProduct(masks[l]);
                    }
                } else {
                    softmax_rows(z);
                }
                acts[l + 1] = std::move(z);
            }

            // d(mean weighted CE)/d logits = w_i (p_i - t_i) / sum(w)
            Mat delta(b, c);
            double wsum = 0.0;
            for (Eigen::Index i = 0; i < b; ++i) wsum += sample_weights[rows[static_cast<std::size_t>(i)]];
            if (wsum <= 0.0) continue;
            for (Eigen::Index i = 0; i < b; ++i) {
                const auto r = rows[static_cast<std::size_t>(i)];
                const double wi = sample_weights[r] / wsum;
                for (Eigen::Index k = 0; k < c; ++k) {
                    delta(i, k) = wi * (acts[layers](i, k) - targets(r, static_cast<std::size_t>(k)));
                }
            }

            adam.begin_step();
            for (std::size_t l = layers; l-- > 0;) {
                Mat gw = acts[l].transpose() * delta;
                RowVec gb = delta.colwise().sum();
                if (l > 0) {
                    ConstMapMat w(weights_[l].data(), static_cast<Eigen::Index>(widths_[l]),
                                  static_cast<Eigen::Index>(widths_[l + 1]));
                    Mat prev = delta * w.transpose();
                    // ReLU derivative (acts are post-dropout, so zeros cover both)
                    prev = prev.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
                    if (params_.dropout > 0.0) prev = prev.cwiseProduct(masks[l - 1]);
                    delta = std::move(prev);
                }
                adam.update(2 * l, weights_[l], gw.data());
                adam.update(2 * l + 1, bias_[l], gb.data());
            }
        }
    }
}

namespace {

// Forward pass without dropout, stopping after `upto` layers.
Mat forward(const FeatureMatrix& x, std::span<const std::size_t> rows, const std::vector<std::size_t>& widths,
            const std::vector<std::vector<double>>& weights, const std::vector<std::vector<double>>& bias,
            std::size_t upto) {
    Mat a = gather_rows(x, rows);
    const auto layers = weights.size();
    for (std::size_t l = 0; l < upto; ++l) {
        ConstMapMat w(weights[l].data(), static_cast<Eigen::Index>(widths[l]), static_cast<Eigen::Index>(widths[l + 1]));
        Eigen::Map<const RowVec> bl(bias[l].data(), static_cast<Eigen::Index>(widths[l + 1]));
        Mat z = a * w;
        z.rowwise() += bl;
        if (l + 1 < layers) {
            z = z.cwiseMax(0.0);
        } else {
            softmax_rows(z);
        }
        a = std::move(z);
    }
    return a;
}

}  // namespace

ProbabilityMatrix MlpLearner::predict(const FeatureMatrix& x) const {
    const auto n = x.rows();
    std::vector<double> probs;
    probs.reserve(n * classes_);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += kPredictChunk) {
        const auto end = std::min(n, start + kPredictChunk);
        rows.resize(end - start);
        std::iota(rows.begin(), rows.end(), start);
        Mat p = forward(x, rows, widths_, weights_, bias_, weights_.size());
        probs.insert(probs.end(), p.data(), p.data() + p.size());
    }
    return {n, classes_, std::move(probs)};
}

FeatureMatrix MlpLearner::embed(const FeatureMatrix& x) const {
    if (!trained_) fail(ErrorKind::not_trained, "embed requires a trained mlp");
    if (x.dims() != dims_) fail(ErrorKind::dimension_mismatch, "embed input dims differ from training dims");
    const auto n = x.rows();
    const auto width = widths_[widths_.size() - 2];
    std::vector<double> out;
    out.reserve(n * width);
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < n; start += kPredictChunk) {
        const auto end = std::min(n, start + kPredictChunk);
        rows.resize(end - start);
        std::iota(rows.begin(), rows.end(), start);
        Mat h = forward(x, rows, widths_, weights_, bias_, weights_.size() - 1);
        out.insert(out.end(), h.data(), h.data() + h.size());
    }
    return FeatureMatrix::dense(n, width, std::move(out));
}

Json MlpLearner::parameters_json() const {
    return {{"widths", widths_}, {"weights", weights_}, {"bias", bias_}};
}

void MlpLearner::load_parameters(const Json& j) {
    widths_ = j.at("widths").get<std::vector<std::size_t>>();
    weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    bias_ = j.at("bias").get<std::vector<std::vector<double>>>();
    if (widths_.size() < 3 || widths_.front() != dims_ || widths_.back() != classes_ ||
        weights_.size() + 1 != widths_.size() || bias_.size() != weights_.size()) {
        fail(ErrorKind::parse, "mlp parameters have wrong shape");
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (weights_[l].size() != widths_[l] * widths_[l + 1] || bias_[l].size() != widths_[l + 1]) {
            fail(ErrorKind::parse, "mlp layer " + std::to_string(l) + " has wrong shape");
        }
    }
}

}  // namespace adapt
