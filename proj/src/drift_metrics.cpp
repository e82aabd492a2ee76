#include "adapt/drift_metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace adapt {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd to_eigen(const GaussianSummary& g) {
    const auto d = static_cast<Eigen::Index>(g.dims());
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g.cov(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
    return 0.5 * (m + m.transpose());
}

// PSD square root; negative eigenvalues from round-off are clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

double trace_psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

std::size_t bin_of(double confidence, double lower, std::size_t bins) {
    const double width = (1.0 - lower) / static_cast<double>(bins);
    if (width <= 0.0) return bins - 1;
    const auto b = static_cast<long>(std::floor((confidence - lower) / width));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(bins) - 1));
}

}  // namespace

double GaussianSummary::cov(std::size_t i, std::size_t j) const {
    if (diagonal) return i == j ? covariance[i] : 0.0;
    return covariance[i * dims() + j];
}

GaussianSummary fit_gaussian(const FeatureMatrix& features, std::size_t dims_cap) {
    const auto n = features.rows();
    const auto d = features.dims();
    if (n < 2) fail(ErrorKind::empty_dataset, "fit_gaussian needs at least two rows");
    GaussianSummary g;
    g.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) features.axpy_row(r, 1.0, g.mean);
    for (auto& v : g.mean) v /= static_cast<double>(n);
    g.diagonal = d > dims_cap;

    std::vector<double> centered(d);
    if (g.diagonal) {
        g.covariance.assign(d, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            features.copy_row(r, centered);
            for (std::size_t j = 0; j < d; ++j) {
                const double c = centered[j] - g.mean[j];
                g.covariance[j] += c * c;
            }
        }
        for (auto& v : g.covariance) v /= static_cast<double>(n - 1);
        return g;
    }
    Mat x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r) {
        features.copy_row(r, centered);
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = centered[j] - g.mean[j];
    }
    Mat cov = (x.transpose() * x) / static_cast<double>(n - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    g.covariance.assign(cov.data(), cov.data() + cov.size());
    return g;
}

double gaussian_w2(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.dims() != b.dims()) fail(ErrorKind::dimension_mismatch, "gaussian_w2: summaries differ in dims");
    const auto d = a.dims();
    double mean_term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = a.mean[i] - b.mean[i];
        mean_term += diff * diff;
    }
    if (a.diagonal || b.diagonal) {
        double cov_term = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double sa = std::sqrt(std::max(0.0, a.cov(i, i)));
            const double sb = std::sqrt(std::max(0.0, b.cov(i, i)));
            cov_term += (sa - sb) * (sa - sb);
        }
        return mean_term + cov_term;
    }
    const Eigen::MatrixXd sa = to_eigen(a);
    const Eigen::MatrixXd sb = to_eigen(b);
    const Eigen::MatrixXd root_a = psd_sqrt(sa);
    const Eigen::MatrixXd cross = root_a * sb * root_a;
    const double cov_term = sa.trace() + sb.trace() - 2.0 * trace_psd_sqrt(cross);
    return std::max(0.0, mean_term + cov_term);
}

Standardizer Standardizer::fit(const FeatureMatrix& reference) {
    const auto n = reference.rows();
    const auto d = reference.dims();
    if (n == 0) fail(ErrorKind::empty_dataset, "standardizer needs reference rows");
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) reference.axpy_row(r, 1.0, s.mean);
    for (auto& v : s.mean) v /= static_cast<double>(n);
    std::vector<double> row(d);
    for (std::size_t r = 0; r < n; ++r) {
        reference.copy_row(r, row);
        for (std::size_t j = 0; j < d; ++j) s.scale[j] += (row[j] - s.mean[j]) * (row[j] - s.mean[j]);
    }
    for (auto& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v == 0.0) v = 1.0;
    }
    return s;
}

FeatureMatrix Standardizer::apply(const FeatureMatrix& x) const {
    if (x.dims() != mean.size()) fail(ErrorKind::dimension_mismatch, "standardizer dims differ");
    const auto d = x.dims();
    std::vector<double> out(x.rows() * d);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto dst = std::span<double>(out).subspan(r * d, d);
        x.copy_row(r, dst);
        for (std::size_t j = 0; j < d; ++j) dst[j] = (dst[j] - mean[j]) / scale[j];
    }
    return FeatureMatrix::dense(x.rows(), d, std::move(out));
}

double fdd(const Learner& reference, const FeatureMatrix& base, const FeatureMatrix& probe, std::size_t dims_cap) {
    const auto* mlp = dynamic_cast<const MlpLearner*>(&reference);
    if (mlp == nullptr) fail(ErrorKind::unsupported, "fdd needs an mlp reference model");
    return gaussian_w2(fit_gaussian(mlp->embed(base), dims_cap), fit_gaussian(mlp->embed(probe), dims_cap));
}

CalibrationAccumulator::CalibrationAccumulator(std::size_t classes, std::size_t bins)
    : num_classes(classes), count(bins, 0), confidence_sum(bins, 0.0), correct_sum(bins, 0.0) {
    if (bins == 0) fail(ErrorKind::invalid_argument, "calibration needs at least one bin");
}

void CalibrationAccumulator::add(const ProbabilityMatrix& probs, const LabelVector& truth) {
    if (probs.rows() != truth.size()) fail(ErrorKind::dimension_mismatch, "calibration: probabilities and truth differ in length");
    if (probs.num_classes() != num_classes) fail(ErrorKind::dimension_mismatch, "calibration: class count differs");
    const double lower = 1.0 / static_cast<double>(num_classes);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        const auto k = argmax(row, truth.benign_class());
        const double conf = row[k];
        const auto b = bin_of(conf, lower, count.size());
        ++count[b];
        confidence_sum[b] += conf;
        correct_sum[b] += k == truth[r] ? 1.0 : 0.0;
    }
}

CalibrationReport CalibrationAccumulator::report() const {
    CalibrationReport rep;
    const auto bins = count.size();
    const double lower = 1.0 / static_cast<double>(num_classes);
    const double width = (1.0 - lower) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b) rep.total += count[b];
    for (std::size_t b = 0; b < bins; ++b) {
        CalibrationBin bin;
        bin.lower = lower + width * static_cast<double>(b);
        bin.upper = b + 1 == bins ? 1.0 : lower + width * static_cast<double>(b + 1);
        bin.count = count[b];
        if (count[b] > 0) {
            bin.mean_confidence = confidence_sum[b] / static_cast<double>(count[b]);
            bin.accuracy = correct_sum[b] / static_cast<double>(count[b]);
            rep.ece += static_cast<double>(count[b]) / static_cast<double>(rep.total) *
                       std::abs(bin.accuracy - bin.mean_confidence);
        }
        rep.bins.push_back(bin);
    }
    return rep;
}

CalibrationReport calibration(const ProbabilityMatrix& probs, const LabelVector& truth, std::size_t bins) {
    CalibrationAccumulator acc(probs.num_classes(), bins);
    acc.add(probs, truth);
    return acc.report();
}

}  // namespace adapt
