#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ctv/ranker.hpp"

namespace ctv {

struct SoftmaxOptions {
    double step_size = 0.0;  // 0 = 1 / (2 * max ||x||^2 + l2)
    int max_epochs = 500;
    double tol = 1e-6;       // stop when mean-loss improvement per epoch falls below
    bool full_batch = false;  // plain gradient descent instead of SAG
    std::uint64_t seed = 0;
};

/// Mean multinomial cross-entropy plus (l2/2)*||W||^2; biases unregularized.
/// W is classes x width row-major.
inline double softmax_objective(const DesignMatrix& m, std::span<const double> weights,
                                std::span<const double> bias, double l2) {
    const int C = m.n_classes;
    const int d = m.width;
    double loss = 0.0;
    std::vector<double> z(static_cast<size_t>(C));
    for (int i = 0; i < m.rows(); ++i) {
        auto x = m.row(i);
        for (int c = 0; c < C; ++c) {
            double acc = bias[static_cast<size_t>(c)];
            const double* wrow = weights.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) acc += wrow[j] * x[static_cast<size_t>(j)];
            z[static_cast<size_t>(c)] = acc;
        }
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        loss += std::log(sum) + zmax - z[static_cast<size_t>(m.targets[static_cast<size_t>(i)])];
    }
    loss /= static_cast<double>(m.rows());
    double reg = 0.0;
    for (double w : weights) reg += w * w;
    return loss + 0.5 * l2 * reg;
}

/// Analytic gradient of softmax_objective; grad_w and grad_b must be sized
/// C*d and C.
inline void softmax_gradient(const DesignMatrix& m, std::span<const double> weights,
                             std::span<const double> bias, double l2, std::span<double> grad_w,
                             std::span<double> grad_b) {
    const int C = m.n_classes;
    const int d = m.width;
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    std::vector<double> z(static_cast<size_t>(C));
    for (int i = 0; i < m.rows(); ++i) {
        auto x = m.row(i);
        for (int c = 0; c < C; ++c) {
            double acc = bias[static_cast<size_t>(c)];
            const double* wrow = weights.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) acc += wrow[j] * x[static_cast<size_t>(j)];
            z[static_cast<size_t>(c)] = acc;
        }
        detail::softmax_inplace(z);
        z[static_cast<size_t>(m.targets[static_cast<size_t>(i)])] -= 1.0;
        for (int c = 0; c < C; ++c) {
            double r = z[static_cast<size_t>(c)];
            grad_b[static_cast<size_t>(c)] += r;
            double* grow = grad_w.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) grow[j] += r * x[static_cast<size_t>(j)];
        }
    }
    const double inv_n = 1.0 / static_cast<double>(m.rows());
    for (double& g : grad_b) g *= inv_n;
    for (size_t k = 0; k < grad_w.size(); ++k) grad_w[k] = grad_w[k] * inv_n + l2 * weights[k];
}

class SoftmaxRanker final : public TrainedRanker {
public:
    SoftmaxRanker(int width, int classes, std::vector<double> weights, std::vector<double> bias,
                  double l2, std::uint64_t seed)
        : width_(width), classes_(classes), weights_(std::move(weights)), bias_(std::move(bias)),
          l2_(l2), seed_(seed) {}

    RankerKind kind() const override { return RankerKind::softmax; }
    int width() const override { return width_; }
    int n_classes() const override { return classes_; }

    RankedPrediction rank_trial(std::span<const double> x, std::int64_t) const override {
        std::vector<double> z(static_cast<size_t>(classes_));
        for (int c = 0; c < classes_; ++c) {
            double acc = bias_[static_cast<size_t>(c)];
            const double* wrow = weights_.data() + static_cast<size_t>(c) * static_cast<size_t>(width_);
            for (int j = 0; j < width_; ++j) acc += wrow[j] * x[static_cast<size_t>(j)];
            z[static_cast<size_t>(c)] = acc;
        }
        detail::softmax_inplace(z);
        return rank_scores(z);
    }

    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& bias() const { return bias_; }

    nlohmann::json to_json() const override {
        return {{"kind", "softmax"}, {"width", width_},   {"n_classes", classes_},
                {"weights", weights_}, {"bias", bias_},   {"l2", l2_},
                {"seed", seed_}};
    }

private:
    int width_;
    int classes_;
    std::vector<double> weights_;  // classes x width
    std::vector<double> bias_;
    double l2_;
    std::uint64_t seed_;
};

/// Minimizes softmax_objective by stochastic average gradient (default) or
/// plain full-batch gradient descent. Stops when the mean-loss improvement
/// over an epoch drops below opt.tol or the epoch cap is hit. `loss_trace`,
/// when given, receives the objective after every epoch.
inline std::unique_ptr<SoftmaxRanker> fit_softmax(const DesignMatrix& m, double l2,
                                                  const SoftmaxOptions& opt = {},
                                                  std::vector<double>* loss_trace = nullptr) {
    if (m.rows() == 0) throw Error(ErrorCode::EmptyTraining, "softmax needs training rows");
    const int n = m.rows();
    const int C = m.n_classes;
    const int d = m.width;

    double max_sq_norm = 0.0;
    auto sparse = one_indices(m);
    for (const auto& nz : sparse)
        max_sq_norm = std::max(max_sq_norm, static_cast<double>(nz.size()));
    // 1/L is stable for plain gradient descent but lets the averaged-gradient
    // update oscillate around the optimum; a quarter of it converges cleanly.
    const double eta =
        opt.step_size > 0.0 ? opt.step_size : 1.0 / (2.0 * std::max(max_sq_norm, 1.0) + l2);

    std::vector<double> W(static_cast<size_t>(C) * static_cast<size_t>(d), 0.0);
    std::vector<double> b(static_cast<size_t>(C), 0.0);

    double prev_loss = softmax_objective(m, W, b, l2);
    CounterRng rng = CounterRng(opt.seed).derive(0x50f7);

    if (opt.full_batch) {
        std::vector<double> gw(W.size()), gb(b.size());
        for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
            softmax_gradient(m, W, b, l2, gw, gb);
            for (size_t k = 0; k < W.size(); ++k) W[k] -= eta * gw[k];
            for (size_t k = 0; k < b.size(); ++k) b[k] -= eta * gb[k];
            double loss = softmax_objective(m, W, b, l2);
            if (loss_trace) loss_trace->push_back(loss);
            if (!std::isfinite(loss))
                throw Error(ErrorCode::NonFiniteLoss, "softmax diverged (full batch)");
            if (prev_loss - loss < opt.tol) {
                prev_loss = loss;
                break;
            }
            prev_loss = loss;
        }
        return std::make_unique<SoftmaxRanker>(d, C, std::move(W), std::move(b), l2, opt.seed);
    }

    // SAG: per-sample residual memory plus running gradient sums.
    std::vector<double> residual(static_cast<size_t>(n) * static_cast<size_t>(C), 0.0);
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<double> sum_gw(W.size(), 0.0);
    std::vector<double> sum_gb(b.size(), 0.0);
    std::vector<double> z(static_cast<size_t>(C));
    long n_seen = 0;

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::vector<int> order = rng.derive(static_cast<std::uint64_t>(epoch)).permutation(n);
        for (int idx : order) {
            const auto& nz = sparse[static_cast<size_t>(idx)];
            for (int c = 0; c < C; ++c) {
                double acc = b[static_cast<size_t>(c)];
                const double* wrow = W.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
                for (int j : nz) acc += wrow[j];
                z[static_cast<size_t>(c)] = acc;
            }
            detail::softmax_inplace(z);
            z[static_cast<size_t>(m.targets[static_cast<size_t>(idx)])] -= 1.0;

            double* r = residual.data() + static_cast<size_t>(idx) * static_cast<size_t>(C);
            if (!seen[static_cast<size_t>(idx)]) {
                seen[static_cast<size_t>(idx)] = 1;
                ++n_seen;
            }
            for (int c = 0; c < C; ++c) {
                double delta = z[static_cast<size_t>(c)] - r[c];
                r[c] = z[static_cast<size_t>(c)];
                sum_gb[static_cast<size_t>(c)] += delta;
                double* srow = sum_gw.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
                for (int j : nz) srow[j] += delta;
            }

            const double inv_m = 1.0 / static_cast<double>(n_seen);
            for (int c = 0; c < C; ++c) {
                double* wrow = W.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
                const double* srow = sum_gw.data() + static_cast<size_t>(c) * static_cast<size_t>(d);
                for (int j = 0; j < d; ++j)
                    wrow[j] -= eta * (srow[j] * inv_m + l2 * wrow[j]);
                b[static_cast<size_t>(c)] -= eta * sum_gb[static_cast<size_t>(c)] * inv_m;
            }
        }
        double loss = softmax_objective(m, W, b, l2);
        if (loss_trace) loss_trace->push_back(loss);
        if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "softmax diverged");
        if (prev_loss - loss < opt.tol && epoch > 0) {
            prev_loss = loss;
            break;
        }
        prev_loss = loss;
    }
    return std::make_unique<SoftmaxRanker>(d, C, std::move(W), std::move(b), l2, opt.seed);
}

}  // namespace ctv
