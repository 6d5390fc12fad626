#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ctv/ranker.hpp"

namespace ctv {

struct MlpOptions {
    std::vector<int> hidden = {200, 200};
    double learn_rate = 1e-3;  // Adam
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 64;
    int max_epochs = 200;
    double tol = 1e-5;   // plateau threshold on epoch mean loss
    int patience = 10;
    std::uint64_t seed = 0;
};

/// Fully-connected ReLU layers with a softmax head. weights[l] is
/// sizes[l+1] x sizes[l] row-major.
struct MlpParams {
    std::vector<int> sizes;  // input, hidden..., classes
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int layers() const { return static_cast<int>(weights.size()); }
};

/// Fan-in-scaled uniform init from a seeded counter stream; biases zero.
inline MlpParams mlp_init(const std::vector<int>& sizes, std::uint64_t seed) {
    MlpParams p;
    p.sizes = sizes;
    CounterRng rng = CounterRng(seed).derive(0x3117);
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        int fan_in = sizes[l];
        int fan_out = sizes[l + 1];
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::vector<double> w(static_cast<size_t>(fan_out) * static_cast<size_t>(fan_in));
        CounterRng layer = rng.derive(static_cast<std::uint64_t>(l));
        for (double& v : w) v = layer.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(static_cast<size_t>(fan_out), 0.0);
    }
    return p;
}

namespace detail {

/// Unrolled dot product; independent accumulators keep the order fixed while
/// letting the compiler vectorize.
inline double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for (; j < n; ++j) s0 += a[j] * b[j];
    return (s0 + s1) + (s2 + s3);
}

/// One-sample forward/backward with reusable buffers. When the input row is
/// sparse 0/1, the index form skips the dense first-layer product.
class MlpWorkspace {
public:
    explicit MlpWorkspace(const std::vector<int>& sizes) {
        for (size_t l = 0; l < sizes.size(); ++l)
            act_.emplace_back(static_cast<size_t>(sizes[l]), 0.0);
        for (size_t l = 1; l < sizes.size(); ++l)
            delta_.emplace_back(static_cast<size_t>(sizes[l]), 0.0);
    }

    /// Returns cross-entropy of the sample; leaves softmax in output().
    double forward(const MlpParams& p, std::span<const double> x, int target) {
        std::copy(x.begin(), x.end(), act_[0].begin());
        input_ones_ = nullptr;
        first_layer_dense(p);
        return finish_forward(p, target);
    }

    /// `ones` are the indices of the 1-valued inputs.
    double forward_sparse(const MlpParams& p, const std::vector<int>& ones, int target) {
        input_ones_ = &ones;
        const int in = p.sizes[0];
        const int out = p.sizes[1];
        const auto& W = p.weights[0];
        auto& a = act_[1];
        const bool relu = p.layers() > 1;
        for (int o = 0; o < out; ++o) {
            double acc = p.biases[0][static_cast<size_t>(o)];
            const double* wrow = W.data() + static_cast<size_t>(o) * static_cast<size_t>(in);
            for (int j : ones) acc += wrow[j];
            a[static_cast<size_t>(o)] = (relu && acc < 0.0) ? 0.0 : acc;
        }
        return finish_forward(p, target);
    }

    /// Accumulates dCE/dparams for the last forwarded sample into grad
    /// (same shapes as p), scaled by `scale`.
    void backward(const MlpParams& p, int target, double scale, MlpParams& grad) {
        const int L = p.layers();
        auto& dl = delta_[static_cast<size_t>(L) - 1];
        const auto& out = act_.back();
        for (size_t c = 0; c < out.size(); ++c)
            dl[c] = out[c] - (static_cast<int>(c) == target ? 1.0 : 0.0);

        for (int l = L - 1; l >= 0; --l) {
            const int in = p.sizes[static_cast<size_t>(l)];
            const int out_n = p.sizes[static_cast<size_t>(l) + 1];
            const auto& prev = act_[static_cast<size_t>(l)];
            auto& d = delta_[static_cast<size_t>(l)];
            auto& gw = grad.weights[static_cast<size_t>(l)];
            auto& gb = grad.biases[static_cast<size_t>(l)];
            const bool sparse_input = l == 0 && input_ones_ != nullptr;
            for (int o = 0; o < out_n; ++o) {
                double dv = d[static_cast<size_t>(o)] * scale;
                gb[static_cast<size_t>(o)] += dv;
                double* grow = gw.data() + static_cast<size_t>(o) * static_cast<size_t>(in);
                if (sparse_input) {
                    for (int j : *input_ones_) grow[j] += dv;
                } else {
                    for (int j = 0; j < in; ++j) grow[j] += dv * prev[static_cast<size_t>(j)];
                }
            }
            if (l == 0) break;
            // delta for the layer below: row-major streaming, then relu gate
            auto& dprev = delta_[static_cast<size_t>(l) - 1];
            std::fill(dprev.begin(), dprev.end(), 0.0);
            const auto& W = p.weights[static_cast<size_t>(l)];
            for (int o = 0; o < out_n; ++o) {
                double dv = d[static_cast<size_t>(o)];
                const double* wrow = W.data() + static_cast<size_t>(o) * static_cast<size_t>(in);
                for (int j = 0; j < in; ++j) dprev[static_cast<size_t>(j)] += wrow[j] * dv;
            }
            for (int j = 0; j < in; ++j)
                if (!(prev[static_cast<size_t>(j)] > 0.0)) dprev[static_cast<size_t>(j)] = 0.0;
        }
    }

    const std::vector<double>& output() const { return act_.back(); }

private:
    void first_layer_dense(const MlpParams& p) {
        const int in = p.sizes[0];
        const int out = p.sizes[1];
        const auto& W = p.weights[0];
        auto& a = act_[1];
        const bool relu = p.layers() > 1;
        for (int o = 0; o < out; ++o) {
            double acc = p.biases[0][static_cast<size_t>(o)] +
                         dot(W.data() + static_cast<size_t>(o) * static_cast<size_t>(in),
                             act_[0].data(), in);
            a[static_cast<size_t>(o)] = (relu && acc < 0.0) ? 0.0 : acc;
        }
    }

    double finish_forward(const MlpParams& p, int target) {
        const int L = p.layers();
        for (int l = 1; l < L; ++l) {
            const int in = p.sizes[static_cast<size_t>(l)];
            const int out = p.sizes[static_cast<size_t>(l) + 1];
            const auto& W = p.weights[static_cast<size_t>(l)];
            const auto& b = p.biases[static_cast<size_t>(l)];
            auto& a = act_[static_cast<size_t>(l) + 1];
            const auto& prev = act_[static_cast<size_t>(l)];
            for (int o = 0; o < out; ++o) {
                double acc = b[static_cast<size_t>(o)] +
                             dot(W.data() + static_cast<size_t>(o) * static_cast<size_t>(in),
                                 prev.data(), in);
                a[static_cast<size_t>(o)] = (l + 1 < L && acc < 0.0) ? 0.0 : acc;
            }
        }
        auto& out = act_.back();
        double zmax = out[0];
        for (double v : out) zmax = std::max(zmax, v);
        double sum = 0.0;
        for (double v : out) sum += std::exp(v - zmax);
        double log_p = out[static_cast<size_t>(target)] - zmax - std::log(sum);
        for (double& v : out) v = std::exp(v - zmax) / sum;
        return -log_p;
    }

    std::vector<std::vector<double>> act_;
    std::vector<std::vector<double>> delta_;
    const std::vector<int>* input_ones_ = nullptr;
};

inline MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    z.sizes = p.sizes;
    for (const auto& w : p.weights) z.weights.emplace_back(w.size(), 0.0);
    for (const auto& b : p.biases) z.biases.emplace_back(b.size(), 0.0);
    return z;
}

}  // namespace detail

/// Mean cross-entropy over all rows plus (l2/2) * sum ||W_l||^2.
inline double mlp_objective(const MlpParams& p, const DesignMatrix& data, double l2) {
    detail::MlpWorkspace ws(p.sizes);
    double loss = 0.0;
    for (int i = 0; i < data.rows(); ++i)
        loss += ws.forward(p, data.row(i), data.targets[static_cast<size_t>(i)]);
    loss /= static_cast<double>(data.rows());
    double reg = 0.0;
    for (const auto& w : p.weights)
        for (double v : w) reg += v * v;
    return loss + 0.5 * l2 * reg;
}

/// Analytic gradient of mlp_objective, same shapes as the parameters.
inline MlpParams mlp_gradient(const MlpParams& p, const DesignMatrix& data, double l2) {
    detail::MlpWorkspace ws(p.sizes);
    MlpParams grad = detail::zeros_like(p);
    const double scale = 1.0 / static_cast<double>(data.rows());
    for (int i = 0; i < data.rows(); ++i) {
        ws.forward(p, data.row(i), data.targets[static_cast<size_t>(i)]);
        ws.backward(p, data.targets[static_cast<size_t>(i)], scale, grad);
    }
    for (size_t l = 0; l < p.weights.size(); ++l)
        for (size_t k = 0; k < p.weights[l].size(); ++k)
            grad.weights[l][k] += l2 * p.weights[l][k];
    return grad;
}

class MlpRanker final : public TrainedRanker {
public:
    MlpRanker(MlpParams params, double l2, std::uint64_t seed)
        : params_(std::move(params)), l2_(l2), seed_(seed) {}

    RankerKind kind() const override { return RankerKind::mlp; }
    int width() const override { return params_.sizes.front(); }
    int n_classes() const override { return params_.sizes.back(); }

    RankedPrediction rank_trial(std::span<const double> x, std::int64_t) const override {
        detail::MlpWorkspace ws(params_.sizes);
        ws.forward(params_, x, 0);
        return rank_scores(ws.output());
    }

    const MlpParams& params() const { return params_; }

    nlohmann::json to_json() const override {
        return {{"kind", "mlp"},      {"sizes", params_.sizes}, {"weights", params_.weights},
                {"biases", params_.biases}, {"l2", l2_},        {"seed", seed_}};
    }

private:
    MlpParams params_;
    double l2_;
    std::uint64_t seed_;
};

/// Mini-batch Adam on cross-entropy + L2; stops on a training-loss plateau
/// (no improvement beyond opt.tol for opt.patience epochs) or the epoch cap.
inline std::unique_ptr<MlpRanker> fit_mlp(const DesignMatrix& m, double l2,
                                          const MlpOptions& opt = {}) {
    if (m.rows() == 0) throw Error(ErrorCode::EmptyTraining, "mlp needs training rows");
    std::vector<int> sizes;
    sizes.push_back(m.width);
    for (int h : opt.hidden) sizes.push_back(h);
    sizes.push_back(m.n_classes);

    MlpParams p = mlp_init(sizes, opt.seed);
    MlpParams grad = detail::zeros_like(p);
    MlpParams adam_m = detail::zeros_like(p);
    MlpParams adam_v = detail::zeros_like(p);
    detail::MlpWorkspace ws(sizes);
    CounterRng rng = CounterRng(opt.seed).derive(0x317a);

    // binary rows take the index-based first-layer path
    bool binary = true;
    for (double v : m.values)
        if (v != 0.0 && v != 1.0) {
            binary = false;
            break;
        }
    std::vector<std::vector<int>> sparse;
    if (binary) sparse = one_indices(m);

    const int n = m.rows();
    long step = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    int plateau = 0;

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::vector<int> order = rng.derive(static_cast<std::uint64_t>(epoch)).permutation(n);
        double epoch_ce = 0.0;
        for (int start = 0; start < n; start += opt.batch) {
            const int bs = std::min(opt.batch, n - start);
            for (auto& w : grad.weights) std::fill(w.begin(), w.end(), 0.0);
            for (auto& b : grad.biases) std::fill(b.begin(), b.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(bs);
            for (int k = 0; k < bs; ++k) {
                int i = order[static_cast<size_t>(start + k)];
                int target = m.targets[static_cast<size_t>(i)];
                epoch_ce += binary ? ws.forward_sparse(p, sparse[static_cast<size_t>(i)], target)
                                   : ws.forward(p, m.row(i), target);
                ws.backward(p, target, scale, grad);
            }
            for (size_t l = 0; l < p.weights.size(); ++l)
                for (size_t k = 0; k < p.weights[l].size(); ++k)
                    grad.weights[l][k] += l2 * p.weights[l][k];

            ++step;
            const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
            auto adam_update = [&](std::vector<double>& theta, std::vector<double>& g,
                                   std::vector<double>& mm, std::vector<double>& vv) {
                for (size_t k = 0; k < theta.size(); ++k) {
                    mm[k] = opt.beta1 * mm[k] + (1.0 - opt.beta1) * g[k];
                    vv[k] = opt.beta2 * vv[k] + (1.0 - opt.beta2) * g[k] * g[k];
                    theta[k] -= opt.learn_rate * (mm[k] / bc1) / (std::sqrt(vv[k] / bc2) + opt.eps);
                }
            };
            for (size_t l = 0; l < p.weights.size(); ++l) {
                adam_update(p.weights[l], grad.weights[l], adam_m.weights[l], adam_v.weights[l]);
                adam_update(p.biases[l], grad.biases[l], adam_m.biases[l], adam_v.biases[l]);
            }
        }
        double reg = 0.0;
        for (const auto& w : p.weights)
            for (double v : w) reg += v * v;
        double loss = epoch_ce / n + 0.5 * l2 * reg;
        if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "mlp diverged");
        if (loss < best_loss - opt.tol) {
            best_loss = loss;
            plateau = 0;
        } else if (++plateau >= opt.patience) {
            break;
        }
    }
    return std::make_unique<MlpRanker>(std::move(p), l2, opt.seed);
}

}  // namespace ctv
