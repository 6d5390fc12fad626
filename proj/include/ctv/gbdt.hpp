#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ctv/ranker.hpp"

namespace ctv {

struct GbdtOptions {
    int stages = 1000;
    double subsample = 0.5;  // fraction per stage, without replacement
    double learn_rate = 0.1;
    int min_leaf = 1;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 = leaf
    int left = -1;     // x[feature] == 0
    int right = -1;    // x[feature] != 0
    double value = 0.0;
};
using RegressionTree = std::vector<TreeNode>;

inline double tree_value(const RegressionTree& tree, std::span<const double> x) {
    int node = 0;
    while (tree[static_cast<size_t>(node)].feature >= 0) {
        const TreeNode& t = tree[static_cast<size_t>(node)];
        node = x[static_cast<size_t>(t.feature)] != 0.0 ? t.right : t.left;
    }
    return tree[static_cast<size_t>(node)].value;
}

namespace detail {

/// Least-squares regression tree on binary features. Residuals drive the
/// splits; leaves get the Newton-style multiclass value
/// ((K-1)/K) * sum(r) / sum(p(1-p)).
class GbdtTreeBuilder {
public:
    GbdtTreeBuilder(const DesignMatrix& m, const std::vector<std::vector<int>>& sparse,
                    int max_depth, int min_leaf, int n_classes)
        : m_(m), sparse_(sparse), max_depth_(max_depth), min_leaf_(min_leaf),
          k_factor_(static_cast<double>(n_classes - 1) / static_cast<double>(n_classes)),
          sum_one_(static_cast<size_t>(m.width), 0.0),
          cnt_one_(static_cast<size_t>(m.width), 0) {}

    RegressionTree build(std::vector<int> samples, const std::vector<double>& residual,
                         const std::vector<double>& hessian) {
        residual_ = &residual;
        hessian_ = &hessian;
        RegressionTree tree;
        tree.push_back(TreeNode{});
        grow(tree, 0, std::move(samples), 0);
        return tree;
    }

private:
    void grow(RegressionTree& tree, int node, std::vector<int> samples, int depth) {
        const auto& r = *residual_;
        double total = 0.0;
        for (int i : samples) total += r[static_cast<size_t>(i)];
        const double n_node = static_cast<double>(samples.size());

        int best_feature = -1;
        double best_gain = 1e-12;
        if (depth < max_depth_ && static_cast<int>(samples.size()) >= 2 * min_leaf_) {
            touched_.clear();
            for (int i : samples)
                for (int f : sparse_[static_cast<size_t>(i)]) {
                    if (cnt_one_[static_cast<size_t>(f)] == 0) touched_.push_back(f);
                    sum_one_[static_cast<size_t>(f)] += r[static_cast<size_t>(i)];
                    ++cnt_one_[static_cast<size_t>(f)];
                }
            const double base = total * total / n_node;
            for (int f : touched_) {
                const long n1 = cnt_one_[static_cast<size_t>(f)];
                const long n0 = static_cast<long>(samples.size()) - n1;
                if (n1 < min_leaf_ || n0 < min_leaf_) continue;
                const double s1 = sum_one_[static_cast<size_t>(f)];
                const double s0 = total - s1;
                double gain = s1 * s1 / static_cast<double>(n1) +
                              s0 * s0 / static_cast<double>(n0) - base;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                }
            }
            for (int f : touched_) {
                sum_one_[static_cast<size_t>(f)] = 0.0;
                cnt_one_[static_cast<size_t>(f)] = 0;
            }
        }

        if (best_feature < 0) {
            const auto& h = *hessian_;
            double sum_h = 0.0;
            for (int i : samples) sum_h += h[static_cast<size_t>(i)];
            tree[static_cast<size_t>(node)].value =
                sum_h < 1e-150 ? 0.0 : k_factor_ * total / sum_h;
            return;
        }

        std::vector<int> zeros, ones;
        zeros.reserve(samples.size());
        for (int i : samples) {
            if (m_.row(i)[static_cast<size_t>(best_feature)] != 0.0)
                ones.push_back(i);
            else
                zeros.push_back(i);
        }
        samples.clear();
        samples.shrink_to_fit();

        int left = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        int right = static_cast<int>(tree.size());
        tree.push_back(TreeNode{});
        tree[static_cast<size_t>(node)].feature = best_feature;
        tree[static_cast<size_t>(node)].left = left;
        tree[static_cast<size_t>(node)].right = right;
        grow(tree, left, std::move(zeros), depth + 1);
        grow(tree, right, std::move(ones), depth + 1);
    }

    const DesignMatrix& m_;
    const std::vector<std::vector<int>>& sparse_;
    const int max_depth_;
    const int min_leaf_;
    const double k_factor_;
    const std::vector<double>* residual_ = nullptr;
    const std::vector<double>* hessian_ = nullptr;
    std::vector<double> sum_one_;
    std::vector<long> cnt_one_;
    std::vector<int> touched_;
};

}  // namespace detail

class GbdtRanker final : public TrainedRanker {
public:
    GbdtRanker(int width, int classes, std::vector<double> base_score,
               std::vector<std::vector<RegressionTree>> stages, double learn_rate, int max_depth,
               std::uint64_t seed)
        : width_(width), classes_(classes), base_score_(std::move(base_score)),
          stages_(std::move(stages)), learn_rate_(learn_rate), max_depth_(max_depth), seed_(seed) {}

    RankerKind kind() const override { return RankerKind::gbdt; }
    int width() const override { return width_; }
    int n_classes() const override { return classes_; }

    std::vector<double> scores(std::span<const double> x) const {
        std::vector<double> f(base_score_);
        for (const auto& stage : stages_)
            for (int c = 0; c < classes_; ++c)
                f[static_cast<size_t>(c)] += learn_rate_ * tree_value(stage[static_cast<size_t>(c)], x);
        detail::softmax_inplace(f);
        return f;
    }

    RankedPrediction rank_trial(std::span<const double> x, std::int64_t) const override {
        return rank_scores(scores(x));
    }

    int stage_count() const { return static_cast<int>(stages_.size()); }

    nlohmann::json to_json() const override {
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& stage : stages_) {
            nlohmann::json per_class = nlohmann::json::array();
            for (const auto& tree : stage) {
                nlohmann::json nodes = nlohmann::json::array();
                for (const auto& t : tree)
                    nodes.push_back({t.feature, t.left, t.right, t.value});
                per_class.push_back(std::move(nodes));
            }
            stages.push_back(std::move(per_class));
        }
        return {{"kind", "gbdt"},          {"width", width_},
                {"n_classes", classes_},   {"base_score", base_score_},
                {"learn_rate", learn_rate_}, {"max_depth", max_depth_},
                {"seed", seed_},           {"stages", std::move(stages)}};
    }

private:
    int width_;
    int classes_;
    std::vector<double> base_score_;
    std::vector<std::vector<RegressionTree>> stages_;  // [stage][class]
    double learn_rate_;
    int max_depth_;
    std::uint64_t seed_;
};

/// Multiclass gradient boosting on the softmax deviance: per stage one tree
/// per class is fit to (one-hot(y) - p) on a fresh subsample drawn without
/// replacement. `deviance_out`, when given, receives the full-training-set
/// deviance after every stage.
inline std::unique_ptr<GbdtRanker> fit_gbdt(const DesignMatrix& m, int max_depth,
                                            const GbdtOptions& opt = {},
                                            std::vector<double>* deviance_out = nullptr) {
    if (m.rows() == 0) throw Error(ErrorCode::EmptyTraining, "gbdt needs training rows");
    const int n = m.rows();
    const int C = m.n_classes;

    std::vector<double> base(static_cast<size_t>(C), 0.0);
    {
        std::vector<long> counts(static_cast<size_t>(C), 0);
        for (int t : m.targets) ++counts[static_cast<size_t>(t)];
        for (int c = 0; c < C; ++c) {
            double prior = static_cast<double>(counts[static_cast<size_t>(c)]) / n;
            base[static_cast<size_t>(c)] = std::log(std::max(prior, 1e-12));
        }
    }

    std::vector<double> f(static_cast<size_t>(n) * static_cast<size_t>(C));
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < C; ++c)
            f[static_cast<size_t>(i) * C + static_cast<size_t>(c)] = base[static_cast<size_t>(c)];

    auto sparse = one_indices(m);
    detail::GbdtTreeBuilder builder(m, sparse, max_depth, opt.min_leaf, C);
    CounterRng rng = CounterRng(opt.seed).derive(0x6bd7);

    const int sub_n = std::max(1, static_cast<int>(std::lround(opt.subsample * n)));
    std::vector<std::vector<RegressionTree>> all_stages;
    all_stages.reserve(static_cast<size_t>(opt.stages));

    std::vector<double> prob(static_cast<size_t>(C));
    std::vector<double> residual(static_cast<size_t>(n), 0.0);
    std::vector<double> hessian(static_cast<size_t>(n), 0.0);
    std::vector<std::vector<double>> p_sub;  // per selected sample

    for (int s = 0; s < opt.stages; ++s) {
        std::vector<int> sub;
        if (sub_n >= n) {
            sub.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) sub[static_cast<size_t>(i)] = i;
        } else {
            sub = rng.derive(static_cast<std::uint64_t>(s)).sample_without_replacement(n, sub_n);
        }

        p_sub.assign(sub.size(), {});
        for (size_t k = 0; k < sub.size(); ++k) {
            const double* fr = f.data() + static_cast<size_t>(sub[k]) * C;
            std::copy(fr, fr + C, prob.begin());
            detail::softmax_inplace(prob);
            p_sub[k] = prob;
        }

        std::vector<RegressionTree> stage;
        stage.reserve(static_cast<size_t>(C));
        for (int c = 0; c < C; ++c) {
            for (size_t k = 0; k < sub.size(); ++k) {
                int i = sub[k];
                double p = p_sub[k][static_cast<size_t>(c)];
                residual[static_cast<size_t>(i)] =
                    (m.targets[static_cast<size_t>(i)] == c ? 1.0 : 0.0) - p;
                hessian[static_cast<size_t>(i)] = p * (1.0 - p);
            }
            RegressionTree tree = builder.build(sub, residual, hessian);
            for (int i = 0; i < n; ++i)
                f[static_cast<size_t>(i) * C + static_cast<size_t>(c)] +=
                    opt.learn_rate * tree_value(tree, m.row(i));
            stage.push_back(std::move(tree));
        }
        all_stages.push_back(std::move(stage));

        if (deviance_out) {
            double dev = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* fr = f.data() + static_cast<size_t>(i) * C;
                std::copy(fr, fr + C, prob.begin());
                detail::softmax_inplace(prob);
                dev -= std::log(
                    std::max(prob[static_cast<size_t>(m.targets[static_cast<size_t>(i)])], 1e-300));
            }
            deviance_out->push_back(dev / n);
        }
    }

    return std::make_unique<GbdtRanker>(m.width, C, std::move(base), std::move(all_stages),
                                        opt.learn_rate, max_depth, opt.seed);
}

}  // namespace ctv
