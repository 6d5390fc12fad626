#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctv/features.hpp"
#include "ctv/rng.hpp"

namespace ctv {

enum class RankerKind { random, toppop, softmax, gbdt, mlp };

inline const char* ranker_kind_name(RankerKind k) {
    switch (k) {
        case RankerKind::random: return "random";
        case RankerKind::toppop: return "toppop";
        case RankerKind::softmax: return "softmax";
        case RankerKind::gbdt: return "gbdt";
        case RankerKind::mlp: return "mlp";
    }
    return "?";
}

inline RankerKind ranker_kind_from_name(std::string_view name) {
    for (RankerKind k : {RankerKind::random, RankerKind::toppop, RankerKind::softmax,
                         RankerKind::gbdt, RankerKind::mlp})
        if (name == ranker_kind_name(k)) return k;
    throw Error(ErrorCode::UnknownToken, "unknown model '" + std::string(name) + "'");
}

namespace detail {

inline void softmax_inplace(std::span<double> z) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

}  // namespace detail

/// Full ranking of all classes, most confident first.
struct RankedPrediction {
    std::vector<int> order;
    std::vector<double> scores;  // non-increasing, parallel to order
};

/// Sorts class indices by descending score; equal scores resolve to the lower
/// class index.
inline RankedPrediction rank_scores(std::span<const double> scores) {
    RankedPrediction p;
    p.order.resize(scores.size());
    std::iota(p.order.begin(), p.order.end(), 0);
    std::stable_sort(p.order.begin(), p.order.end(), [&](int a, int b) {
        return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    });
    p.scores.reserve(scores.size());
    for (int c : p.order) p.scores.push_back(scores[static_cast<size_t>(c)]);
    return p;
}

/// A fitted model; immutable, safe to share across threads.
class TrainedRanker {
public:
    virtual ~TrainedRanker() = default;
    virtual RankerKind kind() const = 0;
    /// Expected input width; 0 when any width is accepted.
    virtual int width() const = 0;
    virtual int n_classes() const = 0;
    /// `trial` is the stable trial index; only the random ranker reads it.
    virtual RankedPrediction rank_trial(std::span<const double> x, std::int64_t trial) const = 0;
    virtual nlohmann::json to_json() const = 0;
};

inline RankedPrediction rank(const TrainedRanker& model, std::span<const double> x,
                             std::int64_t trial = 0) {
    if (model.width() != 0 && model.width() != static_cast<int>(x.size()))
        throw Error(ErrorCode::WidthMismatch,
                    "input width " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(model.width()));
    return model.rank_trial(x, trial);
}

// ---- baselines ----------------------------------------------------------------

/// Uniform random permutation per trial from a counter-based stream keyed by
/// (seed, trial index).
class RandomRanker final : public TrainedRanker {
public:
    RandomRanker(std::uint64_t seed, int classes) : seed_(seed), classes_(classes) {}

    RankerKind kind() const override { return RankerKind::random; }
    int width() const override { return 0; }
    int n_classes() const override { return classes_; }

    RankedPrediction rank_trial(std::span<const double>, std::int64_t trial) const override {
        CounterRng rng = CounterRng(seed_).derive(static_cast<std::uint64_t>(trial));
        RankedPrediction p;
        p.order = rng.permutation(classes_);
        p.scores.reserve(static_cast<size_t>(classes_));
        for (int i = 0; i < classes_; ++i)
            p.scores.push_back(static_cast<double>(classes_ - i) / classes_);
        return p;
    }

    nlohmann::json to_json() const override {
        return {{"kind", "random"}, {"n_classes", classes_}, {"seed", seed_}};
    }

private:
    std::uint64_t seed_;
    int classes_;
};

inline std::unique_ptr<TrainedRanker> fit_random(std::uint64_t seed, int classes = kGenreCount) {
    return std::make_unique<RandomRanker>(seed, classes);
}

/// Single global ranking by descending training-set count; counts are the
/// confidence scores. Ties resolve to the lower class index.
class ToppopRanker final : public TrainedRanker {
public:
    ToppopRanker(std::vector<long> counts) : counts_(std::move(counts)) {
        std::vector<double> scores(counts_.begin(), counts_.end());
        ranking_ = rank_scores(scores);
    }

    RankerKind kind() const override { return RankerKind::toppop; }
    int width() const override { return 0; }
    int n_classes() const override { return static_cast<int>(counts_.size()); }

    RankedPrediction rank_trial(std::span<const double>, std::int64_t) const override {
        return ranking_;
    }

    const std::vector<long>& counts() const { return counts_; }

    nlohmann::json to_json() const override {
        return {{"kind", "toppop"}, {"n_classes", counts_.size()}, {"counts", counts_}};
    }

private:
    std::vector<long> counts_;
    RankedPrediction ranking_;
};

inline std::unique_ptr<TrainedRanker> fit_toppop(std::span<const int> targets,
                                                 int classes = kGenreCount) {
    if (targets.empty()) throw Error(ErrorCode::EmptyTraining, "toppop needs training targets");
    std::vector<long> counts(static_cast<size_t>(classes), 0);
    for (int t : targets) ++counts[static_cast<size_t>(t)];
    return std::make_unique<ToppopRanker>(std::move(counts));
}

}  // namespace ctv
