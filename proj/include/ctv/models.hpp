#pragma once

#include "ctv/gbdt.hpp"
#include "ctv/mlp.hpp"
#include "ctv/ranker.hpp"
#include "ctv/softmax.hpp"

namespace ctv {

/// A model family plus its fixed options and tunable hyperparameter grid.
struct RankerSpec {
    RankerKind kind = RankerKind::toppop;
    std::vector<double> grid;  // l2 values (softmax, mlp) or max depths (gbdt)
    std::uint64_t seed = 0;
    SoftmaxOptions softmax;
    GbdtOptions gbdt;
    MlpOptions mlp;

    static RankerSpec defaults(RankerKind kind, std::uint64_t seed) {
        RankerSpec s;
        s.kind = kind;
        s.seed = seed;
        switch (kind) {
            case RankerKind::softmax: s.grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}; break;
            case RankerKind::gbdt: s.grid = {2, 3, 4, 5, 6}; break;
            case RankerKind::mlp: s.grid = {1e-5, 1e-4, 1e-3, 1e-2}; break;
            default: break;  // baselines have nothing to tune
        }
        return s;
    }

    bool tunable() const {
        return kind == RankerKind::softmax || kind == RankerKind::gbdt || kind == RankerKind::mlp;
    }

    const char* hyper_name() const {
        switch (kind) {
            case RankerKind::softmax:
            case RankerKind::mlp: return "l2";
            case RankerKind::gbdt: return "max_depth";
            default: return "";
        }
    }

    /// True when `a` regularizes harder than `b` (tie-break preference).
    bool more_regularized(double a, double b) const {
        return kind == RankerKind::gbdt ? a < b : a > b;
    }
};

/// Fits one model at one grid point. `fit_stream` decorrelates the seeded
/// randomness of distinct fits (fold/grid/inner indices folded in by the
/// caller); the random baseline ignores it so its per-trial permutations
/// depend only on (seed, trial).
inline std::unique_ptr<TrainedRanker> fit_ranker(const RankerSpec& spec, double hyper,
                                                 const DesignMatrix& train,
                                                 std::uint64_t fit_stream = 0) {
    const std::uint64_t fit_seed = mix64(spec.seed ^ mix64(fit_stream + kRngGamma));
    switch (spec.kind) {
        case RankerKind::random: return fit_random(spec.seed, train.n_classes);
        case RankerKind::toppop: return fit_toppop(train.targets, train.n_classes);
        case RankerKind::softmax: {
            SoftmaxOptions opt = spec.softmax;
            opt.seed = fit_seed;
            return fit_softmax(train, hyper, opt);
        }
        case RankerKind::gbdt: {
            GbdtOptions opt = spec.gbdt;
            opt.seed = fit_seed;
            return fit_gbdt(train, static_cast<int>(hyper), opt);
        }
        case RankerKind::mlp: {
            MlpOptions opt = spec.mlp;
            opt.seed = fit_seed;
            return fit_mlp(train, hyper, opt);
        }
    }
    throw Error(ErrorCode::UnknownToken, "unknown ranker kind");
}

/// Rebuilds a ranker from its to_json() document.
inline std::unique_ptr<TrainedRanker> ranker_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "random")
        return std::make_unique<RandomRanker>(j.at("seed").get<std::uint64_t>(),
                                              j.at("n_classes").get<int>());
    if (kind == "toppop")
        return std::make_unique<ToppopRanker>(j.at("counts").get<std::vector<long>>());
    if (kind == "softmax")
        return std::make_unique<SoftmaxRanker>(
            j.at("width").get<int>(), j.at("n_classes").get<int>(),
            j.at("weights").get<std::vector<double>>(), j.at("bias").get<std::vector<double>>(),
            j.at("l2").get<double>(), j.at("seed").get<std::uint64_t>());
    if (kind == "mlp") {
        MlpParams p;
        p.sizes = j.at("sizes").get<std::vector<int>>();
        p.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        return std::make_unique<MlpRanker>(std::move(p), j.at("l2").get<double>(),
                                           j.at("seed").get<std::uint64_t>());
    }
    if (kind == "gbdt") {
        std::vector<std::vector<RegressionTree>> stages;
        for (const auto& stage : j.at("stages")) {
            std::vector<RegressionTree> per_class;
            for (const auto& tree : stage) {
                RegressionTree t;
                for (const auto& node : tree)
                    t.push_back(TreeNode{node[0].get<int>(), node[1].get<int>(),
                                         node[2].get<int>(), node[3].get<double>()});
                per_class.push_back(std::move(t));
            }
            stages.push_back(std::move(per_class));
        }
        return std::make_unique<GbdtRanker>(
            j.at("width").get<int>(), j.at("n_classes").get<int>(),
            j.at("base_score").get<std::vector<double>>(), std::move(stages),
            j.at("learn_rate").get<double>(), j.at("max_depth").get<int>(),
            j.at("seed").get<std::uint64_t>());
    }
    throw Error(ErrorCode::UnknownToken, "unknown ranker kind '" + kind + "'");
}

}  // namespace ctv
