#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ctv/csv.hpp"
#include "ctv/models.hpp"

namespace ctv {

// ---- fold planning ---------------------------------------------------------

struct FoldPlan {
    int outer = 5;
    int inner = 3;
    std::uint64_t seed = 0;
    std::vector<int> outer_fold;  // event -> 0..outer-1
    // [outer][event] -> 0..inner-1 for that outer fold's training events, -1 on its test fold
    std::vector<std::vector<int>> inner_fold;
};

/// Seeded uniform shuffle followed by round-robin assignment, outer then
/// inner; fold sizes differ by at most one.
inline FoldPlan plan_folds(int event_count, int outer = 5, int inner = 3, std::uint64_t seed = 0) {
    if (event_count < outer)
        throw Error(ErrorCode::TooFewEvents,
                    std::to_string(event_count) + " events for " + std::to_string(outer) +
                        " outer folds");
    FoldPlan plan;
    plan.outer = outer;
    plan.inner = inner;
    plan.seed = seed;
    plan.outer_fold.assign(static_cast<size_t>(event_count), -1);

    CounterRng rng(seed);
    std::vector<int> perm = rng.derive(0xf01d).permutation(event_count);
    for (int i = 0; i < event_count; ++i)
        plan.outer_fold[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i % outer;

    plan.inner_fold.assign(static_cast<size_t>(outer), {});
    for (int k = 0; k < outer; ++k) {
        auto& assign = plan.inner_fold[static_cast<size_t>(k)];
        assign.assign(static_cast<size_t>(event_count), -1);
        std::vector<int> train;
        for (int i = 0; i < event_count; ++i)
            if (plan.outer_fold[static_cast<size_t>(i)] != k) train.push_back(i);
        std::vector<int> perm2 =
            rng.derive(0x13a9, static_cast<std::uint64_t>(k)).permutation(static_cast<int>(train.size()));
        for (size_t t = 0; t < train.size(); ++t)
            assign[static_cast<size_t>(train[static_cast<size_t>(perm2[t])])] =
                static_cast<int>(t) % inner;
    }
    return plan;
}

// ---- out-of-fold predictions and metrics -------------------------------------

struct OofPredictions {
    std::vector<std::string> ids;
    std::vector<int> truths;
    std::vector<RankedPrediction> preds;
    int n_classes = kGenreCount;

    int size() const { return static_cast<int>(ids.size()); }
};

/// 1-based position of the true class in the ranking.
inline int rank_of_truth(const RankedPrediction& pred, int truth) {
    for (size_t k = 0; k < pred.order.size(); ++k)
        if (pred.order[k] == truth) return static_cast<int>(k) + 1;
    throw Error(ErrorCode::InvariantViolation, "truth missing from ranking");
}

inline double accuracy_at_k(const OofPredictions& oof, int k) {
    if (oof.size() == 0) throw Error(ErrorCode::EmptyInput, "no predictions");
    long hits = 0;
    for (int i = 0; i < oof.size(); ++i)
        if (rank_of_truth(oof.preds[static_cast<size_t>(i)], oof.truths[static_cast<size_t>(i)]) <= k)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(oof.size());
}

inline double mrr(const OofPredictions& oof) {
    if (oof.size() == 0) throw Error(ErrorCode::EmptyInput, "no predictions");
    double sum = 0.0;
    for (int i = 0; i < oof.size(); ++i)
        sum += 1.0 / rank_of_truth(oof.preds[static_cast<size_t>(i)],
                                   oof.truths[static_cast<size_t>(i)]);
    return sum / static_cast<double>(oof.size());
}

struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::vector<long>> counts;  // true x predicted top-1
    std::vector<long> row_sums, col_sums;
    std::vector<double> precision, recall, f1;  // 0 when the denominator is 0
    long total = 0;
};

inline ConfusionMatrix confusion(const OofPredictions& oof) {
    if (oof.size() == 0) throw Error(ErrorCode::EmptyInput, "no predictions");
    ConfusionMatrix cm;
    cm.n_classes = oof.n_classes;
    cm.counts.assign(static_cast<size_t>(cm.n_classes),
                     std::vector<long>(static_cast<size_t>(cm.n_classes), 0));
    for (int i = 0; i < oof.size(); ++i)
        ++cm.counts[static_cast<size_t>(oof.truths[static_cast<size_t>(i)])]
                   [static_cast<size_t>(oof.preds[static_cast<size_t>(i)].order[0])];
    cm.row_sums.assign(static_cast<size_t>(cm.n_classes), 0);
    cm.col_sums.assign(static_cast<size_t>(cm.n_classes), 0);
    for (int t = 0; t < cm.n_classes; ++t)
        for (int p = 0; p < cm.n_classes; ++p) {
            long v = cm.counts[static_cast<size_t>(t)][static_cast<size_t>(p)];
            cm.row_sums[static_cast<size_t>(t)] += v;
            cm.col_sums[static_cast<size_t>(p)] += v;
            cm.total += v;
        }
    for (int c = 0; c < cm.n_classes; ++c) {
        long tp = cm.counts[static_cast<size_t>(c)][static_cast<size_t>(c)];
        long rs = cm.row_sums[static_cast<size_t>(c)];
        long cs = cm.col_sums[static_cast<size_t>(c)];
        cm.recall.push_back(rs == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(rs));
        cm.precision.push_back(cs == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(cs));
        cm.f1.push_back(2 * tp + (rs - tp) + (cs - tp) == 0
                            ? 0.0
                            : 2.0 * static_cast<double>(tp) /
                                  static_cast<double>(2 * tp + (rs - tp) + (cs - tp)));
    }
    return cm;
}

/// Unweighted mean of per-class F1 over all classes; zero-support classes
/// contribute 0.
inline double f1_macro(const OofPredictions& oof) {
    ConfusionMatrix cm = confusion(oof);
    double sum = 0.0;
    for (double v : cm.f1) sum += v;
    return sum / static_cast<double>(cm.n_classes);
}

/// Micro-averaged F1 from pooled counts, 2*TP / (2*TP + FP + FN). In
/// single-label multiclass this reduces to A@1 exactly.
inline double f1_micro(const OofPredictions& oof) {
    if (oof.size() == 0) throw Error(ErrorCode::EmptyInput, "no predictions");
    long tp = 0;
    for (int i = 0; i < oof.size(); ++i)
        if (oof.preds[static_cast<size_t>(i)].order[0] == oof.truths[static_cast<size_t>(i)]) ++tp;
    long fp = oof.size() - tp;  // every miss is one FP and one FN pooled
    long fn = fp;
    return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

// ---- nested cross-validation ----------------------------------------------------

struct FoldResult {
    double a1 = 0.0, a3 = 0.0, f1_macro = 0.0, mrr = 0.0;
    double chosen_hp = 0.0;
};

struct MetricAgg {
    double a1 = 0.0, a3 = 0.0, f1_macro = 0.0, mrr = 0.0;
};

struct EvaluationReport {
    std::string config_name;
    std::string model;
    std::string hyper_name;
    std::vector<FoldResult> folds;
    MetricAgg mean, stddev;  // population std over the outer folds
    ConfusionMatrix confusion;
    std::uint64_t seed = 0;
    std::string version{kVersion};
    double runtime_seconds = 0.0;  // console diagnostics; never serialized
};

struct EvalRun {
    EvaluationReport report;
    OofPredictions oof;
};

namespace detail {

inline void parallel_run(std::vector<std::function<void()>>& tasks, int workers) {
    if (workers <= 1 || tasks.size() <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            tasks[i]();
        }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min<int>(workers, static_cast<int>(tasks.size()));
    pool.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

struct InnerScore {
    double a1 = 0.0;
    double mrr = 0.0;
};

inline InnerScore score_validation(const TrainedRanker& model, const DesignMatrix& val) {
    InnerScore s;
    for (int i = 0; i < val.rows(); ++i) {
        RankedPrediction pred =
            rank(model, val.row(i), val.row_ids[static_cast<size_t>(i)]);
        int r = rank_of_truth(pred, val.targets[static_cast<size_t>(i)]);
        if (r == 1) s.a1 += 1.0;
        s.mrr += 1.0 / r;
    }
    s.a1 /= val.rows();
    s.mrr /= val.rows();
    return s;
}

inline std::uint64_t fit_stream_id(int outer, int grid, int inner) {
    return (static_cast<std::uint64_t>(outer + 1) << 32) |
           (static_cast<std::uint64_t>(grid + 1) << 16) | static_cast<std::uint64_t>(inner + 1);
}

}  // namespace detail

/// Grid search on the inner folds scored by mean validation A@1 (ties: higher
/// MRR, then the more regularized value), refit on the full outer training
/// set, metrics on the outer test fold. Out-of-fold predictions cover every
/// event exactly once. Bit-reproducible for any worker count.
inline EvalRun nested_cv(const DesignMatrix& full, const RankerSpec& spec, const FoldPlan& plan,
                         int workers = 1) {
    const int n = full.rows();
    if (static_cast<int>(plan.outer_fold.size()) != n)
        throw Error(ErrorCode::InvariantViolation, "fold plan does not match event count");
    if (spec.tunable() && spec.grid.empty())
        throw Error(ErrorCode::EmptyGrid, std::string(ranker_kind_name(spec.kind)) +
                                              " needs a hyperparameter grid");
    const std::vector<double> grid = spec.tunable() ? spec.grid : std::vector<double>{0.0};
    const int n_grid = static_cast<int>(grid.size());

    // Inner evaluations: one task per (outer fold, grid point, inner fold).
    std::vector<std::vector<std::vector<detail::InnerScore>>> inner_scores(
        static_cast<size_t>(plan.outer),
        std::vector<std::vector<detail::InnerScore>>(
            static_cast<size_t>(n_grid),
            std::vector<detail::InnerScore>(static_cast<size_t>(plan.inner))));

    std::vector<std::function<void()>> tasks;
    if (spec.tunable() && n_grid > 1) {
        for (int k = 0; k < plan.outer; ++k)
            for (int g = 0; g < n_grid; ++g)
                for (int j = 0; j < plan.inner; ++j)
                    tasks.push_back([&, k, g, j] {
                        std::vector<int> train_rows, val_rows;
                        for (int i = 0; i < n; ++i) {
                            int inner = plan.inner_fold[static_cast<size_t>(k)][static_cast<size_t>(i)];
                            if (inner < 0) continue;  // outer test fold
                            if (inner == j)
                                val_rows.push_back(i);
                            else
                                train_rows.push_back(i);
                        }
                        DesignMatrix train = select_rows(full, train_rows);
                        DesignMatrix val = select_rows(full, val_rows);
                        auto model =
                            fit_ranker(spec, grid[static_cast<size_t>(g)], train,
                                       detail::fit_stream_id(k, g, j));
                        inner_scores[static_cast<size_t>(k)][static_cast<size_t>(g)]
                                    [static_cast<size_t>(j)] = detail::score_validation(*model, val);
                    });
    }
    detail::parallel_run(tasks, workers);

    // Hyperparameter choice per outer fold (serial, fixed order).
    std::vector<double> chosen(static_cast<size_t>(plan.outer), grid[0]);
    if (spec.tunable() && n_grid > 1) {
        for (int k = 0; k < plan.outer; ++k) {
            int best = 0;
            double best_a1 = -1.0, best_mrr = -1.0;
            for (int g = 0; g < n_grid; ++g) {
                double a1 = 0.0, mean_mrr = 0.0;
                for (int j = 0; j < plan.inner; ++j) {
                    const auto& s =
                        inner_scores[static_cast<size_t>(k)][static_cast<size_t>(g)][static_cast<size_t>(j)];
                    a1 += s.a1;
                    mean_mrr += s.mrr;
                }
                a1 /= plan.inner;
                mean_mrr /= plan.inner;
                bool better = a1 > best_a1;
                if (!better && a1 == best_a1) {
                    if (mean_mrr > best_mrr)
                        better = true;
                    else if (mean_mrr == best_mrr)
                        better = spec.more_regularized(grid[static_cast<size_t>(g)],
                                                       grid[static_cast<size_t>(best)]);
                }
                if (better) {
                    best = g;
                    best_a1 = a1;
                    best_mrr = mean_mrr;
                }
            }
            chosen[static_cast<size_t>(k)] = grid[static_cast<size_t>(best)];
        }
    }

    // Refits on the full outer training sets; predictions for the test folds.
    std::vector<std::vector<RankedPrediction>> fold_preds(static_cast<size_t>(plan.outer));
    std::vector<std::vector<int>> fold_rows(static_cast<size_t>(plan.outer));
    std::vector<std::function<void()>> refits;
    for (int k = 0; k < plan.outer; ++k)
        refits.push_back([&, k] {
            std::vector<int> train_rows, test_rows;
            for (int i = 0; i < n; ++i) {
                if (plan.outer_fold[static_cast<size_t>(i)] == k)
                    test_rows.push_back(i);
                else
                    train_rows.push_back(i);
            }
            DesignMatrix train = select_rows(full, train_rows);
            auto model = fit_ranker(spec, chosen[static_cast<size_t>(k)], train,
                                    detail::fit_stream_id(k, 0xfffe, 0xfffe));
            auto& preds = fold_preds[static_cast<size_t>(k)];
            preds.reserve(test_rows.size());
            for (int i : test_rows)
                preds.push_back(rank(*model, full.row(i), full.row_ids[static_cast<size_t>(i)]));
            fold_rows[static_cast<size_t>(k)] = std::move(test_rows);
        });
    detail::parallel_run(refits, workers);

    // Aggregation in fixed fold order.
    EvalRun run;
    run.report.config_name = full.config.name;
    run.report.model = ranker_kind_name(spec.kind);
    run.report.hyper_name = spec.hyper_name();
    run.report.seed = spec.seed;
    run.oof.n_classes = full.n_classes;
    run.oof.ids.resize(static_cast<size_t>(n));
    run.oof.truths.resize(static_cast<size_t>(n));
    run.oof.preds.resize(static_cast<size_t>(n));

    for (int k = 0; k < plan.outer; ++k) {
        OofPredictions fold;
        fold.n_classes = full.n_classes;
        const auto& rows = fold_rows[static_cast<size_t>(k)];
        for (size_t t = 0; t < rows.size(); ++t) {
            int i = rows[t];
            fold.ids.push_back(full.trial_ids[static_cast<size_t>(i)]);
            fold.truths.push_back(full.targets[static_cast<size_t>(i)]);
            fold.preds.push_back(fold_preds[static_cast<size_t>(k)][t]);
            run.oof.ids[static_cast<size_t>(i)] = full.trial_ids[static_cast<size_t>(i)];
            run.oof.truths[static_cast<size_t>(i)] = full.targets[static_cast<size_t>(i)];
            run.oof.preds[static_cast<size_t>(i)] = fold_preds[static_cast<size_t>(k)][t];
        }
        FoldResult fr;
        fr.a1 = accuracy_at_k(fold, 1);
        fr.a3 = accuracy_at_k(fold, 3);
        fr.f1_macro = f1_macro(fold);
        fr.mrr = mrr(fold);
        fr.chosen_hp = chosen[static_cast<size_t>(k)];
        run.report.folds.push_back(fr);
    }

    auto aggregate = [&](auto take) {
        double mean = 0.0;
        for (const auto& f : run.report.folds) mean += take(f);
        mean /= static_cast<double>(run.report.folds.size());
        double ss = 0.0;
        for (const auto& f : run.report.folds) ss += (take(f) - mean) * (take(f) - mean);
        return std::pair<double, double>(
            mean, std::sqrt(ss / static_cast<double>(run.report.folds.size())));
    };
    std::tie(run.report.mean.a1, run.report.stddev.a1) =
        aggregate([](const FoldResult& f) { return f.a1; });
    std::tie(run.report.mean.a3, run.report.stddev.a3) =
        aggregate([](const FoldResult& f) { return f.a3; });
    std::tie(run.report.mean.f1_macro, run.report.stddev.f1_macro) =
        aggregate([](const FoldResult& f) { return f.f1_macro; });
    std::tie(run.report.mean.mrr, run.report.stddev.mrr) =
        aggregate([](const FoldResult& f) { return f.mrr; });
    run.report.confusion = confusion(run.oof);
    return run;
}

/// Convenience wrapper from events.
inline EvalRun nested_cv(const std::vector<ViewingEvent>& events, const FeatureConfig& config,
                         const UserIndex& users, const RankerSpec& spec, const FoldPlan& plan,
                         int workers = 1) {
    DesignMatrix m = build_matrix(events, config, users);
    return nested_cv(m, spec, plan, workers);
}

// ---- serialization --------------------------------------------------------------

inline nlohmann::json confusion_to_json(const ConfusionMatrix& cm) {
    std::vector<std::string> labels;
    if (cm.n_classes == kGenreCount)
        for (int g = 0; g < kGenreCount; ++g)
            labels.push_back(std::string(token(static_cast<Genre>(g))));
    else
        for (int c = 0; c < cm.n_classes; ++c) labels.push_back(std::to_string(c));
    return {{"labels", labels},       {"counts", cm.counts},   {"precision", cm.precision},
            {"recall", cm.recall},    {"f1", cm.f1},           {"row_sums", cm.row_sums},
            {"col_sums", cm.col_sums}, {"total", cm.total}};
}

inline nlohmann::json report_to_json(const EvaluationReport& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"a1", f.a1},
                         {"a3", f.a3},
                         {"f1_macro", f.f1_macro},
                         {"mrr", f.mrr},
                         {"chosen_hp", f.chosen_hp}});
    return {{"config", r.config_name},
            {"model", r.model},
            {"hyper_name", r.hyper_name},
            {"folds", folds},
            {"mean",
             {{"a1", r.mean.a1}, {"a3", r.mean.a3}, {"f1_macro", r.mean.f1_macro}, {"mrr", r.mean.mrr}}},
            {"std",
             {{"a1", r.stddev.a1},
              {"a3", r.stddev.a3},
              {"f1_macro", r.stddev.f1_macro},
              {"mrr", r.stddev.mrr}}},
            {"confusion", confusion_to_json(r.confusion)},
            {"seeds", {{"master", r.seed}}},
            {"version", r.version}};
}

/// `event_id,true_genre,rank1..rank10`; class labels are genre tokens for the
/// 10-genre pipeline and plain indices otherwise.
inline void write_oof_csv(std::ostream& out, const OofPredictions& oof) {
    auto label = [&](int c) {
        return oof.n_classes == kGenreCount ? std::string(token(static_cast<Genre>(c)))
                                            : std::to_string(c);
    };
    out << "event_id,true_genre";
    for (int k = 1; k <= oof.n_classes; ++k) out << ",rank" << k;
    out << '\n';
    for (int i = 0; i < oof.size(); ++i) {
        out << oof.ids[static_cast<size_t>(i)] << ','
            << label(oof.truths[static_cast<size_t>(i)]);
        for (int c : oof.preds[static_cast<size_t>(i)].order) out << ',' << label(c);
        out << '\n';
    }
}

inline OofPredictions read_oof_csv(std::istream& in) {
    auto rows = read_csv(in);
    if (rows.empty()) throw Error(ErrorCode::MalformedRow, "empty oof file");
    const int n_classes = static_cast<int>(rows[0].fields.size()) - 2;
    if (n_classes < 2) throw Error(ErrorCode::MalformedRow, "oof header too short", rows[0].line);
    auto parse_label = [&](const std::string& s, long line) -> int {
        if (auto g = parse_genre(s)) return static_cast<int>(*g);
        try {
            return std::stoi(s);
        } catch (...) {
            throw Error(ErrorCode::UnknownToken, "class label '" + s + "'", line);
        }
    };
    OofPredictions oof;
    oof.n_classes = n_classes;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (static_cast<int>(f.size()) != n_classes + 2)
            throw Error(ErrorCode::MalformedRow, "wrong field count", rows[r].line);
        oof.ids.push_back(f[0]);
        oof.truths.push_back(parse_label(f[1], rows[r].line));
        RankedPrediction pred;
        for (int k = 0; k < n_classes; ++k) {
            pred.order.push_back(parse_label(f[static_cast<size_t>(k) + 2], rows[r].line));
            pred.scores.push_back(static_cast<double>(n_classes - k) / n_classes);
        }
        oof.preds.push_back(std::move(pred));
    }
    return oof;
}

}  // namespace ctv
