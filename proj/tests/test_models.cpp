#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "ctv/models.hpp"
#include "ctv/rng.hpp"

using namespace ctv;

namespace {

DesignMatrix random_matrix(int n, int d, int classes, std::uint64_t seed, double density = 0.4) {
    DesignMatrix m;
    m.config.name = "test";
    m.width = d;
    m.n_classes = classes;
    CounterRng rng(seed);
    m.values.resize(static_cast<size_t>(n) * static_cast<size_t>(d));
    for (auto& v : m.values) v = rng.bernoulli(density) ? 1.0 : 0.0;
    for (int i = 0; i < n; ++i) {
        m.targets.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
        m.trial_ids.push_back("t" + std::to_string(i));
        m.row_ids.push_back(i);
    }
    return m;
}

double vec_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double diff = 0.0, norm = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        diff += (got[i] - want[i]) * (got[i] - want[i]);
        norm += want[i] * want[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

double train_a1(const TrainedRanker& model, const DesignMatrix& m) {
    long hits = 0;
    for (int i = 0; i < m.rows(); ++i)
        if (rank(model, m.row(i), i).order[0] == m.targets[static_cast<size_t>(i)]) ++hits;
    return static_cast<double>(hits) / m.rows();
}

}  // namespace

// ---- baselines -------------------------------------------------------------

TEST_CASE("random ranker is a seeded permutation per trial", "[models]") {
    auto model = fit_random(42, 10);
    auto p1 = model->rank_trial({}, 7);
    auto p2 = model->rank_trial({}, 7);
    REQUIRE(p1.order == p2.order);
    CHECK(fit_random(42, 10)->rank_trial({}, 7).order == p1.order);
    CHECK(model->rank_trial({}, 8).order != p1.order);

    std::vector<bool> seen(10, false);
    for (int c : p1.order) seen[static_cast<size_t>(c)] = true;
    for (bool s : seen) CHECK(s);
    for (size_t k = 1; k < p1.scores.size(); ++k) CHECK(p1.scores[k] <= p1.scores[k - 1]);
}

TEST_CASE("random ranker hits chance-level metrics", "[models]") {
    auto model = fit_random(1, 10);
    CounterRng truth(5);
    const long n = 20000;
    long a1 = 0;
    double rr = 0.0;
    for (long t = 0; t < n; ++t) {
        int y = static_cast<int>(truth.below(10));
        auto p = model->rank_trial({}, t);
        int r = 0;
        for (int k = 0; k < 10; ++k)
            if (p.order[static_cast<size_t>(k)] == y) {
                r = k + 1;
                break;
            }
        if (r == 1) ++a1;
        rr += 1.0 / r;
    }
    CHECK(static_cast<double>(a1) / n == Catch::Approx(0.1).margin(0.01));
    CHECK(rr / n == Catch::Approx(0.29290).margin(0.01));  // H_10 / 10
}

TEST_CASE("toppop ranks by training frequency with index ties", "[models]") {
    std::vector<int> targets = {3, 3, 3, 1, 1, 7};
    auto model = fit_toppop(targets, 10);
    auto p = model->rank_trial({}, 0);
    CHECK(p.order[0] == 3);
    CHECK(p.order[1] == 1);
    CHECK(p.order[2] == 7);
    // remaining classes all have count zero: ascending index
    CHECK(p.order[3] == 0);
    CHECK(p.order[4] == 2);
    CHECK(p.scores[0] == 3.0);

    std::vector<int> one_class(5, 4);
    CHECK(fit_toppop(one_class, 10)->rank_trial({}, 0).order[0] == 4);

    std::vector<int> tied = {2, 5, 5, 2};
    CHECK(fit_toppop(tied, 10)->rank_trial({}, 0).order[0] == 2);

    CHECK_THROWS_AS(fit_toppop(std::vector<int>{}, 10), Error);
}

// ---- rank contract -----------------------------------------------------------

TEST_CASE("rank breaks score ties by ascending class index", "[models]") {
    SoftmaxRanker zero(4, 10, std::vector<double>(40, 0.0), std::vector<double>(10, 0.0), 0.0, 0);
    std::vector<double> x = {1.0, 0.0, 1.0, 0.0};
    auto p = rank(zero, x);
    for (int c = 0; c < 10; ++c) CHECK(p.order[static_cast<size_t>(c)] == c);

    // weights favoring class 7
    std::vector<double> w(40, 0.0);
    w[7 * 4 + 0] = 2.0;
    SoftmaxRanker seven(4, 10, std::move(w), std::vector<double>(10, 0.0), 0.0, 0);
    CHECK(rank(seven, x).order[0] == 7);

    std::vector<double> bad = {1.0, 0.0};
    CHECK_THROWS_AS(rank(seven, bad), Error);
}

// ---- softmax -------------------------------------------------------------------

TEST_CASE("softmax analytic gradient matches finite differences", "[models][oracle]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        DesignMatrix m = random_matrix(12, 5, 4, 100 + seed);
        CounterRng rng(seed);
        const int wn = 4 * 5;
        std::vector<double> W(wn), b(4);
        for (auto& v : W) v = rng.uniform(-1.0, 1.0);
        for (auto& v : b) v = rng.uniform(-0.5, 0.5);
        const double l2 = 0.05;

        std::vector<double> gw(wn), gb(4);
        softmax_gradient(m, W, b, l2, gw, gb);

        const double h = 1e-6;
        std::vector<double> num_w(wn), num_b(4);
        for (int k = 0; k < wn; ++k) {
            std::vector<double> wp = W, wm = W;
            wp[static_cast<size_t>(k)] += h;
            wm[static_cast<size_t>(k)] -= h;
            num_w[static_cast<size_t>(k)] =
                (softmax_objective(m, wp, b, l2) - softmax_objective(m, wm, b, l2)) / (2 * h);
        }
        for (int k = 0; k < 4; ++k) {
            std::vector<double> bp = b, bm = b;
            bp[static_cast<size_t>(k)] += h;
            bm[static_cast<size_t>(k)] -= h;
            num_b[static_cast<size_t>(k)] =
                (softmax_objective(m, W, bp, l2) - softmax_objective(m, W, bm, l2)) / (2 * h);
        }
        INFO("seed=" << seed);
        CHECK(vec_rel_err(gw, num_w) < 1e-6);
        CHECK(vec_rel_err(gb, num_b) < 1e-6);
    }
}

TEST_CASE("softmax separates a separable toy set", "[models]") {
    // two disjoint one-hot features decide the class; a separating weight
    // vector exists by brute force over sign patterns
    DesignMatrix m;
    m.width = 2;
    m.n_classes = 2;
    for (int i = 0; i < 20; ++i) {
        int cls = i % 2;
        m.values.push_back(cls == 0 ? 1.0 : 0.0);
        m.values.push_back(cls == 1 ? 1.0 : 0.0);
        m.targets.push_back(cls);
        m.trial_ids.push_back("t" + std::to_string(i));
        m.row_ids.push_back(i);
    }
    bool separable = false;
    for (double w00 : {-1.0, 1.0})
        for (double w11 : {-1.0, 1.0}) {
            bool all = true;
            for (int i = 0; i < m.rows(); ++i) {
                double s0 = w00 * m.row(i)[0];
                double s1 = w11 * m.row(i)[1];
                all = all && ((m.targets[static_cast<size_t>(i)] == 0) == (s0 > s1));
            }
            separable = separable || all;
        }
    REQUIRE(separable);

    auto model = fit_softmax(m, 1e-6);
    CHECK(train_a1(*model, m) == 1.0);
    // scores are a probability vector
    auto p = rank(*model, m.row(0), 0);
    double sum = 0.0;
    for (double s : p.scores) {
        CHECK(s >= 0.0);
        sum += s;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("full-batch softmax loss is non-increasing", "[models]") {
    DesignMatrix m = random_matrix(40, 6, 3, 9);
    SoftmaxOptions opt;
    opt.full_batch = true;
    opt.max_epochs = 300;
    opt.tol = 0.0;  // run the full budget
    std::vector<double> trace;
    fit_softmax(m, 0.01, opt, &trace);
    REQUIRE(trace.size() > 10);
    for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("stronger l2 never grows the converged weights", "[models]") {
    DesignMatrix m = random_matrix(30, 5, 3, 4);
    SoftmaxOptions opt;
    opt.full_batch = true;
    opt.max_epochs = 50000;
    opt.tol = 1e-13;
    double prev_norm = std::numeric_limits<double>::infinity();
    for (double l2 : {0.01, 0.1, 1.0}) {
        auto model = fit_softmax(m, l2, opt);
        double norm = 0.0;
        for (double w : model->weights()) norm += w * w;
        CHECK(norm <= prev_norm + 1e-9);
        prev_norm = norm;
    }
}

TEST_CASE("sag reaches the full-batch optimum on a small instance", "[models]") {
    DesignMatrix m = random_matrix(60, 6, 4, 11);
    SoftmaxOptions sag;
    sag.max_epochs = 4000;
    sag.tol = 1e-10;
    auto a = fit_softmax(m, 0.1, sag);

    SoftmaxOptions fb;
    fb.full_batch = true;
    fb.max_epochs = 100000;
    fb.tol = 1e-13;
    auto b = fit_softmax(m, 0.1, fb);

    double la = softmax_objective(m, a->weights(), a->bias(), 0.1);
    double lb = softmax_objective(m, b->weights(), b->bias(), 0.1);
    CHECK(la == Catch::Approx(lb).margin(1e-4));
}

// ---- gbdt -----------------------------------------------------------------------

TEST_CASE("zero boosting stages reproduce the prior ranking", "[models]") {
    DesignMatrix m = random_matrix(50, 4, 10, 3);
    GbdtOptions opt;
    opt.stages = 0;
    auto gbdt = fit_gbdt(m, 3, opt);
    auto toppop = fit_toppop(m.targets, 10);
    for (int i = 0; i < 5; ++i)
        CHECK(gbdt->rank_trial(m.row(i), i).order == toppop->rank_trial(m.row(i), i).order);
}

TEST_CASE("a single perfect feature is learned by stumps", "[models]") {
    DesignMatrix m;
    m.width = 3;
    m.n_classes = 2;
    CounterRng rng(6);
    for (int i = 0; i < 40; ++i) {
        int cls = i % 2;
        m.values.push_back(cls);                             // feature 0 = class
        m.values.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);  // noise
        m.values.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);  // noise
        m.targets.push_back(cls);
        m.trial_ids.push_back("t" + std::to_string(i));
        m.row_ids.push_back(i);
    }
    GbdtOptions opt;
    opt.stages = 10;
    opt.subsample = 1.0;
    auto model = fit_gbdt(m, 1, opt);
    CHECK(train_a1(*model, m) == 1.0);
}

TEST_CASE("training deviance is non-increasing without subsampling", "[models]") {
    DesignMatrix m = random_matrix(60, 8, 4, 13);
    GbdtOptions opt;
    opt.stages = 40;
    opt.subsample = 1.0;
    std::vector<double> deviance;
    fit_gbdt(m, 3, opt, &deviance);
    REQUIRE(deviance.size() == 40);
    for (size_t i = 1; i < deviance.size(); ++i) CHECK(deviance[i] <= deviance[i - 1] + 1e-12);
}

TEST_CASE("gbdt subsampling is seed-reproducible", "[models]") {
    DesignMatrix m = random_matrix(50, 6, 3, 15);
    GbdtOptions opt;
    opt.stages = 20;
    opt.seed = 99;
    auto a = fit_gbdt(m, 3, opt);
    auto b = fit_gbdt(m, 3, opt);
    CHECK(a->to_json() == b->to_json());
    opt.seed = 100;
    auto c = fit_gbdt(m, 3, opt);
    CHECK(a->to_json() != c->to_json());
}

// ---- mlp -------------------------------------------------------------------------

TEST_CASE("mlp analytic gradient matches finite differences", "[models][oracle]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        // continuous inputs and jittered biases keep pre-activations away
        // from the relu kink, where central differences are undefined
        DesignMatrix m;
        m.width = 4;
        m.n_classes = 3;
        CounterRng data_rng(200 + seed);
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 4; ++j) m.values.push_back(data_rng.uniform(0.0, 1.0));
            m.targets.push_back(static_cast<int>(data_rng.below(3)));
            m.trial_ids.push_back("t" + std::to_string(i));
            m.row_ids.push_back(i);
        }
        MlpParams p = mlp_init({4, 5, 5, 3}, seed);
        for (auto& b : p.biases)
            for (auto& v : b) v = data_rng.uniform(-0.3, 0.3);
        const double l2 = 0.01;
        MlpParams g = mlp_gradient(p, m, l2);

        const double h = 1e-5;
        std::vector<double> flat_got, flat_num;
        auto probe = [&](std::vector<double>& theta, const std::vector<double>& grad) {
            for (size_t k = 0; k < theta.size(); ++k) {
                double keep = theta[k];
                theta[k] = keep + h;
                double up = mlp_objective(p, m, l2);
                theta[k] = keep - h;
                double dn = mlp_objective(p, m, l2);
                theta[k] = keep;
                flat_got.push_back(grad[k]);
                flat_num.push_back((up - dn) / (2 * h));
            }
        };
        for (size_t l = 0; l < p.weights.size(); ++l) {
            probe(p.weights[l], g.weights[l]);
            probe(p.biases[l], g.biases[l]);
        }
        INFO("seed=" << seed);
        CHECK(vec_rel_err(flat_got, flat_num) < 1e-4);
    }
}

TEST_CASE("the relu net represents and learns xor", "[models]") {
    DesignMatrix m;
    m.width = 2;
    m.n_classes = 2;
    const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    for (int i = 0; i < 4; ++i) {
        m.values.push_back(pts[i][0]);
        m.values.push_back(pts[i][1]);
        m.targets.push_back(static_cast<int>(pts[i][0]) ^ static_cast<int>(pts[i][1]));
        m.trial_ids.push_back("t" + std::to_string(i));
        m.row_ids.push_back(i);
    }

    // hand-built witness: h1 = relu(x1-x2), h2 = relu(x2-x1), class 1 ~ h1+h2
    MlpParams witness;
    witness.sizes = {2, 2, 2};
    witness.weights = {{1.0, -1.0, -1.0, 1.0}, {-8.0, -8.0, 8.0, 8.0}};
    witness.biases = {{0.0, 0.0}, {4.0, -4.0}};
    MlpRanker fixed(std::move(witness), 0.0, 0);
    CHECK(train_a1(fixed, m) == 1.0);

    MlpOptions opt;
    opt.hidden = {200, 200};
    opt.max_epochs = 1000;
    opt.seed = 3;
    auto model = fit_mlp(m, 1e-5, opt);
    CHECK(train_a1(*model, m) == 1.0);

    auto p = rank(*model, m.row(0), 0);
    double sum = 0.0;
    for (double s : p.scores) {
        CHECK(s >= 0.0);
        sum += s;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("mlp fits are reproducible given the seed", "[models]") {
    DesignMatrix m = random_matrix(30, 5, 3, 77);
    MlpOptions opt;
    opt.hidden = {8};
    opt.max_epochs = 20;
    opt.seed = 5;
    auto a = fit_mlp(m, 1e-4, opt);
    auto b = fit_mlp(m, 1e-4, opt);
    CHECK(a->to_json() == b->to_json());
}

// ---- serialization -----------------------------------------------------------------

TEST_CASE("rankers round-trip through json", "[models]") {
    DesignMatrix m = random_matrix(40, 5, 4, 21);
    std::vector<std::unique_ptr<TrainedRanker>> models;
    models.push_back(fit_random(9, 4));
    models.push_back(fit_toppop(m.targets, 4));
    models.push_back(fit_softmax(m, 0.01));
    GbdtOptions gopt;
    gopt.stages = 5;
    models.push_back(fit_gbdt(m, 2, gopt));
    MlpOptions mopt;
    mopt.hidden = {6};
    mopt.max_epochs = 10;
    models.push_back(fit_mlp(m, 1e-4, mopt));

    for (const auto& model : models) {
        auto clone = ranker_from_json(model->to_json());
        REQUIRE(clone->kind() == model->kind());
        for (int i = 0; i < 10; ++i) {
            auto a = rank(*model, m.row(i), i);
            auto b = rank(*clone, m.row(i), i);
            CHECK(a.order == b.order);
        }
        CHECK(clone->to_json() == model->to_json());
    }
}
