#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "ctv/ingest.hpp"
#include "ctv/models.hpp"
#include "ctv/stats.hpp"
#include "ctv/synth.hpp"

using namespace ctv;

TEST_CASE("generated logs satisfy every record invariant", "[synth]") {
    SynthSpec spec = default_synth_spec(3);
    spec.users = 30;
    auto records = generate(spec);
    REQUIRE_FALSE(records.empty());
    // strict reparse enforces the invariants; must not throw
    std::ostringstream out;
    write_answers_csv(out, records);
    std::istringstream in(out.str());
    auto reparsed = parse_answers(in);
    CHECK(reparsed.size() == records.size());
}

TEST_CASE("same seed gives byte-identical output", "[synth]") {
    SynthSpec spec;
    spec.users = 12;
    spec.seed = 400;
    auto serialize = [](const SynthSpec& s) {
        std::ostringstream out;
        write_answers_csv(out, generate(s));
        return out.str();
    };
    CHECK(serialize(spec) == serialize(spec));
    SynthSpec other = spec;
    other.seed = 401;
    CHECK(serialize(spec) != serialize(other));
}

TEST_CASE("watched probability zero yields only negative answers", "[synth]") {
    SynthSpec spec;
    spec.users = 5;
    spec.watched_prob = 0.0;
    for (const auto& r : generate(spec)) CHECK_FALSE(r.watched);
}

TEST_CASE("genre frequencies converge to the marginal", "[synth]") {
    SynthSpec spec;
    spec.users = 250;
    spec.answers_min = 180;
    spec.answers_max = 220;
    spec.watched_prob = 1.0;
    spec.multi_genre_prob = 0.0;  // single draws: exact multinomial
    spec.seed = 17;
    auto events = split_events(generate(spec), {});
    const double n = static_cast<double>(events.size());
    REQUIRE(n > 50000);
    std::array<double, kGenreCount> freq{};
    for (const auto& ev : events) freq[static_cast<size_t>(ev.genre)] += 1.0;
    for (int g = 0; g < kGenreCount; ++g) {
        double p = spec.genre_marginals[static_cast<size_t>(g)];
        double sigma = std::sqrt(p * (1.0 - p) / n);
        INFO("genre " << token(static_cast<Genre>(g)));
        CHECK(std::fabs(freq[static_cast<size_t>(g)] / n - p) <= 3.0 * sigma);
    }
}

TEST_CASE("planting the series share rescales the marginal", "[synth]") {
    SynthSpec base;
    base.genre_marginals = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    SynthSpec planted = plant_series_share(base, 0.25);
    CHECK(planted.genre_marginals[static_cast<size_t>(Genre::series)] == Catch::Approx(0.25));
    for (int g = 0; g < kGenreCount; ++g)
        if (g != static_cast<int>(Genre::series))
            CHECK(planted.genre_marginals[static_cast<size_t>(g)] ==
                  Catch::Approx(0.75 / 9).epsilon(1e-12));

    CHECK_THROWS_AS(plant_series_share(base, 1.0), Error);
    CHECK_THROWS_AS(plant_series_share(base, 0.0), Error);

    // toppop on such data ranks series first at roughly the planted share
    planted.users = 150;
    planted.watched_prob = 1.0;
    planted.multi_genre_prob = 0.0;
    planted.seed = 5;
    auto events = split_events(generate(planted), {});
    std::vector<int> targets;
    for (const auto& ev : events) targets.push_back(static_cast<int>(ev.genre));
    auto top = fit_toppop(targets, kGenreCount);
    CHECK(top->rank_trial({}, 0).order[0] == static_cast<int>(Genre::series));
    long hits = 0;
    for (int t : targets)
        if (t == static_cast<int>(Genre::series)) ++hits;
    CHECK(static_cast<double>(hits) / targets.size() == Catch::Approx(0.25).margin(0.02));
}

TEST_CASE("planted independence keeps the association near zero", "[synth]") {
    SynthSpec spec;  // no conditional tables: genre independent of context
    spec.users = 120;
    spec.answers_min = 60;
    spec.answers_max = 80;
    spec.watched_prob = 0.9;
    spec.seed = 23;
    auto events = split_events(generate(spec), {});
    REQUIRE(events.size() > 5000);
    auto res = chi_square_test(contingency(events, ContextDim::time_of_day));
    CHECK(res.v < 0.05);
}

TEST_CASE("a deterministic slot-to-genre map saturates V", "[synth]") {
    SynthSpec spec;
    spec.users = 60;
    spec.watched_prob = 1.0;
    spec.multi_genre_prob = 0.0;
    spec.seed = 31;
    std::array<std::array<double, kGenreCount>, kTimeOfDayCount> table{};
    // morning->news, noon->sport, afternoon->movie, evening->series, night->music
    for (int slot = 0; slot < kTimeOfDayCount; ++slot)
        table[static_cast<size_t>(slot)][static_cast<size_t>(slot)] = 1.0;
    spec.genre_given_time = table;
    auto events = split_events(generate(spec), {});
    auto t = contingency(events, ContextDim::time_of_day);
    CHECK(t.rows() == 5);  // unseen genres drop out of the table
    CHECK(t.cols() == 5);
    auto res = chi_square_test(t);
    CHECK(res.v == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(res.p < 1e-12);
}

TEST_CASE("spec json round-trips and rejects bad distributions", "[synth]") {
    SynthSpec spec = default_synth_spec(9);
    spec.users = 10;
    spec.holidays.push_back(CivilDate{2017, 4, 13});
    nlohmann::json j = synth_spec_to_json(spec);
    SynthSpec back = synth_spec_from_json(j);
    auto a = generate(spec);
    auto b = generate(back);
    CHECK(a == b);

    nlohmann::json bad = synth_spec_to_json(spec);
    bad["genre_marginals"]["news"] = 0.9;  // no longer sums to one
    CHECK_THROWS_AS(synth_spec_from_json(bad), Error);

    SynthSpec neg;
    neg.watched_prob = -0.5;
    CHECK_THROWS_AS(validate(neg), Error);
    SynthSpec flipped;
    flipped.answers_min = 10;
    flipped.answers_max = 5;
    CHECK_THROWS_AS(validate(flipped), Error);
}
