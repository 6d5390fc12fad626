#include <catch2/catch_amalgamated.hpp>

#include "ctv/features.hpp"
#include "ctv/ingest.hpp"
#include "ctv/synth.hpp"

using namespace ctv;

namespace {

UserIndex users_n(int n) {
    std::vector<std::string> ids;
    for (int i = 1; i <= n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%03d", i);
        ids.push_back(buf);
    }
    return UserIndex::from_ids(std::move(ids));
}

ViewingEvent sample_event() {
    ViewingEvent ev;
    ev.source_answer_id = "a1";
    ev.user_id = "u002";
    ev.timestamp = CivilDateTime{{2017, 3, 8}, 20, 15, 0};
    ev.genre = Genre::series;
    ev.companions = {CompanionOption::partner, CompanionOption::friend_};
    ev.viewer_count = 3;
    ev.services = {Service::netflix};
    ev.attention = 3;
    ev.time_of_day = TimeOfDay::evening;
    ev.day_type = DayType::weekday;
    return ev;
}

int popcount(std::span<const double> x, int from, int width) {
    int c = 0;
    for (int i = from; i < from + width; ++i)
        if (x[static_cast<size_t>(i)] != 0.0) ++c;
    return c;
}

}  // namespace

TEST_CASE("presets resolve to canonical dimension sets", "[features]") {
    CHECK(preset("all").letters() == "UTDWMA");
    CHECK(preset("all+S").letters() == "UTDWMSA");
    CHECK(preset("all-U").letters() == "TDWMA");
    CHECK(preset("TD").letters() == "TD");
    CHECK(preset("TDW").letters() == "TDW");
    CHECK(preset("WA").letters() == "WA");
    CHECK(preset("U").letters() == "U");
    CHECK(preset("UTD").letters() == "UTD");
    CHECK(preset("UWA").letters() == "UWA");
    // literal spellings canonicalize block order
    CHECK(preset("DTU").letters() == "UTD");
    CHECK(preset("AMS").letters() == "MSA");

    CHECK_THROWS_AS(preset("UTX"), Error);
    CHECK_THROWS_AS(preset(""), Error);
    CHECK_THROWS_AS(preset("UU"), Error);
}

TEST_CASE("config widths match the published table", "[features]") {
    UserIndex users = users_n(118);
    CHECK(dimension(preset("all"), users) == 143);
    CHECK(dimension(preset("all+S"), users) == 151);
    CHECK(dimension(preset("all-U"), users) == 25);
    CHECK(dimension(preset("U"), users) == 118);
    CHECK(dimension(preset("TD"), users) == 7);
    CHECK(dimension(preset("WA"), users) == 13);
}

TEST_CASE("encode places one-hot and multi-hot blocks", "[features]") {
    UserIndex users = users_n(3);
    ViewingEvent ev = sample_event();

    auto x = encode(ev, preset("all+S"), users);
    REQUIRE(static_cast<int>(x.size()) == 3 + 5 + 2 + 8 + 5 + 8 + 5);
    int base = 0;
    CHECK(popcount(x, base, 3) == 1);
    CHECK(x[1] == 1.0);  // u002 sorts second
    base += 3;
    CHECK(popcount(x, base, 5) == 1);
    CHECK(x[static_cast<size_t>(base + static_cast<int>(TimeOfDay::evening))] == 1.0);
    base += 5;
    CHECK(popcount(x, base, 2) == 1);
    base += 2;
    CHECK(popcount(x, base, 8) == 2);  // two companions
    CHECK(x[static_cast<size_t>(base + static_cast<int>(CompanionOption::partner))] == 1.0);
    CHECK(x[static_cast<size_t>(base + static_cast<int>(CompanionOption::friend_))] == 1.0);
    base += 8;
    CHECK(popcount(x, base, 5) == 1);
    CHECK(x[static_cast<size_t>(base + 2)] == 1.0);  // three viewers
    base += 5;
    CHECK(popcount(x, base, 8) == 1);
    base += 8;
    // attention 3 -> (0,0,1,0,0)
    CHECK(x[static_cast<size_t>(base + 2)] == 1.0);
    CHECK(popcount(x, base, 5) == 1);
}

TEST_CASE("alone viewer encodes M at count one", "[features]") {
    UserIndex users = users_n(1);
    ViewingEvent ev = sample_event();
    ev.user_id = "u001";
    ev.companions = {CompanionOption::alone};
    ev.viewer_count = 1;
    auto x = encode(ev, preset("M"), users);
    REQUIRE(x.size() == 5);
    CHECK(x[0] == 1.0);
    CHECK(popcount(x, 0, 5) == 1);
}

TEST_CASE("encode rejects unknown users", "[features]") {
    UserIndex users = users_n(2);
    ViewingEvent ev = sample_event();
    ev.user_id = "stranger";
    try {
        encode(ev, preset("U"), users);
        FAIL("expected UnknownUser");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownUser);
    }
}

TEST_CASE("build_matrix has row-width and target invariants", "[features]") {
    UserIndex users = users_n(3);
    ViewingEvent ev = sample_event();
    DesignMatrix m = build_matrix({ev}, preset("TD"), users);
    REQUIRE(m.rows() == 1);
    REQUIRE(m.width == 7);
    CHECK(popcount(m.row(0), 0, 7) == 2);
    CHECK(m.targets[0] == static_cast<int>(Genre::series));
    CHECK(m.trial_ids[0] == "a1:series");

    DesignMatrix empty = build_matrix({}, preset("all"), users_n(118));
    CHECK(empty.rows() == 0);
    CHECK(empty.width == 143);
}

TEST_CASE("block popcounts hold on generated data", "[features]") {
    SynthSpec spec;
    spec.users = 30;
    spec.seed = 21;
    auto records = generate(spec);
    auto events = split_events(records, {});
    UserIndex users = UserIndex::from_events(events);
    FeatureConfig cfg = preset("all+S");
    DesignMatrix m = build_matrix(events, cfg, users);
    REQUIRE(m.rows() == static_cast<int>(events.size()));
    REQUIRE(m.width == dimension(cfg, users));
    const int u = users.size();
    for (int i = 0; i < m.rows(); ++i) {
        auto x = m.row(i);
        const auto& ev = events[static_cast<size_t>(i)];
        int base = 0;
        CHECK(popcount(x, base, u) == 1);
        base += u;
        CHECK(popcount(x, base, 5) == 1);
        base += 5;
        CHECK(popcount(x, base, 2) == 1);
        base += 2;
        CHECK(popcount(x, base, 8) == static_cast<int>(ev.companions.size()));
        base += 8;
        CHECK(popcount(x, base, 5) == 1);
        base += 5;
        CHECK(popcount(x, base, 8) == static_cast<int>(ev.services.size()));
        base += 8;
        CHECK(popcount(x, base, 5) == 1);
    }
}

TEST_CASE("excluded dimensions do not leak into the encoding", "[features]") {
    UserIndex users = users_n(2);
    ViewingEvent a = sample_event();
    a.user_id = "u001";
    ViewingEvent b = a;
    b.attention = 5;                          // not in TD
    b.services = {Service::youtube};          // not in TD
    b.companions = {CompanionOption::alone};  // not in TD
    b.viewer_count = 1;
    CHECK(encode(a, preset("TD"), users) == encode(b, preset("TD"), users));

    ViewingEvent c = a;
    c.time_of_day = TimeOfDay::night;
    CHECK(encode(a, preset("TD"), users) != encode(c, preset("TD"), users));
}
