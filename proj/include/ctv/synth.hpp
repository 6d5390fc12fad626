#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctv/ingest.hpp"
#include "ctv/rng.hpp"

namespace ctv {

/// Generator spec for canonical-format answer logs with plantable
/// context -> genre dependencies. All distributions must be normalized.
struct SynthSpec {
    std::uint64_t seed = 1;
    int users = 118;
    int answers_min = 40;
    int answers_max = 70;
    CivilDate start_date{2017, 3, 1};
    int days = 36;
    std::vector<CivilDate> holidays;
    double watched_prob = 0.362;
    double multi_genre_prob = 0.325;
    std::array<double, kGenreCount> genre_marginals{0.12, 0.07, 0.08, 0.25, 0.06,
                                                    0.07, 0.13, 0.08, 0.07, 0.07};
    std::optional<std::array<std::array<double, kGenreCount>, kTimeOfDayCount>> genre_given_time;
    std::optional<std::array<std::array<double, kGenreCount>, 2>> genre_given_social;  // [alone, social]
    std::array<double, kTimeOfDayCount> time_of_day{0.167, 0.197, 0.184, 0.248, 0.204};
    double alone_prob = 0.43;
    std::array<double, kCompanionCount> companions{0.0, 0.45, 0.12, 0.06,
                                                   0.08, 0.10, 0.14, 0.05};  // alone unused
    double extra_companion_prob = 0.2;
    std::array<double, 4> viewer_count_social{0.55, 0.25, 0.12, 0.08};  // 2,3,4,5plus
    std::array<double, kServiceCount> services{0.30, 0.12, 0.08, 0.07, 0.22, 0.05, 0.12, 0.04};
    double extra_service_prob = 0.1;
    std::array<double, kAttentionLevels> attention{0.08, 0.15, 0.25, 0.30, 0.22};
};

namespace detail {

template <size_t N>
void check_distribution(const std::array<double, N>& d, const char* name) {
    double sum = 0.0;
    for (double v : d) {
        if (v < 0.0 || v > 1.0 || !std::isfinite(v))
            throw Error(ErrorCode::InvalidSpec, std::string(name) + " has probability outside [0,1]");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
        throw Error(ErrorCode::InvalidSpec,
                    std::string(name) + " not normalized (sum " + std::to_string(sum) + ")");
}

inline void check_prob(double p, const char* name) {
    if (p < 0.0 || p > 1.0 || !std::isfinite(p))
        throw Error(ErrorCode::InvalidSpec, std::string(name) + " outside [0,1]");
}

}  // namespace detail

inline void validate(const SynthSpec& s) {
    if (s.users < 1) throw Error(ErrorCode::InvalidSpec, "users must be >= 1");
    if (s.answers_min < 1 || s.answers_max < s.answers_min)
        throw Error(ErrorCode::InvalidSpec, "bad answers_per_user range");
    if (s.days < 1) throw Error(ErrorCode::InvalidSpec, "days must be >= 1");
    detail::check_prob(s.watched_prob, "watched_prob");
    detail::check_prob(s.multi_genre_prob, "multi_genre_prob");
    detail::check_prob(s.alone_prob, "alone_prob");
    detail::check_prob(s.extra_companion_prob, "extra_companion_prob");
    detail::check_prob(s.extra_service_prob, "extra_service_prob");
    detail::check_distribution(s.genre_marginals, "genre_marginals");
    detail::check_distribution(s.time_of_day, "time_of_day");
    detail::check_distribution(s.viewer_count_social, "viewer_count");
    detail::check_distribution(s.attention, "attention");
    detail::check_distribution(s.services, "services");
    // companions excludes `alone`; the remaining seven options must sum to 1
    double sum = 0.0;
    for (size_t i = 1; i < s.companions.size(); ++i) sum += s.companions[i];
    if (std::fabs(sum - 1.0) > 1e-6 || s.companions[0] != 0.0)
        throw Error(ErrorCode::InvalidSpec, "companions must be normalized over non-alone options");
    if (s.genre_given_time)
        for (const auto& row : *s.genre_given_time)
            detail::check_distribution(row, "genre_given_time");
    if (s.genre_given_social)
        for (const auto& row : *s.genre_given_social)
            detail::check_distribution(row, "genre_given_social");
}

/// Rescales the genre marginal so `series` holds `share` of the mass, the
/// rest renormalized proportionally.
inline SynthSpec plant_series_share(SynthSpec spec, double share = 0.25) {
    if (!(share > 0.0 && share < 1.0))
        throw Error(ErrorCode::InvalidSpec, "series share must be inside (0,1)");
    const size_t series = static_cast<size_t>(Genre::series);
    double rest = 1.0 - spec.genre_marginals[series];
    if (rest <= 0.0)
        throw Error(ErrorCode::InvalidSpec, "marginal has no mass outside series");
    double scale = (1.0 - share) / rest;
    for (size_t g = 0; g < spec.genre_marginals.size(); ++g)
        spec.genre_marginals[g] = g == series ? share : spec.genre_marginals[g] * scale;
    return spec;
}

namespace detail {

/// Conditional genre distribution for one (slot, social) cell. With both
/// tables present the factors combine naive-Bayes style over the marginal.
inline std::array<double, kGenreCount> genre_distribution(const SynthSpec& s, int slot,
                                                          bool social) {
    if (s.genre_given_time && s.genre_given_social) {
        std::array<double, kGenreCount> w{};
        double sum = 0.0;
        for (int g = 0; g < kGenreCount; ++g) {
            double base = s.genre_marginals[static_cast<size_t>(g)];
            double v = base <= 0.0 ? 0.0
                                   : (*s.genre_given_time)[static_cast<size_t>(slot)][static_cast<size_t>(g)] *
                                         (*s.genre_given_social)[social ? 1 : 0][static_cast<size_t>(g)] /
                                         base;
            w[static_cast<size_t>(g)] = v;
            sum += v;
        }
        if (sum <= 0.0) return s.genre_marginals;
        for (double& v : w) v /= sum;
        return w;
    }
    if (s.genre_given_time) return (*s.genre_given_time)[static_cast<size_t>(slot)];
    if (s.genre_given_social) return (*s.genre_given_social)[social ? 1 : 0];
    return s.genre_marginals;
}

inline int minute_in_slot(TimeOfDay slot, CounterRng& rng) {
    // minutes since midnight; the night slot wraps past midnight
    switch (slot) {
        case TimeOfDay::morning: return 360 + static_cast<int>(rng.below(240));
        case TimeOfDay::noon: return 600 + static_cast<int>(rng.below(240));
        case TimeOfDay::afternoon: return 840 + static_cast<int>(rng.below(240));
        case TimeOfDay::evening: return 1080 + static_cast<int>(rng.below(240));
        case TimeOfDay::night: {
            int m = static_cast<int>(rng.below(480));
            return m < 120 ? 1320 + m : m - 120;
        }
    }
    return 0;
}

}  // namespace detail

/// Deterministic generation: every answer is sampled from a counter stream
/// keyed by (seed, user, answer index), so output is independent of
/// evaluation order.
inline std::vector<AnswerRecord> generate(const SynthSpec& spec) {
    validate(spec);
    CounterRng root(spec.seed);
    std::vector<AnswerRecord> all;
    long next_id = 1;
    for (int u = 0; u < spec.users; ++u) {
        CounterRng user_rng = root.derive(0xc0de, static_cast<std::uint64_t>(u));
        int count = spec.answers_min +
                    static_cast<int>(user_rng.below(
                        static_cast<std::uint64_t>(spec.answers_max - spec.answers_min + 1)));
        char uid[16];
        std::snprintf(uid, sizeof(uid), "u%03d", u + 1);

        std::vector<AnswerRecord> answers;
        answers.reserve(static_cast<size_t>(count));
        for (int a = 0; a < count; ++a) {
            CounterRng rng = root.derive(0xa125, static_cast<std::uint64_t>(u),
                                         static_cast<std::uint64_t>(a));
            AnswerRecord rec;
            rec.user_id = uid;

            long day = days_from_civil(spec.start_date) + static_cast<long>(rng.below(
                                                              static_cast<std::uint64_t>(spec.days)));
            int slot = rng.discrete(spec.time_of_day);
            int minute = detail::minute_in_slot(static_cast<TimeOfDay>(slot), rng);
            rec.timestamp = CivilDateTime{civil_from_days(day), minute / 60, minute % 60,
                                          static_cast<int>(rng.below(60))};

            rec.watched = rng.bernoulli(spec.watched_prob);
            if (rec.watched) {
                bool social = !rng.bernoulli(spec.alone_prob);
                if (!social) {
                    rec.companions = {CompanionOption::alone};
                } else {
                    int first = rng.discrete(spec.companions);
                    rec.companions = {static_cast<CompanionOption>(first)};
                    if (rng.bernoulli(spec.extra_companion_prob)) {
                        for (int tries = 0; tries < 8; ++tries) {
                            int extra = rng.discrete(spec.companions);
                            if (extra != first) {
                                rec.companions.push_back(static_cast<CompanionOption>(extra));
                                break;
                            }
                        }
                    }
                    rec.viewer_count = 2 + rng.discrete(spec.viewer_count_social);  // 2..5plus
                }

                auto genre_dist = detail::genre_distribution(spec, slot, social);
                int g1 = rng.discrete(genre_dist);
                rec.genres = {static_cast<Genre>(g1)};
                if (rng.bernoulli(spec.multi_genre_prob)) {
                    for (int tries = 0; tries < 16; ++tries) {
                        int g2 = rng.discrete(genre_dist);
                        if (g2 != g1) {
                            rec.genres.push_back(static_cast<Genre>(g2));
                            break;
                        }
                    }
                }

                int s1 = rng.discrete(spec.services);
                rec.services = {static_cast<Service>(s1)};
                if (rng.bernoulli(spec.extra_service_prob)) {
                    for (int tries = 0; tries < 8; ++tries) {
                        int s2 = rng.discrete(spec.services);
                        if (s2 != s1) {
                            rec.services.push_back(static_cast<Service>(s2));
                            break;
                        }
                    }
                }
                rec.attention = 1 + rng.discrete(spec.attention);

                std::sort(rec.companions.begin(), rec.companions.end());
                std::sort(rec.genres.begin(), rec.genres.end());
                std::sort(rec.services.begin(), rec.services.end());
            }
            answers.push_back(std::move(rec));
        }
        std::stable_sort(answers.begin(), answers.end(),
                         [](const AnswerRecord& a, const AnswerRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
        for (auto& rec : answers) {
            char aid[24];
            std::snprintf(aid, sizeof(aid), "a%06ld", next_id++);
            rec.answer_id = aid;
            all.push_back(std::move(rec));
        }
    }
    return all;
}

inline std::vector<UserProfile> generate_profiles(const SynthSpec& spec) {
    validate(spec);
    CounterRng root(spec.seed);
    static constexpr std::array<std::string_view, 5> ages = {"13-20", "21-30", "31-40", "41-50",
                                                             "51-70"};
    static constexpr std::array<double, 5> age_w = {0.12, 0.57, 0.14, 0.09, 0.08};
    std::vector<UserProfile> profiles;
    for (int u = 0; u < spec.users; ++u) {
        CounterRng rng = root.derive(0x9e0f, static_cast<std::uint64_t>(u));
        char uid[16];
        std::snprintf(uid, sizeof(uid), "u%03d", u + 1);
        UserProfile p;
        p.user_id = uid;
        p.gender = rng.bernoulli(0.543) ? "male" : "female";
        p.age_group = std::string(ages[static_cast<size_t>(rng.discrete(age_w))]);
        p.language = rng.bernoulli(0.85) ? "danish" : "english";
        p.device_type = rng.bernoulli(0.7) ? "mobile" : "desktop";
        int household = 1 + static_cast<int>(rng.below(5));
        p.household_size = std::to_string(household);
        p.household_members = household > 1 ? "partner" : "";
        double w = rng.next_unit();
        p.watch_frequency = w < 0.81 ? "daily" : (w < 0.97 ? "weekly" : "rarely");
        int favorites = 1 + static_cast<int>(rng.below(4));
        for (int f = 0; f < favorites; ++f)
            p.favorite_genres.push_back(static_cast<Genre>(rng.discrete(spec.genre_marginals)));
        std::sort(p.favorite_genres.begin(), p.favorite_genres.end());
        p.favorite_genres.erase(std::unique(p.favorite_genres.begin(), p.favorite_genres.end()),
                                p.favorite_genres.end());
        profiles.push_back(std::move(p));
    }
    return profiles;
}

// ---- JSON spec ---------------------------------------------------------------

namespace detail {

template <size_t N>
nlohmann::json dist_to_json(const std::array<double, N>& d,
                            const std::array<std::string_view, N>& tokens) {
    nlohmann::json j = nlohmann::json::object();
    for (size_t i = 0; i < N; ++i) j[std::string(tokens[i])] = d[i];
    return j;
}

template <size_t N>
void dist_from_json(const nlohmann::json& j, const std::array<std::string_view, N>& tokens,
                    std::array<double, N>& out, const char* name) {
    out.fill(0.0);
    for (const auto& [key, value] : j.items()) {
        bool found = false;
        for (size_t i = 0; i < N; ++i)
            if (tokens[i] == key) {
                out[i] = value.template get<double>();
                found = true;
            }
        if (!found)
            throw Error(ErrorCode::InvalidSpec,
                        std::string(name) + ": unknown token '" + key + "'");
    }
}

}  // namespace detail

inline nlohmann::json synth_spec_to_json(const SynthSpec& s) {
    nlohmann::json j;
    j["seed"] = s.seed;
    j["users"] = s.users;
    j["answers_per_user"] = {{"min", s.answers_min}, {"max", s.answers_max}};
    j["start_date"] = format_date(s.start_date);
    j["days"] = s.days;
    nlohmann::json hol = nlohmann::json::array();
    for (const auto& d : s.holidays) hol.push_back(format_date(d));
    j["holidays"] = hol;
    j["watched_prob"] = s.watched_prob;
    j["multi_genre_prob"] = s.multi_genre_prob;
    j["genre_marginals"] = detail::dist_to_json(s.genre_marginals, kGenreTokens);
    if (s.genre_given_time) {
        nlohmann::json t = nlohmann::json::object();
        for (int slot = 0; slot < kTimeOfDayCount; ++slot)
            t[std::string(kTimeOfDayTokens[static_cast<size_t>(slot)])] = detail::dist_to_json(
                (*s.genre_given_time)[static_cast<size_t>(slot)], kGenreTokens);
        j["genre_given_time"] = t;
    }
    if (s.genre_given_social) {
        j["genre_given_social"] = {
            {"alone", detail::dist_to_json((*s.genre_given_social)[0], kGenreTokens)},
            {"social", detail::dist_to_json((*s.genre_given_social)[1], kGenreTokens)}};
    }
    j["time_of_day"] = detail::dist_to_json(s.time_of_day, kTimeOfDayTokens);
    j["alone_prob"] = s.alone_prob;
    j["companions"] = detail::dist_to_json(s.companions, kCompanionTokens);
    j["extra_companion_prob"] = s.extra_companion_prob;
    j["viewer_count"] = detail::dist_to_json(
        s.viewer_count_social,
        std::array<std::string_view, 4>{"2", "3", "4", "5plus"});
    j["services"] = detail::dist_to_json(s.services, kServiceTokens);
    j["extra_service_prob"] = s.extra_service_prob;
    j["attention"] = detail::dist_to_json(
        s.attention, std::array<std::string_view, 5>{"1", "2", "3", "4", "5"});
    return j;
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec s;
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("users")) s.users = j["users"].get<int>();
    if (j.contains("answers_per_user")) {
        s.answers_min = j["answers_per_user"].at("min").get<int>();
        s.answers_max = j["answers_per_user"].at("max").get<int>();
    }
    if (j.contains("start_date")) {
        auto d = parse_date(j["start_date"].get<std::string>());
        if (!d) throw Error(ErrorCode::InvalidSpec, "bad start_date");
        s.start_date = *d;
    }
    if (j.contains("days")) s.days = j["days"].get<int>();
    if (j.contains("holidays"))
        for (const auto& h : j["holidays"]) {
            auto d = parse_date(h.get<std::string>());
            if (!d) throw Error(ErrorCode::InvalidSpec, "bad holiday date");
            s.holidays.push_back(*d);
        }
    if (j.contains("watched_prob")) s.watched_prob = j["watched_prob"].get<double>();
    if (j.contains("multi_genre_prob")) s.multi_genre_prob = j["multi_genre_prob"].get<double>();
    if (j.contains("genre_marginals"))
        detail::dist_from_json(j["genre_marginals"], kGenreTokens, s.genre_marginals,
                               "genre_marginals");
    if (j.contains("genre_given_time")) {
        std::array<std::array<double, kGenreCount>, kTimeOfDayCount> table{};
        for (int slot = 0; slot < kTimeOfDayCount; ++slot) {
            const std::string key(kTimeOfDayTokens[static_cast<size_t>(slot)]);
            if (!j["genre_given_time"].contains(key))
                throw Error(ErrorCode::InvalidSpec, "genre_given_time missing slot " + key);
            detail::dist_from_json(j["genre_given_time"][key], kGenreTokens,
                                   table[static_cast<size_t>(slot)], "genre_given_time");
        }
        s.genre_given_time = table;
    }
    if (j.contains("genre_given_social")) {
        std::array<std::array<double, kGenreCount>, 2> table{};
        detail::dist_from_json(j["genre_given_social"].at("alone"), kGenreTokens, table[0],
                               "genre_given_social");
        detail::dist_from_json(j["genre_given_social"].at("social"), kGenreTokens, table[1],
                               "genre_given_social");
        s.genre_given_social = table;
    }
    if (j.contains("time_of_day"))
        detail::dist_from_json(j["time_of_day"], kTimeOfDayTokens, s.time_of_day, "time_of_day");
    if (j.contains("alone_prob")) s.alone_prob = j["alone_prob"].get<double>();
    if (j.contains("companions"))
        detail::dist_from_json(j["companions"], kCompanionTokens, s.companions, "companions");
    if (j.contains("extra_companion_prob"))
        s.extra_companion_prob = j["extra_companion_prob"].get<double>();
    if (j.contains("viewer_count"))
        detail::dist_from_json(j["viewer_count"],
                               std::array<std::string_view, 4>{"2", "3", "4", "5plus"},
                               s.viewer_count_social, "viewer_count");
    if (j.contains("services"))
        detail::dist_from_json(j["services"], kServiceTokens, s.services, "services");
    if (j.contains("extra_service_prob"))
        s.extra_service_prob = j["extra_service_prob"].get<double>();
    if (j.contains("attention"))
        detail::dist_from_json(j["attention"],
                               std::array<std::string_view, 5>{"1", "2", "3", "4", "5"},
                               s.attention, "attention");
    validate(s);
    return s;
}

/// Default spec shaped like the headline dataset: 118 users, ~55 answers
/// each, series at a quarter of the watched mass, social share 0.57, and
/// mild time/social tilts so the association tests have something to find.
inline SynthSpec default_synth_spec(std::uint64_t seed = 1) {
    SynthSpec s;
    s.seed = seed;

    auto tilt_row = [&](std::array<double, kGenreCount> mult) {
        std::array<double, kGenreCount> row{};
        double sum = 0.0;
        for (int g = 0; g < kGenreCount; ++g) {
            row[static_cast<size_t>(g)] =
                s.genre_marginals[static_cast<size_t>(g)] * mult[static_cast<size_t>(g)];
            sum += row[static_cast<size_t>(g)];
        }
        for (double& v : row) v /= sum;
        return row;
    };
    // order: news sport movie series music documentary entertainment childrens user_gen other
    std::array<std::array<double, kGenreCount>, kTimeOfDayCount> by_time = {
        tilt_row({2.2, 0.6, 0.3, 0.8, 1.0, 0.7, 0.8, 1.6, 1.2, 1.0}),   // morning
        tilt_row({1.3, 0.9, 0.5, 0.9, 1.2, 0.9, 1.1, 1.4, 1.2, 1.0}),   // noon
        tilt_row({0.9, 1.5, 0.7, 0.9, 1.2, 1.0, 1.1, 1.5, 1.1, 1.0}),   // afternoon
        tilt_row({1.1, 1.1, 1.2, 1.2, 0.8, 1.2, 1.1, 0.6, 0.7, 1.0}),   // evening
        tilt_row({0.5, 0.7, 1.6, 1.2, 0.9, 1.1, 0.9, 0.2, 1.1, 1.0}),   // night
    };
    s.genre_given_time = by_time;
    std::array<std::array<double, kGenreCount>, 2> by_social = {
        tilt_row({1.3, 0.8, 0.8, 1.0, 1.1, 1.2, 0.9, 0.3, 1.9, 1.0}),   // alone
        tilt_row({0.8, 1.2, 1.2, 1.0, 0.9, 0.9, 1.1, 1.6, 0.4, 1.0}),   // social
    };
    s.genre_given_social = by_social;
    return s;
}

}  // namespace ctv
