#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctv/common.hpp"

namespace ctv {

// ---- categorical vocabularies ---------------------------------------------

enum class Genre : std::uint8_t {
    news,
    sport,
    movie,
    series,
    music,
    documentary,
    entertainment,
    childrens,
    user_generated,
    other,
};
inline constexpr int kGenreCount = 10;

enum class CompanionOption : std::uint8_t {
    alone,
    partner,
    child_young,
    child_old,
    sibling,
    parent,
    friend_,
    other,
};
inline constexpr int kCompanionCount = 8;

enum class Service : std::uint8_t {
    traditional,
    drtv,
    tv2play,
    viaplay,
    netflix,
    hbo,
    youtube,
    other,
};
inline constexpr int kServiceCount = 8;

enum class TimeOfDay : std::uint8_t { morning, noon, afternoon, evening, night };
inline constexpr int kTimeOfDayCount = 5;

enum class DayType : std::uint8_t { weekday, weekend_holiday };
inline constexpr int kDayTypeCount = 2;

inline constexpr int kViewerCountLevels = 5;  // 1,2,3,4,5plus
inline constexpr int kAttentionLevels = 5;    // 1..5

inline constexpr std::array<std::string_view, kGenreCount> kGenreTokens = {
    "news",          "sport",     "movie",         "series",    "music",
    "documentary",   "entertainment", "childrens", "user_generated", "other"};

inline constexpr std::array<std::string_view, kCompanionCount> kCompanionTokens = {
    "alone", "partner", "child_young", "child_old", "sibling", "parent", "friend", "other"};

inline constexpr std::array<std::string_view, kServiceCount> kServiceTokens = {
    "traditional", "drtv", "tv2play", "viaplay", "netflix", "hbo", "youtube", "other"};

inline constexpr std::array<std::string_view, kTimeOfDayCount> kTimeOfDayTokens = {
    "morning", "noon", "afternoon", "evening", "night"};

inline constexpr std::array<std::string_view, kDayTypeCount> kDayTypeTokens = {
    "weekday", "weekend_holiday"};

inline constexpr std::array<std::string_view, kViewerCountLevels> kViewerCountTokens = {
    "1", "2", "3", "4", "5plus"};

inline std::string_view token(Genre g) { return kGenreTokens[static_cast<size_t>(g)]; }
inline std::string_view token(CompanionOption c) { return kCompanionTokens[static_cast<size_t>(c)]; }
inline std::string_view token(Service s) { return kServiceTokens[static_cast<size_t>(s)]; }
inline std::string_view token(TimeOfDay t) { return kTimeOfDayTokens[static_cast<size_t>(t)]; }
inline std::string_view token(DayType d) { return kDayTypeTokens[static_cast<size_t>(d)]; }

template <typename E, size_t N>
std::optional<E> lookup_token(const std::array<std::string_view, N>& table, std::string_view tok) {
    for (size_t i = 0; i < N; ++i)
        if (table[i] == tok) return static_cast<E>(i);
    return std::nullopt;
}

inline std::optional<Genre> parse_genre(std::string_view t) {
    return lookup_token<Genre>(kGenreTokens, t);
}
inline std::optional<CompanionOption> parse_companion(std::string_view t) {
    return lookup_token<CompanionOption>(kCompanionTokens, t);
}
inline std::optional<Service> parse_service(std::string_view t) {
    return lookup_token<Service>(kServiceTokens, t);
}

// ---- civil time -------------------------------------------------------------

// Timestamps are local wall-clock values; no timezone arithmetic anywhere.
struct CivilDate {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    auto operator<=>(const CivilDate&) const = default;
};

struct CivilDateTime {
    CivilDate date;
    int hour = 0;
    int minute = 0;
    int second = 0;

    auto operator<=>(const CivilDateTime&) const = default;
};

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
    static constexpr int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return d[m - 1];
}

/// Days since 1970-01-01 (negative before). Standard civil-calendar algorithm.
inline long days_from_civil(const CivilDate& d) {
    long y = d.year;
    const int m = d.month;
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d.day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline CivilDate civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

/// 0 = Sunday .. 6 = Saturday (1970-01-01 was a Thursday).
inline int weekday(const CivilDate& d) {
    long z = days_from_civil(d);
    return static_cast<int>(((z + 4) % 7 + 7) % 7);
}

inline bool is_valid_date(int y, int m, int d) {
    return m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

inline std::optional<CivilDate> parse_date(std::string_view s) {
    // YYYY-MM-DD
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
    int y = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    int m = (s[5] - '0') * 10 + (s[6] - '0');
    int d = (s[8] - '0') * 10 + (s[9] - '0');
    if (!is_valid_date(y, m, d)) return std::nullopt;
    return CivilDate{y, m, d};
}

inline std::optional<CivilDateTime> parse_datetime(std::string_view s) {
    // YYYY-MM-DDTHH:MM:SS ('T' or space separator accepted)
    if (s.size() != 19 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
        return std::nullopt;
    auto date = parse_date(s.substr(0, 10));
    if (!date) return std::nullopt;
    for (size_t i : {11u, 12u, 14u, 15u, 17u, 18u})
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
    int h = (s[11] - '0') * 10 + (s[12] - '0');
    int mi = (s[14] - '0') * 10 + (s[15] - '0');
    int se = (s[17] - '0') * 10 + (s[18] - '0');
    if (h > 23 || mi > 59 || se > 59) return std::nullopt;
    return CivilDateTime{*date, h, mi, se};
}

inline std::string format_date(const CivilDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

inline std::string format_datetime(const CivilDateTime& t) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", t.date.year, t.date.month,
                  t.date.day, t.hour, t.minute, t.second);
    return buf;
}

class HolidayCalendar {
public:
    HolidayCalendar() = default;
    explicit HolidayCalendar(std::set<CivilDate> dates) : dates_(std::move(dates)) {}

    void add(const CivilDate& d) { dates_.insert(d); }
    bool contains(const CivilDate& d) const { return dates_.count(d) > 0; }
    size_t size() const { return dates_.size(); }
    const std::set<CivilDate>& dates() const { return dates_; }

private:
    std::set<CivilDate> dates_;
};

// ---- temporal derivations ---------------------------------------------------

/// Half-open wall-clock bins: morning [6,10), noon [10,14), afternoon [14,18),
/// evening [18,22), night [22,24) u [0,6).
inline TimeOfDay derive_time_of_day(int hour, int minute) {
    (void)minute;  // bins are whole hours; minute kept for the de facto signature
    if (hour >= 6 && hour < 10) return TimeOfDay::morning;
    if (hour >= 10 && hour < 14) return TimeOfDay::noon;
    if (hour >= 14 && hour < 18) return TimeOfDay::afternoon;
    if (hour >= 18 && hour < 22) return TimeOfDay::evening;
    return TimeOfDay::night;
}

inline TimeOfDay derive_time_of_day(const CivilDateTime& t) {
    return derive_time_of_day(t.hour, t.minute);
}

/// Saturdays, Sundays and calendar holidays are grouped together.
inline DayType derive_day_type(const CivilDate& d, const HolidayCalendar& cal) {
    int wd = weekday(d);
    if (wd == 0 || wd == 6) return DayType::weekend_holiday;
    if (cal.contains(d)) return DayType::weekend_holiday;
    return DayType::weekday;
}

// ---- records ----------------------------------------------------------------

/// Viewer count including the respondent, 1..5 with 5 meaning "5 or more".
using ViewerCount = int;

struct AnswerRecord {
    std::string answer_id;
    std::string user_id;
    CivilDateTime timestamp;
    bool watched = false;
    std::vector<CompanionOption> companions;  // sorted, unique
    std::optional<ViewerCount> viewer_count;
    std::vector<Genre> genres;    // sorted, unique
    std::vector<Service> services;  // sorted, unique
    std::optional<int> attention;  // 1..5

    bool operator==(const AnswerRecord&) const = default;
};

struct UserProfile {
    std::string user_id;
    std::string gender;
    std::string age_group;
    std::string language;
    std::string device_type;
    std::string household_size;
    std::string household_members;
    std::string watch_frequency;
    std::vector<Genre> favorite_genres;  // sorted, unique

    bool operator==(const UserProfile&) const = default;
};

struct ViewingEvent {
    std::string source_answer_id;
    std::string user_id;
    CivilDateTime timestamp;
    Genre genre = Genre::other;
    std::vector<CompanionOption> companions;
    ViewerCount viewer_count = 1;  // resolved, 1..5
    std::vector<Service> services;
    int attention = 1;  // 1..5
    TimeOfDay time_of_day = TimeOfDay::morning;
    DayType day_type = DayType::weekday;

    /// Unique, config-independent trial identifier.
    std::string event_id() const {
        return source_answer_id + ":" + std::string(token(genre));
    }
    bool is_social() const {
        return !(companions.size() == 1 && companions[0] == CompanionOption::alone);
    }

    bool operator==(const ViewingEvent&) const = default;
};

}  // namespace ctv
