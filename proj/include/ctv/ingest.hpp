#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ctv/csv.hpp"
#include "ctv/domain.hpp"

namespace ctv {

inline constexpr std::array<std::string_view, 9> kAnswerHeader = {
    "answer_id", "user_id", "timestamp", "q1", "q2", "q3", "q4", "q5", "q6"};

inline constexpr std::array<std::string_view, 9> kProfileHeader = {
    "user_id",        "gender",            "age_group",       "language", "device_type",
    "household_size", "household_members", "watch_frequency", "favorite_genres"};

/// Adapts a foreign file to the canonical schema. Lines:
///   column.<foreign_header>=<canonical_column>
///   token.<column>.<foreign_token>=<canonical_token>
struct RemapConfig {
    std::map<std::string, std::string> columns;                      // foreign -> canonical
    std::map<std::string, std::map<std::string, std::string>> tokens;  // column -> foreign -> canonical

    static RemapConfig parse(std::istream& in) {
        RemapConfig cfg;
        for (const auto& [key, value] : read_kv_file(in)) {
            auto parts = split(key, '.');
            if (parts.size() == 2 && parts[0] == "column") {
                cfg.columns[parts[1]] = value;
            } else if (parts.size() == 3 && parts[0] == "token") {
                cfg.tokens[parts[1]][parts[2]] = value;
            } else {
                throw Error(ErrorCode::MalformedRow, "unrecognized remap key: " + key);
            }
        }
        return cfg;
    }

    std::string column(const std::string& header) const {
        auto it = columns.find(header);
        return it == columns.end() ? header : it->second;
    }
    std::string token(const std::string& col, const std::string& tok) const {
        auto outer = tokens.find(col);
        if (outer == tokens.end()) return tok;
        auto it = outer->second.find(tok);
        return it == outer->second.end() ? tok : it->second;
    }
};

struct ParseIssue {
    long row = 0;
    ErrorCode code = ErrorCode::MalformedRow;
    std::string message;
};

namespace detail {

/// Free text attached to the catch-all option is dropped; the category is kept.
inline std::string strip_other_payload(const std::string& tok) {
    if (tok.rfind("other:", 0) == 0 || tok.rfind("other ", 0) == 0) return "other";
    return tok;
}

template <typename E, size_t N>
std::vector<E> parse_token_set(const std::string& cell, const std::array<std::string_view, N>& table,
                               const RemapConfig& remap, const std::string& column, long row) {
    std::vector<E> out;
    if (trim(cell).empty()) return out;
    for (const std::string& raw : split(cell, '|')) {
        std::string tok = strip_other_payload(remap.token(column, trim(raw)));
        auto v = lookup_token<E>(table, tok);
        if (!v) throw Error(ErrorCode::UnknownToken, column + " token '" + tok + "'", row);
        out.push_back(*v);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline std::vector<int> resolve_columns(const CsvRow& header, const RemapConfig& remap,
                                        std::span<const std::string_view> canonical) {
    std::vector<int> pos(canonical.size(), -1);
    for (size_t i = 0; i < header.fields.size(); ++i) {
        std::string name = remap.column(trim(header.fields[i]));
        for (size_t j = 0; j < canonical.size(); ++j)
            if (name == canonical[j]) pos[j] = static_cast<int>(i);
    }
    for (size_t j = 0; j < canonical.size(); ++j)
        if (pos[j] < 0)
            throw Error(ErrorCode::MalformedRow,
                        "missing column '" + std::string(canonical[j]) + "'", header.line);
    return pos;
}

inline AnswerRecord parse_answer_row(const CsvRow& row, const std::vector<int>& pos,
                                     const RemapConfig& remap) {
    auto cell = [&](int canonical_index) -> std::string {
        return trim(row.fields[static_cast<size_t>(pos[static_cast<size_t>(canonical_index)])]);
    };
    AnswerRecord rec;
    rec.answer_id = cell(0);
    rec.user_id = cell(1);
    if (rec.answer_id.empty() || rec.user_id.empty())
        throw Error(ErrorCode::MalformedRow, "empty answer_id or user_id", row.line);

    auto ts = parse_datetime(cell(2));
    if (!ts) throw Error(ErrorCode::BadTimestamp, "'" + cell(2) + "'", row.line);
    rec.timestamp = *ts;

    std::string q1 = remap.token("q1", cell(3));
    if (q1 == "yes")
        rec.watched = true;
    else if (q1 == "no")
        rec.watched = false;
    else
        throw Error(ErrorCode::UnknownToken, "q1 token '" + q1 + "'", row.line);

    rec.companions =
        parse_token_set<CompanionOption>(cell(4), kCompanionTokens, remap, "q2", row.line);

    std::string q3 = remap.token("q3", cell(5));
    if (!q3.empty()) {
        auto v = lookup_token<int>(kViewerCountTokens, q3);
        if (!v) throw Error(ErrorCode::UnknownToken, "q3 token '" + q3 + "'", row.line);
        rec.viewer_count = static_cast<int>(*v) + 1;  // token index -> count, 5 = 5plus
    }

    rec.genres = parse_token_set<Genre>(cell(6), kGenreTokens, remap, "q4", row.line);
    rec.services = parse_token_set<Service>(cell(7), kServiceTokens, remap, "q5", row.line);

    std::string q6 = remap.token("q6", cell(8));
    if (!q6.empty()) {
        if (q6.size() != 1 || q6[0] < '1' || q6[0] > '5')
            throw Error(ErrorCode::UnknownToken, "q6 token '" + q6 + "'", row.line);
        rec.attention = q6[0] - '0';
    }

    // Record invariants.
    if (!rec.watched) {
        if (!rec.companions.empty() || !rec.genres.empty() || !rec.services.empty() ||
            rec.viewer_count || rec.attention)
            throw Error(ErrorCode::InvariantViolation, "q1=no but context answers present",
                        row.line);
    } else {
        if (rec.genres.empty())
            throw Error(ErrorCode::InvariantViolation, "q1=yes with empty q4", row.line);
        if (!rec.attention)
            throw Error(ErrorCode::InvariantViolation, "q1=yes with missing q6", row.line);
        bool alone = std::find(rec.companions.begin(), rec.companions.end(),
                               CompanionOption::alone) != rec.companions.end();
        if (!alone && !rec.viewer_count)
            throw Error(ErrorCode::InvariantViolation,
                        "viewer count missing and 'alone' not selected", row.line);
    }
    return rec;
}

}  // namespace detail

/// Strict parse: throws on the first problem. The lenient overload collects
/// per-row issues and returns the surviving records.
inline std::vector<AnswerRecord> parse_answers(std::istream& in, const RemapConfig& remap = {},
                                               std::vector<ParseIssue>* issues = nullptr) {
    auto rows = read_csv(in);
    if (rows.empty()) throw Error(ErrorCode::MalformedRow, "empty file: no header");
    auto pos = detail::resolve_columns(rows[0], remap,
                                       std::span<const std::string_view>(kAnswerHeader));
    std::vector<AnswerRecord> records;
    std::unordered_set<std::string> seen_ids;
    records.reserve(rows.size() - 1);
    for (size_t r = 1; r < rows.size(); ++r) {
        try {
            if (rows[r].fields.size() != rows[0].fields.size())
                throw Error(ErrorCode::MalformedRow,
                            "expected " + std::to_string(rows[0].fields.size()) + " fields, got " +
                                std::to_string(rows[r].fields.size()),
                            rows[r].line);
            AnswerRecord rec = detail::parse_answer_row(rows[r], pos, remap);
            if (!seen_ids.insert(rec.answer_id).second)
                throw Error(ErrorCode::InvariantViolation,
                            "duplicate answer_id '" + rec.answer_id + "'", rows[r].line);
            records.push_back(std::move(rec));
        } catch (const Error& e) {
            if (!issues) throw;
            issues->push_back(ParseIssue{e.row().value_or(rows[r].line), e.code(), e.what()});
        }
    }
    return records;
}

inline std::vector<UserProfile> parse_profiles(std::istream& in, const RemapConfig& remap = {}) {
    auto rows = read_csv(in);
    if (rows.empty()) throw Error(ErrorCode::MalformedRow, "empty file: no header");
    auto pos = detail::resolve_columns(rows[0], remap,
                                       std::span<const std::string_view>(kProfileHeader));
    std::vector<UserProfile> profiles;
    std::unordered_set<std::string> seen;
    for (size_t r = 1; r < rows.size(); ++r) {
        const CsvRow& row = rows[r];
        if (row.fields.size() != rows[0].fields.size())
            throw Error(ErrorCode::MalformedRow, "wrong field count", row.line);
        auto cell = [&](int i) {
            return trim(row.fields[static_cast<size_t>(pos[static_cast<size_t>(i)])]);
        };
        UserProfile p;
        p.user_id = cell(0);
        if (p.user_id.empty()) throw Error(ErrorCode::MalformedRow, "empty user_id", row.line);
        if (!seen.insert(p.user_id).second)
            throw Error(ErrorCode::DuplicateUser, "'" + p.user_id + "'", row.line);
        p.gender = cell(1);
        p.age_group = cell(2);
        p.language = cell(3);
        p.device_type = cell(4);
        p.household_size = cell(5);
        p.household_members = cell(6);
        p.watch_frequency = cell(7);
        p.favorite_genres = detail::parse_token_set<Genre>(cell(8), kGenreTokens, remap,
                                                           "favorite_genres", row.line);
        profiles.push_back(std::move(p));
    }
    return profiles;
}

inline HolidayCalendar parse_holidays(std::istream& in) {
    HolidayCalendar cal;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto d = parse_date(t);
        if (!d) throw Error(ErrorCode::BadTimestamp, "bad holiday date '" + t + "'", lineno);
        cal.add(*d);
    }
    return cal;
}

// ---- canonical serialization ------------------------------------------------

template <typename E>
std::string join_tokens(const std::vector<E>& set) {
    std::string out;
    for (size_t i = 0; i < set.size(); ++i) {
        if (i) out += '|';
        out += std::string(token(set[i]));
    }
    return out;
}

inline void write_answers_csv(std::ostream& out, const std::vector<AnswerRecord>& records) {
    out << "answer_id,user_id,timestamp,q1,q2,q3,q4,q5,q6\n";
    for (const auto& r : records) {
        std::vector<std::string> f;
        f.push_back(r.answer_id);
        f.push_back(r.user_id);
        f.push_back(format_datetime(r.timestamp));
        f.push_back(r.watched ? "yes" : "no");
        f.push_back(join_tokens(r.companions));
        f.push_back(r.viewer_count ? std::string(kViewerCountTokens[static_cast<size_t>(
                                        *r.viewer_count - 1)])
                                   : "");
        f.push_back(join_tokens(r.genres));
        f.push_back(join_tokens(r.services));
        f.push_back(r.attention ? std::to_string(*r.attention) : "");
        write_csv_row(out, f);
    }
}

inline void write_profiles_csv(std::ostream& out, const std::vector<UserProfile>& profiles) {
    out << "user_id,gender,age_group,language,device_type,household_size,household_members,"
           "watch_frequency,favorite_genres\n";
    for (const auto& p : profiles) {
        write_csv_row(out, {p.user_id, p.gender, p.age_group, p.language, p.device_type,
                            p.household_size, p.household_members, p.watch_frequency,
                            join_tokens(p.favorite_genres)});
    }
}

// ---- event derivation ---------------------------------------------------------

/// One single-genre event per selected genre; all other fields copied.
/// Non-watched answers produce nothing.
inline std::vector<ViewingEvent> split_events(const std::vector<AnswerRecord>& records,
                                              const HolidayCalendar& cal) {
    std::vector<ViewingEvent> events;
    for (const auto& rec : records) {
        if (!rec.watched) continue;
        bool alone = std::find(rec.companions.begin(), rec.companions.end(),
                               CompanionOption::alone) != rec.companions.end();
        for (Genre g : rec.genres) {  // genres are stored in canonical order
            ViewingEvent ev;
            ev.source_answer_id = rec.answer_id;
            ev.user_id = rec.user_id;
            ev.timestamp = rec.timestamp;
            ev.genre = g;
            ev.companions = rec.companions;
            ev.viewer_count = alone ? 1 : *rec.viewer_count;
            ev.services = rec.services;
            ev.attention = *rec.attention;
            ev.time_of_day = derive_time_of_day(rec.timestamp);
            ev.day_type = derive_day_type(rec.timestamp.date, cal);
            events.push_back(std::move(ev));
        }
    }
    return events;
}

/// Drops events of users with fewer than `min_answers` raw answers
/// (pre-split, watched or not). Stable order, idempotent.
inline std::vector<ViewingEvent> filter_min_answers(const std::vector<ViewingEvent>& events,
                                                    const std::vector<AnswerRecord>& records,
                                                    int min_answers = 5) {
    std::unordered_map<std::string, int> counts;
    for (const auto& r : records) ++counts[r.user_id];
    std::vector<ViewingEvent> kept;
    kept.reserve(events.size());
    for (const auto& ev : events) {
        auto it = counts.find(ev.user_id);
        if (it != counts.end() && it->second >= min_answers) kept.push_back(ev);
    }
    return kept;
}

// ---- descriptive summary --------------------------------------------------------

struct DayActivity {
    CivilDate date;
    int day_index = 0;  // 1-based from the first answer date
    long enrolled = 0;  // users whose first answer is on or before this date
    long active = 0;    // distinct users answering this date
    long answers = 0;
};

struct DatasetSummary {
    long answers_total = 0;        // raw rows
    long watched_answers_raw = 0;  // raw q1=yes rows
    long not_watched = 0;
    long post_split_rows = 0;  // non-watched rows + single-genre watched events
    long watched_events = 0;   // after splitting
    long social_watched = 0;
    long workday_watched = 0;
    double avg_active_per_day = 0.0;
    std::array<long, kGenreCount> genre_counts{};       // watched events per genre
    std::array<long, kTimeOfDayCount> answers_by_slot{};  // raw answers per slot
    std::vector<DayActivity> per_day;
};

inline DatasetSummary dataset_summary(const std::vector<AnswerRecord>& records,
                                      const std::vector<ViewingEvent>& events) {
    DatasetSummary s;
    s.answers_total = static_cast<long>(records.size());
    for (const auto& r : records) {
        if (r.watched)
            ++s.watched_answers_raw;
        else
            ++s.not_watched;
        ++s.answers_by_slot[static_cast<size_t>(derive_time_of_day(r.timestamp))];
    }
    s.watched_events = static_cast<long>(events.size());
    s.post_split_rows = s.not_watched + s.watched_events;
    for (const auto& ev : events) {
        ++s.genre_counts[static_cast<size_t>(ev.genre)];
        if (ev.is_social()) ++s.social_watched;
        if (ev.day_type == DayType::weekday) ++s.workday_watched;
    }

    // Per-day activity; enrollment approximated by each user's first answer.
    std::map<CivilDate, std::set<std::string>> active_by_date;
    std::map<CivilDate, long> answers_by_date;
    std::unordered_map<std::string, CivilDate> first_answer;
    for (const auto& r : records) {
        const CivilDate& d = r.timestamp.date;
        active_by_date[d].insert(r.user_id);
        ++answers_by_date[d];
        auto it = first_answer.find(r.user_id);
        if (it == first_answer.end() || d < it->second) first_answer[r.user_id] = d;
    }
    if (!active_by_date.empty()) {
        CivilDate start = active_by_date.begin()->first;
        CivilDate end = active_by_date.rbegin()->first;
        long total_active = 0;
        for (long z = days_from_civil(start); z <= days_from_civil(end); ++z) {
            DayActivity day;
            day.date = civil_from_days(z);
            day.day_index = static_cast<int>(z - days_from_civil(start)) + 1;
            auto it = active_by_date.find(day.date);
            day.active = it == active_by_date.end() ? 0 : static_cast<long>(it->second.size());
            auto ita = answers_by_date.find(day.date);
            day.answers = ita == answers_by_date.end() ? 0 : ita->second;
            for (const auto& [user, first] : first_answer)
                if (!(day.date < first)) ++day.enrolled;
            total_active += day.active;
            s.per_day.push_back(day);
        }
        s.avg_active_per_day =
            static_cast<double>(total_active) / static_cast<double>(s.per_day.size());
    }
    return s;
}

}  // namespace ctv
