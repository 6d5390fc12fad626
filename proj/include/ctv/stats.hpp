#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctv/domain.hpp"

namespace ctv {

// ---- chi-square upper tail ----------------------------------------------------

namespace detail {

inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    double ap = a;
    for (int n = 0; n < 1000; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_continued_fraction(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 1000; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Upper-tail probability of the chi-square distribution, via the regularized
/// incomplete gamma function (series below a+1, continued fraction above).
inline double chi_square_sf(double x, int df) {
    if (x <= 0.0) return 1.0;
    const double a = static_cast<double>(df) / 2.0;
    const double half_x = x / 2.0;
    if (half_x < a + 1.0) return 1.0 - detail::gamma_p_series(a, half_x);
    return detail::gamma_q_continued_fraction(a, half_x);
}

// ---- contingency tables ---------------------------------------------------------

enum class ContextDim {
    time_of_day,
    day_type,
    companions,
    viewer_count,
    attention,
    service,
};

inline const char* context_dim_name(ContextDim d) {
    switch (d) {
        case ContextDim::time_of_day: return "time_of_day";
        case ContextDim::day_type: return "day_type";
        case ContextDim::companions: return "companions";
        case ContextDim::viewer_count: return "viewer_count";
        case ContextDim::attention: return "attention";
        case ContextDim::service: return "service";
    }
    return "?";
}

struct ContingencyTable {
    std::vector<std::string> row_labels;  // genres, `other` removed
    std::vector<std::string> col_labels;  // levels of one contextual dimension
    std::vector<std::vector<long>> counts;
    long n = 0;

    int rows() const { return static_cast<int>(row_labels.size()); }
    int cols() const { return static_cast<int>(col_labels.size()); }
};

/// Genre x context-level counts over watched events. Events with genre
/// `other` are removed. Multi-select dimensions (companions, service) add one
/// count per selected option, so n exceeds the event count there. Only levels
/// and genres that occur form the table.
inline ContingencyTable contingency(const std::vector<ViewingEvent>& events, ContextDim dim) {
    if (events.empty()) throw Error(ErrorCode::EmptyInput, "no events");

    auto level_count = [&]() -> int {
        switch (dim) {
            case ContextDim::time_of_day: return kTimeOfDayCount;
            case ContextDim::day_type: return kDayTypeCount;
            case ContextDim::companions: return kCompanionCount;
            case ContextDim::viewer_count: return kViewerCountLevels;
            case ContextDim::attention: return kAttentionLevels;
            case ContextDim::service: return kServiceCount;
        }
        return 0;
    }();
    auto level_token = [&](int level) -> std::string {
        switch (dim) {
            case ContextDim::time_of_day: return std::string(token(static_cast<TimeOfDay>(level)));
            case ContextDim::day_type: return std::string(token(static_cast<DayType>(level)));
            case ContextDim::companions:
                return std::string(token(static_cast<CompanionOption>(level)));
            case ContextDim::viewer_count:
                return std::string(kViewerCountTokens[static_cast<size_t>(level)]);
            case ContextDim::attention: return std::to_string(level + 1);
            case ContextDim::service: return std::string(token(static_cast<Service>(level)));
        }
        return "?";
    };

    std::vector<std::vector<long>> full(kGenreCount - 1,
                                        std::vector<long>(static_cast<size_t>(level_count), 0));
    for (const auto& ev : events) {
        if (ev.genre == Genre::other) continue;
        size_t g = static_cast<size_t>(ev.genre);
        auto add = [&](int level) { ++full[g][static_cast<size_t>(level)]; };
        switch (dim) {
            case ContextDim::time_of_day: add(static_cast<int>(ev.time_of_day)); break;
            case ContextDim::day_type: add(static_cast<int>(ev.day_type)); break;
            case ContextDim::companions:
                for (CompanionOption c : ev.companions) add(static_cast<int>(c));
                break;
            case ContextDim::viewer_count: add(ev.viewer_count - 1); break;
            case ContextDim::attention: add(ev.attention - 1); break;
            case ContextDim::service:
                for (Service s : ev.services) add(static_cast<int>(s));
                break;
        }
    }

    std::vector<int> used_rows, used_cols;
    for (int g = 0; g < kGenreCount - 1; ++g)
        for (int l = 0; l < level_count; ++l)
            if (full[static_cast<size_t>(g)][static_cast<size_t>(l)] > 0) {
                used_rows.push_back(g);
                break;
            }
    for (int l = 0; l < level_count; ++l)
        for (int g = 0; g < kGenreCount - 1; ++g)
            if (full[static_cast<size_t>(g)][static_cast<size_t>(l)] > 0) {
                used_cols.push_back(l);
                break;
            }

    ContingencyTable t;
    for (int g : used_rows) t.row_labels.push_back(std::string(token(static_cast<Genre>(g))));
    for (int l : used_cols) t.col_labels.push_back(level_token(l));
    for (int g : used_rows) {
        std::vector<long> row;
        for (int l : used_cols) {
            long v = full[static_cast<size_t>(g)][static_cast<size_t>(l)];
            row.push_back(v);
            t.n += v;
        }
        t.counts.push_back(std::move(row));
    }
    return t;
}

// ---- association tests -----------------------------------------------------------

struct AssociationResult {
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
    double v = 0.0;
    bool valid = false;
    long n = 0;
    int rows = 0;
    int cols = 0;
};

inline double cramers_v(double chi2, long n, int r, int c) {
    int k = std::min(r - 1, c - 1);
    if (n <= 0 || k <= 0) return 0.0;
    return std::sqrt(chi2 / (static_cast<double>(n) * static_cast<double>(k)));
}

namespace detail {

inline std::vector<long> row_sums(const ContingencyTable& t) {
    std::vector<long> r(static_cast<size_t>(t.rows()), 0);
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j)
            r[static_cast<size_t>(i)] += t.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return r;
}

inline std::vector<long> col_sums(const ContingencyTable& t) {
    std::vector<long> c(static_cast<size_t>(t.cols()), 0);
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j)
            c[static_cast<size_t>(j)] += t.counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return c;
}

}  // namespace detail

/// Reported only when at least 80% of expected frequencies exceed five and
/// none are zero.
inline bool validity(const ContingencyTable& t) {
    if (t.n <= 0) return false;
    auto rs = detail::row_sums(t);
    auto cs = detail::col_sums(t);
    long cells = static_cast<long>(t.rows()) * static_cast<long>(t.cols());
    long above5 = 0;
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) {
            double expected = static_cast<double>(rs[static_cast<size_t>(i)]) *
                              static_cast<double>(cs[static_cast<size_t>(j)]) /
                              static_cast<double>(t.n);
            if (expected == 0.0) return false;
            if (expected > 5.0) ++above5;
        }
    return 5 * above5 >= 4 * cells;  // >= 80%
}

inline AssociationResult chi_square_test(const ContingencyTable& t) {
    if (t.n <= 0) throw Error(ErrorCode::EmptyInput, "empty table");
    if (t.rows() < 2 || t.cols() < 2)
        throw Error(ErrorCode::DegenerateTable, "need at least 2x2");
    auto rs = detail::row_sums(t);
    auto cs = detail::col_sums(t);
    for (long v : rs)
        if (v == 0) throw Error(ErrorCode::DegenerateTable, "zero row marginal");
    for (long v : cs)
        if (v == 0) throw Error(ErrorCode::DegenerateTable, "zero column marginal");

    AssociationResult res;
    res.rows = t.rows();
    res.cols = t.cols();
    res.n = t.n;
    res.df = (t.rows() - 1) * (t.cols() - 1);
    double chi2 = 0.0;
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) {
            double expected = static_cast<double>(rs[static_cast<size_t>(i)]) *
                              static_cast<double>(cs[static_cast<size_t>(j)]) /
                              static_cast<double>(t.n);
            double diff =
                static_cast<double>(t.counts[static_cast<size_t>(i)][static_cast<size_t>(j)]) -
                expected;
            chi2 += diff * diff / expected;
        }
    res.chi2 = chi2;
    res.p = chi_square_sf(chi2, res.df);
    res.v = cramers_v(chi2, t.n, t.rows(), t.cols());
    res.valid = validity(t);
    return res;
}

// ---- paired classifier comparison ---------------------------------------------------

struct McNemarResult {
    long both_correct = 0;   // a11
    long only_a = 0;         // a12
    long only_b = 0;         // a21
    long both_wrong = 0;     // a22
    double chi2 = 0.0;
    double p = 1.0;
    double v = 0.0;
};

/// chi2 = (a12 - a21)^2 / (a12 + a21), V = sqrt(chi2 / n), p at df=1.
inline McNemarResult mcnemar(const std::vector<char>& correct_a,
                             const std::vector<char>& correct_b) {
    if (correct_a.empty() || correct_a.size() != correct_b.size())
        throw Error(ErrorCode::EmptyInput, "correctness vectors empty or mismatched");
    McNemarResult r;
    for (size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && correct_b[i])
            ++r.both_correct;
        else if (correct_a[i] && !correct_b[i])
            ++r.only_a;
        else if (!correct_a[i] && correct_b[i])
            ++r.only_b;
        else
            ++r.both_wrong;
    }
    long disagreements = r.only_a + r.only_b;
    if (disagreements == 0)
        throw Error(ErrorCode::NoDisagreement, "methods agree on every trial");
    double diff = static_cast<double>(r.only_a - r.only_b);
    r.chi2 = diff * diff / static_cast<double>(disagreements);
    r.p = chi_square_sf(r.chi2, 1);
    r.v = std::sqrt(r.chi2 / static_cast<double>(correct_a.size()));
    return r;
}

// ---- descriptive group summaries -------------------------------------------------------

struct GroupSummary {
    std::string group;      // e.g. "series", "social+weekend", "social+weekend+evening"
    std::string partition;  // for share rows: the cell the share is computed within
    long count = 0;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
    double share = 0.0;
};

enum class GroupBy { genre, context_cell, context_cell_time };
enum class ValueField { attention, viewer_count };
enum class ShareField { genre, time_of_day };

namespace detail {

inline std::string cell_label(const ViewingEvent& ev) {
    std::string s = ev.is_social() ? "social" : "alone";
    s += ev.day_type == DayType::weekday ? "+weekday" : "+weekend";
    return s;
}

inline double numeric_value(const ViewingEvent& ev, ValueField f) {
    // viewer count 5 means "5 or more"; it enters means as 5
    return f == ValueField::attention ? static_cast<double>(ev.attention)
                                      : static_cast<double>(ev.viewer_count);
}

}  // namespace detail

/// Count, mean and population standard deviation of `value` per group.
inline std::vector<GroupSummary> group_mean(const std::vector<ViewingEvent>& events, GroupBy by,
                                            ValueField value) {
    if (events.empty()) throw Error(ErrorCode::EmptyInput, "no events");
    std::map<std::string, std::vector<double>> groups;
    for (const auto& ev : events) {
        std::string key;
        switch (by) {
            case GroupBy::genre: key = std::string(token(ev.genre)); break;
            case GroupBy::context_cell: key = detail::cell_label(ev); break;
            case GroupBy::context_cell_time:
                key = detail::cell_label(ev) + "+" + std::string(token(ev.time_of_day));
                break;
        }
        groups[key].push_back(detail::numeric_value(ev, value));
    }
    std::vector<GroupSummary> out;
    for (const auto& [key, values] : groups) {
        GroupSummary g;
        g.group = key;
        g.count = static_cast<long>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        g.mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - g.mean) * (v - g.mean);
        g.stddev = std::sqrt(ss / static_cast<double>(values.size()));
        out.push_back(std::move(g));
    }
    return out;
}

/// Shares of `field` within each of the four alone/social x weekday/weekend
/// cells; shares per cell sum to 1.
inline std::vector<GroupSummary> share_within_context(const std::vector<ViewingEvent>& events,
                                                      ShareField field) {
    if (events.empty()) throw Error(ErrorCode::EmptyInput, "no events");
    std::map<std::string, std::map<std::string, long>> cells;
    std::map<std::string, long> cell_totals;
    for (const auto& ev : events) {
        std::string cell = detail::cell_label(ev);
        std::string key = field == ShareField::genre ? std::string(token(ev.genre))
                                                     : std::string(token(ev.time_of_day));
        ++cells[cell][key];
        ++cell_totals[cell];
    }
    std::vector<GroupSummary> out;
    for (const auto& [cell, keys] : cells) {
        for (const auto& [key, count] : keys) {
            GroupSummary g;
            g.partition = cell;
            g.group = key;
            g.count = count;
            g.share = static_cast<double>(count) / static_cast<double>(cell_totals.at(cell));
            out.push_back(std::move(g));
        }
    }
    return out;
}

/// Genre distribution per context cell.
inline std::vector<GroupSummary> genre_share(const std::vector<ViewingEvent>& events) {
    return share_within_context(events, ShareField::genre);
}

}  // namespace ctv
