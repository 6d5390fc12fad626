#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctv/domain.hpp"

namespace ctv {

/// Contextual dimensions in canonical block order.
enum class Dim : std::uint8_t { U, T, D, W, M, S, A };
inline constexpr std::array<char, 7> kDimLetters = {'U', 'T', 'D', 'W', 'M', 'S', 'A'};

struct FeatureConfig {
    std::string name;        // preset name or literal spelling
    std::vector<Dim> dims;   // nonempty, unique, canonical order

    bool has(Dim d) const { return std::find(dims.begin(), dims.end(), d) != dims.end(); }

    std::string letters() const {
        std::string s;
        for (Dim d : dims) s += kDimLetters[static_cast<size_t>(d)];
        return s;
    }
};

/// Named presets, or a literal dimension string such as "UTD" parsed
/// character-wise. Block order is canonicalized regardless of spelling.
inline FeatureConfig preset(std::string_view name) {
    auto literal = [&](std::string_view letters) {
        std::array<bool, 7> present{};
        for (char c : letters) {
            auto it = std::find(kDimLetters.begin(), kDimLetters.end(), c);
            if (it == kDimLetters.end())
                throw Error(ErrorCode::UnknownDimensionLetter,
                            std::string("'") + c + "' in config '" + std::string(name) + "'");
            size_t i = static_cast<size_t>(it - kDimLetters.begin());
            if (present[i])
                throw Error(ErrorCode::InvariantViolation,
                            std::string("duplicate dimension '") + c + "' in config '" +
                                std::string(name) + "'");
            present[i] = true;
        }
        FeatureConfig cfg;
        cfg.name = std::string(name);
        for (size_t i = 0; i < present.size(); ++i)
            if (present[i]) cfg.dims.push_back(static_cast<Dim>(i));
        if (cfg.dims.empty())
            throw Error(ErrorCode::UnknownPreset, "empty config '" + std::string(name) + "'");
        return cfg;
    };
    if (name == "all") return literal("UTDWMA");
    if (name == "all+S") return literal("UTDWMSA");
    if (name == "all-U") return literal("TDWMA");
    if (name.empty()) throw Error(ErrorCode::UnknownPreset, "empty config name");
    return literal(name);
}

/// Stable user -> column bijection, built once from the full dataset.
class UserIndex {
public:
    static UserIndex from_ids(std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        UserIndex idx;
        idx.ids_ = std::move(ids);
        for (size_t i = 0; i < idx.ids_.size(); ++i) idx.offsets_[idx.ids_[i]] = static_cast<int>(i);
        return idx;
    }
    static UserIndex from_profiles(const std::vector<UserProfile>& profiles) {
        std::vector<std::string> ids;
        ids.reserve(profiles.size());
        for (const auto& p : profiles) ids.push_back(p.user_id);
        return from_ids(std::move(ids));
    }
    static UserIndex from_events(const std::vector<ViewingEvent>& events) {
        std::vector<std::string> ids;
        ids.reserve(events.size());
        for (const auto& ev : events) ids.push_back(ev.user_id);
        return from_ids(std::move(ids));
    }

    int size() const { return static_cast<int>(ids_.size()); }
    const std::vector<std::string>& ids() const { return ids_; }
    int offset(const std::string& user_id) const {
        auto it = offsets_.find(user_id);
        if (it == offsets_.end()) throw Error(ErrorCode::UnknownUser, "'" + user_id + "'");
        return it->second;
    }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, int> offsets_;
};

inline int block_width(Dim d, const UserIndex& users) {
    switch (d) {
        case Dim::U: return users.size();
        case Dim::T: return kTimeOfDayCount;
        case Dim::D: return kDayTypeCount;
        case Dim::W: return kCompanionCount;
        case Dim::M: return kViewerCountLevels;
        case Dim::S: return kServiceCount;
        case Dim::A: return kAttentionLevels;
    }
    return 0;
}

inline int dimension(const FeatureConfig& cfg, const UserIndex& users) {
    int w = 0;
    for (Dim d : cfg.dims) w += block_width(d, users);
    return w;
}

/// One-hot blocks for U/T/D/M/A, multi-hot for W (companions) and S (services),
/// concatenated in canonical order.
inline void encode_into(const ViewingEvent& ev, const FeatureConfig& cfg, const UserIndex& users,
                        std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    int base = 0;
    for (Dim d : cfg.dims) {
        switch (d) {
            case Dim::U: out[static_cast<size_t>(base + users.offset(ev.user_id))] = 1.0; break;
            case Dim::T:
                out[static_cast<size_t>(base + static_cast<int>(ev.time_of_day))] = 1.0;
                break;
            case Dim::D:
                out[static_cast<size_t>(base + static_cast<int>(ev.day_type))] = 1.0;
                break;
            case Dim::W:
                for (CompanionOption c : ev.companions)
                    out[static_cast<size_t>(base + static_cast<int>(c))] = 1.0;
                break;
            case Dim::M: out[static_cast<size_t>(base + ev.viewer_count - 1)] = 1.0; break;
            case Dim::S:
                for (Service s : ev.services)
                    out[static_cast<size_t>(base + static_cast<int>(s))] = 1.0;
                break;
            case Dim::A: out[static_cast<size_t>(base + ev.attention - 1)] = 1.0; break;
        }
        base += block_width(d, users);
    }
}

inline std::vector<double> encode(const ViewingEvent& ev, const FeatureConfig& cfg,
                                  const UserIndex& users) {
    std::vector<double> x(static_cast<size_t>(dimension(cfg, users)));
    encode_into(ev, cfg, users, x);
    return x;
}

struct DesignMatrix {
    FeatureConfig config;
    int width = 0;
    int n_classes = kGenreCount;
    std::vector<double> values;        // rows x width, row-major, 0/1
    std::vector<int> targets;          // class index per row
    std::vector<std::string> trial_ids;  // source event ids
    std::vector<std::int64_t> row_ids;   // stable global trial indices

    int rows() const { return static_cast<int>(targets.size()); }
    std::span<const double> row(int i) const {
        return {values.data() + static_cast<size_t>(i) * static_cast<size_t>(width),
                static_cast<size_t>(width)};
    }
};

inline DesignMatrix build_matrix(const std::vector<ViewingEvent>& events, const FeatureConfig& cfg,
                                 const UserIndex& users) {
    DesignMatrix m;
    m.config = cfg;
    m.width = dimension(cfg, users);
    m.values.resize(static_cast<size_t>(events.size()) * static_cast<size_t>(m.width));
    m.targets.reserve(events.size());
    m.trial_ids.reserve(events.size());
    m.row_ids.reserve(events.size());
    for (size_t i = 0; i < events.size(); ++i) {
        encode_into(events[i], cfg, users,
                    std::span<double>(m.values.data() + i * static_cast<size_t>(m.width),
                                      static_cast<size_t>(m.width)));
        m.targets.push_back(static_cast<int>(events[i].genre));
        m.trial_ids.push_back(events[i].event_id());
        m.row_ids.push_back(static_cast<std::int64_t>(i));
    }
    return m;
}

/// Row subset preserving ids; used for fold slicing.
inline DesignMatrix select_rows(const DesignMatrix& m, std::span<const int> rows) {
    DesignMatrix out;
    out.config = m.config;
    out.width = m.width;
    out.n_classes = m.n_classes;
    out.values.resize(rows.size() * static_cast<size_t>(m.width));
    out.targets.reserve(rows.size());
    out.trial_ids.reserve(rows.size());
    out.row_ids.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(
                                              i * static_cast<size_t>(m.width)));
        out.targets.push_back(m.targets[static_cast<size_t>(rows[i])]);
        out.trial_ids.push_back(m.trial_ids[static_cast<size_t>(rows[i])]);
        out.row_ids.push_back(m.row_ids[static_cast<size_t>(rows[i])]);
    }
    return out;
}

/// Per-row indices of set columns; the models consume this sparse view.
/// Values must be exactly 0 or 1.
inline std::vector<std::vector<int>> one_indices(const DesignMatrix& m) {
    std::vector<std::vector<int>> out(static_cast<size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (int j = 0; j < m.width; ++j) {
            double v = r[static_cast<size_t>(j)];
            if (v == 0.0) continue;
            if (v != 1.0)
                throw Error(ErrorCode::InvariantViolation, "design values must be 0/1");
            out[static_cast<size_t>(i)].push_back(j);
        }
    }
    return out;
}

}  // namespace ctv
