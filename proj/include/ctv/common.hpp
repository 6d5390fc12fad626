#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctv {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ErrorCode {
    MalformedRow,
    UnknownToken,
    BadTimestamp,
    InvariantViolation,
    DuplicateUser,
    UnknownPreset,
    UnknownDimensionLetter,
    UnknownUser,
    EmptyInput,
    DegenerateTable,
    NoDisagreement,
    EmptyTraining,
    NonFiniteLoss,
    WidthMismatch,
    TooFewEvents,
    EmptyGrid,
    InvalidSpec,
    IdMismatch,
    MissingArtifacts,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::UnknownToken: return "UnknownToken";
        case ErrorCode::BadTimestamp: return "BadTimestamp";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::DuplicateUser: return "DuplicateUser";
        case ErrorCode::UnknownPreset: return "UnknownPreset";
        case ErrorCode::UnknownDimensionLetter: return "UnknownDimensionLetter";
        case ErrorCode::UnknownUser: return "UnknownUser";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DegenerateTable: return "DegenerateTable";
        case ErrorCode::NoDisagreement: return "NoDisagreement";
        case ErrorCode::EmptyTraining: return "EmptyTraining";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::WidthMismatch: return "WidthMismatch";
        case ErrorCode::TooFewEvents: return "TooFewEvents";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::IdMismatch: return "IdMismatch";
        case ErrorCode::MissingArtifacts: return "MissingArtifacts";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Library-wide exception. `row` is 1-based (header = row 1) when the error
/// is tied to a specific input line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::optional<long> row = std::nullopt)
        : std::runtime_error(format(code, message, row)), code_(code), row_(row) {}

    ErrorCode code() const { return code_; }
    std::optional<long> row() const { return row_; }

private:
    static std::string format(ErrorCode code, const std::string& message,
                              std::optional<long> row) {
        std::string s = error_code_name(code);
        if (row) {
            s += " (row ";
            s += std::to_string(*row);
            s += ")";
        }
        s += ": ";
        s += message;
        return s;
    }

    ErrorCode code_;
    std::optional<long> row_;
};

// ---- small string helpers ------------------------------------------------

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace ctv
