#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vrleak {

enum class Errc {
    MissingColumn,
    EmptyDataset,
    RateMismatch,
    EmptySession,
    DuplicateRecording,
    InvalidConfig,
    InvalidB,
    NoHeadStream,
    InvalidBounds,
    MissingEstimate,
    TooShort,
    NoTrainingData,
    ArityMismatch,
    MissingStream,
    EmptyEnrollment,
    LengthMismatch,
    EmptyGallery,
    TooFewSubjects,
    EmptyScores,
    EmptyTrials,
    ParityViolation,
    EmptySelection,
    InsufficientSessions,
    DuplicateExperiment,
    IoFailure,
    ParseError,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::RateMismatch: return "RateMismatch";
    case Errc::EmptySession: return "EmptySession";
    case Errc::DuplicateRecording: return "DuplicateRecording";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidB: return "InvalidB";
    case Errc::NoHeadStream: return "NoHeadStream";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::MissingEstimate: return "MissingEstimate";
    case Errc::TooShort: return "TooShort";
    case Errc::NoTrainingData: return "NoTrainingData";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::MissingStream: return "MissingStream";
    case Errc::EmptyEnrollment: return "EmptyEnrollment";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyGallery: return "EmptyGallery";
    case Errc::TooFewSubjects: return "TooFewSubjects";
    case Errc::EmptyScores: return "EmptyScores";
    case Errc::EmptyTrials: return "EmptyTrials";
    case Errc::ParityViolation: return "ParityViolation";
    case Errc::EmptySelection: return "EmptySelection";
    case Errc::InsufficientSessions: return "InsufficientSessions";
    case Errc::DuplicateExperiment: return "DuplicateExperiment";
    case Errc::IoFailure: return "IoFailure";
    case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Configuration problems (as opposed to problems with the data itself).
/// The CLI maps these to exit code 2 and everything else to 3.
constexpr bool is_config_error(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidB:
    case Errc::InvalidBounds:
    case Errc::ParityViolation:
    case Errc::EmptySelection:
    case Errc::DuplicateExperiment:
    case Errc::TooFewSubjects:
    case Errc::ParseError:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace vrleak
