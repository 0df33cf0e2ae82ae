#pragma once

#include <stdexcept>
#include <string>

namespace spectropitch {

// Base class for all domain errors thrown by the library. Precondition
// violations (caller bugs) throw std::invalid_argument instead.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedFormat : Error { using Error::Error; };
struct MalformedFile : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };
struct BadShape : Error { using Error::Error; };
struct InvalidSpec : Error { using Error::Error; };
struct ZeroPower : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct NoVoicedFrames : Error { using Error::Error; };
struct MalformedModelFile : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };

}  // namespace spectropitch
