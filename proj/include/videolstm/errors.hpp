#pragma once

#include <stdexcept>
#include <string>

namespace vlsm {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes or dimensions do not agree.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid configuration value (bad extents, even kernel, glyph too large, ...).
struct ConfigError : Error {
    using Error::Error;
};

// API misuse: empty input where nonempty is required, non-scalar backward seed,
// out-of-range label, unknown variant.
struct UsageError : Error {
    using Error::Error;
};

// File system failures: missing or unwritable paths.
struct IoError : Error {
    using Error::Error;
};

// Malformed on-disk data: bad magic, truncation, version mismatch.
struct FormatError : Error {
    using Error::Error;
};

// Numeric failure: training divergence, degenerate fusion product.
struct NumericError : Error {
    using Error::Error;
};

// Localization produced no box in any frame of a video.
struct EmptyTubeError : Error {
    using Error::Error;
};

}  // namespace vlsm
