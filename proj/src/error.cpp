#include "csprobe/error.hpp"

namespace csprobe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::DegenerateVector: return "degenerate_vector";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::OriginalOov: return "original_oov";
    case ErrorCode::NoUsableReplacements: return "no_usable_replacements";
    case ErrorCode::ZeroMass: return "zero_mass";
    case ErrorCode::InsufficientPoints: return "insufficient_points";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::UndefinedCorrelation: return "undefined_correlation";
    case ErrorCode::MissingFixture: return "missing_fixture";
    case ErrorCode::Transport: return "transport_error";
    case ErrorCode::Protocol: return "protocol_error";
    case ErrorCode::Remote: return "remote_error";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::Config: return "config_error";
    case ErrorCode::Internal: return "internal_error";
  }
  return "unknown";
}

}  // namespace csprobe
