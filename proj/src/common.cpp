#include "covpose/common.hpp"

namespace covpose {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace covpose
