#pragma once

namespace deltak {

inline constexpr int kTraceFormatMajor = 1;
inline constexpr int kTraceFormatMinor = 0;

inline constexpr const char* kProjectVersion = "0.1.0";

}  // namespace deltak
