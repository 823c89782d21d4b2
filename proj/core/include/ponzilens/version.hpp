#pragma once

namespace ponzilens {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ponzilens
