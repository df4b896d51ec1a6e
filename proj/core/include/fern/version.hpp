#pragma once

namespace fern {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fern
