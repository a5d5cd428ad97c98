#pragma once

namespace snapcluster {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace snapcluster
