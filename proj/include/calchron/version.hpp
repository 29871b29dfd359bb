#pragma once

namespace calchron {

inline constexpr const char* version_string = "0.1.0";

}  // namespace calchron
