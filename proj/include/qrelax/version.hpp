#pragma once

namespace qrelax {

inline constexpr const char* version_string = "qrelax 0.1.0";

} // namespace qrelax
