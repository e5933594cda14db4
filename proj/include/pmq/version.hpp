#pragma once

namespace pmq {

inline constexpr const char* library_version = "0.1.0";
inline constexpr unsigned grid_file_format_version = 1;

} // namespace pmq
