#pragma once

namespace fnl {

inline constexpr const char* version = "0.1.0";

} // namespace fnl
