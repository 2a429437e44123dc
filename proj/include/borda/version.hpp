#pragma once

namespace borda {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace borda
