#pragma once

namespace flaglp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace flaglp
