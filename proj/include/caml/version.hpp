#pragma once

namespace caml {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace caml
