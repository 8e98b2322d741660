#pragma once

namespace ruleforge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ruleforge
