#pragma once

namespace liftkit {

inline constexpr const char* kLiftkitVersion = "0.1.0";

}  // namespace liftkit
