#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace salmon {

inline constexpr std::string_view kToolkitName = "salmon-kit";
inline constexpr std::string_view kToolkitVersion = "0.1.0";

// FNV-1a 64 over a canonical config string; hex-encoded. Used to stamp every
// output file for provenance.
std::string config_hash(std::string_view canonical_config);

} // namespace salmon
