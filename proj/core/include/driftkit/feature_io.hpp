#pragma once

#include "driftkit/features.hpp"

#include <array>
#include <filesystem>

namespace driftkit {

inline constexpr std::array<char, 8> kFeatureMagic = {'D', 'R', 'F', 'T', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;

/// Binary sidecar for a FeatureMatrix: fixed 48-byte little-endian header
/// (magic, version, endian marker, recipe, N, D, payload bytes), then N
/// length-prefixed example ids, then N*D float64 values row-major.
void write_features(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace driftkit
