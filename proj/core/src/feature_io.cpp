#include "driftkit/feature_io.hpp"

#include "binary_io.hpp"

#include <fstream>

namespace driftkit {

namespace {
constexpr std::uint64_t kFeatureHeaderBytes = 48;
}

void write_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  if (features.example_ids.size() != features.rows()) {
    throw Error(ErrorCode::DimMismatch, "feature matrix rows differ from example id count");
  }
  std::uint64_t payload = 8 * static_cast<std::uint64_t>(features.data.size());
  for (const auto& id : features.example_ids) payload += 4 + id.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  detail::LeWriter w(out);
  w.put_bytes(kFeatureMagic.data(), kFeatureMagic.size());
  w.put<std::uint32_t>(kFeatureVersion);
  w.put<std::uint32_t>(kEndianMarker);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(features.recipe));
  w.put<std::uint32_t>(0);
  w.put<std::uint64_t>(features.rows());
  w.put<std::uint64_t>(features.feature_dim());
  w.put<std::uint64_t>(payload);
  for (const auto& id : features.example_ids) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id.data(), id.size());
  }
  w.put_array(features.data.data(), static_cast<std::size_t>(features.data.size()));
  out.flush();
  w.check(path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot stat '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kFeatureMagic) throw Error(ErrorCode::BadMagic, "'" + path.string() + "' is not a feature sidecar");
  if (file_size < kFeatureHeaderBytes) throw Error(ErrorCode::TruncatedPayload, "feature header truncated");

  detail::LeReader r(in, file_size - magic.size());
  if (r.get<std::uint32_t>() != kFeatureVersion) throw Error(ErrorCode::BadMagic, "unsupported feature sidecar version");
  if (r.get<std::uint32_t>() != kEndianMarker) throw Error(ErrorCode::BadMagic, "endianness marker mismatch");
  const auto recipe = r.get<std::uint32_t>();
  if (recipe > static_cast<std::uint32_t>(Recipe::CaaScore)) throw Error(ErrorCode::BadMagic, "unknown recipe tag");
  r.get<std::uint32_t>();
  const auto n = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  const auto payload = r.get<std::uint64_t>();
  if (file_size - kFeatureHeaderBytes != payload) {
    throw Error(ErrorCode::TruncatedPayload, "declared payload differs from file size");
  }
  if (n > payload || (d > 0 && n * d > payload / 8)) throw Error(ErrorCode::TruncatedPayload, "shape exceeds payload");

  FeatureMatrix fm;
  fm.recipe = static_cast<Recipe>(recipe);
  fm.example_ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) fm.example_ids.push_back(r.get_string(r.get<std::uint32_t>()));
  fm.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  r.get_array(fm.data.data(), static_cast<std::size_t>(fm.data.size()));
  return fm;
}

}  // namespace driftkit
