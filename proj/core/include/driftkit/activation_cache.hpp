#pragma once

#include "driftkit/error.hpp"
#include "driftkit/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftkit {

inline constexpr std::array<char, 8> kCacheMagic = {'D', 'R', 'F', 'T', 'C', 'A', 'C', 'H'};
inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::uint32_t kEndianMarker = 0x0A0B0C0D;
inline constexpr std::size_t kCacheFixedHeaderBytes = 64;

/// Header flag bits.
enum CacheFlag : std::uint32_t {
  kHasTokenLogprobs = 1u << 0,
  kHasBeforeAfter = 1u << 1,
  kHasPerturbed = 1u << 2,
  kHasLastToken = 1u << 3,
  kHasPairedStates = 1u << 4,
};

/// Perturbation strategies, in the fixed order used by the cache bitmask and
/// by every per-strategy feature block.
enum class Perturbation : std::uint32_t { EntitySwap = 0, NumericalCorruption, NegationFlip, BoundaryViolation };
inline constexpr std::array<Perturbation, 4> kAllPerturbations = {
    Perturbation::EntitySwap, Perturbation::NumericalCorruption, Perturbation::NegationFlip,
    Perturbation::BoundaryViolation};

std::string to_string(Perturbation p);
Perturbation perturbation_from_string(const std::string& name);

struct CacheHeader {
  std::uint32_t version = kCacheVersion;
  std::uint64_t n_examples = 0;
  std::uint32_t n_layers_tapped = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t n_samples = 1;
  std::uint32_t flags = 0;
  /// Total decoder layers of the source model.
  std::uint32_t total_layers = 0;
  /// Bit i set when Perturbation(i) states are present.
  std::uint32_t perturb_mask = 0;
  /// Bytes following the header; filled in by the writer.
  std::uint64_t payload_bytes = 0;
  /// Resolved model-layer index of every tap, strictly increasing.
  std::vector<std::uint32_t> tap_layers;

  bool has(CacheFlag flag) const noexcept { return (flags & flag) != 0; }
  std::vector<Perturbation> perturbations() const;
  /// Fixed part + tap table + record offset index.
  std::uint64_t header_bytes() const noexcept {
    return kCacheFixedHeaderBytes + 4 * static_cast<std::uint64_t>(n_layers_tapped) + 8 * n_examples;
  }
  bool operator==(const CacheHeader&) const = default;
};

/// Pooled hidden states for one example. Matrices are [taps x d].
struct ActivationRecord {
  std::string example_id;
  std::uint32_t token_count = 1;
  /// One pooled matrix per sampled completion (size S).
  std::vector<MatrixF> pooled;
  /// Final-position state at every tap (SAPLMA input).
  std::optional<MatrixF> last_token;
  /// Flattened [taps * d] states around the answer boundary.
  std::optional<VectorF> before_state;
  std::optional<VectorF> after_state;
  std::map<Perturbation, MatrixF> perturbed_pooled;
  /// Pooled states of the paired correct / hallucinated responses.
  std::optional<MatrixF> paired_correct;
  std::optional<MatrixF> paired_hallucinated;
  std::optional<std::vector<float>> token_logprobs;

  bool operator==(const ActivationRecord& other) const;
};

/// Header that matches the shape and optional slots of `records`.
CacheHeader header_for(const std::vector<ActivationRecord>& records, std::uint32_t total_layers,
                       std::vector<std::uint32_t> tap_layers);

/// Writes little-endian float32 payloads, example-major then layer-major.
/// Output is byte-identical for identical input.
void write_cache(const std::vector<ActivationRecord>& records, const CacheHeader& header,
                 const std::filesystem::path& path);

struct CorruptEntry {
  std::string example_id;
  /// Model-layer indices (from the tap table) holding a non-finite value.
  std::vector<std::uint32_t> layers;
  bool logprobs = false;
};

struct ReadOptions {
  /// Skip examples with non-finite values instead of failing.
  bool drop_corrupt = false;
};

struct CacheContents {
  CacheHeader header;
  std::vector<ActivationRecord> records;
  std::vector<CorruptEntry> dropped;
};

/// Thrown for NanDetected; carries the full per-example diagnostic.
class NanDetectedError : public Error {
 public:
  NanDetectedError(const std::string& message, std::vector<CorruptEntry> entries)
      : Error(ErrorCode::NanDetected, message), entries_(std::move(entries)) {}
  const std::vector<CorruptEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<CorruptEntry> entries_;
};

/// Streaming reader. After construction only the header and offset index are
/// in memory; `read(i)` seeks to one record. Reads are serialized internally,
/// so one reader may be shared across worker threads.
class CacheReader {
 public:
  explicit CacheReader(const std::filesystem::path& path);
  ~CacheReader();
  CacheReader(const CacheReader&) = delete;
  CacheReader& operator=(const CacheReader&) = delete;

  const CacheHeader& header() const noexcept { return header_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(header_.n_examples); }

  /// Reads record i without validating finiteness.
  ActivationRecord read_raw(std::size_t i) const;
  /// Reads record i; throws NanDetectedError on non-finite values.
  ActivationRecord read(std::size_t i) const;

 private:
  struct Impl;
  CacheHeader header_;
  std::vector<std::uint64_t> offsets_;
  Impl* impl_;
};

CacheContents read_cache(const std::filesystem::path& path, const ReadOptions& options = {});

/// Non-finite entries of one record, or nullopt if it is clean.
std::optional<CorruptEntry> find_corruption(const ActivationRecord& record,
                                            const std::vector<std::uint32_t>& tap_layers);

/// Mean over the token axis with 64-bit accumulation.
Vector mean_pool(const Matrix& token_states);
VectorF mean_pool(const MatrixF& token_states);

struct LayerTapSpec {
  std::vector<double> fractions;
  std::vector<std::uint32_t> resolved_indices;
  std::uint32_t total_layers = 0;

  std::size_t size() const noexcept { return resolved_indices.size(); }
  /// Position of a fraction in the tap list, matched to 1e-9.
  std::optional<std::size_t> position_of(double fraction) const;
};

inline const std::vector<double> kDefaultTapFractions = {0.60, 0.70, 0.80, 0.85};

/// round(fraction * total_layers), ties away from zero, deduplicated.
LayerTapSpec resolve_taps(const std::vector<double>& fractions, std::uint32_t total_layers);

/// Sidecar manifest: one `example_id<TAB>corpus<TAB>line` row per record.
struct ManifestEntry {
  std::string example_id;
  std::string corpus;
  std::size_t line = 0;
  bool operator==(const ManifestEntry&) const = default;
};
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace driftkit
