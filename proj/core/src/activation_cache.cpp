#include "driftkit/activation_cache.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <sstream>

namespace driftkit {

namespace {

using detail::LeReader;
using detail::LeWriter;

bool same_bits(const MatrixF& a, const MatrixF& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const VectorF& a, const VectorF& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

template <typename T>
bool same_optional(const std::optional<T>& a, const std::optional<T>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_bits(*a, *b);
}

std::uint64_t record_float_count(const CacheHeader& h, std::uint32_t token_count) {
  const std::uint64_t block = static_cast<std::uint64_t>(h.n_layers_tapped) * h.hidden_dim;
  std::uint64_t n = block * h.n_samples;
  if (h.has(kHasLastToken)) n += block;
  if (h.has(kHasBeforeAfter)) n += 2 * block;
  if (h.has(kHasPerturbed)) n += block * std::popcount(h.perturb_mask);
  if (h.has(kHasPairedStates)) n += 2 * block;
  if (h.has(kHasTokenLogprobs)) n += token_count;
  return n;
}

std::uint64_t record_bytes(const CacheHeader& h, const ActivationRecord& r) {
  return 8 + r.example_id.size() + 4 * record_float_count(h, r.token_count);
}

void require_shape(const MatrixF& m, const CacheHeader& h, const std::string& id, const char* what) {
  if (m.rows() != static_cast<Eigen::Index>(h.n_layers_tapped) || m.cols() != static_cast<Eigen::Index>(h.hidden_dim)) {
    std::ostringstream msg;
    msg << "record '" << id << "' " << what << " is " << m.rows() << "x" << m.cols() << ", header expects "
        << h.n_layers_tapped << "x" << h.hidden_dim;
    throw Error(ErrorCode::DimMismatch, msg.str());
  }
}

void validate_header(const CacheHeader& h) {
  if (h.n_examples < 1 || h.n_layers_tapped < 1 || h.hidden_dim < 1 || h.n_samples < 1) {
    throw Error(ErrorCode::DimMismatch, "N, taps, d and S must all be >= 1");
  }
  if (h.tap_layers.size() != h.n_layers_tapped) {
    throw Error(ErrorCode::DimMismatch, "tap table length differs from n_layers_tapped");
  }
  if (!std::is_sorted(h.tap_layers.begin(), h.tap_layers.end()) ||
      std::adjacent_find(h.tap_layers.begin(), h.tap_layers.end()) != h.tap_layers.end()) {
    throw Error(ErrorCode::DimMismatch, "tap layer indices must be strictly increasing");
  }
  if (h.has(kHasPerturbed) != (h.perturb_mask != 0) || (h.perturb_mask >> kAllPerturbations.size()) != 0) {
    throw Error(ErrorCode::DimMismatch, "perturbation mask inconsistent with flags");
  }
}

void validate_record(const ActivationRecord& r, const CacheHeader& h) {
  const std::string& id = r.example_id;
  if (r.token_count < 1) throw Error(ErrorCode::DimMismatch, "record '" + id + "' has zero tokens");
  if (r.pooled.size() != h.n_samples) {
    throw Error(ErrorCode::DimMismatch, "record '" + id + "' sample count differs from header");
  }
  for (const auto& m : r.pooled) require_shape(m, h, id, "pooled state");

  auto check_slot = [&](bool present, CacheFlag flag, const char* what) {
    if (present != h.has(flag)) {
      throw Error(ErrorCode::DimMismatch, "record '" + id + "' " + what + " presence differs from header flags");
    }
  };
  check_slot(r.last_token.has_value(), kHasLastToken, "last-token state");
  if (r.last_token) require_shape(*r.last_token, h, id, "last-token state");

  check_slot(r.before_state.has_value() && r.after_state.has_value(), kHasBeforeAfter, "before/after state");
  if (r.before_state.has_value() != r.after_state.has_value()) {
    throw Error(ErrorCode::DimMismatch, "record '" + id + "' has only one of before/after");
  }
  if (r.before_state) {
    const auto flat = static_cast<Eigen::Index>(h.n_layers_tapped) * h.hidden_dim;
    if (r.before_state->size() != flat || r.after_state->size() != flat) {
      throw Error(ErrorCode::DimMismatch, "record '" + id + "' before/after length differs from taps*d");
    }
  }

  std::uint32_t mask = 0;
  for (const auto& [p, m] : r.perturbed_pooled) {
    mask |= 1u << static_cast<std::uint32_t>(p);
    require_shape(m, h, id, "perturbed state");
  }
  if (mask != h.perturb_mask) {
    throw Error(ErrorCode::DimMismatch, "record '" + id + "' perturbation set differs from header mask");
  }

  check_slot(r.paired_correct.has_value() && r.paired_hallucinated.has_value(), kHasPairedStates, "paired states");
  if (r.paired_correct.has_value() != r.paired_hallucinated.has_value()) {
    throw Error(ErrorCode::DimMismatch, "record '" + id + "' has only one paired state");
  }
  if (r.paired_correct) {
    require_shape(*r.paired_correct, h, id, "paired correct state");
    require_shape(*r.paired_hallucinated, h, id, "paired hallucinated state");
  }

  check_slot(r.token_logprobs.has_value(), kHasTokenLogprobs, "token log-probs");
  if (r.token_logprobs && r.token_logprobs->size() != r.token_count) {
    throw Error(ErrorCode::DimMismatch, "record '" + id + "' log-prob length differs from token count");
  }
}

void write_header(LeWriter& w, const CacheHeader& h) {
  w.put_bytes(kCacheMagic.data(), kCacheMagic.size());
  w.put<std::uint32_t>(h.version);
  w.put<std::uint32_t>(kEndianMarker);
  w.put<std::uint64_t>(h.n_examples);
  w.put<std::uint32_t>(h.n_layers_tapped);
  w.put<std::uint32_t>(h.hidden_dim);
  w.put<std::uint32_t>(h.n_samples);
  w.put<std::uint32_t>(h.flags);
  w.put<std::uint32_t>(h.total_layers);
  w.put<std::uint32_t>(h.perturb_mask);
  w.put<std::uint64_t>(h.payload_bytes);
  w.put<std::uint64_t>(h.header_bytes());
  w.put_array(h.tap_layers.data(), h.tap_layers.size());
}

void put_matrix(LeWriter& w, const MatrixF& m) { w.put_array(m.data(), static_cast<std::size_t>(m.size())); }

MatrixF get_matrix(LeReader& r, const CacheHeader& h) {
  MatrixF m(h.n_layers_tapped, h.hidden_dim);
  r.get_array(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

VectorF get_vector(LeReader& r, std::size_t n) {
  VectorF v(static_cast<Eigen::Index>(n));
  r.get_array(v.data(), n);
  return v;
}

}  // namespace

std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::EntitySwap:
      return "entity_swap";
    case Perturbation::NumericalCorruption:
      return "numerical_corruption";
    case Perturbation::NegationFlip:
      return "negation_flip";
    case Perturbation::BoundaryViolation:
      return "boundary_violation";
  }
  return "unknown";
}

Perturbation perturbation_from_string(const std::string& name) {
  for (auto p : kAllPerturbations) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown perturbation strategy '" + name + "'");
}

std::vector<Perturbation> CacheHeader::perturbations() const {
  std::vector<Perturbation> out;
  for (auto p : kAllPerturbations) {
    if (perturb_mask & (1u << static_cast<std::uint32_t>(p))) out.push_back(p);
  }
  return out;
}

bool ActivationRecord::operator==(const ActivationRecord& other) const {
  if (example_id != other.example_id || token_count != other.token_count) return false;
  if (pooled.size() != other.pooled.size()) return false;
  for (std::size_t s = 0; s < pooled.size(); ++s) {
    if (!same_bits(pooled[s], other.pooled[s])) return false;
  }
  if (perturbed_pooled.size() != other.perturbed_pooled.size()) return false;
  for (const auto& [p, m] : perturbed_pooled) {
    auto it = other.perturbed_pooled.find(p);
    if (it == other.perturbed_pooled.end() || !same_bits(m, it->second)) return false;
  }
  return same_optional(last_token, other.last_token) && same_optional(before_state, other.before_state) &&
         same_optional(after_state, other.after_state) && same_optional(paired_correct, other.paired_correct) &&
         same_optional(paired_hallucinated, other.paired_hallucinated) &&
         same_optional(token_logprobs, other.token_logprobs);
}

CacheHeader header_for(const std::vector<ActivationRecord>& records, std::uint32_t total_layers,
                       std::vector<std::uint32_t> tap_layers) {
  if (records.empty() || records.front().pooled.empty()) {
    throw Error(ErrorCode::DimMismatch, "cannot derive a header from zero records");
  }
  const auto& first = records.front();
  CacheHeader h;
  h.n_examples = records.size();
  h.n_layers_tapped = static_cast<std::uint32_t>(first.pooled.front().rows());
  h.hidden_dim = static_cast<std::uint32_t>(first.pooled.front().cols());
  h.n_samples = static_cast<std::uint32_t>(first.pooled.size());
  h.total_layers = total_layers;
  h.tap_layers = std::move(tap_layers);
  if (first.token_logprobs) h.flags |= kHasTokenLogprobs;
  if (first.before_state) h.flags |= kHasBeforeAfter;
  if (first.last_token) h.flags |= kHasLastToken;
  if (first.paired_correct) h.flags |= kHasPairedStates;
  for (const auto& [p, m] : first.perturbed_pooled) h.perturb_mask |= 1u << static_cast<std::uint32_t>(p);
  if (h.perturb_mask) h.flags |= kHasPerturbed;
  return h;
}

void write_cache(const std::vector<ActivationRecord>& records, const CacheHeader& header,
                 const std::filesystem::path& path) {
  validate_header(header);
  if (records.size() != header.n_examples) {
    std::ostringstream msg;
    msg << "header declares " << header.n_examples << " examples but " << records.size() << " were given";
    throw Error(ErrorCode::DimMismatch, msg.str());
  }
  for (const auto& r : records) validate_record(r, header);

  CacheHeader h = header;
  std::vector<std::uint64_t> offsets;
  offsets.reserve(records.size());
  std::uint64_t cursor = 0;
  for (const auto& r : records) {
    offsets.push_back(cursor);
    cursor += record_bytes(h, r);
  }
  h.payload_bytes = cursor;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  LeWriter w(out);
  write_header(w, h);
  w.put_array(offsets.data(), offsets.size());

  for (const auto& r : records) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(r.example_id.size()));
    w.put_bytes(r.example_id.data(), r.example_id.size());
    w.put<std::uint32_t>(r.token_count);
    for (const auto& m : r.pooled) put_matrix(w, m);
    if (r.last_token) put_matrix(w, *r.last_token);
    if (r.before_state) {
      w.put_array(r.before_state->data(), static_cast<std::size_t>(r.before_state->size()));
      w.put_array(r.after_state->data(), static_cast<std::size_t>(r.after_state->size()));
    }
    for (const auto& [p, m] : r.perturbed_pooled) put_matrix(w, m);  // std::map keeps strategy order
    if (r.paired_correct) {
      put_matrix(w, *r.paired_correct);
      put_matrix(w, *r.paired_hallucinated);
    }
    if (r.token_logprobs) w.put_array(r.token_logprobs->data(), r.token_logprobs->size());
  }
  out.flush();
  w.check(path.string());
}

struct CacheReader::Impl {
  std::ifstream in;
  std::mutex mutex;
  std::uint64_t payload_start = 0;
};

CacheReader::CacheReader(const std::filesystem::path& path) : impl_(new Impl) {
  try {
    impl_->in.open(path, std::ios::binary);
    if (!impl_->in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
    std::error_code ec;
    const std::uint64_t file_size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot stat '" + path.string() + "'");

    std::array<char, 8> magic{};
    impl_->in.read(magic.data(), magic.size());
    if (!impl_->in || magic != kCacheMagic) {
      throw Error(ErrorCode::BadMagic, "'" + path.string() + "' is not an activation cache");
    }
    if (file_size < kCacheFixedHeaderBytes) throw Error(ErrorCode::TruncatedPayload, "header truncated");

    LeReader r(impl_->in, file_size - magic.size());
    header_.version = r.get<std::uint32_t>();
    if (header_.version != kCacheVersion) {
      throw Error(ErrorCode::BadMagic, "unsupported cache version " + std::to_string(header_.version));
    }
    if (r.get<std::uint32_t>() != kEndianMarker) throw Error(ErrorCode::BadMagic, "endianness marker mismatch");
    header_.n_examples = r.get<std::uint64_t>();
    header_.n_layers_tapped = r.get<std::uint32_t>();
    header_.hidden_dim = r.get<std::uint32_t>();
    header_.n_samples = r.get<std::uint32_t>();
    header_.flags = r.get<std::uint32_t>();
    header_.total_layers = r.get<std::uint32_t>();
    header_.perturb_mask = r.get<std::uint32_t>();
    header_.payload_bytes = r.get<std::uint64_t>();
    const auto declared_header_bytes = r.get<std::uint64_t>();
    if (header_.n_layers_tapped > (1u << 20) || header_.n_examples > (file_size / 8)) {
      throw Error(ErrorCode::TruncatedPayload, "header counts exceed file size");
    }
    if (declared_header_bytes != header_.header_bytes()) {
      throw Error(ErrorCode::TruncatedPayload, "header size field inconsistent with counts");
    }
    if (file_size < header_.header_bytes() || file_size - header_.header_bytes() != header_.payload_bytes) {
      std::ostringstream msg;
      msg << "declared payload " << header_.payload_bytes << " bytes, file holds "
          << (file_size < header_.header_bytes() ? 0 : file_size - header_.header_bytes());
      throw Error(ErrorCode::TruncatedPayload, msg.str());
    }
    header_.tap_layers.resize(header_.n_layers_tapped);
    r.get_array(header_.tap_layers.data(), header_.tap_layers.size());
    offsets_.resize(static_cast<std::size_t>(header_.n_examples));
    r.get_array(offsets_.data(), offsets_.size());
    validate_header(header_);
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
      if (offsets_[i] >= header_.payload_bytes || (i > 0 && offsets_[i] <= offsets_[i - 1])) {
        throw Error(ErrorCode::TruncatedPayload, "record offset index is corrupt");
      }
    }
    impl_->payload_start = header_.header_bytes();
  } catch (...) {
    delete impl_;
    throw;
  }
}

CacheReader::~CacheReader() { delete impl_; }

ActivationRecord CacheReader::read_raw(std::size_t i) const {
  if (i >= offsets_.size()) throw Error(ErrorCode::InvalidArgument, "record index out of range");
  const std::uint64_t end = i + 1 < offsets_.size() ? offsets_[i + 1] : header_.payload_bytes;
  std::lock_guard lock(impl_->mutex);
  impl_->in.clear();
  impl_->in.seekg(static_cast<std::streamoff>(impl_->payload_start + offsets_[i]));
  LeReader r(impl_->in, end - offsets_[i]);

  ActivationRecord rec;
  const auto id_len = r.get<std::uint32_t>();
  rec.example_id = r.get_string(id_len);
  rec.token_count = r.get<std::uint32_t>();
  if (rec.token_count < 1) throw Error(ErrorCode::TruncatedPayload, "record '" + rec.example_id + "' has T=0");
  const auto& h = header_;
  const std::size_t flat = static_cast<std::size_t>(h.n_layers_tapped) * h.hidden_dim;
  rec.pooled.reserve(h.n_samples);
  for (std::uint32_t s = 0; s < h.n_samples; ++s) rec.pooled.push_back(get_matrix(r, h));
  if (h.has(kHasLastToken)) rec.last_token = get_matrix(r, h);
  if (h.has(kHasBeforeAfter)) {
    rec.before_state = get_vector(r, flat);
    rec.after_state = get_vector(r, flat);
  }
  for (auto p : h.perturbations()) rec.perturbed_pooled.emplace(p, get_matrix(r, h));
  if (h.has(kHasPairedStates)) {
    rec.paired_correct = get_matrix(r, h);
    rec.paired_hallucinated = get_matrix(r, h);
  }
  if (h.has(kHasTokenLogprobs)) {
    std::vector<float> lp(rec.token_count);
    r.get_array(lp.data(), lp.size());
    rec.token_logprobs = std::move(lp);
  }
  return rec;
}

ActivationRecord CacheReader::read(std::size_t i) const {
  ActivationRecord rec = read_raw(i);
  if (auto bad = find_corruption(rec, header_.tap_layers)) {
    std::ostringstream msg;
    msg << "non-finite values in example '" << bad->example_id << "' at layers";
    for (auto l : bad->layers) msg << ' ' << l;
    if (bad->logprobs) msg << " (token log-probs)";
    throw NanDetectedError(msg.str(), {*bad});
  }
  return rec;
}

std::optional<CorruptEntry> find_corruption(const ActivationRecord& record,
                                            const std::vector<std::uint32_t>& tap_layers) {
  std::vector<bool> bad_layer(tap_layers.size(), false);
  auto scan_matrix = [&](const MatrixF& m) {
    for (Eigen::Index row = 0; row < m.rows(); ++row) {
      if (!m.row(row).allFinite() && static_cast<std::size_t>(row) < bad_layer.size()) bad_layer[row] = true;
    }
  };
  auto scan_flat = [&](const VectorF& v) {
    if (tap_layers.empty()) return;
    const auto d = v.size() / static_cast<Eigen::Index>(tap_layers.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) && d > 0) bad_layer[static_cast<std::size_t>(std::min<Eigen::Index>(i / d, bad_layer.size() - 1))] = true;
    }
  };
  for (const auto& m : record.pooled) scan_matrix(m);
  if (record.last_token) scan_matrix(*record.last_token);
  if (record.before_state) scan_flat(*record.before_state);
  if (record.after_state) scan_flat(*record.after_state);
  for (const auto& [p, m] : record.perturbed_pooled) scan_matrix(m);
  if (record.paired_correct) scan_matrix(*record.paired_correct);
  if (record.paired_hallucinated) scan_matrix(*record.paired_hallucinated);

  CorruptEntry entry{record.example_id, {}, false};
  for (std::size_t l = 0; l < bad_layer.size(); ++l) {
    if (bad_layer[l]) entry.layers.push_back(tap_layers[l]);
  }
  if (record.token_logprobs) {
    entry.logprobs = std::any_of(record.token_logprobs->begin(), record.token_logprobs->end(),
                                 [](float x) { return !std::isfinite(x); });
  }
  if (entry.layers.empty() && !entry.logprobs) return std::nullopt;
  return entry;
}

CacheContents read_cache(const std::filesystem::path& path, const ReadOptions& options) {
  CacheReader reader(path);
  CacheContents out;
  out.header = reader.header();
  out.records.reserve(reader.size());
  std::vector<CorruptEntry> corrupt;
  for (std::size_t i = 0; i < reader.size(); ++i) {
    ActivationRecord rec = reader.read_raw(i);
    if (auto bad = find_corruption(rec, out.header.tap_layers)) {
      corrupt.push_back(std::move(*bad));
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  if (!corrupt.empty() && !options.drop_corrupt) {
    std::ostringstream msg;
    msg << corrupt.size() << " example(s) hold non-finite values:";
    for (const auto& c : corrupt) {
      msg << " [" << c.example_id << ": layers";
      for (auto l : c.layers) msg << ' ' << l;
      if (c.logprobs) msg << " logprobs";
      msg << ']';
    }
    throw NanDetectedError(msg.str(), std::move(corrupt));
  }
  out.dropped = std::move(corrupt);
  return out;
}

Vector mean_pool(const Matrix& token_states) {
  if (token_states.rows() == 0) throw Error(ErrorCode::EmptySequence, "cannot pool zero tokens");
  return token_states.colwise().sum().transpose() / static_cast<double>(token_states.rows());
}

VectorF mean_pool(const MatrixF& token_states) {
  if (token_states.rows() == 0) throw Error(ErrorCode::EmptySequence, "cannot pool zero tokens");
  const Vector sum = token_states.cast<double>().colwise().sum().transpose();
  return (sum / static_cast<double>(token_states.rows())).cast<float>();
}

std::optional<std::size_t> LayerTapSpec::position_of(double fraction) const {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (std::abs(fractions[i] - fraction) < 1e-9) return i;
  }
  return std::nullopt;
}

LayerTapSpec resolve_taps(const std::vector<double>& fractions, std::uint32_t total_layers) {
  if (total_layers < 2) throw Error(ErrorCode::InvalidArgument, "total_layers must be >= 2");
  std::vector<std::pair<std::uint32_t, double>> resolved;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "tap fraction " + std::to_string(f) + " outside (0, 1]");
    }
    // Snap to 1e-9 first so products like 0.85 * 30 land on the exact .5 tie.
    const double product = std::round(f * total_layers * 1e9) / 1e9;
    resolved.emplace_back(static_cast<std::uint32_t>(std::round(product)), f);
  }
  std::stable_sort(resolved.begin(), resolved.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  LayerTapSpec spec;
  spec.total_layers = total_layers;
  for (const auto& [index, f] : resolved) {
    if (!spec.resolved_indices.empty() && spec.resolved_indices.back() == index) continue;
    spec.resolved_indices.push_back(index);
    spec.fractions.push_back(f);
  }
  if (spec.resolved_indices.size() < 2) {
    throw Error(ErrorCode::EmptyTaps, "fewer than two distinct tap layers survive rounding");
  }
  return spec;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
  out << "example_id\tcorpus\tline\n";
  for (const auto& e : entries) out << e.example_id << '\t' << e.corpus << '\t' << e.line << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::vector<ManifestEntry> out;
  std::string line;
  std::getline(in, line);  // header
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) {
      throw Error(ErrorCode::SchemaError, "manifest line " + std::to_string(lineno) + " needs three columns");
    }
    ManifestEntry e;
    e.example_id = line.substr(0, a);
    e.corpus = line.substr(a + 1, b - a - 1);
    e.line = std::stoul(line.substr(b + 1));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace driftkit
