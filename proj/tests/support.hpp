#pragma once

#include "driftkit/activation_cache.hpp"
#include "driftkit/corpus.hpp"
#include "driftkit/error.hpp"
#include "driftkit/rng.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("driftkit_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline driftkit::MatrixF random_matrix(std::size_t rows, std::size_t cols, driftkit::Rng& rng) {
  driftkit::MatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

inline driftkit::ActivationRecord random_record(const std::string& id, std::size_t taps, std::size_t d,
                                                std::size_t samples, driftkit::Rng& rng) {
  driftkit::ActivationRecord r;
  r.example_id = id;
  r.token_count = 3;
  for (std::size_t s = 0; s < samples; ++s) r.pooled.push_back(random_matrix(taps, d, rng));
  return r;
}

inline driftkit::Example example(const std::string& id, int label, bool tf = true) {
  driftkit::Example e;
  e.example_id = id;
  e.prompt = "question " + id;
  e.response = "answer " + id;
  e.label = label;
  if (tf) {
    e.reference_text = "reference " + id;
    e.hallucinated_text = "wrong " + id;
  }
  return e;
}

template <typename F>
driftkit::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const driftkit::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a driftkit::Error";
  return driftkit::ErrorCode::InvalidArgument;
}

}  // namespace testing_support
