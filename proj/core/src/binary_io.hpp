#pragma once

// Little-endian primitives shared by the activation cache and feature sidecars.

#include "driftkit/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace driftkit::detail {

template <typename T>
T byteswap_if_big(T value) noexcept {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    value = byteswap_if_big(value);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
  void put_array(const T* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    } else {
      for (std::size_t i = 0; i < n; ++i) put(data[i]);
    }
  }

  void put_bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  void check(const std::string& what) const {
    if (!out_) throw Error(ErrorCode::IoFailure, "write failed: " + what);
  }

 private:
  std::ostream& out_;
};

class LeReader {
 public:
  LeReader(std::istream& in, std::uint64_t limit) : in_(in), remaining_(limit) {}

  template <typename T>
  T get() {
    T value{};
    take(sizeof(T));
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw Error(ErrorCode::TruncatedPayload, "unexpected end of file");
    return byteswap_if_big(value);
  }

  template <typename T>
  void get_array(T* data, std::size_t n) {
    take(n * sizeof(T));
    in_.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw Error(ErrorCode::TruncatedPayload, "unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i) data[i] = byteswap_if_big(data[i]);
    }
  }

  std::string get_string(std::size_t n) {
    std::string s(n, '\0');
    take(n);
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorCode::TruncatedPayload, "unexpected end of file");
    return s;
  }

 private:
  void take(std::uint64_t n) {
    if (n > remaining_) throw Error(ErrorCode::TruncatedPayload, "record extends past declared payload");
    remaining_ -= n;
  }

  std::istream& in_;
  std::uint64_t remaining_;
};

}  // namespace driftkit::detail
