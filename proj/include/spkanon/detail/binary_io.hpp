// Copyright (c) 2026 The spkanon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPKANON_DETAIL_BINARY_IO_HPP_
#define SPKANON_DETAIL_BINARY_IO_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "spkanon/common.hpp"

namespace spkanon::detail {

// All multi-byte values on disk are little-endian regardless of host order.
template <typename T>
void WriteLE(std::ostream& os, T value) {
  std::array<char, sizeof(T)> buf;
  std::memcpy(buf.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  os.write(buf.data(), buf.size());
}

template <typename T>
T ReadLE(std::istream& is, const char* what) {
  std::array<char, sizeof(T)> buf;
  is.read(buf.data(), buf.size());
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(std::string("truncated input while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  T value;
  std::memcpy(&value, buf.data(), sizeof(T));
  return value;
}

inline void WriteMagic(std::ostream& os, const char (&magic)[5]) {
  os.write(magic, 4);
}

inline void ExpectMagic(std::istream& is, const char (&magic)[5]) {
  char buf[4] = {};
  is.read(buf, 4);
  if (is.gcount() != 4 || std::memcmp(buf, magic, 4) != 0) {
    throw Error(std::string("bad magic, expected '") + magic + "'");
  }
}

inline void WriteBytes(std::ostream& os, const std::string& s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadBytes(std::istream& is, std::size_t n, const char* what) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n)) {
    throw Error(std::string("truncated input while reading ") + what);
  }
  return s;
}

}  // namespace spkanon::detail

#endif  // SPKANON_DETAIL_BINARY_IO_HPP_
