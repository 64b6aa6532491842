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

// File formats.
//
// EMB1 embedding file (all integers and reals little-endian):
//   char[4]  "EMB1"
//   u32      version (1)
//   u32      ecapa_dim
//   u32      xvec_dim
//   u64      record count N
//   N x record:
//     u32 len, bytes  utterance id (UTF-8)
//     u32 len, bytes  speaker id (UTF-8)
//     f32[ecapa_dim + xvec_dim]  vector
//   u64      gender count G
//   G x (u32 len, bytes speaker id, u8 gender: 'f' or 'm')
// Vectors are stored as 32-bit reals: saving rounds to float, and a loaded
// set saves back to identical bytes.
//
// Embedding CSV: header "utt_id,speaker_id,gender,e0..e{E-1},x0..x{X-1}"
// (the e/x column counts define the layout), one utterance per row, values
// printed with 17 significant digits, gender as f, m or empty.
//
// Ranges CSV: header "dim,lo,hi", one row per dimension.
//
// key=value text: one "key=value" per line; blank lines and lines starting
// with '#' are ignored; surrounding whitespace is trimmed.

#ifndef SPKANON_IO_HPP_
#define SPKANON_IO_HPP_

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spkanon/common.hpp"
#include "spkanon/detail/binary_io.hpp"
#include "spkanon/embedding.hpp"

namespace spkanon {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

namespace detail {

inline void WriteString(std::ostream& os, const std::string& s) {
  Require(s.size() <= 0xffffffffu, "string too long for EMB1");
  WriteLE<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  WriteBytes(os, s);
}

inline std::string ReadString(std::istream& is, const char* what) {
  const auto n = ReadLE<std::uint32_t>(is, what);
  return ReadBytes(is, n, what);
}

inline std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double ParseDouble(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  Require(ec == std::errc() && ptr == end && !s.empty(), "cannot parse " + what + " '" + s + "'");
  return v;
}

inline std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// ------------------------------------------------------------------- EMB1

inline void WriteEmbeddings(std::ostream& os, const EmbeddingSet& set) {
  using detail::WriteLE;
  detail::WriteMagic(os, "EMB1");
  WriteLE<std::uint32_t>(os, kEmbeddingFormatVersion);
  WriteLE<std::uint32_t>(os, static_cast<std::uint32_t>(set.layout().ecapa_dim));
  WriteLE<std::uint32_t>(os, static_cast<std::uint32_t>(set.layout().xvec_dim));
  WriteLE<std::uint64_t>(os, set.size());
  for (const auto& it : set.items()) {
    detail::WriteString(os, it.utt_id);
    detail::WriteString(os, it.speaker_id);
    for (Eigen::Index d = 0; d < it.vector.size(); ++d) {
      WriteLE<float>(os, static_cast<float>(it.vector[d]));
    }
  }
  std::uint64_t n_genders = 0;
  for (const auto& [spk, g] : set.genders()) n_genders += g != Gender::kUnknown;
  WriteLE<std::uint64_t>(os, n_genders);
  for (const auto& [spk, g] : set.genders()) {
    if (g == Gender::kUnknown) continue;
    detail::WriteString(os, spk);
    WriteLE<std::uint8_t>(os, static_cast<std::uint8_t>(GenderCode(g)));
  }
}

inline EmbeddingSet ReadEmbeddings(std::istream& is) {
  using detail::ReadLE;
  detail::ExpectMagic(is, "EMB1");
  const auto version = ReadLE<std::uint32_t>(is, "EMB1 version");
  Require(version == kEmbeddingFormatVersion,
          "unsupported EMB1 version " + std::to_string(version));
  EmbeddingLayout layout;
  layout.ecapa_dim = static_cast<int>(ReadLE<std::uint32_t>(is, "EMB1 layout"));
  layout.xvec_dim = static_cast<int>(ReadLE<std::uint32_t>(is, "EMB1 layout"));
  EmbeddingSet set(layout);
  const auto count = ReadLE<std::uint64_t>(is, "EMB1 count");
  for (std::uint64_t r = 0; r < count; ++r) {
    UtteranceEmbedding it;
    it.utt_id = detail::ReadString(is, "EMB1 utterance id");
    it.speaker_id = detail::ReadString(is, "EMB1 speaker id");
    it.vector.resize(layout.total_dim());
    for (int d = 0; d < layout.total_dim(); ++d) it.vector[d] = ReadLE<float>(is, "EMB1 vector");
    set.Add(std::move(it));
  }
  const auto n_genders = ReadLE<std::uint64_t>(is, "EMB1 gender count");
  for (std::uint64_t g = 0; g < n_genders; ++g) {
    const auto spk = detail::ReadString(is, "EMB1 gender speaker id");
    const char code = static_cast<char>(ReadLE<std::uint8_t>(is, "EMB1 gender"));
    set.SetGender(spk, ParseGender(std::string_view(&code, 1)));
  }
  return set;
}

inline void SaveEmbeddings(const std::string& path, const EmbeddingSet& set) {
  std::ofstream os(path, std::ios::binary);
  Require(os.good(), "cannot open '" + path + "' for writing");
  WriteEmbeddings(os, set);
  Require(os.good(), "write failed for '" + path + "'");
}

inline EmbeddingSet LoadEmbeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  Require(is.good(), "cannot open '" + path + "'");
  try {
    return ReadEmbeddings(is);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

// -------------------------------------------------------------------- CSV

inline void WriteEmbeddingsCsv(std::ostream& os, const EmbeddingSet& set) {
  os << "utt_id,speaker_id,gender";
  for (int d = 0; d < set.layout().ecapa_dim; ++d) os << ",e" << d;
  for (int d = 0; d < set.layout().xvec_dim; ++d) os << ",x" << d;
  os << '\n';
  for (const auto& it : set.items()) {
    const Gender g = set.GenderOf(it.speaker_id);
    os << it.utt_id << ',' << it.speaker_id << ',';
    if (g != Gender::kUnknown) os << GenderCode(g);
    for (Eigen::Index d = 0; d < it.vector.size(); ++d) os << ',' << detail::FormatDouble(it.vector[d]);
    os << '\n';
  }
}

inline EmbeddingSet ReadEmbeddingsCsv(std::istream& is) {
  std::string line;
  Require(static_cast<bool>(std::getline(is, line)), "embedding CSV: missing header");
  const auto header = detail::SplitCsv(line);
  Require(header.size() >= 3 && header[0] == "utt_id" && header[1] == "speaker_id" &&
              header[2] == "gender",
          "embedding CSV: header must start with utt_id,speaker_id,gender");
  EmbeddingLayout layout{0, 0};
  for (std::size_t c = 3; c < header.size(); ++c) {
    const bool ecapa = header[c] == "e" + std::to_string(layout.ecapa_dim);
    const bool xvec = header[c] == "x" + std::to_string(layout.xvec_dim);
    Require(ecapa ? layout.xvec_dim == 0 : xvec,
            "embedding CSV: unexpected column '" + header[c] + "'");
    (ecapa ? layout.ecapa_dim : layout.xvec_dim) += 1;
  }
  EmbeddingSet set(layout);
  std::map<std::string, Gender> genders;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (detail::Trim(line).empty()) continue;
    const auto cells = detail::SplitCsv(line);
    Require(cells.size() == header.size(),
            "embedding CSV row " + std::to_string(row) + ": expected " +
                std::to_string(header.size()) + " columns");
    Vector v(layout.total_dim());
    for (int d = 0; d < layout.total_dim(); ++d) {
      v[d] = detail::ParseDouble(cells[3 + d], "value in row " + std::to_string(row));
    }
    set.Add({cells[0], cells[1], std::move(v)});
    const Gender g = ParseGender(cells[2]);
    if (g != Gender::kUnknown) {
      auto [pos, fresh] = genders.emplace(cells[1], g);
      Require(fresh || pos->second == g, "embedding CSV: conflicting genders for '" + cells[1] + "'");
    }
  }
  for (const auto& [spk, g] : genders) set.SetGender(spk, g);
  return set;
}

// ----------------------------------------------------------------- ranges

inline void WriteRangesCsv(std::ostream& os, const DimRanges& r) {
  os << "dim,lo,hi\n";
  for (int d = 0; d < r.dim(); ++d) {
    os << d << ',' << detail::FormatDouble(r.lo[d]) << ',' << detail::FormatDouble(r.hi[d]) << '\n';
  }
}

inline DimRanges ReadRangesCsv(std::istream& is) {
  std::string line;
  Require(static_cast<bool>(std::getline(is, line)) && detail::Trim(line) == "dim,lo,hi",
          "ranges CSV: header must be dim,lo,hi");
  std::vector<double> lo, hi;
  while (std::getline(is, line)) {
    if (detail::Trim(line).empty()) continue;
    const auto cells = detail::SplitCsv(line);
    Require(cells.size() == 3 && cells[0] == std::to_string(lo.size()),
            "ranges CSV: malformed row '" + line + "'");
    lo.push_back(detail::ParseDouble(cells[1], "range bound"));
    hi.push_back(detail::ParseDouble(cells[2], "range bound"));
    Require(lo.back() <= hi.back(), "ranges CSV: lo > hi in dimension " + cells[0]);
  }
  Require(!lo.empty(), "ranges CSV: no dimensions");
  return {Eigen::Map<Vector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
          Eigen::Map<Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
}

// -------------------------------------------------------------- key=value

/// Ordered key=value store used for configs, manifests and metric reports.
class KeyValues {
 public:
  void Set(const std::string& key, const std::string& value) {
    Require(!key.empty() && key.find_first_of("=\n") == std::string::npos,
            "invalid key '" + key + "'");
    Require(value.find('\n') == std::string::npos, "value for '" + key + "' contains a newline");
    values_[key] = value;
  }
  void Set(const std::string& key, const char* value) { Set(key, std::string(value)); }
  void Set(const std::string& key, double value) { Set(key, detail::FormatDouble(value)); }
  void Set(const std::string& key, bool value) { Set(key, std::string(value ? "true" : "false")); }
  template <typename T>
    requires std::is_integral_v<T>
  void Set(const std::string& key, T value) {
    Set(key, std::to_string(value));
  }

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string GetString(const std::string& key) const {
    auto it = values_.find(key);
    Require(it != values_.end(), "missing key '" + key + "'");
    return it->second;
  }
  double GetDouble(const std::string& key) const {
    return detail::ParseDouble(GetString(key), "value of '" + key + "'");
  }
  long long GetInt(const std::string& key) const {
    const auto s = GetString(key);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    Require(ec == std::errc() && ptr == s.data() + s.size() && !s.empty(),
            "value of '" + key + "' is not an integer: '" + s + "'");
    return v;
  }
  std::uint64_t GetUint(const std::string& key) const {
    const auto s = GetString(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    Require(ec == std::errc() && ptr == s.data() + s.size() && !s.empty(),
            "value of '" + key + "' is not an unsigned integer: '" + s + "'");
    return v;
  }
  bool GetBool(const std::string& key) const {
    const auto s = GetString(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw Error("value of '" + key + "' is not a boolean: '" + s + "'");
  }

  /// Entries of `other` override entries here.
  void Merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  void Write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  }
  std::string ToString() const {
    std::ostringstream os;
    Write(os);
    return os.str();
  }

  static KeyValues Read(std::istream& is) {
    KeyValues kv;
    std::string line;
    int row = 0;
    while (std::getline(is, line)) {
      ++row;
      const auto t = detail::Trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      Require(eq != std::string::npos, "line " + std::to_string(row) + ": expected key=value");
      kv.Set(detail::Trim(t.substr(0, eq)), detail::Trim(t.substr(eq + 1)));
    }
    return kv;
  }
  static KeyValues Parse(const std::string& text) {
    std::istringstream is(text);
    return Read(is);
  }

  void Save(const std::string& path) const {
    std::ofstream os(path);
    Require(os.good(), "cannot open '" + path + "' for writing");
    Write(os);
    Require(os.good(), "write failed for '" + path + "'");
  }
  static KeyValues Load(const std::string& path) {
    std::ifstream is(path);
    Require(is.good(), "cannot open '" + path + "'");
    try {
      return Read(is);
    } catch (const Error& e) {
      throw Error(path + ": " + e.what());
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace spkanon

#endif  // SPKANON_IO_HPP_
