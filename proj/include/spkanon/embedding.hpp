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

// Embedding containers and per-dimension statistics.
//
// A combined speaker vector is the ECAPA embedding followed by the x-vector:
//
//   [ ecapa[0] ... ecapa[ecapa_dim-1] | xvec[0] ... xvec[xvec_dim-1] ]
//
// Everything here is a pure function over immutable values.

#ifndef SPKANON_EMBEDDING_HPP_
#define SPKANON_EMBEDDING_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "spkanon/common.hpp"

namespace spkanon {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct EmbeddingLayout {
  int ecapa_dim = 192;
  int xvec_dim = 512;

  int total_dim() const { return ecapa_dim + xvec_dim; }

  void Validate() const {
    Require(ecapa_dim >= 1, "layout: ecapa_dim must be >= 1");
    Require(xvec_dim >= 0, "layout: xvec_dim must be >= 0");
  }

  bool operator==(const EmbeddingLayout&) const = default;
};

/// Which part of a combined vector an operation should look at.
enum class Slice { kEcapa, kXvector, kFull };

enum class Gender { kUnknown, kFemale, kMale };

inline char GenderCode(Gender g) {
  switch (g) {
    case Gender::kFemale: return 'f';
    case Gender::kMale: return 'm';
    default: return 'u';
  }
}

inline Gender ParseGender(std::string_view s) {
  if (s == "f" || s == "F" || s == "female") return Gender::kFemale;
  if (s == "m" || s == "M" || s == "male") return Gender::kMale;
  if (s == "u" || s == "U" || s == "unknown" || s.empty()) return Gender::kUnknown;
  throw Error("unknown gender label '" + std::string(s) + "'");
}

struct UtteranceEmbedding {
  std::string utt_id;
  std::string speaker_id;
  Vector vector;
};

inline bool AllFinite(const Vector& v) { return v.allFinite(); }

/// Labeled utterance embeddings sharing one layout. Construction validates
/// dimensions, finiteness and utt_id uniqueness.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(EmbeddingLayout layout) : layout_(layout) {
    layout_.Validate();
  }
  EmbeddingSet(EmbeddingLayout layout, std::vector<UtteranceEmbedding> items,
               std::map<std::string, Gender> genders = {})
      : layout_(layout), genders_(std::move(genders)) {
    layout_.Validate();
    items_.reserve(items.size());
    for (auto& it : items) Add(std::move(it));
  }

  void Add(UtteranceEmbedding item) {
    Require(item.vector.size() == layout_.total_dim(),
            "utterance '" + item.utt_id + "' has dimension " +
                std::to_string(item.vector.size()) + ", layout expects " +
                std::to_string(layout_.total_dim()));
    Require(AllFinite(item.vector),
            "utterance '" + item.utt_id + "' has non-finite components");
    Require(ids_.insert(item.utt_id).second,
            "duplicate utt_id '" + item.utt_id + "'");
    items_.push_back(std::move(item));
  }

  void SetGender(const std::string& speaker_id, Gender g) {
    if (g == Gender::kUnknown) {
      genders_.erase(speaker_id);
    } else {
      genders_[speaker_id] = g;
    }
  }

  Gender GenderOf(const std::string& speaker_id) const {
    auto it = genders_.find(speaker_id);
    return it == genders_.end() ? Gender::kUnknown : it->second;
  }

  const EmbeddingLayout& layout() const { return layout_; }
  const std::vector<UtteranceEmbedding>& items() const { return items_; }
  const std::map<std::string, Gender>& genders() const { return genders_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  int dim() const { return layout_.total_dim(); }
  bool Contains(const std::string& utt_id) const { return ids_.count(utt_id) > 0; }

  /// Speaker ids in sorted order.
  std::vector<std::string> Speakers() const {
    std::vector<std::string> out;
    for (const auto& it : items_) out.push_back(it.speaker_id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Utterance indices grouped by speaker, keys sorted.
  std::map<std::string, std::vector<std::size_t>> BySpeaker() const {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < items_.size(); ++i) {
      out[items_[i].speaker_id].push_back(i);
    }
    return out;
  }

  /// Copy restricted to the given speakers (gender map carried along).
  EmbeddingSet Subset(const std::vector<std::string>& speakers) const {
    std::unordered_set<std::string> keep(speakers.begin(), speakers.end());
    EmbeddingSet out(layout_);
    for (const auto& it : items_) {
      if (keep.count(it.speaker_id)) {
        out.Add(it);
        out.SetGender(it.speaker_id, GenderOf(it.speaker_id));
      }
    }
    return out;
  }

 private:
  EmbeddingLayout layout_;
  std::vector<UtteranceEmbedding> items_;
  std::map<std::string, Gender> genders_;
  std::unordered_set<std::string> ids_;
};

/// Per-dimension closed intervals [lo[d], hi[d]].
struct DimRanges {
  Vector lo;
  Vector hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool Contains(const Vector& v) const {
    if (v.size() != lo.size()) return false;
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      if (v[d] < lo[d] || v[d] > hi[d]) return false;
    }
    return true;
  }
};

inline Vector ConcatEmbeddings(std::span<const double> ecapa,
                               std::span<const double> xvec,
                               const EmbeddingLayout& layout = {}) {
  Require(static_cast<int>(ecapa.size()) == layout.ecapa_dim,
          "concat: ECAPA part has dimension " + std::to_string(ecapa.size()) +
              ", layout expects " + std::to_string(layout.ecapa_dim));
  Require(static_cast<int>(xvec.size()) == layout.xvec_dim,
          "concat: x-vector part has dimension " + std::to_string(xvec.size()) +
              ", layout expects " + std::to_string(layout.xvec_dim));
  Vector out(layout.total_dim());
  std::copy(ecapa.begin(), ecapa.end(), out.data());
  std::copy(xvec.begin(), xvec.end(), out.data() + layout.ecapa_dim);
  Require(AllFinite(out), "concat: non-finite input");
  return out;
}

inline Vector ConcatEmbeddings(const Vector& ecapa, const Vector& xvec,
                               const EmbeddingLayout& layout = {}) {
  return ConcatEmbeddings(std::span<const double>(ecapa.data(), ecapa.size()),
                          std::span<const double>(xvec.data(), xvec.size()),
                          layout);
}

/// [offset, length) of a slice within the combined vector.
inline std::pair<int, int> SliceBounds(const EmbeddingLayout& layout, Slice s) {
  switch (s) {
    case Slice::kEcapa: return {0, layout.ecapa_dim};
    case Slice::kXvector: return {layout.ecapa_dim, layout.xvec_dim};
    default: return {0, layout.total_dim()};
  }
}

inline Vector SliceOf(const Vector& v, const EmbeddingLayout& layout, Slice s) {
  auto [off, len] = SliceBounds(layout, s);
  return v.segment(off, len);
}

/// Restricts every vector of a set to one slice. The resulting layout puts
/// the kept part in the ECAPA position with xvec_dim = 0.
inline EmbeddingSet RestrictToSlice(const EmbeddingSet& set, Slice s) {
  if (s == Slice::kFull) return set;
  auto [off, len] = SliceBounds(set.layout(), s);
  Require(len >= 1, "slice is empty under this layout");
  EmbeddingSet out(EmbeddingLayout{len, 0});
  for (const auto& it : set.items()) {
    out.Add({it.utt_id, it.speaker_id, it.vector.segment(off, len)});
  }
  for (const auto& [spk, g] : set.genders()) out.SetGender(spk, g);
  return out;
}

/// Per-speaker mean vector, keyed by speaker id.
inline std::map<std::string, Vector> SpeakerLevel(const EmbeddingSet& set) {
  Require(!set.empty(), "speaker_level: empty set");
  std::map<std::string, Vector> out;
  for (const auto& [spk, idx] : set.BySpeaker()) {
    Vector sum = Vector::Zero(set.dim());
    for (std::size_t i : idx) sum += set.items()[i].vector;
    out.emplace(spk, sum / static_cast<double>(idx.size()));
  }
  return out;
}

/// Speaker-level vectors wrapped as a set with one "utterance" per speaker,
/// the utt_id being the speaker id.
inline EmbeddingSet SpeakerLevelSet(const EmbeddingSet& set) {
  EmbeddingSet out(set.layout());
  for (auto& [spk, v] : SpeakerLevel(set)) out.Add({spk, spk, std::move(v)});
  for (const auto& [spk, g] : set.genders()) out.SetGender(spk, g);
  return out;
}

inline DimRanges ComputeRanges(std::span<const Vector> vecs) {
  Require(!vecs.empty(), "compute_ranges: empty set");
  DimRanges r{vecs.front(), vecs.front()};
  for (const auto& v : vecs) {
    Require(v.size() == r.lo.size(), "compute_ranges: dimension mismatch");
    r.lo = r.lo.cwiseMin(v);
    r.hi = r.hi.cwiseMax(v);
  }
  return r;
}

enum class RangeLevel { kUtterance, kSpeaker };

inline DimRanges ComputeRanges(const EmbeddingSet& set,
                               RangeLevel level = RangeLevel::kUtterance) {
  Require(!set.empty(), "compute_ranges: empty set");
  std::vector<Vector> vecs;
  if (level == RangeLevel::kSpeaker) {
    for (auto& [spk, v] : SpeakerLevel(set)) vecs.push_back(std::move(v));
  } else {
    vecs.reserve(set.size());
    for (const auto& it : set.items()) vecs.push_back(it.vector);
  }
  return ComputeRanges(vecs);
}

/// Per-dimension min-max map of one value. Zero-width source dimensions map
/// to the target midpoint; values at or above source.hi land exactly on
/// target.hi so the map is onto.
inline double RescaleValue(double x, double src_lo, double src_hi,
                           double dst_lo, double dst_hi) {
  const double src_w = src_hi - src_lo;
  if (!(src_w > 0.0)) return dst_lo + 0.5 * (dst_hi - dst_lo);
  if (x >= src_hi) return dst_hi;
  const double t = (x - src_lo) / src_w;
  return std::min(dst_lo + t * (dst_hi - dst_lo), dst_hi);
}

inline std::vector<Vector> Rescale(std::span<const Vector> vecs,
                                   const DimRanges& source,
                                   const DimRanges& target) {
  Require(source.dim() == target.dim(), "rescale: range dimension mismatch");
  std::vector<Vector> out;
  out.reserve(vecs.size());
  for (const auto& v : vecs) {
    Require(v.size() == source.lo.size(), "rescale: vector dimension mismatch");
    Vector r(v.size());
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      r[d] = RescaleValue(v[d], source.lo[d], source.hi[d], target.lo[d],
                          target.hi[d]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace spkanon

#endif  // SPKANON_EMBEDDING_HPP_
