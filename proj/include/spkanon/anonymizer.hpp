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

// Speaker embedding anonymization.
//
//  random    each dimension drawn uniformly from its valid range
//  pool      mean of a random m-subset of the n pool speakers least similar
//            (lowest PLDA LLR) to the source, then min-max rescaled onto the
//            reference ranges
//  pool_raw  pool without the rescaling step

#ifndef SPKANON_ANONYMIZER_HPP_
#define SPKANON_ANONYMIZER_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spkanon/common.hpp"
#include "spkanon/embedding.hpp"
#include "spkanon/plda.hpp"

namespace spkanon {

enum class Strategy { kRandom, kPool, kPoolRaw };

inline std::string StrategyName(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kPool: return "pool";
    default: return "pool_raw";
  }
}

inline Strategy ParseStrategy(std::string_view s) {
  if (s == "random") return Strategy::kRandom;
  if (s == "pool") return Strategy::kPool;
  if (s == "pool_raw" || s == "pool-raw") return Strategy::kPoolRaw;
  throw Error("unknown strategy '" + std::string(s) + "'");
}

enum class AssignmentLevel { kSpeaker, kUtterance };

/// Where the normalization target ranges come from.
enum class RangeReference { kInput, kPool };

struct PoolConfig {
  int n_farthest = 200;
  int m_subset = 100;
  bool normalize = true;
  bool gender_filter = false;
  AssignmentLevel level = AssignmentLevel::kSpeaker;
  RangeReference reference = RangeReference::kInput;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct Provenance {
  std::uint64_t seed = 0;
  // Pool strategies.
  int n_farthest_requested = 0;
  int m_subset_requested = 0;
  int n_farthest = 0;
  int m_subset = 0;
  std::vector<std::string> selected;  // the averaged pool speakers, sorted
};

struct AnonymizedUtterance {
  std::string utt_id;
  std::string speaker_id;
  Vector vector;
  Provenance provenance;
};

struct AnonymizationResult {
  Strategy strategy = Strategy::kPool;
  std::string split_tag;
  std::uint64_t seed = 0;
  EmbeddingLayout layout;
  std::vector<AnonymizedUtterance> items;  // input order, one per utterance
  std::map<std::string, Gender> genders;
  std::vector<std::string> warnings;

  const AnonymizedUtterance& at(const std::string& utt_id) const {
    for (const auto& it : items) {
      if (it.utt_id == utt_id) return it;
    }
    throw Error("no anonymization for utterance '" + utt_id + "'");
  }

  /// The anonymized vectors as an embedding set (no channel applied).
  EmbeddingSet ToSet() const {
    EmbeddingSet out(layout);
    for (const auto& it : items) out.Add({it.utt_id, it.speaker_id, it.vector});
    for (const auto& [spk, g] : genders) out.SetGender(spk, g);
    return out;
  }
};

/// Uniform draw inside `ranges`, independently per dimension.
inline Vector AnonymizeRandom(const DimRanges& ranges, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector out(ranges.dim());
  for (int d = 0; d < ranges.dim(); ++d) {
    const double lo = ranges.lo[d], hi = ranges.hi[d];
    if (!(hi > lo)) {
      out[d] = lo;
      continue;
    }
    std::uniform_real_distribution<double> u(lo, hi);
    // uniform_real_distribution may round up to hi; keep the draw closed.
    out[d] = std::clamp(u(rng), lo, hi);
  }
  return out;
}

/// Pool speakers with their PLDA-transformed coordinates, sorted by id.
class PreparedPool {
 public:
  PreparedPool(const PldaModel& model, const std::map<std::string, Vector>& speakers)
      : model_(&model) {
    Require(!speakers.empty(), "pool is empty");
    for (const auto& [id, v] : speakers) {
      ids_.push_back(id);
      vectors_.push_back(v);
      transformed_.push_back(model.Transform(v));
    }
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Vector>& vectors() const { return vectors_; }

  /// Indices (into ids()) of the k pool speakers with the smallest LLR to
  /// `target`, restricted to `allowed` when given. Ties are broken by id.
  std::vector<std::size_t> Farthest(const Vector& target, std::size_t k,
                                    const std::vector<bool>* allowed = nullptr) const {
    const Vector ut = model_->Transform(target);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      if (allowed && !(*allowed)[i]) continue;
      scored.emplace_back(model_->ScoreTransformed(ut, transformed_[i]), i);
    }
    // Indices follow sorted id order, so comparing indices compares ids.
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
  }

 private:
  const PldaModel* model_;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::vector<Vector> transformed_;
};

/// Ids of the k pool speakers least similar to `target` (smallest LLR),
/// most distant first. k >= pool size returns the whole pool.
inline std::vector<std::string> SelectFarthest(const PldaModel& model, const Vector& target,
                                               const std::map<std::string, Vector>& pool,
                                               std::size_t k) {
  PreparedPool prepared(model, pool);
  std::vector<std::string> out;
  for (auto i : prepared.Farthest(target, k)) out.push_back(prepared.ids()[i]);
  return out;
}

namespace detail {

/// Uniform m-subset of {0..n-1} (partial Fisher-Yates), returned sorted.
inline std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t m,
                                                         std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Source units to anonymize: one per speaker or one per utterance.
struct Unit {
  std::string key;                   // speaker id or utt id
  std::string speaker_id;
  Vector vector;                     // speaker mean or the utterance vector
  std::vector<std::size_t> members;  // utterance indices it covers
};

inline std::vector<Unit> MakeUnits(const EmbeddingSet& set, AssignmentLevel level) {
  std::vector<Unit> units;
  if (level == AssignmentLevel::kSpeaker) {
    auto means = SpeakerLevel(set);
    for (auto& [spk, idx] : set.BySpeaker()) {
      units.push_back({spk, spk, means.at(spk), idx});
    }
  } else {
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& it = set.items()[i];
      units.push_back({it.utt_id, it.speaker_id, it.vector, {i}});
    }
  }
  return units;
}

inline AnonymizationResult Expand(const EmbeddingSet& set, const std::vector<Unit>& units,
                                  std::vector<Vector> vectors,
                                  std::vector<Provenance> provenance) {
  AnonymizationResult result;
  result.layout = set.layout();
  result.genders = set.genders();
  result.items.resize(set.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (auto i : units[u].members) {
      const auto& src = set.items()[i];
      result.items[i] = {src.utt_id, src.speaker_id, vectors[u], provenance[u]};
    }
  }
  return result;
}

}  // namespace detail

/// Random strategy over a whole set. One draw per unit (speaker or
/// utterance); the per-unit seed is derived from (seed, split_tag, key).
inline AnonymizationResult AnonymizeRandomSet(const EmbeddingSet& set, const DimRanges& ranges,
                                              const PoolConfig& cfg,
                                              const std::string& split_tag = "") {
  Require(!set.empty(), "anonymize: empty input set");
  Require(ranges.dim() == set.dim(), "anonymize: ranges do not match layout");
  const auto units = detail::MakeUnits(set, cfg.level);
  std::vector<Vector> vecs(units.size());
  std::vector<Provenance> prov(units.size());
  ParallelFor(units.size(), cfg.threads, [&](std::size_t u) {
    prov[u].seed = DeriveSeed(cfg.seed, split_tag, units[u].key);
    vecs[u] = AnonymizeRandom(ranges, prov[u].seed);
  });
  auto result = detail::Expand(set, units, std::move(vecs), std::move(prov));
  result.strategy = Strategy::kRandom;
  result.split_tag = split_tag;
  result.seed = cfg.seed;
  return result;
}

/// Pool strategy. Selection works on speaker-level pool vectors. With
/// cfg.normalize the whole result is min-max rescaled onto the reference
/// ranges (the input set's utterance-level ranges by default).
inline AnonymizationResult AnonymizePool(const EmbeddingSet& targets, const EmbeddingSet& pool,
                                         const PldaModel& model, const PoolConfig& cfg,
                                         const std::string& split_tag = "") {
  Require(!targets.empty(), "anonymize: empty input set");
  Require(!pool.empty(), "anonymize: empty pool");
  Require(targets.dim() == pool.dim(), "anonymize: pool layout differs from input layout");
  Require(model.input_dim() == targets.dim(),
          "anonymize: PLDA model expects dimension " + std::to_string(model.input_dim()) +
              ", embeddings have " + std::to_string(targets.dim()));
  Require(cfg.n_farthest >= 1 && cfg.m_subset >= 1 && cfg.m_subset <= cfg.n_farthest,
          "anonymize: need 1 <= m_subset <= n_farthest");

  AnonymizationResult result_meta;
  const PreparedPool prepared(model, SpeakerLevel(pool));
  const std::size_t pool_size = prepared.size();
  if (static_cast<std::size_t>(cfg.n_farthest) > pool_size) {
    result_meta.warnings.push_back("n_farthest " + std::to_string(cfg.n_farthest) +
                                   " exceeds pool size " + std::to_string(pool_size) +
                                   "; clamped");
  }

  std::vector<Gender> pool_gender(pool_size, Gender::kUnknown);
  for (std::size_t i = 0; i < pool_size; ++i) pool_gender[i] = pool.GenderOf(prepared.ids()[i]);

  const auto units = detail::MakeUnits(targets, cfg.level);
  std::vector<Vector> vecs(units.size());
  std::vector<Provenance> prov(units.size());
  ParallelFor(units.size(), cfg.threads, [&](std::size_t u) {
    const auto& unit = units[u];
    std::vector<bool> allowed;
    const Gender g = targets.GenderOf(unit.speaker_id);
    if (cfg.gender_filter && g != Gender::kUnknown) {
      allowed.resize(pool_size);
      bool any = false;
      for (std::size_t i = 0; i < pool_size; ++i) {
        allowed[i] = pool_gender[i] == g;
        any |= allowed[i];
      }
      if (!any) allowed.clear();  // no same-gender pool speakers: use all
    }
    const auto far = prepared.Farthest(unit.vector, static_cast<std::size_t>(cfg.n_farthest),
                                       allowed.empty() ? nullptr : &allowed);
    const std::size_t m = std::min(static_cast<std::size_t>(cfg.m_subset), far.size());
    Provenance& p = prov[u];
    p.seed = DeriveSeed(cfg.seed, split_tag, unit.key);
    p.n_farthest_requested = cfg.n_farthest;
    p.m_subset_requested = cfg.m_subset;
    p.n_farthest = static_cast<int>(far.size());
    p.m_subset = static_cast<int>(m);
    Vector mean = Vector::Zero(targets.dim());
    for (auto pick : detail::SampleWithoutReplacement(far.size(), m, p.seed)) {
      mean += prepared.vectors()[far[pick]];
      p.selected.push_back(prepared.ids()[far[pick]]);
    }
    std::sort(p.selected.begin(), p.selected.end());
    vecs[u] = mean / static_cast<double>(m);
  });

  if (cfg.normalize) {
    const DimRanges source = ComputeRanges(vecs);
    const DimRanges target = cfg.reference == RangeReference::kPool
                                 ? ComputeRanges(pool)
                                 : ComputeRanges(targets);
    vecs = Rescale(vecs, source, target);
  }

  auto result = detail::Expand(targets, units, std::move(vecs), std::move(prov));
  result.strategy = cfg.normalize ? Strategy::kPool : Strategy::kPoolRaw;
  result.split_tag = split_tag;
  result.seed = cfg.seed;
  result.warnings = std::move(result_meta.warnings);
  return result;
}

/// Everything a strategy may need besides the set being anonymized.
struct AnonymizerResources {
  const EmbeddingSet* pool = nullptr;
  const PldaModel* model = nullptr;
  const DimRanges* ranges = nullptr;  // random strategy; defaults to pool ranges
};

/// Anonymizes one dataset split. The split tag enters every per-unit seed,
/// so e.g. "enroll" and "trial" receive independent target assignments.
inline AnonymizationResult AssignTargets(const EmbeddingSet& set, Strategy strategy,
                                         PoolConfig cfg, const std::string& split_tag,
                                         const AnonymizerResources& res) {
  if (strategy == Strategy::kRandom) {
    if (res.ranges) return AnonymizeRandomSet(set, *res.ranges, cfg, split_tag);
    Require(res.pool != nullptr, "random strategy needs ranges or a reference pool");
    return AnonymizeRandomSet(set, ComputeRanges(*res.pool), cfg, split_tag);
  }
  Require(res.pool != nullptr && res.model != nullptr,
          "pool strategies need a pool and a PLDA model");
  cfg.normalize = strategy == Strategy::kPool;
  return AnonymizePool(set, *res.pool, *res.model, cfg, split_tag);
}

}  // namespace spkanon

#endif  // SPKANON_ANONYMIZER_HPP_
