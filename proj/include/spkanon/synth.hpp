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

// Synthetic speaker embeddings and the resynthesis channel.
//
// gen_synthetic draws data from the two-covariance model itself:
//   speaker mean  m_s ~ N(0, between_std^2 I)
//   utterance     x   ~ N(m_s, within_std^2 I)
// so a fitted PLDA has a known ground truth.
//
// The resynthesis channel stands in for "synthesize speech from the
// anonymized embedding, then re-extract an embedding from that audio": the
// attacker sees the assigned anonymized vector plus isotropic Gaussian noise,
// drawn independently per utterance. The source vector never enters it.

#ifndef SPKANON_SYNTH_HPP_
#define SPKANON_SYNTH_HPP_

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

#include "spkanon/anonymizer.hpp"
#include "spkanon/common.hpp"
#include "spkanon/embedding.hpp"

namespace spkanon {

enum class GenderAssignment { kAlternating, kRatio, kNone };

struct SynthConfig {
  int n_speakers = 10;
  int utts_per_speaker = 5;
  EmbeddingLayout layout{16, 48};
  double between_std = 3.0;
  double within_std = 1.0;
  std::uint64_t seed = 0;
  GenderAssignment gender = GenderAssignment::kAlternating;
  double female_ratio = 0.5;       // kRatio: first round(ratio * n) are female
  std::string speaker_prefix = "spk";

  void Validate() const {
    layout.Validate();
    Require(n_speakers >= 1, "synth: n_speakers must be >= 1");
    Require(utts_per_speaker >= 1, "synth: utts_per_speaker must be >= 1");
    Require(between_std > 0.0 && within_std > 0.0, "synth: stds must be positive");
    Require(female_ratio >= 0.0 && female_ratio <= 1.0, "synth: female_ratio outside [0, 1]");
  }
};

inline std::string SpeakerName(const std::string& prefix, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return prefix + buf;
}

inline std::string UtteranceName(const std::string& speaker, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "-%03d", index);
  return speaker + buf;
}

inline EmbeddingSet GenSynthetic(const SynthConfig& cfg) {
  cfg.Validate();
  const int dim = cfg.layout.total_dim();
  EmbeddingSet set(cfg.layout);
  const int n_female = static_cast<int>(std::lround(cfg.female_ratio * cfg.n_speakers));
  for (int s = 0; s < cfg.n_speakers; ++s) {
    const std::string spk = SpeakerName(cfg.speaker_prefix, s);
    std::mt19937_64 rng(DeriveSeed(cfg.seed, "synth", spk));
    std::normal_distribution<double> between(0.0, cfg.between_std);
    std::normal_distribution<double> within(0.0, cfg.within_std);
    Vector mean(dim);
    for (int d = 0; d < dim; ++d) mean[d] = between(rng);
    for (int u = 0; u < cfg.utts_per_speaker; ++u) {
      Vector v(dim);
      for (int d = 0; d < dim; ++d) v[d] = mean[d] + within(rng);
      set.Add({UtteranceName(spk, u), spk, std::move(v)});
    }
    switch (cfg.gender) {
      case GenderAssignment::kAlternating:
        set.SetGender(spk, s % 2 == 0 ? Gender::kFemale : Gender::kMale);
        break;
      case GenderAssignment::kRatio:
        set.SetGender(spk, s < n_female ? Gender::kFemale : Gender::kMale);
        break;
      case GenderAssignment::kNone:
        break;
    }
  }
  return set;
}

struct ResynthConfig {
  double noise_std = 0.5;
  std::uint64_t seed = 0;
};

/// Attacker-visible embeddings: anonymized vector + N(0, noise_std^2 I) per
/// utterance. The per-utterance stream is seeded from (seed, split tag,
/// utt id), so output does not depend on iteration order.
inline EmbeddingSet SimulateResynthesis(const AnonymizationResult& result,
                                        const ResynthConfig& cfg) {
  Require(std::isfinite(cfg.noise_std) && cfg.noise_std >= 0.0,
          "resynthesis: noise_std must be finite and >= 0");
  EmbeddingSet out(result.layout);
  for (const auto& it : result.items) {
    Vector v = it.vector;
    if (cfg.noise_std > 0.0) {
      std::mt19937_64 rng(DeriveSeed(cfg.seed, "resynth", result.split_tag, it.utt_id));
      std::normal_distribution<double> noise(0.0, cfg.noise_std);
      for (Eigen::Index d = 0; d < v.size(); ++d) v[d] += noise(rng);
    }
    out.Add({it.utt_id, it.speaker_id, std::move(v)});
  }
  for (const auto& [spk, g] : result.genders) out.SetGender(spk, g);
  return out;
}

}  // namespace spkanon

#endif  // SPKANON_SYNTH_HPP_
