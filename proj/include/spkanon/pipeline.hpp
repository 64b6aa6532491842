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

// The end-to-end synthetic experiment: generate evaluation and pool
// speakers, train the PLDA backend on the pool, anonymize with each
// strategy, and evaluate every scenario. The whole run is described by a
// flat key=value configuration; saved next to the outputs, that
// configuration is the manifest from which the run can be replayed.

#ifndef SPKANON_PIPELINE_HPP_
#define SPKANON_PIPELINE_HPP_

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spkanon/anonymizer.hpp"
#include "spkanon/io.hpp"
#include "spkanon/plda.hpp"
#include "spkanon/scenario.hpp"
#include "spkanon/synth.hpp"

namespace spkanon {

struct PipelineConfig {
  SynthConfig eval{.n_speakers = 50, .utts_per_speaker = 10, .seed = 1, .speaker_prefix = "eval"};
  SynthConfig pool{.n_speakers = 400, .utts_per_speaker = 10, .seed = 2, .speaker_prefix = "pool"};
  PldaTrainConfig plda;
  std::vector<Strategy> strategies{Strategy::kPool, Strategy::kPoolRaw, Strategy::kRandom};
  PoolConfig anon;
  ResynthConfig resynth;
  Backend backend = Backend::kPlda;
  int threads = 1;  // does not affect results
};

inline std::string LevelName(AssignmentLevel l) {
  return l == AssignmentLevel::kSpeaker ? "speaker" : "utterance";
}
inline AssignmentLevel ParseLevel(std::string_view s) {
  if (s == "speaker") return AssignmentLevel::kSpeaker;
  if (s == "utterance") return AssignmentLevel::kUtterance;
  throw Error("unknown assignment level '" + std::string(s) + "' (expected speaker or utterance)");
}
inline std::string ReferenceName(RangeReference r) {
  return r == RangeReference::kInput ? "input" : "pool";
}
inline RangeReference ParseReference(std::string_view s) {
  if (s == "input") return RangeReference::kInput;
  if (s == "pool") return RangeReference::kPool;
  throw Error("unknown range reference '" + std::string(s) + "' (expected input or pool)");
}
inline std::string GenderAssignmentName(GenderAssignment g) {
  switch (g) {
    case GenderAssignment::kAlternating: return "alternating";
    case GenderAssignment::kRatio: return "ratio";
    default: return "none";
  }
}
inline GenderAssignment ParseGenderAssignment(std::string_view s) {
  if (s == "alternating") return GenderAssignment::kAlternating;
  if (s == "ratio") return GenderAssignment::kRatio;
  if (s == "none") return GenderAssignment::kNone;
  throw Error("unknown gender assignment '" + std::string(s) + "'");
}

namespace detail {

inline void SynthToKv(KeyValues& kv, const std::string& p, const SynthConfig& c) {
  kv.Set(p + ".n_speakers", c.n_speakers);
  kv.Set(p + ".utts_per_speaker", c.utts_per_speaker);
  kv.Set(p + ".ecapa_dim", c.layout.ecapa_dim);
  kv.Set(p + ".xvec_dim", c.layout.xvec_dim);
  kv.Set(p + ".between_std", c.between_std);
  kv.Set(p + ".within_std", c.within_std);
  kv.Set(p + ".seed", c.seed);
  kv.Set(p + ".gender", GenderAssignmentName(c.gender));
  kv.Set(p + ".female_ratio", c.female_ratio);
  kv.Set(p + ".speaker_prefix", c.speaker_prefix);
}

inline void SynthFromKv(const KeyValues& kv, const std::string& p, SynthConfig& c) {
  auto has = [&](const char* k) { return kv.Has(p + "." + k); };
  if (has("n_speakers")) c.n_speakers = static_cast<int>(kv.GetInt(p + ".n_speakers"));
  if (has("utts_per_speaker")) c.utts_per_speaker = static_cast<int>(kv.GetInt(p + ".utts_per_speaker"));
  if (has("ecapa_dim")) c.layout.ecapa_dim = static_cast<int>(kv.GetInt(p + ".ecapa_dim"));
  if (has("xvec_dim")) c.layout.xvec_dim = static_cast<int>(kv.GetInt(p + ".xvec_dim"));
  if (has("between_std")) c.between_std = kv.GetDouble(p + ".between_std");
  if (has("within_std")) c.within_std = kv.GetDouble(p + ".within_std");
  if (has("seed")) c.seed = kv.GetUint(p + ".seed");
  if (has("gender")) c.gender = ParseGenderAssignment(kv.GetString(p + ".gender"));
  if (has("female_ratio")) c.female_ratio = kv.GetDouble(p + ".female_ratio");
  if (has("speaker_prefix")) c.speaker_prefix = kv.GetString(p + ".speaker_prefix");
}

}  // namespace detail

/// Every setting as key=value; the inverse of PipelineConfigFromKv.
inline KeyValues PipelineConfigToKv(const PipelineConfig& c) {
  KeyValues kv;
  kv.Set("command", "experiment");
  detail::SynthToKv(kv, "eval", c.eval);
  detail::SynthToKv(kv, "pool", c.pool);
  kv.Set("plda.em_iterations", c.plda.em_iterations);
  kv.Set("plda.target_dim", c.plda.target_dim);
  kv.Set("plda.length_normalize", c.plda.length_normalize);
  kv.Set("plda.whiten", c.plda.whiten);
  std::string strategies;
  for (auto s : c.strategies) strategies += (strategies.empty() ? "" : ",") + StrategyName(s);
  kv.Set("strategies", strategies);
  kv.Set("anon.n_farthest", c.anon.n_farthest);
  kv.Set("anon.m_subset", c.anon.m_subset);
  kv.Set("anon.gender_filter", c.anon.gender_filter);
  kv.Set("anon.level", LevelName(c.anon.level));
  kv.Set("anon.reference", ReferenceName(c.anon.reference));
  kv.Set("anon.seed", c.anon.seed);
  kv.Set("resynth.noise_std", c.resynth.noise_std);
  kv.Set("resynth.seed", c.resynth.seed);
  kv.Set("backend", BackendName(c.backend));
  return kv;
}

/// Starts from the defaults and applies every key present in `kv`.
inline PipelineConfig PipelineConfigFromKv(const KeyValues& kv) {
  PipelineConfig c;
  if (kv.Has("command")) {
    Require(kv.GetString("command") == "experiment",
            "manifest describes command '" + kv.GetString("command") + "', not 'experiment'");
  }
  detail::SynthFromKv(kv, "eval", c.eval);
  detail::SynthFromKv(kv, "pool", c.pool);
  if (kv.Has("plda.em_iterations")) c.plda.em_iterations = static_cast<int>(kv.GetInt("plda.em_iterations"));
  if (kv.Has("plda.target_dim")) c.plda.target_dim = static_cast<int>(kv.GetInt("plda.target_dim"));
  if (kv.Has("plda.length_normalize")) c.plda.length_normalize = kv.GetBool("plda.length_normalize");
  if (kv.Has("plda.whiten")) c.plda.whiten = kv.GetBool("plda.whiten");
  if (kv.Has("strategies")) {
    c.strategies.clear();
    std::stringstream ss(kv.GetString("strategies"));
    std::string item;
    while (std::getline(ss, item, ',')) c.strategies.push_back(ParseStrategy(item));
    Require(!c.strategies.empty(), "strategies: empty list");
  }
  if (kv.Has("anon.n_farthest")) c.anon.n_farthest = static_cast<int>(kv.GetInt("anon.n_farthest"));
  if (kv.Has("anon.m_subset")) c.anon.m_subset = static_cast<int>(kv.GetInt("anon.m_subset"));
  if (kv.Has("anon.gender_filter")) c.anon.gender_filter = kv.GetBool("anon.gender_filter");
  if (kv.Has("anon.level")) c.anon.level = ParseLevel(kv.GetString("anon.level"));
  if (kv.Has("anon.reference")) c.anon.reference = ParseReference(kv.GetString("anon.reference"));
  if (kv.Has("anon.seed")) c.anon.seed = kv.GetUint("anon.seed");
  if (kv.Has("resynth.noise_std")) c.resynth.noise_std = kv.GetDouble("resynth.noise_std");
  if (kv.Has("resynth.seed")) c.resynth.seed = kv.GetUint("resynth.seed");
  if (kv.Has("backend")) c.backend = ParseBackend(kv.GetString("backend"));
  return c;
}

struct PipelineResult {
  std::vector<ExperimentReport> reports;  // one per strategy, config order
  KeyValues metrics;                      // "<strategy>.<scenario>.<partition>.<metric>"
};

inline PipelineResult RunPipeline(const PipelineConfig& c) {
  Require(c.eval.layout == c.pool.layout, "pipeline: eval and pool layouts differ");
  Require(c.eval.speaker_prefix != c.pool.speaker_prefix,
          "pipeline: eval and pool speaker prefixes must differ");
  const auto eval = GenSynthetic(c.eval);
  const auto pool = GenSynthetic(c.pool);
  const auto model = TrainPlda(pool, c.plda);

  PipelineResult out;
  for (auto strategy : c.strategies) {
    ExperimentConfig ec;
    ec.strategy = strategy;
    ec.pool = c.anon;
    ec.resynth = c.resynth;
    ec.backend = c.backend;
    ec.threads = c.threads;
    out.reports.push_back(RunExperiment(eval, pool, model, ec));
    std::stringstream ss;
    WriteExperimentKv(ss, out.reports.back());
    const auto kv = KeyValues::Read(ss);
    for (const auto& [k, v] : kv.values()) {
      if (k != "strategy") out.metrics.Set(StrategyName(strategy) + "." + k, v);
    }
  }
  return out;
}

/// Splits experiment metrics ("<strategy>.<key>") into one key set per
/// strategy, in first-seen order.
inline std::vector<std::pair<std::string, KeyValues>> RowsFromExperimentMetrics(
    const KeyValues& metrics) {
  std::vector<std::pair<std::string, KeyValues>> rows;
  for (const auto& [k, v] : metrics.values()) {
    const auto dot = k.find('.');
    Require(dot != std::string::npos, "experiment metrics: malformed key '" + k + "'");
    const auto name = k.substr(0, dot);
    auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.first == name; });
    if (it == rows.end()) {
      rows.emplace_back(name, KeyValues{});
      it = rows.end() - 1;
    }
    it->second.Set(k.substr(dot + 1), v);
  }
  return rows;
}

/// Table-1-style grid from metric key sets: per row and gender partition,
/// O-A and A-A EER / min Cllr, then DeID and GVD on the trial split.
/// Missing cells print as "-".
inline void WriteTableFromKv(std::ostream& os,
                             const std::vector<std::pair<std::string, KeyValues>>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %-4s | %8s %8s | %8s %8s | %7s %8s\n", "row", "gen",
                "OA EER", "OA Cmin", "AA EER", "AA Cmin", "DeID", "GVD");
  os << buf;
  auto cell = [](const KeyValues& kv, const std::string& key, const char* fmt) {
    if (!kv.Has(key)) return std::string("-");
    char b[32];
    std::snprintf(b, sizeof(b), fmt, kv.GetDouble(key));
    return std::string(b);
  };
  for (const auto& [name, kv] : rows) {
    for (const char* part : {"F", "M", "all"}) {
      const std::string p = part;
      const std::string keys[] = {"oa." + p + ".eer", "aa." + p + ".eer", "trial." + p + ".deid"};
      if (std::none_of(std::begin(keys), std::end(keys), [&](const auto& k) { return kv.Has(k); })) {
        continue;
      }
      std::snprintf(buf, sizeof(buf), "%-12s %-4s | %8s %8s | %8s %8s | %7s %8s\n",
                    name.c_str(), part, cell(kv, "oa." + p + ".eer", "%.2f").c_str(),
                    cell(kv, "oa." + p + ".min_cllr", "%.3f").c_str(),
                    cell(kv, "aa." + p + ".eer", "%.2f").c_str(),
                    cell(kv, "aa." + p + ".min_cllr", "%.3f").c_str(),
                    cell(kv, "trial." + p + ".deid", "%.3f").c_str(),
                    cell(kv, "trial." + p + ".gvd", "%.2f").c_str());
      os << buf;
    }
  }
}

}  // namespace spkanon

#endif  // SPKANON_PIPELINE_HPP_
