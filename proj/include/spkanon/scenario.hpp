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

// Attack scenarios and the full privacy evaluation of one strategy.
//
//  O-O  original enrollment, original trials (unanonymized control)
//  O-A  original enrollment, anonymized trials
//  A-A  anonymized enrollment and trials, with independent target
//       assignments (different split tags)
//
// Anonymized sides always pass through the resynthesis channel before the
// attacker sees them. Metrics are reported per gender partition ("F", "M")
// when gender labels exist, plus "all" over every trial.

#ifndef SPKANON_SCENARIO_HPP_
#define SPKANON_SCENARIO_HPP_

#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "spkanon/anonymizer.hpp"
#include "spkanon/asv_metrics.hpp"
#include "spkanon/common.hpp"
#include "spkanon/distinctiveness.hpp"
#include "spkanon/embedding.hpp"
#include "spkanon/plda.hpp"
#include "spkanon/synth.hpp"

namespace spkanon {

enum class Scenario { kOO, kOA, kAA };

inline std::string ScenarioName(Scenario s) {
  switch (s) {
    case Scenario::kOO: return "oo";
    case Scenario::kOA: return "oa";
    default: return "aa";
  }
}

inline Scenario ParseScenario(std::string_view s) {
  if (s == "oo") return Scenario::kOO;
  if (s == "oa") return Scenario::kOA;
  if (s == "aa") return Scenario::kAA;
  throw Error("unknown scenario '" + std::string(s) + "' (expected oo, oa or aa)");
}

struct EnrollTrialSplit {
  EmbeddingSet enroll;
  EmbeddingSet trial;
};

/// Per speaker, the first floor(n / 2) utterances (in set order) enroll and
/// the rest are trials. Every speaker needs at least 2 utterances.
inline EnrollTrialSplit SplitEnrollTrial(const EmbeddingSet& set) {
  EnrollTrialSplit out{EmbeddingSet(set.layout()), EmbeddingSet(set.layout())};
  for (const auto& [spk, idx] : set.BySpeaker()) {
    Require(idx.size() >= 2, "split: speaker '" + spk + "' needs at least 2 utterances");
    const std::size_t n_enroll = idx.size() / 2;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_enroll ? out.enroll : out.trial).Add(set.items()[idx[k]]);
    }
  }
  for (const auto& [spk, g] : set.genders()) {
    out.enroll.SetGender(spk, g);
    out.trial.SetGender(spk, g);
  }
  return out;
}

struct PartitionMetrics {
  std::string partition;  // "F", "M" or "all"
  AsvMetrics metrics;
};

struct ScenarioReport {
  Scenario scenario = Scenario::kOA;
  Backend backend = Backend::kPlda;
  std::vector<PartitionMetrics> partitions;

  const AsvMetrics& at(const std::string& partition) const {
    for (const auto& p : partitions) {
      if (p.partition == partition) return p.metrics;
    }
    throw Error("no '" + partition + "' partition in " + ScenarioName(scenario) + " report");
  }
};

namespace detail {

/// The gender partitions present in `set`, followed by "all".
inline std::vector<std::pair<std::string, Gender>> Partitions(const EmbeddingSet& set) {
  bool has_f = false, has_m = false;
  for (const auto& [spk, g] : set.genders()) {
    has_f |= g == Gender::kFemale;
    has_m |= g == Gender::kMale;
  }
  std::vector<std::pair<std::string, Gender>> out;
  if (has_f) out.emplace_back("F", Gender::kFemale);
  if (has_m) out.emplace_back("M", Gender::kMale);
  out.emplace_back("all", Gender::kUnknown);
  return out;
}

}  // namespace detail

/// Scores the attacker's view of one scenario. O-O ignores both
/// anonymizations, O-A needs `anon_trial`, A-A needs both. Trials default to
/// the exhaustive enrollment-speaker x trial-utterance product.
inline ScenarioReport RunScenario(const EmbeddingSet& original_enroll,
                                  const EmbeddingSet& original_trial,
                                  const AnonymizationResult* anon_enroll,
                                  const AnonymizationResult* anon_trial, Scenario scenario,
                                  Backend backend, const PldaModel* model,
                                  const ResynthConfig& resynth, int threads = 1,
                                  const TrialList* trial_list = nullptr) {
  Require(original_enroll.layout() == original_trial.layout(),
          "scenario: enrollment and trial layouts differ");
  EmbeddingSet enroll = original_enroll, trial = original_trial;
  if (scenario != Scenario::kOO) {
    Require(anon_trial != nullptr, "scenario: missing anonymized trial data");
    Require(anon_trial->layout == original_trial.layout(), "scenario: anonymized trial layout differs");
    trial = SimulateResynthesis(*anon_trial, resynth);
  }
  if (scenario == Scenario::kAA) {
    Require(anon_enroll != nullptr, "scenario: A-A needs anonymized enrollment data");
    Require(anon_enroll->layout == original_enroll.layout(),
            "scenario: anonymized enrollment layout differs");
    Require(anon_enroll->seed != anon_trial->seed || anon_enroll->split_tag != anon_trial->split_tag,
            "scenario: A-A enrollment and trial were anonymized with the same split seed; "
            "target speakers would not differ");
    enroll = SimulateResynthesis(*anon_enroll, resynth);
  }

  const auto trials = trial_list ? *trial_list : MakeTrials(enroll, trial);
  const auto scores = ScoreTrialList(backend, model, enroll, trial, trials, threads);
  std::map<std::string, std::string> utt_speaker;
  for (const auto& it : trial.items()) utt_speaker[it.utt_id] = it.speaker_id;

  ScenarioReport report{scenario, backend, {}};
  for (const auto& [name, gender] : detail::Partitions(original_trial)) {
    ScoreSet s;
    s.is_llr = backend == Backend::kPlda;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (gender != Gender::kUnknown &&
          (original_enroll.GenderOf(trials[i].enroll_speaker) != gender ||
           original_trial.GenderOf(utt_speaker.at(trials[i].trial_utt)) != gender)) {
        continue;
      }
      (trials[i].target ? s.target : s.nontarget).push_back(scores[i]);
    }
    if (s.target.empty() || s.nontarget.empty()) continue;
    report.partitions.push_back({name, ComputeAsvMetrics(s)});
  }
  return report;
}

struct DistinctivenessMetrics {
  std::string partition;
  double d_oo = 0.0, d_oa = 0.0, d_aa = 0.0;
  double deid = 0.0, gvd = 0.0;
};

/// DeID and GVD on one split: M_oo = original vs itself, M_oa = original rows
/// vs attacker-visible anonymized columns, M_aa = anonymized vs itself.
inline std::vector<DistinctivenessMetrics> EvaluateDistinctiveness(
    const EmbeddingSet& original, const EmbeddingSet& anonymized, const PldaModel& model,
    int threads = 1) {
  std::vector<DistinctivenessMetrics> out;
  for (const auto& [name, gender] : detail::Partitions(original)) {
    std::vector<std::string> speakers;
    for (const auto& spk : original.Speakers()) {
      if (gender == Gender::kUnknown || original.GenderOf(spk) == gender) speakers.push_back(spk);
    }
    const auto o = original.Subset(speakers), a = anonymized.Subset(speakers);
    const auto m_oo = ComputeSimilarity(o, model, threads);
    const auto m_oa = ComputeSimilarity(o, a, model, threads);
    const auto m_aa = ComputeSimilarity(a, model, threads);
    DistinctivenessMetrics d;
    d.partition = name;
    d.d_oo = DiagDominance(m_oo);
    d.d_oa = DiagDominance(m_oa);
    d.d_aa = DiagDominance(m_aa);
    d.deid = Deid(m_oo, m_oa);
    d.gvd = Gvd(m_oo, m_aa);
    out.push_back(d);
  }
  return out;
}

struct ExperimentConfig {
  Strategy strategy = Strategy::kPool;
  PoolConfig pool;
  ResynthConfig resynth;
  Backend backend = Backend::kPlda;
  std::string enroll_tag = "enroll";
  std::string trial_tag = "trial";
  int threads = 1;
};

/// One row group of a Table-1-style grid: O-A, A-A, the unanonymized
/// control, and DeID/GVD on the trial split.
struct ExperimentReport {
  Strategy strategy = Strategy::kPool;
  ScenarioReport control, oa, aa;
  std::vector<DistinctivenessMetrics> distinctiveness;

  const DistinctivenessMetrics& distinct(const std::string& partition) const {
    for (const auto& d : distinctiveness) {
      if (d.partition == partition) return d;
    }
    throw Error("no '" + partition + "' distinctiveness partition");
  }
};

/// Splits `eval`, anonymizes enrollment and trials independently, and runs
/// every scenario. `model` serves both the pool selection and the attacker.
inline ExperimentReport RunExperiment(const EmbeddingSet& eval, const EmbeddingSet& pool,
                                      const PldaModel& model, const ExperimentConfig& cfg) {
  Require(cfg.enroll_tag != cfg.trial_tag, "experiment: enroll and trial tags must differ");
  const auto split = SplitEnrollTrial(eval);
  PoolConfig pc = cfg.pool;
  pc.threads = cfg.threads;
  const AnonymizerResources res{&pool, &model, nullptr};
  const auto anon_enroll = AssignTargets(split.enroll, cfg.strategy, pc, cfg.enroll_tag, res);
  const auto anon_trial = AssignTargets(split.trial, cfg.strategy, pc, cfg.trial_tag, res);

  ExperimentReport r;
  r.strategy = cfg.strategy;
  r.control = RunScenario(split.enroll, split.trial, nullptr, nullptr, Scenario::kOO, cfg.backend,
                          &model, cfg.resynth, cfg.threads);
  r.oa = RunScenario(split.enroll, split.trial, &anon_enroll, &anon_trial, Scenario::kOA,
                     cfg.backend, &model, cfg.resynth, cfg.threads);
  r.aa = RunScenario(split.enroll, split.trial, &anon_enroll, &anon_trial, Scenario::kAA,
                     cfg.backend, &model, cfg.resynth, cfg.threads);
  r.distinctiveness = EvaluateDistinctiveness(
      split.trial, SimulateResynthesis(anon_trial, cfg.resynth), model, cfg.threads);
  return r;
}

namespace detail {

inline std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Machine-readable key=value lines, "<prefix>.<partition>.<metric>=<value>".
inline void WriteScenarioKv(std::ostream& os, const std::string& prefix, const ScenarioReport& r) {
  for (const auto& p : r.partitions) {
    const std::string k = prefix + "." + p.partition + ".";
    os << k << "eer=" << detail::Num(p.metrics.eer) << '\n'
       << k << "eer_sweep=" << detail::Num(p.metrics.eer_sweep) << '\n';
    if (r.backend == Backend::kPlda) {
      os << k << "cllr=" << detail::Num(p.metrics.cllr) << '\n'
         << k << "min_cllr=" << detail::Num(p.metrics.min_cllr) << '\n';
    }
    os << k << "n_target=" << p.metrics.n_target << '\n'
       << k << "n_nontarget=" << p.metrics.n_nontarget << '\n';
  }
}

inline void WriteDistinctivenessKv(std::ostream& os, const std::string& prefix,
                                   const std::vector<DistinctivenessMetrics>& ds) {
  for (const auto& d : ds) {
    const std::string k = prefix + "." + d.partition + ".";
    os << k << "deid=" << detail::Num(d.deid) << '\n'
       << k << "gvd=" << detail::Num(d.gvd) << '\n'
       << k << "d_oo=" << detail::Num(d.d_oo) << '\n'
       << k << "d_oa=" << detail::Num(d.d_oa) << '\n'
       << k << "d_aa=" << detail::Num(d.d_aa) << '\n';
  }
}

inline void WriteExperimentKv(std::ostream& os, const ExperimentReport& r) {
  os << "strategy=" << StrategyName(r.strategy) << '\n';
  WriteScenarioKv(os, "oo", r.control);
  WriteScenarioKv(os, "oa", r.oa);
  WriteScenarioKv(os, "aa", r.aa);
  WriteDistinctivenessKv(os, "trial", r.distinctiveness);
}

/// Human-readable grid with one row per (strategy, gender) and the columns
/// EER / min Cllr for O-A and A-A, then DeID and GVD.
inline void WriteTable(std::ostream& os, const std::vector<ExperimentReport>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %-4s | %8s %8s | %8s %8s | %6s %7s\n", "strategy",
                "gen", "OA EER", "OA Cmin", "AA EER", "AA Cmin", "DeID", "GVD");
  os << buf;
  for (const auto& r : rows) {
    for (const auto& p : r.oa.partitions) {
      const auto& oa = p.metrics;
      const auto& aa = r.aa.at(p.partition);
      const auto& d = r.distinct(p.partition);
      std::snprintf(buf, sizeof(buf), "%-10s %-4s | %8.2f %8.3f | %8.2f %8.3f | %6.3f %7.2f\n",
                    StrategyName(r.strategy).c_str(), p.partition.c_str(), oa.eer, oa.min_cllr,
                    aa.eer, aa.min_cllr, d.deid, d.gvd);
      os << buf;
    }
  }
}

}  // namespace spkanon

#endif  // SPKANON_SCENARIO_HPP_
