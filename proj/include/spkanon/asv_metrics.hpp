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

// Attacker-side speaker verification: trials, scoring, EER and Cllr.

#ifndef SPKANON_ASV_METRICS_HPP_
#define SPKANON_ASV_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spkanon/common.hpp"
#include "spkanon/embedding.hpp"
#include "spkanon/plda.hpp"

namespace spkanon {

struct Trial {
  std::string enroll_speaker;
  std::string trial_utt;
  bool target = false;

  bool operator==(const Trial&) const = default;
};

using TrialList = std::vector<Trial>;

/// Every enrollment speaker against every trial utterance; target iff the
/// trial utterance belongs to the enrollment speaker.
inline TrialList MakeTrials(const EmbeddingSet& enroll, const EmbeddingSet& trial) {
  Require(!enroll.empty() && !trial.empty(), "make_trials: empty set");
  TrialList out;
  for (const auto& spk : enroll.Speakers()) {
    for (const auto& it : trial.items()) {
      out.push_back({spk, it.utt_id, it.speaker_id == spk});
    }
  }
  return out;
}

/// Trial list file: one "enroll_speaker_id<TAB>trial_utt_id<TAB>target|nontarget"
/// per line.
inline void WriteTrials(std::ostream& os, const TrialList& trials) {
  for (const auto& t : trials) {
    os << t.enroll_speaker << '\t' << t.trial_utt << '\t'
       << (t.target ? "target" : "nontarget") << '\n';
  }
}

inline TrialList ReadTrials(std::istream& is) {
  TrialList out;
  std::string line;
  int lineno = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    Require(fields.size() == 3, "trials line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    Require(fields[2] == "target" || fields[2] == "nontarget",
            "trials line " + std::to_string(lineno) + ": label must be target|nontarget");
    Require(seen.emplace(fields[0], fields[1]).second,
            "trials line " + std::to_string(lineno) + ": duplicate trial");
    out.push_back({fields[0], fields[1], fields[2] == "target"});
  }
  return out;
}

/// Loads a trial file and checks every id against the given sets.
inline TrialList LoadTrials(const std::string& path, const EmbeddingSet& enroll,
                            const EmbeddingSet& trial) {
  std::ifstream is(path);
  Require(is.good(), "cannot open trial list '" + path + "'");
  auto trials = ReadTrials(is);
  const auto speakers = enroll.Speakers();
  for (const auto& t : trials) {
    Require(std::binary_search(speakers.begin(), speakers.end(), t.enroll_speaker),
            "trial list references unknown enrollment speaker '" + t.enroll_speaker + "'");
    Require(trial.Contains(t.trial_utt),
            "trial list references unknown trial utterance '" + t.trial_utt + "'");
  }
  return trials;
}

struct ScoreSet {
  std::vector<double> target;
  std::vector<double> nontarget;
  bool is_llr = true;  // false for cosine scores
};

enum class Backend { kPlda, kCosine };

inline std::string BackendName(Backend b) { return b == Backend::kPlda ? "plda" : "cosine"; }

inline Backend ParseBackend(std::string_view s) {
  if (s == "plda") return Backend::kPlda;
  if (s == "cosine") return Backend::kCosine;
  throw Error("unknown backend '" + std::string(s) + "'");
}

inline double Cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  Require(na > 0.0 && nb > 0.0, "cosine: zero vector");
  return a.dot(b) / (na * nb);
}

/// Per-trial scores, aligned with `trials`. Enrollment models are the
/// speaker-level means of `enroll`.
inline std::vector<double> ScoreTrialList(Backend backend, const PldaModel* model,
                                          const EmbeddingSet& enroll, const EmbeddingSet& trial,
                                          const TrialList& trials, int threads = 1) {
  Require(backend == Backend::kCosine || model != nullptr, "score_trials: PLDA backend needs a model");
  const auto models = SpeakerLevel(enroll);
  std::map<std::string, std::size_t> trial_index;
  for (std::size_t i = 0; i < trial.size(); ++i) trial_index.emplace(trial.items()[i].utt_id, i);
  for (const auto& t : trials) {
    Require(models.count(t.enroll_speaker) > 0,
            "score_trials: no enrollment embeddings for speaker '" + t.enroll_speaker + "'");
    Require(trial_index.count(t.trial_utt) > 0,
            "score_trials: no embedding for trial utterance '" + t.trial_utt + "'");
  }

  std::vector<double> scores(trials.size());
  if (backend == Backend::kCosine) {
    ParallelFor(trials.size(), threads, [&](std::size_t i) {
      scores[i] = Cosine(models.at(trials[i].enroll_speaker),
                         trial.items()[trial_index.at(trials[i].trial_utt)].vector);
    });
    return scores;
  }
  std::map<std::string, Vector> enroll_u;
  for (const auto& [spk, v] : models) enroll_u.emplace(spk, model->Transform(v));
  std::vector<Vector> trial_u(trial.size());
  ParallelFor(trial.size(), threads,
              [&](std::size_t i) { trial_u[i] = model->Transform(trial.items()[i].vector); });
  ParallelFor(trials.size(), threads, [&](std::size_t i) {
    scores[i] = model->ScoreTransformed(enroll_u.at(trials[i].enroll_speaker),
                                        trial_u[trial_index.at(trials[i].trial_utt)]);
  });
  return scores;
}

inline ScoreSet PartitionScores(const TrialList& trials, const std::vector<double>& scores,
                                bool is_llr) {
  ScoreSet out;
  out.is_llr = is_llr;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    (trials[i].target ? out.target : out.nontarget).push_back(scores[i]);
  }
  return out;
}

inline ScoreSet ScoreTrials(Backend backend, const PldaModel* model, const EmbeddingSet& enroll,
                            const EmbeddingSet& trial, const TrialList& trials,
                            int threads = 1) {
  return PartitionScores(trials, ScoreTrialList(backend, model, enroll, trial, trials, threads),
                         backend == Backend::kPlda);
}

namespace detail {

inline void RequireBothClasses(const ScoreSet& s, const char* what) {
  Require(!s.target.empty(), std::string(what) + ": no target scores");
  Require(!s.nontarget.empty(), std::string(what) + ": no nontarget scores");
  for (double v : s.target) Require(std::isfinite(v), std::string(what) + ": non-finite score");
  for (double v : s.nontarget) Require(std::isfinite(v), std::string(what) + ": non-finite score");
}

/// Distinct score values in ascending order with their class counts.
struct ScoreBlock {
  double score;
  double targets;
  double nontargets;
};

inline std::vector<ScoreBlock> SortedBlocks(const ScoreSet& s) {
  std::vector<std::pair<double, int>> all;
  all.reserve(s.target.size() + s.nontarget.size());
  for (double v : s.target) all.emplace_back(v, 1);
  for (double v : s.nontarget) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end());
  std::vector<ScoreBlock> out;
  for (const auto& [v, label] : all) {
    if (out.empty() || out.back().score != v) out.push_back({v, 0.0, 0.0});
    (label ? out.back().targets : out.back().nontargets) += 1.0;
  }
  return out;
}

}  // namespace detail

/// Pool-adjacent-violators fit of a non-decreasing step function to y with
/// weights w. Returns one fitted value per input position.
inline std::vector<double> PoolAdjacentViolators(const std::vector<double>& y,
                                                 const std::vector<double>& w) {
  Require(y.size() == w.size(), "pav: size mismatch");
  struct Block {
    double sum;
    double weight;
    std::size_t len;
  };
  std::vector<Block> stack;
  for (std::size_t i = 0; i < y.size(); ++i) {
    stack.push_back({w[i] * y[i], w[i], 1});
    while (stack.size() >= 2) {
      const auto& b = stack[stack.size() - 1];
      const auto& a = stack[stack.size() - 2];
      if (a.sum / a.weight < b.sum / b.weight) break;
      Block merged{a.sum + b.sum, a.weight + b.weight, a.len + b.len};
      stack.pop_back();
      stack.back() = merged;
    }
  }
  std::vector<double> fit;
  fit.reserve(y.size());
  for (const auto& b : stack) fit.insert(fit.end(), b.len, b.sum / b.weight);
  return fit;
}

/// Threshold-sweep EER in percent, with raw score polarity: higher scores
/// must mean "same speaker". Thresholds run over every midpoint between
/// distinct scores; the FAR/FRR crossing is linearly interpolated between the
/// two neighbouring operating points. Exceeds 50 when targets tend to score
/// below nontargets.
inline double SweepEer(const ScoreSet& s) {
  detail::RequireBothClasses(s, "eer");
  const auto blocks = detail::SortedBlocks(s);
  const double nt = static_cast<double>(s.target.size());
  const double nn = static_cast<double>(s.nontarget.size());
  std::size_t fa = s.nontarget.size(), miss = 0;
  double prev_far = static_cast<double>(fa) / nn;
  double prev_frr = static_cast<double>(miss) / nt;
  double d0 = prev_far - prev_frr;
  if (d0 == 0.0) return 100.0 * prev_far;  // unreachable: far = 1, frr = 0
  for (const auto& b : blocks) {
    fa -= static_cast<std::size_t>(b.nontargets);
    miss += static_cast<std::size_t>(b.targets);
    const double far = static_cast<double>(fa) / nn;
    const double frr = static_cast<double>(miss) / nt;
    const double d = far - frr;
    if (d == 0.0) return 100.0 * far;
    if (d < 0.0) {
      const double t = d0 / (d0 - d);
      return 100.0 * (prev_far + t * (far - prev_far));
    }
    prev_far = far;
    prev_frr = frr;
    d0 = d;
  }
  return 100.0;
}

/// Operating points (pfa, pmiss) of the ROC convex hull, from pfa = 1 to 0.
inline std::vector<std::pair<double, double>> RocConvexHull(const ScoreSet& s) {
  detail::RequireBothClasses(s, "rocch");
  const auto blocks = detail::SortedBlocks(s);
  std::vector<double> y, w;
  for (const auto& b : blocks) {
    w.push_back(b.targets + b.nontargets);
    y.push_back(b.targets / w.back());
  }
  const auto fit = PoolAdjacentViolators(y, w);
  const double nt = static_cast<double>(s.target.size());
  const double nn = static_cast<double>(s.nontarget.size());
  std::vector<std::pair<double, double>> pts;
  double miss = 0.0, fa = nn;
  pts.emplace_back(fa / nn, miss / nt);
  for (std::size_t i = 0; i < blocks.size();) {
    std::size_t j = i;
    while (j < blocks.size() && fit[j] == fit[i]) {
      miss += blocks[j].targets;
      fa -= blocks[j].nontargets;
      ++j;
    }
    pts.emplace_back(fa / nn, miss / nt);
    i = j;
  }
  return pts;
}

/// EER on the ROC convex hull, in percent; always within [0, 50].
inline double RocchEer(const ScoreSet& s) {
  const auto pts = RocConvexHull(s);
  double eer = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [x1, y1] = pts[i];
    const auto [x2, y2] = pts[i + 1];
    double seg;
    if (x1 == x2 || y1 == y2) {
      // Axis-parallel hull edge: it meets pfa = pmiss only at a vertex.
      seg = 0.0;
    } else {
      // Line a*x + b*y = 1 through both points; its diagonal crossing is
      // x = y = 1 / (a + b).
      const double det = x1 * y2 - x2 * y1;
      const double a = (y2 - y1) / det;
      const double b = (x1 - x2) / det;
      seg = 1.0 / (a + b);
    }
    eer = std::max(eer, seg);
  }
  // The sweep crossing lies on a chord between ROC points, which the hull
  // dominates, so the hull EER never exceeds it; the two arithmetic routes
  // can disagree in the last bit when they meet the diagonal on the same
  // segment, and the min keeps the ordering exact.
  return std::min(100.0 * eer, SweepEer(s));
}

namespace detail {

/// log(1 + e^x), stable for large |x| and exact at +-inf.
inline double Softplus(double x) {
  if (x == std::numeric_limits<double>::infinity()) return x;
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double CllrOf(const std::vector<double>& tar, const std::vector<double>& non) {
  double ct = 0.0, cn = 0.0;
  for (double s : tar) ct += Softplus(-s);
  for (double s : non) cn += Softplus(s);
  return 0.5 * (ct / static_cast<double>(tar.size()) + cn / static_cast<double>(non.size())) /
         std::numbers::ln2;
}

}  // namespace detail

/// Cllr in bits for natural-log LLR scores. Cosine score sets are refused
/// unless allow_uncalibrated is set.
inline double Cllr(const ScoreSet& s, bool allow_uncalibrated = false) {
  detail::RequireBothClasses(s, "cllr");
  Require(s.is_llr || allow_uncalibrated, "cllr: scores are not log-likelihood ratios");
  return detail::CllrOf(s.target, s.nontarget);
}

/// Cllr after the optimal order-preserving recalibration (PAV).
inline double MinCllr(const ScoreSet& s, bool allow_uncalibrated = false) {
  detail::RequireBothClasses(s, "min_cllr");
  Require(s.is_llr || allow_uncalibrated, "min_cllr: scores are not log-likelihood ratios");
  const auto blocks = detail::SortedBlocks(s);
  std::vector<double> y, w;
  for (const auto& b : blocks) {
    w.push_back(b.targets + b.nontargets);
    y.push_back(b.targets / w.back());
  }
  const auto post = PoolAdjacentViolators(y, w);
  const double nt = static_cast<double>(s.target.size());
  const double nn = static_cast<double>(s.nontarget.size());
  const double prior_logodds = std::log(nt / nn);
  double ct = 0.0, cn = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const double p = post[i];
    double llr;
    if (p <= 0.0) {
      llr = -std::numeric_limits<double>::infinity();
    } else if (p >= 1.0) {
      llr = std::numeric_limits<double>::infinity();
    } else {
      llr = std::log(p / (1.0 - p)) - prior_logodds;
    }
    if (blocks[i].targets > 0.0) ct += blocks[i].targets * detail::Softplus(-llr);
    if (blocks[i].nontargets > 0.0) cn += blocks[i].nontargets * detail::Softplus(llr);
  }
  // The constant calibration (every LLR 0) is order-preserving and costs
  // exactly 1 bit, so the optimum never exceeds it; the min absorbs rounding
  // of a PAV fit that is constant at the prior.
  return std::min(0.5 * (ct / nt + cn / nn) / std::numbers::ln2, 1.0);
}

struct AsvMetrics {
  double eer = 0.0;        // ROCCH-EER, percent, in [0, 50]
  double eer_sweep = 0.0;  // raw-polarity sweep EER, percent, may exceed 50
  double cllr = std::numeric_limits<double>::quiet_NaN();
  double min_cllr = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
};

inline AsvMetrics ComputeAsvMetrics(const ScoreSet& s) {
  AsvMetrics m;
  m.eer = RocchEer(s);
  m.eer_sweep = SweepEer(s);
  if (s.is_llr) {
    m.cllr = Cllr(s);
    m.min_cllr = MinCllr(s);
  }
  m.n_target = s.target.size();
  m.n_nontarget = s.nontarget.size();
  return m;
}

}  // namespace spkanon

#endif  // SPKANON_ASV_METRICS_HPP_
