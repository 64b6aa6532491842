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

// Voice similarity matrices, de-identification (DeID) and gain of voice
// distinctiveness (GVD).
//
// For speaker sets X and Y with the same speakers, entry (i, j) of the voice
// similarity matrix is the mean of sigmoid(LLR(a, b)) over utterances a of
// speaker i in X and b of speaker j in Y. When X and Y are the same set, a
// diagonal cell skips the pairs with a == b.
//
// Diagonal dominance D(M) = |mean(diag M) - mean(offdiag M)|.
//   DeID = 1 - D(M_oa) / D(M_oo), clamped to [0, 1]
//   GVD  = 10 log10(D(M_aa) / D(M_oo))
// with o = original and a = anonymized.

#ifndef SPKANON_DISTINCTIVENESS_HPP_
#define SPKANON_DISTINCTIVENESS_HPP_

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "spkanon/common.hpp"
#include "spkanon/embedding.hpp"
#include "spkanon/plda.hpp"

namespace spkanon {

struct SimilarityMatrix {
  std::vector<std::string> speakers;
  Matrix values;

  int size() const { return static_cast<int>(speakers.size()); }
};

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

inline SimilarityMatrix BuildSimilarity(const EmbeddingSet& x, const EmbeddingSet& y,
                                        const PldaModel& model, bool same_set, int threads) {
  const auto speakers = x.Speakers();
  Require(!speakers.empty(), "similarity: empty set");
  Require(speakers == y.Speakers(), "similarity: X and Y cover different speakers");
  const auto gx = x.BySpeaker(), gy = y.BySpeaker();

  std::vector<Vector> ux(x.size()), uy(y.size());
  ParallelFor(x.size(), threads, [&](std::size_t i) { ux[i] = model.Transform(x.items()[i].vector); });
  if (same_set) {
    uy = ux;
  } else {
    ParallelFor(y.size(), threads, [&](std::size_t i) { uy[i] = model.Transform(y.items()[i].vector); });
  }

  const std::size_t n = speakers.size();
  SimilarityMatrix m{speakers, Matrix(n, n)};
  ParallelFor(n * n, threads, [&](std::size_t cell) {
    const std::size_t i = cell / n, j = cell % n;
    const auto& rows = gx.at(speakers[i]);
    const auto& cols = gy.at(speakers[j]);
    double sum = 0.0;
    std::size_t count = 0;
    for (auto a : rows) {
      for (auto b : cols) {
        if (same_set && a == b) continue;
        sum += Sigmoid(model.ScoreTransformed(ux[a], uy[b]));
        ++count;
      }
    }
    Require(count > 0, "similarity: speaker '" + speakers[i] +
                           "' needs at least 2 utterances when X == Y");
    m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
        sum / static_cast<double>(count);
  });
  return m;
}

}  // namespace detail

/// Similarity between two different sets over the same speakers.
inline SimilarityMatrix ComputeSimilarity(const EmbeddingSet& x, const EmbeddingSet& y,
                                          const PldaModel& model, int threads = 1) {
  return detail::BuildSimilarity(x, y, model, &x == &y, threads);
}

/// Similarity of a set with itself (self-pairs excluded on the diagonal).
inline SimilarityMatrix ComputeSimilarity(const EmbeddingSet& x, const PldaModel& model,
                                          int threads = 1) {
  return detail::BuildSimilarity(x, x, model, true, threads);
}

/// |mean(diag) - mean(offdiag)|; for a 1x1 matrix, |m - 0.5| (sigmoid(0)
/// stands in for the missing off-diagonal).
inline double DiagDominance(const SimilarityMatrix& m) {
  const auto n = m.values.rows();
  Require(n >= 1 && m.values.cols() == n, "diag_dominance: matrix must be square and non-empty");
  const double diag = m.values.diagonal().mean();
  if (n == 1) return std::abs(diag - 0.5);
  double off = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) off += m.values(i, j);
  off /= static_cast<double>(n * (n - 1));
  return std::abs(diag - off);
}

inline void RequireAligned(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  Require(a.speakers == b.speakers, "similarity matrices use different speaker orderings");
}

/// De-identification in [0, 1]; 1 means no linkability to the originals.
inline double Deid(const SimilarityMatrix& m_oo, const SimilarityMatrix& m_oa) {
  RequireAligned(m_oo, m_oa);
  const double d_oo = DiagDominance(m_oo);
  Require(d_oo > 0.0, "deid: original matrix has zero diagonal dominance");
  return std::clamp(1.0 - DiagDominance(m_oa) / d_oo, 0.0, 1.0);
}

/// Gain of voice distinctiveness in dB. Zero dominance yields -inf (in M_aa)
/// or +inf (in M_oo); both zero yields NaN.
inline double Gvd(const SimilarityMatrix& m_oo, const SimilarityMatrix& m_aa) {
  RequireAligned(m_oo, m_aa);
  const double d_oo = DiagDominance(m_oo), d_aa = DiagDominance(m_aa);
  if (d_oo == 0.0 && d_aa == 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (d_aa == 0.0) return -std::numeric_limits<double>::infinity();
  if (d_oo == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(d_aa / d_oo);
}

/// CSV with a header row of speaker ids; each row starts with its id.
inline void WriteSimilarityCsv(std::ostream& os, const SimilarityMatrix& m) {
  os << "speaker";
  for (const auto& s : m.speakers) os << ',' << s;
  os << '\n';
  char buf[32];
  for (int i = 0; i < m.size(); ++i) {
    os << m.speakers[i];
    for (int j = 0; j < m.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.values(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace spkanon

#endif  // SPKANON_DISTINCTIVENESS_HPP_
