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

// Two-covariance PLDA.
//
// Generative model, in the preprocessed space y:
//
//   y_ij = z_i + e_ij,   z_i ~ N(mu, B),   e_ij ~ N(0, W)
//
// with B the between-speaker and W the within-speaker covariance.
// Preprocessing maps a raw embedding x to y = P (x - center), followed by
// optional length normalization to radius sqrt(p). P folds together slice
// selection, whitening by the total covariance and an LDA reduction.
//
// Scoring. Let V satisfy V^T W V = I and V^T B V = diag(psi), and set
// u = V^T (y - mu). Dimensions decouple, and with t = psi + 1 the
// same-speaker joint covariance of (u1, u2) is [[t, psi], [psi, t]] while the
// different-speaker one is [[t, 0], [0, t]]. The log-likelihood ratio is
//
//   LLR = sum_k  0.5 log(t^2 / (2 psi + 1))
//              + 0.5 (1/t - t/(2 psi + 1)) (u1^2 + u2^2)
//              + psi/(2 psi + 1) u1 u2.

#ifndef SPKANON_PLDA_HPP_
#define SPKANON_PLDA_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "spkanon/common.hpp"
#include "spkanon/detail/binary_io.hpp"
#include "spkanon/embedding.hpp"

namespace spkanon {

struct PldaTrainConfig {
  int em_iterations = 10;
  int target_dim = 0;  // 0: min(slice dim, n_speakers - 1)
  bool length_normalize = true;
  bool whiten = true;
  Slice slice = Slice::kFull;
  // EM is deterministic; the seed is carried for manifests only.
  std::uint64_t seed = 0;
};

class PldaModel {
 public:
  PldaModel() = default;

  /// Builds a model from explicit parameters. An empty projection means the
  /// identity (p == input_dim); an empty center means zero.
  PldaModel(Vector mu, Matrix between, Matrix within, Matrix projection = {},
            Vector center = {}, bool length_normalize = false)
      : mu_(std::move(mu)),
        between_(std::move(between)),
        within_(std::move(within)),
        projection_(std::move(projection)),
        center_(std::move(center)),
        length_normalize_(length_normalize) {
    const auto p = mu_.size();
    Require(p >= 1, "plda: empty model");
    if (projection_.size() == 0) projection_ = Matrix::Identity(p, p);
    if (center_.size() == 0) center_ = Vector::Zero(projection_.cols());
    Require(between_.rows() == p && between_.cols() == p,
            "plda: between covariance has wrong shape");
    Require(within_.rows() == p && within_.cols() == p,
            "plda: within covariance has wrong shape");
    Require(projection_.rows() == p, "plda: projection has wrong row count");
    Require(center_.size() == projection_.cols(),
            "plda: center does not match projection input dimension");
    Require(p <= projection_.cols(), "plda: model dim exceeds input dim");
    ComputeDerived();
  }

  int dim() const { return static_cast<int>(mu_.size()); }
  int input_dim() const { return static_cast<int>(projection_.cols()); }
  const Vector& mu() const { return mu_; }
  const Matrix& between() const { return between_; }
  const Matrix& within() const { return within_; }
  const Matrix& projection() const { return projection_; }
  const Vector& center() const { return center_; }
  bool length_normalize() const { return length_normalize_; }
  /// Between-class variances in the simultaneously diagonalized basis.
  const Vector& psi() const { return psi_; }

  /// Raw embedding -> PLDA space (projection and length norm).
  Vector Preprocess(const Vector& x) const {
    Require(x.size() == input_dim(),
            "plda: input has dimension " + std::to_string(x.size()) +
                ", model expects " + std::to_string(input_dim()));
    Vector y = projection_ * (x - center_);
    if (length_normalize_) {
      const double norm = y.norm();
      if (norm > 0.0) y *= std::sqrt(static_cast<double>(dim())) / norm;
    }
    return y;
  }

  /// Raw embedding -> decorrelated coordinates u used by the scorer.
  Vector Transform(const Vector& x) const {
    return basis_.transpose() * (Preprocess(x) - mu_);
  }

  /// LLR between two transformed vectors (see Transform).
  double ScoreTransformed(const Vector& u1, const Vector& u2) const {
    double llr = llr_offset_;
    for (Eigen::Index k = 0; k < u1.size(); ++k) {
      llr += 0.5 * quad_[k] * (u1[k] * u1[k] + u2[k] * u2[k]) +
             cross_[k] * (u1[k] * u2[k]);
    }
    return llr;
  }

  /// Same-vs-different speaker log-likelihood ratio in nats.
  double Score(const Vector& e1, const Vector& e2) const {
    return ScoreTransformed(Transform(e1), Transform(e2));
  }

  /// Entry (i, j) is Score(rows[i], cols[j]), bit-identical to the scalar
  /// call. Rows are distributed over `threads` workers.
  Matrix ScoreMatrix(std::span<const Vector> rows, std::span<const Vector> cols,
                     int threads = 1) const {
    std::vector<Vector> ur(rows.size()), uc(cols.size());
    ParallelFor(rows.size(), threads, [&](std::size_t i) { ur[i] = Transform(rows[i]); });
    ParallelFor(cols.size(), threads, [&](std::size_t j) { uc[j] = Transform(cols[j]); });
    Matrix out(rows.size(), cols.size());
    ParallelFor(rows.size(), threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        out(i, j) = ScoreTransformed(ur[i], uc[j]);
      }
    });
    return out;
  }

  void Write(std::ostream& os) const;
  static PldaModel Read(std::istream& is);

  void Save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    Require(os.good(), "cannot open '" + path + "' for writing");
    Write(os);
    Require(os.good(), "write failed for '" + path + "'");
  }
  static PldaModel Load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    Require(is.good(), "cannot open '" + path + "'");
    return Read(is);
  }

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  void ComputeDerived() {
    // W = L L^T; C = L^-1 B L^-T = U diag(psi) U^T; V = L^-T U.
    Eigen::LLT<Matrix> llt(within_);
    Require(llt.info() == Eigen::Success,
            "plda: within-class covariance is not positive definite");
    const Matrix l_inv =
        llt.matrixL().solve(Matrix::Identity(dim(), dim()));
    Matrix c = l_inv * between_ * l_inv.transpose();
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    Require(eig.info() == Eigen::Success, "plda: eigen-decomposition failed");
    psi_ = eig.eigenvalues().cwiseMax(0.0);
    basis_ = l_inv.transpose() * eig.eigenvectors();
    quad_.resize(dim());
    cross_.resize(dim());
    llr_offset_ = 0.0;
    for (int k = 0; k < dim(); ++k) {
      const double t = psi_[k] + 1.0;
      const double den = 2.0 * psi_[k] + 1.0;
      llr_offset_ += 0.5 * std::log(t * t / den);
      quad_[k] = 1.0 / t - t / den;
      cross_[k] = psi_[k] / den;
    }
  }

  Vector mu_;
  Matrix between_;
  Matrix within_;
  Matrix projection_;
  Vector center_;
  bool length_normalize_ = false;

  Vector psi_;
  Matrix basis_;
  Vector quad_;
  Vector cross_;
  double llr_offset_ = 0.0;
};

// Binary layout, little-endian:
//   "PLDA" | u32 version | u32 p | u32 input_dim | u32 flags (bit 0: length norm)
//   | f64 center[input_dim] | f64 mu[p] | f64 projection[p * input_dim]
//   | f64 B[p * p] | f64 W[p * p]          (matrices row-major)
inline void PldaModel::Write(std::ostream& os) const {
  using detail::WriteLE;
  detail::WriteMagic(os, "PLDA");
  WriteLE<std::uint32_t>(os, kFormatVersion);
  WriteLE<std::uint32_t>(os, static_cast<std::uint32_t>(dim()));
  WriteLE<std::uint32_t>(os, static_cast<std::uint32_t>(input_dim()));
  WriteLE<std::uint32_t>(os, length_normalize_ ? 1u : 0u);
  for (Eigen::Index i = 0; i < center_.size(); ++i) WriteLE<double>(os, center_[i]);
  for (Eigen::Index i = 0; i < mu_.size(); ++i) WriteLE<double>(os, mu_[i]);
  auto write_matrix = [&](const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) WriteLE<double>(os, m(r, c));
  };
  write_matrix(projection_);
  write_matrix(between_);
  write_matrix(within_);
}

inline PldaModel PldaModel::Read(std::istream& is) {
  using detail::ReadLE;
  detail::ExpectMagic(is, "PLDA");
  const auto version = ReadLE<std::uint32_t>(is, "PLDA version");
  Require(version == kFormatVersion,
          "PLDA: unsupported format version " + std::to_string(version));
  const auto p = ReadLE<std::uint32_t>(is, "PLDA dim");
  const auto in_dim = ReadLE<std::uint32_t>(is, "PLDA input dim");
  const auto flags = ReadLE<std::uint32_t>(is, "PLDA flags");
  Require(p >= 1 && p <= in_dim, "PLDA: inconsistent dimensions");
  Vector center(in_dim), mu(p);
  for (auto& v : center) v = ReadLE<double>(is, "PLDA center");
  for (auto& v : mu) v = ReadLE<double>(is, "PLDA mean");
  auto read_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = ReadLE<double>(is, "PLDA matrix");
    return m;
  };
  Matrix proj = read_matrix(p, in_dim);
  Matrix b = read_matrix(p, p);
  Matrix w = read_matrix(p, p);
  return PldaModel(std::move(mu), std::move(b), std::move(w), std::move(proj),
                   std::move(center), (flags & 1u) != 0);
}

namespace detail {

inline Matrix Symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Raises eigenvalues of a symmetric matrix to at least `floor`.
inline Matrix FloorEigenvalues(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Symmetrized(m));
  if (eig.eigenvalues().minCoeff() >= floor) return m;
  const Vector lam = eig.eigenvalues().cwiseMax(floor);
  return Symmetrized(eig.eigenvectors() * lam.asDiagonal() *
                     eig.eigenvectors().transpose());
}

/// Sufficient statistics of one speaker in PLDA space.
struct SpeakerStats {
  int n = 0;
  Vector mean;
  Matrix scatter;  // sum_j (y_j - mean)(y_j - mean)^T
};

inline double LogDet(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

/// Marginal log-likelihood of speaker-grouped data under (mu, B, W).
/// Per speaker with n utterances and mean ybar:
///   -0.5 [ n p log(2 pi) + (n - 1) log|W| + log|W + n B|
///          + tr(W^-1 S) + n (ybar - mu)^T (W + n B)^-1 (ybar - mu) ]
inline double PldaLogLikelihood(const std::vector<detail::SpeakerStats>& stats,
                                const Vector& mu, const Matrix& between,
                                const Matrix& within) {
  const int p = static_cast<int>(mu.size());
  Eigen::LLT<Matrix> w_llt(within);
  Require(w_llt.info() == Eigen::Success, "plda: W not positive definite");
  const double logdet_w = detail::LogDet(w_llt);
  std::map<int, Eigen::LLT<Matrix>> by_count;
  double ll = 0.0;
  for (const auto& s : stats) {
    auto it = by_count.find(s.n);
    if (it == by_count.end()) {
      it = by_count.emplace(s.n, Eigen::LLT<Matrix>(within + s.n * between)).first;
    }
    const auto& tot = it->second;
    const Vector d = s.mean - mu;
    const double quad_mean = s.n * d.dot(tot.solve(d));
    const double quad_within = w_llt.solve(s.scatter).trace();
    ll += -0.5 * (s.n * p * std::log(2.0 * std::numbers::pi) +
                  (s.n - 1) * logdet_w + detail::LogDet(tot) + quad_within +
                  quad_mean);
  }
  return ll;
}

/// Preprocessing stage of training: center, whitening, LDA reduction.
/// Returns (projection, center) for raw input vectors.
inline std::pair<Matrix, Vector> FitPldaPreprocessing(
    const EmbeddingSet& set, const PldaTrainConfig& cfg, int n_speakers) {
  const auto [off, len] = SliceBounds(set.layout(), cfg.slice);
  Require(len >= 1, "plda: selected slice is empty");
  const int in_dim = set.dim();
  const auto n = static_cast<Eigen::Index>(set.size());

  Vector center = Vector::Zero(in_dim);
  for (const auto& it : set.items()) center += it.vector;
  center /= static_cast<double>(n);

  Matrix proj = Matrix::Zero(len, in_dim);
  proj.block(0, off, len, len).setIdentity();

  Matrix x(len, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = (set.items()[i].vector - center).segment(off, len);
  }

  if (cfg.whiten) {
    const Matrix total = x * x.transpose() / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(detail::Symmetrized(total));
    const double top = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
    const Vector inv_sqrt =
        eig.eigenvalues().cwiseMax(1e-10 * top).cwiseSqrt().cwiseInverse();
    const Matrix white = inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    proj = white * proj;
    x = white * x;
  }

  const int target = cfg.target_dim > 0 ? cfg.target_dim
                                        : std::min(len, n_speakers - 1);
  Require(target >= 1 && target <= len,
          "plda: target dimension " + std::to_string(target) +
              " out of range [1, " + std::to_string(len) + "]");
  if (target < len) {
    // LDA: generalized eigenproblem S_b v = lambda S_w v, keep the top target.
    const auto groups = set.BySpeaker();
    Matrix sb = Matrix::Zero(len, len), sw = Matrix::Zero(len, len);
    const Vector grand = x.rowwise().mean();
    for (const auto& [spk, idx] : groups) {
      Vector m = Vector::Zero(len);
      for (auto i : idx) m += x.col(static_cast<Eigen::Index>(i));
      m /= static_cast<double>(idx.size());
      sb += static_cast<double>(idx.size()) * (m - grand) * (m - grand).transpose();
      for (auto i : idx) {
        const Vector d = x.col(static_cast<Eigen::Index>(i)) - m;
        sw += d * d.transpose();
      }
    }
    sb /= static_cast<double>(n);
    sw /= static_cast<double>(n);
    sw += 1e-9 * std::max(sw.trace() / len, 1e-300) * Matrix::Identity(len, len);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> gev(
        detail::Symmetrized(sb), detail::Symmetrized(sw));
    Require(gev.info() == Eigen::Success, "plda: LDA eigen-decomposition failed");
    // Eigenvalues ascend; take the last `target` columns, largest first.
    Matrix lda(target, len);
    for (int k = 0; k < target; ++k) {
      lda.row(k) = gev.eigenvectors().col(len - 1 - k).transpose();
    }
    proj = lda * proj;
  }
  return {proj, center};
}

/// EM fit of the two-covariance model. If `ll_trace` is given it receives
/// the marginal log-likelihood before the first and after every iteration.
inline PldaModel TrainPlda(const EmbeddingSet& set, const PldaTrainConfig& cfg = {},
                           std::vector<double>* ll_trace = nullptr) {
  Require(cfg.em_iterations >= 1, "plda: em_iterations must be >= 1");
  const auto groups = set.BySpeaker();
  Require(groups.size() >= 2, "plda: need at least 2 speakers");
  bool any_multi = false;
  for (const auto& [spk, idx] : groups) any_multi |= idx.size() >= 2;
  Require(any_multi, "plda: every speaker is a singleton, W is unidentifiable");

  auto [proj, center] =
      FitPldaPreprocessing(set, cfg, static_cast<int>(groups.size()));
  const int p = static_cast<int>(proj.rows());
  PldaModel pre(Vector::Zero(p), Matrix::Identity(p, p), Matrix::Identity(p, p),
                proj, center, cfg.length_normalize);

  std::vector<detail::SpeakerStats> stats;
  stats.reserve(groups.size());
  int n_total = 0;
  for (const auto& [spk, idx] : groups) {
    std::vector<Vector> ys;
    for (auto i : idx) ys.push_back(pre.Preprocess(set.items()[i].vector));
    detail::SpeakerStats s{static_cast<int>(ys.size()), Vector::Zero(p),
                           Matrix::Zero(p, p)};
    for (const auto& y : ys) s.mean += y;
    s.mean /= static_cast<double>(s.n);
    for (const auto& y : ys) s.scatter += (y - s.mean) * (y - s.mean).transpose();
    n_total += s.n;
    stats.push_back(std::move(s));
  }
  const double n_spk = static_cast<double>(stats.size());

  // Moment initialization.
  Vector mu = Vector::Zero(p);
  for (const auto& s : stats) mu += s.n * s.mean;
  mu /= static_cast<double>(n_total);
  Matrix within = Matrix::Zero(p, p), between = Matrix::Zero(p, p);
  for (const auto& s : stats) {
    within += s.scatter;
    between += (s.mean - mu) * (s.mean - mu).transpose();
  }
  within /= static_cast<double>(n_total);
  between /= n_spk;

  // W floor: 1e-6 of the average total variance per dimension.
  const double floor =
      std::max(1e-6 * (within.trace() + between.trace()) / p, 1e-12);
  within = detail::FloorEigenvalues(within, floor);

  if (ll_trace) ll_trace->push_back(PldaLogLikelihood(stats, mu, between, within));

  for (int iter = 0; iter < cfg.em_iterations; ++iter) {
    Vector mu_acc = Vector::Zero(p);
    Matrix zz_acc = Matrix::Zero(p, p);
    Matrix w_acc = Matrix::Zero(p, p);
    std::map<int, std::pair<Matrix, Matrix>> gain_cache;  // n -> (gain, cov)
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& s = stats[i];
      auto it = gain_cache.find(s.n);
      if (it == gain_cache.end()) {
        // Posterior of z given ybar: gain = B (B + W/n)^-1,
        // cov = B - gain B.
        const Matrix tot = between + within / static_cast<double>(s.n);
        const Matrix gain =
            Eigen::LDLT<Matrix>(tot).solve(between).transpose();
        const Matrix cov = detail::Symmetrized(between - gain * between);
        it = gain_cache.emplace(s.n, std::make_pair(gain, cov)).first;
      }
      const auto& [gain, cov] = it->second;
      const Vector m = mu + gain * (s.mean - mu);
      mu_acc += m;
      zz_acc += cov + m * m.transpose();
      const Vector r = s.mean - m;
      w_acc += s.scatter + s.n * (r * r.transpose() + cov);
    }
    mu = mu_acc / n_spk;
    between = detail::Symmetrized(zz_acc / n_spk - mu * mu.transpose());
    within = detail::Symmetrized(w_acc / static_cast<double>(n_total));
    within = detail::FloorEigenvalues(within, floor);
    if (ll_trace) ll_trace->push_back(PldaLogLikelihood(stats, mu, between, within));
  }

  return PldaModel(mu, between, within, proj, center, cfg.length_normalize);
}

}  // namespace spkanon

#endif  // SPKANON_PLDA_HPP_
