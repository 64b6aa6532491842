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

// Embedding-space diagnostics: k-means clustering (with silhouette and
// speaker purity) on the ECAPA slice, the x-vector slice and the combined
// vector, and 2-D projections (exact t-SNE or PCA) with CSV/SVG export.

#ifndef SPKANON_ANALYSIS_HPP_
#define SPKANON_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spkanon/common.hpp"
#include "spkanon/embedding.hpp"

namespace spkanon {

// ---------------------------------------------------------------- k-means

struct KMeansConfig {
  int k = 0;  // 0: number of distinct speakers
  std::uint64_t seed = 0;
  int restarts = 50;
  int max_iterations = 300;
  int threads = 1;
};

struct ClusterReport {
  int k = 0;
  std::map<std::string, int> assignments;  // utt_id -> cluster
  double inertia = 0.0;
  double silhouette = 0.0;
  double purity = 0.0;
  int iterations = 0;
  int best_restart = 0;
};

namespace detail {

struct LloydRun {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

inline int Nearest(const Matrix& centroids, const Vector& x, double* dist2) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    const double d = (centroids.col(c) - x).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

/// Greedy k-means++ seeding followed by Lloyd iterations. Throws if the inertia
/// ever increases (beyond rounding).
inline LloydRun Lloyd(const std::vector<Vector>& x, int k, int max_iterations,
                      std::uint64_t seed) {
  const std::size_t n = x.size();
  const Eigen::Index dim = x[0].size();
  std::mt19937_64 rng(seed);
  Matrix centroids(dim, k);
  {
    // Greedy k-means++: each step draws 2 + floor(ln k) D^2-weighted
    // candidates and keeps the one that lowers the potential most.
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centroids.col(0) = x[first(rng)];
    std::vector<double> d2(n), cand_d2(n), best_d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = (centroids.col(0) - x[i]).squaredNorm();
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (double v : d2) total += v;
      double best_potential = std::numeric_limits<double>::infinity();
      std::size_t best_pick = 0;
      for (int t = 0; t < trials; ++t) {
        std::size_t pick = 0;
        if (total > 0.0) {
          std::uniform_real_distribution<double> u(0.0, total);
          const double r = u(rng);
          double acc = 0.0;
          pick = n;
          for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (d2[i] > 0.0 && r < acc) {
              pick = i;
              break;
            }
          }
          if (pick == n) {  // rounding at the end of the scan
            pick = n - 1;
            while (d2[pick] == 0.0) --pick;
          }
        } else {
          std::uniform_int_distribution<std::size_t> any(0, n - 1);
          pick = any(rng);
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          cand_d2[i] = std::min(d2[i], (x[pick] - x[i]).squaredNorm());
          potential += cand_d2[i];
        }
        if (potential < best_potential) {
          best_potential = potential;
          best_pick = pick;
          best_d2 = cand_d2;
        }
      }
      centroids.col(c) = x[best_pick];
      d2 = best_d2;
    }
  }

  LloydRun run;
  run.labels.assign(n, -1);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d;
      const int c = Nearest(centroids, x[i], &d);
      inertia += d;
      if (c != run.labels[i]) {
        run.labels[i] = c;
        changed = true;
      }
    }
    Require(inertia <= prev * (1.0 + 1e-12) + 1e-300, "kmeans: inertia increased");
    prev = inertia;
    run.inertia = inertia;
    run.iterations = it + 1;
    if (!changed) break;
    // Update step; an empty cluster keeps its centroid.
    Matrix sums = Matrix::Zero(dim, k);
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.col(run.labels[i]) += x[i];
      ++counts[run.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centroids.col(c) = sums.col(c) / counts[c];
    }
  }
  // Inertia of the final assignment against the final centroids.
  double final_inertia = 0.0;
  Matrix sums = Matrix::Zero(dim, k);
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sums.col(run.labels[i]) += x[i];
    ++counts[run.labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) centroids.col(c) = sums.col(c) / counts[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    final_inertia += (centroids.col(run.labels[i]) - x[i]).squaredNorm();
  }
  Require(final_inertia <= run.inertia * (1.0 + 1e-12) + 1e-300, "kmeans: inertia increased");
  run.inertia = final_inertia;
  return run;
}

}  // namespace detail

/// Mean silhouette (Euclidean) of a labeling. Points in singleton clusters
/// score 0; a single cluster overall gives 0.
inline double Silhouette(const std::vector<Vector>& x, const std::vector<int>& labels) {
  Require(x.size() == labels.size(), "silhouette: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::map<int, int> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) return 0.0;
  std::map<int, std::size_t> slot;
  for (const auto& [l, c] : sizes) slot.emplace(l, slot.size());
  double total = 0.0;
  std::vector<double> sum(sizes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sum[slot.at(labels[j])] += (x[i] - x[j]).norm();
    }
    const int own = labels[i];
    if (sizes.at(own) == 1) continue;
    const double a = sum[slot.at(own)] / (sizes.at(own) - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, c] : sizes) {
      if (l != own) b = std::min(b, sum[slot.at(l)] / c);
    }
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

/// Silhouette of an embedding set labeled by speaker.
inline double SpeakerSilhouette(const EmbeddingSet& set) {
  std::vector<Vector> x;
  std::vector<int> labels;
  std::map<std::string, int> ids;
  for (const auto& it : set.items()) {
    x.push_back(it.vector);
    labels.push_back(ids.emplace(it.speaker_id, static_cast<int>(ids.size())).first->second);
  }
  return Silhouette(x, labels);
}

/// Fraction of points whose cluster's majority speaker is their own.
inline double Purity(const std::vector<int>& labels, const std::vector<std::string>& truth) {
  Require(labels.size() == truth.size() && !labels.empty(), "purity: size mismatch");
  std::map<int, std::map<std::string, int>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts[labels[i]][truth[i]];
  std::size_t hit = 0;
  for (const auto& [c, per] : counts) {
    int best = 0;
    for (const auto& [s, n] : per) best = std::max(best, n);
    hit += static_cast<std::size_t>(best);
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Best-of-restarts k-means on the utterance vectors of `set`. Restarts run
/// in parallel; the lowest inertia wins, ties going to the lower restart.
inline ClusterReport KMeans(const EmbeddingSet& set, const KMeansConfig& cfg) {
  Require(!set.empty(), "kmeans: empty set");
  const int k = cfg.k == 0 ? static_cast<int>(set.Speakers().size()) : cfg.k;
  Require(k >= 1, "kmeans: k must be >= 1");
  Require(static_cast<std::size_t>(k) <= set.size(),
          "kmeans: k = " + std::to_string(k) + " exceeds the number of utterances " +
              std::to_string(set.size()));
  Require(cfg.restarts >= 1 && cfg.max_iterations >= 1, "kmeans: restarts and iterations must be >= 1");

  std::vector<Vector> x;
  std::vector<std::string> truth;
  for (const auto& it : set.items()) {
    x.push_back(it.vector);
    truth.push_back(it.speaker_id);
  }
  std::vector<detail::LloydRun> runs(static_cast<std::size_t>(cfg.restarts));
  ParallelFor(runs.size(), cfg.threads, [&](std::size_t r) {
    runs[r] = detail::Lloyd(x, k, cfg.max_iterations, DeriveSeed(cfg.seed, "kmeans", std::to_string(r)));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }

  ClusterReport report;
  report.k = k;
  report.inertia = runs[best].inertia;
  report.iterations = runs[best].iterations;
  report.best_restart = static_cast<int>(best);
  for (std::size_t i = 0; i < x.size(); ++i) {
    report.assignments[set.items()[i].utt_id] = runs[best].labels[i];
  }
  report.silhouette = Silhouette(x, runs[best].labels);
  report.purity = Purity(runs[best].labels, truth);
  return report;
}

struct SpaceComparison {
  ClusterReport ecapa, xvector, concat;
};

/// k-means on the ECAPA slice, the x-vector slice, and the full vector.
inline SpaceComparison CompareSpaces(const EmbeddingSet& set, const KMeansConfig& cfg) {
  Require(set.layout().ecapa_dim > 0 && set.layout().xvec_dim > 0,
          "compare_spaces: layout needs both an ECAPA and an x-vector slice");
  return {KMeans(RestrictToSlice(set, Slice::kEcapa), cfg),
          KMeans(RestrictToSlice(set, Slice::kXvector), cfg), KMeans(set, cfg)};
}

inline void WriteComparisonTable(std::ostream& os, const SpaceComparison& c) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-8s %4s %12s %10s %8s\n", "space", "k", "inertia",
                "silhouette", "purity");
  os << buf;
  const std::pair<const char*, const ClusterReport*> rows[] = {
      {"ecapa", &c.ecapa}, {"xvector", &c.xvector}, {"concat", &c.concat}};
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %4d %12.4f %10.4f %8.4f\n", name, r->k, r->inertia,
                  r->silhouette, r->purity);
    os << buf;
  }
}

// ------------------------------------------------------------- projection

enum class ProjectionMethod { kTsne, kPca };

inline std::string ProjectionMethodName(ProjectionMethod m) {
  return m == ProjectionMethod::kTsne ? "tsne" : "pca";
}

inline ProjectionMethod ParseProjectionMethod(std::string_view s) {
  if (s == "tsne") return ProjectionMethod::kTsne;
  if (s == "pca") return ProjectionMethod::kPca;
  throw Error("unknown projection method '" + std::string(s) + "' (expected tsne or pca)");
}

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::kTsne;
  std::uint64_t seed = 0;
  // Unset: 30, clamped below (n - 1) / 3. An explicit value must satisfy
  // 0 < perplexity < (n - 1) / 3.
  std::optional<double> perplexity = std::nullopt;
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
};

struct ProjectedPoint {
  std::string utt_id;
  std::string speaker_id;
  double x = 0.0, y = 0.0;
};

struct Projection2D {
  ProjectionMethod method = ProjectionMethod::kTsne;
  std::vector<ProjectedPoint> points;  // input order
  double perplexity = 0.0;             // t-SNE only
  std::vector<double> kl_trace;        // t-SNE: KL after each iteration past exaggeration
};

namespace detail {

/// Top-two principal component scores. Each axis is oriented so that its
/// largest-magnitude loading is positive.
inline Matrix PcaScores(const Matrix& x) {  // rows = points
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Matrix out = Matrix::Zero(x.rows(), 2);
  if (x.cols() == 0) return out;
  const Matrix cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Eigen::Index d = cov.rows();
  for (Eigen::Index a = 0; a < std::min<Eigen::Index>(2, d); ++a) {
    Vector v = eig.eigenvectors().col(d - 1 - a);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    out.col(a) = centered * v;
  }
  return out;
}

/// Row-conditional affinities with per-point precision found by bisection
/// on the entropy, then symmetrized and normalized.
inline Matrix TsneAffinities(const Matrix& d2, double perplexity) {
  const Eigen::Index n = d2.rows();
  const double target = std::log(perplexity);
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d2(i, j));
    Vector row(n);
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        // Shifting by the nearest distance keeps exp() away from underflow.
        row[j] = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - dmin));
        sum += row[j];
        weighted += row[j] * (d2(i, j) - dmin);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      if (std::abs(entropy - target) < 1e-10) break;
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  }
  Matrix sym = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  return sym.cwiseMax(1e-300);
}

}  // namespace detail

/// 2-D projection of every utterance of `set`.
inline Projection2D Project2D(const EmbeddingSet& set, const ProjectionConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(set.size());
  Projection2D out;
  out.method = cfg.method;
  Matrix x(n, set.dim());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = set.items()[i].vector.transpose();

  Matrix y;
  if (cfg.method == ProjectionMethod::kPca) {
    Require(n >= 1, "project: empty set");
    y = detail::PcaScores(x);
  } else {
    Require(n >= 3, "project: t-SNE needs at least 3 points");
    const double limit = static_cast<double>(n - 1) / 3.0;
    double perplexity;
    if (cfg.perplexity) {
      perplexity = *cfg.perplexity;
      Require(std::isfinite(perplexity) && perplexity > 0.0 && perplexity < limit,
              "project: perplexity must lie in (0, (n - 1) / 3)");
    } else {
      perplexity = std::min(30.0, std::nextafter(limit, 0.0));
    }
    Require(cfg.iterations >= 1 && cfg.exaggeration_iterations >= 0 &&
                cfg.exaggeration_iterations < cfg.iterations,
            "project: invalid iteration counts");
    out.perplexity = perplexity;

    Matrix d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (x.row(i) - x.row(j)).squaredNorm();
    const Matrix p = detail::TsneAffinities(d2, perplexity);

    std::mt19937_64 rng(DeriveSeed(cfg.seed, "tsne"));
    std::normal_distribution<double> init(0.0, 1e-4);
    y.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i, 0) = init(rng);
      y(i, 1) = init(rng);
    }
    Matrix velocity = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2);
    Matrix q(n, n), grad(n, 2);
    for (int it = 0; it < cfg.iterations; ++it) {
      const bool early = it < cfg.exaggeration_iterations;
      const double exag = early ? cfg.exaggeration : 1.0;
      const double momentum = early ? 0.5 : 0.8;
      double qsum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        q(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double w = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
          q(i, j) = q(j, i) = w;
          qsum += 2.0 * w;
        }
      }
      grad.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i == j) continue;
          const double m = (exag * p(i, j) - q(i, j) / qsum) * q(i, j);
          grad.row(i) += 4.0 * m * (y.row(i) - y.row(j));
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int a = 0; a < 2; ++a) {
          const bool same_sign = (grad(i, a) > 0) == (velocity(i, a) > 0);
          gains(i, a) = std::max(0.01, same_sign ? gains(i, a) * 0.8 : gains(i, a) + 0.2);
          velocity(i, a) = momentum * velocity(i, a) - cfg.learning_rate * gains(i, a) * grad(i, a);
          y(i, a) += velocity(i, a);
        }
      }
      y = y.rowwise() - y.colwise().mean();
      if (!early) {
        double kl = 0.0;
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) s += 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double qij = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm()) / s;
            kl += p(i, j) * std::log(p(i, j) / std::max(qij, 1e-300));
          }
        }
        out.kl_trace.push_back(kl);
      }
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    Require(std::isfinite(y(i, 0)) && std::isfinite(y(i, 1)), "project: non-finite coordinate");
    out.points.push_back({set.items()[i].utt_id, set.items()[i].speaker_id, y(i, 0), y(i, 1)});
  }
  return out;
}

/// Silhouette of the 2-D coordinates labeled by speaker.
inline double ProjectionSilhouette(const Projection2D& p) {
  std::vector<Vector> x;
  std::vector<int> labels;
  std::map<std::string, int> ids;
  for (const auto& pt : p.points) {
    Vector v(2);
    v << pt.x, pt.y;
    x.push_back(v);
    labels.push_back(ids.emplace(pt.speaker_id, static_cast<int>(ids.size())).first->second);
  }
  return Silhouette(x, labels);
}

/// "utt_id,speaker_id,x,y" with full double precision.
inline void WriteProjectionCsv(std::ostream& os, const Projection2D& p) {
  os << "utt_id,speaker_id,x,y\n";
  char buf[64];
  for (const auto& pt : p.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", pt.x, pt.y);
    os << pt.utt_id << ',' << pt.speaker_id << ',' << buf << '\n';
  }
}

namespace detail {

inline std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Evenly spread hues (golden-angle steps) so neighbours differ visibly.
inline std::string SpeakerColor(std::size_t index) {
  const double hue = std::fmod(static_cast<double>(index) * 137.508, 360.0);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "hsl(%.1f,70%%,45%%)", hue);
  return buf;
}

}  // namespace detail

/// Self-contained SVG scatter plot, one color per speaker.
inline void WriteProjectionSvg(std::ostream& os, const Projection2D& p,
                               const std::string& title = "") {
  constexpr double kSize = 600.0, kMargin = 30.0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!p.points.empty()) {
    xmin = xmax = p.points[0].x;
    ymin = ymax = p.points[0].y;
    for (const auto& pt : p.points) {
      xmin = std::min(xmin, pt.x);
      xmax = std::max(xmax, pt.x);
      ymin = std::min(ymin, pt.y);
      ymax = std::max(ymax, pt.y);
    }
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  std::map<std::string, std::size_t> colors;
  for (const auto& pt : p.points) colors.emplace(pt.speaker_id, colors.size());

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                kSize, kSize, kSize, kSize);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n" << buf;
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    os << "<text x=\"" << kMargin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
       << detail::XmlEscape(title) << "</text>\n";
  }
  const double scale = (kSize - 2.0 * kMargin) / span;
  for (const auto& pt : p.points) {
    const double cx = kMargin + (pt.x - xmin) * scale;
    const double cy = kSize - kMargin - (pt.y - ymin) * scale;
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\">",
                  cx, cy, detail::SpeakerColor(colors.at(pt.speaker_id)).c_str());
    os << buf << "<title>" << detail::XmlEscape(pt.speaker_id) << ' '
       << detail::XmlEscape(pt.utt_id) << "</title></circle>\n";
  }
  os << "</svg>\n";
}

}  // namespace spkanon

#endif  // SPKANON_ANALYSIS_HPP_
