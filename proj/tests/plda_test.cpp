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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "spkanon/plda.hpp"
#include "spkanon/synth.hpp"

namespace spkanon {
namespace {

Vector RandomVector(int dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = n(rng);
  return v;
}

PldaModel ScalarModel(double b, double w, double mu = 0.0) {
  return PldaModel(Vector::Constant(1, mu), Matrix::Constant(1, 1, b),
                   Matrix::Constant(1, 1, w));
}

TEST(PldaScoreTest, ScalarZeroPair) {
  // Same-speaker cov [[2,1],[1,2]] vs different [[2,0],[0,2]] at the origin:
  // 0.5 ln(4/3).
  const auto model = ScalarModel(1.0, 1.0);
  const Vector zero = Vector::Zero(1);
  EXPECT_NEAR(model.Score(zero, zero), 0.14384103622589045, 1e-12);
  EXPECT_NEAR(oracle::PldaLlr(Vector::Zero(1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), zero, zero),
              0.14384103622589045, 1e-12);
}

TEST(PldaScoreTest, MatchesJointDensityOracle) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const int p = 1 + rep % 4;
    const Vector mu = RandomVector(p, rng);
    const Matrix b = oracle::RandomSpd(p, rng, 0.05);
    const Matrix w = oracle::RandomSpd(p, rng, 0.2);
    const PldaModel model(mu, b, w);
    const Vector e1 = mu + RandomVector(p, rng, 2.0), e2 = mu + RandomVector(p, rng, 2.0);
    EXPECT_NEAR(model.Score(e1, e2), oracle::PldaLlr(mu, b, w, e1, e2), 1e-6);
  }
}

TEST(PldaScoreTest, SymmetricAndSelfBeatsReflection) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 1 + rep % 5;
    const PldaModel model(Vector::Zero(p), oracle::RandomSpd(p, rng, 0.1),
                          oracle::RandomSpd(p, rng, 0.1));
    const Vector a = RandomVector(p, rng), b = RandomVector(p, rng);
    EXPECT_NEAR(model.Score(a, b), model.Score(b, a), 1e-9);
    EXPECT_GT(model.Score(a, a), model.Score(a, -a));
    EXPECT_GT(oracle::PldaLlr(model.mu(), model.between(), model.within(), a, a),
              oracle::PldaLlr(model.mu(), model.between(), model.within(), a, -a));
  }
}

TEST(PldaScoreTest, DimensionMismatchThrows) {
  const auto model = ScalarModel(1.0, 1.0);
  EXPECT_THROW(model.Score(Vector::Zero(2), Vector::Zero(1)), Error);
  EXPECT_THROW(PldaModel(Vector::Zero(2), Matrix::Identity(2, 2), Matrix::Zero(2, 2)), Error);
}

TEST(PldaScoreMatrixTest, EqualsScalarCallsBitForBit) {
  std::mt19937_64 rng(13);
  const int p = 3;
  const PldaModel model(RandomVector(p, rng), oracle::RandomSpd(p, rng, 0.1),
                        oracle::RandomSpd(p, rng, 0.1));
  std::vector<Vector> rows, cols;
  for (int i = 0; i < 5; ++i) rows.push_back(RandomVector(p, rng));
  for (int j = 0; j < 7; ++j) cols.push_back(RandomVector(p, rng));
  const Matrix m = model.ScoreMatrix(rows, cols);
  const Matrix par = model.ScoreMatrix(rows, cols, 4);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) {
      EXPECT_EQ(m(i, j), model.Score(rows[i], cols[j]));
      EXPECT_EQ(par(i, j), m(i, j));
    }
  }
  const Matrix one = model.ScoreMatrix(std::span(rows).first(1), std::span(cols).first(1));
  EXPECT_EQ(one(0, 0), model.Score(rows[0], cols[0]));
  const Matrix sq = model.ScoreMatrix(rows, rows);
  EXPECT_EQ(sq, sq.transpose());
}

TEST(PldaIoTest, RoundTripPreservesScores) {
  std::mt19937_64 rng(14);
  const auto set = GenSynthetic({.n_speakers = 12, .utts_per_speaker = 4,
                                 .layout = {3, 5}, .seed = 5});
  const auto model = TrainPlda(set, {.target_dim = 6});
  std::stringstream buf;
  model.Write(buf);
  const auto back = PldaModel::Read(buf);
  EXPECT_EQ(back.dim(), 6);
  EXPECT_EQ(back.input_dim(), 8);
  EXPECT_TRUE(back.length_normalize());
  for (int rep = 0; rep < 10; ++rep) {
    const Vector a = RandomVector(8, rng, 3.0), b = RandomVector(8, rng, 3.0);
    EXPECT_EQ(back.Score(a, b), model.Score(a, b));
  }
  std::stringstream bad("PLDX0000");
  EXPECT_THROW(PldaModel::Read(bad), Error);
  std::string truncated = buf.str();
  std::stringstream again;
  model.Write(again);
  truncated = again.str().substr(0, 40);
  std::stringstream tr(truncated);
  EXPECT_THROW(PldaModel::Read(tr), Error);
}

TEST(PldaTrainTest, LogLikelihoodNonDecreasing) {
  for (int rep = 0; rep < 20; ++rep) {
    SynthConfig cfg{.n_speakers = 10 + rep, .utts_per_speaker = 2 + rep % 4,
                    .layout = {2 + rep % 3, 3}, .between_std = 0.5 + 0.3 * rep,
                    .within_std = 1.0, .seed = static_cast<std::uint64_t>(100 + rep)};
    const auto set = GenSynthetic(cfg);
    std::vector<double> ll;
    TrainPlda(set, {.em_iterations = 15, .length_normalize = rep % 2 == 0}, &ll);
    ASSERT_EQ(ll.size(), 16u);
    for (std::size_t i = 1; i < ll.size(); ++i) {
      EXPECT_GE(ll[i], ll[i - 1] - 1e-9 * std::abs(ll[i - 1])) << "iteration " << i;
    }
  }
}

TEST(PldaTrainTest, RecoversOneDimensionalVariances) {
  const auto set = GenSynthetic({.n_speakers = 200, .utts_per_speaker = 10,
                                 .layout = {1, 0}, .between_std = 2.0,
                                 .within_std = 1.0, .seed = 1});
  const auto model = TrainPlda(
      set, {.em_iterations = 50, .length_normalize = false, .whiten = false});
  EXPECT_NEAR(model.between()(0, 0), 4.0, 0.4);
  EXPECT_NEAR(model.within()(0, 0), 1.0, 0.1);
}

TEST(PldaTrainTest, IdenticalUtterancesCollapseWithinToFloor) {
  EmbeddingSet set(EmbeddingLayout{2, 0});
  std::mt19937_64 rng(15);
  for (int s = 0; s < 20; ++s) {
    const Vector v = RandomVector(2, rng, 3.0);
    for (int u = 0; u < 3; ++u) {
      set.Add({"s" + std::to_string(s) + "u" + std::to_string(u), "s" + std::to_string(s), v});
    }
  }
  const auto model = TrainPlda(set, {.length_normalize = false, .whiten = false});
  const double total = model.between().trace() + model.within().trace();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.within());
  EXPECT_LE(eig.eigenvalues().maxCoeff(), 1e-5 * total);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(PldaTrainTest, TranslationEquivariance) {
  const auto set = GenSynthetic({.n_speakers = 30, .utts_per_speaker = 4,
                                 .layout = {3, 3}, .seed = 21});
  Vector shift(6);
  shift << 5, -3, 100, 0.5, -7, 2;
  EmbeddingSet moved(set.layout());
  for (const auto& it : set.items()) moved.Add({it.utt_id, it.speaker_id, it.vector + shift});
  const auto m1 = TrainPlda(set);
  const auto m2 = TrainPlda(moved);
  EXPECT_TRUE((m2.center() - m1.center() - shift).isZero(1e-9));
  for (std::size_t i = 0; i < set.size(); i += 7) {
    for (std::size_t j = 0; j < set.size(); j += 5) {
      const auto& a = set.items()[i].vector;
      const auto& b = set.items()[j].vector;
      EXPECT_NEAR(m1.Score(a, b), m2.Score(a + shift, b + shift), 1e-6);
    }
  }
}

TEST(PldaTrainTest, TargetsDominateNonTargets) {
  const auto train = GenSynthetic({.n_speakers = 100, .utts_per_speaker = 5,
                                   .layout = {4, 4}, .seed = 31});
  const auto test = GenSynthetic({.n_speakers = 20, .utts_per_speaker = 4,
                                  .layout = {4, 4}, .seed = 32, .speaker_prefix = "t"});
  const auto model = TrainPlda(train);
  std::vector<double> tar, non;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t j = i + 1; j < test.size(); ++j) {
      const auto& a = test.items()[i];
      const auto& b = test.items()[j];
      (a.speaker_id == b.speaker_id ? tar : non).push_back(model.Score(a.vector, b.vector));
    }
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_GT(median(tar), median(non));
}

TEST(PldaTrainTest, RejectsDegenerateInputs) {
  EmbeddingSet one(EmbeddingLayout{2, 0});
  one.Add({"a", "s", Vector::Zero(2)});
  one.Add({"b", "s", Vector::Ones(2)});
  EXPECT_THROW(TrainPlda(one), Error);
  EmbeddingSet singles(EmbeddingLayout{2, 0});
  singles.Add({"a", "s1", Vector::Zero(2)});
  singles.Add({"b", "s2", Vector::Ones(2)});
  EXPECT_THROW(TrainPlda(singles), Error);
  const auto ok = GenSynthetic({.n_speakers = 5, .utts_per_speaker = 2, .layout = {2, 0}});
  EXPECT_THROW(TrainPlda(ok, {.em_iterations = 0}), Error);
  EXPECT_THROW(TrainPlda(ok, {.target_dim = 3}), Error);
}

TEST(PldaTrainTest, SliceRestrictionIgnoresOtherHalf) {
  const auto set = GenSynthetic({.n_speakers = 25, .utts_per_speaker = 4,
                                 .layout = {3, 4}, .seed = 41});
  const auto model = TrainPlda(set, {.slice = Slice::kEcapa});
  EXPECT_EQ(model.dim(), 3);
  Vector a = set.items()[0].vector, b = set.items()[5].vector;
  const double base = model.Score(a, b);
  a.tail(4).setConstant(50.0);
  b.tail(4).setConstant(-50.0);
  EXPECT_NEAR(model.Score(a, b), base, 1e-9);
}

}  // namespace
}  // namespace spkanon
