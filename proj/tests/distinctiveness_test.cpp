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

#include <cmath>
#include <random>
#include <sstream>

#include "spkanon/distinctiveness.hpp"
#include "spkanon/synth.hpp"

namespace spkanon {
namespace {

SimilarityMatrix Make(const Matrix& values) {
  SimilarityMatrix m;
  for (Eigen::Index i = 0; i < values.rows(); ++i) m.speakers.push_back("s" + std::to_string(i));
  m.values = values;
  return m;
}

PldaModel ScalarModel() {
  return PldaModel(Vector::Zero(1), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.5));
}

TEST(SimilarityTest, SingleSpeakerTwoUtterances) {
  const auto model = ScalarModel();
  EmbeddingSet x(EmbeddingLayout{1, 0});
  x.Add({"u1", "a", Vector::Constant(1, 0.3)});
  x.Add({"u2", "a", Vector::Constant(1, -0.2)});
  const auto m = ComputeSimilarity(x, model);
  ASSERT_EQ(m.size(), 1);
  const double expected = Sigmoid(model.Score(Vector::Constant(1, 0.3), Vector::Constant(1, -0.2)));
  EXPECT_DOUBLE_EQ(m.values(0, 0), expected);
  EXPECT_GT(m.values(0, 0), 0.0);
  EXPECT_LT(m.values(0, 0), 1.0);
}

TEST(SimilarityTest, SymmetricOnSameSet) {
  const auto set = GenSynthetic({.n_speakers = 6, .utts_per_speaker = 3, .layout = {2, 2},
                                 .between_std = 1.0, .seed = 2});
  const auto model = TrainPlda(GenSynthetic({.n_speakers = 40, .utts_per_speaker = 3,
                                             .layout = {2, 2}, .seed = 3, .speaker_prefix = "p"}));
  const auto m = ComputeSimilarity(set, model, 3);
  EXPECT_TRUE(m.values.isApprox(m.values.transpose(), 1e-9));
  EXPECT_GT(m.values.minCoeff(), 0.0);
  EXPECT_LT(m.values.maxCoeff(), 1.0);
}

TEST(SimilarityTest, MatchesNestedLoopOracle) {
  const auto model = ScalarModel();
  EmbeddingSet x(EmbeddingLayout{1, 0}), y(EmbeddingLayout{1, 0});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const char* spk[] = {"a", "b", "c"};
  for (int s = 0; s < 3; ++s) {
    for (int u = 0; u < 2 + s; ++u) {
      x.Add({std::string("x") + spk[s] + std::to_string(u), spk[s], Vector::Constant(1, n(rng))});
      y.Add({std::string("y") + spk[s] + std::to_string(u), spk[s], Vector::Constant(1, n(rng))});
    }
  }
  for (bool same : {false, true}) {
    const auto m = same ? ComputeSimilarity(x, model) : ComputeSimilarity(x, y, model);
    const EmbeddingSet& cols = same ? x : y;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double sum = 0.0;
        int count = 0;
        for (const auto& a : x.items()) {
          if (a.speaker_id != spk[i]) continue;
          for (const auto& b : cols.items()) {
            if (b.speaker_id != spk[j] || (same && a.utt_id == b.utt_id)) continue;
            const double llr = model.Score(a.vector, b.vector);
            sum += 1.0 / (1.0 + std::exp(-llr));
            ++count;
          }
        }
        EXPECT_NEAR(m.values(i, j), sum / count, 1e-12);
      }
    }
  }
}

TEST(SimilarityTest, SpeakerMismatchAndSingletonsRejected) {
  const auto model = ScalarModel();
  EmbeddingSet x(EmbeddingLayout{1, 0}), y(EmbeddingLayout{1, 0});
  x.Add({"u1", "a", Vector::Zero(1)});
  y.Add({"u2", "b", Vector::Zero(1)});
  EXPECT_THROW(ComputeSimilarity(x, y, model), Error);
  EXPECT_THROW(ComputeSimilarity(x, model), Error);
}

TEST(DiagDominanceTest, ConstantIdentityAndOneByOne) {
  EXPECT_NEAR(DiagDominance(Make(Matrix::Constant(3, 3, 0.4))), 0.0, 1e-15);
  EXPECT_EQ(DiagDominance(Make(Matrix::Constant(4, 4, 0.25))), 0.0);
  Matrix id = Matrix::Constant(3, 3, 0.1);
  id.diagonal().setConstant(0.9);
  EXPECT_NEAR(DiagDominance(Make(id)), 0.8, 1e-15);
  EXPECT_NEAR(DiagDominance(Make(Matrix::Constant(1, 1, 0.75))), 0.25, 1e-15);
}

TEST(DiagDominanceTest, MatchesTwoPassMeans) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix v(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) v(i, j) = u(rng);
    double diag = 0.0, off = 0.0;
    for (int i = 0; i < 4; ++i) diag += v(i, i);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) off += v(i, j);
    EXPECT_NEAR(DiagDominance(Make(v)), std::abs(diag / 4 - off / 12), 1e-14);
  }
}

TEST(DeidTest, Anchors) {
  Matrix oo = Matrix::Constant(3, 3, 0.1);
  oo.diagonal().setConstant(0.9);
  EXPECT_EQ(Deid(Make(oo), Make(oo)), 0.0);
  EXPECT_EQ(Deid(Make(oo), Make(Matrix::Constant(3, 3, 0.25))), 1.0);
  Matrix quarter = Matrix::Constant(3, 3, 0.1);
  quarter.diagonal().setConstant(0.3);  // dominance 0.2 = 0.25 * 0.8
  EXPECT_NEAR(Deid(Make(oo), Make(quarter)), 0.75, 1e-12);
  Matrix stronger = Matrix::Constant(3, 3, 0.0);
  stronger.diagonal().setConstant(1.0);
  EXPECT_EQ(Deid(Make(oo), Make(stronger)), 0.0);
  EXPECT_THROW(Deid(Make(Matrix::Constant(3, 3, 0.5)), Make(oo)), Error);
}

TEST(GvdTest, Anchors) {
  Matrix oo = Matrix::Constant(3, 3, 0.1);
  oo.diagonal().setConstant(0.9);
  EXPECT_EQ(Gvd(Make(oo), Make(oo)), 0.0);
  Matrix tenth = Matrix::Constant(3, 3, 0.1);
  tenth.diagonal().setConstant(0.18);  // dominance 0.08
  EXPECT_NEAR(Gvd(Make(oo), Make(tenth)), -10.0, 1e-9);
  EXPECT_NEAR(Gvd(Make(tenth), Make(oo)), 10.0, 1e-9);
  EXPECT_EQ(Gvd(Make(oo), Make(Matrix::Constant(3, 3, 0.25))),
            -std::numeric_limits<double>::infinity());
  EXPECT_EQ(Gvd(Make(Matrix::Constant(3, 3, 0.25)), Make(oo)),
            std::numeric_limits<double>::infinity());
  EXPECT_TRUE(std::isnan(Gvd(Make(Matrix::Constant(3, 3, 0.25)), Make(Matrix::Constant(3, 3, 0.5)))));
}

TEST(GvdTest, PermutationInvariance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Matrix a(4, 4), b(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      a(i, j) = u(rng);
      b(i, j) = u(rng);
    }
  a.diagonal().array() += 1.0;
  const Eigen::PermutationMatrix<Eigen::Dynamic> perm(Eigen::Vector4i(2, 0, 3, 1));
  const Matrix pa = perm * a * perm.transpose(), pb = perm * b * perm.transpose();
  EXPECT_NEAR(Gvd(Make(a), Make(b)), Gvd(Make(pa), Make(pb)), 1e-12);
  EXPECT_NEAR(Deid(Make(a), Make(b)), Deid(Make(pa), Make(pb)), 1e-12);
  auto other = Make(b);
  other.speakers[0] = "zz";
  EXPECT_THROW(Gvd(Make(a), other), Error);
}

TEST(SimilarityCsvTest, HeaderAndRows) {
  Matrix v(2, 2);
  v << 0.5, 0.25, 0.125, 1;
  std::stringstream os;
  WriteSimilarityCsv(os, Make(v));
  EXPECT_EQ(os.str(), "speaker,s0,s1\ns0,0.5,0.25\ns1,0.125,1\n");
}

}  // namespace
}  // namespace spkanon
