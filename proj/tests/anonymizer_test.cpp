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

#include "spkanon/anonymizer.hpp"
#include "spkanon/synth.hpp"

namespace spkanon {
namespace {

PldaModel ScalarModel() {
  return PldaModel(Vector::Zero(1), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.5));
}

double StdOf(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct Fixture {
  EmbeddingSet eval, pool;
  PldaModel model;
};

Fixture MakeFixture(int n_eval, int n_pool, std::uint64_t seed) {
  SynthConfig ec{.n_speakers = n_eval, .utts_per_speaker = 4, .layout = {3, 5}, .seed = seed};
  SynthConfig pc{.n_speakers = n_pool, .utts_per_speaker = 4, .layout = {3, 5},
                 .seed = seed + 1000, .speaker_prefix = "pool"};
  auto pool = GenSynthetic(pc);
  auto model = TrainPlda(pool);
  return {GenSynthetic(ec), std::move(pool), std::move(model)};
}

TEST(RandomTest, DrawsStayInsideRanges) {
  DimRanges r{Vector(3), Vector(3)};
  r.lo << -1.0, 0.0, 2.5;
  r.hi << 1.0, 1e-9, 2.5;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Vector v = AnonymizeRandom(r, s);
    EXPECT_TRUE(r.Contains(v));
    EXPECT_EQ(v[2], 2.5);  // degenerate dimension
  }
}

TEST(RandomTest, SeedDeterminism) {
  DimRanges r{Vector::Constant(8, -1.0), Vector::Constant(8, 1.0)};
  EXPECT_EQ(AnonymizeRandom(r, 7), AnonymizeRandom(r, 7));
  EXPECT_NE(AnonymizeRandom(r, 7), AnonymizeRandom(r, 8));
}

TEST(RandomTest, SetIsSpeakerLevelAndInRange) {
  const auto set = GenSynthetic({.n_speakers = 5, .utts_per_speaker = 3, .layout = {2, 2}});
  const auto ranges = ComputeRanges(set);
  const auto res = AnonymizeRandomSet(set, ranges, {.seed = 3}, "trial");
  ASSERT_EQ(res.items.size(), set.size());
  EXPECT_EQ(res.strategy, Strategy::kRandom);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(res.items[i].utt_id, set.items()[i].utt_id);
    EXPECT_TRUE(ranges.Contains(res.items[i].vector));
    if (i > 0 && set.items()[i].speaker_id == set.items()[i - 1].speaker_id) {
      EXPECT_EQ(res.items[i].vector, res.items[i - 1].vector);
    }
  }
}

TEST(SelectFarthestTest, MatchesScoreAndSortOracle) {
  const auto model = ScalarModel();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::map<std::string, Vector> pool{{"a", Vector::Constant(1, n(rng))},
                                       {"b", Vector::Constant(1, n(rng))},
                                       {"c", Vector::Constant(1, n(rng))}};
    const Vector target = Vector::Constant(1, n(rng));
    std::vector<std::pair<double, std::string>> ref;
    for (const auto& [id, v] : pool) ref.emplace_back(model.Score(target, v), id);
    std::sort(ref.begin(), ref.end());
    const auto got = SelectFarthest(model, target, pool, 2);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0], ref[0].second);
    EXPECT_EQ(got[1], ref[1].second);
  }
}

TEST(SelectFarthestTest, ClampsAndBreaksTiesById) {
  const auto model = ScalarModel();
  std::map<std::string, Vector> pool{{"z", Vector::Constant(1, 1.0)},
                                     {"a", Vector::Constant(1, 1.0)},
                                     {"m", Vector::Constant(1, 1.0)}};
  const auto all = SelectFarthest(model, Vector::Zero(1), pool, 10);
  EXPECT_EQ(all, (std::vector<std::string>{"a", "m", "z"}));
  EXPECT_EQ(SelectFarthest(model, Vector::Zero(1), pool, 1), (std::vector<std::string>{"a"}));
}

TEST(SelectFarthestTest, MonotoneInKAndExcludesTarget) {
  const auto f = MakeFixture(1, 60, 2);
  const auto pool = SpeakerLevel(f.pool);
  const Vector target = pool.begin()->second;
  std::vector<std::string> prev;
  for (std::size_t k = 1; k < pool.size(); ++k) {
    auto cur = SelectFarthest(f.model, target, pool, k);
    EXPECT_TRUE(std::find(cur.begin(), cur.end(), pool.begin()->first) == cur.end());
    auto sorted_prev = prev, sorted_cur = cur;
    std::sort(sorted_prev.begin(), sorted_prev.end());
    std::sort(sorted_cur.begin(), sorted_cur.end());
    EXPECT_TRUE(std::includes(sorted_cur.begin(), sorted_cur.end(), sorted_prev.begin(),
                              sorted_prev.end()));
    prev = cur;
  }
}

TEST(PoolTest, IdenticalPoolGivesThatVector) {
  const auto f = MakeFixture(3, 2, 3);
  EmbeddingSet pool(f.eval.layout());
  Vector v(8);
  v << 1, 2, 3, 4, 5, 6, 7, 8;
  for (int s = 0; s < 5; ++s) pool.Add({"p" + std::to_string(s), "p" + std::to_string(s), v});
  const auto res = AnonymizePool(f.eval, pool, f.model, {.n_farthest = 4, .m_subset = 3, .normalize = false});
  for (const auto& it : res.items) EXPECT_TRUE(it.vector.isApprox(v, 1e-14));
  EXPECT_EQ(res.strategy, Strategy::kPoolRaw);
}

TEST(PoolTest, DefaultsRecordedAndClampWarns) {
  const auto f = MakeFixture(2, 30, 4);
  const auto res = AnonymizePool(f.eval, f.pool, f.model, PoolConfig{});
  ASSERT_FALSE(res.items.empty());
  const auto& p = res.items[0].provenance;
  EXPECT_EQ(p.n_farthest_requested, 200);
  EXPECT_EQ(p.m_subset_requested, 100);
  EXPECT_EQ(p.n_farthest, 30);
  EXPECT_EQ(p.m_subset, 30);
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(PoolTest, RawOutputShrinksSpread) {
  const auto f = MakeFixture(50, 300, 5);
  const auto res = AnonymizePool(f.eval, f.pool, f.model,
                                 {.n_farthest = 100, .m_subset = 50, .normalize = false, .seed = 9});
  const auto pool_means = SpeakerLevel(f.pool);
  const auto anon = SpeakerLevel(res.ToSet());
  for (int d = 0; d < 8; ++d) {
    std::vector<double> a, p;
    for (const auto& [id, v] : anon) a.push_back(v[d]);
    for (const auto& [id, v] : pool_means) p.push_back(v[d]);
    EXPECT_LT(StdOf(a), StdOf(p)) << "dimension " << d;
  }
}

TEST(PoolTest, RawInsidePoolHullAndNormalizedOnto) {
  const auto f = MakeFixture(10, 40, 6);
  std::vector<Vector> means;
  for (const auto& [id, v] : SpeakerLevel(f.pool)) means.push_back(v);
  const auto hull = ComputeRanges(means);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto raw = AnonymizePool(f.eval, f.pool, f.model,
                                   {.n_farthest = 20, .m_subset = 7, .normalize = false,
                                    .level = AssignmentLevel::kUtterance, .seed = seed});
    for (const auto& it : raw.items) EXPECT_TRUE(hull.Contains(it.vector));
  }
  for (auto ref : {RangeReference::kInput, RangeReference::kPool}) {
    const auto norm = AnonymizePool(f.eval, f.pool, f.model,
                                    {.n_farthest = 20, .m_subset = 7, .reference = ref});
    const auto target = ref == RangeReference::kPool ? ComputeRanges(f.pool) : ComputeRanges(f.eval);
    std::vector<Vector> out;
    for (const auto& it : norm.items) out.push_back(it.vector);
    const auto got = ComputeRanges(out);
    EXPECT_EQ(got.lo, target.lo);
    EXPECT_EQ(got.hi, target.hi);
  }
}

TEST(PoolTest, ModelLayoutMismatchRejected) {
  const auto f = MakeFixture(2, 10, 7);
  const auto other = TrainPlda(GenSynthetic({.n_speakers = 10, .utts_per_speaker = 3, .layout = {2, 2}}));
  EXPECT_THROW(AnonymizePool(f.eval, f.pool, other, {}), Error);
  EXPECT_THROW(AnonymizePool(f.eval, EmbeddingSet(f.eval.layout()), f.model, {}), Error);
  EXPECT_THROW(AnonymizePool(f.eval, f.pool, f.model, {.n_farthest = 2, .m_subset = 3}), Error);
}

TEST(AssignTargetsTest, DeterministicAndSplitIndependent) {
  const auto f = MakeFixture(20, 80, 8);
  const AnonymizerResources res{&f.pool, &f.model, nullptr};
  const PoolConfig cfg{.n_farthest = 40, .m_subset = 20, .seed = 11};
  const auto a = AssignTargets(f.eval, Strategy::kPool, cfg, "enroll", res);
  const auto b = AssignTargets(f.eval, Strategy::kPool, cfg, "enroll", res);
  const auto c = AssignTargets(f.eval, Strategy::kPool, cfg, "trial", res);
  int differing = 0;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_EQ(a.items[i].vector, b.items[i].vector);
    EXPECT_EQ(a.items[i].provenance.selected, b.items[i].provenance.selected);
    differing += a.items[i].provenance.selected != c.items[i].provenance.selected;
  }
  EXPECT_GT(differing, 0);
  // Speaker-level: every utterance of a speaker shares its vector.
  for (const auto& [spk, idx] : f.eval.BySpeaker()) {
    for (auto i : idx) EXPECT_EQ(a.items[i].vector, a.items[idx.front()].vector);
  }
}

TEST(AssignTargetsTest, ParallelEqualsSequential) {
  const auto f = MakeFixture(25, 60, 9);
  const AnonymizerResources res{&f.pool, &f.model, nullptr};
  for (auto strategy : {Strategy::kRandom, Strategy::kPool, Strategy::kPoolRaw}) {
    PoolConfig cfg{.n_farthest = 30, .m_subset = 10, .level = AssignmentLevel::kUtterance, .seed = 4};
    const auto seq = AssignTargets(f.eval, strategy, cfg, "trial", res);
    cfg.threads = 4;
    const auto par = AssignTargets(f.eval, strategy, cfg, "trial", res);
    ASSERT_EQ(seq.items.size(), par.items.size());
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
      EXPECT_EQ(seq.items[i].vector, par.items[i].vector);
      EXPECT_EQ(seq.items[i].provenance.seed, par.items[i].provenance.seed);
    }
  }
}

TEST(AssignTargetsTest, StrategyNames) {
  EXPECT_EQ(ParseStrategy("pool-raw"), Strategy::kPoolRaw);
  EXPECT_EQ(StrategyName(Strategy::kPoolRaw), "pool_raw");
  EXPECT_THROW(ParseStrategy("vae"), Error);
}

}  // namespace
}  // namespace spkanon
