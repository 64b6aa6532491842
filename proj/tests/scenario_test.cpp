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

#include <sstream>

#include "spkanon/pipeline.hpp"
#include "spkanon/scenario.hpp"

namespace spkanon {
namespace {

struct World {
  EmbeddingSet eval, pool;
  PldaModel model;
  EnrollTrialSplit split;
};

World MakeWorld(std::uint64_t seed) {
  auto eval = GenSynthetic({.n_speakers = 10, .utts_per_speaker = 6, .layout = {4, 8}, .seed = seed,
                            .speaker_prefix = "eval"});
  auto pool = GenSynthetic({.n_speakers = 60, .utts_per_speaker = 6, .layout = {4, 8},
                            .seed = seed + 100, .speaker_prefix = "pool"});
  auto model = TrainPlda(pool);
  auto split = SplitEnrollTrial(eval);
  return {std::move(eval), std::move(pool), std::move(model), std::move(split)};
}

TEST(SplitTest, HalvesEachSpeaker) {
  const auto w = MakeWorld(1);
  EXPECT_EQ(w.split.enroll.size(), 30u);
  EXPECT_EQ(w.split.trial.size(), 30u);
  EXPECT_EQ(w.split.enroll.Speakers(), w.split.trial.Speakers());
  EXPECT_EQ(w.split.trial.GenderOf("eval00001"), Gender::kMale);
  EXPECT_THROW(SplitEnrollTrial(GenSynthetic({.utts_per_speaker = 1})), Error);
}

TEST(ScenarioTest, ControlIsPlainVerificationWithLowEer) {
  const auto w = MakeWorld(2);
  const auto r = RunScenario(w.split.enroll, w.split.trial, nullptr, nullptr, Scenario::kOO,
                             Backend::kPlda, &w.model, {});
  EXPECT_LT(r.at("all").eer, 5.0);
  ASSERT_EQ(r.partitions.size(), 3u);
  EXPECT_EQ(r.partitions[0].partition, "F");
  // 5 female speakers x 15 female trial utterances.
  EXPECT_EQ(r.at("F").n_target + r.at("F").n_nontarget, 75u);
  EXPECT_EQ(r.at("all").n_target + r.at("all").n_nontarget, 300u);
}

TEST(ScenarioTest, OaLeavesEnrollmentUntouched) {
  const auto w = MakeWorld(3);
  const AnonymizerResources res{&w.pool, &w.model, nullptr};
  const PoolConfig cfg{.n_farthest = 30, .m_subset = 10, .seed = 1};
  const auto at = AssignTargets(w.split.trial, Strategy::kPool, cfg, "trial", res);
  const ResynthConfig rc{.noise_std = 0.5, .seed = 4};
  const auto r = RunScenario(w.split.enroll, w.split.trial, nullptr, &at, Scenario::kOA,
                             Backend::kPlda, &w.model, rc);
  // Reference: original enrollment against the resynthesized trials.
  const auto trial_view = SimulateResynthesis(at, rc);
  const auto s = ScoreTrials(Backend::kPlda, &w.model, w.split.enroll, trial_view,
                             MakeTrials(w.split.enroll, trial_view));
  EXPECT_EQ(r.at("all").eer, RocchEer(s));
  EXPECT_EQ(r.at("all").min_cllr, MinCllr(s));
}

TEST(ScenarioTest, RequiredSidesAndSplitSeeds) {
  const auto w = MakeWorld(4);
  const AnonymizerResources res{&w.pool, &w.model, nullptr};
  const PoolConfig cfg{.n_farthest = 30, .m_subset = 10, .seed = 1};
  const auto e = AssignTargets(w.split.enroll, Strategy::kPool, cfg, "trial", res);
  const auto t = AssignTargets(w.split.trial, Strategy::kPool, cfg, "trial", res);
  EXPECT_THROW(RunScenario(w.split.enroll, w.split.trial, &e, nullptr, Scenario::kOA,
                           Backend::kPlda, &w.model, {}),
               Error);
  EXPECT_THROW(RunScenario(w.split.enroll, w.split.trial, nullptr, &t, Scenario::kAA,
                           Backend::kPlda, &w.model, {}),
               Error);
  EXPECT_THROW(RunScenario(w.split.enroll, w.split.trial, &e, &t, Scenario::kAA, Backend::kPlda,
                           &w.model, {}),
               Error);
  const auto e2 = AssignTargets(w.split.enroll, Strategy::kPool, cfg, "enroll", res);
  EXPECT_NO_THROW(RunScenario(w.split.enroll, w.split.trial, &e2, &t, Scenario::kAA,
                              Backend::kPlda, &w.model, {}));
}

TEST(ScenarioTest, CosineBackendReportsEerOnly) {
  const auto w = MakeWorld(5);
  const auto r = RunScenario(w.split.enroll, w.split.trial, nullptr, nullptr, Scenario::kOO,
                             Backend::kCosine, nullptr, {});
  EXPECT_LT(r.at("all").eer, 5.0);
  std::stringstream ss;
  WriteScenarioKv(ss, "oo", r);
  EXPECT_EQ(ss.str().find("cllr"), std::string::npos);
  EXPECT_NE(ss.str().find("oo.all.eer="), std::string::npos);
}

TEST(DistinctivenessEvalTest, IdentityChannelPreservesEverything) {
  const auto w = MakeWorld(6);
  const auto d = EvaluateDistinctiveness(w.split.trial, w.split.trial, w.model);
  ASSERT_EQ(d.size(), 3u);
  for (const auto& p : d) {
    EXPECT_EQ(p.deid, 0.0);
    EXPECT_EQ(p.gvd, 0.0);
    EXPECT_EQ(p.d_oo, p.d_aa);
  }
}

TEST(ExperimentTest, RowsAndTable) {
  const auto w = MakeWorld(7);
  ExperimentConfig cfg;
  cfg.pool = {.n_farthest = 30, .m_subset = 10, .seed = 2};
  const auto r = RunExperiment(w.eval, w.pool, w.model, cfg);
  EXPECT_LT(r.control.at("all").eer, 5.0);
  EXPECT_GE(r.distinct("all").deid, 0.0);
  std::stringstream ss;
  WriteTable(ss, {r});
  const auto text = ss.str();
  for (const char* col : {"OA EER", "OA Cmin", "AA EER", "AA Cmin", "DeID", "GVD"}) {
    EXPECT_NE(text.find(col), std::string::npos) << col;
  }
  EXPECT_NE(text.find("pool       F"), std::string::npos);
  EXPECT_NE(text.find("pool       M"), std::string::npos);
}

PipelineConfig SmallPipeline() {
  PipelineConfig c;
  c.eval.n_speakers = 8;
  c.eval.utts_per_speaker = 4;
  c.eval.layout = {3, 5};
  c.pool.n_speakers = 40;
  c.pool.utts_per_speaker = 4;
  c.pool.layout = {3, 5};
  c.anon.n_farthest = 20;
  c.anon.m_subset = 10;
  return c;
}

TEST(PipelineTest, ConfigRoundTrip) {
  auto c = SmallPipeline();
  c.strategies = {Strategy::kRandom, Strategy::kPoolRaw};
  c.anon.level = AssignmentLevel::kUtterance;
  c.resynth.noise_std = 0.25;
  const auto kv = PipelineConfigToKv(c);
  const auto back = PipelineConfigToKv(PipelineConfigFromKv(KeyValues::Parse(kv.ToString())));
  EXPECT_EQ(kv.ToString(), back.ToString());
  auto wrong = kv;
  wrong.Set("command", "gen");
  EXPECT_THROW(PipelineConfigFromKv(wrong), Error);
}

TEST(PipelineTest, DeterministicAcrossThreadCounts) {
  auto c = SmallPipeline();
  const auto a = RunPipeline(c);
  c.threads = 4;
  const auto b = RunPipeline(c);
  EXPECT_EQ(a.metrics.ToString(), b.metrics.ToString());
  EXPECT_TRUE(a.metrics.Has("pool.oa.all.eer"));
  EXPECT_TRUE(a.metrics.Has("pool_raw.trial.F.gvd"));
}

}  // namespace
}  // namespace spkanon
