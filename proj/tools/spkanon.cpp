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

// spkanon: command-line front end. One pipeline stage per subcommand; every
// output file gets a "<output>.manifest" (key=value) recording the command
// and all effective options, which `spkanon replay` can rerun.
//
// Every stage subcommand also accepts --config FILE with the same
// key=value format (keys are long option names); command-line flags win.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spkanon/analysis.hpp"
#include "spkanon/anonymizer.hpp"
#include "spkanon/asv_metrics.hpp"
#include "spkanon/distinctiveness.hpp"
#include "spkanon/embedding.hpp"
#include "spkanon/io.hpp"
#include "spkanon/pipeline.hpp"
#include "spkanon/plda.hpp"
#include "spkanon/scenario.hpp"
#include "spkanon/synth.hpp"

namespace {

using namespace spkanon;

constexpr const char* kManifestSuffix = ".manifest";

// ------------------------------------------------------------- manifests

/// The effective value of every option of `sub` (given or default).
KeyValues OptionsManifest(const CLI::App* sub) {
  KeyValues kv;
  kv.Set("command", sub->get_name());
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    const bool flag = opt->get_expected_min() == 0;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_multi_option_policy() == CLI::MultiOptionPolicy::TakeAll) {
        for (const auto& r : res) value += (value.empty() ? "" : ",") + r;
      } else {
        value = res.back();
      }
    } else {
      value = opt->get_default_str();
      if (flag && value.empty()) value = "false";
      if (value.empty()) continue;  // optional and unset
    }
    kv.Set(name, value);
  }
  return kv;
}

/// Boolean flag whose default is recorded in manifests ("true"/"false").
void BoolFlag(CLI::App* sub, const std::string& names, bool& var, const std::string& help) {
  sub->add_flag(names, var, help)->default_str(var ? "true" : "false");
}

void WriteManifest(const std::string& output, const KeyValues& kv) {
  kv.Save(output + kManifestSuffix);
}

void SaveText(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  Require(os.good(), "cannot open '" + path + "' for writing");
  os << text;
  Require(os.good(), "write failed for '" + path + "'");
}

bool IsCsvPath(const std::string& path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
}

/// EMB1 or, for a ".csv" path, the embedding CSV format.
EmbeddingSet LoadAnySet(const std::string& path) {
  if (IsCsvPath(path)) {
    std::ifstream is(path);
    Require(is.good(), "cannot open '" + path + "'");
    return ReadEmbeddingsCsv(is);
  }
  return LoadEmbeddings(path);
}

/// Anonymized set plus the split tag, seed and strategy from its manifest.
AnonymizationResult LoadAnonymized(const std::string& path) {
  const auto set = LoadEmbeddings(path);
  const std::string mpath = path + kManifestSuffix;
  Require(std::filesystem::exists(mpath),
          "'" + path + "' has no manifest ('" + mpath +
              "'); it records the split tag and seed the attacker simulation needs");
  const auto kv = KeyValues::Load(mpath);
  Require(kv.Has("command") && kv.GetString("command") == "anonymize",
          "'" + mpath + "' is not an anonymize manifest");
  AnonymizationResult r;
  r.strategy = ParseStrategy(kv.GetString("strategy"));
  r.split_tag = kv.GetString("split-tag");
  r.seed = kv.GetUint("seed");
  r.layout = set.layout();
  r.genders = set.genders();
  for (const auto& it : set.items()) r.items.push_back({it.utt_id, it.speaker_id, it.vector, {}});
  return r;
}

// ------------------------------------------------------------ subcommands

struct GenOpts {
  SynthConfig cfg;
  std::string gender = "alternating";
  std::string output, csv;
};

void RunGen(GenOpts o, const KeyValues& manifest) {
  o.cfg.gender = ParseGenderAssignment(o.gender);
  const auto set = GenSynthetic(o.cfg);
  SaveEmbeddings(o.output, set);
  WriteManifest(o.output, manifest);
  if (!o.csv.empty()) {
    std::ostringstream os;
    WriteEmbeddingsCsv(os, set);
    SaveText(o.csv, os.str());
    WriteManifest(o.csv, manifest);
  }
  std::printf("wrote %zu utterances of %zu speakers to %s\n", set.size(), set.Speakers().size(),
              o.output.c_str());
}

struct ConvertOpts {
  std::string input, output;
};

void RunConvert(const ConvertOpts& o, const KeyValues& manifest) {
  const auto set = LoadAnySet(o.input);
  if (IsCsvPath(o.output)) {
    std::ostringstream os;
    WriteEmbeddingsCsv(os, set);
    SaveText(o.output, os.str());
  } else {
    SaveEmbeddings(o.output, set);
  }
  WriteManifest(o.output, manifest);
  std::printf("converted %zu utterances to %s\n", set.size(), o.output.c_str());
}

struct SplitOpts {
  std::string input, enroll, trial;
};

void RunSplit(const SplitOpts& o, const KeyValues& manifest) {
  const auto split = SplitEnrollTrial(LoadAnySet(o.input));
  SaveEmbeddings(o.enroll, split.enroll);
  SaveEmbeddings(o.trial, split.trial);
  WriteManifest(o.enroll, manifest);
  WriteManifest(o.trial, manifest);
  std::printf("enroll: %zu utterances, trial: %zu utterances\n", split.enroll.size(),
              split.trial.size());
}

struct RangesOpts {
  std::string input, output, level = "utterance";
};

void RunRanges(const RangesOpts& o, const KeyValues& manifest) {
  Require(o.level == "utterance" || o.level == "speaker", "--level must be utterance or speaker");
  const auto r = ComputeRanges(LoadAnySet(o.input),
                               o.level == "speaker" ? RangeLevel::kSpeaker : RangeLevel::kUtterance);
  std::ostringstream os;
  WriteRangesCsv(os, r);
  SaveText(o.output, os.str());
  WriteManifest(o.output, manifest);
  std::printf("wrote %d dimension ranges to %s\n", r.dim(), o.output.c_str());
}

struct TrainOpts {
  PldaTrainConfig cfg;
  std::string slice = "full";
  std::string input, output, trace;
};

void RunTrain(TrainOpts o, const KeyValues& manifest) {
  if (o.slice == "ecapa") o.cfg.slice = Slice::kEcapa;
  else if (o.slice == "xvector") o.cfg.slice = Slice::kXvector;
  else Require(o.slice == "full", "--slice must be ecapa, xvector or full");
  std::vector<double> trace;
  const auto model = TrainPlda(LoadAnySet(o.input), o.cfg, &trace);
  model.Save(o.output);
  WriteManifest(o.output, manifest);
  if (!o.trace.empty()) {
    std::ostringstream os;
    os << "iteration,log_likelihood\n";
    for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << detail::Num(trace[i]) << '\n';
    SaveText(o.trace, os.str());
    WriteManifest(o.trace, manifest);
  }
  std::printf("trained PLDA (dim %d) on %s; final log-likelihood %.6f\n", model.dim(),
              o.input.c_str(), trace.empty() ? 0.0 : trace.back());
}

struct AnonOpts {
  std::string input, output, pool, model, ranges, provenance;
  std::string strategy = "pool", split_tag = "trial", level = "speaker", reference = "input";
  PoolConfig cfg;
};

void RunAnonymize(AnonOpts o, const KeyValues& manifest) {
  const auto set = LoadAnySet(o.input);
  const Strategy strategy = ParseStrategy(o.strategy);
  o.cfg.level = ParseLevel(o.level);
  o.cfg.reference = ParseReference(o.reference);
  std::optional<EmbeddingSet> pool;
  std::optional<PldaModel> model;
  std::optional<DimRanges> ranges;
  if (!o.pool.empty()) pool = LoadAnySet(o.pool);
  if (!o.model.empty()) model = PldaModel::Load(o.model);
  if (!o.ranges.empty()) {
    std::ifstream is(o.ranges);
    Require(is.good(), "cannot open '" + o.ranges + "'");
    ranges = ReadRangesCsv(is);
  }
  if (strategy != Strategy::kRandom) {
    Require(pool.has_value(), "--pool is required for strategy " + o.strategy);
    Require(model.has_value(), "--model is required for strategy " + o.strategy);
  }
  const AnonymizerResources res{pool ? &*pool : nullptr, model ? &*model : nullptr,
                                ranges ? &*ranges : nullptr};
  const auto result = AssignTargets(set, strategy, o.cfg, o.split_tag, res);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  SaveEmbeddings(o.output, result.ToSet());
  WriteManifest(o.output, manifest);
  if (!o.provenance.empty()) {
    std::ostringstream os;
    os << "utt_id\tspeaker_id\tseed\tn_farthest\tm_subset\tselected\n";
    for (const auto& it : result.items) {
      const auto& p = it.provenance;
      os << it.utt_id << '\t' << it.speaker_id << '\t' << p.seed << '\t' << p.n_farthest << '\t'
         << p.m_subset << '\t';
      for (std::size_t i = 0; i < p.selected.size(); ++i) os << (i ? " " : "") << p.selected[i];
      os << '\n';
    }
    SaveText(o.provenance, os.str());
    WriteManifest(o.provenance, manifest);
  }
  std::printf("anonymized %zu utterances with strategy %s (split tag '%s')\n", result.items.size(),
              StrategyName(result.strategy).c_str(), o.split_tag.c_str());
}

struct EvalAsvOpts {
  std::string enroll, trial, anon_enroll, anon_trial, model, trials, output;
  std::string scenario = "oa", backend = "plda";
  ResynthConfig resynth;
  int threads = 1;
};

void RunEvalAsv(const EvalAsvOpts& o, const KeyValues& manifest) {
  const Scenario scenario = ParseScenario(o.scenario);
  const Backend backend = ParseBackend(o.backend);
  const auto enroll = LoadAnySet(o.enroll);
  const auto trial = LoadAnySet(o.trial);
  std::optional<PldaModel> model;
  if (backend == Backend::kPlda) {
    Require(!o.model.empty(), "--model is required for the plda backend");
    model = PldaModel::Load(o.model);
  }
  std::optional<AnonymizationResult> ae, at;
  if (scenario != Scenario::kOO) {
    Require(!o.anon_trial.empty(), "--anon-trial is required for scenario " + o.scenario);
    at = LoadAnonymized(o.anon_trial);
  }
  if (scenario == Scenario::kAA) {
    Require(!o.anon_enroll.empty(), "--anon-enroll is required for scenario aa");
    ae = LoadAnonymized(o.anon_enroll);
  } else if (!o.anon_enroll.empty()) {
    std::fprintf(stderr, "note: --anon-enroll is ignored for scenario %s\n", o.scenario.c_str());
  }
  std::optional<TrialList> trials;
  if (!o.trials.empty()) trials = LoadTrials(o.trials, enroll, trial);
  const auto report = RunScenario(enroll, trial, ae ? &*ae : nullptr, at ? &*at : nullptr,
                                  scenario, backend, model ? &*model : nullptr, o.resynth,
                                  o.threads, trials ? &*trials : nullptr);
  std::ostringstream os;
  WriteScenarioKv(os, o.scenario, report);
  SaveText(o.output, os.str());
  WriteManifest(o.output, manifest);
  for (const auto& p : report.partitions) {
    std::printf("%s %-3s  EER %6.2f%%  (raw-polarity sweep %6.2f%%)", o.scenario.c_str(),
                p.partition.c_str(), p.metrics.eer, p.metrics.eer_sweep);
    if (backend == Backend::kPlda) {
      std::printf("  Cllr %.3f  min Cllr %.3f", p.metrics.cllr, p.metrics.min_cllr);
    }
    std::printf("\n");
  }
}

struct EvalDistinctOpts {
  std::string original, anonymized, model, output, matrices, prefix = "trial";
  ResynthConfig resynth;
  int threads = 1;
};

void RunEvalDistinct(const EvalDistinctOpts& o, const KeyValues& manifest) {
  const auto original = LoadAnySet(o.original);
  const auto anon = SimulateResynthesis(LoadAnonymized(o.anonymized), o.resynth);
  const auto model = PldaModel::Load(o.model);
  const auto ds = EvaluateDistinctiveness(original, anon, model, o.threads);
  std::ostringstream os;
  WriteDistinctivenessKv(os, o.prefix, ds);
  SaveText(o.output, os.str());
  WriteManifest(o.output, manifest);
  if (!o.matrices.empty()) {
    std::filesystem::create_directories(o.matrices);
    const std::pair<const char*, SimilarityMatrix> mats[] = {
        {"m_oo.csv", ComputeSimilarity(original, model, o.threads)},
        {"m_oa.csv", ComputeSimilarity(original, anon, model, o.threads)},
        {"m_aa.csv", ComputeSimilarity(anon, model, o.threads)}};
    for (const auto& [name, m] : mats) {
      std::ostringstream ms;
      WriteSimilarityCsv(ms, m);
      const auto path = (std::filesystem::path(o.matrices) / name).string();
      SaveText(path, ms.str());
      WriteManifest(path, manifest);
    }
  }
  for (const auto& d : ds) {
    std::printf("%-3s  DeID %.4f  GVD %8.3f dB\n", d.partition.c_str(), d.deid, d.gvd);
  }
}

struct ClusterOpts {
  std::string input, output;
  KMeansConfig cfg;
};

void RunCluster(const ClusterOpts& o, const KeyValues& manifest) {
  const auto set = LoadAnySet(o.input);
  KeyValues kv;
  std::ostringstream table;
  auto add = [&](const std::string& name, const ClusterReport& r) {
    kv.Set(name + ".k", r.k);
    kv.Set(name + ".inertia", r.inertia);
    kv.Set(name + ".silhouette", r.silhouette);
    kv.Set(name + ".purity", r.purity);
  };
  if (set.layout().ecapa_dim > 0 && set.layout().xvec_dim > 0) {
    const auto c = CompareSpaces(set, o.cfg);
    add("ecapa", c.ecapa);
    add("xvector", c.xvector);
    add("concat", c.concat);
    WriteComparisonTable(table, c);
  } else {
    const auto r = KMeans(set, o.cfg);
    add("full", r);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "k %d  inertia %.4f  silhouette %.4f  purity %.4f\n", r.k,
                  r.inertia, r.silhouette, r.purity);
    table << buf;
  }
  kv.Save(o.output);
  WriteManifest(o.output, manifest);
  std::cout << table.str();
}

struct ProjectOpts {
  std::string input, csv, svg, title, method = "tsne";
  std::uint64_t seed = 0;
  double perplexity = 0.0;  // 0: default (30, clamped)
  int iterations = 1000;
};

void RunProject(const ProjectOpts& o, const KeyValues& manifest) {
  Require(!o.csv.empty() || !o.svg.empty(), "give --csv and/or --svg");
  const auto set = LoadAnySet(o.input);
  ProjectionConfig cfg;
  cfg.method = ParseProjectionMethod(o.method);
  cfg.seed = o.seed;
  if (o.perplexity != 0.0) cfg.perplexity = o.perplexity;
  cfg.iterations = o.iterations;
  const auto p = Project2D(set, cfg);
  if (!o.csv.empty()) {
    std::ostringstream os;
    WriteProjectionCsv(os, p);
    SaveText(o.csv, os.str());
    WriteManifest(o.csv, manifest);
  }
  if (!o.svg.empty()) {
    std::ostringstream os;
    WriteProjectionSvg(os, p, o.title.empty() ? o.input : o.title);
    SaveText(o.svg, os.str());
    WriteManifest(o.svg, manifest);
  }
  std::printf("projected %zu points (%s); speaker silhouette in 2-D %.4f, in the input space %.4f\n",
              p.points.size(), ProjectionMethodName(p.method).c_str(), ProjectionSilhouette(p),
              SpeakerSilhouette(set));
}

struct ReportOpts {
  std::vector<std::string> experiments, rows;
  std::string output;
};

void RunReport(const ReportOpts& o, const KeyValues& manifest) {
  Require(!o.experiments.empty() || !o.rows.empty(), "give --experiment and/or --row");
  std::vector<std::pair<std::string, KeyValues>> rows;
  for (const auto& path : o.experiments) {
    for (auto& r : RowsFromExperimentMetrics(KeyValues::Load(path))) rows.push_back(std::move(r));
  }
  for (const auto& row : o.rows) {
    const auto eq = row.find('=');
    Require(eq != std::string::npos && eq > 0, "--row expects NAME=FILE[+FILE...], got '" + row + "'");
    KeyValues merged;
    std::stringstream files(row.substr(eq + 1));
    std::string file;
    while (std::getline(files, file, '+')) merged.Merge(KeyValues::Load(file));
    rows.emplace_back(row.substr(0, eq), std::move(merged));
  }
  std::ostringstream os;
  WriteTableFromKv(os, rows);
  if (!o.output.empty()) {
    SaveText(o.output, os.str());
    WriteManifest(o.output, manifest);
  }
  std::cout << os.str();
}

struct ExperimentOpts {
  std::string config, out_dir;
  std::vector<std::string> sets;
  int threads = 1;
};

void RunExperimentCommand(const ExperimentOpts& o) {
  KeyValues kv;
  if (!o.config.empty()) kv = KeyValues::Load(o.config);
  for (const auto& s : o.sets) kv.Merge(KeyValues::Parse(s));
  auto cfg = PipelineConfigFromKv(kv);
  cfg.threads = o.threads;
  const auto result = RunPipeline(cfg);
  std::filesystem::create_directories(o.out_dir);
  const auto dir = std::filesystem::path(o.out_dir);
  result.metrics.Save((dir / "metrics.kv").string());
  std::ostringstream table;
  WriteTableFromKv(table, RowsFromExperimentMetrics(result.metrics));
  SaveText((dir / "table.txt").string(), table.str());
  PipelineConfigToKv(cfg).Save((dir / "manifest.kv").string());
  std::cout << table.str();
  for (const auto& r : result.reports) {
    std::printf("%-9s control EER %.2f%%\n", StrategyName(r.strategy).c_str(),
                r.control.at("all").eer);
  }
}

// ------------------------------------------------------------------ main

int Run(std::vector<std::string> args);

/// Replaces "--config FILE" in a stage subcommand by one "--key=value" per
/// entry, placed before the remaining flags so that explicit flags win.
std::vector<std::string> ExpandConfig(const std::vector<std::string>& args) {
  if (args.size() < 2 || args[1] == "experiment" || args[1] == "replay") return args;
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty()) return args;
  const auto kv = KeyValues::Load(config);
  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [k, v] : kv.values()) {
    if (k == "command") {
      Require(v == args[1], "'" + config + "' is a manifest for '" + v + "', not '" + args[1] + "'");
      continue;
    }
    out.push_back("--" + k + "=" + v);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

int Run(std::vector<std::string> args) {
  args = ExpandConfig(args);
  CLI::App app{"Speaker anonymization toolkit: synthetic embeddings, PLDA, pool/random "
               "anonymization, privacy metrics and embedding-space analysis."};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  auto config_opt = [](CLI::App* sub) {
    static std::string unused;
    sub->add_option("--config", unused, "key=value file of option defaults (flags win)");
  };

  GenOpts gen;
  auto* s_gen = app.add_subcommand("gen", "Generate a synthetic embedding set");
  s_gen->add_option("--n-speakers", gen.cfg.n_speakers, "Number of speakers")->capture_default_str();
  s_gen->add_option("--utts", gen.cfg.utts_per_speaker, "Utterances per speaker")->capture_default_str();
  s_gen->add_option("--ecapa-dim", gen.cfg.layout.ecapa_dim, "ECAPA slice width")->capture_default_str();
  s_gen->add_option("--xvec-dim", gen.cfg.layout.xvec_dim, "x-vector slice width")->capture_default_str();
  s_gen->add_option("--between-std", gen.cfg.between_std, "Speaker-mean std")->capture_default_str();
  s_gen->add_option("--within-std", gen.cfg.within_std, "Within-speaker std")->capture_default_str();
  s_gen->add_option("--seed", gen.cfg.seed, "Random seed")->capture_default_str();
  s_gen->add_option("--gender", gen.gender, "alternating, ratio or none")->capture_default_str();
  s_gen->add_option("--female-ratio", gen.cfg.female_ratio, "Female share for --gender ratio")->capture_default_str();
  s_gen->add_option("--prefix", gen.cfg.speaker_prefix, "Speaker id prefix")->capture_default_str();
  s_gen->add_option("-o,--output", gen.output, "Output EMB1 file")->required();
  s_gen->add_option("--csv", gen.csv, "Also write the set as CSV");
  config_opt(s_gen);

  ConvertOpts convert;
  auto* s_convert = app.add_subcommand("convert", "Convert between EMB1 and embedding CSV (by extension)");
  s_convert->add_option("-i,--input", convert.input, "Input set (.csv or EMB1)")->required();
  s_convert->add_option("-o,--output", convert.output, "Output set (.csv or EMB1)")->required();
  config_opt(s_convert);

  SplitOpts split;
  auto* s_split = app.add_subcommand("split", "Split a set into enrollment and trial halves per speaker");
  s_split->add_option("-i,--input", split.input, "Input set")->required();
  s_split->add_option("--enroll", split.enroll, "Enrollment output (EMB1)")->required();
  s_split->add_option("--trial", split.trial, "Trial output (EMB1)")->required();
  config_opt(s_split);

  RangesOpts ranges;
  auto* s_ranges = app.add_subcommand("ranges", "Per-dimension min/max ranges of a set");
  s_ranges->add_option("-i,--input", ranges.input, "Input set")->required();
  s_ranges->add_option("--level", ranges.level, "utterance or speaker")->capture_default_str();
  s_ranges->add_option("-o,--output", ranges.output, "Output ranges CSV")->required();
  config_opt(s_ranges);

  TrainOpts train;
  auto* s_train = app.add_subcommand("train-plda", "Train a two-covariance PLDA model");
  s_train->add_option("-i,--input", train.input, "Training set")->required();
  s_train->add_option("-o,--output", train.output, "Output model file")->required();
  s_train->add_option("--em-iterations", train.cfg.em_iterations, "EM iterations")->capture_default_str();
  s_train->add_option("--target-dim", train.cfg.target_dim, "LDA dimension (0: automatic)")->capture_default_str();
  BoolFlag(s_train, "--length-norm,!--no-length-norm", train.cfg.length_normalize, "Length-normalize inputs");
  BoolFlag(s_train, "--whiten,!--no-whiten", train.cfg.whiten, "Whiten inputs");
  s_train->add_option("--slice", train.slice, "ecapa, xvector or full")->capture_default_str();
  s_train->add_option("--trace", train.trace, "Write the per-iteration log-likelihood CSV");
  config_opt(s_train);

  AnonOpts anon;
  auto* s_anon = app.add_subcommand("anonymize", "Anonymize a set (random, pool or pool-raw)");
  s_anon->add_option("-i,--input", anon.input, "Set to anonymize")->required();
  s_anon->add_option("-o,--output", anon.output, "Output EMB1 file")->required();
  s_anon->add_option("--strategy", anon.strategy, "random, pool or pool-raw")->capture_default_str();
  s_anon->add_option("--pool", anon.pool, "Pool set (pool strategies; random default ranges)");
  s_anon->add_option("--model", anon.model, "PLDA model for pool selection");
  s_anon->add_option("--ranges", anon.ranges, "Ranges CSV for the random strategy");
  s_anon->add_option("--n-farthest", anon.cfg.n_farthest, "Most distant pool speakers kept")->capture_default_str();
  s_anon->add_option("--m-subset", anon.cfg.m_subset, "Random subset averaged")->capture_default_str();
  s_anon->add_option("--seed", anon.cfg.seed, "Random seed")->capture_default_str();
  s_anon->add_option("--split-tag", anon.split_tag, "Dataset split tag (enters every seed)")->capture_default_str();
  s_anon->add_option("--level", anon.level, "speaker or utterance assignment")->capture_default_str();
  s_anon->add_option("--reference", anon.reference, "Normalization ranges: input or pool")->capture_default_str();
  BoolFlag(s_anon, "--gender-filter", anon.cfg.gender_filter, "Select pool speakers of the same gender");
  s_anon->add_option("--threads", anon.cfg.threads, "Worker threads")->capture_default_str();
  s_anon->add_option("--provenance", anon.provenance, "Write per-utterance provenance TSV");
  config_opt(s_anon);

  EvalAsvOpts asv;
  auto* s_asv = app.add_subcommand("eval-asv", "Attacker verification metrics (EER, Cllr, min Cllr)");
  s_asv->add_option("--enroll", asv.enroll, "Original enrollment set")->required();
  s_asv->add_option("--trial", asv.trial, "Original trial set")->required();
  s_asv->add_option("--anon-enroll", asv.anon_enroll, "Anonymized enrollment (aa)");
  s_asv->add_option("--anon-trial", asv.anon_trial, "Anonymized trials (oa, aa)");
  s_asv->add_option("--scenario", asv.scenario, "oa, aa or oo (no anonymization)")->capture_default_str();
  s_asv->add_option("--backend", asv.backend, "plda or cosine")->capture_default_str();
  s_asv->add_option("--model", asv.model, "PLDA model (plda backend)");
  s_asv->add_option("--trials", asv.trials, "Trial list TSV (default: exhaustive)");
  s_asv->add_option("--noise-std", asv.resynth.noise_std, "Resynthesis channel noise std")->capture_default_str();
  s_asv->add_option("--resynth-seed", asv.resynth.seed, "Resynthesis channel seed")->capture_default_str();
  s_asv->add_option("--threads", asv.threads, "Worker threads")->capture_default_str();
  s_asv->add_option("-o,--output", asv.output, "Metrics report (key=value)")->required();
  config_opt(s_asv);

  EvalDistinctOpts dist;
  auto* s_dist = app.add_subcommand("eval-distinctiveness", "DeID and GVD from voice similarity matrices");
  s_dist->add_option("--original", dist.original, "Original set")->required();
  s_dist->add_option("--anonymized", dist.anonymized, "Anonymized set of the same utterances")->required();
  s_dist->add_option("--model", dist.model, "PLDA model")->required();
  s_dist->add_option("--noise-std", dist.resynth.noise_std, "Resynthesis channel noise std")->capture_default_str();
  s_dist->add_option("--resynth-seed", dist.resynth.seed, "Resynthesis channel seed")->capture_default_str();
  s_dist->add_option("--prefix", dist.prefix, "Report key prefix")->capture_default_str();
  s_dist->add_option("--matrices", dist.matrices, "Directory for the three similarity matrix CSVs");
  s_dist->add_option("--threads", dist.threads, "Worker threads")->capture_default_str();
  s_dist->add_option("-o,--output", dist.output, "Metrics report (key=value)")->required();
  config_opt(s_dist);

  ClusterOpts cluster;
  auto* s_cluster = app.add_subcommand("cluster", "k-means on the ECAPA, x-vector and combined spaces");
  s_cluster->add_option("-i,--input", cluster.input, "Input set")->required();
  s_cluster->add_option("--k", cluster.cfg.k, "Clusters (0: number of speakers)")->capture_default_str();
  s_cluster->add_option("--seed", cluster.cfg.seed, "Random seed")->capture_default_str();
  s_cluster->add_option("--restarts", cluster.cfg.restarts, "k-means++ restarts")->capture_default_str();
  s_cluster->add_option("--threads", cluster.cfg.threads, "Worker threads")->capture_default_str();
  s_cluster->add_option("-o,--output", cluster.output, "Report (key=value)")->required();
  config_opt(s_cluster);

  ProjectOpts project;
  auto* s_project = app.add_subcommand("project", "2-D projection (t-SNE or PCA) to CSV and SVG");
  s_project->add_option("-i,--input", project.input, "Input set")->required();
  s_project->add_option("--method", project.method, "tsne or pca")->capture_default_str();
  s_project->add_option("--seed", project.seed, "Random seed")->capture_default_str();
  s_project->add_option("--perplexity", project.perplexity, "t-SNE perplexity (0: 30, clamped)")->capture_default_str();
  s_project->add_option("--iterations", project.iterations, "t-SNE iterations")->capture_default_str();
  s_project->add_option("--csv", project.csv, "Output CSV (utt_id,speaker_id,x,y)");
  s_project->add_option("--svg", project.svg, "Output SVG scatter plot");
  s_project->add_option("--title", project.title, "SVG title");
  config_opt(s_project);

  ReportOpts report;
  auto* s_report = app.add_subcommand("report", "Aggregate metric files into a per-gender grid");
  s_report->add_option("--experiment", report.experiments, "metrics.kv written by 'experiment'")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');
  s_report->add_option("--row", report.rows, "NAME=FILE[+FILE...] of eval-asv / eval-distinctiveness reports")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->delimiter(',');
  s_report->add_option("-o,--output", report.output, "Write the grid to a file");
  config_opt(s_report);

  ExperimentOpts exp;
  auto* s_exp = app.add_subcommand("experiment", "Full synthetic experiment: all strategies and scenarios");
  s_exp->add_option("--config", exp.config, "Experiment key=value configuration (or a manifest)");
  s_exp->add_option("--set", exp.sets, "Override one setting, KEY=VALUE")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  s_exp->add_option("--out-dir", exp.out_dir, "Output directory")->required();
  s_exp->add_option("--threads", exp.threads, "Worker threads (results do not depend on it)")->capture_default_str();

  std::string replay_manifest, replay_out_dir;
  std::vector<std::string> replay_sets;
  auto* s_replay = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  s_replay->add_option("manifest", replay_manifest, "Manifest file")->required();
  s_replay->add_option("--set", replay_sets, "Override one recorded option, KEY=VALUE")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  s_replay->add_option("--out-dir", replay_out_dir, "Output directory (experiment manifests)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto* sub = app.get_subcommands().front();
  const auto manifest = OptionsManifest(sub);
  if (sub == s_gen) RunGen(gen, manifest);
  else if (sub == s_convert) RunConvert(convert, manifest);
  else if (sub == s_split) RunSplit(split, manifest);
  else if (sub == s_ranges) RunRanges(ranges, manifest);
  else if (sub == s_train) RunTrain(train, manifest);
  else if (sub == s_anon) RunAnonymize(anon, manifest);
  else if (sub == s_asv) RunEvalAsv(asv, manifest);
  else if (sub == s_dist) RunEvalDistinct(dist, manifest);
  else if (sub == s_cluster) RunCluster(cluster, manifest);
  else if (sub == s_project) RunProject(project, manifest);
  else if (sub == s_report) RunReport(report, manifest);
  else if (sub == s_exp) RunExperimentCommand(exp);
  else if (sub == s_replay) {
    const auto kv = KeyValues::Load(replay_manifest);
    Require(kv.Has("command"), "'" + replay_manifest + "' records no command");
    const auto command = kv.GetString("command");
    std::vector<std::string> next{args[0], command, "--config", replay_manifest};
    if (command == "experiment") {
      Require(!replay_out_dir.empty(), "replaying an experiment needs --out-dir");
      next.insert(next.end(), {"--out-dir", replay_out_dir});
      for (const auto& s : replay_sets) next.insert(next.end(), {"--set", s});
    } else {
      Require(replay_out_dir.empty(), "--out-dir applies to experiment manifests only");
      for (const auto& s : replay_sets) next.push_back("--" + s);
    }
    return Run(next);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(std::vector<std::string>(argv, argv + argc));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spkanon: error: %s\n", e.what());
    return 1;
  }
}
