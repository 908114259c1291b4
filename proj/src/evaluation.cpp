// SPDX-License-Identifier: Apache-2.0
#include "ncd/experiment.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>

namespace ncd::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Checkpoint {
  int iteration = 0;
  std::size_t datasetSize = 0;
  std::string prefix;
};

struct RunInfo {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::vector<Checkpoint> checkpoints;
};

RunInfo read_run(const std::string& runDir) {
  RunInfo info;
  info.config = ExperimentConfig::load((fs::path(runDir) / "config.txt").string());
  const fs::path manifestPath = fs::path(runDir) / "manifest.json";
  std::ifstream in(manifestPath);
  if (!in) throw Error(ErrorCode::kIo, "missing run manifest " + manifestPath.string());
  json manifest;
  try {
    manifest = json::parse(in);
    info.seed = manifest.at("seed").get<std::uint64_t>();
    for (const json& c : manifest.at("checkpoints"))
      info.checkpoints.push_back({c.at("iteration").get<int>(), c.at("dataset_size").get<std::size_t>(),
                                  (fs::path(runDir) / c.at("checkpoint").get<std::string>()).string()});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, manifestPath.string() + ": " + e.what());
  }
  if (info.checkpoints.empty()) throw Error(ErrorCode::kIo, "run has no detector checkpoints: " + runDir);
  return info;
}

det::Detector load_detector(const RunInfo& run, const Checkpoint& checkpoint) {
  det::Detector detector(run.config.detector_config(run.seed));
  detector.load(checkpoint.prefix);
  return detector;
}

Matrix stack(const std::vector<active::CollisionSample>& samples) {
  Matrix codes(static_cast<Eigen::Index>(samples.size()), samples.empty() ? 0 : samples.front().z.size());
  for (std::size_t i = 0; i < samples.size(); ++i) codes.row(static_cast<Eigen::Index>(i)) = samples[i].z.transpose();
  return codes;
}

/// Penetrating codes drawn uniformly from the latent box, cached under `aeDir/cache`.
std::vector<active::CollisionSample> handling_set(const Artifacts& artifacts, const std::string& aeDir,
                                                  std::size_t trials, std::uint64_t seed) {
  const fs::path dir = fs::path(aeDir) / "cache";
  fs::create_directories(dir);
  const std::string prefix = (dir / ("handling_n" + std::to_string(trials) + "_s" + std::to_string(seed))).string();
  if (fs::exists(prefix + ".bin")) {
    active::CollisionDataset cached = active::CollisionDataset::load(prefix);
    if (cached.size() == trials) return cached.samples();
  }
  const std::size_t maxDraws = 100 * trials;
  const std::size_t chunk = std::max<std::size_t>(64, trials);
  std::vector<active::CollisionSample> found;
  std::size_t drawn = 0;
  for (std::uint64_t round = 0; found.size() < trials && drawn < maxDraws; ++round) {
    const std::size_t n = std::min(chunk, maxDraws - drawn);
    const Matrix codes = active::sample_uniform(artifacts.box, n, seed + round * 0x9e3779b97f4a7c15ULL);
    drawn += n;
    for (active::CollisionSample& s : artifacts.labeler->label_batch(codes))
      if (s.pd > 0.0 && found.size() < trials) found.push_back(std::move(s));
  }
  if (found.size() < trials)
    throw Error(ErrorCode::kOracle, "only " + std::to_string(found.size()) + " penetrating codes found in " +
                                        std::to_string(drawn) + " draws; " + std::to_string(trials) + " needed");
  active::CollisionDataset data(1e-4);
  data.append(found);
  data.save(prefix, json{{"tag", "handling"}, {"seed", seed}, {"draws", drawn}}.dump());
  return found;
}

}  // namespace

std::vector<DetectionRow> eval_detection(const ExperimentConfig& config, const std::string& aeDir,
                                         const std::string& runDir) {
  const RunInfo run = read_run(runDir);
  const Artifacts artifacts = load_artifacts(run.config, aeDir);
  const std::vector<active::CollisionSample> test = labelled_uniform(artifacts, aeDir, "test", config.nTest, config.testSeed);
  const Matrix codes = stack(test);
  std::vector<int> labels;
  labels.reserve(test.size());
  for (const active::CollisionSample& s : test) labels.push_back(s.label);

  std::vector<DetectionRow> rows;
  std::ofstream out(fs::path(runDir) / "detection.csv");
  out << "iteration,dataset_size,accuracy,false_negative_rate,positives,count\n" << std::setprecision(10);
  for (const Checkpoint& c : run.checkpoints) {
    const det::Detector detector = load_detector(run, c);
    DetectionRow row{c.iteration, c.datasetSize, active::detection_metrics(detector.probabilities(codes), labels)};
    out << row.iteration << ',' << row.datasetSize << ',' << row.metrics.accuracy << ','
        << row.metrics.falseNegativeRate << ',' << row.metrics.positives << ',' << row.metrics.count << '\n';
    rows.push_back(row);
  }
  if (!out) throw Error(ErrorCode::kIo, "cannot write detection.csv in " + runDir);
  return rows;
}

std::vector<HandlingRow> eval_handling(const ExperimentConfig& config, const std::string& aeDir,
                                       const std::string& runDir, bool finalOnly) {
  const RunInfo run = read_run(runDir);
  const Artifacts artifacts = load_artifacts(run.config, aeDir);
  const std::vector<active::CollisionSample> inputs =
      handling_set(artifacts, aeDir, config.handlingTrials, config.handlingSeed);

  struct Trial {
    double pdOut = 0.0, reduction = 0.0, embedding = 0.0;
    handler::AlmResult result;
  };

  std::vector<HandlingRow> rows;
  std::ofstream summary(fs::path(runDir) / "handling.csv");
  summary << "iteration,dataset_size,trials,success_rate,mean_reduction,mean_embedding_difference,feasible_rate,"
             "best_effort_exits,best_effort_nonincreasing\n"
          << std::setprecision(10);
  for (std::size_t ci = finalOnly ? run.checkpoints.size() - 1 : 0; ci < run.checkpoints.size(); ++ci) {
    const Checkpoint& c = run.checkpoints[ci];
    const det::Detector detector = load_detector(run, c);
    const handler::ScalarFunction constraint = handler::neural_constraint(detector);
    std::vector<Trial> trials(inputs.size());
    parallel_for(inputs.size(), [&](std::size_t i) {
      Trial& t = trials[i];
      t.result = handler::alm_solve(inputs[i].z, handler::latent_objective(inputs[i].z), constraint, config.alm);
      t.pdOut = artifacts.labeler->label(t.result.z).pd;
      t.reduction = handler::relative_pd_reduction(inputs[i].pd, t.pdOut);
      t.embedding = 0.5 * (t.result.z - inputs[i].z).squaredNorm();
    });

    const std::string stem = "handling_iter" + std::to_string(c.iteration);
    std::ofstream detail(fs::path(runDir) / (stem + ".csv"));
    detail << "trial,pd_user,pd_out,reduction,feasible,best_effort,embedding_difference,initial_violation,"
              "final_violation\n"
           << std::setprecision(10);
    std::ofstream traces(fs::path(runDir) / (stem + "_traces.jsonl"));
    HandlingRow row;
    row.iteration = c.iteration;
    row.datasetSize = c.datasetSize;
    row.trials = trials.size();
    std::size_t successes = 0, feasible = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const Trial& t = trials[i];
      successes += t.reduction > 0.0 ? 1 : 0;
      feasible += t.result.feasible ? 1 : 0;
      if (t.result.bestEffort) {
        ++row.bestEffortExits;
        row.bestEffortNonincreasing += t.result.finalViolation <= t.result.initialViolation ? 1 : 0;
      }
      row.meanReduction += t.reduction;
      row.meanEmbeddingDifference += t.embedding;
      detail << i << ',' << inputs[i].pd << ',' << t.pdOut << ',' << t.reduction << ',' << int(t.result.feasible) << ','
             << int(t.result.bestEffort) << ',' << t.embedding << ',' << t.result.initialViolation << ','
             << t.result.finalViolation << '\n';
      traces << handler::trace_json(t.result) << '\n';
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, trials.size()));
    row.successRate = static_cast<double>(successes) / n;
    row.feasibleRate = static_cast<double>(feasible) / n;
    row.meanReduction /= n;
    row.meanEmbeddingDifference /= n;
    if (!detail || !traces) throw Error(ErrorCode::kIo, "cannot write " + stem + " outputs in " + runDir);
    summary << row.iteration << ',' << row.datasetSize << ',' << row.trials << ',' << row.successRate << ','
            << row.meanReduction << ',' << row.meanEmbeddingDifference << ',' << row.feasibleRate << ','
            << row.bestEffortExits << ',' << row.bestEffortNonincreasing << '\n';
    rows.push_back(row);
  }
  if (!summary) throw Error(ErrorCode::kIo, "cannot write handling.csv in " + runDir);
  return rows;
}

}  // namespace ncd::exp
