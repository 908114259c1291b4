// SPDX-License-Identifier: Apache-2.0
#include "ncd/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace ncd::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable per-sample validation assignment: does not change as the dataset grows.
bool in_validation(std::uint64_t seed, std::size_t index, double fraction) {
  const double u = static_cast<double>(mix(mix(seed) ^ index) >> 11) * 0x1.0p-53;
  return u < fraction;
}

/// Fraction of non-empty domains whose vertices form one edge-connected component.
double contiguous_fraction(const mesh::Mesh& rest, const geom::DomainMap& domains) {
  const std::size_t n = rest.vertex_count();
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const mesh::Face& f : rest.triangles)
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      if (domains.domainOf[a] == domains.domainOf[b]) parent[find(a)] = find(b);
    }
  std::vector<std::vector<std::size_t>> roots(static_cast<std::size_t>(domains.count));
  for (std::size_t v = 0; v < n; ++v) roots[static_cast<std::size_t>(domains.domainOf[v])].push_back(find(v));
  int used = 0, contiguous = 0;
  for (auto& r : roots) {
    if (r.empty()) continue;
    ++used;
    std::sort(r.begin(), r.end());
    contiguous += std::unique(r.begin(), r.end()) - r.begin() == 1 ? 1 : 0;
  }
  return used ? static_cast<double>(contiguous) / used : 0.0;
}

}  // namespace

datagen::SynthResult synth(const ExperimentConfig& config, const std::string& outDir) {
  const datagen::PoseFamily family = datagen::PoseFamily::by_name(config.family);
  datagen::SynthResult result = datagen::synth_dataset(family, config.synthCount, config.synthSeed);
  datagen::write_dataset(outDir, family, result, config.synthSeed);
  write_json(fs::path(outDir) / "generation.json",
             {{"family", config.family},
              {"count", result.meshes.size()},
              {"collision_free", result.collisionFree},
              {"collision_free_fraction", result.collision_free_fraction()},
              {"vertices", family.rest().vertex_count()},
              {"triangles", family.rest().triangles.size()}});
  return result;
}

void train_ae(const ExperimentConfig& config, const std::string& dataDir, const std::string& aeDir) {
  const datagen::StoredDataset data = datagen::read_dataset(dataDir);
  std::vector<mesh::Mesh> training;
  for (std::size_t i = 0; i < data.meshes.size(); ++i)
    if (data.labels[i] == 0) training.push_back(data.meshes[i]);
  if (training.size() < 2) throw Error(ErrorCode::kInvalidArgument, "fewer than 2 collision-free meshes to train on");

  fs::create_directories(aeDir);
  config.save((fs::path(aeDir) / "config.txt").string());
  mesh::write_obj_file((fs::path(aeDir) / "rest.obj").string(), data.rest.vertices, data.rest.triangles);

  const Matrix features = ae::feature_matrix(training);
  ae::Autoencoder model(static_cast<int>(data.rest.vertex_count()), config.autoencoder);
  const ae::TrainingLog log = ae::train_autoencoder(model, features, (fs::path(aeDir) / "ae_training.csv").string());
  model.save((fs::path(aeDir) / "autoencoder").string());

  const Matrix codes = model.encode_batch(features);
  const active::LatentBox box = active::latent_box(codes);
  write_json(fs::path(aeDir) / "latent_box.json", {{"lo", to_std(box.lo)}, {"hi", to_std(box.hi)}});

  const Matrix recon = model.decode_batch(codes);
  const double diag = mesh::bounding_box_diagonal(data.rest.vertices);
  double vertexError = 0.0, relativeError = 0.0;
  const Eigen::Index v = features.cols() / 3;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index k = 0; k < v; ++k) vertexError += (recon.row(i).segment<3>(3 * k) - features.row(i).segment<3>(3 * k)).norm();
    relativeError += (recon.row(i) - features.row(i)).norm() / std::max(features.row(i).norm(), 1e-12);
  }
  vertexError /= static_cast<double>(features.rows() * v);
  relativeError /= static_cast<double>(features.rows());

  const geom::DomainMap domains = ae::domain_map(model.attention());
  write_json(fs::path(aeDir) / "ae_report.json",
             {{"training_meshes", training.size()},
              {"epochs", config.autoencoder.epochs},
              {"initial_reconstruction_mse", log.initialReconstruction},
              {"final_reconstruction_mse", log.reconstruction.empty() ? log.initialReconstruction : log.reconstruction.back()},
              {"mean_vertex_error_over_diagonal", vertexError / diag},
              {"mean_relative_feature_error", relativeError},
              {"final_attention_entropy", log.entropy.empty() ? 0.0 : log.entropy.back()},
              {"contiguous_domain_fraction", contiguous_fraction(data.rest, domains)},
              {"domain_of_vertex", domains.domainOf}});
}

Artifacts load_artifacts(const ExperimentConfig& config, const std::string& aeDir) {
  Artifacts a;
  a.rest = mesh::read_obj_file((fs::path(aeDir) / "rest.obj").string());
  a.model = std::make_unique<ae::Autoencoder>(static_cast<int>(a.rest.vertex_count()), config.autoencoder);
  a.model->load((fs::path(aeDir) / "autoencoder").string());
  const json box = read_json(fs::path(aeDir) / "latent_box.json");
  a.box = {from_json(box.at("lo")), from_json(box.at("hi"))};
  if (a.box.dim() != a.model->flat_size()) throw Error(ErrorCode::kDimensionMismatch, "latent box does not match the autoencoder");
  a.oracle = std::make_unique<geom::CollisionOracle>(a.rest, ae::domain_map(a.model->attention()));
  a.labeler = std::make_unique<active::Labeler>(*a.model, *a.oracle);
  return a;
}

std::vector<active::CollisionSample> labelled_uniform(const Artifacts& artifacts, const std::string& aeDir,
                                                      const std::string& tag, std::size_t n, std::uint64_t seed) {
  const fs::path dir = fs::path(aeDir) / "cache";
  fs::create_directories(dir);
  const std::string prefix = (dir / (tag + "_n" + std::to_string(n) + "_s" + std::to_string(seed))).string();
  if (fs::exists(prefix + ".bin")) {
    active::CollisionDataset cached = active::CollisionDataset::load(prefix);
    if (cached.size() == n) return cached.samples();
  }
  active::CollisionDataset data(1e-4);
  data.append(artifacts.labeler->label_batch(active::sample_uniform(artifacts.box, n, seed)));
  data.save(prefix, json{{"tag", tag}, {"seed", seed}}.dump());
  return data.samples();
}

namespace {

struct PartitionCheck {
  bool ok = true;
  std::size_t checked = 0;

  void run(const std::vector<active::CollisionSample>& samples, double eps) {
    for (const active::CollisionSample& s : samples) {
      const bool positive = s.pd > eps, negative = s.pd < 0.0, boundary = s.pd >= 0.0 && s.pd <= eps;
      const int memberships = int(positive) + int(negative) + int(boundary);
      const active::Subset subset = active::partition(s.pd, eps);
      const bool consistent = (subset == active::Subset::kPositive && positive) ||
                              (subset == active::Subset::kNegative && negative) ||
                              (subset == active::Subset::kBoundary && boundary);
      bool zeroAtBoundary = true;
      if (boundary) {
        nn::Tape tape;
        zeroAtBoundary = tape.scalar(active::boundary_loss(tape, tape.constant(Matrix::Constant(1, 1, 0.5)))) == 0.0;
      }
      ok = ok && memberships == 1 && consistent && zeroAtBoundary && s.label == (s.pd > 0.0 ? 1 : 0);
      ++checked;
    }
  }
};

}  // namespace

RunSummary run_method(const ExperimentConfig& base, const std::string& aeDir, Method method, std::uint64_t seed,
                      const std::string& runDir) {
  ExperimentConfig config = base;
  config.method = method;
  config.seeds = {seed};
  config.validate();
  fs::create_directories(runDir);
  config.save((fs::path(runDir) / "config.txt").string());

  const Artifacts artifacts = load_artifacts(config, aeDir);
  det::Detector detector(config.detector_config(seed));
  detector.set_normalization(artifacts.box.centre(), artifacts.box.half_width());

  const std::size_t budget = config.nInit + static_cast<std::size_t>(config.iterations) * config.nAug;
  const std::vector<active::CollisionSample> pool = labelled_uniform(artifacts, aeDir, "pool", budget, seed);

  active::UpdateOptions options;
  options.weights = config.weights;
  options.eps = config.eps;
  options.rankPairs = config.rankPairs;
  options.boundarySet = method != Method::kSupv;
  if (method == Method::kSupv) options.weights.boundary = 0.0;

  active::CollisionDataset dataset(config.eps);
  PartitionCheck check;
  dataset.append({pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.nInit)});
  check.run(dataset.samples(), config.eps);

  json warnings = json::array();
  {
    const active::SubsetCounts c = dataset.counts();
    const double positiveShare = static_cast<double>(c.positive + c.boundary) / static_cast<double>(c.total());
    if (positiveShare < 0.01 || positiveShare > 0.99) {
      const std::string w = "bootstrap label balance is extreme: " + std::to_string(positiveShare) + " colliding";
      std::cerr << "warning: " << w << '\n';
      warnings.push_back(w);
    }
  }

  std::ofstream training(fs::path(runDir) / "training.csv");
  training << "iteration,epoch,total,pd,rank,ce,boundary,validation_accuracy\n" << std::setprecision(10);
  std::ofstream iterations(fs::path(runDir) / "iterations.csv");
  iterations << "iteration,dataset_size,positive,negative,boundary,projected,projected_converged,"
                "projected_near_boundary,uniform_near_boundary\n"
             << std::setprecision(10);

  RunSummary summary;
  json checkpoints = json::array();
  auto train_and_save = [&](int iteration, const active::TrainSchedule& schedule) {
    std::vector<active::CollisionSample> train, validation;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      (in_validation(seed, i, config.validationFraction) ? validation : train).push_back(dataset.samples()[i]);
    options.alpha = active::ranking_margin(dataset.samples(), config.alphaScale);
    const auto logs = active::model_update(detector, train, validation, options, schedule,
                                           mix(seed * 1000003ULL + static_cast<std::uint64_t>(iteration)));
    for (const active::EpochLog& l : logs)
      training << iteration << ',' << l.epoch << ',' << l.total << ',' << l.pd << ',' << l.rank << ',' << l.ce << ','
               << l.boundary << ',' << l.validationAccuracy << '\n';
    const std::string name = "detector_iter" + std::to_string(iteration);
    detector.save((fs::path(runDir) / name).string());
    checkpoints.push_back({{"iteration", iteration}, {"dataset_size", dataset.size()}, {"checkpoint", name}});
    summary.datasetSizes.push_back(dataset.size());
  };
  auto near_boundary = [&](const active::CollisionSample& s) { return std::abs(s.pd) < 10.0 * config.eps; };

  {
    const active::SubsetCounts c = dataset.counts();
    iterations << 0 << ',' << dataset.size() << ',' << c.positive << ',' << c.negative << ',' << c.boundary
               << ",0,0,0,0\n";
  }
  train_and_save(0, config.bootstrapSchedule);

  for (int j = 1; j <= config.iterations; ++j) {
    std::size_t projected = 0, converged = 0, projectedNear = 0, uniformNear = 0, uniformCount = 0;
    std::vector<active::CollisionSample> added;
    if (method == Method::kActiveBd) {
      active::AggregateResult agg = active::aggregate(dataset, detector, artifacts.box, *artifacts.labeler, config.nAug,
                                                      mix(seed * 7919ULL + static_cast<std::uint64_t>(j)), config.projection);
      projected = agg.projectedCount;
      for (std::size_t i = 0; i < agg.samples.size(); ++i) {
        if (i < projected) {
          converged += agg.projections[i].converged ? 1 : 0;
          projectedNear += near_boundary(agg.samples[i]) ? 1 : 0;
        } else {
          uniformNear += near_boundary(agg.samples[i]) ? 1 : 0;
          ++uniformCount;
        }
      }
      added = std::move(agg.samples);
    } else {
      const auto first = pool.begin() + static_cast<std::ptrdiff_t>(config.nInit + (j - 1) * config.nAug);
      added.assign(first, first + static_cast<std::ptrdiff_t>(config.nAug));
      for (const auto& s : added) uniformNear += near_boundary(s) ? 1 : 0;
      uniformCount = added.size();
    }
    check.run(added, config.eps);
    dataset.append(added);
    const active::SubsetCounts c = dataset.counts();
    iterations << j << ',' << dataset.size() << ',' << c.positive << ',' << c.negative << ',' << c.boundary << ','
               << projected << ',' << converged << ','
               << (projected ? static_cast<double>(projectedNear) / projected : 0.0) << ','
               << (uniformCount ? static_cast<double>(uniformNear) / uniformCount : 0.0) << '\n';
    train_and_save(j, config.fineTuneSchedule);
  }
  if (!training || !iterations) throw Error(ErrorCode::kIo, "failed writing run logs in " + runDir);

  dataset.save((fs::path(runDir) / "dataset").string(),
               json{{"method", to_string(method)}, {"seed", seed}, {"iterations", config.iterations}}.dump());
  summary.finalSize = dataset.size();
  summary.partitionChecksPassed = check.ok;
  summary.samplesChecked = check.checked;
  write_json(fs::path(runDir) / "manifest.json",
             {{"method", to_string(method)},
              {"seed", seed},
              {"label_budget", budget},
              {"final_dataset_size", dataset.size()},
              {"checkpoints", checkpoints},
              {"partition_checks_passed", check.ok},
              {"samples_checked", check.checked},
              {"warnings", warnings}});
  return summary;
}

}  // namespace ncd::exp
