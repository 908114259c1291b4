// SPDX-License-Identifier: Apache-2.0
#include "ncd/active.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace ncd::active {

using nn::Var;

bool LatentBox::contains(const Vector& z, double tol) const {
  if (z.size() != lo.size()) return false;
  return ((z.array() >= lo.array() - tol) && (z.array() <= hi.array() + tol)).all();
}

Vector LatentBox::clamp(const Vector& z) const {
  if (z.size() != lo.size()) throw Error(ErrorCode::kDimensionMismatch, "latent box dimension mismatch");
  return z.cwiseMax(lo).cwiseMin(hi);
}

LatentBox latent_box(const Matrix& codes) {
  if (codes.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "latent_box needs at least one encoding");
  return {codes.colwise().minCoeff().transpose(), codes.colwise().maxCoeff().transpose()};
}

Matrix sample_uniform(const LatentBox& box, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(n), box.dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index k = 0; k < out.cols(); ++k) out(i, k) = box.lo[k] + unit(rng) * (box.hi[k] - box.lo[k]);
  return out;
}

const char* to_string(Subset s) {
  switch (s) {
    case Subset::kPositive: return "positive";
    case Subset::kNegative: return "negative";
    case Subset::kBoundary: return "boundary";
  }
  return "?";
}

Subset partition(double pd, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "partition threshold must be positive");
  if (pd > eps) return Subset::kPositive;
  if (pd < 0.0) return Subset::kNegative;
  return Subset::kBoundary;
}

mesh::Mesh Labeler::decode_mesh(const Vector& z) const {
  return mesh::feature_inverse(decoder_.decode(z), oracle_.rest());
}

CollisionSample Labeler::label(const Vector& z) const {
  const geom::CollisionReport report = oracle_.query(decode_mesh(z));
  return {z, report.pd, Eigen::Map<const Vector>(report.pdPerDomain.data(), static_cast<Eigen::Index>(report.pdPerDomain.size())),
          report.label};
}

std::vector<CollisionSample> Labeler::label_batch(const Matrix& codes) const {
  const std::size_t n = static_cast<std::size_t>(codes.rows());
  std::vector<CollisionSample> out(n);
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < codes.rows(); start += kChunk) {
    const Eigen::Index count = std::min(kChunk, codes.rows() - start);
    const Matrix features = decoder_.decode_batch(codes.middleRows(start, count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
      const auto row = static_cast<Eigen::Index>(i);
      const mesh::Mesh m = mesh::feature_inverse({features.row(row).transpose()}, oracle_.rest());
      geom::CollisionReport report;
      try {
        report = oracle_.query(m);
      } catch (const Error& e) {
        throw Error(ErrorCode::kOracle, "oracle failed on sample " + std::to_string(start + row) + ": " + e.what());
      }
      CollisionSample& s = out[static_cast<std::size_t>(start + row)];
      s.z = codes.row(start + row).transpose();
      s.pd = report.pd;
      s.pdPerDomain = Eigen::Map<const Vector>(report.pdPerDomain.data(), static_cast<Eigen::Index>(report.pdPerDomain.size()));
      s.label = report.label;
    });
  }
  return out;
}

CollisionDataset::CollisionDataset(double eps) : eps_(eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kConfig, "boundary threshold eps must be positive");
}

void CollisionDataset::append(const std::vector<CollisionSample>& batch) {
  for (const CollisionSample& s : batch) {
    if (!samples_.empty() && (s.z.size() != samples_.front().z.size() ||
                              s.pdPerDomain.size() != samples_.front().pdPerDomain.size()))
      throw Error(ErrorCode::kDimensionMismatch, "appended sample does not match the dataset's dimensions");
    samples_.push_back(s);
  }
}

SubsetCounts CollisionDataset::counts() const {
  SubsetCounts c;
  for (const CollisionSample& s : samples_) {
    switch (partition(s.pd, eps_)) {
      case Subset::kPositive: ++c.positive; break;
      case Subset::kNegative: ++c.negative; break;
      case Subset::kBoundary: ++c.boundary; break;
    }
  }
  return c;
}

std::vector<std::size_t> CollisionDataset::indices(Subset subset) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i)
    if (partition(samples_[i].pd, eps_) == subset) out.push_back(i);
  return out;
}

namespace {
constexpr char kMagic[4] = {'N', 'C', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::kParse, "truncated sample file");
  return v;
}
}  // namespace

void CollisionDataset::save(const std::string& prefix, const std::string& metadataJson) const {
  std::ofstream out(prefix + ".bin", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + prefix + ".bin");
  const std::uint64_t dim = samples_.empty() ? 0 : static_cast<std::uint64_t>(samples_.front().z.size());
  const std::uint64_t domains = samples_.empty() ? 0 : static_cast<std::uint64_t>(samples_.front().pdPerDomain.size());
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, eps_);
  put(out, static_cast<std::uint64_t>(samples_.size()));
  put(out, dim);
  put(out, domains);
  for (const CollisionSample& s : samples_) {
    out.write(reinterpret_cast<const char*>(s.z.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    put(out, s.pd);
    out.write(reinterpret_cast<const char*>(s.pdPerDomain.data()), static_cast<std::streamsize>(domains * sizeof(double)));
    put(out, static_cast<std::int32_t>(s.label));
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + prefix + ".bin");

  nlohmann::json meta = nlohmann::json::parse(metadataJson, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) throw Error(ErrorCode::kInvalidArgument, "dataset metadata must be a JSON object");
  const SubsetCounts c = counts();
  meta["eps"] = eps_;
  meta["count"] = samples_.size();
  meta["positive"] = c.positive;
  meta["negative"] = c.negative;
  meta["boundary"] = c.boundary;
  std::ofstream js(prefix + ".json");
  js << meta.dump(2) << '\n';
  if (!js) throw Error(ErrorCode::kIo, "cannot write " + prefix + ".json");
}

CollisionDataset CollisionDataset::load(const std::string& prefix) {
  std::ifstream in(prefix + ".bin", std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + prefix + ".bin");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::kParse, prefix + ".bin is not a sample file");
  if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::kParse, "unsupported sample file version");
  CollisionDataset data(get<double>(in));
  const auto count = get<std::uint64_t>(in);
  const auto dim = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  const auto domains = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  data.samples_.resize(count);
  for (CollisionSample& s : data.samples_) {
    s.z.resize(dim);
    in.read(reinterpret_cast<char*>(s.z.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    s.pd = get<double>(in);
    s.pdPerDomain.resize(domains);
    in.read(reinterpret_cast<char*>(s.pdPerDomain.data()), static_cast<std::streamsize>(domains * sizeof(double)));
    s.label = get<std::int32_t>(in);
  }
  if (!in) throw Error(ErrorCode::kParse, "truncated sample file " + prefix + ".bin");
  return data;
}

ProjectionResult project_to_boundary(const det::Detector& detector, const Vector& z0, const LatentBox& box,
                                     const ProjectionConfig& config) {
  ProjectionResult result;
  result.z = box.clamp(z0);
  auto eval = [&](const Vector& z) {
    auto [p, g] = detector.probabilities_and_gradients(z.transpose());
    return std::pair<double, Vector>(p[0], g.row(0).transpose());
  };
  auto [prob, grad] = eval(result.z);
  result.prob = prob;
  for (int it = 0; it < config.maxIter; ++it) {
    if (!std::isfinite(prob) || !grad.allFinite()) {
      result.abandoned = true;
      return result;
    }
    const double r = prob - 0.5;
    if (r == 0.0) {
      result.converged = true;
      return result;
    }
    const double gg = grad.squaredNorm();
    if (gg == 0.0) return result;
    // (g g^T + lambda I)^-1 g r = g r / (lambda + |g|^2)
    const double lambda = 1e-6 * (1.0 + gg);
    const Vector step = grad * (r / (lambda + gg));

    double t = 1.0;
    bool accepted = false;
    Vector next;
    double nextProb = prob;
    Vector nextGrad;
    for (int b = 0; b <= config.maxBacktrack; ++b, t *= 0.5) {
      next = box.clamp(result.z - t * step);
      std::tie(nextProb, nextGrad) = eval(next);
      if (!std::isfinite(nextProb)) {
        result.abandoned = true;
        return result;
      }
      if (std::abs(nextProb - 0.5) < std::abs(r)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) return result;
    const double change = (next - result.z).lpNorm<Eigen::Infinity>();
    result.z = next;
    prob = nextProb;
    grad = nextGrad;
    result.prob = prob;
    result.iterations = it + 1;
    if (change < config.epsZ * std::max(1.0, result.z.lpNorm<Eigen::Infinity>())) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

std::vector<CollisionSample> bootstrap(std::size_t nInit, const LatentBox& box, const Labeler& labeler,
                                       std::uint64_t seed) {
  return labeler.label_batch(sample_uniform(box, nInit, seed));
}

AggregateResult aggregate(const CollisionDataset& dataset, const det::Detector& detector, const LatentBox& box,
                          const Labeler& labeler, std::size_t nAug, std::uint64_t seed,
                          const ProjectionConfig& config) {
  if (dataset.size() == 0) throw Error(ErrorCode::kInvalidArgument, "aggregate needs a bootstrapped dataset");
  std::mt19937_64 rng(seed);
  const std::size_t half = nAug / 2;
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<std::size_t> drawn(half);
  for (std::size_t& i : drawn) i = pick(rng);

  AggregateResult result;
  result.projections.resize(half);
  parallel_for(half, [&](std::size_t i) {
    result.projections[i] = project_to_boundary(detector, dataset.samples()[drawn[i]].z, box, config);
  });
  Matrix codes(static_cast<Eigen::Index>(nAug), box.dim());
  for (std::size_t i = 0; i < half; ++i) codes.row(static_cast<Eigen::Index>(i)) = result.projections[i].z.transpose();
  const Matrix fresh = sample_uniform(box, nAug - half, rng());
  codes.bottomRows(fresh.rows()) = fresh;
  result.samples = labeler.label_batch(codes);
  result.projectedCount = half;
  return result;
}

double ranking_margin(const std::vector<CollisionSample>& samples, double scale) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const CollisionSample& s : samples) sum += std::abs(s.pd);
  return scale * sum / static_cast<double>(samples.size());
}

Var boundary_loss(nn::Tape& tape, Var probs) { return tape.mean(tape.abs(tape.add_scalar(probs, -0.5))); }

LossTerms detector_loss(nn::Tape& tape, const det::Detector::Graph& graph,
                        const std::vector<const CollisionSample*>& batch, const UpdateOptions& options,
                        std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty minibatch");
  const Eigen::Index k = tape.value(graph.s).cols();
  Matrix pdi(n, k), pd(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (batch[i]->pdPerDomain.size() != k)
      throw Error(ErrorCode::kDimensionMismatch, "sample PD_i length differs from |Z0|");
    pdi.row(i) = batch[i]->pdPerDomain.transpose();
    pd(i, 0) = batch[i]->pd;
  }
  LossTerms terms;
  const Var sumS = tape.row_sums(graph.s);
  const Var perDomain = tape.row_sums(tape.square(tape.sub(graph.s, tape.constant(pdi))));
  const Var total = tape.square(tape.sub(sumS, tape.constant(pd)));
  const Var lossPd = tape.mean(tape.add(perDomain, tape.scale(total, options.weights.pdSum)));
  terms.pd = tape.scalar(lossPd);
  Var loss = tape.scale(lossPd, options.weights.pd);

  // Ranking: for pd_a < pd_b the summed local states should satisfy sumS_b - sumS_a >= alpha.
  std::vector<int> lower, upper;
  const std::size_t allPairs = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  auto add_pair = [&](int a, int b) {
    if (batch[a]->pd == batch[b]->pd) return;
    if (batch[a]->pd > batch[b]->pd) std::swap(a, b);
    lower.push_back(a);
    upper.push_back(b);
  };
  if (allPairs <= options.rankPairs) {
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) add_pair(a, b);
  } else {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    for (std::size_t p = 0; p < options.rankPairs; ++p) {
      const int a = pick(rng), b = pick(rng);
      if (a != b) add_pair(a, b);
    }
  }
  if (!lower.empty() && options.weights.rank > 0.0) {
    const Var diff = tape.sub(tape.gather_rows(sumS, upper), tape.gather_rows(sumS, lower));
    const Var lossRank = tape.mean(tape.relu(tape.add_scalar(tape.scale(diff, -1.0), options.alpha)));
    terms.rank = tape.scalar(lossRank);
    loss = tape.add(loss, tape.scale(lossRank, options.weights.rank));
  }

  std::vector<int> ceRows, boundaryRows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (options.boundarySet && partition(batch[i]->pd, options.eps) == Subset::kBoundary)
      boundaryRows.push_back(static_cast<int>(i));
    else
      ceRows.push_back(static_cast<int>(i));
  }
  if (!ceRows.empty()) {
    Matrix targets(static_cast<Eigen::Index>(ceRows.size()), 1);
    for (std::size_t i = 0; i < ceRows.size(); ++i) targets(static_cast<Eigen::Index>(i), 0) = batch[ceRows[i]]->pd > 0.0 ? 1.0 : 0.0;
    const Var lossCe = tape.mean(tape.bce_with_logits(tape.gather_rows(graph.logit, ceRows), targets));
    terms.ce = tape.scalar(lossCe);
    loss = tape.add(loss, tape.scale(lossCe, options.weights.ce));
  }
  if (!boundaryRows.empty() && options.weights.boundary > 0.0) {
    const Var lossB = boundary_loss(tape, tape.gather_rows(graph.prob, boundaryRows));
    terms.boundary = tape.scalar(lossB);
    loss = tape.add(loss, tape.scale(lossB, options.weights.boundary));
  }
  terms.total = loss;
  return terms;
}

DetectionMetrics detection_metrics(const Vector& probs, const std::vector<int>& labels) {
  if (probs.size() != static_cast<Eigen::Index>(labels.size()))
    throw Error(ErrorCode::kDimensionMismatch, "detection_metrics: prediction and label counts differ");
  DetectionMetrics m;
  m.count = labels.size();
  std::size_t correct = 0, missed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int predicted = probs[static_cast<Eigen::Index>(i)] >= 0.5 ? 1 : 0;
    correct += predicted == labels[i] ? 1 : 0;
    if (labels[i] == 1) {
      ++m.positives;
      missed += predicted == 0 ? 1 : 0;
    }
  }
  m.accuracy = m.count ? static_cast<double>(correct) / static_cast<double>(m.count) : 0.0;
  m.falseNegativeRate = m.positives ? static_cast<double>(missed) / static_cast<double>(m.positives) : 0.0;
  return m;
}

std::vector<EpochLog> model_update(det::Detector& detector, const std::vector<CollisionSample>& train,
                                   const std::vector<CollisionSample>& validation, const UpdateOptions& options,
                                   const TrainSchedule& schedule, std::uint64_t seed) {
  if (train.empty()) throw Error(ErrorCode::kInvalidArgument, "model_update needs a nonempty training set");
  if (schedule.batchSize <= 0 || schedule.epochs < 0 || !(schedule.learningRate > 0.0))
    throw Error(ErrorCode::kConfig, "detector training schedule out of range");
  const auto params = detector.trainable();
  nn::AdamState adam({schedule.learningRate, 0.9, 0.999, 1e-8}, params);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  Matrix validationCodes(static_cast<Eigen::Index>(validation.size()), detector.flat_size());
  std::vector<int> validationLabels;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    validationCodes.row(static_cast<Eigen::Index>(i)) = validation[i].z.transpose();
    validationLabels.push_back(validation[i].label);
  }

  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(schedule.batchSize)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(schedule.batchSize));
      std::vector<const CollisionSample*> batch;
      Matrix codes(static_cast<Eigen::Index>(end - start), detector.flat_size());
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train[order[i]]);
        codes.row(static_cast<Eigen::Index>(i - start)) = train[order[i]].z.transpose();
      }
      nn::Tape tape;
      const auto graph = detector.build(tape, tape.constant(std::move(codes)), true);
      const LossTerms terms = detector_loss(tape, graph, batch, options, rng);
      const double value = tape.scalar(terms.total);
      if (!std::isfinite(value))
        throw Error(ErrorCode::kNumerical, "detector loss became non-finite at epoch " + std::to_string(epoch));
      nn::zero_grads(params);
      tape.backward(terms.total);
      nn::adam_step(adam, params);
      log.total += value;
      log.pd += terms.pd;
      log.rank += terms.rank;
      log.ce += terms.ce;
      log.boundary += terms.boundary;
      ++batches;
    }
    log.total /= batches;
    log.pd /= batches;
    log.rank /= batches;
    log.ce /= batches;
    log.boundary /= batches;
    if (!validation.empty())
      log.validationAccuracy = detection_metrics(detector.probabilities(validationCodes), validationLabels).accuracy;
    logs.push_back(log);
  }
  return logs;
}

ElbowResult elbow_point(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::kDimensionMismatch, "elbow_point: xs and ys differ in length");
  if (xs.size() < 3) throw Error(ErrorCode::kInvalidArgument, "elbow_point needs at least 3 points");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw Error(ErrorCode::kInvalidArgument, "elbow_point: xs must increase");
  const auto [ylo, yhi] = std::minmax_element(ys.begin(), ys.end());
  const double xspan = xs.back() - xs.front();
  const double yspan = *yhi - *ylo;
  ElbowResult result{xs.back(), xs.size() - 1, false};
  if (yspan <= 0.0) return result;
  double best = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double diff = (ys[i] - *ylo) / yspan - (xs[i] - xs.front()) / xspan;
    if (diff > best + 1e-12) {
      best = diff;
      result = {xs[i], i, true};
    }
  }
  return result;
}

}  // namespace ncd::active
