// SPDX-License-Identifier: Apache-2.0
#include "ncd/experiment.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace ncd::exp {

const char* to_string(Method m) {
  switch (m) {
    case Method::kActiveBd: return "active+bd";
    case Method::kSupvBd: return "supv+bd";
    case Method::kSupv: return "supv";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "active+bd") return Method::kActiveBd;
  if (name == "supv+bd") return Method::kSupvBd;
  if (name == "supv") return Method::kSupv;
  throw Error(ErrorCode::kConfig, "unknown method '" + name + "' (expected active+bd, supv+bd or supv)");
}

namespace {

std::string format(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [end, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || end != last) throw Error(ErrorCode::kConfig, "invalid value '" + text + "' for " + key);
  return v;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T>
Field number(const char* key, T ExperimentConfig::*member) {
  return {key,
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format(c.*member);
            else return std::to_string(c.*member);
          },
          [member, key](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <class S, class T>
Field nested(const char* key, S ExperimentConfig::*outer, T S::*inner) {
  return {key,
          [outer, inner](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format(c.*outer.*inner);
            else return std::to_string(c.*outer.*inner);
          },
          [outer, inner, key](ExperimentConfig& c, const std::string& v) { c.*outer.*inner = parse_number<T>(key, v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      {"family", [](const C& c) { return c.family; }, [](C& c, const std::string& v) { c.family = v; }},
      number("synth_count", &C::synthCount),
      number("synth_seed", &C::synthSeed),
      nested("z0_size", &C::autoencoder, &ae::AutoencoderConfig::z0Size),
      nested("l2_size", &C::autoencoder, &ae::AutoencoderConfig::l2Size),
      nested("ae_width", &C::autoencoder, &ae::AutoencoderConfig::width),
      nested("ae_sparsity_weight", &C::autoencoder, &ae::AutoencoderConfig::sparsityWeight),
      nested("ae_learning_rate", &C::autoencoder, &ae::AutoencoderConfig::learningRate),
      nested("ae_final_learning_rate", &C::autoencoder, &ae::AutoencoderConfig::finalLearningRate),
      nested("ae_batch_size", &C::autoencoder, &ae::AutoencoderConfig::batchSize),
      nested("ae_epochs", &C::autoencoder, &ae::AutoencoderConfig::epochs),
      nested("ae_seed", &C::autoencoder, &ae::AutoencoderConfig::seed),
      number("cse_width", &C::cseWidth),
      number("state_size", &C::stateSize),
      number("cp_width", &C::cpWidth),
      number("classifier_width", &C::classifierWidth),
      number("celu_alpha", &C::celuAlpha),
      number("eps", &C::eps),
      nested("eps_z", &C::projection, &active::ProjectionConfig::epsZ),
      nested("projection_max_iter", &C::projection, &active::ProjectionConfig::maxIter),
      nested("projection_max_backtrack", &C::projection, &active::ProjectionConfig::maxBacktrack),
      number("alpha_scale", &C::alphaScale),
      nested("w_pd", &C::weights, &active::LossWeights::pd),
      nested("w_pdsum", &C::weights, &active::LossWeights::pdSum),
      nested("w_r", &C::weights, &active::LossWeights::rank),
      nested("w_ce", &C::weights, &active::LossWeights::ce),
      nested("w_b", &C::weights, &active::LossWeights::boundary),
      number("rank_pairs", &C::rankPairs),
      number("n_init", &C::nInit),
      number("n_aug", &C::nAug),
      number("iterations", &C::iterations),
      nested("bootstrap_learning_rate", &C::bootstrapSchedule, &active::TrainSchedule::learningRate),
      nested("bootstrap_batch_size", &C::bootstrapSchedule, &active::TrainSchedule::batchSize),
      nested("bootstrap_epochs", &C::bootstrapSchedule, &active::TrainSchedule::epochs),
      nested("finetune_learning_rate", &C::fineTuneSchedule, &active::TrainSchedule::learningRate),
      nested("finetune_batch_size", &C::fineTuneSchedule, &active::TrainSchedule::batchSize),
      nested("finetune_epochs", &C::fineTuneSchedule, &active::TrainSchedule::epochs),
      number("validation_fraction", &C::validationFraction),
      number("n_test", &C::nTest),
      number("test_seed", &C::testSeed),
      number("handling_trials", &C::handlingTrials),
      number("handling_seed", &C::handlingSeed),
      nested("alm_max_outer", &C::alm, &handler::AlmConfig::maxOuter),
      nested("alm_max_inner", &C::alm, &handler::AlmConfig::maxInner),
      nested("alm_inner_tolerance", &C::alm, &handler::AlmConfig::innerTolerance),
      nested("alm_initial_penalty", &C::alm, &handler::AlmConfig::initialPenalty),
      nested("alm_penalty_growth", &C::alm, &handler::AlmConfig::penaltyGrowth),
      nested("alm_max_penalty", &C::alm, &handler::AlmConfig::maxPenalty),
      nested("alm_feasibility_tolerance", &C::alm, &handler::AlmConfig::feasibilityTolerance),
      {"method", [](const C& c) { return std::string(to_string(c.method)); },
       [](C& c, const std::string& v) { c.method = method_from_string(v); }},
      {"seeds",
       [](const C& c) {
         std::string out;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(c.seeds[i]);
         return out;
       },
       [](C& c, const std::string& v) {
         c.seeds.clear();
         std::stringstream in(v);
         std::string item;
         while (std::getline(in, item, ',')) {
           const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
           if (a == std::string::npos) throw Error(ErrorCode::kConfig, "empty entry in seeds");
           c.seeds.push_back(parse_number<std::uint64_t>("seeds", item.substr(a, b - a + 1)));
         }
       }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

}  // namespace

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineNo) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw Error(ErrorCode::kConfig, "config line " + std::to_string(lineNo) + ": unknown key '" + key + "'");
    f->set(config, value);
  }
  config.validate();
  return config;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
  ExperimentConfig next = *this;
  f->set(next, value);
  next.validate();
  *this = std::move(next);
}

std::string ExperimentConfig::get(const std::string& key) const {
  const Field* f = find_field(key);
  if (!f) throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
  return f->get(*this);
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  out << to_text();
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  require(autoencoder.z0Size > 0 && autoencoder.l2Size > 0 && autoencoder.width > 0, "autoencoder sizes must be positive");
  require(autoencoder.epochs >= 0 && autoencoder.batchSize > 0, "autoencoder schedule out of range");
  require(autoencoder.learningRate > 0 && autoencoder.finalLearningRate > 0, "autoencoder learning rates must be positive");
  require(autoencoder.sparsityWeight >= 0, "ae_sparsity_weight must be >= 0");
  require(cseWidth > 0 && stateSize > 0 && cpWidth > 0 && classifierWidth > 0 && celuAlpha > 0, "detector widths must be positive");
  require(eps > 0, "eps must be positive");
  require(projection.epsZ > 0 && projection.maxIter >= 0 && projection.maxBacktrack >= 0, "projection settings out of range");
  require(alphaScale >= 0, "alpha_scale must be >= 0");
  require(weights.pd >= 0 && weights.pdSum >= 0 && weights.rank >= 0 && weights.ce >= 0 && weights.boundary >= 0,
          "loss weights must be >= 0");
  require(nInit > 0 && iterations >= 0, "n_init must be positive and iterations >= 0");
  for (const auto* s : {&bootstrapSchedule, &fineTuneSchedule})
    require(s->learningRate > 0 && s->batchSize > 0 && s->epochs >= 0, "detector schedule out of range");
  require(validationFraction >= 0 && validationFraction < 1, "validation_fraction must be in [0, 1)");
  require(nTest > 0 && handlingTrials > 0, "n_test and handling_trials must be positive");
  require(alm.maxOuter > 0 && alm.maxInner >= 0 && alm.initialPenalty > 0 && alm.penaltyGrowth >= 1 &&
              alm.maxPenalty >= alm.initialPenalty && alm.feasibilityTolerance >= 0 && alm.innerTolerance > 0,
          "ALM settings out of range");
  require(!seeds.empty(), "seeds must list at least one seed");
  require(synthCount >= 2, "synth_count must be at least 2");
}

det::DetectorConfig ExperimentConfig::detector_config(std::uint64_t seed) const {
  det::DetectorConfig c;
  c.z0Size = autoencoder.z0Size;
  c.l2Size = autoencoder.l2Size;
  c.cseWidth = cseWidth;
  c.stateSize = stateSize;
  c.cpWidth = cpWidth;
  c.classifierWidth = classifierWidth;
  c.celuAlpha = celuAlpha;
  c.seed = seed;
  return c;
}

}  // namespace ncd::exp
