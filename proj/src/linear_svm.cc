#include "stance/linear_svm.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

double inv_norm(const FeatureVector& x, bool normalize) {
  if (!normalize) return 1.0;
  const double n2 = x.squared_norm();
  return n2 > 0.0 ? 1.0 / std::sqrt(n2) : 1.0;
}

void check_dims(const std::vector<FeatureVector>& xs) {
  if (xs.empty()) throw ValidationError("svm training needs at least one example");
  const std::size_t dim = xs.front().dim;
  if (dim == 0) throw ShapeError("svm training: feature dimension is zero");
  for (const FeatureVector& x : xs) {
    if (x.dim != dim) {
      throw ShapeError("svm training: dimension " + std::to_string(x.dim) + " vs " +
                       std::to_string(dim));
    }
  }
}

// w = scale * v, so the (1 - eta lambda) shrink is O(1).
struct ScaledWeights {
  std::vector<double> v;
  double scale = 1.0;
  double bias = 0.0;

  double margin(const FeatureVector& x, double xnorm_inv) const {
    double s = 0.0;
    for (const auto& [i, val] : x.entries) s += val * v[i];
    return scale * s * xnorm_inv + bias;
  }

  void shrink(double factor) {
    bias *= factor;
    if (factor == 0.0) {
      std::fill(v.begin(), v.end(), 0.0);
      scale = 1.0;
      return;
    }
    scale *= factor;
    if (scale < 1e-9) {
      for (double& w : v) w *= scale;
      scale = 1.0;
    }
  }

  void add(const FeatureVector& x, double coef) {
    for (const auto& [i, val] : x.entries) v[i] += coef * val / scale;
  }

  BinaryLinearModel materialize(bool normalize) const {
    BinaryLinearModel m;
    m.weights.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) m.weights[i] = v[i] * scale;
    m.bias = bias;
    m.l2_normalize = normalize;
    return m;
  }
};

void write_weights(std::ostream& out, const BinaryLinearModel& m) {
  out << "bias " << format_double(m.bias) << "\nw";
  for (double w : m.weights) out << ' ' << format_double(w);
  out << '\n';
}

std::string expect_line(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": truncated model file");
  return line;
}

BinaryLinearModel read_weights(std::istream& in, std::size_t dim, bool normalize,
                               const std::string& source) {
  BinaryLinearModel m;
  m.l2_normalize = normalize;
  {
    std::istringstream ss(expect_line(in, source));
    std::string key;
    if (!(ss >> key >> m.bias) || key != "bias") throw ValidationError(source + ": bad bias line");
  }
  std::istringstream ss(expect_line(in, source));
  std::string key;
  ss >> key;
  if (key != "w") throw ValidationError(source + ": bad weight line");
  m.weights.resize(dim);
  for (double& w : m.weights) {
    if (!(ss >> w)) throw ValidationError(source + ": too few weights");
  }
  return m;
}

}  // namespace

double BinaryLinearModel::margin(const FeatureVector& x) const {
  if (x.dim != weights.size()) {
    throw ShapeError("model dimension " + std::to_string(weights.size()) + " vs input " +
                     std::to_string(x.dim));
  }
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += v * weights[i];
  return s * inv_norm(x, l2_normalize) + bias;
}

std::array<double, kNumLabels> LinearModel::scores(const FeatureVector& x) const {
  std::array<double, kNumLabels> s{};
  for (std::size_t c = 0; c < kNumLabels; ++c) s[c] = per_class[c].margin(x);
  return s;
}

double pegasos_objective(const BinaryLinearModel& m, const std::vector<FeatureVector>& xs,
                         const std::vector<int>& labels, double lambda,
                         const std::vector<double>* sample_weights) {
  double reg = m.bias * m.bias;
  for (double w : m.weights) reg += w * w;
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double c = sample_weights ? (*sample_weights)[i] : 1.0;
    loss += c * std::max(0.0, 1.0 - labels[i] * m.margin(xs[i]));
  }
  return 0.5 * lambda * reg + loss / static_cast<double>(xs.size());
}

BinaryLinearModel train_pegasos(const std::vector<FeatureVector>& xs, const std::vector<int>& labels,
                                const SvmTrainConfig& cfg, PegasosTrace* trace,
                                const std::vector<double>* sample_weights) {
  check_dims(xs);
  if (labels.size() != xs.size()) throw ValidationError("pegasos: label count mismatch");
  if (!(cfg.lambda > 0.0)) throw ConfigError("pegasos: lambda must be positive");
  if (cfg.epochs == 0) throw ConfigError("pegasos: epochs must be positive");
  for (int y : labels) {
    if (y != 1 && y != -1) throw ValidationError("pegasos: labels must be +1 or -1");
  }
  if (sample_weights && sample_weights->size() != xs.size()) {
    throw ValidationError("pegasos: sample weight count mismatch");
  }

  const std::size_t n = xs.size();
  std::vector<double> xnorm_inv(n);
  for (std::size_t i = 0; i < n; ++i) xnorm_inv[i] = inv_norm(xs[i], cfg.l2_normalize);

  ScaledWeights w;
  w.v.assign(xs.front().dim, 0.0);
  BinaryLinearModel best = w.materialize(cfg.l2_normalize);
  double best_obj = pegasos_objective(best, xs, labels, cfg.lambda, sample_weights);
  if (trace) trace->objective = {best_obj};

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
      const double y = labels[i];
      const bool violated = y * w.margin(xs[i], xnorm_inv[i]) < 1.0;
      w.shrink(1.0 - eta * cfg.lambda);
      if (violated) {
        const double c = sample_weights ? (*sample_weights)[i] : 1.0;
        w.add(xs[i], eta * c * y * xnorm_inv[i]);
        w.bias += eta * c * y;
      }
    }
    const BinaryLinearModel current = w.materialize(cfg.l2_normalize);
    const double obj = pegasos_objective(current, xs, labels, cfg.lambda, sample_weights);
    if (!std::isfinite(obj)) throw Error("pegasos: objective diverged");
    if (trace) trace->objective.push_back(obj);
    if (obj < best_obj) {
      best_obj = obj;
      best = current;
    }
  }
  return best;
}

std::vector<double> inverse_frequency_weights(const std::vector<int>& labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y > 0;
  const std::size_t neg = labels.size() - pos;
  const double k = (pos > 0) + (neg > 0);
  std::vector<double> w;
  w.reserve(labels.size());
  for (int y : labels) {
    const double count = static_cast<double>(y > 0 ? pos : neg);
    w.push_back(static_cast<double>(labels.size()) / (k * count));
  }
  return w;
}

LinearModel train_one_vs_rest(const std::vector<FeatureVector>& xs,
                              const std::vector<StanceLabel>& labels, const SvmTrainConfig& cfg) {
  check_dims(xs);
  if (labels.size() != xs.size()) throw ValidationError("one-vs-rest: label count mismatch");
  LinearModel model;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (StanceLabel l : labels) y.push_back(index_of(l) == c ? 1 : -1);
    SvmTrainConfig class_cfg = cfg;
    class_cfg.seed = cfg.seed + c;
    std::vector<double> weights;
    if (cfg.class_weighting) weights = inverse_frequency_weights(y);
    model.per_class[c] =
        train_pegasos(xs, y, class_cfg, nullptr, cfg.class_weighting ? &weights : nullptr);
  }
  return model;
}

StanceLabel predict(const LinearModel& model, const FeatureVector& x) {
  const auto s = model.scores(x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumLabels; ++c) {
    if (s[c] > s[best]) best = c;
  }
  return kAllLabels[best];
}

CascadeModel cascade_train(const std::vector<CascadeExample>& train, const CascadeConfig& cfg,
                           const FeatureResources& resources, const std::string& target) {
  std::vector<const CascadeExample*> relevant;
  std::size_t none = 0;
  for (const CascadeExample& ex : train) {
    if (ex.gold == StanceLabel::kNone) {
      ++none;
    } else {
      relevant.push_back(&ex);
    }
  }
  if (relevant.empty()) {
    throw ValidationError("cascade stage 2: training data has no FAVOR or AGAINST posts");
  }
  if (none == 0) throw ValidationError("cascade stage 1: training data has no NONE posts");

  CascadeModel model;
  model.stage1_features = std::make_shared<FeaturePipeline>(cfg.stage1_blocks, resources, target);
  model.stage2_features = std::make_shared<FeaturePipeline>(cfg.stage2_blocks, resources, target);

  std::vector<FeatureInput> in1;
  for (const CascadeExample& ex : train) in1.push_back({ex.tokens, ex.raw_text});
  std::vector<FeatureInput> in2;
  for (const CascadeExample* ex : relevant) in2.push_back({ex->tokens, ex->raw_text});
  model.stage1_features->fit(in1);
  model.stage2_features->fit(in2);

  std::vector<FeatureVector> x1;
  std::vector<int> y1;
  for (std::size_t i = 0; i < train.size(); ++i) {
    x1.push_back(model.stage1_features->transform(in1[i]));
    y1.push_back(train[i].gold == StanceLabel::kNone ? -1 : 1);
  }
  std::vector<FeatureVector> x2;
  std::vector<int> y2;
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    x2.push_back(model.stage2_features->transform(in2[i]));
    y2.push_back(relevant[i]->gold == StanceLabel::kFavor ? 1 : -1);
  }

  auto fit = [](const std::vector<FeatureVector>& xs, const std::vector<int>& ys,
                const SvmTrainConfig& svm) {
    std::vector<double> weights;
    if (svm.class_weighting) weights = inverse_frequency_weights(ys);
    return train_pegasos(xs, ys, svm, nullptr, svm.class_weighting ? &weights : nullptr);
  };
  model.stage1 = fit(x1, y1, cfg.stage1_svm);
  model.stage2 = fit(x2, y2, cfg.stage2_svm);
  model.stage1_train_size = x1.size();
  model.stage2_train_size = x2.size();
  return model;
}

StanceLabel cascade_decide(const BinaryLinearModel& stage1, const BinaryLinearModel& stage2,
                           const FeatureVector& x1, const FeatureVector& x2) {
  if (stage1.margin(x1) < 0.0) return StanceLabel::kNone;
  return stage2.margin(x2) >= 0.0 ? StanceLabel::kFavor : StanceLabel::kAgainst;
}

StanceLabel cascade_predict(const CascadeModel& model, const CascadeExample& example) {
  const FeatureInput in{example.tokens, example.raw_text};
  const FeatureVector x1 = model.stage1_features->transform(in);
  if (model.stage1.margin(x1) < 0.0) return StanceLabel::kNone;
  return cascade_decide(model.stage1, model.stage2, x1, model.stage2_features->transform(in));
}

std::string serialize_linear_model(const LinearModel& model) {
  std::ostringstream out;
  out << "stance-linear-model 1\n";
  out << "feature_hash " << hex64(model.feature_hash) << '\n';
  out << "dim " << model.dim() << '\n';
  out << "normalize " << (model.per_class[0].l2_normalize ? 1 : 0) << '\n';
  out << "classes FAVOR AGAINST NONE\n";
  for (const BinaryLinearModel& m : model.per_class) write_weights(out, m);
  return out.str();
}

void save_linear_model(const LinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model: " + path.string());
  out << serialize_linear_model(model);
}

LinearModel load_linear_model(const std::filesystem::path& path,
                              std::uint64_t expected_feature_hash) {
  std::ifstream in(path, std::ios::binary);
  const std::string source = path.string();
  if (!in) throw ValidationError("cannot open model: " + source);
  if (expect_line(in, source) != "stance-linear-model 1") {
    throw ValidationError(source + ": not a linear model file (version 1)");
  }
  std::string key;
  std::string hash;
  std::istringstream(expect_line(in, source)) >> key >> hash;
  if (key != "feature_hash") throw ValidationError(source + ": missing feature_hash");
  if (hash != hex64(expected_feature_hash)) {
    throw ValidationError(source + ": feature hash " + hash + " does not match configuration " +
                          hex64(expected_feature_hash));
  }
  std::size_t dim = 0;
  std::istringstream(expect_line(in, source)) >> key >> dim;
  int normalize = 1;
  std::istringstream(expect_line(in, source)) >> key >> normalize;
  if (expect_line(in, source) != "classes FAVOR AGAINST NONE") {
    throw ValidationError(source + ": unexpected class order");
  }
  LinearModel model;
  model.feature_hash = expected_feature_hash;
  for (auto& m : model.per_class) m = read_weights(in, dim, normalize != 0, source);
  return model;
}

void save_binary_model(const BinaryLinearModel& model, std::uint64_t feature_hash,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model: " + path.string());
  out << "stance-binary-model 1\nfeature_hash " << hex64(feature_hash) << "\ndim " << model.dim()
      << "\nnormalize " << (model.l2_normalize ? 1 : 0) << '\n';
  write_weights(out, model);
}

BinaryLinearModel load_binary_model(const std::filesystem::path& path,
                                    std::uint64_t expected_feature_hash) {
  std::ifstream in(path, std::ios::binary);
  const std::string source = path.string();
  if (!in) throw ValidationError("cannot open model: " + source);
  if (expect_line(in, source) != "stance-binary-model 1") {
    throw ValidationError(source + ": not a binary model file (version 1)");
  }
  std::string key;
  std::string hash;
  std::istringstream(expect_line(in, source)) >> key >> hash;
  if (hash != hex64(expected_feature_hash)) {
    throw ValidationError(source + ": feature hash " + hash + " does not match configuration " +
                          hex64(expected_feature_hash));
  }
  std::size_t dim = 0;
  std::istringstream(expect_line(in, source)) >> key >> dim;
  int normalize = 1;
  std::istringstream(expect_line(in, source)) >> key >> normalize;
  return read_weights(in, dim, normalize != 0, source);
}

}  // namespace stance
