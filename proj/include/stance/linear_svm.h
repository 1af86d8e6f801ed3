#ifndef STANCE_LINEAR_SVM_H_
#define STANCE_LINEAR_SVM_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "stance/features.h"
#include "stance/labels.h"

namespace stance {

struct SvmTrainConfig {
  double lambda = 1e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  // Kernel width kept for configuration parity; the linear solver ignores it.
  double gamma = 0.001;
  bool class_weighting = false;
  bool l2_normalize = true;
};

// w.x + b for one binary problem; the bias is learned as the weight of an
// implicit constant feature and is regularized with w.
struct BinaryLinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  bool l2_normalize = true;

  std::size_t dim() const { return weights.size(); }
  // Raw margin; the input is L2-normalized first when l2_normalize is set.
  double margin(const FeatureVector& x) const;
};

// One-vs-rest scores in fixed class order [Favor, Against, None].
struct LinearModel {
  std::array<BinaryLinearModel, kNumLabels> per_class;
  std::uint64_t feature_hash = 0;

  std::size_t dim() const { return per_class[0].dim(); }
  std::array<double, kNumLabels> scores(const FeatureVector& x) const;
};

struct PegasosTrace {
  // Regularized hinge objective before training (all-zero weights) and after
  // every epoch.
  std::vector<double> objective;
};

// Pegasos: stochastic subgradient steps of size 1/(lambda t) on
// (lambda/2)(|w|^2 + b^2) + mean weighted hinge loss. Returns the iterate with
// the lowest objective among the zero start and the end of each epoch.
// labels are +1 / -1.
BinaryLinearModel train_pegasos(const std::vector<FeatureVector>& xs, const std::vector<int>& labels,
                                const SvmTrainConfig& cfg, PegasosTrace* trace = nullptr,
                                const std::vector<double>* sample_weights = nullptr);

double pegasos_objective(const BinaryLinearModel& m, const std::vector<FeatureVector>& xs,
                         const std::vector<int>& labels, double lambda,
                         const std::vector<double>* sample_weights = nullptr);

LinearModel train_one_vs_rest(const std::vector<FeatureVector>& xs,
                              const std::vector<StanceLabel>& labels, const SvmTrainConfig& cfg);

// Argmax of class scores; exact ties resolve Favor > Against > None.
StanceLabel predict(const LinearModel& model, const FeatureVector& x);

// Inverse-frequency weights n / (k * n_c) for the classes present.
std::vector<double> inverse_frequency_weights(const std::vector<int>& labels);

struct CascadeExample {
  const TokenSequence* tokens = nullptr;
  std::string raw_text;
  StanceLabel gold = StanceLabel::kNone;
};

// Stage 1 separates None (-1) from relevant posts (+1); stage 2 separates
// Favor (+1) from Against (-1) among relevant posts.
struct CascadeModel {
  std::shared_ptr<FeaturePipeline> stage1_features;
  std::shared_ptr<FeaturePipeline> stage2_features;
  BinaryLinearModel stage1;
  BinaryLinearModel stage2;
  std::size_t stage1_train_size = 0;
  std::size_t stage2_train_size = 0;
};

struct CascadeConfig {
  std::vector<std::string> stage1_blocks = two_step_stage1_feature_set();
  std::vector<std::string> stage2_blocks = two_step_stage2_feature_set();
  SvmTrainConfig stage1_svm;
  SvmTrainConfig stage2_svm;
};

CascadeModel cascade_train(const std::vector<CascadeExample>& train, const CascadeConfig& cfg,
                           const FeatureResources& resources, const std::string& target);

// Stage-1 margin >= 0 means relevant; stage-2 margin >= 0 means Favor.
StanceLabel cascade_decide(const BinaryLinearModel& stage1, const BinaryLinearModel& stage2,
                           const FeatureVector& x1, const FeatureVector& x2);
StanceLabel cascade_predict(const CascadeModel& model, const CascadeExample& example);

// Text model file carrying class order, dimension, weights, biases and the
// feature hash. Loading checks the hash.
void save_linear_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_linear_model(const std::filesystem::path& path, std::uint64_t expected_feature_hash);
std::string serialize_linear_model(const LinearModel& model);

void save_binary_model(const BinaryLinearModel& model, std::uint64_t feature_hash,
                       const std::filesystem::path& path);
BinaryLinearModel load_binary_model(const std::filesystem::path& path,
                                    std::uint64_t expected_feature_hash);

}  // namespace stance

#endif  // STANCE_LINEAR_SVM_H_
