#ifndef STANCE_ENSEMBLE_VOTE_H_
#define STANCE_ENSEMBLE_VOTE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stance/labels.h"
#include "stance/neural_models.h"

namespace stance {

// Modal label; ties go to the tied label listed first in tie_break, which
// must be a permutation of the three labels.
StanceLabel majority(const std::vector<StanceLabel>& labels, const std::vector<StanceLabel>& tie_break);

// Labels by descending training frequency, equal counts ordered
// Against > Favor > None.
std::vector<StanceLabel> default_tie_break(const std::vector<StanceLabel>& train_labels);

struct VoteConfig {
  std::size_t num_runs = 10;
  double validation_fraction = 0.1;
  std::vector<std::size_t> checkpoint_epochs;
  // Empty means default_tie_break of the training labels.
  std::vector<StanceLabel> tie_break;
  std::uint64_t master_seed = 1;
  // Runs executed at once; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

std::vector<std::size_t> epoch_range(std::size_t first, std::size_t last);

// Pairwise disjoint validation index sets, one per run. When
// num_runs * fraction reaches 1 the folds partition all n indices.
std::vector<std::vector<std::size_t>> validation_folds(std::size_t n, std::size_t num_runs,
                                                       double fraction, std::uint64_t seed);

std::uint64_t run_seed(std::uint64_t master_seed, std::size_t run);

struct RunSpec {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> validation_idx;
};

// Test-set predictions keyed by checkpoint epoch. Must be deterministic in
// the spec and safe to call from several threads at once.
using RunTrainer = std::function<std::map<std::size_t, std::vector<StanceLabel>>(
    const RunSpec& spec, const std::vector<std::size_t>& checkpoint_epochs)>;

class PredictionMatrix {
 public:
  PredictionMatrix(std::size_t runs, std::vector<std::size_t> checkpoint_epochs,
                   std::vector<std::string> post_ids);

  std::size_t runs() const { return runs_; }
  const std::vector<std::size_t>& checkpoint_epochs() const { return epochs_; }
  const std::vector<std::string>& post_ids() const { return ids_; }

  void set(std::size_t run, std::size_t checkpoint, std::size_t post, StanceLabel label);
  StanceLabel get(std::size_t run, std::size_t checkpoint, std::size_t post) const;
  bool complete() const;

  // One "run<TAB>epoch<TAB>post_id<TAB>LABEL" row per cell.
  void save(const std::filesystem::path& path, const std::vector<std::string>& header_comments = {}) const;
  static PredictionMatrix load(const std::filesystem::path& path);

 private:
  std::size_t index(std::size_t run, std::size_t checkpoint, std::size_t post) const;

  std::size_t runs_;
  std::vector<std::size_t> epochs_;
  std::vector<std::string> ids_;
  std::vector<StanceLabel> cells_;
  std::vector<bool> filled_;
};

// Majority over checkpoints within each run, then majority over runs.
std::vector<StanceLabel> vote(const PredictionMatrix& m, const std::vector<StanceLabel>& tie_break);

struct VoteResult {
  std::vector<StanceLabel> labels;
  PredictionMatrix matrix;
  std::vector<std::vector<std::size_t>> folds;
  std::vector<StanceLabel> tie_break;
};

VoteResult run_vote_scheme(const RunTrainer& trainer, const std::vector<StanceLabel>& train_labels,
                           const std::vector<std::string>& test_ids, const VoteConfig& cfg);

// Trainer for one neural model kind: trains on the run's training indices,
// validates on its fold, and predicts the test posts at each checkpoint.
// Model init and schedule seeds are replaced by the run seed.
RunTrainer neural_run_trainer(ModelConfig model, TrainSchedule schedule,
                              const std::vector<EncodedPost>& train_posts,
                              const std::vector<EncodedPost>& test_posts);

}  // namespace stance

#endif  // STANCE_ENSEMBLE_VOTE_H_
