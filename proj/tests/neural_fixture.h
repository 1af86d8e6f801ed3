#ifndef STANCE_TESTS_NEURAL_FIXTURE_H_
#define STANCE_TESTS_NEURAL_FIXTURE_H_

#include <random>
#include <string>
#include <vector>

#include "stance/neural_models.h"

namespace stance::testing {

inline ModelConfig small_config(ModelKind kind, std::size_t d = 8, std::size_t h = 6) {
  ModelConfig c;
  c.kind = kind;
  c.embed_dim = d;
  c.hidden = h;
  c.cnn_widths = {2, 3};
  c.cnn_filters = 5;
  c.init_seed = 3;
  return c;
}

// Ten short posts over a twelve-word vocabulary with mixed labels.
inline std::vector<EncodedPost> memorization_fixture(std::size_t d, std::uint64_t seed = 17) {
  auto table = std::make_shared<EmbeddingTable>(d, seed);
  PostEncoder enc(table, {"target", "words"});
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 11);
  std::uniform_int_distribution<std::size_t> len(2, 7);
  std::vector<EncodedPost> out;
  for (int i = 0; i < 10; ++i) {
    std::vector<std::string> words;
    const std::size_t n = len(rng);
    for (std::size_t k = 0; k < n; ++k) words.push_back("w" + std::to_string(word(rng)));
    out.push_back(enc.encode("m" + std::to_string(i), words, kAllLabels[static_cast<std::size_t>(i) % 3]));
  }
  return out;
}

inline TrainSchedule memorization_schedule() {
  TrainSchedule s;
  s.learning_rate = 1e-2;
  s.batch_size = 5;
  s.dropout = 0.0;
  s.epochs_min = 1;
  s.epochs_max = 500;
  s.seed = 5;
  return s;
}

}  // namespace stance::testing

#endif  // STANCE_TESTS_NEURAL_FIXTURE_H_
