#ifndef STANCE_DIAGNOSTICS_H_
#define STANCE_DIAGNOSTICS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stance/tensor.h"

namespace stance {

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

struct GradientSuiteConfig {
  std::uint64_t seed = 1;
  std::size_t max_coords = 200;
  double tol = 1e-5;
  bool primitives = true;
  bool models = true;
};

// Finite-difference checks of every autodiff op on random inputs, then of
// full LSTM, BiLSTM+attention (TAN, TAN-) and CNN loss graphs with dropout on.
std::vector<NamedGradCheck> run_gradient_suite(const GradientSuiteConfig& cfg = {});

}  // namespace stance

#endif  // STANCE_DIAGNOSTICS_H_
