#ifndef STANCE_TENSOR_H_
#define STANCE_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace stance {

// Dense row-major matrix of doubles. Vectors are 1 x n.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row_vector(std::vector<double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  void fill(double v);
  void add_in_place(const Tensor& o, double scale = 1.0);
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C (+)= op(A) op(B), op = optional transpose.
void gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c, bool accumulate);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
  void zero_grad();
};

// Uniform(-scale, scale) initialisation.
void init_uniform(Parameter& p, double scale, std::mt19937_64& rng);
// Glorot uniform on (rows, cols).
void init_glorot(Parameter& p, std::mt19937_64& rng);

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

struct BackwardContext {
  const Tensor& out;
  const Tensor& out_grad;
  std::vector<const Tensor*> in;
  // nullptr where the parent does not need a gradient.
  std::vector<Tensor*> in_grad;
};
using BackwardFn = std::function<void(const BackwardContext&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to p; backward adds into p.grad when p is trainable. p.value
  // must stay unchanged while the tape is in use.
  Var param(Parameter& p);
  // Records a custom op. The value must be finite.
  Var record(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const;
  // Gradient of the last backward pass; zero-shaped if the node needs none.
  const Tensor& grad(Var v) const;
  bool needs_grad(Var v) const;

  // Reverse pass from a 1x1 loss. A tape supports one backward pass.
  void backward(Var loss);
  void reset();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    // Parameter leaves read the parameter's tensor in place.
    const Tensor* external = nullptr;
    const Tensor& val() const { return external ? *external : value; }
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  bool used_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (m x n) + bias (1 x n) on every row.
Var add_row(Var a, Var bias);
Var multiply(Var a, Var b);
Var scale(Var a, double c);
// 1 - a, elementwise.
Var one_minus(Var a);
// axis 0 stacks rows, axis 1 joins columns.
Var concat(const std::vector<Var>& parts, int axis);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var transpose(Var a);
// 1 x n repeated to m x n.
Var repeat_rows(Var a, std::size_t m);
// Rows of a table selected by index.
Var gather_rows(Var table, const std::vector<std::size_t>& idx);
// T x d to (T-w+1) x (w d): row t is rows t..t+w-1 laid end to end.
Var unfold(Var a, std::size_t width);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
// Column-wise max over rows: T x n to 1 x n.
Var max_over_time(Var a);
// Row-wise softmax with max subtraction.
Var softmax(Var a);
// -sum y log p over all entries; target is a one-hot (or soft) matrix.
Var cross_entropy(Var probs, const Tensor& target);
// Sum over rows of -log softmax(logits)[r][label_r].
Var softmax_cross_entropy(Var logits, const std::vector<std::size_t>& labels);
Var sum(Var a);
Var sum_squares(Var a);
// Inverted dropout: kept entries scaled by 1/(1-p). Identity when !train or p == 0.
Var dropout(Var a, double p, std::uint64_t seed, bool train);

Tensor softmax_rows(const Tensor& x);

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-5;
  std::size_t max_coords = 200;
  std::uint64_t seed = 0;
  // |a - n| / max(|a|, |n|, abs_floor)
  double abs_floor = 1e-3;
};

struct GradCheckEntry {
  std::string param;
  std::size_t row = 0;
  std::size_t col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  GradCheckEntry worst;
  std::vector<GradCheckEntry> per_param_worst;
  std::string describe() const;
};

// build must construct the loss on the given tape from the parameters'
// current values; it is called once for the analytic gradient and twice per
// sampled coordinate.
using GraphBuilder = std::function<Var(Tape&)>;
GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                           const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric, double abs_floor);

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

}  // namespace stance

#endif  // STANCE_TENSOR_H_
