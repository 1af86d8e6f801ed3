#include "stance/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>

#include "stance/error.h"
#include "stance/text_util.h"

namespace stance {
namespace {

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a, const Tensor& b) {
  throw ShapeError(op + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

Tape& tape_of(Var a) {
  if (!a.tape) throw Error("variable is not attached to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error("variables belong to different tapes");
  return tape_of(a);
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out = x;
  for (double& v : out.values()) v = f(v);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw ShapeError("tensor dimensions must be positive");
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows == 0 || cols == 0) throw ShapeError("tensor dimensions must be positive");
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor " + shape_string() + " given " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  if (rows.size() == 0) throw ShapeError("tensor needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> vals;
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged tensor rows");
    vals.insert(vals.end(), r.begin(), r.end());
  }
  return Tensor(rows.size(), cols, std::move(vals));
}

Tensor Tensor::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_in_place(const Tensor& o, double scale) {
  if (!same_shape(o)) shape_fail("add_in_place", *this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * o.data_[i];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
          bool accumulate) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != kb) shape_fail("matmul", a, b);
  if (c.rows() != m || c.cols() != n) c = Tensor(m, n);
  else if (!accumulate) c.fill(0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a(p, i) : a(i, p);
      if (av == 0.0) continue;
      if (!trans_b) {
        const double* brow = b.row_ptr(p);
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b(j, p);
      }
    }
  }
}

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

void Parameter::zero_grad() {
  if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
  else grad.fill(0.0);
}

void init_uniform(Parameter& p, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.value.values()) v = u(rng);
}

void init_glorot(Parameter& p, std::mt19937_64& rng) {
  init_uniform(p, std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols())), rng);
}

const Tensor& Var::value() const { return tape_of(*this).value(*this); }

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw Error("variable does not belong to this tape");
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).val(); }
const Tensor& Tape::grad(Var v) const { return node(v).grad; }
bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

Var Tape::constant(Tensor value) {
  if (value.empty()) throw ShapeError("constant: empty tensor");
  if (!value.all_finite()) throw Error("constant: non-finite value");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (p.value.empty()) throw ShapeError("parameter " + p.name + " is empty");
  Node n;
  n.op = "param:" + p.name;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = p.trainable;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(std::string op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
  if (used_) throw Error("tape already ran backward; reset it before recording");
  if (!value.all_finite()) throw Error(op + ": produced a non-finite value");
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (Var p : parents) {
    node(p);
    n.parents.push_back(p.id);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (used_) throw Error("backward already ran on this tape");
  const Tensor& root = node(loss).val();
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + root.shape_string());
  }
  used_ = true;
  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad = Tensor(n.val().rows(), n.val().cols());
  }
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.param) {
      if (!n.param->grad.same_shape(n.val())) n.param->zero_grad();
      n.param->grad.add_in_place(n.grad);
      continue;
    }
    if (!n.backward) continue;
    BackwardContext ctx{n.value, n.grad, {}, {}};
    for (std::size_t pid : n.parents) {
      Node& p = nodes_[pid];
      ctx.in.push_back(&p.val());
      ctx.in_grad.push_back(p.needs_grad ? &p.grad : nullptr);
    }
    n.backward(ctx);
  }
}

void Tape::reset() {
  nodes_.clear();
  used_ = false;
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor out;
  gemm(a.value(), false, b.value(), false, out, false);
  return t.record("matmul", std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grad[0]) gemm(c.out_grad, false, *c.in[1], true, *c.in_grad[0], true);
    if (c.in_grad[1]) gemm(*c.in[0], true, c.out_grad, false, *c.in_grad[1], true);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("add", a.value(), b.value());
  Tensor out = a.value();
  out.add_in_place(b.value());
  return t.record("add", std::move(out), {a, b}, [](const BackwardContext& c) {
    for (Tensor* g : c.in_grad) {
      if (g) g->add_in_place(c.out_grad);
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (!a.value().same_shape(b.value())) shape_fail("sub", a.value(), b.value());
  Tensor out = a.value();
  out.add_in_place(b.value(), -1.0);
  return t.record("sub", std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grad[0]) c.in_grad[0]->add_in_place(c.out_grad);
    if (c.in_grad[1]) c.in_grad[1]->add_in_place(c.out_grad, -1.0);
  });
}

Var add_row(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) shape_fail("add_row", x, b);
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = out.row_ptr(r);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += b[j];
  }
  return t.record("add_row", std::move(out), {a, bias}, [](const BackwardContext& c) {
    if (c.in_grad[0]) c.in_grad[0]->add_in_place(c.out_grad);
    if (Tensor* g = c.in_grad[1]) {
      for (std::size_t r = 0; r < c.out_grad.rows(); ++r) {
        const double* row = c.out_grad.row_ptr(r);
        for (std::size_t j = 0; j < c.out_grad.cols(); ++j) (*g)[j] += row[j];
      }
    }
  });
}

Var multiply(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.same_shape(y)) shape_fail("multiply", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return t.record("multiply", std::move(out), {a, b}, [](const BackwardContext& c) {
    for (int k = 0; k < 2; ++k) {
      Tensor* g = c.in_grad[k];
      if (!g) continue;
      const Tensor& other = *c.in[1 - k];
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c.out_grad[i] * other[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = map(a.value(), [s](double v) { return v * s; });
  return t.record("scale", std::move(out), {a}, [s](const BackwardContext& c) {
    if (c.in_grad[0]) c.in_grad[0]->add_in_place(c.out_grad, s);
  });
}

Var one_minus(Var a) {
  Tape& t = tape_of(a);
  Tensor out = map(a.value(), [](double v) { return 1.0 - v; });
  return t.record("one_minus", std::move(out), {a}, [](const BackwardContext& c) {
    if (c.in_grad[0]) c.in_grad[0]->add_in_place(c.out_grad, -1.0);
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Tape& t = tape_of(parts.front());
  const Tensor& first = parts.front().value();
  std::size_t total = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    const Tensor& v = p.value();
    if (axis == 0 ? v.cols() != first.cols() : v.rows() != first.rows()) {
      shape_fail("concat", first, v);
    }
    total += axis == 0 ? v.rows() : v.cols();
  }
  Tensor out = axis == 0 ? Tensor(total, first.cols()) : Tensor(first.rows(), total);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      double* dst = axis == 0 ? out.row_ptr(offset + r) : out.row_ptr(r) + offset;
      std::copy(v.row_ptr(r), v.row_ptr(r) + v.cols(), dst);
    }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return t.record("concat", std::move(out), parts, [axis](const BackwardContext& c) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < c.in.size(); ++k) {
      const Tensor& v = *c.in[k];
      if (Tensor* g = c.in_grad[k]) {
        for (std::size_t r = 0; r < v.rows(); ++r) {
          const double* src = axis == 0 ? c.out_grad.row_ptr(off + r) : c.out_grad.row_ptr(r) + off;
          double* dst = g->row_ptr(r);
          for (std::size_t j = 0; j < v.cols(); ++j) dst[j] += src[j];
        }
      }
      off += axis == 0 ? v.rows() : v.cols();
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + x.shape_string());
  }
  std::vector<double> vals(x.row_ptr(begin), x.row_ptr(begin) + (end - begin) * x.cols());
  Tensor out(end - begin, x.cols(), std::move(vals));
  return t.record("slice_rows", std::move(out), {a}, [begin](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      double* dst = g->row_ptr(begin);
      for (std::size_t i = 0; i < c.out_grad.size(); ++i) dst[i] += c.out_grad[i];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + x.shape_string());
  }
  Tensor out(x.rows(), end - begin);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(x.row_ptr(r) + begin, x.row_ptr(r) + end, out.row_ptr(r));
  }
  return t.record("slice_cols", std::move(out), {a}, [begin](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < c.out_grad.rows(); ++r) {
        const double* src = c.out_grad.row_ptr(r);
        double* dst = g->row_ptr(r) + begin;
        for (std::size_t j = 0; j < c.out_grad.cols(); ++j) dst[j] += src[j];
      }
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, r) = x(r, j);
  }
  return t.record("transpose", std::move(out), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < g->rows(); ++r) {
        for (std::size_t j = 0; j < g->cols(); ++j) (*g)(r, j) += c.out_grad(j, r);
      }
    }
  });
}

Var repeat_rows(Var a, std::size_t m) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (x.rows() != 1) throw ShapeError("repeat_rows needs a row vector, got " + x.shape_string());
  if (m == 0) throw ShapeError("repeat_rows: zero repetitions");
  Tensor out(m, x.cols());
  for (std::size_t r = 0; r < m; ++r) std::copy(x.row_ptr(0), x.row_ptr(0) + x.cols(), out.row_ptr(r));
  return t.record("repeat_rows", std::move(out), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < c.out_grad.rows(); ++r) {
        const double* src = c.out_grad.row_ptr(r);
        for (std::size_t j = 0; j < g->cols(); ++j) (*g)[j] += src[j];
      }
    }
  });
}

Var gather_rows(Var table, const std::vector<std::size_t>& idx) {
  Tape& t = tape_of(table);
  const Tensor& x = table.value();
  if (idx.empty()) throw ShapeError("gather_rows: no indices");
  Tensor out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= x.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " +
                       x.shape_string());
    }
    std::copy(x.row_ptr(idx[r]), x.row_ptr(idx[r]) + x.cols(), out.row_ptr(r));
  }
  return t.record("gather_rows", std::move(out), {table}, [idx](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = c.out_grad.row_ptr(r);
        double* dst = g->row_ptr(idx[r]);
        for (std::size_t j = 0; j < g->cols(); ++j) dst[j] += src[j];
      }
    }
  });
}

Var unfold(Var a, std::size_t width) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  if (width == 0 || x.rows() < width) {
    throw ShapeError("unfold: window " + std::to_string(width) + " longer than " + x.shape_string());
  }
  const std::size_t d = x.cols();
  const std::size_t n = x.rows() - width + 1;
  Tensor out(n, width * d);
  for (std::size_t r = 0; r < n; ++r) std::copy(x.row_ptr(r), x.row_ptr(r) + width * d, out.row_ptr(r));
  return t.record("unfold", std::move(out), {a}, [width, d](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < c.out_grad.rows(); ++r) {
        const double* src = c.out_grad.row_ptr(r);
        double* dst = g->row_ptr(r);
        for (std::size_t j = 0; j < width * d; ++j) dst[j] += src[j];
      }
    }
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Tensor out = map(a.value(), [](double v) { return std::tanh(v); });
  return t.record("tanh", std::move(out), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c.out_grad[i] * (1.0 - c.out[i] * c.out[i]);
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Tensor out = map(a.value(), stable_sigmoid);
  return t.record("sigmoid", std::move(out), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c.out_grad[i] * c.out[i] * (1.0 - c.out[i]);
    }
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Tensor out = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return t.record("relu", std::move(out), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if ((*c.in[0])[i] > 0.0) (*g)[i] += c.out_grad[i];
      }
    }
  });
}

Var max_over_time(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  std::vector<std::size_t> arg(x.cols(), 0);
  for (std::size_t j = 0; j < x.cols(); ++j) {
    out[j] = x(0, j);
    for (std::size_t r = 1; r < x.rows(); ++r) {
      if (x(r, j) > out[j]) {
        out[j] = x(r, j);
        arg[j] = r;
      }
    }
  }
  return t.record("max_over_time", std::move(out), {a}, [arg](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t j = 0; j < arg.size(); ++j) (*g)(arg[j], j) += c.out_grad[j];
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = out.row_ptr(r);
    const double mx = *std::max_element(row, row + x.cols());
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < x.cols(); ++j) row[j] /= z;
  }
  return out;
}

Var softmax(Var a) {
  Tape& t = tape_of(a);
  return t.record("softmax", softmax_rows(a.value()), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t r = 0; r < c.out.rows(); ++r) {
        const double* y = c.out.row_ptr(r);
        const double* dy = c.out_grad.row_ptr(r);
        double dot = 0.0;
        for (std::size_t j = 0; j < c.out.cols(); ++j) dot += y[j] * dy[j];
        double* dst = g->row_ptr(r);
        for (std::size_t j = 0; j < c.out.cols(); ++j) dst[j] += y[j] * (dy[j] - dot);
      }
    }
  });
}

Var cross_entropy(Var probs, const Tensor& target) {
  Tape& t = tape_of(probs);
  const Tensor& p = probs.value();
  if (!p.same_shape(target)) shape_fail("cross_entropy", p, target);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(p[i]);
  }
  return t.record("cross_entropy", Tensor::scalar(loss), {probs}, [target](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (target[i] != 0.0) (*g)[i] -= c.out_grad[0] * target[i] / (*c.in[0])[i];
      }
    }
  });
}

Var softmax_cross_entropy(Var logits, const std::vector<std::size_t>& labels) {
  Tape& t = tape_of(logits);
  const Tensor& x = logits.value();
  if (labels.size() != x.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     x.shape_string());
  }
  Tensor probs = softmax_rows(x);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (labels[r] >= x.cols()) throw ShapeError("softmax_cross_entropy: label out of range");
    const double* row = x.row_ptr(r);
    const double mx = *std::max_element(row, row + x.cols());
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) z += std::exp(row[j] - mx);
    loss += std::log(z) + mx - row[labels[r]];
  }
  return t.record("softmax_cross_entropy", Tensor::scalar(loss), {logits},
                  [probs = std::move(probs), labels](const BackwardContext& c) {
                    if (Tensor* g = c.in_grad[0]) {
                      const double s = c.out_grad[0];
                      for (std::size_t r = 0; r < probs.rows(); ++r) {
                        for (std::size_t j = 0; j < probs.cols(); ++j) {
                          (*g)(r, j) += s * (probs(r, j) - (j == labels[r] ? 1.0 : 0.0));
                        }
                      }
                    }
                  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const auto& v = a.value().values();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return t.record("sum", Tensor::scalar(s), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (double& x : g->values()) x += c.out_grad[0];
    }
  });
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  return t.record("sum_squares", Tensor::scalar(s), {a}, [](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += 2.0 * c.out_grad[0] * (*c.in[0])[i];
    }
  });
}

Var dropout(Var a, double p, std::uint64_t seed, bool train) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0, 1)");
  if (!train || p == 0.0) return a;
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - p);
  Tensor mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return t.record("dropout", std::move(out), {a}, [mask = std::move(mask)](const BackwardContext& c) {
    if (Tensor* g = c.in_grad[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += c.out_grad[i] * mask[i];
    }
  });
}

double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
  return std::abs(analytic - numeric) / denom;
}

std::string GradCheckReport::describe() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s: max rel err %.3e over %zu coords; worst %s[%zu,%zu] analytic %.10g numeric %.10g",
                passed ? "PASS" : "FAIL", max_rel_error, coords_checked, worst.param.c_str(),
                worst.row, worst.col, worst.analytic, worst.numeric);
  return buf;
}

GradCheckReport grad_check(const GraphBuilder& build, const std::vector<Parameter*>& params,
                           const GradCheckOptions& opts) {
  if (!(opts.h > 0.0)) throw ConfigError("grad_check: h must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  auto loss_at = [&]() {
    Tape tape;
    return build(tape).value()[0];
  };

  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  for (Parameter* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > opts.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    GradCheckEntry worst{p->name, 0, 0, 0.0, 0.0, 0.0};
    for (std::size_t i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + opts.h;
      const double up = loss_at();
      p->value[i] = orig - opts.h;
      const double down = loss_at();
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric, opts.abs_floor);
      ++report.coords_checked;
      if (err > worst.rel_error) {
        worst = {p->name, i / p->value.cols(), i % p->value.cols(), analytic, numeric, err};
      }
    }
    report.per_param_worst.push_back(worst);
    if (report.per_param_worst.size() == 1 || worst.rel_error > report.max_rel_error) {
      report.max_rel_error = worst.rel_error;
      report.worst = worst;
    }
  }
  report.passed = report.max_rel_error <= opts.tol;
  return report;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out << t.rows() << ' ' << t.cols();
  for (double v : t.values()) out << ' ' << format_double(v);
  out << '\n';
}

Tensor read_tensor(std::istream& in) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> rows >> cols) || rows == 0 || cols == 0) {
    throw ValidationError("tensor record: bad shape prefix");
  }
  std::vector<double> vals(rows * cols);
  for (double& v : vals) {
    if (!(in >> v)) throw ValidationError("tensor record: too few values");
  }
  return Tensor(rows, cols, std::move(vals));
}

}  // namespace stance
