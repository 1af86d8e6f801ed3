#include "stance/diagnostics.h"

#include <random>

#include "stance/neural_models.h"

namespace stance {

namespace {

Parameter random_param(const std::string& name, std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Parameter p(name, Tensor(r, c));
  init_uniform(p, 1.0, rng);
  return p;
}

// Weighted sum so every output coordinate gets a distinct upstream gradient.
Var probe(Var out, std::mt19937_64& rng) {
  Tensor w(out.rows(), out.cols());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : w.values()) v = u(rng);
  return sum(multiply(out, out.tape->constant(w)));
}

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(r, c);
  for (double& v : t.values()) v = n(rng);
  return t;
}

ModelConfig small_model(ModelKind kind, std::uint64_t seed) {
  ModelConfig c;
  c.kind = kind;
  // Large enough that the recurrent and filter weights exceed 200 entries.
  c.embed_dim = 8;
  c.hidden = 8;
  c.cnn_widths = {2, 3};
  c.cnn_filters = 16;
  c.init_seed = seed;
  return c;
}

}  // namespace

std::vector<NamedGradCheck> run_gradient_suite(const GradientSuiteConfig& cfg) {
  GradCheckOptions opts;
  opts.tol = cfg.tol;
  opts.max_coords = cfg.max_coords;
  opts.seed = cfg.seed;
  std::vector<NamedGradCheck> out;
  std::mt19937_64 rng(cfg.seed);
  auto check = [&](const std::string& name, const GraphBuilder& build, std::vector<Parameter*> params) {
    out.push_back({name, grad_check(build, params, opts)});
  };

  if (cfg.primitives) {
    Parameter a = random_param("a", 3, 4, rng);
    Parameter b = random_param("b", 4, 2, rng);
    Parameter c = random_param("c", 3, 4, rng);
    Parameter bias = random_param("bias", 1, 4, rng);
    Parameter row = random_param("row", 1, 4, rng);
    Parameter pos = random_param("pos", 3, 4, rng);
    for (double& v : pos.value.values()) v = std::abs(v) + 0.1;
    // Entries bounded away from zero so no coordinate sits on the ReLU kink.
    Parameter kink = random_param("k", 3, 4, rng);
    for (double& v : kink.value.values()) v += v >= 0 ? 0.2 : -0.2;
    const std::uint64_t s = rng();
    auto r = [s](std::uint64_t k) { return std::mt19937_64(s + k); };

    check("matmul", [&](Tape& t) { auto g = r(1); return probe(matmul(t.param(a), t.param(b)), g); }, {&a, &b});
    check("add", [&](Tape& t) { auto g = r(2); return probe(add(t.param(a), t.param(c)), g); }, {&a, &c});
    check("sub", [&](Tape& t) { auto g = r(3); return probe(sub(t.param(a), t.param(c)), g); }, {&a, &c});
    check("multiply", [&](Tape& t) { auto g = r(4); return probe(multiply(t.param(a), t.param(c)), g); }, {&a, &c});
    check("scale", [&](Tape& t) { auto g = r(5); return probe(scale(t.param(a), -0.7), g); }, {&a});
    check("one_minus", [&](Tape& t) { auto g = r(6); return probe(one_minus(t.param(a)), g); }, {&a});
    check("add_row", [&](Tape& t) { auto g = r(7); return probe(add_row(t.param(a), t.param(bias)), g); }, {&a, &bias});
    check("concat", [&](Tape& t) {
      auto g = r(8);
      Var x = t.param(a);
      Var y = t.param(c);
      return add(probe(concat({x, y}, 0), g), probe(concat({y, x}, 1), g));
    }, {&a, &c});
    check("slice_rows", [&](Tape& t) { auto g = r(9); return probe(slice_rows(t.param(a), 1, 3), g); }, {&a});
    check("slice_cols", [&](Tape& t) { auto g = r(10); return probe(slice_cols(t.param(a), 0, 3), g); }, {&a});
    check("transpose", [&](Tape& t) { auto g = r(11); return probe(transpose(t.param(a)), g); }, {&a});
    check("repeat_rows", [&](Tape& t) { auto g = r(12); return probe(repeat_rows(t.param(row), 5), g); }, {&row});
    check("gather_rows", [&](Tape& t) { auto g = r(13); return probe(gather_rows(t.param(a), {2, 0, 2, 1}), g); }, {&a});
    check("unfold", [&](Tape& t) { auto g = r(14); return probe(unfold(t.param(a), 2), g); }, {&a});
    check("tanh", [&](Tape& t) { auto g = r(15); return probe(tanh(t.param(a)), g); }, {&a});
    check("sigmoid", [&](Tape& t) { auto g = r(16); return probe(sigmoid(t.param(a)), g); }, {&a});
    check("relu", [&](Tape& t) { auto g = r(17); return probe(relu(t.param(kink)), g); }, {&kink});
    check("max_over_time", [&](Tape& t) { auto g = r(18); return probe(max_over_time(t.param(a)), g); }, {&a});
    check("softmax", [&](Tape& t) { auto g = r(19); return probe(softmax(t.param(a)), g); }, {&a});
    Tensor target(3, 4);
    target(0, 1) = 1;
    target(1, 3) = 1;
    target(2, 0) = 1;
    check("cross_entropy", [&](Tape& t) { return cross_entropy(t.param(pos), target); }, {&pos});
    check("softmax_cross_entropy", [&](Tape& t) { return softmax_cross_entropy(t.param(a), {3, 0, 1}); }, {&a});
    check("sum", [&](Tape& t) { return sum(tanh(t.param(a))); }, {&a});
    check("sum_squares", [&](Tape& t) { return sum_squares(t.param(a)); }, {&a});
    check("dropout", [&](Tape& t) { auto g = r(20); return probe(dropout(t.param(a), 0.4, 77, true), g); }, {&a});
  }

  if (cfg.models) {
    std::vector<EncodedPost> posts;
    for (std::size_t len : {1, 4, 6}) {
      EncodedPost p;
      p.id = "g" + std::to_string(len);
      p.words = random_tensor(len, 8, rng);
      p.target = random_tensor(1, 8, rng);
      p.gold = kAllLabels[len % 3];
      posts.push_back(p);
    }
    const std::pair<const char*, ModelKind> kinds[] = {{"lstm graph", ModelKind::kLstm},
                                                       {"bilstm+attention graph (tan)", ModelKind::kTan},
                                                       {"bilstm+attention graph (tan-)", ModelKind::kTanMinus},
                                                       {"cnn graph", ModelKind::kCnn}};
    for (const auto& [name, kind] : kinds) {
      auto model = make_model(small_model(kind, cfg.seed));
      // Zero conv biases would put all-padding windows exactly on the ReLU kink.
      for (Parameter* p : model->parameters()) {
        if (p->name.rfind("conv", 0) == 0 && p->name.back() == 'b') init_uniform(*p, 0.5, rng);
      }
      check(name, [&](Tape& t) {
        Var total{};
        for (std::size_t i = 0; i < posts.size(); ++i) {
          const ForwardOptions fo{true, 0.3, 100 + i};
          Var l = softmax_cross_entropy(model->logits(t, posts[i], fo), {index_of(posts[i].gold)});
          total = i == 0 ? l : add(total, l);
        }
        return total;
      }, model->parameters());
    }
  }
  return out;
}

}  // namespace stance
