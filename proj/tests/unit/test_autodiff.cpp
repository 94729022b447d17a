#include <cmath>
#include <random>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "vqad/autodiff/adam.hpp"
#include "vqad/autodiff/gradcheck.hpp"
#include "vqad/autodiff/ops.hpp"
#include "vqad/error.hpp"

using namespace vqad;
using namespace vqad::ad;

TEST_SUITE("evaluate") {
  TEST_CASE("matmul with identity") {
    Graph g;
    Var eye = g.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    Var col = g.constant(Tensor({2, 1}, {2, 3}));
    Var out = matmul(eye, col);
    CHECK(out.shape() == Shape{2, 1});
    CHECK(out.value()[0] == 2.0f);
    CHECK(out.value()[1] == 3.0f);
  }

  TEST_CASE("softmax of equal logits is uniform") {
    Graph g;
    Var out = softmax(g.constant(Tensor({2}, {0, 0})));
    CHECK(out.value()[0] == doctest::Approx(0.5));
    CHECK(out.value()[1] == doctest::Approx(0.5));
  }

  TEST_CASE("layer norm of [1, 3]") {
    Graph g;
    Var out = layer_norm(g.constant(Tensor({1, 2}, {1, 3})), g.constant(Tensor({2}, {1, 1})),
                         g.constant(Tensor({2}, {0, 0})));
    // eps = 1e-5 shifts the exact +-1 by about 5e-6
    CHECK(out.value()[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(out.value()[1] == doctest::Approx(1.0).epsilon(1e-5));
  }

  TEST_CASE("softmax rows are distributions") {
    std::mt19937_64 rng(7);
    std::normal_distribution<float> dist(0.0f, 4.0f);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor x({4, 9});
      for (auto& v : x.data()) v = dist(rng);
      Graph g;
      const Tensor& y = softmax(g.constant(x)).value();
      for (std::size_t r = 0; r < 4; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 9; ++c) {
          CHECK(y[r * 9 + c] >= 0.0f);
          total += y[r * 9 + c];
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
      }
    }
  }

  TEST_CASE("evaluation is bitwise deterministic") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    Tensor x({1, 3, 8, 8}), w({4, 3, 4, 4}), b({4});
    for (auto* t : {&x, &w, &b}) {
      for (auto& v : t->data()) v = dist(rng);
    }
    auto run = [&] {
      Graph g;
      return gelu(conv2d(g.constant(x), g.constant(w), g.constant(b), 2, 1)).value();
    };
    CHECK(run() == run());
  }

  TEST_CASE("shape mismatch names the op") {
    Graph g;
    Var a = g.constant(Tensor({2, 3}));
    Var b = g.constant(Tensor({2, 3}));
    try {
      matmul(a, b);
      FAIL("expected a shape error");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
  }

  TEST_CASE("non-finite output is a numeric fault") {
    Graph g;
    Var a = g.constant(Tensor({1}, {3e38f}));
    CHECK_THROWS_AS(scale(a, 10.0f), NumericFault);
  }
}

TEST_SUITE("backpropagate") {
  TEST_CASE("d(x*x)/dx at 3") {
    Graph g;
    Var x = g.variable(Tensor({1}, {3}));
    g.backward(mul(x, x));
    CHECK(g.grad(x)[0] == doctest::Approx(6.0));
  }

  TEST_CASE("gradient of sum(softmax) vanishes") {
    Graph g;
    Var v = g.variable(Tensor({4}, {0.3f, -1.2f, 2.0f, 0.1f}));
    g.backward(sum(softmax(v)));
    const Tensor grad = g.grad(v);
    for (float d : grad.data()) CHECK(std::abs(d) < 1e-7);
  }

  TEST_CASE("stop_gradient: identity forward, zero backward") {
    Graph g;
    Var x = g.variable(Tensor({3}, {1, -2, 4}));
    Var s = stop_gradient(x);
    CHECK(s.value() == x.value());
    g.backward(sum_squares(s));
    const Tensor grad = g.grad(x);
    for (float d : grad.data()) CHECK(d == 0.0f);
  }

  TEST_CASE("straight_through copies the gradient bitwise") {
    Graph g;
    Var e = g.variable(Tensor({2, 2}, {0.1f, 0.2f, 0.3f, 0.4f}));
    Var q = g.variable(Tensor({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f}));
    Var st = straight_through(e, q);
    CHECK(st.value() == q.value());
    Var loss = sum(mul(st, g.constant(Tensor({2, 2}, {0.7f, -1.3f, 2.9f, 0.01f}))));
    g.backward(loss);
    CHECK(g.grad(e) == Tensor({2, 2}, {0.7f, -1.3f, 2.9f, 0.01f}));
    const Tensor grad_q = g.grad(q);
    for (float d : grad_q.data()) CHECK(d == 0.0f);
  }

  TEST_CASE("parameters accumulate gradients") {
    Parameter p("w", Tensor({2}, {1, 2}));
    for (int i = 0; i < 2; ++i) {
      Graph g;
      g.backward(sum_squares(g.parameter(p)));
    }
    CHECK(p.grad[0] == doctest::Approx(4.0));
    CHECK(p.grad[1] == doctest::Approx(8.0));
  }

  TEST_CASE("usage errors") {
    Graph g;
    Var x = g.variable(Tensor({2}, {1, 2}));
    CHECK_THROWS_AS(g.backward(x), UsageError);  // not scalar
    Var loss = sum(x);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), UsageError);  // activations already consumed
    g.clear();
    CHECK_THROWS_AS(g.backward(loss), UsageError);  // missing forward pass
  }

  TEST_CASE("random two-layer perceptron matches finite differences") {
    const auto result = vqad::testing::run_gradient_suite(20);
    bool found = false;
    for (const auto& r : result) {
      if (r.op == "mlp_2layer") {
        found = true;
        CHECK(r.worst_relative_error < 1e-4);
      }
    }
    CHECK(found);
  }

  TEST_CASE("single-precision perceptron agrees with finite differences") {
    // float32 rounding in the difference quotient limits what can be resolved
    vqad::testing::InputSampler<float> sampler = [](std::uint64_t seed) {
      std::mt19937_64 rng(seed);
      std::vector<Tensor> out;
      for (Shape s : {Shape{4, 3}, Shape{3, 5}, Shape{5}, Shape{5, 2}, Shape{2}}) {
        out.push_back(vqad::testing::random_tensor<float>(rng, s));
      }
      return out;
    };
    vqad::testing::OpBuilder<float> build = [](Graph&, const std::vector<Var>& v) {
      Var h = gelu(add_bias(matmul(v[0], v[1]), v[2]));
      return add_bias(matmul(h, v[3]), v[4]);
    };
    const auto r = vqad::testing::check_op_gradient<float>("mlp_f32", sampler, build, 20, 1e-2);
    CHECK(r.worst_relative_error < 1e-3);
  }

  TEST_CASE("every op matches finite differences over 20 trials") {
    for (const auto& r : vqad::testing::run_gradient_suite(20)) {
      INFO(r.op << " worst relative error " << r.worst_relative_error);
      CHECK(r.trials == 20);
      CHECK(r.worst_relative_error < 1e-4);
    }
  }

  TEST_CASE("bidirectional attention rows sum to one, causal rows ignore the future") {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> dist;
    Tensor q({10, 8}), k({10, 8});
    for (auto* t : {&q, &k}) {
      for (auto& v : t->data()) v = dist(rng);
    }
    for (bool causal : {false, true}) {
      Tensor p = attention_probabilities(q, k, 2, 2, causal);
      for (std::size_t r = 0; r < p.dim(0); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
          total += p[r * 5 + c];
          if (causal && c > r % 5) CHECK(p[r * 5 + c] == 0.0f);
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
      }
    }
  }
}

TEST_SUITE("adam_update") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    Parameter p("w", Tensor({3}, {1, -2, 3}));
    std::vector<Parameter*> params{&p};
    AdamState state = AdamState::for_parameters(params);
    p.zero_grad();
    adam_update(params, state);
    CHECK(p.value == Tensor({3}, {1, -2, 3}));
    CHECK(state.step == 1);
  }

  TEST_CASE("first step moves by the learning rate") {
    Parameter p("w", Tensor({1}, {0.5f}));
    std::vector<Parameter*> params{&p};
    AdamState state = AdamState::for_parameters(params, {.learning_rate = 0.01f});
    p.grad = Tensor({1}, {1.0f});
    adam_update(params, state);
    CHECK(0.5f - p.value[0] == doctest::Approx(0.01).epsilon(1e-4));
  }

  TEST_CASE("two identical steps each move by about the learning rate") {
    Parameter p("w", Tensor({1}, {0.0f}));
    std::vector<Parameter*> params{&p};
    AdamState state = AdamState::for_parameters(params, {.learning_rate = 0.01f});
    float previous = p.value[0];
    for (int i = 0; i < 2; ++i) {
      p.grad = Tensor({1}, {1.0f});
      adam_update(params, state);
      CHECK(std::abs((previous - p.value[0]) - 0.01f) < 0.01f * 0.01f);
      previous = p.value[0];
    }
    CHECK(state.step == 2);
  }

  TEST_CASE("shape mismatch is a usage error") {
    Parameter p("w", Tensor({2}));
    Parameter other("v", Tensor({3}));
    std::vector<Parameter*> params{&p};
    AdamState state = AdamState::for_parameters(params);
    std::vector<Parameter*> wrong{&other};
    CHECK_THROWS_AS(adam_update(wrong, state), UsageError);
  }
}

TEST_SUITE("finite_difference_gradient") {
  TEST_CASE("quadratic is exact") {
    auto f = [](const Tensor& x) { return static_cast<double>(x[0]) * x[0]; };
    CHECK(finite_difference_gradient(f, Tensor({1}, {1.0f}), 1e-3)[0] == doctest::Approx(2.0).epsilon(1e-7));
  }
  TEST_CASE("constant has zero gradient") {
    auto f = [](const Tensor&) { return 4.2; };
    const Tensor grad = finite_difference_gradient(f, Tensor({3}, {1, 2, 3}), 1e-3);
    for (float d : grad.data()) CHECK(d == 0.0f);
  }
  TEST_CASE("sine at zero") {
    auto f = [](const Tensor& x) { return std::sin(static_cast<double>(x[0])); };
    CHECK(std::abs(finite_difference_gradient(f, Tensor({1}, {0.0f}), 1e-3)[0] - 1.0) < 1e-6);
  }
  TEST_CASE("non-finite value is a numeric fault") {
    auto f = [](const Tensor& x) { return std::log(static_cast<double>(x[0])); };
    CHECK_THROWS_AS(finite_difference_gradient(f, Tensor({1}, {0.0f}), 1e-3), NumericFault);
  }
}
