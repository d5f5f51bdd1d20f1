#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "vimp/autodiff.hpp"
#include "vimp/optim.hpp"

using namespace vimp;
using namespace vimp::nn;

TEST_SUITE("tensornet") {

TEST_CASE("conv2d with a 1x1 identity kernel reproduces the input") {
  Tape<double> tape;
  Rng rng(1);
  auto x = gradcheck::random_tensor({1, 1, 4, 4}, rng);
  Tensor<double> w({1, 1, 1, 1});
  w[0] = 1.0;
  Tensor<double> b({1});
  const Value out = tape.conv2d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 0);
  const auto& o = tape.value(out);
  CHECK(o.shape == std::vector<int>{1, 1, 4, 4});
  for (std::int64_t i = 0; i < o.numel(); ++i) CHECK(o[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv2d shape contract and the encoder block shape") {
  Tape<double> tape;
  Rng rng(2);
  // 128x128, k=9 'same', then max-pool 2 -> 64x64
  auto x = gradcheck::random_tensor({1, 1, 128, 128}, rng, 0.1);
  auto w = gradcheck::random_tensor({4, 1, 9, 9}, rng, 0.1);
  Tensor<double> b({4});
  const Value c = tape.conv2d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 4);
  CHECK(tape.value(c).shape == std::vector<int>{1, 4, 128, 128});
  const Value p = tape.max_pool2(c);
  CHECK(tape.value(p).shape == std::vector<int>{1, 4, 64, 64});
  // H' = floor((H + 2p - k)/s) + 1
  const Value s2 = tape.conv2d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 2, 4);
  CHECK(tape.value(s2).shape == std::vector<int>{1, 4, 64, 64});
}

TEST_CASE("conv2d rejects mismatched shapes with a descriptive error") {
  Tape<double> tape;
  Rng rng(3);
  auto x = gradcheck::random_tensor({1, 3, 8, 8}, rng);
  auto w = gradcheck::random_tensor({2, 4, 3, 3}, rng);  // wrong channel count
  Tensor<double> b({2});
  CHECK_THROWS_WITH_AS(tape.conv2d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 1),
                       doctest::Contains("expected C=4"), ValidationError);
}

TEST_CASE("conv2d gradients match central finite differences") {
  Rng rng(4);
  for (int stride : {1, 2}) {
    auto builder = [stride](Tape<double>& t, const std::vector<Value>& in) {
      const Value y = t.conv2d(in[0], in[1], in[2], stride, 1);
      return t.mse(y, in[3]);
    };
    auto x = gradcheck::random_tensor({2, 3, 8, 8}, rng);
    auto w = gradcheck::random_tensor({4, 3, 3, 3}, rng, 0.5);
    Tensor<double> b({4});
    for (auto& v : b.data) v = rng.normal();
    const int oh = (8 + 2 - 3) / stride + 1;
    auto target = gradcheck::random_tensor({2, 4, oh, oh}, rng);
    const auto rep = gradcheck::check(builder, {x, w, b, target});
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("transposed conv doubles the spatial size and is the conv adjoint") {
  Rng rng(5);
  Tape<double> tape;
  auto x = gradcheck::random_tensor({1, 4, 8, 8}, rng);
  auto w = gradcheck::random_tensor({4, 2, 9, 9}, rng, 0.2);
  Tensor<double> b({2});
  const Value y = tape.conv2d_transpose(tape.leaf(x), tape.leaf(w), tape.leaf(b), 2, 4, 1);
  CHECK(tape.value(y).shape == std::vector<int>{1, 2, 16, 16});

  // dot-product test: <conv(u), v> == <u, convT(v)> with zero biases
  auto u = gradcheck::random_tensor({1, 2, 6, 6}, rng);
  auto k = gradcheck::random_tensor({3, 2, 3, 3}, rng);
  Tensor<double> zb3({3}), zb2({2});
  const Value cu = tape.conv2d(tape.leaf(u), tape.leaf(k), tape.leaf(zb3), 2, 1);
  const auto cu_shape = tape.value(cu).shape;  // [1,3,3,3]
  auto v = gradcheck::random_tensor(cu_shape, rng);
  const Value ctv = tape.conv2d_transpose(tape.leaf(v), tape.leaf(k), tape.leaf(zb2), 2, 1,
                                          6 - ((cu_shape[2] - 1) * 2 - 2 + 3));
  double lhs = 0.0, rhs = 0.0;
  const auto& cuv = tape.value(cu);
  const auto& ctvv = tape.value(ctv);
  REQUIRE(ctvv.shape == u.shape);
  for (std::int64_t i = 0; i < cuv.numel(); ++i) lhs += cuv[i] * v[i];
  for (std::int64_t i = 0; i < u.numel(); ++i) rhs += u[i] * ctvv[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("transposed conv gradients") {
  Rng rng(6);
  auto builder = [](Tape<double>& t, const std::vector<Value>& in) {
    const Value y = t.conv2d_transpose(in[0], in[1], in[2], 2, 1, 1);
    return t.mse(y, in[3]);
  };
  auto x = gradcheck::random_tensor({2, 3, 4, 4}, rng);
  auto w = gradcheck::random_tensor({3, 2, 3, 3}, rng, 0.5);
  Tensor<double> b({2});
  auto target = gradcheck::random_tensor({2, 2, 8, 8}, rng);
  const auto rep = gradcheck::check(builder, {x, w, b, target});
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("max pool picks the maximum and routes its gradient") {
  Tape<double> tape;
  Tensor<double> x({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Value in = tape.leaf(x, true);
  const Value out = tape.max_pool2(in);
  CHECK(tape.value(out)[0] == 4.0);
  const Value loss = tape.scale(tape.reshape(out, {1}), 1.0);
  // route a unit gradient back
  Tape<double> t2;
  const Value in2 = t2.leaf(x, true);
  const Value out2 = t2.max_pool2(in2);
  const Value l2 = t2.mse(out2, t2.leaf(Tensor<double>({1, 1, 1, 1}), false));
  t2.backward(l2);
  const auto& g = t2.grad(in2);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == doctest::Approx(8.0));  // d/dx mean((4-0)^2) = 2*4
  (void)loss;
}

TEST_CASE("upsample_nearest duplicates cells") {
  Tape<double> tape;
  Tensor<double> x({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  const Value out = tape.upsample2(tape.leaf(x));
  const auto& o = tape.value(out);
  CHECK(o.shape == std::vector<int>{1, 1, 4, 4});
  const double expect[4][4] = {{1, 1, 2, 2}, {1, 1, 2, 2}, {3, 3, 4, 4}, {3, 3, 4, 4}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(o[i * 4 + j] == expect[i][j]);
}

TEST_CASE("pool, upsample, dense and activations pass gradient checks") {
  Rng rng(7);
  SUBCASE("max_pool2 + relu") {
    auto builder = [](Tape<double>& t, const std::vector<Value>& in) {
      return t.mse(t.relu(t.max_pool2(in[0])), in[1]);
    };
    auto x = gradcheck::random_tensor({2, 2, 6, 6}, rng);
    auto target = gradcheck::random_tensor({2, 2, 3, 3}, rng);
    CHECK(gradcheck::check(builder, {x, target}).max_rel_err < 1e-4);
  }
  SUBCASE("upsample2 + sigmoid") {
    auto builder = [](Tape<double>& t, const std::vector<Value>& in) {
      return t.mse(t.sigmoid(t.upsample2(in[0])), in[1]);
    };
    auto x = gradcheck::random_tensor({1, 3, 3, 3}, rng);
    auto target = gradcheck::random_tensor({1, 3, 6, 6}, rng);
    CHECK(gradcheck::check(builder, {x, target}).max_rel_err < 1e-4);
  }
  SUBCASE("dense + concat + mul + exp") {
    auto builder = [](Tape<double>& t, const std::vector<Value>& in) {
      const Value h = t.dense(t.concat_cols(in[0], in[1]), in[2], in[3]);
      const Value m = t.mul(h, t.exp(t.scale(h, 0.1)));
      return t.mse(m, in[4]);
    };
    auto a = gradcheck::random_tensor({3, 4}, rng);
    auto b = gradcheck::random_tensor({3, 2}, rng);
    auto w = gradcheck::random_tensor({5, 6}, rng, 0.4);
    Tensor<double> bias({5});
    auto target = gradcheck::random_tensor({3, 5}, rng);
    CHECK(gradcheck::check(builder, {a, b, w, bias, target}).max_rel_err < 1e-4);
  }
  SUBCASE("kl divergence") {
    auto builder = [](Tape<double>& t, const std::vector<Value>& in) {
      return t.kl_diag_gauss(in[0], in[1]);
    };
    auto mu = gradcheck::random_tensor({4, 6}, rng);
    auto lv = gradcheck::random_tensor({4, 6}, rng, 0.5);
    CHECK(gradcheck::check(builder, {mu, lv}).max_rel_err < 1e-4);
  }
}

TEST_CASE("mse of a tensor against itself is exactly zero and batch-order invariant") {
  Rng rng(8);
  auto x = gradcheck::random_tensor({4, 5}, rng);
  Tape<double> tape;
  const Value a = tape.leaf(x);
  CHECK(tape.value(tape.mse(a, a))[0] == 0.0);

  auto y = gradcheck::random_tensor({4, 5}, rng);
  // permute batch rows of both in the same way
  Tensor<double> xp(x.shape), yp(y.shape);
  const int perm[4] = {2, 0, 3, 1};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 5; ++c) {
      xp[r * 5 + c] = x[perm[r] * 5 + c];
      yp[r * 5 + c] = y[perm[r] * 5 + c];
    }
  Tape<double> t2;
  const double l1 = t2.value(t2.mse(t2.leaf(x), t2.leaf(y)))[0];
  const double l2 = t2.value(t2.mse(t2.leaf(xp), t2.leaf(yp)))[0];
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor<double> theta({3}, {1.0, -2.0, 0.5});
  Tensor<double> g({3});
  AdamState<double> st;
  st.hyper.alpha = 0.1;
  st.init({theta});
  const Tensor<double> before = theta;
  adam_step<double>({&theta}, {&g}, st);
  for (int i = 0; i < 3; ++i) CHECK(theta[i] == doctest::Approx(before[i]).epsilon(1e-12));
}

TEST_CASE("adam: first step with unit gradient moves by -alpha") {
  Tensor<double> theta({1}, {0.0});
  Tensor<double> g({1}, {1.0});
  AdamState<double> st;
  st.hyper.alpha = 0.1;
  st.init({theta});
  adam_step<double>({&theta}, {&g}, st);
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam drives a quadratic toward zero") {
  Tensor<double> theta({1}, {1.0});
  AdamState<double> st;
  st.hyper.alpha = 0.1;
  st.init({theta});
  for (int i = 0; i < 100; ++i) {
    Tensor<double> g({1}, {2.0 * theta[0]});
    adam_step<double>({&theta}, {&g}, st);
  }
  CHECK(std::abs(theta[0]) < 0.05);
}

TEST_CASE("schedule: strictly decreasing loss neither stops nor decays") {
  TrainSchedule sched;
  std::vector<double> h;
  for (int i = 0; i < 30; ++i) {
    h.push_back(1.0 / (i + 1));
    const auto d = schedule_update(h, sched, 1e-3);
    CHECK(!d.stop);
    CHECK(d.new_lr == 1e-3);
  }
}

TEST_CASE("schedule: early stop exactly at 10 stale epochs") {
  TrainSchedule sched;
  std::vector<double> h = {1.0};
  for (int i = 0; i < 9; ++i) h.push_back(1.0);
  CHECK(!schedule_update(h, sched, 1e-3).stop);  // 9 stale epochs
  h.push_back(1.0);
  CHECK(schedule_update(h, sched, 1e-3).stop);  // 10 stale epochs
}

TEST_CASE("schedule: lr times 0.2 exactly at 5 stale epochs") {
  TrainSchedule sched;
  std::vector<double> h = {1.0, 1.0, 1.0, 1.0, 1.0};  // 4 stale
  CHECK(schedule_update(h, sched, 1e-3).new_lr == doctest::Approx(1e-3));
  h.push_back(1.0);  // 5 stale
  CHECK(schedule_update(h, sched, 1e-3).new_lr == doctest::Approx(2e-4));
  // an improvement resets the counter
  h.push_back(0.5);
  CHECK(schedule_update(h, sched, 2e-4).new_lr == doctest::Approx(2e-4));
}

TEST_CASE("schedule validates its configuration") {
  TrainSchedule bad;
  bad.plateau_factor = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(schedule_update({}, TrainSchedule{}, 1e-3), ValidationError);
}

}  // TEST_SUITE
