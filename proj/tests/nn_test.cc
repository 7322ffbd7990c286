/*
Copyright 2026 The lbsgd Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "grad_check.h"
#include "lbsgd/error.h"
#include "lbsgd/nn/engine.h"
#include "lbsgd/nn/network.h"
#include "lbsgd/nn/reduce.h"

namespace lbsgd::nn {
namespace {

using testing::all_kinds_network;
using testing::random_batch;

TEST(TensorTest, RejectsZeroDimension) {
  EXPECT_THROW(Tensor({3, 0}), DomainError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), DomainError);
}

TEST(TensorTest, NormAndFiniteness) {
  Tensor t({2, 2}, std::vector<double>{3, 0, 0, 4});
  EXPECT_DOUBLE_EQ(t.l2_norm(), 5.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(TensorTest, IdenticalDistinguishesSignedZero) {
  Tensor a({1}, std::vector<double>{0.0});
  Tensor b({1}, std::vector<double>{-0.0});
  EXPECT_TRUE(a.identical(a));
  EXPECT_FALSE(a.identical(b));
}

TEST(ResolveLayersTest, InfersWidths) {
  const auto layers = resolve_layers(all_kinds_network());
  ASSERT_EQ(layers.size(), 9u);
  EXPECT_EQ(layers[1].in_dim, 6u);
  EXPECT_EQ(layers[3].in_dim, 5u);
  EXPECT_EQ(layers[3].out_dim, 5u);
  EXPECT_EQ(layers[7].out_dim, 3u);
}

TEST(ResolveLayersTest, MismatchNamesBothLayers) {
  const std::vector<LayerSpec> bad = {LayerSpec::dense(2, 4), LayerSpec::dense(5, 3), LayerSpec::softmax_xent()};
  try {
    resolve_layers(bad);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("layer 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 1"), std::string::npos) << msg;
  }
}

TEST(ResolveLayersTest, SoftmaxMustBeLastAndUnique) {
  EXPECT_THROW(resolve_layers(std::vector<LayerSpec>{LayerSpec::dense(2, 3)}), ConfigError);
  EXPECT_THROW(resolve_layers(std::vector<LayerSpec>{LayerSpec::dense(2, 3), LayerSpec::softmax_xent(),
                                                     LayerSpec::relu()}),
               ConfigError);
  EXPECT_THROW(resolve_layers(std::vector<LayerSpec>{LayerSpec::dense(2, 1), LayerSpec::softmax_xent()}),
               ConfigError);
  EXPECT_THROW(resolve_layers(std::vector<LayerSpec>{}), ConfigError);
}

TEST(InitTest, DeterministicAndShaped) {
  const auto net = all_kinds_network();
  const ParamSet a = init_network(net, 7);
  const ParamSet b = init_network(net, 7);
  const ParamSet c = init_network(net, 8);
  EXPECT_TRUE(identical(a, b));
  EXPECT_FALSE(identical(a, c));

  std::vector<std::string> names;
  for (const auto& g : a.groups) names.push_back(g.name);
  const std::vector<std::string> expected = {"dense0.weight",    "dense0.bias",      "dense2.weight",
                                             "batchnorm3.scale", "batchnorm3.shift", "dense5.weight",
                                             "batchnorm6.scale", "batchnorm6.shift", "dense7.weight",
                                             "dense7.bias"};
  EXPECT_EQ(names, expected);

  const auto& w = a.group("dense0.weight");
  const double limit = std::sqrt(6.0 / (4 + 6));
  for (double v : w.param.values()) EXPECT_LE(std::abs(v), limit);
  for (double v : a.group("dense0.bias").param.values()) EXPECT_EQ(v, 0.0);
  for (double v : a.group("batchnorm3.scale").param.values()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(a.group("batchnorm6.scale").category, ParamCategory::kNormScale);
  EXPECT_THROW(a.group("nope"), UsageError);
  EXPECT_NE(a.find_buffer(3, "running_mean"), ParamSet::npos);
}

TEST(InitTest, ChecksumTracksParameters) {
  ParamSet p = init_network(all_kinds_network(), 1);
  const auto before = param_checksum(p);
  p.groups[0].momentum[0] = 1.0;
  EXPECT_EQ(param_checksum(p), before);
  EXPECT_NE(replica_checksum(p), replica_checksum(init_network(all_kinds_network(), 1)));
  p.groups[0].param[0] += 1.0;
  EXPECT_NE(param_checksum(p), before);
}

// Central differences against the analytic gradient for every parameter
// group of a network containing every layer kind, over many seeds.
TEST(GradientTest, MatchesFiniteDifferencesAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ParamSet p = init_network(all_kinds_network(), seed);
    const Batch batch = random_batch(8, 4, 3, 100 + seed);
    for (const auto& c : testing::check_gradients(p, batch)) {
      EXPECT_LT(c.rel_error, 1e-5) << "seed " << seed << " group " << c.name;
    }
  }
}

// Softmax regression has a closed-form gradient: X^T (P - Y) / B.
TEST(GradientTest, SoftmaxRegressionClosedForm) {
  const std::vector<LayerSpec> net = {LayerSpec::dense(3, 4), LayerSpec::softmax_xent()};
  ParamSet p = init_network(net, 3);
  const Batch batch = random_batch(5, 3, 4, 9);
  const auto res = forward_loss(p, batch);
  backward(p, *res.cache);
  const auto& w = p.group("dense0.weight");
  const auto& b = p.group("dense0.bias");

  double loss = 0.0;
  std::vector<double> dw(12, 0.0), db(4, 0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> z(4);
    for (std::size_t o = 0; o < 4; ++o) {
      z[o] = b.param[o];
      for (std::size_t k = 0; k < 3; ++k) z[o] += batch.inputs.at(i, k) * w.param[k * 4 + o];
    }
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    loss += std::log(s) + zmax - z[static_cast<std::size_t>(batch.labels[i])];
    for (std::size_t o = 0; o < 4; ++o) {
      const double delta = std::exp(z[o] - zmax) / s - (static_cast<std::int32_t>(o) == batch.labels[i] ? 1.0 : 0.0);
      db[o] += delta / 5.0;
      for (std::size_t k = 0; k < 3; ++k) dw[k * 4 + o] += batch.inputs.at(i, k) * delta / 5.0;
    }
  }
  EXPECT_NEAR(res.loss, loss / 5.0, 1e-12);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(w.grad[i], dw[i], 1e-12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(b.grad[i], db[i], 1e-12);
}

TEST(ForwardTest, StableForHugeLogits) {
  const std::vector<LayerSpec> net = {LayerSpec::dense(1, 2), LayerSpec::softmax_xent()};
  ParamSet p = init_network(net, 1);
  p.group("dense0.weight").param[0] = 1e3;
  p.group("dense0.weight").param[1] = -1e3;
  Batch batch{Tensor({1, 1}, std::vector<double>{1.0}), {1}};
  const auto res = forward_loss(p, batch);
  EXPECT_TRUE(std::isfinite(res.loss));
  EXPECT_NEAR(res.loss, 2e3, 1e-9);
}

TEST(ForwardTest, NonFiniteInputRaisesNumericError) {
  const ParamSet p = init_network(all_kinds_network(), 1);
  Batch batch = random_batch(4, 4, 3, 1);
  batch.inputs[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(forward_loss(p, batch), NumericError);
}

TEST(ForwardTest, LabelOutOfRange) {
  const ParamSet p = init_network(all_kinds_network(), 1);
  Batch batch = random_batch(4, 4, 3, 1);
  batch.labels[2] = 3;
  EXPECT_THROW(forward_loss(p, batch), DomainError);
}

TEST(BatchNormTest, SingleExampleTrainingBatchIsDegenerate) {
  const ParamSet p = init_network(all_kinds_network(), 1);
  const Batch one = random_batch(1, 4, 3, 2);
  EXPECT_THROW(forward_loss(p, one), DegenerateBatchError);
  const Tensor logits = predict_logits(p, one.inputs, Mode::kEval);
  EXPECT_EQ(logits.dim(0), 1u);
  EXPECT_TRUE(logits.all_finite());
}

TEST(BatchNormTest, ConstantFeatureStaysFinite) {
  const std::vector<LayerSpec> net = {LayerSpec::batchnorm(1e-5, 4), LayerSpec::dense(4, 3),
                                      LayerSpec::softmax_xent()};
  ParamSet p = init_network(net, 1);
  Batch batch = random_batch(6, 4, 3, 2);
  for (std::size_t i = 0; i < 6; ++i) batch.inputs.at(i, 0) = 0.5;
  const auto res = forward_loss(p, batch);
  EXPECT_TRUE(std::isfinite(res.loss));
  backward(p, *res.cache);
  for (const auto& g : p.groups) EXPECT_TRUE(g.grad.all_finite()) << g.name;
  for (const auto& c : testing::check_gradients(p, batch)) EXPECT_LT(c.rel_error, 1e-5) << c.name;
}

TEST(BatchNormTest, RunningStatsFollowMomentum) {
  const std::vector<LayerSpec> net = {LayerSpec::batchnorm(1e-5, 2), LayerSpec::dense(2, 2),
                                      LayerSpec::softmax_xent()};
  ParamSet p = init_network(net, 1);
  const Batch batch{Tensor({2, 2}, std::vector<double>{1, 2, 3, 6}), {0, 1}};
  const auto res = forward_loss(p, batch);
  update_running_stats(p, *res.cache, 0.5);
  const auto& mean = p.buffers[p.find_buffer(0, "running_mean")].value;
  const auto& var = p.buffers[p.find_buffer(0, "running_var")].value;
  EXPECT_DOUBLE_EQ(mean[0], 0.5 * 0.0 + 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(mean[1], 0.5 * 0.0 + 0.5 * 4.0);
  // Population variance of {1, 3} is 1 and of {2, 6} is 4.
  EXPECT_DOUBLE_EQ(var[0], 0.5 * 1.0 + 0.5 * 1.0);
  EXPECT_DOUBLE_EQ(var[1], 0.5 * 1.0 + 0.5 * 4.0);
}

TEST(BackwardTest, StaleCacheIsRejected) {
  ParamSet p = init_network(all_kinds_network(), 1);
  const auto res = forward_loss(p, random_batch(4, 4, 3, 1));
  p.groups[0].param[0] += 0.25;
  EXPECT_THROW(backward(p, *res.cache), UsageError);
}

TEST(BackwardTest, BitwiseDeterministic) {
  ParamSet a = init_network(all_kinds_network(), 5);
  ParamSet b = init_network(all_kinds_network(), 5);
  const Batch batch = random_batch(16, 4, 3, 5);
  const auto ra = forward_loss(a, batch);
  const auto rb = forward_loss(b, batch);
  backward(a, *ra.cache);
  backward(b, *rb.cache);
  EXPECT_EQ(std::memcmp(&ra.loss, &rb.loss, sizeof(double)), 0);
  for (std::size_t g = 0; g < a.groups.size(); ++g) EXPECT_TRUE(a.groups[g].grad.identical(b.groups[g].grad));
}

// A batch concatenated with itself has the same mean loss, batch statistics
// and mean gradient.
TEST(BackwardTest, DuplicatedBatchGivesSameGradient) {
  ParamSet a = init_network(all_kinds_network(), 2);
  ParamSet b = a;
  const Batch batch = random_batch(8, 4, 3, 3);
  const std::vector<Batch> twice = {batch, batch};
  const Batch doubled = concat_batches(twice);
  const auto ra = forward_loss(a, batch);
  const auto rb = forward_loss(b, doubled);
  EXPECT_NEAR(ra.loss, rb.loss, 1e-12);
  EXPECT_EQ(2 * ra.correct, rb.correct);
  backward(a, *ra.cache);
  backward(b, *rb.cache);
  for (std::size_t g = 0; g < a.groups.size(); ++g) {
    for (std::size_t i = 0; i < a.groups[g].grad.size(); ++i) {
      EXPECT_NEAR(a.groups[g].grad[i], b.groups[g].grad[i], 1e-12) << a.groups[g].name;
    }
  }
}

TEST(BatchTest, SliceConcatRoundTrip) {
  const Batch b = random_batch(10, 3, 4, 1);
  const std::vector<Batch> parts = {slice_batch(b, 0, 3), slice_batch(b, 3, 10)};
  const Batch joined = concat_batches(parts);
  EXPECT_TRUE(joined.inputs.identical(b.inputs));
  EXPECT_EQ(joined.labels, b.labels);
  EXPECT_THROW(slice_batch(b, 4, 4), UsageError);
}

TEST(EvaluateTest, AccuracyIsFractionOfHits) {
  const std::vector<LayerSpec> net = {LayerSpec::dense(1, 2), LayerSpec::softmax_xent()};
  ParamSet p = init_network(net, 1);
  auto& w = p.group("dense0.weight").param;
  w[0] = 1.0;
  w[1] = -1.0;
  const Batch batch{Tensor({4, 1}, std::vector<double>{1, 2, -1, 3}), {0, 0, 0, 1}};
  EXPECT_DOUBLE_EQ(evaluate_accuracy(p, batch), 0.5);
}

TEST(ReduceTest, SplitPutsPowerOfTwoLeft) {
  EXPECT_EQ(tree_split(2), 1u);
  EXPECT_EQ(tree_split(3), 2u);
  EXPECT_EQ(tree_split(5), 4u);
  EXPECT_EQ(tree_split(8), 4u);
  EXPECT_EQ(tree_split(9), 8u);
  EXPECT_TRUE(slice_is_subtree(16));
  EXPECT_FALSE(slice_is_subtree(12));
}

// Summing power-of-two slices and then the slice totals reproduces the
// whole-range sum bit for bit.
TEST(ReduceTest, PowerOfTwoSlicesAreSubtrees) {
  Xoshiro256 rng(42);
  std::vector<double> v(256);
  for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
  const double whole = tree_sum_scalars(v);
  for (std::size_t parts : {1u, 2u, 4u, 8u, 16u, 32u}) {
    const std::size_t len = v.size() / parts;
    std::vector<double> partial;
    for (std::size_t j = 0; j < parts; ++j) partial.push_back(tree_sum_scalars(std::span(v).subspan(j * len, len)));
    const double combined = tree_sum_scalars(partial);
    EXPECT_EQ(std::memcmp(&whole, &combined, sizeof(double)), 0) << parts;
  }
}

TEST(ReduceTest, TreeSumVectorMatchesScalar) {
  Xoshiro256 rng(3);
  std::vector<std::vector<double>> parts(7, std::vector<double>(3));
  for (auto& p : parts) {
    for (double& x : p) x = rng.normal();
  }
  std::vector<std::span<const double>> views(parts.begin(), parts.end());
  const auto sum = tree_sum_parts(views);
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> column;
    for (const auto& p : parts) column.push_back(p[k]);
    EXPECT_EQ(sum[k], tree_sum_scalars(column));
  }
}

TEST(ShardTest, ShardedForwardMatchesSingle) {
  const ParamSet p = init_network(all_kinds_network(), 4);
  const Batch batch = random_batch(16, 4, 3, 4);
  const std::vector<Batch> one = {batch};
  const std::vector<Batch> four = {slice_batch(batch, 0, 4), slice_batch(batch, 4, 8), slice_batch(batch, 8, 12),
                                   slice_batch(batch, 12, 16)};
  const std::vector<const ParamSet*> r1 = {&p};
  const std::vector<const ParamSet*> r4 = {&p, &p, &p, &p};
  const auto c1 = forward_shards(r1, one, Mode::kTrain);
  const auto c4 = forward_shards(r4, four, Mode::kTrain);
  EXPECT_EQ(std::memcmp(&c1.loss, &c4.loss, sizeof(double)), 0);
  EXPECT_EQ(c1.correct, c4.correct);
  const auto g1 = backward_shards(r1, c1);
  const auto g4 = backward_shards(r4, c4);
  ASSERT_EQ(g4.size(), 4u);
}

}  // namespace
}  // namespace lbsgd::nn
