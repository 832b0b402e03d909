#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cube3d/model/audit.hpp"
#include "cube3d/model/net.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace cube3d;
using namespace cube3d::model;

namespace {

// conv-BN-pool-conv-pool-dense stack small enough for exhaustive differences.
AnomalyNet<double> shrunken_net(std::uint64_t seed) {
  AnomalyNet<double> net(Shape{8, 16, 16, 3});
  net.conv("conv1", 4).batch_norm("bn1").relu("relu1").max_pool("pool1", spatial_pool());
  net.conv("conv2", 4).relu("relu2").max_pool("pool2", cube_pool());
  net.flatten().dense("fc6", 8).relu("relu6").dropout("dropout6", 0.5).dense("fc9", 3);
  init_weights(net, InitSpec{seed, 0.3});
  std::mt19937_64 rng(seed + 1);
  for (auto& p : net.parameters())
    if (p.learnable && p.name.find("/bias") != std::string::npos)
      *p.value = oracle::random_tensor<double>(p.value->shape(), rng, -0.1, 0.1);
  return net;
}

}  // namespace

TEST(Model, FullShapeChainMatchesReferenceOutputs) {
  auto net = build_model<float>(14);
  auto audit = shape_audit(net, net.batch_shape(1));
  EXPECT_EQ(audit.output_deviations(), 0u);
  EXPECT_EQ(audit.undocumented(), 0u);
  EXPECT_TRUE(audit.missing_layers.empty());
  bool pool5_noted = false;
  for (const auto& d : audit.deviations) {
    EXPECT_EQ(d.column, "input");
    pool5_noted = pool5_noted || (d.layer == "pool5" && d.realized == "2x11x11x512" && d.expected == "2x13x13x512");
  }
  EXPECT_TRUE(pool5_noted);
  for (const auto& r : net.shape_trace(net.batch_shape(1)))
    if (r.name == "flatten") {
      EXPECT_EQ(r.output, (Shape{1, 18432}));
    }
}

TEST(Model, ConvLayersPreserveTemporalAndSpatialExtents) {
  auto net = build_model<float>(ModelConfig::compact(16, 32, 32, 4));
  for (const auto& r : net.shape_trace(net.batch_shape(2)))
    if (r.name.rfind("conv", 0) == 0) {
      for (std::size_t a = 0; a < 4; ++a) EXPECT_EQ(r.input[a], r.output[a]) << r.name;
    }
}

TEST(Model, ExactlyThreeBatchNormLayersAndNamedHead) {
  auto net = build_model<float>(ModelConfig::compact(16, 32, 32, 14));
  std::size_t bn = 0;
  for (const auto& l : net.layers()) bn += std::holds_alternative<nn::BatchNorm<float>>(l.op);
  EXPECT_EQ(bn, 3u);
  EXPECT_EQ(head_name(net), "fc9");
  EXPECT_EQ(net.num_classes(), 14u);
  EXPECT_EQ(net.find("fc8"), nullptr);
}

TEST(Model, LearnableParameterGolden) {
  // Independent per-layer arithmetic: 3x3x3 conv = 27 cin cout + cout,
  // BN = 2 f, dense = in out + out.
  const std::size_t conv[][2] = {{3, 64},    {64, 128},  {128, 256}, {256, 256},
                                 {256, 512}, {512, 512}, {512, 512}, {512, 512}};
  std::size_t total = 0;
  for (const auto& c : conv) total += 27 * c[0] * c[1] + c[1];
  total += 2 * 64 + 2 * 512 + 2 * 4096;
  total += (18432 * 4096 + 4096) + (4096 * 4096 + 4096) + (4096 * 14 + 14);
  EXPECT_EQ(total, 120005518u);
  auto net = build_model<float>(14);
  EXPECT_EQ(net.learnable_parameter_count(), total);
}

TEST(Model, ZeroWeightsGiveUniformSoftmax) {
  auto net = build_model<float>(ModelConfig::compact(16, 32, 32, 14));
  zero_weights(net);
  Tensor<float> x(net.batch_shape(2), 0.3f);
  auto p = nn::softmax(net.infer(x));
  for (float v : p.data()) EXPECT_NEAR(v, 1.0f / 14.0f, 1e-7f);
}

TEST(Model, EvalForwardIsDeterministic) {
  auto net = build_model<float>(ModelConfig::compact(16, 24, 24, 4));
  init_weights(net, InitSpec{5});
  std::mt19937_64 rng(1);
  auto x = oracle::random_tensor<float>(net.batch_shape(2), rng, 0, 1);
  auto a = net.infer(x);
  auto b = net.infer(x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(net.forward(x, Mode::eval).logits, a);
}

TEST(Model, WrongInputShapeIsShapeError) {
  auto net = build_model<float>(ModelConfig::compact(16, 24, 24, 4));
  EXPECT_CUBE3D_ERROR(net.infer(Tensor<float>(Shape{1, 16, 24, 23, 3})), ErrorKind::shape);
  EXPECT_CUBE3D_ERROR(net.infer(Tensor<float>(Shape{16, 24, 24, 3})), ErrorKind::shape);
}

TEST(Model, InitIsSeededAndZeroHeadOptional) {
  auto a = build_model<float>(ModelConfig::compact(16, 24, 24, 4));
  auto b = build_model<float>(ModelConfig::compact(16, 24, 24, 4));
  init_weights(a, InitSpec{3});
  init_weights(b, InitSpec{3});
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].value, *pb[i].value) << pa[i].name;
  init_weights(b, InitSpec{3, 0.01, true});
  for (const auto& p : b.parameters())
    if (p.name == "fc9/weight") {
      for (float v : p.value->data()) EXPECT_EQ(v, 0.0f);
    }
  EXPECT_CUBE3D_ERROR(init_weights(b, InitSpec{3, 0.0}), ErrorKind::config);
}

TEST(Model, HeInitScalesWithFanIn) {
  auto net = build_model<double>(ModelConfig::compact(16, 24, 24, 4));
  init_weights(net, InitSpec{4, 0.0, false, InitScheme::he});
  // Sample std of each weight tensor against sqrt(2 / fan_in).
  for (const auto& [name, fan_in] : {std::pair<std::string, double>{"conv1/kernel", 27.0 * 3},
                                     {"conv3b/kernel", 27.0 * 32}, {"fc7/weight", 128.0}}) {
    for (const auto& p : net.parameters())
      if (p.name == name) {
        double ss = 0.0;
        for (double v : p.value->data()) ss += v * v;
        const double sd = std::sqrt(ss / static_cast<double>(p.value->size()));
        EXPECT_NEAR(sd / std::sqrt(2.0 / fan_in), 1.0, 0.15) << name;
      }
  }
  EXPECT_EQ(parse_init_scheme("he"), InitScheme::he);
  EXPECT_CUBE3D_ERROR(parse_init_scheme("xavier"), ErrorKind::config);
}

TEST(ModelBackward, GradCountEqualsLearnableTensors) {
  auto net = shrunken_net(1);
  std::mt19937_64 rng(2);
  auto x = oracle::random_tensor<double>(net.batch_shape(2), rng, 0, 1);
  auto cache = net.forward(x, Mode::train, 7);
  auto grads = net.backward(cache, Tensor<double>(cache.logits.shape()));
  std::size_t learnable = 0;
  for (const auto& p : net.parameters()) learnable += p.learnable;
  ASSERT_EQ(grads.size(), learnable);
  for (const auto& g : grads)
    for (double v : g.value.data()) EXPECT_EQ(v, 0.0) << g.name;
}

TEST(ModelBackward, MissingCacheIsStateError) {
  auto net = shrunken_net(1);
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor<double>(net.batch_shape(2), rng, 0, 1);
  EXPECT_CUBE3D_ERROR(net.backward(ForwardCache<double>{}, Tensor<double>(Shape{2, 3})), ErrorKind::state);
  auto eval_cache = net.forward(x, Mode::eval);
  EXPECT_CUBE3D_ERROR(net.backward(eval_cache, Tensor<double>(Shape{2, 3})), ErrorKind::state);
}

TEST(ModelBackward, ShrunkenNetMatchesFiniteDifferences) {
  auto net = shrunken_net(11);
  std::mt19937_64 rng(12);
  auto x = oracle::random_tensor<double>(net.batch_shape(2), rng, 0, 1);
  const std::vector<std::size_t> labels{0, 2};
  const std::uint64_t dropout_seed = 99;
  auto loss = [&] {
    return nn::softmax_cross_entropy(net.forward(x, Mode::train, dropout_seed).logits, std::span(labels)).loss;
  };
  auto cache = net.forward(x, Mode::train, dropout_seed);
  auto ce = nn::softmax_cross_entropy(cache.logits, std::span(labels));
  Tensor<double> grad_x;
  auto grads = net.backward(cache, ce.grad_logits, &grad_x);
  std::size_t gi = 0;
  for (auto& p : net.parameters()) {
    if (!p.learnable) continue;
    ASSERT_EQ(grads[gi].name, p.name);
    EXPECT_LE(oracle::relative_error(grads[gi].value, oracle::numeric_gradient(*p.value, loss)), 1e-4) << p.name;
    ++gi;
  }
  EXPECT_LE(oracle::relative_error(grad_x, oracle::numeric_gradient(x, loss)), 1e-4);
}
