#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "cube3d/data/synth.hpp"
#include "cube3d/model/checkpoint.hpp"
#include "cube3d/train/inference.hpp"
#include "cube3d/train/trainer.hpp"
#include "test_helpers.hpp"

using namespace cube3d;
using namespace cube3d::train;

namespace {

model::AnomalyNet<float> tiny_net(std::size_t frames, std::size_t hw, std::size_t classes, std::uint64_t seed = 1) {
  auto net = model::build_model<float>(model::ModelConfig::compact(frames, hw, hw, classes));
  model::init_weights(net, {seed, 0.05, false});
  return net;
}

// A two-layer net cheap enough to train inside a unit test.
model::AnomalyNet<float> toy_net(std::size_t classes) {
  model::AnomalyNet<float> net(Shape{4, 6, 6, 3});
  net.conv("conv1", 4).relu("relu1").max_pool("pool1", model::cube_pool()).flatten().dense("fc", classes);
  model::init_weights(net, {3, 0.1, false});
  return net;
}

std::vector<data::Cube> toy_cubes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 0.5f);
  std::vector<data::Cube> out;
  for (std::size_t i = 0; i < n; ++i) {
    data::Cube c{Tensor<float>(Shape{4, 6, 6, 3}), i % 2, "v" + std::to_string(i), 0};
    for (float& v : c.data.data()) v = u(rng) + (c.label ? 0.5f : 0.0f) * (&v - c.data.raw() < 108 ? 1.0f : 0.0f);
    out.push_back(std::move(c));
  }
  return out;
}

data::FrameSequence random_video(std::size_t frames, std::size_t hw, std::uint64_t seed, std::string id = "vid") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  data::FrameSequence s{std::move(id), Tensor<float>(Shape{frames, hw, hw, 3}), data::kDefaultFps};
  for (float& v : s.frames.data()) v = u(rng);
  return s;
}

}  // namespace

TEST(TrainConfig, DefaultsMatchExperimentSettings) {
  const TrainConfig c;
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(c.momentum, 0.09);
  EXPECT_EQ(c.plateau_patience_epochs, 3u);
  EXPECT_DOUBLE_EQ(c.plateau_factor, 0.1);
  EXPECT_DOUBLE_EQ(c.dropout_rate, 0.6);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfig, ParsesKeyValueFile) {
  const auto c = parse_train_config("# run\nbatch_size = 8\nlearning_rate=0.001\n momentum = 0.9 # typo fix\nseed = 7\n");
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
  EXPECT_DOUBLE_EQ(c.momentum, 0.9);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(parse_train_config(format_train_config(c)).learning_rate, c.learning_rate);
}

TEST(TrainConfig, RejectsBadValues) {
  expect_error_kind([] { parse_train_config("batch_size = 0\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("learning_rate = -1\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("momentum = 1\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("plateau_factor = 1\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("batch_size = eight\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("colour = blue\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("just words\n"); }, ErrorKind::config);
  expect_error_kind([] { parse_train_config("init = xavier\n"); }, ErrorKind::config);
  EXPECT_EQ(parse_train_config("init = he\n").init, "he");
}

TEST(TrainConfig, EnvironmentSeedOverrides) {
  TrainConfig c;
  c.seed = 3;
  ::setenv("CUBE3D_SEED", "11", 1);
  apply_seed_env(c);
  ::unsetenv("CUBE3D_SEED");
  EXPECT_EQ(c.seed, 11u);
  apply_seed_env(c);
  EXPECT_EQ(c.seed, 11u);
}

TEST(Sgd, ZeroGradientZeroVelocityLeavesParameters) {
  Tensor<float> w(Shape{3}, 1.5f), g(Shape{3});
  SGDState<float> s;
  sgd_step<float>({&w}, {&g}, s, 0.1, 0.9);
  for (float v : w.data()) EXPECT_EQ(v, 1.5f);
  ASSERT_EQ(s.velocity.size(), 1u);
  EXPECT_EQ(s.velocity[0].shape(), w.shape());
}

TEST(Sgd, MomentumZeroIsPlainGradientDescent) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  Tensor<double> w(Shape{2, 5}), g(Shape{2, 5});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = n(rng), g[i] = n(rng);
  const Tensor<double> w0 = w;
  SGDState<double> s;
  sgd_step<double>({&w}, {&g}, s, 0.01, 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i], w0[i] + (0.0 * 0.0 - 0.01 * g[i]));
}

TEST(Sgd, TwoStepsFollowScalarRecurrence) {
  const double lr = 0.05, m = 0.09, g0 = 0.7;
  Tensor<double> w(Shape{1}, 2.0), g(Shape{1}, g0);
  SGDState<double> s;
  double ws = 2.0, vs = 0.0;
  for (int step = 0; step < 2; ++step) {
    sgd_step<double>({&w}, {&g}, s, lr, m);
    vs = m * vs - lr * g0;
    ws += vs;
  }
  EXPECT_DOUBLE_EQ(w[0], ws);
  EXPECT_NEAR(w[0], 2.0 - lr * g0 * (2.0 + m), 1e-15);
}

TEST(Sgd, ShapeMismatchIsShapeError) {
  Tensor<float> w(Shape{3}), g(Shape{4});
  SGDState<float> s;
  expect_error_kind([&] { sgd_step<float>({&w}, {&g}, s, 0.1, 0.0); }, ErrorKind::shape);
  expect_error_kind([&] { sgd_step<float>({&w}, {}, s, 0.1, 0.0); }, ErrorKind::shape);
}

TEST(Sgd, NetworkFormUpdatesEveryLearnableParameter) {
  auto net = toy_net(2);
  const auto cubes = toy_cubes(4, 1);
  const Tensor<float> x = stack_cubes(cubes, {0, 1, 2, 3}, 0, 4);
  auto cache = net.forward(x, model::Mode::train);
  const std::vector<std::size_t> labels{0, 1, 0, 1};
  const auto loss = nn::softmax_cross_entropy(cache.logits, labels);
  const auto grads = net.backward(cache, loss.grad_logits);
  auto before = net.parameters();
  std::vector<Tensor<float>> copies;
  for (auto& p : before) copies.push_back(*p.value);
  SGDState<float> s;
  sgd_step(net, grads, s, 0.1, 0.0);
  std::size_t i = 0, gi = 0;
  for (auto& p : net.parameters()) {
    if (p.learnable) {
      for (std::size_t j = 0; j < p.value->size(); ++j)
        EXPECT_NEAR((*p.value)[j], copies[i][j] - 0.1f * grads[gi].value[j], 1e-6f * std::abs(copies[i][j]) + 1e-9f);
      ++gi;
    }
    ++i;
  }
}

TEST(Plateau, DecreasingLossesKeepRate) {
  PlateauSchedule s{1e-4};
  for (double l : {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}) EXPECT_EQ(s.update(l), 1e-4);
}

TEST(Plateau, FlatLossesReduceAfterPatience) {
  PlateauSchedule s{1e-4, 0.1, 3};
  EXPECT_EQ(s.update(1.0), 1e-4);
  EXPECT_EQ(s.update(1.0), 1e-4);
  EXPECT_EQ(s.update(1.0), 1e-4);
  EXPECT_DOUBLE_EQ(s.update(1.0), 1e-5);
  EXPECT_EQ(s.stale, 0u);
}

TEST(Plateau, ImprovementResetsCounter) {
  PlateauSchedule s{1e-4, 0.1, 3};
  s.update(1.0);
  s.update(1.0);
  EXPECT_EQ(s.stale, 1u);
  s.update(0.5);
  EXPECT_EQ(s.stale, 0u);
  s.update(0.5);
  s.update(0.5);
  EXPECT_EQ(s.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(s.update(0.5), 1e-5);
}

TEST(Plateau, SubThresholdGainIsNotImprovement) {
  PlateauSchedule s{1.0, 0.5, 1, 1e-4};
  s.update(1.0);
  EXPECT_EQ(s.update(1.0 - 5e-5), 0.5);
  EXPECT_EQ(s.update(0.5), 0.5);
}

TEST(Plateau, RateNeverIncreases) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  PlateauSchedule s{1e-3, 0.1, 2};
  double prev = s.learning_rate;
  for (int e = 0; e < 200; ++e) {
    const double lr = s.update(u(rng));
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Batching, TrailingSingletonMerges) {
  EXPECT_EQ(batch_ranges(10, 4), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 4}, {4, 8}, {8, 10}}));
  EXPECT_EQ(batch_ranges(9, 4), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 4}, {4, 9}}));
  EXPECT_EQ(batch_ranges(3, 32), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 3}}));
}

TEST(Batching, ShuffleIsSeededPermutation) {
  const auto a = shuffled_indices(50, 9), b = shuffled_indices(50, 9), c = shuffled_indices(50, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Train, EmptyDatasetIsConfigError) {
  auto net = toy_net(2);
  expect_error_kind([&] { train::train(net, {}, TrainConfig{}); }, ErrorKind::config);
}

TEST(Train, ZeroHeadFirstLossIsLogClasses) {
  for (std::size_t classes : {4u, 14u}) {
    auto net = model::build_model<float>(model::ModelConfig::compact(16, 8, 8, classes));
    model::init_weights(net, {5, 0.01, true});
    std::vector<data::Cube> cubes;
    for (std::size_t i = 0; i < 4; ++i)
      cubes.push_back({random_video(16, 8, i).frames, i % classes, "v", 0});
    TrainConfig cfg;
    cfg.max_epochs = 1;
    const auto r = train::train(net, cubes, cfg);
    EXPECT_NEAR(r.first_batch_loss, std::log(static_cast<double>(classes)), 1e-3);
  }
}

TEST(Train, ToyProblemIsLearned) {
  auto net = toy_net(2);
  const auto cubes = toy_cubes(16, 4);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.max_epochs = 30;
  const auto r = train::train(net, cubes, cfg);
  EXPECT_LT(r.epochs.back().loss, r.epochs.front().loss);
  EXPECT_GE(r.epochs.back().accuracy, 0.95);
  for (const auto& e : r.epochs) {
    EXPECT_GE(e.loss, 0.0);
    EXPECT_GE(e.accuracy, 0.0);
    EXPECT_LE(e.accuracy, 1.0);
  }
}

TEST(Train, SameSeedIsBitReproducible) {
  const auto cubes = toy_cubes(10, 5);
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 4;
  cfg.seed = 7;
  auto a = toy_net(2), b = toy_net(2);
  const auto ra = train::train(a, cubes, cfg), rb = train::train(b, cubes, cfg);
  EXPECT_EQ(ra.epochs, rb.epochs);
  EXPECT_EQ(model::encode_checkpoint(model::make_checkpoint(a, std::nullopt)),
            model::encode_checkpoint(model::make_checkpoint(b, std::nullopt)));
  cfg.seed = 8;
  auto c = toy_net(2);
  EXPECT_NE(train::train(c, cubes, cfg).epochs, ra.epochs);
}

TEST(Train, CallbackCanStopEarly) {
  auto net = tiny_net(16, 8, 4);
  std::vector<data::Cube> cubes;
  for (std::size_t i = 0; i < 6; ++i) cubes.push_back({random_video(16, 8, 20 + i).frames, i % 4, "v", 0});
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 2;
  cfg.learning_rate = 1e-3;
  std::size_t calls = 0;
  const auto r = train::train(net, cubes, cfg, [&](const EpochReport& e) {
    ++calls;
    EXPECT_EQ(e.epoch, calls);
    return false;
  });
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(r.epochs.size(), 1u);
}

TEST(Train, NonFiniteLossIsDivergence) {
  auto net = toy_net(2);
  net.parameters().back().value->fill(std::numeric_limits<float>::infinity());
  try {
    train::train(net, toy_cubes(4, 6), TrainConfig{});
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::divergence);
    EXPECT_NE(std::string(e.what()).find("batch 1"), std::string::npos);
  }
}

TEST(Train, EpochLogLine) {
  EXPECT_EQ(kEpochLogHeader, "epoch,loss,acc,lr");
  EXPECT_EQ(format_epoch_line({3, 0.5, 0.25, 0.0001}), "3,0.5,0.25,0.0001");
}

TEST(Predict, RecordCountIsFloorOfFramesOverWindow) {
  const auto net = tiny_net(16, 8, 14);
  const auto trace = predict_video(net, random_video(810, 8, 1));
  ASSERT_EQ(trace.records.size(), 50u);
  for (std::size_t k = 0; k < 50; ++k) {
    EXPECT_EQ(trace.records[k].start_frame, 16 * k);
    EXPECT_EQ(trace.records[k].end_frame, 16 * k + 15);
    double sum = 0.0;
    for (double p : trace.records[k].probs) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-6);
    EXPECT_EQ(trace.records[k].prob, trace.records[k].probs[trace.records[k].label]);
  }
  for (std::size_t frames : {16u, 17u, 31u, 32u, 47u})
    EXPECT_EQ(predict_video(net, random_video(frames, 8, frames)).records.size(), frames / 16);
}

TEST(Predict, ZeroNetworkPredictsClassZeroUniformly) {
  auto net = tiny_net(16, 8, 14);
  model::zero_weights(net);
  for (const auto& r : predict_video(net, random_video(48, 8, 2)).records) {
    EXPECT_EQ(r.label, 0u);
    EXPECT_NEAR(r.prob, 1.0 / 14.0, 1e-12);
  }
}

TEST(Predict, MatchesSingleCubeForwardAndSoftmax) {
  const auto net = tiny_net(16, 8, 5);
  const auto video = random_video(64, 8, 3);
  const auto trace = predict_video(net, video, 3);
  ASSERT_EQ(trace.records.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    const Tensor<float> cube = data::window_frames(video, 16 * k, 16);
    const Tensor<float> logits = net.infer(cube.reshaped(Shape{1, 16, 8, 8, 3}));
    double mx = logits[0], sum = 0.0;
    for (std::size_t c = 1; c < 5; ++c) mx = std::max<double>(mx, logits[c]);
    for (std::size_t c = 0; c < 5; ++c) sum += std::exp(logits[c] - mx);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(trace.records[k].probs[c], std::exp(logits[c] - mx) / sum, 1e-12);
  }
}

TEST(Predict, TooShortVideo) {
  const auto net = tiny_net(16, 8, 4);
  expect_error_kind([&] { predict_video(net, random_video(15, 8, 4)); }, ErrorKind::too_short);
}

TEST(Predict, FramesInheritWindowPrediction) {
  PredictionTrace t{"v", {{0, 15, {0.2, 0.8}, 1, 0.8}, {16, 31, {0.9, 0.1}, 0, 0.9}}};
  const auto f = frame_predictions(t, 35);
  EXPECT_EQ(f[0], 1u);
  EXPECT_EQ(f[15], 1u);
  EXPECT_EQ(f[16], 0u);
  EXPECT_EQ(f[31], 0u);
  EXPECT_FALSE(f[32].has_value());
}

TEST(TraceCsv, RoundTripIsExact) {
  const auto net = tiny_net(16, 8, 14);
  const std::vector<PredictionTrace> traces{predict_video(net, random_video(40, 8, 5, "a")),
                                            predict_video(net, random_video(16, 8, 6, "b"))};
  const std::string text = format_traces(traces);
  EXPECT_EQ(text.substr(0, text.find('\n')), trace_header(14));
  EXPECT_EQ(trace_header(2), "video_id,start_frame,end_frame,pred_label,pred_prob,p_0,p_1");
  const auto back = parse_traces(text);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(back[v].video_id, traces[v].video_id);
    ASSERT_EQ(back[v].records.size(), traces[v].records.size());
    for (std::size_t k = 0; k < back[v].records.size(); ++k) {
      EXPECT_EQ(back[v].records[k].probs, traces[v].records[k].probs);
      EXPECT_EQ(back[v].records[k].prob, traces[v].records[k].prob);
      EXPECT_EQ(back[v].records[k].label, traces[v].records[k].label);
    }
  }
  expect_error_kind([] { parse_traces("video,start\n"); }, ErrorKind::format);
  expect_error_kind([] { parse_traces(trace_header(2) + "\na,0,15,0,0.5,0.5\n"); }, ErrorKind::format);
}

TEST(Evaluate, RowCountAndLabelsOnFixture) {
  TempDir dir;
  data::SynthConfig sc;
  sc.clips_per_class = 1;
  sc.test_clips_per_class = 2;
  sc.height = sc.width = 8;
  sc.frames = 40;
  const auto fx = data::synth_fixture(sc);
  const data::Manifest m = data::augment_manifest(data::write_fixture(dir.path.string(), fx));
  const auto net = tiny_net(16, 8, 4);
  const EvaluationRows rows = evaluate_split(net, m, fx.annotations);
  std::size_t expect = 0;
  for (const auto& e : m.split(data::Split::test)) expect += data::entry_frame_count(m, e) / 16;
  EXPECT_EQ(rows.truth.size(), expect);
  EXPECT_EQ(rows.scores.size(), expect);
  for (std::size_t i = 0; i < rows.truth.size(); ++i) {
    EXPECT_EQ(std::string(data::class_name(rows.truth[i])), rows.video_ids[i].substr(0, rows.video_ids[i].find('_')));
    double sum = 0.0;
    for (double p : rows.scores[i]) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }

  auto unlabeled = fx.annotations;
  std::erase_if(unlabeled, [](const data::AnnotationRecord& r) { return r.video_id.find("_test_") != std::string::npos; });
  expect_error_kind([&] { evaluate_split(net, m, unlabeled); }, ErrorKind::validation);
}

TEST(Evaluate, RowsFromTraceUseWindowMajority) {
  PredictionTrace t{"v", {{0, 15, {0.2, 0.8}, 1, 0.8}, {16, 31, {0.9, 0.1}, 0, 0.9}}};
  const auto rows = rows_from_traces({t}, {{"v", 0, 9, 1}});
  EXPECT_EQ(rows.truth, (std::vector<std::size_t>{1, data::kNormal}));
  expect_error_kind([&] { rows_from_traces({t}, {{"w", 0, 9, 1}}); }, ErrorKind::validation);
}
