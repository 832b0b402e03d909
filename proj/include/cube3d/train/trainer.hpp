#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cube3d/data/cubes.hpp"
#include "cube3d/model/net.hpp"
#include "cube3d/nn/activation.hpp"
#include "cube3d/train/config.hpp"
#include "cube3d/train/sgd.hpp"

namespace cube3d::train {

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over samples
  double accuracy = 0.0;  // train-mode argmax vs label
  double learning_rate = 0.0;  // rate used during the epoch

  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

struct TrainResult {
  std::vector<EpochReport> epochs;
  double final_learning_rate = 0.0;
  double first_batch_loss = 0.0;
};

inline std::string format_epoch_line(const EpochReport& r) {
  std::ostringstream o;
  o.precision(17);
  o << r.epoch << "," << r.loss << "," << r.accuracy << "," << r.learning_rate;
  return o.str();
}

inline constexpr std::string_view kEpochLogHeader = "epoch,loss,acc,lr";

// Fisher-Yates with a 64-bit Mersenne stream; spelled out so the order does
// not depend on the standard library's distribution implementation.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

// Batch boundaries over n samples. A trailing batch of one sample is merged
// into the previous batch since batch norm needs two samples per feature.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) out.emplace_back(b, std::min(n, b + batch_size));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out[out.size() - 2].second = n;
    out.pop_back();
  }
  return out;
}

inline Tensor<float> stack_cubes(const std::vector<data::Cube>& cubes, const std::vector<std::size_t>& order,
                                 std::size_t begin, std::size_t end) {
  const Shape& s = cubes[order[begin]].data.shape();
  Tensor<float> x(Shape{end - begin, s[0], s[1], s[2], s[3]});
  const std::size_t per = s.numel();
  for (std::size_t i = begin; i < end; ++i) {
    const auto& c = cubes[order[i]].data;
    if (!(c.shape() == s)) fail(ErrorKind::shape, "cube " + c.shape().to_string() + " in a batch of " + s.to_string());
    std::copy(c.data().begin(), c.data().end(), x.raw() + (i - begin) * per);
  }
  return x;
}

inline std::size_t argmax_row(const float* row, std::size_t c) {
  return static_cast<std::size_t>(std::max_element(row, row + c) - row);
}

// Return false from the callback to stop after the reported epoch.
using EpochCallback = std::function<bool(const EpochReport&)>;

// Mini-batch SGD over the given cubes. Each epoch draws a fresh seeded
// permutation; dropout masks derive from (seed, epoch, batch), so a run is
// fully determined by the weights, the cubes and the config.
inline TrainResult train(model::AnomalyNet<float>& net, const std::vector<data::Cube>& cubes, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (cubes.empty()) fail(ErrorKind::config, "no training cubes");
  if (cubes.size() < 2) fail(ErrorKind::config, "training needs at least two cubes for batch statistics");
  const std::size_t C = net.num_classes();

  SGDState<float> state;
  PlateauSchedule schedule{cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience_epochs, cfg.plateau_threshold};
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = shuffled_indices(cubes.size(), model::detail::splitmix64(cfg.seed ^ (epoch << 20)));
    double loss_sum = 0.0;
    std::size_t correct = 0, batch_no = 0;
    const double lr = schedule.learning_rate;
    for (const auto& [b, e] : batch_ranges(cubes.size(), cfg.batch_size)) {
      ++batch_no;
      const Tensor<float> x = stack_cubes(cubes, order, b, e);
      std::vector<std::size_t> labels;
      for (std::size_t i = b; i < e; ++i) labels.push_back(cubes[order[i]].label);

      const std::uint64_t dseed = model::detail::splitmix64(cfg.seed ^ model::detail::splitmix64((epoch << 32) | batch_no));
      auto cache = net.forward(x, model::Mode::train, dseed);
      auto loss = nn::softmax_cross_entropy(cache.logits, labels);
      if (!std::isfinite(loss.loss))
        fail(ErrorKind::divergence, "non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      if (epoch == 1 && batch_no == 1) result.first_batch_loss = loss.loss;
      for (std::size_t i = 0; i < labels.size(); ++i)
        correct += argmax_row(cache.logits.raw() + i * C, C) == labels[i];
      loss_sum += loss.loss * static_cast<double>(e - b);

      const auto grads = net.backward(cache, loss.grad_logits);
      sgd_step(net, grads, state, lr, cfg.momentum);
    }
    EpochReport r{epoch, loss_sum / static_cast<double>(cubes.size()),
                  static_cast<double>(correct) / static_cast<double>(cubes.size()), lr};
    result.epochs.push_back(r);
    schedule.update(r.loss);
    if (on_epoch && !on_epoch(r)) break;
  }
  result.final_learning_rate = schedule.learning_rate;
  return result;
}

}  // namespace cube3d::train
