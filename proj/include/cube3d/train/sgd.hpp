#pragma once

#include <optional>
#include <vector>

#include "cube3d/model/net.hpp"

namespace cube3d::train {

// One velocity per learnable parameter, created as zeros on first use.
template <Real T>
struct SGDState {
  std::vector<Tensor<T>> velocity;
};

// Classic momentum: v <- momentum * v - lr * g; w <- w + v.
template <Real T>
void sgd_step(std::vector<Tensor<T>*> params, const std::vector<const Tensor<T>*>& grads, SGDState<T>& state,
              double lr, double momentum) {
  if (params.size() != grads.size())
    fail(ErrorKind::shape, std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) + " parameters");
  if (state.velocity.empty())
    for (const auto* p : params) state.velocity.emplace_back(p->shape());
  if (state.velocity.size() != params.size()) fail(ErrorKind::shape, "optimizer state does not match the parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], *grads[i], "gradient");
    require_same_shape(*params[i], state.velocity[i], "velocity");
  }
  const T m = static_cast<T>(momentum), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i]->raw();
    T* v = state.velocity[i].raw();
    const T* g = grads[i]->raw();
    for (std::size_t j = 0, n = params[i]->size(); j < n; ++j) {
      v[j] = m * v[j] - eta * g[j];
      w[j] += v[j];
    }
  }
}

// Network form: matches gradients to learnable parameters by name.
template <Real T>
void sgd_step(model::AnomalyNet<T>& net, const model::ParamGrads<T>& grads, SGDState<T>& state, double lr,
              double momentum) {
  std::vector<Tensor<T>*> params;
  std::vector<const Tensor<T>*> gs;
  std::size_t gi = 0;
  for (auto& p : net.parameters()) {
    if (!p.learnable) continue;
    if (gi >= grads.size() || grads[gi].name != p.name)
      fail(ErrorKind::shape, "gradient list does not line up with parameter " + p.name);
    params.push_back(p.value);
    gs.push_back(&grads[gi++].value);
  }
  if (gi != grads.size()) fail(ErrorKind::shape, "more gradients than learnable parameters");
  sgd_step(std::move(params), gs, state, lr, momentum);
}

// Reduce-on-plateau over the mean training loss: an epoch improves when its
// loss is below best - threshold; after `patience` epochs in a row without
// improvement the rate is multiplied by `factor` and the count restarts.
struct PlateauSchedule {
  double learning_rate;
  double factor;
  std::size_t patience;
  double threshold;
  std::optional<double> best;
  std::size_t stale = 0;

  explicit PlateauSchedule(double lr, double factor_ = 0.1, std::size_t patience_ = 3, double threshold_ = 1e-4)
      : learning_rate(lr), factor(factor_), patience(patience_), threshold(threshold_) {}

  double update(double epoch_loss) {
    if (!best || epoch_loss < *best - threshold) {
      best = epoch_loss;
      stale = 0;
    } else if (++stale >= patience) {
      learning_rate *= factor;
      stale = 0;
    }
    return learning_rate;
  }
};

}  // namespace cube3d::train
