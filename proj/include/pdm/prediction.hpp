#pragma once

#include <optional>
#include <stdexcept>
#include <utility>

#include "pdm/image.hpp"

namespace pdm {

// Output of one denoiser evaluation: the predicted noise and, when the model
// learns its variance, the per-pixel interpolation coefficient v in [0, 1]
// between the clipped posterior variance (v = 0) and beta_t (v = 1).
struct NoisePrediction {
  ImageTensor eps;
  std::optional<ImageTensor> v;
  bool learned_variance = false;

  NoisePrediction() = default;

  explicit NoisePrediction(ImageTensor eps_hat) : eps(std::move(eps_hat)) {}

  NoisePrediction(ImageTensor eps_hat, ImageTensor v_coef)
      : eps(std::move(eps_hat)), v(std::move(v_coef)), learned_variance(true) {
    require_same_shape(eps, *v, "NoisePrediction");
  }
};

enum class ConditionKind { none, class_label, low_res };

// Optional conditioning information forwarded to the denoiser on every call.
struct Condition {
  ConditionKind kind = ConditionKind::none;
  int class_id = -1;
  ImageTensor low_res;

  static Condition none() { return {}; }

  static Condition for_class(int id) {
    if (id < 0) throw std::invalid_argument("Condition: class_id must be non-negative");
    Condition c;
    c.kind = ConditionKind::class_label;
    c.class_id = id;
    return c;
  }

  static Condition for_low_res(ImageTensor lr) {
    Condition c;
    c.kind = ConditionKind::low_res;
    c.low_res = std::move(lr);
    return c;
  }
};

}  // namespace pdm
