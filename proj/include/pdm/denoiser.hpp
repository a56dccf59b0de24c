#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdm/image.hpp"
#include "pdm/prediction.hpp"
#include "pdm/schedule.hpp"

namespace pdm {

// Architecture of the fully connected denoiser. The network sees the noisy
// image, a sinusoidal embedding of the timestep and, depending on
// `conditioning`, either a learned class embedding or the nearest-neighbour
// upsampled low-resolution image, all concatenated into one input vector.
struct NetConfig {
  int channels = 1;
  int height = 8;
  int width = 8;
  std::vector<int> hidden_widths = {128, 128};
  int time_embed_dim = 32;
  bool learned_variance = false;
  ConditionKind conditioning = ConditionKind::none;
  int num_classes = 0;     // class_label conditioning only
  int class_embed_dim = 16;

  int pixels() const { return channels * height * width; }
  int condition_size() const;
  int input_size() const { return pixels() + time_embed_dim + condition_size(); }
  int output_size() const { return pixels() * (learned_variance ? 2 : 1); }
  void validate() const;
};

// Sinusoidal transformer-style embedding of an integer timestep.
Eigen::VectorXd time_embedding(int t, int dim);

// Nearest-neighbour upsampling to [img.channels, height, width]; the source
// spatial dims must divide the target dims.
ImageTensor upsample_nearest(const ImageTensor& img, int height, int width);

// Mean pooling by an integer factor per axis; factors must divide the dims.
// Produces the low-resolution conditioning input during training.
ImageTensor downsample_mean(const ImageTensor& img, int factor);

// Fully connected denoiser with SiLU hidden activations; weights live in one
// flat parameter array so the optimizer and checkpoints treat the model as a
// single vector. Layout: per layer W (column-major), then b; the class
// embedding table (column-major, num_classes x class_embed_dim) comes last.
class DenoiserNet {
 public:
  DenoiserNet(NetConfig config, std::uint64_t init_seed);

  const NetConfig& config() const { return config_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const Eigen::ArrayXd& parameters() const { return params_; }
  void set_parameters(const Eigen::ArrayXd& p);

  // Weight/bias views for layer l (0-based). For the optimizer-facing flat
  // array use parameters().
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }

  friend NoisePrediction net_forward(const DenoiserNet&, const ImageTensor&, int,
                                     const Condition&);
  friend Eigen::ArrayXd net_backward(const DenoiserNet&, const ImageTensor&, int,
                                     const Condition&, const Eigen::ArrayXd&,
                                     const Eigen::ArrayXd&);

 private:
  Eigen::VectorXd assemble_input(const ImageTensor& x_t, int t, const Condition& cond) const;

  NetConfig config_;
  std::vector<int> dims_;         // input, hidden..., output widths
  std::vector<Eigen::Index> w_off_, b_off_;
  Eigen::Index embed_off_ = 0;
  Eigen::ArrayXd params_;
};

// Evaluates the network. With learned_variance the raw variance head is
// squashed through a sigmoid so v lands in (0, 1).
NoisePrediction net_forward(const DenoiserNet& net, const ImageTensor& x_t, int t,
                            const Condition& cond);

// Gradient of sum(d_eps . eps_hat) + sum(d_v . v) with respect to the flat
// parameter array; d_v must be empty when the variance head is absent.
// Recomputes the forward pass internally.
Eigen::ArrayXd net_backward(const DenoiserNet& net, const ImageTensor& x_t, int t,
                            const Condition& cond, const Eigen::ArrayXd& d_eps,
                            const Eigen::ArrayXd& d_v);

// Closed-form optimal noise prediction when x0 ~ N(mu0, sigma0_sq * I).
// Exercises every sampler path without training.
NoisePrediction oracle_predict(const ImageTensor& x_t, int t, const BetaSchedule& schedule,
                               double mu0, double sigma0_sq);

struct AdamState {
  Eigen::ArrayXd m;
  Eigen::ArrayXd v;
  std::int64_t step = 0;
};

// One Adam update with bias correction. `state` is resized on first use.
void adam_step(Eigen::ArrayXd& params, const Eigen::ArrayXd& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Checkpoint container: architecture + parameters, plus optional tagged
// blocks (optimizer moments, trainer RNG state, ...) so a resumed run can
// continue bit-exactly.
struct Checkpoint {
  NetConfig config;
  Eigen::ArrayXd params;
  std::optional<AdamState> adam;
  std::map<std::string, std::string> blocks;  // 4-char tag -> opaque payload

  DenoiserNet restore_net() const;
};

void save_checkpoint(const std::string& path, const DenoiserNet& net,
                     const AdamState* adam = nullptr,
                     const std::map<std::string, std::string>& blocks = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pdm
