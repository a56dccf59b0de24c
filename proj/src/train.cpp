#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli_common.hpp"
#include "pdm/cli.hpp"
#include "pdm/config.hpp"
#include "pdm/dataio.hpp"
#include "pdm/denoiser.hpp"
#include "pdm/diffusion.hpp"
#include "pdm/error.hpp"
#include "pdm/rng.hpp"
#include "pdm/sampler.hpp"
#include "pdm/schedule.hpp"

// Training command. Determinism contract: the whole loop consumes randomness
// from a single stream in a fixed order (per sample: index, timestep, noise),
// the holdout split and holdout (t, noise) draws come from their own derived
// streams, and checkpoints carry optimizer moments, the loop rng state and
// the importance-sampler window, so a resumed run replays the exact remainder
// of the uninterrupted one.

namespace pdm {

namespace fs = std::filesystem;

ScheduleKind schedule_kind_from(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "cosine") return ScheduleKind::cosine;
  throw ConfigError("schedule.kind must be linear or cosine, got '" + name + "'");
}

BetaSchedule schedule_from_config(const RunConfig& cfg) {
  ScheduleParams params;
  params.beta_start = cfg.get_double("schedule.beta_start");
  params.beta_end = cfg.get_double("schedule.beta_end");
  params.cosine_s = cfg.get_double("schedule.cosine_s");
  int T = static_cast<int>(cfg.get_int("schedule.T"));
  try {
    return make_schedule(schedule_kind_from(cfg.get_string("schedule.kind")), T, params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

ConditionKind condition_kind_from(const std::string& name) {
  if (name == "none") return ConditionKind::none;
  if (name == "class_label") return ConditionKind::class_label;
  if (name == "low_res") return ConditionKind::low_res;
  throw ConfigError("model.conditioning must be none, class_label or low_res, got '" + name +
                    "'");
}

NetConfig net_config_from(const RunConfig& cfg, int channels, int height, int width) {
  NetConfig net;
  net.channels = channels;
  net.height = height;
  net.width = width;
  net.hidden_widths = cfg.get_int_list("model.hidden_widths");
  net.time_embed_dim = static_cast<int>(cfg.get_int("model.time_embed_dim"));
  net.learned_variance = cfg.get_bool("model.learned_variance");
  net.conditioning = condition_kind_from(cfg.get_string("model.conditioning"));
  net.num_classes = static_cast<int>(cfg.get_int("model.num_classes"));
  net.class_embed_dim = static_cast<int>(cfg.get_int("model.class_embed_dim"));
  try {
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return net;
}

NormalizationMode normalization_mode_from(const std::string& name) {
  if (name == "unit_interval") return NormalizationMode::unit_interval;
  if (name == "symmetric") return NormalizationMode::symmetric;
  throw ConfigError("normalization mode must be unit_interval or symmetric, got '" + name + "'");
}

Dataset load_dataset_from_config(const RunConfig& cfg) {
  const std::string path = cfg.get_string("data.path");
  if (path.empty()) throw ConfigError("data.path is required");
  if (!fs::exists(path)) throw DataError("dataset '" + path + "' does not exist");

  // Sniff the magic: PDMT container or big-endian IDX.
  std::ifstream probe(path, std::ios::binary);
  char magic[4] = {};
  probe.read(magic, 4);
  Dataset data;
  if (std::string(magic, 4) == "PDMT") {
    data = load_tensor(path);
    if (!cfg.get_string("data.labels").empty())
      throw ConfigError("data.labels applies to IDX datasets; PDMT carries its own labels");
  } else {
    data = load_idx(path, cfg.get_string("data.labels"));
  }
  return data;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "config.txt");
  if (!os) throw DataError("cannot write resolved config in '" + out_dir + "'");
  os << cfg.resolved_text();
}

namespace {

constexpr std::uint64_t kSplitStream = 0x53504C4954ULL;    // holdout split
constexpr std::uint64_t kHoldoutStream = 0x484F4C44ULL;    // holdout (t, noise) draws
constexpr std::uint64_t kTrainStream = 0x545241494EULL;    // main loop

struct HoldoutFixture {
  std::vector<int> t;                // one timestep per holdout sample
  std::vector<ImageTensor> noise;    // one noise field per holdout sample
};

Condition condition_for(const Dataset& data, const NetConfig& net, int sr_factor, size_t index) {
  switch (net.conditioning) {
    case ConditionKind::none:
      return Condition::none();
    case ConditionKind::class_label:
      if (data.labels.empty())
        throw ConfigError("class_label conditioning needs a labelled dataset");
      return Condition::for_class(data.labels[index]);
    case ConditionKind::low_res:
      return Condition::for_low_res(downsample_mean(data.images[index], sr_factor));
  }
  return Condition::none();
}

struct EpochLoss {
  double total = 0.0, mse = 0.0, vlb = 0.0;
};

EpochLoss holdout_eval(const DenoiserNet& net, const Dataset& data,
                       const std::vector<int>& holdout, const HoldoutFixture& fix,
                       const BetaSchedule& schedule, double lambda, int sr_factor) {
  EpochLoss acc;
  for (size_t i = 0; i < holdout.size(); ++i) {
    const ImageTensor& x0 = data.images[static_cast<size_t>(holdout[i])];
    ImageTensor x_t = forward_marginal(x0, fix.t[i], schedule, fix.noise[i]);
    NoisePrediction pred =
        net_forward(net, x_t, fix.t[i], condition_for(data, net.config(), sr_factor,
                                                      static_cast<size_t>(holdout[i])));
    HybridLoss loss = hybrid_loss(fix.noise[i], pred, x0, x_t, fix.t[i], schedule, lambda);
    acc.total += loss.total;
    acc.mse += loss.mse;
    acc.vlb += loss.vlb;
  }
  double n = static_cast<double>(holdout.size());
  return {acc.total / n, acc.mse / n, acc.vlb / n};
}

std::string progress_block(int epoch, long long step) {
  std::ostringstream os;
  os << epoch << " " << step;
  return os.str();
}

}  // namespace

int cmd_train(const RunConfig& cfg, const std::string& out_dir, bool quiet,
              const std::string& resume_path) {
  write_resolved_config(cfg, out_dir);
  const BetaSchedule schedule = schedule_from_config(cfg);
  const int T = schedule.num_steps();

  Dataset data = load_dataset_from_config(cfg);
  const std::string norm = cfg.get_string("data.normalization");
  if (norm != "none") {
    data = normalize(data, normalization_mode_from(norm));
    save_ledger((fs::path(out_dir) / "ledger.csv").string(), data.ledger);
  }
  if (data.count() < 2) throw DataError("training needs at least 2 samples");

  const auto& shape0 = data.images[0];
  NetConfig net_cfg = net_config_from(cfg, shape0.channels, shape0.height, shape0.width);
  const int sr_factor = static_cast<int>(cfg.get_int("model.sr_factor"));
  if (net_cfg.conditioning == ConditionKind::low_res &&
      (shape0.height % sr_factor != 0 || shape0.width % sr_factor != 0))
    throw ConfigError("model.sr_factor must divide the image dims");

  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("train.seed"));
  const int epochs = static_cast<int>(cfg.get_int("train.epochs"));
  const int batch = static_cast<int>(cfg.get_int("train.batch"));
  const double lr = cfg.get_double("train.lr");
  const double lambda = cfg.get_double("train.lambda");
  const bool importance = cfg.get_bool("train.importance_sampling");
  const double holdout_fraction = cfg.get_double("train.holdout_fraction");
  const int log_every = static_cast<int>(cfg.get_int("train.log_every"));
  const int checkpoint_every = static_cast<int>(cfg.get_int("train.checkpoint_every"));
  if (epochs < 1 || batch < 1) throw ConfigError("train.epochs and train.batch must be positive");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ConfigError("train.holdout_fraction must be in [0, 1)");

  // Deterministic holdout split.
  std::vector<int> order(static_cast<size_t>(data.count()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  {
    Rng split_rng(derive_stream(seed, kSplitStream));
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(split_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
  }
  int n_holdout = static_cast<int>(std::lround(holdout_fraction * data.count()));
  if (holdout_fraction > 0.0 && n_holdout == 0) n_holdout = 1;
  if (data.count() - n_holdout < 1) throw ConfigError("holdout fraction leaves no training data");
  std::vector<int> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<int> train(order.begin() + n_holdout, order.end());

  // Fixed holdout fixture (same t and noise every epoch) for low-variance
  // epoch-to-epoch comparisons.
  HoldoutFixture fix;
  {
    Rng hrng(derive_stream(seed, kHoldoutStream));
    fix.t.resize(holdout.size());
    fix.noise.reserve(holdout.size());
    for (size_t i = 0; i < holdout.size(); ++i) {
      fix.t[i] = static_cast<int>(hrng.uniform_int(static_cast<std::uint64_t>(T))) + 1;
      ImageTensor noise(shape0.channels, shape0.height, shape0.width);
      hrng.fill_normal(noise.data);
      fix.noise.push_back(std::move(noise));
    }
  }

  DenoiserNet net(net_cfg, static_cast<std::uint64_t>(cfg.get_int("model.init_seed")));
  Eigen::ArrayXd params = net.parameters();
  AdamState adam;
  ImportanceSampler sampler(T);
  Rng rng(derive_stream(seed, kTrainStream));
  int start_epoch = 0;
  long long global_step = 0;

  if (!resume_path.empty()) {
    Checkpoint ck = load_checkpoint(resume_path);
    if (ck.config.input_size() != net_cfg.input_size() ||
        ck.config.output_size() != net_cfg.output_size() ||
        ck.config.hidden_widths != net_cfg.hidden_widths)
      throw ConfigError("resume checkpoint architecture does not match the config");
    params = ck.params;
    if (ck.adam) adam = *ck.adam;
    auto rng_it = ck.blocks.find("TRNG");
    if (rng_it == ck.blocks.end())
      throw DataError("resume checkpoint lacks trainer rng state (not a training checkpoint)");
    rng.restore_state(rng_it->second);
    if (auto it = ck.blocks.find("ISMP"); it != ck.blocks.end()) {
      std::istringstream is(it->second);
      sampler = ImportanceSampler::load(is);
    }
    auto prog = ck.blocks.find("PROG");
    if (prog == ck.blocks.end()) throw DataError("resume checkpoint lacks progress record");
    std::istringstream ps(prog->second);
    ps >> start_epoch >> global_step;
    if (ps.fail()) throw DataError("resume checkpoint has a malformed progress record");
  }
  net.set_parameters(params);

  std::ofstream loss_csv(fs::path(out_dir) / "loss.csv");
  std::ofstream heldout_csv(fs::path(out_dir) / "heldout.csv");
  if (!loss_csv || !heldout_csv) throw DataError("cannot open loss CSVs in '" + out_dir + "'");
  loss_csv << "epoch,step,total,mse,vlb\n";
  heldout_csv << "epoch,step,total,mse,vlb\n";
  loss_csv.precision(12);
  heldout_csv.precision(12);

  auto eval_holdout = [&](int epoch) {
    if (holdout.empty()) return;
    EpochLoss h = holdout_eval(net, data, holdout, fix, schedule, lambda, sr_factor);
    heldout_csv << epoch << "," << global_step << "," << h.total << "," << h.mse << "," << h.vlb
                << "\n";
    heldout_csv.flush();
    if (!quiet)
      std::cout << "epoch " << epoch << " heldout total " << h.total << " mse " << h.mse
                << " vlb " << h.vlb << "\n";
  };

  auto save_state = [&](const std::string& name, int completed_epoch) {
    std::map<std::string, std::string> blocks;
    blocks["TRNG"] = rng.save_state();
    if (importance) {
      std::ostringstream os;
      sampler.save(os);
      blocks["ISMP"] = os.str();
    }
    blocks["PROG"] = progress_block(completed_epoch, global_step);
    net.set_parameters(params);
    save_checkpoint((fs::path(out_dir) / name).string(), net, &adam, blocks);
  };

  if (start_epoch == 0) eval_holdout(0);  // loss at initialization

  const int steps_per_epoch =
      static_cast<int>((train.size() + static_cast<size_t>(batch) - 1) / static_cast<size_t>(batch));

  for (int epoch = start_epoch; epoch < epochs; ++epoch) {
    for (int step = 0; step < steps_per_epoch; ++step) {
      Eigen::ArrayXd grad_acc = Eigen::ArrayXd::Zero(params.size());
      double total_acc = 0.0, mse_acc = 0.0, vlb_acc = 0.0;
      net.set_parameters(params);

      for (int b = 0; b < batch; ++b) {
        size_t idx = static_cast<size_t>(
            train[static_cast<size_t>(rng.uniform_int(train.size()))]);
        auto [t, weight] = importance ? sampler.draw(rng)
                                      : std::pair<int, double>{
                                            static_cast<int>(rng.uniform_int(
                                                static_cast<std::uint64_t>(T))) + 1,
                                            1.0};
        const ImageTensor& x0 = data.images[idx];
        ImageTensor noise(x0.channels, x0.height, x0.width);
        rng.fill_normal(noise.data);
        ImageTensor x_t = forward_marginal(x0, t, schedule, noise);

        Condition cond = condition_for(data, net_cfg, sr_factor, idx);
        NoisePrediction pred = net_forward(net, x_t, t, cond);
        HybridLossGrad lg = hybrid_loss_grad(noise, pred, x0, x_t, t, schedule, lambda);
        if (!std::isfinite(lg.value.total))
          throw NumericError("training: non-finite loss at step " + std::to_string(global_step) +
                             " (epoch " + std::to_string(epoch) + ", t = " + std::to_string(t) +
                             ")");
        grad_acc += weight * net_backward(net, x_t, t, cond, lg.d_eps, lg.d_v);
        total_acc += lg.value.total;
        mse_acc += lg.value.mse;
        vlb_acc += lg.value.vlb;
        if (importance) sampler.record(t, lg.value.total);
      }

      grad_acc /= static_cast<double>(batch);
      adam_step(params, grad_acc, adam, lr);
      ++global_step;

      if (log_every > 0 && global_step % log_every == 0) {
        loss_csv << epoch << "," << global_step << "," << total_acc / batch << ","
                 << mse_acc / batch << "," << vlb_acc / batch << "\n";
      }
    }
    net.set_parameters(params);
    eval_holdout(epoch + 1);
    if (checkpoint_every > 0 && (epoch + 1) % checkpoint_every == 0 && epoch + 1 < epochs)
      save_state("checkpoint_ep" + std::to_string(epoch + 1) + ".pdmw", epoch + 1);
  }

  save_state("model.pdmw", epochs);
  if (!quiet)
    std::cout << "trained " << epochs << " epochs (" << global_step << " steps), model at "
              << (fs::path(out_dir) / "model.pdmw").string() << "\n";
  return 0;
}

}  // namespace pdm
