#include "pdm/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "pdm/error.hpp"
#include "pdm/io_util.hpp"
#include "pdm/rng.hpp"

namespace pdm {

int NetConfig::condition_size() const {
  switch (conditioning) {
    case ConditionKind::none:
      return 0;
    case ConditionKind::class_label:
      return class_embed_dim;
    case ConditionKind::low_res:
      return pixels();
  }
  return 0;
}

void NetConfig::validate() const {
  if (channels < 1 || height < 1 || width < 1)
    throw std::invalid_argument("NetConfig: image dimensions must be positive");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
    throw std::invalid_argument("NetConfig: time_embed_dim must be even and at least 2");
  for (int w : hidden_widths)
    if (w < 1) throw std::invalid_argument("NetConfig: hidden widths must be positive");
  if (conditioning == ConditionKind::class_label) {
    if (num_classes < 1) throw std::invalid_argument("NetConfig: num_classes must be positive");
    if (class_embed_dim < 1)
      throw std::invalid_argument("NetConfig: class_embed_dim must be positive");
  }
}

Eigen::VectorXd time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("time_embedding: dim must be even and at least 2");
  const int half = dim / 2;
  Eigen::VectorXd emb(dim);
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
    emb[i] = std::sin(t * freq);
    emb[half + i] = std::cos(t * freq);
  }
  return emb;
}

ImageTensor upsample_nearest(const ImageTensor& img, int height, int width) {
  if (height % img.height != 0 || width % img.width != 0)
    throw std::invalid_argument("upsample_nearest: source dims must divide target dims");
  const int fy = height / img.height;
  const int fx = width / img.width;
  ImageTensor out(img.channels, height, width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out(c, y, x) = img(c, y / fy, x / fx);
  return out;
}

ImageTensor downsample_mean(const ImageTensor& img, int factor) {
  if (factor < 1 || img.height % factor != 0 || img.width % factor != 0)
    throw std::invalid_argument("downsample_mean: factor must divide both spatial dims");
  ImageTensor out(img.channels, img.height / factor, img.width / factor);
  const double inv = 1.0 / (factor * factor);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) acc += img(c, y * factor + dy, x * factor + dx);
        out(c, y, x) = acc * inv;
      }
  return out;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

DenoiserNet::DenoiserNet(NetConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  dims_.push_back(config_.input_size());
  for (int w : config_.hidden_widths) dims_.push_back(w);
  dims_.push_back(config_.output_size());

  Eigen::Index total = 0;
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    w_off_.push_back(total);
    total += static_cast<Eigen::Index>(dims_[l + 1]) * dims_[l];
    b_off_.push_back(total);
    total += dims_[l + 1];
  }
  embed_off_ = total;
  if (config_.conditioning == ConditionKind::class_label)
    total += static_cast<Eigen::Index>(config_.num_classes) * config_.class_embed_dim;

  params_.resize(total);
  Rng rng(init_seed);
  for (size_t l = 0; l + 1 < dims_.size(); ++l) {
    double scale = std::sqrt(2.0 / dims_[l]);  // He init, matches the SiLU body
    Eigen::Index n_w = static_cast<Eigen::Index>(dims_[l + 1]) * dims_[l];
    for (Eigen::Index i = 0; i < n_w; ++i) params_[w_off_[l] + i] = scale * rng.normal();
    for (Eigen::Index i = 0; i < dims_[l + 1]; ++i) params_[b_off_[l] + i] = 0.0;
  }
  for (Eigen::Index i = embed_off_; i < total; ++i) params_[i] = 0.1 * rng.normal();
}

void DenoiserNet::set_parameters(const Eigen::ArrayXd& p) {
  if (p.size() != params_.size())
    throw std::invalid_argument("DenoiserNet: parameter vector has wrong size");
  params_ = p;
}

Eigen::Map<const Eigen::MatrixXd> DenoiserNet::weight(int layer) const {
  return {params_.data() + w_off_[static_cast<size_t>(layer)], dims_[static_cast<size_t>(layer) + 1],
          dims_[static_cast<size_t>(layer)]};
}

Eigen::Map<const Eigen::VectorXd> DenoiserNet::bias(int layer) const {
  return {params_.data() + b_off_[static_cast<size_t>(layer)], dims_[static_cast<size_t>(layer) + 1]};
}

Eigen::VectorXd DenoiserNet::assemble_input(const ImageTensor& x_t, int t,
                                            const Condition& cond) const {
  if (x_t.channels != config_.channels || x_t.height != config_.height ||
      x_t.width != config_.width)
    throw std::invalid_argument("DenoiserNet: input shape differs from the configured shape");
  if (cond.kind != config_.conditioning)
    throw std::invalid_argument("DenoiserNet: condition kind differs from the configured kind");

  Eigen::VectorXd u(config_.input_size());
  u.head(config_.pixels()) = x_t.data.matrix();
  u.segment(config_.pixels(), config_.time_embed_dim) = time_embedding(t, config_.time_embed_dim);

  if (config_.conditioning == ConditionKind::class_label) {
    if (cond.class_id < 0 || cond.class_id >= config_.num_classes)
      throw std::invalid_argument("DenoiserNet: class_id " + std::to_string(cond.class_id) +
                                  " outside 0.." + std::to_string(config_.num_classes - 1));
    Eigen::Map<const Eigen::MatrixXd> table(params_.data() + embed_off_, config_.num_classes,
                                            config_.class_embed_dim);
    u.tail(config_.class_embed_dim) = table.row(cond.class_id).transpose();
  } else if (config_.conditioning == ConditionKind::low_res) {
    if (cond.low_res.channels != config_.channels)
      throw std::invalid_argument("DenoiserNet: low_res channel count mismatch");
    ImageTensor up = upsample_nearest(cond.low_res, config_.height, config_.width);
    u.tail(config_.pixels()) = up.data.matrix();
  }
  return u;
}

NoisePrediction net_forward(const DenoiserNet& net, const ImageTensor& x_t, int t,
                            const Condition& cond) {
  Eigen::VectorXd a = net.assemble_input(x_t, t, cond);
  const int L = net.num_layers();
  for (int l = 0; l < L; ++l) {
    Eigen::VectorXd z = net.weight(l) * a + net.bias(l);
    if (l + 1 < L)
      a = z.unaryExpr([](double x) { return silu(x); });
    else
      a = std::move(z);
  }

  const int D = net.config().pixels();
  ImageTensor eps(net.config().channels, net.config().height, net.config().width);
  eps.data = a.head(D).array();
  if (!net.config().learned_variance) return NoisePrediction(std::move(eps));

  ImageTensor v(net.config().channels, net.config().height, net.config().width);
  v.data = a.tail(D).array().unaryExpr([](double x) { return sigmoid(x); });
  return {std::move(eps), std::move(v)};
}

Eigen::ArrayXd net_backward(const DenoiserNet& net, const ImageTensor& x_t, int t,
                            const Condition& cond, const Eigen::ArrayXd& d_eps,
                            const Eigen::ArrayXd& d_v) {
  const NetConfig& cfg = net.config();
  const int D = cfg.pixels();
  if (d_eps.size() != D) throw std::invalid_argument("net_backward: d_eps has wrong size");
  if (cfg.learned_variance ? d_v.size() != D : d_v.size() != 0)
    throw std::invalid_argument("net_backward: d_v size does not match the variance head");

  // Forward pass with caches.
  const int L = net.num_layers();
  std::vector<Eigen::VectorXd> act(static_cast<size_t>(L) + 1);
  std::vector<Eigen::VectorXd> pre(static_cast<size_t>(L));
  act[0] = net.assemble_input(x_t, t, cond);
  for (int l = 0; l < L; ++l) {
    pre[static_cast<size_t>(l)] = net.weight(l) * act[static_cast<size_t>(l)] + net.bias(l);
    act[static_cast<size_t>(l) + 1] =
        l + 1 < L ? pre[static_cast<size_t>(l)].unaryExpr([](double x) { return silu(x); })
                  : pre[static_cast<size_t>(l)];
  }

  // Upstream gradient at the raw output; the v head folds in the sigmoid.
  Eigen::VectorXd g(cfg.output_size());
  g.head(D) = d_eps.matrix();
  if (cfg.learned_variance) {
    for (int i = 0; i < D; ++i) {
      double s = sigmoid(pre.back()[D + i]);
      g[D + i] = d_v[i] * s * (1.0 - s);
    }
  }

  Eigen::ArrayXd grad = Eigen::ArrayXd::Zero(net.parameter_count());
  for (int l = L - 1; l >= 0; --l) {
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + net.w_off_[static_cast<size_t>(l)],
                                   net.dims_[static_cast<size_t>(l) + 1],
                                   net.dims_[static_cast<size_t>(l)]);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.b_off_[static_cast<size_t>(l)],
                                   net.dims_[static_cast<size_t>(l) + 1]);
    gW.noalias() = g * act[static_cast<size_t>(l)].transpose();
    gb = g;
    Eigen::VectorXd g_in = net.weight(l).transpose() * g;
    if (l > 0) {
      g = g_in.cwiseProduct(pre[static_cast<size_t>(l) - 1].unaryExpr(
          [](double x) { return silu_grad(x); }));
    } else if (cfg.conditioning == ConditionKind::class_label) {
      Eigen::Map<Eigen::MatrixXd> gTable(grad.data() + net.embed_off_, cfg.num_classes,
                                         cfg.class_embed_dim);
      gTable.row(cond.class_id) = g_in.tail(cfg.class_embed_dim).transpose();
    }
  }
  return grad;
}

NoisePrediction oracle_predict(const ImageTensor& x_t, int t, const BetaSchedule& schedule,
                               double mu0, double sigma0_sq) {
  if (!(sigma0_sq >= 0.0))
    throw std::invalid_argument("oracle_predict: sigma0_sq must be non-negative");
  const double bar = schedule.alpha_bar_at(t);
  // E[eps | x_t] under x0 ~ N(mu0, sigma0_sq I): posterior shrinkage of the
  // forward marginal, solved for the noise.
  const double denom = bar * sigma0_sq + 1.0 - bar;
  ImageTensor eps = x_t;
  eps.data = std::sqrt(1.0 - bar) * (x_t.data - std::sqrt(bar) * mu0) / denom;
  return NoisePrediction(std::move(eps));
}

void adam_step(Eigen::ArrayXd& params, const Eigen::ArrayXd& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grad.size() != params.size())
    throw std::invalid_argument("adam_step: gradient size does not match parameters");
  if (state.m.size() == 0) {
    state.m = Eigen::ArrayXd::Zero(params.size());
    state.v = Eigen::ArrayXd::Zero(params.size());
    state.step = 0;
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state size does not match parameters");

  state.step += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.square();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params -= lr * (state.m / c1) / ((state.v / c2).sqrt() + eps);
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void write_net_config(std::ostream& os, const NetConfig& c) {
  io::write_u32(os, static_cast<std::uint32_t>(c.channels));
  io::write_u32(os, static_cast<std::uint32_t>(c.height));
  io::write_u32(os, static_cast<std::uint32_t>(c.width));
  io::write_u32(os, static_cast<std::uint32_t>(c.time_embed_dim));
  io::write_u32(os, static_cast<std::uint32_t>(c.hidden_widths.size()));
  for (int w : c.hidden_widths) io::write_u32(os, static_cast<std::uint32_t>(w));
  io::write_u32(os, c.learned_variance ? 1u : 0u);
  io::write_u32(os, static_cast<std::uint32_t>(c.conditioning));
  io::write_u32(os, static_cast<std::uint32_t>(c.num_classes));
  io::write_u32(os, static_cast<std::uint32_t>(c.class_embed_dim));
}

NetConfig read_net_config(std::istream& is, const std::string& ctx) {
  NetConfig c;
  c.channels = static_cast<int>(io::read_u32(is, ctx));
  c.height = static_cast<int>(io::read_u32(is, ctx));
  c.width = static_cast<int>(io::read_u32(is, ctx));
  c.time_embed_dim = static_cast<int>(io::read_u32(is, ctx));
  std::uint32_t n_hidden = io::read_u32(is, ctx);
  if (n_hidden > 64) throw DataError(ctx + ": implausible hidden layer count");
  c.hidden_widths.resize(n_hidden);
  for (auto& w : c.hidden_widths) w = static_cast<int>(io::read_u32(is, ctx));
  c.learned_variance = io::read_u32(is, ctx) != 0;
  std::uint32_t kind = io::read_u32(is, ctx);
  if (kind > 2) throw DataError(ctx + ": unknown conditioning kind " + std::to_string(kind));
  c.conditioning = static_cast<ConditionKind>(kind);
  c.num_classes = static_cast<int>(io::read_u32(is, ctx));
  c.class_embed_dim = static_cast<int>(io::read_u32(is, ctx));
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const DenoiserNet& net, const AdamState* adam,
                     const std::map<std::string, std::string>& blocks) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("save_checkpoint: cannot open '" + path + "' for writing");
  os.write("PDMW", 4);
  io::write_u32(os, kCheckpointVersion);
  write_net_config(os, net.config());
  io::write_u64(os, static_cast<std::uint64_t>(net.parameter_count()));
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i)
    io::write_f64(os, net.parameters()[i]);

  if (adam) {
    if (adam->m.size() != net.parameter_count() || adam->v.size() != net.parameter_count())
      throw std::invalid_argument("save_checkpoint: adam state size mismatch");
    os.write("ADAM", 4);
    io::write_u64(os, 8 + 16 * static_cast<std::uint64_t>(net.parameter_count()));
    io::write_u64(os, static_cast<std::uint64_t>(adam->step));
    for (Eigen::Index i = 0; i < adam->m.size(); ++i) io::write_f64(os, adam->m[i]);
    for (Eigen::Index i = 0; i < adam->v.size(); ++i) io::write_f64(os, adam->v[i]);
  }
  for (const auto& [tag, payload] : blocks) {
    if (tag.size() != 4)
      throw std::invalid_argument("save_checkpoint: block tag must be 4 characters");
    os.write(tag.data(), 4);
    io::write_u64(os, payload.size());
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!os) throw DataError("save_checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_checkpoint: cannot open '" + path + "'");
  const std::string ctx = "checkpoint '" + path + "'";
  io::expect_magic(is, "PDMW", ctx);
  std::uint32_t version = io::read_u32(is, ctx);
  if (version != kCheckpointVersion)
    throw DataError(ctx + ": unsupported version " + std::to_string(version));

  Checkpoint ck;
  ck.config = read_net_config(is, ctx);
  std::uint64_t count = io::read_u64(is, ctx);
  DenoiserNet probe(ck.config, 0);
  if (count != static_cast<std::uint64_t>(probe.parameter_count()))
    throw DataError(ctx + ": parameter count " + std::to_string(count) +
                    " does not match the architecture (" +
                    std::to_string(probe.parameter_count()) + ")");
  ck.params.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i)
    ck.params[static_cast<Eigen::Index>(i)] = io::read_f64(is, ctx);
  if (!ck.params.isFinite().all()) throw DataError(ctx + ": non-finite parameter values");

  while (true) {
    char tag[4];
    is.read(tag, 4);
    if (is.gcount() == 0 && is.eof()) break;
    if (is.gcount() != 4) throw DataError(ctx + ": truncated block tag");
    std::uint64_t size = io::read_u64(is, ctx);
    std::string payload(size, '\0');
    io::read_bytes(is, payload.data(), size, ctx);
    std::string name(tag, 4);
    if (name == "ADAM") {
      if (size != 8 + 16 * count) throw DataError(ctx + ": ADAM block has wrong size");
      AdamState adam;
      adam.m.resize(static_cast<Eigen::Index>(count));
      adam.v.resize(static_cast<Eigen::Index>(count));
      const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
      auto take_u64 = [&p]() {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        p += 8;
        return v;
      };
      adam.step = static_cast<std::int64_t>(take_u64());
      for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t bits = take_u64();
        std::memcpy(&adam.m[static_cast<Eigen::Index>(i)], &bits, 8);
      }
      for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t bits = take_u64();
        std::memcpy(&adam.v[static_cast<Eigen::Index>(i)], &bits, 8);
      }
      ck.adam = std::move(adam);
    } else {
      ck.blocks[name] = std::move(payload);
    }
  }
  return ck;
}

DenoiserNet Checkpoint::restore_net() const {
  DenoiserNet net(config, 0);
  net.set_parameters(params);
  return net;
}

}  // namespace pdm
