#include "vimp/cae.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace vimp::cae {

using nlohmann::json;

std::string to_string(Arch a) { return a == Arch::cae_b ? "cae_b" : "cae"; }
std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::none: return "none";
    case Conditioning::sl: return "sl";
    case Conditioning::dl: return "dl";
    case Conditioning::sdl: return "sdl";
  }
  return "?";
}
std::string to_string(DecoderMode d) {
  return d == DecoderMode::upsample_conv ? "upsample_conv" : "transposed_conv";
}
std::string to_string(EncoderDownsample e) {
  return e == EncoderDownsample::stride2 ? "stride2" : "maxpool";
}

Arch parse_arch(const std::string& s) {
  if (s == "cae_b") return Arch::cae_b;
  if (s == "cae") return Arch::cae;
  throw ConfigError("unknown arch '" + s + "'");
}
Conditioning parse_conditioning(const std::string& s) {
  if (s == "none") return Conditioning::none;
  if (s == "sl") return Conditioning::sl;
  if (s == "dl") return Conditioning::dl;
  if (s == "sdl") return Conditioning::sdl;
  throw ConfigError("unknown conditioning '" + s + "'");
}
DecoderMode parse_decoder_mode(const std::string& s) {
  if (s == "upsample_conv") return DecoderMode::upsample_conv;
  if (s == "transposed_conv") return DecoderMode::transposed_conv;
  throw ConfigError("unknown decoder mode '" + s + "'");
}
EncoderDownsample parse_encoder_downsample(const std::string& s) {
  if (s == "stride2") return EncoderDownsample::stride2;
  if (s == "maxpool") return EncoderDownsample::maxpool;
  throw ConfigError("unknown encoder downsample '" + s + "'");
}

ModelConfig ModelConfig::defaults(Arch a) {
  ModelConfig c;
  c.arch = a;
  if (a == Arch::cae_b) {
    c.filters = {8, 16, 24, 32};
    c.kernel = 10;
    c.encoder = EncoderDownsample::stride2;
    c.decoder = DecoderMode::upsample_conv;
  } else {
    c.filters = {8, 16, 32, 64};
    c.kernel = 9;
    c.encoder = EncoderDownsample::maxpool;
    c.decoder = DecoderMode::upsample_conv;
  }
  return c;
}

void ModelConfig::validate() const {
  for (int f : filters)
    if (f < 1) throw ConfigError("filter counts must be positive");
  if (kernel < 2 || kernel > 16)
    throw ConfigError("kernel size " + std::to_string(kernel) +
                      " breaks the 128->8 halving chain (supported: 2..16)");
  if (latent != 32) throw ConfigError("latent size must be 32");
  if (kl_weight < 0.0) throw ConfigError("kl_weight must be >= 0");
}

int ModelConfig::condition_dim() const {
  switch (conditioning) {
    case Conditioning::none: return 0;
    case Conditioning::sl: return 2;
    case Conditioning::dl: return 4;
    case Conditioning::sdl: return 8;
  }
  return 0;
}

std::string ModelConfig::to_json() const {
  json j;
  j["arch"] = to_string(arch);
  j["conditioning"] = to_string(conditioning);
  j["variational"] = variational;
  j["decoder"] = to_string(decoder);
  j["encoder"] = to_string(encoder);
  j["filters"] = filters;
  j["kernel"] = kernel;
  j["latent"] = latent;
  j["kl_weight"] = kl_weight;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.conditioning = parse_conditioning(j.at("conditioning").get<std::string>());
  c.variational = j.at("variational").get<bool>();
  c.decoder = parse_decoder_mode(j.at("decoder").get<std::string>());
  c.encoder = parse_encoder_downsample(j.at("encoder").get<std::string>());
  auto f = j.at("filters").get<std::vector<int>>();
  if (f.size() != 4) throw ConfigError("filters must have 4 entries");
  std::copy(f.begin(), f.end(), c.filters.begin());
  c.kernel = j.at("kernel").get<int>();
  c.latent = j.at("latent").get<int>();
  c.kl_weight = j.at("kl_weight").get<double>();
  c.validate();
  return c;
}

int condition_index(const ModelConfig& cfg, dataio::SoundType st, dataio::DrumType dt) {
  const int drum_idx = static_cast<int>(dt);
  switch (cfg.conditioning) {
    case Conditioning::none: return -1;
    case Conditioning::sl: return st == dataio::SoundType::drum ? 0 : 1;
    case Conditioning::dl: return drum_idx;
    case Conditioning::sdl: return (st == dataio::SoundType::drum ? 0 : 4) + drum_idx;
  }
  return -1;
}

namespace {

struct Pads {
  int lo = 0, hi = 0;
};

// 'same' padding for stride-1 convs; asymmetric for even kernels.
Pads same_pads(int k) { return {(k - 1) / 2, (k - 1) - (k - 1) / 2}; }

// symmetric padding that halves even inputs exactly at stride 2
int halving_pad(int k) { return k % 2 ? (k - 1) / 2 : k / 2 - 1; }

}  // namespace

template <typename Real>
Cae<Real>::Cae(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(init_seed);

  auto add_param = [&](const std::string& name, std::vector<int> shape, int fan_in) {
    nn::Tensor<Real> t(std::move(shape));
    if (fan_in > 0) {
      const double bound = std::sqrt(6.0 / fan_in);
      for (auto& v : t.data) v = static_cast<Real>(rng.uniform(-bound, bound));
    }
    params_.push_back({name, std::move(t)});
  };

  const auto& f = cfg_.filters;
  const int k = cfg_.kernel;
  const int flat = kBottomSize * kBottomSize * f[3];
  const int cdim = cfg_.condition_dim();

  int c_in = 1;
  for (int i = 0; i < 4; ++i) {
    add_param("enc" + std::to_string(i) + ".w", {f[i], c_in, k, k}, c_in * k * k);
    add_param("enc" + std::to_string(i) + ".b", {f[i]}, 0);
    c_in = f[i];
  }

  const int head_in = cfg_.arch == Arch::cae_b ? 128 : flat + cdim;
  if (cfg_.arch == Arch::cae_b) {
    add_param("enc_pre.w", {128, flat + cdim}, flat + cdim);
    add_param("enc_pre.b", {128}, 0);
  }
  if (cfg_.variational) {
    add_param("enc_mu.w", {cfg_.latent, head_in}, head_in);
    add_param("enc_mu.b", {cfg_.latent}, 0);
    add_param("enc_lv.w", {cfg_.latent, head_in}, head_in);
    add_param("enc_lv.b", {cfg_.latent}, 0);
  } else {
    add_param("enc_lat.w", {cfg_.latent, head_in}, head_in);
    add_param("enc_lat.b", {cfg_.latent}, 0);
  }

  add_param("dec_in.w", {flat, cfg_.latent + cdim}, cfg_.latent + cdim);
  add_param("dec_in.b", {flat}, 0);

  for (int i = 3; i >= 0; --i) {
    const int in_ch = f[i];
    const int out_ch = i > 0 ? f[i - 1] : 1;
    const std::string name = "dec" + std::to_string(3 - i);
    if (cfg_.decoder == DecoderMode::transposed_conv) {
      add_param(name + ".w", {in_ch, out_ch, k, k}, in_ch * k * k);
    } else {
      add_param(name + ".w", {out_ch, in_ch, k, k}, in_ch * k * k);
    }
    add_param(name + ".b", {out_ch}, 0);
  }
}

template <typename Real>
std::int64_t Cae<Real>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename Real>
void Cae<Real>::set_params(const std::vector<nn::NamedTensor>& named) {
  for (auto& p : params_) {
    const nn::NamedTensor* src = nullptr;
    for (const auto& t : named)
      if (t.name == p.name) {
        src = &t;
        break;
      }
    if (!src) throw ValidationError("checkpoint is missing parameter '" + p.name + "'");
    if (src->shape != p.value.shape)
      throw ValidationError("checkpoint parameter '" + p.name + "' has wrong shape");
    for (std::size_t i = 0; i < p.value.data.size(); ++i)
      p.value.data[i] = static_cast<Real>(src->data[i]);
  }
}

template <typename Real>
std::vector<nn::NamedTensor> Cae<Real>::named_params() const {
  std::vector<nn::NamedTensor> out;
  for (const auto& p : params_) {
    nn::NamedTensor t;
    t.name = p.name;
    t.shape = p.value.shape;
    t.data.resize(p.value.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(p.value.data[i]);
    out.push_back(std::move(t));
  }
  return out;
}

template <typename Real>
nn::Value Cae<Real>::onehot_leaf(nn::Tape<Real>& tape, const std::vector<int>& cond) const {
  const int cdim = cfg_.condition_dim();
  nn::Tensor<Real> oh({static_cast<int>(cond.size()), cdim});
  for (std::size_t i = 0; i < cond.size(); ++i) {
    if (cond[i] < 0 || cond[i] >= cdim)
      throw ValidationError("conditional model requires a label slot in [0," + std::to_string(cdim) +
                            "), got " + std::to_string(cond[i]));
    oh[static_cast<std::int64_t>(i) * cdim + cond[i]] = Real(1);
  }
  return tape.leaf(std::move(oh), false);
}

template <typename Real>
typename Cae<Real>::ForwardOut Cae<Real>::forward(nn::Tape<Real>& tape, nn::Value x,
                                                  const std::vector<int>& cond,
                                                  const nn::Tensor<Real>* eps) const {
  const auto& xt = tape.value(x);
  if (xt.ndim() != 4 || xt.dim(1) != 1 || xt.dim(2) != kImageSize || xt.dim(3) != kImageSize)
    throw ValidationError("cae: input must be [N,1,128,128], got " + xt.shape_str());
  const int n = xt.dim(0);
  if (static_cast<int>(cond.size()) != n) throw ValidationError("cae: one condition slot per sample");
  const int cdim = cfg_.condition_dim();
  if (cdim == 0)
    for (int c : cond)
      if (c >= 0) throw ValidationError("unconditional model rejects condition labels");

  // fresh handles for this tape
  param_handles_.clear();
  for (const auto& p : params_) param_handles_.push_back(tape.leaf(p.value, true));
  auto ph = [&](const std::string& name) -> nn::Value {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return param_handles_[i];
    throw ValidationError("unknown parameter '" + name + "'");
  };

  const int k = cfg_.kernel;
  const auto sp = same_pads(k);

  // encoder
  nn::Value h = x;
  for (int i = 0; i < 4; ++i) {
    const std::string nm = "enc" + std::to_string(i);
    if (cfg_.encoder == EncoderDownsample::stride2) {
      h = tape.conv2d(h, ph(nm + ".w"), ph(nm + ".b"), 2, halving_pad(k));
      h = tape.relu(h);
    } else {
      h = tape.conv2d_asym(h, ph(nm + ".w"), ph(nm + ".b"), 1, sp.lo, sp.hi, sp.lo, sp.hi);
      h = tape.relu(h);
      h = tape.max_pool2(h);
    }
  }

  const int flat = kBottomSize * kBottomSize * cfg_.filters[3];
  nn::Value z_in = tape.reshape(h, {n, flat});
  nn::Value onehot{};
  if (cdim > 0) {
    onehot = onehot_leaf(tape, cond);
    z_in = tape.concat_cols(z_in, onehot);
  }
  if (cfg_.arch == Arch::cae_b)
    z_in = tape.relu(tape.dense(z_in, ph("enc_pre.w"), ph("enc_pre.b")));

  ForwardOut out;
  nn::Value z{};
  if (cfg_.variational) {
    nn::Value mu = tape.dense(z_in, ph("enc_mu.w"), ph("enc_mu.b"));
    nn::Value lv = tape.dense(z_in, ph("enc_lv.w"), ph("enc_lv.b"));
    out.latent = mu;
    out.kl = tape.kl_diag_gauss(mu, lv);
    if (eps) {
      if (eps->shape != std::vector<int>{n, cfg_.latent})
        throw ValidationError("cae: eps must be [N,latent]");
      nn::Value noise = tape.leaf(*eps, false);
      z = tape.add(mu, tape.mul(noise, tape.exp(tape.scale(lv, Real(0.5)))));
    } else {
      z = mu;
    }
  } else {
    z = tape.dense(z_in, ph("enc_lat.w"), ph("enc_lat.b"));
    out.latent = z;
  }

  // decoder
  nn::Value d = cdim > 0 ? tape.concat_cols(z, onehot) : z;
  d = tape.relu(tape.dense(d, ph("dec_in.w"), ph("dec_in.b")));
  d = tape.reshape(d, {n, cfg_.filters[3], kBottomSize, kBottomSize});
  for (int i = 0; i < 4; ++i) {
    const std::string nm = "dec" + std::to_string(i);
    if (cfg_.decoder == DecoderMode::transposed_conv) {
      const int p = (k - 1) / 2;
      const int op = 2 + 2 * p - k;
      d = tape.conv2d_transpose(d, ph(nm + ".w"), ph(nm + ".b"), 2, p, op);
    } else {
      d = tape.upsample2(d);
      d = tape.conv2d_asym(d, ph(nm + ".w"), ph(nm + ".b"), 1, sp.lo, sp.hi, sp.lo, sp.hi);
    }
    d = i < 3 ? tape.relu(d) : tape.sigmoid(d);
  }
  out.recon = d;
  return out;
}

template <typename Real>
std::array<double, 32> Cae<Real>::embed(const dsp::Spectrogram& normalized, int cond_index) const {
  nn::Tape<Real> tape;
  nn::Tensor<Real> x({1, 1, kImageSize, kImageSize});
  for (std::size_t i = 0; i < normalized.values.size(); ++i)
    x.data[i] = static_cast<Real>(normalized.values[i]);
  nn::Value xin = tape.leaf(std::move(x), false);
  auto out = forward(tape, xin, {cond_index}, nullptr);
  const auto& z = tape.value(out.latent);
  std::array<double, 32> e{};
  for (int i = 0; i < 32; ++i) e[i] = static_cast<double>(z[i]);
  return e;
}

template class Cae<float>;
template class Cae<double>;

// --- training -------------------------------------------------------------------

TrainedModel train(const ModelConfig& cfg, const std::vector<TrainItem>& train_set,
                   const std::vector<TrainItem>& val_set, const TrainOptions& opts,
                   const dsp::NormStats& norm) {
  cfg.validate();
  opts.schedule.validate();
  if (train_set.empty() || val_set.empty())
    throw ValidationError("train: need nonempty train and validation sets");
  if (opts.batch_size < 1) throw ConfigError("batch_size must be >= 1");

  Cae<float> model(cfg, splitmix64(opts.seed ^ 0x1417a9d5b0c6ull));
  Rng rng = Rng::seeded(opts.seed);

  nn::AdamState<float> adam;
  {
    std::vector<nn::Tensor<float>> ps;
    for (const auto& p : model.params()) ps.push_back(p.value);
    adam.init(ps);
  }
  double lr = opts.schedule.initial_lr;
  adam.hyper.alpha = lr;

  auto make_batch = [&](const std::vector<TrainItem>& items, const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end, nn::Tensor<float>& x, std::vector<int>& cond) {
    const int b = static_cast<int>(end - begin);
    x = nn::Tensor<float>({b, 1, kImageSize, kImageSize});
    cond.resize(b);
    const std::size_t plane = static_cast<std::size_t>(kImageSize) * kImageSize;
    for (int i = 0; i < b; ++i) {
      const TrainItem& it = items[order[begin + i]];
      if (it.image.numel() != static_cast<std::int64_t>(plane))
        throw ValidationError("train: item image must be 128x128");
      std::copy(it.image.data.begin(), it.image.data.end(), x.data.begin() + i * plane);
      cond[i] = it.cond;
    }
  };

  auto run_batch = [&](const nn::Tensor<float>& x, const std::vector<int>& cond, bool training,
                       double& loss_out) {
    nn::Tape<float> tape;
    nn::Value xin = tape.leaf(x, false);
    nn::Tensor<float> eps;
    const nn::Tensor<float>* eps_p = nullptr;
    if (cfg.variational && training) {
      eps = nn::Tensor<float>({x.dim(0), cfg.latent});
      for (auto& v : eps.data) v = static_cast<float>(rng.normal());
      eps_p = &eps;
    }
    auto out = model.forward(tape, xin, cond, eps_p);
    nn::Value loss = tape.mse(out.recon, xin);
    if (cfg.variational)
      loss = tape.add(loss, tape.scale(out.kl, static_cast<float>(cfg.kl_weight)));
    loss_out = static_cast<double>(tape.value(loss)[0]);
    if (!training) return;
    tape.backward(loss);
    std::vector<nn::Tensor<float>*> ps;
    std::vector<const nn::Tensor<float>*> gs;
    const auto& handles = model.param_handles();
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      ps.push_back(&model.params()[i].value);
      gs.push_back(&tape.grad(handles[i]));
    }
    adam.hyper.alpha = lr;
    nn::adam_step(ps, gs, adam);
  };

  std::vector<std::size_t> train_order(train_set.size());
  for (std::size_t i = 0; i < train_order.size(); ++i) train_order[i] = i;
  std::vector<std::size_t> val_order(val_set.size());
  for (std::size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;

  TrainedModel result;
  result.config = cfg;
  result.seed = opts.seed;
  result.norm = norm;

  std::vector<double> val_history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<nn::NamedTensor> best_params = model.named_params();

  for (int epoch = 0; epoch < opts.schedule.max_epochs; ++epoch) {
    rng.shuffle(train_order);
    double train_loss = 0.0;
    for (std::size_t b = 0; b < train_set.size(); b += opts.batch_size) {
      const std::size_t e = std::min(train_set.size(), b + opts.batch_size);
      nn::Tensor<float> x;
      std::vector<int> cond;
      make_batch(train_set, train_order, b, e, x, cond);
      double loss = 0.0;
      run_batch(x, cond, true, loss);
      if (!std::isfinite(loss))
        throw TrainError("training diverged (non-finite loss) at epoch " + std::to_string(epoch + 1));
      train_loss += loss * static_cast<double>(e - b);
    }
    train_loss /= static_cast<double>(train_set.size());

    double val_loss = 0.0;
    for (std::size_t b = 0; b < val_set.size(); b += opts.batch_size) {
      const std::size_t e = std::min(val_set.size(), b + opts.batch_size);
      nn::Tensor<float> x;
      std::vector<int> cond;
      make_batch(val_set, val_order, b, e, x, cond);
      double loss = 0.0;
      run_batch(x, cond, false, loss);
      val_loss += loss * static_cast<double>(e - b);
    }
    val_loss /= static_cast<double>(val_set.size());
    if (!std::isfinite(val_loss))
      throw TrainError("training diverged (non-finite validation loss) at epoch " +
                       std::to_string(epoch + 1));

    result.history.push_back({train_loss, val_loss, lr});
    val_history.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = model.named_params();
    }
    if (opts.stop_below_val > 0.0 && val_loss < opts.stop_below_val) break;

    const auto decision = nn::schedule_update(val_history, opts.schedule, lr);
    if (decision.stop) break;
    lr = decision.new_lr;
  }

  result.parameters = std::move(best_params);
  return result;
}

// --- persistence -----------------------------------------------------------------

void save_trained(const std::string& path, const TrainedModel& m) {
  nn::Checkpoint ckpt;
  json j;
  j["model"] = json::parse(m.config.to_json());
  j["seed"] = m.seed;
  j["norm_lo"] = m.norm.lo;
  j["norm_hi"] = m.norm.hi;
  json hist = json::array();
  for (const auto& h : m.history) hist.push_back({h.train_loss, h.val_loss, h.lr});
  j["history"] = hist;
  ckpt.config_json = j.dump();
  ckpt.tensors = m.parameters;
  nn::write_checkpoint(path, ckpt);
}

TrainedModel load_trained(const std::string& path) {
  nn::Checkpoint ckpt = nn::read_checkpoint(path);
  TrainedModel m;
  json j = json::parse(ckpt.config_json);
  m.config = ModelConfig::from_json(j.at("model").dump());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.norm.lo = j.at("norm_lo").get<float>();
  m.norm.hi = j.at("norm_hi").get<float>();
  for (const auto& h : j.at("history")) {
    EpochStats e;
    e.train_loss = h.at(0).get<double>();
    e.val_loss = h.at(1).get<double>();
    e.lr = h.at(2).get<double>();
    m.history.push_back(e);
  }
  m.parameters = std::move(ckpt.tensors);
  return m;
}

std::array<double, 32> embed(const TrainedModel& m, const dsp::Spectrogram& normalized,
                             std::optional<int> cond_index) {
  const int cdim = m.config.condition_dim();
  if (cdim > 0 && !cond_index)
    throw ValidationError("conditional model requires a condition label");
  if (cdim == 0 && cond_index)
    throw ValidationError("unconditional model rejects a condition label");
  Cae<float> model(m.config, 0);
  model.set_params(m.parameters);
  return model.embed(normalized, cond_index.value_or(-1));
}

}  // namespace vimp::cae
