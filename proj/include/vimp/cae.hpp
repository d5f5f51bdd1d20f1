#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vimp/autodiff.hpp"
#include "vimp/checkpoint.hpp"
#include "vimp/dataio.hpp"
#include "vimp/dsp.hpp"
#include "vimp/optim.hpp"

namespace vimp::cae {

enum class Arch { cae_b, cae };
enum class Conditioning { none, sl, dl, sdl };
enum class DecoderMode { upsample_conv, transposed_conv };
enum class EncoderDownsample { stride2, maxpool };

std::string to_string(Arch a);
std::string to_string(Conditioning c);
std::string to_string(DecoderMode d);
std::string to_string(EncoderDownsample e);
Arch parse_arch(const std::string& s);
Conditioning parse_conditioning(const std::string& s);
DecoderMode parse_decoder_mode(const std::string& s);
EncoderDownsample parse_encoder_downsample(const std::string& s);

struct ModelConfig {
  Arch arch = Arch::cae;
  Conditioning conditioning = Conditioning::none;
  bool variational = false;
  DecoderMode decoder = DecoderMode::upsample_conv;
  EncoderDownsample encoder = EncoderDownsample::maxpool;
  std::array<int, 4> filters = {8, 16, 32, 64};
  int kernel = 9;
  int latent = 32;
  double kl_weight = 1.0;

  // cae: 8-16-32-64 filters, 9x9 kernels, max-pool encoder, upsampling
  // decoder. cae_b: 8-16-24-32, 10x10, strided encoder, 128->32 adapter head.
  static ModelConfig defaults(Arch a);

  void validate() const;  // throws ConfigError
  int condition_dim() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

// One-hot slot for a (sound_type, drum_type) pair under the model's
// conditioning scheme; -1 for unconditional models.
int condition_index(const ModelConfig& cfg, dataio::SoundType st, dataio::DrumType dt);

inline constexpr int kImageSize = 128;
inline constexpr int kBottomSize = 8;  // spatial size after the 4 encoder blocks

// The autoencoder: owns parameters, builds the op graph per pass.
template <typename Real>
class Cae {
 public:
  struct Param {
    std::string name;
    nn::Tensor<Real> value;
  };

  struct ForwardOut {
    nn::Value recon;
    nn::Value latent;  // variational models: the mean
    nn::Value kl;      // valid only for variational models
  };

  Cae(const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::int64_t parameter_count() const;

  void set_params(const std::vector<nn::NamedTensor>& named);
  std::vector<nn::NamedTensor> named_params() const;

  // x: [N,1,128,128]; cond: one-hot slot per sample (all -1 for
  // unconditional). eps: optional [N,latent] noise for variational sampling.
  ForwardOut forward(nn::Tape<Real>& tape, nn::Value x, const std::vector<int>& cond,
                     const nn::Tensor<Real>* eps = nullptr) const;

  // Tape handles of the parameters leafed by the last forward() call, in
  // params() order; used to read gradients after backward().
  const std::vector<nn::Value>& param_handles() const { return param_handles_; }

  // Convenience single-input encoder pass.
  std::array<double, 32> embed(const dsp::Spectrogram& normalized, int cond_index) const;

 private:
  nn::Value onehot_leaf(nn::Tape<Real>& tape, const std::vector<int>& cond) const;

  ModelConfig cfg_;
  std::vector<Param> params_;
  mutable std::vector<nn::Value> param_handles_;  // per-forward scratch
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainedModel {
  ModelConfig config;
  std::vector<nn::NamedTensor> parameters;
  std::vector<EpochStats> history;
  std::uint64_t seed = 0;
  dsp::NormStats norm;  // corpus min-max carried for query-time inputs
};

struct TrainItem {
  nn::Tensor<float> image;  // [1,128,128], values in [0,1]
  int cond = -1;
};

struct TrainOptions {
  nn::TrainSchedule schedule;
  int batch_size = 64;
  std::uint64_t seed = 1;
  // > 0: additionally stop once validation loss drops below this (overfit
  // oracles); the plateau/early-stop schedule otherwise governs.
  double stop_below_val = 0.0;
};

// Minimizes mean reconstruction MSE (+ weighted KL when variational), early
// stops per schedule, returns the best-validation parameters.
TrainedModel train(const ModelConfig& cfg, const std::vector<TrainItem>& train_set,
                   const std::vector<TrainItem>& val_set, const TrainOptions& opts,
                   const dsp::NormStats& norm = {});

void save_trained(const std::string& path, const TrainedModel& m);
TrainedModel load_trained(const std::string& path);

// Deterministic encoder pass over a normalized spectrogram. Conditional
// models require a condition slot, unconditional ones reject it.
std::array<double, 32> embed(const TrainedModel& m, const dsp::Spectrogram& normalized,
                             std::optional<int> cond_index);

extern template class Cae<float>;
extern template class Cae<double>;

}  // namespace vimp::cae
