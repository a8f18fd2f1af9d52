#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "octseg/image.hpp"
#include "octseg/samplekit.hpp"
#include "octseg/unet.hpp"

namespace octseg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 10;
  std::size_t epochs = 100;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double clamp_eps = 1e-7;

  void validate() const;
};

/// First and second moments per parameter, kept in double precision.
struct AdamState {
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::map<std::string, Moments> moments;
  std::uint64_t step = 0;
};

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
double bce_loss(const Tensor<float>& pred, const Tensor<float>& target, double clamp_eps = 1e-7);

/// Bias-corrected Adam update of every parameter from its current gradient.
/// Gradients are left untouched; a fresh state is sized on first use.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState& state, const AdamConfig& cfg);

struct Checkpoint {
  UNet<float> net;
  ReferenceDims ref;
};

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path);
std::string encode_checkpoint(const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint decode_checkpoint(std::string_view bytes);

struct TrainingExample {
  Tensor<float> input;   // [2, R, C]
  Tensor<float> target;  // [1, R, C]
};

TrainingExample make_example(const Sample& sample, const BinaryMask& target);

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean per-sample loss seen during the epoch
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLoss> history;
};

/// Mini-batch training with a seeded shuffle each epoch; the last partial
/// batch is kept. Deterministic given the examples and both seeds.
TrainResult train(const std::vector<TrainingExample>& examples, const UNetConfig& unet_cfg,
                  const TrainConfig& train_cfg, const ReferenceDims& ref,
                  const std::function<void(const EpochLoss&)>& on_epoch = {});

struct PredictOptions {
  double threshold = 0.5;
  bool roi_clamp = true;
};

struct Prediction {
  FloatRaster probability;  // original dims, one channel
  BinaryMask mask;
};

/// Eval-mode forward, cropped back to the scan's own frame and thresholded
/// with p >= threshold. With roi_clamp, pixels outside the ROI channel are 0.
Prediction predict(Checkpoint& cp, const Sample& sample, const PredictOptions& options = {});

}  // namespace octseg
