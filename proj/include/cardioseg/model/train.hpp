#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/augment/augment.hpp"
#include "cardioseg/core/sample.hpp"
#include "cardioseg/model/loss.hpp"
#include "cardioseg/model/network.hpp"

namespace cardioseg::model {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-6;
  int batch_size = 4;
  int max_steps = 1000;
  std::uint64_t seed = 0;
  augment::AugmentParams augment;
  bool augment_enabled = true;
  // Adam moments
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// 1 = deterministic single-threaded path. More workers split each batch into
  /// sub-batches whose gradients are averaged before the update.
  int workers = 1;

  void validate() const;
  static TrainConfig from_config(const Config& cfg, const std::string& section = "train");
};

struct StepLog {
  int step = 0;
  LossTerms terms;
};

struct TrainResult {
  Network net;
  std::vector<StepLog> log;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Samples must carry masks and share one size that the network accepts. The
/// network is initialised from tcfg.seed; batches, augmentation and dropout derive
/// from the same seed. Throws EmptyTrainingSet, ShapeMismatch, NonFiniteLoss.
TrainResult train(std::span<const Sample> samples, const NetworkConfig& ncfg, const TrainConfig& tcfg,
                  const StepCallback& on_step = {});

/// Continues from an existing network.
TrainResult train_from(Network net, std::span<const Sample> samples, const TrainConfig& tcfg,
                       const StepCallback& on_step = {});

/// Packs images into an (N,1,H,W) tensor.
Tensor to_batch(std::span<const ScalarImage2D* const> images);

}  // namespace cardioseg::model
