#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cardioseg/core/config.hpp"
#include "cardioseg/model/graph.hpp"

namespace cardioseg::model {

struct NetworkConfig {
  int levels = 5;
  int base_filters = 16;
  int classes = 4;
  double dropout_rate = 0.2;
  double leaky_slope = 0.01;
  int deep_supervision_levels = 3;
  int input_size = 176;

  /// Throws InvalidConfig.
  void validate() const;
  int filters(int level) const { return base_filters << level; }
  /// Number of segmentation heads actually attached (capped by the decoder depth).
  int heads() const;
  /// Side lengths must be multiples of this.
  int size_multiple() const { return 1 << (levels - 1); }

  static NetworkConfig from_config(const Config& cfg, const std::string& section = "network");
};

enum class ParamKind { ConvWeight, ConvBias, NormScale, NormShift };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::ConvWeight;
  Tensor value;  // conv weight: (cout, cin, k, k); everything else: (c, 1, 1, 1)
};

enum class LayerKind { Conv, InstanceNorm, LeakyRelu, Dropout, Upsample, Concat, Add, Head };

/// One entry of the layer graph, in execution order.
struct LayerInfo {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int level = 0;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

struct Network {
  NetworkConfig cfg;
  std::vector<Param> params;
  std::vector<LayerInfo> layers;

  /// Parameter count derived from the layer graph (conv: k*k*cin*cout + cout; norm: 2c).
  std::size_t param_count() const;
  /// Sum of stored parameter tensor sizes; equals param_count() for a built network.
  std::size_t stored_param_count() const;
  const Param& param(const std::string& name) const;
  Param& param(const std::string& name);
};

/// Context pathway of residual pre-activation modules with stride-2 downsampling,
/// localization pathway of resize-conv upscaling, skip concatenation and 3x3 + 1x1
/// convolutions, segmentation heads at the finest decoder levels summed as logits.
/// Conv weights get fan-in scaled uniform init from `seed`; norms start at identity.
Network build_network(const NetworkConfig& cfg, std::uint64_t seed = 0);

/// Wires the network into `g` for input node `x` (N,1,H,W) and returns the logits node
/// (N,classes,H,W). `param_nodes` receives one leaf per parameter, in params order.
/// Dropout is active only when `dropout_rng` is non-null.
NodeId forward_logits(Graph& g, const Network& net, NodeId x, std::vector<NodeId>& param_nodes,
                      std::mt19937_64* dropout_rng);

/// Per-pixel softmax over channels.
Tensor softmax(const Tensor& logits);

/// Inference: probabilities (N,classes,H,W), dropout off. Throws ShapeMismatch for
/// sizes that are not multiples of size_multiple() or for multi-channel input.
Tensor forward(const Network& net, const Tensor& batch);

}  // namespace cardioseg::model
