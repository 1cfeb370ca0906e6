#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "acwe/tensor.hpp"
#include "acwe/types.hpp"

namespace acwe::net {

/// Architecture knobs. The layer plan is fixed: a plain 3x3 conv lifting
/// 1 -> feature_channels, three recurrent conv layers at constant width, and
/// a plain 3x3 conv projecting to 1 channel. Normalization + PReLU follow
/// every conv, including the last; the signed output feeds threshold()
/// directly with no terminal squash.
struct NetworkConfig {
  int in_channels = 1;
  int feature_channels = 32;
  int time_steps = 3;  // T; effective depth of each recurrent layer is T+1
  double prelu_init_slope = 0.25;
  std::uint64_t seed = 0;
};

enum class Mode { train, eval };

struct Conv {
  int out_c = 0, in_c = 0;
  std::vector<float> w;  // row-major [out_c][in_c][3][3], no bias
};

/// Per-channel normalization: scale/shift are trained, the running statistics
/// serve eval-mode forward passes.
struct Norm {
  std::vector<float> scale, shift, running_mean, running_var;
};

struct Prelu {
  std::vector<float> slope;  // per channel
};

struct PlainLayer {
  Conv conv;
  Norm norm;
  Prelu act;
};

/// Recurrent conv layer: x0 = act(N(Wf*u)), xt = act(N(Wf*u + Wr*x(t-1))).
/// One Wf and one Wr shared across all time steps; normalization statistics
/// are computed once per forward pass (from the t=0 pre-activation) and shared
/// by every time step.
struct RclLayer {
  Conv ff, rec;
  Norm norm;
  Prelu act;
};

struct NetworkParams {
  NetworkConfig config;
  PlainLayer entry;
  std::array<RclLayer, 3> rcls;
  PlainLayer exit;
};

struct PlainGrads {
  std::vector<float> w, scale, shift, slope;
};
struct RclGrads {
  std::vector<float> ff, rec, scale, shift, slope;
};
struct NetworkGrads {
  PlainGrads entry;
  std::array<RclGrads, 3> rcls;
  PlainGrads exit;
};

/// Activation record from a train-mode forward pass, consumed by backward().
struct PlainTape {
  Tensor input, z;
  std::vector<float> mean, var;
};
struct RclTape {
  Tensor input;
  std::vector<Tensor> z, x;  // indices 0..T
  std::vector<float> mean, var;
};
struct ForwardTape {
  PlainTape entry;
  std::array<RclTape, 3> rcls;
  PlainTape exit;
};

/// Kernels ~ U(-b, b) with b = 1/sqrt(fan_in); normalization scale 1, shift 0,
/// running mean 0, running var 1; PReLU slopes = prelu_init_slope.
/// Deterministic in config.seed.
NetworkParams init_params(const NetworkConfig& config);

NetworkGrads zero_grads(const NetworkConfig& config);

/// Number of trained scalars (excludes running statistics).
std::size_t trainable_count(const NetworkParams& params);

/// Aligned tensor lists for generic optimizer updates: position i of the
/// params list corresponds to position i of the grads list.
std::vector<std::vector<float>*> trainable_tensors(NetworkParams& params);
std::vector<std::vector<float>*> grad_tensors(NetworkGrads& grads);

/// One recurrent layer. Train mode computes batch statistics from the t=0
/// pre-activation, shares them across time steps, and updates the running
/// statistics; eval mode normalizes with the running statistics.
Tensor rcl_forward(RclLayer& layer, const Tensor& input, int T, Mode mode,
                   RclTape* tape = nullptr);

/// Full network on a batch of same-shaped normalized images (H, W >= 8).
/// Requesting a tape requires train mode. Train mode throws if any layer
/// produces non-finite activations, naming the layer; eval mode folds the
/// normalization into the kernels and verifies the output scores instead.
std::vector<ScoreField> forward(NetworkParams& params, const std::vector<Image>& batch,
                                Mode mode, ForwardTape* tape = nullptr);

/// Exact gradients for every trained tensor given d(loss)/d(score) per image.
NetworkGrads backward(const NetworkParams& params, const ForwardTape& tape,
                      const std::vector<Grid<double>>& dscore);

/// Single-file checkpoint: magic, little-endian u32 header length, JSON header
/// (format version, config echo, tensor name/shape/offset table), then the
/// float32 little-endian payload.
void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace acwe::net
