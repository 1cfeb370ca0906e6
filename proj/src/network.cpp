#include "acwe/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace acwe::net {

namespace {

constexpr float kNormEps = 1e-5f;
constexpr float kNormMomentum = 0.1f;
constexpr char kCheckpointMagic[8] = {'A', 'C', 'W', 'E', 'C', 'K', 'P', 'T'};

void validate_config(const NetworkConfig& config) {
  if (config.in_channels < 1 || config.feature_channels < 1 || config.time_steps < 1)
    throw std::invalid_argument("network config: channels and time_steps must be >= 1");
  if (!std::isfinite(config.prelu_init_slope))
    throw std::invalid_argument("network config: prelu_init_slope must be finite");
}

Conv make_conv(int out_c, int in_c) {
  return {out_c, in_c, std::vector<float>(static_cast<std::size_t>(out_c) * in_c * 9, 0.0f)};
}

Norm make_norm(int c) {
  return {std::vector<float>(c, 1.0f), std::vector<float>(c, 0.0f),
          std::vector<float>(c, 0.0f), std::vector<float>(c, 1.0f)};
}

NetworkParams make_params(const NetworkConfig& config) {
  validate_config(config);
  const int f = config.feature_channels;
  const float slope = static_cast<float>(config.prelu_init_slope);
  NetworkParams p;
  p.config = config;
  p.entry = {make_conv(f, config.in_channels), make_norm(f), {std::vector<float>(f, slope)}};
  for (RclLayer& rcl : p.rcls)
    rcl = {make_conv(f, f), make_conv(f, f), make_norm(f), {std::vector<float>(f, slope)}};
  p.exit = {make_conv(1, f), make_norm(1), {std::vector<float>(1, slope)}};
  return p;
}

void fill_uniform(std::mt19937_64& gen, Conv& conv) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(conv.in_c) * 9.0);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (float& x : conv.w) x = static_cast<float>(dist(gen));
}

// Biased per-channel mean/variance over batch and spatial dims.
void batch_stats(const Tensor& z, std::vector<float>& mean, std::vector<float>& var) {
  const std::size_t plane = z.plane();
  const double count = static_cast<double>(z.n) * static_cast<double>(plane);
  std::vector<double> sum(z.c, 0.0), sumsq(z.c, 0.0);
  for (int n = 0; n < z.n; ++n) {
    for (int c = 0; c < z.c; ++c) {
      const float* p = &z.at(n, c, 0, 0);
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        s += p[i];
        s2 += static_cast<double>(p[i]) * p[i];
      }
      sum[c] += s;
      sumsq[c] += s2;
    }
  }
  mean.resize(z.c);
  var.resize(z.c);
  for (int c = 0; c < z.c; ++c) {
    const double m = sum[c] / count;
    mean[c] = static_cast<float>(m);
    var[c] = static_cast<float>(std::max(0.0, sumsq[c] / count - m * m));
  }
}

Tensor norm_act(const Tensor& z, const std::vector<float>& mean, const std::vector<float>& var,
                const Norm& norm, const Prelu& act) {
  Tensor out(z.n, z.c, z.h, z.w);
  const std::size_t plane = z.plane();
  for (int n = 0; n < z.n; ++n) {
    for (int c = 0; c < z.c; ++c) {
      const float inv = 1.0f / std::sqrt(var[c] + kNormEps);
      const float g = norm.scale[c], b = norm.shift[c], a = act.slope[c], m = mean[c];
      const float* zp = &z.at(n, c, 0, 0);
      float* op = &out.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        const float y = g * ((zp[i] - m) * inv) + b;
        op[i] = y > 0.0f ? y : a * y;
      }
    }
  }
  return out;
}

void update_running(Norm& norm, const std::vector<float>& mean, const std::vector<float>& var) {
  for (std::size_t c = 0; c < mean.size(); ++c) {
    norm.running_mean[c] = (1.0f - kNormMomentum) * norm.running_mean[c] + kNormMomentum * mean[c];
    norm.running_var[c] = (1.0f - kNormMomentum) * norm.running_var[c] + kNormMomentum * var[c];
  }
}

void check_finite_tensor(const Tensor& t, const char* layer) {
  for (float x : t.v) {
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("forward: non-finite activations in layer ") + layer);
  }
}

// Inference-only fast path. In eval mode the normalization is a fixed
// per-channel affine map, so it folds into the convolution: the scale
// multiplies the outgoing kernel rows and the remainder becomes a bias the
// accumulator starts from. Activations then need only the PReLU pass, and a
// single item's buffers are reused across layers and time steps. Finiteness
// is checked on the output scores (train mode checks every layer).
struct FoldedLayer {
  std::vector<float> w;
  std::vector<float> bias;
};

FoldedLayer fold_affine(const Conv& conv, const Norm& norm) {
  FoldedLayer f;
  f.w.resize(conv.w.size());
  f.bias.resize(conv.out_c);
  const std::size_t per_oc = static_cast<std::size_t>(conv.in_c) * 9;
  for (int oc = 0; oc < conv.out_c; ++oc) {
    const float a = norm.scale[oc] / std::sqrt(norm.running_var[oc] + kNormEps);
    f.bias[oc] = norm.shift[oc] - a * norm.running_mean[oc];
    for (std::size_t k = 0; k < per_oc; ++k) f.w[oc * per_oc + k] = a * conv.w[oc * per_oc + k];
  }
  return f;
}

void fill_bias(float* buf, const std::vector<float>& bias, std::size_t plane) {
  for (std::size_t c = 0; c < bias.size(); ++c) std::fill_n(buf + c * plane, plane, bias[c]);
}

// dst may equal src; each element only reads its own slot. max/min keeps the
// loop branch-free (sign-dependent branches mispredict on activations) and
// still propagates NaN.
void prelu_pass(const float* src, float* dst, const std::vector<float>& slope,
                std::size_t plane) {
  for (std::size_t c = 0; c < slope.size(); ++c) {
    const float a = slope[c];
    const float* s = src + c * plane;
    float* d = dst + c * plane;
    for (std::size_t i = 0; i < plane; ++i)
      d[i] = std::max(s[i], 0.0f) + a * std::min(s[i], 0.0f);
  }
}

std::vector<ScoreField> eval_forward(const NetworkParams& params, const std::vector<Image>& batch) {
  const int h = batch[0].height(), w = batch[0].width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const int f = params.config.feature_channels;
  const int T = params.config.time_steps;

  const FoldedLayer entry = fold_affine(params.entry.conv, params.entry.norm);
  FoldedLayer ff[3], rec[3];
  for (int i = 0; i < 3; ++i) {
    ff[i] = fold_affine(params.rcls[i].ff, params.rcls[i].norm);
    // The shared affine applies once to z_ff + Wr*x, so the recurrent kernel
    // gets the scale but the bias must not be added a second time.
    rec[i] = fold_affine(params.rcls[i].rec, params.rcls[i].norm);
  }
  const FoldedLayer exit_fold = fold_affine(params.exit.conv, params.exit.norm);

  std::vector<float> input(plane), buf_a(f * plane), buf_b(f * plane), z_ff(f * plane),
      out_plane(plane);
  std::vector<ScoreField> scores;
  scores.reserve(batch.size());

  for (const Image& img : batch) {
    for (std::size_t i = 0; i < plane; ++i) input[i] = static_cast<float>(img[i]);

    fill_bias(buf_a.data(), entry.bias, plane);
    conv3x3_item(input.data(), entry.w.data(), buf_a.data(), 1, f, h, w);
    prelu_pass(buf_a.data(), buf_a.data(), params.entry.act.slope, plane);

    float* x = buf_a.data();
    float* scratch = buf_b.data();
    for (int l = 0; l < 3; ++l) {
      const std::vector<float>& slope = params.rcls[l].act.slope;
      fill_bias(z_ff.data(), ff[l].bias, plane);
      conv3x3_item(x, ff[l].w.data(), z_ff.data(), f, f, h, w);
      prelu_pass(z_ff.data(), scratch, slope, plane);
      std::swap(x, scratch);
      for (int t = 1; t <= T; ++t) {
        std::memcpy(scratch, z_ff.data(), f * plane * sizeof(float));
        conv3x3_item(x, rec[l].w.data(), scratch, f, f, h, w);
        prelu_pass(scratch, scratch, slope, plane);
        std::swap(x, scratch);
      }
    }

    std::fill(out_plane.begin(), out_plane.end(), exit_fold.bias[0]);
    conv3x3_item(x, exit_fold.w.data(), out_plane.data(), f, 1, h, w);
    prelu_pass(out_plane.data(), out_plane.data(), params.exit.act.slope, plane);

    ScoreField s(h, w);
    for (std::size_t i = 0; i < plane; ++i) {
      if (!std::isfinite(out_plane[i]))
        throw std::runtime_error("forward: non-finite network output");
      s[i] = out_plane[i];
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

Tensor plain_forward(PlainLayer& layer, const Tensor& input, Mode mode, PlainTape* tape) {
  Tensor z = conv3x3(input, layer.conv.w, layer.conv.out_c);
  std::vector<float> mean, var;
  if (mode == Mode::train) {
    batch_stats(z, mean, var);
    update_running(layer.norm, mean, var);
  } else {
    mean = layer.norm.running_mean;
    var = layer.norm.running_var;
  }
  Tensor out = norm_act(z, mean, var, layer.norm, layer.act);
  if (tape != nullptr) {
    tape->input = input;
    tape->z = std::move(z);
    tape->mean = std::move(mean);
    tape->var = std::move(var);
  }
  return out;
}

// Backward through PReLU and the normalization affine for one tensor:
// consumes d(activation), returns d(xhat), accumulating slope/scale/shift
// gradients. xhat and y are recomputed from z and the recorded statistics.
Tensor affine_act_backward(const Tensor& z, const std::vector<float>& mean,
                           const std::vector<float>& var, const Norm& norm, const Prelu& act,
                           const Tensor& dx, std::vector<float>& gscale,
                           std::vector<float>& gshift, std::vector<float>& gslope) {
  Tensor dxhat(z.n, z.c, z.h, z.w);
  const std::size_t plane = z.plane();
  for (int c = 0; c < z.c; ++c) {
    const float inv = 1.0f / std::sqrt(var[c] + kNormEps);
    const float g = norm.scale[c], b = norm.shift[c], a = act.slope[c], m = mean[c];
    double gs = 0.0, gb = 0.0, ga = 0.0;
    for (int n = 0; n < z.n; ++n) {
      const float* zp = &z.at(n, c, 0, 0);
      const float* dp = &dx.at(n, c, 0, 0);
      float* hp = &dxhat.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        const float xhat = (zp[i] - m) * inv;
        const float y = g * xhat + b;
        const float dy = y > 0.0f ? dp[i] : a * dp[i];
        ga += y > 0.0f ? 0.0 : static_cast<double>(y) * dp[i];
        gs += static_cast<double>(dy) * xhat;
        gb += dy;
        hp[i] = g * dy;
      }
    }
    gscale[c] += static_cast<float>(gs);
    gshift[c] += static_cast<float>(gb);
    gslope[c] += static_cast<float>(ga);
  }
  return dxhat;
}

// Normalization backward when the statistics came from zs[0] and were shared
// by every tensor in the list. dzs[t] receives dxhats[t]*inv plus, for t = 0,
// the correction from the mean/variance dependency.
void norm_backward_shared(const std::vector<const Tensor*>& zs, std::vector<Tensor>& dxhats,
                          const std::vector<float>& mean, const std::vector<float>& var,
                          std::vector<Tensor>& dzs) {
  const Tensor& z0 = *zs[0];
  const std::size_t plane = z0.plane();
  const double count = static_cast<double>(z0.n) * static_cast<double>(plane);
  dzs.clear();
  for (const Tensor* zt : zs) dzs.emplace_back(zt->n, zt->c, zt->h, zt->w);

  for (int c = 0; c < z0.c; ++c) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(var[c]) + kNormEps);
    const double m = mean[c];
    double dm = 0.0, dv = 0.0;
    for (std::size_t t = 0; t < zs.size(); ++t) {
      for (int n = 0; n < z0.n; ++n) {
        const float* zp = &zs[t]->at(n, c, 0, 0);
        const float* hp = &dxhats[t].at(n, c, 0, 0);
        float* dp = &dzs[t].at(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          dp[i] = static_cast<float>(hp[i] * inv);
          dm -= hp[i] * inv;
          dv += hp[i] * (zp[i] - m) * (-0.5) * inv * inv * inv;
        }
      }
    }
    const double dm_n = dm / count;
    const double dv_n = 2.0 * dv / count;
    for (int n = 0; n < z0.n; ++n) {
      const float* zp = &z0.at(n, c, 0, 0);
      float* dp = &dzs[0].at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i)
        dp[i] += static_cast<float>(dm_n + dv_n * (zp[i] - m));
    }
  }
}

Tensor plain_backward(const PlainLayer& layer, const PlainTape& tape, const Tensor& dx,
                      PlainGrads& g) {
  std::vector<Tensor> dxhats;
  dxhats.push_back(affine_act_backward(tape.z, tape.mean, tape.var, layer.norm, layer.act, dx,
                                       g.scale, g.shift, g.slope));
  std::vector<const Tensor*> zs{&tape.z};
  std::vector<Tensor> dzs;
  norm_backward_shared(zs, dxhats, tape.mean, tape.var, dzs);
  conv3x3_weight_grad(tape.input, dzs[0], g.w);
  return conv3x3_input_grad(layer.conv.w, layer.conv.out_c, layer.conv.in_c, dzs[0]);
}

Tensor rcl_backward(const RclLayer& layer, const RclTape& tape, const Tensor& dx_last,
                    RclGrads& g) {
  const int time_steps = static_cast<int>(tape.z.size()) - 1;
  std::vector<Tensor> dxhats(tape.z.size());
  Tensor dx_cur = dx_last;
  // Walk time steps backwards: each x(t-1) feeds only z(t) via the recurrent
  // kernel, so its gradient is fully known once dz(t) is.
  for (int t = time_steps; t >= 0; --t) {
    dxhats[t] = affine_act_backward(tape.z[t], tape.mean, tape.var, layer.norm, layer.act,
                                    dx_cur, g.scale, g.shift, g.slope);
    if (t >= 1) {
      // Direct part of dz(t); the shared-statistics correction only touches
      // t = 0, so dz(t) = dxhat(t) * inv for t >= 1. Computed inside
      // norm_backward_shared; here we only need dx(t-1), which requires
      // dz(t) now. Use the direct formula locally.
      Tensor dz_t(tape.z[t].n, tape.z[t].c, tape.z[t].h, tape.z[t].w);
      for (int c = 0; c < dz_t.c; ++c) {
        const float inv = 1.0f / std::sqrt(tape.var[c] + kNormEps);
        for (int n = 0; n < dz_t.n; ++n) {
          const float* hp = &dxhats[t].at(n, c, 0, 0);
          float* dp = &dz_t.at(n, c, 0, 0);
          for (std::size_t i = 0; i < dz_t.plane(); ++i) dp[i] = hp[i] * inv;
        }
      }
      conv3x3_weight_grad(tape.x[t - 1], dz_t, g.rec);
      dx_cur = conv3x3_input_grad(layer.rec.w, layer.rec.out_c, layer.rec.in_c, dz_t);
    }
  }

  std::vector<const Tensor*> zs;
  for (const Tensor& zt : tape.z) zs.push_back(&zt);
  std::vector<Tensor> dzs;
  norm_backward_shared(zs, dxhats, tape.mean, tape.var, dzs);

  // z(t) = z_ff + Wr*x(t-1) for t >= 1 and z(0) = z_ff, so dz_ff sums all dz(t).
  Tensor dz_ff = std::move(dzs[0]);
  for (int t = 1; t <= time_steps; ++t)
    for (std::size_t i = 0; i < dz_ff.size(); ++i) dz_ff.v[i] += dzs[t].v[i];

  conv3x3_weight_grad(tape.input, dz_ff, g.ff);
  return conv3x3_input_grad(layer.ff.w, layer.ff.out_c, layer.ff.in_c, dz_ff);
}

struct TensorRef {
  std::string name;
  std::vector<int> shape;
  std::vector<float>* data;
};

std::vector<TensorRef> named_tensors(NetworkParams& p) {
  const int f = p.config.feature_channels;
  std::vector<TensorRef> out;
  auto add = [&out](std::string name, std::vector<int> shape, std::vector<float>& v) {
    out.push_back({std::move(name), std::move(shape), &v});
  };
  auto add_norm_act = [&](const std::string& prefix, Norm& norm, Prelu& act, int c) {
    add(prefix + ".scale", {c}, norm.scale);
    add(prefix + ".shift", {c}, norm.shift);
    add(prefix + ".running_mean", {c}, norm.running_mean);
    add(prefix + ".running_var", {c}, norm.running_var);
    add(prefix + ".prelu", {c}, act.slope);
  };
  add("entry.conv", {f, p.config.in_channels, 3, 3}, p.entry.conv.w);
  add_norm_act("entry", p.entry.norm, p.entry.act, f);
  for (int i = 0; i < 3; ++i) {
    const std::string prefix = "rcl" + std::to_string(i + 1);
    add(prefix + ".ff", {f, f, 3, 3}, p.rcls[i].ff.w);
    add(prefix + ".rec", {f, f, 3, 3}, p.rcls[i].rec.w);
    add_norm_act(prefix, p.rcls[i].norm, p.rcls[i].act, f);
  }
  add("exit.conv", {1, f, 3, 3}, p.exit.conv.w);
  add_norm_act("exit", p.exit.norm, p.exit.act, 1);
  return out;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  os.write(b, 4);
}

}  // namespace

NetworkParams init_params(const NetworkConfig& config) {
  NetworkParams p = make_params(config);
  std::mt19937_64 gen(config.seed);
  fill_uniform(gen, p.entry.conv);
  for (RclLayer& rcl : p.rcls) {
    fill_uniform(gen, rcl.ff);
    fill_uniform(gen, rcl.rec);
  }
  fill_uniform(gen, p.exit.conv);
  return p;
}

NetworkGrads zero_grads(const NetworkConfig& config) {
  validate_config(config);
  const int f = config.feature_channels;
  auto zeros = [](std::size_t n) { return std::vector<float>(n, 0.0f); };
  NetworkGrads g;
  g.entry = {zeros(static_cast<std::size_t>(f) * config.in_channels * 9), zeros(f), zeros(f),
             zeros(f)};
  for (RclGrads& rcl : g.rcls)
    rcl = {zeros(static_cast<std::size_t>(f) * f * 9), zeros(static_cast<std::size_t>(f) * f * 9),
           zeros(f), zeros(f), zeros(f)};
  g.exit = {zeros(static_cast<std::size_t>(f) * 9), zeros(1), zeros(1), zeros(1)};
  return g;
}

std::vector<std::vector<float>*> trainable_tensors(NetworkParams& params) {
  std::vector<std::vector<float>*> out{&params.entry.conv.w, &params.entry.norm.scale,
                                       &params.entry.norm.shift, &params.entry.act.slope};
  for (RclLayer& rcl : params.rcls) {
    out.push_back(&rcl.ff.w);
    out.push_back(&rcl.rec.w);
    out.push_back(&rcl.norm.scale);
    out.push_back(&rcl.norm.shift);
    out.push_back(&rcl.act.slope);
  }
  out.push_back(&params.exit.conv.w);
  out.push_back(&params.exit.norm.scale);
  out.push_back(&params.exit.norm.shift);
  out.push_back(&params.exit.act.slope);
  return out;
}

std::vector<std::vector<float>*> grad_tensors(NetworkGrads& grads) {
  std::vector<std::vector<float>*> out{&grads.entry.w, &grads.entry.scale, &grads.entry.shift,
                                       &grads.entry.slope};
  for (RclGrads& rcl : grads.rcls) {
    out.push_back(&rcl.ff);
    out.push_back(&rcl.rec);
    out.push_back(&rcl.scale);
    out.push_back(&rcl.shift);
    out.push_back(&rcl.slope);
  }
  out.push_back(&grads.exit.w);
  out.push_back(&grads.exit.scale);
  out.push_back(&grads.exit.shift);
  out.push_back(&grads.exit.slope);
  return out;
}

std::size_t trainable_count(const NetworkParams& params) {
  auto& p = const_cast<NetworkParams&>(params);
  std::size_t total = 0;
  for (const auto* t : trainable_tensors(p)) total += t->size();
  return total;
}

Tensor rcl_forward(RclLayer& layer, const Tensor& input, int T, Mode mode, RclTape* tape) {
  if (T < 1) throw std::invalid_argument("rcl_forward: T must be >= 1");
  if (input.c != layer.ff.in_c)
    throw std::invalid_argument("rcl_forward: input channel count does not match the layer");
  if (tape != nullptr && mode == Mode::eval)
    throw std::invalid_argument("rcl_forward: recording a tape requires train mode");

  Tensor z_ff = conv3x3(input, layer.ff.w, layer.ff.out_c);
  std::vector<float> mean, var;
  if (mode == Mode::train) {
    batch_stats(z_ff, mean, var);
    update_running(layer.norm, mean, var);
  } else {
    mean = layer.norm.running_mean;
    var = layer.norm.running_var;
  }

  Tensor x = norm_act(z_ff, mean, var, layer.norm, layer.act);
  if (tape != nullptr) {
    tape->input = input;
    tape->z.clear();
    tape->x.clear();
    tape->z.push_back(z_ff);
    tape->x.push_back(x);
  }
  for (int t = 1; t <= T; ++t) {
    Tensor z = conv3x3(x, layer.rec.w, layer.rec.out_c);
    for (std::size_t i = 0; i < z.size(); ++i) z.v[i] += z_ff.v[i];
    x = norm_act(z, mean, var, layer.norm, layer.act);
    if (tape != nullptr) {
      tape->z.push_back(std::move(z));
      tape->x.push_back(x);
    }
  }
  if (tape != nullptr) {
    tape->mean = std::move(mean);
    tape->var = std::move(var);
  }
  return x;
}

std::vector<ScoreField> forward(NetworkParams& params, const std::vector<Image>& batch,
                                Mode mode, ForwardTape* tape) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  if (tape != nullptr && mode == Mode::eval)
    throw std::invalid_argument("forward: recording a tape requires train mode");
  const int h = batch[0].height(), w = batch[0].width();
  if (h < 8 || w < 8) throw std::invalid_argument("forward: images must be at least 8x8");
  for (const Image& img : batch) {
    if (img.height() != h || img.width() != w)
      throw std::invalid_argument("forward: batch images must share one shape");
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (!std::isfinite(img[i]) || img[i] < -1e-9 || img[i] > 1.0 + 1e-9)
        throw std::invalid_argument("forward: images must be normalized to [0,1]");
    }
  }

  if (mode == Mode::eval) return eval_forward(params, batch);

  const int b = static_cast<int>(batch.size());
  Tensor x(b, 1, h, w);
  for (int n = 0; n < b; ++n) {
    float* dst = &x.at(n, 0, 0, 0);
    for (std::size_t i = 0; i < batch[n].size(); ++i) dst[i] = static_cast<float>(batch[n][i]);
  }

  x = plain_forward(params.entry, x, mode, tape != nullptr ? &tape->entry : nullptr);
  check_finite_tensor(x, "entry");
  static const char* kRclNames[3] = {"rcl1", "rcl2", "rcl3"};
  for (int i = 0; i < 3; ++i) {
    x = rcl_forward(params.rcls[i], x, params.config.time_steps, mode,
                    tape != nullptr ? &tape->rcls[i] : nullptr);
    check_finite_tensor(x, kRclNames[i]);
  }
  x = plain_forward(params.exit, x, mode, tape != nullptr ? &tape->exit : nullptr);
  check_finite_tensor(x, "exit");

  std::vector<ScoreField> scores;
  scores.reserve(batch.size());
  for (int n = 0; n < b; ++n) {
    ScoreField s(h, w);
    const float* src = &x.at(n, 0, 0, 0);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = src[i];
    scores.push_back(std::move(s));
  }
  return scores;
}

NetworkGrads backward(const NetworkParams& params, const ForwardTape& tape,
                      const std::vector<Grid<double>>& dscore) {
  const Tensor& out_z = tape.exit.z;
  if (static_cast<int>(dscore.size()) != out_z.n)
    throw std::invalid_argument("backward: dscore count does not match the taped batch");
  NetworkGrads g = zero_grads(params.config);

  Tensor dx(out_z.n, 1, out_z.h, out_z.w);
  for (int n = 0; n < out_z.n; ++n) {
    if (dscore[n].height() != out_z.h || dscore[n].width() != out_z.w)
      throw std::invalid_argument("backward: dscore shape does not match the taped batch");
    float* dst = &dx.at(n, 0, 0, 0);
    for (std::size_t i = 0; i < dscore[n].size(); ++i)
      dst[i] = static_cast<float>(dscore[n][i]);
  }

  dx = plain_backward(params.exit, tape.exit, dx, g.exit);
  for (int i = 2; i >= 0; --i) dx = rcl_backward(params.rcls[i], tape.rcls[i], dx, g.rcls[i]);
  plain_backward(params.entry, tape.entry, dx, g.entry);
  return g;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  auto& p = const_cast<NetworkParams&>(params);
  const std::vector<TensorRef> tensors = named_tensors(p);

  nlohmann::ordered_json header;
  header["format"] = "acwe-checkpoint";
  header["version"] = 1;
  header["config"] = {{"in_channels", params.config.in_channels},
                      {"feature_channels", params.config.feature_channels},
                      {"time_steps", params.config.time_steps},
                      {"prelu_init_slope", params.config.prelu_init_slope},
                      {"seed", params.config.seed}};
  header["tensors"] = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const TensorRef& t : tensors) {
    for (float x : *t.data) {
      if (!std::isfinite(x))
        throw std::runtime_error("save_checkpoint: non-finite values in tensor " + t.name);
    }
    header["tensors"].push_back(
        {{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data->size();
  }
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(os, static_cast<std::uint32_t>(header_str.size()));
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const TensorRef& t : tensors)
    os.write(reinterpret_cast<const char*>(t.data->data()),
             static_cast<std::streamsize>(t.data->size() * sizeof(float)));
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kCheckpointMagic) + 4 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint file");
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + sizeof(kCheckpointMagic), 4);
  const std::size_t header_start = sizeof(kCheckpointMagic) + 4;
  if (bytes.size() < header_start + header_len)
    throw std::runtime_error("load_checkpoint: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_start, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: bad header JSON in " + path.string() + ": " +
                             e.what());
  }
  if (header.value("format", "") != "acwe-checkpoint")
    throw std::runtime_error("load_checkpoint: unrecognized format field");
  if (header.value("version", 0) != 1)
    throw std::runtime_error("load_checkpoint: unsupported version");
  if (!header.contains("config") || !header.contains("tensors"))
    throw std::runtime_error("load_checkpoint: header missing config or tensors");

  const auto& cfg = header["config"];
  for (const char* key :
       {"in_channels", "feature_channels", "time_steps", "prelu_init_slope", "seed"}) {
    if (!cfg.contains(key))
      throw std::runtime_error(std::string("load_checkpoint: config missing field ") + key);
  }
  NetworkConfig config;
  config.in_channels = cfg["in_channels"].get<int>();
  config.feature_channels = cfg["feature_channels"].get<int>();
  config.time_steps = cfg["time_steps"].get<int>();
  config.prelu_init_slope = cfg["prelu_init_slope"].get<double>();
  config.seed = cfg["seed"].get<std::uint64_t>();

  NetworkParams params = make_params(config);
  const std::vector<TensorRef> expected = named_tensors(params);

  const char* payload = bytes.data() + header_start + header_len;
  const std::size_t payload_floats = (bytes.size() - header_start - header_len) / sizeof(float);

  std::set<std::string> known;
  for (const TensorRef& t : expected) known.insert(t.name);
  std::set<std::string> seen;
  for (const auto& entry : header["tensors"]) {
    const std::string name = entry.value("name", "");
    if (!known.count(name))
      throw std::runtime_error("load_checkpoint: unknown tensor " + name);
    seen.insert(name);
  }

  for (const TensorRef& t : expected) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : header["tensors"]) {
      if (e.value("name", "") == t.name) {
        entry = &e;
        break;
      }
    }
    if (entry == nullptr)
      throw std::runtime_error("load_checkpoint: missing tensor " + t.name);
    const std::vector<int> shape = (*entry)["shape"].get<std::vector<int>>();
    if (shape != t.shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for tensor " + t.name);
    const std::size_t offset = (*entry)["offset"].get<std::size_t>();
    if (offset + t.data->size() > payload_floats)
      throw std::runtime_error("load_checkpoint: payload too short for tensor " + t.name);
    std::memcpy(t.data->data(), payload + offset * sizeof(float),
                t.data->size() * sizeof(float));
    for (float x : *t.data) {
      if (!std::isfinite(x))
        throw std::runtime_error("load_checkpoint: non-finite values in tensor " + t.name);
    }
  }
  return params;
}

}  // namespace acwe::net
