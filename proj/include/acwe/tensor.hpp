#pragma once

#include <cstddef>
#include <vector>

namespace acwe::net {

/// Dense NCHW float tensor for network activations and batches.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  std::size_t size() const { return v.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  float& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  const float& at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/// 3x3 same-padding convolution, no bias. Weights are row-major
/// [out_c][in_c][3][3].
Tensor conv3x3(const Tensor& in, const std::vector<float>& w, int out_c);

/// Single-item kernel behind conv3x3: accumulates the correlation into out,
/// which the caller must have initialized (zeros for a plain convolution, a
/// bias plane to fold one in). in is [in_c][h][wd], out is [out_c][h][wd].
void conv3x3_item(const float* in, const float* w, float* out, int in_c, int out_c, int h, int wd);

/// Gradient wrt the convolution input: correlation with the transposed kernel.
Tensor conv3x3_input_grad(const std::vector<float>& w, int out_c, int in_c,
                          const Tensor& dout);

/// Accumulates the weight gradient of conv3x3(in, w) given dout. dw must
/// already have size out_c*in_c*9.
void conv3x3_weight_grad(const Tensor& in, const Tensor& dout, std::vector<float>& dw);

}  // namespace acwe::net
