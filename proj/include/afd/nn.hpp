/*
 * Copyright 2026 The AFD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Tensor primitives for the dense network: same-size convolution, batch
// normalization, ReLU, 2x2 average pooling and global average pooling, each
// with its backward pass.
//
// All feature maps are NCHW. A "channel view" addresses a contiguous run of
// channels inside a larger NCHW buffer, which is how dense blocks concatenate
// without copying: every layer appends its output channels to one shared
// block buffer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace afd::nn {

template <typename T>
struct ChannelView {
  T* data = nullptr;
  int n = 0;        // batch
  int c_total = 0;  // channels in the underlying buffer
  int c0 = 0;       // first channel of the view
  int c = 0;        // channels in the view
  int h = 0;
  int w = 0;

  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  T* channel(int sample, int ch) const {
    return data + (static_cast<std::size_t>(sample) * static_cast<std::size_t>(c_total) +
                   static_cast<std::size_t>(c0 + ch)) * plane();
  }
};

template <typename T>
ChannelView<T> dense_view(T* data, int n, int c, int h, int w) {
  return {data, n, c, 0, c, h, w};
}

namespace detail {

// Column matrix for output rows [y0, y1):
// col[(ci * k + ky) * k + kx][(y - y0) * w + x] = in[ci][y + ky - pad][x + kx - pad]
// (zero outside the image). Working in row bands keeps col in cache.
template <typename T>
void im2col_band(const ChannelView<const T>& in, int sample, int k, int y0, int y1, std::vector<T>& col) {
  const int pad = k / 2;
  const int h = in.h, w = in.w;
  const std::size_t npix = static_cast<std::size_t>(y1 - y0) * w;
  col.assign(static_cast<std::size_t>(in.c) * k * k * npix, T(0));
  for (int ci = 0; ci < in.c; ++ci) {
    const T* src = in.channel(sample, ci);
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      const int y_lo = std::max(y0, dy < 0 ? -dy : 0);
      const int y_hi = std::min(y1, dy > 0 ? h - dy : h);
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        const int x_lo = dx < 0 ? -dx : 0;
        const int x_hi = dx > 0 ? w - dx : w;
        T* dst = col.data() + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * npix;
        for (int y = y_lo; y < y_hi; ++y) {
          T* drow = dst + static_cast<std::size_t>(y - y0) * w;
          const T* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
          for (int x = x_lo; x < x_hi; ++x) drow[x] = srow[x];
        }
      }
    }
  }
}

// Scatter-add of a band's column gradient back onto the input.
template <typename T>
void col2im_band_add(const std::vector<T>& dcol, int k, int y0, int y1, const ChannelView<T>& din, int sample) {
  const int pad = k / 2;
  const int h = din.h, w = din.w;
  const std::size_t npix = static_cast<std::size_t>(y1 - y0) * w;
  for (int ci = 0; ci < din.c; ++ci) {
    T* dst = din.channel(sample, ci);
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      const int y_lo = std::max(y0, dy < 0 ? -dy : 0);
      const int y_hi = std::min(y1, dy > 0 ? h - dy : h);
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        const int x_lo = dx < 0 ? -dx : 0;
        const int x_hi = dx > 0 ? w - dx : w;
        const T* src = dcol.data() + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * npix;
        for (int y = y_lo; y < y_hi; ++y) {
          T* drow = dst + static_cast<std::size_t>(y + dy) * w + dx;
          const T* srow = src + static_cast<std::size_t>(y - y0) * w;
          for (int x = x_lo; x < x_hi; ++x) drow[x] += srow[x];
        }
      }
    }
  }
}

inline int band_rows(int w) { return std::max(1, 512 / std::max(1, w)); }

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace detail

// out[:, co] = sum_ci conv(in[:, ci], weight[co, ci]) with a k x k kernel,
// zero padding k/2, stride 1. Output is overwritten. weight is [cout][cin][k][k].
template <typename T>
void conv_forward(const ChannelView<const T>& in, const T* weight, int k, const ChannelView<T>& out) {
  const std::size_t rows = static_cast<std::size_t>(in.c) * k * k;
  const int band = detail::band_rows(in.w);
  std::vector<T> col;
  std::vector<T*> dst(static_cast<std::size_t>(out.c));
  for (int s = 0; s < in.n; ++s) {
    for (int y0 = 0; y0 < in.h; y0 += band) {
      const int y1 = std::min(in.h, y0 + band);
      const std::size_t npix = static_cast<std::size_t>(y1 - y0) * in.w;
      detail::im2col_band(in, s, k, y0, y1, col);
      for (int co = 0; co < out.c; ++co) {
        dst[static_cast<std::size_t>(co)] = out.channel(s, co) + static_cast<std::size_t>(y0) * in.w;
        for (std::size_t i = 0; i < npix; ++i) dst[static_cast<std::size_t>(co)][i] = T(0);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const T* c = col.data() + r * npix;
        for (int co = 0; co < out.c; ++co) {
          detail::axpy(weight[static_cast<std::size_t>(co) * rows + r], c, dst[static_cast<std::size_t>(co)], npix);
        }
      }
    }
  }
}

// Accumulates dweight (+=) and, when din.data is non-null, din (+=).
template <typename T>
void conv_backward(const ChannelView<const T>& in, const T* weight, int k, const ChannelView<const T>& dout,
                   T* dweight, const ChannelView<T>& din) {
  const std::size_t rows = static_cast<std::size_t>(in.c) * k * k;
  const int band = detail::band_rows(in.w);
  std::vector<T> col, dcol;
  std::vector<const T*> g(static_cast<std::size_t>(dout.c));
  for (int s = 0; s < in.n; ++s) {
    for (int y0 = 0; y0 < in.h; y0 += band) {
      const int y1 = std::min(in.h, y0 + band);
      const std::size_t npix = static_cast<std::size_t>(y1 - y0) * in.w;
      detail::im2col_band(in, s, k, y0, y1, col);
      if (din.data) dcol.assign(col.size(), T(0));
      for (int co = 0; co < dout.c; ++co) {
        g[static_cast<std::size_t>(co)] = dout.channel(s, co) + static_cast<std::size_t>(y0) * in.w;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const T* c = col.data() + r * npix;
        for (int co = 0; co < dout.c; ++co) {
          dweight[static_cast<std::size_t>(co) * rows + r] += detail::dot(g[static_cast<std::size_t>(co)], c, npix);
          if (din.data) {
            detail::axpy(weight[static_cast<std::size_t>(co) * rows + r], g[static_cast<std::size_t>(co)],
                         dcol.data() + r * npix, npix);
          }
        }
      }
      if (din.data) detail::col2im_band_add(dcol, k, y0, y1, din, s);
    }
  }
}

// Per-layer batch-norm state needed by the backward pass.
template <typename T>
struct BnCache {
  std::vector<T> xhat;     // normalized input, contiguous N x C x H x W
  std::vector<T> inv_std;  // per channel
  std::vector<T> act;      // relu(gamma * xhat + beta)
};

struct BnOptions {
  bool training = true;
  bool update_running = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

// BN followed by ReLU. In training mode batch statistics are used (biased
// variance) and the running statistics move toward them (unbiased variance).
template <typename T>
void bn_relu_forward(const ChannelView<const T>& x, const T* gamma, const T* beta, T* running_mean,
                     T* running_var, const BnOptions& opt, BnCache<T>& cache) {
  const std::size_t plane = x.plane();
  const std::size_t count = plane * static_cast<std::size_t>(x.n);
  const std::size_t total = count * static_cast<std::size_t>(x.c);
  cache.xhat.resize(total);
  cache.act.resize(total);
  cache.inv_std.assign(static_cast<std::size_t>(x.c), T(0));
  for (int ch = 0; ch < x.c; ++ch) {
    double mean, var;
    if (opt.training) {
      // Per-plane partial sums in T (vectorized), combined in double.
      double sum = 0.0;
      for (int s = 0; s < x.n; ++s) {
        const T* src = x.channel(s, ch);
        T part = T(0);
#pragma omp simd reduction(+ : part)
        for (std::size_t i = 0; i < plane; ++i) part += src[i];
        sum += static_cast<double>(part);
      }
      mean = sum / static_cast<double>(count);
      const T m = static_cast<T>(mean);
      double sq = 0.0;
      for (int s = 0; s < x.n; ++s) {
        const T* src = x.channel(s, ch);
        T part = T(0);
#pragma omp simd reduction(+ : part)
        for (std::size_t i = 0; i < plane; ++i) part += (src[i] - m) * (src[i] - m);
        sq += static_cast<double>(part);
      }
      var = sq / static_cast<double>(count);
      if (opt.update_running) {
        const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean[ch] = static_cast<T>((1.0 - opt.momentum) * running_mean[ch] + opt.momentum * mean);
        running_var[ch] = static_cast<T>((1.0 - opt.momentum) * running_var[ch] + opt.momentum * unbiased);
      }
    } else {
      mean = static_cast<double>(running_mean[ch]);
      var = static_cast<double>(running_var[ch]);
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
    const T m = static_cast<T>(mean);
    cache.inv_std[static_cast<std::size_t>(ch)] = inv;
    const T g = gamma[ch], b = beta[ch];
    for (int s = 0; s < x.n; ++s) {
      const T* src = x.channel(s, ch);
      const std::size_t base = (static_cast<std::size_t>(s) * x.c + ch) * plane;
      T* xh = cache.xhat.data() + base;
      T* a = cache.act.data() + base;
#pragma omp simd
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (src[i] - m) * inv;
        const T y = g * xh[i] + b;
        a[i] = y > T(0) ? y : T(0);
      }
    }
  }
}

// Backward of bn_relu_forward (training mode). dact is modified in place
// (ReLU mask applied). dgamma/dbeta and dx are accumulated (+=).
template <typename T>
void bn_relu_backward(const BnCache<T>& cache, std::vector<T>& dact, int n, int c, std::size_t plane,
                      const T* gamma, T* dgamma, T* dbeta, const ChannelView<T>& dx) {
  const double count = static_cast<double>(plane) * n;
  for (std::size_t i = 0; i < dact.size(); ++i) {
    if (!(cache.act[i] > T(0))) dact[i] = T(0);
  }
  for (int ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * plane;
      const T* dy = dact.data() + base;
      const T* xh = cache.xhat.data() + base;
      T part_dy = T(0), part_dyx = T(0);
#pragma omp simd reduction(+ : part_dy, part_dyx)
      for (std::size_t i = 0; i < plane; ++i) {
        part_dy += dy[i];
        part_dyx += dy[i] * xh[i];
      }
      sum_dy += static_cast<double>(part_dy);
      sum_dy_xhat += static_cast<double>(part_dyx);
    }
    dgamma[ch] += static_cast<T>(sum_dy_xhat);
    dbeta[ch] += static_cast<T>(sum_dy);
    // dx = gamma * inv_std / M * (M * dy - sum(dy) - xhat * sum(dy * xhat))
    const T scale = static_cast<T>(gamma[ch] * cache.inv_std[static_cast<std::size_t>(ch)] / count);
    const T mean_dy = static_cast<T>(sum_dy);
    const T mean_dyx = static_cast<T>(sum_dy_xhat);
    const T m = static_cast<T>(count);
    for (int s = 0; s < n; ++s) {
      const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * plane;
      T* dst = dx.channel(s, ch);
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] += scale * (m * dact[base + i] - mean_dy - cache.xhat[base + i] * mean_dyx);
      }
    }
  }
}

// 2x2 average pooling, stride 2 (odd trailing rows/columns are dropped).
template <typename T>
void avgpool2_forward(const ChannelView<const T>& in, const ChannelView<T>& out) {
  for (int s = 0; s < in.n; ++s) {
    for (int ch = 0; ch < in.c; ++ch) {
      const T* src = in.channel(s, ch);
      T* dst = out.channel(s, ch);
      for (int y = 0; y < out.h; ++y) {
        const T* r0 = src + static_cast<std::size_t>(2 * y) * in.w;
        const T* r1 = r0 + in.w;
        for (int x = 0; x < out.w; ++x) {
          dst[static_cast<std::size_t>(y) * out.w + x] =
              T(0.25) * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
      }
    }
  }
}

// din is overwritten.
template <typename T>
void avgpool2_backward(const ChannelView<const T>& dout, const ChannelView<T>& din) {
  for (int s = 0; s < dout.n; ++s) {
    for (int ch = 0; ch < dout.c; ++ch) {
      const T* g = dout.channel(s, ch);
      T* dst = din.channel(s, ch);
      for (std::size_t i = 0; i < din.plane(); ++i) dst[i] = T(0);
      for (int y = 0; y < dout.h; ++y) {
        T* r0 = dst + static_cast<std::size_t>(2 * y) * din.w;
        T* r1 = r0 + din.w;
        for (int x = 0; x < dout.w; ++x) {
          const T v = T(0.25) * g[static_cast<std::size_t>(y) * dout.w + x];
          r0[2 * x] = v;
          r0[2 * x + 1] = v;
          r1[2 * x] = v;
          r1[2 * x + 1] = v;
        }
      }
    }
  }
}

// out[s * c + ch] = mean over the plane.
template <typename T>
void gap_forward(const ChannelView<const T>& in, T* out) {
  for (int s = 0; s < in.n; ++s) {
    for (int ch = 0; ch < in.c; ++ch) {
      const T* src = in.channel(s, ch);
      double acc = 0.0;
      for (std::size_t i = 0; i < in.plane(); ++i) acc += static_cast<double>(src[i]);
      out[static_cast<std::size_t>(s) * in.c + ch] = static_cast<T>(acc / static_cast<double>(in.plane()));
    }
  }
}

template <typename T>
T sigmoid(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace afd::nn
