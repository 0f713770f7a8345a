#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

// Forward/backward compute kernels. Each kernel is a pure function of its
// inputs plus an explicit seed; reduction orders are fixed so repeated runs
// are bit-identical. Convolution is cross-correlation (no kernel flip),
// evaluated through im2col + a plain GEMM.

namespace vggft {

struct KernelParams {
  int kernel_size = 3;
  int stride = 1;
  int padding = 0;
};

inline void validate_kernel_params(const KernelParams& p) {
  if (p.kernel_size < 1) fail(ErrorCode::Config, "kernel_size must be >= 1");
  if (p.stride < 1) fail(ErrorCode::Config, "stride must be >= 1");
  if (p.padding < 0) fail(ErrorCode::Config, "padding must be >= 0");
}

// C[M,N] += A[M,K] * B[K,N], all row-major. k-middle/n-inner order so the
// inner loop is a contiguous axpy.
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T: rows of both operands are contiguous dots.
template <typename T>
void matmul_abt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* brow = b + static_cast<size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]; m-outer so every output element accumulates
// in the same order regardless of callers.
template <typename T>
void matmul_atb_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    const T* brow = b + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* crow = c + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// conv2d

inline void conv2d_output_dims(int h, int w, const KernelParams& p, int* oh, int* ow) {
  validate_kernel_params(p);
  const int eh = h + 2 * p.padding - p.kernel_size;
  const int ew = w + 2 * p.padding - p.kernel_size;
  if (eh < 0 || ew < 0)
    fail(ErrorCode::Dimension, "conv2d: kernel " + std::to_string(p.kernel_size) +
                                   " exceeds padded input " + std::to_string(h) + "x" +
                                   std::to_string(w));
  if (eh % p.stride != 0 || ew % p.stride != 0)
    fail(ErrorCode::Config, "conv2d: stride " + std::to_string(p.stride) +
                                " does not produce an integer output size");
  *oh = eh / p.stride + 1;
  *ow = ew / p.stride + 1;
}

// Column buffer for one sample: [Cin*k*k, OH*OW] row-major.
template <typename T>
void im2col(const T* x, int cin, int h, int w, const KernelParams& p, int oh, int ow, T* col) {
  const int k = p.kernel_size;
  const int ncols = oh * ow;
  for (int c = 0; c < cin; ++c) {
    const T* xc = x + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) * ncols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * p.stride + ky - p.padding;
          T* dst = row + static_cast<size_t>(y) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = xc + static_cast<size_t>(iy) * w;
          for (int xpos = 0; xpos < ow; ++xpos) {
            const int ix = xpos * p.stride + kx - p.padding;
            dst[xpos] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_acc(const T* col, int cin, int h, int w, const KernelParams& p, int oh, int ow,
                T* x) {
  const int k = p.kernel_size;
  const int ncols = oh * ow;
  for (int c = 0; c < cin; ++c) {
    T* xc = x + static_cast<size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) * ncols;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * p.stride + ky - p.padding;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<size_t>(y) * ow;
          T* dst = xc + static_cast<size_t>(iy) * w;
          for (int xpos = 0; xpos < ow; ++xpos) {
            const int ix = xpos * p.stride + kx - p.padding;
            if (ix >= 0 && ix < w) dst[ix] += src[xpos];
          }
        }
      }
    }
  }
}

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& weights,
                          const TensorT<T>& bias, const KernelParams& p) {
  if (input.rank() != 4)
    fail(ErrorCode::Dimension, "conv2d: input must be NCHW, got " + input.shape_str());
  if (weights.rank() != 4)
    fail(ErrorCode::Dimension, "conv2d: weights must be [Cout,Cin,k,k], got " + weights.shape_str());
  if (weights.dim(2) != p.kernel_size || weights.dim(3) != p.kernel_size)
    fail(ErrorCode::Dimension, "conv2d: weight spatial dims " + weights.shape_str() +
                                   " do not match kernel_size " + std::to_string(p.kernel_size));
  if (input.dim(1) != weights.dim(1))
    fail(ErrorCode::Dimension, "conv2d: input channels " + std::to_string(input.dim(1)) +
                                   " vs weight channels " + std::to_string(weights.dim(1)) +
                                   " (axis 1)");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
    fail(ErrorCode::Dimension, "conv2d: bias must be [Cout]");

  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weights.dim(0);
  int oh = 0, ow = 0;
  conv2d_output_dims(h, w, p, &oh, &ow);

  TensorT<T> out({n, cout, oh, ow});
  const int kvol = cin * p.kernel_size * p.kernel_size;
  const int ncols = oh * ow;
  std::vector<T> col(static_cast<size_t>(kvol) * ncols);
  for (int i = 0; i < n; ++i) {
    im2col(input.ptr() + static_cast<size_t>(i) * cin * h * w, cin, h, w, p, oh, ow, col.data());
    T* dst = out.ptr() + static_cast<size_t>(i) * cout * ncols;
    for (int o = 0; o < cout; ++o)
      std::fill(dst + static_cast<size_t>(o) * ncols, dst + static_cast<size_t>(o + 1) * ncols,
                bias.data[o]);
    matmul_acc(weights.ptr(), col.data(), dst, cout, kvol, ncols);
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& weights,
                               const KernelParams& p, const TensorT<T>& upstream,
                               bool need_input_grad = true) {
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = weights.dim(0);
  int oh = 0, ow = 0;
  conv2d_output_dims(h, w, p, &oh, &ow);
  if (upstream.shape != std::vector<int>{n, cout, oh, ow})
    fail(ErrorCode::Dimension, "conv2d backward: upstream shape " + upstream.shape_str() +
                                   " does not match output");

  Conv2dGrads<T> g;
  g.weights = TensorT<T>(weights.shape);
  g.bias = TensorT<T>({cout});
  if (need_input_grad) g.input = TensorT<T>(input.shape);

  const int kvol = cin * p.kernel_size * p.kernel_size;
  const int ncols = oh * ow;
  std::vector<T> col(static_cast<size_t>(kvol) * ncols);
  std::vector<T> dcol(static_cast<size_t>(kvol) * ncols);
  for (int i = 0; i < n; ++i) {
    const T* dy = upstream.ptr() + static_cast<size_t>(i) * cout * ncols;
    for (int o = 0; o < cout; ++o) {
      const T* row = dy + static_cast<size_t>(o) * ncols;
      T acc = T(0);
      for (int j = 0; j < ncols; ++j) acc += row[j];
      g.bias.data[o] += acc;
    }
    im2col(input.ptr() + static_cast<size_t>(i) * cin * h * w, cin, h, w, p, oh, ow, col.data());
    matmul_abt_acc(dy, col.data(), g.weights.ptr(), cout, ncols, kvol);
    if (need_input_grad) {
      std::fill(dcol.begin(), dcol.end(), T(0));
      matmul_atb_acc(weights.ptr(), dy, dcol.data(), cout, kvol, ncols);
      col2im_acc(dcol.data(), cin, h, w, p, oh, ow,
                 g.input.ptr() + static_cast<size_t>(i) * cin * h * w);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool 2x2 stride 2

template <typename T>
struct MaxPoolRecord {
  TensorT<T> output;
  std::vector<uint8_t> argmax;  // winner position in the 2x2 window, row-major 0..3
  std::vector<int> input_shape;
  bool valid = false;
};

template <typename T>
MaxPoolRecord<T> maxpool2x2_forward(const TensorT<T>& input) {
  if (input.rank() != 4)
    fail(ErrorCode::Dimension, "maxpool: input must be NCHW, got " + input.shape_str());
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    fail(ErrorCode::Config, "maxpool: spatial dims must be even, got " + std::to_string(h) + "x" +
                                std::to_string(w));

  MaxPoolRecord<T> rec;
  rec.output = TensorT<T>({n, c, h / 2, w / 2});
  rec.argmax.resize(rec.output.size());
  rec.input_shape = input.shape;
  rec.valid = true;

  size_t oi = 0;
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T* plane = input.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
      for (int y = 0; y < h; y += 2) {
        for (int x = 0; x < w; x += 2, ++oi) {
          // ties go to the first position in row-major window order
          T best = plane[static_cast<size_t>(y) * w + x];
          uint8_t win = 0;
          const T v1 = plane[static_cast<size_t>(y) * w + x + 1];
          if (v1 > best) { best = v1; win = 1; }
          const T v2 = plane[static_cast<size_t>(y + 1) * w + x];
          if (v2 > best) { best = v2; win = 2; }
          const T v3 = plane[static_cast<size_t>(y + 1) * w + x + 1];
          if (v3 > best) { best = v3; win = 3; }
          rec.output.data[oi] = best;
          rec.argmax[oi] = win;
        }
      }
    }
  }
  return rec;
}

template <typename T>
TensorT<T> maxpool2x2_backward(const MaxPoolRecord<T>& rec, const TensorT<T>& upstream) {
  if (!rec.valid)
    fail(ErrorCode::State, "maxpool backward: no forward record");
  if (upstream.shape != rec.output.shape)
    fail(ErrorCode::Dimension, "maxpool backward: upstream shape " + upstream.shape_str() +
                                   " does not match pooled output");
  const int n = rec.input_shape[0], c = rec.input_shape[1];
  const int h = rec.input_shape[2], w = rec.input_shape[3];
  TensorT<T> dx(rec.input_shape);
  size_t oi = 0;
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      T* plane = dx.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
      for (int y = 0; y < h; y += 2) {
        for (int x = 0; x < w; x += 2, ++oi) {
          const uint8_t win = rec.argmax[oi];
          const int iy = y + (win >> 1);
          const int ix = x + (win & 1);
          plane[static_cast<size_t>(iy) * w + ix] += upstream.data[oi];
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// dense

template <typename T>
TensorT<T> dense_forward(const TensorT<T>& input, const TensorT<T>& weights,
                         const TensorT<T>& bias) {
  if (input.rank() != 2)
    fail(ErrorCode::Dimension, "dense: input must be [N,Din], got " + input.shape_str());
  if (weights.rank() != 2)
    fail(ErrorCode::Dimension, "dense: weights must be [Dout,Din], got " + weights.shape_str());
  if (input.dim(1) != weights.dim(1))
    fail(ErrorCode::Dimension, "dense: input width " + std::to_string(input.dim(1)) +
                                   " vs weight width " + std::to_string(weights.dim(1)) +
                                   " (axis 1)");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0))
    fail(ErrorCode::Dimension, "dense: bias must be [Dout]");

  const int n = input.dim(0), din = input.dim(1), dout = weights.dim(0);
  TensorT<T> out({n, dout});
  for (int i = 0; i < n; ++i) {
    T* orow = out.ptr() + static_cast<size_t>(i) * dout;
    for (int o = 0; o < dout; ++o) orow[o] = bias.data[o];
  }
  matmul_abt_acc(input.ptr(), weights.ptr(), out.ptr(), n, din, dout);
  return out;
}

template <typename T>
struct DenseGrads {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const TensorT<T>& input, const TensorT<T>& weights,
                             const TensorT<T>& upstream, bool need_input_grad = true) {
  const int n = input.dim(0), din = input.dim(1), dout = weights.dim(0);
  if (upstream.shape != std::vector<int>{n, dout})
    fail(ErrorCode::Dimension, "dense backward: upstream shape " + upstream.shape_str());
  DenseGrads<T> g;
  g.weights = TensorT<T>(weights.shape);
  g.bias = TensorT<T>({dout});
  matmul_atb_acc(upstream.ptr(), input.ptr(), g.weights.ptr(), n, dout, din);
  for (int i = 0; i < n; ++i) {
    const T* urow = upstream.ptr() + static_cast<size_t>(i) * dout;
    for (int o = 0; o < dout; ++o) g.bias.data[o] += urow[o];
  }
  if (need_input_grad) {
    g.input = TensorT<T>(input.shape);
    matmul_acc(upstream.ptr(), weights.ptr(), g.input.ptr(), n, dout, din);
  }
  return g;
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& input) {
  TensorT<T> out(input.shape);
  for (size_t i = 0; i < input.size(); ++i)
    out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
  return out;
}

// gradient flows only where the forward input was strictly positive
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& input, const TensorT<T>& upstream) {
  if (!same_shape(input, upstream))
    fail(ErrorCode::Dimension, "relu backward: shape mismatch");
  TensorT<T> dx(input.shape);
  for (size_t i = 0; i < input.size(); ++i)
    dx.data[i] = input.data[i] > T(0) ? upstream.data[i] : T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// dropout (inverted: survivors scaled by 1/(1-p) at training time)

struct DropoutState {
  double rate = 0.5;
  bool training = false;
  uint64_t seed = 0;
  std::vector<uint8_t> mask;
  bool has_mask = false;
};

template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& input, DropoutState& state) {
  if (state.rate < 0.0 || state.rate >= 1.0)
    fail(ErrorCode::Config, "dropout: rate must be in [0,1), got " + std::to_string(state.rate));
  state.mask.assign(input.size(), 1);
  state.has_mask = true;
  if (!state.training) return input;  // inference: identity, mask all-ones

  TensorT<T> out(input.shape);
  Rng rng(state.seed);
  const T scale = T(1) / (T(1) - static_cast<T>(state.rate));
  for (size_t i = 0; i < input.size(); ++i) {
    if (rng.uniform() < state.rate) {
      state.mask[i] = 0;
      out.data[i] = T(0);
    } else {
      out.data[i] = input.data[i] * scale;
    }
  }
  return out;
}

template <typename T>
TensorT<T> dropout_backward(const DropoutState& state, const TensorT<T>& upstream) {
  if (!state.has_mask)
    fail(ErrorCode::State, "dropout backward: no recorded forward mask");
  if (state.mask.size() != upstream.size())
    fail(ErrorCode::Dimension, "dropout backward: mask/upstream size mismatch");
  if (!state.training) return upstream;
  TensorT<T> dx(upstream.shape);
  const T scale = T(1) / (T(1) - static_cast<T>(state.rate));
  for (size_t i = 0; i < upstream.size(); ++i)
    dx.data[i] = state.mask[i] ? upstream.data[i] * scale : T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// losses. Both return mean loss plus the probabilities; the combined
// backward maps (probs, labels) straight to logit gradients.

template <typename T>
void validate_one_hot(const TensorT<T>& labels) {
  const int n = labels.dim(0), k = labels.dim(1);
  for (int i = 0; i < n; ++i) {
    int ones = 0;
    for (int j = 0; j < k; ++j) {
      const T v = labels.at2(i, j);
      if (v == T(1))
        ++ones;
      else if (v != T(0))
        fail(ErrorCode::Input, "labels row " + std::to_string(i) + " is not one-hot");
    }
    if (ones != 1)
      fail(ErrorCode::Input, "labels row " + std::to_string(i) + " is not one-hot");
  }
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  TensorT<T> probs;
};

template <typename T>
LossResult<T> softmax_xent_forward(const TensorT<T>& logits, const TensorT<T>& labels) {
  if (logits.rank() != 2 || logits.dim(1) < 2)
    fail(ErrorCode::Config, "softmax: logits must be [N,K], K >= 2, got " + logits.shape_str());
  if (!same_shape(logits, labels))
    fail(ErrorCode::Dimension, "softmax: labels shape " + labels.shape_str() +
                                   " does not match logits " + logits.shape_str());
  validate_one_hot(labels);

  const int n = logits.dim(0), k = logits.dim(1);
  LossResult<T> res;
  res.probs = TensorT<T>(logits.shape);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* row = logits.ptr() + static_cast<size_t>(i) * k;
    T* prow = res.probs.ptr() + static_cast<size_t>(i) * k;
    // max subtraction keeps exp() in range
    double mx = static_cast<double>(row[0]);
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      prow[j] = static_cast<T>(e);
      sum += e;
    }
    double logp_true = 0.0;
    for (int j = 0; j < k; ++j) {
      const double p = static_cast<double>(prow[j]) / sum;
      prow[j] = static_cast<T>(p);
      if (labels.at2(i, j) == T(1))
        logp_true = static_cast<double>(row[j]) - mx - std::log(sum);
    }
    total -= logp_true;
  }
  res.loss = total / n;
  return res;
}

template <typename T>
TensorT<T> softmax_xent_backward(const TensorT<T>& probs, const TensorT<T>& labels) {
  if (!same_shape(probs, labels)) fail(ErrorCode::Dimension, "softmax backward: shape mismatch");
  const int n = probs.dim(0);
  TensorT<T> dx(probs.shape);
  for (size_t i = 0; i < probs.size(); ++i)
    dx.data[i] = (probs.data[i] - labels.data[i]) / static_cast<T>(n);
  return dx;
}

// Two-unit sigmoid head: per-unit binary cross-entropy averaged over all
// N*2 units, predicted class = argmax of the two unit outputs.
template <typename T>
LossResult<T> sigmoid_bce_forward(const TensorT<T>& logits, const TensorT<T>& labels) {
  if (logits.rank() != 2 || logits.dim(1) != 2)
    fail(ErrorCode::Config, "sigmoid loss: logits must be [N,2], got " + logits.shape_str());
  if (!same_shape(logits, labels))
    fail(ErrorCode::Dimension, "sigmoid loss: labels shape mismatch");
  validate_one_hot(labels);

  const int n = logits.dim(0);
  LossResult<T> res;
  res.probs = TensorT<T>(logits.shape);
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double x = static_cast<double>(logits.data[i]);
    const double y = static_cast<double>(labels.data[i]);
    res.probs.data[i] = static_cast<T>(1.0 / (1.0 + std::exp(-x)));
    // stable form of -(y log p + (1-y) log(1-p))
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  res.loss = total / (static_cast<double>(n) * 2.0);
  return res;
}

template <typename T>
TensorT<T> sigmoid_bce_backward(const TensorT<T>& probs, const TensorT<T>& labels) {
  if (!same_shape(probs, labels)) fail(ErrorCode::Dimension, "sigmoid backward: shape mismatch");
  const int n = probs.dim(0);
  TensorT<T> dx(probs.shape);
  for (size_t i = 0; i < probs.size(); ++i)
    dx.data[i] = (probs.data[i] - labels.data[i]) / static_cast<T>(n * 2);
  return dx;
}

// ---------------------------------------------------------------------------
// finite differences (the verification oracle; 64-bit only)

inline Tensor64 finite_diff_gradient(const std::function<double(const Tensor64&)>& f,
                                     const Tensor64& x, double h) {
  if (h <= 0.0) fail(ErrorCode::Config, "finite differences: step must be positive");
  Tensor64 grad(x.shape);
  Tensor64 probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + h;
    const double fp = f(probe);
    probe.data[i] = orig - h;
    const double fm = f(probe);
    probe.data[i] = orig;
    grad.data[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace vggft
