#include "p2p/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <type_traits>

#include "p2p/error.hpp"

namespace p2p::ad {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ConstMap = Eigen::Map<const MatR<T>>;
template <typename T>
using MutMap = Eigen::Map<MatR<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

template <typename T>
void require_image(const Tensor<T>& x, const char* op) {
  require(x.rank() == 4, std::string(op) + ": expected [B,H,W,C] input, got " + to_string(x.shape()));
}

// y[rows, out] = x[rows, in] * w[in, out] + b[out]; shared by the dense and
// 1x1 convolution ops, which only differ in how rows are counted.
template <typename T>
Tensor<T> affine_rows(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                      std::size_t rows, std::size_t in, Shape out_shape) {
  const std::size_t out = w.dim(1);
  std::vector<T> y(rows * out);
  MutMap<T> ym(y.data(), rows, out);
  ym.noalias() = ConstMap<T>(x.data().data(), rows, in) * ConstMap<T>(w.data().data(), in, out);
  ym.rowwise() += Eigen::Map<const RowVec<T>>(b.data().data(), out);

  return Tensor<T>::from_op(
      std::move(out_shape), std::move(y), {x, w, b},
      [rows, in, out](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        ConstMap<T> dy(self.grad.data(), rows, out);
        if (px.requires_grad) {
          MutMap<T>(px.ensure_grad().data(), rows, in).noalias() +=
              dy * ConstMap<T>(pw.value.data(), in, out).transpose();
        }
        if (pw.requires_grad) {
          MutMap<T>(pw.ensure_grad().data(), in, out).noalias() +=
              ConstMap<T>(px.value.data(), rows, in).transpose() * dy;
        }
        if (pb.requires_grad) {
          T* db = pb.ensure_grad().data();
          const T* g = self.grad.data();
          for (std::size_t r = 0; r < rows; ++r) {
#pragma omp simd
            for (std::size_t o = 0; o < out; ++o) db[o] += g[r * out + o];
          }
        }
      });
}

// Channels handled per register-resident accumulator block.
constexpr std::size_t kChannelBlock = 32;

// dst[n,y,x,c] (+)= sum_{ky,kx} src[n, y + sign*(ky-r), x + sign*(kx-r), c] * kw[ky,kx,c].
// sign = 1 is the forward correlation, sign = -1 its transpose (input gradient).
template <typename T>
void depthwise_gather(const T* src, const T* kw, T* dst, std::size_t B, std::size_t H, std::size_t W,
                      std::size_t C, std::size_t k, std::ptrdiff_t sign, bool accumulate) {
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto Hs = static_cast<std::ptrdiff_t>(H), Ws = static_cast<std::ptrdiff_t>(W);
  const auto ks = static_cast<std::ptrdiff_t>(k);
  auto block = [&](std::size_t n, std::ptrdiff_t y, std::ptrdiff_t x, std::size_t c0, auto width) {
    T acc[kChannelBlock] = {};
    for (std::ptrdiff_t ky = 0; ky < ks; ++ky) {
      const std::ptrdiff_t iy = y + sign * (ky - r);
      if (iy < 0 || iy >= Hs) continue;
      for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
        const std::ptrdiff_t ix = x + sign * (kx - r);
        if (ix < 0 || ix >= Ws) continue;
        const T* ps = src + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)) * C + c0;
        const T* pk = kw + static_cast<std::size_t>(ky * ks + kx) * C + c0;
#pragma omp simd
        for (std::size_t c = 0; c < width; ++c) acc[c] += ps[c] * pk[c];
      }
    }
    T* out = dst + ((n * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x)) * C + c0;
    if (accumulate) {
      for (std::size_t c = 0; c < width; ++c) out[c] += acc[c];
    } else {
      for (std::size_t c = 0; c < width; ++c) out[c] = acc[c];
    }
  };
  for (std::size_t n = 0; n < B; ++n)
    for (std::ptrdiff_t y = 0; y < Hs; ++y)
      for (std::ptrdiff_t x = 0; x < Ws; ++x)
        for (std::size_t c0 = 0; c0 < C; c0 += kChannelBlock) {
          if (C - c0 >= kChannelBlock) {
            block(n, y, x, c0, std::integral_constant<std::size_t, kChannelBlock>{});
          } else {
            block(n, y, x, c0, C - c0);
          }
        }
}

// dk[ky,kx,c] += sum over sites of dy[n,y,x,c] * src[n, y+ky-r, x+kx-r, c].
template <typename T>
void depthwise_kernel_grad(const T* src, const T* dy, T* dk, std::size_t B, std::size_t H, std::size_t W,
                           std::size_t C, std::size_t k) {
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto Hs = static_cast<std::ptrdiff_t>(H), Ws = static_cast<std::ptrdiff_t>(W);
  const auto ks = static_cast<std::ptrdiff_t>(k);
  for (std::size_t n = 0; n < B; ++n) {
    for (std::ptrdiff_t y = 0; y < Hs; ++y) {
      for (std::ptrdiff_t ky = 0; ky < ks; ++ky) {
        const std::ptrdiff_t iy = y + ky - r;
        if (iy < 0 || iy >= Hs) continue;
        for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
          // Output columns whose input column x + kx - r lies inside the image.
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, r - kx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(Ws, Ws + r - kx);
          if (x0 >= x1) continue;
          const T* po = dy + ((n * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x0)) * C;
          const T* pi = src + ((n * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(x0 + kx - r)) * C;
          T* pk = dk + static_cast<std::size_t>(ky * ks + kx) * C;
          const auto count = static_cast<std::size_t>(x1 - x0);
          auto block = [&](std::size_t c0, auto width) {
            T acc[kChannelBlock] = {};
            for (std::size_t s = 0; s < count; ++s) {
              const T* a = po + s * C + c0;
              const T* b = pi + s * C + c0;
#pragma omp simd
              for (std::size_t c = 0; c < width; ++c) acc[c] += a[c] * b[c];
            }
            for (std::size_t c = 0; c < width; ++c) pk[c0 + c] += acc[c];
          };
          for (std::size_t c0 = 0; c0 < C; c0 += kChannelBlock) {
            if (C - c0 >= kChannelBlock) {
              block(c0, std::integral_constant<std::size_t, kChannelBlock>{});
            } else {
              block(c0, C - c0);
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.rank() == 2 && w.rank() == 2 && b.rank() == 1,
          "fully_connected: expected x[B,I], w[I,O], b[O]");
  require(x.dim(1) == w.dim(0), "fully_connected: inner dimensions differ: x" +
                                    to_string(x.shape()) + " w" + to_string(w.shape()));
  require(b.dim(0) == w.dim(1), "fully_connected: bias size differs from output width");
  return affine_rows(x, w, b, x.dim(0), x.dim(1), {x.dim(0), w.dim(1)});
}

template <typename T>
Tensor<T> conv2d_1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_image(x, "conv2d_1x1");
  require(w.rank() == 2 && b.rank() == 1, "conv2d_1x1: expected w[Cin,Cout], b[Cout]");
  require(x.dim(3) == w.dim(0), "conv2d_1x1: input has " + std::to_string(x.dim(3)) +
                                    " channels, weights expect " + std::to_string(w.dim(0)));
  require(b.dim(0) == w.dim(1), "conv2d_1x1: bias size differs from output channels");
  const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2);
  return affine_rows(x, w, b, rows, x.dim(3), {x.dim(0), x.dim(1), x.dim(2), w.dim(1)});
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel) {
  require_image(x, "depthwise_conv2d");
  require(kernel.rank() == 3 && kernel.dim(0) == kernel.dim(1),
          "depthwise_conv2d: expected square kernel [k,k,C], got " + to_string(kernel.shape()));
  const std::size_t k = kernel.dim(0);
  if (k % 2 == 0) throw ConfigError("depthwise_conv2d: kernel size must be odd, got " + std::to_string(k));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  require(kernel.dim(2) == C, "depthwise_conv2d: kernel channels differ from input channels");
  std::vector<T> y(x.size());
  depthwise_gather(x.data().data(), kernel.data().data(), y.data(), B, H, W, C, k, 1, false);

  return Tensor<T>::from_op(x.shape(), std::move(y), {x, kernel}, [B, H, W, C, k](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pk = *self.parents[1];
    const T* dy = self.grad.data();
    if (px.requires_grad) {
      depthwise_gather(dy, pk.value.data(), px.ensure_grad().data(), B, H, W, C, k, -1, true);
    }
    if (pk.requires_grad) depthwise_kernel_grad(px.value.data(), dy, pk.ensure_grad().data(), B, H, W, C, k);
  });
}

template <typename T>
Tensor<T> separable_conv2d(const Tensor<T>& x, const Tensor<T>& depthwise,
                           const Tensor<T>& pointwise, const Tensor<T>& b) {
  return conv2d_1x1(depthwise_conv2d(x, depthwise), pointwise, b);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& b) {
  require_image(x, "conv2d");
  require(kernel.rank() == 4 && kernel.dim(0) == kernel.dim(1),
          "conv2d: expected kernel [k,k,Cin,Cout], got " + to_string(kernel.shape()));
  const std::size_t k = kernel.dim(0);
  if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd, got " + std::to_string(k));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Cin = x.dim(3);
  const std::size_t Cout = kernel.dim(3);
  require(kernel.dim(2) == Cin, "conv2d: kernel input channels differ from input channels");
  require(b.rank() == 1 && b.dim(0) == Cout, "conv2d: bias size differs from output channels");
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto Hs = static_cast<std::ptrdiff_t>(H), Ws = static_cast<std::ptrdiff_t>(W);
  const std::size_t taps = k * k;

  // Kernel reordered to [tap][out][in] so the inner loops run over contiguous
  // input channels.
  auto transpose_kernel = [=](const T* kw) {
    std::vector<T> kt(taps * Cout * Cin);
    for (std::size_t t = 0; t < taps; ++t)
      for (std::size_t c = 0; c < Cin; ++c)
        for (std::size_t o = 0; o < Cout; ++o) kt[(t * Cout + o) * Cin + c] = kw[(t * Cin + c) * Cout + o];
    return kt;
  };

  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t n = 0; n < B; ++n) {
      for (std::ptrdiff_t y = 0; y < Hs; ++y) {
        for (std::ptrdiff_t xx = 0; xx < Ws; ++xx) {
          const std::size_t out_site = (n * H + y) * W + xx;
          for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(k); ++ky) {
            const std::ptrdiff_t iy = y + ky - r;
            if (iy < 0 || iy >= Hs) continue;
            for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(k); ++kx) {
              const std::ptrdiff_t ix = xx + kx - r;
              if (ix < 0 || ix >= Ws) continue;
              fn(out_site, ((n * H + iy) * W + ix) * Cin, static_cast<std::size_t>(ky) * k + kx);
            }
          }
        }
      }
    }
  };

  std::vector<T> y(B * H * W * Cout);
  {
    const auto kt = transpose_kernel(kernel.data().data());
    const T* in = x.data().data();
    const T* bias = b.data().data();
    for (std::size_t s = 0; s < B * H * W; ++s)
      for (std::size_t o = 0; o < Cout; ++o) y[s * Cout + o] = bias[o];
    for_each_tap([&](std::size_t s, std::size_t i, std::size_t t) {
      for (std::size_t o = 0; o < Cout; ++o) {
        const T* kr = kt.data() + (t * Cout + o) * Cin;
        T acc{};
#pragma omp simd reduction(+ : acc)
        for (std::size_t c = 0; c < Cin; ++c) acc += in[i + c] * kr[c];
        y[s * Cout + o] += acc;
      }
    });
  }

  return Tensor<T>::from_op(
      {B, H, W, Cout}, std::move(y), {x, kernel, b},
      [=](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pk = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const T* dy = self.grad.data();
        if (pb.requires_grad) {
          auto& db = pb.ensure_grad();
          for (std::size_t s = 0; s < B * H * W; ++s)
            for (std::size_t o = 0; o < Cout; ++o) db[o] += dy[s * Cout + o];
        }
        if (px.requires_grad) {
          const auto kt = transpose_kernel(pk.value.data());
          T* dx = px.ensure_grad().data();
          for_each_tap([&](std::size_t s, std::size_t i, std::size_t t) {
            for (std::size_t o = 0; o < Cout; ++o) {
              const T g = dy[s * Cout + o];
              const T* kr = kt.data() + (t * Cout + o) * Cin;
#pragma omp simd
              for (std::size_t c = 0; c < Cin; ++c) dx[i + c] += g * kr[c];
            }
          });
        }
        if (pk.requires_grad) {
          std::vector<T> dkt(taps * Cout * Cin, T{});
          const T* in = px.value.data();
          for_each_tap([&](std::size_t s, std::size_t i, std::size_t t) {
            for (std::size_t o = 0; o < Cout; ++o) {
              const T g = dy[s * Cout + o];
              T* dr = dkt.data() + (t * Cout + o) * Cin;
#pragma omp simd
              for (std::size_t c = 0; c < Cin; ++c) dr[c] += g * in[i + c];
            }
          });
          auto& dk = pk.ensure_grad();
          for (std::size_t t = 0; t < taps; ++t)
            for (std::size_t c = 0; c < Cin; ++c)
              for (std::size_t o = 0; o < Cout; ++o) dk[(t * Cin + c) * Cout + o] += dkt[(t * Cout + o) * Cin + c];
        }
      });
}

template <typename T>
Tensor<T> upsample_nearest2d(const Tensor<T>& x, Scale2d scale) {
  require_image(x, "upsample_nearest2d");
  if (scale.y < 1 || scale.x < 1) throw ConfigError("upsample_nearest2d: scale factors must be >= 1");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t Ho = H * scale.y, Wo = W * scale.x;

  auto for_each_pair = [=](auto&& fn) {
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t y = 0; y < Ho; ++y)
        for (std::size_t xx = 0; xx < Wo; ++xx)
          fn(((n * Ho + y) * Wo + xx) * C, ((n * H + y / scale.y) * W + xx / scale.x) * C);
  };

  std::vector<T> y(B * Ho * Wo * C);
  const T* in = x.data().data();
  for_each_pair([&](std::size_t o, std::size_t i) { std::copy_n(in + i, C, y.data() + o); });

  return Tensor<T>::from_op({B, Ho, Wo, C}, std::move(y), {x}, [for_each_pair, C](Node<T>& self) {
    T* dx = self.parents[0]->ensure_grad().data();
    const T* dy = self.grad.data();
    for_each_pair([&](std::size_t o, std::size_t i) {
#pragma omp simd
      for (std::size_t c = 0; c < C; ++c) dx[i + c] += dy[o + c];
    });
  });
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       BatchNormState<T>& state, Mode mode) {
  require_image(x, "batch_norm2d");
  const std::size_t C = x.dim(3);
  const std::size_t N = x.size() / C;
  require(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 && beta.dim(0) == C,
          "batch_norm2d: gamma/beta must have one entry per channel");
  require(state.running_mean.size() == C && state.running_var.size() == C,
          "batch_norm2d: running statistics have the wrong channel count");

  const T* in = x.data().data();
  std::vector<T> mean(C, T{}), var(C, T{});
  if (mode == Mode::train) {
    // Channel sums in double: N reaches tens of thousands at full resolution.
    std::vector<double> acc(C, 0.0);
    double* pa = acc.data();
    for (std::size_t s = 0; s < N; ++s) {
      const T* row = in + s * C;
#pragma omp simd
      for (std::size_t c = 0; c < C; ++c) pa[c] += row[c];
    }
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = static_cast<T>(acc[c] / static_cast<double>(N));
      acc[c] = 0.0;
    }
    const T* pm = mean.data();
    for (std::size_t s = 0; s < N; ++s) {
      const T* row = in + s * C;
#pragma omp simd
      for (std::size_t c = 0; c < C; ++c) {
        const double d = row[c] - pm[c];
        pa[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < C; ++c) var[c] = static_cast<T>(acc[c] / static_cast<double>(N));
    const T m = state.momentum;
    const T unbias = N > 1 ? static_cast<T>(N) / static_cast<T>(N - 1) : T{1};
    for (std::size_t c = 0; c < C; ++c) {
      state.running_mean[c] = m * state.running_mean[c] + (T{1} - m) * mean[c];
      state.running_var[c] = m * state.running_var[c] + (T{1} - m) * var[c] * unbias;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<T> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = T{1} / std::sqrt(var[c] + state.epsilon);

  std::vector<T> xhat(x.size());
  std::vector<T> y(x.size());
  const T* g = gamma.data().data();
  const T* bt = beta.data().data();
  {
    const T* pm = mean.data();
    const T* pi = inv_std.data();
    T* ph = xhat.data();
    T* py = y.data();
    for (std::size_t s = 0; s < N; ++s) {
      const std::size_t base = s * C;
#pragma omp simd
      for (std::size_t c = 0; c < C; ++c) {
        const T h = (in[base + c] - pm[c]) * pi[c];
        ph[base + c] = h;
        py[base + c] = g[c] * h + bt[c];
      }
    }
  }

  const bool batch_stats = mode == Mode::train;
  return Tensor<T>::from_op(
      x.shape(), std::move(y), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), N, C, batch_stats](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pg = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const T* dy = self.grad.data();
        std::vector<T> sum_dy(C, T{}), sum_dy_xhat(C, T{});
        {
          std::vector<double> a(C, 0.0), b(C, 0.0);
          double* pa = a.data();
          double* pb2 = b.data();
          const T* ph = xhat.data();
          for (std::size_t s = 0; s < N; ++s) {
            const std::size_t base = s * C;
#pragma omp simd
            for (std::size_t c = 0; c < C; ++c) {
              pa[c] += dy[base + c];
              pb2[c] += dy[base + c] * ph[base + c];
            }
          }
          for (std::size_t c = 0; c < C; ++c) {
            sum_dy[c] = static_cast<T>(a[c]);
            sum_dy_xhat[c] = static_cast<T>(b[c]);
          }
        }
        if (pb.requires_grad) {
          auto& db = pb.ensure_grad();
          for (std::size_t c = 0; c < C; ++c) db[c] += sum_dy[c];
        }
        if (pg.requires_grad) {
          auto& dg = pg.ensure_grad();
          for (std::size_t c = 0; c < C; ++c) dg[c] += sum_dy_xhat[c];
        }
        if (px.requires_grad) {
          T* dx = px.ensure_grad().data();
          const T* g = pg.value.data();
          const T inv_n = T{1} / static_cast<T>(N);
          std::vector<T> k(C), mu_dy(C), mu_dyh(C);
          for (std::size_t c = 0; c < C; ++c) {
            k[c] = g[c] * inv_std[c];
            mu_dy[c] = batch_stats ? inv_n * sum_dy[c] : T{};
            mu_dyh[c] = batch_stats ? inv_n * sum_dy_xhat[c] : T{};
          }
          const T* pk = k.data();
          const T* pm = mu_dy.data();
          const T* pmh = mu_dyh.data();
          const T* ph = xhat.data();
          for (std::size_t s = 0; s < N; ++s) {
            const std::size_t base = s * C;
#pragma omp simd
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t i = base + c;
              dx[i] += pk[c] * (dy[i] - pm[c] - ph[i] * pmh[c]);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> spatial_dropout(const Tensor<T>& x, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("spatial_dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  require_image(x, "spatial_dropout");
  if (mode == Mode::eval || rate == 0.0) return x;

  const std::size_t B = x.dim(0), HW = x.dim(1) * x.dim(2), C = x.dim(3);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> scale(B * C);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (auto& s : scale) s = uniform(rng) < rate ? T{0} : keep_scale;

  std::vector<T> y(x.size());
  {
    const T* in = x.data().data();
    T* out = y.data();
    for (std::size_t n = 0; n < B; ++n) {
      const T* sc = scale.data() + n * C;
      for (std::size_t s = 0; s < HW; ++s) {
        const std::size_t base = (n * HW + s) * C;
#pragma omp simd
        for (std::size_t c = 0; c < C; ++c) out[base + c] = in[base + c] * sc[c];
      }
    }
  }

  return Tensor<T>::from_op(x.shape(), std::move(y), {x},
                            [scale = std::move(scale), B, HW, C](Node<T>& self) {
                              T* dx = self.parents[0]->ensure_grad().data();
                              const T* dy = self.grad.data();
                              for (std::size_t n = 0; n < B; ++n) {
                                const T* sc = scale.data() + n * C;
                                for (std::size_t s = 0; s < HW; ++s) {
                                  const std::size_t base = (n * HW + s) * C;
#pragma omp simd
                                  for (std::size_t c = 0; c < C; ++c) dx[base + c] += dy[base + c] * sc[c];
                                }
                              }
                            });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T alpha) {
  if (!(alpha > T{0} && alpha < T{1})) throw ConfigError("leaky_relu: slope must lie in (0, 1)");
  const std::size_t n = x.size();
  std::vector<T> y(n);
  {
    const T* in = x.data().data();
    T* out = y.data();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(in[i], T{0}) + alpha * std::min(in[i], T{0});
  }
  return Tensor<T>::from_op(x.shape(), std::move(y), {x}, [alpha, n](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    T* dx = px.ensure_grad().data();
    const T* in = px.value.data();
    const T* dy = self.grad.data();
    const T a = alpha;
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
      const T slope = in[i] >= T{0} ? T{1} : a;
      dx[i] += slope * dy[i];
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> y(x.size());
  const T* in = x.data().data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T v = in[i];
    if (v >= T{0}) {
      y[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T{1} + e);
    }
  }
  return Tensor<T>::from_op(x.shape(), std::move(y), {x}, [](Node<T>& self) {
    T* dx = self.parents[0]->ensure_grad().data();
    const T* out = self.value.data();
    const T* dy = self.grad.data();
    const std::size_t n = self.grad.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * out[i] * (T{1} - out[i]);
  });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), "mse_loss: prediction " + to_string(pred.shape()) +
                                              " and target " + to_string(target.shape()) + " differ");
  const T* p = pred.data().data();
  const T* t = target.data().data();
  const std::size_t n = pred.size();
  // Accumulate in double so float32 training does not lose small residuals.
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    acc += d * d;
  }
  std::vector<T> loss{static_cast<T>(acc / static_cast<double>(n))};
  return Tensor<T>::from_op({1}, std::move(loss), {pred}, [target, n](Node<T>& self) {
    Node<T>& pp = *self.parents[0];
    T* dp = pp.ensure_grad().data();
    const T* tv = target.data().data();
    const T* pv = pp.value.data();
    const T scale = T{2} * self.grad[0] / static_cast<T>(n);
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) dp[i] += scale * (pv[i] - tv[i]);
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  const std::size_t n = a.size();
  std::vector<T> y(n);
  {
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* out = y.data();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
  }
  return Tensor<T>::from_op(a.shape(), std::move(y), {a, b}, [n](Node<T>& self) {
    const T* g = self.grad.data();
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      T* d = parent->ensure_grad().data();
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  const std::size_t n = x.size();
  std::vector<T> y(n);
  {
    const T* in = x.data().data();
    T* out = y.data();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) out[i] = c * in[i];
  }
  return Tensor<T>::from_op(x.shape(), std::move(y), {x}, [c, n](Node<T>& self) {
    T* d = self.parents[0]->ensure_grad().data();
    const T* g = self.grad.data();
    const T k = c;
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) d[i] += k * g[i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(element_count(shape) == x.size(),
          "reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<T> y(x.data().begin(), x.data().end());
  const std::size_t n = y.size();
  return Tensor<T>::from_op(std::move(shape), std::move(y), {x}, [n](Node<T>& self) {
    T* d = self.parents[0]->ensure_grad().data();
    const T* g = self.grad.data();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
  });
}

template <typename T>
Tensor<T> crop2d(const Tensor<T>& x, std::size_t height, std::size_t width) {
  require_image(x, "crop2d");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  require(height >= 1 && width >= 1 && height <= H && width <= W,
          "crop2d: window " + std::to_string(height) + "x" + std::to_string(width) +
              " does not fit inside " + to_string(x.shape()));
  std::vector<T> y(B * height * width * C);
  const T* in = x.data().data();
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t r = 0; r < height; ++r)
      std::copy_n(in + ((n * H + r) * W) * C, width * C, y.data() + ((n * height + r) * width) * C);
  return Tensor<T>::from_op({B, height, width, C}, std::move(y), {x},
                            [B, H, W, C, height, width](Node<T>& self) {
                              T* dx = self.parents[0]->ensure_grad().data();
                              const T* dy = self.grad.data();
                              for (std::size_t n = 0; n < B; ++n)
                                for (std::size_t r = 0; r < height; ++r) {
                                  T* dst = dx + ((n * H + r) * W) * C;
                                  const T* src = dy + ((n * height + r) * width) * C;
                                  for (std::size_t i = 0; i < width * C; ++i) dst[i] += src[i];
                                }
                            });
}

template <typename T>
Tensor<T> multiply_mask(const Tensor<T>& x, std::span<const T> mask) {
  require(x.rank() >= 1 && x.size() == x.dim(0) * mask.size(),
          "multiply_mask: mask of " + std::to_string(mask.size()) +
              " values does not match per-sample size of " + to_string(x.shape()));
  std::vector<T> m(mask.begin(), mask.end());
  const std::size_t B = x.dim(0), S = m.size();
  std::vector<T> y(x.size());
  {
    const T* in = x.data().data();
    const T* pm = m.data();
    for (std::size_t n = 0; n < B; ++n) {
      T* out = y.data() + n * S;
#pragma omp simd
      for (std::size_t i = 0; i < S; ++i) out[i] = in[n * S + i] * pm[i];
    }
  }
  return Tensor<T>::from_op(x.shape(), std::move(y), {x}, [m = std::move(m), B, S](Node<T>& self) {
    T* dx = self.parents[0]->ensure_grad().data();
    const T* g = self.grad.data();
    const T* pm = m.data();
    for (std::size_t n = 0; n < B; ++n) {
#pragma omp simd
      for (std::size_t i = 0; i < S; ++i) dx[n * S + i] += g[n * S + i] * pm[i];
    }
  });
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  require(weights.size() == x.size(), "weighted_sum: weight count differs from tensor size");
  std::vector<T> w(weights.begin(), weights.end());
  T acc{};
  const T* in = x.data().data();
  for (std::size_t i = 0; i < w.size(); ++i) acc += in[i] * w[i];
  return Tensor<T>::from_op({1}, {acc}, {x}, [w = std::move(w)](Node<T>& self) {
    T* dx = self.parents[0]->ensure_grad().data();
    const T g = self.grad[0];
    const T* pw = w.data();
    const std::size_t n = w.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) dx[i] += g * pw[i];
  });
}

#define P2P_INSTANTIATE_OPS(T)                                                                     \
  template Tensor<T> fully_connected(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> conv2d_1x1(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> separable_conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                      const Tensor<T>&);                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> upsample_nearest2d(const Tensor<T>&, Scale2d);                               \
  template Tensor<T> batch_norm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                  BatchNormState<T>&, Mode);                                      \
  template Tensor<T> spatial_dropout(const Tensor<T>&, double, Mode, std::mt19937_64&);           \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                             \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> crop2d(const Tensor<T>&, std::size_t, std::size_t);                          \
  template Tensor<T> multiply_mask(const Tensor<T>&, std::span<const T>);                         \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);

P2P_INSTANTIATE_OPS(float)
P2P_INSTANTIATE_OPS(double)

#undef P2P_INSTANTIATE_OPS

}  // namespace p2p::ad
