// SPDX-License-Identifier: Apache-2.0
#include "octoconv/conv3d.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <vector>

#include "octoconv/parallel.hpp"

namespace octoconv {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  std::size_t n, c_in, c_out;
  std::array<std::size_t, 3> in, kernel, stride;
  std::array<AxisGeometry, 3> axis;

  std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
  std::size_t out_volume() const { return axis[0].out * axis[1].out * axis[2].out; }
  std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
  std::size_t patch_rows() const { return c_in * kernel_volume(); }
};

ConvGeometry make_geometry(const Tensor& input, const Tensor& filters, const Conv3dSpec& spec) {
  require_rank(input, 5, "conv3d input");
  require_rank(filters, 5, "conv3d filters");
  if (input.dim(1) != filters.dim(1))
    throw ShapeError("conv3d: input has " + std::to_string(input.dim(1)) +
                     " channels, filters expect " + std::to_string(filters.dim(1)));
  ConvGeometry g{};
  g.n = input.dim(0);
  g.c_in = input.dim(1);
  g.c_out = filters.dim(0);
  for (int a = 0; a < 3; ++a) {
    g.in[a] = input.dim(2 + a);
    g.kernel[a] = filters.dim(2 + a);
    g.stride[a] = spec.stride[a];
    if (g.stride[a] == 0) throw ShapeError("conv3d: stride must be >= 1");
    g.axis[a] = window_geometry(g.in[a], g.kernel[a], g.stride[a], spec.padding);
  }
  return g;
}

// Gathers the receptive field of every output voxel into column form:
// cols[(c, kz, ky, kx), out_voxel] with row stride ld. Out-of-range taps
// read zero.
void im2col(const float* image, const ConvGeometry& g, float* cols, std::size_t ld) {
  const std::size_t od = g.axis[0].out, oh = g.axis[1].out, ow = g.axis[2].out;
  const std::ptrdiff_t pd = g.axis[0].pad_front, ph = g.axis[1].pad_front, pw = g.axis[2].pad_front;
  const std::ptrdiff_t D = g.in[0], H = g.in[1], W = g.in[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const float* chan = image + c * g.in_volume();
    for (std::size_t kz = 0; kz < g.kernel[0]; ++kz)
      for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
        for (std::size_t kx = 0; kx < g.kernel[2]; ++kx, ++row) {
          float* dst = cols + row * ld;
          for (std::size_t z = 0; z < od; ++z) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z * g.stride[0] + kz) - pd;
            for (std::size_t y = 0; y < oh; ++y) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.stride[1] + ky) - ph;
              float* out_row = dst + (z * oh + y) * ow;
              if (iz < 0 || iz >= D || iy < 0 || iy >= H) {
                std::fill(out_row, out_row + ow, 0.0f);
                continue;
              }
              const float* src = chan + (iz * H + iy) * W;
              if (g.stride[2] == 1) {
                for (std::size_t x = 0; x < ow; ++x) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - pw;
                  out_row[x] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                }
              } else {
                for (std::size_t x = 0; x < ow; ++x) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * g.stride[2] + kx) - pw;
                  out_row[x] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
                }
              }
            }
          }
        }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
void col2im(const float* cols, const ConvGeometry& g, float* image, std::size_t ld) {
  const std::size_t od = g.axis[0].out, oh = g.axis[1].out, ow = g.axis[2].out;
  const std::ptrdiff_t pd = g.axis[0].pad_front, ph = g.axis[1].pad_front, pw = g.axis[2].pad_front;
  const std::ptrdiff_t D = g.in[0], H = g.in[1], W = g.in[2];
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    float* chan = image + c * g.in_volume();
    for (std::size_t kz = 0; kz < g.kernel[0]; ++kz)
      for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
        for (std::size_t kx = 0; kx < g.kernel[2]; ++kx, ++row) {
          const float* src = cols + row * ld;
          for (std::size_t z = 0; z < od; ++z) {
            const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z * g.stride[0] + kz) - pd;
            if (iz < 0 || iz >= D) continue;
            for (std::size_t y = 0; y < oh; ++y) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.stride[1] + ky) - ph;
              if (iy < 0 || iy >= H) continue;
              float* dst = chan + (iz * H + iy) * W;
              const float* in_row = src + (z * oh + y) * ow;
              for (std::size_t x = 0; x < ow; ++x) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * g.stride[2] + kx) - pw;
                if (ix >= 0 && ix < W) dst[ix] += in_row[x];
              }
            }
          }
        }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_volume() == 1 && g.stride == std::array<std::size_t, 3>{1, 1, 1};
}

}  // namespace

AxisGeometry window_geometry(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (in == 0 || kernel == 0) throw ShapeError("window geometry: zero-sized dimension");
  AxisGeometry a;
  if (padding == Padding::kValid) {
    if (kernel > in)
      throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds input extent " +
                       std::to_string(in) + " under VALID padding");
    a.out = (in - kernel) / stride + 1;
  } else {
    a.out = (in + stride - 1) / stride;
    const std::size_t needed = (a.out - 1) * stride + kernel;
    a.pad_total = needed > in ? needed - in : 0;
    a.pad_front = a.pad_total / 2;
  }
  return a;
}

// Samples per GEMM: deep layers have few output voxels per sample, so
// several samples share one multiply. Around 768 columns suits the blocked
// GEMM best on the machines we measured.
std::size_t samples_per_chunk(const ConvGeometry& g) {
  constexpr std::size_t kTargetColumns = 768;
  return std::clamp<std::size_t>(kTargetColumns / g.out_volume(), 1, g.n);
}

Tensor conv3d_forward(const Tensor& input, const Tensor& filters, const Conv3dSpec& spec) {
  const ConvGeometry g = make_geometry(input, filters, spec);
  Tensor output({g.n, g.c_out, g.axis[0].out, g.axis[1].out, g.axis[2].out});
  const std::size_t K = g.patch_rows(), N = g.out_volume();
  ConstMatrixMap weights(filters.ptr(), g.c_out, K);
  const bool pointwise = is_pointwise(g);
  const std::size_t per_chunk = samples_per_chunk(g);
  const std::size_t n_chunks = (g.n + per_chunk - 1) / per_chunk;

  parallel_for(n_chunks, [&](std::size_t chunk_begin, std::size_t chunk_end) {
    std::vector<float> cols;
    RowMatrix out;
    for (std::size_t chunk = chunk_begin; chunk < chunk_end; ++chunk) {
      const std::size_t b0 = chunk * per_chunk, nb = std::min(per_chunk, g.n - b0), ld = nb * N;
      cols.resize(K * ld);
      for (std::size_t s = 0; s < nb; ++s) {
        const float* image = input.ptr() + (b0 + s) * g.c_in * g.in_volume();
        if (pointwise) {
          for (std::size_t k = 0; k < K; ++k) std::copy(image + k * N, image + (k + 1) * N, cols.data() + k * ld + s * N);
        } else {
          im2col(image, g, cols.data() + s * N, ld);
        }
      }
      out.noalias() = weights * ConstMatrixMap(cols.data(), K, ld);
      for (std::size_t s = 0; s < nb; ++s)
        for (std::size_t c = 0; c < g.c_out; ++c)
          std::copy(out.data() + c * ld + s * N, out.data() + c * ld + (s + 1) * N,
                    output.ptr() + ((b0 + s) * g.c_out + c) * N);
    }
  });
  return output;
}

Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& filters,
                            const Conv3dSpec& spec) {
  const ConvGeometry g = make_geometry(input, filters, spec);
  const Shape expected{g.n, g.c_out, g.axis[0].out, g.axis[1].out, g.axis[2].out};
  if (grad_out.shape() != expected)
    throw ShapeError("conv3d_backward: grad_out " + shape_string(grad_out.shape()) +
                     " does not match forward output " + shape_string(expected));

  const std::size_t K = g.patch_rows(), N = g.out_volume();
  Conv3dGrads grads{Tensor(input.shape()), Tensor(filters.shape())};
  ConstMatrixMap weights(filters.ptr(), g.c_out, K);
  const bool pointwise = is_pointwise(g);
  const std::size_t per_chunk = samples_per_chunk(g);
  const std::size_t n_chunks = (g.n + per_chunk - 1) / per_chunk;

  // Per-worker filter gradients, reduced in worker order afterwards.
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n_chunks);
  std::vector<RowMatrix> partial(std::max<std::size_t>(workers, 1), RowMatrix::Zero(g.c_out, K));
  const std::size_t worker_len = (n_chunks + partial.size() - 1) / partial.size();

  parallel_for(n_chunks, [&](std::size_t chunk_begin, std::size_t chunk_end) {
    RowMatrix& acc = partial[chunk_begin / worker_len];
    std::vector<float> cols, go;
    RowMatrix grad_cols;
    for (std::size_t chunk = chunk_begin; chunk < chunk_end; ++chunk) {
      const std::size_t b0 = chunk * per_chunk, nb = std::min(per_chunk, g.n - b0), ld = nb * N;
      cols.resize(K * ld);
      go.resize(g.c_out * ld);
      for (std::size_t s = 0; s < nb; ++s) {
        const float* image = input.ptr() + (b0 + s) * g.c_in * g.in_volume();
        if (pointwise) {
          for (std::size_t k = 0; k < K; ++k) std::copy(image + k * N, image + (k + 1) * N, cols.data() + k * ld + s * N);
        } else {
          im2col(image, g, cols.data() + s * N, ld);
        }
        for (std::size_t c = 0; c < g.c_out; ++c) {
          const float* src = grad_out.ptr() + ((b0 + s) * g.c_out + c) * N;
          std::copy(src, src + N, go.data() + c * ld + s * N);
        }
      }
      ConstMatrixMap go_map(go.data(), g.c_out, ld);
      acc.noalias() += go_map * ConstMatrixMap(cols.data(), K, ld).transpose();
      grad_cols.noalias() = weights.transpose() * go_map;
      for (std::size_t s = 0; s < nb; ++s) {
        float* grad_image = grads.input.ptr() + (b0 + s) * g.c_in * g.in_volume();
        if (pointwise) {
          for (std::size_t k = 0; k < K; ++k)
            std::copy(grad_cols.data() + k * ld + s * N, grad_cols.data() + k * ld + (s + 1) * N, grad_image + k * N);
        } else {
          col2im(grad_cols.data() + s * N, g, grad_image, ld);
        }
      }
    }
  });

  MatrixMap grad_w(grads.filters.ptr(), g.c_out, K);
  grad_w = partial[0];
  for (std::size_t i = 1; i < partial.size(); ++i) grad_w += partial[i];
  return grads;
}

Tensor pad3d(const Tensor& input, std::array<std::size_t, 3> front, std::array<std::size_t, 3> back) {
  require_rank(input, 5, "pad3d input");
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t D = input.dim(2), H = input.dim(3), W = input.dim(4);
  const std::size_t PD = D + front[0] + back[0], PH = H + front[1] + back[1],
                    PW = W + front[2] + back[2];
  Tensor out({n, c, PD, PH, PW});
  for (std::size_t nc = 0; nc < n * c; ++nc)
    for (std::size_t z = 0; z < D; ++z)
      for (std::size_t y = 0; y < H; ++y) {
        const float* src = input.ptr() + ((nc * D + z) * H + y) * W;
        float* dst = out.ptr() + ((nc * PD + z + front[0]) * PH + y + front[1]) * PW + front[2];
        std::copy(src, src + W, dst);
      }
  return out;
}

}  // namespace octoconv
