#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nlos/tensor/tape.hpp"

// Differentiable tensor operations. Every op records itself on the tape of
// its tracked inputs (all tracked inputs must share one tape) and otherwise
// runs as a plain forward computation. No op broadcasts; shapes must match
// exactly unless stated. A non-finite forward result raises NumericError.

namespace nlos::ops {

// --- linear algebra -------------------------------------------------------

/// [M x K] * [K x N] -> [M x N].
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);

// --- elementwise ------------------------------------------------------------

DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
DiffTensor scale(const DiffTensor& a, double s);

DiffTensor silu(const DiffTensor& x);
/// Exact erf-based GELU.
DiffTensor gelu(const DiffTensor& x);
DiffTensor softplus(const DiffTensor& x);
/// Subgradient 0 at x == 0.
DiffTensor abs(const DiffTensor& x);
DiffTensor square(const DiffTensor& x);

// --- reductions -------------------------------------------------------------

/// Sum of all elements, shape [1].
DiffTensor sum(const DiffTensor& x);
/// Removes `axis`; a rank-1 input reduces to shape [1].
DiffTensor reduce_sum(const DiffTensor& x, std::size_t axis);

struct MaxArg {
  DiffTensor values;
  IndexTensor indices;
};

/// Max along `axis` with its position. Ties pick the lowest index; the
/// gradient flows only to the winning element.
MaxArg reduce_max_arg(const DiffTensor& x, std::size_t axis);

DiffTensor softmax(const DiffTensor& x, std::size_t axis);

// --- layout -----------------------------------------------------------------

DiffTensor reshape(const DiffTensor& x, Shape shape);
/// out.shape[i] = x.shape[axes[i]].
DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> axes);
DiffTensor concat(std::span<const DiffTensor> xs, std::size_t axis);
std::vector<DiffTensor> split(const DiffTensor& x, std::span<const std::size_t> extents,
                              std::size_t axis);
inline DiffTensor channel_concat(std::span<const DiffTensor> xs) { return concat(xs, 0); }
inline std::vector<DiffTensor> channel_split(const DiffTensor& x,
                                             std::span<const std::size_t> extents) {
  return split(x, extents, 0);
}
/// Rows of a [R x D] matrix selected by `rows` (repeats allowed).
DiffTensor gather_rows(const DiffTensor& x, std::span<const std::size_t> rows);

// --- image ops on [C x H x W] -----------------------------------------------

/// Per-channel "same" cross-correlation with zero padding (k-1)*dilation/2.
/// Kernel is [C x k x k] with odd k.
DiffTensor depthwise_conv2d(const DiffTensor& x, const DiffTensor& kernel, std::size_t dilation);

/// 1x1 convolution with weights [C_out x C_in], sampling every `stride`-th
/// row and column from index 0. Output [C_out x ceil(H/s) x ceil(W/s)].
DiffTensor pointwise_conv(const DiffTensor& x, const DiffTensor& w, std::size_t stride = 1);

/// x[c, ...] + b[c].
DiffTensor add_channel_bias(const DiffTensor& x, const DiffTensor& b);

/// Normalizes across channels at every spatial location, then gain/bias.
DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain, const DiffTensor& bias,
                      double eps = 1e-5);

/// Nearest-neighbour repeat of each pixel into a factor x factor block.
DiffTensor upsample_nearest(const DiffTensor& x, std::size_t factor);

}  // namespace nlos::ops
