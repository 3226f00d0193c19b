/**
 * Copyright 2026 The MixIT Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mixit/autograd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mixit/error.hpp"

namespace mixit::autograd {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw InvalidInput(std::string(op) + ": " + detail);
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  enum class Kind { kSame, kSuffixB, kSuffixA, kGeneral };
  Kind kind = Kind::kSame;
  Shape out;
  std::size_t size_a = 0, size_b = 0;
  std::vector<std::size_t> stride_a, stride_b;
};

std::vector<std::size_t> aligned_strides(const Shape& shape, const Shape& out) {
  const std::size_t offset = out.size() - shape.size();
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[offset + i] = (shape[i] == 1 && out[offset + i] != 1) ? 0 : stride;
    stride *= shape[i];
  }
  return strides;
}

// True when `small` (ignoring leading 1s) matches the trailing axes of `big`.
bool is_suffix(const Shape& small, const Shape& big) {
  std::size_t first = 0;
  while (first + 1 < small.size() && small[first] == 1) ++first;
  const std::size_t len = small.size() - first;
  if (len > big.size()) return false;
  if (shape_size(small) == 1) return true;
  for (std::size_t i = 0; i < len; ++i) {
    if (small[first + i] != big[big.size() - len + i]) return false;
  }
  return true;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  p.size_a = shape_size(a);
  p.size_b = shape_size(b);
  const std::size_t rank = std::max(a.size(), b.size());
  p.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      shape_error(op, "cannot broadcast " + shape_string(a) + " with " + shape_string(b));
    }
    p.out[i] = std::max(da, db);
  }
  if (a == b) {
    p.kind = Broadcast::Kind::kSame;
  } else if (p.size_a == shape_size(p.out) && is_suffix(b, a)) {
    p.kind = Broadcast::Kind::kSuffixB;
  } else if (p.size_b == shape_size(p.out) && is_suffix(a, b)) {
    p.kind = Broadcast::Kind::kSuffixA;
  } else {
    p.kind = Broadcast::Kind::kGeneral;
    p.stride_a = aligned_strides(a, p.out);
    p.stride_b = aligned_strides(b, p.out);
  }
  return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void visit(const Broadcast& p, F&& f) {
  const std::size_t n = shape_size(p.out);
  switch (p.kind) {
    case Broadcast::Kind::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case Broadcast::Kind::kSuffixB:
      if (p.size_b == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i, i, 0);
        return;
      }
      for (std::size_t i = 0; i < n; i += p.size_b) {
        for (std::size_t j = 0; j < p.size_b; ++j) f(i + j, i + j, j);
      }
      return;
    case Broadcast::Kind::kSuffixA:
      if (p.size_a == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i, 0, i);
        return;
      }
      for (std::size_t i = 0; i < n; i += p.size_a) {
        for (std::size_t j = 0; j < p.size_a; ++j) f(i + j, j, i + j);
      }
      return;
    case Broadcast::Kind::kGeneral: {
      // Odometer over the outer axes; the innermost axis runs as a plain loop
      // specialised on its (0 or 1) strides so it vectorises.
      const std::size_t rank = p.out.size();
      const std::size_t inner = p.out.back();
      const std::size_t sa = p.stride_a.back(), sb = p.stride_b.back();
      std::vector<std::size_t> idx(rank, 0);
      std::size_t ia = 0, ib = 0;
      for (std::size_t i = 0; i < n; i += inner) {
        if (sa == 1 && sb == 1) {
          for (std::size_t j = 0; j < inner; ++j) f(i + j, ia + j, ib + j);
        } else if (sa == 1) {
          for (std::size_t j = 0; j < inner; ++j) f(i + j, ia + j, ib);
        } else if (sb == 1) {
          for (std::size_t j = 0; j < inner; ++j) f(i + j, ia, ib + j);
        } else {
          for (std::size_t j = 0; j < inner; ++j) f(i + j, ia, ib);
        }
        for (std::size_t ax = rank - 1; ax-- > 0;) {
          ia += p.stride_a[ax];
          ib += p.stride_b[ax];
          if (++idx[ax] < p.out[ax]) break;
          ia -= p.stride_a[ax] * p.out[ax];
          ib -= p.stride_b[ax] * p.out[ax];
          idx[ax] = 0;
        }
      }
      return;
    }
  }
}

enum class BinaryKind { kAdd, kSub, kMul };

Var binary(Tape& tape, Var a, Var b, BinaryKind kind, const char* name) {
  const Broadcast plan = plan_broadcast(tape.shape(a), tape.shape(b), name);
  auto forward = [plan, kind](std::span<const Tensor* const> in, Tensor& out) {
    const double* x = in[0]->data();
    const double* y = in[1]->data();
    double* o = out.data();
    switch (kind) {
      case BinaryKind::kAdd:
        visit(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] + y[ib]; });
        break;
      case BinaryKind::kSub:
        visit(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] - y[ib]; });
        break;
      case BinaryKind::kMul:
        visit(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] * y[ib]; });
        break;
    }
  };
  auto backward = [plan, kind](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                               std::span<Tensor* const> grad) {
    const double* gd = g.data();
    const double* x = in[0]->data();
    const double* y = in[1]->data();
    if (grad[0]) {
      double* ga = grad[0]->data();
      if (kind == BinaryKind::kMul) {
        visit(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += gd[i] * y[ib]; });
      } else {
        visit(plan, [&](std::size_t i, std::size_t ia, std::size_t) { ga[ia] += gd[i]; });
      }
    }
    if (grad[1]) {
      double* gb = grad[1]->data();
      switch (kind) {
        case BinaryKind::kAdd:
          visit(plan, [&](std::size_t i, std::size_t, std::size_t ib) { gb[ib] += gd[i]; });
          break;
        case BinaryKind::kSub:
          visit(plan, [&](std::size_t i, std::size_t, std::size_t ib) { gb[ib] -= gd[i]; });
          break;
        case BinaryKind::kMul:
          visit(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { gb[ib] += gd[i] * x[ia]; });
          break;
      }
    }
  };
  Tensor out(plan.out);
  const Tensor* in[] = {&tape.value(a), &tape.value(b)};
  forward(in, out);
  return tape.record(std::move(out), {a, b}, forward, backward, name);
}

// Elementwise unary op from value and derivative functors; the derivative
// receives (input, output).
template <class Fwd, class Deriv>
Var unary(Tape& tape, Var x, Fwd fwd, Deriv deriv, const char* name) {
  auto forward = [fwd](std::span<const Tensor* const> in, Tensor& out) {
    const double* v = in[0]->data();
    double* o = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = fwd(v[i]);
  };
  auto backward = [deriv](std::span<const Tensor* const> in, const Tensor& out, const Tensor& g,
                          std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    const double* v = in[0]->data();
    const double* o = out.data();
    const double* gd = g.data();
    double* gx = grad[0]->data();
    for (std::size_t i = 0; i < out.size(); ++i) gx[i] += gd[i] * deriv(v[i], o[i]);
  };
  Tensor out(tape.shape(x));
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, name);
}

}  // namespace

Var add(Tape& tape, Var a, Var b) { return binary(tape, a, b, BinaryKind::kAdd, "add"); }
Var sub(Tape& tape, Var a, Var b) { return binary(tape, a, b, BinaryKind::kSub, "sub"); }
Var mul(Tape& tape, Var a, Var b) { return binary(tape, a, b, BinaryKind::kMul, "mul"); }

Var scale(Tape& tape, Var a, double factor) {
  return unary(
      tape, a, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; }, "scale");
}

Var add_scalar(Tape& tape, Var a, double offset) {
  return unary(
      tape, a, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; },
      "add_scalar");
}

Var matmul(Tape& tape, Var a, Var b) {
  const Shape& sa = tape.shape(a);
  const Shape& sb = tape.shape(b);
  if (sb.size() != 2) shape_error("matmul", "right operand must be 2-D, got " + shape_string(sb));
  const std::size_t k = sa.back();
  if (sb[0] != k) {
    shape_error("matmul", "inner dimensions differ: " + shape_string(sa) + " x " + shape_string(sb));
  }
  const std::size_t n = sb[1];
  const std::size_t rows = shape_size(sa) / k;
  Shape out_shape = sa;
  out_shape.back() = n;

  auto forward = [rows, k, n](std::span<const Tensor* const> in, Tensor& out) {
    ConstMap lhs(in[0]->data(), rows, k);
    ConstMap rhs(in[1]->data(), k, n);
    MutMap dst(out.data(), rows, n);
    dst.noalias() = lhs * rhs;
  };
  auto backward = [rows, k, n](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                               std::span<Tensor* const> grad) {
    ConstMap gm(g.data(), rows, n);
    if (grad[0]) {
      MutMap ga(grad[0]->data(), rows, k);
      ga.noalias() += gm * ConstMap(in[1]->data(), k, n).transpose();
    }
    if (grad[1]) {
      MutMap gb(grad[1]->data(), k, n);
      gb.noalias() += ConstMap(in[0]->data(), rows, k).transpose() * gm;
    }
  };
  Tensor out(out_shape);
  const Tensor* in[] = {&tape.value(a), &tape.value(b)};
  forward(in, out);
  return tape.record(std::move(out), {a, b}, forward, backward, "matmul");
}

Var conv1d(Tape& tape, Var x, Var kernel, std::size_t hop) {
  const Shape& sx = tape.shape(x);
  const Shape& sk = tape.shape(kernel);
  if (sx.size() != 2) shape_error("conv1d", "input must be [B, T], got " + shape_string(sx));
  if (sk.size() != 2) shape_error("conv1d", "kernel must be [L, N], got " + shape_string(sk));
  const std::size_t batch = sx[0], len = sx[1], width = sk[0], channels = sk[1];
  if (hop == 0) shape_error("conv1d", "hop must be positive");
  if (len < width || (len - width) % hop != 0) {
    shape_error("conv1d", "length " + std::to_string(len) + " is not a whole number of hops");
  }
  const std::size_t frames = (len - width) / hop + 1;

  auto im2col = [=](const double* src, RowMat& cols) {
    cols.resize(static_cast<Eigen::Index>(batch * frames), static_cast<Eigen::Index>(width));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < frames; ++f) {
        const double* s = src + b * len + f * hop;
        double* d = cols.data() + (b * frames + f) * width;
        std::copy(s, s + width, d);
      }
    }
  };
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    RowMat cols;
    im2col(in[0]->data(), cols);
    MutMap dst(out.data(), batch * frames, channels);
    dst.noalias() = cols * ConstMap(in[1]->data(), width, channels);
  };
  auto backward = [=](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    ConstMap gm(g.data(), batch * frames, channels);
    if (grad[1]) {
      RowMat cols;
      im2col(in[0]->data(), cols);
      MutMap gk(grad[1]->data(), width, channels);
      gk.noalias() += cols.transpose() * gm;
    }
    if (grad[0]) {
      RowMat gcols = gm * ConstMap(in[1]->data(), width, channels).transpose();
      double* gx = grad[0]->data();
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < frames; ++f) {
          const double* s = gcols.data() + (b * frames + f) * width;
          double* d = gx + b * len + f * hop;
          for (std::size_t l = 0; l < width; ++l) d[l] += s[l];
        }
      }
    }
  };
  Tensor out(Shape{batch, frames, channels});
  const Tensor* in[] = {&tape.value(x), &tape.value(kernel)};
  forward(in, out);
  return tape.record(std::move(out), {x, kernel}, forward, backward, "conv1d");
}

Var conv_transpose1d(Tape& tape, Var x, Var kernel, std::size_t hop) {
  const Shape& sx = tape.shape(x);
  const Shape& sk = tape.shape(kernel);
  if (sx.size() != 4) {
    shape_error("conv_transpose1d", "input must be [B, F, G, N], got " + shape_string(sx));
  }
  if (sk.size() != 2 || sk[0] != sx[3]) {
    shape_error("conv_transpose1d", "kernel must be [N, L] matching input, got " + shape_string(sk));
  }
  if (hop == 0) shape_error("conv_transpose1d", "hop must be positive");
  const std::size_t batch = sx[0], frames = sx[1], groups = sx[2], basis = sx[3];
  const std::size_t width = sk[1];
  const std::size_t len = (frames - 1) * hop + width;
  const std::size_t rows = batch * frames * groups;

  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    RowMat segs = ConstMap(in[0]->data(), rows, basis) * ConstMap(in[1]->data(), basis, width);
    out.fill(0.0);
    double* o = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t gi = 0; gi < groups; ++gi) {
          const double* s = segs.data() + ((b * frames + f) * groups + gi) * width;
          double* d = o + (b * groups + gi) * len + f * hop;
          for (std::size_t l = 0; l < width; ++l) d[l] += s[l];
        }
      }
    }
  };
  auto backward = [=](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    RowMat gsegs(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
    const double* gd = g.data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t gi = 0; gi < groups; ++gi) {
          const double* s = gd + (b * groups + gi) * len + f * hop;
          std::copy(s, s + width, gsegs.data() + ((b * frames + f) * groups + gi) * width);
        }
      }
    }
    if (grad[0]) {
      MutMap gx(grad[0]->data(), rows, basis);
      gx.noalias() += gsegs * ConstMap(in[1]->data(), basis, width).transpose();
    }
    if (grad[1]) {
      MutMap gk(grad[1]->data(), basis, width);
      gk.noalias() += ConstMap(in[0]->data(), rows, basis).transpose() * gsegs;
    }
  };
  Tensor out(Shape{batch, groups, len});
  const Tensor* in[] = {&tape.value(x), &tape.value(kernel)};
  forward(in, out);
  return tape.record(std::move(out), {x, kernel}, forward, backward, "conv_transpose1d");
}

Var depthwise_conv1d(Tape& tape, Var x, Var kernel, std::size_t dilation) {
  const Shape& sx = tape.shape(x);
  const Shape& sk = tape.shape(kernel);
  if (sx.size() != 3) shape_error("depthwise_conv1d", "input must be [B, F, C], got " + shape_string(sx));
  if (sk.size() != 2 || sk[1] != sx[2]) {
    shape_error("depthwise_conv1d", "kernel must be [K, C] matching input, got " + shape_string(sk));
  }
  if (sk[0] % 2 == 0) shape_error("depthwise_conv1d", "kernel size must be odd");
  if (dilation == 0) shape_error("depthwise_conv1d", "dilation must be positive");
  const std::size_t batch = sx[0], frames = sx[1], channels = sx[2], taps = sk[0];
  const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(taps - 1) / 2;
  const std::ptrdiff_t nframes = static_cast<std::ptrdiff_t>(frames);

  // Calls f(b, out_frame, tap, src_frame) for every in-range tap.
  auto for_taps = [=](auto&& f) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::ptrdiff_t fr = 0; fr < nframes; ++fr) {
        for (std::size_t k = 0; k < taps; ++k) {
          std::ptrdiff_t src =
              fr + (static_cast<std::ptrdiff_t>(k) - center) * static_cast<std::ptrdiff_t>(dilation);
          if (src < 0 || src >= nframes) continue;
          f(b, static_cast<std::size_t>(fr), k, static_cast<std::size_t>(src));
        }
      }
    }
  };
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    out.fill(0.0);
    const double* xv = in[0]->data();
    const double* w = in[1]->data();
    double* o = out.data();
    for_taps([&](std::size_t b, std::size_t fr, std::size_t k, std::size_t src) {
      const double* xs = xv + (b * frames + src) * channels;
      const double* wk = w + k * channels;
      double* od = o + (b * frames + fr) * channels;
      for (std::size_t c = 0; c < channels; ++c) od[c] += wk[c] * xs[c];
    });
  };
  auto backward = [=](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    const double* xv = in[0]->data();
    const double* w = in[1]->data();
    const double* gd = g.data();
    double* gx = grad[0] ? grad[0]->data() : nullptr;
    double* gw = grad[1] ? grad[1]->data() : nullptr;
    for_taps([&](std::size_t b, std::size_t fr, std::size_t k, std::size_t src) {
      const double* gs = gd + (b * frames + fr) * channels;
      if (gx) {
        const double* wk = w + k * channels;
        double* gxs = gx + (b * frames + src) * channels;
        for (std::size_t c = 0; c < channels; ++c) gxs[c] += wk[c] * gs[c];
      }
      if (gw) {
        const double* xs = xv + (b * frames + src) * channels;
        double* gwk = gw + k * channels;
        for (std::size_t c = 0; c < channels; ++c) gwk[c] += xs[c] * gs[c];
      }
    });
  };
  Tensor out(sx);
  const Tensor* in[] = {&tape.value(x), &tape.value(kernel)};
  forward(in, out);
  return tape.record(std::move(out), {x, kernel}, forward, backward, "depthwise_conv1d");
}

Var sigmoid(Tape& tape, Var x) {
  using Arr = Eigen::Map<Eigen::ArrayXd>;
  using ConstArr = Eigen::Map<const Eigen::ArrayXd>;
  // Eigen's packet exp; exp(-v) overflows to inf for very negative v, which
  // still yields the correct limit 0.
  auto forward = [](std::span<const Tensor* const> in, Tensor& out) {
    const auto n = static_cast<Eigen::Index>(out.size());
    Arr(out.data(), n) = (1.0 + (-ConstArr(in[0]->data(), n)).exp()).inverse();
  };
  auto backward = [](std::span<const Tensor* const>, const Tensor& out, const Tensor& g,
                     std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    const auto n = static_cast<Eigen::Index>(out.size());
    ConstArr y(out.data(), n);
    Arr(grad[0]->data(), n) += ConstArr(g.data(), n) * y * (1.0 - y);
  };
  Tensor out(tape.shape(x));
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "sigmoid");
}

Var relu(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Var prelu(Tape& tape, Var x, Var alpha) {
  const Shape& sx = tape.shape(x);
  const Shape& sa = tape.shape(alpha);
  if (sa.size() != 1 || sa[0] != sx.back()) {
    shape_error("prelu", "slope shape " + shape_string(sa) + " does not match channels of " +
                             shape_string(sx));
  }
  const std::size_t channels = sa[0];
  const std::size_t rows = shape_size(sx) / channels;
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    const double* v = in[0]->data();
    const double* a = in[1]->data();
    double* o = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* vr = v + r * channels;
      double* orow = o + r * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        const double neg = std::min(vr[c], 0.0);
        orow[c] = vr[c] - neg + a[c] * neg;
      }
    }
  };
  auto backward = [=](std::span<const Tensor* const> in, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    const double* v = in[0]->data();
    const double* a = in[1]->data();
    const double* gd = g.data();
    double* gx = grad[0] ? grad[0]->data() : nullptr;
    double* ga = grad[1] ? grad[1]->data() : nullptr;
    // Branch-free: activations are positive about half the time.
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * channels;
      if (gx) {
        for (std::size_t c = 0; c < channels; ++c) {
          const double pos = v[base + c] > 0.0 ? 1.0 : 0.0;
          gx[base + c] += gd[base + c] * (pos + (1.0 - pos) * a[c]);
        }
      }
      if (ga) {
        for (std::size_t c = 0; c < channels; ++c) {
          ga[c] += gd[base + c] * std::min(v[base + c], 0.0);
        }
      }
    }
  };
  Tensor out(sx);
  const Tensor* in[] = {&tape.value(x), &tape.value(alpha)};
  forward(in, out);
  return tape.record(std::move(out), {x, alpha}, forward, backward, "prelu");
}

Var instance_normalize(Tape& tape, Var x, double epsilon) {
  const Shape& sx = tape.shape(x);
  if (sx.size() != 3) shape_error("instance_normalize", "input must be [B, F, C], got " + shape_string(sx));
  if (sx[1] < 2) shape_error("instance_normalize", "variance across frames needs at least 2 frames");
  const std::size_t batch = sx[0], frames = sx[1], channels = sx[2];
  const double inv_frames = 1.0 / static_cast<double>(frames);

  // Per-(batch, channel) mean and 1/sqrt(var + eps), two-pass.
  auto stats = [=](const double* v, std::vector<double>& mu, std::vector<double>& inv_std) {
    mu.assign(batch * channels, 0.0);
    inv_std.assign(batch * channels, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      double* m = mu.data() + b * channels;
      double* s = inv_std.data() + b * channels;
      for (std::size_t f = 0; f < frames; ++f) {
        const double* row = v + (b * frames + f) * channels;
        for (std::size_t c = 0; c < channels; ++c) m[c] += row[c];
      }
      for (std::size_t c = 0; c < channels; ++c) m[c] *= inv_frames;
      for (std::size_t f = 0; f < frames; ++f) {
        const double* row = v + (b * frames + f) * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          double d = row[c] - m[c];
          s[c] += d * d;
        }
      }
      for (std::size_t c = 0; c < channels; ++c) s[c] = 1.0 / std::sqrt(s[c] * inv_frames + epsilon);
    }
  };
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    std::vector<double> mu, inv_std;
    const double* v = in[0]->data();
    stats(v, mu, inv_std);
    double* o = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* m = mu.data() + b * channels;
      const double* s = inv_std.data() + b * channels;
      for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t base = (b * frames + f) * channels;
        for (std::size_t c = 0; c < channels; ++c) o[base + c] = (v[base + c] - m[c]) * s[c];
      }
    }
  };
  auto backward = [=](std::span<const Tensor* const> in, const Tensor& out, const Tensor& g,
                      std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    std::vector<double> mu, inv_std;
    stats(in[0]->data(), mu, inv_std);
    const double* y = out.data();
    const double* gd = g.data();
    double* gx = grad[0]->data();
    std::vector<double> mean_g(channels), mean_gy(channels);
    for (std::size_t b = 0; b < batch; ++b) {
      std::fill(mean_g.begin(), mean_g.end(), 0.0);
      std::fill(mean_gy.begin(), mean_gy.end(), 0.0);
      for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t base = (b * frames + f) * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          mean_g[c] += gd[base + c];
          mean_gy[c] += gd[base + c] * y[base + c];
        }
      }
      for (std::size_t c = 0; c < channels; ++c) {
        mean_g[c] *= inv_frames;
        mean_gy[c] *= inv_frames;
      }
      const double* s = inv_std.data() + b * channels;
      for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t base = (b * frames + f) * channels;
        for (std::size_t c = 0; c < channels; ++c) {
          gx[base + c] += s[c] * (gd[base + c] - mean_g[c] - y[base + c] * mean_gy[c]);
        }
      }
    }
  };
  Tensor out(sx);
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "instance_normalize");
}

Var sum(Tape& tape, Var x) {
  auto forward = [](std::span<const Tensor* const> in, Tensor& out) {
    double acc = 0.0;
    for (double v : in[0]->values()) acc += v;
    out[0] = acc;
  };
  auto backward = [](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                     std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    for (double& v : grad[0]->values()) v += g[0];
  };
  Tensor out(Shape{1});
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "sum");
}

Var mean(Tape& tape, Var x) {
  const double inv = 1.0 / static_cast<double>(tape.value(x).size());
  auto forward = [inv](std::span<const Tensor* const> in, Tensor& out) {
    double acc = 0.0;
    for (double v : in[0]->values()) acc += v;
    out[0] = acc * inv;
  };
  auto backward = [inv](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                        std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    for (double& v : grad[0]->values()) v += g[0] * inv;
  };
  Tensor out(Shape{1});
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "mean");
}

Var sum_axis(Tape& tape, Var x, std::size_t axis) {
  const Shape& sx = tape.shape(x);
  if (axis >= sx.size()) shape_error("sum_axis", "axis out of range for " + shape_string(sx));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sx[i];
  for (std::size_t i = axis + 1; i < sx.size(); ++i) inner *= sx[i];
  const std::size_t n = sx[axis];
  Shape out_shape = sx;
  out_shape[axis] = 1;
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    out.fill(0.0);
    const double* v = in[0]->data();
    double* o = out.data();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t j = 0; j < n; ++j) {
        const double* src = v + (a * n + j) * inner;
        double* dst = o + a * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  };
  auto backward = [=](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    double* gx = grad[0]->data();
    const double* gd = g.data();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t j = 0; j < n; ++j) {
        double* dst = gx + (a * n + j) * inner;
        const double* src = gd + a * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  };
  Tensor out(out_shape);
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "sum_axis");
}

Var log10(Tape& tape, Var x) {
  for (double v : tape.value(x).values()) {
    if (!(v > 0.0)) throw NumericError("log10 of a non-positive value");
  }
  return unary(
      tape, x, [](double v) { return std::log10(v); },
      [](double v, double) { return 1.0 / (v * std::numbers::ln10); }, "log10");
}

Var square(Tape& tape, Var x) {
  return unary(
      tape, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; }, "square");
}

Var concat(Tape& tape, const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "nothing to concatenate");
  Shape out_shape = tape.shape(parts[0]);
  if (axis >= out_shape.size()) shape_error("concat", "axis out of range");
  std::vector<std::size_t> extents;
  out_shape[axis] = 0;
  for (auto p : parts) {
    const Shape& s = tape.shape(p);
    if (s.size() != out_shape.size()) shape_error("concat", "rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        shape_error("concat", "shape mismatch " + shape_string(s) + " along axis " + std::to_string(i));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
  for (std::size_t i = axis + 1; i < out_shape.size(); ++i) inner *= out_shape[i];
  const std::size_t total = out_shape[axis];

  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < in.size(); ++p) {
      const std::size_t block = extents[p] * inner;
      for (std::size_t a = 0; a < outer; ++a) {
        const double* src = in[p]->data() + a * block;
        std::copy(src, src + block, out.data() + (a * total + offset) * inner);
      }
      offset += extents[p];
    }
  };
  auto backward = [=](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < grad.size(); ++p) {
      const std::size_t block = extents[p] * inner;
      if (grad[p]) {
        for (std::size_t a = 0; a < outer; ++a) {
          const double* src = g.data() + (a * total + offset) * inner;
          double* dst = grad[p]->data() + a * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += extents[p];
    }
  };
  Tensor out(out_shape);
  std::vector<const Tensor*> in;
  for (auto p : parts) in.push_back(&tape.value(p));
  forward(in, out);
  return tape.record(std::move(out), parts, forward, backward, "concat");
}

Var slice(Tape& tape, Var x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& sx = tape.shape(x);
  if (axis >= sx.size()) shape_error("slice", "axis out of range for " + shape_string(sx));
  if (length == 0 || start + length > sx[axis]) {
    shape_error("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") exceeds axis of extent " + std::to_string(sx[axis]));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sx[i];
  for (std::size_t i = axis + 1; i < sx.size(); ++i) inner *= sx[i];
  const std::size_t n = sx[axis];
  Shape out_shape = sx;
  out_shape[axis] = length;
  auto forward = [=](std::span<const Tensor* const> in, Tensor& out) {
    for (std::size_t a = 0; a < outer; ++a) {
      const double* src = in[0]->data() + (a * n + start) * inner;
      std::copy(src, src + length * inner, out.data() + a * length * inner);
    }
  };
  auto backward = [=](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                      std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    for (std::size_t a = 0; a < outer; ++a) {
      const double* src = g.data() + a * length * inner;
      double* dst = grad[0]->data() + (a * n + start) * inner;
      for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
    }
  };
  Tensor out(out_shape);
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "slice");
}

Var reshape(Tape& tape, Var x, Shape shape) {
  if (shape_size(shape) != tape.value(x).size()) {
    shape_error("reshape", "cannot reshape " + shape_string(tape.shape(x)) + " to " + shape_string(shape));
  }
  auto forward = [](std::span<const Tensor* const> in, Tensor& out) {
    std::copy(in[0]->values().begin(), in[0]->values().end(), out.data());
  };
  auto backward = [](std::span<const Tensor* const>, const Tensor&, const Tensor& g,
                     std::span<Tensor* const> grad) {
    if (!grad[0]) return;
    double* gx = grad[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  };
  Tensor out(std::move(shape));
  const Tensor* in[] = {&tape.value(x)};
  forward(in, out);
  return tape.record(std::move(out), {x}, forward, backward, "reshape");
}

}  // namespace mixit::autograd
