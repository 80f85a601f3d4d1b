#include "snnkit/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace snnkit {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw ContractError("broadcast requires equal ranks, got " + shape_str(a) + " vs " +
                        shape_str(b));
  }
  Shape out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] == b[d] || a[d] == 1 || b[d] == 1) {
      out[d] = std::max(a[d], b[d]);
    } else {
      throw ContractError("incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    }
  }
  return out;
}

// Row-major strides of `in` against the broadcast shape `out`; zero stride
// marks a broadcast dimension.
std::vector<std::int64_t> bc_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> natural(in.size());
  std::int64_t acc = 1;
  for (int d = static_cast<int>(in.size()) - 1; d >= 0; --d) {
    natural[d] = acc;
    acc *= in[d];
  }
  std::vector<std::int64_t> s(in.size());
  for (std::size_t d = 0; d < in.size(); ++d) s[d] = (in[d] == 1 && out[d] > 1) ? 0 : natural[d];
  return s;
}

// Visits every element of `out` with the flat offsets (out_i, a_i, b_i).
template <typename F>
void bc_iterate(const Shape& out, const std::vector<std::int64_t>& sa,
                const std::vector<std::int64_t>& sb, F&& f) {
  const int r = static_cast<int>(out.size());
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t ai = 0, bi = 0;
  const std::int64_t total = shape_size(out);
  for (std::int64_t oi = 0; oi < total; ++oi) {
    f(oi, ai, bi);
    for (int d = r - 1; d >= 0; --d) {
      ++idx[d];
      ai += sa[d];
      bi += sb[d];
      if (idx[d] < out[d]) break;
      ai -= sa[d] * out[d];
      bi -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinKind { kAdd, kSub, kMul };

Tensor binary_op(const Tensor& a, const Tensor& b, BinKind kind) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Tape* tape = Tape::of({&a, &b});

  Tensor out;
  if (same_shape(sa, sb)) {
    Array r(a.size());
    switch (kind) {
      case BinKind::kAdd: r = a.data() + b.data(); break;
      case BinKind::kSub: r = a.data() - b.data(); break;
      case BinKind::kMul: r = a.data() * b.data(); break;
    }
    out = Tensor::from_array(sa, std::move(r));
  } else {
    Shape so = broadcast_shape(sa, sb);
    auto stra = bc_strides(sa, so);
    auto strb = bc_strides(sb, so);
    Array r(shape_size(so));
    const Array& da = a.data();
    const Array& db = b.data();
    switch (kind) {
      case BinKind::kAdd:
        bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t i, std::int64_t j) { r[o] = da[i] + db[j]; });
        break;
      case BinKind::kSub:
        bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t i, std::int64_t j) { r[o] = da[i] - db[j]; });
        break;
      case BinKind::kMul:
        bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t i, std::int64_t j) { r[o] = da[i] * db[j]; });
        break;
    }
    out = Tensor::from_array(std::move(so), std::move(r));
  }

  if (tape) {
    const std::int64_t ia = tape->node_of(a);
    const std::int64_t ib = tape->node_of(b);
    const Shape so = out.shape();
    Tensor av = a, bv = b;  // keep values alive for the backward pass
    tape->record(out, [=](const Array& g, Tape& t) {
      const Shape& sa2 = av.shape();
      const Shape& sb2 = bv.shape();
      auto stra = bc_strides(sa2, so);
      auto strb = bc_strides(sb2, so);
      if (ia >= 0) {
        Array ga = Array::Zero(av.size());
        switch (kind) {
          case BinKind::kAdd:
          case BinKind::kSub:
            bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t i, std::int64_t) { ga[i] += g[o]; });
            break;
          case BinKind::kMul: {
            const Array& db = bv.data();
            bc_iterate(so, stra, strb,
                       [&](std::int64_t o, std::int64_t i, std::int64_t j) { ga[i] += g[o] * db[j]; });
            break;
          }
        }
        t.accumulate(ia, ga);
      }
      if (ib >= 0) {
        Array gb = Array::Zero(bv.size());
        switch (kind) {
          case BinKind::kAdd:
            bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t, std::int64_t j) { gb[j] += g[o]; });
            break;
          case BinKind::kSub:
            bc_iterate(so, stra, strb, [&](std::int64_t o, std::int64_t, std::int64_t j) { gb[j] -= g[o]; });
            break;
          case BinKind::kMul: {
            const Array& da = av.data();
            bc_iterate(so, stra, strb,
                       [&](std::int64_t o, std::int64_t i, std::int64_t j) { gb[j] += g[o] * da[i]; });
            break;
          }
        }
        t.accumulate(ib, gb);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinKind::kMul); }

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::from_array(a.shape(), a.data() * c);
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, Array(g * c));
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = Tensor::from_array(a.shape(), a.data() + c);
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, g);
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = Tensor::from_array(a.shape(), a.data().max(0.0));
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    Tensor av = a;
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, Array(g * (av.data() > 0.0).cast<double>()));
    });
  }
  return out;
}

Tensor logistic(const Tensor& a) {
  Array s = 1.0 / (1.0 + (-a.data()).exp());
  Tensor out = Tensor::from_array(a.shape(), std::move(s));
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    Tensor ov = out;
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, Array(g * ov.data() * (1.0 - ov.data())));
    });
  }
  return out;
}

Tensor detach(const Tensor& a) { return Tensor::from_array(a.shape(), a.data()); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ContractError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                        " changes element count");
  }
  Tensor out = Tensor::from_array(std::move(shape), a.data());
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, g);
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(a.data().sum());
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    const std::int64_t n = a.size();
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) t.accumulate(ia, Array(Array::Constant(n, g[0])));
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ContractError("matmul requires rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ContractError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
  }
  Array r(m * n);
  MapM(r.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  Tensor out = Tensor::from_array({m, n}, std::move(r));
  if (Tape* tape = Tape::of({&a, &b})) {
    const std::int64_t ia = tape->node_of(a);
    const std::int64_t ib = tape->node_of(b);
    Tensor av = a, bv = b;
    tape->record(out, [=](const Array& g, Tape& t) {
      MapC gm(g.data(), m, n);
      if (ia >= 0) {
        Array ga(m * k);
        MapM(ga.data(), m, k).noalias() = gm * MapC(bv.data().data(), k, n).transpose();
        t.accumulate(ia, ga);
      }
      if (ib >= 0) {
        Array gb(k * n);
        MapM(gb.data(), k, n).noalias() = MapC(av.data().data(), m, k).transpose() * gm;
        t.accumulate(ib, gb);
      }
    });
  }
  return out;
}

namespace {

// Scatters input patches into a [Cin*Kh*Kw, Ho*Wo] matrix for one sample.
void im2col(const double* in, std::int64_t cin, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t ph, std::int64_t pw, std::int64_t ho, std::int64_t wo,
            double* cols) {
  const std::int64_t ncols = ho * wo;
  for (std::int64_t c = 0; c < cin; ++c) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        double* row = cols + ((c * kh + ky) * kw + kx) * ncols;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const std::int64_t iy = oy + ky - ph;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * wo, row + (oy + 1) * wo, 0.0);
            continue;
          }
          const double* src = in + (c * h + iy) * w;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const std::int64_t ix = ox + kx - pw;
            row[oy * wo + ox] = (ix < 0 || ix >= w) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates column gradients back into the padded image.
void col2im_acc(const double* cols, std::int64_t cin, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t ph, std::int64_t pw,
                std::int64_t ho, std::int64_t wo, double* gin) {
  const std::int64_t ncols = ho * wo;
  for (std::int64_t c = 0; c < cin; ++c) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        const double* row = cols + ((c * kh + ky) * kw + kx) * ncols;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
          const std::int64_t iy = oy + ky - ph;
          if (iy < 0 || iy >= h) continue;
          double* dst = gin + (c * h + iy) * w;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const std::int64_t ix = ox + kx - pw;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::int64_t pad_h,
              std::int64_t pad_w) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw ContractError("conv2d expects input [N,Cin,H,W] and kernel [Cout,Cin,Kh,Kw]");
  }
  const std::int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != cin) {
    throw ContractError("conv2d channel mismatch: input Cin=" + std::to_string(cin) +
                        ", kernel Cin=" + std::to_string(kernel.dim(1)));
  }
  if (kh % 2 == 0 || kw % 2 == 0) throw ContractError("conv2d kernel sides must be odd");
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw ContractError("conv2d bias must be [Cout]");
  }
  if (pad_h < 0 || pad_w < 0) throw ContractError("conv2d padding must be non-negative");
  const std::int64_t ho = h + 2 * pad_h - kh + 1;
  const std::int64_t wo = w + 2 * pad_w - kw + 1;
  if (ho < 1 || wo < 1) {
    throw ContractError("conv2d output would be empty for input " + shape_str(input.shape()));
  }

  const std::int64_t patch = cin * kh * kw;
  Array cols(patch * ho * wo);
  Array r(n * cout * ho * wo);
  MapC kmat(kernel.data().data(), cout, patch);
  for (std::int64_t s = 0; s < n; ++s) {
    im2col(input.data().data() + s * cin * h * w, cin, h, w, kh, kw, pad_h, pad_w, ho, wo,
           cols.data());
    MapM om(r.data() + s * cout * ho * wo, cout, ho * wo);
    om.noalias() = kmat * MapC(cols.data(), patch, ho * wo);
    for (std::int64_t c = 0; c < cout; ++c) om.row(c).array() += bias.data()[c];
  }
  Tensor out = Tensor::from_array({n, cout, ho, wo}, std::move(r));

  if (Tape* tape = Tape::of({&input, &kernel, &bias})) {
    const std::int64_t ii = tape->node_of(input);
    const std::int64_t ik = tape->node_of(kernel);
    const std::int64_t ibias = tape->node_of(bias);
    Tensor iv = input, kv = kernel;
    tape->record(out, [=](const Array& g, Tape& t) {
      Array cols(patch * ho * wo);
      Array gk, gi, gb;
      if (ik >= 0) gk = Array::Zero(cout * patch);
      if (ii >= 0) gi = Array::Zero(iv.size());
      if (ibias >= 0) gb = Array::Zero(cout);
      Array gcols(patch * ho * wo);
      MapC kmat(kv.data().data(), cout, patch);
      for (std::int64_t s = 0; s < n; ++s) {
        MapC gm(g.data() + s * cout * ho * wo, cout, ho * wo);
        if (ik >= 0) {
          im2col(iv.data().data() + s * cin * h * w, cin, h, w, kh, kw, pad_h, pad_w, ho, wo,
                 cols.data());
          MapM(gk.data(), cout, patch).noalias() += gm * MapC(cols.data(), patch, ho * wo).transpose();
        }
        if (ii >= 0) {
          MapM(gcols.data(), patch, ho * wo).noalias() = kmat.transpose() * gm;
          col2im_acc(gcols.data(), cin, h, w, kh, kw, pad_h, pad_w, ho, wo,
                     gi.data() + s * cin * h * w);
        }
        if (ibias >= 0) {
          for (std::int64_t c = 0; c < cout; ++c) gb[c] += gm.row(c).sum();
        }
      }
      if (ik >= 0) t.accumulate(ik, gk);
      if (ii >= 0) t.accumulate(ii, gi);
      if (ibias >= 0) t.accumulate(ibias, gb);
    });
  }
  return out;
}

Tensor pool_spatial(const Tensor& input, PoolMode mode) {
  if (input.rank() != 4) throw ContractError("pool_spatial expects [N,C,H,W]");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t hw = h * w;
  Array r(n * c);
  std::vector<std::int64_t> argmax;
  if (mode == PoolMode::kMax) argmax.resize(n * c);
  const Array& d = input.data();
  for (std::int64_t p = 0; p < n * c; ++p) {
    const double* base = d.data() + p * hw;
    if (mode == PoolMode::kAvg) {
      double acc = 0;
      for (std::int64_t q = 0; q < hw; ++q) acc += base[q];
      r[p] = acc / static_cast<double>(hw);
    } else {
      std::int64_t best = 0;
      for (std::int64_t q = 1; q < hw; ++q) {
        if (base[q] > base[best]) best = q;  // strict: first max wins
      }
      argmax[p] = best;
      r[p] = base[best];
    }
  }
  Tensor out = Tensor::from_array({n, c, 1, 1}, std::move(r));
  if (Tape* tape = Tape::of({&input})) {
    const std::int64_t ii = tape->node_of(input);
    tape->record(out, [=, am = std::move(argmax)](const Array& g, Tape& t) {
      if (ii < 0) return;
      Array gi = Array::Zero(n * c * hw);
      if (mode == PoolMode::kAvg) {
        for (std::int64_t p = 0; p < n * c; ++p) {
          const double v = g[p] / static_cast<double>(hw);
          for (std::int64_t q = 0; q < hw; ++q) gi[p * hw + q] = v;
        }
      } else {
        for (std::int64_t p = 0; p < n * c; ++p) gi[p * hw + am[p]] = g[p];
      }
      t.accumulate(ii, gi);
    });
  }
  return out;
}

Tensor pool_channel(const Tensor& input) {
  if (input.rank() != 4) throw ContractError("pool_channel expects [N,C,H,W]");
  const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::int64_t hw = h * w;
  Array r(n * 2 * hw);
  std::vector<std::int64_t> argmax(n * hw);
  const Array& d = input.data();
  for (std::int64_t s = 0; s < n; ++s) {
    for (std::int64_t q = 0; q < hw; ++q) {
      double acc = 0;
      std::int64_t best = 0;
      double bestv = d[(s * c) * hw + q];
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double v = d[(s * c + ch) * hw + q];
        acc += v;
        if (v > bestv) {
          bestv = v;
          best = ch;
        }
      }
      r[(s * 2 + 0) * hw + q] = acc / static_cast<double>(c);
      r[(s * 2 + 1) * hw + q] = bestv;
      argmax[s * hw + q] = best;
    }
  }
  Tensor out = Tensor::from_array({n, 2, h, w}, std::move(r));
  if (Tape* tape = Tape::of({&input})) {
    const std::int64_t ii = tape->node_of(input);
    tape->record(out, [=, am = std::move(argmax)](const Array& g, Tape& t) {
      if (ii < 0) return;
      Array gi = Array::Zero(n * c * hw);
      for (std::int64_t s = 0; s < n; ++s) {
        for (std::int64_t q = 0; q < hw; ++q) {
          const double gmean = g[(s * 2 + 0) * hw + q] / static_cast<double>(c);
          for (std::int64_t ch = 0; ch < c; ++ch) gi[(s * c + ch) * hw + q] += gmean;
          gi[(s * c + am[s * hw + q]) * hw + q] += g[(s * 2 + 1) * hw + q];
        }
      }
      t.accumulate(ii, gi);
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4) throw ContractError("concat_channels expects [N,C,H,W]");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ContractError("concat_channels shape mismatch: " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
  }
  const std::int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Array r(n * (ca + cb) * hw);
  for (std::int64_t s = 0; s < n; ++s) {
    std::copy_n(a.data().data() + s * ca * hw, ca * hw, r.data() + s * (ca + cb) * hw);
    std::copy_n(b.data().data() + s * cb * hw, cb * hw, r.data() + s * (ca + cb) * hw + ca * hw);
  }
  Tensor out = Tensor::from_array({n, ca + cb, a.dim(2), a.dim(3)}, std::move(r));
  if (Tape* tape = Tape::of({&a, &b})) {
    const std::int64_t ia = tape->node_of(a);
    const std::int64_t ib = tape->node_of(b);
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia >= 0) {
        Array ga(n * ca * hw);
        for (std::int64_t s = 0; s < n; ++s) {
          std::copy_n(g.data() + s * (ca + cb) * hw, ca * hw, ga.data() + s * ca * hw);
        }
        t.accumulate(ia, ga);
      }
      if (ib >= 0) {
        Array gb(n * cb * hw);
        for (std::int64_t s = 0; s < n; ++s) {
          std::copy_n(g.data() + s * (ca + cb) * hw + ca * hw, cb * hw, gb.data() + s * cb * hw);
        }
        t.accumulate(ib, gb);
      }
    });
  }
  return out;
}

Tensor slice_channels(const Tensor& a, std::int64_t c0, std::int64_t c1) {
  if (a.rank() != 4) throw ContractError("slice_channels expects [N,C,H,W]");
  const std::int64_t n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  if (c0 < 0 || c1 <= c0 || c1 > c) {
    throw ContractError("slice_channels range [" + std::to_string(c0) + "," + std::to_string(c1) +
                        ") out of bounds for C=" + std::to_string(c));
  }
  const std::int64_t cs = c1 - c0;
  Array r(n * cs * hw);
  for (std::int64_t s = 0; s < n; ++s) {
    std::copy_n(a.data().data() + (s * c + c0) * hw, cs * hw, r.data() + s * cs * hw);
  }
  Tensor out = Tensor::from_array({n, cs, a.dim(2), a.dim(3)}, std::move(r));
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia < 0) return;
      Array ga = Array::Zero(n * c * hw);
      for (std::int64_t s = 0; s < n; ++s) {
        std::copy_n(g.data() + s * cs * hw, cs * hw, ga.data() + (s * c + c0) * hw);
      }
      t.accumulate(ia, ga);
    });
  }
  return out;
}

Tensor slice_leading(const Tensor& a, std::int64_t t_index) {
  if (a.rank() < 2) throw ContractError("slice_leading expects rank >= 2");
  const std::int64_t t_dim = a.dim(0);
  if (t_index < 0 || t_index >= t_dim) {
    throw ContractError("slice_leading index " + std::to_string(t_index) + " out of range [0," +
                        std::to_string(t_dim) + ")");
  }
  Shape inner(a.shape().begin() + 1, a.shape().end());
  const std::int64_t blk = shape_size(inner);
  Array r(blk);
  std::copy_n(a.data().data() + t_index * blk, blk, r.data());
  Tensor out = Tensor::from_array(std::move(inner), std::move(r));
  if (Tape* tape = Tape::of({&a})) {
    const std::int64_t ia = tape->node_of(a);
    const std::int64_t total = a.size();
    tape->record(out, [=](const Array& g, Tape& t) {
      if (ia < 0) return;
      Array ga = Array::Zero(total);
      std::copy_n(g.data(), blk, ga.data() + t_index * blk);
      t.accumulate(ia, ga);
    });
  }
  return out;
}

Tensor stack_leading(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("stack_leading requires at least one tensor");
  const Shape& inner = parts[0].shape();
  for (const Tensor& p : parts) {
    if (!same_shape(p.shape(), inner)) {
      throw ContractError("stack_leading requires uniform shapes");
    }
  }
  const std::int64_t blk = shape_size(inner);
  const std::int64_t t_dim = static_cast<std::int64_t>(parts.size());
  Array r(t_dim * blk);
  for (std::int64_t s = 0; s < t_dim; ++s) {
    std::copy_n(parts[s].data().data(), blk, r.data() + s * blk);
  }
  Shape so;
  so.reserve(inner.size() + 1);
  so.push_back(t_dim);
  so.insert(so.end(), inner.begin(), inner.end());
  Tensor out = Tensor::from_array(std::move(so), std::move(r));

  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    Tape* tp = Tape::of({&p});
    if (tp && tape && tp != tape) throw ContractError("stack_leading inputs on different tapes");
    if (tp) tape = tp;
  }
  if (tape) {
    std::vector<std::int64_t> ids(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) ids[i] = tape->node_of(parts[i]);
    tape->record(out, [=](const Array& g, Tape& t) {
      for (std::int64_t s = 0; s < t_dim; ++s) {
        if (ids[s] < 0) continue;
        Array gp(blk);
        std::copy_n(g.data() + s * blk, blk, gp.data());
        t.accumulate(ids[s], gp);
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ContractError("softmax_cross_entropy expects [N,K] logits");
  const std::int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw ContractError("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) throw ContractError("label out of range [0,K)");
  }
  Array probs(n * k);
  double loss = 0;
  const Array& d = logits.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = d.data() + i * k;
    double m = row[0];
    for (std::int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double z = 0;
    for (std::int64_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    for (std::int64_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - m) / z;
    loss += std::log(z) - (row[labels[i]] - m);
  }
  loss /= static_cast<double>(n);
  Tensor out = Tensor::scalar(loss);
  if (Tape* tape = Tape::of({&logits})) {
    const std::int64_t il = tape->node_of(logits);
    std::vector<int> ls = labels;
    tape->record(out, [=, p = std::move(probs)](const Array& g, Tape& t) {
      if (il < 0) return;
      Array gl = p;
      for (std::int64_t i = 0; i < n; ++i) gl[i * k + ls[i]] -= 1.0;
      gl *= g[0] / static_cast<double>(n);
      t.accumulate(il, gl);
    });
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ContractError("argmax_rows expects [N,K]");
  const std::int64_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  const Array& d = logits.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = d.data() + i * k;
    int best = 0;
    for (std::int64_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = static_cast<int>(j);
    }
    out[i] = best;
  }
  return out;
}

}  // namespace snnkit
