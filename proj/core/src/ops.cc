#include "attnie/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attnie/errors.h"

namespace attnie {
namespace {

using detail::Node;

std::string pair_shapes(const Tensor& a, const Tensor& b) {
  return shape_string(a.shape()) + " and " + shape_string(b.shape());
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (!x.defined() || x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         (x.defined() ? shape_string(x.shape()) : "<none>"));
  }
}

// Applies `fn` to (out_index, a_index, b_index) for same-shape or
// one-value broadcasting.
struct Broadcast {
  std::size_t n;
  bool a_scalar;
  bool b_scalar;
  Shape shape;
};

Broadcast broadcast_shapes(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return {a.size(), false, false, a.shape()};
  if (a.size() == 1) return {b.size(), true, false, b.shape()};
  if (b.size() == 1) return {a.size(), false, true, a.shape()};
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       pair_shapes(a, b));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.rank() != 2 || b.rank() != 2 ||
      a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + pair_shapes(a, b));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_op_result("matmul", {m, n}, std::move(out), {a, b},
                        [m, k, n](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    const double* g = o.grad.data();
    if (na.requires_grad) {
      double* ga = na.ensure_grad().data();
      const double* B = nb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          ga[i * k + p] += s;
        }
      }
    }
    if (nb.requires_grad) {
      double* gb = nb.ensure_grad().data();
      const double* A = na.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto x = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return make_op_result("transpose", {n, m}, std::move(out), {a},
                        [m, n](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = broadcast_shapes(a, b, "add");
  std::vector<double> out(bc.n);
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < bc.n; ++i) {
    out[i] = x[bc.a_scalar ? 0 : i] + y[bc.b_scalar ? 0 : i];
  }
  return make_op_result("add", bc.shape, std::move(out), {a, b},
                        [bc](Node& o) {
    for (int side = 0; side < 2; ++side) {
      Node& in = *o.inputs[side];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      const bool collapsed = side == 0 ? bc.a_scalar : bc.b_scalar;
      for (std::size_t i = 0; i < bc.n; ++i) g[collapsed ? 0 : i] += o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = broadcast_shapes(a, b, "mul");
  std::vector<double> out(bc.n);
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < bc.n; ++i) {
    out[i] = x[bc.a_scalar ? 0 : i] * y[bc.b_scalar ? 0 : i];
  }
  return make_op_result("mul", bc.shape, std::move(out), {a, b},
                        [bc](Node& o) {
    Node& na = *o.inputs[0];
    Node& nb = *o.inputs[1];
    for (std::size_t i = 0; i < bc.n; ++i) {
      const std::size_t ia = bc.a_scalar ? 0 : i;
      const std::size_t ib = bc.b_scalar ? 0 : i;
      if (na.requires_grad) na.ensure_grad()[ia] += o.grad[i] * nb.value[ib];
      if (nb.requires_grad) nb.ensure_grad()[ib] += o.grad[i] * na.value[ia];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  return make_op_result("scale", x.shape(), std::move(out), {x},
                        [factor](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * o.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return make_op_result("relu", x.shape(), std::move(out), {x}, [](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (o.value[i] > 0.0) g[i] += o.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in[i];
    // Split by sign so exp() never overflows.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return make_op_result("sigmoid", x.shape(), std::move(out), {x},
                        [](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = o.value[i];
      g[i] += o.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (!x.defined() || x.rank() == 0 || bias.rank() != 1 ||
      x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: cannot broadcast " + pair_shapes(bias, x));
  }
  const std::size_t n = bias.dim(0);
  const std::size_t rows = n ? x.size() / n : 0;
  std::vector<double> out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += b[j];
  return make_op_result("add_bias", x.shape(), std::move(out), {x, bias},
                        [rows, n](Node& o) {
    Node& nx = *o.inputs[0];
    Node& nb = *o.inputs[1];
    if (nx.requires_grad) {
      auto& g = nx.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[r * n + j];
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (!x.defined() || axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " invalid for shape " +
                         (x.defined() ? shape_string(x.shape()) : "<none>"));
  }
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  auto in = x.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = o * len * inner + q;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < len; ++j) {
        const double e = std::exp(in[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  return make_op_result("softmax", s, std::move(out), {x},
                        [outer, inner, len](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t q = 0; q < inner; ++q) {
        const std::size_t base = a * len * inner + q;
        double dot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          dot += o.grad[base + j * inner] * o.value[base + j * inner];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          g[idx] += o.value[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon) {
  if (!x.defined() || x.rank() == 0 || x.shape().back() == 0) {
    throw DimensionError("layer_norm: last dimension must be positive, got " +
                         (x.defined() ? shape_string(x.shape()) : "<none>"));
  }
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias " + pair_shapes(gain, bias) +
                         " do not match width " + std::to_string(d));
  }
  const std::size_t rows = x.size() / d;
  auto in = x.data();
  auto gn = gain.data();
  auto bs = bias.data();
  std::vector<double> out(x.size());
  std::vector<double> normed(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * inv;
      normed[r * d + j] = h;
      out[r * d + j] = h * gn[j] + bs[j];
    }
  }
  return make_op_result(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, normed = std::move(normed),
       inv_std = std::move(inv_std)](Node& o) {
        Node& nx = *o.inputs[0];
        Node& ng = *o.inputs[1];
        Node& nb = *o.inputs[2];
        const double* gain_v = ng.value.data();
        std::vector<double> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = o.grad.data() + r * d;
          const double* hr = normed.data() + r * d;
          if (ng.requires_grad) {
            auto& gg = ng.ensure_grad();
            for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * hr[j];
          }
          if (nb.requires_grad) {
            auto& gb = nb.ensure_grad();
            for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
          }
          if (!nx.requires_grad) continue;
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = gr[j] * gain_v[j];
            sum_dh += dh[j];
            sum_dh_h += dh[j] * hr[j];
          }
          auto& gx = nx.ensure_grad();
          const double scale_r = inv_std[r] / static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            gx[r * d + j] += scale_r * (static_cast<double>(d) * dh[j] -
                                        sum_dh - hr[j] * sum_dh_h);
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank(x, 2, "conv1d");
  require_rank(kernel, 3, "conv1d kernel");
  const std::size_t w = kernel.dim(0);
  if (w % 2 == 0) {
    throw ConfigError("conv1d: window width must be odd, got " +
                      std::to_string(w));
  }
  const std::size_t len = x.dim(0), fin = x.dim(1), fout = kernel.dim(2);
  if (kernel.dim(1) != fin || bias.shape() != Shape{fout}) {
    throw DimensionError("conv1d: input " + shape_string(x.shape()) +
                         " incompatible with kernel " +
                         shape_string(kernel.shape()) + " / bias " +
                         shape_string(bias.shape()));
  }
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(w / 2);
  const double* X = x.data().data();
  const double* K = kernel.data().data();
  auto b = bias.data();
  std::vector<double> out(len * fout);
  for (std::size_t i = 0; i < len; ++i) {
    double* orow = out.data() + i * fout;
    for (std::size_t o = 0; o < fout; ++o) orow[o] = b[o];
    for (std::size_t t = 0; t < w; ++t) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + t) - pad;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const double* xrow = X + static_cast<std::size_t>(src) * fin;
      const double* ktap = K + t * fin * fout;
      for (std::size_t c = 0; c < fin; ++c) {
        const double xv = xrow[c];
        if (xv == 0.0) continue;
        const double* kc = ktap + c * fout;
        for (std::size_t o = 0; o < fout; ++o) orow[o] += xv * kc[o];
      }
    }
  }
  return make_op_result("conv1d", {len, fout}, std::move(out),
                        {x, kernel, bias},
                        [len, fin, fout, w, pad](Node& o) {
    Node& nx = *o.inputs[0];
    Node& nk = *o.inputs[1];
    Node& nb = *o.inputs[2];
    const double* G = o.grad.data();
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t f = 0; f < fout; ++f) gb[f] += G[i * fout + f];
    }
    double* gx = nx.requires_grad ? nx.ensure_grad().data() : nullptr;
    double* gk = nk.requires_grad ? nk.ensure_grad().data() : nullptr;
    const double* X = nx.value.data();
    const double* K = nk.value.data();
    for (std::size_t i = 0; i < len; ++i) {
      const double* grow = G + i * fout;
      for (std::size_t t = 0; t < w; ++t) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + t) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
        const std::size_t s = static_cast<std::size_t>(src);
        for (std::size_t c = 0; c < fin; ++c) {
          const std::size_t koff = (t * fin + c) * fout;
          if (gx) {
            double acc = 0.0;
            for (std::size_t f = 0; f < fout; ++f) acc += grow[f] * K[koff + f];
            gx[s * fin + c] += acc;
          }
          if (gk) {
            const double xv = X[s * fin + c];
            if (xv == 0.0) continue;
            for (std::size_t f = 0; f < fout; ++f) gk[koff + f] += xv * grow[f];
          }
        }
      }
    }
  });
}

Tensor global_max_pool(const Tensor& x) {
  require_rank(x, 2, "global_max_pool");
  const std::size_t len = x.dim(0), f = x.dim(1);
  if (len == 0) throw EmptyInputError("global_max_pool: empty sequence");
  auto in = x.data();
  std::vector<double> out(f);
  std::vector<std::size_t> arg(f, 0);
  for (std::size_t c = 0; c < f; ++c) out[c] = in[c];
  for (std::size_t i = 1; i < len; ++i) {
    for (std::size_t c = 0; c < f; ++c) {
      const double v = in[i * f + c];
      if (v > out[c]) {  // strict: ties keep the lowest index
        out[c] = v;
        arg[c] = i;
      }
    }
  }
  return make_op_result("global_max_pool", {f}, std::move(out), {x},
                        [f, arg = std::move(arg)](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t c = 0; c < f; ++c) g[arg[c] * f + c] += o.grad[c];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> indices,
                   std::int64_t padding_index) {
  require_rank(table, 2, "gather_rows");
  const std::size_t vocab = table.dim(0), dim = table.dim(1);
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * dim, 0.0);
  auto tv = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::int64_t r = idx[i];
    if (r < 0 || static_cast<std::size_t>(r) >= vocab) {
      throw EncodingError("feature index " + std::to_string(r) +
                          " outside table of " + std::to_string(vocab) +
                          " rows");
    }
    if (r == padding_index) continue;
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(r * dim), dim,
                out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  const std::size_t rows = idx.size();
  return make_op_result("gather_rows", {rows, dim}, std::move(out),
                        {table},
                        [dim, padding_index, idx = std::move(idx)](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] == padding_index) continue;
      const std::size_t r = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < dim; ++j) g[r * dim + j] += o.grad[i * dim + j];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw EmptyInputError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (first.empty()) throw DimensionError("concat: scalar inputs");
  const std::size_t rows = shape_size(first) / std::max<std::size_t>(first.back(), 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat: leading extents differ between " +
                           pair_shapes(parts[0], p));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[r * total + offset + j] = v[r * widths[k] + j];
    offset += widths[k];
  }
  Shape shape = first;
  shape.back() = total;
  return make_op_result("concat", shape, std::move(out), parts,
                        [rows, total, widths](Node& o) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& in = *o.inputs[k];
      if (in.requires_grad) {
        auto& g = in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[k]; ++j)
            g[r * widths[k] + j] += o.grad[r * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (begin > end || end > cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " +
                         shape_string(x.shape()));
  }
  const std::size_t width = end - begin;
  auto v = x.data();
  std::vector<double> out(rows * width);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j)
      out[r * width + j] = v[r * cols + begin + j];
  return make_op_result("slice_cols", {rows, width}, std::move(out), {x},
                        [rows, cols, begin, width](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < width; ++j)
        g[r * cols + begin + j] += o.grad[r * width + j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " +
                         shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op_result("reshape", std::move(shape), std::move(out), {x},
                        [](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_op_result("sum", {}, {total}, {x}, [](Node& o) {
    auto& g = o.inputs[0]->ensure_grad();
    for (double& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw EmptyInputError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0,1), got " +
                      std::to_string(rate));
  }
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = keep(rng) ? factor : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

}  // namespace attnie
