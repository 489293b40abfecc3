#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "terla/numeric/tape.hpp"

namespace terla::numeric {

namespace detail {

template <typename T>
void require_same_shape(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_matrix(const char* op, const BasicTensor<T>& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(a.shape()));
  }
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw Error("operands live on different tapes");
  return a.tape();
}

}  // namespace detail

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0]) {
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  BasicTensor<T> out(Shape{m, n});
  kernel::gemm_nn(m, n, k, av.data().data(), bv.data().data(), out.data().data());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib, m, n, k](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      kernel::gemm_nt(m, n, k, g.data().data(), t.value(ib).data().data(),
                      t.grad(ia).data().data());
    }
    if (t.needs_grad(ib)) {
      kernel::gemm_tn(m, n, k, t.value(ia).data().data(), g.data().data(),
                      t.grad(ib).data().data());
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  BasicTensor<T> out = a.value();
  detail::accumulate(out, b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) detail::accumulate(t.grad(ia), g);
    if (t.needs_grad(ib)) detail::accumulate(t.grad(ib), g);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) detail::accumulate(t.grad(ia), g);
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b);
  detail::require_same_shape("mul", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      const auto& bv = t.value(ib);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      const auto& av = t.value(ia);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

// a[m,n] + bias[n] broadcast over rows.
template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& bias) {
  Tape<T>& tape = detail::same_tape(a, bias);
  const auto& av = a.value();
  const auto& bv = bias.value();
  const std::size_t n = av.cols();
  if (bv.size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " does not match " +
                         shape_str(av.shape()));
  }
  BasicTensor<T> out = av;
  const std::size_t m = av.rows();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
  const std::size_t ia = a.id(), ib = bias.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) detail::accumulate(t.grad(ia), g);
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
    }
  });
}

// Scales row r of a[m,n] by col[r]; col has m entries.
template <typename T>
Var<T> mul_col(const Var<T>& a, const Var<T>& col) {
  Tape<T>& tape = detail::same_tape(a, col);
  const auto& av = a.value();
  const auto& cv = col.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (cv.size() != m) {
    throw DimensionError("mul_col: column " + shape_str(cv.shape()) + " does not match rows of " +
                         shape_str(av.shape()));
  }
  BasicTensor<T> out = av;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] *= cv[r];
  const std::size_t ia = a.id(), ic = col.id();
  return tape.push(std::move(out), {ia, ic}, [ia, ic, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      const auto& cv = t.value(ic);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[r * n + c] * cv[r];
    }
    if (t.needs_grad(ic)) {
      auto& gc = t.grad(ic);
      const auto& av = t.value(ia);
      for (std::size_t r = 0; r < m; ++r) {
        T acc{0};
        for (std::size_t c = 0; c < n; ++c) acc += g[r * n + c] * av[r * n + c];
        gc[r] += acc;
      }
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v *= s;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, s](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v += s;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    detail::accumulate(t.grad(ia), t.grad(self));
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > T{0}) ga[i] += g[i];
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v = std::exp(v);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
  });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v = std::log(v);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / x[i];
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v = v * v;
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += T{2} * g[i] * x[i];
  });
}

// Elementwise minimum; ties route the gradient to the first operand.
template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = detail::same_tape(a, b);
  detail::require_same_shape("minimum", a.value(), b.value());
  BasicTensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.push(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& av = t.value(ia);
    const auto& bv = t.value(ib);
    const bool ga_on = t.needs_grad(ia), gb_on = t.needs_grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] <= bv[i]) {
        if (ga_on) t.grad(ia)[i] += g[i];
      } else if (gb_on) {
        t.grad(ib)[i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  BasicTensor<T> out = a.value();
  for (auto& v : out.data()) v = std::clamp(v, lo, hi);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, lo, hi](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] >= lo && x[i] <= hi) ga[i] += g[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T acc{0};
  for (T v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().push(BasicTensor<T>::scalar(acc), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    for (auto& v : t.grad(ia).data()) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), T{1} / static_cast<T>(n));
}

// Sum over the last axis: [m,n] -> [m,1].
template <typename T>
Var<T> row_sum(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  BasicTensor<T> out(Shape{m, 1});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r] += av[r * n + c];
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[r];
  });
}

// Sum over rows: [m,n] -> [1,n].
template <typename T>
Var<T> col_sum(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  BasicTensor<T> out(Shape{1, n});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[c] += av[r * n + c];
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += g[c];
  });
}

// Softmax over the last axis, max-subtracted.
template <typename T>
Var<T> softmax(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t n = av.cols();
  if (n == 0 || av.rank() == 0) throw DimensionError("softmax over an empty axis");
  const std::size_t m = av.rows();
  BasicTensor<T> out = av;
  for (std::size_t r = 0; r < m; ++r) {
    T* row = out.data().data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T z{0};
    for (std::size_t c = 0; c < n; ++c) z += (row[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < n; ++c) row[c] /= z;
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      T dot{0};
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
    }
  });
}

template <typename T>
Var<T> log_softmax(const Var<T>& a) {
  const auto& av = a.value();
  const std::size_t n = av.cols();
  if (n == 0 || av.rank() == 0) throw DimensionError("log_softmax over an empty axis");
  const std::size_t m = av.rows();
  BasicTensor<T> out = av;
  for (std::size_t r = 0; r < m; ++r) {
    T* row = out.data().data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T z{0};
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) row[c] -= lse;
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r) {
      T gs{0};
      for (std::size_t c = 0; c < n; ++c) gs += g[r * n + c];
      for (std::size_t c = 0; c < n; ++c)
        ga[r * n + c] += g[r * n + c] - std::exp(y[r * n + c]) * gs;
    }
  });
}

// out[i] = a[index[i]] (rows).
template <typename T>
Var<T> gather_rows(const Var<T>& a, std::vector<std::size_t> index) {
  const auto& av = a.value();
  const std::size_t n = av.cols(), m = av.rows();
  BasicTensor<T> out(Shape{index.size(), n});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= m) throw DimensionError("gather_rows: index out of range");
    std::copy_n(av.data().data() + index[i] * n, n, out.data().data() + i * n);
  }
  const std::size_t ia = a.id();
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(index));
  return a.tape().push(std::move(out), {ia}, [ia, n, idx](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < idx->size(); ++i)
      for (std::size_t c = 0; c < n; ++c) ga[(*idx)[i] * n + c] += g[i * n + c];
  });
}

// out[index[i]] += a[i]; out has out_rows rows.
template <typename T>
Var<T> scatter_add_rows(const Var<T>& a, std::vector<std::size_t> index, std::size_t out_rows) {
  const auto& av = a.value();
  const std::size_t n = av.cols();
  if (index.size() != av.rows()) throw DimensionError("scatter_add_rows: index length mismatch");
  BasicTensor<T> out(Shape{out_rows, n});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= out_rows) throw DimensionError("scatter_add_rows: index out of range");
    for (std::size_t c = 0; c < n; ++c) out[index[i] * n + c] += av[i * n + c];
  }
  const std::size_t ia = a.id();
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(index));
  return a.tape().push(std::move(out), {ia}, [ia, n, idx](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < idx->size(); ++i)
      for (std::size_t c = 0; c < n; ++c) ga[i * n + c] += g[(*idx)[i] * n + c];
  });
}

// Columns [begin, end) of a matrix.
template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (begin > end || end > n) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  BasicTensor<T> out(Shape{m, w});
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(av.data().data() + r * n + begin, w, out.data().data() + r * w);
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, m, n, w, begin](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < w; ++c) ga[r * n + begin + c] += g[r * w + c];
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t m = parts.front().value().rows();
  std::size_t n = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    if (p.value().rows() != m) throw DimensionError("concat_cols: row count mismatch");
    ids.push_back(p.id());
    widths.push_back(p.value().cols());
    n += p.value().cols();
  }
  BasicTensor<T> out(Shape{m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.value();
    const std::size_t w = pv.cols();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(pv.data().data() + r * w, w, out.data().data() + r * n + off);
    off += w;
  }
  Tape<T>& tape = parts.front().tape();
  return tape.push(std::move(out), ids, [ids, widths, m, n](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (t.needs_grad(ids[k])) {
        auto& gk = t.grad(ids[k]);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < w; ++c) gk[r * w + c] += g[r * n + off + c];
      }
      off += w;
    }
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t n = parts.front().value().cols();
  std::size_t m = 0;
  std::vector<std::size_t> ids, sizes;
  for (const auto& p : parts) {
    if (p.value().cols() != n) throw DimensionError("concat_rows: column count mismatch");
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
    m += p.value().rows();
  }
  BasicTensor<T> out(Shape{m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + off);
    off += p.value().size();
  }
  Tape<T>& tape = parts.front().tape();
  return tape.push(std::move(out), ids, [ids, sizes](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.needs_grad(ids[k])) {
        auto& gk = t.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

// Rows [begin, end).
template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  const std::size_t n = av.cols();
  if (begin > end || end > av.rows()) throw DimensionError("slice_rows: range out of bounds");
  BasicTensor<T> out(Shape{end - begin, n});
  std::copy(av.data().begin() + begin * n, av.data().begin() + end * n, out.data().begin());
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, n, begin](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

// Softmax of each column of a[E,H] taken separately within each group of
// rows sharing group[e]. Rows of a group need not be contiguous.
template <typename T>
Var<T> segment_softmax(const Var<T>& a, std::vector<std::size_t> group, std::size_t groups) {
  const auto& av = a.value();
  const std::size_t e = av.rows(), h = av.cols();
  if (group.size() != e) throw DimensionError("segment_softmax: group length mismatch");
  BasicTensor<T> mx(Shape{groups, h}, -std::numeric_limits<T>::infinity());
  for (std::size_t i = 0; i < e; ++i) {
    if (group[i] >= groups) throw DimensionError("segment_softmax: group out of range");
    for (std::size_t c = 0; c < h; ++c)
      mx[group[i] * h + c] = std::max(mx[group[i] * h + c], av[i * h + c]);
  }
  BasicTensor<T> out(Shape{e, h});
  BasicTensor<T> z(Shape{groups, h});
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < h; ++c) {
      const T v = std::exp(av[i * h + c] - mx[group[i] * h + c]);
      out[i * h + c] = v;
      z[group[i] * h + c] += v;
    }
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < h; ++c) out[i * h + c] /= z[group[i] * h + c];
  const std::size_t ia = a.id();
  auto grp = std::make_shared<const std::vector<std::size_t>>(std::move(group));
  return a.tape().push(std::move(out), {ia}, [ia, e, h, groups, grp](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    BasicTensor<T> dot(Shape{groups, h});
    for (std::size_t i = 0; i < e; ++i)
      for (std::size_t c = 0; c < h; ++c) dot[(*grp)[i] * h + c] += g[i * h + c] * y[i * h + c];
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < e; ++i)
      for (std::size_t c = 0; c < h; ++c)
        ga[i * h + c] += y[i * h + c] * (g[i * h + c] - dot[(*grp)[i] * h + c]);
  });
}

// out[r] = a[r, index[r]] as an [m,1] column.
template <typename T>
Var<T> pick(const Var<T>& a, std::vector<std::size_t> index) {
  const auto& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (index.size() != m) throw DimensionError("pick: index length mismatch");
  BasicTensor<T> out(Shape{m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    if (index[r] >= n) throw DimensionError("pick: column out of range");
    out[r] = av[r * n + index[r]];
  }
  const std::size_t ia = a.id();
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(index));
  return a.tape().push(std::move(out), {ia}, [ia, n, idx](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t r = 0; r < idx->size(); ++r) ga[r * n + (*idx)[r]] += g[r];
  });
}

// Per-row normalisation to zero mean / unit variance followed by a learned
// affine map: y = gamma * (x - mean) / sqrt(var + eps) + beta.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw DimensionError("layer_norm: affine parameters do not match width " + std::to_string(n));
  }
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  BasicTensor<T> out(xv.shape());
  auto xhat = std::make_shared<BasicTensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<T>>(m);
  for (std::size_t r = 0; r < m; ++r) {
    T mu{0};
    for (std::size_t c = 0; c < n; ++c) mu += xv[r * n + c];
    mu /= static_cast<T>(n);
    T var{0};
    for (std::size_t c = 0; c < n; ++c) var += (xv[r * n + c] - mu) * (xv[r * n + c] - mu);
    var /= static_cast<T>(n);
    const T is = T{1} / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const T xh = (xv[r * n + c] - mu) * is;
      (*xhat)[r * n + c] = xh;
      out[r * n + c] = gv[c] * xh + bv[c];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().push(
      std::move(out), {ix, ig, ib}, [ix, ig, ib, m, n, xhat, inv_std](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad(self);
        const auto& gv = t.value(ig);
        if (t.needs_grad(ig)) {
          auto& gg = t.grad(ig);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gg[c] += g[r * n + c] * (*xhat)[r * n + c];
        }
        if (t.needs_grad(ib)) {
          auto& gb = t.grad(ib);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
        }
        if (t.needs_grad(ix)) {
          auto& gx = t.grad(ix);
          const T inv_n = T{1} / static_cast<T>(n);
          for (std::size_t r = 0; r < m; ++r) {
            T mean_d{0}, mean_dx{0};
            for (std::size_t c = 0; c < n; ++c) {
              const T d = g[r * n + c] * gv[c];
              mean_d += d;
              mean_dx += d * (*xhat)[r * n + c];
            }
            mean_d *= inv_n;
            mean_dx *= inv_n;
            for (std::size_t c = 0; c < n; ++c) {
              const T d = g[r * n + c] * gv[c];
              gx[r * n + c] += (*inv_std)[r] * (d - mean_d - (*xhat)[r * n + c] * mean_dx);
            }
          }
        }
      });
}

// Convenience: x W + b.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  return add_bias(matmul(x, weight), bias);
}

}  // namespace terla::numeric
