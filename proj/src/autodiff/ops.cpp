#include "metroflow/autodiff/ops.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "metroflow/error.hpp"

namespace metroflow::ad {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMajor> view(Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const RowMajor> cview(const Tensor& t, std::size_t rows, std::size_t cols) {
  return {t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) {
    fail(ErrorCategory::contract, std::string(op) + ": operands on different tapes");
  }
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  fail(ErrorCategory::shape,
       std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (dst == nullptr) return;
  double* d = dst->data();
  const double* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

std::size_t blocks_of(const Tensor& x, const SegmentIndex& index, const char* op) {
  const std::size_t n = index.num_targets();
  if (n == 0 || x.rows() % n != 0) {
    fail(ErrorCategory::shape, std::string(op) + ": " + std::to_string(x.rows()) +
                                   " rows is not a whole number of " + std::to_string(n) +
                                   "-vertex blocks");
  }
  return x.rows() / n;
}

void check_coef(const std::optional<Var>& coef, const SegmentIndex& index, const char* op) {
  if (coef && (coef->rows() != index.num_entries() || coef->cols() != 1)) {
    fail(ErrorCategory::shape, std::string(op) + ": coefficients " +
                                   coef->value().shape_string() + " for " +
                                   std::to_string(index.num_entries()) + " entries");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(m, n);
  if (m * n > 0 && k > 0) view(out, m, n).noalias() = cview(av, m, k) * cview(bv, k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& tape, const Tensor& g) {
    if (m * n == 0 || k == 0) return;
    const auto gm = cview(g, m, n);
    if (Tensor* da = tape.grad_sink(a)) {
      view(*da, m, k).noalias() += gm * cview(b.value(), k, n).transpose();
    }
    if (Tensor* db = tape.grad_sink(b)) {
      view(*db, k, n).noalias() += cview(a.value(), m, k).transpose() * gm;
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  if (!a.value().same_shape(b.value())) shape_mismatch("add", a.value(), b.value());
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    accumulate(tape.grad_sink(a), g);
    accumulate(tape.grad_sink(b), g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  if (!a.value().same_shape(b.value())) shape_mismatch("sub", a.value(), b.value());
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    accumulate(tape.grad_sink(a), g);
    if (Tensor* db = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) db->data()[i] -= g.data()[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  if (!a.value().same_shape(b.value())) shape_mismatch("mul", a.value(), b.value());
  Tensor out = a.value();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      const double* bv = b.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) da->data()[i] += g.data()[i] * bv[i];
    }
    if (Tensor* db = tape.grad_sink(b)) {
      const double* av = a.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) db->data()[i] += g.data()[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) da->data()[i] += factor * g.data()[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  require_same_tape(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_mismatch("add_bias", xv, bv);
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += bv.data()[j];
  }
  return x.tape().record(std::move(out), {x, bias}, [x, bias](Tape& tape, const Tensor& g) {
    accumulate(tape.grad_sink(x), g);
    if (Tensor* db = tape.grad_sink(bias)) {
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* grow = g.data() + i * g.cols();
        for (std::size_t j = 0; j < g.cols(); ++j) db->data()[j] += grow[j];
      }
    }
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      const double* xv = x.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] > 0.0) dx->data()[i] += g.data()[i];
      }
    }
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      const double* xv = x.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-xv[i]));
        dx->data()[i] += g.data()[i] * s * (1.0 - s);
      }
    }
  });
}

Var abs(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::fabs(v);
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      const double* xv = x.value().data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double sign = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
        dx->data()[i] += g.data()[i] * sign;
      }
    }
  });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) shape_mismatch("concat_cols", av, bv);
  const std::size_t m = av.rows(), p = av.cols(), q = bv.cols();
  Tensor out(m, p + q);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * (p + q);
    for (std::size_t j = 0; j < p; ++j) orow[j] = av(i, j);
    for (std::size_t j = 0; j < q; ++j) orow[p + j] = bv(i, j);
  }
  return a.tape().record(std::move(out), {a, b}, [a, b, m, p, q](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) (*da)(i, j) += g(i, j);
    }
    if (Tensor* db = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j) (*db)(i, j) += g(i, p + j);
    }
  });
}

Var concat_rows(Var a, Var b) {
  require_same_tape(a, b, "concat_rows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) shape_mismatch("concat_rows", av, bv);
  std::vector<double> values(av.values().begin(), av.values().end());
  values.insert(values.end(), bv.values().begin(), bv.values().end());
  const std::size_t split = av.size();
  Tensor out(av.rows() + bv.rows(), av.cols(), std::move(values));
  return a.tape().record(std::move(out), {a, b}, [a, b, split](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < split; ++i) da->data()[i] += g.data()[i];
    }
    if (Tensor* db = tape.grad_sink(b)) {
      for (std::size_t i = split; i < g.size(); ++i) db->data()[i - split] += g.data()[i];
    }
  });
}

Var max_over_rows(Var rows) {
  const Tensor& xv = rows.value();
  if (xv.rows() == 0) fail(ErrorCategory::contract, "max_over_rows: empty set of rows");
  const std::size_t d = xv.cols();
  Tensor out(1, d);
  auto winners = std::make_shared<std::vector<std::uint32_t>>(d, 0);
  for (std::size_t c = 0; c < d; ++c) {
    double best = xv(0, c);
    for (std::size_t r = 1; r < xv.rows(); ++r) {
      if (xv(r, c) > best) {
        best = xv(r, c);
        (*winners)[c] = static_cast<std::uint32_t>(r);
      }
    }
    out(0, c) = best;
  }
  return rows.tape().record(std::move(out), {rows}, [rows, winners](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(rows)) {
      for (std::size_t c = 0; c < g.cols(); ++c) (*dx)((*winners)[c], c) += g(0, c);
    }
  });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.tape().record(Tensor(1, 1, total), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      for (double& v : dx->values()) v += g(0, 0);
    }
  });
}

Var mean(Var x) {
  const std::size_t count = x.value().size();
  if (count == 0) fail(ErrorCategory::contract, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(count));
}

Var gather_rows(Var x, std::span<const std::uint32_t> indices) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out(indices.size(), d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.rows()) {
      fail(ErrorCategory::shape, "gather_rows: index " + std::to_string(indices[i]) +
                                     " out of range for " + xv.shape_string());
    }
    const double* src = xv.data() + indices[i] * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  std::vector<std::uint32_t> idx(indices.begin(), indices.end());
  return x.tape().record(std::move(out), {x},
                         [x, idx = std::move(idx), d](Tape& tape, const Tensor& g) {
                           if (Tensor* dx = tape.grad_sink(x)) {
                             for (std::size_t i = 0; i < idx.size(); ++i) {
                               double* dst = dx->data() + idx[i] * d;
                               const double* src = g.data() + i * d;
                               for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                             }
                           }
                         });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  Tensor out = x.value().slice_rows(begin, end);
  const std::size_t offset = begin * x.cols();
  return x.tape().record(std::move(out), {x}, [x, offset](Tape& tape, const Tensor& g) {
    if (Tensor* dx = tape.grad_sink(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) dx->data()[offset + i] += g.data()[i];
    }
  });
}

Var neighbor_sum(Var x, const SegmentIndex& index, std::optional<Var> coef,
                 std::span<const double> const_coef) {
  const Tensor& xv = x.value();
  const std::size_t blocks = blocks_of(xv, index, "neighbor_sum");
  check_coef(coef, index, "neighbor_sum");
  if (coef) require_same_tape(x, *coef, "neighbor_sum");
  if (!const_coef.empty() && const_coef.size() != index.num_entries()) {
    fail(ErrorCategory::shape, "neighbor_sum: constant coefficient count mismatch");
  }
  const std::size_t n = index.num_targets();
  const std::size_t d = xv.cols();

  // Effective per-entry weight, fixed for the forward pass.
  std::vector<double> weight(index.num_entries(), 1.0);
  for (std::size_t e = 0; e < weight.size(); ++e) {
    if (coef) weight[e] *= coef->value()(e, 0);
    if (!const_coef.empty()) weight[e] *= const_coef[e];
  }

  Tensor out(xv.rows(), d);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t v = 0; v < n; ++v) {
      double* orow = out.data() + (b * n + v) * d;
      for (std::uint32_t e = index.offsets[v]; e < index.offsets[v + 1]; ++e) {
        const double w = weight[e];
        const double* src = xv.data() + (b * n + index.sources[e]) * d;
        for (std::size_t j = 0; j < d; ++j) orow[j] += w * src[j];
      }
    }
  }

  std::vector<double> consts(const_coef.begin(), const_coef.end());
  Var coef_var = coef ? *coef : Var{};
  auto backward = [x, coef_var, &index, weight = std::move(weight), consts = std::move(consts),
                   blocks, n, d](Tape& tape, const Tensor& g) {
    Tensor* dx = tape.grad_sink(x);
    Tensor* dc = coef_var.valid() ? tape.grad_sink(coef_var) : nullptr;
    const Tensor& xv = x.value();
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t v = 0; v < n; ++v) {
        const double* grow = g.data() + (b * n + v) * d;
        for (std::uint32_t e = index.offsets[v]; e < index.offsets[v + 1]; ++e) {
          const std::size_t src_row = b * n + index.sources[e];
          if (dx != nullptr) {
            double* dst = dx->data() + src_row * d;
            const double w = weight[e];
            for (std::size_t j = 0; j < d; ++j) dst[j] += w * grow[j];
          }
          if (dc != nullptr) {
            const double* src = xv.data() + src_row * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += grow[j] * src[j];
            dc->data()[e] += (consts.empty() ? 1.0 : consts[e]) * dot;
          }
        }
      }
    }
  };
  if (coef) return x.tape().record(std::move(out), {x, *coef}, std::move(backward));
  return x.tape().record(std::move(out), {x}, std::move(backward));
}

Var neighbor_max_pool(Var x, const SegmentIndex& index, std::optional<Var> coef, Var bias) {
  const Tensor& xv = x.value();
  const std::size_t blocks = blocks_of(xv, index, "neighbor_max_pool");
  check_coef(coef, index, "neighbor_max_pool");
  require_same_tape(x, bias, "neighbor_max_pool");
  if (coef) require_same_tape(x, *coef, "neighbor_max_pool");
  const std::size_t n = index.num_targets();
  const std::size_t d = xv.cols();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != d) shape_mismatch("neighbor_max_pool", xv, bv);

  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  Tensor out(xv.rows(), d);
  // Winning entry per output cell; kNone when the cell is zero (isolated or
  // clipped by relu), so no gradient flows.
  auto winners = std::make_shared<std::vector<std::uint32_t>>(xv.rows() * d, kNone);
  std::vector<double> best(d);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t v = 0; v < n; ++v) {
      const std::uint32_t begin = index.offsets[v], end = index.offsets[v + 1];
      if (begin == end) continue;
      std::uint32_t* win = winners->data() + (b * n + v) * d;
      for (std::uint32_t e = begin; e < end; ++e) {
        const double w = coef ? coef->value()(e, 0) : 1.0;
        const double* src = xv.data() + (b * n + index.sources[e]) * d;
        for (std::size_t j = 0; j < d; ++j) {
          const double z = w * src[j] + bv.data()[j];
          if (e == begin || z > best[j]) {
            best[j] = z;
            win[j] = e;
          }
        }
      }
      double* orow = out.data() + (b * n + v) * d;
      for (std::size_t j = 0; j < d; ++j) {
        if (best[j] > 0.0) {
          orow[j] = best[j];
        } else {
          win[j] = kNone;
        }
      }
    }
  }

  Var coef_var = coef ? *coef : Var{};
  auto backward = [x, coef_var, bias, &index, winners, blocks, n, d](Tape& tape,
                                                                     const Tensor& g) {
    Tensor* dx = tape.grad_sink(x);
    Tensor* dc = coef_var.valid() ? tape.grad_sink(coef_var) : nullptr;
    Tensor* db = tape.grad_sink(bias);
    const Tensor& xv = x.value();
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t v = 0; v < n; ++v) {
        const std::size_t row = b * n + v;
        const std::uint32_t* win = winners->data() + row * d;
        const double* grow = g.data() + row * d;
        for (std::size_t j = 0; j < d; ++j) {
          const std::uint32_t e = win[j];
          if (e == kNone) continue;
          const std::size_t src_row = b * n + index.sources[e];
          const double w = coef_var.valid() ? coef_var.value()(e, 0) : 1.0;
          if (dx != nullptr) (*dx)(src_row, j) += grow[j] * w;
          if (dc != nullptr) dc->data()[e] += grow[j] * xv(src_row, j);
          if (db != nullptr) db->data()[j] += grow[j];
        }
      }
    }
  };
  if (coef) return x.tape().record(std::move(out), {x, *coef, bias}, std::move(backward));
  return x.tape().record(std::move(out), {x, bias}, std::move(backward));
}

}  // namespace metroflow::ad
