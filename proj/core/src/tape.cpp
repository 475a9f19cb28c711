// SPDX-License-Identifier: Apache-2.0
#include "catnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "catnet/error.hpp"

namespace catnet {

std::vector<double> stable_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  if (mask.size() != logits.size())
    throw ShapeError("softmax mask length " + std::to_string(mask.size()) + " does not match logits length " +
                     std::to_string(logits.size()));
  double max_logit = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    if (!std::isfinite(logits[i])) throw NumericError("softmax logits must be finite");
    max_logit = std::max(max_logit, logits[i]);
    any = true;
  }
  if (!any) throw NumericError("empty attention support");

  std::vector<double> out(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) out[i] /= total;
  return out;
}

std::vector<double> stable_softmax(std::span<const double> logits) {
  return stable_softmax(logits, std::vector<bool>(logits.size(), true));
}

namespace {

bool same_2d(const Tensor& a, const Tensor& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

Shape matrix_shape(std::size_t r, std::size_t c) { return {r, c}; }

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(const char* op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [this](std::uint32_t i) { return nodes_[i].needs_grad; });
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw Error("invalid tape variable");
  return nodes_[v.id];
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Var Tape::constant(Tensor value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::param(Parameter& p) {
  if (!p.value.all_finite()) throw NumericError("parameter '" + p.name + "' holds non-finite values");
  Node n;
  n.op = "param";
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const auto& n = node(v);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Var Tape::add(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  if (same_2d(x, y)) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    return push("add", std::move(out), {a.id, b.id}, [](Tape& t, std::uint32_t self) {
      const auto& n = t.nodes_[self];
      for (auto in : n.inputs) {
        if (!t.needs_grad(in)) continue;
        auto& g = t.grad_slot(in);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      }
    });
  }
  if (y.rows() == 1 && y.cols() == x.cols()) {
    Tensor out = x;
    const std::size_t r = x.rows(), c = x.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] += y[j];
    return push("add", std::move(out), {a.id, b.id}, [r, c](Tape& t, std::uint32_t self) {
      const auto& n = t.nodes_[self];
      if (t.needs_grad(n.inputs[0])) {
        auto& g = t.grad_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      }
      if (t.needs_grad(n.inputs[1])) {
        auto& g = t.grad_slot(n.inputs[1]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
      }
    });
  }
  shape_mismatch("add", x, y);
}

Var Tape::sub(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  if (!same_2d(x, y)) shape_mismatch("sub", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return push("sub", std::move(out), {a.id, b.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    if (t.needs_grad(n.inputs[0])) {
      auto& g = t.grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (t.needs_grad(n.inputs[1])) {
      auto& g = t.grad_slot(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  if (!same_2d(x, y)) shape_mismatch("mul", x, y);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return push("mul", std::move(out), {a.id, b.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const auto& xa = t.nodes_[n.inputs[0]].value;
    const auto& xb = t.nodes_[n.inputs[1]].value;
    if (t.needs_grad(n.inputs[0])) {
      auto& g = t.grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * xb[i];
    }
    if (t.needs_grad(n.inputs[1])) {
      auto& g = t.grad_slot(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * xa[i];
    }
  });
}

Var Tape::affine(Var a, double scale, double shift) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = scale * v + shift;
  return push("affine", std::move(out), {a.id}, [scale](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * n.grad[i];
  });
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = std::tanh(v);
  return push("tanh", std::move(out), {a.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = sigmoid_scalar(v);
  return push("sigmoid", std::move(out), {a.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
  });
}

Var Tape::square(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = v * v;
  return push("square", std::move(out), {a.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const auto& x = t.nodes_[n.inputs[0]].value;
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * n.grad[i];
  });
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (auto& v : out.storage()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive value");
    v = std::log(v);
  }
  return push("log", std::move(out), {a.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const auto& x = t.nodes_[n.inputs[0]].value;
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / x[i];
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Tensor out = value(a);
  for (auto& v : out.storage()) v = std::clamp(v, lo, hi);
  return push("clamp", std::move(out), {a.id}, [lo, hi](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const auto& x = t.nodes_[n.inputs[0]].value;
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] >= lo && x[i] <= hi) g[i] += n.grad[i];
  });
}

Var Tape::matmul(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  const std::size_t r = x.rows(), k = x.cols(), c = y.cols();
  if (y.rows() != k) shape_mismatch("matmul", x, y);
  Tensor out(matrix_shape(r, c));
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  double* op = out.data().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xp[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = yp + p * c;
      double* orow = op + i * c;
      for (std::size_t j = 0; j < c; ++j) orow[j] += xv * yrow[j];
    }
  return push("matmul", std::move(out), {a.id, b.id}, [r, k, c](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const double* g = n.grad.data().data();
    const double* xp = t.nodes_[n.inputs[0]].value.data().data();
    const double* yp = t.nodes_[n.inputs[1]].value.data().data();
    if (t.needs_grad(n.inputs[0])) {
      double* gx = t.grad_slot(n.inputs[0]).data().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g + i * c;
          const double* yrow = yp + p * c;
          for (std::size_t j = 0; j < c; ++j) acc += grow[j] * yrow[j];
          gx[i * k + p] += acc;
        }
    }
    if (t.needs_grad(n.inputs[1])) {
      double* gy = t.grad_slot(n.inputs[1]).data().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = xp[i * k + p];
          if (xv == 0.0) continue;
          const double* grow = g + i * c;
          double* gyrow = gy + p * c;
          for (std::size_t j = 0; j < c; ++j) gyrow[j] += xv * grow[j];
        }
    }
  });
}

Var Tape::matmul_transposed(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  const std::size_t r = x.rows(), k = x.cols(), c = y.rows();
  if (y.cols() != k) shape_mismatch("matmul_transposed", x, y);
  Tensor out(matrix_shape(r, c));
  const double* xp = x.data().data();
  const double* yp = y.data().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += xp[i * k + p] * yp[j * k + p];
      out[i * c + j] = acc;
    }
  return push("matmul_transposed", std::move(out), {a.id, b.id}, [r, k, c](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    const double* g = n.grad.data().data();
    const double* xp = t.nodes_[n.inputs[0]].value.data().data();
    const double* yp = t.nodes_[n.inputs[1]].value.data().data();
    if (t.needs_grad(n.inputs[0])) {
      double* gx = t.grad_slot(n.inputs[0]).data().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double gv = g[i * c + j];
          if (gv == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gx[i * k + p] += gv * yp[j * k + p];
        }
    }
    if (t.needs_grad(n.inputs[1])) {
      double* gy = t.grad_slot(n.inputs[1]).data().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double gv = g[i * c + j];
          if (gv == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gy[j * k + p] += gv * xp[i * k + p];
        }
    }
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (auto p : parts) {
    const auto& v = value(p);
    if (v.rows() != r) shape_mismatch("concat_cols", value(parts[0]), v);
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out(matrix_shape(r, total));
  std::size_t offset = 0;
  std::vector<std::uint32_t> ids;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = value(parts[k]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = v[i * widths[k] + j];
    offset += widths[k];
    ids.push_back(parts[k].id);
  }
  return push("concat_cols", std::move(out), std::move(ids), [r, total, widths](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    std::size_t offset = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (t.needs_grad(n.inputs[k])) {
        auto& g = t.grad_slot(n.inputs[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += n.grad[i * total + offset + j];
      }
      offset += widths[k];
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = value(parts[0]).cols();
  std::size_t rows = 0;
  std::vector<double> data;
  std::vector<std::uint32_t> ids;
  for (auto p : parts) {
    const auto& v = value(p);
    if (v.cols() != c) shape_mismatch("concat_rows", value(parts[0]), v);
    rows += v.rows();
    data.insert(data.end(), v.storage().begin(), v.storage().end());
    ids.push_back(p.id);
  }
  return push("concat_rows", Tensor(matrix_shape(rows, c), std::move(data)), std::move(ids),
              [](Tape& t, std::uint32_t self) {
                const auto& n = t.nodes_[self];
                std::size_t offset = 0;
                for (auto in : n.inputs) {
                  const std::size_t len = t.nodes_[in].value.size();
                  if (t.needs_grad(in)) {
                    auto& g = t.grad_slot(in);
                    for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[offset + i];
                  }
                  offset += len;
                }
              });
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const auto& x = value(a);
  const std::size_t r = x.rows(), c = x.cols();
  if (count == 0 || begin + count > c)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of bounds for shape " + to_string(x.shape()));
  Tensor out(matrix_shape(r, count));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = x[i * c + begin + j];
  return push("slice_cols", std::move(out), {a.id}, [r, c, begin, count](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + begin + j] += n.grad[i * count + j];
  });
}

Var Tape::gather_rows(Var a, const std::vector<std::size_t>& rows) {
  const auto& x = value(a);
  const std::size_t c = x.cols();
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  Tensor out(matrix_shape(rows.size(), c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of bounds for shape " +
                       to_string(x.shape()));
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * c), c,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return push("gather_rows", std::move(out), {a.id}, [rows, c](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) g[rows[i] * c + j] += n.grad[i * c + j];
  });
}

Var Tape::place_rows(Var a, const std::vector<std::size_t>& slots, std::size_t num_slots) {
  const auto& x = value(a);
  const std::size_t n = x.cols();
  if (slots.size() != x.rows())
    throw ShapeError("place_rows: " + std::to_string(slots.size()) + " slots for shape " + to_string(x.shape()));
  Tensor out(matrix_shape(1, num_slots * n));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] >= num_slots) throw ShapeError("place_rows: slot index out of range");
    for (std::size_t j = 0; j < n; ++j) out[slots[i] * n + j] += x[i * n + j];
  }
  return push("place_rows", std::move(out), {a.id}, [slots, n](Tape& t, std::uint32_t self) {
    const auto& node = t.nodes_[self];
    auto& g = t.grad_slot(node.inputs[0]);
    for (std::size_t i = 0; i < slots.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += node.grad[slots[i] * n + j];
  });
}

Var Tape::sum(Var a, int axis) {
  const auto& x = value(a);
  const std::size_t r = x.rows(), c = x.cols();
  if (axis == 0) {
    Tensor out(matrix_shape(1, c));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
    return push("sum0", std::move(out), {a.id}, [r, c](Tape& t, std::uint32_t self) {
      const auto& n = t.nodes_[self];
      auto& g = t.grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[j];
    });
  }
  if (axis == 1) {
    Tensor out(matrix_shape(r, 1));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i] += x[i * c + j];
    return push("sum1", std::move(out), {a.id}, [r, c](Tape& t, std::uint32_t self) {
      const auto& n = t.nodes_[self];
      auto& g = t.grad_slot(n.inputs[0]);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.grad[i];
    });
  }
  throw ShapeError("sum: axis must be 0 or 1");
}

Var Tape::sum_all(Var a) {
  double total = 0.0;
  for (double v : value(a).storage()) total += v;
  return push("sum_all", Tensor::scalar(total), {a.id}, [](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
  });
}

Var Tape::mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(value(a).size())); }

Var Tape::softmax_rows(Var logits, const std::vector<bool>& mask) {
  const auto& x = value(logits);
  const std::size_t r = x.rows(), c = x.cols();
  if (!mask.empty() && mask.size() != x.size())
    throw ShapeError("softmax_rows: mask length " + std::to_string(mask.size()) + " does not match shape " +
                     to_string(x.shape()));
  Tensor out(matrix_shape(r, c));
  for (std::size_t i = 0; i < r; ++i) {
    std::vector<bool> row_mask(c, true);
    if (!mask.empty())
      for (std::size_t j = 0; j < c; ++j) row_mask[j] = mask[i * c + j];
    const auto row = stable_softmax(x.data().subspan(i * c, c), row_mask);
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return push("softmax_rows", std::move(out), {logits.id}, [r, c](Tape& t, std::uint32_t self) {
    const auto& n = t.nodes_[self];
    auto& g = t.grad_slot(n.inputs[0]);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += n.value[i * c + j] * n.grad[i * c + j];
      // masked entries have value 0 and therefore receive no gradient
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += n.value[i * c + j] * (n.grad[i * c + j] - dot);
    }
  });
}

void Tape::backward(Var loss) {
  const auto& l = node(loss);
  if (l.value.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(l.value.shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id)[0] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto& pg = n.param->grad;
    if (pg.shape() != n.value.shape()) pg = Tensor(n.value.shape());
    for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
  }
}

}  // namespace catnet
