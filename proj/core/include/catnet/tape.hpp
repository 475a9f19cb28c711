// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "catnet/tensor.hpp"

namespace catnet {

/// Masked, max-subtracted softmax. Masked entries are exactly zero.
/// Throws NumericError("empty attention support") when no entry is unmasked.
std::vector<double> stable_softmax(std::span<const double> logits, const std::vector<bool>& mask);
std::vector<double> stable_softmax(std::span<const double> logits);

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

/// Define-by-run reverse-mode recorder. Every op computes its value eagerly and
/// appends a node with a backward rule; backward() replays the nodes in reverse.
/// Parameters enter through param() and receive their gradient in Parameter::grad
/// (accumulated, so callers zero grads between steps).
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. v; zero-filled if v did not
  /// influence it.
  Tensor grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Elementwise. Binary ops require equal 2-D shapes; add() additionally
  // accepts a 1 x cols (or rank-1) right operand broadcast over rows.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var affine(Var a, double scale, double shift);  // scale * a + shift
  Var scale(Var a, double s) { return affine(a, s, 0.0); }
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var square(Var a);
  Var log(Var a);
  Var clamp(Var a, double lo, double hi);

  Var matmul(Var a, Var b);             // a (r x k) . b (k x c)
  Var matmul_transposed(Var a, Var b);  // a (r x k) . b^T, b (c x k)

  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var gather_rows(Var a, const std::vector<std::size_t>& rows);
  /// Lays row i of a (k x n) into slot slots[i] of a 1 x (num_slots * n) row;
  /// unassigned slots are zero.
  Var place_rows(Var a, const std::vector<std::size_t>& slots, std::size_t num_slots);

  Var sum(Var a, int axis);  // axis 0 -> 1 x c, axis 1 -> r x 1
  Var sum_all(Var a);
  Var mean_all(Var a);

  /// Row-wise stable_softmax. mask is row-major r x c; empty means all entries valid.
  Var softmax_rows(Var logits, const std::vector<bool>& mask = {});

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter leaf.
  void backward(Var loss);

 private:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  Var push(const char* op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn fn);
  const Node& node(Var v) const;
  bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
  Tensor& grad_slot(std::uint32_t id);

  std::deque<Node> nodes_;  // deque keeps value references stable while the tape grows
};

}  // namespace catnet
