// SPDX-License-Identifier: Apache-2.0
#include "catnet/backbone.hpp"

#include <cmath>

#include "catnet/error.hpp"

namespace catnet {

std::string_view cell_key(CellKind k) noexcept { return k == CellKind::Gru ? "gru" : "lstm"; }

std::optional<CellKind> parse_cell(std::string_view key) noexcept {
  if (key == "gru") return CellKind::Gru;
  if (key == "lstm") return CellKind::Lstm;
  return std::nullopt;
}

namespace {
Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-bound, bound);
  return t;
}
}  // namespace

RecurrentParams make_recurrent(CellKind kind, std::size_t input_width, std::size_t hidden, Rng& rng) {
  RecurrentParams p;
  p.kind = kind;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t gates = kind == CellKind::Gru ? 3 : 4;
  p.w_x = Parameter("rnn.w_x", uniform_tensor({input_width, gates * hidden}, bound, rng));
  if (kind == CellKind::Gru) {
    p.w_h = Parameter("rnn.w_h", uniform_tensor({hidden, 2 * hidden}, bound, rng));
    p.w_hc = Parameter("rnn.w_hc", uniform_tensor({hidden, hidden}, bound, rng));
  } else {
    p.w_h = Parameter("rnn.w_h", uniform_tensor({hidden, 4 * hidden}, bound, rng));
  }
  p.bias = Parameter("rnn.bias", uniform_tensor({1, gates * hidden}, bound, rng));
  return p;
}

RecurrentVars bind(Tape& tape, RecurrentParams& params) {
  RecurrentVars v;
  v.kind = params.kind;
  v.hidden = params.hidden();
  v.w_x = tape.param(params.w_x);
  v.w_h = tape.param(params.w_h);
  if (params.kind == CellKind::Gru) v.w_hc = tape.param(params.w_hc);
  v.bias = tape.param(params.bias);
  return v;
}

Var gru_cell(Tape& tape, const RecurrentVars& p, Var h_prev, Var x) {
  if (p.kind != CellKind::Gru) throw ConfigError("gru_cell called with LSTM parameters");
  const std::size_t b = p.hidden;
  if (tape.value(h_prev).cols() != b || tape.value(h_prev).rows() != tape.value(x).rows())
    throw ShapeError("gru_cell: hidden state " + to_string(tape.value(h_prev).shape()) + " does not match input " +
                     to_string(tape.value(x).shape()) + " for hidden width " + std::to_string(b));
  const Var xw = tape.add(tape.matmul(x, p.w_x), p.bias);
  const Var hw = tape.matmul(h_prev, p.w_h);
  const Var z = tape.sigmoid(tape.add(tape.slice_cols(xw, 0, b), tape.slice_cols(hw, 0, b)));
  const Var r = tape.sigmoid(tape.add(tape.slice_cols(xw, b, b), tape.slice_cols(hw, b, b)));
  const Var c = tape.tanh(tape.add(tape.slice_cols(xw, 2 * b, b), tape.matmul(tape.mul(r, h_prev), p.w_hc)));
  // h = h_prev + z * (c - h_prev)
  return tape.add(h_prev, tape.mul(z, tape.sub(c, h_prev)));
}

LstmState lstm_cell(Tape& tape, const RecurrentVars& p, Var h_prev, Var c_prev, Var x) {
  if (p.kind != CellKind::Lstm) throw ConfigError("lstm_cell called with GRU parameters");
  const std::size_t b = p.hidden;
  if (tape.value(h_prev).cols() != b || tape.value(c_prev).cols() != b ||
      tape.value(h_prev).rows() != tape.value(x).rows())
    throw ShapeError("lstm_cell: state " + to_string(tape.value(h_prev).shape()) + " does not match input " +
                     to_string(tape.value(x).shape()) + " for hidden width " + std::to_string(b));
  const Var pre = tape.add(tape.add(tape.matmul(x, p.w_x), tape.matmul(h_prev, p.w_h)), p.bias);
  const Var i = tape.sigmoid(tape.slice_cols(pre, 0, b));
  const Var f = tape.sigmoid(tape.slice_cols(pre, b, b));
  const Var g = tape.tanh(tape.slice_cols(pre, 2 * b, b));
  const Var o = tape.sigmoid(tape.slice_cols(pre, 3 * b, b));
  const Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
  const Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

std::vector<Var> run_sequence(Tape& tape, const RecurrentVars& p, const std::vector<Var>& steps,
                              const std::vector<std::size_t>& lengths) {
  if (steps.empty()) return {};
  const std::size_t batch = tape.value(steps[0]).rows();
  if (lengths.size() != batch)
    throw ShapeError("run_sequence: " + std::to_string(lengths.size()) + " lengths for batch of " +
                     std::to_string(batch));
  const std::size_t b = p.hidden;
  Var h = tape.constant(Tensor({batch, b}));
  Var c = h;
  std::vector<Var> outputs;
  outputs.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (tape.value(steps[t]).rows() != batch) throw ShapeError("run_sequence: batch size changes across steps");
    Tensor mask({batch, b});
    bool all_valid = true;
    for (std::size_t r = 0; r < batch; ++r) {
      const double m = t < lengths[r] ? 1.0 : 0.0;
      all_valid = all_valid && m == 1.0;
      for (std::size_t j = 0; j < b; ++j) mask[r * b + j] = m;
    }
    Var h_new, c_new;
    if (p.kind == CellKind::Gru) {
      h_new = gru_cell(tape, p, h, steps[t]);
    } else {
      const auto s = lstm_cell(tape, p, h, c, steps[t]);
      h_new = s.h;
      c_new = s.c;
    }
    if (all_valid) {
      outputs.push_back(h_new);
      h = h_new;
      c = c_new;
      continue;
    }
    Tensor keep = mask;
    for (auto& v : keep.storage()) v = 1.0 - v;
    const Var m = tape.constant(std::move(mask));
    const Var k = tape.constant(std::move(keep));
    const Var out = tape.mul(m, h_new);
    outputs.push_back(out);
    h = tape.add(out, tape.mul(k, h));
    if (p.kind == CellKind::Lstm) c = tape.add(tape.mul(m, c_new), tape.mul(k, c));
  }
  return outputs;
}

}  // namespace catnet
