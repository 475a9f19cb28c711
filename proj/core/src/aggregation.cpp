// SPDX-License-Identifier: Apache-2.0
#include "catnet/aggregation.hpp"

#include <cmath>

#include "catnet/error.hpp"

namespace catnet {

namespace {
Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-bound, bound);
  return t;
}
}  // namespace

HeadParams make_head(std::size_t hidden, std::size_t demo_in, std::size_t demo_out, std::size_t outputs, Rng& rng) {
  HeadParams h;
  h.global_kernel = make_time_kernel("time_global", hidden, hidden, rng);
  const double demo_bound = 1.0 / std::sqrt(static_cast<double>(demo_in));
  h.demo_w = Parameter("demo.w", uniform_tensor({demo_out, demo_in}, demo_bound, rng));
  h.demo_b = Parameter("demo.b", uniform_tensor({1, demo_out}, demo_bound, rng));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(hidden + demo_out));
  h.out_w = Parameter("out.w", uniform_tensor({outputs, hidden + demo_out}, out_bound, rng));
  h.out_b = Parameter("out.b", Tensor({1, outputs}));
  return h;
}

HeadVars bind(Tape& tape, HeadParams& head) {
  return {bind(tape, head.global_kernel), tape.param(head.demo_w), tape.param(head.demo_b), tape.param(head.out_w),
          tape.param(head.out_b)};
}

VisitAttention visit_self_attention(Tape& tape, Var hidden) {
  const double b = static_cast<double>(tape.value(hidden).cols());
  const Var logits = tape.scale(tape.matmul_transposed(hidden, hidden), 1.0 / std::sqrt(b));
  const Var weights = tape.softmax_rows(logits);
  return {tape.matmul(weights, hidden), weights};
}

GlobalGate global_time_gate(Tape& tape, const TimeKernelVars& kernel, Var hidden,
                            std::span<const double> delta_global_days, double time_scale) {
  const auto& h = tape.value(hidden);
  if (delta_global_days.size() != h.rows())
    throw ShapeError("global_time_gate: " + std::to_string(delta_global_days.size()) + " times for " +
                     std::to_string(h.rows()) + " visits");
  if (delta_global_days.empty() || delta_global_days[0] != 0.0)
    throw DataError("global_time_gate: first elapsed time must be 0");
  for (std::size_t i = 1; i < delta_global_days.size(); ++i)
    if (delta_global_days[i] < delta_global_days[i - 1])
      throw DataError("global_time_gate: elapsed times must be non-decreasing");
  const Var gates = tape.sigmoid(time_embed(tape, kernel, delta_global_days, time_scale));
  if (tape.value(gates).cols() != h.cols())
    throw ShapeError("global_time_gate: gate width " + std::to_string(tape.value(gates).cols()) +
                     " does not match hidden width " + std::to_string(h.cols()));
  return {tape.mul(gates, hidden), gates};
}

Var fuse_and_predict(Tape& tape, Var contexts, Var gated, std::span<const double> demographics,
                     const HeadVars& head) {
  const Var combined = gated.valid() ? tape.add(contexts, gated) : contexts;
  const Var pooled = tape.sum(combined, 0);
  const Var s = tape.constant(Tensor::row({demographics.begin(), demographics.end()}));
  const Var demo = tape.add(tape.matmul_transposed(s, head.demo_w), head.demo_b);
  const Var features = tape.concat_cols({pooled, demo});
  return tape.sigmoid(tape.add(tape.matmul_transposed(features, head.out_w), head.out_b));
}

Var bce_loss(Tape& tape, Var probs, const Tensor& targets) {
  const auto& p = tape.value(probs);
  if (p.rows() != targets.rows() || p.cols() != targets.cols())
    throw ShapeError("bce_loss: predictions " + to_string(p.shape()) + " vs targets " + to_string(targets.shape()));
  Tensor neg(Shape{targets.rows(), targets.cols()});
  Tensor pos(Shape{targets.rows(), targets.cols()});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) throw DataError("bce_loss: targets must be 0 or 1");
    pos[i] = y;
    neg[i] = 1.0 - y;
  }
  const Var clamped = tape.clamp(probs, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const Var log_p = tape.log(clamped);
  const Var log_q = tape.log(tape.affine(clamped, -1.0, 1.0));
  const Var ll = tape.add(tape.mul(tape.constant(std::move(pos)), log_p), tape.mul(tape.constant(std::move(neg)), log_q));
  return tape.scale(tape.mean_all(ll), -1.0);
}

}  // namespace catnet
