// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "catnet/rng.hpp"
#include "catnet/tape.hpp"
#include "catnet/temporal_embedding.hpp"

namespace catnet {

/// Demographic encoder, prediction layer and the global decay-time kernel.
struct HeadParams {
  TimeKernel global_kernel;  // hidden = out = backbone width
  Parameter demo_w;          // s x g
  Parameter demo_b;          // 1 x s
  Parameter out_w;           // rho x (b + s)
  Parameter out_b;           // 1 x rho
};

HeadParams make_head(std::size_t hidden, std::size_t demo_in, std::size_t demo_out, std::size_t outputs, Rng& rng);

struct HeadVars {
  TimeKernelVars global_kernel;
  Var demo_w, demo_b, out_w, out_b;
};

HeadVars bind(Tape& tape, HeadParams& head);

struct VisitAttention {
  Var contexts;  // T x b, row t = sum_s alpha[t][s] h_s
  Var weights;   // T x T
};

/// Scaled dot-product self-attention across the visits of one patient.
VisitAttention visit_self_attention(Tape& tape, Var hidden);

struct GlobalGate {
  Var gated;  // beta * h
  Var gates;  // beta = sigmoid(global_time_embed(delta_global))
};

/// Elementwise gate on each visit's hidden state from its elapsed time since
/// the first visit. delta_global must start at 0 and be non-decreasing.
GlobalGate global_time_gate(Tape& tape, const TimeKernelVars& kernel, Var hidden,
                            std::span<const double> delta_global_days, double time_scale);

/// h' = sum_t (contexts_t + gated_t); e_S = W_S S + b_S; y' = sigmoid(W_u [h', e_S] + b_u).
/// An invalid `gated` is treated as zero.
Var fuse_and_predict(Tape& tape, Var contexts, Var gated, std::span<const double> demographics,
                     const HeadVars& head);

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy over every entry, with probabilities clamped to
/// [1e-7, 1 - 1e-7]. targets must be 0/1 and match the shape of probs.
Var bce_loss(Tape& tape, Var probs, const Tensor& targets);

}  // namespace catnet
