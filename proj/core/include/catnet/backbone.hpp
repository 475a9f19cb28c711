// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "catnet/rng.hpp"
#include "catnet/tape.hpp"

namespace catnet {

enum class CellKind : std::uint8_t { Gru, Lstm };

std::string_view cell_key(CellKind k) noexcept;
std::optional<CellKind> parse_cell(std::string_view key) noexcept;

/// Single-layer recurrent cell weights.
///   GRU:  w_x (in x 3b) and bias (1 x 3b) in [update | reset | candidate] order,
///         w_h (b x 2b) for update/reset, w_hc (b x b) for the candidate.
///   LSTM: w_x (in x 4b), w_h (b x 4b), bias (1 x 4b) in [input | forget | cell | output] order.
struct RecurrentParams {
  CellKind kind = CellKind::Gru;
  Parameter w_x;
  Parameter w_h;
  Parameter w_hc;  // GRU only
  Parameter bias;

  std::size_t input_width() const { return w_x.value.rows(); }
  std::size_t hidden() const { return w_h.value.rows(); }
};

RecurrentParams make_recurrent(CellKind kind, std::size_t input_width, std::size_t hidden, Rng& rng);

struct RecurrentVars {
  CellKind kind = CellKind::Gru;
  std::size_t hidden = 0;
  Var w_x, w_h, w_hc, bias;
};

RecurrentVars bind(Tape& tape, RecurrentParams& params);

/// z = s(x Wz + h Uz + bz), r = s(x Wr + h Ur + br), c = tanh(x Wc + (r*h) Uc + bc),
/// h' = (1 - z) * h + z * c. Rows of x and h_prev are independent sequences.
Var gru_cell(Tape& tape, const RecurrentVars& p, Var h_prev, Var x);

struct LstmState {
  Var h, c;
};

/// i, f, o = s(.), g = tanh(.); c' = f * c + i * g; h' = o * tanh(c').
LstmState lstm_cell(Tape& tape, const RecurrentVars& p, Var h_prev, Var c_prev, Var x);

/// Runs the cell over steps[t] (batch x input) with zero initial state. Row b is
/// valid at step t iff t < lengths[b]; invalid rows keep their previous state and
/// emit zeros. Returns one batch x hidden output per step.
std::vector<Var> run_sequence(Tape& tape, const RecurrentVars& p, const std::vector<Var>& steps,
                              const std::vector<std::size_t>& lengths);

}  // namespace catnet
