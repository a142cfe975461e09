#pragma once

#include <random>
#include <string>

#include "seqmatch/graph.hpp"

namespace seqmatch {

/// Uniform init in [-1/sqrt(fan), 1/sqrt(fan)].
Tensor uniform_init(std::vector<int> shape, int fan, std::mt19937_64& rng);

/// Standard LSTM cell with sigmoid input/forget/output gates and tanh
/// candidate. Weights are packed [in x 4H] / [H x 4H] with gate order
/// (input, forget, candidate, output); the forget-gate bias starts at 1.
struct LstmCell {
    int w = -1;  // input weights  [in x 4H]
    int u = -1;  // recurrent weights [H x 4H]
    int b = -1;  // bias [4H]
    int hidden = 0;

    static LstmCell create(ParameterStore& params, const std::string& prefix, int input_size,
                           int hidden_size, std::mt19937_64& rng);
};

struct BiLstm {
    LstmCell fwd;
    LstmCell bwd;

    static BiLstm create(ParameterStore& params, const std::string& prefix, int input_size,
                         int hidden_size, std::mt19937_64& rng);
    int output_width() const { return 2 * fwd.hidden; }
};

/// Runs the cell over rows 0..L-1 of x and returns the stacked hidden states
/// [T x H]. When reversed, recurrence runs L-1..0 (states stay in row order).
/// Rows at and beyond the mask's real length come out as exact zeros, so
/// trailing padding neither perturbs real positions nor leaks signal.
Var lstm_run(Graph& g, const LstmCell& cell, Var x, const Mask& mask, bool reversed);

/// Forward and backward passes concatenated per position: [T x 2H].
Var bilstm_encode(Graph& g, const BiLstm& enc, Var x, const Mask& mask);

/// One affine layer, optionally activated. `fan` sets the init bound 1/sqrt(fan)
/// (the model's hidden size, to match the rest of the network).
struct FeedForward {
    int w = -1;  // [in x out]
    int b = -1;  // [out]

    static FeedForward create(ParameterStore& params, const std::string& prefix, int input_size,
                              int output_size, int fan, std::mt19937_64& rng);
};

Var affine(Graph& g, const FeedForward& ff, Var x);
Var affine_relu(Graph& g, const FeedForward& ff, Var x);

}  // namespace seqmatch
