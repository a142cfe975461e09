#include "seqmatch/layers.hpp"

#include <cmath>

namespace seqmatch {

Tensor uniform_init(std::vector<int> shape, int fan, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<Real>(u(rng));
    return t;
}

LstmCell LstmCell::create(ParameterStore& params, const std::string& prefix, int input_size,
                          int hidden_size, std::mt19937_64& rng) {
    LstmCell cell;
    cell.hidden = hidden_size;
    cell.w = params.add(prefix + ".W", uniform_init({input_size, 4 * hidden_size}, hidden_size, rng));
    cell.u = params.add(prefix + ".U", uniform_init({hidden_size, 4 * hidden_size}, hidden_size, rng));
    Tensor bias({4 * hidden_size});
    for (int i = hidden_size; i < 2 * hidden_size; ++i) bias.data[static_cast<std::size_t>(i)] = Real(1);
    cell.b = params.add(prefix + ".b", std::move(bias));
    return cell;
}

BiLstm BiLstm::create(ParameterStore& params, const std::string& prefix, int input_size,
                      int hidden_size, std::mt19937_64& rng) {
    BiLstm enc;
    enc.fwd = LstmCell::create(params, prefix + ".fwd", input_size, hidden_size, rng);
    enc.bwd = LstmCell::create(params, prefix + ".bwd", input_size, hidden_size, rng);
    return enc;
}

Var lstm_run(Graph& g, const LstmCell& cell, Var x, const Mask& mask, bool reversed) {
    const Tensor& xt = g.value(x);
    if (xt.ndim() != 2) throw DimensionError("lstm_run: input must be [T x d]");
    const int total = xt.rows();
    if (mask.size() != total) throw DimensionError("lstm_run: mask length does not match T");
    const int length = mask.prefix_length();
    const int h_size = cell.hidden;

    Var w = g.param(cell.w);
    Var u = g.param(cell.u);
    Var b = g.param(cell.b);

    Var h = g.input(Tensor({1, h_size}));
    Var c = g.input(Tensor({1, h_size}));
    std::vector<Var> states(static_cast<std::size_t>(total));

    for (int step = 0; step < length; ++step) {
        const int t = reversed ? length - 1 - step : step;
        Var x_t = g.slice(x, 0, t, 1);
        Var gates = g.add(g.add(g.matmul(x_t, w), g.matmul(h, u)), b);
        Var i_gate = g.sigmoid(g.slice(gates, 1, 0, h_size));
        Var f_gate = g.sigmoid(g.slice(gates, 1, h_size, h_size));
        Var cand = g.tanh(g.slice(gates, 1, 2 * h_size, h_size));
        Var o_gate = g.sigmoid(g.slice(gates, 1, 3 * h_size, h_size));
        c = g.add(g.mul(f_gate, c), g.mul(i_gate, cand));
        h = g.mul(o_gate, g.tanh(c));
        states[static_cast<std::size_t>(t)] = h;
    }
    for (int t = length; t < total; ++t) {
        states[static_cast<std::size_t>(t)] = g.input(Tensor({1, h_size}));
    }
    return g.concat(states, 0);
}

Var bilstm_encode(Graph& g, const BiLstm& enc, Var x, const Mask& mask) {
    Var fwd = lstm_run(g, enc.fwd, x, mask, false);
    Var bwd = lstm_run(g, enc.bwd, x, mask, true);
    return g.concat({fwd, bwd}, 1);
}

FeedForward FeedForward::create(ParameterStore& params, const std::string& prefix, int input_size,
                                int output_size, int fan, std::mt19937_64& rng) {
    FeedForward ff;
    ff.w = params.add(prefix + ".W", uniform_init({input_size, output_size}, fan, rng));
    ff.b = params.add(prefix + ".b", Tensor({output_size}));
    return ff;
}

Var affine(Graph& g, const FeedForward& ff, Var x) {
    return g.add(g.matmul(x, g.param(ff.w)), g.param(ff.b));
}

Var affine_relu(Graph& g, const FeedForward& ff, Var x) {
    return g.relu(affine(g, ff, x));
}

}  // namespace seqmatch
