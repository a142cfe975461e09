#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqmatch/tensor.hpp"

namespace seqmatch {

/// Handle to a node inside one Graph. Only valid for the graph that issued it.
struct Var {
    int id = -1;
};

/// Registry of named trainable tensors with accumulated gradients.
/// Registration order is fixed, which keeps initialization, checkpointing and
/// optimizer sweeps deterministic.
class ParameterStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        bool trainable = true;
    };

    int add(const std::string& name, Tensor init, bool trainable = true);
    int find(const std::string& name) const;  // -1 if absent
    int require(const std::string& name) const;

    Entry& at(int index) { return entries_[static_cast<std::size_t>(index)]; }
    const Entry& at(int index) const { return entries_[static_cast<std::size_t>(index)]; }
    int size() const { return static_cast<int>(entries_.size()); }

    void zero_grads();
    std::size_t trainable_count() const;
    /// FNV-1a over all parameter bytes in registration order.
    std::uint64_t checksum() const;
    /// Checksum restricted to parameters whose name starts with `prefix`.
    std::uint64_t checksum_prefix(const std::string& prefix) const;

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

enum class EwKind { add, sub, mul };
enum class ActKind { relu, tanh, sigmoid };
enum class ReduceKind { max, mean };

/// Define-by-run tape. A graph records forward operations and replays them in
/// reverse for gradients; it is rebuilt per batch and must not be shared
/// across concurrent executions.
class Graph {
  public:
    explicit Graph(ParameterStore* params = nullptr) : params_(params) {}

    Var input(Tensor value);
    Var param(int store_index);

    Var matmul(Var a, Var b);
    Var transpose(Var x);
    Var elementwise(EwKind kind, Var a, Var b);
    Var add(Var a, Var b) { return elementwise(EwKind::add, a, b); }
    Var sub(Var a, Var b) { return elementwise(EwKind::sub, a, b); }
    Var mul(Var a, Var b) { return elementwise(EwKind::mul, a, b); }
    Var activation(ActKind kind, Var x);
    Var relu(Var x) { return activation(ActKind::relu, x); }
    Var tanh(Var x) { return activation(ActKind::tanh, x); }
    Var sigmoid(Var x) { return activation(ActKind::sigmoid, x); }
    Var abs(Var x);
    /// ln(max(x, eps)); gradient is zero where the clamp is active.
    Var log(Var x, Real eps = Real(1e-12));
    Var scalar_mul(Var x, Real c);
    Var sum(Var x);  // -> scalar {1}
    Var average(const std::vector<Var>& xs);
    Var concat(const std::vector<Var>& parts, int axis);
    Var slice(Var x, int axis, int start, int len);
    Var reshape(Var x, std::vector<int> new_shape);
    /// Row gather: out[t, :] = table[ids[t], :]. Gradient scatters back.
    Var rows(Var table, const std::vector<int>& ids);
    Var masked_softmax(Var logits, const Mask& mask, int axis);
    Var masked_reduce(ReduceKind kind, Var x, const Mask& mask);  // [T×d] -> {d}
    Var masked_max(Var x, const Mask& m) { return masked_reduce(ReduceKind::max, x, m); }
    Var masked_mean(Var x, const Mask& m) { return masked_reduce(ReduceKind::mean, x, m); }
    /// Inverted dropout: keeps with prob 1-rate, scales kept values by 1/(1-rate).
    Var dropout(Var x, Real rate, std::mt19937_64& rng);

    void backward(Var loss);

    const Tensor& value(Var v) const { return node(v.id).value; }
    const Tensor& grad(Var v) const { return node(v.id).grad; }
    int size() const { return static_cast<int>(nodes_.size()); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<int> parents;
        std::function<void(Graph&, int)> backprop;  // nullptr for leaves
        int param_index = -1;
    };

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Var emplace(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> backprop);
    const Tensor& val(int id) const { return node(id).value; }

    // deque: growing the graph must not invalidate value() references
    std::deque<Node> nodes_;
    std::unordered_map<int, int> param_nodes_;
    ParameterStore* params_;
};

struct GradCheckReport {
    bool pass = true;
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_coord = -1;
    std::size_t coords_checked = 0;
};

/// Compares backward() against central finite differences, coordinate by
/// coordinate over every trainable parameter. `build_loss` must be a
/// deterministic function of the store's current values and return a scalar.
GradCheckReport grad_check(const std::function<Var(Graph&)>& build_loss, ParameterStore& params,
                           double h, double tol);

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a_str(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace seqmatch
