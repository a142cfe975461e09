#include "seqmatch/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace seqmatch {

std::uint64_t fnv1a(const void* bytes, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a_str(const std::string& s, std::uint64_t seed) {
    return fnv1a(s.data(), s.size(), seed);
}

int ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
    if (index_.count(name)) throw PreconditionError("parameter already registered: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor::zeros(init.shape);
    e.value = std::move(init);
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    int idx = static_cast<int>(entries_.size()) - 1;
    index_[name] = idx;
    return idx;
}

int ParameterStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int ParameterStore::require(const std::string& name) const {
    int idx = find(name);
    if (idx < 0) throw PreconditionError("unknown parameter: " + name);
    return idx;
}

void ParameterStore::zero_grads() {
    for (auto& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), Real(0));
}

std::size_t ParameterStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.trainable) n += e.value.numel();
    }
    return n;
}

std::uint64_t ParameterStore::checksum() const {
    return checksum_prefix("");
}

std::uint64_t ParameterStore::checksum_prefix(const std::string& prefix) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& e : entries_) {
        if (e.name.rfind(prefix, 0) != 0) continue;
        h = fnv1a_str(e.name, h);
        h = fnv1a(e.value.data.data(), e.value.data.size() * sizeof(Real), h);
    }
    return h;
}

Var Graph::emplace(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> backprop) {
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Tensor value) {
    return emplace(std::move(value), {}, nullptr);
}

Var Graph::param(int store_index) {
    if (!params_) throw PreconditionError("graph has no parameter store");
    auto it = param_nodes_.find(store_index);
    if (it != param_nodes_.end()) return Var{it->second};
    Var v = emplace(params_->at(store_index).value, {}, nullptr);
    node(v.id).param_index = store_index;
    param_nodes_[store_index] = v.id;
    return v;
}

Var Graph::matmul(Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    if (ta.ndim() != 2 || tb.ndim() != 2 || ta.cols() != tb.rows()) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(ta.shape) + " and " +
                             shape_str(tb.shape));
    }
    const int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const Real aik = ta.at(i, kk);
            if (aik == Real(0)) continue;
            for (int j = 0; j < n; ++j) out.at(i, j) += aik * tb.at(kk, j);
        }
    }
    return emplace(std::move(out), {a.id, b.id}, [m, k, n](Graph& g, int self) {
        Node& s = g.node(self);
        Node& na = g.node(s.parents[0]);
        Node& nb = g.node(s.parents[1]);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                const Real gij = s.grad.at(i, j);
                if (gij == Real(0)) continue;
                for (int kk = 0; kk < k; ++kk) {
                    na.grad.at(i, kk) += gij * nb.value.at(kk, j);
                    nb.grad.at(kk, j) += na.value.at(i, kk) * gij;
                }
            }
        }
    });
}

Var Graph::transpose(Var x) {
    const Tensor& t = val(x.id);
    if (t.ndim() != 2) throw DimensionError("transpose: expected 2-d tensor, got " + shape_str(t.shape));
    const int m = t.rows(), n = t.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(j, i) = t.at(i, j);
    }
    return emplace(std::move(out), {x.id}, [m, n](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) p.grad.at(i, j) += s.grad.at(j, i);
        }
    });
}

// b may be a bias row ({n} or {1,n}) broadcast over the rows of a.
Var Graph::elementwise(EwKind kind, Var a, Var b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    const bool same = ta.same_shape(tb);
    const bool bias_row = !same && ta.ndim() == 2 &&
                          ((tb.ndim() == 1 && tb.dim(0) == ta.cols()) ||
                           (tb.ndim() == 2 && tb.rows() == 1 && tb.cols() == ta.cols()));
    if (!same && !bias_row) {
        throw DimensionError("elementwise: incompatible shapes " + shape_str(ta.shape) + " and " +
                             shape_str(tb.shape));
    }
    const std::size_t n = ta.numel();
    const std::size_t bn = tb.numel();
    Tensor out(ta.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const Real x = ta.data[i];
        const Real y = tb.data[i % bn];
        out.data[i] = kind == EwKind::add ? x + y : kind == EwKind::sub ? x - y : x * y;
    }
    return emplace(std::move(out), {a.id, b.id}, [kind, n, bn](Graph& g, int self) {
        Node& s = g.node(self);
        Node& na = g.node(s.parents[0]);
        Node& nb = g.node(s.parents[1]);
        for (std::size_t i = 0; i < n; ++i) {
            const Real gi = s.grad.data[i];
            switch (kind) {
                case EwKind::add:
                    na.grad.data[i] += gi;
                    nb.grad.data[i % bn] += gi;
                    break;
                case EwKind::sub:
                    na.grad.data[i] += gi;
                    nb.grad.data[i % bn] -= gi;
                    break;
                case EwKind::mul:
                    na.grad.data[i] += gi * nb.value.data[i % bn];
                    nb.grad.data[i % bn] += gi * na.value.data[i];
                    break;
            }
        }
    });
}

Var Graph::activation(ActKind kind, Var x) {
    const Tensor& t = val(x.id);
    Tensor out(t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const Real v = t.data[i];
        out.data[i] = kind == ActKind::relu    ? (v > Real(0) ? v : Real(0))
                      : kind == ActKind::tanh  ? std::tanh(v)
                                               : Real(1) / (Real(1) + std::exp(-v));
    }
    return emplace(std::move(out), {x.id}, [kind](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < s.value.numel(); ++i) {
            const Real y = s.value.data[i];
            Real d;
            switch (kind) {
                case ActKind::relu: d = p.value.data[i] > Real(0) ? Real(1) : Real(0); break;
                case ActKind::tanh: d = Real(1) - y * y; break;
                default: d = y * (Real(1) - y); break;
            }
            p.grad.data[i] += s.grad.data[i] * d;
        }
    });
}

Var Graph::abs(Var x) {
    const Tensor& t = val(x.id);
    Tensor out(t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) out.data[i] = std::fabs(t.data[i]);
    return emplace(std::move(out), {x.id}, [](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < s.value.numel(); ++i) {
            const Real v = p.value.data[i];
            const Real sign = v > Real(0) ? Real(1) : v < Real(0) ? Real(-1) : Real(0);
            p.grad.data[i] += s.grad.data[i] * sign;
        }
    });
}

Var Graph::log(Var x, Real eps) {
    const Tensor& t = val(x.id);
    Tensor out(t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) out.data[i] = std::log(std::max(t.data[i], eps));
    return emplace(std::move(out), {x.id}, [eps](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < s.value.numel(); ++i) {
            const Real v = p.value.data[i];
            if (v > eps) p.grad.data[i] += s.grad.data[i] / v;
        }
    });
}

Var Graph::scalar_mul(Var x, Real c) {
    const Tensor& t = val(x.id);
    Tensor out(t.shape);
    for (std::size_t i = 0; i < t.numel(); ++i) out.data[i] = t.data[i] * c;
    return emplace(std::move(out), {x.id}, [c](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < s.value.numel(); ++i) p.grad.data[i] += s.grad.data[i] * c;
    });
}

Var Graph::sum(Var x) {
    const Tensor& t = val(x.id);
    Real total = 0;
    for (Real v : t.data) total += v;
    return emplace(Tensor::scalar(total), {x.id}, [](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        const Real gi = s.grad.data[0];
        for (std::size_t i = 0; i < p.value.numel(); ++i) p.grad.data[i] += gi;
    });
}

Var Graph::average(const std::vector<Var>& xs) {
    if (xs.empty()) throw PreconditionError("average: no inputs");
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return scalar_mul(acc, Real(1) / static_cast<Real>(xs.size()));
}

Var Graph::concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw PreconditionError("concat: no parts");
    if (parts.size() == 1) return parts[0];
    const Tensor& first = val(parts[0].id);
    const int nd = first.ndim();
    if (axis < 0 || axis >= nd) throw DimensionError("concat: bad axis");

    std::vector<int> out_shape = first.shape;
    std::vector<int> part_sizes;
    for (const Var& p : parts) {
        const Tensor& t = val(p.id);
        if (t.ndim() != nd) throw DimensionError("concat: rank mismatch");
        for (int d = 0; d < nd; ++d) {
            if (d != axis && t.shape[static_cast<std::size_t>(d)] != first.shape[static_cast<std::size_t>(d)]) {
                throw DimensionError("concat: off-axis dims differ: " + shape_str(first.shape) +
                                     " vs " + shape_str(t.shape));
            }
        }
        part_sizes.push_back(t.shape[static_cast<std::size_t>(axis)]);
    }
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (int s : part_sizes) out_shape[static_cast<std::size_t>(axis)] += s;

    Tensor out(out_shape);
    std::vector<int> ids;
    for (const Var& p : parts) ids.push_back(p.id);

    if (nd == 1 || axis == 0) {
        // contiguous blocks
        std::size_t off = 0;
        for (const Var& p : parts) {
            const Tensor& t = val(p.id);
            std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
            off += t.numel();
        }
        return emplace(std::move(out), std::move(ids), [](Graph& g, int self) {
            Node& s = g.node(self);
            std::size_t off = 0;
            for (int pid : s.parents) {
                Node& p = g.node(pid);
                for (std::size_t i = 0; i < p.value.numel(); ++i) p.grad.data[i] += s.grad.data[off + i];
                off += p.value.numel();
            }
        });
    }
    // 2-d, axis == 1
    const int rows = first.rows();
    int col0 = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& t = val(parts[pi].id);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < t.cols(); ++j) out.at(i, col0 + j) = t.at(i, j);
        }
        col0 += t.cols();
    }
    return emplace(std::move(out), std::move(ids), [rows](Graph& g, int self) {
        Node& s = g.node(self);
        int col0 = 0;
        for (int pid : s.parents) {
            Node& p = g.node(pid);
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < p.value.cols(); ++j) p.grad.at(i, j) += s.grad.at(i, col0 + j);
            }
            col0 += p.value.cols();
        }
    });
}

Var Graph::slice(Var x, int axis, int start, int len) {
    const Tensor& t = val(x.id);
    const int nd = t.ndim();
    if (axis < 0 || axis >= nd) throw DimensionError("slice: bad axis");
    const int extent = t.shape[static_cast<std::size_t>(axis)];
    if (start < 0 || len <= 0 || start + len > extent) {
        throw DimensionError("slice: range [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") out of extent " + std::to_string(extent));
    }
    if (nd == 1) {
        Tensor out({len});
        for (int i = 0; i < len; ++i) out.data[static_cast<std::size_t>(i)] = t.data[static_cast<std::size_t>(start + i)];
        return emplace(std::move(out), {x.id}, [start, len](Graph& g, int self) {
            Node& s = g.node(self);
            Node& p = g.node(s.parents[0]);
            for (int i = 0; i < len; ++i) p.grad.data[static_cast<std::size_t>(start + i)] += s.grad.data[static_cast<std::size_t>(i)];
        });
    }
    if (nd != 2) throw DimensionError("slice: expected 1-d or 2-d tensor");
    const int m = t.rows(), n = t.cols();
    if (axis == 0) {
        Tensor out({len, n});
        for (int i = 0; i < len; ++i) {
            for (int j = 0; j < n; ++j) out.at(i, j) = t.at(start + i, j);
        }
        return emplace(std::move(out), {x.id}, [start, len, n](Graph& g, int self) {
            Node& s = g.node(self);
            Node& p = g.node(s.parents[0]);
            for (int i = 0; i < len; ++i) {
                for (int j = 0; j < n; ++j) p.grad.at(start + i, j) += s.grad.at(i, j);
            }
        });
    }
    Tensor out({m, len});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < len; ++j) out.at(i, j) = t.at(i, start + j);
    }
    return emplace(std::move(out), {x.id}, [start, len, m](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < len; ++j) p.grad.at(i, start + j) += s.grad.at(i, j);
        }
    });
}

Var Graph::reshape(Var x, std::vector<int> new_shape) {
    const Tensor& t = val(x.id);
    if (shape_numel(new_shape) != t.numel()) {
        throw DimensionError("reshape: numel mismatch " + shape_str(t.shape) + " -> " + shape_str(new_shape));
    }
    Tensor out(std::move(new_shape), t.data);
    return emplace(std::move(out), {x.id}, [](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < p.value.numel(); ++i) p.grad.data[i] += s.grad.data[i];
    });
}

Var Graph::rows(Var table, const std::vector<int>& ids) {
    const Tensor& t = val(table.id);
    if (t.ndim() != 2) throw DimensionError("rows: table must be 2-d");
    if (ids.empty()) throw PreconditionError("rows: empty id list");
    const int n_rows = t.rows(), d = t.cols();
    for (int id : ids) {
        if (id < 0 || id >= n_rows) {
            throw std::out_of_range("rows: id " + std::to_string(id) + " out of range [0," +
                                    std::to_string(n_rows) + ")");
        }
    }
    Tensor out({static_cast<int>(ids.size()), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = t.at(ids[i], j);
    }
    return emplace(std::move(out), {table.id}, [ids, d](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (int j = 0; j < d; ++j) p.grad.at(ids[i], j) += s.grad.at(static_cast<int>(i), j);
        }
    });
}

namespace {

struct LineLayout {
    int n_lines;
    int line_len;
    std::size_t line_stride;  // distance between line starts
    std::size_t elem_stride;  // distance between elements of one line
};

LineLayout softmax_layout(const Tensor& t, int axis) {
    if (t.ndim() == 1) {
        if (axis != 0) throw DimensionError("masked_softmax: bad axis for 1-d tensor");
        return {1, t.dim(0), 0, 1};
    }
    if (t.ndim() != 2) throw DimensionError("masked_softmax: expected 1-d or 2-d tensor");
    if (axis == 1) return {t.rows(), t.cols(), static_cast<std::size_t>(t.cols()), 1};
    if (axis == 0) return {t.cols(), t.rows(), 1, static_cast<std::size_t>(t.cols())};
    throw DimensionError("masked_softmax: bad axis");
}

}  // namespace

Var Graph::masked_softmax(Var logits, const Mask& mask, int axis) {
    const Tensor& t = val(logits.id);
    const LineLayout lay = softmax_layout(t, axis);
    if (mask.size() != lay.line_len) {
        throw DimensionError("masked_softmax: mask length " + std::to_string(mask.size()) +
                             " does not match axis extent " + std::to_string(lay.line_len));
    }
    Tensor out(t.shape);
    for (int l = 0; l < lay.n_lines; ++l) {
        const std::size_t base = static_cast<std::size_t>(l) * lay.line_stride;
        Real mx = -std::numeric_limits<Real>::infinity();
        for (int i = 0; i < lay.line_len; ++i) {
            if (mask.real(i)) mx = std::max(mx, t.data[base + static_cast<std::size_t>(i) * lay.elem_stride]);
        }
        Real denom = 0;
        for (int i = 0; i < lay.line_len; ++i) {
            const std::size_t pos = base + static_cast<std::size_t>(i) * lay.elem_stride;
            if (mask.real(i)) {
                const Real e = std::exp(t.data[pos] - mx);
                out.data[pos] = e;
                denom += e;
            } else {
                out.data[pos] = 0;
            }
        }
        for (int i = 0; i < lay.line_len; ++i) {
            const std::size_t pos = base + static_cast<std::size_t>(i) * lay.elem_stride;
            if (mask.real(i)) out.data[pos] /= denom;
        }
    }
    return emplace(std::move(out), {logits.id}, [mask, lay](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (int l = 0; l < lay.n_lines; ++l) {
            const std::size_t base = static_cast<std::size_t>(l) * lay.line_stride;
            Real dot = 0;
            for (int i = 0; i < lay.line_len; ++i) {
                const std::size_t pos = base + static_cast<std::size_t>(i) * lay.elem_stride;
                if (mask.real(i)) dot += s.grad.data[pos] * s.value.data[pos];
            }
            for (int i = 0; i < lay.line_len; ++i) {
                const std::size_t pos = base + static_cast<std::size_t>(i) * lay.elem_stride;
                if (mask.real(i)) p.grad.data[pos] += s.value.data[pos] * (s.grad.data[pos] - dot);
            }
        }
    });
}

Var Graph::masked_reduce(ReduceKind kind, Var x, const Mask& mask) {
    const Tensor& t = val(x.id);
    if (t.ndim() != 2) throw DimensionError("masked_reduce: expected 2-d tensor");
    const int rows = t.rows(), cols = t.cols();
    if (mask.size() != rows) {
        throw DimensionError("masked_reduce: mask length " + std::to_string(mask.size()) +
                             " does not match row count " + std::to_string(rows));
    }
    Tensor out({cols});
    if (kind == ReduceKind::max) {
        std::vector<int> argmax(static_cast<std::size_t>(cols), -1);
        for (int j = 0; j < cols; ++j) {
            Real best = 0;
            int best_i = -1;
            for (int i = 0; i < rows; ++i) {
                if (!mask.real(i)) continue;
                if (best_i < 0 || t.at(i, j) > best) {  // ties keep the lowest index
                    best = t.at(i, j);
                    best_i = i;
                }
            }
            out.data[static_cast<std::size_t>(j)] = best;
            argmax[static_cast<std::size_t>(j)] = best_i;
        }
        return emplace(std::move(out), {x.id}, [argmax, cols](Graph& g, int self) {
            Node& s = g.node(self);
            Node& p = g.node(s.parents[0]);
            for (int j = 0; j < cols; ++j) {
                p.grad.at(argmax[static_cast<std::size_t>(j)], j) += s.grad.data[static_cast<std::size_t>(j)];
            }
        });
    }
    const int count = mask.real_count();
    for (int j = 0; j < cols; ++j) {
        Real acc = 0;
        for (int i = 0; i < rows; ++i) {
            if (mask.real(i)) acc += t.at(i, j);
        }
        out.data[static_cast<std::size_t>(j)] = acc / static_cast<Real>(count);
    }
    return emplace(std::move(out), {x.id}, [mask, count, cols](Graph& g, int self) {
        Node& s = g.node(self);
        Node& p = g.node(s.parents[0]);
        for (int j = 0; j < cols; ++j) {
            const Real gj = s.grad.data[static_cast<std::size_t>(j)] / static_cast<Real>(count);
            for (int i = 0; i < mask.size(); ++i) {
                if (mask.real(i)) p.grad.at(i, j) += gj;
            }
        }
    });
}

Var Graph::dropout(Var x, Real rate, std::mt19937_64& rng) {
    if (rate <= Real(0)) return x;
    if (rate >= Real(1)) throw PreconditionError("dropout: rate must be < 1");
    const Tensor& t = val(x.id);
    Tensor keep(t.shape);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Real scale = Real(1) / (Real(1) - rate);
    for (auto& v : keep.data) v = u(rng) < static_cast<double>(rate) ? Real(0) : scale;
    return mul(x, input(std::move(keep)));
}

void Graph::backward(Var loss) {
    if (loss.id < 0 || loss.id >= size()) throw PreconditionError("backward: invalid loss node");
    if (val(loss.id).numel() != 1) {
        throw PreconditionError("backward: loss must be a scalar, got shape " +
                                shape_str(val(loss.id).shape));
    }
    for (auto& n : nodes_) n.grad = Tensor::zeros(n.value.shape);
    node(loss.id).grad.data[0] = Real(1);
    for (int i = size() - 1; i >= 0; --i) {
        Node& n = node(i);
        if (n.backprop) n.backprop(*this, i);
    }
    if (params_) {
        for (const auto& [pidx, nid] : param_nodes_) {
            Tensor& pg = params_->at(pidx).grad;
            const Tensor& ng = node(nid).grad;
            for (std::size_t i = 0; i < pg.numel(); ++i) pg.data[i] += ng.data[i];
        }
    }
}

GradCheckReport grad_check(const std::function<Var(Graph&)>& build_loss, ParameterStore& params,
                           double h, double tol) {
    auto eval = [&]() -> double {
        Graph g(&params);
        Var loss = build_loss(g);
        return static_cast<double>(g.value(loss).data[0]);
    };

    params.zero_grads();
    {
        Graph g(&params);
        Var loss = build_loss(g);
        g.backward(loss);
    }
    std::vector<std::vector<Real>> analytic;
    for (int p = 0; p < params.size(); ++p) analytic.push_back(params.at(p).grad.data);

    GradCheckReport report;
    for (int p = 0; p < params.size(); ++p) {
        auto& entry = params.at(p);
        if (!entry.trainable) continue;
        for (std::size_t i = 0; i < entry.value.numel(); ++i) {
            const Real saved = entry.value.data[i];
            entry.value.data[i] = saved + static_cast<Real>(h);
            const double f_plus = eval();
            entry.value.data[i] = saved - static_cast<Real>(h);
            const double f_minus = eval();
            entry.value.data[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            const double a = static_cast<double>(analytic[static_cast<std::size_t>(p)][i]);
            const double rel = std::fabs(a - numeric) / std::max(1.0, std::fabs(numeric));
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = entry.name;
                report.worst_coord = static_cast<int>(i);
            }
        }
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

}  // namespace seqmatch
