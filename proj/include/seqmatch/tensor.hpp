#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqmatch {

#ifdef SEQMATCH_REAL32
using Real = float;
#else
using Real = double;
#endif

// Shape or contract violations detected while wiring tensors together.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller violated a documented precondition (all-masked row, empty input, ...).
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; line is 1-based.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    std::size_t line;
};

// A persisted artifact does not match the runtime state (checkpoint header,
// stale encoding cache, mismatched ensemble key sets).
struct IncompatibleError : std::runtime_error {
    explicit IncompatibleError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dense row-major tensor. Values are immutable by convention once a tensor
/// has been handed to a Graph; mutation is reserved for parameter updates.
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<Real> d);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, Real v);
    static Tensor scalar(Real v) { return Tensor({1}, {v}); }
    static Tensor row_vector(std::vector<Real> d);

    std::size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    // 2-D accessors; tensors of other ranks use data[] directly.
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    Real& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
    Real at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

std::string shape_str(const std::vector<int>& shape);
std::size_t shape_numel(const std::vector<int>& shape);

/// Validity mask over sequence positions: 1.0 marks a real token, 0.0 padding.
/// Padding is always trailing in this codebase.
struct Mask {
    std::vector<Real> values;

    Mask() = default;
    explicit Mask(std::vector<Real> v);
    static Mask ones(int n) { return Mask(std::vector<Real>(static_cast<std::size_t>(n), Real(1))); }

    int size() const { return static_cast<int>(values.size()); }
    bool real(int i) const { return values[static_cast<std::size_t>(i)] != Real(0); }
    int real_count() const;
    /// Number of leading real positions; throws if a real position follows padding.
    int prefix_length() const;
};

}  // namespace seqmatch
