#include "seqmatch/tensor.hpp"

#include <cmath>
#include <sstream>

namespace seqmatch {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor dimension must be positive, got " + shape_str(shape));
    }
    data.assign(shape_numel(shape), Real(0));
}

Tensor::Tensor(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
    for (int dim : shape) {
        if (dim <= 0) throw DimensionError("tensor dimension must be positive, got " + shape_str(shape));
    }
    if (data.size() != shape_numel(shape)) {
        throw DimensionError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(std::vector<int> s, Real v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
}

Tensor Tensor::row_vector(std::vector<Real> d) {
    int n = static_cast<int>(d.size());
    return Tensor({1, n}, std::move(d));
}

bool Tensor::all_finite() const {
    for (Real v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Mask::Mask(std::vector<Real> v) : values(std::move(v)) {
    bool any_real = false;
    for (Real x : values) {
        if (x != Real(0) && x != Real(1)) {
            throw PreconditionError("mask values must be 0 or 1");
        }
        any_real = any_real || x == Real(1);
    }
    if (values.empty() || !any_real) {
        throw PreconditionError("mask must cover at least one real position");
    }
}

int Mask::real_count() const {
    int n = 0;
    for (Real v : values) n += v != Real(0) ? 1 : 0;
    return n;
}

int Mask::prefix_length() const {
    int n = 0;
    while (n < size() && real(n)) ++n;
    for (int i = n; i < size(); ++i) {
        if (real(i)) throw PreconditionError("mask has a real position after padding");
    }
    return n;
}

}  // namespace seqmatch
