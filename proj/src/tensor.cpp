#include "rpnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "rpnet/errors.hpp"

namespace rpnet {

size_t Tensor::count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
        throw ArgumentError("tensor data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
    size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::vector(size_t n) { return Tensor({n}); }

Tensor Tensor::matrix(size_t rows, size_t cols) { return Tensor({rows, cols}); }

void ensure_finite(const Tensor& t, const std::string& what) {
    for (double v : t.values())
        if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
}

}  // namespace rpnet
