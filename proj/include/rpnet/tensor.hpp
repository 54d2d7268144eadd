#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rpnet {

// Dense row-major 64-bit tensor. The network only needs scalars, vectors and
// matrices, so the 2D accessors assume rank <= 2.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}
    Tensor(std::vector<size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor vector(size_t n);  // zero-filled
    static Tensor matrix(size_t rows, size_t cols);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t size() const { return data_.size(); }
    size_t rank() const { return shape_.size(); }
    size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }
    double& operator()(size_t i, size_t j) { return data_[i * cols() + j]; }
    double operator()(size_t i, size_t j) const { return data_[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    static size_t count(const std::vector<size_t>& shape);

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

// Throws NumericError if any entry is NaN or Inf.
void ensure_finite(const Tensor& t, const std::string& what);

}  // namespace rpnet
