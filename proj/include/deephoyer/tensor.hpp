#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "deephoyer/errors.hpp"

namespace deephoyer {

// Dense n-dimensional array of doubles, row-major. All training state
// (weights, activations, gradients) is carried in this one type.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(product(shape_), fill) {}

    Tensor(std::vector<size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != product(shape_)) {
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t dim(size_t i) const { return shape_[i]; }
    size_t rank() const { return shape_.size(); }
    size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    double& at3(size_t c, size_t y, size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(size_t c, size_t y, size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    double& at4(size_t n, size_t c, size_t y, size_t x) {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(size_t n, size_t c, size_t y, size_t x) const {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    // Same data, new shape; element count must match.
    Tensor reshaped(std::vector<size_t> new_shape) const {
        if (product(new_shape) != data_.size()) {
            throw DimensionError("reshape from " + shape_string(shape_) + " to " +
                                 shape_string(new_shape) + " changes element count");
        }
        return Tensor(std::move(new_shape), data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    static size_t product(const std::vector<size_t>& s) {
        size_t p = 1;
        for (size_t d : s) p *= d;
        return p;
    }

    static std::string shape_string(const std::vector<size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape_); }

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
};

inline Tensor tensor1(std::initializer_list<double> v) {
    return Tensor({v.size()}, std::vector<double>(v));
}

}  // namespace deephoyer
