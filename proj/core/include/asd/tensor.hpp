#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

#include "asd/errors.hpp"
#include "asd/rng.hpp"

namespace asd {

// Dense row-major tensor of 64-bit floats, rank <= 4.
// Tensors placed on a ComputationTape are treated as write-once; sharing
// them read-only across threads is safe.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(numel_from_shape(), 0.0);
    }

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != numel_from_shape())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    static Tensor identity(int n) {
        Tensor t({n, n});
        for (int i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    // i.i.d. normal entries scaled by `stddev`.
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = rng.normal() * stddev;
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    int rows() const { return shape_[0]; }
    int cols() const { return shape_[1]; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& operator()(int i, int j) {
        assert(rank() == 2);
        return data_[static_cast<size_t>(i) * shape_[1] + j];
    }
    double operator()(int i, int j) const {
        assert(rank() == 2);
        return data_[static_cast<size_t>(i) * shape_[1] + j];
    }
    double& operator()(int i, int j, int k) {
        assert(rank() == 3);
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(int i, int j, int k) const {
        assert(rank() == 3);
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const;
    double max_abs() const;
    double l2_norm() const;

    std::string shape_str() const;

    bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

private:
    size_t numel_from_shape() const {
        size_t n = 1;
        for (int e : shape_) n *= static_cast<size_t>(e);
        return shape_.empty() ? 0 : n;
    }

    void validate_shape() const {
        if (shape_.size() > 4) throw ShapeError("tensor rank > 4: " + shape_str());
        for (int e : shape_)
            if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str());
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

// Plain (non-tape) matrix helpers shared by inference paths and oracles.
Tensor matmul_plain(const Tensor& a, const Tensor& b);
Tensor transpose_plain(const Tensor& a);
void softmax_rows_inplace(Tensor& m);
double dot(const Tensor& a, const Tensor& b);
double cosine_similarity(const Tensor& a, const Tensor& b);
// Row-stochastic attention: softmax(q k^T / sqrt(d)) v. Returns {out, weights}.
struct PlainAttention {
    Tensor out;
    Tensor weights;
};
PlainAttention attention_plain(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace asd
