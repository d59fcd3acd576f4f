#include "asd/tensor.hpp"

#include <cmath>

namespace asd {

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double Tensor::l2_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a(i, p) * b(p, j);
            c(i, j) = s;
        }
    return c;
}

Tensor transpose_plain(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose expects rank-2, got " + a.shape_str());
    Tensor t({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void softmax_rows_inplace(Tensor& m) {
    for (int i = 0; i < m.rows(); ++i) {
        double mx = m(i, 0);
        for (int j = 1; j < m.cols(); ++j) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (int j = 0; j < m.cols(); ++j) {
            m(i, j) = std::exp(m(i, j) - mx);
            sum += m(i, j);
        }
        for (int j = 0; j < m.cols(); ++j) m(i, j) /= sum;
    }
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) throw ShapeError("dot length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    double na = a.l2_norm(), nb = b.l2_norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

PlainAttention attention_plain(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (k.rows() == 0) throw ShapeError("attention over empty reference");
    if (q.cols() != k.cols())
        throw ShapeError("attention feature dims differ: " + q.shape_str() + " vs " + k.shape_str());
    if (k.rows() != v.rows())
        throw ShapeError("attention key/value row counts differ: " + k.shape_str() + " vs " +
                         v.shape_str());
    Tensor logits = matmul_plain(q, transpose_plain(k));
    const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    for (auto& x : logits.data()) x *= inv;
    softmax_rows_inplace(logits);
    return {matmul_plain(logits, v), logits};
}

}  // namespace asd
