#include "asd/tape.hpp"

#include <cmath>

namespace asd {

namespace {
constexpr double kBceClip = 1e-7;
}

void ComputationTape::check_handle(Value v) const {
    if (!v.valid() || v.idx >= static_cast<int>(nodes_.size()))
        throw ShapeError("invalid tape handle");
}

const ComputationTape::Node& ComputationTape::node(Value v) const {
    check_handle(v);
    return nodes_[v.idx];
}

Value ComputationTape::push(Node&& n, const char* opname) {
    if (!n.value.all_finite())
        throw NumericError(std::string("non-finite output of op '") + opname + "'");
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

Value ComputationTape::leaf(Tensor t) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(t);
    return push(std::move(n), "leaf");
}

Value ComputationTape::param(const std::string& name, const Tensor& t) {
    auto it = param_index_.find(name);
    if (it != param_index_.end()) return Value{it->second};
    Value v = leaf(t);
    params_.emplace_back(name, v.idx);
    param_index_[name] = v.idx;
    return v;
}

Value ComputationTape::matmul(Value a, Value b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    Node n;
    n.op = Op::Matmul;
    n.in = {a.idx, b.idx};
    n.value = matmul_plain(ta, tb);
    return push(std::move(n), "matmul");
}

Value ComputationTape::transpose(Value a) {
    Node n;
    n.op = Op::Transpose;
    n.in = {a.idx};
    n.value = transpose_plain(node(a).value);
    return push(std::move(n), "transpose");
}

Value ComputationTape::add(Value a, Value b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb))
        throw ShapeError("add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Add;
    n.in = {a.idx, b.idx};
    n.value = ta;
    for (size_t i = 0; i < tb.numel(); ++i) n.value[i] += tb[i];
    return push(std::move(n), "add");
}

Value ComputationTape::multiply(Value a, Value b) {
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (!ta.same_shape(tb))
        throw ShapeError("multiply shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Multiply;
    n.in = {a.idx, b.idx};
    n.value = ta;
    for (size_t i = 0; i < tb.numel(); ++i) n.value[i] *= tb[i];
    return push(std::move(n), "multiply");
}

Value ComputationTape::scale(Value a, double alpha) {
    Node n;
    n.op = Op::Scale;
    n.in = {a.idx};
    n.alpha = alpha;
    n.value = node(a).value;
    for (auto& x : n.value.data()) x *= alpha;
    return push(std::move(n), "scale");
}

Value ComputationTape::bias_add(Value x, Value b) {
    const Tensor& tx = node(x).value;
    const Tensor& tb = node(b).value;
    if (tx.rank() != 2 || tb.rank() != 2 || tb.rows() != 1 || tb.cols() != tx.cols())
        throw ShapeError("bias_add expects [m,n] + [1,n], got " + tx.shape_str() + " + " +
                         tb.shape_str());
    Node n;
    n.op = Op::BiasAdd;
    n.in = {x.idx, b.idx};
    n.value = tx;
    for (int i = 0; i < tx.rows(); ++i)
        for (int j = 0; j < tx.cols(); ++j) n.value(i, j) += tb(0, j);
    return push(std::move(n), "bias_add");
}

Value ComputationTape::concat(const std::vector<Value>& xs, int axis) {
    if (xs.empty()) throw ShapeError("concat of zero tensors");
    if (axis != 0 && axis != 1) throw ShapeError("concat axis must be 0 or 1");
    const Tensor& first = node(xs[0]).value;
    if (first.rank() != 2) throw ShapeError("concat expects rank-2 inputs");
    int rows = first.rows(), cols = first.cols();
    int total = axis == 0 ? rows : cols;
    for (size_t i = 1; i < xs.size(); ++i) {
        const Tensor& t = node(xs[i]).value;
        if (t.rank() != 2) throw ShapeError("concat expects rank-2 inputs");
        if (axis == 0) {
            if (t.cols() != cols) throw ShapeError("concat axis-0 column mismatch");
            total += t.rows();
        } else {
            if (t.rows() != rows) throw ShapeError("concat axis-1 row mismatch");
            total += t.cols();
        }
    }
    Node n;
    n.op = Op::Concat;
    n.axis = axis;
    for (Value v : xs) n.in.push_back(v.idx);
    n.value = Tensor(axis == 0 ? std::vector<int>{total, cols} : std::vector<int>{rows, total});
    int off = 0;
    for (Value v : xs) {
        const Tensor& t = node(v).value;
        if (axis == 0) {
            for (int i = 0; i < t.rows(); ++i)
                for (int j = 0; j < cols; ++j) n.value(off + i, j) = t(i, j);
            off += t.rows();
        } else {
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < t.cols(); ++j) n.value(i, off + j) = t(i, j);
            off += t.cols();
        }
    }
    return push(std::move(n), "concat");
}

Value ComputationTape::mean_axis(Value a, int axis) {
    const Tensor& t = node(a).value;
    if (t.rank() != 2) throw ShapeError("mean_axis expects rank-2, got " + t.shape_str());
    if (axis != 0 && axis != 1) throw ShapeError("mean_axis axis must be 0 or 1");
    Node n;
    n.op = Op::MeanAxis;
    n.axis = axis;
    n.in = {a.idx};
    if (axis == 0) {
        n.value = Tensor({1, t.cols()});
        for (int j = 0; j < t.cols(); ++j) {
            double s = 0.0;
            for (int i = 0; i < t.rows(); ++i) s += t(i, j);
            n.value(0, j) = s / t.rows();
        }
    } else {
        n.value = Tensor({t.rows(), 1});
        for (int i = 0; i < t.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < t.cols(); ++j) s += t(i, j);
            n.value(i, 0) = s / t.cols();
        }
    }
    return push(std::move(n), "mean_axis");
}

Value ComputationTape::layer_norm(Value x, Value gamma, Value beta, double eps) {
    const Tensor& tx = node(x).value;
    const Tensor& tg = node(gamma).value;
    const Tensor& tb = node(beta).value;
    if (tx.rank() != 2) throw ShapeError("layer_norm expects rank-2 input");
    if (tg.rank() != 2 || tg.rows() != 1 || tg.cols() != tx.cols() || !tg.same_shape(tb))
        throw ShapeError("layer_norm gamma/beta must be [1,n]");
    const int m = tx.rows(), c = tx.cols();
    Node n;
    n.op = Op::LayerNorm;
    n.in = {x.idx, gamma.idx, beta.idx};
    n.value = Tensor({m, c});
    n.saved = Tensor({m, c});   // normalized activations
    n.saved2 = Tensor({m, 1});  // 1/sigma per row
    for (int i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += tx(i, j);
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            double d = tx(i, j) - mu;
            var += d * d;
        }
        var /= c;
        double inv = 1.0 / std::sqrt(var + eps);
        n.saved2(i, 0) = inv;
        for (int j = 0; j < c; ++j) {
            double xh = (tx(i, j) - mu) * inv;
            n.saved(i, j) = xh;
            n.value(i, j) = xh * tg(0, j) + tb(0, j);
        }
    }
    return push(std::move(n), "layer_norm");
}

Value ComputationTape::relu(Value a) {
    Node n;
    n.op = Op::Relu;
    n.in = {a.idx};
    n.value = node(a).value;
    for (auto& x : n.value.data()) x = x > 0.0 ? x : 0.0;
    return push(std::move(n), "relu");
}

Value ComputationTape::sigmoid(Value a) {
    Node n;
    n.op = Op::Sigmoid;
    n.in = {a.idx};
    n.value = node(a).value;
    for (auto& x : n.value.data()) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(n), "sigmoid");
}

Value ComputationTape::softmax(Value a, int axis) {
    const Tensor& t = node(a).value;
    if (t.rank() < 1 || t.rank() > 2) throw ShapeError("softmax expects rank 1 or 2");
    if (axis < 0 || axis >= t.rank()) throw ShapeError("softmax axis out of range");
    Node n;
    n.op = Op::Softmax;
    n.axis = axis;
    n.in = {a.idx};
    n.value = t;
    // Normalize lanes along `axis` with max subtraction.
    const bool rows = (t.rank() == 1) || (axis == 1);
    const int lanes = t.rank() == 1 ? 1 : (rows ? t.rows() : t.cols());
    const int width = t.rank() == 1 ? static_cast<int>(t.numel()) : (rows ? t.cols() : t.rows());
    auto at = [&](int lane, int w) -> double& {
        if (t.rank() == 1) return n.value[static_cast<size_t>(w)];
        return rows ? n.value(lane, w) : n.value(w, lane);
    };
    for (int l = 0; l < lanes; ++l) {
        double mx = at(l, 0);
        for (int w = 1; w < width; ++w) mx = std::max(mx, at(l, w));
        double sum = 0.0;
        for (int w = 0; w < width; ++w) {
            at(l, w) = std::exp(at(l, w) - mx);
            sum += at(l, w);
        }
        for (int w = 0; w < width; ++w) at(l, w) /= sum;
    }
    return push(std::move(n), "softmax");
}

Value ComputationTape::conv1d_same3(Value x, Value w, Value b) {
    const Tensor& tx = node(x).value;
    const Tensor& tw = node(w).value;
    const Tensor& tb = node(b).value;
    if (tx.rank() != 2) throw ShapeError("conv1d input must be [T,cin]");
    if (tw.rank() != 3 || tw.extent(0) != 3 || tw.extent(1) != tx.cols())
        throw ShapeError("conv1d weight must be [3,cin,cout], got " + tw.shape_str());
    const int T = tx.rows(), cin = tx.cols(), cout = tw.extent(2);
    if (tb.rank() != 2 || tb.rows() != 1 || tb.cols() != cout)
        throw ShapeError("conv1d bias must be [1,cout]");
    Node n;
    n.op = Op::Conv1dSame3;
    n.in = {x.idx, w.idx, b.idx};
    n.value = Tensor({T, cout});
    for (int t = 0; t < T; ++t)
        for (int o = 0; o < cout; ++o) {
            double s = tb(0, o);
            for (int k = 0; k < 3; ++k) {
                int src = t + k - 1;
                if (src < 0 || src >= T) continue;
                for (int c = 0; c < cin; ++c) s += tx(src, c) * tw(k, c, o);
            }
            n.value(t, o) = s;
        }
    return push(std::move(n), "conv1d_same3");
}

Value ComputationTape::bce_mean(Value p, Value targets) {
    const Tensor& tp = node(p).value;
    const Tensor& ty = node(targets).value;
    if (!tp.same_shape(ty))
        throw ShapeError("bce length mismatch: " + tp.shape_str() + " vs " + ty.shape_str());
    Node n;
    n.op = Op::BceMean;
    n.in = {p.idx, targets.idx};
    n.saved = tp;  // clipped probabilities
    double loss = 0.0;
    for (size_t i = 0; i < tp.numel(); ++i) {
        double ph = std::min(1.0 - kBceClip, std::max(kBceClip, tp[i]));
        n.saved[i] = ph;
        loss -= ty[i] * std::log(ph) + (1.0 - ty[i]) * std::log(1.0 - ph);
    }
    n.value = Tensor::scalar(loss / static_cast<double>(tp.numel()));
    return push(std::move(n), "bce_mean");
}

Value ComputationTape::softmax_cross_entropy(Value logits, const std::vector<int>& labels) {
    const Tensor& tl = node(logits).value;
    if (tl.rank() != 2) throw ShapeError("softmax_cross_entropy expects [m,n] logits");
    if (static_cast<int>(labels.size()) != tl.rows())
        throw ShapeError("softmax_cross_entropy label count mismatch");
    const int m = tl.rows(), c = tl.cols();
    Node n;
    n.op = Op::SoftmaxCe;
    n.in = {logits.idx};
    n.int_data = labels;
    n.saved = tl;  // softmax probabilities
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        if (labels[i] < 0 || labels[i] >= c) throw ShapeError("label out of range");
        double mx = tl(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, tl(i, j));
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            n.saved(i, j) = std::exp(tl(i, j) - mx);
            sum += n.saved(i, j);
        }
        for (int j = 0; j < c; ++j) n.saved(i, j) /= sum;
        loss -= std::log(std::max(n.saved(i, labels[i]), 1e-300));
    }
    n.value = Tensor::scalar(loss / m);
    return push(std::move(n), "softmax_cross_entropy");
}

ComputationTape::Attention ComputationTape::scaled_dot_attention(Value q, Value k, Value v) {
    // capture dims up front: pushing ops below may reallocate nodes_
    const int d = node(q).value.cols();
    const int k_rows = node(k).value.rows();
    const int k_cols = node(k).value.cols();
    const int v_rows = node(v).value.rows();
    if (k_rows < 1) throw ShapeError("attention over empty reference");
    if (d != k_cols)
        throw ShapeError("attention feature dims differ: " + node(q).value.shape_str() + " vs " +
                         node(k).value.shape_str());
    if (k_rows != v_rows) throw ShapeError("attention key/value row counts differ");
    Value logits = matmul(q, transpose(k));
    Value scaled = scale(logits, 1.0 / std::sqrt(static_cast<double>(d)));
    Value weights = softmax(scaled, 1);
    Value out = matmul(weights, v);
    return {out, weights};
}

const Tensor& ComputationTape::grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.empty())
        throw ShapeError("gradient not available; call backward() first");
    return n.grad;
}

Tensor& ComputationTape::grad_buf(int idx) {
    Node& n = nodes_[idx];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void ComputationTape::backward(Value loss) {
    check_handle(loss);
    if (nodes_[loss.idx].value.numel() != 1)
        throw ShapeError("backward requires a scalar loss, got " +
                         nodes_[loss.idx].value.shape_str());
    grad_buf(loss.idx)[0] = 1.0;
    for (int i = loss.idx; i >= 0; --i) {
        if (nodes_[i].grad.empty()) continue;  // not an ancestor of the loss
        backprop_node(i);
    }
    // Materialize zero gradients for registered parameters the loss never reached.
    for (auto& [name, idx] : params_) grad_buf(idx);
    ran_backward_ = true;
}

void ComputationTape::backprop_node(int idx) {
    Node& n = nodes_[idx];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Matmul: {
            const Tensor& a = nodes_[n.in[0]].value;
            const Tensor& b = nodes_[n.in[1]].value;
            Tensor& da = grad_buf(n.in[0]);
            Tensor& db = grad_buf(n.in[1]);
            // dA += dC B^T ; dB += A^T dC
            for (int i = 0; i < a.rows(); ++i)
                for (int p = 0; p < a.cols(); ++p) {
                    double s = 0.0;
                    for (int j = 0; j < b.cols(); ++j) s += g(i, j) * b(p, j);
                    da(i, p) += s;
                }
            for (int p = 0; p < b.rows(); ++p)
                for (int j = 0; j < b.cols(); ++j) {
                    double s = 0.0;
                    for (int i = 0; i < a.rows(); ++i) s += a(i, p) * g(i, j);
                    db(p, j) += s;
                }
            break;
        }
        case Op::Transpose: {
            Tensor& da = grad_buf(n.in[0]);
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) da(j, i) += g(i, j);
            break;
        }
        case Op::Add: {
            Tensor& da = grad_buf(n.in[0]);
            Tensor& db = grad_buf(n.in[1]);
            for (size_t i = 0; i < g.numel(); ++i) {
                da[i] += g[i];
                db[i] += g[i];
            }
            break;
        }
        case Op::Multiply: {
            const Tensor& a = nodes_[n.in[0]].value;
            const Tensor& b = nodes_[n.in[1]].value;
            Tensor& da = grad_buf(n.in[0]);
            Tensor& db = grad_buf(n.in[1]);
            for (size_t i = 0; i < g.numel(); ++i) {
                da[i] += g[i] * b[i];
                db[i] += g[i] * a[i];
            }
            break;
        }
        case Op::Scale: {
            Tensor& da = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.numel(); ++i) da[i] += n.alpha * g[i];
            break;
        }
        case Op::BiasAdd: {
            Tensor& dx = grad_buf(n.in[0]);
            Tensor& db = grad_buf(n.in[1]);
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) {
                    dx(i, j) += g(i, j);
                    db(0, j) += g(i, j);
                }
            break;
        }
        case Op::Concat: {
            int off = 0;
            for (int src : n.in) {
                const Tensor& t = nodes_[src].value;
                Tensor& d = grad_buf(src);
                if (n.axis == 0) {
                    for (int i = 0; i < t.rows(); ++i)
                        for (int j = 0; j < t.cols(); ++j) d(i, j) += g(off + i, j);
                    off += t.rows();
                } else {
                    for (int i = 0; i < t.rows(); ++i)
                        for (int j = 0; j < t.cols(); ++j) d(i, j) += g(i, off + j);
                    off += t.cols();
                }
            }
            break;
        }
        case Op::MeanAxis: {
            const Tensor& x = nodes_[n.in[0]].value;
            Tensor& dx = grad_buf(n.in[0]);
            if (n.axis == 0) {
                for (int i = 0; i < x.rows(); ++i)
                    for (int j = 0; j < x.cols(); ++j) dx(i, j) += g(0, j) / x.rows();
            } else {
                for (int i = 0; i < x.rows(); ++i)
                    for (int j = 0; j < x.cols(); ++j) dx(i, j) += g(i, 0) / x.cols();
            }
            break;
        }
        case Op::LayerNorm: {
            const Tensor& tg = nodes_[n.in[1]].value;
            Tensor& dx = grad_buf(n.in[0]);
            Tensor& dgamma = grad_buf(n.in[1]);
            Tensor& dbeta = grad_buf(n.in[2]);
            const int m = g.rows(), c = g.cols();
            for (int i = 0; i < m; ++i) {
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (int j = 0; j < c; ++j) {
                    double dxh = g(i, j) * tg(0, j);
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * n.saved(i, j);
                    dgamma(0, j) += g(i, j) * n.saved(i, j);
                    dbeta(0, j) += g(i, j);
                }
                mean_dxh /= c;
                mean_dxh_xh /= c;
                double inv = n.saved2(i, 0);
                for (int j = 0; j < c; ++j) {
                    double dxh = g(i, j) * tg(0, j);
                    dx(i, j) += inv * (dxh - mean_dxh - n.saved(i, j) * mean_dxh_xh);
                }
            }
            break;
        }
        case Op::Relu: {
            const Tensor& x = nodes_[n.in[0]].value;
            Tensor& dx = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.numel(); ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
            break;
        }
        case Op::Sigmoid: {
            Tensor& dx = grad_buf(n.in[0]);
            for (size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
            break;
        }
        case Op::Softmax: {
            Tensor& dx = grad_buf(n.in[0]);
            const Tensor& y = n.value;
            const bool rows = (y.rank() == 1) || (n.axis == 1);
            const int lanes = y.rank() == 1 ? 1 : (rows ? y.rows() : y.cols());
            const int width =
                y.rank() == 1 ? static_cast<int>(y.numel()) : (rows ? y.cols() : y.rows());
            auto yat = [&](int l, int w) {
                return y.rank() == 1 ? y[static_cast<size_t>(w)] : (rows ? y(l, w) : y(w, l));
            };
            auto gat = [&](int l, int w) {
                return g.rank() == 1 ? g[static_cast<size_t>(w)] : (rows ? g(l, w) : g(w, l));
            };
            auto dat = [&](int l, int w) -> double& {
                if (dx.rank() == 1) return dx[static_cast<size_t>(w)];
                return rows ? dx(l, w) : dx(w, l);
            };
            for (int l = 0; l < lanes; ++l) {
                double inner = 0.0;
                for (int w = 0; w < width; ++w) inner += gat(l, w) * yat(l, w);
                for (int w = 0; w < width; ++w) dat(l, w) += yat(l, w) * (gat(l, w) - inner);
            }
            break;
        }
        case Op::Conv1dSame3: {
            const Tensor& x = nodes_[n.in[0]].value;
            const Tensor& w = nodes_[n.in[1]].value;
            Tensor& dx = grad_buf(n.in[0]);
            Tensor& dw = grad_buf(n.in[1]);
            Tensor& db = grad_buf(n.in[2]);
            const int T = x.rows(), cin = x.cols(), cout = w.extent(2);
            for (int t = 0; t < T; ++t)
                for (int o = 0; o < cout; ++o) {
                    double go = g(t, o);
                    db(0, o) += go;
                    for (int k = 0; k < 3; ++k) {
                        int src = t + k - 1;
                        if (src < 0 || src >= T) continue;
                        for (int c = 0; c < cin; ++c) {
                            dx(src, c) += go * w(k, c, o);
                            dw(k, c, o) += x(src, c) * go;
                        }
                    }
                }
            break;
        }
        case Op::BceMean: {
            const Tensor& p = nodes_[n.in[0]].value;
            const Tensor& y = nodes_[n.in[1]].value;
            Tensor& dp = grad_buf(n.in[0]);
            Tensor& dy = grad_buf(n.in[1]);
            const double gs = g[0] / static_cast<double>(p.numel());
            for (size_t i = 0; i < p.numel(); ++i) {
                double ph = n.saved[i];
                // Clipped coordinates are locally constant in p.
                if (p[i] > kBceClip && p[i] < 1.0 - kBceClip)
                    dp[i] += gs * (ph - y[i]) / (ph * (1.0 - ph));
                dy[i] += gs * (std::log(1.0 - ph) - std::log(ph));
            }
            break;
        }
        case Op::SoftmaxCe: {
            Tensor& dl = grad_buf(n.in[0]);
            const int m = n.saved.rows(), c = n.saved.cols();
            const double gs = g[0] / m;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < c; ++j)
                    dl(i, j) += gs * (n.saved(i, j) - (j == n.int_data[i] ? 1.0 : 0.0));
            break;
        }
    }
}

GradMap ComputationTape::param_grads() const {
    if (!ran_backward_) throw ShapeError("param_grads called before backward()");
    GradMap out;
    for (auto& [name, idx] : params_) {
        const Node& n = nodes_[idx];
        out[name] = n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
    }
    return out;
}

}  // namespace asd
