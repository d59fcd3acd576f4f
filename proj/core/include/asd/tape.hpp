#pragma once

#include <map>
#include <string>
#include <vector>

#include "asd/tensor.hpp"

namespace asd {

// Handle to a node on a ComputationTape.
struct Value {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

using GradMap = std::map<std::string, Tensor>;

// Reverse-mode tape over a fixed op vocabulary. Nodes are appended in
// topological order by construction; backward() visits each node exactly
// once in reverse. Every forward op eagerly rejects non-finite outputs.
//
// Tapes are single-threaded, built fresh per training step. Parameters are
// registered as named leaves so their gradients can be collected by name.
class ComputationTape {
public:
    // Leaves -------------------------------------------------------------
    Value leaf(Tensor t);
    Value param(const std::string& name, const Tensor& t);

    // Ops ----------------------------------------------------------------
    Value matmul(Value a, Value b);
    Value transpose(Value a);
    Value add(Value a, Value b);
    Value multiply(Value a, Value b);
    Value scale(Value a, double alpha);
    Value bias_add(Value x, Value b);               // [m,n] + [1,n]
    Value concat(const std::vector<Value>& xs, int axis);
    Value mean_axis(Value a, int axis);             // keeps rank 2
    Value layer_norm(Value x, Value gamma, Value beta, double eps = 1e-5);
    Value relu(Value a);
    Value sigmoid(Value a);
    Value softmax(Value a, int axis);
    Value conv1d_same3(Value x, Value w, Value b);  // x [T,cin], w [3,cin,cout], b [1,cout]
    Value bce_mean(Value p, Value targets);         // scalar
    Value softmax_cross_entropy(Value logits, const std::vector<int>& labels);  // scalar

    struct Attention {
        Value out;
        Value weights;
    };
    // softmax(q k^T / sqrt(d)) v along the temporal dimension of q.
    Attention scaled_dot_attention(Value q, Value k, Value v);

    // Backward -----------------------------------------------------------
    void backward(Value loss);

    const Tensor& value(Value v) const { return nodes_[v.idx].value; }
    const Tensor& grad(Value v) const;
    // Gradient per registered parameter; zeros for parameters the loss
    // never reached.
    GradMap param_grads() const;

    size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf,
        Matmul,
        Transpose,
        Add,
        Multiply,
        Scale,
        BiasAdd,
        Concat,
        MeanAxis,
        LayerNorm,
        Relu,
        Sigmoid,
        Softmax,
        Conv1dSame3,
        BceMean,
        SoftmaxCe,
    };

    struct Node {
        Op op;
        std::vector<int> in;
        Tensor value;
        Tensor grad;
        // Op-specific saved state.
        int axis = 0;
        double alpha = 0.0;
        Tensor saved;
        Tensor saved2;
        std::vector<int> int_data;
    };

    Value push(Node&& n, const char* opname);
    const Node& node(Value v) const;
    void check_handle(Value v) const;
    Tensor& grad_buf(int idx);
    void backprop_node(int idx);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, int>> params_;
    std::map<std::string, int> param_index_;
    bool ran_backward_ = false;
};

}  // namespace asd
