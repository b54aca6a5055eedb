#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "sadm/tensor.hpp"

namespace sadm {

class ParameterStore;

struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over a dynamically recorded operation tape. One tape
// per forward pass; backward() walks the records in reverse and accumulates
// into each node's grad. Parameters bound via param() additionally flush
// their gradient into the owning store at the end of backward().
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = false);
    Var param(ParameterStore& store, const std::string& name);

    const Tensor& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor& grad(Var v) const;

    // elementwise, equal shapes
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    // elementwise, unary
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var exp(Var a);
    Var silu(Var a);

    // broadcasts
    Var add_rowwise(Var a, Var bias);      // bias over last axis
    Var mul_rowwise(Var a, Var gain);      // gain over last axis
    Var add_channelwise(Var a, Var bias);  // bias over first axis

    // contractions
    Var matmul(Var a, Var b);  // (..., m, k) x (..., k, n); leading extents equal
    Var conv3d(Var x, Var w, std::array<std::int64_t, 3> stride,
               std::array<std::int64_t, 3> pad = {0, 0, 0});

    // normalizations over the last axis
    Var softmax(Var a);
    Var layer_norm(Var a, double eps = 1e-5);

    // data movement
    Var reshape(Var a, Shape shape);
    Var permute(Var a, std::vector<std::int64_t> axes);
    Var slice0(Var a, std::int64_t start, std::int64_t len);
    Var concat0(Var a, Var b);
    Var upsample_nearest(Var a, std::vector<std::int64_t> factors);

    // reductions
    Var sum(Var a);
    Var mean_sq_diff(Var a, Var b);  // mean((a-b)^2), scalar

    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily
        bool requires_grad = false;
        std::vector<std::int32_t> inputs;
        std::function<void(Tape&, Node&)> backprop;  // empty for leaves
    };

    std::int32_t check(Var v) const;
    Node& node(Var v) { return nodes_[check(v)]; }
    Tensor& grad_buf(std::int32_t id);
    Var record(Tensor value, std::vector<Var> inputs, std::function<void(Tape&, Node&)> backprop);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::int32_t, std::string>> param_nodes_;
    ParameterStore* store_ = nullptr;

    friend struct TapeTestAccess;
};

}  // namespace sadm
