#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irda/rng.hpp"
#include "irda/tensor.hpp"

namespace irda::diff {

// Handle into a Tape. Only valid for the tape that created it.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

enum class OpKind {
    Leaf,
    MatMul,
    Add,
    Mul,
    Neg,
    Log,
    Sigmoid,
    LeakyRelu,
    Scale,
    Grl,
    Dropout,
    Reshape,
    Pick,
    SoftmaxXent,
    BceLogits,
};

// Reverse-mode tape. Nodes are recorded in creation order, which is a
// topological order by construction; backward() sweeps it in reverse.
// One tape per training step; clear() recycles the storage.
class Tape {
public:
    // leaves
    Value input(const Tensor2D& t);
    Value scalar_input(double v);

    // primitive ops
    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    Value mul(Value a, Value b);
    Value neg(Value a);
    Value log(Value a);
    Value sigmoid(Value a);
    Value leaky_relu(Value a, double slope = 0.01);
    Value scale(Value a, double c);            // multiply by a constant
    Value grl(Value a, double lambda);         // identity forward, -lambda * grad backward
    Value dropout(Value a, double rate, Rng& rng);  // inverted dropout, train-time only
    Value reshape(Value a, std::size_t rows, std::size_t cols);
    Value pick(Value a, std::size_t index);    // vector element -> 1x1
    Value softmax_cross_entropy(Value logits, std::size_t label);
    Value bce_with_logits(Value logit, double label);  // label in {0, 1}

    void backward(Value loss);

    const Tensor2D& value(Value v) const;
    const Tensor2D& grad(Value v) const;

    void clear();
    std::size_t size() const { return nodes_.size(); }

    // Smallest |preactivation| seen at any LeakyReLU since the last clear().
    // Finite-difference harnesses use it to reject inputs too close to the kink.
    double min_kink_clearance() const { return min_kink_clearance_; }

private:
    struct Node {
        OpKind kind;
        Tensor2D out;
        Tensor2D grad;
        int a = -1;
        int b = -1;
        double aux = 0.0;            // slope / lambda / constant / bce label
        std::size_t index = 0;       // pick index or xent label
        std::vector<double> cache;   // dropout mask, softmax probabilities
    };

    int push(Node&& n);
    const Node& node(Value v) const;
    void check_finite(const Node& n, const char* what) const;

    std::vector<Node> nodes_;
    double min_kink_clearance_ = 1e300;
};

// Adam with L2 weight decay folded into the gradient (update order matches
// the common framework implementation: decay, moments, bias correction).
struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-7;
};

struct AdamState {
    Tensor2D m;
    Tensor2D v;
    long t = 0;
};

void adam_step(Tensor2D& param, const Tensor2D& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

// Named parameter slot; models expose these for optimizers and checkpoints.
struct ParamRef {
    std::string name;
    Tensor2D* value = nullptr;
    AdamState* state = nullptr;
};

}  // namespace irda::diff
