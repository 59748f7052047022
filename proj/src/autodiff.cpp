#include "irda/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace irda::diff {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// C += A * B, all row-major
void matmul_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& c) {
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = &a.data[i * k];
        double* crow = &c.data[i * m];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = &b.data[p * m];
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// gA += gC * B^T  (row i of gA from rows of gC and B)
void matmul_acc_nt(const Tensor2D& gc, const Tensor2D& b, Tensor2D& ga) {
    const std::size_t n = gc.rows, m = gc.cols, k = b.rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double* grow = &gc.data[i * m];
        double* garow = &ga.data[i * k];
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = &b.data[p * m];
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            garow[p] += acc;
        }
    }
}

// gB += A^T * gC
void matmul_acc_tn(const Tensor2D& a, const Tensor2D& gc, Tensor2D& gb) {
    const std::size_t n = a.rows, k = a.cols, m = gc.cols;
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = &a.data[i * k];
        const double* grow = &gc.data[i * m];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* gbrow = &gb.data[p * m];
            for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
    }
}

}  // namespace

int Tape::push(Node&& n) {
    n.grad = Tensor2D(n.out.rows, n.out.cols, 0.0);
    check_finite(n, "forward output");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Value v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
        throw StateError("tape handle does not refer to a recorded node");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check_finite(const Node& n, const char* what) const {
    if (!n.out.all_finite()) {
        throw StateError(std::string("non-finite ") + what + " in tape node");
    }
}

Value Tape::input(const Tensor2D& t) {
    Node n;
    n.kind = OpKind::Leaf;
    n.out = t;
    return {push(std::move(n))};
}

Value Tape::scalar_input(double v) { return input(Tensor2D::scalar(v)); }

Value Tape::matmul(Value a, Value b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.out.cols != nb.out.rows) {
        throw DimensionError("matmul: inner dimensions disagree (" + std::to_string(na.out.cols) +
                             " vs " + std::to_string(nb.out.rows) + ")");
    }
    Node n;
    n.kind = OpKind::MatMul;
    n.a = a.id;
    n.b = b.id;
    n.out = Tensor2D(na.out.rows, nb.out.cols, 0.0);
    matmul_acc(na.out, nb.out, n.out);
    return {push(std::move(n))};
}

Value Tape::add(Value a, Value b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (!na.out.same_shape(nb.out)) throw DimensionError("add: operand shapes differ");
    Node n;
    n.kind = OpKind::Add;
    n.a = a.id;
    n.b = b.id;
    n.out = na.out;
    for (std::size_t i = 0; i < n.out.size(); ++i) n.out.data[i] += nb.out.data[i];
    return {push(std::move(n))};
}

Value Tape::mul(Value a, Value b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (!na.out.same_shape(nb.out)) throw DimensionError("mul: operand shapes differ");
    Node n;
    n.kind = OpKind::Mul;
    n.a = a.id;
    n.b = b.id;
    n.out = na.out;
    for (std::size_t i = 0; i < n.out.size(); ++i) n.out.data[i] *= nb.out.data[i];
    return {push(std::move(n))};
}

Value Tape::neg(Value a) {
    Node n;
    n.kind = OpKind::Neg;
    n.a = a.id;
    n.out = node(a).out;
    for (double& v : n.out.data) v = -v;
    return {push(std::move(n))};
}

Value Tape::log(Value a) {
    Node n;
    n.kind = OpKind::Log;
    n.a = a.id;
    n.out = node(a).out;
    for (double& v : n.out.data) {
        if (v <= 0.0) throw DomainError("log of non-positive input");
        v = std::log(v);
    }
    return {push(std::move(n))};
}

Value Tape::sigmoid(Value a) {
    Node n;
    n.kind = OpKind::Sigmoid;
    n.a = a.id;
    n.out = node(a).out;
    for (double& v : n.out.data) v = stable_sigmoid(v);
    return {push(std::move(n))};
}

Value Tape::leaky_relu(Value a, double slope) {
    Node n;
    n.kind = OpKind::LeakyRelu;
    n.a = a.id;
    n.aux = slope;
    n.out = node(a).out;
    for (double& v : n.out.data) {
        min_kink_clearance_ = std::min(min_kink_clearance_, std::abs(v));
        if (v < 0.0) v *= slope;
    }
    return {push(std::move(n))};
}

Value Tape::scale(Value a, double c) {
    Node n;
    n.kind = OpKind::Scale;
    n.a = a.id;
    n.aux = c;
    n.out = node(a).out;
    for (double& v : n.out.data) v *= c;
    return {push(std::move(n))};
}

Value Tape::grl(Value a, double lambda) {
    Node n;
    n.kind = OpKind::Grl;
    n.a = a.id;
    n.aux = lambda;
    n.out = node(a).out;
    return {push(std::move(n))};
}

Value Tape::dropout(Value a, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
    Node n;
    n.kind = OpKind::Dropout;
    n.a = a.id;
    n.out = node(a).out;
    n.cache.resize(n.out.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n.out.size(); ++i) {
        n.cache[i] = (rng.uniform() >= rate) ? keep_scale : 0.0;
        n.out.data[i] *= n.cache[i];
    }
    return {push(std::move(n))};
}

Value Tape::reshape(Value a, std::size_t rows, std::size_t cols) {
    const Node& na = node(a);
    if (rows * cols != na.out.size()) throw DimensionError("reshape: element count changes");
    Node n;
    n.kind = OpKind::Reshape;
    n.a = a.id;
    n.out = na.out;
    n.out.rows = rows;
    n.out.cols = cols;
    return {push(std::move(n))};
}

Value Tape::pick(Value a, std::size_t index) {
    const Node& na = node(a);
    if (!na.out.is_vector()) throw DimensionError("pick: input must be a vector");
    if (index >= na.out.size()) throw IndexError("pick: index out of range");
    Node n;
    n.kind = OpKind::Pick;
    n.a = a.id;
    n.index = index;
    n.out = Tensor2D::scalar(na.out.data[index]);
    return {push(std::move(n))};
}

Value Tape::softmax_cross_entropy(Value logits, std::size_t label) {
    const Node& na = node(logits);
    if (!na.out.is_vector()) throw DimensionError("softmax_cross_entropy: logits must be a vector");
    const std::size_t c = na.out.size();
    if (label >= c) throw IndexError("softmax_cross_entropy: label out of range");

    const double m = *std::max_element(na.out.data.begin(), na.out.data.end());
    double sum = 0.0;
    std::vector<double> p(c);
    for (std::size_t i = 0; i < c; ++i) {
        p[i] = std::exp(na.out.data[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;

    Node n;
    n.kind = OpKind::SoftmaxXent;
    n.a = logits.id;
    n.index = label;
    n.cache = std::move(p);
    n.out = Tensor2D::scalar(std::log(sum) - (na.out.data[label] - m));
    return {push(std::move(n))};
}

Value Tape::bce_with_logits(Value logit, double label) {
    const Node& na = node(logit);
    if (na.out.size() != 1) throw DimensionError("bce_with_logits: logit must be a scalar");
    const double z = na.out.data[0];
    // max(z,0) - z*d + log(1 + exp(-|z|))
    const double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
    Node n;
    n.kind = OpKind::BceLogits;
    n.a = logit.id;
    n.aux = label;
    n.out = Tensor2D::scalar(loss);
    return {push(std::move(n))};
}

void Tape::backward(Value loss) {
    if (nodes_.empty()) throw StateError("backward called before any forward pass");
    const Node& top = node(loss);
    if (top.out.size() != 1) throw StateError("backward: loss node must be scalar");

    for (Node& n : nodes_) n.grad.fill(0.0);
    nodes_[static_cast<std::size_t>(loss.id)].grad.data[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        switch (n.kind) {
            case OpKind::Leaf:
                break;
            case OpKind::MatMul: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                matmul_acc_nt(n.grad, nb.out, na.grad);
                matmul_acc_tn(na.out, n.grad, nb.grad);
                break;
            }
            case OpKind::Add: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    na.grad.data[i] += n.grad.data[i];
                    nb.grad.data[i] += n.grad.data[i];
                }
                break;
            }
            case OpKind::Mul: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    na.grad.data[i] += n.grad.data[i] * nb.out.data[i];
                    nb.grad.data[i] += n.grad.data[i] * na.out.data[i];
                }
                break;
            }
            case OpKind::Neg: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i) na.grad.data[i] -= n.grad.data[i];
                break;
            }
            case OpKind::Log: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    na.grad.data[i] += n.grad.data[i] / na.out.data[i];
                break;
            }
            case OpKind::Sigmoid: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    const double s = n.out.data[i];
                    na.grad.data[i] += n.grad.data[i] * s * (1.0 - s);
                }
                break;
            }
            case OpKind::LeakyRelu: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i) {
                    const double d = (na.out.data[i] < 0.0) ? n.aux : 1.0;
                    na.grad.data[i] += n.grad.data[i] * d;
                }
                break;
            }
            case OpKind::Scale: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    na.grad.data[i] += n.grad.data[i] * n.aux;
                break;
            }
            case OpKind::Grl: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    na.grad.data[i] += n.grad.data[i] * (-n.aux);
                break;
            }
            case OpKind::Dropout: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    na.grad.data[i] += n.grad.data[i] * n.cache[i];
                break;
            }
            case OpKind::Reshape: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    na.grad.data[i] += n.grad.data[i];
                break;
            }
            case OpKind::Pick: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                na.grad.data[n.index] += n.grad.data[0];
                break;
            }
            case OpKind::SoftmaxXent: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double g = n.grad.data[0];
                for (std::size_t i = 0; i < na.grad.size(); ++i) {
                    const double onehot = (i == n.index) ? 1.0 : 0.0;
                    na.grad.data[i] += g * (n.cache[i] - onehot);
                }
                break;
            }
            case OpKind::BceLogits: {
                Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const double s = stable_sigmoid(na.out.data[0]);
                na.grad.data[0] += n.grad.data[0] * (s - n.aux);
                break;
            }
        }
    }

    for (const Node& n : nodes_) {
        if (!n.grad.all_finite()) throw StateError("non-finite gradient after backward pass");
    }
}

const Tensor2D& Tape::value(Value v) const { return node(v).out; }

const Tensor2D& Tape::grad(Value v) const { return node(v).grad; }

void Tape::clear() {
    nodes_.clear();
    min_kink_clearance_ = 1e300;
}

void adam_step(Tensor2D& param, const Tensor2D& grad, AdamState& state, double lr,
               const AdamConfig& cfg) {
    if (!param.same_shape(grad)) throw DimensionError("adam_step: param/grad shapes differ");
    if (!grad.all_finite()) {
        throw StateError("adam_step: non-finite gradient, aborting training");
    }
    if (state.m.size() != param.size()) {
        state.m = Tensor2D(param.rows, param.cols, 0.0);
        state.v = Tensor2D(param.rows, param.cols, 0.0);
        state.t = 0;
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i] + cfg.weight_decay * param.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m.data[i] / bc1;
        const double vhat = state.v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace irda::diff
