#include "irda/nets.hpp"

#include <cmath>
#include <utility>

#include "irda/common.hpp"

namespace irda {

Mlp::Mlp(std::vector<std::size_t> dims, bool activate_output, double leaky_slope, Rng& init_rng,
         std::string name)
    : dims_(std::move(dims)),
      activate_output_(activate_output),
      leaky_slope_(leaky_slope),
      name_(std::move(name)) {
    if (dims_.size() < 2) {
        throw ConfigError("Mlp needs at least an input and an output dimension");
    }
    for (std::size_t d : dims_) {
        if (d == 0) throw ConfigError("Mlp dimension must be positive");
    }
    weights_.reserve(dims_.size() - 1);
    biases_.reserve(dims_.size() - 1);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const std::size_t fan_in = dims_[l];
        const std::size_t fan_out = dims_[l + 1];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Tensor2D w(fan_out, fan_in);
        for (double& v : w.data) v = init_rng.normal(0.0, stddev);
        weights_.push_back(std::move(w));
        biases_.emplace_back(fan_out, 1);
    }
    weight_states_.resize(weights_.size());
    bias_states_.resize(biases_.size());
}

Mlp::Bound Mlp::bind(diff::Tape& tape) const {
    Bound bound;
    bound.weights.reserve(weights_.size());
    bound.biases.reserve(biases_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        bound.weights.push_back(tape.input(weights_[l]));
        bound.biases.push_back(tape.input(biases_[l]));
    }
    return bound;
}

diff::Value Mlp::forward(diff::Tape& tape, const Bound& bound, diff::Value x) const {
    if (bound.weights.size() != weights_.size()) {
        throw StateError("bound parameter set does not match this Mlp");
    }
    diff::Value h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = tape.add(tape.matmul(bound.weights[l], h), bound.biases[l]);
        const bool last = (l + 1 == weights_.size());
        if (!last || activate_output_) {
            h = tape.leaky_relu(h, leaky_slope_);
        }
    }
    return h;
}

std::vector<double> Mlp::forward_eval(const std::vector<double>& x) const {
    if (x.size() != dims_.front()) {
        throw DimensionError("Mlp eval input has wrong dimension");
    }
    std::vector<double> h = x;
    std::vector<double> next;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const Tensor2D& w = weights_[l];
        const Tensor2D& b = biases_[l];
        next.assign(w.rows, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            double acc = b.data[r];
            const double* wr = w.data.data() + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * h[c];
            next[r] = acc;
        }
        const bool last = (l + 1 == weights_.size());
        if (!last || activate_output_) {
            for (double& v : next) {
                if (v < 0.0) v *= leaky_slope_;
            }
        }
        h.swap(next);
    }
    return h;
}

void Mlp::accumulate_grads(const diff::Tape& tape, const Bound& bound,
                           std::vector<Tensor2D>& weight_grads,
                           std::vector<Tensor2D>& bias_grads) const {
    weight_grads.clear();
    bias_grads.clear();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weight_grads.push_back(tape.grad(bound.weights[l]));
        bias_grads.push_back(tape.grad(bound.biases[l]));
    }
}

std::vector<diff::ParamRef> Mlp::params() {
    std::vector<diff::ParamRef> refs;
    refs.reserve(2 * weights_.size());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        refs.push_back({name_ + ".w" + std::to_string(l), &weights_[l], &weight_states_[l]});
        refs.push_back({name_ + ".b" + std::to_string(l), &biases_[l], &bias_states_[l]});
    }
    return refs;
}

}  // namespace irda
