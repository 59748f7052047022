#pragma once

#include <string>
#include <vector>

#include "irda/autodiff.hpp"
#include "irda/rng.hpp"
#include "irda/tensor.hpp"

namespace irda {

// Fully connected stack with LeakyReLU between layers. Inputs and outputs
// are column vectors. `activate_output` controls whether the final layer
// also gets the activation.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<std::size_t> dims, bool activate_output, double leaky_slope, Rng& init_rng,
        std::string name);

    // forward on a tape; params are re-bound as leaves per call
    struct Bound {
        std::vector<diff::Value> weights;
        std::vector<diff::Value> biases;
    };
    Bound bind(diff::Tape& tape) const;
    diff::Value forward(diff::Tape& tape, const Bound& bound, diff::Value x) const;

    // inference path, no tape
    std::vector<double> forward_eval(const std::vector<double>& x) const;

    // gradient export after tape.backward()
    void accumulate_grads(const diff::Tape& tape, const Bound& bound,
                          std::vector<Tensor2D>& weight_grads,
                          std::vector<Tensor2D>& bias_grads) const;

    std::vector<diff::ParamRef> params();

    std::size_t input_dim() const { return dims_.front(); }
    std::size_t output_dim() const { return dims_.back(); }
    std::size_t layer_count() const { return weights_.size(); }

private:
    std::vector<std::size_t> dims_;
    bool activate_output_ = false;
    double leaky_slope_ = 0.01;
    std::string name_;
    std::vector<Tensor2D> weights_;
    std::vector<Tensor2D> biases_;
    std::vector<diff::AdamState> weight_states_;
    std::vector<diff::AdamState> bias_states_;
};

}  // namespace irda
