#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irda/autodiff.hpp"
#include "irda/nets.hpp"
#include "irda/synth.hpp"

namespace irda {

// Domain labels are fixed: source = 0, target = 1.
constexpr double kSourceDomainLabel = 0.0;
constexpr double kTargetDomainLabel = 1.0;

struct ModelConfig {
    int num_classes = 8;
    int modalities = 2;
    int feature_dim = 64;  // raw input d
    int embed_dim = 64;    // d_f
    int hidden_dim = 128;
    double dropout_rate = 0.5;
    double leaky_slope = 0.01;
    double grl_scale = 1.0;
};

// Per modality: extractor (d -> hidden -> d_f, LeakyReLU on both layers,
// dropout on the output during training), linear classifier (d_f -> C), and
// discriminator (d_f -> hidden -> 1) reached through a gradient reversal.
class TwoStreamModel {
public:
    TwoStreamModel(const ModelConfig& cfg, std::uint64_t seed);

    struct Bound {
        std::vector<Mlp::Bound> extractor;
        std::vector<Mlp::Bound> classifier;
        std::vector<Mlp::Bound> discriminator;
    };
    Bound bind(diff::Tape& tape) const;

    // training-path forwards; embed once, then feed both heads so the
    // classifier and adversarial paths share one dropout mask
    diff::Value embed(diff::Tape& tape, const Bound& bound, const Segment& seg, int k, bool train,
                      Rng* dropout_rng) const;
    diff::Value class_logits(diff::Tape& tape, const Bound& bound, diff::Value embedding,
                             int k) const;
    diff::Value fused_logits(diff::Tape& tape, const Bound& bound, const Segment& seg, bool train,
                             Rng* dropout_rng) const;
    diff::Value domain_logit(diff::Tape& tape, const Bound& bound, diff::Value embedding, int k,
                             bool apply_grl = true) const;

    // summed softmax cross-entropy over a labeled source batch
    diff::Value loss_cls(diff::Tape& tape, const Bound& bound,
                         const std::vector<const Segment*>& batch, bool train,
                         Rng* dropout_rng) const;

    // summed per-modality BCE of domain logits against the fixed labels;
    // a single-domain batch is legal but warned about on stderr
    diff::Value loss_adv(diff::Tape& tape, const Bound& bound,
                         const std::vector<const Segment*>& source_half,
                         const std::vector<const Segment*>& target_half, bool train,
                         Rng* dropout_rng) const;

    // inference paths, dropout off, no tape
    std::vector<double> eval_embed(const Segment& seg, int k) const;
    std::vector<double> eval_fused_logits(const Segment& seg) const;
    double eval_domain_logit(const Segment& seg, int k) const;
    double domain_logit_from_embed(const std::vector<double>& embedding, int k) const;
    int predict(const Segment& seg) const;  // ties go to the lowest class index

    // fraction of target segments whose fused argmax matches the hidden label
    double top1_accuracy(const Dataset& data) const;

    std::vector<diff::ParamRef> params();
    const ModelConfig& config() const { return cfg_; }
    std::string config_hash() const;

private:
    void check_segment(const Segment& seg) const;

    ModelConfig cfg_;
    std::vector<Mlp> extractor_;
    std::vector<Mlp> classifier_;
    std::vector<Mlp> discriminator_;
};

// Versioned parameter snapshot shared by the model and the agents.
void save_checkpoint(const std::string& path, const std::string& config_hash,
                     std::vector<diff::ParamRef> params);
void load_checkpoint(const std::string& path, const std::string& config_hash,
                     std::vector<diff::ParamRef> params);

}  // namespace irda
