#include "irda/model.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "irda/common.hpp"

namespace irda {

using nlohmann::json;

TwoStreamModel::TwoStreamModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.num_classes < 2) throw ConfigError("model needs at least 2 classes");
    if (cfg.modalities < 1) throw ConfigError("model needs at least 1 modality");
    if (cfg.feature_dim < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1) {
        throw ConfigError("model dimensions must be positive");
    }
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
        throw ConfigError("dropout_rate must lie in [0, 1)");
    }
    const auto fd = static_cast<std::size_t>(cfg.feature_dim);
    const auto ed = static_cast<std::size_t>(cfg.embed_dim);
    const auto hd = static_cast<std::size_t>(cfg.hidden_dim);
    const auto nc = static_cast<std::size_t>(cfg.num_classes);
    for (int k = 0; k < cfg.modalities; ++k) {
        const auto base = static_cast<std::uint64_t>(3 * k);
        Rng fr(stream_seed(seed, base));
        Rng cr(stream_seed(seed, base + 1));
        Rng dr(stream_seed(seed, base + 2));
        extractor_.emplace_back(std::vector<std::size_t>{fd, hd, ed}, true, cfg.leaky_slope, fr,
                                "f" + std::to_string(k));
        classifier_.emplace_back(std::vector<std::size_t>{ed, nc}, false, cfg.leaky_slope, cr,
                                 "c" + std::to_string(k));
        discriminator_.emplace_back(std::vector<std::size_t>{ed, hd, 1}, false, cfg.leaky_slope, dr,
                                    "d" + std::to_string(k));
    }
}

TwoStreamModel::Bound TwoStreamModel::bind(diff::Tape& tape) const {
    Bound bound;
    for (int k = 0; k < cfg_.modalities; ++k) {
        bound.extractor.push_back(extractor_[static_cast<std::size_t>(k)].bind(tape));
        bound.classifier.push_back(classifier_[static_cast<std::size_t>(k)].bind(tape));
        bound.discriminator.push_back(discriminator_[static_cast<std::size_t>(k)].bind(tape));
    }
    return bound;
}

void TwoStreamModel::check_segment(const Segment& seg) const {
    if (seg.features.size() != static_cast<std::size_t>(cfg_.modalities)) {
        throw DimensionError("segment is missing a modality");
    }
    for (const auto& mod : seg.features) {
        if (mod.size() != static_cast<std::size_t>(cfg_.feature_dim)) {
            throw DimensionError("segment feature length does not match the model");
        }
    }
}

diff::Value TwoStreamModel::embed(diff::Tape& tape, const Bound& bound, const Segment& seg, int k,
                                  bool train, Rng* dropout_rng) const {
    check_segment(seg);
    if (k < 0 || k >= cfg_.modalities) throw IndexError("modality index out of range");
    const auto ku = static_cast<std::size_t>(k);
    diff::Value x = tape.input(Tensor2D::column(seg.features[ku]));
    diff::Value h = extractor_[ku].forward(tape, bound.extractor[ku], x);
    if (train && cfg_.dropout_rate > 0.0) {
        if (dropout_rng == nullptr) throw StateError("training forward needs a dropout rng");
        h = tape.dropout(h, cfg_.dropout_rate, *dropout_rng);
    }
    return h;
}

diff::Value TwoStreamModel::class_logits(diff::Tape& tape, const Bound& bound,
                                         diff::Value embedding, int k) const {
    if (k < 0 || k >= cfg_.modalities) throw IndexError("modality index out of range");
    const auto ku = static_cast<std::size_t>(k);
    return classifier_[ku].forward(tape, bound.classifier[ku], embedding);
}

diff::Value TwoStreamModel::fused_logits(diff::Tape& tape, const Bound& bound, const Segment& seg,
                                         bool train, Rng* dropout_rng) const {
    diff::Value fused;
    for (int k = 0; k < cfg_.modalities; ++k) {
        diff::Value logits = class_logits(tape, bound, embed(tape, bound, seg, k, train, dropout_rng), k);
        fused = fused.valid() ? tape.add(fused, logits) : logits;
    }
    return fused;
}

diff::Value TwoStreamModel::domain_logit(diff::Tape& tape, const Bound& bound,
                                         diff::Value embedding, int k, bool apply_grl) const {
    if (k < 0 || k >= cfg_.modalities) throw IndexError("modality index out of range");
    const auto ku = static_cast<std::size_t>(k);
    diff::Value h = apply_grl ? tape.grl(embedding, cfg_.grl_scale) : embedding;
    return discriminator_[ku].forward(tape, bound.discriminator[ku], h);
}

diff::Value TwoStreamModel::loss_cls(diff::Tape& tape, const Bound& bound,
                                     const std::vector<const Segment*>& batch, bool train,
                                     Rng* dropout_rng) const {
    diff::Value total = tape.scalar_input(0.0);
    for (const Segment* seg : batch) {
        if (seg->domain != Domain::Source) {
            throw ContractError("loss_cls received a target segment");
        }
        if (!seg->label.has_value()) {
            throw ContractError("loss_cls received an unlabeled segment");
        }
        diff::Value fused = fused_logits(tape, bound, *seg, train, dropout_rng);
        total = tape.add(total,
                         tape.softmax_cross_entropy(fused, static_cast<std::size_t>(*seg->label)));
    }
    return total;
}

diff::Value TwoStreamModel::loss_adv(diff::Tape& tape, const Bound& bound,
                                     const std::vector<const Segment*>& source_half,
                                     const std::vector<const Segment*>& target_half, bool train,
                                     Rng* dropout_rng) const {
    if (source_half.empty() || target_half.empty()) {
        std::fprintf(stderr, "warning: loss_adv batch covers a single domain\n");
    }
    diff::Value total = tape.scalar_input(0.0);
    for (int k = 0; k < cfg_.modalities; ++k) {
        for (const Segment* seg : source_half) {
            diff::Value e = embed(tape, bound, *seg, k, train, dropout_rng);
            total = tape.add(
                total, tape.bce_with_logits(domain_logit(tape, bound, e, k), kSourceDomainLabel));
        }
        for (const Segment* seg : target_half) {
            diff::Value e = embed(tape, bound, *seg, k, train, dropout_rng);
            total = tape.add(
                total, tape.bce_with_logits(domain_logit(tape, bound, e, k), kTargetDomainLabel));
        }
    }
    return total;
}

std::vector<double> TwoStreamModel::eval_embed(const Segment& seg, int k) const {
    check_segment(seg);
    if (k < 0 || k >= cfg_.modalities) throw IndexError("modality index out of range");
    const auto ku = static_cast<std::size_t>(k);
    return extractor_[ku].forward_eval(seg.features[ku]);
}

std::vector<double> TwoStreamModel::eval_fused_logits(const Segment& seg) const {
    std::vector<double> fused(static_cast<std::size_t>(cfg_.num_classes), 0.0);
    for (int k = 0; k < cfg_.modalities; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const std::vector<double> logits = classifier_[ku].forward_eval(eval_embed(seg, k));
        for (std::size_t c = 0; c < fused.size(); ++c) fused[c] += logits[c];
    }
    return fused;
}

double TwoStreamModel::eval_domain_logit(const Segment& seg, int k) const {
    const auto ku = static_cast<std::size_t>(k);
    return discriminator_[ku].forward_eval(eval_embed(seg, k))[0];
}

double TwoStreamModel::domain_logit_from_embed(const std::vector<double>& embedding, int k) const {
    if (k < 0 || k >= cfg_.modalities) throw IndexError("modality index out of range");
    return discriminator_[static_cast<std::size_t>(k)].forward_eval(embedding)[0];
}

int TwoStreamModel::predict(const Segment& seg) const {
    const std::vector<double> fused = eval_fused_logits(seg);
    std::size_t best = 0;
    for (std::size_t c = 1; c < fused.size(); ++c) {
        if (fused[c] > fused[best]) best = c;
    }
    return static_cast<int>(best);
}

double TwoStreamModel::top1_accuracy(const Dataset& data) const {
    if (data.target.empty()) throw MetricError("top1_accuracy over an empty eval set");
    if (data.eval_label_count() != data.target.size()) {
        throw MetricError("top1_accuracy without eval labels");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.target.size(); ++i) {
        const int truth = data.eval_label(i);
        if (truth < 0) throw MetricError("top1_accuracy without eval labels");
        if (predict(data.target[i]) == truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.target.size());
}

std::vector<diff::ParamRef> TwoStreamModel::params() {
    std::vector<diff::ParamRef> refs;
    for (int k = 0; k < cfg_.modalities; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        for (auto& r : extractor_[ku].params()) refs.push_back(r);
        for (auto& r : classifier_[ku].params()) refs.push_back(r);
        for (auto& r : discriminator_[ku].params()) refs.push_back(r);
    }
    return refs;
}

std::string TwoStreamModel::config_hash() const {
    std::ostringstream os;
    os << cfg_.num_classes << '|' << cfg_.modalities << '|' << cfg_.feature_dim << '|'
       << cfg_.embed_dim << '|' << cfg_.hidden_dim << '|' << cfg_.dropout_rate << '|'
       << cfg_.leaky_slope << '|' << cfg_.grl_scale;
    return fnv1a_hex(os.str());
}

void save_checkpoint(const std::string& path, const std::string& config_hash,
                     std::vector<diff::ParamRef> params) {
    json j;
    j["format_version"] = 1;
    j["config_hash"] = config_hash;
    json plist = json::array();
    for (const diff::ParamRef& p : params) {
        json e;
        e["name"] = p.name;
        e["rows"] = p.value->rows;
        e["cols"] = p.value->cols;
        e["data"] = p.value->data;
        e["adam_m"] = p.state->m.data;
        e["adam_v"] = p.state->v.data;
        e["adam_t"] = p.state->t;
        plist.push_back(std::move(e));
    }
    j["params"] = std::move(plist);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << j.dump() << '\n';
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

void load_checkpoint(const std::string& path, const std::string& config_hash,
                     std::vector<diff::ParamRef> params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("checkpoint is not valid JSON: " + std::string(e.what()));
    }
    if (j.value("format_version", 0) != 1) throw IoError("unsupported checkpoint format version");
    if (j.value("config_hash", "") != config_hash) {
        throw IoError("checkpoint belongs to a different configuration");
    }
    const json& plist = j.at("params");
    if (plist.size() != params.size()) {
        throw IoError("checkpoint parameter count does not match the model");
    }
    for (diff::ParamRef& p : params) {
        const json* found = nullptr;
        for (const json& e : plist) {
            if (e.value("name", "") == p.name) {
                found = &e;
                break;
            }
        }
        if (found == nullptr) throw IoError("checkpoint is missing parameter " + p.name);
        const auto rows = found->value("rows", std::size_t{0});
        const auto cols = found->value("cols", std::size_t{0});
        if (rows != p.value->rows || cols != p.value->cols) {
            throw IoError("checkpoint shape mismatch for " + p.name);
        }
        auto data = found->at("data").get<std::vector<double>>();
        if (data.size() != p.value->data.size()) {
            throw IoError("checkpoint size mismatch for " + p.name);
        }
        p.value->data = std::move(data);
        auto m = found->at("adam_m").get<std::vector<double>>();
        auto v = found->at("adam_v").get<std::vector<double>>();
        p.state->t = found->value("adam_t", 0L);
        if (m.empty() || v.empty()) {
            p.state->m = Tensor2D();
            p.state->v = Tensor2D();
        } else {
            if (m.size() != p.value->data.size() || v.size() != p.value->data.size()) {
                throw IoError("checkpoint optimizer state mismatch for " + p.name);
            }
            p.state->m = Tensor2D(rows, cols);
            p.state->m.data = std::move(m);
            p.state->v = Tensor2D(rows, cols);
            p.state->v.data = std::move(v);
        }
    }
}

}  // namespace irda
