#include "irda/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "json.hpp"

#include "irda/common.hpp"

namespace irda {

using nlohmann::json;

namespace {

// rng stream ids under the run seed
constexpr std::uint64_t kStreamModelInit = 0;
constexpr std::uint64_t kStreamStage1Iter = 1;
constexpr std::uint64_t kStreamStage2Iter = 2;
constexpr std::uint64_t kStreamDropout = 3;
constexpr std::uint64_t kStreamRefine = 4;
constexpr std::uint64_t kStreamReplay = 5;
constexpr std::uint64_t kStreamAgentInit = 100;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool valid_agent_tag(const std::string& tag) {
    if (tag.size() < 2 || (tag[0] != 's' && tag[0] != 't')) return false;
    for (std::size_t i = 1; i < tag.size(); ++i) {
        if (tag[i] < '0' || tag[i] > '9') return false;
    }
    return true;
}

void collect_mlp_grads(const diff::Tape& tape, const Mlp::Bound& bound,
                       std::vector<Tensor2D>& out) {
    for (std::size_t l = 0; l < bound.weights.size(); ++l) {
        out.push_back(tape.grad(bound.weights[l]));
        out.push_back(tape.grad(bound.biases[l]));
    }
}

// grad order mirrors TwoStreamModel::params(): per modality f, c, d
void collect_model_grads(const diff::Tape& tape, const TwoStreamModel::Bound& bound,
                         std::vector<Tensor2D>& out) {
    for (std::size_t k = 0; k < bound.extractor.size(); ++k) {
        collect_mlp_grads(tape, bound.extractor[k], out);
        collect_mlp_grads(tape, bound.classifier[k], out);
        collect_mlp_grads(tape, bound.discriminator[k], out);
    }
}

}  // namespace

int TrainConfig::scaled_stage1() const {
    return static_cast<int>(std::llround(stage1_steps * step_scale));
}

int TrainConfig::scaled_stage2() const {
    return static_cast<int>(std::llround(stage2_steps * step_scale));
}

void TrainConfig::validate() const {
    if (mode != "source_only" && mode != "adversarial_only" && mode != "adversarial_ir" &&
        mode != "supervised_target") {
        throw ConfigError("unknown mode: " + mode);
    }
    if (stage1_steps < 0 || stage2_steps < 0) throw ConfigError("step counts must be non-negative");
    if (!(step_scale > 0.0)) throw ConfigError("step_scale must be positive");
    if (scaled_stage1() + scaled_stage2() < 1) throw ConfigError("training needs at least one step");
    if (!(stage1_lr > 0.0) || !(stage2_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (dqn_lr < 0.0) throw ConfigError("dqn_lr must be non-negative");
    if (stage1_batch < 1) throw ConfigError("stage1_batch must be positive");
    if (stage2_batch < 2 || stage2_batch % 2 != 0) throw ConfigError("stage2_batch must be even");
    if (candidate_size < 2) throw ConfigError("candidate_size must be at least 2");
    if ((stage2_batch / 2) % candidate_size != 0) {
        throw ConfigError("half of stage2_batch must divide into candidate sets exactly");
    }
    if (terminal_E < 0 || terminal_E >= candidate_size) {
        throw ConfigError("terminal_E must lie in [0, candidate_size)");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(tau_s >= 0.0 && tau_s <= 1.0) || !(tau_t >= 0.0 && tau_t <= 1.0)) {
        throw ConfigError("relevance thresholds must lie in [0, 1]");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("model dimensions must be positive");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be positive");
    if (dqn_minibatch < 1) throw ConfigError("dqn_minibatch must be positive");
    if (eval_every < 1) throw ConfigError("eval_every must be positive");
    if (last_m < 1) throw ConfigError("last_m must be positive");
    for (const std::string& tag : agents_disabled) {
        if (!valid_agent_tag(tag)) throw ConfigError("bad agent tag: " + tag);
    }
}

std::string TrainConfig::to_json() const {
    json j;
    j["stage1_steps"] = stage1_steps;
    j["stage2_steps"] = stage2_steps;
    j["step_scale"] = step_scale;
    j["stage1_lr"] = stage1_lr;
    j["stage2_lr"] = stage2_lr;
    j["stage1_batch"] = stage1_batch;
    j["stage2_batch"] = stage2_batch;
    j["gamma"] = gamma;
    j["epsilon"] = epsilon;
    j["epsilon_decay"] = epsilon_decay;
    j["tau_s"] = tau_s;
    j["tau_t"] = tau_t;
    j["terminal_E"] = terminal_E;
    j["candidate_size"] = candidate_size;
    j["grl_scale"] = grl_scale;
    j["weight_decay"] = weight_decay;
    j["dropout"] = dropout;
    j["embed_dim"] = embed_dim;
    j["hidden_dim"] = hidden_dim;
    j["leaky_slope"] = leaky_slope;
    j["replay_capacity"] = replay_capacity;
    j["dqn_minibatch"] = dqn_minibatch;
    j["dqn_lr"] = dqn_lr;
    j["eval_every"] = eval_every;
    j["last_m"] = last_m;
    j["dump_masks"] = dump_masks;
    j["reward_after_update"] = reward_after_update;
    j["refine_affects_cls"] = refine_affects_cls;
    j["seed"] = seed;
    j["mode"] = mode;
    j["scenario"] = scenario;
    j["label"] = label;
    j["agents_disabled"] = agents_disabled;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");

    TrainConfig c;
    try {
        for (const auto& item : j.items()) {
            const std::string& key = item.key();
            const json& v = item.value();
            if (key == "stage1_steps") c.stage1_steps = v.get<int>();
            else if (key == "stage2_steps") c.stage2_steps = v.get<int>();
            else if (key == "step_scale") c.step_scale = v.get<double>();
            else if (key == "stage1_lr") c.stage1_lr = v.get<double>();
            else if (key == "stage2_lr") c.stage2_lr = v.get<double>();
            else if (key == "stage1_batch") c.stage1_batch = v.get<int>();
            else if (key == "stage2_batch") c.stage2_batch = v.get<int>();
            else if (key == "gamma") c.gamma = v.get<double>();
            else if (key == "epsilon") c.epsilon = v.get<double>();
            else if (key == "epsilon_decay") c.epsilon_decay = v.get<bool>();
            else if (key == "tau_s") c.tau_s = v.get<double>();
            else if (key == "tau_t") c.tau_t = v.get<double>();
            else if (key == "terminal_E") c.terminal_E = v.get<int>();
            else if (key == "candidate_size") c.candidate_size = v.get<int>();
            else if (key == "grl_scale") c.grl_scale = v.get<double>();
            else if (key == "weight_decay") c.weight_decay = v.get<double>();
            else if (key == "dropout") c.dropout = v.get<double>();
            else if (key == "embed_dim") c.embed_dim = v.get<int>();
            else if (key == "hidden_dim") c.hidden_dim = v.get<int>();
            else if (key == "leaky_slope") c.leaky_slope = v.get<double>();
            else if (key == "replay_capacity") c.replay_capacity = v.get<int>();
            else if (key == "dqn_minibatch") c.dqn_minibatch = v.get<int>();
            else if (key == "dqn_lr") c.dqn_lr = v.get<double>();
            else if (key == "eval_every") c.eval_every = v.get<int>();
            else if (key == "last_m") c.last_m = v.get<int>();
            else if (key == "dump_masks") c.dump_masks = v.get<bool>();
            else if (key == "reward_after_update") c.reward_after_update = v.get<bool>();
            else if (key == "refine_affects_cls") c.refine_affects_cls = v.get<bool>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "mode") c.mode = v.get<std::string>();
            else if (key == "scenario") c.scenario = v.get<std::string>();
            else if (key == "label") c.label = v.get<std::string>();
            else if (key == "agents_disabled") c.agents_disabled = v.get<std::vector<std::string>>();
            else throw ConfigError("unknown train config key: " + key);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad train config value: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open train config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

ModelLossParts build_model_loss(diff::Tape& tape, const TwoStreamModel::Bound& bound,
                                const TwoStreamModel& model,
                                const std::vector<const Segment*>& cls_batch,
                                const std::vector<std::vector<const Segment*>>& adv_source,
                                const std::vector<std::vector<const Segment*>>& adv_target,
                                Rng* dropout_rng) {
    const int K = model.config().modalities;
    const auto Ku = static_cast<std::size_t>(K);
    const bool with_adv = !adv_source.empty() || !adv_target.empty();
    if (with_adv && (adv_source.size() != Ku || adv_target.size() != Ku)) {
        throw DimensionError("adversarial halves need one list per modality");
    }
    const bool train = dropout_rng != nullptr;

    // one embedding per (segment, modality); both loss terms share it
    std::unordered_map<const Segment*, std::vector<diff::Value>> cache;
    const auto embed_of = [&](const Segment* seg, int k) {
        std::vector<diff::Value>& slots = cache[seg];
        if (slots.empty()) slots.resize(Ku);
        const auto ku = static_cast<std::size_t>(k);
        if (!slots[ku].valid()) slots[ku] = model.embed(tape, bound, *seg, k, train, dropout_rng);
        return slots[ku];
    };

    ModelLossParts parts;
    parts.cls = tape.scalar_input(0.0);
    for (const Segment* seg : cls_batch) {
        if (seg->domain != Domain::Source) throw ContractError("loss_cls received a target segment");
        if (!seg->label.has_value()) throw ContractError("loss_cls received an unlabeled segment");
        diff::Value fused;
        for (int k = 0; k < K; ++k) {
            diff::Value logits = model.class_logits(tape, bound, embed_of(seg, k), k);
            fused = fused.valid() ? tape.add(fused, logits) : logits;
        }
        parts.cls = tape.add(
            parts.cls, tape.softmax_cross_entropy(fused, static_cast<std::size_t>(*seg->label)));
    }

    parts.adv = tape.scalar_input(0.0);
    if (with_adv) {
        for (int k = 0; k < K; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            for (const Segment* seg : adv_source[ku]) {
                diff::Value logit = model.domain_logit(tape, bound, embed_of(seg, k), k);
                parts.adv = tape.add(parts.adv, tape.bce_with_logits(logit, kSourceDomainLabel));
            }
            for (const Segment* seg : adv_target[ku]) {
                diff::Value logit = model.domain_logit(tape, bound, embed_of(seg, k), k);
                parts.adv = tape.add(parts.adv, tape.bce_with_logits(logit, kTargetDomainLabel));
            }
        }
    }
    parts.total = tape.add(parts.cls, parts.adv);
    return parts;
}

double composed_stage2_loss(TwoStreamModel& model, const std::vector<QAgent*>& agents,
                            const ComposedLossInputs& in, std::vector<Tensor2D>* grads_out,
                            double* kink_clearance) {
    diff::Tape tape;
    const TwoStreamModel::Bound bound = model.bind(tape);
    Rng drop_rng(in.dropout_seed);
    ModelLossParts parts =
        build_model_loss(tape, bound, model, in.cls_batch, in.adv_source, in.adv_target,
                         in.use_dropout ? &drop_rng : nullptr);
    diff::Value total = parts.total;

    std::vector<Mlp::Bound> agent_bounds;
    agent_bounds.reserve(agents.size());
    for (std::size_t a = 0; a < agents.size(); ++a) {
        agent_bounds.push_back(agents[a]->qnet().bind(tape));
        if (a < in.agent_minibatches.size() && !in.agent_minibatches[a].empty()) {
            total = tape.add(
                total, agents[a]->dqn_loss(tape, agent_bounds[a], in.agent_minibatches[a], in.gamma));
        }
    }

    if (kink_clearance != nullptr) *kink_clearance = tape.min_kink_clearance();
    if (grads_out != nullptr) {
        tape.backward(total);
        grads_out->clear();
        collect_model_grads(tape, bound, *grads_out);
        for (const Mlp::Bound& ab : agent_bounds) collect_mlp_grads(tape, ab, *grads_out);
    }
    return tape.value(total).data[0];
}

namespace {

// Whole-run state for one training invocation.
class Trainer {
public:
    Trainer(const TrainConfig& cfg, const Dataset& data, std::string out_dir)
        : cfg_(cfg),
          data_(data),
          out_dir_(std::move(out_dir)),
          K_(data.spec.modalities),
          model_(make_model_config(cfg, data), stream_seed(cfg.seed, kStreamModelInit)),
          refine_rng_(stream_seed(cfg.seed, kStreamRefine)),
          replay_rng_(stream_seed(cfg.seed, kStreamReplay)) {
        cfg_.validate();
        if (data_.spec.num_classes < 2) throw ConfigError("dataset has too few classes");
        adam_.weight_decay = cfg_.weight_decay;

        if (cfg_.mode == "adversarial_ir") {
            for (const std::string& tag : cfg_.agents_disabled) {
                const int k = std::stoi(tag.substr(1));
                if (k >= K_) throw ConfigError("agent tag outside the modality range: " + tag);
            }
            const auto n_c = static_cast<std::size_t>(cfg_.candidate_size);
            const auto ed = static_cast<std::size_t>(cfg_.embed_dim);
            const auto hd = static_cast<std::size_t>(cfg_.hidden_dim);
            for (int pass = 0; pass < 2; ++pass) {
                const Domain dom = pass == 0 ? Domain::Source : Domain::Target;
                for (int k = 0; k < K_; ++k) {
                    AgentId id{dom, k};
                    const auto idx = static_cast<std::uint64_t>(agents_.size());
                    agents_.push_back(std::make_unique<QAgent>(
                        id, ed, n_c, hd, stream_seed(cfg_.seed, kStreamAgentInit + idx),
                        static_cast<std::size_t>(cfg_.replay_capacity), cfg_.weight_decay));
                    bool disabled = false;
                    for (const std::string& tag : cfg_.agents_disabled) {
                        if (tag == id.tag()) disabled = true;
                    }
                    active_.push_back(!disabled);
                }
            }
        }
        agent_step_rewards_.resize(agents_.size());
        sel_removed_.assign(agents_.size(), 0);
        sel_removed_neg_.assign(agents_.size(), 0);
        sel_neg_seen_.assign(agents_.size(), 0);
    }

    TrainResult run() {
        const int s1 = cfg_.scaled_stage1();
        const int total = s1 + cfg_.scaled_stage2();

        std::unique_ptr<BatchIterator> iter1;
        std::unique_ptr<BatchIterator> iter2;
        if (cfg_.mode == "supervised_target") {
            iter1 = std::make_unique<BatchIterator>(data_, cfg_.stage1_batch,
                                                    stream_seed(cfg_.seed, kStreamStage1Iter),
                                                    BatchMode::TargetOnly);
        } else {
            if (cfg_.mode == "source_only" || s1 > 0) {
                iter1 = std::make_unique<BatchIterator>(data_, cfg_.stage1_batch,
                                                        stream_seed(cfg_.seed, kStreamStage1Iter),
                                                        BatchMode::SourceOnly);
            }
            if (cfg_.mode != "source_only" && cfg_.scaled_stage2() > 0) {
                iter2 = std::make_unique<BatchIterator>(data_, cfg_.stage2_batch,
                                                        stream_seed(cfg_.seed, kStreamStage2Iter),
                                                        BatchMode::Mixed);
            }
        }

        metrics_ << header_line();
        masks_ << "step,modality,domain,segment_id,removed_flag,relevance,reward\n";

        TrainResult result;
        for (int step = 1; step <= total; ++step) {
            const int stage = step <= s1 ? 1 : 2;
            const double lr = stage == 1 ? cfg_.stage1_lr : cfg_.stage2_lr;
            const bool adversarial_step =
                stage == 2 && (cfg_.mode == "adversarial_only" || cfg_.mode == "adversarial_ir");
            try {
                if (adversarial_step) {
                    stage2_step(step, *iter2, lr);
                } else {
                    plain_step(step, *iter1, lr, stage);
                }
            } catch (const StateError& e) {
                if (!out_dir_.empty()) {
                    const std::string path = out_dir_ + "/checkpoint_lastgood.json";
                    save_checkpoint(path, config_hash(), all_params());
                    std::fprintf(stderr, "error: %s at step %d; parameters saved to %s\n",
                                 e.what(), step, path.c_str());
                }
                throw;
            }

            const bool eval_now = (step % cfg_.eval_every == 0) || step == total;
            if (eval_now) {
                const double acc = model_.top1_accuracy(data_);
                result.evals.push_back({step, acc});
                finish_row(acc);
            } else {
                finish_row(std::nullopt);
            }

            if (step == s1 && !out_dir_.empty()) {
                save_checkpoint(out_dir_ + "/checkpoint_stage1.json", config_hash(), all_params());
            }
        }

        const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(cfg_.last_m),
                                                    result.evals.size());
        double acc_sum = 0.0;
        for (std::size_t i = result.evals.size() - m; i < result.evals.size(); ++i) {
            acc_sum += result.evals[i].accuracy;
        }
        result.final_accuracy = m > 0 ? acc_sum / static_cast<double>(m) : 0.0;
        result.out_dir = out_dir_;

        if (!out_dir_.empty()) {
            save_checkpoint(out_dir_ + "/checkpoint_final.json", config_hash(), all_params());
            write_file(out_dir_ + "/metrics.csv", metrics_.str());
            if (cfg_.dump_masks) write_file(out_dir_ + "/masks.csv", masks_.str());
            write_summary(result);
        }
        return result;
    }

private:
    static ModelConfig make_model_config(const TrainConfig& cfg, const Dataset& data) {
        ModelConfig mc;
        mc.num_classes = data.spec.num_classes;
        mc.modalities = data.spec.modalities;
        mc.feature_dim = data.spec.feature_dim;
        mc.embed_dim = cfg.embed_dim;
        mc.hidden_dim = cfg.hidden_dim;
        mc.dropout_rate = cfg.dropout;
        mc.leaky_slope = cfg.leaky_slope;
        mc.grl_scale = cfg.grl_scale;
        return mc;
    }

    std::string config_hash() const { return fnv1a_hex(cfg_.to_json()); }

    std::vector<diff::ParamRef> all_params() {
        std::vector<diff::ParamRef> refs = model_.params();
        for (auto& agent : agents_) {
            for (auto& r : agent->params()) refs.push_back(r);
        }
        return refs;
    }

    std::string header_line() const {
        std::string h = "step,stage,lr,loss_cls,loss_adv,loss_dqn";
        for (const std::string& tag : agent_tags()) h += ",reward_" + tag;
        h += ",acc";
        for (const std::string& tag : agent_tags()) h += ",prec_" + tag + ",rec_" + tag;
        return h + "\n";
    }

    std::vector<std::string> agent_tags() const {
        std::vector<std::string> tags;
        for (int k = 0; k < K_; ++k) tags.push_back("s" + std::to_string(k));
        for (int k = 0; k < K_; ++k) tags.push_back("t" + std::to_string(k));
        return tags;
    }

    // row state filled by the step functions, flushed by finish_row
    struct Row {
        int step = 0;
        int stage = 1;
        double lr = 0.0;
        std::optional<double> loss_cls, loss_adv, loss_dqn;
    };

    void begin_row(int step, int stage, double lr) {
        row_ = Row{};
        row_.step = step;
        row_.stage = stage;
        row_.lr = lr;
        for (auto& r : agent_step_rewards_) r.reset();
    }

    void finish_row(std::optional<double> acc) {
        metrics_ << row_.step << ',' << row_.stage << ',' << fmt(row_.lr);
        const auto cell = [&](const std::optional<double>& v) {
            metrics_ << ',';
            if (v.has_value()) metrics_ << fmt(*v);
        };
        cell(row_.loss_cls);
        cell(row_.loss_adv);
        cell(row_.loss_dqn);
        // the 2K reward and 2x2K precision/recall columns exist in every
        // mode; modes without agents leave them empty
        const auto slots = static_cast<std::size_t>(2 * K_);
        for (std::size_t a = 0; a < slots; ++a) {
            cell(a < agent_step_rewards_.size() ? agent_step_rewards_[a] : std::nullopt);
        }
        cell(acc);
        for (std::size_t a = 0; a < slots; ++a) {
            std::optional<double> prec, rec;
            if (acc.has_value() && a < agents_.size() && sel_removed_[a] > 0) {
                prec = static_cast<double>(sel_removed_neg_[a]) /
                       static_cast<double>(sel_removed_[a]);
                if (sel_neg_seen_[a] > 0) {
                    rec = static_cast<double>(sel_removed_neg_[a]) /
                          static_cast<double>(sel_neg_seen_[a]);
                }
            }
            cell(prec);
            cell(rec);
        }
        metrics_ << '\n';
        if (acc.has_value()) {
            std::fill(sel_removed_.begin(), sel_removed_.end(), 0);
            std::fill(sel_removed_neg_.begin(), sel_removed_neg_.end(), 0);
            std::fill(sel_neg_seen_.begin(), sel_neg_seen_.end(), 0);
        }
    }

    // stage-1 style step: one loss term, one optimizer update
    void plain_step(int step, BatchIterator& iter, double lr, int stage) {
        begin_row(step, stage, lr);
        const Batch batch = iter.next();
        Rng drop_rng(stream_seed(stream_seed(cfg_.seed, kStreamDropout),
                                 static_cast<std::uint64_t>(step)));

        diff::Tape tape;
        const TwoStreamModel::Bound bound = model_.bind(tape);
        diff::Value loss;
        if (cfg_.mode == "supervised_target") {
            // the sanctioned consumer of hidden labels: the ceiling run
            loss = tape.scalar_input(0.0);
            for (std::size_t idx : batch.target) {
                diff::Value fused =
                    model_.fused_logits(tape, bound, data_.target[idx], true, &drop_rng);
                loss = tape.add(loss, tape.softmax_cross_entropy(
                                          fused, static_cast<std::size_t>(data_.eval_label(idx))));
            }
        } else {
            std::vector<const Segment*> segs;
            segs.reserve(batch.source.size());
            for (std::size_t idx : batch.source) segs.push_back(&data_.source[idx]);
            loss = build_model_loss(tape, bound, model_, segs, {}, {}, &drop_rng).cls;
        }
        tape.backward(loss);
        std::vector<Tensor2D> grads;
        collect_model_grads(tape, bound, grads);
        apply_model_update(grads, lr);
        row_.loss_cls = tape.value(loss).data[0];
    }

    void stage2_step(int step, BatchIterator& iter, double lr) {
        begin_row(step, 2, lr);
        const Batch batch = iter.next();
        const auto half = batch.source.size();

        std::vector<const Segment*> src_ptrs, tgt_ptrs;
        for (std::size_t idx : batch.source) src_ptrs.push_back(&data_.source[idx]);
        for (std::size_t idx : batch.target) tgt_ptrs.push_back(&data_.target[idx]);

        const bool refining = cfg_.mode == "adversarial_ir";

        // deterministic embeddings for agent states and rewards, dropout off
        std::vector<std::vector<std::vector<double>>> embeds_s(static_cast<std::size_t>(K_));
        std::vector<std::vector<std::vector<double>>> embeds_t(static_cast<std::size_t>(K_));
        if (refining) {
            for (int k = 0; k < K_; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                for (const Segment* seg : src_ptrs) embeds_s[ku].push_back(model_.eval_embed(*seg, k));
                for (const Segment* seg : tgt_ptrs) embeds_t[ku].push_back(model_.eval_embed(*seg, k));
            }
        }

        // refinement; disabled agents neither act nor draw randomness
        std::vector<std::vector<char>> keep_s(static_cast<std::size_t>(K_)),
            keep_t(static_cast<std::size_t>(K_));
        std::vector<std::vector<Transition>> step_transitions(agents_.size());
        const double eps = stage2_epsilon(step);
        for (int k = 0; k < K_; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            keep_s[ku].assign(half, 1);
            keep_t[ku].assign(half, 1);
            if (!refining) continue;
            const std::size_t s_idx = ku;
            const std::size_t t_idx = static_cast<std::size_t>(K_) + ku;
            if (active_[s_idx]) {
                RefineResult r = refine_halfbatch(
                    *agents_[s_idx], embeds_s[ku], static_cast<std::size_t>(cfg_.candidate_size),
                    static_cast<std::size_t>(cfg_.terminal_E), eps,
                    reward_fn(embeds_s[ku], k, Domain::Source), refine_rng_);
                keep_s[ku] = std::move(r.keep);
                step_transitions[s_idx] = std::move(r.transitions);
            }
            if (active_[t_idx]) {
                RefineResult r = refine_halfbatch(
                    *agents_[t_idx], embeds_t[ku], static_cast<std::size_t>(cfg_.candidate_size),
                    static_cast<std::size_t>(cfg_.terminal_E), eps,
                    reward_fn(embeds_t[ku], k, Domain::Target), refine_rng_);
                keep_t[ku] = std::move(r.keep);
                step_transitions[t_idx] = std::move(r.transitions);
            }
        }

        // classification sees the full source half unless configured otherwise
        std::vector<const Segment*> cls_batch;
        if (cfg_.refine_affects_cls && refining) {
            for (std::size_t i = 0; i < half; ++i) {
                bool kept = true;
                for (int k = 0; k < K_; ++k) {
                    if (!keep_s[static_cast<std::size_t>(k)][i]) kept = false;
                }
                if (kept) cls_batch.push_back(src_ptrs[i]);
            }
        } else {
            cls_batch = src_ptrs;
        }

        std::vector<std::vector<const Segment*>> adv_s(static_cast<std::size_t>(K_)),
            adv_t(static_cast<std::size_t>(K_));
        for (int k = 0; k < K_; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            for (std::size_t i = 0; i < half; ++i) {
                if (keep_s[ku][i]) adv_s[ku].push_back(src_ptrs[i]);
            }
            for (std::size_t i = 0; i < batch.target.size(); ++i) {
                if (keep_t[ku][i]) adv_t[ku].push_back(tgt_ptrs[i]);
            }
        }

        Rng drop_rng(stream_seed(stream_seed(cfg_.seed, kStreamDropout),
                                 static_cast<std::uint64_t>(step)));
        diff::Tape tape;
        const TwoStreamModel::Bound bound = model_.bind(tape);
        ModelLossParts parts =
            build_model_loss(tape, bound, model_, cls_batch, adv_s, adv_t, &drop_rng);
        tape.backward(parts.total);
        std::vector<Tensor2D> grads;
        collect_model_grads(tape, bound, grads);
        apply_model_update(grads, lr);

        if (refining && cfg_.reward_after_update) {
            patch_rewards_after_update(step_transitions, embeds_s, embeds_t);
        }

        // agent updates, then per-step bookkeeping
        std::vector<std::optional<double>> agent_losses(agents_.size());
        const double dqn_lr = cfg_.dqn_lr > 0.0 ? cfg_.dqn_lr : cfg_.stage2_lr;
        for (std::size_t a = 0; a < agents_.size(); ++a) {
            if (!active_[a]) continue;
            agent_losses[a] = agents_[a]->dqn_update(
                static_cast<std::size_t>(cfg_.dqn_minibatch), cfg_.gamma, dqn_lr, replay_rng_);
            if (!step_transitions[a].empty()) {
                double sum = 0.0;
                for (const Transition& t : step_transitions[a]) sum += t.reward;
                agent_step_rewards_[a] = sum / static_cast<double>(step_transitions[a].size());
            }
        }

        row_.loss_cls = tape.value(parts.cls).data[0];
        row_.loss_adv = tape.value(parts.adv).data[0];
        if (refining) {
            bool any = false;
            for (const auto& l : agent_losses) {
                if (l.has_value()) any = true;
            }
            if (any) row_.loss_dqn = total_dqn_loss(agent_losses);
        }

        if (refining) record_selection(step, batch, keep_s, keep_t, embeds_s, embeds_t);
    }

    double stage2_epsilon(int step) const {
        if (!cfg_.epsilon_decay) return cfg_.epsilon;
        const int s1 = cfg_.scaled_stage1();
        const int s2 = std::max(1, cfg_.scaled_stage2());
        const double progress = static_cast<double>(step - s1 - 1) / static_cast<double>(s2);
        return cfg_.epsilon * (1.0 - progress);
    }

    RewardFn reward_fn(const std::vector<std::vector<double>>& embeds, int k, Domain dom) {
        if (cfg_.reward_after_update) {
            // placeholder; real outcomes are back-patched after the model update
            return [](std::size_t) { return RewardOutcome{}; };
        }
        const double tau = dom == Domain::Source ? cfg_.tau_s : cfg_.tau_t;
        TwoStreamModel* model = &model_;
        return [model, &embeds, k, dom, tau](std::size_t pos) {
            const double logit = model->domain_logit_from_embed(embeds[pos], k);
            const double rel = relevance_from_logit(logit, dom);
            return RewardOutcome{logit, rel, reward_from_relevance(rel, tau)};
        };
    }

    void patch_rewards_after_update(std::vector<std::vector<Transition>>& step_transitions,
                                    const std::vector<std::vector<std::vector<double>>>& embeds_s,
                                    const std::vector<std::vector<std::vector<double>>>& embeds_t) {
        for (std::size_t a = 0; a < agents_.size(); ++a) {
            std::vector<Transition>& trans = step_transitions[a];
            if (trans.empty()) continue;
            const bool is_source = a < static_cast<std::size_t>(K_);
            const int k = static_cast<int>(is_source ? a : a - static_cast<std::size_t>(K_));
            const auto& embeds = is_source ? embeds_s[static_cast<std::size_t>(k)]
                                           : embeds_t[static_cast<std::size_t>(k)];
            const Domain dom = is_source ? Domain::Source : Domain::Target;
            const double tau = is_source ? cfg_.tau_s : cfg_.tau_t;
            ReplayBuffer& buf = agents_[a]->replay();
            for (std::size_t j = 0; j < trans.size(); ++j) {
                const double logit =
                    model_.domain_logit_from_embed(embeds[trans[j].half_pos], k);
                const double rel = relevance_from_logit(logit, dom);
                const double reward = reward_from_relevance(rel, tau);
                trans[j].logit = logit;
                trans[j].relevance = rel;
                trans[j].reward = reward;
                Transition& stored = buf.item(buf.size() - trans.size() + j);
                stored.logit = logit;
                stored.relevance = rel;
                stored.reward = reward;
            }
        }
    }

    void record_selection(int step, const Batch& batch,
                          const std::vector<std::vector<char>>& keep_s,
                          const std::vector<std::vector<char>>& keep_t,
                          const std::vector<std::vector<std::vector<double>>>& embeds_s,
                          const std::vector<std::vector<std::vector<double>>>& embeds_t) {
        for (int k = 0; k < K_; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const std::size_t s_idx = ku;
            const std::size_t t_idx = static_cast<std::size_t>(K_) + ku;
            if (active_[s_idx]) {
                tally_half(step, k, Domain::Source, s_idx, batch.source, keep_s[ku], embeds_s[ku]);
            }
            if (active_[t_idx]) {
                tally_half(step, k, Domain::Target, t_idx, batch.target, keep_t[ku], embeds_t[ku]);
            }
        }
    }

    void tally_half(int step, int k, Domain dom, std::size_t agent_idx,
                    const std::vector<std::size_t>& half, const std::vector<char>& keep,
                    const std::vector<std::vector<double>>& embeds) {
        const double tau = dom == Domain::Source ? cfg_.tau_s : cfg_.tau_t;
        for (std::size_t i = 0; i < half.size(); ++i) {
            const Segment& seg =
                dom == Domain::Source ? data_.source[half[i]] : data_.target[half[i]];
            const bool removed = !keep[i];
            if (removed) {
                ++sel_removed_[agent_idx];
                if (seg.is_negative) ++sel_removed_neg_[agent_idx];
            }
            if (seg.is_negative) ++sel_neg_seen_[agent_idx];
            if (cfg_.dump_masks) {
                const double logit = model_.domain_logit_from_embed(embeds[i], k);
                const double rel = relevance_from_logit(logit, dom);
                masks_ << step << ',' << k << ',' << domain_name(dom) << ',' << seg.id << ','
                       << (removed ? 1 : 0) << ',' << fmt(rel) << ','
                       << fmt(reward_from_relevance(rel, tau)) << '\n';
            }
        }
    }

    void apply_model_update(const std::vector<Tensor2D>& grads, double lr) {
        std::vector<diff::ParamRef> refs = model_.params();
        if (refs.size() != grads.size()) throw StateError("model gradient count mismatch");
        for (std::size_t i = 0; i < refs.size(); ++i) {
            diff::adam_step(*refs[i].value, grads[i], *refs[i].state, lr, adam_);
        }
    }

    void write_summary(const TrainResult& result) {
        json j;
        j["format_version"] = 1;
        j["mode"] = cfg_.mode;
        j["label"] = cfg_.label.empty() ? cfg_.mode : cfg_.label;
        j["scenario"] = cfg_.scenario;
        j["seed"] = cfg_.seed;
        j["final_accuracy"] = result.final_accuracy;
        json evals = json::array();
        for (const EvalPoint& e : result.evals) evals.push_back({e.step, e.accuracy});
        j["evals"] = std::move(evals);
        j["config"] = json::parse(cfg_.to_json());
        write_file(out_dir_ + "/summary.json", j.dump() + "\n");
    }

    static void write_file(const std::string& path, const std::string& content) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open output file: " + path);
        out << content;
        if (!out) throw IoError("failed writing output file: " + path);
    }

    TrainConfig cfg_;
    const Dataset& data_;
    std::string out_dir_;
    int K_;
    TwoStreamModel model_;
    diff::AdamConfig adam_;
    std::vector<std::unique_ptr<QAgent>> agents_;  // s0..s{K-1}, then t0..t{K-1}
    std::vector<bool> active_;
    Rng refine_rng_;
    Rng replay_rng_;

    std::ostringstream metrics_;
    std::ostringstream masks_;
    Row row_;
    std::vector<std::optional<double>> agent_step_rewards_;
    // selection tallies since the last evaluation row
    std::vector<std::size_t> sel_removed_, sel_removed_neg_, sel_neg_seen_;
};

}  // namespace

TrainResult train_run(const TrainConfig& cfg, const Dataset& data, const std::string& out_dir) {
    cfg.validate();
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    Trainer trainer(cfg, data, out_dir);
    return trainer.run();
}

std::vector<AblationRow> run_ablation_suite(const TrainConfig& base, const Dataset& data,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::string& out_root) {
    if (seeds.size() < 3) throw ConfigError("the ablation suite needs at least 3 seeds");
    const int K = data.spec.modalities;

    std::vector<std::pair<std::string, TrainConfig>> variants;
    const auto add = [&](const std::string& label, const std::string& mode,
                         std::vector<std::string> disabled) {
        TrainConfig cfg = base;
        cfg.mode = mode;
        cfg.label = label;
        cfg.agents_disabled = std::move(disabled);
        variants.emplace_back(label, std::move(cfg));
    };
    add("source_only", "source_only", {});
    add("adversarial_only", "adversarial_only", {});
    add("adversarial_ir", "adversarial_ir", {});
    for (int k = 0; k < K; ++k) {
        add("no_mod" + std::to_string(k) + "_agents", "adversarial_ir",
            {"s" + std::to_string(k), "t" + std::to_string(k)});
    }
    std::vector<std::string> all_s, all_t;
    for (int k = 0; k < K; ++k) {
        all_s.push_back("s" + std::to_string(k));
        all_t.push_back("t" + std::to_string(k));
    }
    add("no_s_agents", "adversarial_ir", all_s);
    add("no_t_agents", "adversarial_ir", all_t);
    add("supervised_target", "supervised_target", {});

    std::vector<AblationRow> rows;
    for (auto& [label, cfg] : variants) {
        for (std::uint64_t seed : seeds) {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = seed;
            std::string dir;
            if (!out_root.empty()) {
                dir = out_root + "/" + label + "/seed_" + std::to_string(seed);
            }
            const TrainResult res = train_run(run_cfg, data, dir);
            rows.push_back({label, seed, res.final_accuracy});
        }
    }

    if (!out_root.empty()) {
        std::ostringstream csv;
        csv << "label,seed,accuracy\n";
        for (const AblationRow& r : rows) {
            csv << r.label << ',' << r.seed << ',' << fmt(r.accuracy) << '\n';
        }
        std::ofstream out(out_root + "/ablation.csv", std::ios::binary);
        if (!out) throw IoError("cannot open ablation summary for writing");
        out << csv.str();
    }
    return rows;
}

double supervised_upper_bound(const TrainConfig& cfg, const Dataset& data,
                              const std::string& out_dir) {
    TrainConfig run_cfg = cfg;
    run_cfg.mode = "supervised_target";
    if (run_cfg.label.empty()) run_cfg.label = "supervised_target";
    return train_run(run_cfg, data, out_dir).final_accuracy;
}

}  // namespace irda
