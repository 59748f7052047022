#include "irda/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "irda/common.hpp"

namespace irda {

std::size_t CandidateSet::removed_count() const {
    std::size_t n = 0;
    for (char r : removed)
        if (r) ++n;
    return n;
}

std::vector<CandidateSet> partition_batch(std::size_t half_size, std::size_t n_c, Rng& rng) {
    if (n_c == 0) throw ConfigError("candidate set size must be positive");
    if (half_size == 0 || half_size % n_c != 0) {
        throw ConfigError("half-batch size must be a positive multiple of the candidate set size");
    }
    std::vector<std::size_t> order(half_size);
    for (std::size_t i = 0; i < half_size; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<CandidateSet> sets(half_size / n_c);
    for (std::size_t s = 0; s < sets.size(); ++s) {
        sets[s].members.assign(order.begin() + static_cast<std::ptrdiff_t>(s * n_c),
                               order.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_c));
        sets[s].removed.assign(n_c, 0);
    }
    return sets;
}

Tensor2D agent_state(const std::vector<std::vector<double>>& embeds, const CandidateSet& cset) {
    if (cset.members.size() != cset.removed.size()) {
        throw StateError("candidate set members and removal record differ in size");
    }
    if (cset.members.empty()) throw StateError("candidate set is empty");
    const std::size_t d_f = embeds.empty() ? 0 : embeds[0].size();
    Tensor2D state(d_f, cset.members.size());
    for (std::size_t n = 0; n < cset.members.size(); ++n) {
        if (cset.removed[n]) continue;  // removed members keep their zero column
        const std::size_t pos = cset.members[n];
        if (pos >= embeds.size()) throw IndexError("candidate member outside the half-batch");
        const std::vector<double>& f = embeds[pos];
        if (f.size() != d_f) throw DimensionError("embedding lengths differ within a half-batch");
        for (std::size_t j = 0; j < d_f; ++j) state.at(j, n) = f[j];
    }
    return state;
}

Tensor2D flatten_state(const Tensor2D& state) {
    Tensor2D flat(state.rows * state.cols, 1);
    for (std::size_t n = 0; n < state.cols; ++n) {
        for (std::size_t j = 0; j < state.rows; ++j) {
            flat.data[n * state.rows + j] = state.at(j, n);
        }
    }
    return flat;
}

double relevance_from_logit(double logit, Domain domain) {
    const double s = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                                  : std::exp(logit) / (1.0 + std::exp(logit));
    return domain == Domain::Source ? s : 1.0 - s;
}

double reward_from_relevance(double relevance, double tau) {
    return relevance < tau ? 1.0 : -1.0;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    items_.push_back(std::move(t));
    while (items_.size() > capacity_) items_.pop_front();
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t k, Rng& rng) const {
    const std::size_t n = std::min(k, items_.size());
    std::vector<std::size_t> order(items_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // partial Fisher-Yates; the first n entries are a uniform draw without replacement
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
    }
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[order[i]]);
    return out;
}

QAgent::QAgent(AgentId id, std::size_t embed_dim, std::size_t n_c, std::size_t hidden,
               std::uint64_t seed, std::size_t replay_capacity, double weight_decay)
    : id_(id), n_c_(n_c), replay_(replay_capacity) {
    if (n_c < 2) throw ConfigError("candidate set size must be at least 2");
    Rng init(seed);
    qnet_ = Mlp({embed_dim * n_c, hidden, n_c}, false, 0.01, init, "q" + id.tag());
    // near-zero output head so initial q-values do not drown early reward
    // signal; greedy actions then follow learned value as soon as it appears
    for (diff::ParamRef& p : qnet_.params()) {
        if (p.name.compare(p.name.size() - 3, 3, ".w1") == 0 ||
            p.name.compare(p.name.size() - 3, 3, ".b1") == 0) {
            for (double& x : p.value->data) x *= 0.01;
        }
    }
    adam_.weight_decay = weight_decay;
}

std::vector<double> QAgent::q_values(const Tensor2D& state) const {
    if (state.cols != n_c_) throw DimensionError("agent state has the wrong candidate count");
    return qnet_.forward_eval(flatten_state(state).data);
}

std::size_t QAgent::select_action(const Tensor2D& state, const std::vector<char>& removed,
                                  double epsilon, Rng& rng) const {
    if (removed.size() != n_c_) throw DimensionError("removal record has the wrong size");
    std::vector<std::size_t> valid;
    valid.reserve(n_c_);
    for (std::size_t i = 0; i < n_c_; ++i) {
        if (!removed[i]) valid.push_back(i);
    }
    if (valid.empty()) throw StateError("select_action with every member removed");
    const double lambda = rng.uniform();
    if (lambda >= epsilon) {
        const std::vector<double> q = q_values(state);
        std::size_t best = valid[0];
        for (std::size_t i : valid) {
            if (q[i] > q[best]) best = i;
        }
        return best;
    }
    return valid[rng.uniform_index(valid.size())];
}

double QAgent::td_target(const Transition& t, double gamma) const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (t.terminal) return t.reward;
    const std::vector<double> q = q_values(t.next_state);
    bool any = false;
    double best = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (i < t.next_removed.size() && t.next_removed[i]) continue;
        if (!any || q[i] > best) {
            best = q[i];
            any = true;
        }
    }
    if (!any) throw StateError("td_target next_state has no valid action");
    return t.reward + gamma * best;
}

diff::Value QAgent::dqn_loss(diff::Tape& tape, const Mlp::Bound& bound,
                             const std::vector<const Transition*>& batch, double gamma) const {
    if (batch.empty()) throw StateError("dqn_loss on an empty minibatch");
    diff::Value total = tape.scalar_input(0.0);
    for (const Transition* t : batch) {
        const double y = td_target(*t, gamma);  // constant target, gradient stops here
        diff::Value q = qnet_.forward(tape, bound, tape.input(flatten_state(t->state)));
        diff::Value err = tape.add(tape.pick(q, t->action), tape.scalar_input(-y));
        total = tape.add(total, tape.mul(err, err));
    }
    return tape.scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::optional<double> QAgent::dqn_update(std::size_t minibatch, double gamma, double lr, Rng& rng) {
    if (replay_.size() == 0) {
        std::fprintf(stderr, "note: dqn update skipped for %s, replay buffer empty\n",
                     id_.tag().c_str());
        return std::nullopt;
    }
    if (minibatch == 0) throw ConfigError("dqn minibatch must be positive");
    const std::vector<const Transition*> batch = replay_.sample(minibatch, rng);

    diff::Tape tape;
    const Mlp::Bound bound = qnet_.bind(tape);
    diff::Value loss = dqn_loss(tape, bound, batch, gamma);
    tape.backward(loss);

    std::vector<Tensor2D> wg, bg;
    qnet_.accumulate_grads(tape, bound, wg, bg);
    std::vector<diff::ParamRef> refs = qnet_.params();
    // refs alternate weight, bias per layer, matching accumulate_grads order
    for (std::size_t l = 0; l < wg.size(); ++l) {
        diff::adam_step(*refs[2 * l].value, wg[l], *refs[2 * l].state, lr, adam_);
        diff::adam_step(*refs[2 * l + 1].value, bg[l], *refs[2 * l + 1].state, lr, adam_);
    }
    return tape.value(loss).data[0];
}

std::vector<diff::ParamRef> QAgent::params() { return qnet_.params(); }

std::vector<Transition> run_episode(QAgent& agent, CandidateSet& cset,
                                    const std::vector<std::vector<double>>& embeds,
                                    const RewardFn& reward_fn, std::size_t E, double epsilon,
                                    Rng& rng) {
    if (E >= cset.size()) throw ConfigError("episode length must be below the candidate set size");
    std::vector<Transition> out;
    if (E == 0) return out;
    Tensor2D state = agent_state(embeds, cset);
    for (std::size_t e = 1; e <= E; ++e) {
        const std::size_t action = agent.select_action(state, cset.removed, epsilon, rng);
        Transition t;
        t.state = state;
        t.action = action;
        cset.removed[action] = 1;
        for (std::size_t j = 0; j < state.rows; ++j) state.at(j, action) = 0.0;
        t.next_state = state;
        t.next_removed.assign(cset.removed.begin(), cset.removed.end());
        t.terminal = (e == E);
        t.half_pos = cset.members[action];
        const RewardOutcome outcome = reward_fn(t.half_pos);
        t.logit = outcome.logit;
        t.relevance = outcome.relevance;
        t.reward = outcome.reward;
        agent.replay().push(t);
        out.push_back(std::move(t));
    }
    return out;
}

RefineResult refine_halfbatch(QAgent& agent, const std::vector<std::vector<double>>& embeds,
                              std::size_t n_c, std::size_t E, double epsilon,
                              const RewardFn& reward_fn, Rng& rng) {
    std::vector<CandidateSet> sets = partition_batch(embeds.size(), n_c, rng);
    RefineResult result;
    result.keep.assign(embeds.size(), 1);
    for (CandidateSet& cset : sets) {
        std::vector<Transition> eps = run_episode(agent, cset, embeds, reward_fn, E, epsilon, rng);
        for (std::size_t n = 0; n < cset.size(); ++n) {
            if (cset.removed[n]) result.keep[cset.members[n]] = 0;
        }
        for (Transition& t : eps) result.transitions.push_back(std::move(t));
    }
    return result;
}

double total_dqn_loss(const std::vector<std::optional<double>>& per_agent) {
    double total = 0.0;
    for (const auto& v : per_agent) {
        if (v.has_value()) total += *v;
    }
    return total;
}

}  // namespace irda
