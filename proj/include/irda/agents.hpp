#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "irda/nets.hpp"
#include "irda/rng.hpp"
#include "irda/synth.hpp"
#include "irda/tensor.hpp"

namespace irda {

struct AgentId {
    Domain domain = Domain::Source;
    int modality = 0;

    std::string tag() const {  // "s0", "t1", ...
        return std::string(domain == Domain::Source ? "s" : "t") + std::to_string(modality);
    }
};

// N_c half-batch positions plus the removal record of the running episode.
struct CandidateSet {
    std::vector<std::size_t> members;  // positions within the half-batch
    std::vector<char> removed;         // parallel to members

    std::size_t size() const { return members.size(); }
    std::size_t removed_count() const;
};

// Disjoint candidate sets covering [0, half_size), shuffled by rng.
std::vector<CandidateSet> partition_batch(std::size_t half_size, std::size_t n_c, Rng& rng);

// d_f x N_c state matrix; removed members contribute zero columns.
Tensor2D agent_state(const std::vector<std::vector<double>>& embeds, const CandidateSet& cset);

// column-major flatten, member embeddings concatenated in order
Tensor2D flatten_state(const Tensor2D& state);

// relevance of an embedding to the opposite domain, from its domain logit;
// source reads the sigmoid directly, target its complement
double relevance_from_logit(double logit, Domain domain);

// +1 when the relevance falls strictly below tau, else -1
double reward_from_relevance(double relevance, double tau);

struct Transition {
    Tensor2D state;
    std::size_t action = 0;
    double reward = 0.0;
    Tensor2D next_state;
    std::vector<char> next_removed;  // valid-action mask at next_state
    bool terminal = false;
    // reward-time snapshots, for audits and mask dumps
    double logit = 0.0;
    double relevance = 0.0;
    std::size_t half_pos = 0;  // half-batch position of the removed member
};

// Bounded FIFO with uniform sampling without replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 2000);

    void push(Transition t);
    std::vector<const Transition*> sample(std::size_t k, Rng& rng) const;

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return items_[i]; }  // oldest first
    Transition& item(std::size_t i) { return items_[i]; }            // reward back-patching

private:
    std::deque<Transition> items_;
    std::size_t capacity_;
};

struct RewardOutcome {
    double logit = 0.0;
    double relevance = 0.0;
    double reward = 0.0;
};

// maps a half-batch position to its reward-time discriminator readout
using RewardFn = std::function<RewardOutcome(std::size_t half_pos)>;

// One deep-Q selector. Each agent owns its network, optimizer state, and
// replay buffer; the trainer owns the rng streams.
class QAgent {
public:
    QAgent(AgentId id, std::size_t embed_dim, std::size_t n_c, std::size_t hidden,
           std::uint64_t seed, std::size_t replay_capacity = 2000, double weight_decay = 1e-7);

    const AgentId& id() const { return id_; }
    std::size_t candidate_size() const { return n_c_; }

    std::vector<double> q_values(const Tensor2D& state) const;

    // epsilon-greedy over non-removed members; greedy ties go to the lowest index
    std::size_t select_action(const Tensor2D& state, const std::vector<char>& removed,
                              double epsilon, Rng& rng) const;

    double td_target(const Transition& t, double gamma) const;

    // mean squared TD error on an external tape; targets are constants, so no
    // gradient flows through them. Shared by dqn_update and whole-loss checks.
    diff::Value dqn_loss(diff::Tape& tape, const Mlp::Bound& bound,
                         const std::vector<const Transition*>& batch, double gamma) const;

    // one optimizer step on a uniform minibatch; empty buffer skips and
    // reports nullopt, otherwise returns the mean squared TD error
    std::optional<double> dqn_update(std::size_t minibatch, double gamma, double lr, Rng& rng);

    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }
    Mlp& qnet() { return qnet_; }
    std::vector<diff::ParamRef> params();

private:
    AgentId id_;
    std::size_t n_c_;
    Mlp qnet_;
    ReplayBuffer replay_;
    diff::AdamConfig adam_;
};

// Runs one episode of E removals on cset (members stay, removed flags flip),
// appending every transition to the agent's replay buffer.
std::vector<Transition> run_episode(QAgent& agent, CandidateSet& cset,
                                    const std::vector<std::vector<double>>& embeds,
                                    const RewardFn& reward_fn, std::size_t E, double epsilon,
                                    Rng& rng);

struct RefineResult {
    std::vector<char> keep;               // per half-batch position
    std::vector<Transition> transitions;  // copies of what entered the replay
};

// Partition, one episode per candidate set; exactly (half/N_c)*E removals.
RefineResult refine_halfbatch(QAgent& agent, const std::vector<std::vector<double>>& embeds,
                              std::size_t n_c, std::size_t E, double epsilon,
                              const RewardFn& reward_fn, Rng& rng);

// Bookkeeping sum over the agents that actually updated this step.
double total_dqn_loss(const std::vector<std::optional<double>>& per_agent);

}  // namespace irda
