#pragma once

// Double Q-learning with experience replay: epsilon-greedy rollout, bounded
// FIFO replay, periodic target sync and periodic forced episode resets.
// Generic over the environment and the Q-function backend so the same loop
// drives both the lookup-table tests and the conv net.

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rslaq/nn.hpp"
#include "rslaq/reward.hpp"
#include "rslaq/rng.hpp"

namespace rslaq {

struct Hyperparams {
    int steps = 300;
    int replay_capacity = 500;
    double gamma = 0.85;
    double epsilon0 = 0.1;
    double epsilon_decay = 0.995;
    double epsilon_min = 0.01;
    int batch_size = 32;
    int target_sync_period = 20;
    int forced_reset_period = 300;
    double learning_rate = 1e-3;
    bool double_q = true;
};

inline int select_action(const std::vector<double>& q, double epsilon, Rng& rng) {
    if (q.empty()) throw std::invalid_argument("empty action values");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (rng.uniform() < epsilon) return int(rng.uniform_int(q.size()));
    int best = 0;
    for (int i = 1; i < int(q.size()); ++i)
        if (q[i] > q[best]) best = i;
    return best;
}

inline double td_target(double reward, double gamma, const std::vector<double>& q_online_s2,
                        const std::vector<double>& q_target_s2, bool tstate, bool double_q) {
    if (tstate) return reward;
    if (double_q) {
        int best = 0;
        for (int i = 1; i < int(q_online_s2.size()); ++i)
            if (q_online_s2[i] > q_online_s2[best]) best = i;
        return reward + gamma * q_target_s2[best];
    }
    double best = q_target_s2[0];
    for (double v : q_target_s2) best = std::max(best, v);
    return reward + gamma * best;
}

template <typename S>
struct Experience {
    S s;
    int a = 0;
    double r = 0.0;
    S s2;
    bool tstate = false;
};

template <typename S>
class ReplayBuffer {
  public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity) {
        if (capacity < 1) throw std::invalid_argument("replay capacity must be positive");
    }

    void push(Experience<S> e) {
        buf_.push_back(std::move(e));
        if (int(buf_.size()) > capacity_) buf_.pop_front();
    }

    std::size_t size() const { return buf_.size(); }
    const Experience<S>& operator[](std::size_t i) const { return buf_[i]; }

    std::vector<const Experience<S>*> sample(int k, Rng& rng) const {
        if (buf_.empty()) throw std::logic_error("sampling from an empty buffer");
        std::vector<const Experience<S>*> out;
        out.reserve(k);
        for (int i = 0; i < k; ++i) out.push_back(&buf_[rng.uniform_int(buf_.size())]);
        return out;
    }

  private:
    int capacity_;
    std::deque<Experience<S>> buf_;
};

class TableQ {
  public:
    TableQ(int states, int actions)
        : actions_(actions), q_(states, std::vector<double>(actions, 0.0)) {
        if (states < 1 || actions < 1) throw std::invalid_argument("bad table shape");
    }

    int num_actions() const { return actions_; }
    std::vector<double> predict(const int& s) const { return q_.at(s); }
    std::vector<std::vector<double>> predict_batch(const std::vector<int>& states) const {
        std::vector<std::vector<double>> out;
        out.reserve(states.size());
        for (int s : states) out.push_back(q_.at(s));
        return out;
    }

    double fit(const std::vector<int>& states, const std::vector<int>& actions,
               const std::vector<double>& targets, double lr) {
        double loss = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            double& cell = q_.at(states[i]).at(actions[i]);
            double err = targets[i] - cell;
            loss += err * err;
            cell += lr * err;
        }
        return loss / double(states.size());
    }

    void copy_from(const TableQ& other) { q_ = other.q_; }

  private:
    int actions_;
    std::vector<std::vector<double>> q_;
};

struct TrainStepLog {
    int step = 0;
    int action = 0;
    double reward = 0.0;
    RewardKind kind = RewardKind::normal;
    bool forced_reset = false;
    bool terminal = false;
    double epsilon = 0.0;
    double loss = std::nan("");
};

struct TrainResult {
    std::vector<TrainStepLog> log;
    double final_epsilon = 0.0;
};

template <class Env, class Q>
TrainResult train_agent(Env& env, Q& online, Q& target, ReplayBuffer<typename Env::State>& buffer,
                        const Hyperparams& hp, Rng& rng,
                        const std::function<int(int, int)>& override_action = nullptr,
                        const std::function<void(const TrainStepLog&)>& on_step = nullptr) {
    using State = typename Env::State;
    TrainResult res;
    State s = env.reset();
    double epsilon = hp.epsilon0;
    for (int t = 1; t <= hp.steps; ++t) {
        int a = select_action(online.predict(s), epsilon, rng);
        if (override_action) a = override_action(t, a);
        auto [s2, outcome] = env.step(a);
        bool terminal = outcome.kind != RewardKind::normal;
        bool forced = hp.forced_reset_period > 0 && t % hp.forced_reset_period == 0;
        bool tstate = terminal || forced;
        buffer.push({s, a, outcome.value, s2, tstate});

        double loss = std::nan("");
        if (int(buffer.size()) > hp.batch_size) {
            auto batch = buffer.sample(hp.batch_size, rng);
            std::vector<State> states, nexts;
            std::vector<int> actions;
            states.reserve(batch.size());
            nexts.reserve(batch.size());
            for (const auto* e : batch) {
                states.push_back(e->s);
                nexts.push_back(e->s2);
                actions.push_back(e->a);
            }
            auto q_online_next = online.predict_batch(nexts);
            auto q_target_next = target.predict_batch(nexts);
            std::vector<double> targets(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                targets[i] = td_target(batch[i]->r, hp.gamma, q_online_next[i],
                                       q_target_next[i], batch[i]->tstate, hp.double_q);
            loss = online.fit(states, actions, targets, hp.learning_rate);
            if (std::isnan(loss))
                throw std::runtime_error("training loss diverged at step " +
                                         std::to_string(t));
            epsilon = std::max(hp.epsilon_min, epsilon * hp.epsilon_decay);
        }
        if (hp.target_sync_period > 0 && t % hp.target_sync_period == 0)
            target.copy_from(online);

        TrainStepLog log;
        log.step = t;
        log.action = a;
        log.reward = outcome.value;
        log.kind = outcome.kind;
        log.forced_reset = forced;
        log.terminal = terminal;
        log.epsilon = epsilon;
        log.loss = loss;
        res.log.push_back(log);
        if (on_step) on_step(log);

        s = tstate ? env.reset() : s2;
    }
    res.final_epsilon = epsilon;
    return res;
}

}  // namespace rslaq
