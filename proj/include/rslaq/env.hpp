#pragma once

// Gym-style wrapper: one step = decode an action, run one radio frame, score
// it against the slice policies.

#include <stdexcept>
#include <utility>
#include <vector>

#include "rslaq/action_space.hpp"
#include "rslaq/ransim.hpp"
#include "rslaq/reward.hpp"
#include "rslaq/scenario.hpp"
#include "rslaq/telemetry.hpp"

namespace rslaq {

class SliceEnv {
public:
    using State = NetworkState;

    // sla_blind drops every SLA so the reward reduces to the raw optimization
    // term; that is the "just maximize" controller used as a benchmark.
    SliceEnv(const Scenario& sc, std::uint64_t seed, bool sla_blind = false)
        : space_(int(sc.load.size())),
          weights_(sc.weights()),
          p_sta_(static_share(weights_)),
          sim_(sc.sim, sc.roster(), seed),
          max_bytes_(max_cell_bytes_per_frame(sc.sim)),
          engine_(make_spec(sc, sla_blind)) {
        last_plan_ = p_sta_;
    }

    NetworkState reset() {
        sim_.reset();
        engine_.reset();
        terminal_ = false;
        record_ = KpmRecord{};
        record_.num_slices = num_slices();
        record_.slice.resize(std::size_t(num_slices()));
        return build_state(record_, max_bytes_);
    }

    std::pair<NetworkState, RewardOutcome> step(int action_id) {
        if (terminal_)
            throw std::logic_error("episode ended; call reset() before stepping again");
        Action act = space_.at(action_id);
        AllocationPlan plan = compose_allocation(p_sta_, act.tenths);
        auto [state, outcome] = step_plan(plan.p_final, act.sched);
        terminal_ = outcome.kind != RewardKind::normal;
        return {state, outcome};
    }

    // Evaluation entry: takes an explicit split, never trips the episode
    // contract, so monitors can stream through outage frames.
    std::pair<NetworkState, RewardOutcome> step_plan(const std::vector<double>& p_final,
                                                     Scheduler sched) {
        FrameStats fs = sim_.step_frame(p_final, sched);
        record_ = collect(sim_, fs);
        outcome_ = engine_.evaluate(record_, sched);
        last_plan_ = p_final;
        last_sched_ = sched;
        return {build_state(record_, max_bytes_), outcome_};
    }

    const ActionSpace& actions() const { return space_; }
    int num_actions() const { return space_.size(); }
    int num_slices() const { return int(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& p_sta() const { return p_sta_; }
    std::vector<double> max_plan() const {
        std::vector<double> m = p_sta_;
        for (double& v : m) v += 0.5;
        return m;
    }
    const std::vector<double>& last_plan() const { return last_plan_; }
    Scheduler last_scheduler() const { return last_sched_; }
    const KpmRecord& last_record() const { return record_; }
    const RewardOutcome& last_outcome() const { return outcome_; }
    bool terminal() const { return terminal_; }
    double max_cell_bytes() const { return max_bytes_; }

private:
    static RewardSpec make_spec(const Scenario& sc, bool sla_blind) {
        RewardSpec spec = make_reward_spec(sc.policy, max_cell_rate_bps(sc.sim));
        if (sla_blind)
            for (auto& s : spec.slices) s.sla.reset();
        return spec;
    }

    ActionSpace space_;
    std::vector<double> weights_;
    std::vector<double> p_sta_;
    Simulator sim_;
    double max_bytes_;
    RewardEngine engine_;
    KpmRecord record_;
    RewardOutcome outcome_;
    std::vector<double> last_plan_;
    Scheduler last_sched_ = Scheduler::RR;
    bool terminal_ = false;
};

}  // namespace rslaq
