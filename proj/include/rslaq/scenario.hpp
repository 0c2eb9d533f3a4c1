#pragma once

// Named traffic mixes with their slice policies, plus JSON load/save so runs
// can be reproduced from a single file.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rslaq/policy.hpp"
#include "rslaq/ransim.hpp"

namespace rslaq {

struct SliceLoad {
    std::string name;
    double offered_rate_bps = 0.0;  // total across the slice, split evenly
    int num_ues = 0;
    std::vector<int> cqis;          // cycled over the slice's UEs
    ArrivalModel arrival = ArrivalModel::poisson;
    std::uint64_t buffer_capacity_bytes = 200000;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 1;
    std::vector<SliceLoad> load;
    A1Policy policy;
    SimConfig sim;

    std::vector<UeConfig> roster() const {
        std::vector<UeConfig> out;
        for (std::size_t j = 0; j < load.size(); ++j) {
            const SliceLoad& l = load[j];
            for (int k = 0; k < l.num_ues; ++k) {
                UeConfig ue;
                ue.slice = int(j);
                ue.offered_rate_bps = l.offered_rate_bps / l.num_ues;
                ue.arrival = l.arrival;
                ue.buffer_capacity_bytes = l.buffer_capacity_bytes;
                ue.initial_cqi = l.cqis[k % l.cqis.size()];
                out.push_back(ue);
            }
        }
        return out;
    }

    std::vector<double> weights() const {
        std::vector<double> w;
        for (const auto& s : policy.slices) w.push_back(s.weight);
        return w;
    }
};

namespace detail {

inline const char* arrival_name(ArrivalModel m) {
    return m == ArrivalModel::cbr ? "cbr" : "poisson";
}

inline ArrivalModel arrival_from_name(const std::string& s) {
    if (s == "cbr") return ArrivalModel::cbr;
    if (s == "poisson") return ArrivalModel::poisson;
    throw std::invalid_argument("unknown arrival model '" + s + "'");
}

}  // namespace detail

inline void validate_scenario(const Scenario& sc) {
    if (sc.name.empty()) throw std::invalid_argument("scenario needs a name");
    if (sc.load.empty()) throw std::invalid_argument("scenario needs at least one slice");
    if (sc.load.size() != sc.policy.slices.size())
        throw std::invalid_argument("traffic and a1_policy disagree on the slice count");
    for (std::size_t j = 0; j < sc.load.size(); ++j) {
        const SliceLoad& l = sc.load[j];
        if (l.name != sc.policy.slices[j].name)
            throw std::invalid_argument("traffic slice '" + l.name +
                                        "' does not match policy slice '" +
                                        sc.policy.slices[j].name + "'");
        if (l.offered_rate_bps < 0.0)
            throw std::invalid_argument("slice '" + l.name + "': offered rate must be >= 0");
        if (l.num_ues < 1)
            throw std::invalid_argument("slice '" + l.name + "': need at least one UE");
        if (l.cqis.empty())
            throw std::invalid_argument("slice '" + l.name + "': cqis must not be empty");
        for (int c : l.cqis)
            if (c < 1 || c > 15)
                throw std::invalid_argument("slice '" + l.name + "': cqi out of range");
        if (l.buffer_capacity_bytes == 0)
            throw std::invalid_argument("slice '" + l.name + "': zero buffer capacity");
    }
}

// The five stock mixes share one cell profile and one policy skeleton; only
// offered load and the eMBB throughput band move between them.
inline Scenario preset_scenario(const std::string& name) {
    struct Mix {
        const char* name;
        double embb, urllc, mtc;
        double thr_min, thr_max;
    };
    static const Mix mixes[] = {
        {"low_traffic", 50e3, 1e6, 2e6, 10e6, 15e6},
        {"normal", 70e6, 1e6, 2e6, 10e6, 15e6},
        {"congestion", 100e6, 1e6, 100e6, 10e6, 15e6},
        {"stressed", 100e6, 1e6, 100e6, 20e6, 25e6},
        {"insufficient_resources", 100e6, 2e6, 100e6, 20e6, 25e6},
    };
    const Mix* mix = nullptr;
    for (const Mix& m : mixes)
        if (name == m.name) mix = &m;
    if (!mix) throw std::invalid_argument("unknown scenario '" + name + "'");

    Scenario sc;
    sc.name = mix->name;

    sc.load.resize(3);
    sc.load[0] = {"eMBB", mix->embb, 5, {15}, ArrivalModel::poisson, 200000};
    // Constant-rate arrivals keep the URLLC queue bound tight and testable.
    sc.load[1] = {"URLLC", mix->urllc, 5, {11}, ArrivalModel::cbr, 3000};
    sc.load[2] = {"MTC", mix->mtc, 10, {7, 9, 11, 13, 15}, ArrivalModel::poisson, 200000};

    std::vector<int> priorities = {2, 1, 3};
    std::vector<double> w = weights_from_priorities(priorities);
    sc.policy.slices.resize(3);
    for (int j = 0; j < 3; ++j) {
        sc.policy.slices[j].name = sc.load[j].name;
        sc.policy.slices[j].weight = w[j];
        sc.policy.slices[j].priority = priorities[j];
    }

    SlaSpec embb;
    embb.outage.push_back(
        {"k_out_1", Metric::throughput, Scope::per_slice, Comparator::below_is_violation,
         mix->thr_min});
    embb.soft.push_back(
        {"k_soft_1", Metric::throughput, Scope::per_slice, Comparator::above_is_violation,
         mix->thr_max});
    sc.policy.slices[0].sla = embb;

    SlaSpec urllc;
    urllc.outage.push_back(
        {"k_out_1", Metric::buffer_occupancy, Scope::per_ue, Comparator::above_is_violation,
         0.03});
    sc.policy.slices[1].sla = urllc;
    sc.policy.slices[1].optimization_kpi = OptimizationKpi::minimize_max_buffer;

    // Freeze the channel so SLA math has deterministic capacity, and cap the
    // per-UE grant so a saturated slice cannot vacuum up the whole cell: five
    // eMBB users at 4 PRBs over six downlink-ish slots land mid-band between
    // the 10 and 15 Mbit/s policy lines.
    sc.sim.cqi_walk_step_prob = 0.0;
    sc.sim.rb_allocation_limit = 4;

    validate_scenario(sc);
    return sc;
}

inline std::vector<std::string> preset_names() {
    return {"low_traffic", "normal", "congestion", "stressed", "insufficient_resources"};
}

inline std::string scenario_to_json(const Scenario& sc) {
    nlohmann::json doc;
    doc["name"] = sc.name;
    doc["seed"] = sc.seed;
    doc["traffic"] = nlohmann::json::array();
    for (const SliceLoad& l : sc.load) {
        nlohmann::json t;
        t["slice_name"] = l.name;
        t["offered_rate_bps"] = l.offered_rate_bps;
        t["num_ues"] = l.num_ues;
        t["cqis"] = l.cqis;
        t["arrival"] = detail::arrival_name(l.arrival);
        t["buffer_capacity_bytes"] = l.buffer_capacity_bytes;
        doc["traffic"].push_back(t);
    }
    doc["a1_policy"] = nlohmann::json::parse(serialize_a1_policy(sc.policy));
    nlohmann::json sim;
    sim["num_prbs"] = sc.sim.num_prbs;
    sim["prb_bandwidth_hz"] = sc.sim.prb_bandwidth_hz;
    sim["slot_duration_s"] = sc.sim.slot_duration_s;
    sim["slots_per_frame"] = sc.sim.slots_per_frame;
    sim["tdd_pattern"] = sc.sim.tdd_pattern;
    sim["special_slot_dl_fraction"] = sc.sim.special_slot_dl_fraction;
    sim["carrier_hz"] = sc.sim.carrier_hz;
    sim["rb_allocation_limit"] = sc.sim.rb_allocation_limit;
    sim["initial_bler"] = sc.sim.initial_bler;
    sim["retx_bler"] = sc.sim.retx_bler;
    sim["harq_processes_per_ue"] = sc.sim.harq_processes_per_ue;
    sim["cqi_walk_step_prob"] = sc.sim.cqi_walk_step_prob;
    sim["pf_ewma_tau_s"] = sc.sim.pf_ewma_tau_s;
    doc["sim"] = sim;
    return doc.dump(2) + "\n";
}

inline Scenario scenario_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario is not valid JSON: ") + e.what());
    }
    Scenario sc;
    try {
        if (!doc.is_object()) throw std::invalid_argument("scenario must be a JSON object");
        sc.name = doc.at("name").get<std::string>();
        sc.seed = doc.value("seed", std::uint64_t{1});
        for (const auto& t : doc.at("traffic")) {
            SliceLoad l;
            l.name = t.at("slice_name").get<std::string>();
            l.offered_rate_bps = t.at("offered_rate_bps").get<double>();
            l.num_ues = t.at("num_ues").get<int>();
            l.cqis = t.at("cqis").get<std::vector<int>>();
            l.arrival = detail::arrival_from_name(t.at("arrival").get<std::string>());
            l.buffer_capacity_bytes = t.value("buffer_capacity_bytes", std::uint64_t{200000});
            sc.load.push_back(l);
        }
        sc.policy = parse_a1_policy(doc.at("a1_policy").dump());
        if (doc.contains("sim")) {
            for (const auto& [key, val] : doc["sim"].items()) {
                if (key == "num_prbs") sc.sim.num_prbs = val.get<int>();
                else if (key == "prb_bandwidth_hz") sc.sim.prb_bandwidth_hz = val.get<double>();
                else if (key == "slot_duration_s") sc.sim.slot_duration_s = val.get<double>();
                else if (key == "slots_per_frame") sc.sim.slots_per_frame = val.get<int>();
                else if (key == "tdd_pattern") sc.sim.tdd_pattern = val.get<std::string>();
                else if (key == "special_slot_dl_fraction")
                    sc.sim.special_slot_dl_fraction = val.get<double>();
                else if (key == "carrier_hz") sc.sim.carrier_hz = val.get<double>();
                else if (key == "rb_allocation_limit")
                    sc.sim.rb_allocation_limit = val.get<int>();
                else if (key == "initial_bler") sc.sim.initial_bler = val.get<double>();
                else if (key == "retx_bler") sc.sim.retx_bler = val.get<double>();
                else if (key == "harq_processes_per_ue")
                    sc.sim.harq_processes_per_ue = val.get<int>();
                else if (key == "cqi_walk_step_prob")
                    sc.sim.cqi_walk_step_prob = val.get<double>();
                else if (key == "pf_ewma_tau_s") sc.sim.pf_ewma_tau_s = val.get<double>();
                else
                    throw std::invalid_argument("unknown sim option '" + key + "'");
            }
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("bad scenario: ") + e.what());
    }
    validate_scenario(sc);
    return sc;
}

}  // namespace rslaq
