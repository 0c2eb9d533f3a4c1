#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <set>
#include <sstream>
#include <vector>

#include "rslaq/ransim.hpp"
#include "rslaq/rng.hpp"

using namespace rslaq;

namespace {

SimConfig quiet_config() {
    SimConfig cfg;
    cfg.initial_bler = 0.0;
    cfg.retx_bler = 0.0;
    cfg.cqi_walk_step_prob = 0.0;
    return cfg;
}

std::string serialize_stats(const FrameStats& fs) {
    std::ostringstream os;
    os << fs.frame << '|' << fs.dl_prbs_available << '|';
    for (const auto& u : fs.ue)
        os << u.arrivals << ',' << u.btx << ',' << u.delivered << ',' << u.tdp << ','
           << u.buffer_end << ',' << u.queued_end << ',' << u.prbs << ';';
    for (int p : fs.slice_prbs) os << p << ':';
    return os.str();
}

}  // namespace

TEST_CASE("spectral efficiency table anchors and monotonicity") {
    CHECK_THAT(Simulator::spectral_efficiency(1), Catch::Matchers::WithinAbs(0.1523, 1e-12));
    CHECK_THAT(Simulator::spectral_efficiency(15), Catch::Matchers::WithinAbs(5.5547, 1e-12));
    for (int c = 2; c <= 15; ++c)
        REQUIRE(Simulator::spectral_efficiency(c) > Simulator::spectral_efficiency(c - 1));
    REQUIRE_THROWS_AS(Simulator::spectral_efficiency(0), std::out_of_range);
    REQUIRE_THROWS_AS(Simulator::spectral_efficiency(16), std::out_of_range);
}

TEST_CASE("transport block sizes floor the capacity integral") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 1);
    CHECK(sim.tb_bytes(15, 50) == 6249);  // floor(5.5547 * 50 * 180e3 * 1e-3 / 8)
    CHECK(sim.tb_bytes(1, 1) == 3);       // floor(0.1523 * 180e3 * 1e-3 / 8) = 3.42 -> 3
    CHECK(sim.tb_bytes(11, 1) == 74);
    CHECK(sim.tb_bytes(15, 0) == 0);
}

TEST_CASE("tdd pattern fixes per-slot budgets") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 1);
    // Special slot carries 8 of 14 symbols downlink: round(50 * 8/14) = 29.
    std::vector<int> expect = {50, 50, 29, 0, 0, 50, 50, 29, 0, 0};
    for (int s = 0; s < 10; ++s) REQUIRE(sim.dl_prb_budget(s) == expect[s]);
    REQUIRE(sim.dl_prbs_per_frame() == 258);

    cfg.tdd_pattern = "DDDDD";
    Simulator all_dl(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 1);
    REQUIRE(all_dl.dl_prbs_per_frame() == 500);

    cfg.tdd_pattern = "UUUUU";
    REQUIRE_THROWS_AS(Simulator(cfg, {UeConfig{}}, 1), std::invalid_argument);
    cfg.tdd_pattern = "DXU";
    REQUIRE_THROWS_AS(Simulator(cfg, {UeConfig{}}, 1), std::invalid_argument);
    cfg.tdd_pattern = "";
    REQUIRE_THROWS_AS(Simulator(cfg, {UeConfig{}}, 1), std::invalid_argument);
}

TEST_CASE("cbr arrivals carry fractional bytes exactly") {
    SimConfig cfg = quiet_config();
    // 500 kbit/s = 62.5 bytes per 1 ms slot.
    Simulator sim(cfg, {UeConfig{0, 5e5, ArrivalModel::cbr, 1u << 30, 15}}, 7);
    std::uint64_t total = 0;
    for (int f = 0; f < 100; ++f) total += sim.step_frame({1.0}, Scheduler::RR).ue[0].arrivals;
    REQUIRE(total == 62500);  // 62.5 * 10 * 100, exact
}

TEST_CASE("poisson arrivals match the configured mean") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 1e6, ArrivalModel::poisson, 1u << 30, 15}}, 9);
    double total = 0;
    const int frames = 2000;
    for (int f = 0; f < frames; ++f) total += sim.step_frame({1.0}, Scheduler::RR).ue[0].arrivals;
    double mean = 1e6 / 8.0 * 0.01 * frames;  // bytes over the whole run
    CHECK_THAT(total, Catch::Matchers::WithinRel(mean, 0.01));
}

TEST_CASE("error-free saturated frame delivers the tabulated bytes") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 1u << 30, 15}}, 3);
    sim.offer_bytes(0, 1u << 29);
    FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
    // Two 50-PRB slots and one 29-PRB special slot per half frame:
    // (6249 + 6249 + 3624) * 2
    REQUIRE(fs.ue[0].delivered == 32244);
    REQUIRE(fs.ue[0].btx == 32244);
    REQUIRE(fs.ue[0].tdp == 0);
    REQUIRE(fs.ue[0].prbs == 258);
}

TEST_CASE("transmit hook performs a single attempt") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 3);
    REQUIRE(sim.transmit(0, 50) == 0);  // empty buffer
    sim.offer_bytes(0, 100000);
    REQUIRE(sim.transmit(0, 50) == 6249);
    REQUIRE(sim.ue(0).queued_bytes == 100000 - 6249);
    REQUIRE(sim.transmit(0, 1) == 124);  // floor(124.98)
}

TEST_CASE("certain failure drops every block after one retransmission") {
    SimConfig cfg = quiet_config();
    cfg.initial_bler = 1.0;
    cfg.retx_bler = 1.0;
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 5);
    sim.offer_bytes(0, 20000);
    std::uint64_t btx = 0, delivered = 0, tdp = 0;
    for (int f = 0; f < 10; ++f) {
        FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
        btx += fs.ue[0].btx;
        delivered += fs.ue[0].delivered;
        tdp += fs.ue[0].tdp;
    }
    REQUIRE(sim.ue(0).queued_bytes == 0);
    REQUIRE(sim.ue(0).inflight_bytes == 0);
    REQUIRE(delivered == 0);
    REQUIRE(tdp == 20000);
    REQUIRE(btx == 40000);  // every byte attempted exactly twice
}

TEST_CASE("failed first attempts all succeed on retransmission") {
    SimConfig cfg = quiet_config();
    cfg.initial_bler = 1.0;
    cfg.retx_bler = 0.0;
    cfg.harq_processes_per_ue = 1;
    Simulator sim(cfg, {UeConfig{0, 0.0, ArrivalModel::cbr, 200000, 15}}, 5);
    sim.offer_bytes(0, 10000);
    std::uint64_t btx = 0, delivered = 0, tdp = 0;
    for (int f = 0; f < 20; ++f) {
        FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
        btx += fs.ue[0].btx;
        delivered += fs.ue[0].delivered;
        tdp += fs.ue[0].tdp;
    }
    REQUIRE(delivered == 10000);
    REQUIRE(tdp == 0);
    REQUIRE(btx == 20000);
}

TEST_CASE("per-frame byte conservation holds under fuzz") {
    SimConfig cfg;
    cfg.initial_bler = 0.3;
    cfg.retx_bler = 0.2;
    cfg.cqi_walk_step_prob = 0.3;
    std::vector<UeConfig> ues = {
        {0, 40e6, ArrivalModel::cbr, 20000, 12},   {0, 3e6, ArrivalModel::poisson, 50000, 4},
        {1, 1e6, ArrivalModel::cbr, 3000, 11},     {1, 8e6, ArrivalModel::poisson, 10000, 15},
        {2, 60e6, ArrivalModel::poisson, 15000, 7}, {2, 0.2e6, ArrivalModel::cbr, 200000, 9},
    };
    Simulator sim(cfg, ues, 11);
    Rng plan_rng(77);
    std::vector<std::uint64_t> prev(ues.size(), 0);
    std::vector<Scheduler> scheds = {Scheduler::RR, Scheduler::PF, Scheduler::BCQI};
    for (int f = 0; f < 400; ++f) {
        int a = static_cast<int>(plan_rng.uniform_int(10));
        double p0 = 0.1 * a;
        double p1 = (1.0 - p0) * plan_rng.uniform();
        FrameStats fs = sim.step_frame({p0, p1, 1.0 - p0 - p1},
                                       scheds[plan_rng.uniform_int(3)]);
        for (std::size_t u = 0; u < ues.size(); ++u) {
            std::uint64_t lhs = fs.ue[u].arrivals + prev[u];
            std::uint64_t rhs = fs.ue[u].delivered + fs.ue[u].tdp + fs.ue[u].buffer_end;
            REQUIRE(lhs == rhs);
            prev[u] = fs.ue[u].buffer_end;
        }
    }
}

TEST_CASE("granted resources track the allocation plan") {
    SimConfig cfg = quiet_config();
    std::vector<UeConfig> ues;
    for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 2; ++k) ues.push_back({s, 50e6, ArrivalModel::cbr, 200000, 15});
    Simulator sim(cfg, ues, 21);
    std::vector<std::uint64_t> slice_prbs(3, 0);
    std::uint64_t total = 0;
    for (int f = 0; f < 1000; ++f) {
        FrameStats fs = sim.step_frame({0.6, 0.2, 0.2}, Scheduler::RR);
        for (int s = 0; s < 3; ++s) slice_prbs[s] += fs.slice_prbs[s];
        total += fs.dl_prbs_available;
    }
    CHECK_THAT(double(slice_prbs[0]) / double(total), Catch::Matchers::WithinAbs(0.6, 0.02));
    CHECK_THAT(double(slice_prbs[1]) / double(total), Catch::Matchers::WithinAbs(0.2, 0.02));
    CHECK_THAT(double(slice_prbs[2]) / double(total), Catch::Matchers::WithinAbs(0.2, 0.02));
}

TEST_CASE("draws for an idle slice reoffer proportionally") {
    SimConfig cfg = quiet_config();
    std::vector<UeConfig> ues = {
        {0, 0.0, ArrivalModel::cbr, 200000, 15},
        {1, 50e6, ArrivalModel::cbr, 200000, 15},
        {2, 50e6, ArrivalModel::cbr, 200000, 15},
    };
    Simulator sim(cfg, ues, 23);
    std::vector<std::uint64_t> slice_prbs(3, 0);
    std::uint64_t total = 0;
    for (int f = 0; f < 1000; ++f) {
        FrameStats fs = sim.step_frame({0.6, 0.2, 0.2}, Scheduler::RR);
        for (int s = 0; s < 3; ++s) slice_prbs[s] += fs.slice_prbs[s];
        total += fs.dl_prbs_available;
    }
    REQUIRE(slice_prbs[0] == 0);
    CHECK_THAT(double(slice_prbs[1]) / double(total), Catch::Matchers::WithinAbs(0.5, 0.02));
    CHECK_THAT(double(slice_prbs[2]) / double(total), Catch::Matchers::WithinAbs(0.5, 0.02));
}

TEST_CASE("round robin shares evenly between identical users") {
    SimConfig cfg = quiet_config();
    std::vector<UeConfig> ues(4, UeConfig{0, 50e6, ArrivalModel::cbr, 200000, 10});
    Simulator sim(cfg, ues, 31);
    std::vector<std::uint64_t> delivered(4, 0);
    for (int f = 0; f < 300; ++f) {
        FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
        for (int u = 0; u < 4; ++u) delivered[u] += fs.ue[u].delivered;
    }
    double mean = 0.0;
    for (auto d : delivered) mean += double(d) / 4.0;
    for (auto d : delivered) CHECK_THAT(double(d), Catch::Matchers::WithinRel(mean, 0.05));
}

TEST_CASE("best-cqi starves the weak user while pf serves both") {
    SimConfig cfg = quiet_config();
    std::vector<UeConfig> ues = {
        {0, 50e6, ArrivalModel::cbr, 200000, 15},
        {0, 50e6, ArrivalModel::cbr, 200000, 8},
    };
    std::uint64_t bcqi_low = 0, bcqi_cell = 0, pf_low = 0, pf_cell = 0;
    {
        Simulator sim(cfg, ues, 41);
        for (int f = 0; f < 200; ++f) {
            FrameStats fs = sim.step_frame({1.0}, Scheduler::BCQI);
            bcqi_low += fs.ue[1].delivered;
            bcqi_cell += fs.ue[0].delivered + fs.ue[1].delivered;
            REQUIRE(fs.ue[1].prbs == 0);
        }
    }
    {
        Simulator sim(cfg, ues, 41);
        for (int f = 0; f < 200; ++f) {
            FrameStats fs = sim.step_frame({1.0}, Scheduler::PF);
            pf_low += fs.ue[1].delivered;
            pf_cell += fs.ue[0].delivered + fs.ue[1].delivered;
        }
    }
    REQUIRE(bcqi_low == 0);
    REQUIRE(pf_low > 0);
    REQUIRE(pf_low >= bcqi_low);
    REQUIRE(pf_cell <= bcqi_cell);
}

TEST_CASE("per-user grant limit is enforced") {
    SimConfig cfg = quiet_config();
    cfg.rb_allocation_limit = 10;
    Simulator sim(cfg, {UeConfig{0, 50e6, ArrivalModel::cbr, 200000, 15}}, 51);
    FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
    REQUIRE(fs.ue[0].prbs == 60);  // 10 PRBs in each of the 6 downlink slots
}

TEST_CASE("cqi walk stays clamped and explores") {
    SimConfig cfg = quiet_config();
    cfg.cqi_walk_step_prob = 1.0;
    Simulator sim(cfg, {UeConfig{0, 1e6, ArrivalModel::cbr, 200000, 8}}, 61);
    std::set<int> seen;
    for (int f = 0; f < 200; ++f) {
        sim.step_frame({1.0}, Scheduler::RR);
        int c = sim.ue(0).cqi;
        REQUIRE(c >= 1);
        REQUIRE(c <= 15);
        seen.insert(c);
    }
    REQUIRE(seen.size() >= 5);

    cfg.cqi_walk_step_prob = 0.0;
    Simulator frozen(cfg, {UeConfig{0, 1e6, ArrivalModel::cbr, 200000, 8}}, 61);
    for (int f = 0; f < 20; ++f) {
        frozen.step_frame({1.0}, Scheduler::RR);
        REQUIRE(frozen.ue(0).cqi == 8);
    }
}

TEST_CASE("identical seeds give bit-identical frame streams") {
    SimConfig cfg;
    cfg.initial_bler = 0.2;
    cfg.cqi_walk_step_prob = 0.2;
    std::vector<UeConfig> ues = {
        {0, 10e6, ArrivalModel::poisson, 50000, 12},
        {1, 2e6, ArrivalModel::cbr, 3000, 9},
    };
    Simulator a(cfg, ues, 71), b(cfg, ues, 71);
    for (int f = 0; f < 50; ++f) {
        FrameStats fa = a.step_frame({0.7, 0.3}, Scheduler::PF);
        FrameStats fb = b.step_frame({0.7, 0.3}, Scheduler::PF);
        REQUIRE(serialize_stats(fa) == serialize_stats(fb));
    }
}

TEST_CASE("reset restores initial conditions without reseeding traffic") {
    SimConfig cfg;
    cfg.cqi_walk_step_prob = 0.5;
    Simulator sim(cfg, {UeConfig{0, 10e6, ArrivalModel::cbr, 20000, 9}}, 81);
    for (int f = 0; f < 20; ++f) sim.step_frame({1.0}, Scheduler::RR);
    sim.reset();
    REQUIRE(sim.ue(0).cqi == 9);
    REQUIRE(sim.ue(0).queued_bytes == 0);
    REQUIRE(sim.ue(0).inflight_bytes == 0);
    FrameStats fs = sim.step_frame({1.0}, Scheduler::RR);
    REQUIRE(fs.ue[0].arrivals > 0);
}

TEST_CASE("invalid plans and configs are rejected") {
    SimConfig cfg = quiet_config();
    Simulator sim(cfg, {UeConfig{0, 1e6, ArrivalModel::cbr, 200000, 10}}, 1);
    REQUIRE_THROWS_AS(sim.step_frame({0.5, 0.5}, Scheduler::RR), std::invalid_argument);
    REQUIRE_THROWS_AS(sim.step_frame({0.9}, Scheduler::RR), std::invalid_argument);

    SimConfig bad = cfg;
    bad.num_prbs = 0;
    REQUIRE_THROWS_AS(Simulator(bad, {UeConfig{}}, 1), std::invalid_argument);
    bad = cfg;
    bad.initial_bler = 1.5;
    REQUIRE_THROWS_AS(Simulator(bad, {UeConfig{}}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(Simulator(cfg, {}, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(Simulator(cfg, {UeConfig{0, 1e6, ArrivalModel::cbr, 200000, 0}}, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(Simulator(cfg, {UeConfig{-1, 1e6, ArrivalModel::cbr, 200000, 10}}, 1),
                      std::invalid_argument);
}

TEST_CASE("buffer overflow counts against dropped traffic") {
    SimConfig cfg = quiet_config();
    // 10 Mbit/s into a 2 kB buffer that is never served (zero-share slice 0).
    std::vector<UeConfig> ues = {
        {0, 10e6, ArrivalModel::cbr, 2000, 10},
        {1, 1e6, ArrivalModel::cbr, 200000, 10},
    };
    Simulator sim(cfg, ues, 91);
    std::uint64_t tdp = 0, arrivals = 0;
    for (int f = 0; f < 10; ++f) {
        FrameStats fs = sim.step_frame({0.0, 1.0}, Scheduler::RR);
        tdp += fs.ue[0].tdp;
        arrivals += fs.ue[0].arrivals;
    }
    REQUIRE(sim.ue(0).buffer_bytes() == 2000);
    REQUIRE(tdp == arrivals - 2000);
}
