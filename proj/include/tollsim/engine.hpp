#pragma once

#include <map>
#include <string>
#include <vector>

#include "tollsim/agents.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/metrics.hpp"
#include "tollsim/network.hpp"
#include "tollsim/scenario.hpp"

namespace tollsim {

struct RunResult {
    MetricsReport metrics;
    Chain chain;
    std::string transcript;  // network transcript, NDJSON
};

// Deterministic tick loop. Phase order per tick is normative:
// deliver -> tolls -> vehicles -> seal -> sample.
class Engine {
public:
    explicit Engine(const ScenarioConfig& cfg);

    void step();
    void run_all();
    RunResult finish();

    Tick now() const { return now_; }
    const Chain& chain() const { return chain_; }
    const Network& network() const { return net_; }
    const std::vector<TollAgent>& tolls() const { return tolls_; }
    const std::vector<VehicleAgent>& vehicles() const { return vehicles_; }

private:
    LaneMap<int> lane_counts() const;
    LaneMap<double> densities() const;
    WorldView make_view(Tick now) const;
    void seal_settlements();
    void sample();

    ScenarioConfig cfg_;
    Chain chain_;
    Network net_;
    std::vector<TollAgent> tolls_;        // ascending id order
    std::vector<VehicleAgent> vehicles_;  // ascending id order
    std::vector<TollSite> sites_;
    std::map<AccountId, Preferences> prefs_by_vehicle_;
    Tick now_ = 0;
    std::vector<AcceptedContract> pending_;
    std::vector<NegotiationEvent> negotiations_;
    std::vector<SettlementEvent> settlements_;
    std::vector<TickSample> per_tick_;
    int64_t settlement_failures_ = 0;
};

RunResult run(const ScenarioConfig& cfg);

struct EngineError {
    std::string detail;
};

struct ModeSummary {
    std::string mode;
    int64_t settlement_count = 0;
    Tokens settlement_total = 0;
    std::map<AccountId, Tokens> toll_revenue;
    double mean_vehicle_utility = 0.0;
    std::map<AccountId, double> per_vehicle_mean_utility;
    std::map<std::string, LaneShare> lane_share_by_pref;
    double mean_negotiation_rounds = 0.0;
    Digest final_chain_hash{};
};

struct ComparisonReport {
    ModeSummary dynamic_mode;
    ModeSummary fixed_mode;
    bool dynamic_ge_fixed = false;             // population means
    std::map<AccountId, bool> per_vehicle_ge;  // vehicles settled in both modes
};

// Runs the same scenario and seed under Dynamic and Fixed pricing.
// Fails with MissingFixedTable when the config lacks a complete fixed table.
Result<ComparisonReport, EngineError> compare_modes(const ScenarioConfig& cfg);

std::string export_comparison_json(const ComparisonReport& report);

}  // namespace tollsim
