#pragma once

#include <map>
#include <string>
#include <vector>

#include "tollsim/agents.hpp"
#include "tollsim/lane.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/result.hpp"

namespace tollsim {

struct TickSample {
    Tick tick = 0;
    LaneMap<int> lane_count;
    LaneMap<double> density;
    std::vector<std::pair<AccountId, LaneMap<Tokens>>> toll_quotes;  // sorted by toll id
    std::vector<std::pair<AccountId, Tokens>> balances;              // sorted by account id
};

struct SettlementEvent {
    Tick tick = 0;             // block tick
    Tick acceptance_tick = 0;  // toll acceptance tick
    Tick latency_ticks = 0;    // tick - acceptance_tick
    AccountId vehicle;
    AccountId toll;
    Lane lane = Lane::Economic;
    Tokens amount = 0;
    Tokens quote = 0;    // pinned session quote for the settled lane
    Tokens reserve = 0;  // pinned session reserve
    double rho_at_quote = 0.0;
    uint64_t height = 0;
    Digest tx_id{};
    double utility = 0.0;  // achieved utility at the lane's free-flow delay
};

struct LaneShare {
    int64_t fast = 0;
    int64_t economic = 0;
};

struct MetricsReport {
    Tick ticks = 0;
    std::string pricing_mode;
    Tokens total_supply = 0;
    uint64_t blocks = 0;
    int64_t settlement_count = 0;
    int64_t settlement_failure_count = 0;  // reservation design keeps this at zero
    double mean_settlement_latency = 0.0;
    int64_t negotiation_count = 0;
    double mean_negotiation_rounds = 0.0;
    int64_t agreed_count = 0;
    int64_t fallback_count = 0;
    int64_t refused_count = 0;
    std::map<AccountId, Tokens> toll_revenue;
    std::map<AccountId, Tokens> vehicle_spend;
    std::map<AccountId, Tokens> final_balances;
    Tokens balance_sum = 0;
    std::map<std::string, LaneShare> lane_share_by_pref;  // time / cost / balanced
    std::map<AccountId, double> per_vehicle_mean_utility;
    double mean_vehicle_utility = 0.0;  // mean of the per-vehicle means
    Digest final_chain_hash{};
    std::vector<TickSample> per_tick;
    std::vector<NegotiationEvent> negotiations;
    std::vector<SettlementEvent> settlements;
};

struct MetricsError {
    std::string detail;
};

// "json" or "csv"; anything else is UnsupportedFormat. Output is canonical
// and byte-stable for equal inputs.
Result<std::string, MetricsError> export_metrics(const MetricsReport& report,
                                                 const std::string& format);

// CSV of the per-tick series from an already-exported metrics JSON document.
Result<std::string, MetricsError> metrics_csv_from_json(const std::string& metrics_json);

}  // namespace tollsim
