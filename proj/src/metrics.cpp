#include "tollsim/metrics.hpp"

#include <json.hpp>

namespace tollsim {

using ojson = nlohmann::ordered_json;

namespace {

ojson report_to_json(const MetricsReport& r) {
    ojson j;
    j["schema"] = "tollsim-metrics-v1";

    ojson summary;
    summary["ticks"] = r.ticks;
    summary["pricing_mode"] = r.pricing_mode;
    summary["total_supply"] = r.total_supply;
    summary["blocks"] = r.blocks;
    summary["settlement_count"] = r.settlement_count;
    summary["settlement_failure_count"] = r.settlement_failure_count;
    summary["mean_settlement_latency_ticks"] = r.mean_settlement_latency;
    summary["negotiation_count"] = r.negotiation_count;
    summary["mean_negotiation_rounds"] = r.mean_negotiation_rounds;
    ojson outcomes;
    outcomes["agreed"] = r.agreed_count;
    outcomes["fallback_economic"] = r.fallback_count;
    outcomes["refused"] = r.refused_count;
    summary["outcomes"] = std::move(outcomes);
    ojson revenue;
    for (const auto& [id, amount] : r.toll_revenue) revenue[id] = amount;
    summary["toll_revenue"] = std::move(revenue);
    ojson spend;
    for (const auto& [id, amount] : r.vehicle_spend) spend[id] = amount;
    summary["vehicle_spend"] = std::move(spend);
    ojson finals;
    for (const auto& [id, amount] : r.final_balances) finals[id] = amount;
    summary["final_balances"] = std::move(finals);
    ojson conservation;
    conservation["balance_sum"] = r.balance_sum;
    conservation["total_supply"] = r.total_supply;
    summary["conservation"] = std::move(conservation);
    ojson shares;
    for (const auto& [bucket, share] : r.lane_share_by_pref) {
        shares[bucket] = ojson{{"Fast", share.fast}, {"Economic", share.economic}};
    }
    summary["lane_share_by_pref"] = std::move(shares);
    ojson utilities;
    for (const auto& [id, u] : r.per_vehicle_mean_utility) utilities[id] = u;
    summary["per_vehicle_mean_utility"] = std::move(utilities);
    summary["mean_vehicle_utility"] = r.mean_vehicle_utility;
    summary["final_chain_hash"] = to_hex(r.final_chain_hash);
    j["summary"] = std::move(summary);

    ojson ticks = ojson::array();
    for (const TickSample& s : r.per_tick) {
        ojson row;
        row["tick"] = s.tick;
        row["count"] = ojson{{"Fast", s.lane_count.fast}, {"Economic", s.lane_count.economic}};
        row["density"] = ojson{{"Fast", s.density.fast}, {"Economic", s.density.economic}};
        ojson quotes;
        for (const auto& [id, q] : s.toll_quotes)
            quotes[id] = ojson{{"Fast", q.fast}, {"Economic", q.economic}};
        row["quotes"] = std::move(quotes);
        ojson balances;
        for (const auto& [id, b] : s.balances) balances[id] = b;
        row["balances"] = std::move(balances);
        ticks.push_back(std::move(row));
    }
    j["per_tick"] = std::move(ticks);

    ojson negotiations = ojson::array();
    for (const NegotiationEvent& e : r.negotiations) {
        ojson row;
        row["vehicle"] = e.vehicle;
        row["toll"] = e.toll;
        row["open_tick"] = e.open_tick;
        row["close_tick"] = e.close_tick;
        row["bid_lane"] = to_string(e.bid_lane);
        row["result"] = to_string(e.result);
        if (e.result != NegotiationResult::Refused) {
            row["settled_lane"] = to_string(e.settled_lane);
            row["price"] = e.price;
            row["utility"] = e.utility;
        } else {
            row["reason"] = e.reason;
        }
        row["rounds_used"] = e.rounds_used;
        row["offers_fast"] = e.offers_fast;
        row["offers_economic"] = e.offers_economic;
        row["timed_out"] = e.timed_out;
        negotiations.push_back(std::move(row));
    }
    j["negotiations"] = std::move(negotiations);

    ojson settlements = ojson::array();
    for (const SettlementEvent& e : r.settlements) {
        ojson row;
        row["tick"] = e.tick;
        row["acceptance_tick"] = e.acceptance_tick;
        row["latency_ticks"] = e.latency_ticks;
        row["vehicle"] = e.vehicle;
        row["toll"] = e.toll;
        row["lane"] = to_string(e.lane);
        row["amount"] = e.amount;
        row["quote"] = e.quote;
        row["reserve"] = e.reserve;
        row["rho_at_quote"] = e.rho_at_quote;
        row["height"] = e.height;
        row["tx_id"] = to_hex(e.tx_id);
        row["utility"] = e.utility;
        settlements.push_back(std::move(row));
    }
    j["settlements"] = std::move(settlements);

    return j;
}

Result<std::string, MetricsError> csv_from_doc(const ojson& doc) {
    auto per_tick_it = doc.find("per_tick");
    if (per_tick_it == doc.end() || !per_tick_it->is_array())
        return MetricsError{"metrics document has no per_tick series"};
    const ojson& rows = *per_tick_it;

    // Header columns come from the first row; all rows share the layout.
    std::vector<std::string> toll_ids;
    std::vector<std::string> account_ids;
    if (!rows.empty()) {
        const ojson& first = rows.front();
        if (first.contains("quotes"))
            for (auto it = first["quotes"].begin(); it != first["quotes"].end(); ++it)
                toll_ids.push_back(it.key());
        if (first.contains("balances"))
            for (auto it = first["balances"].begin(); it != first["balances"].end(); ++it)
                account_ids.push_back(it.key());
    }

    std::string out = "tick,count_fast,count_economic,density_fast,density_economic";
    for (const std::string& id : toll_ids) out += ",quote_fast_" + id + ",quote_economic_" + id;
    for (const std::string& id : account_ids) out += ",balance_" + id;
    out += '\n';

    for (const ojson& row : rows) {
        out += row.at("tick").dump();
        out += ',';
        out += row.at("count").at("Fast").dump();
        out += ',';
        out += row.at("count").at("Economic").dump();
        out += ',';
        out += row.at("density").at("Fast").dump();
        out += ',';
        out += row.at("density").at("Economic").dump();
        for (const std::string& id : toll_ids) {
            out += ',';
            out += row.at("quotes").at(id).at("Fast").dump();
            out += ',';
            out += row.at("quotes").at(id).at("Economic").dump();
        }
        for (const std::string& id : account_ids) {
            out += ',';
            out += row.at("balances").at(id).dump();
        }
        out += '\n';
    }
    return out;
}

}  // namespace

Result<std::string, MetricsError> export_metrics(const MetricsReport& report,
                                                 const std::string& format) {
    if (format == "json") return report_to_json(report).dump(2) + "\n";
    if (format == "csv") return csv_from_doc(report_to_json(report));
    return MetricsError{"UnsupportedFormat: " + format};
}

Result<std::string, MetricsError> metrics_csv_from_json(const std::string& metrics_json) {
    ojson doc = ojson::parse(metrics_json, nullptr, false);
    if (doc.is_discarded()) return MetricsError{"metrics document is not valid JSON"};
    return csv_from_doc(doc);
}

}  // namespace tollsim
