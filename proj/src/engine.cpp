#include "tollsim/engine.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace tollsim {

using ojson = nlohmann::ordered_json;

namespace {

NetworkConfig network_config_for(const ScenarioConfig& cfg) {
    NetworkConfig net = cfg.network;
    net.seed = derive_stream_seed(cfg.seed, "network.drop");
    return net;
}

std::string pref_bucket(const Preferences& prefs) {
    if (prefs.w_time > 0.5) return "time";
    if (prefs.w_time < 0.5) return "cost";
    return "balanced";
}

}  // namespace

Engine::Engine(const ScenarioConfig& cfg) : cfg_(cfg), net_(network_config_for(cfg)) {
    const std::vector<AccountId> toll_ids = cfg.toll_ids();

    std::vector<std::pair<AccountId, Tokens>> funding;
    for (const VehicleSpec& v : cfg.vehicles) funding.emplace_back(v.id, v.balance);
    for (const AccountId& id : toll_ids) funding.emplace_back(id, 0);

    auto genesis_chain = genesis(toll_ids, funding);
    if (!genesis_chain.ok())
        throw std::logic_error("engine: genesis rejected a validated scenario: " +
                               genesis_chain.error().detail);
    chain_ = std::move(genesis_chain).value();

    for (size_t i = 0; i < toll_ids.size(); ++i) {
        TollAgent toll;
        toll.id = toll_ids[i];
        toll.position = cfg.toll_positions[i];
        toll.model = cfg.pricing[i];
        toll.mode = cfg.pricing_mode;
        toll.fixed_table = cfg.fixed_table;
        net_.register_agent(toll.id);
        sites_.push_back({toll.id, toll.position});
        tolls_.push_back(std::move(toll));
    }
    std::sort(tolls_.begin(), tolls_.end(),
              [](const TollAgent& a, const TollAgent& b) { return a.id < b.id; });
    std::sort(sites_.begin(), sites_.end(),
              [](const TollSite& a, const TollSite& b) { return a.id < b.id; });

    for (const VehicleSpec& spec : cfg.vehicles) {
        VehicleAgent v;
        v.id = spec.id;
        v.prefs = Preferences::from_w_time(spec.w_time);
        v.position = spec.start_cell;
        v.lane = spec.start_lane;
        v.balance = spec.balance;
        net_.register_agent(v.id);
        prefs_by_vehicle_[v.id] = v.prefs;
        vehicles_.push_back(std::move(v));
    }
    std::sort(vehicles_.begin(), vehicles_.end(),
              [](const VehicleAgent& a, const VehicleAgent& b) { return a.id < b.id; });
}

LaneMap<int> Engine::lane_counts() const {
    LaneMap<int> counts;
    for (const VehicleAgent& v : vehicles_) ++counts[v.lane];
    return counts;
}

LaneMap<double> Engine::densities() const {
    const LaneMap<int> counts = lane_counts();
    LaneMap<double> rho;
    for (Lane lane : kLanes)
        rho[lane] = std::min(double(counts[lane]) / double(cfg_.track_cells), 1.0);
    return rho;
}

WorldView Engine::make_view(Tick now) const {
    WorldView view;
    view.now = now;
    view.rho = densities();
    view.track_cells = cfg_.track_cells;
    view.tolls = sites_;
    view.delay = cfg_.delay;
    view.norms = cfg_.norms;
    view.movement = cfg_.movement;
    view.max_rounds = cfg_.pricing_mode == PricingMode::Fixed ? 0 : cfg_.max_rounds;
    view.session_timeout = negotiation_timeout_ticks(cfg_.network.latency_ticks, view.max_rounds);
    view.peer_share_period = cfg_.peer_share_period;
    return view;
}

void Engine::step() {
    ++now_;

    // 1. deliver
    std::map<AgentId, std::vector<Envelope>> inbox;
    for (Envelope& env : net_.deliver(now_)) inbox[env.to].push_back(std::move(env));

    for (VehicleAgent& v : vehicles_) v.balance = chain_.state.accounts.at(v.id).balance;

    const WorldView view = make_view(now_);

    // 2. tolls, ascending id
    for (TollAgent& toll : tolls_) {
        auto it = inbox.find(toll.id);
        static const std::vector<Envelope> kEmpty;
        const std::vector<Envelope>& messages = it == inbox.end() ? kEmpty : it->second;
        for (OutMsg& m : toll_step(toll, messages, view, pending_))
            net_.send(toll.id, m.to, std::move(m.payload), now_);
    }

    // 3. vehicles, ascending id
    for (VehicleAgent& v : vehicles_) {
        auto it = inbox.find(v.id);
        static const std::vector<Envelope> kEmpty;
        const std::vector<Envelope>& messages = it == inbox.end() ? kEmpty : it->second;
        for (OutMsg& m : vehicle_step(v, messages, view, negotiations_))
            net_.send(v.id, m.to, std::move(m.payload), now_);
    }

    // 4. seal
    seal_settlements();

    // 5. sample
    sample();
}

void Engine::seal_settlements() {
    if (pending_.empty()) return;

    std::sort(pending_.begin(), pending_.end(),
              [](const AcceptedContract& a, const AcceptedContract& b) {
                  return std::tie(a.contract.vehicle_id, a.contract.toll_id) <
                         std::tie(b.contract.vehicle_id, b.contract.toll_id);
              });

    // Reservations make overdrafts unreachable, but the block must stay
    // atomic, so anything invalid is rejected back to its vehicle before
    // sealing.
    std::vector<AcceptedContract> accepted;
    std::vector<Transaction> txs;
    WalletState scratch = chain_.state;
    for (AcceptedContract& ac : pending_) {
        const AccountId& sender = ac.contract.vehicle_id;
        Transaction tx = make_transaction(sender, ac.contract.toll_id, ac.contract.price,
                                          ac.contract, now_, scratch.accounts.at(sender).nonce + 1);
        auto applied = apply_transaction(scratch, tx);
        if (!applied.ok()) {
            ++settlement_failures_;
            net_.send(ac.contract.toll_id, sender,
                      RejectMsg{ac.contract.lane, RejectReason::SettlementFailed}, now_);
            continue;
        }
        scratch = std::move(applied).value();
        txs.push_back(std::move(tx));
        accepted.push_back(std::move(ac));
    }
    pending_.clear();
    if (txs.empty()) return;

    auto appended = append_block(chain_, txs, now_);
    if (!appended.ok())
        throw std::logic_error("engine: pre-validated block rejected: " + appended.error().detail);
    chain_ = std::move(appended).value();
    const Block& block = chain_.tip();

    for (size_t i = 0; i < accepted.size(); ++i) {
        const AcceptedContract& ac = accepted[i];
        const Transaction& tx = block.transactions[i];

        SettlementEvent event;
        event.tick = block.tick;
        event.acceptance_tick = ac.contract.tick;
        event.latency_ticks = block.tick - ac.contract.tick;
        event.vehicle = ac.contract.vehicle_id;
        event.toll = ac.contract.toll_id;
        event.lane = ac.contract.lane;
        event.amount = ac.contract.price;
        event.quote = ac.quote;
        event.reserve = ac.reserve;
        event.rho_at_quote = ac.rho_at_quote;
        event.height = block.height;
        event.tx_id = tx.tx_id;
        event.utility = vehicle_utility(prefs_by_vehicle_.at(event.vehicle), event.amount,
                                        cfg_.delay.d0[event.lane], cfg_.norms);
        settlements_.push_back(std::move(event));

        net_.send(ac.contract.toll_id, ac.contract.vehicle_id,
                  SettlementNotice{Receipt{block.height, tx.tx_id, block.tick}, ac.contract}, now_);
    }
}

void Engine::sample() {
    TickSample sample;
    sample.tick = now_;
    sample.lane_count = lane_counts();
    sample.density = densities();
    for (const TollAgent& toll : tolls_) {
        LaneMap<Tokens> quotes;
        for (Lane lane : kLanes) {
            quotes[lane] = toll.mode == PricingMode::Fixed
                               ? fixed_quote(toll.fixed_table, lane).value()
                               : quote(toll.model, lane, sample.density[lane]);
        }
        sample.toll_quotes.emplace_back(toll.id, quotes);
    }
    for (const auto& [id, acct] : chain_.state.accounts) sample.balances.emplace_back(id, acct.balance);
    per_tick_.push_back(std::move(sample));
}

void Engine::run_all() {
    for (Tick t = 0; t < cfg_.ticks; ++t) step();
}

RunResult Engine::finish() {
    MetricsReport report;
    report.ticks = cfg_.ticks;
    report.pricing_mode = to_string(cfg_.pricing_mode);
    report.total_supply = chain_.state.total_supply;
    report.blocks = chain_.blocks.size();

    report.settlement_count = int64_t(settlements_.size());
    report.settlement_failure_count = settlement_failures_;
    double latency_sum = 0;
    for (const SettlementEvent& e : settlements_) latency_sum += double(e.latency_ticks);
    report.mean_settlement_latency =
        settlements_.empty() ? 0.0 : latency_sum / double(settlements_.size());

    report.negotiation_count = int64_t(negotiations_.size());
    double rounds_sum = 0;
    for (const NegotiationEvent& e : negotiations_) {
        rounds_sum += double(e.rounds_used);
        switch (e.result) {
            case NegotiationResult::Agreed: ++report.agreed_count; break;
            case NegotiationResult::FallbackEconomic: ++report.fallback_count; break;
            case NegotiationResult::Refused: ++report.refused_count; break;
        }
    }
    report.mean_negotiation_rounds =
        negotiations_.empty() ? 0.0 : rounds_sum / double(negotiations_.size());

    for (const TollAgent& toll : tolls_) report.toll_revenue[toll.id] = 0;
    for (const VehicleAgent& v : vehicles_) {
        report.vehicle_spend[v.id] = 0;
        report.lane_share_by_pref[pref_bucket(v.prefs)];  // bucket present even if empty
    }
    std::map<AccountId, std::pair<double, int64_t>> utility_acc;
    for (const SettlementEvent& e : settlements_) {
        report.toll_revenue[e.toll] += e.amount;
        report.vehicle_spend[e.vehicle] += e.amount;
        auto& [sum, n] = utility_acc[e.vehicle];
        sum += e.utility;
        ++n;

        auto& share = report.lane_share_by_pref[pref_bucket(prefs_by_vehicle_.at(e.vehicle))];
        if (e.lane == Lane::Fast)
            ++share.fast;
        else
            ++share.economic;
    }
    double mean_sum = 0;
    for (const auto& [id, acc] : utility_acc) {
        const double mean = acc.first / double(acc.second);
        report.per_vehicle_mean_utility[id] = mean;
        mean_sum += mean;
    }
    report.mean_vehicle_utility =
        utility_acc.empty() ? 0.0 : mean_sum / double(utility_acc.size());

    for (const auto& [id, acct] : chain_.state.accounts) report.final_balances[id] = acct.balance;
    report.balance_sum = chain_.state.balance_sum();
    report.final_chain_hash = chain_.tip().block_hash;
    report.per_tick = std::move(per_tick_);
    report.negotiations = std::move(negotiations_);
    report.settlements = std::move(settlements_);

    RunResult result;
    result.metrics = std::move(report);
    result.chain = std::move(chain_);
    result.transcript = net_.export_transcript_ndjson();
    return result;
}

RunResult run(const ScenarioConfig& cfg) {
    Engine engine(cfg);
    engine.run_all();
    return engine.finish();
}

// --- mode comparison -------------------------------------------------------------

namespace {

ModeSummary summarize(const RunResult& run, const std::string& mode) {
    ModeSummary s;
    s.mode = mode;
    s.settlement_count = run.metrics.settlement_count;
    for (const SettlementEvent& e : run.metrics.settlements) s.settlement_total += e.amount;
    s.toll_revenue = run.metrics.toll_revenue;
    s.mean_vehicle_utility = run.metrics.mean_vehicle_utility;
    s.per_vehicle_mean_utility = run.metrics.per_vehicle_mean_utility;
    s.lane_share_by_pref = run.metrics.lane_share_by_pref;
    s.mean_negotiation_rounds = run.metrics.mean_negotiation_rounds;
    s.final_chain_hash = run.metrics.final_chain_hash;
    return s;
}

}  // namespace

Result<ComparisonReport, EngineError> compare_modes(const ScenarioConfig& cfg) {
    if (cfg.fixed_table.size() != kLanes.size())
        return EngineError{"MissingFixedTable: scenario lacks a complete fixed_table"};

    ScenarioConfig dyn_cfg = cfg;
    dyn_cfg.pricing_mode = PricingMode::Dynamic;
    ScenarioConfig fix_cfg = cfg;
    fix_cfg.pricing_mode = PricingMode::Fixed;

    const RunResult dyn = run(dyn_cfg);
    const RunResult fix = run(fix_cfg);

    ComparisonReport report;
    report.dynamic_mode = summarize(dyn, "Dynamic");
    report.fixed_mode = summarize(fix, "Fixed");
    report.dynamic_ge_fixed =
        report.dynamic_mode.mean_vehicle_utility >= report.fixed_mode.mean_vehicle_utility;
    for (const auto& [id, dyn_mean] : report.dynamic_mode.per_vehicle_mean_utility) {
        auto it = report.fixed_mode.per_vehicle_mean_utility.find(id);
        if (it == report.fixed_mode.per_vehicle_mean_utility.end()) continue;
        report.per_vehicle_ge[id] = dyn_mean >= it->second;
    }
    return report;
}

std::string export_comparison_json(const ComparisonReport& report) {
    auto mode_json = [](const ModeSummary& s) {
        ojson j;
        j["mode"] = s.mode;
        j["settlement_count"] = s.settlement_count;
        j["settlement_total"] = s.settlement_total;
        ojson revenue;
        for (const auto& [id, amount] : s.toll_revenue) revenue[id] = amount;
        j["toll_revenue"] = std::move(revenue);
        j["mean_vehicle_utility"] = s.mean_vehicle_utility;
        ojson per_vehicle;
        for (const auto& [id, u] : s.per_vehicle_mean_utility) per_vehicle[id] = u;
        j["per_vehicle_mean_utility"] = std::move(per_vehicle);
        ojson shares;
        for (const auto& [bucket, share] : s.lane_share_by_pref)
            shares[bucket] = ojson{{"Fast", share.fast}, {"Economic", share.economic}};
        j["lane_share_by_pref"] = std::move(shares);
        j["mean_negotiation_rounds"] = s.mean_negotiation_rounds;
        j["final_chain_hash"] = to_hex(s.final_chain_hash);
        return j;
    };

    ojson j;
    j["schema"] = "tollsim-compare-v1";
    ojson modes;
    modes["dynamic"] = mode_json(report.dynamic_mode);
    modes["fixed"] = mode_json(report.fixed_mode);
    j["modes"] = std::move(modes);
    ojson verdict;
    verdict["dynamic_mean_utility"] = report.dynamic_mode.mean_vehicle_utility;
    verdict["fixed_mean_utility"] = report.fixed_mode.mean_vehicle_utility;
    verdict["dynamic_ge_fixed"] = report.dynamic_ge_fixed;
    ojson per_vehicle;
    for (const auto& [id, ge] : report.per_vehicle_ge) per_vehicle[id] = ge;
    verdict["per_vehicle_dynamic_ge_fixed"] = std::move(per_vehicle);
    j["verdict"] = std::move(verdict);
    return j.dump(2) + "\n";
}

}  // namespace tollsim
