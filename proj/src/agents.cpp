#include "tollsim/agents.hpp"

#include <algorithm>
#include <cmath>

namespace tollsim {

namespace {
constexpr double kCounterofferDelta = 0.3;
}

Preferences Preferences::from_w_time(double w_time) {
    return normalized(w_time, 1.0 - w_time);
}

Preferences Preferences::normalized(double w_time, double w_cost) {
    const double sum = w_time + w_cost;
    if (sum <= 0.0) return Preferences{0.5, 0.5};
    return Preferences{w_time / sum, w_cost / sum};
}

double vehicle_utility(const Preferences& prefs, Tokens price, double delay,
                       const UtilityNorms& norms) {
    return -(prefs.w_cost * double(price) / norms.price_scale +
             prefs.w_time * delay / norms.delay_scale);
}

Result<Lane, AgentError> choose_lane(const Preferences& prefs,
                                     const LaneMap<std::optional<Tokens>>& quotes,
                                     const LaneMap<double>& delays, const UtilityNorms& norms) {
    for (Lane lane : kLanes) {
        if (!quotes[lane])
            return AgentError{AgentErrc::MissingQuote,
                              std::string("no quote for lane ") + to_string(lane)};
    }
    const double u_fast = vehicle_utility(prefs, *quotes.fast, delays.fast, norms);
    const double u_econ = vehicle_utility(prefs, *quotes.economic, delays.economic, norms);
    return u_fast > u_econ ? Lane::Fast : Lane::Economic;
}

Tokens make_counteroffer(const Preferences& prefs, Tokens quoted_price, int round) {
    if (round <= 0) return quoted_price;  // posted-price regime
    const double factor = 1.0 - kCounterofferDelta * prefs.w_cost / double(round);
    return std::max<Tokens>(1, round_half_up(double(quoted_price) * factor));
}

int movement_speed(const MovementParams& params, Lane lane, double rho) {
    const double raw = params.cell_rate[lane] / (1.0 + params.gamma_move * rho);
    return std::max(1, int(std::floor(raw)));
}

Tick negotiation_timeout_ticks(Tick latency, int max_rounds) {
    return 2 * (latency + 1) * (Tick(max_rounds) + 2);
}

const char* to_string(PricingMode mode) {
    return mode == PricingMode::Dynamic ? "Dynamic" : "Fixed";
}

const char* to_string(VehicleState state) {
    switch (state) {
        case VehicleState::Cruising: return "Cruising";
        case VehicleState::AwaitingQuotes: return "AwaitingQuotes";
        case VehicleState::Negotiating: return "Negotiating";
        case VehicleState::AwaitingSettlement: return "AwaitingSettlement";
        case VehicleState::Stalled: return "Stalled";
    }
    return "Unknown";
}

const char* to_string(NegotiationResult result) {
    switch (result) {
        case NegotiationResult::Agreed: return "Agreed";
        case NegotiationResult::FallbackEconomic: return "FallbackEconomic";
        case NegotiationResult::Refused: return "Refused";
    }
    return "Unknown";
}

// --- toll ----------------------------------------------------------------------

namespace {

TollSession open_toll_session(const TollAgent& toll, const AccountId& vehicle_id,
                              const LaneMap<double>& rho, Tick now) {
    TollSession session;
    session.vehicle_id = vehicle_id;
    session.open_tick = now;
    session.density = rho;
    for (Lane lane : kLanes) {
        if (toll.mode == PricingMode::Fixed) {
            auto fixed = fixed_quote(toll.fixed_table, lane);
            const Tokens price = fixed.ok() ? fixed.value() : Tokens(1);
            session.quoted[lane] = price;
            session.reserve[lane] = price;  // posted price, no haggling room
        } else {
            session.quoted[lane] = quote(toll.model, lane, rho[lane]);
            session.reserve[lane] = reserve_price(toll.model, lane, rho[lane]);
        }
    }
    return session;
}

}  // namespace

Result<TollDecision, AgentError> toll_respond(TollAgent& toll, const AccountId& vehicle_id,
                                              const Offer& offer, double /*rho*/, Tick now,
                                              int max_rounds) {
    auto it = toll.sessions.find(vehicle_id);
    if (it == toll.sessions.end())
        return AgentError{AgentErrc::NoSession, "no open session for " + vehicle_id};

    TollSession& session = it->second;
    session.last_round = offer.round;

    TollDecision decision;
    if (offer.price >= session.reserve[offer.lane]) {
        decision.kind = TollDecision::Kind::Accept;
        decision.contract = PassageContract{vehicle_id, toll.id, offer.lane,
                                            offer.price, offer.round, now};
        return decision;
    }
    if (offer.round < max_rounds) {
        decision.kind = TollDecision::Kind::Counter;
        decision.counter_price = session.quoted[offer.lane];
        return decision;
    }
    decision.kind = TollDecision::Kind::Reject;
    decision.reason = RejectReason::RoundsExhausted;
    return decision;
}

std::vector<OutMsg> toll_step(TollAgent& toll, std::span<const Envelope> inbox,
                              const WorldView& view, std::vector<AcceptedContract>& accepted) {
    std::vector<OutMsg> out;

    for (auto it = toll.sessions.begin(); it != toll.sessions.end();) {
        if (view.now - it->second.open_tick > view.session_timeout)
            it = toll.sessions.erase(it);
        else
            ++it;
    }

    for (const Envelope& env : inbox) {
        if (const auto* request = std::get_if<QuoteRequest>(&env.payload)) {
            (void)request;
            TollSession session = open_toll_session(toll, env.from, view.rho, view.now);
            QuoteResponse response{session.quoted, session.density};
            toll.sessions[env.from] = std::move(session);
            out.push_back({env.from, response});
        } else if (const auto* offer = std::get_if<Offer>(&env.payload)) {
            auto responded = toll_respond(toll, env.from, *offer, view.rho[offer->lane], view.now,
                                          view.max_rounds);
            if (!responded.ok()) {
                out.push_back({env.from, RejectMsg{offer->lane, RejectReason::NoSession}});
                continue;
            }
            const TollDecision& decision = responded.value();
            switch (decision.kind) {
                case TollDecision::Kind::Accept: {
                    const TollSession& session = toll.sessions.at(env.from);
                    accepted.push_back({decision.contract, session.quoted[offer->lane],
                                        session.reserve[offer->lane],
                                        session.density[offer->lane]});
                    if (toll.mode == PricingMode::Dynamic)
                        toll.model =
                            update_on_settlement(toll.model, offer->lane, decision.contract.price);
                    out.push_back({env.from, AcceptMsg{decision.contract}});
                    toll.sessions.erase(env.from);
                    break;
                }
                case TollDecision::Kind::Counter:
                    out.push_back({env.from, Offer{offer->lane, decision.counter_price, offer->round}});
                    break;
                case TollDecision::Kind::Reject:
                    // Session stays open: the vehicle may follow up with the
                    // economic fallback offer.
                    out.push_back({env.from, RejectMsg{offer->lane, decision.reason}});
                    break;
            }
        } else if (const auto* share = std::get_if<PeerQuoteShare>(&env.payload)) {
            if (toll.mode == PricingMode::Dynamic) {
                for (Lane lane : kLanes)
                    toll.model = incorporate_peer(toll.model, lane, share->base[lane]);
            }
        }
        // Other message kinds are not addressed to tolls; ignore.
    }

    if (toll.mode == PricingMode::Dynamic && view.peer_share_period > 0 && view.now > 0 &&
        view.now % view.peer_share_period == 0) {
        for (const TollSite& site : view.tolls) {
            if (site.id == toll.id) continue;
            out.push_back({site.id, PeerQuoteShare{toll.model.base}});
        }
    }

    return out;
}

// --- vehicle -------------------------------------------------------------------

namespace {

const TollSite* toll_at(const WorldView& view, int position) {
    for (const TollSite& site : view.tolls)
        if (site.position == position) return &site;
    return nullptr;
}

void open_vehicle_session(VehicleAgent& vehicle, const AccountId& toll_id, const WorldView& view,
                          std::vector<OutMsg>& out) {
    VehicleSession session;
    session.toll_id = toll_id;
    session.open_tick = view.now;
    session.deadline = view.now + view.session_timeout;
    vehicle.pending = std::move(session);
    vehicle.state = VehicleState::AwaitingQuotes;
    out.push_back({toll_id, QuoteRequest{{Lane::Fast, Lane::Economic}}});
}

void close_refused(VehicleAgent& vehicle, const WorldView& view,
                   std::vector<NegotiationEvent>& events, bool timed_out, std::string reason) {
    const VehicleSession& s = *vehicle.pending;
    NegotiationEvent event;
    event.vehicle = vehicle.id;
    event.toll = s.toll_id;
    event.open_tick = s.open_tick;
    event.close_tick = view.now;
    event.bid_lane = s.bid_lane;
    event.result = NegotiationResult::Refused;
    event.rounds_used = s.round;
    event.offers_fast = s.offers_fast;
    event.offers_economic = s.offers_economic;
    event.timed_out = timed_out;
    event.reason = std::move(reason);
    events.push_back(std::move(event));
    vehicle.pending.reset();
    vehicle.state = VehicleState::Stalled;
    vehicle.stall_tick = view.now;
}

void send_offer(VehicleAgent& vehicle, Lane lane, Tokens price, int round,
                std::vector<OutMsg>& out) {
    VehicleSession& s = *vehicle.pending;
    s.bid_lane = lane;
    s.round = round;
    s.reserved = price;
    if (lane == Lane::Fast)
        ++s.offers_fast;
    else
        ++s.offers_economic;
    vehicle.state = VehicleState::Negotiating;
    out.push_back({s.toll_id, Offer{lane, price, round}});
}

}  // namespace

std::vector<OutMsg> vehicle_step(VehicleAgent& vehicle, std::span<const Envelope> inbox,
                                 const WorldView& view, std::vector<NegotiationEvent>& events) {
    std::vector<OutMsg> out;

    for (const Envelope& env : inbox) {
        if (!vehicle.pending || env.from != vehicle.pending->toll_id) continue;
        VehicleSession& s = *vehicle.pending;

        if (const auto* quotes = std::get_if<QuoteResponse>(&env.payload)) {
            if (vehicle.state != VehicleState::AwaitingQuotes) continue;
            s.quoted = quotes->price;
            s.density = quotes->density;
            s.have_quotes = true;

            LaneMap<std::optional<Tokens>> quoted;
            LaneMap<double> delays;
            for (Lane lane : kLanes) {
                quoted[lane] = quotes->price[lane];
                delays[lane] = expected_delay(view.delay, lane, quotes->density[lane]);
            }
            Lane choice = choose_lane(vehicle.prefs, quoted, delays, view.norms).value();
            const Tokens budget = vehicle.available_balance();
            if (quotes->price[choice] > budget) {
                const Lane alt = other_lane(choice);
                if (quotes->price[alt] <= budget) {
                    choice = alt;
                } else {
                    close_refused(vehicle, view, events, false, "insolvent");
                    continue;
                }
            }
            const int round = view.max_rounds == 0 ? 0 : 1;
            const Tokens price = view.max_rounds == 0
                                     ? quotes->price[choice]
                                     : make_counteroffer(vehicle.prefs, quotes->price[choice], 1);
            send_offer(vehicle, choice, price, round, out);
        } else if (std::get_if<Offer>(&env.payload)) {
            // Toll counteroffer; move to the next round of our schedule.
            if (vehicle.state != VehicleState::Negotiating) continue;
            const int next_round = s.round + 1;
            if (next_round > view.max_rounds) continue;  // stale counter
            const Tokens price = make_counteroffer(vehicle.prefs, s.quoted[s.bid_lane], next_round);
            send_offer(vehicle, s.bid_lane, price, next_round, out);
        } else if (const auto* accept = std::get_if<AcceptMsg>(&env.payload)) {
            if (vehicle.state != VehicleState::Negotiating) continue;
            s.reserved = accept->contract.price;
            vehicle.state = VehicleState::AwaitingSettlement;
        } else if (const auto* reject = std::get_if<RejectMsg>(&env.payload)) {
            if (vehicle.state != VehicleState::Negotiating) continue;
            if (reject->reason == RejectReason::SettlementFailed) {
                close_refused(vehicle, view, events, false, "settlement-failed");
                continue;
            }
            s.reserved = 0;  // rejected offer no longer holds funds
            if (!s.fallback_used && s.have_quotes &&
                s.quoted.economic <= vehicle.available_balance()) {
                // Rejected at the table: take the economic lane at its posted
                // price, once.
                s.fallback_used = true;
                send_offer(vehicle, Lane::Economic, s.quoted.economic, s.round, out);
            } else {
                close_refused(vehicle, view, events, false, "rejected");
            }
        } else if (const auto* notice = std::get_if<SettlementNotice>(&env.payload)) {
            // Passage complete; honor the notice regardless of local state,
            // the ledger already settled.
            NegotiationEvent event;
            event.vehicle = vehicle.id;
            event.toll = s.toll_id;
            event.open_tick = s.open_tick;
            event.close_tick = view.now;
            event.bid_lane = s.bid_lane;
            event.result = s.fallback_used ? NegotiationResult::FallbackEconomic
                                           : NegotiationResult::Agreed;
            event.settled_lane = notice->contract.lane;
            event.price = notice->contract.price;
            event.rounds_used = notice->contract.negotiated_rounds;
            event.offers_fast = s.offers_fast;
            event.offers_economic = s.offers_economic;
            event.utility = vehicle_utility(vehicle.prefs, notice->contract.price,
                                            view.delay.d0[notice->contract.lane], view.norms);
            events.push_back(std::move(event));
            vehicle.lane = notice->contract.lane;
            vehicle.pending.reset();
            vehicle.state = VehicleState::Cruising;
        }
    }

    if (vehicle.pending && view.now >= vehicle.pending->deadline)
        close_refused(vehicle, view, events, true, "timeout");

    if (vehicle.state == VehicleState::Stalled) {
        if (view.now > vehicle.stall_tick) {
            if (const TollSite* site = toll_at(view, vehicle.position)) {
                open_vehicle_session(vehicle, site->id, view, out);
            } else {
                vehicle.state = VehicleState::Cruising;  // not at a toll; resume
            }
        }
    } else if (vehicle.state == VehicleState::Cruising) {
        const int speed = movement_speed(view.movement, vehicle.lane, view.rho[vehicle.lane]);
        bool stopped = false;
        for (int step = 1; step <= speed; ++step) {
            const int cell = (vehicle.position + step) % view.track_cells;
            if (const TollSite* site = toll_at(view, cell)) {
                vehicle.position = cell;
                open_vehicle_session(vehicle, site->id, view, out);
                stopped = true;
                break;
            }
        }
        if (!stopped) vehicle.position = (vehicle.position + speed) % view.track_cells;
    }

    return out;
}

// --- standalone negotiation ------------------------------------------------------

NegotiationOutcome run_negotiation(VehicleAgent& vehicle, TollAgent& toll,
                                   const LaneMap<double>& rho_by_lane, int max_rounds,
                                   const NetworkConfig& net_cfg) {
    Network net(net_cfg);
    net.register_agent(vehicle.id);
    net.register_agent(toll.id);

    WorldView view;
    view.rho = rho_by_lane;
    view.track_cells = std::max(1, toll.position + 1);
    view.tolls = {{toll.id, toll.position}};
    view.max_rounds = toll.mode == PricingMode::Fixed ? 0 : max_rounds;
    view.session_timeout = negotiation_timeout_ticks(net_cfg.latency_ticks, max_rounds);

    vehicle.position = toll.position;

    std::vector<NegotiationEvent> events;
    std::vector<AcceptedContract> accepted;

    view.now = 0;
    std::vector<OutMsg> opening;
    open_vehicle_session(vehicle, toll.id, view, opening);
    for (OutMsg& m : opening) net.send(vehicle.id, m.to, std::move(m.payload), view.now);

    const Tick horizon = view.session_timeout + 2 * (net_cfg.latency_ticks + 1);
    for (Tick t = 1; t <= horizon && events.empty(); ++t) {
        view.now = t;
        auto delivered = net.deliver(t);
        std::vector<Envelope> toll_inbox, vehicle_inbox;
        for (Envelope& env : delivered) {
            if (env.to == toll.id)
                toll_inbox.push_back(std::move(env));
            else
                vehicle_inbox.push_back(std::move(env));
        }

        for (OutMsg& m : toll_step(toll, toll_inbox, view, accepted))
            net.send(toll.id, m.to, std::move(m.payload), t);
        // Stand in for the settlement layer: acknowledge accepted contracts
        // so the vehicle can close out. No ledger is touched here.
        for (const AcceptedContract& ac : accepted)
            net.send(toll.id, ac.contract.vehicle_id,
                     SettlementNotice{Receipt{0, Digest{}, t}, ac.contract}, t);
        accepted.clear();
        for (OutMsg& m : vehicle_step(vehicle, vehicle_inbox, view, events))
            net.send(vehicle.id, m.to, std::move(m.payload), t);
    }

    NegotiationOutcome outcome;
    if (events.empty()) {
        outcome.result = NegotiationResult::Refused;
        return outcome;
    }
    const NegotiationEvent& event = events.front();
    outcome.result = event.result;
    outcome.rounds_used = event.rounds_used;
    if (event.result != NegotiationResult::Refused)
        outcome.contract = PassageContract{event.vehicle, event.toll, event.settled_lane,
                                           event.price, event.rounds_used, event.close_tick};
    return outcome;
}

}  // namespace tollsim
