#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollsim/lane.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/network.hpp"
#include "tollsim/pricing.hpp"
#include "tollsim/result.hpp"

namespace tollsim {

struct Preferences {
    double w_time = 0.5;
    double w_cost = 0.5;

    // Normalized so w_time + w_cost = 1.
    static Preferences from_w_time(double w_time);
    static Preferences normalized(double w_time, double w_cost);
};

struct UtilityNorms {
    double price_scale = 10.0;
    double delay_scale = 5.0;
};

// Higher is better; both terms are costs.
double vehicle_utility(const Preferences& prefs, Tokens price, double delay,
                       const UtilityNorms& norms);

enum class AgentErrc { MissingQuote, NoSession };
struct AgentError {
    AgentErrc code;
    std::string detail;
};

// Argmax of vehicle_utility over quoted lanes; ties break toward Economic.
Result<Lane, AgentError> choose_lane(const Preferences& prefs,
                                     const LaneMap<std::optional<Tokens>>& quotes,
                                     const LaneMap<double>& delays, const UtilityNorms& norms);

// Offer schedule: discount 0.3 * w_cost / round off the quote, rising toward
// the quote as rounds advance. Round 0 is the posted-price regime.
Tokens make_counteroffer(const Preferences& prefs, Tokens quoted_price, int round);

struct MovementParams {
    LaneMap<double> cell_rate{3.0, 2.0};
    double gamma_move = 1.0;
};

int movement_speed(const MovementParams& params, Lane lane, double rho);

// Covers a full worst-case exchange, economic fallback included.
Tick negotiation_timeout_ticks(Tick latency, int max_rounds);

// --- toll ----------------------------------------------------------------------

enum class PricingMode { Dynamic, Fixed };
const char* to_string(PricingMode mode);

struct TollSession {
    AccountId vehicle_id;
    Tick open_tick = 0;
    // Prices are pinned when the session opens: a quote is held for the
    // session so the acceptance bound has a stable reference.
    LaneMap<Tokens> quoted;
    LaneMap<Tokens> reserve;
    LaneMap<double> density;
    int last_round = 0;
};

struct TollAgent {
    AccountId id;
    int position = 0;
    PricingModel model;
    PricingMode mode = PricingMode::Dynamic;
    std::map<Lane, Tokens> fixed_table;
    std::map<AccountId, TollSession> sessions;  // at most one per vehicle
};

struct TollDecision {
    enum class Kind { Accept, Counter, Reject };
    Kind kind = Kind::Reject;
    PassageContract contract;   // Accept
    Tokens counter_price = 0;   // Counter
    RejectReason reason = RejectReason::BelowReserve;
};

// Accept iff offer >= pinned reserve; counter with the pinned quote while
// rounds remain; reject once rounds are exhausted.
Result<TollDecision, AgentError> toll_respond(TollAgent& toll, const AccountId& vehicle_id,
                                              const Offer& offer, double rho, Tick now,
                                              int max_rounds);

// --- vehicle -------------------------------------------------------------------

enum class VehicleState { Cruising, AwaitingQuotes, Negotiating, AwaitingSettlement, Stalled };
const char* to_string(VehicleState state);

struct VehicleSession {
    AccountId toll_id;
    Tick open_tick = 0;
    Tick deadline = 0;
    Lane bid_lane = Lane::Economic;
    int round = 0;
    LaneMap<Tokens> quoted;
    LaneMap<double> density;
    bool have_quotes = false;
    bool fallback_used = false;
    Tokens reserved = 0;  // outstanding offer held against the balance
    int offers_fast = 0;
    int offers_economic = 0;
};

struct VehicleAgent {
    AccountId id;
    Preferences prefs;
    int position = 0;
    Lane lane = Lane::Economic;
    VehicleState state = VehicleState::Cruising;
    std::optional<VehicleSession> pending;
    Tokens balance = 0;  // ledger snapshot, engine-refreshed each tick
    Tick stall_tick = -1;

    Tokens available_balance() const { return balance - (pending ? pending->reserved : 0); }
};

// --- stepping ------------------------------------------------------------------

struct TollSite {
    AccountId id;
    int position = 0;
};

struct WorldView {
    Tick now = 0;
    LaneMap<double> rho;
    int track_cells = 1;
    std::vector<TollSite> tolls;  // sorted by id
    DelayParams delay;
    UtilityNorms norms;
    MovementParams movement;
    int max_rounds = 3;           // effective; 0 under Fixed pricing
    Tick session_timeout = 0;
    Tick peer_share_period = 0;   // 0 disables sharing
};

struct OutMsg {
    AgentId to;
    Message payload;
};

enum class NegotiationResult { Agreed, FallbackEconomic, Refused };
const char* to_string(NegotiationResult result);

struct NegotiationEvent {
    AccountId vehicle;
    AccountId toll;
    Tick open_tick = 0;
    Tick close_tick = 0;
    Lane bid_lane = Lane::Economic;
    NegotiationResult result = NegotiationResult::Refused;
    Lane settled_lane = Lane::Economic;
    Tokens price = 0;
    int rounds_used = 0;
    int offers_fast = 0;
    int offers_economic = 0;
    bool timed_out = false;
    std::string reason;  // refusals: insolvent | rejected | timeout | settlement-failed
    double utility = 0.0;
};

struct AcceptedContract {
    PassageContract contract;
    Tokens quote = 0;
    Tokens reserve = 0;
    double rho_at_quote = 0.0;
};

std::vector<OutMsg> toll_step(TollAgent& toll, std::span<const Envelope> inbox,
                              const WorldView& view, std::vector<AcceptedContract>& accepted);

std::vector<OutMsg> vehicle_step(VehicleAgent& vehicle, std::span<const Envelope> inbox,
                                 const WorldView& view, std::vector<NegotiationEvent>& events);

// --- standalone negotiation ------------------------------------------------------

struct NegotiationOutcome {
    NegotiationResult result = NegotiationResult::Refused;
    std::optional<PassageContract> contract;
    int rounds_used = 0;
};

// Drives the full protocol between one vehicle and one toll over a private
// network. No ledger is involved; on acceptance the contract is returned,
// not settled.
NegotiationOutcome run_negotiation(VehicleAgent& vehicle, TollAgent& toll,
                                   const LaneMap<double>& rho_by_lane, int max_rounds,
                                   const NetworkConfig& net_cfg = NetworkConfig{});

}  // namespace tollsim
