#pragma once

#include <map>

#include "tollsim/lane.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/result.hpp"

namespace tollsim {

// Two-tier lane pricing: an EMA-learned base (global tier) adjusted by live
// congestion and fused with peer tolls' bases (local tier).
struct PricingModel {
    LaneMap<Tokens> base{15, 5};
    double alpha = 1.0;    // congestion sensitivity, >= 0
    double lambda = 0.2;   // EMA learning rate, (0, 1]
    double beta = 0.3;     // peer-fusion rate, [0, 1]
    LaneMap<Tokens> floor{5, 1};
    LaneMap<Tokens> ceiling{60, 20};
    double margin = 0.15;  // reserve discount, [0, 1)
};

struct DensityObservation {
    Lane lane = Lane::Economic;
    int count = 0;
    int capacity = 1;
    double rho = 0.0;

    static DensityObservation make(Lane lane, int count, int capacity);
};

// Half-up rounding to integer tokens; applied after every pricing formula so
// the ledger stays integral.
Tokens round_half_up(double value);

Tokens clamp_to_band(const PricingModel& model, Lane lane, Tokens value);

Tokens quote(const PricingModel& model, Lane lane, double rho);
Tokens reserve_price(const PricingModel& model, Lane lane, double rho);
PricingModel update_on_settlement(PricingModel model, Lane lane, Tokens accepted_price);
PricingModel incorporate_peer(PricingModel model, Lane lane, Tokens peer_base);

enum class PricingErrc { UnknownLane };
struct PricingError {
    PricingErrc code;
    std::string detail;
};

Result<Tokens, PricingError> fixed_quote(const std::map<Lane, Tokens>& fixed_table, Lane lane);

struct DelayParams {
    LaneMap<double> d0{2.0, 5.0};  // free-flow delay per lane; Fast < Economic
    double gamma = 3.0;
};

double expected_delay(const DelayParams& params, Lane lane, double rho);

}  // namespace tollsim
