#include "tollsim/pricing.hpp"

#include <algorithm>
#include <cmath>

namespace tollsim {

DensityObservation DensityObservation::make(Lane lane, int count, int capacity) {
    DensityObservation obs;
    obs.lane = lane;
    obs.count = count;
    obs.capacity = std::max(capacity, 1);
    obs.rho = std::min(double(count) / double(obs.capacity), 1.0);
    return obs;
}

Tokens round_half_up(double value) {
    return Tokens(std::floor(value + 0.5));
}

Tokens clamp_to_band(const PricingModel& model, Lane lane, Tokens value) {
    return std::clamp(value, model.floor[lane], model.ceiling[lane]);
}

Tokens quote(const PricingModel& model, Lane lane, double rho) {
    const Tokens raw = round_half_up(double(model.base[lane]) * (1.0 + model.alpha * rho));
    return clamp_to_band(model, lane, raw);
}

Tokens reserve_price(const PricingModel& model, Lane lane, double rho) {
    const Tokens q = quote(model, lane, rho);
    return std::max<Tokens>(1, round_half_up(double(q) * (1.0 - model.margin)));
}

PricingModel update_on_settlement(PricingModel model, Lane lane, Tokens accepted_price) {
    const double blended =
        (1.0 - model.lambda) * double(model.base[lane]) + model.lambda * double(accepted_price);
    model.base[lane] = clamp_to_band(model, lane, round_half_up(blended));
    return model;
}

PricingModel incorporate_peer(PricingModel model, Lane lane, Tokens peer_base) {
    const double nudged =
        double(model.base[lane]) + model.beta * double(peer_base - model.base[lane]);
    model.base[lane] = clamp_to_band(model, lane, round_half_up(nudged));
    return model;
}

Result<Tokens, PricingError> fixed_quote(const std::map<Lane, Tokens>& fixed_table, Lane lane) {
    auto it = fixed_table.find(lane);
    if (it == fixed_table.end())
        return PricingError{PricingErrc::UnknownLane,
                            std::string("no fixed price for lane ") + to_string(lane)};
    return it->second;
}

double expected_delay(const DelayParams& params, Lane lane, double rho) {
    return params.d0[lane] * (1.0 + params.gamma * rho);
}

}  // namespace tollsim
