#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tollsim/agents.hpp"
#include "tollsim/lane.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/network.hpp"
#include "tollsim/pricing.hpp"

namespace tollsim {

struct VehicleSpec {
    AccountId id;
    Tokens balance = 0;
    double w_time = 0.5;
    int start_cell = 0;
    Lane start_lane = Lane::Economic;
};

struct ScenarioConfig {
    uint64_t seed = 0;
    Tick ticks = 1;
    int track_cells = 40;
    std::vector<int> toll_positions;
    std::vector<VehicleSpec> vehicles;
    std::vector<PricingModel> pricing;  // one entry per toll
    PricingMode pricing_mode = PricingMode::Dynamic;
    std::map<Lane, Tokens> fixed_table;
    NetworkConfig network;  // seed field is derived from `seed` at run time
    int max_rounds = 3;
    Tick peer_share_period = 25;
    DelayParams delay;
    UtilityNorms norms;
    MovementParams movement;

    // Toll identities are generated from the position list: T1..Tn.
    std::vector<AccountId> toll_ids() const;
};

class ScenarioError : public std::runtime_error {
public:
    enum class Kind { Parse, Validation };

    ScenarioError(Kind kind, std::string field, std::string reason, size_t byte = 0)
        : std::runtime_error(format(kind, field, reason, byte)),
          kind(kind),
          field(std::move(field)),
          reason(std::move(reason)),
          byte(byte) {}

    Kind kind;
    std::string field;   // dotted path for validation errors
    std::string reason;
    size_t byte;         // parse errors: byte offset into the document

private:
    static std::string format(Kind kind, const std::string& field, const std::string& reason,
                              size_t byte);
};

// Parses and validates a scenario document; throws ScenarioError.
ScenarioConfig load_scenario(const std::string& text);

}  // namespace tollsim
