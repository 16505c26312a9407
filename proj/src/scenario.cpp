#include "tollsim/scenario.hpp"

#include <set>

#include <json.hpp>

namespace tollsim {

using ojson = nlohmann::ordered_json;

std::vector<AccountId> ScenarioConfig::toll_ids() const {
    std::vector<AccountId> ids;
    for (size_t i = 0; i < toll_positions.size(); ++i) ids.push_back("T" + std::to_string(i + 1));
    return ids;
}

std::string ScenarioError::format(Kind kind, const std::string& field, const std::string& reason,
                                  size_t byte) {
    if (kind == Kind::Parse)
        return "scenario parse error at byte " + std::to_string(byte) + ": " + reason;
    return "scenario validation error at " + field + ": " + reason;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& reason) {
    throw ScenarioError(ScenarioError::Kind::Validation, field, reason);
}

void reject_unknown(const ojson& j, std::initializer_list<const char*> known,
                    const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool found = false;
        for (const char* k : known)
            if (it.key() == k) found = true;
        if (!found) fail(path + "." + it.key(), "unknown field");
    }
}

const ojson* get(const ojson& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

int64_t as_int(const ojson& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int64_t>();
}

double as_number(const ojson& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

std::string as_str(const ojson& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Lane as_lane(const ojson& j, const std::string& path) {
    auto lane = lane_from_string(as_str(j, path));
    if (!lane) fail(path, "expected \"Fast\" or \"Economic\"");
    return *lane;
}

LaneMap<Tokens> as_lane_tokens(const ojson& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object with Fast/Economic keys");
    reject_unknown(j, {"Fast", "Economic"}, path);
    const ojson* fast = get(j, "Fast");
    const ojson* econ = get(j, "Economic");
    if (!fast || !econ) fail(path, "both Fast and Economic are required");
    return LaneMap<Tokens>{as_int(*fast, path + ".Fast"), as_int(*econ, path + ".Economic")};
}

LaneMap<double> as_lane_numbers(const ojson& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object with Fast/Economic keys");
    reject_unknown(j, {"Fast", "Economic"}, path);
    const ojson* fast = get(j, "Fast");
    const ojson* econ = get(j, "Economic");
    if (!fast || !econ) fail(path, "both Fast and Economic are required");
    return LaneMap<double>{as_number(*fast, path + ".Fast"), as_number(*econ, path + ".Economic")};
}

PricingModel parse_pricing(const ojson& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    reject_unknown(j, {"base", "alpha", "lambda", "beta", "floor", "ceiling", "margin"}, path);
    PricingModel model;
    if (const ojson* v = get(j, "base")) model.base = as_lane_tokens(*v, path + ".base");
    if (const ojson* v = get(j, "alpha")) model.alpha = as_number(*v, path + ".alpha");
    if (const ojson* v = get(j, "lambda")) model.lambda = as_number(*v, path + ".lambda");
    if (const ojson* v = get(j, "beta")) model.beta = as_number(*v, path + ".beta");
    if (const ojson* v = get(j, "floor")) model.floor = as_lane_tokens(*v, path + ".floor");
    if (const ojson* v = get(j, "ceiling")) model.ceiling = as_lane_tokens(*v, path + ".ceiling");
    if (const ojson* v = get(j, "margin")) model.margin = as_number(*v, path + ".margin");

    if (model.alpha < 0) fail(path + ".alpha", "must be >= 0");
    if (model.lambda <= 0 || model.lambda > 1) fail(path + ".lambda", "must be in (0, 1]");
    if (model.beta < 0 || model.beta > 1) fail(path + ".beta", "must be in [0, 1]");
    if (model.margin < 0 || model.margin >= 1) fail(path + ".margin", "must be in [0, 1)");
    for (Lane lane : kLanes) {
        const std::string lp = path + "." + to_string(lane);
        if (model.floor[lane] < 1) fail(lp, "floor must be >= 1");
        if (model.ceiling[lane] < model.floor[lane]) fail(lp, "ceiling must be >= floor");
        if (model.base[lane] < model.floor[lane] || model.base[lane] > model.ceiling[lane])
            fail(lp, "base must lie within [floor, ceiling]");
    }
    return model;
}

}  // namespace

ScenarioConfig load_scenario(const std::string& text) {
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw ScenarioError(ScenarioError::Kind::Parse, "", err.what(), err.byte);
    }
    if (!doc.is_object())
        throw ScenarioError(ScenarioError::Kind::Validation, "$", "document must be a JSON object");

    reject_unknown(doc,
                   {"seed", "ticks", "track_cells", "toll_positions", "vehicles", "pricing",
                    "pricing_mode", "fixed_table", "network", "max_rounds", "peer_share_period",
                    "delay", "norms", "movement"},
                   "$");

    ScenarioConfig cfg;

    if (const ojson* v = get(doc, "seed")) cfg.seed = uint64_t(as_int(*v, "seed"));

    const ojson* ticks = get(doc, "ticks");
    if (!ticks) fail("ticks", "required field missing");
    cfg.ticks = as_int(*ticks, "ticks");
    if (cfg.ticks < 1) fail("ticks", "must be >= 1");

    const ojson* cells = get(doc, "track_cells");
    if (!cells) fail("track_cells", "required field missing");
    cfg.track_cells = int(as_int(*cells, "track_cells"));
    if (cfg.track_cells < 1) fail("track_cells", "must be >= 1");

    const ojson* positions = get(doc, "toll_positions");
    if (!positions) fail("toll_positions", "required field missing");
    if (!positions->is_array() || positions->empty())
        fail("toll_positions", "expected a non-empty array");
    {
        std::set<int> seen;
        for (size_t i = 0; i < positions->size(); ++i) {
            const std::string path = "toll_positions[" + std::to_string(i) + "]";
            const int pos = int(as_int((*positions)[i], path));
            if (pos < 0 || pos >= cfg.track_cells) fail(path, "outside the track");
            if (!seen.insert(pos).second) fail(path, "duplicate toll position");
            cfg.toll_positions.push_back(pos);
        }
    }

    const ojson* vehicles = get(doc, "vehicles");
    if (!vehicles) fail("vehicles", "required field missing");
    if (!vehicles->is_array()) fail("vehicles", "expected an array");
    {
        const std::vector<AccountId> generated = cfg.toll_ids();
        std::set<AccountId> ids(generated.begin(), generated.end());
        const std::set<AccountId> toll_ids = ids;
        for (size_t i = 0; i < vehicles->size(); ++i) {
            const std::string path = "vehicles[" + std::to_string(i) + "]";
            const ojson& vj = (*vehicles)[i];
            if (!vj.is_object()) fail(path, "expected an object");
            reject_unknown(vj, {"id", "balance", "w_time", "start_cell", "start_lane"}, path);
            VehicleSpec spec;
            const ojson* id = get(vj, "id");
            if (!id) fail(path + ".id", "required field missing");
            spec.id = as_str(*id, path + ".id");
            if (spec.id.empty()) fail(path + ".id", "must be non-empty");
            if (toll_ids.count(spec.id)) fail(path + ".id", "collides with a toll id");
            if (!ids.insert(spec.id).second) fail(path + ".id", "duplicate vehicle id");
            if (const ojson* v = get(vj, "balance")) {
                spec.balance = as_int(*v, path + ".balance");
                if (spec.balance < 0) fail(path + ".balance", "must be >= 0");
            }
            if (const ojson* v = get(vj, "w_time")) {
                spec.w_time = as_number(*v, path + ".w_time");
                if (spec.w_time < 0 || spec.w_time > 1) fail(path + ".w_time", "must be in [0, 1]");
            }
            if (const ojson* v = get(vj, "start_cell")) {
                spec.start_cell = int(as_int(*v, path + ".start_cell"));
                if (spec.start_cell < 0 || spec.start_cell >= cfg.track_cells)
                    fail(path + ".start_cell", "outside the track");
            }
            if (const ojson* v = get(vj, "start_lane")) spec.start_lane = as_lane(*v, path + ".start_lane");
            cfg.vehicles.push_back(std::move(spec));
        }
    }

    if (const ojson* pricing = get(doc, "pricing")) {
        if (pricing->is_array()) {
            if (pricing->size() != cfg.toll_positions.size())
                fail("pricing", "array must have one entry per toll position");
            for (size_t i = 0; i < pricing->size(); ++i)
                cfg.pricing.push_back(parse_pricing((*pricing)[i], "pricing[" + std::to_string(i) + "]"));
        } else {
            const PricingModel shared = parse_pricing(*pricing, "pricing");
            cfg.pricing.assign(cfg.toll_positions.size(), shared);
        }
    } else {
        cfg.pricing.assign(cfg.toll_positions.size(), PricingModel{});
    }

    if (const ojson* mode = get(doc, "pricing_mode")) {
        const std::string m = as_str(*mode, "pricing_mode");
        if (m == "Dynamic") cfg.pricing_mode = PricingMode::Dynamic;
        else if (m == "Fixed") cfg.pricing_mode = PricingMode::Fixed;
        else fail("pricing_mode", "expected \"Dynamic\" or \"Fixed\"");
    }

    if (const ojson* table = get(doc, "fixed_table")) {
        const LaneMap<Tokens> prices = as_lane_tokens(*table, "fixed_table");
        for (Lane lane : kLanes) {
            if (prices[lane] < 1) fail(std::string("fixed_table.") + to_string(lane), "must be >= 1");
            cfg.fixed_table[lane] = prices[lane];
        }
    }
    if (cfg.pricing_mode == PricingMode::Fixed && cfg.fixed_table.size() != kLanes.size())
        fail("fixed_table", "required when pricing_mode is Fixed");

    if (const ojson* net = get(doc, "network")) {
        if (!net->is_object()) fail("network", "expected an object");
        reject_unknown(*net, {"latency_ticks", "drop_probability"}, "network");
        if (const ojson* v = get(*net, "latency_ticks")) {
            cfg.network.latency_ticks = as_int(*v, "network.latency_ticks");
            if (cfg.network.latency_ticks < 0) fail("network.latency_ticks", "must be >= 0");
        }
        if (const ojson* v = get(*net, "drop_probability")) {
            cfg.network.drop_probability = as_number(*v, "network.drop_probability");
            if (cfg.network.drop_probability < 0 || cfg.network.drop_probability > 1)
                fail("network.drop_probability", "must be in [0, 1]");
        }
    }

    if (const ojson* v = get(doc, "max_rounds")) {
        cfg.max_rounds = int(as_int(*v, "max_rounds"));
        if (cfg.max_rounds < 0) fail("max_rounds", "must be >= 0");
    }
    if (const ojson* v = get(doc, "peer_share_period")) {
        cfg.peer_share_period = as_int(*v, "peer_share_period");
        if (cfg.peer_share_period < 1) fail("peer_share_period", "must be >= 1");
    }

    if (const ojson* delay = get(doc, "delay")) {
        if (!delay->is_object()) fail("delay", "expected an object");
        reject_unknown(*delay, {"d0", "gamma"}, "delay");
        if (const ojson* v = get(*delay, "d0")) cfg.delay.d0 = as_lane_numbers(*v, "delay.d0");
        if (const ojson* v = get(*delay, "gamma")) {
            cfg.delay.gamma = as_number(*v, "delay.gamma");
            if (cfg.delay.gamma < 0) fail("delay.gamma", "must be >= 0");
        }
    }
    if (cfg.delay.d0.fast <= 0 || cfg.delay.d0.economic <= 0) fail("delay.d0", "must be positive");
    if (cfg.delay.d0.fast >= cfg.delay.d0.economic)
        fail("delay.d0", "Fast free-flow delay must be below Economic");

    if (const ojson* norms = get(doc, "norms")) {
        if (!norms->is_object()) fail("norms", "expected an object");
        reject_unknown(*norms, {"price_scale", "delay_scale"}, "norms");
        if (const ojson* v = get(*norms, "price_scale")) cfg.norms.price_scale = as_number(*v, "norms.price_scale");
        if (const ojson* v = get(*norms, "delay_scale")) cfg.norms.delay_scale = as_number(*v, "norms.delay_scale");
    }
    if (cfg.norms.price_scale <= 0) fail("norms.price_scale", "must be positive");
    if (cfg.norms.delay_scale <= 0) fail("norms.delay_scale", "must be positive");

    if (const ojson* movement = get(doc, "movement")) {
        if (!movement->is_object()) fail("movement", "expected an object");
        reject_unknown(*movement, {"cell_rate", "gamma_move"}, "movement");
        if (const ojson* v = get(*movement, "cell_rate"))
            cfg.movement.cell_rate = as_lane_numbers(*v, "movement.cell_rate");
        if (const ojson* v = get(*movement, "gamma_move")) {
            cfg.movement.gamma_move = as_number(*v, "movement.gamma_move");
            if (cfg.movement.gamma_move < 0) fail("movement.gamma_move", "must be >= 0");
        }
    }
    if (cfg.movement.cell_rate.fast <= 0 || cfg.movement.cell_rate.economic <= 0)
        fail("movement.cell_rate", "must be positive");

    return cfg;
}

}  // namespace tollsim
