#include "tollsim/network.hpp"

#include <algorithm>

#include <json.hpp>

namespace tollsim {

using ojson = nlohmann::ordered_json;

const char* to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::BelowReserve: return "BelowReserve";
        case RejectReason::RoundsExhausted: return "RoundsExhausted";
        case RejectReason::NoSession: return "NoSession";
        case RejectReason::SettlementFailed: return "SettlementFailed";
    }
    return "Unknown";
}

const char* message_type_name(const Message& msg) {
    struct Namer {
        const char* operator()(const QuoteRequest&) const { return "QuoteRequest"; }
        const char* operator()(const QuoteResponse&) const { return "QuoteResponse"; }
        const char* operator()(const Offer&) const { return "Offer"; }
        const char* operator()(const AcceptMsg&) const { return "Accept"; }
        const char* operator()(const RejectMsg&) const { return "Reject"; }
        const char* operator()(const PeerQuoteShare&) const { return "PeerQuoteShare"; }
        const char* operator()(const SettlementNotice&) const { return "SettlementNotice"; }
    };
    return std::visit(Namer{}, msg);
}

Result<MsgId, NetError> Network::send(const AgentId& from, const AgentId& to, Message payload,
                                      Tick sent_tick) {
    if (!is_registered(from))
        return NetError{NetErrc::UnknownRecipient, "sender not registered: " + from};
    if (!is_registered(to))
        return NetError{NetErrc::UnknownRecipient, "recipient not registered: " + to};

    Envelope env;
    env.msg_id = next_id_++;
    env.from = from;
    env.to = to;
    env.payload = std::move(payload);
    env.sent_tick = sent_tick;
    env.deliver_tick = sent_tick + cfg_.latency_ticks;
    ++sent_count_;

    const bool dropped = drop_rng_.next_unit() < cfg_.drop_probability;
    if (dropped) {
        drop_log_.push_back(env);
        transcript_.push_back({env, Status::Dropped, -1});
    } else {
        queue_.push_back(env);
        transcript_.push_back({env, Status::Queued, -1});
    }
    return env.msg_id;
}

std::vector<Envelope> Network::deliver(Tick now) {
    std::vector<Envelope> due;
    auto split = std::stable_partition(queue_.begin(), queue_.end(),
                                       [now](const Envelope& e) { return e.deliver_tick > now; });
    due.assign(std::make_move_iterator(split), std::make_move_iterator(queue_.end()));
    queue_.erase(split, queue_.end());
    std::sort(due.begin(), due.end(), [](const Envelope& a, const Envelope& b) {
        return std::tie(a.deliver_tick, a.msg_id) < std::tie(b.deliver_tick, b.msg_id);
    });
    delivered_count_ += due.size();
    for (const Envelope& env : due) {
        // msg_id doubles as the transcript index: one entry per send, ids sequential.
        TranscriptEntry& entry = transcript_[env.msg_id];
        entry.status = Status::Delivered;
        entry.delivered_at = now;
    }
    return due;
}

Result<std::vector<MsgId>, NetError> Network::broadcast(const AgentId& from,
                                                        std::span<const AgentId> group,
                                                        const Message& payload, Tick sent_tick) {
    if (group.empty()) return NetError{NetErrc::EmptyGroup, "broadcast group is empty"};
    std::vector<MsgId> ids;
    for (const AgentId& member : group) {
        if (member == from) continue;
        auto sent = send(from, member, payload, sent_tick);
        if (!sent.ok()) return sent.error();
        ids.push_back(sent.value());
    }
    return ids;
}

namespace {

ojson payload_to_json(const Message& msg) {
    struct Writer {
        ojson operator()(const QuoteRequest& m) const {
            ojson lanes = ojson::array();
            for (Lane lane : m.lanes) lanes.push_back(to_string(lane));
            return ojson{{"lanes", lanes}};
        }
        ojson operator()(const QuoteResponse& m) const {
            return ojson{{"price", {{"Fast", m.price.fast}, {"Economic", m.price.economic}}},
                         {"density", {{"Fast", m.density.fast}, {"Economic", m.density.economic}}}};
        }
        ojson operator()(const Offer& m) const {
            return ojson{{"lane", to_string(m.lane)}, {"price", m.price}, {"round", m.round}};
        }
        ojson operator()(const AcceptMsg& m) const {
            return ojson{{"vehicle", m.contract.vehicle_id},
                         {"toll", m.contract.toll_id},
                         {"lane", to_string(m.contract.lane)},
                         {"price", m.contract.price},
                         {"rounds", m.contract.negotiated_rounds},
                         {"tick", m.contract.tick}};
        }
        ojson operator()(const RejectMsg& m) const {
            return ojson{{"lane", to_string(m.lane)}, {"reason", to_string(m.reason)}};
        }
        ojson operator()(const PeerQuoteShare& m) const {
            return ojson{{"base", {{"Fast", m.base.fast}, {"Economic", m.base.economic}}}};
        }
        ojson operator()(const SettlementNotice& m) const {
            return ojson{{"height", m.receipt.height},
                         {"tx_id", to_hex(m.receipt.tx_id)},
                         {"tick", m.receipt.tick},
                         {"amount", m.contract.price},
                         {"lane", to_string(m.contract.lane)}};
        }
    };
    return std::visit(Writer{}, msg);
}

}  // namespace

std::string Network::export_transcript_ndjson() const {
    std::string out;
    for (const TranscriptEntry& entry : transcript_) {
        ojson j;
        j["msg_id"] = entry.envelope.msg_id;
        j["from"] = entry.envelope.from;
        j["to"] = entry.envelope.to;
        j["sent_tick"] = entry.envelope.sent_tick;
        j["deliver_tick"] = entry.envelope.deliver_tick;
        switch (entry.status) {
            case Status::Queued: j["status"] = "queued"; break;
            case Status::Delivered: j["status"] = "delivered"; break;
            case Status::Dropped: j["status"] = "dropped"; break;
        }
        if (entry.status == Status::Delivered) j["delivered_at"] = entry.delivered_at;
        j["type"] = message_type_name(entry.envelope.payload);
        j["payload"] = payload_to_json(entry.envelope.payload);
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace tollsim
