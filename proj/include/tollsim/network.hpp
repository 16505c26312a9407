#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tollsim/lane.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/result.hpp"
#include "tollsim/rng.hpp"

namespace tollsim {

using AgentId = AccountId;
using MsgId = uint64_t;

// Closed protocol message set.
struct QuoteRequest {
    std::vector<Lane> lanes;
};
struct QuoteResponse {
    LaneMap<Tokens> price;
    LaneMap<double> density;
};
struct Offer {
    Lane lane = Lane::Economic;
    Tokens price = 0;
    int round = 0;
};
struct AcceptMsg {
    PassageContract contract;
};
enum class RejectReason { BelowReserve, RoundsExhausted, NoSession, SettlementFailed };
const char* to_string(RejectReason reason);
struct RejectMsg {
    Lane lane = Lane::Economic;
    RejectReason reason = RejectReason::BelowReserve;
};
struct PeerQuoteShare {
    LaneMap<Tokens> base;
};
struct SettlementNotice {
    Receipt receipt;
    PassageContract contract;
};

using Message = std::variant<QuoteRequest, QuoteResponse, Offer, AcceptMsg, RejectMsg,
                             PeerQuoteShare, SettlementNotice>;

const char* message_type_name(const Message& msg);

struct NetworkConfig {
    Tick latency_ticks = 1;
    double drop_probability = 0.0;
    uint64_t seed = 0;
};

struct Envelope {
    MsgId msg_id = 0;
    AgentId from;
    AgentId to;
    Message payload;
    Tick sent_tick = 0;
    Tick deliver_tick = 0;
};

enum class NetErrc { UnknownRecipient, EmptyGroup };

struct NetError {
    NetErrc code;
    std::string detail;
};

// Simulated peer-to-peer layer. Drops are decided at send time from a seeded
// stream, so the transcript depends only on (seed, send sequence).
class Network {
public:
    explicit Network(NetworkConfig cfg)
        : cfg_(cfg), drop_rng_(cfg.seed) {}

    void register_agent(const AgentId& id) { agents_.insert(id); }
    bool is_registered(const AgentId& id) const { return agents_.count(id) > 0; }

    Result<MsgId, NetError> send(const AgentId& from, const AgentId& to, Message payload,
                                 Tick sent_tick);

    // All envelopes due at or before `now`, ordered by (deliver_tick, msg_id),
    // removed from the queue. Agents send mid-tick after the delivery phase,
    // so "due" must include earlier deliver_ticks or latency-0 traffic would
    // strand.
    std::vector<Envelope> deliver(Tick now);

    Result<std::vector<MsgId>, NetError> broadcast(const AgentId& from,
                                                   std::span<const AgentId> group,
                                                   const Message& payload, Tick sent_tick);

    const std::vector<Envelope>& drop_log() const { return drop_log_; }
    uint64_t sent_count() const { return sent_count_; }
    uint64_t delivered_count() const { return delivered_count_; }
    size_t queued_count() const { return queue_.size(); }

    enum class Status { Queued, Delivered, Dropped };
    struct TranscriptEntry {
        Envelope envelope;
        Status status = Status::Queued;
        Tick delivered_at = -1;
    };
    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
    std::string export_transcript_ndjson() const;

    const NetworkConfig& config() const { return cfg_; }

private:
    NetworkConfig cfg_;
    Xoshiro256 drop_rng_;
    std::set<AgentId> agents_;
    MsgId next_id_ = 0;
    std::vector<Envelope> queue_;
    std::vector<Envelope> drop_log_;
    std::vector<TranscriptEntry> transcript_;
    uint64_t sent_count_ = 0;
    uint64_t delivered_count_ = 0;
};

}  // namespace tollsim
