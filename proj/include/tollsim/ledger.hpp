#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tollsim/lane.hpp"
#include "tollsim/result.hpp"
#include "tollsim/sha256.hpp"

namespace tollsim {

using Tokens = int64_t;
using Tick = int64_t;
using AccountId = std::string;

struct Account {
    AccountId id;
    Tokens balance = 0;
    uint64_t nonce = 0;  // last accepted tx nonce for this sender
};

struct PassageContract {
    AccountId vehicle_id;
    AccountId toll_id;
    Lane lane = Lane::Economic;
    Tokens price = 0;
    int negotiated_rounds = 0;
    Tick tick = 0;

    bool operator==(const PassageContract&) const = default;
};

struct Transaction {
    Digest tx_id{};
    AccountId from;
    AccountId to;
    Tokens amount = 0;
    std::optional<PassageContract> contract;
    Tick tick = 0;
    uint64_t nonce = 0;
};

// Validators, initial funding and supply ride inside the genesis block so a
// chain export stays strictly one block per line. The genesis payload is part
// of the genesis hash preimage, making every committed field tamper-evident.
struct GenesisInfo {
    std::vector<AccountId> validators;
    std::map<AccountId, Tokens> accounts;
    Tokens total_supply = 0;
};

struct Block {
    uint64_t height = 0;
    Digest parent_hash{};
    AccountId proposer;
    Tick tick = 0;
    std::vector<Transaction> transactions;
    Digest block_hash{};
    std::optional<GenesisInfo> genesis;  // height 0 only
};

using BlockPtr = std::shared_ptr<const Block>;

struct WalletState {
    std::map<AccountId, Account> accounts;
    Tokens total_supply = 0;

    Tokens balance_sum() const {
        Tokens sum = 0;
        for (const auto& [id, acct] : accounts) sum += acct.balance;
        return sum;
    }
};

// Blocks are immutable and structurally shared, so copying a Chain is cheap
// and every ledger operation can stay a pure old-state -> new-state function.
struct Chain {
    std::vector<BlockPtr> blocks;
    WalletState state;
    std::vector<AccountId> validators;

    const Block& tip() const { return *blocks.back(); }
    uint64_t height() const { return blocks.back()->height; }
};

enum class LedgerErrc {
    EmptyValidatorSet,
    DuplicateAccount,
    UnknownAccount,
    NegativeBalance,
    InsufficientFunds,
    BadNonce,
    SelfTransfer,
    NonPositiveAmount,
    InvalidTransactionInBlock,
    NonMonotonicTick,
};

const char* to_string(LedgerErrc code);

struct LedgerError {
    LedgerErrc code;
    std::string detail;
    int tx_index = -1;  // set for InvalidTransactionInBlock
};

// --- canonical serialization -------------------------------------------------
// Length-prefixed field encoding: every field is u32-be(length) + payload,
// integers as 8-byte big-endian, strings as UTF-8 bytes, digests raw.

std::vector<uint8_t> canonical_tx_fields(const Transaction& tx);   // excludes tx_id
std::vector<uint8_t> canonical_block_bytes(const Block& block);    // excludes block_hash

Digest tx_digest(const Transaction& tx);
Digest hash_block(const Block& fields);

Transaction make_transaction(AccountId from, AccountId to, Tokens amount,
                             std::optional<PassageContract> contract, Tick tick, uint64_t nonce);

// --- operations ---------------------------------------------------------------

Result<Chain, LedgerError> genesis(const std::vector<AccountId>& validators,
                                   const std::vector<std::pair<AccountId, Tokens>>& initial_balances);

Result<WalletState, LedgerError> apply_transaction(const WalletState& state, const Transaction& tx);

Result<Chain, LedgerError> append_block(const Chain& chain, std::vector<Transaction> txs, Tick tick);

struct Receipt {
    uint64_t height = 0;
    Digest tx_id{};
    Tick tick = 0;
};

struct SettleOk {
    Chain chain;
    Receipt receipt;
};

Result<SettleOk, LedgerError> settle(const Chain& chain, const PassageContract& contract, Tick tick);

Result<Tokens, LedgerError> get_balance(const Chain& chain, const AccountId& account_id);

uint64_t next_nonce(const Chain& chain, const AccountId& account_id);

struct Violation {
    uint64_t height = 0;
    std::string kind;
    std::string detail;
};

struct VerificationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

VerificationReport verify_chain(const Chain& chain);

// --- export / import ----------------------------------------------------------
// Newline-delimited JSON, one block per line, canonical field order, digests
// hex-encoded lowercase.

std::string export_chain_ndjson(const Chain& chain);

struct ChainIoError {
    std::string detail;
    int line = -1;
};

// Parses the block lines and rebuilds wallet state by replaying from genesis.
// Framing/shape problems fail here; invariant breaks are verify_chain's job.
Result<Chain, ChainIoError> import_chain_ndjson(const std::string& text);

}  // namespace tollsim
