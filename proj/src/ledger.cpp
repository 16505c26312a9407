#include "tollsim/ledger.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tollsim {

using ojson = nlohmann::ordered_json;

const char* to_string(LedgerErrc code) {
    switch (code) {
        case LedgerErrc::EmptyValidatorSet: return "EmptyValidatorSet";
        case LedgerErrc::DuplicateAccount: return "DuplicateAccount";
        case LedgerErrc::UnknownAccount: return "UnknownAccount";
        case LedgerErrc::NegativeBalance: return "NegativeBalance";
        case LedgerErrc::InsufficientFunds: return "InsufficientFunds";
        case LedgerErrc::BadNonce: return "BadNonce";
        case LedgerErrc::SelfTransfer: return "SelfTransfer";
        case LedgerErrc::NonPositiveAmount: return "NonPositiveAmount";
        case LedgerErrc::InvalidTransactionInBlock: return "InvalidTransactionInBlock";
        case LedgerErrc::NonMonotonicTick: return "NonMonotonicTick";
    }
    return "UnknownError";
}

// --- canonical serialization -------------------------------------------------

namespace {

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_field_bytes(std::vector<uint8_t>& out, const void* data, size_t len) {
    put_u32be(out, uint32_t(len));
    const uint8_t* p = static_cast<const uint8_t*>(data);
    out.insert(out.end(), p, p + len);
}

void put_field_u64(std::vector<uint8_t>& out, uint64_t v) {
    uint8_t be[8];
    for (int i = 0; i < 8; ++i) be[i] = uint8_t(v >> (56 - 8 * i));
    put_field_bytes(out, be, 8);
}

void put_field_i64(std::vector<uint8_t>& out, int64_t v) { put_field_u64(out, uint64_t(v)); }

void put_field_str(std::vector<uint8_t>& out, const std::string& s) {
    put_field_bytes(out, s.data(), s.size());
}

void put_field_digest(std::vector<uint8_t>& out, const Digest& d) {
    put_field_bytes(out, d.data(), d.size());
}

void put_field_byte(std::vector<uint8_t>& out, uint8_t b) { put_field_bytes(out, &b, 1); }

void put_contract(std::vector<uint8_t>& out, const std::optional<PassageContract>& c) {
    if (!c) {
        put_field_byte(out, 0);
        return;
    }
    put_field_byte(out, 1);
    put_field_str(out, c->vehicle_id);
    put_field_str(out, c->toll_id);
    put_field_byte(out, uint8_t(c->lane));
    put_field_i64(out, c->price);
    put_field_u64(out, uint64_t(c->negotiated_rounds));
    put_field_i64(out, c->tick);
}

}  // namespace

std::vector<uint8_t> canonical_tx_fields(const Transaction& tx) {
    std::vector<uint8_t> out;
    put_field_str(out, tx.from);
    put_field_str(out, tx.to);
    put_field_i64(out, tx.amount);
    put_contract(out, tx.contract);
    put_field_i64(out, tx.tick);
    put_field_u64(out, tx.nonce);
    return out;
}

std::vector<uint8_t> canonical_block_bytes(const Block& block) {
    std::vector<uint8_t> out;
    put_field_u64(out, block.height);
    put_field_digest(out, block.parent_hash);
    put_field_str(out, block.proposer);
    put_field_i64(out, block.tick);
    put_u32be(out, uint32_t(block.transactions.size()));
    for (const Transaction& tx : block.transactions) {
        const auto fields = canonical_tx_fields(tx);
        out.insert(out.end(), fields.begin(), fields.end());
        put_field_digest(out, tx.tx_id);
    }
    if (block.genesis) {
        put_u32be(out, uint32_t(block.genesis->validators.size()));
        for (const AccountId& v : block.genesis->validators) put_field_str(out, v);
        put_u32be(out, uint32_t(block.genesis->accounts.size()));
        for (const auto& [id, bal] : block.genesis->accounts) {
            put_field_str(out, id);
            put_field_i64(out, bal);
        }
        put_field_i64(out, block.genesis->total_supply);
    }
    return out;
}

Digest tx_digest(const Transaction& tx) { return Sha256::hash(canonical_tx_fields(tx)); }

Digest hash_block(const Block& fields) { return Sha256::hash(canonical_block_bytes(fields)); }

Transaction make_transaction(AccountId from, AccountId to, Tokens amount,
                             std::optional<PassageContract> contract, Tick tick, uint64_t nonce) {
    Transaction tx;
    tx.from = std::move(from);
    tx.to = std::move(to);
    tx.amount = amount;
    tx.contract = std::move(contract);
    tx.tick = tick;
    tx.nonce = nonce;
    tx.tx_id = tx_digest(tx);
    return tx;
}

// --- operations ---------------------------------------------------------------

Result<Chain, LedgerError> genesis(const std::vector<AccountId>& validators,
                                   const std::vector<std::pair<AccountId, Tokens>>& initial_balances) {
    if (validators.empty())
        return LedgerError{LedgerErrc::EmptyValidatorSet, "validator set must be non-empty"};

    std::set<AccountId> vset;
    for (const AccountId& v : validators) {
        if (!vset.insert(v).second)
            return LedgerError{LedgerErrc::DuplicateAccount, "duplicate validator id: " + v};
    }

    WalletState state;
    for (const auto& [id, balance] : initial_balances) {
        if (balance < 0)
            return LedgerError{LedgerErrc::NegativeBalance, "negative initial balance for " + id};
        if (!state.accounts.emplace(id, Account{id, balance, 0}).second)
            return LedgerError{LedgerErrc::DuplicateAccount, "duplicate account id: " + id};
        state.total_supply += balance;
    }
    for (const AccountId& v : validators) {
        if (!state.accounts.count(v))
            return LedgerError{LedgerErrc::UnknownAccount, "validator has no account: " + v};
    }

    GenesisInfo info;
    info.validators = validators;
    for (const auto& [id, acct] : state.accounts) info.accounts.emplace(id, acct.balance);
    info.total_supply = state.total_supply;

    Block block;
    block.height = 0;
    block.parent_hash = zero_digest();
    block.proposer = validators[0];
    block.tick = 0;
    block.genesis = std::move(info);
    block.block_hash = hash_block(block);

    Chain chain;
    chain.blocks.push_back(std::make_shared<const Block>(std::move(block)));
    chain.state = std::move(state);
    chain.validators = validators;
    return chain;
}

Result<WalletState, LedgerError> apply_transaction(const WalletState& state, const Transaction& tx) {
    if (tx.amount <= 0)
        return LedgerError{LedgerErrc::NonPositiveAmount, "amount must be positive"};
    if (tx.from == tx.to)
        return LedgerError{LedgerErrc::SelfTransfer, "from and to must differ"};

    auto from_it = state.accounts.find(tx.from);
    if (from_it == state.accounts.end())
        return LedgerError{LedgerErrc::UnknownAccount, "unknown sender: " + tx.from};
    auto to_it = state.accounts.find(tx.to);
    if (to_it == state.accounts.end())
        return LedgerError{LedgerErrc::UnknownAccount, "unknown recipient: " + tx.to};

    if (tx.nonce <= from_it->second.nonce)
        return LedgerError{LedgerErrc::BadNonce, "nonce must increase per sender"};
    if (from_it->second.balance < tx.amount)
        return LedgerError{LedgerErrc::InsufficientFunds,
                           "balance " + std::to_string(from_it->second.balance) + " < amount " +
                               std::to_string(tx.amount)};

    WalletState next = state;
    Account& from = next.accounts.at(tx.from);
    Account& to = next.accounts.at(tx.to);
    from.balance -= tx.amount;
    from.nonce = tx.nonce;
    to.balance += tx.amount;
    return next;
}

Result<Chain, LedgerError> append_block(const Chain& chain, std::vector<Transaction> txs, Tick tick) {
    if (tick <= chain.tip().tick)
        return LedgerError{LedgerErrc::NonMonotonicTick,
                           "block tick " + std::to_string(tick) + " not after tip tick " +
                               std::to_string(chain.tip().tick)};

    WalletState scratch = chain.state;
    for (size_t i = 0; i < txs.size(); ++i) {
        if (txs[i].tx_id != tx_digest(txs[i]))
            return LedgerError{LedgerErrc::InvalidTransactionInBlock,
                               "tx_id does not match contents", int(i)};
        auto applied = apply_transaction(scratch, txs[i]);
        if (!applied.ok()) {
            LedgerError err = applied.error();
            return LedgerError{LedgerErrc::InvalidTransactionInBlock,
                               std::string(to_string(err.code)) + ": " + err.detail, int(i)};
        }
        scratch = std::move(applied).value();
    }

    Block block;
    block.height = chain.height() + 1;
    block.parent_hash = chain.tip().block_hash;
    block.proposer = chain.validators[block.height % chain.validators.size()];
    block.tick = tick;
    block.transactions = std::move(txs);
    block.block_hash = hash_block(block);

    Chain next;
    next.blocks = chain.blocks;
    next.blocks.push_back(std::make_shared<const Block>(std::move(block)));
    next.state = std::move(scratch);
    next.validators = chain.validators;
    return next;
}

Result<SettleOk, LedgerError> settle(const Chain& chain, const PassageContract& contract, Tick tick) {
    Transaction tx = make_transaction(contract.vehicle_id, contract.toll_id, contract.price,
                                      contract, tick, next_nonce(chain, contract.vehicle_id));
    auto appended = append_block(chain, {tx}, tick);
    if (!appended.ok()) {
        LedgerError err = appended.error();
        if (err.code == LedgerErrc::InvalidTransactionInBlock &&
            err.detail.rfind("InsufficientFunds", 0) == 0)
            return LedgerError{LedgerErrc::InsufficientFunds, err.detail};
        return err;
    }
    SettleOk ok;
    ok.chain = std::move(appended).value();
    ok.receipt = Receipt{ok.chain.height(), tx.tx_id, tick};
    return ok;
}

Result<Tokens, LedgerError> get_balance(const Chain& chain, const AccountId& account_id) {
    auto it = chain.state.accounts.find(account_id);
    if (it == chain.state.accounts.end())
        return LedgerError{LedgerErrc::UnknownAccount, "unknown account: " + account_id};
    return it->second.balance;
}

uint64_t next_nonce(const Chain& chain, const AccountId& account_id) {
    auto it = chain.state.accounts.find(account_id);
    return it == chain.state.accounts.end() ? 1 : it->second.nonce + 1;
}

// --- verification ---------------------------------------------------------------

VerificationReport verify_chain(const Chain& chain) {
    VerificationReport report;
    auto flag = [&](uint64_t height, std::string kind, std::string detail) {
        report.violations.push_back({height, std::move(kind), std::move(detail)});
    };

    if (chain.blocks.empty()) {
        flag(0, "empty-chain", "chain has no blocks");
        return report;
    }

    const Block& gen = *chain.blocks.front();
    if (gen.height != 0) flag(gen.height, "genesis-shape", "first block height is not 0");
    if (gen.parent_hash != zero_digest()) flag(0, "genesis-shape", "genesis parent hash not zero");
    if (!gen.transactions.empty()) flag(0, "genesis-shape", "genesis carries transactions");
    if (!gen.genesis) {
        flag(0, "genesis-shape", "genesis payload missing");
        return report;
    }

    const GenesisInfo& info = *gen.genesis;
    if (info.validators.empty()) flag(0, "validator-set", "empty validator set");
    {
        std::set<AccountId> vset(info.validators.begin(), info.validators.end());
        if (vset.size() != info.validators.size()) flag(0, "validator-set", "duplicate validator");
        for (const AccountId& v : info.validators)
            if (!info.accounts.count(v)) flag(0, "validator-set", "validator has no account: " + v);
    }
    if (!chain.validators.empty() && chain.validators != info.validators)
        flag(0, "validator-set", "chain validator list differs from genesis payload");
    if (!gen.proposer.empty() && !info.validators.empty() && gen.proposer != info.validators[0])
        flag(0, "proposer-rotation", "genesis proposer is not validators[0]");

    Tokens genesis_sum = 0;
    std::map<AccountId, Tokens> balances;
    std::map<AccountId, uint64_t> nonces;
    for (const auto& [id, bal] : info.accounts) {
        genesis_sum += bal;
        if (bal < 0) flag(0, "supply-mismatch", "negative genesis balance for " + id);
        balances[id] = bal;
        nonces[id] = 0;
    }
    if (genesis_sum != info.total_supply)
        flag(0, "supply-mismatch",
             "genesis balances sum " + std::to_string(genesis_sum) + " != total_supply " +
                 std::to_string(info.total_supply));

    // Recompute the hash chain as it should be; a mutated block therefore
    // flags itself and every descendant.
    Digest true_parent = zero_digest();
    const size_t validator_count = info.validators.empty() ? 1 : info.validators.size();

    for (size_t i = 0; i < chain.blocks.size(); ++i) {
        const Block& b = *chain.blocks[i];
        if (b.height != i)
            flag(b.height, "height-sequence",
                 "block at index " + std::to_string(i) + " has height " + std::to_string(b.height));
        if (i > 0) {
            if (b.parent_hash != chain.blocks[i - 1]->block_hash)
                flag(b.height, "parent-link", "parent_hash does not match previous block hash");
            if (b.tick <= chain.blocks[i - 1]->tick)
                flag(b.height, "tick-order", "block tick not after parent tick");
            if (b.genesis) flag(b.height, "genesis-shape", "non-genesis block carries genesis payload");
        }
        if (!info.validators.empty()) {
            const AccountId& expect = info.validators[b.height % validator_count];
            if (b.proposer != expect)
                flag(b.height, "proposer-rotation",
                     "proposer " + b.proposer + " != expected " + expect);
        }

        Block rehash = b;
        rehash.parent_hash = true_parent;
        const Digest true_hash = hash_block(rehash);
        if (b.block_hash != true_hash)
            flag(b.height, "block-hash-mismatch", "stored block hash does not match contents");
        true_parent = true_hash;

        for (size_t t = 0; t < b.transactions.size(); ++t) {
            const Transaction& tx = b.transactions[t];
            const std::string at = "block " + std::to_string(b.height) + " tx " + std::to_string(t);
            if (tx.tx_id != tx_digest(tx)) flag(b.height, "tx-digest-mismatch", at);
            if (tx.amount <= 0) flag(b.height, "non-positive-amount", at);
            if (tx.from == tx.to) flag(b.height, "self-transfer", at);

            auto from_it = balances.find(tx.from);
            auto to_it = balances.find(tx.to);
            if (from_it == balances.end()) {
                flag(b.height, "unknown-account", at + " sender " + tx.from);
                continue;
            }
            if (to_it == balances.end()) {
                flag(b.height, "unknown-account", at + " recipient " + tx.to);
                continue;
            }
            if (tx.nonce <= nonces[tx.from]) flag(b.height, "bad-nonce", at);
            nonces[tx.from] = std::max(nonces[tx.from], tx.nonce);
            from_it->second -= tx.amount;
            to_it->second += tx.amount;
            if (from_it->second < 0)
                flag(b.height, "insufficient-funds", at + " overdraws " + tx.from);
        }
    }

    Tokens final_sum = 0;
    for (const auto& [id, bal] : balances) final_sum += bal;
    if (final_sum != info.total_supply)
        flag(chain.blocks.back()->height, "supply-mismatch",
             "replayed balance sum " + std::to_string(final_sum) + " != total_supply " +
                 std::to_string(info.total_supply));

    if (!chain.state.accounts.empty()) {
        bool mismatch = chain.state.total_supply != info.total_supply ||
                        chain.state.accounts.size() != balances.size();
        if (!mismatch) {
            for (const auto& [id, bal] : balances) {
                auto it = chain.state.accounts.find(id);
                if (it == chain.state.accounts.end() || it->second.balance != bal) {
                    mismatch = true;
                    break;
                }
            }
        }
        if (mismatch)
            flag(chain.blocks.back()->height, "state-mismatch",
                 "attached wallet state differs from replay");
    }

    return report;
}

// --- export / import ----------------------------------------------------------

namespace {

ojson contract_to_json(const PassageContract& c) {
    ojson j;
    j["vehicle_id"] = c.vehicle_id;
    j["toll_id"] = c.toll_id;
    j["lane"] = to_string(c.lane);
    j["price"] = c.price;
    j["negotiated_rounds"] = c.negotiated_rounds;
    j["tick"] = c.tick;
    return j;
}

ojson tx_to_json(const Transaction& tx) {
    ojson j;
    j["tx_id"] = to_hex(tx.tx_id);
    j["from"] = tx.from;
    j["to"] = tx.to;
    j["amount"] = tx.amount;
    if (tx.contract) j["contract"] = contract_to_json(*tx.contract);
    j["tick"] = tx.tick;
    j["nonce"] = tx.nonce;
    return j;
}

ojson block_to_json(const Block& b) {
    ojson j;
    j["height"] = b.height;
    j["parent_hash"] = to_hex(b.parent_hash);
    j["proposer"] = b.proposer;
    j["tick"] = b.tick;
    if (b.genesis) {
        ojson g;
        g["validators"] = b.genesis->validators;
        ojson accounts;
        for (const auto& [id, bal] : b.genesis->accounts) accounts[id] = bal;
        g["accounts"] = std::move(accounts);
        g["total_supply"] = b.genesis->total_supply;
        j["genesis"] = std::move(g);
    }
    ojson txs = ojson::array();
    for (const Transaction& tx : b.transactions) txs.push_back(tx_to_json(tx));
    j["transactions"] = std::move(txs);
    j["block_hash"] = to_hex(b.block_hash);
    return j;
}

struct FieldError {
    std::string detail;
};

template <typename J>
const J& need(const J& j, const char* key, const char* type_name, bool (J::*is_type)() const) {
    auto it = j.find(key);
    if (it == j.end()) throw FieldError{std::string("missing field '") + key + "'"};
    if (!((*it).*is_type)()) throw FieldError{std::string("field '") + key + "' is not " + type_name};
    return *it;
}

int64_t need_int(const ojson& j, const char* key) {
    return need(j, key, "an integer", &ojson::is_number_integer).template get<int64_t>();
}

std::string need_str(const ojson& j, const char* key) {
    return need(j, key, "a string", &ojson::is_string).template get<std::string>();
}

Digest need_digest(const ojson& j, const char* key) {
    auto d = digest_from_hex(need_str(j, key));
    if (!d) throw FieldError{std::string("field '") + key + "' is not a 64-char lowercase hex digest"};
    return *d;
}

void reject_unknown(const ojson& j, std::initializer_list<const char*> known, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool found = false;
        for (const char* k : known)
            if (it.key() == k) found = true;
        if (!found) throw FieldError{std::string("unknown field '") + it.key() + "' in " + where};
    }
}

PassageContract contract_from_json(const ojson& j) {
    reject_unknown(j, {"vehicle_id", "toll_id", "lane", "price", "negotiated_rounds", "tick"},
                   "contract");
    PassageContract c;
    c.vehicle_id = need_str(j, "vehicle_id");
    c.toll_id = need_str(j, "toll_id");
    auto lane = lane_from_string(need_str(j, "lane"));
    if (!lane) throw FieldError{"contract lane must be Fast or Economic"};
    c.lane = *lane;
    c.price = need_int(j, "price");
    c.negotiated_rounds = int(need_int(j, "negotiated_rounds"));
    c.tick = need_int(j, "tick");
    return c;
}

Transaction tx_from_json(const ojson& j) {
    reject_unknown(j, {"tx_id", "from", "to", "amount", "contract", "tick", "nonce"}, "transaction");
    Transaction tx;
    tx.tx_id = need_digest(j, "tx_id");
    tx.from = need_str(j, "from");
    tx.to = need_str(j, "to");
    tx.amount = need_int(j, "amount");
    if (j.contains("contract")) tx.contract = contract_from_json(j.at("contract"));
    tx.tick = need_int(j, "tick");
    tx.nonce = uint64_t(need_int(j, "nonce"));
    return tx;
}

Block block_from_json(const ojson& j) {
    reject_unknown(j, {"height", "parent_hash", "proposer", "tick", "genesis", "transactions", "block_hash"},
                   "block");
    Block b;
    b.height = uint64_t(need_int(j, "height"));
    b.parent_hash = need_digest(j, "parent_hash");
    b.proposer = need_str(j, "proposer");
    b.tick = need_int(j, "tick");
    if (j.contains("genesis")) {
        const ojson& g = j.at("genesis");
        reject_unknown(g, {"validators", "accounts", "total_supply"}, "genesis");
        GenesisInfo info;
        const ojson& vals = need(g, "validators", "an array", &ojson::is_array);
        for (const auto& v : vals) {
            if (!v.is_string()) throw FieldError{"validator ids must be strings"};
            info.validators.push_back(v.get<std::string>());
        }
        const ojson& accounts = need(g, "accounts", "an object", &ojson::is_object);
        for (auto it = accounts.begin(); it != accounts.end(); ++it) {
            if (!it.value().is_number_integer())
                throw FieldError{"account balance must be an integer"};
            info.accounts.emplace(it.key(), it.value().get<int64_t>());
        }
        info.total_supply = need_int(g, "total_supply");
        b.genesis = std::move(info);
    }
    const ojson& txs = need(j, "transactions", "an array", &ojson::is_array);
    for (const auto& t : txs) {
        if (!t.is_object()) throw FieldError{"transaction entries must be objects"};
        b.transactions.push_back(tx_from_json(t));
    }
    b.block_hash = need_digest(j, "block_hash");
    return b;
}

}  // namespace

std::string export_chain_ndjson(const Chain& chain) {
    std::string out;
    for (const BlockPtr& b : chain.blocks) {
        out += block_to_json(*b).dump();
        out += '\n';
    }
    return out;
}

Result<Chain, ChainIoError> import_chain_ndjson(const std::string& text) {
    Chain chain;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ojson j = ojson::parse(line, nullptr, false);
        if (j.is_discarded())
            return ChainIoError{"line " + std::to_string(line_no) + ": invalid JSON", line_no};
        if (!j.is_object())
            return ChainIoError{"line " + std::to_string(line_no) + ": not a JSON object", line_no};
        try {
            chain.blocks.push_back(std::make_shared<const Block>(block_from_json(j)));
        } catch (const FieldError& err) {
            return ChainIoError{"line " + std::to_string(line_no) + ": " + err.detail, line_no};
        }
    }
    if (chain.blocks.empty()) return ChainIoError{"no blocks in file", 0};

    // Rebuild wallet state with a lenient replay; invariant breaks are left
    // for verify_chain to report.
    const GenesisInfo* info = nullptr;
    for (const BlockPtr& b : chain.blocks) {
        if (b->genesis) {
            info = &*b->genesis;
            break;
        }
    }
    if (!info) return ChainIoError{"no genesis payload in file", 0};

    chain.validators = info->validators;
    chain.state.total_supply = info->total_supply;
    for (const auto& [id, bal] : info->accounts)
        chain.state.accounts.emplace(id, Account{id, bal, 0});
    for (const BlockPtr& b : chain.blocks) {
        for (const Transaction& tx : b->transactions) {
            auto from = chain.state.accounts.find(tx.from);
            auto to = chain.state.accounts.find(tx.to);
            if (from == chain.state.accounts.end() || to == chain.state.accounts.end()) continue;
            from->second.balance -= tx.amount;
            from->second.nonce = std::max(from->second.nonce, tx.nonce);
            to->second.balance += tx.amount;
        }
    }
    return chain;
}

}  // namespace tollsim
