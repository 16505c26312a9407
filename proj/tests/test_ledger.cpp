#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tollsim/ledger.hpp"
#include "tollsim/rng.hpp"

using namespace tollsim;

namespace {

Chain funded_chain() {
    std::vector<std::pair<AccountId, Tokens>> funding{
        {"V1", 1000}, {"V2", 1000}, {"V3", 1000}, {"V4", 1000}, {"V5", 1000}, {"V6", 1000},
        {"T1", 0},    {"T2", 0}};
    auto chain = genesis({"T1", "T2"}, funding);
    REQUIRE(chain.ok());
    return chain.value();
}

PassageContract contract_for(const AccountId& vehicle, const AccountId& toll, Tokens price,
                             Tick tick, Lane lane = Lane::Fast, int rounds = 2) {
    return PassageContract{vehicle, toll, lane, price, rounds, tick};
}

// A chain with one settlement per tick over several blocks.
Chain chain_with_settlements(int blocks) {
    Chain chain = funded_chain();
    for (int i = 0; i < blocks; ++i) {
        const AccountId vehicle = "V" + std::to_string(i % 6 + 1);
        const AccountId toll = i % 2 == 0 ? "T1" : "T2";
        auto settled = settle(chain, contract_for(vehicle, toll, 10 + i % 5, i + 1), i + 1);
        REQUIRE(settled.ok());
        chain = std::move(settled).value().chain;
    }
    return chain;
}

Chain replace_block(const Chain& chain, size_t index, Block mutated) {
    Chain out = chain;
    out.blocks[index] = std::make_shared<const Block>(std::move(mutated));
    return out;
}

bool has_violation(const VerificationReport& report, uint64_t height, const std::string& kind) {
    for (const Violation& v : report.violations)
        if (v.height == height && v.kind == kind) return true;
    return false;
}

}  // namespace

TEST_CASE("sha256 matches the FIPS 180-4 test vectors") {
    CHECK(to_hex(Sha256::hash(std::string_view{""})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(Sha256::hash(std::string_view{"abc"})) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(Sha256::hash(std::string_view{
              "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"})) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");

    Sha256 hasher;
    const std::string chunk(1000, 'a');
    for (int i = 0; i < 1000; ++i) hasher.update(chunk.data(), chunk.size());
    CHECK(to_hex(hasher.finish()) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("hex round trip") {
    Digest d = Sha256::hash(std::string_view{"roundtrip"});
    auto back = digest_from_hex(to_hex(d));
    REQUIRE(back.has_value());
    CHECK(*back == d);
    CHECK_FALSE(digest_from_hex("zz").has_value());
    CHECK_FALSE(digest_from_hex(std::string(64, 'g')).has_value());
}

TEST_CASE("genesis funds the demonstrator fleet") {
    Chain chain = funded_chain();
    CHECK(chain.height() == 0);
    CHECK(chain.tip().transactions.empty());
    CHECK(chain.state.total_supply == 6000);
    CHECK(chain.tip().parent_hash == zero_digest());
    CHECK(chain.tip().proposer == "T1");
    CHECK(verify_chain(chain).ok());
}

TEST_CASE("genesis accepts a zero-supply single account") {
    auto chain = genesis({"only"}, {{"only", 0}});
    REQUIRE(chain.ok());
    CHECK(chain.value().state.total_supply == 0);
    CHECK(verify_chain(chain.value()).ok());
}

TEST_CASE("genesis rejects bad input") {
    auto dup = genesis({"T1"}, {{"A", 5}, {"A", 5}, {"T1", 0}});
    REQUIRE_FALSE(dup.ok());
    CHECK(dup.error().code == LedgerErrc::DuplicateAccount);

    auto empty = genesis({}, {{"A", 5}});
    REQUIRE_FALSE(empty.ok());
    CHECK(empty.error().code == LedgerErrc::EmptyValidatorSet);

    auto dup_validator = genesis({"T1", "T1"}, {{"T1", 0}});
    REQUIRE_FALSE(dup_validator.ok());
    CHECK(dup_validator.error().code == LedgerErrc::DuplicateAccount);

    auto unfunded_validator = genesis({"T1"}, {{"A", 5}});
    REQUIRE_FALSE(unfunded_validator.ok());
    CHECK(unfunded_validator.error().code == LedgerErrc::UnknownAccount);

    auto negative = genesis({"T1"}, {{"T1", -1}});
    REQUIRE_FALSE(negative.ok());
    CHECK(negative.error().code == LedgerErrc::NegativeBalance);
}

TEST_CASE("block hashing is deterministic") {
    Chain chain = chain_with_settlements(3);
    const Block& block = *chain.blocks[2];
    CHECK(hash_block(block) == hash_block(block));
    CHECK(hash_block(block) == block.block_hash);
}

TEST_CASE("any single-byte change to the serialization changes the digest") {
    Chain chain = chain_with_settlements(2);
    const std::vector<uint8_t> bytes = canonical_block_bytes(*chain.blocks[2]);
    const Digest original = Sha256::hash(bytes);

    // Oracle: flip one byte, recompute the digest over the mutated
    // serialization, and require inequality.
    Xoshiro256 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        std::vector<uint8_t> mutated = bytes;
        const size_t pos = size_t(rng.next_below(mutated.size()));
        const uint8_t flip = uint8_t(1 + rng.next_below(255));
        mutated[pos] ^= flip;
        CHECK(Sha256::hash(mutated) != original);
    }
}

TEST_CASE("golden block digests stay frozen") {
    std::ifstream in(std::string(TOLLSIM_GOLDEN_DIR) + "/block_digests.jsonl");
    REQUIRE_MESSAGE(in.good(), "golden file missing");
    std::string line;
    int checked = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::ordered_json::parse(line);
        auto imported = import_chain_ndjson(j.at("chain").get<std::string>());
        REQUIRE(imported.ok());
        const Block& block = *imported.value().blocks.back();
        CHECK(to_hex(hash_block(block)) == j.at("digest").get<std::string>());
        CHECK(to_hex(block.block_hash) == j.at("digest").get<std::string>());
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("apply_transaction moves exactly the amount") {
    Chain chain = funded_chain();
    const Tokens amount = 12;
    Transaction tx = make_transaction("V1", "T1", amount, std::nullopt, 1, 1);
    auto applied = apply_transaction(chain.state, tx);
    REQUIRE(applied.ok());

    // Independent arithmetic oracle.
    const Tokens expected_sender = 1000 - amount;
    const Tokens expected_recipient = 0 + amount;
    CHECK(applied.value().accounts.at("V1").balance == expected_sender);
    CHECK(applied.value().accounts.at("T1").balance == expected_recipient);
    CHECK(applied.value().total_supply == chain.state.total_supply);
    // Input state untouched.
    CHECK(chain.state.accounts.at("V1").balance == 1000);
}

TEST_CASE("apply_transaction boundary and failure cases") {
    Chain chain = funded_chain();

    Transaction full = make_transaction("V1", "T1", 1000, std::nullopt, 1, 1);
    auto ok = apply_transaction(chain.state, full);
    REQUIRE(ok.ok());
    CHECK(ok.value().accounts.at("V1").balance == 0);

    Transaction over = make_transaction("V1", "T1", 1001, std::nullopt, 1, 1);
    auto fail = apply_transaction(chain.state, over);
    REQUIRE_FALSE(fail.ok());
    CHECK(fail.error().code == LedgerErrc::InsufficientFunds);

    Transaction unknown_from = make_transaction("ghost", "T1", 1, std::nullopt, 1, 1);
    CHECK(apply_transaction(chain.state, unknown_from).error().code == LedgerErrc::UnknownAccount);
    Transaction unknown_to = make_transaction("V1", "ghost", 1, std::nullopt, 1, 1);
    CHECK(apply_transaction(chain.state, unknown_to).error().code == LedgerErrc::UnknownAccount);

    Transaction zero_nonce = make_transaction("V1", "T1", 1, std::nullopt, 1, 0);
    CHECK(apply_transaction(chain.state, zero_nonce).error().code == LedgerErrc::BadNonce);

    Transaction self = make_transaction("V1", "V1", 1, std::nullopt, 1, 1);
    CHECK(apply_transaction(chain.state, self).error().code == LedgerErrc::SelfTransfer);

    Transaction nothing = make_transaction("V1", "T1", 0, std::nullopt, 1, 1);
    CHECK(apply_transaction(chain.state, nothing).error().code == LedgerErrc::NonPositiveAmount);
}

TEST_CASE("nonces must strictly increase per sender") {
    Chain chain = funded_chain();
    auto first = append_block(chain, {make_transaction("V1", "T1", 5, std::nullopt, 1, 1)}, 1);
    REQUIRE(first.ok());
    auto replayed =
        append_block(first.value(), {make_transaction("V1", "T1", 5, std::nullopt, 2, 1)}, 2);
    REQUIRE_FALSE(replayed.ok());
    CHECK(replayed.error().code == LedgerErrc::InvalidTransactionInBlock);
    auto advanced =
        append_block(first.value(), {make_transaction("V1", "T1", 5, std::nullopt, 2, 2)}, 2);
    CHECK(advanced.ok());
}

TEST_CASE("empty heartbeat block is valid and leaves state alone") {
    Chain chain = funded_chain();
    auto appended = append_block(chain, {}, 1);
    REQUIRE(appended.ok());
    CHECK(appended.value().height() == 1);
    CHECK(appended.value().state.accounts.at("V1").balance == 1000);
    CHECK(verify_chain(appended.value()).ok());
}

TEST_CASE("append_block replays like sequential apply_transaction") {
    Chain chain = funded_chain();
    std::vector<Transaction> txs{make_transaction("V1", "T1", 12, std::nullopt, 3, 1),
                                 make_transaction("V2", "T2", 7, std::nullopt, 3, 1)};
    auto appended = append_block(chain, txs, 3);
    REQUIRE(appended.ok());

    // Oracle: independent replay through apply_transaction.
    WalletState expected = chain.state;
    for (const Transaction& tx : txs) expected = apply_transaction(expected, tx).value();
    CHECK(appended.value().state.accounts.at("V1").balance ==
          expected.accounts.at("V1").balance);
    CHECK(appended.value().state.accounts.at("T1").balance ==
          expected.accounts.at("T1").balance);
    CHECK(appended.value().state.balance_sum() == expected.balance_sum());
}

TEST_CASE("a block with one bad transaction is rejected atomically") {
    Chain chain = funded_chain();
    std::vector<Transaction> txs{make_transaction("V1", "T1", 12, std::nullopt, 1, 1),
                                 make_transaction("V2", "T1", 1001, std::nullopt, 1, 1)};
    const Digest tip_before = chain.tip().block_hash;
    auto appended = append_block(chain, txs, 1);
    REQUIRE_FALSE(appended.ok());
    CHECK(appended.error().code == LedgerErrc::InvalidTransactionInBlock);
    CHECK(appended.error().tx_index == 1);

    // Oracle: sequential apply_transaction pinpoints the same failure.
    auto first = apply_transaction(chain.state, txs[0]);
    REQUIRE(first.ok());
    CHECK_FALSE(apply_transaction(first.value(), txs[1]).ok());

    CHECK(chain.blocks.size() == 1);
    CHECK(chain.tip().block_hash == tip_before);
    CHECK(chain.state.accounts.at("V1").balance == 1000);
}

TEST_CASE("append_block refuses non-monotonic ticks") {
    Chain chain = funded_chain();
    auto first = append_block(chain, {}, 5);
    REQUIRE(first.ok());
    auto same = append_block(first.value(), {}, 5);
    REQUIRE_FALSE(same.ok());
    CHECK(same.error().code == LedgerErrc::NonMonotonicTick);
    auto earlier = append_block(first.value(), {}, 4);
    CHECK_FALSE(earlier.ok());
}

TEST_CASE("settle commits at the contract tick with zero latency") {
    Chain chain = funded_chain();
    auto settled = settle(chain, contract_for("V1", "T1", 12, 40), 40);
    REQUIRE(settled.ok());
    const Receipt& receipt = settled.value().receipt;
    const Chain& after = settled.value().chain;
    CHECK(receipt.tick == 40);
    CHECK(after.tip().tick == 40);
    CHECK(after.tip().tick - receipt.tick == 0);
    CHECK(receipt.height == 1);
    CHECK(after.state.accounts.at("V1").balance == 988);
    CHECK(after.state.accounts.at("T1").balance == 12);
    CHECK(after.tip().transactions.at(0).contract.has_value());
}

TEST_CASE("settle boundary and insufficiency") {
    Chain chain = funded_chain();
    auto exact = settle(chain, contract_for("V1", "T1", 1000, 1), 1);
    REQUIRE(exact.ok());
    CHECK(exact.value().chain.state.accounts.at("V1").balance == 0);

    auto broke = settle(chain, contract_for("V1", "T1", 1001, 1), 1);
    REQUIRE_FALSE(broke.ok());
    CHECK(broke.error().code == LedgerErrc::InsufficientFunds);
    CHECK(chain.blocks.size() == 1);
}

TEST_CASE("get_balance reads and rejects unknown ids") {
    Chain chain = funded_chain();
    CHECK(get_balance(chain, "V1").value() == 1000);
    auto settled = settle(chain, contract_for("V1", "T1", 12, 1), 1);
    REQUIRE(settled.ok());
    CHECK(get_balance(settled.value().chain, "V1").value() == 1000 - 12);
    CHECK(get_balance(chain, "nobody").error().code == LedgerErrc::UnknownAccount);
}

TEST_CASE("verify_chain accepts honest chains") {
    CHECK(verify_chain(chain_with_settlements(8)).ok());
}

TEST_CASE("a mutated amount flags the block and all descendants") {
    Chain chain = chain_with_settlements(6);
    Block tampered = *chain.blocks[3];
    tampered.transactions[0].amount += 1;
    Chain bad = replace_block(chain, 3, std::move(tampered));

    const VerificationReport report = verify_chain(bad);
    REQUIRE_FALSE(report.ok());
    CHECK(has_violation(report, 3, "block-hash-mismatch"));
    CHECK(has_violation(report, 3, "tx-digest-mismatch"));
    // Hash-chain recomputation cascades to every descendant.
    for (uint64_t h = 4; h <= 6; ++h) CHECK(has_violation(report, h, "block-hash-mismatch"));
}

TEST_CASE("reordered blocks break height and parent linkage") {
    Chain chain = chain_with_settlements(5);
    Chain bad = chain;
    std::swap(bad.blocks[2], bad.blocks[3]);
    const VerificationReport report = verify_chain(bad);
    REQUIRE_FALSE(report.ok());
    CHECK((has_violation(report, 3, "height-sequence") ||
           has_violation(report, 2, "height-sequence")));
    CHECK((has_violation(report, 3, "parent-link") || has_violation(report, 2, "parent-link")));
}

TEST_CASE("proposer tampering is flagged") {
    Chain chain = chain_with_settlements(4);
    Block tampered = *chain.blocks[2];
    tampered.proposer = tampered.proposer == "T1" ? "T2" : "T1";
    tampered.block_hash = hash_block(tampered);  // even a re-hashed forgery fails rotation
    Chain bad = replace_block(chain, 2, std::move(tampered));
    const VerificationReport report = verify_chain(bad);
    CHECK(has_violation(report, 2, "proposer-rotation"));
}

TEST_CASE("conservation holds across random accepted blocks") {
    Xoshiro256 rng(99);
    Chain chain = funded_chain();
    const Tokens supply = chain.state.total_supply;
    const std::vector<AccountId> vehicles{"V1", "V2", "V3", "V4", "V5", "V6"};
    const std::vector<AccountId> tolls{"T1", "T2"};

    int accepted = 0;
    for (Tick tick = 1; tick <= 300; ++tick) {
        const AccountId& from = vehicles[rng.next_below(vehicles.size())];
        const AccountId& to = tolls[rng.next_below(tolls.size())];
        const Tokens amount = Tokens(rng.next_in(1, 400));  // sometimes overdraws
        auto settled = settle(chain, contract_for(from, to, amount, tick), tick);
        if (settled.ok()) {
            chain = std::move(settled).value().chain;
            ++accepted;
        }
        CHECK(chain.state.balance_sum() == supply);
        for (const auto& [id, acct] : chain.state.accounts) CHECK(acct.balance >= 0);
    }
    CHECK(accepted > 10);
    CHECK(verify_chain(chain).ok());
}

TEST_CASE("any single-field mutation of a committed block is detected") {
    Chain chain = chain_with_settlements(10);
    Xoshiro256 rng(4242);

    for (int trial = 0; trial < 300; ++trial) {
        const size_t index = 1 + size_t(rng.next_below(chain.blocks.size() - 1));
        Block tampered = *chain.blocks[index];
        switch (rng.next_below(8)) {
            case 0: tampered.height += 1; break;
            case 1: tampered.parent_hash[rng.next_below(32)] ^= 0x01; break;
            case 2: tampered.proposer += "x"; break;
            case 3: tampered.tick += 1; break;
            case 4: tampered.block_hash[rng.next_below(32)] ^= 0x01; break;
            case 5: tampered.transactions[0].amount += 1; break;
            case 6: tampered.transactions[0].nonce += 1; break;
            case 7: tampered.transactions[0].tx_id[rng.next_below(32)] ^= 0x01; break;
        }
        CHECK_FALSE(verify_chain(replace_block(chain, index, std::move(tampered))).ok());
    }
}

TEST_CASE("export, import, replay: bit-identical tip hash") {
    Chain chain = chain_with_settlements(12);
    const std::string text = export_chain_ndjson(chain);
    auto imported = import_chain_ndjson(text);
    REQUIRE(imported.ok());
    CHECK(imported.value().tip().block_hash == chain.tip().block_hash);
    CHECK(imported.value().state.accounts.at("V1").balance ==
          chain.state.accounts.at("V1").balance);
    CHECK(verify_chain(imported.value()).ok());
    CHECK(export_chain_ndjson(imported.value()) == text);

    // Digests are lowercase hex on the wire.
    std::istringstream lines(text);
    std::string first;
    std::getline(lines, first);
    CHECK(first.find("\"parent_hash\":\"00000000000000000000000000000000000000000000000000000000"
                     "00000000\"") != std::string::npos);
}

TEST_CASE("import rejects corrupt framing") {
    CHECK_FALSE(import_chain_ndjson("").ok());
    CHECK_FALSE(import_chain_ndjson("not json\n").ok());
    CHECK_FALSE(import_chain_ndjson("{\"height\":0}\n").ok());
    Chain chain = funded_chain();
    std::string text = export_chain_ndjson(chain);
    CHECK_FALSE(import_chain_ndjson(text + "{\"height\":1,\"bogus\":true}\n").ok());
}

TEST_CASE("proposer rotation is fair") {
    for (int validators = 1; validators <= 4; ++validators) {
        std::vector<AccountId> ids;
        std::vector<std::pair<AccountId, Tokens>> funding{{"V1", 100000}};
        for (int i = 0; i < validators; ++i) {
            ids.push_back("T" + std::to_string(i + 1));
            funding.emplace_back(ids.back(), 0);
        }
        auto made = genesis(ids, funding);
        REQUIRE(made.ok());
        Chain chain = made.value();
        for (Tick tick = 1; tick <= 37; ++tick) {
            auto settled = settle(chain, contract_for("V1", ids[0], 1, tick), tick);
            REQUIRE(settled.ok());
            chain = std::move(settled).value().chain;
        }
        std::map<AccountId, int> counts;
        for (const BlockPtr& b : chain.blocks) ++counts[b->proposer];
        const int total = int(chain.blocks.size());
        for (const AccountId& id : ids) {
            CHECK(counts[id] >= total / validators);
            CHECK(counts[id] <= (total + validators - 1) / validators);
        }
    }
}
