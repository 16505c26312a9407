#include "tollsim/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "tollsim/engine.hpp"
#include "tollsim/ledger.hpp"
#include "tollsim/metrics.hpp"
#include "tollsim/scenario.hpp"

namespace tollsim::cli {

namespace fs = std::filesystem;

namespace {

bool read_file(const std::string& path, std::string& out, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err << "cannot open " << path << "\n";
        return false;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    out = buffer.str();
    return true;
}

bool write_file(const std::string& path, const std::string& content, std::ostream& err) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        err << "cannot write " << path << "\n";
        return false;
    }
    out << content;
    return out.good();
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    std::string text;
    if (!read_file(args.scenario_path, text, err)) return kExitIo;

    ScenarioConfig cfg;
    try {
        cfg = load_scenario(text);
    } catch (const ScenarioError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }
    if (args.seed) cfg.seed = *args.seed;

    const auto start = std::chrono::steady_clock::now();
    RunResult result = run(cfg);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) {
        err << "cannot create " << args.out_dir << ": " << ec.message() << "\n";
        return kExitIo;
    }

    const auto metrics_json = export_metrics(result.metrics, "json");
    const auto metrics_csv = export_metrics(result.metrics, "csv");
    const fs::path dir(args.out_dir);
    if (!write_file((dir / "metrics.json").string(), metrics_json.value(), err)) return kExitIo;
    if (!write_file((dir / "metrics.csv").string(), metrics_csv.value(), err)) return kExitIo;
    if (!write_file((dir / "chain.ndjson").string(), export_chain_ndjson(result.chain), err))
        return kExitIo;
    if (args.transcript &&
        !write_file((dir / "transcript.ndjson").string(), result.transcript, err))
        return kExitIo;

    out << "ticks: " << result.metrics.ticks << "  settlements: " << result.metrics.settlement_count
        << "  blocks: " << result.metrics.blocks << "\n";
    out << "revenue:";
    for (const auto& [id, amount] : result.metrics.toll_revenue) out << " " << id << "=" << amount;
    out << "\n";
    out << "final_chain_hash: " << to_hex(result.metrics.final_chain_hash) << "\n";
    out << "elapsed_ms: " << elapsed << "\n";
    return kExitOk;
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    std::string text;
    if (!read_file(args.chain_path, text, err)) return kExitIo;

    auto imported = import_chain_ndjson(text);
    if (!imported.ok()) {
        err << "corrupt chain file: " << imported.error().detail << "\n";
        return kExitIo;
    }

    const VerificationReport report = verify_chain(imported.value());
    if (report.ok()) {
        out << "PASS " << imported.value().blocks.size() << " blocks\n";
        return kExitOk;
    }
    out << "FAIL " << report.violations.size() << " violation(s)\n";
    for (const Violation& v : report.violations)
        out << "  height=" << v.height << " kind=" << v.kind << " detail=" << v.detail << "\n";
    return kExitVerifyFailed;
}

int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err) {
    std::string text;
    if (!read_file(args.chain_path, text, err)) return kExitIo;

    auto imported = import_chain_ndjson(text);
    if (!imported.ok()) {
        err << "corrupt chain file: " << imported.error().detail << "\n";
        return kExitIo;
    }
    const Chain& chain = imported.value();

    if (!args.account) {
        out << "accounts: " << chain.state.accounts.size()
            << "  total_supply: " << chain.state.total_supply << "\n";
        for (const auto& [id, acct] : chain.state.accounts)
            out << id << " " << acct.balance << "\n";
        return kExitOk;
    }

    auto balance = get_balance(chain, *args.account);
    if (!balance.ok()) {
        err << "unknown account: " << *args.account << "\n";
        return kExitUnknownAccount;
    }
    out << "account: " << *args.account << "\n";
    out << "balance: " << balance.value() << "\n";
    out << "history:\n";
    for (const BlockPtr& block : chain.blocks) {
        for (const Transaction& tx : block->transactions) {
            if (tx.from != *args.account && tx.to != *args.account) continue;
            out << "  height=" << block->height << " tick=" << tx.tick << " from=" << tx.from
                << " to=" << tx.to << " amount=" << tx.amount << " nonce=" << tx.nonce
                << " tx=" << to_hex(tx.tx_id) << "\n";
        }
    }
    return kExitOk;
}

int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
    std::string text;
    if (!read_file(args.scenario_path, text, err)) return kExitIo;

    ScenarioConfig cfg;
    try {
        cfg = load_scenario(text);
    } catch (const ScenarioError& e) {
        err << e.what() << "\n";
        return kExitConfig;
    }

    auto compared = compare_modes(cfg);
    if (!compared.ok()) {
        err << compared.error().detail << "\n";
        return kExitConfig;
    }
    const ComparisonReport& report = compared.value();

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) {
        err << "cannot create " << args.out_dir << ": " << ec.message() << "\n";
        return kExitIo;
    }
    if (!write_file((fs::path(args.out_dir) / "comparison.json").string(),
                    export_comparison_json(report), err))
        return kExitIo;

    out << "dynamic_utility=" << report.dynamic_mode.mean_vehicle_utility
        << " fixed_utility=" << report.fixed_mode.mean_vehicle_utility
        << " dynamic_ge_fixed=" << (report.dynamic_ge_fixed ? "yes" : "no")
        << " dynamic_revenue=" << report.dynamic_mode.settlement_total
        << " fixed_revenue=" << report.fixed_mode.settlement_total << "\n";
    return kExitOk;
}

int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream& err) {
    if (args.format != "json" && args.format != "csv") {
        err << "UnsupportedFormat: " << args.format << " (expected json or csv)\n";
        return kExitConfig;
    }

    std::string metrics_json;
    if (!read_file((fs::path(args.run_dir) / "metrics.json").string(), metrics_json, err))
        return kExitIo;

    if (args.format == "json") {
        out << metrics_json;
        return kExitOk;
    }
    auto csv = metrics_csv_from_json(metrics_json);
    if (!csv.ok()) {
        err << csv.error().detail << "\n";
        return kExitIo;
    }
    out << csv.value();
    return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"tollsim - deterministic machine-to-machine toll economy simulator"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario and write its artifacts");
    run_cmd->add_option("--scenario", run_args.scenario_path, "Scenario JSON file")->required();
    run_cmd->add_option("--out", run_args.out_dir, "Output directory")->required();
    uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        run_cmd->add_option("--seed", seed_value, "Override the scenario seed");
    run_cmd->add_flag("--transcript", run_args.transcript, "Also write transcript.ndjson");

    VerifyArgs verify_args;
    CLI::App* verify_cmd = app.add_subcommand("verify", "Verify a chain export");
    verify_cmd->add_option("--chain", verify_args.chain_path, "chain.ndjson file")->required();

    InspectArgs inspect_args;
    std::string inspect_account;
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "Inspect balances and history");
    inspect_cmd->add_option("--chain", inspect_args.chain_path, "chain.ndjson file")->required();
    CLI::Option* account_opt =
        inspect_cmd->add_option("--account", inspect_account, "Account id to inspect");

    CompareArgs compare_args;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Run Dynamic vs Fixed pricing on one scenario");
    compare_cmd->add_option("--scenario", compare_args.scenario_path, "Scenario JSON file")
        ->required();
    compare_cmd->add_option("--out", compare_args.out_dir, "Output directory")->required();

    ExportArgs export_args;
    CLI::App* export_cmd = app.add_subcommand("export", "Re-export metrics from a run directory");
    export_cmd->add_option("--run", export_args.run_dir, "Run directory")->required();
    export_cmd->add_option("--format", export_args.format, "json or csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    if (run_cmd->parsed()) {
        if (seed_opt->count() > 0) run_args.seed = seed_value;
        return cmd_run(run_args, std::cout, std::cerr);
    }
    if (verify_cmd->parsed()) return cmd_verify(verify_args, std::cout, std::cerr);
    if (inspect_cmd->parsed()) {
        if (account_opt->count() > 0) inspect_args.account = inspect_account;
        return cmd_inspect(inspect_args, std::cout, std::cerr);
    }
    if (compare_cmd->parsed()) return cmd_compare(compare_args, std::cout, std::cerr);
    if (export_cmd->parsed()) return cmd_export(export_args, std::cout, std::cerr);
    return kExitConfig;
}

}  // namespace tollsim::cli
