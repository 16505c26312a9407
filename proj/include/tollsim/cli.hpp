#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace tollsim::cli {

// Exit code contract: 0 success, 1 I/O, 2 config, 3 verification failure,
// 4 unknown account.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitVerifyFailed = 3;
inline constexpr int kExitUnknownAccount = 4;

struct RunArgs {
    std::string scenario_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    bool transcript = false;
};

struct VerifyArgs {
    std::string chain_path;
};

struct InspectArgs {
    std::string chain_path;
    std::optional<std::string> account;
};

struct CompareArgs {
    std::string scenario_path;
    std::string out_dir;
};

struct ExportArgs {
    std::string run_dir;
    std::string format;  // json | csv
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);
int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err);
int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace tollsim::cli
