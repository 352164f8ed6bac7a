#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace deepframe {

enum class OutputFormat { json, csv };

struct RunConfig {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::string out;  // empty: stdout
    std::uint64_t seed = 0;
    OutputFormat format = OutputFormat::json;
    int verbosity = 0;

    std::string params;
    std::string input_vectors;
    std::string method = "bcd";
    int iters = 0;  // 0: subcommand default
    double lambda = 0.1;
    std::optional<std::int64_t> max_params;
    int restarts = 5;
    double refine_exponent = 0.0;
    int threads = 1;
    std::string export_frame;
    std::string trajectory;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumerical = 2;

// Full command line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_analyze(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_minimize(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_rank(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_infer(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace deepframe
