#ifndef GNSP_TOOLS_CLI_HPP
#define GNSP_TOOLS_CLI_HPP

// Command implementations behind the `gnsp` executable. Each returns the
// process exit code and writes diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace gnsp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // selftest violation
inline constexpr int kExitConfig = 2;   // bad config or malformed input
inline constexpr int kExitRuntime = 3;

int cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir,
            std::optional<std::uint64_t> seed, std::ostream& log, std::ostream& err);

struct SelftestOptions {
    bool perturb_projector = false;  // negative control: scale every projector by 1 + 1e-4
};
int cmd_selftest(const SelftestOptions& options, std::ostream& out);

int cmd_plot(const std::filesystem::path& in, const std::filesystem::path& out_svg, bool log_y,
             std::ostream& err);

// With no config the shipped defaults are assumed.
int cmd_eval(const std::filesystem::path& checkpoint, const std::optional<std::filesystem::path>& config,
             std::ostream& out, std::ostream& err);
int cmd_export_embeddings(const std::filesystem::path& checkpoint, const std::string& probe,
                          const std::filesystem::path& out_csv,
                          const std::optional<std::filesystem::path>& config, std::ostream& err);

// SVG text for a chart CSV (gap, spectra, or x-then-series columns). Throws CsvError.
std::string render_svg(std::istream& csv, bool log_y);

}  // namespace gnsp::cli

#endif  // GNSP_TOOLS_CLI_HPP
