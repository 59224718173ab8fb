#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "experiment.hpp"
#include "mlemsparse/certify.hpp"
#include "mlemsparse/mlem.hpp"

namespace mlemsparse::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kCondition = 3,
  kCapability = 4,
};

struct GlobalOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
  bool quiet = false;
};

/// Configuration after applying command-line overrides; validated.
ExperimentConfig resolve_config(const GlobalOptions& g);

struct BoundsArgs {
  int m = 0;
  double epsilon = 0.0;
  std::vector<double> n;
  std::vector<double> t;
  std::optional<double> gamma;
  bool csv = false;
};

struct PhantomArgs {
  bool ascii = false;
  bool export_operator = false;
};

int cmd_solve(const GlobalOptions& g, std::ostream& out, std::ostream& log);
int cmd_certify(const GlobalOptions& g, std::ostream& out, std::ostream& log);
int cmd_bounds(const BoundsArgs& args, std::ostream& out);
int cmd_dirac_demo(const GlobalOptions& g, std::ostream& out, std::ostream& log);
int cmd_montecarlo(const GlobalOptions& g, std::ostream& out, std::ostream& log);
int cmd_phantom(const GlobalOptions& g, const PhantomArgs& args, std::ostream& out,
                std::ostream& log);

/// Parses argv and dispatches; errors are reported on `err` and mapped to
/// exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Pieces shared with tests.

/// Diagnostics CSV (header plus one row per record).
std::string diagnostics_csv(const std::vector<IterateDiagnostics>& trace);
/// CertificateReport as a JSON document.
std::string certificate_json(const CertificateReport& report);
/// Separable Gaussian blur with standard deviation sigma in pixels,
/// truncated at four sigma, zero padded.
Vector gaussian_smooth(const Grid& grid, std::span<const double> values, double sigma);

}  // namespace mlemsparse::cli
