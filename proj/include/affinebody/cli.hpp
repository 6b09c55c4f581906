#pragma once

// Scenario configuration, CSV output and the subcommands of the simulator.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "affinebody/integrate.hpp"

namespace affinebody::cli {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

struct Violation {
  std::string path;  // dotted key path, e.g. "inertia.J"
  std::string reason;
};

/// Every violation found in a configuration document.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InertiaConfig {
  double m = 1.0;
  std::optional<Mat> J;
  std::optional<double> I;  // isotropic moment; J = I eta^-1
};

struct InitialConfig {
  Vec x;
  Mat phi;
  Vec xdot;
  Mat phidot;
  std::optional<Vec> mu;
};

struct ForceConfig {
  std::vector<PotentialTerm> potential;
  double nu = 0.0;
  double zeta = 0.0;
  double V0 = 1.0;
};

struct ConstraintConfig {
  ConstraintKind kind = ConstraintKind::Free;
  std::optional<Procedure> procedure;  // dalembert when omitted
  bool frozen_rotation = false;
};

struct OutputConfig {
  std::string path = "trajectory.csv";
  std::vector<std::string> fields;  // column groups, canonical order
};

struct CompareConfig {
  double threshold = 1e-3;
};

struct ScenarioConfig {
  int dim = 2;
  Mat g;
  Mat eta;
  InertiaConfig inertia;
  InitialConfig initial;
  ForceConfig force;
  ConstraintConfig constraint;
  IntegratorSpec integrator;
  OutputConfig output;
  CompareConfig compare;
};

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

/// Column groups accepted in output.fields, in output order.
const std::vector<std::string>& known_fields();
/// Groups written when output.fields is omitted.
const std::vector<std::string>& default_fields();

/// Parses and validates a JSON scenario document, filling defaults.  Throws
/// SchemaError listing all violations.
ScenarioConfig parse_config(const std::string& text);

/// Fully resolved document; parse_config(print_config(c)) == c.
std::string print_config(const ScenarioConfig& config);

SimulationSetup make_setup(const ScenarioConfig& config);
PhaseState initial_state(const ScenarioConfig& config);

/// Column names for the selected groups.
std::vector<std::string> csv_header(const ScenarioConfig& config, int mu_count);

/// CSV document: "# " comment lines with the resolved config, the header
/// row, one row per sample (17 significant digits) and a trailing status
/// comment.
std::string trajectory_csv(const ScenarioConfig& config, const Trajectory& trajectory,
                           const std::string& command);

/// Writes through a temporary file in the same directory and renames it.
/// Throws IoError.
void write_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

enum class LogLevel { Off, Info, Debug };

/// Level from AFFINEBODY_LOG (off, info, debug); unset means off.
LogLevel log_level_from_env();

struct RunOptions {
  std::optional<std::string> out;
  std::optional<double> h;
  std::uint64_t seed = 42;
  bool quiet = false;
  LogLevel log = LogLevel::Off;
};

int run_simulate(const ScenarioConfig& config, const RunOptions& options, std::ostream& out,
                 std::ostream& err);

struct CompareReport {
  double max_divergence = 0.0;
  double t_of_max = 0.0;
  std::optional<double> first_exceedance;
  double threshold = 0.0;
  std::size_t samples = 0;
};

/// Runs both procedures from the same initial data (mu(0) = 0 unless given)
/// and writes <stem>_dalembert.csv, <stem>_vakonomic.csv,
/// <stem>_divergence.csv, <stem>_report.json and <stem>_divergence.gp.
int run_compare(const ScenarioConfig& config, const RunOptions& options, std::ostream& out,
                std::ostream& err, CompareReport* report = nullptr);

/// Reads a matrix (and optional metrics) from a file or an inline JSON array
/// such as "[[2,0],[0,3]]".
struct DecomposeInput {
  Mat phi;
  Mat g;
  Mat eta;
};
DecomposeInput parse_decompose_input(const std::string& arg);

/// Prints the polar and two-polar factors, invariants and reconstruction
/// residuals as JSON.
int run_decompose(const DecomposeInput& input, const RunOptions& options, std::ostream& out,
                  std::ostream& err);

/// Runs the self-check suite and prints a pass/fail table.
int run_check(const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace affinebody::cli
