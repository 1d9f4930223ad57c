#pragma once

#include "maturix/compartmental.hpp"
#include "maturix/distributions.hpp"
#include "maturix/explicit_model.hpp"
#include "maturix/fitting.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace maturix::cli {

/// Killing profile q(t) of a spec file.
struct QSpec {
    std::string type = "zero";  // zero | constant | drug_kinetics | biexponential_pulse
    double value = 0.0;         // constant
    DrugKinetics kinetics;      // drug_kinetics
    double start = 0.0;         // biexponential_pulse: (e^{-(t-start)/slow} - e^{-(t-start)/fast}) 1{t >= start}
    double slow = 10.0;
    double fast = 2.0;

    RateSchedule schedule() const;
};

struct KillingSpec {
    std::string type = "none";  // none | partial
    double gamma = 0.0;
    double delta = 0.0;
    QSpec q;
};

struct EvaluateSpec {
    std::optional<double> from;
    std::optional<double> to;
    std::optional<double> step;
    std::string output = "mean_count";  // mean_count | q_infinity (continuous model)
    unsigned initial_count = 0;         // N at `from` for mean_count
    std::string initial = "equilibrium";  // catenary start: equilibrium | zero
    bool include_q = false;
};

struct SimulationSpec {
    std::uint64_t seed = 0;
    std::size_t replicas = 1000;
    unsigned initial_count = 0;
    std::string initial_law = "fixed";  // fixed | equilibrium
    double start = 0.0;
    std::optional<double> at;
};

/// Parsed, validated model spec file.
struct ModelSpec {
    std::string model = "continuous";  // continuous | catenary
    double lambda = 1.0;
    std::optional<double> lambda_support_start;
    double rho = 1.0;  // maturation speed; a chain uses (n - 1) rho per compartment
    double mu = 1.0;
    std::size_t n = 0;
    std::optional<std::size_t> n0;
    KillingSpec killing;
    EvaluateSpec evaluate;
    SimulationSpec simulation;
    ParameterBounds bounds;
    FitOptions fit;
    std::optional<double> tol;
    std::string hash;  // SHA-256 of the file contents

    ContinuousModel continuous_model() const;
    CompartmentalSystem catenary() const;
    std::size_t chain_n0() const;
    DrugKinetics kinetics() const;
};

/// Throws InvalidArgument on malformed JSON, unknown keys or invalid values.
ModelSpec parse_spec(const std::string& text);
ModelSpec load_spec(const std::string& path);

/// CSV `t,y` with a header line; InvalidArgument names the offending line.
std::vector<Observation> parse_observations(std::istream& in);
std::vector<Observation> load_observations(const std::string& path);

std::string sha256_hex(const std::string& data);

struct EvaluateArgs {
    std::optional<double> from;
    std::optional<double> to;
    std::optional<double> step;
    std::optional<double> tol;
};
void cmd_evaluate(const ModelSpec& spec, const EvaluateArgs& args, std::ostream& out);

struct SimulateArgs {
    std::optional<double> at;
    std::optional<std::size_t> replicas;
    std::optional<std::uint64_t> seed;
    std::ostream* path_out = nullptr;  // counting path of replica 0 as `t,n`
};
struct SimulationReport {
    double at = 0.0;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
    std::vector<double> empirical;
    std::vector<double> exact;
    double tv = 0.0;
    std::optional<ChiSquareResult> chi_square;
    double mean_empirical = 0.0;
    double mean_exact = 0.0;
};
SimulationReport cmd_simulate(const ModelSpec& spec, const SimulateArgs& args, std::ostream& out);

struct FitArgs {
    std::optional<ModelKind> kind;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
};
FitResult cmd_fit(const ModelSpec& spec, const std::vector<Observation>& data, const FitArgs& args,
                  std::ostream& out);

struct CompareArgs {
    std::vector<std::size_t> chains;
    std::optional<std::uint64_t> seed;
    ChainTiming timing = ChainTiming::estimated;
};
std::vector<BenchmarkRow> cmd_compare(const ModelSpec& spec, const std::vector<Observation>& data,
                                      const CompareArgs& args, std::ostream& out);

/// Full command-line entry point; returns the process exit code
/// (0 ok, 2 invalid input, 3 numeric failure, 4 optimizer non-convergence).
int run(int argc, const char* const* argv);

}  // namespace maturix::cli
