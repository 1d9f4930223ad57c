#pragma once

#include "maturix/explicit_model.hpp"
#include "maturix/rate_schedule.hpp"
#include "maturix/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maturix {

/// Multi-dose infusion kinetics: dose d starts at d * dose_interval and is
/// infused over infusion_duration; the level rises as 1 - e^{-a t} during the
/// infusion and then decays at rate b.
struct DrugKinetics {
    double a_kin = 1.86;
    double b_kin = 0.51;
    unsigned n_doses = 5;
    double dose_interval = 24.0;
    double infusion_duration = 0.5;

    void validate() const;
};

double drug_concentration(const DrugKinetics& kin, double t);

/// Exact antiderivative of drug_concentration with value 0 at t = 0.
double drug_concentration_primitive(const DrugKinetics& kin, double t);

/// q(t) as a schedule with its breakpoints and exact primitive.
RateSchedule drug_schedule(const DrugKinetics& kin);

struct Observation {
    double t = 0.0;
    double y = 0.0;
};

enum class ModelKind { catenary, continuous };

std::string to_string(ModelKind kind);

/// Parameters shared by both approaches. `rho` is always the maturation
/// speed 1/tau; a chain of n compartments uses the per-compartment transfer
/// rate (n - 1) rho, so the same rho describes the same mean lag.
/// `delta` is used by the continuous model, `n0` by the chain.
struct ModelParameters {
    double lambda = 0.0;
    double rho = 0.0;
    double mu = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    std::size_t n0 = 0;
};

/// Box constraints. Parameters with a positive lower bound are searched on a
/// log scale, the others (gamma, delta) linearly.
struct ParameterBounds {
    std::array<double, 2> lambda{0.1, 100.0};
    std::array<double, 2> rho{0.01, 2.0};
    std::array<double, 2> mu{0.001, 1.0};
    std::array<double, 2> gamma{0.0, 5.0};
    std::array<double, 2> delta{0.0, 0.99};

    void validate() const;
};

struct FitOptions {
    std::size_t starts = 8;              // latin-hypercube starts per fit
    std::size_t max_iterations = 2000;   // per Nelder-Mead run
    double simplex_tol = 1e-8;
    std::size_t restarts = 1;            // fresh simplex around each converged point
    double initial_step = 0.5;           // simplex size for latin-hypercube starts (logit units)
    double warm_step = 0.1;              // simplex size for initial guesses and warm starts
    bool polish = true;                  // Levenberg-Marquardt refinement of the winner
    std::uint64_t seed = 0;
    /// Extra starting points tried before the latin-hypercube ones.
    std::vector<ModelParameters> initial_guesses;
    /// Chain screening: also start each n0 from the optimum of n0 - 1.
    bool chain_warm_start = true;
    /// Chain screening: latin-hypercube starts per n0 (defaults to `starts`).
    std::optional<std::size_t> screening_starts;
    double ode_tol = 1e-8;
    ExplicitOptions explicit_options{1e-10, 1e-11};
};

struct FitProblem {
    std::vector<Observation> observations;
    ModelKind kind = ModelKind::continuous;
    std::size_t n = 0;  // chain length, catenary kind only
    std::optional<std::size_t> n0;  // catenary kind: fit this n0 only instead of screening 1..n-1
    ParameterBounds bounds;
    DrugKinetics kinetics;
    FitOptions options;

    void validate() const;
};

struct ScreeningEntry {
    std::size_t n0;
    double rss;
};

struct FitResult {
    ModelKind kind = ModelKind::continuous;
    std::size_t n = 0;
    ModelParameters parameters;
    double rss = 0.0;
    std::size_t evaluations = 0;
    double runtime_s = 0.0;
    bool converged = false;
    /// RSS at every starting point of the winning fit (same order as tried).
    std::vector<double> start_rss;
    /// Best RSS per screened n0 (catenary kind).
    std::vector<ScreeningEntry> screening;
};

/// Q_n(t_j) of the chain started at the drug-free equilibrium at t = 0.
std::vector<double> predict_catenary(const ModelParameters& params, std::size_t n, const DrugKinetics& kin,
                                     std::span<const double> times, double tol = 1e-8);

/// Q_inf(t_j) of the continuous model with killing gamma q(t) on [0, delta).
std::vector<double> predict_continuous(const ModelParameters& params, const DrugKinetics& kin,
                                       std::span<const double> times, const ExplicitOptions& options = {});

/// Chain n0 matching a continuous killing fraction delta: round(delta (n - 1)),
/// clamped to [1, n - 1].
std::size_t chain_n0_for(double delta, std::size_t n);

double residual_sum_of_squares(std::span<const Observation> data, std::span<const double> prediction);

/// Ordinary least squares by multi-start Nelder-Mead; for the catenary kind
/// every n0 in 1..n-1 gets its own fit and the smallest RSS wins (ties go to
/// the lowest start index, then the lowest n0).
FitResult fit(const FitProblem& problem);

/// Predictions plus independent N(0, noise_sd^2) noise, clipped at 0.
std::vector<Observation> generate_synthetic(const ModelParameters& params, ModelKind kind, std::size_t n,
                                            const DrugKinetics& kin, std::span<const double> times,
                                            double noise_sd, RngStream& rng);

struct BenchmarkRow {
    std::string model;
    FitResult result;
    /// Wall time of the fits actually run. Equals result.runtime_s except for
    /// estimated chain rows.
    double measured_s = 0.0;
    bool estimated = false;
};

enum class ChainTiming {
    /// One fit at the n0 matching the continuous delta; runtime_s is
    /// (n - 1) times its wall time.
    estimated,
    /// Every n0 is fitted; runtime_s is the measured total.
    exhaustive,
};

/// Fits the continuous model, then a chain for every size in chain_sizes,
/// each started from the continuous optimum as well.
std::vector<BenchmarkRow> benchmark_compare(const std::vector<Observation>& data,
                                            std::span<const std::size_t> chain_sizes, const FitProblem& base,
                                            ChainTiming timing = ChainTiming::estimated);

/// CSV `model,lambda,rho,mu,gamma,n0,delta,rss,runtime_s,evaluations,converged,measured_s,estimated`.
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);

}  // namespace maturix
