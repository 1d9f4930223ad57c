#pragma once

#include "maturix/compartmental.hpp"
#include "maturix/explicit_model.hpp"
#include "maturix/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace maturix {

// ---------------------------------------------------------------------------
// Thinning machinery

struct MajorantOptions {
    std::size_t cells_per_interval = 16;
    std::size_t samples_per_cell = 8;
    double safety = 1.05;
};

/// Piecewise-constant upper bound of a nonnegative function on [t0, t1].
///
/// Every breakpoint interval is cut into equal cells; the bound on a cell is
/// `safety` times the largest of a few sampled values. This is an
/// approximation: a sharp peak between samples can exceed it, which the
/// samplers detect and report as NumericFailure.
class PiecewiseMajorant {
public:
    struct Cell {
        double start;
        double end;
        double bound;
    };

    PiecewiseMajorant(const std::function<double(double)>& f, std::span<const double> breakpoints, double t0,
                      double t1, const MajorantOptions& options = {});

    const std::vector<Cell>& cells() const { return cells_; }

private:
    std::vector<Cell> cells_;
};

/// Sorted event times of a point process on a window.
struct PointSet {
    double window_start = 0.0;
    double window_end = 0.0;
    std::vector<double> times;
};

/// Inhomogeneous Poisson sampler by thinning against a PiecewiseMajorant.
/// Build once, sample many replicas.
class PoissonSampler {
public:
    PoissonSampler(std::function<double(double)> intensity, std::span<const double> breakpoints, double t0,
                   double t1, const MajorantOptions& options = {});
    PoissonSampler(const RateSchedule& intensity, double t0, double t1, const MajorantOptions& options = {});

    PointSet sample(RngStream& rng) const;

private:
    std::function<double(double)> intensity_;
    double t0_;
    double t1_;
    PiecewiseMajorant majorant_;
};

PointSet sample_inhomogeneous_poisson(const RateSchedule& intensity, double t0, double t1, RngStream& rng);

/// First event time after `start` of a point with hazard rate h(t):
/// inverts int_start^T h = E with E ~ Exp(1). Returns +inf when the
/// cumulative hazard never reaches E.
double sample_hazard_time(const RateSchedule& hazard, double start, RngStream& rng);

// ---------------------------------------------------------------------------
// Interacting queue network

struct NetworkState {
    std::vector<unsigned> x;
    double time = 0.0;
};

/// Piecewise-constant sample path of a jump process.
struct JumpPath {
    std::vector<double> times;
    std::vector<std::vector<unsigned>> states;

    /// State in force at time t (t >= times.front()).
    const std::vector<unsigned>& state_at(double t) const;
};

/// Exact simulation of the time-inhomogeneous Markov jump process with
/// births lambda_i(t), transfers x_i rho_ij(t) and deaths x_i kappa_i(t),
/// by thinning against a state-dependent piecewise bound that is refreshed
/// after every jump and at every schedule breakpoint.
class NetworkSimulator {
public:
    NetworkSimulator(const CompartmentalSystem& system, double t0, double t1, const MajorantOptions& options = {});

    JumpPath run(const NetworkState& x0, RngStream& rng) const;

private:
    struct Cell {
        double start;
        double end;
        double birth_bound;               // sum of inflow bounds
        std::vector<double> exit_bound;   // per compartment: outflows + transfers out
    };

    const CompartmentalSystem* system_;
    double t0_;
    double t1_;
    std::vector<Cell> cells_;
};

JumpPath simulate_network(const CompartmentalSystem& system, const NetworkState& x0, double t0, double t1,
                          RngStream& rng);

// ---------------------------------------------------------------------------
// Single particles

enum class ParticleStatus { matured, killed };

struct ParticleOutcome {
    ParticleStatus status = ParticleStatus::killed;
    std::optional<double> maturation_time;  // present iff matured
    std::optional<double> killing_time;     // present iff killed during maturation
    /// Death after maturation (limit particle only): +inf when never killed.
    std::optional<double> mature_death_time;
};

/// Killing rate of the finite chain, kappa(t, i) for i in {0..n}, with a
/// global upper bound used for thinning.
struct ChainKilling {
    std::function<double(double, std::size_t)> rate;
    double bound = 0.0;
};

/// kappa(t, i) = g(t, i/n) for i < n and mu(t) at i = n; the bound is taken
/// over [t0, t1] (dense sampling with a 1.05 margin).
ChainKilling chain_killing_from(const ContinuousModel& model, std::size_t n, double t0, double t1);

/// States 0..n, hop i -> i+1 at rate n * rho, killing at rate kappa(t, i);
/// the particle matures when it reaches state n.
ParticleOutcome simulate_particle_chain(std::size_t n, double rho, const ChainKilling& kappa, double start,
                                        RngStream& rng);

/// Limit particle: moves at speed rho through [0, 1], killed at rate
/// g(t, x(t)) on the way; on survival it matures at start + tau and then
/// dies at rate mu(t).
ParticleOutcome simulate_limit_particle(const ContinuousModel& model, double start, RngStream& rng);

// ---------------------------------------------------------------------------
// Counting process of mature particles

struct CountingPath {
    std::vector<double> times;
    std::vector<unsigned> counts;
};

/// Mature-particle counting process on [t0, t1]: Poisson initiations of
/// intensity lambda on [t0 - tau, t1 - tau], Bernoulli(p(T)) survival marks,
/// lag tau, and independent post-maturation lifetimes with hazard mu. The
/// n0 particles present at t0 get their own mu-lifetimes.
class CountingProcessSimulator {
public:
    CountingProcessSimulator(const ContinuousModel& model, double t0, double t1,
                             const MajorantOptions& options = {});

    /// N_t at each sample time (each in [t0, t1]).
    std::vector<unsigned> run(unsigned n0, std::span<const double> sample_times, RngStream& rng) const;

    /// Full path of N on [t0, t1].
    CountingPath path(unsigned n0, RngStream& rng) const;

private:
    struct Lifetime {
        double birth;
        double death;
    };
    std::vector<Lifetime> lifetimes(unsigned n0, RngStream& rng) const;

    const ContinuousModel* model_;
    double t0_;
    double t1_;
    std::optional<PoissonSampler> initiations_;
};

std::vector<unsigned> simulate_counting_process(const ContinuousModel& model, unsigned n0, double t0, double t1,
                                                std::span<const double> sample_times, RngStream& rng);

}  // namespace maturix
