#pragma once

#include "maturix/rate_schedule.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace maturix {

/// Finite compartmental system with time-dependent linear rates:
///
///   dQ_i/dt = lambda_i(t) + sum_{j != i} rho_ji(t) Q_j - Q_i [kappa_i(t) + sum_{j != i} rho_ij(t)]
///
/// Rate schedules are stored once in a table and referenced by index, so a
/// schedule shared by many compartments (the drug-driven killing of a
/// catenary chain, for instance) is evaluated once per time point.
class CompartmentalSystem {
public:
    using ScheduleId = std::size_t;

    struct Transfer {
        std::size_t from;
        std::size_t to;
        ScheduleId rate;
    };

    class Builder {
    public:
        explicit Builder(std::size_t compartments);

        ScheduleId add_schedule(RateSchedule schedule);

        Builder& inflow(std::size_t i, ScheduleId rate);
        Builder& inflow(std::size_t i, RateSchedule rate) { return inflow(i, add_schedule(std::move(rate))); }
        /// Outflows accumulate: calling twice on the same compartment adds both rates.
        Builder& outflow(std::size_t i, ScheduleId rate);
        Builder& outflow(std::size_t i, RateSchedule rate) { return outflow(i, add_schedule(std::move(rate))); }
        Builder& transfer(std::size_t from, std::size_t to, ScheduleId rate);
        Builder& transfer(std::size_t from, std::size_t to, RateSchedule rate) {
            return transfer(from, to, add_schedule(std::move(rate)));
        }
        /// Permit negative outflow values (proportional auto-inflow).
        Builder& allow_amplification(bool allow = true);

        CompartmentalSystem build() const;

    private:
        std::size_t n_;
        std::vector<RateSchedule> schedules_;
        std::vector<std::optional<ScheduleId>> inflow_;
        std::vector<std::vector<ScheduleId>> outflow_;
        std::vector<Transfer> transfers_;
        bool amplification_ = false;
    };

    std::size_t size() const { return n_; }
    bool amplification() const { return amplification_; }

    const std::vector<RateSchedule>& schedules() const { return schedules_; }
    const std::optional<ScheduleId>& inflow(std::size_t i) const { return inflow_[i]; }
    const std::vector<ScheduleId>& outflow(std::size_t i) const { return outflow_[i]; }
    const std::vector<Transfer>& transfers() const { return transfers_; }

    /// Values of every schedule at t, indexed by ScheduleId. Throws
    /// InvalidArgument if a rate is negative where that is not permitted.
    void evaluate_schedules(double t, std::vector<double>& out) const;

    /// In-place drift lambda(t) + M(t) Q using a preallocated scratch buffer.
    void drift_into(double t, const Eigen::Ref<const Eigen::VectorXd>& q, Eigen::Ref<Eigen::VectorXd> out,
                    std::vector<double>& scratch) const;

    /// Every schedule breakpoint in (t0, t1), sorted.
    std::vector<double> breakpoints(double t0, double t1) const;

private:
    CompartmentalSystem() = default;

    std::size_t n_ = 0;
    std::vector<RateSchedule> schedules_;
    std::vector<std::optional<ScheduleId>> inflow_;
    std::vector<std::vector<ScheduleId>> outflow_;
    std::vector<Transfer> transfers_;
    std::vector<bool> is_transfer_rate_;
    bool amplification_ = false;
};

/// Solution samples of the compartmental ODE.
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> values;
    double tolerance = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    /// Values of compartment i over the grid.
    std::vector<double> component(std::size_t i) const;
};

struct IntegrationOptions {
    double tol = 1e-8;          // mixed relative/absolute local error target
    double initial_step = 0.0;  // 0 picks a step automatically
    double max_step = 0.0;      // 0 means unbounded
    std::size_t max_steps = 10'000'000;
};

/// M(t): off-diagonal (i, j) = rho_ji(t); diagonal i = -sum_k rho_ik(t) - kappa_i(t).
Eigen::MatrixXd transfer_matrix(const CompartmentalSystem& system, double t);

/// Affine drift lambda(t) + M(t) q.
Eigen::VectorXd drift(const CompartmentalSystem& system, double t, const Eigen::VectorXd& q);

/// Adaptive Dormand-Prince 5(4) solution on [t0, t1]. The returned grid is
/// the accepted-step grid; it contains every schedule breakpoint in the
/// window (the integration restarts there).
Trajectory integrate(const CompartmentalSystem& system, const Eigen::VectorXd& q0, double t0, double t1,
                     double tol = 1e-8);

/// Same integration, reported on a user grid (sorted, within [t0, last])
/// through the method's 4th-order dense output. The grid may start after t0.
Trajectory integrate_on_grid(const CompartmentalSystem& system, const Eigen::VectorXd& q0, double t0,
                             std::span<const double> grid, const IntegrationOptions& options = {});

/// exp(dt * M) by scaling and squaring with a degree-13 Pade approximant.
Eigen::MatrixXd resolvent_constant(const Eigen::MatrixXd& m, double dt);

/// Catenary chain of n compartments: inflow lambda into compartment 1,
/// transfer rho along the chain, killing gamma * q(t) on compartments
/// 1..n0 and elimination mu from compartment n. Indices are 1-based in the
/// naming, 0-based in the resulting system.
CompartmentalSystem catenary_system(std::size_t n, double lambda, double rho, double mu, double gamma,
                                    std::size_t n0, const RateSchedule& q);

/// Drug-free steady state (lambda/rho, ..., lambda/rho, lambda/mu).
Eigen::VectorXd equilibrium_init(double lambda, double rho, double mu, std::size_t n);

}  // namespace maturix
