#include "maturix/compartmental.hpp"

#include "dopri5.hpp"
#include "maturix/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace maturix {

// ---------------------------------------------------------------------------
// Builder

CompartmentalSystem::Builder::Builder(std::size_t compartments)
    : n_(compartments), inflow_(compartments), outflow_(compartments) {
    if (compartments == 0) throw InvalidArgument("a compartmental system needs at least one compartment");
}

CompartmentalSystem::ScheduleId CompartmentalSystem::Builder::add_schedule(RateSchedule schedule) {
    schedules_.push_back(std::move(schedule));
    return schedules_.size() - 1;
}

CompartmentalSystem::Builder& CompartmentalSystem::Builder::inflow(std::size_t i, ScheduleId rate) {
    if (i >= n_ || rate >= schedules_.size()) throw InvalidArgument("inflow: index out of range");
    inflow_[i] = rate;
    return *this;
}

CompartmentalSystem::Builder& CompartmentalSystem::Builder::outflow(std::size_t i, ScheduleId rate) {
    if (i >= n_ || rate >= schedules_.size()) throw InvalidArgument("outflow: index out of range");
    outflow_[i].push_back(rate);
    return *this;
}

CompartmentalSystem::Builder& CompartmentalSystem::Builder::transfer(std::size_t from, std::size_t to,
                                                                     ScheduleId rate) {
    if (from >= n_ || to >= n_ || rate >= schedules_.size()) {
        throw InvalidArgument("transfer: index out of range");
    }
    if (from == to) throw InvalidArgument("transfer: diagonal entries are not allowed");
    transfers_.push_back({from, to, rate});
    return *this;
}

CompartmentalSystem::Builder& CompartmentalSystem::Builder::allow_amplification(bool allow) {
    amplification_ = allow;
    return *this;
}

CompartmentalSystem CompartmentalSystem::Builder::build() const {
    CompartmentalSystem s;
    s.n_ = n_;
    s.schedules_ = schedules_;
    s.inflow_ = inflow_;
    s.outflow_ = outflow_;
    s.transfers_ = transfers_;
    s.amplification_ = amplification_;
    s.is_transfer_rate_.assign(schedules_.size(), false);
    for (const auto& in : inflow_) {
        if (in) s.is_transfer_rate_[*in] = true;
    }
    for (const auto& tr : transfers_) s.is_transfer_rate_[tr.rate] = true;
    for (std::size_t id = 0; id < schedules_.size(); ++id) {
        const bool outflow_only = !s.is_transfer_rate_[id];
        // Constant schedules can be checked once here; the rest at evaluation.
        if (schedules_[id].kind() == RateSchedule::Kind::constant && schedules_[id].constant_value() < 0.0 &&
            !(outflow_only && amplification_)) {
            throw InvalidArgument("negative rate value in compartmental system");
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Evaluation

void CompartmentalSystem::evaluate_schedules(double t, std::vector<double>& out) const {
    out.resize(schedules_.size());
    for (std::size_t id = 0; id < schedules_.size(); ++id) {
        const double v = schedules_[id](t);
        if (v < 0.0 && (is_transfer_rate_[id] || !amplification_)) {
            throw InvalidArgument("negative rate value " + std::to_string(v) + " at t = " + std::to_string(t));
        }
        out[id] = v;
    }
}

void CompartmentalSystem::drift_into(double t, const Eigen::Ref<const Eigen::VectorXd>& q,
                                     Eigen::Ref<Eigen::VectorXd> out, std::vector<double>& scratch) const {
    evaluate_schedules(t, scratch);
    for (std::size_t i = 0; i < n_; ++i) {
        double loss = 0.0;
        for (ScheduleId id : outflow_[i]) loss += scratch[id];
        out[static_cast<Eigen::Index>(i)] =
            (inflow_[i] ? scratch[*inflow_[i]] : 0.0) - loss * q[static_cast<Eigen::Index>(i)];
    }
    for (const auto& tr : transfers_) {
        const double flow = scratch[tr.rate] * q[static_cast<Eigen::Index>(tr.from)];
        out[static_cast<Eigen::Index>(tr.from)] -= flow;
        out[static_cast<Eigen::Index>(tr.to)] += flow;
    }
}

std::vector<double> CompartmentalSystem::breakpoints(double t0, double t1) const {
    std::vector<double> all;
    for (const auto& s : schedules_) all.insert(all.end(), s.breakpoints().begin(), s.breakpoints().end());
    std::vector<double> out;
    for (double b : all) {
        if (b > t0 && b < t1) out.push_back(b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> Trajectory::component(std::size_t i) const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v[static_cast<Eigen::Index>(i)]);
    return out;
}

Eigen::MatrixXd transfer_matrix(const CompartmentalSystem& system, double t) {
    std::vector<double> rates;
    system.evaluate_schedules(t, rates);
    const auto n = static_cast<Eigen::Index>(system.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < system.size(); ++i) {
        for (auto id : system.outflow(i)) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= rates[id];
    }
    for (const auto& tr : system.transfers()) {
        const auto from = static_cast<Eigen::Index>(tr.from);
        const auto to = static_cast<Eigen::Index>(tr.to);
        m(to, from) += rates[tr.rate];
        m(from, from) -= rates[tr.rate];
    }
    return m;
}

Eigen::VectorXd drift(const CompartmentalSystem& system, double t, const Eigen::VectorXd& q) {
    if (static_cast<std::size_t>(q.size()) != system.size()) {
        throw InvalidArgument("drift: state has " + std::to_string(q.size()) + " entries, system has " +
                              std::to_string(system.size()));
    }
    Eigen::VectorXd out(q.size());
    std::vector<double> scratch;
    system.drift_into(t, q, out, scratch);
    return out;
}

// ---------------------------------------------------------------------------
// Integration

namespace {

auto make_solver(const CompartmentalSystem& system, const IntegrationOptions& options) {
    auto rhs = [&system, scratch = std::vector<double>()](double t, const Eigen::VectorXd& q,
                                                          Eigen::VectorXd& out) mutable {
        system.drift_into(t, q, out, scratch);
    };
    detail::Dopri5Settings settings;
    settings.rtol = options.tol;
    settings.atol = options.tol;
    settings.initial_step = options.initial_step;
    settings.max_step = options.max_step;
    settings.max_steps = options.max_steps;
    return detail::Dopri5<decltype(rhs)>(std::move(rhs), system.size(), settings);
}

void check_inputs(const CompartmentalSystem& system, const Eigen::VectorXd& q0, double t0, double t1,
                  double tol) {
    if (static_cast<std::size_t>(q0.size()) != system.size()) {
        throw InvalidArgument("integrate: initial state has wrong dimension");
    }
    if (!(t1 >= t0)) throw InvalidArgument("integrate: requires t1 >= t0");
    if (!(tol > 0.0)) throw InvalidArgument("integrate: tol must be positive");
    if (!q0.allFinite()) throw InvalidArgument("integrate: initial state must be finite");
}

}  // namespace

Trajectory integrate(const CompartmentalSystem& system, const Eigen::VectorXd& q0, double t0, double t1,
                     double tol) {
    check_inputs(system, q0, t0, t1, tol);
    IntegrationOptions options;
    options.tol = tol;
    auto solver = make_solver(system, options);

    Trajectory traj;
    traj.tolerance = tol;
    traj.times.push_back(t0);
    traj.values.push_back(q0);
    Eigen::VectorXd y = q0;
    double start = t0;
    auto stops = system.breakpoints(t0, t1);
    stops.push_back(t1);
    for (double stop : stops) {
        solver.advance(start, stop, y, [&](const auto&, double t_new, const Eigen::VectorXd& ynew) {
            traj.times.push_back(t_new);
            traj.values.push_back(ynew);
        });
        start = stop;
    }
    traj.accepted_steps = solver.accepted();
    traj.rejected_steps = solver.rejected();
    return traj;
}

Trajectory integrate_on_grid(const CompartmentalSystem& system, const Eigen::VectorXd& q0, double t0,
                             std::span<const double> grid, const IntegrationOptions& options) {
    if (grid.empty()) throw InvalidArgument("integrate_on_grid: empty grid");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!std::isfinite(grid[k]) || grid[k] < t0 || (k > 0 && !(grid[k] > grid[k - 1]))) {
            throw InvalidArgument("integrate_on_grid: grid must be strictly increasing and start at or after t0");
        }
    }
    const double t1 = grid.back();
    check_inputs(system, q0, t0, t1, options.tol);
    auto solver = make_solver(system, options);

    Trajectory traj;
    traj.tolerance = options.tol;
    traj.times.assign(grid.begin(), grid.end());
    traj.values.reserve(grid.size());
    std::size_t next = 0;
    while (next < grid.size() && grid[next] == t0) {
        traj.values.push_back(q0);
        ++next;
    }
    Eigen::VectorXd y = q0;
    double start = t0;
    auto stops = system.breakpoints(t0, t1);
    stops.push_back(t1);
    for (double stop : stops) {
        solver.advance(start, stop, y, [&](const auto& step, double t_new, const Eigen::VectorXd& ynew) {
            while (next < grid.size() && grid[next] <= t_new) {
                traj.values.push_back(grid[next] >= t_new ? ynew : step.at(grid[next]));
                ++next;
            }
        });
        start = stop;
    }
    while (next < grid.size()) {  // only reachable when t1 == t0
        traj.values.push_back(y);
        ++next;
    }
    traj.accepted_steps = solver.accepted();
    traj.rejected_steps = solver.rejected();
    return traj;
}

// ---------------------------------------------------------------------------
// Matrix exponential (Higham 2005, degree 13 only)

Eigen::MatrixXd resolvent_constant(const Eigen::MatrixXd& m, double dt) {
    if (m.rows() != m.cols()) throw InvalidArgument("resolvent_constant: matrix must be square");
    if (!(dt >= 0.0)) throw InvalidArgument("resolvent_constant: dt must be nonnegative");
    if (!m.allFinite() || !std::isfinite(dt)) throw NumericFailure("resolvent_constant: non-finite entries");
    const auto n = m.rows();
    if (dt == 0.0) return Eigen::MatrixXd::Identity(n, n);

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    Eigen::MatrixXd a = dt * m;
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
        a /= std::ldexp(1.0, squarings);
    }
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd u =
        a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    const Eigen::MatrixXd v =
        a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    if (!r.allFinite()) throw NumericFailure("resolvent_constant: non-finite result");
    return r;
}

// ---------------------------------------------------------------------------
// Catenary chain

CompartmentalSystem catenary_system(std::size_t n, double lambda, double rho, double mu, double gamma,
                                    std::size_t n0, const RateSchedule& q) {
    if (n < 2) throw InvalidArgument("catenary_system: needs at least two compartments");
    if (n0 < 1 || n0 > n - 1) {
        throw InvalidArgument("catenary_system: n0 must lie in [1, n-1], got " + std::to_string(n0));
    }
    if (!(lambda >= 0.0 && rho >= 0.0 && mu >= 0.0 && gamma >= 0.0)) {
        throw InvalidArgument("catenary_system: rates must be nonnegative");
    }
    CompartmentalSystem::Builder b(n);
    const auto inflow = b.add_schedule(RateSchedule::constant(lambda));
    const auto transit = b.add_schedule(RateSchedule::constant(rho));
    const auto elimination = b.add_schedule(RateSchedule::constant(mu));
    b.inflow(0, inflow);
    for (std::size_t i = 0; i + 1 < n; ++i) b.transfer(i, i + 1, transit);
    b.outflow(n - 1, elimination);
    if (gamma > 0.0) {
        const auto killing = b.add_schedule(q.scaled(gamma));
        for (std::size_t i = 0; i < n0; ++i) b.outflow(i, killing);
    }
    return b.build();
}

Eigen::VectorXd equilibrium_init(double lambda, double rho, double mu, std::size_t n) {
    if (!(rho > 0.0) || !(mu > 0.0)) throw InvalidArgument("equilibrium_init: rho and mu must be positive");
    if (n == 0) throw InvalidArgument("equilibrium_init: n must be positive");
    Eigen::VectorXd q = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), lambda / rho);
    q[static_cast<Eigen::Index>(n) - 1] = lambda / mu;
    return q;
}

}  // namespace maturix
