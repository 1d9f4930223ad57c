#include "maturix/stochastic.hpp"

#include "maturix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace maturix {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<double> window_points(std::span<const double> breakpoints, double t0, double t1) {
    std::vector<double> pts{t0};
    for (double b : breakpoints) {
        if (b > t0 && b < t1) pts.push_back(b);
    }
    pts.push_back(t1);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// Largest sampled value of f on [a, b], one-sided at the ends.
double sampled_sup(const std::function<double(double)>& f, double a, double b, std::size_t samples) {
    const double inset = std::max(1e-12 * (b - a), 8 * std::numeric_limits<double>::epsilon() * std::abs(a));
    double best = 0.0;
    for (std::size_t k = 0; k <= samples; ++k) {
        double t = a + (b - a) * static_cast<double>(k) / static_cast<double>(samples);
        t = std::clamp(t, a + inset, b - inset);
        const double v = f(t);
        if (!std::isfinite(v)) throw NumericFailure("majorant: non-finite rate at t = " + std::to_string(t));
        if (v < 0.0) throw InvalidArgument("majorant: negative rate at t = " + std::to_string(t));
        best = std::max(best, v);
    }
    return best;
}

void check_bound(double value, double bound, double t) {
    if (value > bound * (1.0 + 1e-12) + 1e-300) {
        throw NumericFailure("thinning bound exceeded at t = " + std::to_string(t) +
                             "; refine the majorant cells");
    }
}

}  // namespace

PiecewiseMajorant::PiecewiseMajorant(const std::function<double(double)>& f, std::span<const double> breakpoints,
                                     double t0, double t1, const MajorantOptions& options) {
    if (!(t1 >= t0)) throw InvalidArgument("majorant: requires t1 >= t0");
    if (options.cells_per_interval == 0 || options.samples_per_cell == 0 || !(options.safety >= 1.0)) {
        throw InvalidArgument("majorant: invalid options");
    }
    if (t1 == t0) return;
    const auto pts = window_points(breakpoints, t0, t1);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double a = pts[k];
        const double len = (pts[k + 1] - a) / static_cast<double>(options.cells_per_interval);
        for (std::size_t c = 0; c < options.cells_per_interval; ++c) {
            const double lo = a + len * static_cast<double>(c);
            const double hi = c + 1 == options.cells_per_interval ? pts[k + 1] : lo + len;
            cells_.push_back({lo, hi, options.safety * sampled_sup(f, lo, hi, options.samples_per_cell)});
        }
    }
}

PoissonSampler::PoissonSampler(std::function<double(double)> intensity, std::span<const double> breakpoints,
                               double t0, double t1, const MajorantOptions& options)
    : intensity_(std::move(intensity)), t0_(t0), t1_(t1), majorant_(intensity_, breakpoints, t0, t1, options) {}

PoissonSampler::PoissonSampler(const RateSchedule& intensity, double t0, double t1, const MajorantOptions& options)
    : PoissonSampler([intensity](double t) { return intensity(t); },
                     [&] {
                         auto b = intensity.breakpoints();
                         if (std::isfinite(intensity.support_start())) b.push_back(intensity.support_start());
                         return b;
                     }(),
                     t0, t1, options) {}

PointSet PoissonSampler::sample(RngStream& rng) const {
    PointSet out;
    out.window_start = t0_;
    out.window_end = t1_;
    for (const auto& cell : majorant_.cells()) {
        if (cell.bound <= 0.0) continue;
        double t = cell.start;
        for (;;) {
            t += rng.exponential() / cell.bound;
            if (t >= cell.end) break;
            const double v = intensity_(t);
            check_bound(v, cell.bound, t);
            if (rng.uniform() * cell.bound < v) out.times.push_back(t);
        }
    }
    return out;
}

PointSet sample_inhomogeneous_poisson(const RateSchedule& intensity, double t0, double t1, RngStream& rng) {
    return PoissonSampler(intensity, t0, t1).sample(rng);
}

double sample_hazard_time(const RateSchedule& hazard, double start, RngStream& rng) {
    const double target = rng.exponential();
    if (hazard.is_constant()) {
        const double c = hazard.constant_value();
        return c > 0.0 ? start + target / c : inf;
    }

    std::vector<double> edges;
    for (double b : hazard.breakpoints()) {
        if (b > start) edges.push_back(b);
    }
    if (hazard.support_start() > start) edges.push_back(hazard.support_start());
    std::sort(edges.begin(), edges.end());

    // Locate a bracket [a, b] containing the crossing, then bisect.
    double a = start;
    double acc = 0.0;
    auto try_segment = [&](double b) -> bool {
        const double h = hazard.integral(a, b);
        if (acc + h >= target) return true;
        acc += h;
        a = b;
        return false;
    };
    std::size_t e = 0;
    bool found = false;
    double b = a;
    for (; e < edges.size() && !found; ++e) {
        b = edges[e];
        found = try_segment(b);
    }
    if (!found) {
        double step = std::max(1.0, 0.1 * std::abs(a));
        for (int k = 0; k < 200 && !found; ++k) {
            b = a + step;
            found = try_segment(b);
            step *= 2.0;
            if (!std::isfinite(b) || b > 1e300) break;
        }
        if (!found) return inf;
    }
    const double remaining = target - acc;
    double lo = a;
    double hi = b;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hazard.integral(a, mid) >= remaining) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

const std::vector<unsigned>& JumpPath::state_at(double t) const {
    if (times.empty() || t < times.front()) throw InvalidArgument("JumpPath::state_at: time before the path start");
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return states[static_cast<std::size_t>(it - times.begin()) - 1];
}

NetworkSimulator::NetworkSimulator(const CompartmentalSystem& system, double t0, double t1,
                                   const MajorantOptions& options)
    : system_(&system), t0_(t0), t1_(t1) {
    if (!(t1 >= t0)) throw InvalidArgument("simulate_network: requires t1 >= t0");
    if (system.amplification()) {
        throw InvalidArgument("simulate_network: negative rates have no jump-process interpretation");
    }
    const auto& schedules = system.schedules();
    const std::size_t n = system.size();
    const auto pts = window_points(system.breakpoints(t0, t1), t0, t1);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double a = pts[k];
        const double len = (pts[k + 1] - a) / static_cast<double>(options.cells_per_interval);
        for (std::size_t c = 0; c < options.cells_per_interval; ++c) {
            Cell cell;
            cell.start = a + len * static_cast<double>(c);
            cell.end = c + 1 == options.cells_per_interval ? pts[k + 1] : cell.start + len;
            std::vector<double> sup(schedules.size());
            for (std::size_t s = 0; s < schedules.size(); ++s) {
                const auto& r = schedules[s];
                sup[s] = r.is_constant() ? std::max(0.0, r.constant_value())
                                         : options.safety * sampled_sup([&r](double t) { return r(t); }, cell.start,
                                                                        cell.end, options.samples_per_cell);
            }
            cell.birth_bound = 0.0;
            cell.exit_bound.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (system.inflow(i)) cell.birth_bound += sup[*system.inflow(i)];
                for (auto id : system.outflow(i)) cell.exit_bound[i] += sup[id];
            }
            for (const auto& tr : system.transfers()) cell.exit_bound[tr.from] += sup[tr.rate];
            cells_.push_back(std::move(cell));
        }
    }
}

JumpPath NetworkSimulator::run(const NetworkState& x0, RngStream& rng) const {
    const CompartmentalSystem& sys = *system_;
    const std::size_t n = sys.size();
    if (x0.x.size() != n) throw InvalidArgument("simulate_network: initial state has the wrong dimension");

    JumpPath path;
    std::vector<unsigned> x = x0.x;
    path.times.push_back(t0_);
    path.states.push_back(x);
    std::vector<double> rates;

    for (const auto& cell : cells_) {
        double t = cell.start;
        for (;;) {
            double bound = cell.birth_bound;
            for (std::size_t i = 0; i < n; ++i) bound += x[i] * cell.exit_bound[i];
            if (bound <= 0.0) break;
            t += rng.exponential() / bound;
            if (t >= cell.end) break;

            sys.evaluate_schedules(t, rates);
            const double u = rng.uniform() * bound;
            double acc = 0.0;
            bool fired = false;
            // births
            for (std::size_t i = 0; i < n && !fired; ++i) {
                if (!sys.inflow(i)) continue;
                acc += rates[*sys.inflow(i)];
                if (u < acc) {
                    ++x[i];
                    fired = true;
                }
            }
            // deaths
            for (std::size_t i = 0; i < n && !fired; ++i) {
                if (x[i] == 0) continue;
                double k = 0.0;
                for (auto id : sys.outflow(i)) k += rates[id];
                acc += x[i] * k;
                if (u < acc) {
                    --x[i];
                    fired = true;
                }
            }
            // transfers
            for (std::size_t j = 0; j < sys.transfers().size() && !fired; ++j) {
                const auto& tr = sys.transfers()[j];
                if (x[tr.from] == 0) continue;
                acc += x[tr.from] * rates[tr.rate];
                if (u < acc) {
                    --x[tr.from];
                    ++x[tr.to];
                    fired = true;
                }
            }
            if (fired) {
                path.times.push_back(t);
                path.states.push_back(x);
            } else {
                // Nothing fired, so acc is the full event rate.
                check_bound(acc, bound, t);
            }
        }
    }
    return path;
}

JumpPath simulate_network(const CompartmentalSystem& system, const NetworkState& x0, double t0, double t1,
                          RngStream& rng) {
    return NetworkSimulator(system, t0, t1).run(x0, rng);
}

ChainKilling chain_killing_from(const ContinuousModel& model, std::size_t n, double t0, double t1) {
    if (n == 0) throw InvalidArgument("chain_killing_from: n must be positive");
    if (!(t1 >= t0)) throw InvalidArgument("chain_killing_from: requires t1 >= t0");
    const KillingField g = model.g();
    const RateSchedule mu = model.mu();
    ChainKilling k;
    k.rate = [g, mu, n](double t, std::size_t i) {
        return i < n ? g(t, static_cast<double>(i) / static_cast<double>(n)) : mu(t);
    };
    std::vector<double> bps = g.time_breakpoints();
    bps.insert(bps.end(), mu.breakpoints().begin(), mu.breakpoints().end());
    MajorantOptions opt;
    double bound = 0.0;
    if (!g.is_zero()) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(n);
            PiecewiseMajorant m([&](double t) { return g(t, x); }, bps, t0, t1, opt);
            for (const auto& c : m.cells()) bound = std::max(bound, c.bound);
        }
    }
    PiecewiseMajorant m([&](double t) { return mu(t); }, bps, t0, t1, opt);
    for (const auto& c : m.cells()) bound = std::max(bound, c.bound);
    k.bound = bound;
    return k;
}

ParticleOutcome simulate_particle_chain(std::size_t n, double rho, const ChainKilling& kappa, double start,
                                        RngStream& rng) {
    if (n == 0) throw InvalidArgument("simulate_particle_chain: n must be positive");
    if (!(rho > 0.0)) throw InvalidArgument("simulate_particle_chain: rho must be positive");
    if (!(kappa.bound >= 0.0)) throw InvalidArgument("simulate_particle_chain: negative killing bound");
    const double hop = static_cast<double>(n) * rho;
    const double total = hop + kappa.bound;
    ParticleOutcome out;
    double t = start;
    std::size_t i = 0;
    while (i < n) {
        t += rng.exponential() / total;
        const double u = rng.uniform() * total;
        if (u < hop) {
            ++i;
            continue;
        }
        const double k = kappa.rate(t, i);
        check_bound(k, kappa.bound, t);
        if (u - hop < k) {
            out.status = ParticleStatus::killed;
            out.killing_time = t;
            return out;
        }
    }
    out.status = ParticleStatus::matured;
    out.maturation_time = t;
    return out;
}

ParticleOutcome simulate_limit_particle(const ContinuousModel& model, double start, RngStream& rng) {
    const double tau = model.tau();
    const KillingField& g = model.g();
    ParticleOutcome out;
    if (!g.is_zero()) {
        const double rho = model.rho();
        std::vector<double> bps = g.time_breakpoints();
        for (double x : g.space_breakpoints()) bps.push_back(start + x * tau);
        const auto h = [&](double t) { return g(t, std::min(rho * (t - start), 1.0)); };
        const PiecewiseMajorant m(h, bps, start, start + tau);
        for (const auto& cell : m.cells()) {
            if (cell.bound <= 0.0) continue;
            double t = cell.start;
            for (;;) {
                t += rng.exponential() / cell.bound;
                if (t >= cell.end) break;
                const double v = h(t);
                check_bound(v, cell.bound, t);
                if (rng.uniform() * cell.bound < v) {
                    out.status = ParticleStatus::killed;
                    out.killing_time = t;
                    return out;
                }
            }
        }
    }
    out.status = ParticleStatus::matured;
    out.maturation_time = start + tau;
    out.mature_death_time = sample_hazard_time(model.mu(), start + tau, rng);
    return out;
}

CountingProcessSimulator::CountingProcessSimulator(const ContinuousModel& model, double t0, double t1,
                                                   const MajorantOptions& options)
    : model_(&model), t0_(t0), t1_(t1) {
    if (!(t1 >= t0)) throw InvalidArgument("simulate_counting_process: requires t1 >= t0");
    const double tau = model.tau();
    const double lo = std::max(t0 - tau, model.lambda().support_start());
    const double hi = t1 - tau;
    if (lo < hi) initiations_.emplace(model.lambda(), lo, hi, options);
}

std::vector<CountingProcessSimulator::Lifetime> CountingProcessSimulator::lifetimes(unsigned n0,
                                                                                    RngStream& rng) const {
    const ContinuousModel& model = *model_;
    std::vector<Lifetime> out;
    out.reserve(n0);
    for (unsigned k = 0; k < n0; ++k) out.push_back({t0_, sample_hazard_time(model.mu(), t0_, rng)});
    if (!initiations_) return out;
    const PointSet starts = initiations_->sample(rng);
    const double tau = model.tau();
    for (double u : starts.times) {
        if (rng.uniform() >= survival_probability(model, u)) continue;
        const double born = u + tau;
        out.push_back({born, sample_hazard_time(model.mu(), born, rng)});
    }
    return out;
}

std::vector<unsigned> CountingProcessSimulator::run(unsigned n0, std::span<const double> sample_times,
                                                    RngStream& rng) const {
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        const double s = sample_times[k];
        if (s < t0_ || s > t1_) throw InvalidArgument("simulate_counting_process: sample time outside [t0, t1]");
        if (k > 0 && s < sample_times[k - 1]) {
            throw InvalidArgument("simulate_counting_process: sample times must be sorted");
        }
    }
    // Difference array over the sorted sample times.
    std::vector<long> diff(sample_times.size() + 1, 0);
    for (const auto& life : lifetimes(n0, rng)) {
        const auto first = std::lower_bound(sample_times.begin(), sample_times.end(), life.birth);
        const auto last = std::upper_bound(sample_times.begin(), sample_times.end(), life.death);
        // Alive on [birth, death).
        auto end = last;
        if (end != sample_times.begin() && *(end - 1) == life.death) --end;
        if (first >= end) continue;
        ++diff[static_cast<std::size_t>(first - sample_times.begin())];
        --diff[static_cast<std::size_t>(end - sample_times.begin())];
    }
    std::vector<unsigned> counts(sample_times.size());
    long running = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        running += diff[k];
        counts[k] = static_cast<unsigned>(running);
    }
    return counts;
}

CountingPath CountingProcessSimulator::path(unsigned n0, RngStream& rng) const {
    struct Event {
        double t;
        int delta;
    };
    std::vector<Event> events;
    unsigned initial = 0;
    for (const auto& life : lifetimes(n0, rng)) {
        if (life.birth <= t0_) {
            ++initial;
        } else {
            events.push_back({life.birth, +1});
        }
        if (life.death <= t1_) events.push_back({life.death, -1});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    CountingPath out;
    out.times.push_back(t0_);
    out.counts.push_back(initial);
    long n = initial;
    for (const auto& e : events) {
        n += e.delta;
        out.times.push_back(e.t);
        out.counts.push_back(static_cast<unsigned>(n));
    }
    return out;
}

std::vector<unsigned> simulate_counting_process(const ContinuousModel& model, unsigned n0, double t0, double t1,
                                                std::span<const double> sample_times, RngStream& rng) {
    return CountingProcessSimulator(model, t0, t1).run(n0, sample_times, rng);
}

}  // namespace maturix
