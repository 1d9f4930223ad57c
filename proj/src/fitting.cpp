#include "maturix/fitting.hpp"

#include "maturix/compartmental.hpp"
#include "maturix/error.hpp"
#include "maturix/least_squares.hpp"
#include "maturix/nelder_mead.hpp"
#include "maturix/parallel.hpp"

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace maturix {

// ---------------------------------------------------------------------------
// Drug kinetics

void DrugKinetics::validate() const {
    if (!(a_kin > 0.0 && b_kin > 0.0 && dose_interval > 0.0 && infusion_duration > 0.0) || n_doses == 0) {
        throw InvalidArgument("drug kinetics: all constants must be positive");
    }
    if (infusion_duration > dose_interval) {
        throw InvalidArgument("drug kinetics: infusion longer than the dose interval");
    }
}

double drug_concentration(const DrugKinetics& kin, double t) {
    double q = 0.0;
    const double peak = -std::expm1(-kin.a_kin * kin.infusion_duration);
    for (unsigned d = 0; d < kin.n_doses; ++d) {
        const double s = t - kin.dose_interval * d;
        if (s < 0.0) break;
        if (s < kin.infusion_duration) {
            q += -std::expm1(-kin.a_kin * s);
        } else {
            q += peak * std::exp(-kin.b_kin * (s - kin.infusion_duration));
        }
    }
    return q;
}

double drug_concentration_primitive(const DrugKinetics& kin, double t) {
    double acc = 0.0;
    const double dur = kin.infusion_duration;
    const double peak = -std::expm1(-kin.a_kin * dur);
    for (unsigned d = 0; d < kin.n_doses; ++d) {
        const double s = t - kin.dose_interval * d;
        if (s <= 0.0) break;
        if (s < dur) {
            acc += s + std::expm1(-kin.a_kin * s) / kin.a_kin;
        } else {
            acc += dur - peak / kin.a_kin - peak * std::expm1(-kin.b_kin * (s - dur)) / kin.b_kin;
        }
    }
    return acc;
}

RateSchedule drug_schedule(const DrugKinetics& kin) {
    kin.validate();
    std::vector<double> bps;
    for (unsigned d = 0; d < kin.n_doses; ++d) {
        bps.push_back(kin.dose_interval * d);
        bps.push_back(kin.dose_interval * d + kin.infusion_duration);
    }
    return RateSchedule::custom([kin](double t) { return drug_concentration(kin, t); }, std::move(bps),
                                [kin](double t) { return drug_concentration_primitive(kin, t); }, 0.0);
}

std::string to_string(ModelKind kind) { return kind == ModelKind::catenary ? "catenary" : "continuous"; }

// ---------------------------------------------------------------------------
// Predictions

std::size_t chain_n0_for(double delta, std::size_t n) {
    if (n < 2) throw InvalidArgument("chain_n0_for: n must be at least 2");
    const double r = std::round(delta * static_cast<double>(n - 1));
    return static_cast<std::size_t>(std::clamp(r, 1.0, static_cast<double>(n - 1)));
}

std::vector<double> predict_catenary(const ModelParameters& params, std::size_t n, const DrugKinetics& kin,
                                     std::span<const double> times, double tol) {
    if (n < 2) throw InvalidArgument("predict_catenary: n must be at least 2");
    if (!(params.rho > 0.0)) throw InvalidArgument("predict_catenary: rho must be positive");
    const double transit = static_cast<double>(n - 1) * params.rho;
    const auto system = catenary_system(n, params.lambda, transit, params.mu, params.gamma, params.n0,
                                        drug_schedule(kin));
    IntegrationOptions opt;
    opt.tol = tol;
    const auto traj =
        integrate_on_grid(system, equilibrium_init(params.lambda, transit, params.mu, n), 0.0, times, opt);
    return traj.component(n - 1);
}

std::vector<double> predict_continuous(const ModelParameters& params, const DrugKinetics& kin,
                                       std::span<const double> times, const ExplicitOptions& options) {
    const auto model =
        ContinuousModel::partial_killing(params.rho, RateSchedule::constant(params.lambda),
                                         RateSchedule::constant(params.mu), params.gamma, params.delta,
                                         drug_schedule(kin));
    return q_infinity_curve(model, std::vector<double>(times.begin(), times.end()), options);
}

double residual_sum_of_squares(std::span<const Observation> data, std::span<const double> prediction) {
    if (data.size() != prediction.size()) throw InvalidArgument("residual_sum_of_squares: size mismatch");
    double rss = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
        const double r = data[j].y - prediction[j];
        rss += r * r;
    }
    return rss;
}

// ---------------------------------------------------------------------------
// Problem validation

void ParameterBounds::validate() const {
    auto check = [](const std::array<double, 2>& b, const char* name, bool positive) {
        if (!(b[0] < b[1]) || !std::isfinite(b[0]) || !std::isfinite(b[1])) {
            throw InvalidArgument(fmt::format("bounds for {} must satisfy lower < upper", name));
        }
        if (positive ? !(b[0] > 0.0) : !(b[0] >= 0.0)) {
            throw InvalidArgument(fmt::format("lower bound for {} must be {}", name,
                                              positive ? "positive" : "nonnegative"));
        }
    };
    check(lambda, "lambda", true);
    check(rho, "rho", true);
    check(mu, "mu", true);
    check(gamma, "gamma", false);
    check(delta, "delta", false);
    if (!(delta[1] < 1.0)) throw InvalidArgument("upper bound for delta must be below 1");
}

void FitProblem::validate() const {
    bounds.validate();
    kinetics.validate();
    const std::size_t free = kind == ModelKind::continuous ? 5 : 4;
    if (kind == ModelKind::catenary && n < 2) throw InvalidArgument("catenary fit needs a chain length n >= 2");
    if (n0 && (kind != ModelKind::catenary || *n0 < 1 || *n0 >= n)) {
        throw InvalidArgument("a fixed n0 needs the catenary kind and 1 <= n0 <= n - 1");
    }
    if (observations.size() < free) {
        throw InvalidArgument(fmt::format("need at least {} observations, got {}", free, observations.size()));
    }
    for (std::size_t j = 0; j < observations.size(); ++j) {
        const auto& o = observations[j];
        if (!std::isfinite(o.t) || !std::isfinite(o.y) || o.y < 0.0 || o.t < 0.0) {
            throw InvalidArgument(fmt::format("observation {} must have finite t >= 0 and y >= 0", j + 1));
        }
        if (j > 0 && !(o.t > observations[j - 1].t)) {
            throw InvalidArgument("observation times must be strictly increasing");
        }
    }
    const double y0 = observations.front().y;
    if (std::all_of(observations.begin(), observations.end(), [y0](const Observation& o) { return o.y == y0; })) {
        throw InvalidArgument("degenerate data: every observation has the same value");
    }
    if (options.max_iterations == 0) throw InvalidArgument("max_iterations must be positive");
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

// Coordinates: each parameter maps to u in (0, 1) (log scale when the lower
// bound is positive), and the optimizer works on logit(u).
struct Coordinates {
    std::vector<std::array<double, 2>> bounds;
    std::vector<bool> log_scale;

    double to_unit(std::size_t k, double x) const {
        const auto& b = bounds[k];
        const double u = log_scale[k] ? std::log(x / b[0]) / std::log(b[1] / b[0]) : (x - b[0]) / (b[1] - b[0]);
        return std::clamp(u, 1e-12, 1.0 - 1e-12);
    }
    double from_unit(std::size_t k, double u) const {
        const auto& b = bounds[k];
        if (log_scale[k]) return std::clamp(b[0] * std::pow(b[1] / b[0], u), b[0], b[1]);
        return std::clamp(b[0] + u * (b[1] - b[0]), b[0], b[1]);
    }
    static double logit(double u) { return std::log(u / (1.0 - u)); }
    static double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }
};

Coordinates make_coordinates(const ParameterBounds& b, ModelKind kind) {
    Coordinates c;
    c.bounds = {b.lambda, b.rho, b.mu, b.gamma};
    if (kind == ModelKind::continuous) c.bounds.push_back(b.delta);
    for (const auto& r : c.bounds) c.log_scale.push_back(r[0] > 0.0);
    return c;
}

std::vector<double> to_vector(const ModelParameters& p, ModelKind kind) {
    std::vector<double> v{p.lambda, p.rho, p.mu, p.gamma};
    if (kind == ModelKind::continuous) v.push_back(p.delta);
    return v;
}

ModelParameters from_vector(const std::vector<double>& v, ModelKind kind, std::size_t n0) {
    ModelParameters p;
    p.lambda = v[0];
    p.rho = v[1];
    p.mu = v[2];
    p.gamma = v[3];
    if (kind == ModelKind::continuous) {
        p.delta = v[4];
    } else {
        p.n0 = n0;
    }
    return p;
}

struct Engine {
    const FitProblem& problem;
    Coordinates coords;
    std::vector<double> times;

    explicit Engine(const FitProblem& p) : problem(p), coords(make_coordinates(p.bounds, p.kind)) {
        for (const auto& o : p.observations) times.push_back(o.t);
    }

    std::size_t dim() const { return coords.bounds.size(); }

    ModelParameters decode(const std::vector<double>& y, std::size_t n0) const {
        std::vector<double> x(y.size());
        for (std::size_t k = 0; k < y.size(); ++k) x[k] = coords.from_unit(k, Coordinates::logistic(y[k]));
        return from_vector(x, problem.kind, n0);
    }

    std::vector<double> encode(const ModelParameters& p) const {
        auto x = to_vector(p, problem.kind);
        std::vector<double> y(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = Coordinates::logit(coords.to_unit(k, x[k]));
        return y;
    }

    std::vector<double> predict(const ModelParameters& p) const {
        if (problem.kind == ModelKind::catenary) {
            return predict_catenary(p, problem.n, problem.kinetics, times, problem.options.ode_tol);
        }
        return predict_continuous(p, problem.kinetics, times, problem.options.explicit_options);
    }

    Eigen::VectorXd residuals(const ModelParameters& p) const {
        const auto m = static_cast<Eigen::Index>(times.size());
        try {
            const auto pred = predict(p);
            Eigen::VectorXd r(m);
            for (Eigen::Index j = 0; j < m; ++j) r[j] = problem.observations[j].y - pred[j];
            return r;
        } catch (const NumericFailure&) {
            return Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
        }
    }

    double rss(const ModelParameters& p) const {
        try {
            return residual_sum_of_squares(problem.observations, predict(p));
        } catch (const NumericFailure&) {
            return std::numeric_limits<double>::infinity();
        }
    }

    // Latin-hypercube points in logit coordinates.
    std::vector<std::vector<double>> latin_hypercube(std::size_t count, std::uint64_t stream) const {
        std::vector<std::vector<double>> pts(count, std::vector<double>(dim()));
        if (count == 0) return pts;
        RngStream rng(problem.options.seed, stream);
        std::vector<std::size_t> perm(count);
        for (std::size_t k = 0; k < dim(); ++k) {
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t i = 0; i < count; ++i) {
                const double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(count);
                pts[i][k] = Coordinates::logit(std::clamp(u, 1e-6, 1.0 - 1e-6));
            }
        }
        return pts;
    }
};

struct SingleFit {
    ModelParameters parameters;
    double rss = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    bool converged = false;
    std::vector<double> start_rss;
};

// The first `warm` starts are informed guesses and get the smaller simplex.
SingleFit fit_from_starts(const Engine& engine, const std::vector<std::vector<double>>& starts, std::size_t warm,
                          std::size_t n0) {
    const FitOptions& opt = engine.problem.options;
    struct Run {
        std::vector<double> y;
        double value = std::numeric_limits<double>::infinity();
        double start_value = std::numeric_limits<double>::infinity();
        std::size_t evaluations = 0;
        bool converged = false;
    };
    std::vector<Run> runs(starts.size());
    auto objective = [&](const std::vector<double>& y) { return engine.rss(engine.decode(y, n0)); };
    parallel_for(starts.size(), [&](std::size_t i) {
        NelderMeadOptions nm;
        nm.max_iterations = opt.max_iterations;
        nm.simplex_tol = opt.simplex_tol;
        nm.initial_step = i < warm ? opt.warm_step : opt.initial_step;
        Run& run = runs[i];
        run.start_value = objective(starts[i]);
        ++run.evaluations;
        auto res = nelder_mead(objective, starts[i], nm);
        run.evaluations += res.evaluations;
        for (std::size_t r = 0; r < opt.restarts && res.converged; ++r) {
            auto again = nelder_mead(objective, res.x, nm);
            run.evaluations += again.evaluations;
            const bool improved = again.value < res.value;
            if (again.value <= res.value) res = std::move(again);
            if (!improved) break;
        }
        run.y = std::move(res.x);
        run.value = res.value;
        run.converged = res.converged;
    });

    SingleFit out;
    std::size_t best = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        out.evaluations += runs[i].evaluations;
        out.start_rss.push_back(runs[i].start_value);
        if (runs[i].value < runs[best].value) best = i;
    }
    if (runs.empty() || !std::isfinite(runs[best].value)) {
        throw NumericFailure("fit: every start produced a non-finite objective");
    }
    out.parameters = engine.decode(runs[best].y, n0);
    out.rss = engine.rss(out.parameters);
    out.converged = runs[best].converged;
    return out;
}

// Gauss-Newton type refinement; Nelder-Mead crawls along the narrow curved
// valleys these objectives have.
void polish(const Engine& engine, FitResult& result) {
    const std::size_t n0 = result.parameters.n0;
    auto res = levenberg_marquardt(
        [&](const std::vector<double>& y) { return engine.residuals(engine.decode(y, n0)); },
        engine.encode(result.parameters));
    result.evaluations += res.evaluations;
    const ModelParameters candidate = engine.decode(res.x, n0);
    const double rss = engine.rss(candidate);
    if (rss < result.rss) {
        result.parameters = candidate;
        result.rss = rss;
    }
}

// When the Jacobian is nearly singular the valley floor is too flat for
// either optimizer to follow. Profile the coordinate that dominates the
// weakest singular direction: minimize over it in 1-D, re-solving the other
// coordinates by Levenberg-Marquardt at every trial value.
void profile_polish(const Engine& engine, FitResult& result) {
    const std::size_t n0 = result.parameters.n0;
    const std::size_t d = engine.dim();
    auto residuals = [&](const std::vector<double>& y) { return engine.residuals(engine.decode(y, n0)); };
    std::vector<double> best = engine.encode(result.parameters);

    const Eigen::VectorXd r0 = residuals(best);
    if (!r0.allFinite()) return;
    Eigen::MatrixXd jac(r0.size(), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(best[k]));
        auto up = best;
        auto down = best;
        up[k] += h;
        down[k] -= h;
        const Eigen::VectorXd a = residuals(up);
        const Eigen::VectorXd b = residuals(down);
        result.evaluations += 2;
        if (!a.allFinite() || !b.allFinite()) return;
        jac.col(static_cast<Eigen::Index>(k)) = (a - b) / (2.0 * h);
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv[0] > 0.0) || sv[sv.size() - 1] > 1e-6 * sv[0]) return;
    Eigen::Index pivot = 0;
    svd.matrixV().col(sv.size() - 1).cwiseAbs().maxCoeff(&pivot);
    const auto k = static_cast<std::size_t>(pivot);

    std::vector<double> others;
    for (std::size_t i = 0; i < d; ++i) {
        if (i != k) others.push_back(best[i]);
    }
    auto assemble = [&](double yk, const std::vector<double>& rest) {
        std::vector<double> y;
        for (std::size_t i = 0, j = 0; i < d; ++i) y.push_back(i == k ? yk : rest[j++]);
        return y;
    };
    double best_value = r0.squaredNorm();
    auto profile = [&](double yk) {
        LeastSquaresOptions opt;
        opt.tol = 0.0;
        auto res = levenberg_marquardt(
            [&](const std::vector<double>& rest) { return residuals(assemble(yk, rest)); }, others, opt);
        result.evaluations += res.evaluations;
        if (res.value < best_value) {
            best_value = res.value;
            others = res.x;
            best = assemble(yk, res.x);
        }
        return res.value;
    };

    // Bracket the profile minimum by step doubling, then Brent.
    double a = best[k];
    double fa = profile(a);
    double step = 0.05;
    double b = a + step;
    double fb = profile(b);
    if (fb > fa) {
        std::swap(a, b);
        std::swap(fa, fb);
        step = -step;
    }
    double c = b + 2.0 * step;
    double fc = profile(c);
    for (int it = 0; it < 40 && fc < fb && std::abs(c) < 40.0; ++it) {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        step *= 2.0;
        c = b + 2.0 * step;
        fc = profile(c);
    }
    boost::uintmax_t iterations = 100;
    boost::math::tools::brent_find_minima(profile, std::min(a, c), std::max(a, c), 40, iterations);

    const ModelParameters candidate = engine.decode(best, n0);
    const double rss = engine.rss(candidate);
    if (rss < result.rss) {
        result.parameters = candidate;
        result.rss = rss;
    }
}

}  // namespace

FitResult fit(const FitProblem& problem) {
    problem.validate();
    const auto clock_start = std::chrono::steady_clock::now();
    const Engine engine(problem);
    const FitOptions& opt = problem.options;

    FitResult result;
    result.kind = problem.kind;
    result.n = problem.n;

    if (problem.kind == ModelKind::continuous) {
        std::vector<std::vector<double>> starts;
        for (const auto& g : opt.initial_guesses) starts.push_back(engine.encode(g));
        const std::size_t warm = starts.size();
        for (auto& p : engine.latin_hypercube(opt.starts, 0)) starts.push_back(std::move(p));
        SingleFit f = fit_from_starts(engine, starts, warm, 0);
        result.parameters = f.parameters;
        result.rss = f.rss;
        result.evaluations = f.evaluations;
        result.converged = f.converged;
        result.start_rss = std::move(f.start_rss);
    } else {
        const std::size_t lhs = opt.screening_starts.value_or(opt.starts);
        std::optional<std::vector<double>> previous;
        bool have_best = false;
        const std::size_t first = problem.n0.value_or(1);
        const std::size_t last = problem.n0 ? *problem.n0 + 1 : problem.n;
        for (std::size_t n0 = first; n0 < last; ++n0) {
            std::vector<std::vector<double>> starts;
            for (const auto& g : opt.initial_guesses) starts.push_back(engine.encode(g));
            if (opt.chain_warm_start && previous) starts.push_back(*previous);
            const std::size_t warm = starts.size();
            for (auto& p : engine.latin_hypercube(lhs, n0)) starts.push_back(std::move(p));
            if (starts.empty()) throw InvalidArgument("fit: no starting points (starts = 0 and no initial guesses)");
            SingleFit f = fit_from_starts(engine, starts, warm, n0);
            result.evaluations += f.evaluations;
            result.screening.push_back({n0, f.rss});
            previous = engine.encode(f.parameters);
            if (!have_best || f.rss < result.rss) {
                have_best = true;
                result.parameters = f.parameters;
                result.rss = f.rss;
                result.converged = f.converged;
                result.start_rss = std::move(f.start_rss);
            }
        }
    }
    if (opt.polish) {
        polish(engine, result);
        profile_polish(engine, result);
    }
    result.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return result;
}

std::vector<Observation> generate_synthetic(const ModelParameters& params, ModelKind kind, std::size_t n,
                                            const DrugKinetics& kin, std::span<const double> times,
                                            double noise_sd, RngStream& rng) {
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidArgument("noise_sd must be nonnegative");
    const auto pred = kind == ModelKind::catenary ? predict_catenary(params, n, kin, times)
                                                  : predict_continuous(params, kin, times);
    std::normal_distribution<double> noise(0.0, noise_sd);
    std::vector<Observation> out(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double e = noise_sd > 0.0 ? noise(rng) : 0.0;
        out[j] = {times[j], std::max(0.0, pred[j] + e)};
    }
    return out;
}

std::vector<BenchmarkRow> benchmark_compare(const std::vector<Observation>& data,
                                            std::span<const std::size_t> chain_sizes, const FitProblem& base,
                                            ChainTiming timing) {
    std::vector<BenchmarkRow> rows;
    FitProblem cont = base;
    cont.observations = data;
    cont.kind = ModelKind::continuous;
    cont.n = 0;
    cont.n0.reset();
    FitResult first = fit(cont);
    const double cont_s = first.runtime_s;
    rows.push_back({"continuous", std::move(first), cont_s, false});
    const ModelParameters seed = rows.front().result.parameters;

    for (std::size_t n : chain_sizes) {
        FitProblem chain = base;
        chain.observations = data;
        chain.kind = ModelKind::catenary;
        chain.n = n;
        chain.n0.reset();
        if (timing == ChainTiming::estimated) chain.n0 = chain_n0_for(seed.delta, n);
        chain.options.initial_guesses.push_back(seed);
        FitResult r = fit(chain);
        const double measured = r.runtime_s;
        const bool estimated = timing == ChainTiming::estimated;
        if (estimated) r.runtime_s = static_cast<double>(n - 1) * measured;
        rows.push_back({fmt::format("catenary_{}", n), std::move(r), measured, estimated});
    }
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "model,lambda,rho,mu,gamma,n0,delta,rss,runtime_s,evaluations,converged,measured_s,estimated\n";
    for (const auto& row : rows) {
        const auto& r = row.result;
        const auto& p = r.parameters;
        const bool chain = r.kind == ModelKind::catenary;
        fmt::print(out, "{},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{},{},{:.17g},{}\n", row.model,
                   p.lambda, p.rho, p.mu, p.gamma, chain ? fmt::format("{}", p.n0) : std::string(),
                   chain ? std::string() : fmt::format("{:.17g}", p.delta), r.rss, r.runtime_s, r.evaluations,
                   r.converged ? 1 : 0, row.measured_s, row.estimated ? 1 : 0);
    }
}

}  // namespace maturix
