#include "maturix/cli.hpp"

#include "maturix/compartmental.hpp"
#include "maturix/distributions.hpp"
#include "maturix/error.hpp"
#include "maturix/parallel.hpp"
#include "maturix/stochastic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <type_traits>

namespace maturix::cli {

using nlohmann::json;

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw InvalidArgument(fmt::format("{}: unknown key '{}'", where, key));
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!j.at(key).is_number_unsigned()) {
            throw InvalidArgument(fmt::format("{}: key '{}' must be a nonnegative integer", where, key));
        }
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(fmt::format("{}: key '{}' has the wrong type", where, key));
    }
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key)) return;
    T v{};
    read(j, key, v, where);
    out = v;
}

void read_pair(const json& j, const char* key, std::array<double, 2>& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw InvalidArgument(fmt::format("{}: '{}' must be [lower, upper]", where, key));
    }
    out = {v[0].get<double>(), v[1].get<double>()};
}

void require(bool ok, const std::string& message) {
    if (!ok) throw InvalidArgument(message);
}

DrugKinetics parse_kinetics(const json& j, const std::string& where) {
    DrugKinetics k;
    check_keys(j, {"type", "a_kin", "b_kin", "n_doses", "dose_interval", "infusion_duration"}, where);
    read(j, "a_kin", k.a_kin, where);
    read(j, "b_kin", k.b_kin, where);
    read(j, "n_doses", k.n_doses, where);
    read(j, "dose_interval", k.dose_interval, where);
    read(j, "infusion_duration", k.infusion_duration, where);
    k.validate();
    return k;
}

QSpec parse_q(const json& j) {
    const std::string where = "killing.q";
    QSpec q;
    if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
    read(j, "type", q.type, where);
    if (q.type == "zero") {
        check_keys(j, {"type"}, where);
    } else if (q.type == "constant") {
        check_keys(j, {"type", "value"}, where);
        read(j, "value", q.value, where);
        require(std::isfinite(q.value) && q.value >= 0.0, where + ": value must be finite and >= 0");
    } else if (q.type == "drug_kinetics") {
        q.kinetics = parse_kinetics(j, where);
    } else if (q.type == "biexponential_pulse") {
        check_keys(j, {"type", "start", "slow", "fast"}, where);
        read(j, "start", q.start, where);
        read(j, "slow", q.slow, where);
        read(j, "fast", q.fast, where);
        require(std::isfinite(q.start), where + ": start must be finite");
        require(q.slow > q.fast && q.fast > 0.0 && std::isfinite(q.slow),
                where + ": needs slow > fast > 0");
    } else {
        throw InvalidArgument(fmt::format("{}: unknown type '{}'", where, q.type));
    }
    return q;
}

KillingSpec parse_killing(const json& j) {
    const std::string where = "killing";
    KillingSpec k;
    check_keys(j, {"type", "gamma", "delta", "q"}, where);
    read(j, "type", k.type, where);
    if (k.type == "none") {
        require(!j.contains("gamma") && !j.contains("delta") && !j.contains("q"),
                where + ": type 'none' takes no parameters");
        return k;
    }
    require(k.type == "partial", fmt::format("{}: unknown type '{}'", where, k.type));
    read(j, "gamma", k.gamma, where);
    read(j, "delta", k.delta, where);
    require(std::isfinite(k.gamma) && k.gamma >= 0.0, where + ": gamma must be finite and >= 0");
    require(k.delta >= 0.0 && k.delta < 1.0, where + ": delta must lie in [0, 1)");
    if (j.contains("q")) k.q = parse_q(j.at("q"));
    return k;
}

EvaluateSpec parse_evaluate(const json& j) {
    const std::string where = "evaluate";
    EvaluateSpec e;
    check_keys(j, {"from", "to", "step", "output", "initial_count", "initial", "include_q"}, where);
    read(j, "from", e.from, where);
    read(j, "to", e.to, where);
    read(j, "step", e.step, where);
    read(j, "output", e.output, where);
    read(j, "initial_count", e.initial_count, where);
    read(j, "initial", e.initial, where);
    read(j, "include_q", e.include_q, where);
    require(e.output == "mean_count" || e.output == "q_infinity",
            where + ": output must be 'mean_count' or 'q_infinity'");
    require(e.initial == "equilibrium" || e.initial == "zero", where + ": initial must be 'equilibrium' or 'zero'");
    return e;
}

SimulationSpec parse_simulation(const json& j) {
    const std::string where = "simulation";
    SimulationSpec s;
    check_keys(j, {"seed", "replicas", "initial_count", "initial_law", "start", "at"}, where);
    read(j, "seed", s.seed, where);
    read(j, "replicas", s.replicas, where);
    read(j, "initial_count", s.initial_count, where);
    read(j, "initial_law", s.initial_law, where);
    read(j, "start", s.start, where);
    read(j, "at", s.at, where);
    require(s.replicas >= 1, where + ": replicas must be >= 1");
    require(s.initial_law == "fixed" || s.initial_law == "equilibrium",
            where + ": initial_law must be 'fixed' or 'equilibrium'");
    require(std::isfinite(s.start), where + ": start must be finite");
    return s;
}

void parse_fit(const json& j, ModelSpec& spec) {
    const std::string where = "fit";
    check_keys(j, {"bounds", "starts", "max_iterations", "simplex_tol", "restarts", "polish", "seed",
                   "screening_starts", "ode_tol"},
               where);
    FitOptions& o = spec.fit;
    read(j, "starts", o.starts, where);
    read(j, "max_iterations", o.max_iterations, where);
    read(j, "simplex_tol", o.simplex_tol, where);
    read(j, "restarts", o.restarts, where);
    read(j, "polish", o.polish, where);
    read(j, "seed", o.seed, where);
    read(j, "screening_starts", o.screening_starts, where);
    read(j, "ode_tol", o.ode_tol, where);
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        check_keys(b, {"lambda", "rho", "mu", "gamma", "delta"}, "fit.bounds");
        read_pair(b, "lambda", spec.bounds.lambda, "fit.bounds");
        read_pair(b, "rho", spec.bounds.rho, "fit.bounds");
        read_pair(b, "mu", spec.bounds.mu, "fit.bounds");
        read_pair(b, "gamma", spec.bounds.gamma, "fit.bounds");
        read_pair(b, "delta", spec.bounds.delta, "fit.bounds");
    }
    spec.bounds.validate();
    require(o.max_iterations >= 1, where + ": max_iterations must be >= 1");
    require(o.simplex_tol > 0.0 && o.ode_tol > 0.0, where + ": tolerances must be positive");
}

std::vector<double> make_grid(double from, double to, double step) {
    require(std::isfinite(from) && std::isfinite(to) && std::isfinite(step), "grid: values must be finite");
    require(step > 0.0, "grid: step must be positive");
    require(to >= from, "grid: to must be >= from");
    const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
    require(count <= 10'000'000, "grid: too many points");
    std::vector<double> grid(count);
    for (std::size_t k = 0; k < count; ++k) grid[k] = from + static_cast<double>(k) * step;
    return grid;
}

std::string header(const ModelSpec& spec, std::uint64_t seed) {
    return fmt::format("# spec_sha256={} seed={}\n", spec.hash, seed);
}

bool fast_mean_count(const ContinuousModel& model) {
    return model.profile() && model.lambda().kind() == RateSchedule::Kind::constant && model.mu().is_constant();
}

std::unique_ptr<std::ostream> open_out(const std::string& path) {
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*f) throw InvalidArgument("cannot open output file " + path);
    return f;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parameters_json(const FitResult& r) {
    json p = {{"lambda", r.parameters.lambda},
              {"rho", r.parameters.rho},
              {"mu", r.parameters.mu},
              {"gamma", r.parameters.gamma}};
    if (r.kind == ModelKind::continuous) {
        p["delta"] = r.parameters.delta;
    } else {
        p["n0"] = r.parameters.n0;
    }
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------

RateSchedule QSpec::schedule() const {
    if (type == "zero") return RateSchedule();
    if (type == "constant") return RateSchedule::constant(value);
    if (type == "drug_kinetics") return drug_schedule(kinetics);
    const double s0 = start, a = slow, b = fast;
    return RateSchedule::custom(
        [=](double t) { return t < s0 ? 0.0 : std::exp(-(t - s0) / a) - std::exp(-(t - s0) / b); }, {s0},
        [=](double t) { return t < s0 ? 0.0 : -a * std::expm1(-(t - s0) / a) + b * std::expm1(-(t - s0) / b); },
        s0);
}

ContinuousModel ModelSpec::continuous_model() const {
    const RateSchedule lam = lambda_support_start ? RateSchedule::constant(lambda, *lambda_support_start)
                                                  : RateSchedule::constant(lambda);
    if (killing.type == "none") {
        return ContinuousModel::partial_killing(rho, lam, RateSchedule::constant(mu), 0.0, 0.0, RateSchedule());
    }
    return ContinuousModel::partial_killing(rho, lam, RateSchedule::constant(mu), killing.gamma, killing.delta,
                                            killing.q.schedule());
}

std::size_t ModelSpec::chain_n0() const {
    if (n0) return *n0;
    return chain_n0_for(killing.delta, n);
}

CompartmentalSystem ModelSpec::catenary() const {
    if (killing.type == "none") {
        return catenary_system(n, lambda, (n - 1) * rho, mu, 0.0, 1, RateSchedule());
    }
    return catenary_system(n, lambda, (n - 1) * rho, mu, killing.gamma, chain_n0(), killing.q.schedule());
}

DrugKinetics ModelSpec::kinetics() const {
    if (killing.type == "none" || killing.q.type == "zero") return DrugKinetics{};
    require(killing.q.type == "drug_kinetics", "fit: the killing profile must be of type 'drug_kinetics'");
    return killing.q.kinetics;
}

ModelSpec parse_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("spec: malformed JSON: ") + e.what());
    }
    const std::string where = "spec";
    check_keys(j, {"model", "lambda", "lambda_support_start", "rho", "mu", "n", "n0", "killing", "evaluate",
                   "simulation", "fit", "tol"},
               where);
    ModelSpec s;
    read(j, "model", s.model, where);
    read(j, "lambda", s.lambda, where);
    read(j, "lambda_support_start", s.lambda_support_start, where);
    read(j, "rho", s.rho, where);
    read(j, "mu", s.mu, where);
    read(j, "n", s.n, where);
    read(j, "n0", s.n0, where);
    read(j, "tol", s.tol, where);
    if (j.contains("killing")) s.killing = parse_killing(j.at("killing"));
    if (j.contains("evaluate")) s.evaluate = parse_evaluate(j.at("evaluate"));
    if (j.contains("simulation")) s.simulation = parse_simulation(j.at("simulation"));
    if (j.contains("fit")) parse_fit(j.at("fit"), s);

    require(s.model == "continuous" || s.model == "catenary", "spec: model must be 'continuous' or 'catenary'");
    require(std::isfinite(s.lambda) && s.lambda >= 0.0, "spec: lambda must be finite and >= 0");
    require(std::isfinite(s.rho) && s.rho > 0.0, "spec: rho must be finite and > 0");
    require(std::isfinite(s.mu) && s.mu >= 0.0, "spec: mu must be finite and >= 0");
    require(!s.lambda_support_start || std::isfinite(*s.lambda_support_start),
            "spec: lambda_support_start must be finite");
    require(!s.tol || (*s.tol > 0.0 && std::isfinite(*s.tol)), "spec: tol must be positive");
    if (s.model == "catenary") {
        require(s.n >= 2, "spec: a catenary model needs n >= 2");
        require(!s.n0 || (*s.n0 >= 1 && *s.n0 <= s.n - 1), "spec: n0 must lie in 1..n-1");
        require(!s.lambda_support_start, "spec: lambda_support_start is not supported by the catenary model");
    } else {
        require(!j.contains("n") && !j.contains("n0"), "spec: n and n0 apply to the catenary model only");
    }
    s.hash = sha256_hex(text);
    return s;
}

ModelSpec load_spec(const std::string& path) { return parse_spec(read_file(path)); }

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::vector<Observation> parse_observations(std::istream& in) {
    std::vector<Observation> obs;
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            seen_header = true;
            if (line != "t,y") throw InvalidArgument(fmt::format("data line {}: expected header 't,y'", line_no));
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw InvalidArgument(fmt::format("data line {}: expected two comma-separated values", line_no));
        }
        const auto parse = [&](const std::string& field) {
            std::istringstream ss(field);
            ss.imbue(std::locale::classic());
            double v = 0.0;
            ss >> v;
            if (!ss || !(ss >> std::ws).eof() || !std::isfinite(v)) {
                throw InvalidArgument(fmt::format("data line {}: '{}' is not a finite number", line_no, field));
            }
            return v;
        };
        obs.push_back({parse(line.substr(0, comma)), parse(line.substr(comma + 1))});
    }
    if (!seen_header) throw InvalidArgument("data: empty file");
    return obs;
}

std::vector<Observation> load_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return parse_observations(in);
}

// ---------------------------------------------------------------------------

void cmd_evaluate(const ModelSpec& spec, const EvaluateArgs& args, std::ostream& out) {
    const auto from = args.from ? args.from : spec.evaluate.from;
    const auto to = args.to ? args.to : spec.evaluate.to;
    const auto step = args.step ? args.step : spec.evaluate.step;
    require(from && to && step, "evaluate: from, to and step are required (flags or spec)");
    const std::vector<double> grid = make_grid(*from, *to, *step);
    const double tol = args.tol ? *args.tol : spec.tol.value_or(1e-10);
    require(tol > 0.0 && std::isfinite(tol), "evaluate: tol must be positive");

    out << header(spec, spec.simulation.seed);
    const bool with_q = spec.evaluate.include_q && spec.killing.type == "partial";
    const RateSchedule q = with_q ? spec.killing.q.schedule() : RateSchedule();

    if (spec.model == "catenary") {
        const CompartmentalSystem system = spec.catenary();
        const Eigen::VectorXd q0 = spec.evaluate.initial == "zero"
                                       ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.n))
                                       : equilibrium_init(spec.lambda, (spec.n - 1) * spec.rho, spec.mu, spec.n);
        IntegrationOptions io;
        io.tol = args.tol || spec.tol ? tol : 1e-8;
        const Trajectory tr = integrate_on_grid(system, q0, grid.front(), grid, io);
        out << "t";
        for (std::size_t i = 1; i <= spec.n; ++i) out << ",q" << i;
        if (with_q) out << ",killing";
        out << "\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            out << num(grid[k]);
            for (Eigen::Index i = 0; i < tr.values[k].size(); ++i) out << ',' << num(tr.values[k][i]);
            if (with_q) out << ',' << num(q(grid[k]));
            out << '\n';
        }
        return;
    }

    const ContinuousModel model = spec.continuous_model();
    const ExplicitOptions eo{tol, tol / 10.0};
    std::vector<double> values(grid.size());
    if (spec.evaluate.output == "q_infinity") {
        values = q_infinity_curve(model, grid, eo);
    } else {
        const double s = grid.front();
        const double m = spec.evaluate.initial_count;
        const bool fast = fast_mean_count(model);
        parallel_for(grid.size(), [&](std::size_t k) {
            const double b = fast ? beta_partial_killing(model, s, grid[k], eo) : beta(model, s, grid[k], eo);
            values[k] = m * alpha(model, s, grid[k]) + b;
        });
    }
    out << (with_q ? "t,value,q\n" : "t,value\n");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        out << num(grid[k]) << ',' << num(values[k]);
        if (with_q) out << ',' << num(q(grid[k]));
        out << '\n';
    }
}

SimulationReport cmd_simulate(const ModelSpec& spec, const SimulateArgs& args, std::ostream& out) {
    require(spec.model == "continuous", "simulate: only the continuous model is supported");
    const SimulationSpec& sim = spec.simulation;
    SimulationReport rep;
    rep.replicas = args.replicas.value_or(sim.replicas);
    rep.seed = args.seed.value_or(sim.seed);
    require(rep.replicas >= 1, "simulate: replicas must be >= 1");
    const auto at = args.at ? args.at : sim.at;
    require(at.has_value(), "simulate: the observation time is required (--at or simulation.at)");
    rep.at = *at;
    require(std::isfinite(rep.at) && rep.at >= sim.start, "simulate: at must be >= simulation.start");

    const ContinuousModel model = spec.continuous_model();
    const bool equilibrium = sim.initial_law == "equilibrium";
    if (equilibrium) {
        require(model.lambda().is_constant() && model.mu().is_constant() && spec.mu > 0.0,
                "simulate: an equilibrium start needs constant lambda and mu > 0");
    }
    const double c = equilibrium ? spec.lambda / spec.mu : 0.0;
    const CountingProcessSimulator simulator(model, sim.start, rep.at);
    const std::vector<double> at_times{rep.at};
    std::vector<unsigned> counts(rep.replicas);
    parallel_for(rep.replicas, [&](std::size_t r) {
        RngStream rng(rep.seed, r);
        unsigned n0 = sim.initial_count;
        if (equilibrium) n0 = std::poisson_distribution<unsigned>(c)(rng);
        counts[r] = simulator.run(n0, at_times, rng).front();
    });
    if (args.path_out) {
        RngStream rng(rep.seed, rep.replicas);
        unsigned n0 = sim.initial_count;
        if (equilibrium) n0 = std::poisson_distribution<unsigned>(c)(rng);
        const CountingPath path = simulator.path(n0, rng);
        *args.path_out << header(spec, rep.seed) << "t,n\n";
        for (std::size_t k = 0; k < path.times.size(); ++k) {
            *args.path_out << num(path.times[k]) << ',' << path.counts[k] << '\n';
        }
    }

    const ExplicitOptions eo{spec.tol.value_or(1e-10), spec.tol.value_or(1e-10) / 10.0};
    const double a = alpha(model, sim.start, rep.at);
    const double b = fast_mean_count(model) ? beta_partial_killing(model, sim.start, rep.at, eo)
                                            : beta(model, sim.start, rep.at, eo);
    rep.empirical = empirical_pmf(counts);
    std::size_t support = rep.empirical.size();
    if (equilibrium) {
        const double mean = c * a + b;
        const auto bound = static_cast<std::size_t>(mean + 12.0 * std::sqrt(mean + 1.0) + 20.0);
        support = std::max(support, bound + 1);
        rep.exact.resize(support);
        for (std::size_t k = 0; k < support; ++k) rep.exact[k] = poisson_mixture_pmf(k, c, a, b);
        rep.mean_exact = mean;
    } else {
        const BinomialPoissonLaw law(sim.initial_count, a, b);
        rep.exact = law.pmf_vector();
        rep.mean_exact = law.mean();
    }
    rep.tv = total_variation(rep.empirical, rep.exact);
    double sum = 0.0;
    for (unsigned v : counts) sum += v;
    rep.mean_empirical = sum / static_cast<double>(counts.size());
    try {
        rep.chi_square = chi_square_gof(counts, rep.exact);
    } catch (const InvalidArgument&) {
        rep.chi_square.reset();  // too few replicas for a single merged cell
    }

    json j;
    j["spec_sha256"] = spec.hash;
    j["seed"] = rep.seed;
    j["at"] = rep.at;
    j["replicas"] = rep.replicas;
    std::vector<std::size_t> histogram(rep.empirical.size(), 0);
    for (unsigned v : counts) ++histogram[v];
    j["counts"] = histogram;
    j["pmf"] = rep.empirical;
    j["exact_pmf"] = rep.exact;
    j["tv"] = rep.tv;
    j["mean"] = rep.mean_empirical;
    j["exact_mean"] = rep.mean_exact;
    if (rep.chi_square) {
        j["chi_square"] = {{"statistic", rep.chi_square->statistic},
                           {"degrees_of_freedom", rep.chi_square->degrees_of_freedom},
                           {"bins", rep.chi_square->bins}};
        j["p_value"] = rep.chi_square->p_value;
    } else {
        j["chi_square"] = nullptr;
        j["p_value"] = nullptr;
    }
    out << j.dump(2) << '\n';
    return rep;
}

namespace {

FitProblem base_problem(const ModelSpec& spec, const std::vector<Observation>& data, std::optional<std::uint64_t> seed) {
    FitProblem p;
    p.observations = data;
    p.bounds = spec.bounds;
    p.kinetics = spec.kinetics();
    p.options = spec.fit;
    if (seed) p.options.seed = *seed;
    if (spec.tol) p.options.ode_tol = *spec.tol;
    return p;
}

}  // namespace

FitResult cmd_fit(const ModelSpec& spec, const std::vector<Observation>& data, const FitArgs& args,
                  std::ostream& out) {
    FitProblem p = base_problem(spec, data, args.seed);
    p.kind = args.kind.value_or(spec.model == "catenary" ? ModelKind::catenary : ModelKind::continuous);
    if (p.kind == ModelKind::catenary) {
        require(args.n.has_value() || spec.model == "catenary", "fit: the catenary kind requires --n");
        p.n = args.n.value_or(spec.n);
    }
    p.validate();
    const FitResult r = fit(p);

    json j;
    j["spec_sha256"] = spec.hash;
    j["seed"] = p.options.seed;
    j["model"] = to_string(r.kind);
    if (r.kind == ModelKind::catenary) j["n"] = r.n;
    j["parameters"] = parameters_json(r);
    j["rss"] = r.rss;
    j["evaluations"] = r.evaluations;
    j["runtime_s"] = r.runtime_s;
    j["converged"] = r.converged;
    if (!r.screening.empty()) {
        json screening = json::array();
        for (const auto& e : r.screening) screening.push_back({{"n0", e.n0}, {"rss", e.rss}});
        j["screening"] = screening;
    }
    out << j.dump(2) << '\n';
    return r;
}

std::vector<BenchmarkRow> cmd_compare(const ModelSpec& spec, const std::vector<Observation>& data,
                                      const CompareArgs& args, std::ostream& out) {
    const FitProblem base = base_problem(spec, data, args.seed);
    for (std::size_t n : args.chains) require(n >= 2, "compare: chain sizes must be >= 2");
    const std::vector<BenchmarkRow> rows = benchmark_compare(data, args.chains, base, args.timing);
    out << header(spec, base.options.seed);
    write_benchmark_csv(out, rows);
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> parse_chain_list(const std::string& text) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size() || item[0] == '-') throw InvalidArgument("--chains: '" + item + "' is not a size");
        sizes.push_back(v);
    }
    return sizes;
}

struct Output {
    std::unique_ptr<std::ostream> file;
    std::ostream& stream() { return file ? *file : std::cout; }
};

Output make_output(const std::string& path) {
    Output o;
    if (!path.empty() && path != "-") o.file = open_out(path);
    return o;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Maturation models with killing: evaluation, simulation and fitting"};
    app.require_subcommand(1);

    std::string model_path, out_path, data_path, kind_text, chains_text, path_out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas, n;
    std::optional<double> from, to, step, tol, at;
    bool exhaustive = false;

    auto* evaluate = app.add_subcommand("evaluate", "Write a mean curve as CSV");
    evaluate->add_option("--model", model_path, "Model spec (JSON)")->required();
    evaluate->add_option("--out", out_path, "Output CSV (default stdout)");
    evaluate->add_option("--from", from, "First time");
    evaluate->add_option("--to", to, "Last time");
    evaluate->add_option("--step", step, "Grid step");
    evaluate->add_option("--tol", tol, "Numerical tolerance");
    evaluate->add_option("--seed", seed, "Seed recorded in the header");

    auto* simulate = app.add_subcommand("simulate", "Simulate the law of N at one time");
    simulate->add_option("--model", model_path, "Model spec (JSON)")->required();
    simulate->add_option("--out", out_path, "Output JSON (default stdout)");
    simulate->add_option("--at", at, "Observation time");
    simulate->add_option("--replicas", replicas, "Number of replicas");
    simulate->add_option("--seed", seed, "Master seed");
    simulate->add_option("--tol", tol, "Numerical tolerance of the exact law");
    simulate->add_option("--path", path_out, "Also write one sample path as CSV");

    auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of observations");
    fit_cmd->add_option("--data", data_path, "Observations CSV with header t,y")->required();
    fit_cmd->add_option("--model", model_path, "Model spec (JSON, optional)");
    fit_cmd->add_option("--kind", kind_text, "continuous | catenary")
        ->check(CLI::IsMember({"continuous", "catenary"}));
    fit_cmd->add_option("--n", n, "Chain length (catenary kind)");
    fit_cmd->add_option("--out", out_path, "Output JSON (default stdout)");
    fit_cmd->add_option("--seed", seed, "Seed of the multi-start design");
    fit_cmd->add_option("--tol", tol, "ODE tolerance");

    auto* compare = app.add_subcommand("compare", "Benchmark the continuous model against chains");
    compare->add_option("--data", data_path, "Observations CSV with header t,y")->required();
    compare->add_option("--model", model_path, "Model spec (JSON, optional)");
    compare->add_option("--chains", chains_text, "Comma-separated chain sizes (may be empty)");
    compare->add_option("--out", out_path, "Output CSV (default stdout)");
    compare->add_option("--seed", seed, "Seed of the multi-start design");
    compare->add_option("--tol", tol, "ODE tolerance");
    compare->add_flag("--exhaustive", exhaustive, "Time every n0 fit instead of (n - 1) x one fit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ModelSpec spec = model_path.empty() ? parse_spec("{}") : load_spec(model_path);
        if (tol) {
            require(*tol > 0.0 && std::isfinite(*tol), "--tol must be positive");
            spec.tol = tol;
        }
        if (*evaluate) {
            if (seed) spec.simulation.seed = *seed;
            std::ostringstream buffer;
            cmd_evaluate(spec, {from, to, step, tol}, buffer);
            make_output(out_path).stream() << buffer.str();
            return 0;
        }
        if (*simulate) {
            std::unique_ptr<std::ostream> path_stream;
            if (!path_out.empty()) path_stream = open_out(path_out);
            std::ostringstream buffer;
            const SimulationReport rep = cmd_simulate(spec, {at, replicas, seed, path_stream.get()}, buffer);
            make_output(out_path).stream() << buffer.str();
            std::ostream& log = out_path.empty() ? std::cerr : std::cout;
            log << fmt::format("simulate: t={} replicas={} mean={:.6g} exact_mean={:.6g} tv={:.4g}", rep.at,
                               rep.replicas, rep.mean_empirical, rep.mean_exact, rep.tv);
            if (rep.chi_square) log << fmt::format(" p={:.4g}", rep.chi_square->p_value);
            log << '\n';
            return 0;
        }
        const std::vector<Observation> data = load_observations(data_path);
        if (*fit_cmd) {
            FitArgs fa;
            if (!kind_text.empty()) fa.kind = kind_text == "catenary" ? ModelKind::catenary : ModelKind::continuous;
            if (fa.kind == ModelKind::catenary && !n && spec.model != "catenary") {
                std::cerr << "error: --kind catenary requires --n\n" << fit_cmd->help();
                return 2;
            }
            fa.n = n;
            fa.seed = seed;
            std::ostringstream buffer;
            const FitResult r = cmd_fit(spec, data, fa, buffer);
            make_output(out_path).stream() << buffer.str();
            std::ostream& log = out_path.empty() ? std::cerr : std::cout;
            const auto& p = r.parameters;
            log << fmt::format("fit: model={} lambda={:.6g} rho={:.6g} mu={:.6g} gamma={:.6g} ", to_string(r.kind),
                               p.lambda, p.rho, p.mu, p.gamma);
            log << (r.kind == ModelKind::continuous ? fmt::format("delta={:.6g}", p.delta)
                                                    : fmt::format("n={} n0={}", r.n, p.n0));
            log << fmt::format(" rss={:.6g} evaluations={} runtime_s={:.3f} converged={}\n", r.rss, r.evaluations,
                               r.runtime_s, r.converged);
            return r.converged ? 0 : 4;
        }
        std::ostringstream buffer;
        const auto rows = cmd_compare(spec, data,
                                      {parse_chain_list(chains_text), seed,
                                       exhaustive ? ChainTiming::exhaustive : ChainTiming::estimated},
                                      buffer);
        make_output(out_path).stream() << buffer.str();
        std::ostream& log = out_path.empty() ? std::cerr : std::cout;
        const auto by_rss = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.result.rss < b.result.rss;
        });
        const auto by_time = std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.result.runtime_s < b.result.runtime_s;
        });
        log << fmt::format("winner by rss: {} ({:.6g})\nwinner by runtime: {} ({:.3f} s)\n", by_rss->model,
                           by_rss->result.rss, by_time->model, by_time->result.runtime_s);
        const bool all_converged =
            std::all_of(rows.begin(), rows.end(), [](const auto& row) { return row.result.converged; });
        return all_converged ? 0 : 4;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace maturix::cli
