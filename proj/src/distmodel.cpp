#include "etad/distmodel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "etad/errors.hpp"
#include "etad/stats.hpp"

namespace etad {

using nlohmann::json;

// ---------------------------------------------------------------- models

namespace {

constexpr std::array<const char*, 5> kM1Names = {"alpha", "beta", "gamma", "delta", "epsilon"};
constexpr std::array<const char*, 7> kM2Names = {"alpha", "beta",  "gamma", "delta",
                                                 "eta",   "zeta", "epsilon"};
constexpr std::array<const char*, 4> kM3Names = {"alpha", "beta", "gamma", "epsilon"};
constexpr std::array<const char*, 12> kM4Names = {"alpha", "beta",  "gamma", "delta",
                                                  "zeta",  "eta",   "theta", "iota",
                                                  "kappa", "lambda", "nu",   "xi"};
constexpr std::array<const char*, 5> kSNames = {"a", "b", "c", "d", "e"};

} // namespace

ModelId model_from_string(std::string_view name) {
    if (name == "M1") return ModelId::M1;
    if (name == "M2") return ModelId::M2;
    if (name == "M3") return ModelId::M3;
    if (name == "M4") return ModelId::M4;
    if (name == "S") return ModelId::S;
    throw parameter_error("unknown model id: " + std::string(name));
}

std::string model_name(ModelId id) {
    switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    case ModelId::S: return "S";
    }
    return "?";
}

size_t model_arity(ModelId id) {
    switch (id) {
    case ModelId::M1: return 5;
    case ModelId::M2: return 7;
    case ModelId::M3: return 4;
    case ModelId::M4: return 12;
    case ModelId::S: return 5;
    }
    return 0;
}

std::span<const char* const> model_constant_names(ModelId id) {
    switch (id) {
    case ModelId::M1: return kM1Names;
    case ModelId::M2: return kM2Names;
    case ModelId::M3: return kM3Names;
    case ModelId::M4: return kM4Names;
    case ModelId::S: return kSNames;
    }
    return {};
}

std::string ModelConstants::to_json() const {
    json j;
    j["model"] = model_name(id);
    auto names = model_constant_names(id);
    json c = json::object();
    for (size_t i = 0; i < values.size(); ++i) c[names[i]] = values[i];
    j["constants"] = c;
    return j.dump(2) + "\n";
}

ModelConstants ModelConstants::from_json(std::string_view text) {
    json j = json::parse(text);
    ModelConstants out;
    out.id = model_from_string(j.at("model").get<std::string>());
    auto names = model_constant_names(out.id);
    for (const char* name : names) out.values.push_back(j.at("constants").at(name).get<double>());
    return out;
}

const ModelConstants& default_mu_constants() {
    static const ModelConstants c{ModelId::M2,
                                  {0.595, 2.135, 0.314, 0.341, 1.626, 0.241, -0.224}};
    return c;
}

const ModelConstants& default_sigma_constants() {
    static const ModelConstants c{ModelId::S, {0.0345, 0.925, 1.222, 0.301, 0.189}};
    return c;
}

double eval_model(ModelId id, std::span<const double> c, double n, double k) {
    if (c.size() != model_arity(id)) throw parameter_error("eval_model: wrong constant count");
    switch (id) {
    case ModelId::M1: {
        // alpha ln(beta n) + gamma e^{-delta k} + epsilon
        return c[0] * std::log(c[1] * n) + c[2] * std::exp(-c[3] * k) + c[4];
    }
    case ModelId::M2: {
        // alpha ln(beta n) e^{-gamma k} + delta ln(eta n) + zeta e^{-gamma k} + epsilon
        double ek = std::exp(-c[2] * k);
        return c[0] * std::log(c[1] * n) * ek + c[3] * std::log(c[4] * n) + c[5] * ek + c[6];
    }
    case ModelId::M3: {
        double ek = std::exp(-c[2] * k);
        return c[0] * std::log(c[1] * n) * ek + c[3];
    }
    case ModelId::M4: {
        // alpha ln(beta n) e^{-gamma k} - alpha delta k e^{-gamma k}
        //   + zeta e^{-eta k} + theta ln(iota n) (kappa n)^{-lambda n} + nu ln(xi n)
        double eg = std::exp(-c[2] * k);
        double v = c[0] * std::log(c[1] * n) * eg - c[0] * c[3] * k * eg +
                   c[4] * std::exp(-c[5] * k) + c[10] * std::log(c[11] * n);
        // power term in log space; it vanishes for any sizeable n
        double base = c[8] * n;
        if (base > 0.0) {
            double log_term = -c[9] * n * std::log(base);
            if (log_term > 700.0) return std::numeric_limits<double>::quiet_NaN();
            v += c[6] * std::log(c[7] * n) * std::exp(log_term);
        }
        return v;
    }
    case ModelId::S: {
        return c[0] * std::log(c[1] * n) + c[2] * std::exp(-c[3] * k) + c[4];
    }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double estimate_mu(uint32_t n, uint32_t k, const ModelConstants& c) {
    if (n < 2 || k < 1) throw parameter_error("estimate_mu: need n >= 2, k >= 1");
    return eval_model(c.id, c.values, n, k);
}

double estimate_sigma(uint32_t n, uint32_t k, const ModelConstants& c) {
    if (n < 2 || k < 1) throw parameter_error("estimate_sigma: need n >= 2, k >= 1");
    return eval_model(c.id, c.values, n, k);
}

// ---------------------------------------------------------------- fitting

NormalParams fit_normal(const DistanceHistogram& h) {
    std::vector<double> xs, ws;
    for (size_t d = 1; d < h.counts.size(); ++d) {
        if (h.counts[d] > 0) {
            xs.push_back(static_cast<double>(d));
            ws.push_back(static_cast<double>(h.counts[d]));
        }
    }
    if (xs.size() < 2)
        throw degenerate_fit_error("fit_normal: need at least two occupied distances");
    Moments m = weighted_moments(xs, ws);
    return {m.mean, m.stddev};
}

double normal_pdf(double x, const NormalParams& p) {
    double z = (x - p.mu) / p.sigma;
    return std::exp(-0.5 * z * z) / (p.sigma * 2.5066282746310002);
}

double normal_cdf(double x, const NormalParams& p) {
    double z = (x - p.mu) / (p.sigma * 1.4142135623730951);
    return 0.5 * std::erfc(-z);
}

DiscreteDistribution discretize(NormalParams p, uint32_t n, uint32_t k, double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 0.1)
        throw parameter_error("discretize: epsilon must be in (0, 0.1]");
    if (n < 2 || k < 1) throw parameter_error("discretize: need n >= 2, k >= 1");
    if (!(p.sigma > 0.0)) throw parameter_error("discretize: sigma must be positive");

    double nd = n;
    double f0 = 1.0 / nd;
    double f1 = k * (2.0 * nd - k - 1.0) / (nd * nd);
    if (f0 + f1 >= 1.0)
        throw infeasible_discretization_error(
            "discretize: fixed masses at distances 0 and 1 already reach 1");

    uint32_t t_max = 2;
    while (1.0 - normal_cdf(static_cast<double>(t_max), p) > epsilon) {
        ++t_max;
        if (t_max > 100000)
            throw infeasible_discretization_error("discretize: tail cutoff does not converge");
    }

    std::vector<double> tail(t_max - 1);
    double tail_sum = 0.0;
    for (uint32_t x = 2; x <= t_max; ++x) {
        tail[x - 2] = normal_pdf(static_cast<double>(x), p);
        tail_sum += tail[x - 2];
    }
    if (!(tail_sum > 0.0))
        throw infeasible_discretization_error("discretize: density underflows beyond distance 1");

    DiscreteDistribution out;
    out.n = n;
    out.k = k;
    out.epsilon = epsilon;
    out.mass.assign(t_max + 1, 0.0);
    out.mass[0] = f0;
    out.mass[1] = f1;
    double scale = (1.0 - f0 - f1) / tail_sum;
    for (uint32_t x = 2; x <= t_max; ++x) out.mass[x] = tail[x - 2] * scale;
    return out;
}

DiscreteDistribution DiscreteDistribution::from_weights(std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw parameter_error("from_weights: negative weight");
        sum += w;
    }
    if (!(sum > 0.0)) throw parameter_error("from_weights: zero total");
    for (double& w : weights) w /= sum;
    DiscreteDistribution d;
    d.mass = std::move(weights);
    return d;
}

std::string FitDataset::to_csv() const {
    std::ostringstream out;
    out << "n,k,mu_hat,sigma_hat\n";
    char buf[128];
    for (const FitRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.0f,%.0f,%.9g,%.9g\n", r.n, r.k, r.mu_hat, r.sigma_hat);
        out << buf;
    }
    return out.str();
}

FitDataset FitDataset::from_csv(std::string_view text) {
    FitDataset d;
    std::istringstream in{std::string(text)};
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        FitRow r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r.n, &r.k, &r.mu_hat, &r.sigma_hat) != 4)
            throw parameter_error("FitDataset: malformed row: " + line);
        d.rows.push_back(r);
    }
    return d;
}

namespace {

// Levenberg-Marquardt with a forward-difference Jacobian and additive
// damping on the normal equations. Small and sufficient for <= 12 params.
struct LmOutcome {
    std::vector<double> params;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
};

double model_rss(ModelId id, std::span<const double> c, const FitDataset& data, bool sigma_target,
                 std::vector<double>* residuals = nullptr) {
    double rss = 0.0;
    if (residuals) residuals->resize(data.rows.size());
    for (size_t i = 0; i < data.rows.size(); ++i) {
        const FitRow& r = data.rows[i];
        double pred = eval_model(id, c, r.n, r.k);
        double obs = sigma_target ? r.sigma_hat : r.mu_hat;
        double res = pred - obs;
        if (!std::isfinite(res)) return std::numeric_limits<double>::infinity();
        if (residuals) (*residuals)[i] = res;
        rss += res * res;
    }
    return rss;
}

// Solve (A + lambda (diag(A) + floor I)) x = b in place; the identity floor
// keeps directions with zero curvature (dead model terms) regular.
bool solve_damped(std::vector<double> a, std::vector<double> b, size_t m, double lambda,
                  std::vector<double>& x) {
    double max_diag = 0.0;
    for (size_t i = 0; i < m; ++i) max_diag = std::max(max_diag, std::fabs(a[i * m + i]));
    double floor = std::max(1e-12, 1e-8 * max_diag);
    for (size_t i = 0; i < m; ++i) a[i * m + i] += lambda * (a[i * m + i] + floor);
    // Gaussian elimination with partial pivoting.
    std::vector<size_t> piv(m);
    for (size_t i = 0; i < m; ++i) piv[i] = i;
    for (size_t col = 0; col < m; ++col) {
        size_t best = col;
        for (size_t r = col + 1; r < m; ++r)
            if (std::fabs(a[r * m + col]) > std::fabs(a[best * m + col])) best = r;
        if (std::fabs(a[best * m + col]) < 1e-300) return false;
        if (best != col) {
            for (size_t c = 0; c < m; ++c) std::swap(a[col * m + c], a[best * m + c]);
            std::swap(b[col], b[best]);
        }
        for (size_t r = col + 1; r < m; ++r) {
            double f = a[r * m + col] / a[col * m + col];
            for (size_t c = col; c < m; ++c) a[r * m + c] -= f * a[col * m + c];
            b[r] -= f * b[col];
        }
    }
    x.assign(m, 0.0);
    for (size_t i = m; i-- > 0;) {
        double acc = b[i];
        for (size_t c = i + 1; c < m; ++c) acc -= a[i * m + c] * x[c];
        x[i] = acc / a[i * m + i];
    }
    return true;
}

LmOutcome levenberg_marquardt(ModelId id, std::vector<double> p, const FitDataset& data,
                              bool sigma_target, int max_iter = 400) {
    const size_t m = p.size();
    const size_t rows = data.rows.size();
    std::vector<double> res;
    double rss = model_rss(id, p, data, sigma_target, &res);
    if (!std::isfinite(rss)) {
        p.assign(m, 1.0);
        rss = model_rss(id, p, data, sigma_target, &res);
    }

    double lambda = 1e-3;
    LmOutcome out;
    out.params = p;
    out.rss = rss;
    int it = 0;
    for (; it < max_iter; ++it) {
        if (rss <= 1e-24) { out.converged = true; break; }
        // Jacobian by forward differences.
        std::vector<double> jac(rows * m);
        bool jac_ok = true;
        for (size_t j = 0; j < m && jac_ok; ++j) {
            double h = std::max(1e-7 * std::fabs(p[j]), 1e-9);
            std::vector<double> pj = p;
            pj[j] += h;
            for (size_t i = 0; i < rows; ++i) {
                const FitRow& r = data.rows[i];
                double f1 = eval_model(id, pj, r.n, r.k);
                double f0 = eval_model(id, p, r.n, r.k);
                if (!std::isfinite(f1) || !std::isfinite(f0)) { jac_ok = false; break; }
                jac[i * m + j] = (f1 - f0) / h;
            }
        }
        if (!jac_ok) break;

        std::vector<double> jtj(m * m, 0.0), jtr(m, 0.0);
        for (size_t i = 0; i < rows; ++i)
            for (size_t a = 0; a < m; ++a) {
                jtr[a] += jac[i * m + a] * res[i];
                for (size_t b = a; b < m; ++b) jtj[a * m + b] += jac[i * m + a] * jac[i * m + b];
            }
        for (size_t a = 0; a < m; ++a)
            for (size_t b = 0; b < a; ++b) jtj[a * m + b] = jtj[b * m + a];

        double grad_norm = 0.0;
        for (double g : jtr) grad_norm = std::max(grad_norm, std::fabs(g));
        if (grad_norm < 1e-12) { out.converged = true; break; }

        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            std::vector<double> delta;
            if (solve_damped(jtj, jtr, m, lambda, delta)) {
                std::vector<double> cand = p;
                for (size_t j = 0; j < m; ++j) cand[j] -= delta[j];
                std::vector<double> cand_res;
                double cand_rss = model_rss(id, cand, data, sigma_target, &cand_res);
                if (std::isfinite(cand_rss) && cand_rss < rss) {
                    double rel = (rss - cand_rss) / std::max(rss, 1e-30);
                    p = std::move(cand);
                    res = std::move(cand_res);
                    rss = cand_rss;
                    lambda = std::max(lambda * 0.3, 1e-12);
                    stepped = true;
                    if (rel < 1e-12) { out.converged = true; }
                    break;
                }
            }
            lambda *= 4.0;
            if (lambda > 1e12) break;
        }
        out.params = p;
        out.rss = rss;
        if (!stepped) {
            // No downhill step at any damping: flat to numerical precision.
            out.converged = grad_norm < 1e-6 * (1.0 + rss);
            break;
        }
        if (out.converged) break;
    }
    out.params = p;
    out.rss = rss;
    out.iterations = it + 1;
    if (it >= max_iter) out.converged = false;
    return out;
}

} // namespace

FitResult fit_model_constants(const FitDataset& data, ModelId id,
                              std::optional<std::vector<double>> init) {
    const size_t arity = model_arity(id);
    if (data.rows.size() < 2 * arity)
        throw fit_failure_error("fit_model_constants: underdetermined dataset (need >= " +
                                    std::to_string(2 * arity) + " rows)",
                                init.value_or(std::vector<double>(arity, 1.0)), 0.0);
    for (const FitRow& r : data.rows)
        if (r.n < 2 || r.k < 1 || !(r.sigma_hat > 0))
            throw parameter_error("fit_model_constants: invalid dataset row");

    std::vector<double> start;
    if (init) {
        if (init->size() != arity) throw parameter_error("fit_model_constants: bad init size");
        start = *init;
    } else if (id == ModelId::M2) {
        start = default_mu_constants().values;
    } else if (id == ModelId::S) {
        start = default_sigma_constants().values;
    } else {
        start.assign(arity, 1.0);
    }

    bool sigma_target = (id == ModelId::S);
    LmOutcome lm = levenberg_marquardt(id, start, data, sigma_target);
    if (!lm.converged)
        throw fit_failure_error("fit_model_constants: no convergence within iteration budget",
                                lm.params, lm.rss);

    FitResult out;
    out.constants = {id, lm.params};
    out.rss = lm.rss;
    out.residual_std = std::sqrt(lm.rss / static_cast<double>(data.rows.size()));
    out.iterations = lm.iterations;
    return out;
}

BiasReport model_bias_report(const FitDataset& data, const ModelConstants& c) {
    if (data.rows.empty()) throw parameter_error("model_bias_report: empty dataset");
    BiasReport rep;
    bool sigma_target = (c.id == ModelId::S);
    for (const FitRow& r : data.rows) {
        double pred = eval_model(c.id, c.values, r.n, r.k);
        double obs = sigma_target ? r.sigma_hat : r.mu_hat;
        rep.residuals.push_back(pred - obs);
        rep.max_abs = std::max(rep.max_abs, std::fabs(pred - obs));
    }
    Quartiles q = quartiles(rep.residuals);
    rep.q1 = q.q1;
    rep.median = q.median;
    rep.q3 = q.q3;
    return rep;
}

std::string BiasReport::to_csv() const {
    std::ostringstream out;
    out << "row,residual\n";
    char buf[64];
    for (size_t i = 0; i < residuals.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, residuals[i]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "q1,%.9g\n", q1);
    out << buf;
    std::snprintf(buf, sizeof buf, "median,%.9g\n", median);
    out << buf;
    std::snprintf(buf, sizeof buf, "q3,%.9g\n", q3);
    out << buf;
    std::snprintf(buf, sizeof buf, "max_abs,%.9g\n", max_abs);
    out << buf;
    return out.str();
}

// ------------------------------------------------- candidate comparison

std::string family_name(CandidateFamily f) {
    switch (f) {
    case CandidateFamily::normal: return "normal";
    case CandidateFamily::weibull: return "weibull";
    case CandidateFamily::poisson: return "poisson";
    case CandidateFamily::geometric: return "geometric";
    case CandidateFamily::binomial: return "binomial";
    }
    return "?";
}

namespace {

double log_factorial(double x) { return std::lgamma(x + 1.0); }

// Weighted Weibull MLE: bisection on the shape's profile equation.
std::pair<double, double> fit_weibull(std::span<const double> xs, std::span<const double> ws) {
    double wsum = 0.0, mean_log = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        wsum += ws[i];
        mean_log += ws[i] * std::log(xs[i]);
    }
    mean_log /= wsum;
    auto profile = [&](double shape) {
        double a = 0.0, b = 0.0;
        for (size_t i = 0; i < xs.size(); ++i) {
            double xk = std::pow(xs[i], shape);
            a += ws[i] * xk * std::log(xs[i]);
            b += ws[i] * xk;
        }
        return a / b - 1.0 / shape - mean_log;
    };
    double lo = 0.05, hi = 80.0;
    if (profile(lo) > 0.0) return {lo, 1.0};
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        (profile(mid) <= 0.0 ? lo : hi) = mid;
    }
    double shape = 0.5 * (lo + hi);
    double b = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) b += ws[i] * std::pow(xs[i], shape);
    double scale = std::pow(b / wsum, 1.0 / shape);
    return {shape, scale};
}

} // namespace

std::vector<FamilyScore> compare_families(const DistanceHistogram& h) {
    std::vector<double> xs, ws;
    size_t maxd = 0;
    for (size_t d = 1; d < h.counts.size(); ++d) {
        if (h.counts[d] > 0) maxd = d;
        xs.push_back(static_cast<double>(d));
        ws.push_back(static_cast<double>(h.counts[d]));
    }
    if (maxd < 2) throw degenerate_fit_error("compare_families: histogram too narrow");

    std::vector<double> empirical(maxd, 0.0);
    double wsum = 0.0;
    for (size_t d = 1; d <= maxd; ++d) wsum += static_cast<double>(h.counts[d]);
    for (size_t d = 1; d <= maxd; ++d)
        empirical[d - 1] = static_cast<double>(h.counts[d]) / wsum;

    Moments m = weighted_moments(xs, ws);
    double mean = m.mean, var = m.stddev * m.stddev;

    auto score_pmf = [&](CandidateFamily fam, std::vector<double> raw,
                         std::vector<double> params) -> FamilyScore {
        double s = 0.0;
        for (double& v : raw)
            if (!std::isfinite(v) || v < 0.0) v = 0.0;
        double tot = kahan_sum(raw);
        if (tot > 0.0)
            for (double& v : raw) v /= tot;
        for (size_t i = 0; i < raw.size(); ++i) {
            double d = raw[i] - empirical[i];
            s += d * d;
        }
        return {fam, s, std::move(raw), std::move(params)};
    };

    std::vector<FamilyScore> scores;

    { // normal
        NormalParams p{mean, std::max(m.stddev, 1e-9)};
        std::vector<double> pmf(maxd);
        for (size_t d = 1; d <= maxd; ++d) pmf[d - 1] = normal_pdf(static_cast<double>(d), p);
        scores.push_back(score_pmf(CandidateFamily::normal, std::move(pmf), {p.mu, p.sigma}));
    }
    { // weibull
        std::vector<double> pxs, pws;
        for (size_t i = 0; i < xs.size(); ++i)
            if (ws[i] > 0) { pxs.push_back(xs[i]); pws.push_back(ws[i]); }
        auto [shape, scale] = fit_weibull(pxs, pws);
        std::vector<double> pmf(maxd);
        for (size_t d = 1; d <= maxd; ++d) {
            double x = static_cast<double>(d) / scale;
            pmf[d - 1] = (shape / scale) * std::pow(x, shape - 1.0) * std::exp(-std::pow(x, shape));
        }
        scores.push_back(score_pmf(CandidateFamily::weibull, std::move(pmf), {shape, scale}));
    }
    { // poisson
        double lambda = mean;
        std::vector<double> pmf(maxd);
        for (size_t d = 1; d <= maxd; ++d) {
            double x = static_cast<double>(d);
            pmf[d - 1] = std::exp(-lambda + x * std::log(lambda) - log_factorial(x));
        }
        scores.push_back(score_pmf(CandidateFamily::poisson, std::move(pmf), {lambda}));
    }
    { // geometric on support 1, 2, ...
        double p = std::clamp(1.0 / mean, 1e-9, 1.0 - 1e-9);
        std::vector<double> pmf(maxd);
        for (size_t d = 1; d <= maxd; ++d)
            pmf[d - 1] = std::pow(1.0 - p, static_cast<double>(d - 1)) * p;
        scores.push_back(score_pmf(CandidateFamily::geometric, std::move(pmf), {p}));
    }
    { // binomial by moments, trial count discretized with ceil
        double p = std::clamp(1.0 - var / mean, 1e-6, 1.0 - 1e-6);
        double trials = std::max(std::ceil(mean / p), std::ceil(mean));
        p = mean / trials;
        std::vector<double> pmf(maxd);
        for (size_t d = 1; d <= maxd; ++d) {
            double x = static_cast<double>(d);
            if (x > trials) { pmf[d - 1] = 0.0; continue; }
            double lb = log_factorial(trials) - log_factorial(x) - log_factorial(trials - x) +
                        x * std::log(p) + (trials - x) * std::log1p(-p);
            pmf[d - 1] = std::exp(lb);
        }
        scores.push_back(score_pmf(CandidateFamily::binomial, std::move(pmf), {trials, p}));
    }

    std::sort(scores.begin(), scores.end(),
              [](const FamilyScore& a, const FamilyScore& b) { return a.sq_error < b.sq_error; });
    return scores;
}

} // namespace etad
