#ifndef ETAD_DISTMODEL_HPP
#define ETAD_DISTMODEL_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etad/graph.hpp"

namespace etad {

struct NormalParams {
    double mu = 0.0;
    double sigma = 0.0; // > 0
};

// Probability mass over hop distances 0..t_max. When produced by
// discretize(), mass[0] and mass[1] carry the closed-form network values and
// the tail is a renormalized normal density.
struct DiscreteDistribution {
    std::vector<double> mass;
    uint32_t n = 0;
    uint32_t k = 0;
    double epsilon = 0.0;

    size_t support() const { return mass.size(); }

    // Normalize arbitrary nonnegative weights into a distribution (fixtures,
    // randomized tests). Metadata is left zero.
    static DiscreteDistribution from_weights(std::vector<double> weights);
};

enum class ModelId { M1, M2, M3, M4, S };

ModelId model_from_string(std::string_view name);
std::string model_name(ModelId id);
size_t model_arity(ModelId id);
std::span<const char* const> model_constant_names(ModelId id);

// Closed-form estimator constants; count must match the model arity.
struct ModelConstants {
    ModelId id = ModelId::M2;
    std::vector<double> values;

    std::string to_json() const;
    static ModelConstants from_json(std::string_view text);
};

// Shipped defaults for the mean and spread estimators.
const ModelConstants& default_mu_constants();    // M2
const ModelConstants& default_sigma_constants(); // S

struct FitRow {
    double n = 0;
    double k = 0;
    double mu_hat = 0;
    double sigma_hat = 0;
};

struct FitDataset {
    std::vector<FitRow> rows;

    std::string to_csv() const; // header: n,k,mu_hat,sigma_hat
    static FitDataset from_csv(std::string_view text);
};

// Maximum-likelihood normal fit on the pooled distance samples; distance-0
// self pairs are excluded (their mass is fixed in closed form later).
// Throws degenerate_fit_error when fewer than two distinct distances remain.
NormalParams fit_normal(const DistanceHistogram& h);

// Point-wise density evaluation with fixed masses at distances 0 and 1 and
// the tail scaled so everything sums to 1. t_max is the smallest integer t
// with 1 - CDF(t) <= epsilon (at least 2).
DiscreteDistribution discretize(NormalParams p, uint32_t n, uint32_t k, double epsilon);

double eval_model(ModelId id, std::span<const double> c, double n, double k);

double estimate_mu(uint32_t n, uint32_t k, const ModelConstants& c = default_mu_constants());
double estimate_sigma(uint32_t n, uint32_t k, const ModelConstants& c = default_sigma_constants());

struct FitResult {
    ModelConstants constants;
    double rss = 0.0;
    double residual_std = 0.0;
    int iterations = 0;
};

// Least-squares fit of a model's constants to (n, k) -> mu_hat rows (or
// sigma_hat for S). Warm-started at the shipped defaults unless an initial
// point is given; all-ones fallback if the defaults do not apply.
// Throws fit_failure_error (with best-so-far) on non-convergence or when the
// dataset has fewer than 2x arity rows.
FitResult fit_model_constants(const FitDataset& data, ModelId id,
                              std::optional<std::vector<double>> init = std::nullopt);

struct BiasReport {
    std::vector<double> residuals; // model - observed, per row
    double q1 = 0, median = 0, q3 = 0;
    double max_abs = 0;

    std::string to_csv() const;
};

BiasReport model_bias_report(const FitDataset& data, const ModelConstants& c);

// Families once considered for the distance distribution; kept as scored
// baselines for the comparison report.
enum class CandidateFamily { normal, weibull, poisson, geometric, binomial };

std::string family_name(CandidateFamily f);

struct FamilyScore {
    CandidateFamily family;
    double sq_error = 0.0;          // point-wise squared error vs the data pmf
    std::vector<double> pmf;        // over distances 1..max
    std::vector<double> parameters; // fitted family parameters
};

// Fits every family to the histogram (distance 0 excluded) and scores the
// point-wise fit; result sorted best-first.
std::vector<FamilyScore> compare_families(const DistanceHistogram& h);

double normal_pdf(double x, const NormalParams& p);
double normal_cdf(double x, const NormalParams& p);

} // namespace etad

#endif
