#ifndef ETAD_ERRORS_HPP
#define ETAD_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace etad {

// Invalid argument to an operation (bad n/k/eta, out-of-range node, ...).
struct parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Histogram carries too little information to fit a two-parameter model.
struct degenerate_fit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The closed-form masses alone exceed probability 1, or the density
// underflows everywhere past the fixed points.
struct infeasible_discretization_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Nonlinear least squares did not converge; carries the best point found.
struct fit_failure_error : std::runtime_error {
    fit_failure_error(const std::string& msg, std::vector<double> best, double rss)
        : std::runtime_error(msg), best_constants(std::move(best)), best_rss(rss) {}
    std::vector<double> best_constants;
    double best_rss = 0.0;
};

// An analysis was asked to run on an empty observation set.
struct no_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A simulation was configured with mutually impossible options.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace etad

#endif
