#pragma once

#include "multibal/dataset.hpp"
#include "multibal/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace multibal {

enum class ComplexityMethod { lipschitz, rademacher_mc, constant };

const char *to_string(ComplexityMethod m);
ComplexityMethod complexity_method_from_string(const std::string &name);

struct ComplexitySpec {
    ComplexityMethod method = ComplexityMethod::lipschitz;
    double scale = 1.0;    // C
    double delta = 0.05;   // confidence
    int mc_draws = 64;

    void validate() const;
};

/// What the complexity term may need; only the fields of the chosen method are required.
struct ComplexityInputs {
    int n = 0;
    double loss_bound = 0.0;                    // M-hat
    std::optional<double> lipschitz;            // L-hat(alpha)
    std::optional<Vector> per_sample_loss;      // rademacher_mc
    std::uint64_t seed = 0;                     // rademacher_mc sign draws
};

/// constant: M sqrt(log(2/delta) / 2n)
/// lipschitz: C L / sqrt(n) + constant
/// rademacher_mc: 2 * mean over sign draws of |(1/n) sum sigma_i loss_i| + constant
double complexity_term(const ComplexitySpec &spec, const ComplexityInputs &in);

struct ProfilePoint {
    double alpha = 0.0;
    double factual = 0.0;
    double imbalance = 0.0;
    double comp = 0.0;
    double qhat = 0.0;
    double lipschitz = 0.0;
    double seconds = 0.0;
};

/// Builds a point with qhat = factual + alpha * imbalance + comp.
ProfilePoint make_profile_point(double alpha, double factual, double imbalance, double comp, double lipschitz = 0.0,
                                double seconds = 0.0);

struct TrainedPoint {
    ProfilePoint point;
    TrainResult model;
};

/// Trains theta-hat(alpha), then scores it on the full dataset.
TrainedPoint profile_point(const Dataset &ds, double alpha, const StrategySpec &spec, const TrainConfig &cfg,
                           const ComplexitySpec &comp, const GeodesicGraph *graph = nullptr);

/// Maps alpha to a profile point; lets the search run on stubs as well as on trained models.
using ProfileFn = std::function<ProfilePoint(double alpha)>;

struct BoabResult {
    double alpha_hat = 0.0;
    std::size_t best_index = 0;
    std::vector<ProfilePoint> points;
    std::optional<TrainResult> best_model;
};

/// Grid must be non-empty, non-negative and strictly increasing.
void check_grid(const std::vector<double> &grid);

/// Argmin of qhat over the grid; ties go to the smaller alpha.
std::size_t argmin_qhat(const std::vector<ProfilePoint> &points);

BoabResult boab_search(const std::vector<double> &grid, const ProfileFn &profile, int workers = 1);

/// Algorithm with real training at every grid point. Every grid point uses the
/// same training seed; the winning model is returned from the cache.
BoabResult boab_search(const Dataset &ds, const std::vector<double> &grid, const StrategySpec &spec,
                       const TrainConfig &cfg, const ComplexitySpec &comp, const GeodesicGraph *graph = nullptr,
                       int workers = 1);

struct ProfileScores {
    std::vector<double> alpha;       // interior grid points
    std::vector<double> envelope;    // imbalance + d Comp / d alpha (central difference)
    std::vector<double> finite_diff; // central difference of qhat
};

ProfileScores profile_score(const std::vector<ProfilePoint> &points);

struct AlphaEstimate {
    double alpha_hat = 0.0;
    double standard_error = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double median = 0.0;
    std::vector<double> replicates;
};

/// Builds the profile for one (resampled) dataset.
using ProfileFactory = std::function<ProfileFn(const Dataset &)>;

/// Arm-stratified bootstrap of the selected alpha; B >= 20.
AlphaEstimate bootstrap_alpha(const Dataset &ds, int replicates, const std::vector<double> &grid,
                              const ProfileFactory &factory, std::uint64_t seed, int workers = 1);

AlphaEstimate bootstrap_alpha(const Dataset &ds, int replicates, const std::vector<double> &grid,
                              const StrategySpec &spec, const TrainConfig &cfg, const ComplexitySpec &comp,
                              std::uint64_t seed, int workers = 1);

/// Rows resampled with replacement inside each arm.
Dataset stratified_resample(const Dataset &ds, RngStream &rng);

void write_profile_csv(const std::vector<ProfilePoint> &points, const std::string &path);

}  // namespace multibal
