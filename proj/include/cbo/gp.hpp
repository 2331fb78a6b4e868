#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cbo/estimation.hpp"

namespace cbo {

struct RbfParams {
    double lengthscale = 1.0;
    double variance = 1.0;
};

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;  // clamped at 0
};

// Prior mean and variance-inflation queried together (one surface evaluation
// per point). sigma = 0 and mean = 0 give the standard zero-mean RBF model.
struct PriorValue {
    double mean = 0.0;
    double sigma = 0.0;
};

using PriorFn = std::function<PriorValue(const std::vector<double>&)>;

PriorFn zero_prior();

// Eq-style causal prior: mean from the do-calculus surface, sigma the square
// root of its variance estimate.
PriorFn causal_prior(std::shared_ptr<const DoEffectSurface> surface);

// Axis-aligned box used both as interventional domain and as the kernel's
// normalization frame (inputs mapped to [0,1]^d so that default
// hyperparameters are scale-free).
struct Box {
    std::vector<std::pair<double, double>> bounds;

    std::size_t dim() const { return bounds.size(); }
};

// Exact Gaussian process with an RBF kernel plus the rank-structured causal
// term k(x,x') = v exp(-||u-u'||^2 / 2l^2) + sigma(x) sigma(x').
// Value-semantic: with_point/with_params return updated copies.
class GpModel {
  public:
    GpModel() = default;
    GpModel(std::size_t dim, RbfParams kernel, double noise_variance, PriorFn prior,
            std::optional<Box> normalization = std::nullopt);

    GpModel with_point(const std::vector<double>& x, double y) const;
    GpModel with_data(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) const;
    GpModel with_params(RbfParams kernel, double noise_variance) const;

    Posterior posterior(const std::vector<double>& x) const;
    double log_marginal_likelihood() const;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return xs_.size(); }
    const RbfParams& kernel() const { return kernel_; }
    double noise_variance() const { return noise_variance_; }
    const std::vector<std::vector<double>>& inputs() const { return xs_; }
    const std::vector<double>& targets() const { return ys_; }

  private:
    void refit();
    std::vector<double> normalize(const std::vector<double>& x) const;
    double rbf(const std::vector<double>& u, const std::vector<double>& v) const;

    std::size_t dim_ = 0;
    RbfParams kernel_;
    double noise_variance_ = 1e-5;
    PriorFn prior_;
    std::optional<Box> normalization_;

    std::vector<std::vector<double>> xs_;        // raw inputs
    std::vector<double> ys_;
    std::vector<std::vector<double>> us_;        // normalized inputs
    std::vector<PriorValue> prior_at_train_;
    std::vector<double> alpha_;                  // (K + noise I)^-1 residuals
    std::vector<double> chol_;                   // row-major lower factor
    double log_det_half_ = 0.0;
};

struct HyperCandidate {
    double lengthscale;
    double variance;
    double noise_variance;
};

std::vector<HyperCandidate> default_hyper_grid();

// Exhaustive log-marginal-likelihood search; ties broken by smallest
// lengthscale, then variance, then noise.
GpModel fit_hyperparameters(const GpModel& gp, const std::vector<HyperCandidate>& grid);

}  // namespace cbo
