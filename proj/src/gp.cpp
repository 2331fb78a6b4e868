#include "cbo/gp.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace cbo {

PriorFn zero_prior() {
    return [](const std::vector<double>&) { return PriorValue{0.0, 0.0}; };
}

PriorFn causal_prior(std::shared_ptr<const DoEffectSurface> surface) {
    return [surface](const std::vector<double>& x) {
        SurfaceValue v = surface->query(x);
        return PriorValue{v.mean, std::sqrt(std::max(0.0, v.variance))};
    };
}

GpModel::GpModel(std::size_t dim, RbfParams kernel, double noise_variance, PriorFn prior,
                 std::optional<Box> normalization)
    : dim_(dim), kernel_(kernel), noise_variance_(noise_variance), prior_(std::move(prior)),
      normalization_(std::move(normalization)) {
    if (kernel_.lengthscale <= 0 || kernel_.variance <= 0) {
        raise(ErrorKind::ConfigError, "RBF parameters must be positive");
    }
    if (normalization_ && normalization_->dim() != dim_) {
        raise(ErrorKind::DimensionMismatch, "normalization box does not match input dimension");
    }
    if (!prior_) prior_ = zero_prior();
    refit();
}

std::vector<double> GpModel::normalize(const std::vector<double>& x) const {
    if (!normalization_) return x;
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto [lo, hi] = normalization_->bounds[i];
        u[i] = (x[i] - lo) / (hi - lo);
    }
    return u;
}

double GpModel::rbf(const std::vector<double>& u, const std::vector<double>& v) const {
    double ss = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - v[i];
        ss += d * d;
    }
    return kernel_.variance * std::exp(-ss / (2.0 * kernel_.lengthscale * kernel_.lengthscale));
}

GpModel GpModel::with_point(const std::vector<double>& x, double y) const {
    if (x.size() != dim_) raise(ErrorKind::DimensionMismatch, "training point has wrong dimension");
    GpModel next = *this;
    next.xs_.push_back(x);
    next.ys_.push_back(y);
    next.refit();
    return next;
}

GpModel GpModel::with_data(const std::vector<std::vector<double>>& xs,
                           const std::vector<double>& ys) const {
    if (xs.size() != ys.size()) raise(ErrorKind::DimensionMismatch, "inputs/targets length mismatch");
    for (const auto& x : xs) {
        if (x.size() != dim_) raise(ErrorKind::DimensionMismatch, "training point has wrong dimension");
    }
    GpModel next = *this;
    next.xs_ = xs;
    next.ys_ = ys;
    next.refit();
    return next;
}

GpModel GpModel::with_params(RbfParams kernel, double noise_variance) const {
    if (kernel.lengthscale <= 0 || kernel.variance <= 0) {
        raise(ErrorKind::ConfigError, "RBF parameters must be positive");
    }
    GpModel next = *this;
    next.kernel_ = kernel;
    next.noise_variance_ = noise_variance;
    next.refit();
    return next;
}

void GpModel::refit() {
    const std::size_t n = xs_.size();
    us_.clear();
    prior_at_train_.clear();
    alpha_.clear();
    chol_.clear();
    log_det_half_ = 0.0;
    if (n == 0) return;

    us_.reserve(n);
    prior_at_train_.reserve(n);
    for (const auto& x : xs_) {
        us_.push_back(normalize(x));
        prior_at_train_.push_back(prior_(x));
    }

    Eigen::MatrixXd K(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double k = rbf(us_[i], us_[j]) + prior_at_train_[i].sigma * prior_at_train_[j].sigma;
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k;
            K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = k;
        }
    }
    const double mean_diag = K.diagonal().mean();
    Eigen::VectorXd resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid(static_cast<Eigen::Index>(i)) = ys_[i] - prior_at_train_[i].mean;
    }

    // Escalating jitter before giving up on the factorization.
    double jitter = 0.0;
    for (int attempt = 0; attempt <= 7; ++attempt) {
        Eigen::MatrixXd Kn = K;
        Kn.diagonal().array() += noise_variance_ + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(Kn);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd L = llt.matrixL();
            Eigen::VectorXd a = llt.solve(resid);
            chol_.resize(n * n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    chol_[i * n + j] = L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
            alpha_.resize(n);
            for (std::size_t i = 0; i < n; ++i) alpha_[i] = a(static_cast<Eigen::Index>(i));
            log_det_half_ = 0.0;
            for (std::size_t i = 0; i < n; ++i) log_det_half_ += std::log(chol_[i * n + i]);
            return;
        }
        jitter = (jitter == 0.0 ? 1e-10 : jitter * 10.0) * std::max(mean_diag, 1.0);
        if (jitter > 1e-4 * std::max(mean_diag, 1.0)) break;
    }
    raise(ErrorKind::NumericalFailure, "kernel matrix factorization failed at maximum jitter");
}

Posterior GpModel::posterior(const std::vector<double>& x) const {
    if (x.size() != dim_) raise(ErrorKind::DimensionMismatch, "query point has wrong dimension");
    const PriorValue pv = prior_(x);
    const std::size_t n = xs_.size();
    const double k_self = kernel_.variance + pv.sigma * pv.sigma;
    if (n == 0) return {pv.mean, k_self};

    std::vector<double> u = normalize(x);
    Eigen::VectorXd kn(n);
    for (std::size_t i = 0; i < n; ++i) {
        kn(static_cast<Eigen::Index>(i)) = rbf(u, us_[i]) + pv.sigma * prior_at_train_[i].sigma;
    }
    double mean = pv.mean;
    for (std::size_t i = 0; i < n; ++i) mean += kn(static_cast<Eigen::Index>(i)) * alpha_[i];

    // v = L^-1 k_n by forward substitution on the cached factor.
    Eigen::VectorXd v = kn;
    for (std::size_t i = 0; i < n; ++i) {
        double s = v(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n + j] * v(static_cast<Eigen::Index>(j));
        v(static_cast<Eigen::Index>(i)) = s / chol_[i * n + i];
    }
    double variance = k_self - v.squaredNorm();
    return {mean, std::max(0.0, variance)};
}

double GpModel::log_marginal_likelihood() const {
    const std::size_t n = xs_.size();
    if (n == 0) return 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        quad += (ys_[i] - prior_at_train_[i].mean) * alpha_[i];
    }
    return -0.5 * quad - log_det_half_ -
           0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
}

std::vector<HyperCandidate> default_hyper_grid() {
    std::vector<HyperCandidate> grid;
    const double lengthscales[] = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0};
    const double variances[] = {0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
    const double noises[] = {1e-6, 1e-4, 1e-2};
    for (double l : lengthscales) {
        for (double v : variances) {
            for (double s : noises) grid.push_back({l, v, s});
        }
    }
    return grid;
}

GpModel fit_hyperparameters(const GpModel& gp, const std::vector<HyperCandidate>& grid) {
    if (gp.size() < 2) raise(ErrorKind::InsufficientData, "hyperparameter fit needs n >= 2");
    if (grid.empty()) raise(ErrorKind::ConfigError, "empty hyperparameter grid");

    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end(), [](const HyperCandidate& a, const HyperCandidate& b) {
        if (a.lengthscale != b.lengthscale) return a.lengthscale < b.lengthscale;
        if (a.variance != b.variance) return a.variance < b.variance;
        return a.noise_variance < b.noise_variance;
    });
    GpModel best;
    double best_lml = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& c : sorted) {
        GpModel candidate = gp.with_params({c.lengthscale, c.variance}, c.noise_variance);
        double lml = candidate.log_marginal_likelihood();
        if (!found || lml > best_lml + 1e-12) {
            best = candidate;
            best_lml = lml;
            found = true;
        }
    }
    return best;
}

}  // namespace cbo
