#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <list>
#include <optional>
#include <span>
#include <vector>

#include "topicdet/errors.hpp"
#include "topicdet/labeled_set.hpp"
#include "topicdet/logistic.hpp"

namespace topicdet {

struct SvmConfig {
    double C = 1.0;
    /// RBF width; std::nullopt resolves to 1 / (d * mean per-feature variance).
    std::optional<double> gamma;
    /// Stop when the maximal KKT violation (m(alpha) - M(alpha)) is <= tol.
    double tol = 1e-3;
    /// 0 picks max(10^7, 100 n).
    std::size_t max_iter = 0;
    std::size_t cache_bytes = std::size_t{256} << 20;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    return std::exp(-gamma * squared_distance(a, b));
}

/// 1 / (d * v) where v is the mean over features of the per-feature variance;
/// falls back to 1 when every feature is constant.
inline double auto_gamma(std::span<const EmbeddingVector> X) {
    if (X.empty()) throw InputError("cannot resolve gamma on empty data");
    const std::size_t d = X.front().size();
    const double n = static_cast<double>(X.size());
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& x : X) mean += x[j];
        mean /= n;
        double var = 0.0;
        for (const auto& x : X) var += (x[j] - mean) * (x[j] - mean);
        total += var / n;
    }
    const double v = total / static_cast<double>(d);
    return v > 0.0 ? 1.0 / (static_cast<double>(d) * v) : 1.0;
}

/// Kernel expansion over the support vectors only (alpha_i > 0).
struct SvmModel {
    std::size_t input_dim = 0;
    double C = 1.0;
    double gamma = 1.0;
    double bias = 0.0;
    std::vector<EmbeddingVector> support_vectors;
    std::vector<double> coefficients;  // alpha_i * y_i

    /// f(x) = sum_i alpha_i y_i K(x_i, x) + b
    double decision(std::span<const double> x) const {
        double f = bias;
        for (std::size_t i = 0; i < support_vectors.size(); ++i) {
            f += coefficients[i] * rbf_kernel(support_vectors[i], x, gamma);
        }
        return f;
    }

    /// sign(f), ties to +1.
    int predict_label(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : -1; }
};

struct SvmFit {
    SvmModel model;
    /// Dual variables for every training point, in input order.
    std::vector<double> alpha;
    double kkt_violation = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// sum(alpha) - 1/2 alpha' Q alpha at the returned point.
    double dual_objective = 0.0;
};

namespace detail {

// Kernel rows computed on demand with LRU eviction under a byte budget.
class KernelRowCache {
public:
    KernelRowCache(const std::vector<EmbeddingVector>& X, double gamma, std::size_t budget_bytes)
        : X_(X), gamma_(gamma), rows_(X.size()), where_(X.size()) {
        const std::size_t row_bytes = std::max<std::size_t>(1, X.size() * sizeof(double));
        capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
    }

    const std::vector<double>& row(std::size_t i) {
        if (!rows_[i].empty()) {
            lru_.splice(lru_.begin(), lru_, where_[i]);
            return rows_[i];
        }
        if (lru_.size() >= capacity_) {
            const std::size_t victim = lru_.back();
            lru_.pop_back();
            rows_[victim].clear();
            rows_[victim].shrink_to_fit();
        }
        auto& r = rows_[i];
        r.resize(X_.size());
        for (std::size_t j = 0; j < X_.size(); ++j) r[j] = rbf_kernel(X_[i], X_[j], gamma_);
        lru_.push_front(i);
        where_[i] = lru_.begin();
        return r;
    }

private:
    const std::vector<EmbeddingVector>& X_;
    double gamma_;
    std::vector<std::vector<double>> rows_;
    std::vector<std::list<std::size_t>::iterator> where_;
    std::list<std::size_t> lru_;
    std::size_t capacity_ = 2;
};

}  // namespace detail

/// Soft-margin dual solved by SMO with second-order working-set selection
/// (Fan, Chen & Lin 2005). Minimizes 1/2 a'Qa - e'a subject to 0 <= a <= C
/// and y'a = 0, with Q_ij = y_i y_j K(x_i, x_j). Never throws on
/// non-convergence; check `converged`.
inline SvmFit fit_svm(const LabeledSet& data, const SvmConfig& config) {
    data.require_both_classes();
    if (!(config.C > 0.0)) throw ValidationError("C must be positive");
    const double gamma = config.gamma ? *config.gamma : auto_gamma(data.X);
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");

    constexpr double tau = 1e-12;
    const std::size_t n = data.size();
    const double C = config.C;
    const auto& y = data.y;
    const std::size_t max_iter = config.max_iter ? config.max_iter : std::max<std::size_t>(10'000'000, 100 * n);

    std::vector<double> alpha(n, 0.0);
    std::vector<double> G(n, -1.0);  // gradient Q alpha - e
    detail::KernelRowCache cache(data.X, gamma, config.cache_bytes);

    auto upper = [&](std::size_t t) { return alpha[t] >= C; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    SvmFit fit;
    std::size_t iter = 0;
    double violation = std::numeric_limits<double>::infinity();
    while (true) {
        // i: maximal -y_t G_t over I_up.
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1 ? !upper(t) : !lower(t)) {
                const double v = -y[t] * G[t];
                if (v >= gmax) {
                    gmax = v;
                    i = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        // j: over I_low, maximal second-order gain; gmax2 tracks max y_t G_t.
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t j = -1;
        double best = std::numeric_limits<double>::infinity();
        const std::vector<double>* Ki = i >= 0 ? &cache.row(static_cast<std::size_t>(i)) : nullptr;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] == 1 ? lower(t) : upper(t)) continue;
            const double v = y[t] * G[t];
            gmax2 = std::max(gmax2, v);
            if (!Ki) continue;
            const double grad_diff = gmax + v;
            if (grad_diff > 0.0) {
                double quad = 2.0 - 2.0 * (*Ki)[t];
                if (quad <= 0.0) quad = tau;
                const double obj = -(grad_diff * grad_diff) / quad;
                if (obj <= best) {
                    best = obj;
                    j = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        violation = gmax + gmax2;
        if (violation <= config.tol || j < 0 || i < 0) {
            fit.converged = true;
            break;
        }
        if (iter >= max_iter) break;
        ++iter;

        const auto ui = static_cast<std::size_t>(i);
        const auto uj = static_cast<std::size_t>(j);
        const std::vector<double> Ki_row = cache.row(ui);  // copy: next call may evict
        const std::vector<double>& Kj = cache.row(uj);
        const double Kij = Ki_row[uj];
        const double old_ai = alpha[ui];
        const double old_aj = alpha[uj];
        if (y[ui] != y[uj]) {
            double quad = 2.0 + 2.0 * (-Kij);  // Q_ii + Q_jj + 2 Q_ij with Q_ij = -K_ij
            quad = quad <= 0.0 ? tau : quad;
            const double delta = (-G[ui] - G[uj]) / quad;
            const double diff = alpha[ui] - alpha[uj];
            alpha[ui] += delta;
            alpha[uj] += delta;
            if (diff > 0.0) {
                if (alpha[uj] < 0.0) {
                    alpha[uj] = 0.0;
                    alpha[ui] = diff;
                }
            } else if (alpha[ui] < 0.0) {
                alpha[ui] = 0.0;
                alpha[uj] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[ui] > C) {
                    alpha[ui] = C;
                    alpha[uj] = C - diff;
                }
            } else if (alpha[uj] > C) {
                alpha[uj] = C;
                alpha[ui] = C + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * Kij;
            quad = quad <= 0.0 ? tau : quad;
            const double delta = (G[ui] - G[uj]) / quad;
            const double sum = alpha[ui] + alpha[uj];
            alpha[ui] -= delta;
            alpha[uj] += delta;
            if (sum > C) {
                if (alpha[ui] > C) {
                    alpha[ui] = C;
                    alpha[uj] = sum - C;
                }
            } else if (alpha[uj] < 0.0) {
                alpha[uj] = 0.0;
                alpha[ui] = sum;
            }
            if (sum > C) {
                if (alpha[uj] > C) {
                    alpha[uj] = C;
                    alpha[ui] = sum - C;
                }
            } else if (alpha[ui] < 0.0) {
                alpha[ui] = 0.0;
                alpha[uj] = sum;
            }
        }
        const double dai = alpha[ui] - old_ai;
        const double daj = alpha[uj] - old_aj;
        for (std::size_t t = 0; t < n; ++t) {
            G[t] += y[t] * (y[ui] * Ki_row[t] * dai + y[uj] * Kj[t] * daj);
        }
    }

    // Bias: average y_t G_t over free vectors, else the midpoint of the
    // feasible interval implied by the bounded ones.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    double objective = 0.0;  // 1/2 a'(G + e) - e'a = 1/2 sum a_t (G_t - 1)
    for (std::size_t t = 0; t < n; ++t) objective += alpha[t] * (G[t] - 1.0);
    objective *= 0.5;

    fit.alpha = alpha;
    fit.kkt_violation = violation;
    fit.iterations = iter;
    fit.dual_objective = -objective;
    auto& model = fit.model;
    model.input_dim = data.dim();
    model.C = C;
    model.gamma = gamma;
    model.bias = -rho;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            model.support_vectors.push_back(data.X[t]);
            model.coefficients.push_back(alpha[t] * y[t]);
        }
    }
    return fit;
}

/// Like fit_svm but throws ConvergenceError at the iteration cap.
inline SvmModel train_svm(const LabeledSet& data, const SvmConfig& config = {}) {
    auto fit = fit_svm(data, config);
    if (!fit.converged) throw ConvergenceError(fit.kkt_violation, fit.iterations);
    return std::move(fit.model);
}

/// sigma(f(x)) with unit slope.
inline double predict_score(const SvmModel& model, std::span<const double> x) {
    check_dimension(model.input_dim, x.size());
    return sigmoid(model.decision(x));
}

}  // namespace topicdet
