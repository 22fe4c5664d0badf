#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tforge/errors.hpp"
#include "tforge/models.hpp"

namespace tforge {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_shapes(const DesignMatrix& x, std::span<const int> y, std::span<const double> w,
                  std::span<const double> beta) {
    if (y.size() != x.rows || w.size() != x.rows) throw LengthMismatch("one label and one weight per row");
    if (beta.size() != x.cols) throw LengthMismatch("one coefficient per encoded column");
}

void margins(const DesignMatrix& x, std::span<const double> beta, double intercept, std::vector<double>& z) {
    z.assign(x.rows, intercept);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double s = intercept;
        for (auto k = x.row_start[i]; k < x.row_start[i + 1]; ++k) s += x.value[k] * beta[x.index[k]];
        z[i] = s;
    }
}

double loss_from_margins(std::span<const double> z, std::span<const int> y, std::span<const double> w,
                         std::span<const double> beta, double l2) {
    double sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += w[i] * (softplus(z[i]) - (y[i] == 1 ? z[i] : 0.0));
    const double n = static_cast<double>(z.size());
    double penalty = 0;
    for (double b : beta) penalty += b * b;
    return (n > 0 ? sum / n : 0.0) + 0.5 * l2 * penalty;
}

std::vector<double> gradient_from_margins(const DesignMatrix& x, std::span<const double> z, std::span<const int> y,
                                          std::span<const double> w, std::span<const double> beta, double l2,
                                          double& grad_intercept) {
    std::vector<double> g(x.cols, 0.0);
    const double n = static_cast<double>(x.rows);
    grad_intercept = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double r = w[i] * (sigmoid(z[i]) - y[i]) / n;
        grad_intercept += r;
        for (auto k = x.row_start[i]; k < x.row_start[i + 1]; ++k) g[x.index[k]] += r * x.value[k];
    }
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += l2 * beta[j];
    return g;
}

} // namespace

double weighted_log_loss(const DesignMatrix& x, std::span<const int> y, std::span<const double> w,
                         std::span<const double> beta, double intercept, double l2) {
    check_shapes(x, y, w, beta);
    std::vector<double> z;
    margins(x, beta, intercept, z);
    return loss_from_margins(z, y, w, beta, l2);
}

std::vector<double> weighted_log_loss_gradient(const DesignMatrix& x, std::span<const int> y,
                                               std::span<const double> w, std::span<const double> beta,
                                               double intercept, double l2, double& grad_intercept) {
    check_shapes(x, y, w, beta);
    std::vector<double> z;
    margins(x, beta, intercept, z);
    return gradient_from_margins(x, z, y, w, beta, l2, grad_intercept);
}

LogRegModel train_logreg(const Dataset& train, std::span<const double> weights, const LogRegHyper& hyper) {
    const auto y = train.labels();
    if (weights.size() != y.size()) {
        throw LengthMismatch(fmt::format("{} weights for {} rows", weights.size(), y.size()));
    }
    const auto positives = std::count(y.begin(), y.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(y.size())) {
        throw DegenerateData("logistic regression needs both classes in the training data");
    }
    if (!(hyper.learning_rate > 0) || hyper.epochs < 0 || hyper.l2 < 0) throw Error("invalid logreg hyperparameters");

    LogRegModel model;
    model.hyper = hyper;
    model.encoder = FeatureEncoder::fit(train);
    const auto x = model.encoder.transform(train);
    model.coefficients.assign(x.cols, 0.0);

    std::vector<double> z, z_next, beta_next(x.cols);
    margins(x, model.coefficients, model.intercept, z);
    double loss = loss_from_margins(z, y, weights, model.coefficients, hyper.l2);
    model.initial_loss = loss;

    double lr = hyper.learning_rate;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        double g0 = 0;
        const auto g = gradient_from_margins(x, z, y, weights, model.coefficients, hyper.l2, g0);
        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            for (std::size_t j = 0; j < g.size(); ++j) beta_next[j] = model.coefficients[j] - lr * g[j];
            const double b_next = model.intercept - lr * g0;
            margins(x, beta_next, b_next, z_next);
            const double candidate = loss_from_margins(z_next, y, weights, beta_next, hyper.l2);
            if (candidate <= loss) {
                model.coefficients.swap(beta_next);
                model.intercept = b_next;
                z.swap(z_next);
                loss = candidate;
                accepted = true;
            } else {
                lr *= 0.5;
                ++model.step_halvings;
            }
        }
        if (!accepted) break; // no descent step left at machine precision
    }
    model.final_loss = loss;
    return model;
}

std::vector<double> predict_proba(const LogRegModel& model, const Dataset& rows) {
    const auto x = model.encoder.transform(rows);
    if (x.cols != model.coefficients.size()) throw SchemaMismatch("encoded width differs from the coefficient count");
    std::vector<double> z;
    margins(x, model.coefficients, model.intercept, z);
    for (auto& v : z) v = sigmoid(v);
    return z;
}

} // namespace tforge
