#include "multibal/eval.hpp"

#include "multibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace multibal {

PeheReport pehe_from_means(const Matrix &predicted, const Matrix &truth) {
    require(predicted.rows() == truth.rows() && predicted.cols() == truth.cols(), ErrorKind::shape,
            "pehe: predicted " + shape_string(predicted) + " vs truth " + shape_string(truth));
    require(predicted.rows() > 0, ErrorKind::insufficient_data, "pehe: no rows");
    const auto arms = predicted.cols();
    const Matrix err = predicted - truth;
    PeheReport r;
    r.per_pair = Matrix::Zero(arms, arms);
    for (Eigen::Index j = 0; j < arms; ++j) {
        for (Eigen::Index k = j + 1; k < arms; ++k) {
            r.per_pair(j, k) = (err.col(j) - err.col(k)).squaredNorm() / static_cast<double>(err.rows());
            r.pehe += r.per_pair(j, k);
        }
    }
    r.sqrt_pehe = std::sqrt(r.pehe);
    return r;
}

PeheReport pehe(const ModelParams &theta, const Dataset &ds) {
    require(ds.truth.has_value(), ErrorKind::config, "pehe needs a dataset with ground-truth means");
    return pehe_from_means(predict_means(theta, ds.x), *ds.truth);
}

Vector adrf(const ModelParams &theta, const Dataset &ds) {
    require(ds.rows() > 0, ErrorKind::insufficient_data, "adrf: empty dataset");
    return predict_means(theta, ds.x).colwise().mean().transpose();
}

std::vector<InterpolationPoint> interpolate_effect(const ModelParams &theta, int from, int to, int steps,
                                                   const Dataset &ds) {
    require(theta.head_mode == HeadMode::embed_conditioned, ErrorKind::config,
            "interpolate_effect needs an embed_conditioned model");
    require(from >= 0 && from < theta.arms() && to >= 0 && to < theta.arms(), ErrorKind::shape,
            "interpolate_effect: treatment index out of range");
    require(steps >= 2, ErrorKind::config, "interpolate_effect: steps must be >= 2");
    require(ds.rows() > 0, ErrorKind::insufficient_data, "interpolate_effect: empty dataset");
    const Matrix z = mlp_apply(theta.phi, ds.x);
    const Vector a = theta.table.row(from).transpose();
    const Vector b = theta.table.row(to).transpose();
    std::vector<InterpolationPoint> curve;
    curve.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const double lambda = static_cast<double>(s) / (steps - 1);
        const Vector e = (1.0 - lambda) * a + lambda * b;
        curve.push_back({lambda, predict_with_embedding(theta, z, e).mean()});
    }
    return curve;
}

Matrix principal_projection(const Matrix &table, int components) {
    require(table.rows() >= 2, ErrorKind::insufficient_data, "principal_projection needs at least 2 rows");
    require(components >= 1 && components <= table.cols(), ErrorKind::config,
            "principal_projection: components must lie in [1, columns]");
    const Matrix centred = table.rowwise() - table.colwise().mean();
    const Eigen::MatrixXd cov = Eigen::MatrixXd(centred.transpose() * centred);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // Eigenvalues come in ascending order; take the last `components` vectors.
    const Eigen::MatrixXd basis = es.eigenvectors().rightCols(components).rowwise().reverse();
    return centred * basis;
}

std::vector<int> angular_order(const Matrix &table) {
    const Matrix p = principal_projection(table, 2);
    std::vector<int> order(static_cast<std::size_t>(table.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> angle(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        angle[i] = std::atan2(p(static_cast<Eigen::Index>(i), 1), p(static_cast<Eigen::Index>(i), 0));
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return angle[static_cast<std::size_t>(a)] < angle[static_cast<std::size_t>(b)];
    });
    return order;
}

bool is_cyclic_order(const std::vector<int> &order) {
    const auto k = static_cast<int>(order.size());
    if (k < 3) { return true; }
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < k; ++i) {
        if (sorted[static_cast<std::size_t>(i)] != i) { return false; }
    }
    bool forward = true, backward = true;
    for (int i = 0; i < k; ++i) {
        const int a = order[static_cast<std::size_t>(i)];
        const int b = order[static_cast<std::size_t>((i + 1) % k)];
        forward = forward && b == (a + 1) % k;
        backward = backward && b == (a + k - 1) % k;
    }
    return forward || backward;
}

int nearest_row(const Matrix &table, int row) {
    require(table.rows() >= 2 && row >= 0 && row < table.rows(), ErrorKind::shape, "nearest_row: bad row index");
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < table.rows(); ++j) {
        if (j == row) { continue; }
        const double d = (table.row(j) - table.row(row)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

}  // namespace multibal
