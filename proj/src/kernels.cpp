#include "multibal/kernels.hpp"

#include "multibal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace multibal {

namespace {

// Pairwise distances beyond this many rows are taken on an evenly spaced subset.
constexpr Eigen::Index kMedianRowCap = 1024;

Matrix stack_rows(const Matrix &a, const Matrix &b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

KernelSpec resolved_for(const KernelSpec &spec, const Matrix &a, const Matrix &b) {
    if (spec.is_resolved()) { return spec; }
    return resolve(spec, stack_rows(a, b));
}

double gamma_of(const KernelSpec &spec) {
    require(spec.bandwidth.has_value() && *spec.bandwidth > 0.0, ErrorKind::config,
            "rbf kernel bandwidth must be resolved and positive");
    return *spec.bandwidth;
}

// Centers a symmetric matrix: H M H with H = I - 11'/n.
Matrix double_center(const Matrix &m) {
    const Vector row_mean = m.rowwise().mean();
    const Vector col_mean = m.colwise().mean().transpose();
    const double grand = m.mean();
    Matrix c = m;
    c.colwise() -= row_mean;
    c.rowwise() -= col_mean.transpose();
    c.array() += grand;
    return c;
}

}  // namespace

const char *to_string(KernelFamily f) {
    return f == KernelFamily::rbf ? "rbf" : "linear";
}

KernelFamily kernel_family_from_string(const std::string &name) {
    if (name == "rbf") { return KernelFamily::rbf; }
    if (name == "linear") { return KernelFamily::linear; }
    throw Error(ErrorKind::config, "unknown kernel family '" + name + "'");
}

std::string KernelSpec::describe() const {
    std::ostringstream os;
    os << to_string(family);
    if (family == KernelFamily::rbf) {
        if (bandwidth) {
            os << "(gamma=" << *bandwidth << ")";
        } else {
            os << "(median)";
        }
    }
    return os.str();
}

double resolve_bandwidth(const KernelSpec &spec, const Matrix &samples) {
    if (spec.family == KernelFamily::linear) { return 1.0; }
    if (spec.bandwidth) {
        require(*spec.bandwidth > 0.0, ErrorKind::config, "rbf bandwidth must be positive");
        return *spec.bandwidth;
    }
    require(samples.rows() >= 2, ErrorKind::insufficient_data, "median heuristic needs at least 2 samples");
    std::vector<Eigen::Index> rows;
    if (samples.rows() <= kMedianRowCap) {
        for (Eigen::Index i = 0; i < samples.rows(); ++i) { rows.push_back(i); }
    } else {
        for (Eigen::Index k = 0; k < kMedianRowCap; ++k) { rows.push_back(k * samples.rows() / kMedianRowCap); }
    }
    std::vector<double> dist;
    dist.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            dist.push_back((samples.row(rows[i]) - samples.row(rows[j])).norm());
        }
    }
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    return median > 0.0 ? median : 1.0;
}

KernelSpec resolve(const KernelSpec &spec, const Matrix &samples) {
    KernelSpec out = spec;
    if (spec.family == KernelFamily::rbf) { out.bandwidth = resolve_bandwidth(spec, samples); }
    return out;
}

double kernel_value(const KernelSpec &spec, const double *a, const double *b, Eigen::Index dim) {
    if (spec.family == KernelFamily::linear) {
        double dot = 0.0;
        for (Eigen::Index k = 0; k < dim; ++k) { dot += a[k] * b[k]; }
        return dot;
    }
    const double gamma = gamma_of(spec);
    double sq = 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
        const double diff = a[k] - b[k];
        sq += diff * diff;
    }
    return std::exp(-sq / (2.0 * gamma * gamma));
}

Matrix gram(const KernelSpec &spec_in, const Matrix &a, const Matrix &b) {
    require(a.cols() == b.cols(), ErrorKind::shape,
            "gram: dimension mismatch " + shape_string(a) + " vs " + shape_string(b));
    const KernelSpec spec = resolved_for(spec_in, a, b);
    Matrix cross = a * b.transpose();
    if (spec.family == KernelFamily::linear) { return cross; }
    const double gamma = gamma_of(spec);
    const double scale = 1.0 / (2.0 * gamma * gamma);
    const Eigen::ArrayXd na = a.rowwise().squaredNorm().array();
    const Eigen::ArrayXd nb = b.rowwise().squaredNorm().array();
    // -|a_i - b_j|^2 = 2 a_i.b_j - |a_i|^2 - |b_j|^2, clamped at 0 against rounding.
    for (Eigen::Index i = 0; i < cross.rows(); ++i) {
        auto row = cross.row(i).array();
        row = ((2.0 * row - na(i)) - nb.transpose()).min(0.0) * scale;
    }
    cross.array() = cross.array().exp();
    return cross;
}

void accumulate_gram_gradient(const KernelSpec &spec, const Matrix &a, const Matrix &b, const Matrix &k,
                              const Matrix &weights, Matrix &grad_a, Matrix &grad_b) {
    require(k.rows() == a.rows() && k.cols() == b.rows() && weights.rows() == k.rows() &&
                weights.cols() == k.cols(),
            ErrorKind::shape, "accumulate_gram_gradient: shape mismatch");
    if (spec.family == KernelFamily::linear) {
        grad_a.noalias() += weights * b;
        grad_b.noalias() += weights.transpose() * a;
        return;
    }
    const double inv_g2 = 1.0 / (gamma_of(spec) * gamma_of(spec));
    const Matrix w = weights.cwiseProduct(k);
    const Vector row_sum = w.rowwise().sum();
    const Vector col_sum = w.colwise().sum().transpose();
    Matrix da = w * b;
    da -= row_sum.asDiagonal() * a;
    Matrix db = w.transpose() * a;
    db -= col_sum.asDiagonal() * b;
    grad_a += inv_g2 * da;
    grad_b += inv_g2 * db;
}

void accumulate_symmetric_gram_gradient(const KernelSpec &spec, const Matrix &a, const Matrix &k,
                                        const Matrix &weights, Matrix &grad_a) {
    require(k.rows() == a.rows() && k.cols() == a.rows() && weights.rows() == k.rows() &&
                weights.cols() == k.cols(),
            ErrorKind::shape, "accumulate_symmetric_gram_gradient: shape mismatch");
    if (spec.family == KernelFamily::linear) {
        grad_a.noalias() += 2.0 * (weights * a);
        return;
    }
    const double inv_g2 = 1.0 / (gamma_of(spec) * gamma_of(spec));
    const Matrix w = weights.cwiseProduct(k);
    const Vector row_sum = w.rowwise().sum();
    Matrix da = w * a;
    da -= row_sum.asDiagonal() * a;
    grad_a += (2.0 * inv_g2) * da;
}

namespace {

DiscrepancyValue mmd2_impl(const KernelSpec &spec_in, const Matrix &zp, const Matrix &zq, bool unbiased,
                           bool with_gradient) {
    require(zp.cols() == zq.cols(), ErrorKind::shape, "mmd2: sample dimension mismatch");
    const KernelSpec spec = resolved_for(spec_in, zp, zq);
    const auto m = static_cast<double>(zp.rows());
    const auto n = static_cast<double>(zq.rows());
    const Matrix kpp = gram(spec, zp, zp);
    const Matrix kqq = gram(spec, zq, zq);
    const Matrix kpq = gram(spec, zp, zq);

    Matrix wpp = Matrix::Constant(kpp.rows(), kpp.cols(), unbiased ? 1.0 / (m * (m - 1.0)) : 1.0 / (m * m));
    Matrix wqq = Matrix::Constant(kqq.rows(), kqq.cols(), unbiased ? 1.0 / (n * (n - 1.0)) : 1.0 / (n * n));
    if (unbiased) {
        wpp.diagonal().setZero();
        wqq.diagonal().setZero();
    }
    const Matrix wpq = Matrix::Constant(kpq.rows(), kpq.cols(), -2.0 / (m * n));

    DiscrepancyValue out;
    out.value = wpp.cwiseProduct(kpp).sum() + wqq.cwiseProduct(kqq).sum() + wpq.cwiseProduct(kpq).sum();
    if (with_gradient) {
        out.has_gradient = true;
        out.grad_first = Matrix::Zero(zp.rows(), zp.cols());
        out.grad_second = Matrix::Zero(zq.rows(), zq.cols());
        accumulate_symmetric_gram_gradient(spec, zp, kpp, wpp, out.grad_first);
        accumulate_symmetric_gram_gradient(spec, zq, kqq, wqq, out.grad_second);
        accumulate_gram_gradient(spec, zp, zq, kpq, wpq, out.grad_first, out.grad_second);
    }
    return out;
}

}  // namespace

DiscrepancyValue mmd2_u(const KernelSpec &spec, const Matrix &zp, const Matrix &zq, bool with_gradient) {
    require(zp.rows() >= 2 && zq.rows() >= 2, ErrorKind::insufficient_data,
            "mmd2_u needs at least 2 samples on each side");
    return mmd2_impl(spec, zp, zq, true, with_gradient);
}

DiscrepancyValue mmd2_v(const KernelSpec &spec, const Matrix &zp, const Matrix &zq, bool with_gradient) {
    require(zp.rows() >= 1 && zq.rows() >= 1, ErrorKind::insufficient_data, "mmd2_v needs non-empty samples");
    return mmd2_impl(spec, zp, zq, false, with_gradient);
}

DiscrepancyValue hsic_v(const KernelSpec &spec_z_in, const KernelSpec &spec_e_in, const Matrix &z, const Matrix &e,
                        bool with_gradient) {
    require(z.rows() == e.rows(), ErrorKind::shape, "hsic_v: Z and E must have the same number of rows");
    require(z.rows() >= 3, ErrorKind::insufficient_data, "hsic_v needs at least 3 samples");
    const KernelSpec spec_z = spec_z_in.is_resolved() ? spec_z_in : resolve(spec_z_in, z);
    const KernelSpec spec_e = spec_e_in.is_resolved() ? spec_e_in : resolve(spec_e_in, e);
    const auto n = static_cast<double>(z.rows());
    const Matrix k = gram(spec_z, z, z);
    const Matrix l = gram(spec_e, e, e);
    const Matrix lc = double_center(l);

    DiscrepancyValue out;
    out.value = k.cwiseProduct(lc).sum() / (n * n);
    if (with_gradient) {
        out.has_gradient = true;
        out.grad_first = Matrix::Zero(z.rows(), z.cols());
        out.grad_second = Matrix::Zero(e.rows(), e.cols());
        const Matrix wz = lc / (n * n);
        accumulate_symmetric_gram_gradient(spec_z, z, k, wz, out.grad_first);
        const Matrix we = double_center(k) / (n * n);
        accumulate_symmetric_gram_gradient(spec_e, e, l, we, out.grad_second);
    }
    return out;
}

}  // namespace multibal
