#pragma once

#include "multibal/matrix.hpp"

#include <optional>
#include <string>

namespace multibal {

enum class KernelFamily { rbf, linear };

const char *to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string &name);

/// Kernel family plus bandwidth. An empty bandwidth on an rbf kernel means
/// "median heuristic, not yet resolved".
struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    std::optional<double> bandwidth;

    static KernelSpec rbf_median() { return {KernelFamily::rbf, std::nullopt}; }
    static KernelSpec rbf(double gamma) { return {KernelFamily::rbf, gamma}; }
    static KernelSpec linear() { return {KernelFamily::linear, std::nullopt}; }

    bool is_resolved() const { return family == KernelFamily::linear || bandwidth.has_value(); }
    std::string describe() const;
};

/// Median pairwise Euclidean distance (fallback 1.0 when the median is 0),
/// or the fixed bandwidth. Linear kernels return 1.0.
double resolve_bandwidth(const KernelSpec &spec, const Matrix &samples);

/// Copy of spec with the bandwidth pinned from `samples`.
KernelSpec resolve(const KernelSpec &spec, const Matrix &samples);

double kernel_value(const KernelSpec &spec, const double *a, const double *b, Eigen::Index dim);

/// rbf: exp(-|a-b|^2 / (2 gamma^2)); linear: a.b. Unresolved rbf specs are
/// resolved on the stacked rows of A and B.
Matrix gram(const KernelSpec &spec, const Matrix &a, const Matrix &b);

/// Given K = gram(spec, A, B) and weights W, accumulate the gradient of
/// sum_ij W_ij k(A_i, B_j) into dA and dB.
void accumulate_gram_gradient(const KernelSpec &spec, const Matrix &a, const Matrix &b, const Matrix &k,
                              const Matrix &weights, Matrix &grad_a, Matrix &grad_b);

/// Same for K = gram(spec, A, A) with symmetric W; both arguments are A, so
/// the two halves of the gradient coincide and are computed once.
void accumulate_symmetric_gram_gradient(const KernelSpec &spec, const Matrix &a, const Matrix &k,
                                        const Matrix &weights, Matrix &grad_a);

struct DiscrepancyValue {
    double value = 0.0;
    bool has_gradient = false;
    Matrix grad_first;   // d value / d first sample matrix
    Matrix grad_second;  // d value / d second sample matrix
};

/// Unbiased MMD^2 (three-term U-statistic). Needs m, n >= 2; may be negative.
DiscrepancyValue mmd2_u(const KernelSpec &spec, const Matrix &zp, const Matrix &zq, bool with_gradient = true);

/// Biased plug-in MMD^2: mean(Kpp) + mean(Kqq) - 2 mean(Kpq). Needs m, n >= 1.
DiscrepancyValue mmd2_v(const KernelSpec &spec, const Matrix &zp, const Matrix &zq, bool with_gradient = true);

/// HSIC V-statistic trace(K H L H) / n^2 with H = I - 11'/n. Needs n >= 3.
DiscrepancyValue hsic_v(const KernelSpec &spec_z, const KernelSpec &spec_e, const Matrix &z, const Matrix &e,
                        bool with_gradient = true);

}  // namespace multibal
