#pragma once

#include "multibal/matrix.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace multibal {

struct Provenance {
    std::string generator;
    std::uint64_t seed = 0;
    nlohmann::json params = nlohmann::json::object();
};

struct Dataset {
    Matrix x;                     // n x d
    std::vector<int> t;           // n, in [0, K)
    Vector y;                     // n
    std::optional<Matrix> truth;  // n x K potential-outcome means
    int arms = 0;                 // K
    Provenance provenance;

    int rows() const { return static_cast<int>(x.rows()); }
    int covariates() const { return static_cast<int>(x.cols()); }

    /// Throws a shape error on inconsistent sizes or out-of-range treatments.
    void check_shapes() const;
    std::vector<int> arm_counts() const;
    Dataset subset(const std::vector<int> &rows) const;
};

struct DatasetDiagnostics {
    std::vector<int> arm_counts;
    int min_count = 0;
    bool overlap_flag = false;       // some arm has < 2 samples
    std::vector<double> arm_share;   // empirical pi_t
};

DatasetDiagnostics validate_dataset(const Dataset &ds);

/// Header x0..x{d-1},t,y,mu0..mu{K-1}; 17 significant digits.
void write_dataset_csv(const Dataset &ds, const std::string &path);
Dataset read_dataset_csv(const std::string &path, int arms_hint = 0);

void write_provenance_json(const Dataset &ds, const std::string &path);
Provenance read_provenance_json(const std::string &path);

}  // namespace multibal
