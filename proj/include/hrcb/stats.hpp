#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hrcb/common.hpp"

namespace hrcb {

// N blocks x k methods of scores; every cell present.
struct ResultMatrix {
    Eigen::MatrixXd scores;
    std::vector<std::string> methods;
    bool higher_is_better = true;

    long blocks() const { return scores.rows(); }
    long k() const { return scores.cols(); }
    void validate() const;
};

struct RankReport {
    std::vector<std::string> methods;
    Eigen::VectorXd avg_rank;
    double statistic = 0.0;
    double p_value = 1.0;
    bool exact_p = false;  // exhaustive permutation distribution used
    double cd = 0.0;
    Eigen::MatrixXi significant;  // pairwise |rank_i - rank_j| > CD
    std::string ordering;         // "A>B=C" sorted by average rank
};

// Per block, best score gets rank 1; ties share the mean rank.
Eigen::VectorXd average_ranks(const ResultMatrix& m);

// Tie-corrected Friedman test. Small designs ((k!)^N below an enumeration
// bound) use the exact permutation distribution of the statistic; larger
// ones use the chi-square approximation with k-1 degrees of freedom.
std::pair<double, double> friedman_test(const ResultMatrix& m, bool* exact = nullptr);

RankReport nemenyi(const ResultMatrix& m, double alpha = 0.05);

// Plot-ready text: "method avg_rank group", groups joining methods whose
// consecutive rank gaps stay within the critical difference.
std::string cd_diagram_data(const RankReport& r);
RankReport parse_cd_diagram_data(const std::string& text);  // lossless round trip

// Upper tail of the chi-square distribution via the regularized incomplete
// gamma function (no external statistics dependency).
double chi2_sf(double x, int dof);

// Studentized-range-based critical values for alpha = 0.05, k = 2..20.
double nemenyi_q05(int k);

}  // namespace hrcb
