#pragma once

#include <vector>

namespace iob {

// Nearest-rank percentile: value at rank ceil(p/100 * N) of the sorted data.
double percentile_nearest_rank(std::vector<double> values, double p);

// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1.2e-9).
double inverse_normal_cdf(double p);

// chi^2 quantile with 1 degree of freedom: probit(1 - alpha/2)^2.
double chi2_quantile_1dof(double prob);

double mean(const std::vector<double>& values);

}  // namespace iob
