#pragma once

#include <string>

namespace hrm {

enum class Family { bernoulli, gamma, poisson };
enum class Link { logit, log };

std::string to_string(Family f);
std::string to_string(Link l);
Family family_from_string(const std::string& s);

/// Bernoulli uses the logit link; gamma and (quasi-)Poisson the log link.
Link canonical_link(Family f);

double apply_link(Link link, double mean);
double inverse_link(Link link, double eta);

/// Log-density of one observation under the family with the given mean.
/// For gamma, `dispersion` is theta and the variance is theta * mean^variance_power;
/// the density is the gamma law with those two moments. Poisson accepts
/// non-integer responses (quasi-likelihood).
double log_density(Family family, double y, double mean, double dispersion = 1.0,
                   double variance_power = 2.0);

/// Unit deviance d(y, mu) so that the deviance is sum_i w_i d(y_i, mu_i).
double unit_deviance(Family family, double y, double mean, double variance_power = 2.0);

}  // namespace hrm
