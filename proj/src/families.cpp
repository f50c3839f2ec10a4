#include "hrm/families.hpp"

#include <cmath>

#include "hrm/error.hpp"

namespace hrm {

std::string to_string(Family f) {
    switch (f) {
        case Family::bernoulli: return "bernoulli";
        case Family::gamma: return "gamma";
        case Family::poisson: return "poisson";
    }
    return "?";
}

std::string to_string(Link l) { return l == Link::logit ? "logit" : "log"; }

Family family_from_string(const std::string& s) {
    if (s == "bernoulli" || s == "binomial") return Family::bernoulli;
    if (s == "gamma") return Family::gamma;
    if (s == "poisson") return Family::poisson;
    throw ConfigError("unknown family '" + s + "'");
}

Link canonical_link(Family f) { return f == Family::bernoulli ? Link::logit : Link::log; }

double apply_link(Link link, double mean) {
    return link == Link::logit ? std::log(mean / (1.0 - mean)) : std::log(mean);
}

double inverse_link(Link link, double eta) {
    if (link == Link::log) return std::exp(eta);
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

double log_density(Family family, double y, double mean, double dispersion, double variance_power) {
    switch (family) {
        case Family::bernoulli:
            if (!(mean > 0.0 && mean < 1.0)) {
                if ((mean == 1.0 && y == 1.0) || (mean == 0.0 && y == 0.0)) return 0.0;
                throw DomainError("bernoulli probability outside (0,1)");
            }
            return y * std::log(mean) + (1.0 - y) * std::log1p(-mean);
        case Family::gamma: {
            if (!(mean > 0.0)) throw DomainError("nonpositive predicted gamma mean");
            if (!(y > 0.0)) throw DomainError("gamma response must be positive");
            if (!(dispersion > 0.0)) throw DomainError("gamma dispersion must be positive");
            double shape = std::pow(mean, 2.0 - variance_power) / dispersion;
            double rate = shape / mean;
            return shape * std::log(rate) + (shape - 1.0) * std::log(y) - rate * y - std::lgamma(shape);
        }
        case Family::poisson:
            if (!(mean > 0.0)) {
                if (mean == 0.0 && y == 0.0) return 0.0;
                throw DomainError("nonpositive poisson mean");
            }
            return y * std::log(mean) - mean - std::lgamma(y + 1.0);
    }
    return 0.0;
}

double unit_deviance(Family family, double y, double mean, double variance_power) {
    auto ylogy = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
    switch (family) {
        case Family::bernoulli:
            return 2.0 * (ylogy(y, mean) + ylogy(1.0 - y, 1.0 - mean));
        case Family::gamma: {
            double p = variance_power;
            if (p == 2.0) return 2.0 * ((y - mean) / mean - std::log(y / mean));
            if (p == 1.0) return 2.0 * (ylogy(y, mean) - (y - mean));
            // Tweedie unit deviance for 1 < p < 2.
            return 2.0 * (std::pow(y, 2.0 - p) / ((1.0 - p) * (2.0 - p)) - y * std::pow(mean, 1.0 - p) / (1.0 - p) +
                          std::pow(mean, 2.0 - p) / (2.0 - p));
        }
        case Family::poisson:
            return 2.0 * (ylogy(y, mean) - (y - mean));
    }
    return 0.0;
}

}  // namespace hrm
