#include "exsim/impact.hpp"

#include <cmath>

#include "exsim/rng.hpp"

namespace exsim::impact {

namespace {

bool bad(double x) { return !std::isfinite(x); }

}  // namespace

ImpactParams ImpactParams::make(double epsilon, double beta) {
    ImpactParams p;
    p.epsilon = epsilon;
    p.beta = beta;
    p.c_coeff = liquidity_coefficient(epsilon, beta);
    return p;
}

void BetaNoiseSpec::validate() const {
    if (bad(base_beta) || bad(half_width) || half_width < 0.0)
        throw DomainError("beta noise: non-finite or negative half width");
    if (base_beta - half_width <= 0.0)
        throw DomainError("beta noise: sampled beta can reach zero or below");
}

double liquidity_coefficient(double epsilon, double beta) {
    if (bad(epsilon) || bad(beta) || epsilon <= 0.0 || beta < 0.0)
        throw DomainError("liquidity_coefficient: requires epsilon > 0 and beta >= 0");
    return std::pow(epsilon * (beta + 1.0), (beta + 2.0) / (beta + 1.0)) / (beta + 2.0);
}

double density(double s, double volume, const ImpactParams& p) {
    return volume / p.epsilon * std::pow(std::fabs(s - 1.0), p.beta);
}

double impacted_relative_price(double shares, double volume, const ImpactParams& p) {
    if (!(volume > 0.0) || bad(volume))
        throw DomainError("impacted_relative_price: degenerate volume");
    if (shares == 0.0) return 1.0;
    const double sign = shares > 0.0 ? 1.0 : -1.0;
    const double depth = p.epsilon * (p.beta + 1.0) * std::fabs(shares) / volume;
    return 1.0 + sign * std::pow(depth, 1.0 / (p.beta + 1.0));
}

double walk_cost(double price, double volume, double shares, const ImpactParams& p) {
    if (!(volume > 0.0) || bad(volume))
        throw DomainError("walk_cost: degenerate volume");
    if (!(price > 0.0) || bad(price))
        throw DomainError("walk_cost: price must be positive");
    if (shares == 0.0) return 0.0;
    return p.c_coeff * price * std::pow(volume, p.volume_power()) *
           std::pow(std::fabs(shares), p.cost_power());
}

double sample_beta(const BetaNoiseSpec& spec, std::uint64_t position) {
    spec.validate();
    if (spec.half_width == 0.0) return spec.base_beta;
    const std::uint64_t k = rng::key(spec.seed, 0x6265746180000000ULL, position);
    return spec.base_beta + rng::uniform_symmetric(k, spec.half_width);
}

}  // namespace exsim::impact
