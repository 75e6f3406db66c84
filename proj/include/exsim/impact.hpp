#pragma once

#include <cstdint>

#include "exsim/errors.hpp"

// Closed-form order-book impact model. The book holds depth
// (V/epsilon)*|s-1|^beta at relative tick s, so a market order of a shares
// walks the book to a relative price r(a) and loses a convex power of |a|.

namespace exsim::impact {

struct ImpactParams {
    double epsilon = 0.003;  // book scaling, dimensionless
    double beta = 0.67;      // power-law exponent, >= 0
    double c_coeff = 0.0;    // (1/(beta+2)) * (epsilon*(beta+1))^((beta+2)/(beta+1))

    static ImpactParams make(double epsilon, double beta);

    // Exponent on |a| in the walk cost, (beta+2)/(beta+1) > 1.
    double cost_power() const { return (beta + 2.0) / (beta + 1.0); }
    // Exponent on volume in the walk cost, -1/(beta+1).
    double volume_power() const { return -1.0 / (beta + 1.0); }
};

// Per-trade stochastic book shape: beta_t = base_beta + Uniform(-half_width, half_width).
struct BetaNoiseSpec {
    double base_beta = 0.67;
    double half_width = 0.3;
    std::uint64_t seed = 0;

    void validate() const;  // requires base_beta - half_width > 0
};

// C_{epsilon,beta}; throws DomainError on non-finite or out-of-domain inputs.
double liquidity_coefficient(double epsilon, double beta);

// Book depth at relative tick s for minute volume V.
double density(double s, double volume, const ImpactParams& p);

// Relative price reached by an order of `shares`; sign-symmetric, 1 at zero.
// Throws DomainError when volume is not positive.
double impacted_relative_price(double shares, double volume, const ImpactParams& p);

// Dollar loss of walking the book: c_coeff * S * V^(-1/(beta+1)) * |a|^((beta+2)/(beta+1)).
// Strictly convex in |a|, zero iff a == 0. Throws DomainError when volume
// is not positive; callers dealing with raw bar data floor volume first.
double walk_cost(double price, double volume, double shares, const ImpactParams& p);

// Reproducible draw for the given stream position (e.g. a (day, trade) counter).
double sample_beta(const BetaNoiseSpec& spec, std::uint64_t position);

}  // namespace exsim::impact
