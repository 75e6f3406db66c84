#include "exsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "exsim/errors.hpp"
#include "exsim/rng.hpp"

namespace exsim::oracle {

namespace {

double power_p(double beta) { return (beta + 2.0) / (beta + 1.0); }
double power_q(double beta) { return 1.0 / (beta + 1.0); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Acklam's rational approximation of the standard normal quantile,
// used only to place equal-probability bin edges.
double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

void DeterministicInstance::validate() const {
    if (prices.size() != volumes.size() || prices.empty())
        throw ConfigError("instance: prices and volumes must be non-empty and equal length");
    if (beta < 0.0) throw ConfigError("instance: beta must be >= 0");
    for (double s : prices)
        if (!(s > 0.0)) throw ConfigError("instance: prices must be positive");
    for (double v : volumes)
        if (!(v > 0.0)) throw ConfigError("instance: volumes must be positive");
}

double DeterministicInstance::objective(std::span<const double> actions) const {
    const double p = power_p(beta);
    const double q = power_q(beta);
    double total = 0.0;
    for (int t = 0; t < T(); ++t)
        total += prices[t] * std::pow(volumes[t], -q) * std::pow(std::fabs(actions[t]), p);
    return total;
}

PgdResult optimal_deterministic_schedule(const DeterministicInstance& inst,
                                         const PgdOptions& opts) {
    inst.validate();
    const int T = inst.T();
    const double p = power_p(inst.beta);
    const double q = power_q(inst.beta);
    std::vector<double> coeff(T);
    for (int t = 0; t < T; ++t) coeff[t] = inst.prices[t] * std::pow(inst.volumes[t], -q);

    std::vector<double> a(T, -inst.x0 / T);  // TWAP start, interior of the |a| kink
    PgdResult result;
    if (inst.x0 == 0.0) {
        result.schedule.x0 = 0.0;
        result.schedule.actions = a;
        return result;
    }

    auto gradient_at = [&](const std::vector<double>& v, std::vector<double>& g) {
        for (int t = 0; t < T; ++t)
            g[t] = coeff[t] * p * std::pow(std::fabs(v[t]), p - 1.0) * sign(v[t]);
    };

    std::vector<double> grad(T), proj(T), trial(T), gtrial(T);
    // Slope of the objective along -proj at displacement s. Working with the
    // directional derivative keeps the line search resolvable in doubles all
    // the way down to the machine optimum, where objective differences vanish.
    // The trial gradient is re-projected onto the constraint plane: proj sums
    // to zero only up to rounding, and the leaked multiplier-level component
    // would otherwise drown the in-plane signal near convergence.
    auto slope = [&](double s) {
        for (int t = 0; t < T; ++t) trial[t] = a[t] - s * proj[t];
        gradient_at(trial, gtrial);
        double mean = 0.0;
        for (int t = 0; t < T; ++t) mean += gtrial[t];
        mean /= T;
        double d = 0.0;
        for (int t = 0; t < T; ++t) d -= proj[t] * (gtrial[t] - mean);
        return d;
    };

    double step = opts.initial_step;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        gradient_at(a, grad);
        double gmean = 0.0;
        for (int t = 0; t < T; ++t) gmean += grad[t];
        gmean /= T;
        double gnorm2 = 0.0, pnorm2 = 0.0;
        for (int t = 0; t < T; ++t) {
            proj[t] = grad[t] - gmean;
            gnorm2 += grad[t] * grad[t];
            pnorm2 += proj[t] * proj[t];
        }
        const double rel = std::sqrt(pnorm2) / std::max(std::sqrt(gnorm2), 1e-300);
        result.projected_gradient_norm = rel;
        if (rel <= opts.tol) break;

        // Bracket the step: back off while the slope ahead is uphill, grow
        // while it stays downhill.
        double lo = 0.0, hi = step;
        double slope_hi = slope(hi);
        int shrink = 0;
        while (slope_hi > 0.0 && shrink++ < 120) {
            hi *= 0.5;
            slope_hi = slope(hi);
        }
        if (slope_hi > 0.0) break;  // slope is sign-noise; the residual check decides
        int grow = 0;
        while (slope_hi <= 0.0 && grow++ < 200) {
            lo = hi;
            hi *= 2.0;
            slope_hi = slope(hi);
        }
        // Bisect to the stationary point along the ray.
        for (int ls = 0; ls < 80 && hi - lo > 1e-15 * hi; ++ls) {
            const double mid = 0.5 * (lo + hi);
            if (slope(mid) <= 0.0)
                lo = mid;
            else
                hi = mid;
        }
        const double s = 0.5 * (lo + hi);
        if (!(s > 0.0))
            throw NumericalError("projected gradient: line search collapsed, residual " +
                                 std::to_string(rel));
        for (int t = 0; t < T; ++t) a[t] -= s * proj[t];
        step = s;
    }
    if (result.projected_gradient_norm > opts.tol)
        throw NumericalError("projected gradient: no convergence in " +
                             std::to_string(opts.max_iterations) + " iterations, residual " +
                             std::to_string(result.projected_gradient_norm));

    // Fold the accumulated floating-point constraint drift back into the plan.
    double drift = std::accumulate(a.begin(), a.end(), 0.0) + inst.x0;
    for (int t = 0; t < T; ++t) a[t] -= drift / T;

    result.iterations = it;
    result.schedule.x0 = inst.x0;
    result.schedule.actions = std::move(a);
    return result;
}

CostateResult costate_residual(std::span<const double> actions,
                               const DeterministicInstance& inst) {
    inst.validate();
    if (static_cast<int>(actions.size()) != inst.T())
        throw ConfigError("costate_residual: schedule does not match the instance");
    const double p = power_p(inst.beta);
    const double q = power_q(inst.beta);
    CostateResult r;
    r.lambda.resize(inst.T());
    for (int t = 0; t < inst.T(); ++t) {
        if (actions[t] == 0.0) {
            r.undefined.push_back(t);
            r.lambda[t] = 0.0;
            continue;
        }
        r.lambda[t] = p * sign(actions[t]) * inst.prices[t] *
                      std::pow(std::fabs(actions[t]) / inst.volumes[t], q);
    }
    double max_gap = 0.0;
    double scale = 0.0;
    bool have_pair = false;
    auto defined = [&](int t) {
        return std::find(r.undefined.begin(), r.undefined.end(), t) == r.undefined.end();
    };
    for (int t = 0; t + 1 < inst.T(); ++t) {
        if (!defined(t) || !defined(t + 1)) continue;
        max_gap = std::max(max_gap, std::fabs(r.lambda[t] - r.lambda[t + 1]));
        if (!have_pair) {
            scale = std::fabs(r.lambda[t]);
            have_pair = true;
        }
    }
    r.residual = have_pair && scale > 0.0 ? max_gap / scale : 0.0;
    return r;
}

MartingaleCheck check_prop2_martingale(const market::SynthSpec& spec, const Prop2Options& opts) {
    spec.validate();
    if (opts.n_paths < 100) throw ConfigError("prop2 check: too few paths for any power");

    MartingaleCheck out;
    out.n_paths = opts.n_paths;
    out.times = spec.minutes;
    out.n_perturbations = opts.n_perturbations;

    const double q = power_q(spec.beta);
    const int M = spec.minutes;
    const int n = opts.n_paths;

    // M_t = exp(-q W_t - q^2 s2_t / 2) with W_t the cumulative log-volume
    // shock; advance all paths one minute at a time.
    std::vector<double> walk(n, 0.0);
    double s2 = 0.0;
    double max_dev = 0.0, max_binned = 0.0;
    const int B = opts.n_bins;
    std::vector<double> edges(B - 1);
    std::vector<double> bin_count(B), bin_sum_d(B), bin_sum_d2(B), bin_sum_m(B);
    for (int t = 0; t < M - 1; ++t) {
        const double sig = spec.sigma[t + 1];
        const double s2_next = s2 + sig * sig;
        // Equal-probability bins of M_t via the exact normal law of W_t.
        const double sd = std::sqrt(s2);
        for (int b = 0; b + 1 < B; ++b)
            edges[b] = sd > 0.0 ? sd * normal_quantile(static_cast<double>(b + 1) / B) : 0.0;
        std::fill(bin_count.begin(), bin_count.end(), 0.0);
        std::fill(bin_sum_d.begin(), bin_sum_d.end(), 0.0);
        std::fill(bin_sum_d2.begin(), bin_sum_d2.end(), 0.0);
        std::fill(bin_sum_m.begin(), bin_sum_m.end(), 0.0);

        double sum_r = 0.0, sum_r2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = rng::normal(rng::key(opts.seed, 0x70726f7032ULL, i, t));
            const double m_now = std::exp(-q * walk[i] - 0.5 * q * q * s2);
            const double w_next = walk[i] + sig * z;
            const double m_next = std::exp(-q * w_next - 0.5 * q * q * s2_next);
            const double ratio = m_next / m_now;
            sum_r += ratio;
            sum_r2 += ratio * ratio;
            int b = 0;
            if (sd > 0.0)
                b = static_cast<int>(std::lower_bound(edges.begin(), edges.end(), walk[i]) -
                                     edges.begin());
            bin_count[b] += 1.0;
            bin_sum_d[b] += m_next - m_now;
            bin_sum_d2[b] += (m_next - m_now) * (m_next - m_now);
            bin_sum_m[b] += m_now;
            walk[i] = w_next;
        }
        const double mean_r = sum_r / n;
        const double var_r = std::max(sum_r2 / n - mean_r * mean_r, 0.0);
        const double se_r = std::sqrt(var_r / n);
        if (se_r > 0.0) max_dev = std::max(max_dev, std::fabs(mean_r - 1.0) / se_r);
        for (int b = 0; b < B; ++b) {
            if (bin_count[b] < 50.0) continue;
            const double mean_d = bin_sum_d[b] / bin_count[b];
            const double var_d = std::max(bin_sum_d2[b] / bin_count[b] - mean_d * mean_d, 0.0);
            const double se_d = std::sqrt(var_d / bin_count[b]);
            if (se_d > 0.0) max_binned = std::max(max_binned, std::fabs(mean_d) / se_d);
        }
        s2 = s2_next;
    }
    out.max_ratio_deviation_se = max_dev;
    out.max_binned_deviation_se = max_binned;
    out.martingale_ok = max_dev <= 5.0 && max_binned <= 5.0;

    // VWAP versus randomly perturbed deterministic feasible policies,
    // paired over simulated (S, V) paths at the trade times.
    const int K = 5;
    const auto trade = market::trade_minutes(M, M % K == 0 ? K : 1);
    const int T = static_cast<int>(trade.size());
    const double p = power_p(spec.beta);

    // Deterministic V_bar at the trade minutes (the exact profile target).
    std::vector<double> vbar(T);
    for (int t = 0; t < T; ++t) vbar[t] = std::exp(spec.log_u[trade[t] - 1]);
    const double vbar_total = std::accumulate(vbar.begin(), vbar.end(), 0.0);

    // |a|^p tables for VWAP and each perturbation (x0 = 1 by homogeneity).
    std::vector<double> vwap_pow(T);
    for (int t = 0; t < T; ++t) vwap_pow[t] = std::pow(vbar[t] / vbar_total, p);
    std::vector<std::vector<double>> pert_pow(opts.n_perturbations, std::vector<double>(T));
    for (int j = 0; j < opts.n_perturbations; ++j) {
        std::vector<double> w(T);
        double total = 0.0;
        for (int t = 0; t < T; ++t) {
            const double z = rng::normal(rng::key(opts.seed, 0x70657274ULL, j, t));
            w[t] = vbar[t] * std::exp(opts.perturbation_scale * z);
            total += w[t];
        }
        for (int t = 0; t < T; ++t) pert_pow[j][t] = std::pow(w[t] / total, p);
    }

    // Per-trade shock variances aggregated over the minutes in each block.
    std::vector<double> block_var(T, 0.0), s2_at(T, 0.0);
    {
        double acc = 0.0;
        int idx = 0;
        double prev = 0.0;
        for (int t = 1; t <= M; ++t) {
            acc += spec.sigma[t - 1] * spec.sigma[t - 1];
            if (idx < T && t == trade[idx]) {
                block_var[idx] = acc - prev;
                s2_at[idx] = acc;
                prev = acc;
                ++idx;
            }
        }
    }
    const int npp = opts.n_paths_perturbed;
    std::vector<double> sum_d(opts.n_perturbations, 0.0), sum_d2(opts.n_perturbations, 0.0);
    std::vector<double> weight(T);
    for (int i = 0; i < npp; ++i) {
        double wv = 0.0, ls = 0.0;
        for (int t = 0; t < T; ++t) {
            const double zv = rng::normal(rng::key(opts.seed, 0x7632ULL, i, t));
            const double zs = rng::normal(rng::key(opts.seed, 0x7332ULL, i, t));
            wv += std::sqrt(block_var[t]) * zv;
            const double block_pvar = spec.price_vol * spec.price_vol *
                                      (trade[t] - (t > 0 ? trade[t - 1] : 0));
            ls += std::sqrt(block_pvar) * zs - 0.5 * block_pvar;
            const double log_v =
                spec.log_u[trade[t] - 1] + 0.5 * q * s2_at[t] + wv;
            const double S = std::exp(ls);  // base price 1, martingale
            weight[t] = S * std::exp(-q * log_v);
        }
        double cost_vwap = 0.0;
        for (int t = 0; t < T; ++t) cost_vwap += weight[t] * vwap_pow[t];
        for (int j = 0; j < opts.n_perturbations; ++j) {
            double cost = 0.0;
            const auto& a_pow = pert_pow[j];
            for (int t = 0; t < T; ++t) cost += weight[t] * a_pow[t];
            const double d = cost - cost_vwap;
            sum_d[j] += d;
            sum_d2[j] += d * d;
        }
    }
    double worst = 1e300;
    for (int j = 0; j < opts.n_perturbations; ++j) {
        const double mean_d = sum_d[j] / npp;
        const double var_d = std::max(sum_d2[j] / npp - mean_d * mean_d, 0.0);
        const double se_d = std::sqrt(var_d / npp);
        const double margin = se_d > 0.0 ? mean_d / se_d : (mean_d >= 0.0 ? 1e300 : -1e300);
        worst = std::min(worst, margin);
    }
    out.worst_margin_se = worst;
    out.vwap_lowest = worst > -3.0;
    return out;
}

// ---------------------------------------------------------------------------
// Verification reports

namespace {

std::vector<double> u_shaped_profile(int T, double depth) {
    std::vector<double> v(T);
    for (int t = 0; t < T; ++t) {
        const double tau = (t + 0.5) / T;
        const double z = 2.0 * tau - 1.0;
        v[t] = std::exp(depth * (z * z - 1.0 / 3.0));
    }
    return v;
}

double max_action_error(std::span<const double> got, std::span<const double> want) {
    double worst = 0.0;
    for (std::size_t t = 0; t < got.size(); ++t) {
        const double denom = std::max(std::fabs(want[t]), 1e-300);
        worst = std::max(worst, std::fabs(got[t] - want[t]) / denom);
    }
    return worst;
}

}  // namespace

std::string prop1_report_json() {
    nlohmann::json cases = nlohmann::json::array();
    const double betas[] = {0.0, 0.5, 0.67, 1.0, 2.0};
    const int sizes[] = {2, 4, 78};
    double worst_twap = 0.0, worst_vwap = 0.0, worst_residual = 0.0;
    for (double beta : betas) {
        for (int T : sizes) {
            DeterministicInstance flat;
            flat.prices.assign(T, 100.0);
            flat.volumes.assign(T, 3.0);
            flat.x0 = 7.5;
            flat.beta = beta;
            const auto twap = optimal_deterministic_schedule(flat);
            const auto twap_ref = strategies::twap_schedule(flat.x0, T);
            const double err_twap = max_action_error(twap.schedule.actions, twap_ref.actions);

            DeterministicInstance shaped = flat;
            shaped.volumes = u_shaped_profile(T, 1.2);
            const auto vwap = optimal_deterministic_schedule(shaped);
            const auto vwap_ref = strategies::vwap_schedule(shaped.x0, shaped.volumes);
            const double err_vwap = max_action_error(vwap.schedule.actions, vwap_ref.actions);
            const double residual = costate_residual(vwap_ref.actions, shaped).residual;

            worst_twap = std::max(worst_twap, err_twap);
            worst_vwap = std::max(worst_vwap, err_vwap);
            worst_residual = std::max(worst_residual, residual);
            cases.push_back({{"beta", beta},
                             {"T", T},
                             {"twap_error", err_twap},
                             {"vwap_error", err_vwap},
                             {"vwap_costate_residual", residual},
                             {"pgd_iterations", vwap.iterations}});
        }
    }
    nlohmann::json j{{"check", "prop1_deterministic_volume"},
                     {"cases", cases},
                     {"max_twap_error", worst_twap},
                     {"max_vwap_error", worst_vwap},
                     {"max_costate_residual", worst_residual},
                     {"pass", worst_twap < 1e-6 && worst_vwap < 1e-6 && worst_residual < 1e-8}};
    return j.dump(2);
}

std::string prop2_report_json(const market::SynthSpec& spec, const Prop2Options& opts) {
    const auto check = check_prop2_martingale(spec, opts);
    nlohmann::json j{{"check", "prop2_stochastic_volume"},
                     {"n_paths", check.n_paths},
                     {"times", check.times},
                     {"max_ratio_deviation_se", check.max_ratio_deviation_se},
                     {"max_binned_deviation_se", check.max_binned_deviation_se},
                     {"n_perturbations", check.n_perturbations},
                     {"worst_margin_se", check.worst_margin_se},
                     {"martingale_ok", check.martingale_ok},
                     {"vwap_lowest", check.vwap_lowest},
                     {"pass", check.martingale_ok && check.vwap_lowest}};
    return j.dump(2);
}

}  // namespace exsim::oracle
