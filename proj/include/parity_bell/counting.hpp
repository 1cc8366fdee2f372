#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "parity_bell/bell.hpp"
#include "parity_bell/biphoton.hpp"
#include "parity_bell/errors.hpp"
#include "parity_bell/parallel.hpp"
#include "parity_bell/random.hpp"

namespace parity_bell
{

// Coincidence counts for one rotator setting, ports ordered (++, +-, -+, --)
struct CountRecord
{
    double theta1 = 0;
    double theta2 = 0;
    std::array<std::uint64_t, 4> counts{};
    // Mean number of detected pairs for this setting
    double flux = 0;

    std::uint64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }

    bool operator==(const CountRecord&) const = default;
};

/*!
 * Poisson-distributed number of pairs, split multinomially over the ports.
 *
 * Probabilities are renormalized before the split, so a misaligned
 * analyzer's lost fraction only lowers the rate through `flux`.
 */
inline CountRecord simulate_counts(const OutcomeProbabilities& p,
                                   double flux,
                                   double flux_factor,
                                   CounterStream& rng)
{
    require(std::isfinite(flux) && flux > 0, "flux must be positive");
    require(flux_factor > 0 && flux_factor <= 1, "flux factor must lie in (0, 1]");
    const auto probs = p.as_array();
    double total_p = 0;
    for (double q : probs)
    {
        require(q >= 0, "outcome probability must be non-negative");
        total_p += q;
    }
    require(total_p <= 1 + 1e-9 && total_p > 0, "outcome probabilities must sum to at most 1");

    CountRecord rec;
    rec.flux = flux * flux_factor;
    std::poisson_distribution<std::uint64_t> pairs(rec.flux);
    std::uint64_t remaining = pairs(rng);
    double remaining_p = total_p;
    for (std::size_t i = 0; i < 3; ++i)
    {
        std::uint64_t n = 0;
        if (remaining > 0 && remaining_p > 0)
        {
            const double q = std::clamp(probs[i] / remaining_p, 0.0, 1.0);
            std::binomial_distribution<std::uint64_t> split(remaining, q);
            n = split(rng);
        }
        rec.counts[i] = n;
        remaining -= n;
        remaining_p -= probs[i];
    }
    rec.counts[3] = remaining;
    return rec;
}

struct CorrelationEstimate
{
    double value = 0;
    double sigma = 0;
};

// E = (S - D)/(S + D), sigma_E^2 = 4 S D / (S + D)^3
inline CorrelationEstimate estimate_correlation(const CountRecord& rec)
{
    const auto s = static_cast<double>(rec.counts[0] + rec.counts[3]);
    const auto d = static_cast<double>(rec.counts[1] + rec.counts[2]);
    const double n = s + d;
    require(n > 0, "no coincidences");
    return {(s - d) / n, std::sqrt(4 * s * d / (n * n * n))};
}

// sqrt((1 - E^2)/N); equals the propagated value when E is itself the estimate
inline double correlation_sigma_from_value(double e, double n)
{
    require(n > 0, "no coincidences");
    return std::sqrt(std::max(0.0, 1 - e * e) / n);
}

struct ChshEstimate
{
    double b = 0;
    double sigma_b = 0;
    // (B - 2) / sigma_B; +-infinity on the exact path
    double n_sigma = 0;
    std::array<double, 4> e{};
    std::array<double, 4> sigma_e{};
    // Built from exact probabilities (no counting noise)
    bool exact = false;
};

inline ChshEstimate estimate_chsh(const std::array<CountRecord, 4>& records)
{
    ChshEstimate out;
    double var = 0;
    for (std::size_t i = 0; i < 4; ++i)
    {
        const auto est = estimate_correlation(records[i]);
        out.e[i] = est.value;
        out.sigma_e[i] = est.sigma;
        var += est.sigma * est.sigma;
    }
    out.b = chsh_value(out.e);
    out.sigma_b = std::sqrt(var);
    if (out.sigma_b > 0)
    {
        out.n_sigma = (out.b - 2) / out.sigma_b;
    }
    else
    {
        out.n_sigma = out.b > 2 ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
    }
    return out;
}

// Infinite-count limit: the exact correlations with zero uncertainty
inline ChshEstimate chsh_from_exact(const std::array<double, 4>& e)
{
    ChshEstimate out;
    out.e = e;
    out.b = chsh_value(e);
    out.exact = true;
    out.n_sigma = out.b > 2 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
    return out;
}

struct RunConfig
{
    std::uint64_t seed = 0;
    double pairs_per_setting = 1e4;
    // Report twice the recorded counts for a half-blocked pump
    bool double_blocked_counts = false;
    AnalyzerModel model = IdealAnalyzer{};
};

struct ExperimentReport
{
    std::string state_label;
    MeasurementSettings settings;
    std::array<CountRecord, 4> records;
    ChshEstimate estimate;
};

inline std::array<OutcomeProbabilities, 4>
chsh_probabilities(const BiphotonAmplitude& bp,
                   const MeasurementSettings& settings,
                   const AnalyzerModel& model,
                   std::size_t threads = default_thread_count())
{
    std::array<OutcomeProbabilities, 4> out;
    const auto pairs = settings.pairs();
    for (std::size_t i = 0; i < 4; ++i)
    {
        out[i] = outcome_probabilities(bp, pairs[i].first, pairs[i].second, model, threads);
    }
    return out;
}

/*!
 * Counting stage of a CHSH run from precomputed probabilities.
 *
 * Setting i draws from stream (seed, experiment, i), so records do not
 * depend on evaluation order or worker count.
 */
inline std::array<CountRecord, 4>
simulate_chsh_counts(const std::array<OutcomeProbabilities, 4>& probabilities,
                     const MeasurementSettings& settings,
                     double flux_factor,
                     const RunConfig& cfg,
                     std::size_t threads = default_thread_count())
{
    require(cfg.pairs_per_setting > 0, "pairs_per_setting must be positive");
    std::array<CountRecord, 4> records;
    const auto pairs = settings.pairs();
    parallel_for(
        4,
        [&](std::size_t i) {
            CounterStream rng(cfg.seed, stream_id(StreamPurpose::experiment, i));
            records[i] = simulate_counts(probabilities[i], cfg.pairs_per_setting, flux_factor, rng);
            records[i].theta1 = pairs[i].first;
            records[i].theta2 = pairs[i].second;
        },
        threads);
    return records;
}

inline ExperimentReport run_experiment(const BiphotonAmplitude& bp,
                                       const MeasurementSettings& settings,
                                       const RunConfig& cfg,
                                       std::string state_label = {},
                                       std::size_t threads = default_thread_count())
{
    const auto probabilities = chsh_probabilities(bp, settings, cfg.model, threads);
    ExperimentReport report;
    report.state_label = std::move(state_label);
    report.settings = settings;
    report.records = simulate_chsh_counts(probabilities, settings, bp.flux_factor(), cfg, threads);
    report.estimate = estimate_chsh(report.records);
    return report;
}

struct SlicePoint
{
    double theta1 = 0;
    // (+,+) coincidences as reported (doubled under the blocked-pump convention)
    double n_pp = 0;
    double sigma = 0;
};

/*!
 * (+,+) coincidences versus theta1 at fixed theta2.
 *
 * Point i draws from stream (seed, slice, i). With cfg.double_blocked_counts
 * and a blocked pump the counts and their Poisson errors are doubled.
 */
inline std::vector<SlicePoint> slice_scan(const BiphotonAmplitude& bp,
                                          double theta2,
                                          const AngleGrid& theta1,
                                          const RunConfig& cfg,
                                          std::size_t threads = default_thread_count())
{
    require(theta1.count >= 1, "slice needs at least one point");
    require(cfg.pairs_per_setting > 0, "pairs_per_setting must be positive");
    const double scale = cfg.double_blocked_counts && bp.flux_factor() < 1 ? 2.0 : 1.0;
    std::vector<SlicePoint> out(theta1.count);
    parallel_for(
        theta1.count,
        [&](std::size_t i) {
            const double t1 = theta1[i];
            const auto p = outcome_probabilities(bp, t1, theta2, cfg.model, 1);
            CounterStream rng(cfg.seed, stream_id(StreamPurpose::slice, i));
            const auto rec = simulate_counts(p, cfg.pairs_per_setting, bp.flux_factor(), rng);
            const auto n = static_cast<double>(rec.counts[0]);
            out[i] = {t1, scale * n, scale * std::sqrt(n)};
        },
        threads);
    return out;
}

// y = offset + amplitude cos(theta + phase), fitted by weighted least squares
struct SinusoidFit
{
    double offset = 0;
    double amplitude = 0;
    double phase = 0;
    double visibility = 0;
    double sigma_visibility = 0;
    double sigma_phase = 0;
};

/*!
 * Poisson-weighted linear fit of y = c0 + c1 cos(theta) + c2 sin(theta).
 *
 * Errors come from the weighted normal-equation covariance scaled by the
 * reduced chi-square.
 */
inline SinusoidFit fit_sinusoid(const std::vector<SlicePoint>& points)
{
    const auto n = static_cast<Eigen::Index>(points.size());
    require(n >= 4, "sinusoid fit needs at least 4 points");
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const auto& p = points[static_cast<std::size_t>(i)];
        design(i, 0) = 1;
        design(i, 1) = std::cos(p.theta1);
        design(i, 2) = std::sin(p.theta1);
        y(i) = p.n_pp;
        weight(i) = 1.0 / std::max(p.sigma * p.sigma, 1.0);
    }
    const Eigen::Matrix3d normal = design.transpose() * weight.asDiagonal() * design;
    const Eigen::Vector3d rhs = design.transpose() * weight.asDiagonal() * y;
    const Eigen::Vector3d c = normal.ldlt().solve(rhs);
    const Eigen::VectorXd resid = y - design * c;
    const double chi2 = resid.cwiseProduct(weight).dot(resid);
    const double reduced = n > 3 ? chi2 / static_cast<double>(n - 3) : 1.0;
    const Eigen::Matrix3d cov = normal.inverse() * std::max(reduced, 1e-300);

    SinusoidFit fit;
    fit.offset = c(0);
    fit.amplitude = std::hypot(c(1), c(2));
    fit.phase = std::atan2(-c(2), c(1));
    fit.visibility = fit.amplitude / fit.offset;

    // Gradients of visibility and phase with respect to (c0, c1, c2)
    const double r = fit.amplitude;
    Eigen::Vector3d gv(-r / (c(0) * c(0)), c(1) / (r * c(0)), c(2) / (r * c(0)));
    Eigen::Vector3d gp(0, c(2) / (r * r), -c(1) / (r * r));
    fit.sigma_visibility = std::sqrt(gv.dot(cov * gv));
    fit.sigma_phase = std::sqrt(gp.dot(cov * gp));
    return fit;
}

// Conventional label for a pump setting
inline std::string state_label(const PumpSpec& spec)
{
    if (spec.blocked())
    {
        return "Phi+ + Psi+";
    }
    const double phi = wrap_angle(std::get<PumpRotation>(spec.mode).phi);
    constexpr double tol = 1e-9;
    if (std::abs(phi) < tol || std::abs(phi - two_pi) < tol)
    {
        return "Phi+";
    }
    if (std::abs(phi - std::numbers::pi) < tol)
    {
        return "Psi+";
    }
    if (std::abs(phi - std::numbers::pi / 2) < tol)
    {
        return "Phi+ + i Psi+";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "phi=%.9g", std::get<PumpRotation>(spec.mode).phi);
    return buf;
}

}  // namespace parity_bell
