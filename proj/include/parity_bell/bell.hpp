#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "parity_bell/biphoton.hpp"
#include "parity_bell/errors.hpp"
#include "parity_bell/field.hpp"
#include "parity_bell/parallel.hpp"

namespace parity_bell
{

inline constexpr double two_pi = 2 * std::numbers::pi;

inline double wrap_angle(double theta)
{
    double r = std::fmod(theta, two_pi);
    if (r < 0)
    {
        r += two_pi;
    }
    return r >= two_pi ? 0.0 : r;
}

// The two rotator settings per photon of a CHSH run, stored reduced mod 2 pi
struct MeasurementSettings
{
    double theta1 = 0;
    double theta1p = 0;
    double theta2 = 0;
    double theta2p = 0;

    static MeasurementSettings
    make(double theta1, double theta1p, double theta2, double theta2p)
    {
        for (double t : {theta1, theta1p, theta2, theta2p})
        {
            require(std::isfinite(t), "measurement angle must be finite");
        }
        return {wrap_angle(theta1), wrap_angle(theta1p), wrap_angle(theta2), wrap_angle(theta2p)};
    }

    // (theta1, theta2) pairs in CHSH order: (a,b), (a,b'), (a',b), (a',b')
    std::array<std::pair<double, double>, 4> pairs() const
    {
        return {{{theta1, theta2}, {theta1, theta2p}, {theta1p, theta2}, {theta1p, theta2p}}};
    }
};

// theta1 = theta2 = pi/8 - phi/2, theta1' = theta2' = 13 pi/8 - phi/2
inline MeasurementSettings optimal_settings(double phi)
{
    const double a = std::numbers::pi / 8 - phi / 2;
    const double ap = 13 * std::numbers::pi / 8 - phi / 2;
    return MeasurementSettings::make(a, ap, a, ap);
}

//---------------------------------------------------------------------------//
// Analyzer models
//---------------------------------------------------------------------------//

// Parity-sensitive MZI at zero delay with the flipper axis on x = 0
struct IdealAnalyzer
{
};

// Flipper axis offset a and residual interferometer phase delta per arm
struct MisalignedAnalyzer
{
    double a1 = 0;
    double d1 = 0;
    double a2 = 0;
    double d2 = 0;
};

// Ideal analyzer with the two-photon fringe contrast scaled by V
struct VisibilityAnalyzer
{
    double visibility = 1;
};

using AnalyzerModel = std::variant<IdealAnalyzer, MisalignedAnalyzer, VisibilityAnalyzer>;

inline void validate_model(const AnalyzerModel& model, const Grid& grid)
{
    if (const auto* v = std::get_if<VisibilityAnalyzer>(&model))
    {
        require(v->visibility >= 0 && v->visibility <= 1, "visibility must lie in [0, 1]");
    }
    else if (const auto* m = std::get_if<MisalignedAnalyzer>(&model))
    {
        check_flip_axis(grid, m->a1);
        check_flip_axis(grid, m->a2);
        require(std::isfinite(m->d1) && std::isfinite(m->d2),
                "analyzer phase must be finite");
    }
}

// Coincidence probabilities for the (+,+), (+,-), (-,+), (-,-) ports; "+" is even
struct OutcomeProbabilities
{
    double pp = 0;
    double pm = 0;
    double mp = 0;
    double mm = 0;
    // Probability leaving the analyzer ports before renormalization
    double lost_fraction = 0;

    double sum() const { return pp + pm + mp + mm; }
    double correlation() const { return pp - pm - mp + mm; }
    std::array<double, 4> as_array() const { return {pp, pm, mp, mm}; }
};

//---------------------------------------------------------------------------//
// Ideal analyzer: parity moments of the rotated amplitude
//---------------------------------------------------------------------------//

// <phi|phi>, <phi|Pi⊗I|phi>, <phi|I⊗Pi|phi>, <phi|Pi⊗Pi|phi> with phi = (U1⊗U2) psi
struct ParityMoments
{
    double norm = 0;
    double first = 0;
    double second = 0;
    double joint = 0;

    ParityMoments operator+(const ParityMoments& o) const
    {
        return {norm + o.norm, first + o.first, second + o.second, joint + o.joint};
    }
};

inline ParityMoments parity_moments(const BiphotonAmplitude& bp,
                                    double theta1,
                                    double theta2,
                                    std::size_t threads = default_thread_count())
{
    const Grid& grid = bp.grid();
    const std::array<Complex, 2> u1{phase_plate_factor(theta1, -1), phase_plate_factor(theta1, 1)};
    const std::array<Complex, 2> u2{phase_plate_factor(theta2, -1), phase_plate_factor(theta2, 1)};
    auto rotated = [&](std::size_t j, std::size_t k) {
        return u1[grid.sign(j) > 0] * u2[grid.sign(k) > 0] * bp.value(j, k);
    };
    auto moments = blocked_reduce<ParityMoments>(
        grid.size(), 64, ParityMoments{},
        [&](std::size_t begin, std::size_t end) {
            ParityMoments acc;
            for (std::size_t j = begin; j < end; ++j)
            {
                const std::size_t mj = grid.mirror(j);
                const auto [lo, hi] = bp.band_range(j);
                for (std::size_t k = lo; k < hi; ++k)
                {
                    const std::size_t mk = grid.mirror(k);
                    const Complex c = std::conj(rotated(j, k));
                    acc.norm += std::norm(c);
                    acc.first += (c * rotated(mj, k)).real();
                    acc.second += (c * rotated(j, mk)).real();
                    acc.joint += (c * rotated(mj, mk)).real();
                }
            }
            return acc;
        },
        std::plus<>{}, threads);
    const double dx2 = grid.dx() * grid.dx();
    return {moments.norm * dx2, moments.first * dx2, moments.second * dx2, moments.joint * dx2};
}

inline OutcomeProbabilities probabilities_from_moments(const ParityMoments& m, double visibility)
{
    auto port = [&](int s1, int s2) {
        const double p = 0.25 * (m.norm + s1 * m.first + s2 * m.second + s1 * s2 * visibility * m.joint);
        if (p < -1e-12)
        {
            throw NumericalError("negative outcome probability " + std::to_string(p));
        }
        return std::max(0.0, p);
    };
    return {port(1, 1), port(1, -1), port(-1, 1), port(-1, -1), 0.0};
}

//---------------------------------------------------------------------------//
// Misaligned analyzer: norm of the projected amplitude
//---------------------------------------------------------------------------//

namespace detail
{
using Interval = std::pair<std::ptrdiff_t, std::ptrdiff_t>;

inline void merge_intervals(std::vector<Interval>& spans, std::ptrdiff_t size)
{
    for (auto& s : spans)
    {
        s.first = std::clamp<std::ptrdiff_t>(s.first, 0, size);
        s.second = std::clamp<std::ptrdiff_t>(s.second, 0, size);
    }
    std::erase_if(spans, [](const Interval& s) { return s.first >= s.second; });
    std::sort(spans.begin(), spans.end());
    std::vector<Interval> merged;
    for (const auto& s : spans)
    {
        if (!merged.empty() && s.first <= merged.back().second)
        {
            merged.back().second = std::max(merged.back().second, s.second);
        }
        else
        {
            merged.push_back(s);
        }
    }
    spans = std::move(merged);
}
}  // namespace detail

/*!
 * Port probabilities ||(P_s1 ⊗ P_s2)(U1⊗U2) psi||^2 with
 * P_± = (I ± e^{i delta} Pi_a)/2, evaluated directly on the lazy amplitude.
 *
 * Returns the raw (unnormalized) port weights.
 */
inline std::array<double, 4> misaligned_port_weights(const BiphotonAmplitude& bp,
                                                     double theta1,
                                                     double theta2,
                                                     const MisalignedAnalyzer& model,
                                                     std::size_t threads = default_thread_count())
{
    const Grid& grid = bp.grid();
    const std::size_t m = grid.size();
    const auto size = static_cast<std::ptrdiff_t>(m);
    const std::array<Complex, 2> u1{phase_plate_factor(theta1, -1), phase_plate_factor(theta1, 1)};
    const std::array<Complex, 2> u2{phase_plate_factor(theta2, -1), phase_plate_factor(theta2, 1)};
    const Complex e1 = std::polar(1.0, model.d1);
    const Complex e2 = std::polar(1.0, model.d2);

    std::vector<ReflectionStencil> rows(m), cols(m);
    for (std::size_t k = 0; k < m; ++k)
    {
        rows[k] = reflection_stencil(grid, model.a1, k);
        cols[k] = reflection_stencil(grid, model.a2, k);
    }
    // Column stencil position is (M-1-k) + 2 a2 / dx
    const double col_shift = 2 * model.a2 / grid.dx();
    const auto band = static_cast<std::ptrdiff_t>(bp.band());

    auto rotated = [&](std::size_t j, std::size_t k) {
        return u1[grid.sign(j) > 0] * u2[grid.sign(k) > 0] * bp.value(j, k);
    };

    auto weights = blocked_reduce<std::array<double, 4>>(
        m, 32, std::array<double, 4>{},
        [&](std::size_t begin, std::size_t end) {
            std::array<double, 4> acc{};
            std::vector<detail::Interval> spans;
            for (std::size_t j = begin; j < end; ++j)
            {
                const auto jj = static_cast<std::ptrdiff_t>(j);
                const ReflectionStencil& rs = rows[j];
                spans.clear();
                // Columns where each source row carries amplitude, then the
                // columns whose mirror image lands there
                std::vector<std::ptrdiff_t> source_rows{jj, rs.lower, rs.lower + 1};
                for (std::ptrdiff_t r : source_rows)
                {
                    spans.emplace_back(r - band - 1, r + band + 2);
                    const double hi = static_cast<double>(size - 1) + col_shift
                                      - static_cast<double>(r - band - 2);
                    const double lo = static_cast<double>(size - 1) + col_shift
                                      - static_cast<double>(r + band + 2);
                    spans.emplace_back(static_cast<std::ptrdiff_t>(std::floor(lo)) - 1,
                                       static_cast<std::ptrdiff_t>(std::ceil(hi)) + 2);
                }
                detail::merge_intervals(spans, size);

                for (const auto& [first, last] : spans)
                {
                    for (auto kk = first; kk < last; ++kk)
                    {
                        const auto k = static_cast<std::size_t>(kk);
                        const Complex direct = rotated(j, k);
                        const Complex col_flip = read_stencil(
                            cols[k], m, [&](std::size_t c) { return rotated(j, c); });
                        auto row_read = [&](std::size_t r) { return rotated(r, k); };
                        const Complex row_flip = read_stencil(rs, m, row_read);
                        const Complex both = read_stencil(rs, m, [&](std::size_t r) {
                            return read_stencil(cols[k], m,
                                                [&](std::size_t c) { return rotated(r, c); });
                        });
                        std::size_t port = 0;
                        for (int s1 : {1, -1})
                        {
                            for (int s2 : {1, -1})
                            {
                                const Complex chi
                                    = 0.25
                                      * (direct + static_cast<double>(s2) * e2 * col_flip
                                         + static_cast<double>(s1) * e1 * row_flip
                                         + static_cast<double>(s1 * s2) * e1 * e2 * both);
                                acc[port++] += std::norm(chi);
                            }
                        }
                    }
                }
            }
            return acc;
        },
        [](std::array<double, 4> a, const std::array<double, 4>& b) {
            for (std::size_t i = 0; i < 4; ++i)
            {
                a[i] += b[i];
            }
            return a;
        },
        threads);
    const double dx2 = grid.dx() * grid.dx();
    for (auto& w : weights)
    {
        w *= dx2;
    }
    return weights;
}

// Same weights with rotators and flips applied as explicit matrix maps
inline std::array<double, 4> misaligned_port_weights_dense(const BiphotonAmplitude& bp,
                                                           double theta1,
                                                           double theta2,
                                                           const MisalignedAnalyzer& model)
{
    const Grid& grid = bp.grid();
    const std::size_t m = grid.size();
    const auto n = static_cast<Eigen::Index>(m);

    Eigen::VectorXcd u1(n), u2(n);
    for (Eigen::Index k = 0; k < n; ++k)
    {
        const int s = grid.sign(static_cast<std::size_t>(k));
        u1(k) = phase_plate_factor(theta1, s);
        u2(k) = phase_plate_factor(theta2, s);
    }
    const DenseAmplitude phi = u1.asDiagonal() * bp.densify() * u2.asDiagonal();

    // Interpolating reflection as an explicit M x M matrix
    auto reflection = [&](double axis) {
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t k = 0; k < m; ++k)
        {
            const auto st = reflection_stencil(grid, axis, k);
            const auto row = static_cast<Eigen::Index>(k);
            if (st.lower >= 0 && st.lower < n)
            {
                r(row, st.lower) += 1 - st.fraction;
            }
            if (st.fraction != 0 && st.lower + 1 >= 0 && st.lower + 1 < n)
            {
                r(row, st.lower + 1) += st.fraction;
            }
        }
        return r;
    };
    const Eigen::MatrixXcd r1 = reflection(model.a1).cast<Complex>();
    const Eigen::MatrixXcd r2 = reflection(model.a2).cast<Complex>();
    const Complex e1 = std::polar(1.0, model.d1);
    const Complex e2 = std::polar(1.0, model.d2);

    const DenseAmplitude col_flip = phi * r2.transpose();
    const DenseAmplitude row_flip = r1 * phi;
    const DenseAmplitude both = r1 * col_flip;

    std::array<double, 4> out{};
    std::size_t port = 0;
    for (int s1 : {1, -1})
    {
        for (int s2 : {1, -1})
        {
            const DenseAmplitude chi = 0.25
                                       * (phi + (static_cast<double>(s2) * e2) * col_flip
                                          + (static_cast<double>(s1) * e1) * row_flip
                                          + (static_cast<double>(s1 * s2) * e1 * e2) * both);
            out[port++] = chi.squaredNorm();
        }
    }
    return out;
}

inline OutcomeProbabilities renormalized_ports(const std::array<double, 4>& weights)
{
    const double total = weights[0] + weights[1] + weights[2] + weights[3];
    if (!(total > 0))
    {
        throw NumericalError("no probability reaches the analyzer ports");
    }
    return {weights[0] / total, weights[1] / total, weights[2] / total, weights[3] / total,
            std::max(0.0, 1.0 - total)};
}

//---------------------------------------------------------------------------//
// Public measurement surface
//---------------------------------------------------------------------------//

inline OutcomeProbabilities outcome_probabilities(const BiphotonAmplitude& bp,
                                                  double theta1,
                                                  double theta2,
                                                  const AnalyzerModel& model,
                                                  std::size_t threads = default_thread_count())
{
    validate_model(model, bp.grid());
    require(std::isfinite(theta1) && std::isfinite(theta2), "rotator angle must be finite");
    if (const auto* mis = std::get_if<MisalignedAnalyzer>(&model))
    {
        return renormalized_ports(misaligned_port_weights(bp, theta1, theta2, *mis, threads));
    }
    const double visibility = std::holds_alternative<VisibilityAnalyzer>(model)
                                  ? std::get<VisibilityAnalyzer>(model).visibility
                                  : 1.0;
    return probabilities_from_moments(parity_moments(bp, theta1, theta2, threads), visibility);
}

inline double correlation(const BiphotonAmplitude& bp,
                          double theta1,
                          double theta2,
                          const AnalyzerModel& model,
                          std::size_t threads = default_thread_count())
{
    return outcome_probabilities(bp, theta1, theta2, model, threads).correlation();
}

// cos(theta1 + theta2 + phi)
inline double predicted_correlation(double theta1, double theta2, double phi)
{
    return std::cos(theta1 + theta2 + phi);
}

/*!
 * Finite-kernel correction eps = 1 - (2/pi) arcsin((w^2 - b^2)/(w^2 + b^2)):
 * twice the probability that the two photons land on opposite sides of x = 0.
 */
inline double finite_kernel_epsilon(double w, double b)
{
    const double rho = (w * w - b * b) / (w * w + b * b);
    return 1.0 - 2.0 / std::numbers::pi * std::asin(rho);
}

// Correlation of rotated parities read off the effective two-qubit state:
// U^dag Pi U = cos(theta) Z - sin(theta) Y on each photon
inline double parity_correlation(const ParityDensityMatrix& state, double theta1, double theta2)
{
    const double c1 = std::cos(theta1), s1 = std::sin(theta1);
    const double c2 = std::cos(theta2), s2 = std::sin(theta2);
    return c1 * c2 * state.expectation(pauli_z, pauli_z)
           - c1 * s2 * state.expectation(pauli_z, pauli_y)
           - s1 * c2 * state.expectation(pauli_y, pauli_z)
           + s1 * s2 * state.expectation(pauli_y, pauli_y);
}

inline std::array<double, 4> chsh_correlations(const BiphotonAmplitude& bp,
                                               const MeasurementSettings& settings,
                                               const AnalyzerModel& model,
                                               std::size_t threads = default_thread_count())
{
    std::array<double, 4> e{};
    const auto pairs = settings.pairs();
    for (std::size_t i = 0; i < 4; ++i)
    {
        e[i] = correlation(bp, pairs[i].first, pairs[i].second, model, threads);
    }
    return e;
}

// |E(a,b) + E(a,b') + E(a',b) - E(a',b')|
inline double chsh_value(const std::array<double, 4>& e)
{
    return std::abs(e[0] + e[1] + e[2] - e[3]);
}

inline double chsh(const BiphotonAmplitude& bp,
                   const MeasurementSettings& settings,
                   const AnalyzerModel& model,
                   std::size_t threads = default_thread_count())
{
    return chsh_value(chsh_correlations(bp, settings, model, threads));
}

// count equally spaced angles on [lo, hi), endpoint excluded
struct AngleGrid
{
    std::size_t count = 32;
    double lo = 0;
    double hi = two_pi;

    double operator[](std::size_t i) const
    {
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count);
    }
};

struct Landscape
{
    AngleGrid theta1;
    AngleGrid theta2;
    // Row-major: values[i * theta2.count + j] = E(theta1[i], theta2[j])
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const { return values[i * theta2.count + j]; }
};

inline Landscape landscape(const BiphotonAmplitude& bp,
                           const AngleGrid& axis,
                           const AnalyzerModel& model,
                           std::size_t threads = default_thread_count())
{
    require(axis.count >= 2, "landscape needs at least 2 points per axis");
    require(std::isfinite(axis.lo) && std::isfinite(axis.hi) && axis.hi > axis.lo,
            "landscape range must be increasing");
    validate_model(model, bp.grid());
    Landscape out{axis, axis, std::vector<double>(axis.count * axis.count)};
    parallel_for(
        out.values.size(),
        [&](std::size_t cell) {
            const std::size_t i = cell / axis.count;
            const std::size_t j = cell % axis.count;
            out.values[cell] = correlation(bp, axis[i], axis[j], model, 1);
        },
        threads);
    return out;
}

}  // namespace parity_bell
