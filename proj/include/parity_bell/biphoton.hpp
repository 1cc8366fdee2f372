#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "parity_bell/errors.hpp"
#include "parity_bell/field.hpp"
#include "parity_bell/parallel.hpp"

namespace parity_bell
{

//---------------------------------------------------------------------------//
// Pump preparation
//---------------------------------------------------------------------------//

// Pump passed through a parity rotator set to phi
struct PumpRotation
{
    double phi = 0;
};

// Pump with one half plane covered by an opaque screen
struct PumpBlocked
{
    HalfPlane side = HalfPlane::positive;
};

struct PumpSpec
{
    double w = 1;
    std::variant<PumpRotation, PumpBlocked> mode = PumpRotation{};

    bool blocked() const { return std::holds_alternative<PumpBlocked>(mode); }
};

struct PreparedPump
{
    SampledField field;
    // Pair-generation rate relative to the unobstructed pump
    double flux_factor = 1;
};

/*!
 * Classical pump field cos(phi/2) psi_even + i sin(phi/2) sgn(x) psi_even,
 * or the half-blocked even mode renormalized.
 */
inline PreparedPump prepare_pump(const Grid& grid, const PumpSpec& spec)
{
    const SampledField even = gaussian_even_mode(grid, spec.w);
    if (const auto* blocked = std::get_if<PumpBlocked>(&spec.mode))
    {
        auto result = block_half(even, blocked->side);
        return {normalized(result.field), result.transmitted_fraction};
    }
    const double phi = std::get<PumpRotation>(spec.mode).phi;
    require(std::isfinite(phi), "pump phi must be finite");
    const double c = std::cos(0.5 * phi);
    const double s = std::sin(0.5 * phi);
    std::vector<Complex> amplitude(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        amplitude[k] = even[k] * Complex(c, s * grid.sign(k));
    }
    return {SampledField(grid, std::move(amplitude)), 1.0};
}

//---------------------------------------------------------------------------//
// Two-photon amplitude
//---------------------------------------------------------------------------//

enum class Representation
{
    dense,
    lazy
};

// Largest grid for which a dense M x M amplitude is materialized
inline constexpr std::size_t max_dense_size = 4096;

using DenseAmplitude = Eigen::MatrixXcd;

/*!
 * Two-photon amplitude psi(x, x') = E_p((x+x')/2) xi((x-x')/2) with the
 * Gaussian correlation kernel xi(u) = exp(-u^2 / (2 b^2)).
 *
 * Both photons share one grid, so x+ = (x_j + x_k)/2 lives on a lattice of
 * spacing dx/2: even j+k lands on pump sample (j+k)/2, odd j+k lands halfway
 * between two samples and takes their average. The lattice point x+ = 0 is
 * the edge of the pump's phase plate or screen and carries zero amplitude,
 * which keeps the even and odd pump components exactly equal in magnitude.
 *
 * Values are normalized so that sum_{jk} |psi_jk|^2 dx^2 = 1.
 */
class BiphotonAmplitude
{
  public:
    BiphotonAmplitude(const SampledField& pump,
                      double kernel_width,
                      Representation representation,
                      double flux_factor = 1.0)
        : grid_(pump.grid()),
          kernel_width_(kernel_width),
          representation_(representation),
          flux_factor_(flux_factor)
    {
        const std::size_t m = grid_.size();
        const double dx = grid_.dx();
        require(std::isfinite(kernel_width) && kernel_width > 0,
                "kernel width b must be positive");
        require(flux_factor > 0 && flux_factor <= 1, "flux factor must lie in (0, 1]");
        const double min_samples = representation == Representation::dense ? 4.0 : 1.0;
        require(kernel_width / dx >= min_samples,
                "under-resolved kernel: b/dx = " + std::to_string(kernel_width / dx)
                    + ", need at least " + std::to_string(min_samples));
        require(pump.norm_squared() > 0, "pump field is zero");
        if (representation == Representation::dense)
        {
            require(m <= max_dense_size,
                    "dense representation limited to M <= " + std::to_string(max_dense_size));
        }

        // Pump on the x+ lattice, index p = j + k
        pump_line_.assign(2 * m - 1, Complex{0, 0});
        for (std::size_t p = 0; p < 2 * m - 1; ++p)
        {
            if (p % 2 == 0)
            {
                pump_line_[p] = pump[p / 2];
            }
            else if (p != m - 1)
            {
                pump_line_[p] = 0.5 * (pump[(p - 1) / 2] + pump[(p + 1) / 2]);
            }
        }

        // Kernel on the x- lattice, index d = j - k + M - 1
        kernel_line_.assign(2 * m - 1, 0.0);
        for (std::size_t d = 0; d < 2 * m - 1; ++d)
        {
            const double u = 0.5 * dx * (static_cast<double>(d) - static_cast<double>(m - 1));
            kernel_line_[d] = std::exp(-u * u / (2 * kernel_width * kernel_width));
        }

        // Beyond this offset |xi|^2 < 1e-36 relative to its peak
        const double cutoff = 2.0 * kernel_width * std::sqrt(2.0 * 41.5) / dx;
        band_ = std::min<std::size_t>(m - 1, static_cast<std::size_t>(std::ceil(cutoff)) + 1);

        double norm2 = 0;
        for (std::size_t j = 0; j < m; ++j)
        {
            const auto [lo, hi] = band_range(j);
            for (std::size_t k = lo; k < hi; ++k)
            {
                norm2 += std::norm(raw(j, k));
            }
        }
        norm2 *= dx * dx;
        if (!(norm2 > 0) || !std::isfinite(norm2))
        {
            throw NumericalError("biphoton amplitude has zero or non-finite norm");
        }
        scale_ = 1.0 / std::sqrt(norm2);

        // Pump rms width -> 1/e amplitude half-width of the equivalent Gaussian
        double second_moment = 0;
        for (std::size_t k = 0; k < m; ++k)
        {
            second_moment += grid_.x(k) * grid_.x(k) * std::norm(pump[k]);
        }
        const double pump_width = std::sqrt(2.0 * second_moment * dx / pump.norm_squared());
        if (kernel_width >= pump_width)
        {
            warnings_.push_back("Schmidt structure degenerate: kernel width b >= pump width");
        }

        if (representation == Representation::dense)
        {
            dense_ = DenseAmplitude(m, m);
            for (std::size_t k = 0; k < m; ++k)
            {
                for (std::size_t j = 0; j < m; ++j)
                {
                    (*dense_)(j, k) = scale_ * raw(j, k) * dx;
                }
            }
        }
    }

    const Grid& grid() const { return grid_; }
    double kernel_width() const { return kernel_width_; }
    Representation representation() const { return representation_; }
    double flux_factor() const { return flux_factor_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    // psi(x_j, x_k), normalized
    Complex value(std::size_t j, std::size_t k) const
    {
        if (dense_)
        {
            return (*dense_)(j, k) / grid_.dx();
        }
        return scale_ * raw(j, k);
    }

    // psi(x_j, x_k) dx: the entries of the matrix whose SVD is the Schmidt decomposition
    Complex weighted(std::size_t j, std::size_t k) const
    {
        if (dense_)
        {
            return (*dense_)(j, k);
        }
        return scale_ * raw(j, k) * grid_.dx();
    }

    // Column range [lo, hi) of row j outside which the amplitude is negligible
    std::pair<std::size_t, std::size_t> band_range(std::size_t j) const
    {
        const std::size_t lo = j > band_ ? j - band_ : 0;
        const std::size_t hi = std::min(grid_.size(), j + band_ + 1);
        return {lo, hi};
    }

    std::size_t band() const { return band_; }

    // Materialize psi dx as a matrix (no copy when already dense)
    DenseAmplitude densify() const
    {
        if (dense_)
        {
            return *dense_;
        }
        const std::size_t m = grid_.size();
        require(m <= max_dense_size,
                "cannot densify: M = " + std::to_string(m) + " exceeds "
                    + std::to_string(max_dense_size));
        DenseAmplitude out(m, m);
        for (std::size_t k = 0; k < m; ++k)
        {
            for (std::size_t j = 0; j < m; ++j)
            {
                out(j, k) = weighted(j, k);
            }
        }
        return out;
    }

  private:
    Grid grid_;
    double kernel_width_;
    Representation representation_;
    double flux_factor_;
    std::vector<Complex> pump_line_;
    std::vector<double> kernel_line_;
    std::size_t band_ = 0;
    double scale_ = 1;
    std::optional<DenseAmplitude> dense_;
    std::vector<std::string> warnings_;

    Complex raw(std::size_t j, std::size_t k) const
    {
        return pump_line_[j + k] * kernel_line_[j + grid_.size() - 1 - k];
    }
};

inline BiphotonAmplitude build_biphoton(const PreparedPump& pump,
                                        double kernel_width,
                                        Representation representation)
{
    return BiphotonAmplitude(pump.field, kernel_width, representation, pump.flux_factor);
}

inline BiphotonAmplitude build_biphoton(const SampledField& pump,
                                        double kernel_width,
                                        Representation representation)
{
    return BiphotonAmplitude(pump, kernel_width, representation, 1.0);
}

//---------------------------------------------------------------------------//
// Schmidt decomposition
//---------------------------------------------------------------------------//

// Which quantity the mode-count threshold is applied to
enum class ThresholdBasis
{
    eigenvalue,  // lambda_n^2 > f * lambda_max^2 (spectrum of eta)
    amplitude  // lambda_n > f * lambda_max
};

struct SchmidtSpectrum
{
    // Descending Schmidt coefficients with sum lambda_n^2 = 1
    std::vector<double> lambda;
    // 1 / sum lambda_n^4
    double participation = 1;
    // Count at the default threshold (eigenvalue basis, fraction 0.01)
    std::size_t threshold_count = 1;

    std::size_t count_above(double fraction, ThresholdBasis basis) const
    {
        if (lambda.empty())
        {
            return 0;
        }
        const double top = lambda.front();
        return static_cast<std::size_t>(
            std::count_if(lambda.begin(), lambda.end(), [&](double l) {
                return basis == ThresholdBasis::eigenvalue ? l * l > fraction * top * top
                                                           : l > fraction * top;
            }));
    }

    // Participation of a separable x/y transverse state built from this
    // spectrum in both directions (the quantity the Gaussian closed form counts)
    double transverse_2d_participation() const { return participation * participation; }
};

inline SchmidtSpectrum schmidt_from_singular_values(std::vector<double> values)
{
    std::sort(values.begin(), values.end(), std::greater<>());
    double sum2 = 0;
    for (double v : values)
    {
        sum2 += v * v;
    }
    if (!(sum2 > 0))
    {
        throw NumericalError("Schmidt spectrum is empty");
    }
    const double inv = 1.0 / std::sqrt(sum2);
    double sum4 = 0;
    for (double& v : values)
    {
        v = std::max(0.0, v * inv);
        sum4 += v * v * v * v;
    }
    SchmidtSpectrum out;
    out.lambda = std::move(values);
    out.participation = 1.0 / sum4;
    out.threshold_count = out.count_above(0.01, ThresholdBasis::eigenvalue);
    return out;
}

inline SchmidtSpectrum schmidt_decompose(const BiphotonAmplitude& bp)
{
    const DenseAmplitude matrix = bp.densify();
    Eigen::BDCSVD<DenseAmplitude> svd(matrix);
    const auto& singular = svd.singularValues();
    if (svd.info() != Eigen::Success || !singular.allFinite())
    {
        throw NumericalError("SVD did not converge (M = " + std::to_string(bp.grid().size())
                             + ", x_max = " + std::to_string(bp.grid().x_max())
                             + ", b = " + std::to_string(bp.kernel_width()) + ")");
    }
    return schmidt_from_singular_values(
        std::vector<double>(singular.data(), singular.data() + singular.size()));
}

struct AnalyticSchmidt
{
    double mode_count = 1;
    // sqrt(lambda_p ell / 8), the kernel width implied by the crystal
    double kernel_width = 0;
};

/*!
 * Closed-form transverse mode count for Gaussian pump and kernel:
 * N = (1/4) (w / b + b / w)^2 with b = sqrt(lambda_p ell / 8).
 */
inline AnalyticSchmidt schmidt_number_analytic(double w, double lambda_p, double ell)
{
    require(w > 0 && lambda_p > 0 && ell > 0,
            "pump width, wavelength and crystal length must be positive");
    const double b = std::sqrt(lambda_p * ell / 8.0);
    const double ratio = w / b + b / w;
    return {0.25 * ratio * ratio, b};
}

//---------------------------------------------------------------------------//
// Effective parity qubits
//---------------------------------------------------------------------------//

// Pauli index order used throughout: I, X, Y, Z
enum Pauli : std::size_t
{
    pauli_i = 0,
    pauli_x = 1,
    pauli_y = 2,
    pauli_z = 3
};

inline Eigen::Matrix2cd pauli_matrix(std::size_t which)
{
    const Complex i{0, 1};
    Eigen::Matrix2cd m;
    switch (which)
    {
        case pauli_i:
            m << 1, 0, 0, 1;
            break;
        case pauli_x:
            m << 0, 1, 1, 0;
            break;
        case pauli_y:
            m << 0, -i, i, 0;
            break;
        default:
            m << 1, 0, 0, -1;
            break;
    }
    return m;
}

inline Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b)
{
    Eigen::Matrix4cd out;
    for (int r = 0; r < 2; ++r)
    {
        for (int c = 0; c < 2; ++c)
        {
            out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
        }
    }
    return out;
}

using PauliExpectations = std::array<std::array<double, 4>, 4>;

/*!
 * Two-qubit state over the basis {ee, eo, oe, oo}.
 *
 * Built from the 16 expectations <s_i ⊗ s_j> of the parity Pauli algebra on
 * the full transverse space: Z is the spatial flip (parity), X is
 * multiplication by sgn(x), Y = iXZ.
 */
class ParityDensityMatrix
{
  public:
    explicit ParityDensityMatrix(const PauliExpectations& expectations)
        : expectations_(expectations)
    {
        rho_.setZero();
        for (std::size_t a = 0; a < 4; ++a)
        {
            for (std::size_t b = 0; b < 4; ++b)
            {
                rho_ += 0.25 * expectations[a][b] * kron(pauli_matrix(a), pauli_matrix(b));
            }
        }
    }

    explicit ParityDensityMatrix(const Eigen::Matrix4cd& rho) : rho_(rho)
    {
        for (std::size_t a = 0; a < 4; ++a)
        {
            for (std::size_t b = 0; b < 4; ++b)
            {
                expectations_[a][b] = reconstructed_expectation(a, b);
            }
        }
    }

    const Eigen::Matrix4cd& matrix() const { return rho_; }
    const PauliExpectations& expectations() const { return expectations_; }
    double expectation(std::size_t a, std::size_t b) const { return expectations_[a][b]; }

    // Tr(rho s_a ⊗ s_b)
    double reconstructed_expectation(std::size_t a, std::size_t b) const
    {
        return (rho_ * kron(pauli_matrix(a), pauli_matrix(b))).trace().real();
    }

  private:
    Eigen::Matrix4cd rho_;
    PauliExpectations expectations_{};
};

namespace detail
{
// Accumulators for one pass over the amplitude: sums of
// conj(psi(j,k)) psi(map_a j, map_b k) weighted by 1, s_j, s_k, s_j s_k,
// for the four (identity|flip)^2 coordinate maps.
struct TomographySums
{
    std::array<std::array<Complex, 4>, 4> by_map{};

    TomographySums operator+(const TomographySums& other) const
    {
        TomographySums out;
        for (std::size_t m = 0; m < 4; ++m)
        {
            for (std::size_t w = 0; w < 4; ++w)
            {
                out.by_map[m][w] = by_map[m][w] + other.by_map[m][w];
            }
        }
        return out;
    }
};

// Map index: bit 0 flips the first photon, bit 1 flips the second.
// Weight index: bit 0 multiplies by s_j, bit 1 by s_k.
inline PauliExpectations assemble(const TomographySums& s)
{
    // Each Pauli is (coordinate map, weight) with Y carrying an extra i:
    // I = (id, 1), X = (id, s), Y = (flip, i s), Z = (flip, 1)
    constexpr std::array<int, 4> flips{0, 0, 1, 1};
    constexpr std::array<int, 4> weighted{0, 1, 1, 0};
    const Complex i{0, 1};
    PauliExpectations out{};
    for (std::size_t a = 0; a < 4; ++a)
    {
        for (std::size_t b = 0; b < 4; ++b)
        {
            const std::size_t map = flips[a] | (flips[b] << 1);
            const std::size_t weight = weighted[a] | (weighted[b] << 1);
            Complex factor{1, 0};
            if (a == pauli_y)
            {
                factor *= i;
            }
            if (b == pauli_y)
            {
                factor *= i;
            }
            out[a][b] = (factor * s.by_map[map][weight]).real();
        }
    }
    return out;
}
}  // namespace detail

// Band-limited quadrature directly on the amplitude, O(M * band)
inline PauliExpectations parity_expectations(const BiphotonAmplitude& bp,
                                             std::size_t threads = default_thread_count())
{
    const Grid& grid = bp.grid();
    const std::size_t m = grid.size();
    const double dx2 = grid.dx() * grid.dx();
    auto sums = blocked_reduce<detail::TomographySums>(
        m, 64, detail::TomographySums{},
        [&](std::size_t begin, std::size_t end) {
            detail::TomographySums acc;
            for (std::size_t j = begin; j < end; ++j)
            {
                const std::size_t mj = grid.mirror(j);
                const double sj = grid.sign(j);
                const auto [lo, hi] = bp.band_range(j);
                for (std::size_t k = lo; k < hi; ++k)
                {
                    const std::size_t mk = grid.mirror(k);
                    const double sk = grid.sign(k);
                    const Complex c = std::conj(bp.value(j, k));
                    const std::array<Complex, 4> mapped{c * bp.value(j, k),
                                                        c * bp.value(mj, k),
                                                        c * bp.value(j, mk),
                                                        c * bp.value(mj, mk)};
                    for (std::size_t map = 0; map < 4; ++map)
                    {
                        acc.by_map[map][0] += mapped[map];
                        acc.by_map[map][1] += sj * mapped[map];
                        acc.by_map[map][2] += sk * mapped[map];
                        acc.by_map[map][3] += sj * sk * mapped[map];
                    }
                }
            }
            return acc;
        },
        std::plus<>{}, threads);
    for (auto& row : sums.by_map)
    {
        for (auto& value : row)
        {
            value *= dx2;
        }
    }
    return detail::assemble(sums);
}

// Same expectations with the operators applied as explicit matrix maps
inline PauliExpectations parity_expectations_dense(const BiphotonAmplitude& bp)
{
    const Grid& grid = bp.grid();
    const auto m = static_cast<Eigen::Index>(grid.size());
    const DenseAmplitude psi = bp.densify();
    Eigen::VectorXd sign(m);
    for (Eigen::Index k = 0; k < m; ++k)
    {
        sign(k) = grid.sign(static_cast<std::size_t>(k));
    }
    const Complex i{0, 1};

    // Operator on the first photon acts on rows; on the second, on columns
    auto on_rows = [&](std::size_t which, const DenseAmplitude& in) -> DenseAmplitude {
        switch (which)
        {
            case pauli_i:
                return in;
            case pauli_x:
                return sign.asDiagonal() * in;
            case pauli_y:
                return i * (sign.asDiagonal() * in.colwise().reverse());
            default:
                return in.colwise().reverse();
        }
    };
    auto on_cols = [&](std::size_t which, const DenseAmplitude& in) -> DenseAmplitude {
        switch (which)
        {
            case pauli_i:
                return in;
            case pauli_x:
                return in * sign.asDiagonal();
            case pauli_y:
                return i * (in.rowwise().reverse() * sign.asDiagonal());
            default:
                return in.rowwise().reverse();
        }
    };

    PauliExpectations out{};
    for (std::size_t a = 0; a < 4; ++a)
    {
        const DenseAmplitude rows = on_rows(a, psi);
        for (std::size_t b = 0; b < 4; ++b)
        {
            out[a][b] = psi.conjugate().cwiseProduct(on_cols(b, rows)).sum().real();
        }
    }
    return out;
}

inline ParityDensityMatrix project_parity_tomography(const BiphotonAmplitude& bp)
{
    return ParityDensityMatrix(parity_expectations(bp));
}

//---------------------------------------------------------------------------//
/*!
 * Wootters concurrence C = max(0, mu_1 - mu_2 - mu_3 - mu_4), mu_i the
 * descending square roots of the eigenvalues of rho (s_y⊗s_y) rho* (s_y⊗s_y).
 *
 * Eigenvalues of rho down to -1e-9 are clipped to zero and the trace restored.
 */
inline double concurrence(const ParityDensityMatrix& state)
{
    constexpr double tolerance = 1e-9;
    Eigen::Matrix4cd rho = state.matrix();
    const double asymmetry = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    require(asymmetry <= 1e3 * tolerance,
            "density matrix is not Hermitian (deviation " + std::to_string(asymmetry) + ")");
    const double trace = rho.trace().real();
    require(std::abs(trace - 1) <= 1e3 * tolerance,
            "density matrix trace " + std::to_string(trace) + " deviates from 1");

    rho = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig(rho);
    Eigen::Vector4d values = eig.eigenvalues();
    require(values.minCoeff() >= -tolerance,
            "density matrix is not positive (eigenvalue " + std::to_string(values.minCoeff())
                + ")");
    values = values.cwiseMax(0.0);
    values /= values.sum();

    const Eigen::Matrix4cd root = eig.eigenvectors() * values.cwiseSqrt().asDiagonal()
                                  * eig.eigenvectors().adjoint();
    const Eigen::Matrix4cd clipped = eig.eigenvectors() * values.asDiagonal()
                                     * eig.eigenvectors().adjoint();
    const Eigen::Matrix4cd yy = kron(pauli_matrix(pauli_y), pauli_matrix(pauli_y));
    const Eigen::Matrix4cd flipped = yy * clipped.conjugate() * yy;
    Eigen::Matrix4cd product = root * flipped * root;
    product = 0.5 * (product + product.adjoint());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> roots(product, Eigen::EigenvaluesOnly);
    std::array<double, 4> mu{};
    for (int n = 0; n < 4; ++n)
    {
        mu[static_cast<std::size_t>(n)] = std::sqrt(std::max(0.0, roots.eigenvalues()(n)));
    }
    std::sort(mu.begin(), mu.end(), std::greater<>());
    return std::clamp(mu[0] - mu[1] - mu[2] - mu[3], 0.0, 1.0);
}

}  // namespace parity_bell
