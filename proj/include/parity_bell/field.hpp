#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parity_bell/errors.hpp"

namespace parity_bell
{

using Complex = std::complex<double>;

//---------------------------------------------------------------------------//
/*!
 * Mirror-symmetric sample grid for a 1D transverse coordinate.
 *
 * Samples sit at x_k = (k + 1/2 - M/2) dx with dx = 2 x_max / M, so the
 * mirror image of sample k is sample M-1-k and no sample lies on x = 0.
 * Lengths are in units of the pump width unless a caller converts.
 */
class Grid
{
  public:
    Grid(std::size_t size, double x_max)
    {
        require(size % 2 == 0, "M must be even");
        require(size >= 4, "M must be at least 4");
        require(std::isfinite(x_max) && x_max > 0, "x_max must be positive");
        size_ = size;
        x_max_ = x_max;
        dx_ = 2.0 * x_max / static_cast<double>(size);
    }

    std::size_t size() const { return size_; }
    double x_max() const { return x_max_; }
    double dx() const { return dx_; }

    double x(std::size_t k) const
    {
        return (static_cast<double>(k) + 0.5 - 0.5 * static_cast<double>(size_)) * dx_;
    }

    std::size_t mirror(std::size_t k) const { return size_ - 1 - k; }

    // +1 on the x > 0 half, -1 on the x < 0 half
    int sign(std::size_t k) const { return 2 * k >= size_ ? 1 : -1; }

    // Fractional sample index of an arbitrary coordinate
    double index_of(double position) const
    {
        return position / dx_ + 0.5 * static_cast<double>(size_) - 0.5;
    }

    bool operator==(const Grid& other) const
    {
        return size_ == other.size_ && x_max_ == other.x_max_;
    }

  private:
    std::size_t size_ = 0;
    double x_max_ = 0;
    double dx_ = 0;
};

inline Grid make_grid(std::size_t size, double x_max)
{
    return Grid(size, x_max);
}

//---------------------------------------------------------------------------//
/*!
 * Complex field sampled on a Grid.
 *
 * The squared norm is the Riemann sum of |psi(x_k)|^2 dx.
 */
class SampledField
{
  public:
    explicit SampledField(Grid grid)
        : grid_(grid), amplitude_(grid.size(), Complex{0, 0})
    {
    }

    SampledField(Grid grid, std::vector<Complex> amplitude)
        : grid_(grid), amplitude_(std::move(amplitude))
    {
        require(amplitude_.size() == grid_.size(),
                "field has " + std::to_string(amplitude_.size())
                    + " samples, grid has " + std::to_string(grid_.size()));
        for (const auto& value : amplitude_)
        {
            require(std::isfinite(value.real()) && std::isfinite(value.imag()),
                    "field amplitude is not finite");
        }
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return amplitude_.size(); }
    std::span<const Complex> amplitude() const { return amplitude_; }
    const Complex& operator[](std::size_t k) const { return amplitude_[k]; }

    double norm_squared() const
    {
        double sum = 0;
        for (const auto& value : amplitude_)
        {
            sum += std::norm(value);
        }
        return sum * grid_.dx();
    }

  private:
    Grid grid_;
    std::vector<Complex> amplitude_;
};

// Squared-norm tolerance of the "normalized" contract
inline constexpr double normalization_tolerance = 1e-12;

inline bool is_normalized(const SampledField& f)
{
    return std::abs(f.norm_squared() - 1.0) <= normalization_tolerance;
}

inline SampledField normalized(const SampledField& f)
{
    const double norm2 = f.norm_squared();
    if (!(norm2 > 0))
    {
        throw NumericalError("cannot normalize a zero field");
    }
    const double scale = 1.0 / std::sqrt(norm2);
    std::vector<Complex> out(f.amplitude().begin(), f.amplitude().end());
    for (auto& value : out)
    {
        value *= scale;
    }
    return SampledField(f.grid(), std::move(out));
}

//---------------------------------------------------------------------------//
/*!
 * Normalized Gaussian psi(x) ∝ exp(-x^2 / (2 w^2)).
 *
 * Even to the last bit, since the grid is mirror symmetric.
 */
inline SampledField gaussian_even_mode(const Grid& grid, double w)
{
    require(std::isfinite(w) && w > 0, "mode width must be positive");
    std::size_t inside = 0;
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        if (std::abs(grid.x(k)) <= w)
        {
            ++inside;
        }
    }
    require(inside >= 8,
            "under-resolved: only " + std::to_string(inside)
                + " samples within one mode width");

    std::vector<Complex> amplitude(grid.size());
    for (std::size_t k = 0; k < grid.size() / 2; ++k)
    {
        const double x = grid.x(k);
        const double value = std::exp(-x * x / (2 * w * w));
        amplitude[k] = value;
        amplitude[grid.mirror(k)] = value;
    }
    return normalized(SampledField(grid, std::move(amplitude)));
}

struct ParityParts
{
    SampledField even;
    SampledField odd;
};

// psi_e(x) = (psi(x) + psi(-x))/2, psi_o(x) = (psi(x) - psi(-x))/2
inline ParityParts parity_split(const SampledField& f)
{
    const Grid& grid = f.grid();
    std::vector<Complex> even(grid.size());
    std::vector<Complex> odd(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const Complex here = f[k];
        const Complex there = f[grid.mirror(k)];
        even[k] = 0.5 * (here + there);
        odd[k] = 0.5 * (here - there);
    }
    return {SampledField(grid, std::move(even)), SampledField(grid, std::move(odd))};
}

inline Complex inner_product(const SampledField& a, const SampledField& b)
{
    require(a.grid() == b.grid(), "inner product of fields on different grids");
    Complex sum{0, 0};
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        sum += std::conj(a[k]) * b[k];
    }
    return sum * a.grid().dx();
}

// Transmission e^{i (theta/2) sgn(x)}
inline Complex phase_plate_factor(double theta, int sign)
{
    return std::polar(1.0, 0.5 * theta * sign);
}

inline SampledField apply_phase_plate(const SampledField& f, double theta)
{
    const Grid& grid = f.grid();
    const Complex left = phase_plate_factor(theta, -1);
    const Complex right = phase_plate_factor(theta, +1);
    std::vector<Complex> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        out[k] = f[k] * (grid.sign(k) > 0 ? right : left);
    }
    return SampledField(grid, std::move(out));
}

//---------------------------------------------------------------------------//
/*!
 * Linear-interpolation stencil for reading a sampled function at the mirror
 * image 2a - x_k of sample k.
 *
 * For a == 0 the stencil is the exact index mirror with zero weight on the
 * neighbour. Reads outside the grid return zero.
 */
struct ReflectionStencil
{
    std::ptrdiff_t lower = 0;
    double fraction = 0;
};

inline void check_flip_axis(const Grid& grid, double axis)
{
    require(std::isfinite(axis) && std::abs(axis) <= 0.5 * grid.x_max(),
            "flip axis outside trusted region");
}

inline ReflectionStencil reflection_stencil(const Grid& grid, double axis, std::size_t k)
{
    if (axis == 0)
    {
        return {static_cast<std::ptrdiff_t>(grid.mirror(k)), 0.0};
    }
    const double t = grid.index_of(2 * axis - grid.x(k));
    const double lower = std::floor(t);
    return {static_cast<std::ptrdiff_t>(lower), t - lower};
}

template<class Sample>
Complex read_stencil(const ReflectionStencil& stencil, std::size_t size, Sample&& sample)
{
    auto at = [&](std::ptrdiff_t i) -> Complex {
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(size))
        {
            return {0, 0};
        }
        return sample(static_cast<std::size_t>(i));
    };
    if (stencil.fraction == 0)
    {
        return at(stencil.lower);
    }
    return (1 - stencil.fraction) * at(stencil.lower)
           + stencil.fraction * at(stencil.lower + 1);
}

// Mirror image about x = axis: f(x) -> f(2 axis - x)
inline SampledField spatial_flip(const SampledField& f, double axis = 0)
{
    const Grid& grid = f.grid();
    check_flip_axis(grid, axis);
    std::vector<Complex> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        out[k] = read_stencil(reflection_stencil(grid, axis, k), grid.size(),
                              [&](std::size_t i) { return f[i]; });
    }
    return SampledField(grid, std::move(out));
}

enum class HalfPlane
{
    positive,
    negative
};

struct BlockedField
{
    SampledField field;
    double transmitted_fraction = 0;
};

// Opaque screen over one half plane
inline BlockedField block_half(const SampledField& f, HalfPlane side)
{
    const Grid& grid = f.grid();
    const int blocked_sign = side == HalfPlane::positive ? 1 : -1;
    std::vector<Complex> out(f.amplitude().begin(), f.amplitude().end());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        if (grid.sign(k) == blocked_sign)
        {
            out[k] = 0;
        }
    }
    SampledField field(grid, std::move(out));
    const double before = f.norm_squared();
    const double fraction = before > 0 ? field.norm_squared() / before : 0.0;
    return {std::move(field), fraction};
}

}  // namespace parity_bell
