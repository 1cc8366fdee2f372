// Acceptance checks; run one criterion by id (1-8) or all with no argument.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parity_bell/cli.hpp"

using namespace parity_bell;

namespace
{
constexpr double pi = std::numbers::pi;
const double tsirelson = 2 * std::numbers::sqrt2;

int failures = 0;

void check(const char* id, bool ok, const std::string& what)
{
    std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
    failures += ok ? 0 : 1;
}

void info(const char* id, const std::string& what)
{
    std::printf("[INFO] %s %s\n", id, what.c_str());
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

PumpSpec rotation(double phi)
{
    return PumpSpec{1.0, PumpRotation{phi}};
}

PumpSpec blocked()
{
    return PumpSpec{1.0, PumpBlocked{HalfPlane::positive}};
}

BiphotonAmplitude lazy(const PumpSpec& spec, std::size_t m = 8192, double b = 5e-3)
{
    return build_biphoton(prepare_pump(make_grid(m, 4), spec), b, Representation::lazy);
}

const double b_ratio = 5e-3;
const double eps = finite_kernel_epsilon(1, b_ratio);

void criterion_1()
{
    double worst = 0;
    for (double phi : {0.0, pi / 2, pi})
    {
        const auto bp = lazy(rotation(phi));
        const auto map = landscape(bp, AngleGrid{8, 0, 2 * pi}, IdealAnalyzer{});
        for (std::size_t i = 0; i < 8; ++i)
        {
            for (std::size_t j = 0; j < 8; ++j)
            {
                worst = std::max(worst, std::abs(map.at(i, j)
                                                 - predicted_correlation(map.theta1[i], map.theta2[j], phi)));
            }
        }
    }
    check("1a", worst <= 2e-2, fmt("max |E - cos(t1+t2+phi)| over 8x8 x 3 phi = %.3e (tol 2e-2)", worst));

    const auto bp = lazy(rotation(0));
    const double residual = std::abs(correlation(bp, 0, 0, IdealAnalyzer{}) - 1);
    check("1b", std::abs(residual - eps) <= 0.1 * eps,
          fmt("residual at t1=t2=0, phi=0 = %.3e vs eps = %.3e (tol 10%%)", residual, eps));
    const double deficit = std::abs(correlation(bp, pi / 2, pi / 2, IdealAnalyzer{}) + 1);
    info("1b", fmt("joint parity fixes E(0,0;0) = 1 exactly; residual at t1=t2=pi/2 = %.3e (%.1f%% of eps)",
                   deficit, 100 * deficit / eps));
}

void criterion_2()
{
    for (double phi : {0.0, pi / 2, pi})
    {
        const double b = chsh(lazy(rotation(phi)), optimal_settings(phi), IdealAnalyzer{});
        check("2", std::abs(b - tsirelson) <= 4 * eps,
              fmt("phi = %.4f: B = %.6f, |B - 2 sqrt 2| = %.3e", phi, b, std::abs(b - tsirelson))
                  + fmt(" (tol 4 eps = %.3e)", 4 * eps));
    }
}

void criterion_3()
{
    const auto bp = lazy(blocked());
    const auto map = landscape(bp, AngleGrid{16, 0, 2 * pi}, IdealAnalyzer{});
    double worst = 0;
    for (double e : map.values)
    {
        worst = std::max(worst, std::abs(e));
    }
    check("3a", worst <= 1e-6, fmt("blocked pump max |E| over 16x16 = %.3e (tol 1e-6)", worst));
    const double b = chsh_from_exact(chsh_correlations(bp, optimal_settings(0), IdealAnalyzer{})).b;
    check("3b", b <= 1e-5, fmt("blocked pump exact B = %.3e (tol 1e-5)", b));
}

void criterion_4()
{
    const double n = schmidt_number_analytic(1.1e-3, 405e-9, 1.5e-3).mode_count;
    check("4a", n >= 3.9e3 && n <= 4.1e3, fmt("analytic N(1.1 mm, 405 nm, 1.5 mm) = %.1f (range [3900, 4100])", n));

    const auto spectrum = [](std::size_t m) {
        return schmidt_decompose(build_biphoton(prepare_pump(make_grid(m, 4), rotation(0)), 0.1,
                                                Representation::dense));
    };
    const auto coarse = spectrum(512);
    const auto fine = spectrum(1024);
    const double target = 25.5;
    check("4b", std::abs(coarse.participation - target) <= 0.05 * target,
          fmt("K(w/b=10, M=512, x_max=4) = %.4f vs %.1f (tol 5%%)", coarse.participation, target));
    check("4c", std::abs(fine.participation - target) < std::abs(coarse.participation - target),
          fmt("|K - 25.5| under refinement: M=512 %.4f, M=1024 %.4f", std::abs(coarse.participation - target),
              std::abs(fine.participation - target)));
    const double k1d = 0.5 * (10 + 0.1);
    info("4b", fmt("1D double-Gaussian K = (r + 1/r)/2 = %.4f; numerical K at M=512 %.4f, M=1024 %.4f", k1d,
                   coarse.participation, fine.participation));
    info("4b", fmt("K^2 (separable x/y transverse count) at M=512 %.3f, M=1024 %.3f vs 25.5025",
                   coarse.transverse_2d_participation(), fine.transverse_2d_participation()));
    info("4b", fmt("threshold counts at M=1024: eigenvalue basis %.0f, amplitude basis %.0f",
                   static_cast<double>(fine.threshold_count),
                   static_cast<double>(fine.count_above(0.01, ThresholdBasis::amplitude))));
}

void criterion_5()
{
    for (double phi : {0.0, pi / 4, pi / 2, 3 * pi / 4, pi})
    {
        const double c = concurrence(project_parity_tomography(lazy(rotation(phi))));
        check("5a", c >= 0.99, fmt("phi = %.4f: concurrence = %.6f (min 0.99)", phi, c));
    }
    const double c = concurrence(project_parity_tomography(lazy(blocked())));
    check("5b", c <= 0.01, fmt("blocked pump concurrence = %.3e (max 0.01)", c));
}

void criterion_6()
{
    RunConfig cfg;
    cfg.model = VisibilityAnalyzer{0.845};
    cfg.pairs_per_setting = 1e4;
    const auto bp = lazy(rotation(0));
    const auto settings = optimal_settings(0);
    const auto probs = chsh_probabilities(bp, settings, cfg.model);
    double sum_b = 0, sum_sigma = 0, min_n = 1e300;
    const int runs = 200;
    for (int s = 0; s < runs; ++s)
    {
        cfg.seed = static_cast<std::uint64_t>(s);
        const auto est = estimate_chsh(simulate_chsh_counts(probs, settings, bp.flux_factor(), cfg));
        sum_b += est.b;
        sum_sigma += est.sigma_b;
        min_n = std::min(min_n, est.n_sigma);
    }
    const double mean_b = sum_b / runs, mean_sigma = sum_sigma / runs;
    check("6a", mean_b >= 2.37 && mean_b <= 2.41, fmt("mean B over 200 seeds = %.4f (range [2.37, 2.41])", mean_b));
    check("6b", mean_sigma >= 0.013 && mean_sigma <= 0.020,
          fmt("mean sigma_B = %.4f (range [0.013, 0.020])", mean_sigma));
    check("6c", min_n >= 15, fmt("min n_sigma = %.2f (min 15)", min_n));
}

void criterion_7()
{
    RunConfig cfg;
    cfg.model = VisibilityAnalyzer{0.84};
    cfg.pairs_per_setting = 1e4;
    cfg.seed = 1;
    const AngleGrid theta1{32, 0, 2 * pi};
    const double theta2 = pi / 8;
    const auto fit0 = fit_sinusoid(slice_scan(lazy(rotation(0)), theta2, theta1, cfg));
    check("7a", std::abs(fit0.visibility - 0.84) <= 0.02,
          fmt("phi = 0 slice visibility = %.4f +- %.4f (0.84 +- 0.02)", fit0.visibility, fit0.sigma_visibility));
    for (double phi : {pi / 2, pi})
    {
        const auto fit = fit_sinusoid(slice_scan(lazy(rotation(phi)), theta2, theta1, cfg));
        const double shift = wrap_angle(fit.phase - fit0.phase);
        const double tol = 3 * std::hypot(fit.sigma_phase, fit0.sigma_phase);
        const double off = std::abs(wrap_angle(shift - phi + pi) - pi);
        check("7b", off <= tol,
              fmt("phi = %.4f: fringe shift = %.4f, |shift - phi| = %.2e", phi, shift, off) + fmt(" (3 sigma = %.2e)", tol));
        const double dv = std::abs(fit.visibility - fit0.visibility);
        const double vtol = 3 * std::hypot(fit.sigma_visibility, fit0.sigma_visibility);
        check("7c", dv <= vtol, fmt("phi = %.4f: visibility %.4f vs phi = 0, diff %.2e", phi, fit.visibility, dv)
                                    + fmt(" (3 sigma = %.2e)", vtol));
    }
}

void criterion_8()
{
    // Field-core invariants on random fields
    const auto grid = make_grid(1024, 4);
    std::mt19937_64 gen(8);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> angle(0, 2 * pi);
    double unitarity = 0, orthogonality = 0, anticommute = 0;
    bool permutation = true, reconstruction = true;
    for (int n = 0; n < 50; ++n)
    {
        std::vector<Complex> values(grid.size());
        for (auto& v : values)
        {
            v = {normal(gen), normal(gen)};
        }
        const auto f = normalized(SampledField(grid, values));
        const double theta = angle(gen);
        unitarity = std::max({unitarity, std::abs(apply_phase_plate(f, theta).norm_squared() - 1),
                              std::abs(spatial_flip(f).norm_squared() - 1)});
        const auto parts = parity_split(f);
        orthogonality = std::max(orthogonality, std::abs(inner_product(parts.even, parts.odd)));
        const auto flipped = spatial_flip(f);
        const auto lhs = spatial_flip(apply_phase_plate(f, theta));
        const auto rhs = apply_phase_plate(flipped, -theta);
        for (std::size_t k = 0; k < grid.size(); ++k)
        {
            permutation = permutation && flipped[k] == f[grid.mirror(k)];
            anticommute = std::max(anticommute, std::abs(lhs[k] - rhs[k]));
            const double pair = std::max(std::abs(f[k]), std::abs(f[grid.mirror(k)]));
            reconstruction = reconstruction
                             && std::abs(parts.even[k] + parts.odd[k] - f[k]) <= 2 * pair * 0x1p-52;
        }
    }
    check("8a", unitarity <= 1e-14, fmt("phase plate / flip unitarity max deviation = %.2e (tol 1e-14)", unitarity));
    check("8a", orthogonality <= 1e-13, fmt("parity split |<even,odd>| max = %.2e (tol 1e-13)", orthogonality));
    check("8a", permutation && anticommute == 0.0,
          fmt("flip is a bit-exact permutation; flip/phase-plate anticommutator max = %.2e", anticommute));
    check("8a", reconstruction, "parity split reconstructs the input sample-wise within 2 ulp");

    // Tsirelson bound
    const auto bp = lazy(rotation(0.7), 4096, 0.01);
    double worst = 0;
    for (int n = 0; n < 200; ++n)
    {
        const auto s = MeasurementSettings::make(angle(gen), angle(gen), angle(gen), angle(gen));
        worst = std::max(worst, chsh(bp, s, IdealAnalyzer{}));
    }
    check("8b", worst <= tsirelson + 1e-6, fmt("max B over 200 random settings = %.6f (bound %.6f)", worst, tsirelson + 1e-6));

    // Estimator coverage
    RunConfig cfg;
    cfg.model = VisibilityAnalyzer{0.845};
    const auto phi0 = lazy(rotation(0));
    const auto settings = optimal_settings(0);
    const auto probs = chsh_probabilities(phi0, settings, cfg.model);
    const double exact = chsh_from_exact(chsh_correlations(phi0, settings, cfg.model)).b;
    int covered = 0;
    for (int s = 0; s < 500; ++s)
    {
        cfg.seed = static_cast<std::uint64_t>(1000 + s);
        const auto est = estimate_chsh(simulate_chsh_counts(probs, settings, 1.0, cfg));
        covered += std::abs(est.b - exact) <= 2 * est.sigma_b ? 1 : 0;
    }
    check("8c", covered >= 460, fmt("B +- 2 sigma_B covers exact B in %.1f%% of 500 runs (min 92%%)", covered / 5.0));

    // Determinism of the experiment subcommand
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "1", "2", "4"})
    {
        std::ostringstream out, err;
        cmd_dispatch({"experiment", "--phi", "0", "--visibility", "0.845", "--seed", "7", "--M", "8192",
                      "--threads", threads},
                     out, err);
        outputs.push_back(out.str());
    }
    const bool identical = !outputs[0].empty()
                           && std::all_of(outputs.begin(), outputs.end(),
                                          [&](const std::string& o) { return o == outputs[0]; });
    check("8d", identical, "experiment output byte-identical across repeated runs and 1/2/4 threads");
}
}  // namespace

int main(int argc, char** argv)
{
    const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                      criterion_5, criterion_6, criterion_7, criterion_8};
    if (argc > 1)
    {
        const int id = std::atoi(argv[1]);
        if (id < 1 || id > static_cast<int>(criteria.size()))
        {
            std::fprintf(stderr, "usage: %s [1-8]\n", argv[0]);
            return 2;
        }
        criteria[static_cast<std::size_t>(id - 1)]();
    }
    else
    {
        for (const auto& c : criteria)
        {
            c();
        }
    }
    return failures == 0 ? 0 : 1;
}
