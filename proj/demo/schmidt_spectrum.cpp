// Schmidt spectrum versus kernel width, with the Gaussian closed forms.
#include <cstdio>

#include "parity_bell/biphoton.hpp"

using namespace parity_bell;

int main()
{
    const auto grid = make_grid(1024, 4);
    const auto pump = prepare_pump(grid, PumpSpec{});
    std::printf("%6s %10s %10s %10s %10s\n", "w/b", "K", "(r+1/r)/2", "K^2", "count");
    for (double r : {1.0, 2.0, 5.0, 10.0, 20.0})
    {
        const auto spectrum = schmidt_decompose(build_biphoton(pump, 1 / r, Representation::dense));
        std::printf("%6.1f %10.4f %10.4f %10.3f %10zu\n", r, spectrum.participation, 0.5 * (r + 1 / r),
                    spectrum.transverse_2d_participation(), spectrum.threshold_count);
    }
    const auto paper = schmidt_number_analytic(1.1e-3, 405e-9, 1.5e-3);
    std::printf("closed form at w = 1.1 mm, lambda_p = 405 nm, ell = 1.5 mm: N = %.0f (b = %.2f um)\n",
                paper.mode_count, paper.kernel_width * 1e6);
    return 0;
}
