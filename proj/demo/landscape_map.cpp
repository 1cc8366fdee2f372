// Correlation landscape E(theta1, theta2) for a chosen pump angle, as CSV.
#include <cstdlib>
#include <iostream>

#include "parity_bell/io.hpp"

using namespace parity_bell;

int main(int argc, char** argv)
{
    const double phi = argc > 1 ? std::atof(argv[1]) : 0.0;
    const auto pump = prepare_pump(make_grid(8192, 4), PumpSpec{1, PumpRotation{phi}});
    const auto bp = build_biphoton(pump, 5e-3, Representation::lazy);
    std::cout << landscape_csv(landscape(bp, AngleGrid{24, 0, two_pi}, IdealAnalyzer{}));
    return 0;
}
