// Writes a rough-Heston quote lattice (six maturities, five strikes each,
// moneyness widening with maturity) to stdout or to the file given as the
// first argument.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "roughlv/fourier.hpp"
#include "roughlv/volsurface.hpp"

using namespace roughlv;

int main(int argc, char** argv) {
    const ModelParams p = reference_params();
    QuoteLattice q;
    q.maturities = {1.0 / 12.0, 0.25, 0.5, 0.75, 1.25, 2.25};
    q.strikes = {{0.97, 0.99, 1.0, 1.01, 1.02}, {0.94, 0.97, 1.0, 1.02, 1.04}, {0.92, 0.97, 1.0, 1.03, 1.06},
                 {0.90, 0.96, 1.0, 1.03, 1.07}, {0.87, 0.94, 1.0, 1.05, 1.10}, {0.85, 0.93, 1.0, 1.07, 1.13}};
    for (std::size_t i = 0; i < q.maturities.size(); ++i) {
        const auto calls = rough_heston_call_prices(q.maturities[i], q.strikes[i], p);
        q.vols.push_back(lattice_implied_vols({q.maturities[i]}, {q.strikes[i]}, {calls})[0]);
    }
    if (argc > 1) {
        std::ofstream out(argv[1]);
        write_quotes(out, q);
        std::printf("wrote %zu quotes to %s\n", q.quote_count(), argv[1]);
    } else {
        write_quotes(std::cout, q);
    }
}
