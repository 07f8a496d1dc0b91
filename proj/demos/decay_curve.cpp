// Prints the exact decay curves of the first three higher-point correlators
// for a short chain, together with the quadruple trace they compose into.

#include <cstdio>

#include "otoc/dynamics.hpp"
#include "otoc/exact_otoc.hpp"

using namespace otoc;

int main() {
  const int n = 4;
  HamiltonianSpectrum spec = ising_spectrum(n, IsingParams::defaults());
  PauliString w = PauliString::single(n, 1, 'Z');
  PauliString v = PauliString::single(n, n, 'Z');
  std::printf("%8s %12s %12s %12s %12s\n", "t", "C4", "C8", "C12", "L8");
  for (double t = 0.0; t <= 6.0 + 1e-9; t += 0.5) {
    double c4 = otoc_4k(spec, t, w, v, 1).real();
    double c8 = otoc_4k(spec, t, w, v, 2).real();
    double c12 = otoc_4k(spec, t, w, v, 3).real();
    double l8 = leading_term_L8(n, spec, t);
    std::printf("%8.2f %12.6f %12.6f %12.6f %12.6f\n", t, c4, c8, c12, l8);
  }
  return 0;
}
