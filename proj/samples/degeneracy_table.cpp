// Lowest-lying degeneracies of the single- and double-ancilla l0 gadgets.
#include <cstdio>

#include <efpqubo/encoding.hpp>

int main() {
  using namespace efpqubo;
  for (Scheme s : {Scheme::l0_single, Scheme::l0_double})
    for (int m = 1; m <= 3; ++m) {
      const auto prof = degeneracy_profile(BitLayout::powers_of_two(s, 1, 0, m - 1));
      const auto [p0, n0] = lowest_level(prof, 0.0);
      const auto [p1, n1] = lowest_level(prof, 1.0);
      std::printf("%-9s M=%d  c=0: penalty %g x%llu   c=1: penalty %g x%llu\n", to_string(s).c_str(), m, p0,
                  static_cast<unsigned long long>(n0), p1, static_cast<unsigned long long>(n1));
    }
}
