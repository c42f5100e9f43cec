// Recover lambda^(2) = 1/2 * dumbbell from 100 synthetic jets.
#include <cstdio>

#include <efpqubo/efpqubo.hpp>

int main() {
  using namespace efpqubo;
  const auto rel = find_relation('a');
  const auto dm = design_matrix(generate_events(GeneratorConfig{}), rel);
  const auto layout = BitLayout::powers_of_two(Scheme::l0_double, dm.X.cols());
  const auto q = assemble(dm.X, dm.y, layout, 0.01);
  const auto r = population_anneal(q, Schedule{10, 1e10, 2048}, 256, 1, 42);
  const auto c = decode(r.bits, layout);
  for (std::size_t a = 0; a < c.size(); ++a) std::printf("%-16s %g\n", dm.names[a].c_str(), c[a]);
  std::printf("loss %.6g\n", r.energy);
}
