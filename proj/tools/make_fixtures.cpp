// Regenerates the bundled example datasets byte-for-byte. Usage:
//   make_fixtures <output-directory>
#include <iostream>
#include <string>

#include "lrsm/io.hpp"
#include "lrsm/simharness.hpp"
#include "lrsm/weights.hpp"

using namespace lrsm;

namespace {

struct FixtureSpec {
  std::string name;
  DgpKind dgp;
  Index n;
  double dependence, tau2;
  std::uint64_t seed;
  bool edges;  // also emit the adjacency as an edge list
};

void write_fixture(const std::string& dir, const FixtureSpec& spec) {
  Scenario sc;
  sc.id = spec.name;
  sc.dgp = spec.dgp;
  sc.n = spec.n;
  sc.seed = spec.seed;
  const DgpDraw d = generate_dgp(sc, spec.dependence, spec.tau2, 0);

  std::string data = "y,x1,x2\n";
  for (Index i = 0; i < spec.n; ++i)
    data += format_double(d.data.y[i]) + "," + format_double(d.data.x(i, 1)) +
            "," + format_double(d.data.x(i, 2)) + "\n";
  atomic_write(dir + "/" + spec.name + ".csv", data);

  std::string coords = "x,y\n";
  for (Index i = 0; i < spec.n; ++i)
    coords += format_double(d.coords(i, 0)) + "," +
              format_double(d.coords(i, 1)) + "\n";
  atomic_write(dir + "/" + spec.name + "_coords.csv", coords);

  if (spec.edges) {
    std::string out = "# undirected Delaunay adjacency, 0-based\n";
    for (const auto& [i, j] : delaunay_edges(d.coords))
      out += std::to_string(i) + " " + std::to_string(j) + " 1\n";
    atomic_write(dir + "/" + spec.name + "_edges.txt", out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <output-directory>" << std::endl;
    return 2;
  }
  const std::string dir = argv[1];
  try {
    write_fixture(dir, {"error_n50", DgpKind::ErrorNoise, 50, 0.6, 1.0, 4101,
                        true});
    write_fixture(dir, {"lag_n200", DgpKind::LagNoise, 200, 0.6, 2.0, 4202,
                        false});
    write_fixture(dir, {"lag_n500", DgpKind::LagNoise, 500, 0.8, 0.0, 4503,
                        false});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  std::cout << "fixtures written to " << dir << std::endl;
  return 0;
}
