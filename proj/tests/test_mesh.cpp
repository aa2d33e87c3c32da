#include <catch2/catch_amalgamated.hpp>

#include "dgnet/mesh.hpp"

#include <fstream>
#include <sstream>

using namespace dgnet;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Unit square split along the diagonal (0,0)-(1,1); all sides tagged.
const char* kSquareJson = R"({
  "schema": "mesh/1", "dim": 2,
  "vertices": [[0,0],[1,0],[1,1],[0,1]],
  "elements": [[0,1,2],[0,2,3]],
  "boundary": [
    {"vertices":[0,1],"tag":"bottom"}, {"vertices":[1,2],"tag":"right"},
    {"vertices":[2,3],"tag":"top"},    {"vertices":[3,0],"tag":"left"}]
})";

}  // namespace

TEST_CASE("uniform 1D spec produces K equal segments", "[mesh]") {
  const Mesh m = parse_mesh("0 1 250", "uniform-1d");
  CHECK(m.dim == 1);
  CHECK(m.K() == 250);
  CHECK(m.n_vertices() == 251);
  CHECK(m.vertices(0, 0) == Catch::Approx(0.0));
  CHECK(m.vertices(250, 0) == Catch::Approx(1.0));
  const double h = m.vertices(1, 0) - m.vertices(0, 0);
  CHECK(h == Catch::Approx(1.0 / 250).epsilon(1e-14));
  REQUIRE(m.boundary.size() == 2);
  CHECK(m.boundary[0].tag == "left");
  CHECK(m.boundary[1].tag == "right");
}

TEST_CASE("internal JSON unit square parses with canonical orientation", "[mesh]") {
  const Mesh m = parse_mesh(kSquareJson, "internal-json");
  CHECK(m.K() == 2);
  CHECK(m.n_vertices() == 4);
  // A deliberately clockwise element gets reordered to positive area.
  std::string cw = kSquareJson;
  const auto pos = cw.find("[0,1,2]");
  REQUIRE(pos != std::string::npos);
  cw.replace(pos, 7, "[0,2,1]");
  const Mesh m2 = parse_mesh(cw, "internal-json");
  const Connectivity c2 = build_connectivity(m2);  // would throw on broken orientation
  CHECK(c2.interior.size() == 1);
  CHECK(geometric_factors(m2).detJ.minCoeff() > 0.0);
}

TEST_CASE("gmsh v2.2 fixture parses elements, nodes and physical tags", "[mesh]") {
  const Mesh m = parse_mesh(read_file(std::string(DGNET_FIXTURE_DIR) + "/square.msh"), "gmsh-ascii-v2");
  CHECK(m.dim == 2);
  CHECK(m.K() == 2);
  CHECK(m.n_vertices() == 4);
  REQUIRE(m.boundary.size() == 4);
  CHECK(m.boundary[0].tag == "bottom");
  CHECK(m.boundary[3].tag == "left");
  const Connectivity c = build_connectivity(m);
  CHECK(c.interior.size() == 1);
  CHECK(c.boundary.size() == 4);
}

TEST_CASE("gmsh parser rejects unsupported element types", "[mesh]") {
  const std::string quad =
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n"
      "$Elements\n1\n1 3 2 0 1 1 2 3 4\n$EndElements\n";
  CHECK_THROWS_WITH(parse_mesh(quad, "gmsh-ascii-v2"), Catch::Matchers::ContainsSubstring("unsupported element type"));
}

TEST_CASE("connectivity counts interior and boundary faces", "[mesh]") {
  const Mesh sq = parse_mesh(kSquareJson, "internal-json");
  const Connectivity c = build_connectivity(sq);
  CHECK(c.interior.size() == 1);
  CHECK(c.boundary.size() == 4);
  CHECK(c.dual_edge_count() == 1);
  // The shared diagonal is traversed in opposite directions by the two CCW triangles.
  CHECK(c.interior[0].reversed);

  const Mesh line = parse_mesh("0 1 3", "uniform-1d");
  const Connectivity cl = build_connectivity(line);
  CHECK(cl.interior.size() == 2);
  CHECK(cl.boundary.size() == 2);
}

TEST_CASE("non-conforming input is rejected", "[mesh]") {
  // Duplicated element: its faces are now shared by three element sides.
  Mesh m = parse_mesh(kSquareJson, "internal-json");
  MatrixXi e(3, 3);
  e << m.elements, m.elements.row(0);
  m.elements = e;
  CHECK_THROWS_WITH(build_connectivity(m), Catch::Matchers::ContainsSubstring("face shared by 3 elements"));

  // Untagged boundary face.
  Mesh m2 = parse_mesh(kSquareJson, "internal-json");
  m2.boundary.pop_back();
  CHECK_THROWS_WITH(build_connectivity(m2), Catch::Matchers::ContainsSubstring("missing tag"));
}

TEST_CASE("geometric factors of the unit right triangle", "[mesh]") {
  const Mesh m = parse_mesh(R"({"schema":"mesh/1","dim":2,
    "vertices":[[0,0],[1,0],[0,1]],"elements":[[0,1,2]],
    "boundary":[{"vertices":[0,1],"tag":"b"},{"vertices":[1,2],"tag":"h"},{"vertices":[2,0],"tag":"l"}]})",
                            "internal-json");
  const ElementGeometry g = geometric_factors(m);
  // Reference triangle area is 2, so det(J) = area/2 = 1/4.
  CHECK(g.detJ(0) == Catch::Approx(0.25).epsilon(1e-14));
  // Hypotenuse (face 1) outward normal.
  CHECK(g.normal(g.face_index(0, 1), 0) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));
  CHECK(g.normal(g.face_index(0, 1), 1) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));
  // Unit normals and the closed-surface identity sum n*len = 0.
  double sx = 0, sy = 0;
  for (int f = 0; f < 3; ++f) {
    const int fi = g.face_index(0, f);
    CHECK(std::hypot(g.normal(fi, 0), g.normal(fi, 1)) == Catch::Approx(1.0).epsilon(1e-12));
    sx += g.normal(fi, 0) * 2.0 * g.sJ(fi);
    sy += g.normal(fi, 1) * 2.0 * g.sJ(fi);
  }
  CHECK(std::abs(sx) < 1e-12);
  CHECK(std::abs(sy) < 1e-12);
}

TEST_CASE("1D geometric factors give endpoint normals -1 and +1", "[mesh]") {
  const Mesh m = parse_mesh("0 0.004 1", "uniform-1d");
  const ElementGeometry g = geometric_factors(m);
  CHECK(g.normal(g.face_index(0, 0), 0) == -1.0);
  CHECK(g.normal(g.face_index(0, 1), 0) == 1.0);
  CHECK(g.detJ(0) == Catch::Approx(0.002).epsilon(1e-14));
}

TEST_CASE("interior faces of a structured mesh have opposite normals", "[mesh]") {
  const Mesh m = center_split_quad_mesh(0, 1, 0, 1, 3, 2);
  CHECK(m.K() == 4 * 3 * 2);
  const Connectivity c = build_connectivity(m);
  const ElementGeometry g = geometric_factors(m);
  for (const auto& f : c.interior) {
    const int a = g.face_index(f.k, f.ke), b = g.face_index(f.n, f.ne);
    CHECK(std::abs(g.normal(a, 0) + g.normal(b, 0)) < 1e-12);
    CHECK(std::abs(g.normal(a, 1) + g.normal(b, 1)) < 1e-12);
    CHECK(g.sJ(a) == Catch::Approx(g.sJ(b)).epsilon(1e-13));
  }
  // Closed-surface identity on every element.
  for (int k = 0; k < m.K(); ++k) {
    double sx = 0, sy = 0;
    for (int f = 0; f < 3; ++f) {
      sx += g.normal(g.face_index(k, f), 0) * g.sJ(g.face_index(k, f));
      sy += g.normal(g.face_index(k, f), 1) * g.sJ(g.face_index(k, f));
    }
    CHECK(std::abs(sx) < 1e-12);
    CHECK(std::abs(sy) < 1e-12);
  }
  // Dual-graph degree equals the number of interior faces per element.
  std::vector<int> deg(std::size_t(m.K()), 0);
  for (const auto& f : c.interior) {
    ++deg[std::size_t(f.k)];
    ++deg[std::size_t(f.n)];
  }
  for (int k = 0; k < m.K(); ++k) CHECK(deg[std::size_t(k)] >= 1);
  CHECK(c.vertex_elements[std::size_t(m.elements(0, 2))].size() == 4);  // each center joins 4 triangles
}

TEST_CASE("degenerate elements are rejected", "[mesh]") {
  CHECK_THROWS_AS(parse_mesh(R"({"schema":"mesh/1","dim":2,
    "vertices":[[0,0],[1,0],[2,0]],"elements":[[0,1,2]],"boundary":[]})",
                             "internal-json"),
                  ParseError);
}
