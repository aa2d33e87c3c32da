// Mesh ingestion and topology: parsers (uniform 1D spec, internal JSON
// "mesh/1", Gmsh ASCII v2.2 subset), element/face connectivity with the
// neighbor map, boundary tags, and per-element affine geometric factors.
//
// Local face convention: 1D face 0/1 = left/right vertex; 2D triangle face i
// runs from vertex i to vertex (i+1)%3, counterclockwise. Triangles are
// reordered counterclockwise at parse time so det(J) > 0 everywhere.
#pragma once

#include "dgnet/common.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dgnet {

struct Mesh {
  int dim = 0;
  MatrixXd vertices;  // n_vertices x dim
  MatrixXi elements;  // K x (dim+1), vertex indices
  struct TaggedFace {
    std::array<int, 2> v;  // vertex ids; v[1] = -1 in 1D
    std::string tag;
  };
  std::vector<TaggedFace> boundary;

  int K() const { return int(elements.rows()); }
  int n_vertices() const { return int(vertices.rows()); }
  int n_local_faces() const { return dim == 1 ? 2 : 3; }
  double scale() const {
    if (vertices.rows() == 0) return 1.0;
    const VectorXd ext = vertices.colwise().maxCoeff() - vertices.colwise().minCoeff();
    return std::max(ext.maxCoeff(), 1e-300);
  }
  // Vertex ids of local face `f` of element `k`, in traversal order.
  std::array<int, 2> face_vertices(int k, int f) const {
    if (dim == 1) return {elements(k, f), -1};
    return {elements(k, f), elements(k, (f + 1) % 3)};
  }
};

namespace detail {

inline double tri_signed_area2(const Mesh& m, int k) {
  const auto& e = m.elements;
  const double x0 = m.vertices(e(k, 0), 0), y0 = m.vertices(e(k, 0), 1);
  const double x1 = m.vertices(e(k, 1), 0), y1 = m.vertices(e(k, 1), 1);
  const double x2 = m.vertices(e(k, 2), 0), y2 = m.vertices(e(k, 2), 1);
  return (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
}

inline void canonicalize_and_check(Mesh& m) {
  const double tol = 1e-14 * m.scale() * m.scale();
  for (int k = 0; k < m.K(); ++k) {
    for (int j = 0; j <= m.dim; ++j)
      if (m.elements(k, j) < 0 || m.elements(k, j) >= m.n_vertices())
        throw ParseError("element " + std::to_string(k) + " references invalid vertex " +
                         std::to_string(m.elements(k, j)));
    if (m.dim == 2) {
      double a2 = tri_signed_area2(m, k);
      if (a2 < 0) {  // reorder counterclockwise
        std::swap(m.elements(k, 1), m.elements(k, 2));
        a2 = -a2;
      }
      if (a2 <= tol) throw ParseError("degenerate (zero-area) element " + std::to_string(k));
    } else {
      const double h = m.vertices(m.elements(k, 1), 0) - m.vertices(m.elements(k, 0), 0);
      if (h < 0) std::swap(m.elements(k, 0), m.elements(k, 1));
      if (std::abs(h) <= 1e-14 * m.scale())
        throw ParseError("degenerate (zero-length) element " + std::to_string(k));
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsers and generators.
// ---------------------------------------------------------------------------

inline Mesh uniform_1d_mesh(double x0, double x1, int K, const std::string& tag_left = "left",
                            const std::string& tag_right = "right") {
  if (!(x1 > x0) || K < 1) throw ConfigError("uniform_1d_mesh: need x1 > x0 and K >= 1");
  Mesh m;
  m.dim = 1;
  m.vertices.resize(K + 1, 1);
  for (int i = 0; i <= K; ++i) m.vertices(i, 0) = x0 + (x1 - x0) * double(i) / K;
  m.elements.resize(K, 2);
  for (int k = 0; k < K; ++k) {
    m.elements(k, 0) = k;
    m.elements(k, 1) = k + 1;
  }
  m.boundary.push_back({{0, -1}, tag_left});
  m.boundary.push_back({{K, -1}, tag_right});
  return m;
}

// Structured triangulation of [x0,x1]x[y0,y1]: nx-by-ny square cells, each
// split into four triangles through the cell center. Sides are tagged
// left/right/bottom/top.
inline Mesh center_split_quad_mesh(double x0, double x1, double y0, double y1, int nx, int ny) {
  if (nx < 1 || ny < 1 || !(x1 > x0) || !(y1 > y0)) throw ConfigError("center_split_quad_mesh: bad extents");
  Mesh m;
  m.dim = 2;
  const int nvx = nx + 1, nvy = ny + 1;
  m.vertices.resize(nvx * nvy + nx * ny, 2);
  auto grid = [&](int i, int j) { return j * nvx + i; };
  for (int j = 0; j < nvy; ++j)
    for (int i = 0; i < nvx; ++i) {
      m.vertices(grid(i, j), 0) = x0 + (x1 - x0) * double(i) / nx;
      m.vertices(grid(i, j), 1) = y0 + (y1 - y0) * double(j) / ny;
    }
  auto center = [&](int i, int j) { return nvx * nvy + j * nx + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      m.vertices(center(i, j), 0) = x0 + (x1 - x0) * (i + 0.5) / nx;
      m.vertices(center(i, j), 1) = y0 + (y1 - y0) * (j + 0.5) / ny;
    }
  m.elements.resize(4 * nx * ny, 3);
  int k = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int bl = grid(i, j), br = grid(i + 1, j), tr = grid(i + 1, j + 1), tl = grid(i, j + 1);
      const int c = center(i, j);
      m.elements.row(k++) << bl, br, c;
      m.elements.row(k++) << br, tr, c;
      m.elements.row(k++) << tr, tl, c;
      m.elements.row(k++) << tl, bl, c;
    }
  for (int i = 0; i < nx; ++i) {
    m.boundary.push_back({{grid(i, 0), grid(i + 1, 0)}, "bottom"});
    m.boundary.push_back({{grid(i, ny), grid(i + 1, ny)}, "top"});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary.push_back({{grid(0, j), grid(0, j + 1)}, "left"});
    m.boundary.push_back({{grid(nx, j), grid(nx, j + 1)}, "right"});
  }
  detail::canonicalize_and_check(m);
  return m;
}

inline Mesh parse_mesh_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("mesh json: ") + e.what(), long(e.byte));
  }
  if (!j.contains("schema") || j["schema"] != "mesh/1") throw ParseError("mesh json: missing schema \"mesh/1\"");
  Mesh m;
  m.dim = j.at("dim").get<int>();
  if (m.dim != 1 && m.dim != 2) throw ParseError("mesh json: dim must be 1 or 2");
  const auto& jv = j.at("vertices");
  m.vertices.resize(Eigen::Index(jv.size()), m.dim);
  for (Eigen::Index i = 0; i < m.vertices.rows(); ++i) {
    const auto& row = jv[size_t(i)];
    if (row.is_number()) {
      if (m.dim != 1) throw ParseError("mesh json: scalar vertex in 2D mesh");
      m.vertices(i, 0) = row.get<double>();
    } else {
      if (int(row.size()) != m.dim) throw ParseError("mesh json: vertex arity mismatch");
      for (int dcol = 0; dcol < m.dim; ++dcol) m.vertices(i, dcol) = row[size_t(dcol)].get<double>();
    }
  }
  const auto& je = j.at("elements");
  m.elements.resize(Eigen::Index(je.size()), m.dim + 1);
  for (Eigen::Index k = 0; k < m.elements.rows(); ++k) {
    const auto& row = je[size_t(k)];
    if (int(row.size()) != m.dim + 1) throw ParseError("mesh json: element arity mismatch");
    for (int c = 0; c <= m.dim; ++c) m.elements(k, c) = row[size_t(c)].get<int>();
  }
  if (j.contains("boundary"))
    for (const auto& b : j["boundary"]) {
      const auto& vv = b.at("vertices");
      Mesh::TaggedFace f;
      f.v = {vv[0].get<int>(), m.dim == 2 ? vv[1].get<int>() : -1};
      f.tag = b.at("tag").get<std::string>();
      m.boundary.push_back(f);
    }
  detail::canonicalize_and_check(m);
  return m;
}

// Gmsh ASCII v2.2 subset: 3-node triangles plus 2-node boundary lines carrying
// physical tags. Anything else (quads, second order, ...) is rejected.
inline Mesh parse_mesh_gmsh(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  std::map<int, std::string> physical_names;
  std::map<int, int> node_remap;
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> tris;
  std::vector<std::pair<std::array<int, 2>, int>> blines;  // vertices (gmsh ids), physical id
  bool saw_format = false;

  while (next_line()) {
    if (line == "$MeshFormat") {
      if (!next_line()) throw ParseError("gmsh: truncated $MeshFormat", line_no);
      std::istringstream ls(line);
      double version = 0;
      ls >> version;
      if (!(version >= 2.0 && version < 3.0)) throw ParseError("gmsh: unsupported format version " + line, line_no);
      saw_format = true;
      if (!next_line() || line != "$EndMeshFormat") throw ParseError("gmsh: missing $EndMeshFormat", line_no);
    } else if (line == "$PhysicalNames") {
      if (!next_line()) throw ParseError("gmsh: truncated $PhysicalNames", line_no);
      const int n = std::stoi(line);
      for (int i = 0; i < n; ++i) {
        if (!next_line()) throw ParseError("gmsh: truncated $PhysicalNames", line_no);
        std::istringstream ls(line);
        int pdim = 0, pid = 0;
        std::string name;
        ls >> pdim >> pid;
        std::getline(ls, name);
        const auto a = name.find('"'), b = name.rfind('"');
        if (a == std::string::npos || b <= a) throw ParseError("gmsh: malformed physical name", line_no);
        physical_names[pid] = name.substr(a + 1, b - a - 1);
      }
      if (!next_line() || line != "$EndPhysicalNames") throw ParseError("gmsh: missing $EndPhysicalNames", line_no);
    } else if (line == "$Nodes") {
      if (!next_line()) throw ParseError("gmsh: truncated $Nodes", line_no);
      const long n = std::stol(line);
      for (long i = 0; i < n; ++i) {
        if (!next_line()) throw ParseError("gmsh: truncated $Nodes", line_no);
        std::istringstream ls(line);
        int id;
        double x, y, z;
        if (!(ls >> id >> x >> y >> z)) throw ParseError("gmsh: malformed node line", line_no);
        node_remap[id] = int(nodes.size());
        nodes.push_back({x, y});
      }
      if (!next_line() || line != "$EndNodes") throw ParseError("gmsh: missing $EndNodes", line_no);
    } else if (line == "$Elements") {
      if (!next_line()) throw ParseError("gmsh: truncated $Elements", line_no);
      const long n = std::stol(line);
      for (long i = 0; i < n; ++i) {
        if (!next_line()) throw ParseError("gmsh: truncated $Elements", line_no);
        std::istringstream ls(line);
        int id, type, ntags;
        if (!(ls >> id >> type >> ntags)) throw ParseError("gmsh: malformed element line", line_no);
        std::vector<int> tags(ntags);
        for (int t = 0; t < ntags; ++t) ls >> tags[t];
        if (type == 15) continue;  // isolated point
        if (type == 1) {
          int a, b;
          if (!(ls >> a >> b)) throw ParseError("gmsh: malformed line element", line_no);
          blines.push_back({{a, b}, ntags > 0 ? tags[0] : -1});
        } else if (type == 2) {
          int a, b, c;
          if (!(ls >> a >> b >> c)) throw ParseError("gmsh: malformed triangle element", line_no);
          tris.push_back({a, b, c});
        } else {
          throw ParseError("gmsh: unsupported element type " + std::to_string(type), line_no);
        }
      }
      if (!next_line() || line != "$EndElements") throw ParseError("gmsh: missing $EndElements", line_no);
    } else if (!line.empty() && line[0] == '$') {
      // Skip unknown sections wholesale.
      const std::string end = "$End" + line.substr(1);
      while (next_line() && line != end) {
      }
    }
  }
  if (!saw_format) throw ParseError("gmsh: missing $MeshFormat section");
  if (tris.empty()) throw ParseError("gmsh: no triangles found");

  Mesh m;
  m.dim = 2;
  m.vertices.resize(Eigen::Index(nodes.size()), 2);
  for (size_t i = 0; i < nodes.size(); ++i) {
    m.vertices(Eigen::Index(i), 0) = nodes[i][0];
    m.vertices(Eigen::Index(i), 1) = nodes[i][1];
  }
  auto remap = [&](int gmsh_id) {
    const auto it = node_remap.find(gmsh_id);
    if (it == node_remap.end()) throw ParseError("gmsh: element references unknown node " + std::to_string(gmsh_id));
    return it->second;
  };
  m.elements.resize(Eigen::Index(tris.size()), 3);
  for (size_t k = 0; k < tris.size(); ++k)
    for (int c = 0; c < 3; ++c) m.elements(Eigen::Index(k), c) = remap(tris[k][c]);
  for (const auto& [verts, pid] : blines) {
    Mesh::TaggedFace f;
    f.v = {remap(verts[0]), remap(verts[1])};
    f.tag = physical_names.count(pid) ? physical_names[pid] : ("physical-" + std::to_string(pid));
    m.boundary.push_back(f);
  }
  detail::canonicalize_and_check(m);
  return m;
}

inline Mesh parse_mesh(const std::string& text, const std::string& format) {
  if (format == "uniform-1d") {
    std::istringstream ls(text);
    double x0, x1;
    long K;
    if (!(ls >> x0 >> x1 >> K)) throw ParseError("uniform-1d spec: expected \"x_min x_max K\"");
    return uniform_1d_mesh(x0, x1, int(K));
  }
  if (format == "internal-json") return parse_mesh_json(text);
  if (format == "gmsh-ascii-v2") return parse_mesh_gmsh(text);
  throw ConfigError("parse_mesh: unknown format '" + format + "'");
}

// ---------------------------------------------------------------------------
// Connectivity: neighbor map, face pairing, boundary tags, dual graph.
// ---------------------------------------------------------------------------

struct Connectivity {
  struct Interior {
    int k, ke;       // element / local face
    int n, ne;       // neighbor element / its local face
    bool reversed;   // neighbor traverses the shared face in opposite order
  };
  struct Boundary {
    int k, ke;
    std::string tag;
  };
  std::vector<Interior> interior;
  std::vector<Boundary> boundary;
  std::vector<std::vector<int>> vertex_elements;  // vertex id -> incident elements
  // dual graph: one edge (k, n) per interior face
  std::size_t dual_edge_count() const { return interior.size(); }
};

inline Connectivity build_connectivity(const Mesh& m) {
  Connectivity c;
  const int nlf = m.n_local_faces();
  std::map<std::array<int, 2>, std::vector<std::array<int, 2>>> face_map;  // sorted verts -> (k, ke)
  for (int k = 0; k < m.K(); ++k)
    for (int f = 0; f < nlf; ++f) {
      auto fv = m.face_vertices(k, f);
      std::array<int, 2> key = {std::min(fv[0], fv[1]), std::max(fv[0], fv[1])};
      if (m.dim == 1) key = {fv[0], -1};
      face_map[key].push_back({k, f});
    }
  std::map<std::array<int, 2>, std::string> tag_map;
  for (const auto& b : m.boundary) {
    std::array<int, 2> key = m.dim == 1 ? std::array<int, 2>{b.v[0], -1}
                                        : std::array<int, 2>{std::min(b.v[0], b.v[1]), std::max(b.v[0], b.v[1])};
    if (tag_map.count(key) && tag_map[key] != b.tag)
      throw ParseError("boundary face carries two tags: '" + tag_map[key] + "' and '" + b.tag + "'");
    tag_map[key] = b.tag;
  }

  for (const auto& [key, sides] : face_map)
    if (sides.size() > 2)
      throw ParseError("non-conforming mesh: face shared by " + std::to_string(sides.size()) + " elements");

  for (const auto& [key, sides] : face_map) {
    if (sides.size() == 2) {
      if (tag_map.count(key)) throw ParseError("interior face carries boundary tag '" + tag_map[key] + "'");
      const auto [k, ke] = sides[0];
      const auto [n, ne] = sides[1];
      bool reversed = true;
      if (m.dim == 2) {
        const auto fa = m.face_vertices(k, ke), fb = m.face_vertices(n, ne);
        reversed = (fa[0] == fb[1] && fa[1] == fb[0]);
        if (!reversed && !(fa[0] == fb[0] && fa[1] == fb[1]))
          throw ParseError("non-conforming mesh: face vertex mismatch");
      } else {
        reversed = false;  // single shared vertex
      }
      c.interior.push_back({k, ke, n, ne, reversed});
    } else {
      const auto [k, ke] = sides[0];
      const auto it = tag_map.find(key);
      if (it == tag_map.end())
        throw ParseError("boundary face of element " + std::to_string(k) + " missing tag");
      c.boundary.push_back({k, ke, it->second});
    }
  }

  c.vertex_elements.assign(std::size_t(m.n_vertices()), {});
  for (int k = 0; k < m.K(); ++k)
    for (int j = 0; j <= m.dim; ++j) c.vertex_elements[std::size_t(m.elements(k, j))].push_back(k);
  return c;
}

// ---------------------------------------------------------------------------
// Geometric factors of the affine reference map.
// ---------------------------------------------------------------------------

struct ElementGeometry {
  int dim = 0;
  int n_faces = 0;
  VectorXd detJ;      // K  (1D: h/2; 2D: area/2)
  MatrixXd rst_x;     // K x dim^2: 1D [rx]; 2D [rx, sx, ry, sy]
  MatrixXd normal;    // (K*n_faces) x dim, unit outward
  VectorXd sJ;        // K*n_faces: surface Jacobian (1D: 1; 2D: edge length/2)
  VectorXd Fscale;    // sJ/detJ per element-face
  int face_index(int k, int f) const { return k * n_faces + f; }
};

inline ElementGeometry geometric_factors(const Mesh& m) {
  ElementGeometry g;
  g.dim = m.dim;
  g.n_faces = m.n_local_faces();
  const int K = m.K();
  g.detJ.resize(K);
  g.rst_x.resize(K, m.dim * m.dim);
  g.normal.resize(K * g.n_faces, m.dim);
  g.sJ.resize(K * g.n_faces);
  g.Fscale.resize(K * g.n_faces);
  const double degenerate_tol = 1e-14 * m.scale() * std::max(m.scale(), 1.0);

  for (int k = 0; k < K; ++k) {
    if (m.dim == 1) {
      const double xa = m.vertices(m.elements(k, 0), 0), xb = m.vertices(m.elements(k, 1), 0);
      const double J = (xb - xa) / 2.0;
      if (std::abs(J) < degenerate_tol) throw NumericalError("degenerate element", k);
      g.detJ(k) = J;
      g.rst_x(k, 0) = 1.0 / J;
      g.normal(g.face_index(k, 0), 0) = -1.0;
      g.normal(g.face_index(k, 1), 0) = 1.0;
      g.sJ(g.face_index(k, 0)) = 1.0;
      g.sJ(g.face_index(k, 1)) = 1.0;
      g.Fscale(g.face_index(k, 0)) = 1.0 / J;
      g.Fscale(g.face_index(k, 1)) = 1.0 / J;
    } else {
      const auto vx = [&](int j, int c) { return m.vertices(m.elements(k, j), c); };
      const double xr = (vx(1, 0) - vx(0, 0)) / 2.0, yr = (vx(1, 1) - vx(0, 1)) / 2.0;
      const double xs = (vx(2, 0) - vx(0, 0)) / 2.0, ys = (vx(2, 1) - vx(0, 1)) / 2.0;
      const double J = xr * ys - xs * yr;
      if (J < degenerate_tol) throw NumericalError("degenerate element", k);
      g.detJ(k) = J;
      g.rst_x(k, 0) = ys / J;   // rx
      g.rst_x(k, 1) = -yr / J;  // sx
      g.rst_x(k, 2) = -xs / J;  // ry
      g.rst_x(k, 3) = xr / J;   // sy
      for (int f = 0; f < 3; ++f) {
        const auto fv = m.face_vertices(k, f);
        const double tx = m.vertices(fv[1], 0) - m.vertices(fv[0], 0);
        const double ty = m.vertices(fv[1], 1) - m.vertices(fv[0], 1);
        const double len = std::hypot(tx, ty);
        const int fi = g.face_index(k, f);
        g.normal(fi, 0) = ty / len;
        g.normal(fi, 1) = -tx / len;
        g.sJ(fi) = len / 2.0;
        g.Fscale(fi) = g.sJ(fi) / J;
      }
    }
  }
  return g;
}

}  // namespace dgnet
