#include "gssdf/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace gssdf {

int PlyPoints::column(const std::string& name) const {
  for (size_t i = 0; i < properties.size(); ++i)
    if (properties[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

struct PlyHeader {
  bool binary = false;
  int64_t vertex_count = 0;
  int64_t face_count = 0;
  std::vector<std::string> vertex_props;
  std::vector<char> vertex_prop_types;  // 'f' float32, 'd' float64
};

PlyHeader parse_header(std::istream& is, const std::string& path) {
  PlyHeader h;
  std::string line;
  std::getline(is, line);
  require(line.rfind("ply", 0) == 0, "PLY " + path + ": missing magic");
  std::string element;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") h.binary = true;
      else if (fmt == "ascii") h.binary = false;
      else fail("PLY " + path + ": unsupported format " + fmt);
    } else if (tok == "element") {
      std::string name;
      int64_t count;
      ls >> name >> count;
      element = name;
      if (name == "vertex") h.vertex_count = count;
      else if (name == "face") h.face_count = count;
      else fail("PLY " + path + ": unsupported element " + name);
    } else if (tok == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") {
        require(element == "face", "PLY " + path + ": list property outside faces");
        continue;
      }
      ls >> name;
      if (element == "vertex") {
        require(type == "float" || type == "float32" || type == "double" || type == "float64",
                "PLY " + path + ": unsupported property type " + type);
        h.vertex_props.push_back(name);
        h.vertex_prop_types.push_back((type == "double" || type == "float64") ? 'd' : 'f');
      }
    } else if (tok == "end_header") {
      return h;
    } else if (tok == "comment" || tok == "obj_info") {
      continue;
    } else {
      fail("PLY " + path + ": unexpected header token " + tok);
    }
  }
  fail("PLY " + path + ": truncated header");
}

}  // namespace

void write_ply_points(const std::string& path, const PlyPoints& points, bool binary) {
  require(!points.properties.empty(), "PLY write: no properties");
  for (const auto& col : points.columns)
    require(static_cast<int64_t>(col.size()) == points.size(), "PLY write: ragged columns");
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "PLY write: cannot open " + path);
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  os << "element vertex " << points.size() << "\n";
  for (const auto& p : points.properties) os << "property double " << p << "\n";
  os << "end_header\n";
  const size_t ncols = points.properties.size();
  if (binary) {
    std::vector<double> row(ncols);
    for (int64_t i = 0; i < points.size(); ++i) {
      for (size_t c = 0; c < ncols; ++c) row[c] = points.columns[c][static_cast<size_t>(i)];
      os.write(reinterpret_cast<const char*>(row.data()),
               static_cast<std::streamsize>(ncols * sizeof(double)));
    }
  } else {
    os.precision(17);
    for (int64_t i = 0; i < points.size(); ++i) {
      for (size_t c = 0; c < ncols; ++c) os << points.columns[c][static_cast<size_t>(i)] << (c + 1 == ncols ? '\n' : ' ');
    }
  }
  require(os.good(), "PLY write: failed writing " + path);
}

PlyPoints read_ply_points(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "PLY read: cannot open " + path);
  const PlyHeader h = parse_header(is, path);
  require(h.face_count == 0, "PLY read: expected a point cloud in " + path);
  PlyPoints out;
  out.properties = h.vertex_props;
  out.columns.assign(h.vertex_props.size(), {});
  for (auto& c : out.columns) c.resize(static_cast<size_t>(h.vertex_count));
  const size_t ncols = h.vertex_props.size();
  if (h.binary) {
    for (int64_t i = 0; i < h.vertex_count; ++i) {
      for (size_t c = 0; c < ncols; ++c) {
        if (h.vertex_prop_types[c] == 'd') {
          double v;
          is.read(reinterpret_cast<char*>(&v), sizeof(v));
          out.columns[c][static_cast<size_t>(i)] = v;
        } else {
          float v;
          is.read(reinterpret_cast<char*>(&v), sizeof(v));
          out.columns[c][static_cast<size_t>(i)] = v;
        }
      }
    }
  } else {
    for (int64_t i = 0; i < h.vertex_count; ++i)
      for (size_t c = 0; c < ncols; ++c) is >> out.columns[c][static_cast<size_t>(i)];
  }
  require(!is.fail(), "PLY read: truncated data in " + path);
  return out;
}

void write_ply_mesh(const std::string& path, const TriangleMesh& mesh, bool binary) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "PLY write: cannot open " + path);
  const bool with_normals = !mesh.normals.empty();
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  os << "element vertex " << mesh.vertex_count() << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  if (with_normals) os << "property float nx\nproperty float ny\nproperty float nz\n";
  os << "element face " << mesh.triangle_count() << "\n";
  os << "property list uchar int vertex_indices\n";
  os << "end_header\n";
  if (binary) {
    for (int64_t i = 0; i < mesh.vertex_count(); ++i) {
      float v[6];
      for (int a = 0; a < 3; ++a) v[a] = static_cast<float>(mesh.vertices[static_cast<size_t>(i)][a]);
      int n = 3;
      if (with_normals) {
        for (int a = 0; a < 3; ++a)
          v[3 + a] = static_cast<float>(mesh.normals[static_cast<size_t>(i)][a]);
        n = 6;
      }
      os.write(reinterpret_cast<const char*>(v), n * static_cast<std::streamsize>(sizeof(float)));
    }
    for (const auto& tri : mesh.triangles) {
      const uint8_t k = 3;
      os.write(reinterpret_cast<const char*>(&k), 1);
      os.write(reinterpret_cast<const char*>(tri.data()), 3 * sizeof(int32_t));
    }
  } else {
    os.precision(9);
    for (int64_t i = 0; i < mesh.vertex_count(); ++i) {
      const Vec3& v = mesh.vertices[static_cast<size_t>(i)];
      os << v.x() << ' ' << v.y() << ' ' << v.z();
      if (with_normals) {
        const Vec3& nn = mesh.normals[static_cast<size_t>(i)];
        os << ' ' << nn.x() << ' ' << nn.y() << ' ' << nn.z();
      }
      os << '\n';
    }
    for (const auto& tri : mesh.triangles)
      os << "3 " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
  }
  require(os.good(), "PLY write: failed writing " + path);
}

TriangleMesh read_ply_mesh(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "PLY read: cannot open " + path);
  const PlyHeader h = parse_header(is, path);
  TriangleMesh mesh;
  mesh.vertices.resize(static_cast<size_t>(h.vertex_count));
  const int xi = [&] {
    for (size_t i = 0; i < h.vertex_props.size(); ++i)
      if (h.vertex_props[i] == "x") return static_cast<int>(i);
    fail("PLY read: no x property in " + path);
    return -1;
  }();
  const bool with_normals = [&] {
    for (const auto& p : h.vertex_props)
      if (p == "nx") return true;
    return false;
  }();
  if (with_normals) mesh.normals.resize(static_cast<size_t>(h.vertex_count));
  const size_t ncols = h.vertex_props.size();
  std::vector<double> row(ncols);
  for (int64_t i = 0; i < h.vertex_count; ++i) {
    for (size_t c = 0; c < ncols; ++c) {
      if (h.binary) {
        if (h.vertex_prop_types[c] == 'd') {
          double v;
          is.read(reinterpret_cast<char*>(&v), sizeof(v));
          row[c] = v;
        } else {
          float v;
          is.read(reinterpret_cast<char*>(&v), sizeof(v));
          row[c] = v;
        }
      } else {
        is >> row[c];
      }
    }
    for (int a = 0; a < 3; ++a) mesh.vertices[static_cast<size_t>(i)][a] = row[static_cast<size_t>(xi + a)];
    if (with_normals) {
      int ni = 0;
      for (size_t c = 0; c < ncols; ++c)
        if (h.vertex_props[c] == "nx") ni = static_cast<int>(c);
      for (int a = 0; a < 3; ++a) mesh.normals[static_cast<size_t>(i)][a] = row[static_cast<size_t>(ni + a)];
    }
  }
  mesh.triangles.resize(static_cast<size_t>(h.face_count));
  for (int64_t f = 0; f < h.face_count; ++f) {
    if (h.binary) {
      uint8_t k;
      is.read(reinterpret_cast<char*>(&k), 1);
      require(k == 3, "PLY read: non-triangular face in " + path);
      is.read(reinterpret_cast<char*>(mesh.triangles[static_cast<size_t>(f)].data()),
              3 * sizeof(int32_t));
    } else {
      int k;
      is >> k;
      require(k == 3, "PLY read: non-triangular face in " + path);
      for (int a = 0; a < 3; ++a) is >> mesh.triangles[static_cast<size_t>(f)][a];
    }
  }
  require(!is.fail(), "PLY read: truncated data in " + path);
  return mesh;
}

}  // namespace gssdf
