#include "pointcloud/ply.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace lidarsphere {
namespace {

enum class Scalar { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

bool parse_scalar(const std::string& name, Scalar& out) {
  if (name == "char" || name == "int8") out = Scalar::kInt8;
  else if (name == "uchar" || name == "uint8") out = Scalar::kUint8;
  else if (name == "short" || name == "int16") out = Scalar::kInt16;
  else if (name == "ushort" || name == "uint16") out = Scalar::kUint16;
  else if (name == "int" || name == "int32") out = Scalar::kInt32;
  else if (name == "uint" || name == "uint32") out = Scalar::kUint32;
  else if (name == "float" || name == "float32") out = Scalar::kFloat32;
  else if (name == "double" || name == "float64") out = Scalar::kFloat64;
  else return false;
  return true;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kInt8:
    case Scalar::kUint8: return 1;
    case Scalar::kInt16:
    case Scalar::kUint16: return 2;
    case Scalar::kInt32:
    case Scalar::kUint32:
    case Scalar::kFloat32: return 4;
    case Scalar::kFloat64: return 8;
  }
  return 0;
}

bool is_float(Scalar s) { return s == Scalar::kFloat32 || s == Scalar::kFloat64; }

double read_binary(const char* p, Scalar s) {
  switch (s) {
    case Scalar::kInt8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case Scalar::kUint8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case Scalar::kInt16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::kUint16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::kInt32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kUint32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kFloat32: { float v; std::memcpy(&v, p, 4); return v; }
    case Scalar::kFloat64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

enum class Role { kSkip, kX, kY, kZ, kIntensity, kLabel, kRed, kGreen, kBlue };

struct Property {
  std::string name;
  Scalar type = Scalar::kFloat32;
  Role role = Role::kSkip;
};

struct Header {
  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<Property> props;
  std::size_t body_offset = 0;
};

Header parse_header(std::istream& in, const std::string& path) {
  auto fail = [&](std::size_t line, const std::string& msg) -> DataError {
    return DataError(path + ": PLY header line " + std::to_string(line) + ": " + msg);
  };
  Header h;
  std::string line;
  std::size_t line_no = 0;
  bool saw_format = false;
  bool in_vertex = false;
  bool saw_vertex = false;
  bool vertex_done = false;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") throw fail(1, "missing 'ply' magic");
  for (;;) {
    if (!next_line()) throw fail(line_no, "unexpected end of header (no end_header)");
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword.empty() || keyword == "comment" || keyword == "obj_info") continue;
    if (keyword == "end_header") break;
    if (keyword == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") h.binary = false;
      else if (fmt == "binary_little_endian") h.binary = true;
      else throw fail(line_no, "unsupported format '" + fmt + "'");
      if (version != "1.0") throw fail(line_no, "unsupported version '" + version + "'");
      saw_format = true;
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (!ls || count < 0) throw fail(line_no, "malformed element declaration");
      if (in_vertex) vertex_done = true;
      in_vertex = name == "vertex";
      if (in_vertex) {
        if (saw_vertex) throw fail(line_no, "duplicate vertex element");
        saw_vertex = true;
        h.vertex_count = static_cast<std::size_t>(count);
      } else if (!saw_vertex && count > 0) {
        throw fail(line_no, "element '" + name + "' precedes vertex; unsupported");
      }
    } else if (keyword == "property") {
      std::string type;
      ls >> type;
      if (!in_vertex || vertex_done) continue;  // properties of trailing elements are ignored
      if (type == "list") throw fail(line_no, "list properties on vertex are unsupported");
      std::string name;
      ls >> name;
      if (!ls) throw fail(line_no, "malformed property declaration");
      Property p;
      p.name = name;
      if (!parse_scalar(type, p.type)) throw fail(line_no, "unsupported property type '" + type + "' for '" + name + "'");
      if (name == "x") p.role = Role::kX;
      else if (name == "y") p.role = Role::kY;
      else if (name == "z") p.role = Role::kZ;
      else if (name == "intensity" || name == "scalar_intensity") p.role = Role::kIntensity;
      else if (name == "label" || name == "class" || name == "scalar_label") p.role = Role::kLabel;
      else if (name == "red") p.role = Role::kRed;
      else if (name == "green") p.role = Role::kGreen;
      else if (name == "blue") p.role = Role::kBlue;
      if ((p.role == Role::kX || p.role == Role::kY || p.role == Role::kZ || p.role == Role::kIntensity) &&
          !is_float(p.type))
        throw fail(line_no, "property '" + name + "' must be float or double, got '" + type + "'");
      if ((p.role == Role::kLabel || p.role == Role::kRed || p.role == Role::kGreen || p.role == Role::kBlue) &&
          is_float(p.type))
        throw fail(line_no, "property '" + name + "' must be an integer type, got '" + type + "'");
      h.props.push_back(p);
    } else {
      throw fail(line_no, "unknown keyword '" + keyword + "'");
    }
  }
  if (!saw_format) throw fail(line_no, "missing format line");
  if (!saw_vertex) throw fail(line_no, "missing vertex element");
  for (const char* axis : {"x", "y", "z"}) {
    bool found = false;
    for (const auto& p : h.props) found = found || p.name == axis;
    if (!found) throw fail(line_no, std::string("vertex element lacks required property \"") + axis + "\"");
  }
  h.body_offset = static_cast<std::size_t>(in.tellg());
  return h;
}

bool has_role(const Header& h, Role r) {
  for (const auto& p : h.props)
    if (p.role == r) return true;
  return false;
}

void assign(Point3& pt, Rgb& color, Role role, double v, std::size_t index, const std::string& where) {
  switch (role) {
    case Role::kX: pt.x = static_cast<float>(v); break;
    case Role::kY: pt.y = static_cast<float>(v); break;
    case Role::kZ: pt.z = static_cast<float>(v); break;
    case Role::kIntensity: pt.intensity = static_cast<float>(v); break;
    case Role::kLabel:
      if (v < 0 || v > 255) throw DataError(where + ": label out of range at vertex " + std::to_string(index));
      pt.label = static_cast<std::uint8_t>(v);
      break;
    case Role::kRed: color[0] = static_cast<std::uint8_t>(v); break;
    case Role::kGreen: color[1] = static_cast<std::uint8_t>(v); break;
    case Role::kBlue: color[2] = static_cast<std::uint8_t>(v); break;
    case Role::kSkip: break;
  }
}

}  // namespace

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string where = path.string();
  Header h = parse_header(in, where);

  PointCloud cloud;
  cloud.has_intensity = has_role(h, Role::kIntensity);
  cloud.has_labels = has_role(h, Role::kLabel);
  const bool has_color = has_role(h, Role::kRed) && has_role(h, Role::kGreen) && has_role(h, Role::kBlue);
  cloud.meta.source_id = path.stem().string();
  cloud.points.resize(h.vertex_count);
  if (has_color) cloud.colors.resize(h.vertex_count);
  Rgb scratch{};

  if (h.binary) {
    std::size_t record = 0;
    for (const auto& p : h.props) record += scalar_size(p.type);
    std::vector<char> body(record * h.vertex_count);
    in.read(body.data(), static_cast<std::streamsize>(body.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != body.size())
      throw DataError(where + ": truncated binary body at byte " + std::to_string(h.body_offset + got) + " (expected " +
                      std::to_string(h.body_offset + body.size()) + " bytes)");
    const char* cursor = body.data();
    for (std::size_t i = 0; i < h.vertex_count; ++i) {
      Rgb& color = has_color ? cloud.colors[i] : scratch;
      for (const auto& p : h.props) {
        if (p.role != Role::kSkip) assign(cloud.points[i], color, p.role, read_binary(cursor, p.type), i, where);
        cursor += scalar_size(p.type);
      }
    }
  } else {
    std::string line;
    std::size_t line_no = 0;
    for (std::size_t i = 0; i < h.vertex_count; ++i) {
      do {
        if (!std::getline(in, line))
          throw DataError(where + ": truncated ascii body, expected " + std::to_string(h.vertex_count) +
                          " vertices, got " + std::to_string(i) + " (body line " + std::to_string(line_no + 1) + ")");
        ++line_no;
      } while (line.find_first_not_of(" \t\r") == std::string::npos);
      const char* cur = line.data();
      const char* end = line.data() + line.size();
      Rgb& color = has_color ? cloud.colors[i] : scratch;
      for (const auto& p : h.props) {
        while (cur < end && (*cur == ' ' || *cur == '\t')) ++cur;
        double v = 0.0;
        std::from_chars_result r{};
        if (is_float(p.type)) {
          if (p.type == Scalar::kFloat32) {
            float f = 0.0f;
            r = std::from_chars(cur, end, f);
            v = f;
          } else {
            r = std::from_chars(cur, end, v);
          }
        } else {
          long long iv = 0;
          r = std::from_chars(cur, end, iv);
          v = static_cast<double>(iv);
        }
        if (r.ec != std::errc())
          throw DataError(where + ": body line " + std::to_string(line_no) + ": cannot parse property '" + p.name + "'");
        cur = r.ptr;
        if (p.role != Role::kSkip) assign(cloud.points[i], color, p.role, v, i, where);
      }
    }
  }
  cloud.validate();
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "comment generated by lidarsphere\n";
  if (!cloud.meta.source_id.empty()) out << "comment source " << cloud.meta.source_id << '\n';
  out << "element vertex " << cloud.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_intensity) out << "property float intensity\n";
  const bool colors = cloud.has_colors();
  if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_labels) out << "property uchar label\n";
  out << "end_header\n";

  if (binary) {
    std::size_t record = 12 + (cloud.has_intensity ? 4 : 0) + (colors ? 3 : 0) + (cloud.has_labels ? 1 : 0);
    std::vector<char> body(record * cloud.size());
    char* cur = body.data();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      std::memcpy(cur, &p.x, 4);
      std::memcpy(cur + 4, &p.y, 4);
      std::memcpy(cur + 8, &p.z, 4);
      cur += 12;
      if (cloud.has_intensity) {
        std::memcpy(cur, &p.intensity, 4);
        cur += 4;
      }
      if (colors) {
        std::memcpy(cur, cloud.colors[i].data(), 3);
        cur += 3;
      }
      if (cloud.has_labels) *cur++ = static_cast<char>(p.label);
    }
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
  } else {
    char buf[64];
    auto put_float = [&](float v) {
      auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
      out.write(buf, r.ptr - buf);
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud.points[i];
      put_float(p.x);
      out << ' ';
      put_float(p.y);
      out << ' ';
      put_float(p.z);
      if (cloud.has_intensity) {
        out << ' ';
        put_float(p.intensity);
      }
      if (colors)
        out << ' ' << int(cloud.colors[i][0]) << ' ' << int(cloud.colors[i][1]) << ' ' << int(cloud.colors[i][2]);
      if (cloud.has_labels) out << ' ' << int(p.label);
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lidarsphere
