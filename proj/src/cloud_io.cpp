#include "treereg/cloud_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "treereg/error.hpp"

namespace treereg {

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {}", path.string()));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {} for writing", path.string()));
  return out;
}

/// Parses up to `n` leading numbers from a line; returns how many were read.
int parse_numbers(std::string_view line, double* out, int n) {
  const char* p = line.data();
  const char* end = p + line.size();
  int count = 0;
  while (count < n) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
    if (p == end) break;
    if (*p == '+') ++p;
    const auto [next, ec] = std::from_chars(p, end, out[count]);
    if (ec != std::errc{}) return -1;
    p = next;
    ++count;
  }
  return count;
}

PointCloud load_xyz(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Point3> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    double v[3];
    if (parse_numbers(std::string_view(line).substr(first), v, 3) != 3) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: line {}: expected three numbers", path.string(), line_no));
    }
    pts.emplace_back(v[0], v[1], v[2]);
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyFile, fmt::format("{} contains no points", path.string()));
  return PointCloud(std::move(pts));
}

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> props;
  bool has_list = false;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double read_binary_value(const char* p, const std::string& t) {
  auto get = [p]<class T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return get(std::int8_t{});
  if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
  if (t == "short" || t == "int16") return get(std::int16_t{});
  if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
  if (t == "int" || t == "int32") return get(std::int32_t{});
  if (t == "uint" || t == "uint32") return get(std::uint32_t{});
  if (t == "float" || t == "float32") return get(float{});
  return get(double{});
}

PointCloud load_ply(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::ParseError, fmt::format("{}: line {}: {}", path.string(), line_no, why));
  };
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line() || line != "ply") throw fail("missing 'ply' magic");

  std::string format;
  std::vector<PlyElement> elements;
  bool done = false;
  while (next_line()) {
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "format") {
      ss >> format;
      if (format != "ascii" && format != "binary_little_endian") throw fail("unsupported format " + format);
    } else if (kw == "element") {
      PlyElement e;
      if (!(ss >> e.name >> e.count)) throw fail("bad element line");
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw fail("property before element");
      std::string type;
      ss >> type;
      PlyProperty p;
      if (type == "list") {
        elements.back().has_list = true;
        std::string ct, it;
        ss >> ct >> it >> p.name;
        p.type = "list";
      } else {
        p.type = type;
        p.size = ply_type_size(type);
        if (p.size == 0) throw fail("unknown property type " + type);
        ss >> p.name;
      }
      elements.back().props.push_back(std::move(p));
    } else if (kw == "end_header") {
      done = true;
      break;
    } else if (kw != "comment" && kw != "obj_info" && !kw.empty()) {
      throw fail("unexpected header keyword " + kw);
    }
  }
  if (!done) throw fail("header not terminated");
  if (format.empty()) throw fail("missing format line");

  const auto vit = std::find_if(elements.begin(), elements.end(), [](const PlyElement& e) { return e.name == "vertex"; });
  if (vit == elements.end()) throw fail("no vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t k = 0; k < vit->props.size(); ++k) {
    const auto& p = vit->props[k];
    const bool real = p.type == "float" || p.type == "float32" || p.type == "double" || p.type == "float64";
    if (p.name == "x" || p.name == "y" || p.name == "z") {
      if (!real) throw fail("coordinate " + p.name + " must be float or double");
      (p.name == "x" ? ix : p.name == "y" ? iy : iz) = static_cast<int>(k);
    }
  }
  if (ix < 0 || iy < 0 || iz < 0) throw fail("vertex element lacks x, y or z");

  std::vector<Point3> pts;
  pts.reserve(vit->count);
  if (format == "ascii") {
    for (auto e = elements.begin(); e != elements.end(); ++e) {
      for (std::size_t r = 0; r < e->count; ++r) {
        if (!next_line()) throw fail("unexpected end of data");
        if (e != vit) continue;
        std::vector<double> vals(vit->props.size());
        if (vit->has_list) throw fail("list properties on vertices are not supported");
        if (parse_numbers(line, vals.data(), static_cast<int>(vals.size())) != static_cast<int>(vals.size())) {
          throw fail("malformed vertex");
        }
        pts.emplace_back(vals[static_cast<std::size_t>(ix)], vals[static_cast<std::size_t>(iy)],
                         vals[static_cast<std::size_t>(iz)]);
      }
      if (e == vit) break;
    }
  } else {
    for (auto e = elements.begin(); e != vit; ++e) {
      if (e->has_list) throw fail("list element '" + e->name + "' before vertices is not supported");
      std::size_t row = 0;
      for (const auto& p : e->props) row += p.size;
      in.seekg(static_cast<std::streamoff>(row * e->count), std::ios::cur);
    }
    if (vit->has_list) throw fail("list properties on vertices are not supported");
    std::vector<std::size_t> offsets;
    std::size_t row = 0;
    for (const auto& p : vit->props) {
      offsets.push_back(row);
      row += p.size;
    }
    std::vector<char> buf(row);
    const auto data_start = static_cast<std::size_t>(in.tellg());
    for (std::size_t r = 0; r < vit->count; ++r) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(row))) {
        throw Error(ErrorCode::ParseError,
                    fmt::format("{}: byte {}: truncated vertex {}", path.string(), data_start + r * row, r));
      }
      auto val = [&](int k) {
        const auto uk = static_cast<std::size_t>(k);
        return read_binary_value(buf.data() + offsets[uk], vit->props[uk].type);
      };
      pts.emplace_back(val(ix), val(iy), val(iz));
    }
  }
  if (pts.empty()) throw Error(ErrorCode::EmptyFile, fmt::format("{} contains no points", path.string()));
  return PointCloud(std::move(pts));
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, fmt::format("no such file: {}", path.string()));
  if (format == CloudFormat::Auto) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    format = ext == ".ply" ? CloudFormat::Ply : CloudFormat::Xyz;
  }
  return format == CloudFormat::Ply ? load_ply(path) : load_xyz(path);
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  auto out = open_output(path);
  std::string buf;
  for (const auto& p : cloud) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{} {} {}\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    int v = 0;
    const auto [p, ec] = std::from_chars(line.data() + first, line.data() + line.size(), v);
    if (ec != std::errc{}) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: line {}: expected an integer label", path.string(), line_no));
    }
    labels.push_back(v);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  auto out = open_output(path);
  for (const int l : labels) out << l << '\n';
}

}  // namespace treereg
