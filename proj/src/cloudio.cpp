#include "pcr/cloudio.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pcr {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_count(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] void parse_fail(std::string_view what, std::size_t line) {
  throw Error(Errc::parse_error, std::string(what) + " (line " + std::to_string(line) + ")");
}

// ---------------------------------------------------------------- PLY

enum class PlyType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::i8;
  if (name == "uchar" || name == "uint8") return PlyType::u8;
  if (name == "short" || name == "int16") return PlyType::i16;
  if (name == "ushort" || name == "uint16") return PlyType::u16;
  if (name == "int" || name == "int32") return PlyType::i32;
  if (name == "uint" || name == "uint32") return PlyType::u32;
  if (name == "float" || name == "float32") return PlyType::f32;
  if (name == "double" || name == "float64") return PlyType::f64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::i8:
    case PlyType::u8: return 1;
    case PlyType::i16:
    case PlyType::u16: return 2;
    case PlyType::i32:
    case PlyType::u32:
    case PlyType::f32: return 4;
    case PlyType::f64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    v = std::bit_cast<T>(bytes);
  }
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

double load_ply_value(PlyType t, const char* p) {
  switch (t) {
    case PlyType::i8: return load_le<std::int8_t>(p);
    case PlyType::u8: return load_le<std::uint8_t>(p);
    case PlyType::i16: return load_le<std::int16_t>(p);
    case PlyType::u16: return load_le<std::uint16_t>(p);
    case PlyType::i32: return load_le<std::int32_t>(p);
    case PlyType::u32: return load_le<std::uint32_t>(p);
    case PlyType::f32: return load_le<float>(p);
    case PlyType::f64: return load_le<double>(p);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::f32;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  PlyFormat format = PlyFormat::ascii;
  std::vector<PlyElement> elements;
  std::string label;
  bool has_label = false;
  std::size_t body_offset = 0;
  std::size_t body_line = 0;
};

PlyHeader parse_ply_header(std::string_view bytes) {
  PlyHeader header;
  bool have_format = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (true) {
    if (pos >= bytes.size()) parse_fail("PLY header is not terminated by end_header", line_no + 1);
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) parse_fail("PLY header is not terminated by end_header", line_no + 1);
    const std::string_view raw = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    const std::string_view line = trim(raw);

    if (line_no == 1) {
      if (line != "ply") parse_fail("missing 'ply' magic", line_no);
      continue;
    }
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string_view key = tokens[0];

    if (key == "end_header") break;
    if (key == "comment") {
      const std::string_view rest = trim(line.substr(std::string_view("comment").size()));
      if (!header.has_label && rest.starts_with("label")) {
        const std::string_view after = rest.substr(5);
        if (after.empty() || after.front() == ' ' || after.front() == '\t') {
          header.label = std::string(trim(after));
          header.has_label = true;
        }
      }
      continue;
    }
    if (key == "obj_info") continue;
    if (key == "format") {
      if (tokens.size() != 3) parse_fail("malformed format line", line_no);
      if (tokens[1] == "ascii") {
        header.format = PlyFormat::ascii;
      } else if (tokens[1] == "binary_little_endian") {
        header.format = PlyFormat::binary_little_endian;
      } else if (tokens[1] == "binary_big_endian") {
        throw Error(Errc::unsupported_format, "big-endian PLY is not supported");
      } else {
        parse_fail("unknown PLY format '" + std::string(tokens[1]) + "'", line_no);
      }
      have_format = true;
      continue;
    }
    if (key == "element") {
      if (tokens.size() != 3) parse_fail("malformed element line", line_no);
      const auto count = to_count(tokens[2]);
      if (!count) parse_fail("element count is not a non-negative integer", line_no);
      header.elements.push_back({std::string(tokens[1]), *count, {}});
      continue;
    }
    if (key == "property") {
      if (header.elements.empty()) parse_fail("property before any element", line_no);
      PlyProperty prop;
      if (tokens.size() >= 2 && tokens[1] == "list") {
        if (tokens.size() != 5) parse_fail("malformed list property", line_no);
        if (!ply_type(tokens[2]) || !ply_type(tokens[3])) parse_fail("unknown property type", line_no);
        prop.is_list = true;
        prop.name = std::string(tokens[4]);
      } else {
        if (tokens.size() != 3) parse_fail("malformed property line", line_no);
        const auto type = ply_type(tokens[1]);
        if (!type) parse_fail("unknown property type '" + std::string(tokens[1]) + "'", line_no);
        prop.type = *type;
        prop.name = std::string(tokens[2]);
      }
      header.elements.back().properties.push_back(std::move(prop));
      continue;
    }
    parse_fail("unexpected header keyword '" + std::string(key) + "'", line_no);
  }
  if (!have_format) parse_fail("PLY header has no format line", line_no);
  header.body_offset = pos;
  header.body_line = line_no + 1;
  return header;
}

struct VertexLayout {
  std::size_t element = 0;
  std::array<std::size_t, 3> xyz{};
};

VertexLayout vertex_layout(const PlyHeader& header) {
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const PlyElement& el = header.elements[e];
    if (el.name != "vertex") continue;
    VertexLayout layout{e, {}};
    const std::array<std::string_view, 3> names{"x", "y", "z"};
    for (std::size_t axis = 0; axis < 3; ++axis) {
      bool found = false;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        if (el.properties[p].name != names[axis]) continue;
        const PlyProperty& prop = el.properties[p];
        if (prop.is_list || (prop.type != PlyType::f32 && prop.type != PlyType::f64))
          throw Error(Errc::unsupported_format, "vertex coordinates must be float or double properties");
        layout.xyz[axis] = p;
        found = true;
        break;
      }
      if (!found)
        throw Error(Errc::parse_error, "vertex element lacks property '" + std::string(names[axis]) + "'");
    }
    return layout;
  }
  throw Error(Errc::parse_error, "PLY header declares no vertex element");
}

std::vector<Point3d> parse_ascii_body(std::string_view bytes, const PlyHeader& header,
                                      const VertexLayout& layout) {
  std::size_t pos = header.body_offset;
  std::size_t line_no = header.body_line - 1;
  auto next_line = [&](std::string_view& line) {
    while (pos < bytes.size()) {
      std::size_t eol = bytes.find('\n', pos);
      if (eol == std::string_view::npos) eol = bytes.size();
      line = trim(bytes.substr(pos, eol - pos));
      pos = eol + 1;
      ++line_no;
      if (!line.empty()) return true;
    }
    return false;
  };

  std::vector<Point3d> points;
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const PlyElement& el = header.elements[e];
    const bool is_vertex = e == layout.element;
    if (is_vertex) points.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(el.count, bytes.size())));
    for (std::uint64_t row = 0; row < el.count; ++row) {
      std::string_view line;
      if (!next_line(line))
        parse_fail("file ends after " + std::to_string(row) + " of " + std::to_string(el.count) + " '" +
                       el.name + "' rows",
                   line_no);
      if (!is_vertex) continue;
      const auto tokens = split_ws(line);
      if (tokens.size() != el.properties.size())
        parse_fail("vertex row has " + std::to_string(tokens.size()) + " values, expected " +
                       std::to_string(el.properties.size()),
                   line_no);
      Point3d p;
      for (std::size_t axis = 0; axis < 3; ++axis) {
        const auto v = to_double(tokens[layout.xyz[axis]]);
        if (!v || !std::isfinite(*v)) parse_fail("invalid vertex coordinate", line_no);
        p(static_cast<Eigen::Index>(axis)) = *v;
      }
      points.push_back(p);
    }
  }
  std::string_view extra;
  if (next_line(extra)) parse_fail("unexpected data after the declared elements", line_no);
  return points;
}

std::vector<Point3d> parse_binary_body(std::string_view bytes, const PlyHeader& header,
                                       const VertexLayout& layout) {
  std::size_t pos = header.body_offset;
  auto fail = [&](const std::string& what) -> void {
    throw Error(Errc::parse_error, what + " (byte offset " + std::to_string(pos) + ")");
  };
  // Only elements up to and including the vertex element are decoded.
  for (std::size_t e = 0; e < layout.element; ++e) {
    for (const PlyProperty& prop : header.elements[e].properties)
      if (prop.is_list)
        throw Error(Errc::unsupported_format, "binary list properties before the vertex element");
    std::uint64_t stride = 0;
    for (const PlyProperty& prop : header.elements[e].properties) stride += ply_size(prop.type);
    const std::uint64_t remaining = bytes.size() - pos;
    if (stride != 0 && header.elements[e].count > remaining / stride) fail("truncated binary element data");
    pos += static_cast<std::size_t>(stride * header.elements[e].count);
  }

  const PlyElement& el = header.elements[layout.element];
  std::vector<std::size_t> offsets;
  std::size_t stride = 0;
  for (const PlyProperty& prop : el.properties) {
    if (prop.is_list) throw Error(Errc::unsupported_format, "list properties on the vertex element");
    offsets.push_back(stride);
    stride += ply_size(prop.type);
  }
  if (el.count > (bytes.size() - pos) / stride) fail("truncated binary vertex data");

  std::vector<Point3d> points;
  points.reserve(static_cast<std::size_t>(el.count));
  for (std::uint64_t row = 0; row < el.count; ++row) {
    const char* base = bytes.data() + pos;
    Point3d p;
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const std::size_t prop = layout.xyz[axis];
      p(static_cast<Eigen::Index>(axis)) = load_ply_value(el.properties[prop].type, base + offsets[prop]);
    }
    if (!is_finite(p)) fail("non-finite vertex coordinate");
    points.push_back(p);
    pos += stride;
  }
  return points;
}

std::string sanitize_label(std::string_view label) {
  std::string out(label);
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return std::string(trim(out));
}

std::string format_double(double v, int digits) {
  std::array<char, 64> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.*g", digits, v);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

// ---------------------------------------------------------------- report

void append_matrix(std::string& out, const double* data, int count) {
  out += '[';
  for (int i = 0; i < count; ++i) {
    if (i) out += ", ";
    out += format_double(data[i], 17);
  }
  out += ']';
}

void append_rotation(std::string& out, const Matrix3d& r) {
  const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> row_major = r;
  append_matrix(out, row_major.data(), 9);
}

void append_matrix6(std::string& out, const Matrix6d& m) {
  const Eigen::Matrix<double, 6, 6, Eigen::RowMajor> row_major = m;
  append_matrix(out, row_major.data(), 36);
}

void append_rigid(std::string& out, const Rigid3d& t, const char* indent) {
  out += "{\n";
  out += indent;
  out += "  \"rotation\": ";
  append_rotation(out, t.rotation());
  out += ",\n";
  out += indent;
  out += "  \"translation\": ";
  append_matrix(out, t.translation().data(), 3);
  out += '\n';
  out += indent;
  out += '}';
}

template <int N>
Eigen::Matrix<double, N, 1> json_vector(const json& j, const char* key) {
  if (!j.is_array() || j.size() != N)
    throw Error(Errc::parse_error, std::string("report field '") + key + "' must have " + std::to_string(N) +
                                       " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      throw Error(Errc::parse_error, std::string("report field '") + key + "' holds a non-number");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

Matrix3d json_rotation(const json& j, const char* key) {
  const auto v = json_vector<9>(j, key);
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(v.data());
}

Matrix6d json_matrix6(const json& j, const char* key) {
  const auto v = json_vector<36>(j, key);
  return Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(v.data());
}

const json& json_field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(Errc::missing_key, std::string("report lacks field '") + key + "'");
  return j.at(key);
}

Rigid3d json_rigid(const json& j, const char* key) {
  const json& obj = json_field(j, key);
  return Rigid3d(json_rotation(json_field(obj, "rotation"), "rotation"),
                 json_vector<3>(json_field(obj, "translation"), "translation"));
}

}  // namespace

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::degenerate_configuration: return "degenerate-configuration";
    case Errc::empty_input: return "empty-input";
    case Errc::parse_error: return "parse-error";
    case Errc::unsupported_format: return "unsupported-format";
    case Errc::io_error: return "io-error";
    case Errc::negative_depth: return "negative-depth";
    case Errc::missing_key: return "missing-key";
    case Errc::nonpositive_focal: return "nonpositive-focal";
    case Errc::zero_extent: return "zero-extent";
    case Errc::nonpositive_depth: return "nonpositive-depth";
    case Errc::singular_system: return "singular-system";
    case Errc::nonpositive_scale: return "nonpositive-scale";
    case Errc::nonpositive_input: return "nonpositive-input";
    case Errc::ambiguous_decomposition: return "ambiguous-decomposition";
    case Errc::insufficient_matches: return "insufficient-matches";
    case Errc::no_consensus: return "no-consensus";
    case Errc::empty_result: return "empty-result";
    case Errc::too_few_pairs: return "too-few-pairs";
    case Errc::index_out_of_range: return "index-out-of-range";
    case Errc::gimbal_lock: return "gimbal-lock";
    case Errc::singular_hessian: return "singular-hessian";
    case Errc::non_symmetric_input: return "non-symmetric-input";
    case Errc::missing_input: return "missing-input";
  }
  return "unknown";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::io_error, "failed reading '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(Errc::io_error, "failed writing '" + path.string() + "'");
}

Cloud parse_ply(std::string_view bytes, std::string label) {
  const PlyHeader header = parse_ply_header(bytes);
  const VertexLayout layout = vertex_layout(header);
  Cloud cloud;
  cloud.points = header.format == PlyFormat::ascii ? parse_ascii_body(bytes, header, layout)
                                                   : parse_binary_body(bytes, header, layout);
  if (cloud.points.empty()) throw Error(Errc::empty_input, "PLY file contains no vertices");
  cloud.label = header.has_label ? header.label : std::move(label);
  return cloud;
}

Cloud read_ply(const std::filesystem::path& path) {
  return parse_ply(read_file(path), path.stem().string());
}

std::string format_ply(const Cloud& cloud, PlyFormat format) {
  if (cloud.empty()) throw Error(Errc::empty_input, "refusing to write an empty cloud");
  for (const auto& p : cloud.points)
    if (!is_finite(p)) throw Error(Errc::invalid_argument, "cloud contains a non-finite point");

  std::string out = "ply\n";
  out += format == PlyFormat::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  if (!cloud.label.empty()) out += "comment label " + sanitize_label(cloud.label) + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\nend_header\n";
  if (format == PlyFormat::ascii) {
    for (const auto& p : cloud.points)
      out += format_double(p.x(), 9) + ' ' + format_double(p.y(), 9) + ' ' + format_double(p.z(), 9) + '\n';
  } else {
    out.reserve(out.size() + cloud.size() * 24);
    for (const auto& p : cloud.points) {
      store_le(out, p.x());
      store_le(out, p.y());
      store_le(out, p.z());
    }
  }
  return out;
}

void write_ply(const Cloud& cloud, const std::filesystem::path& path, PlyFormat format) {
  write_file(path, format_ply(cloud, format));
}

std::vector<MatchRecord> parse_matches(std::string_view text) {
  std::vector<MatchRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (!header_seen) {
      if (line != "us,vs,ds,ut,vt,dt") parse_fail("match file header must be 'us,vs,ds,ut,vt,dt'", line_no);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    std::array<std::string_view, 6> fields;
    std::size_t count = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (count == fields.size()) parse_fail("match row has more than 6 fields", line_no);
        fields[count++] = trim(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (count != fields.size()) parse_fail("match row has fewer than 6 fields", line_no);

    auto pixel = [&](std::string_view s) {
      const auto v = to_double(s);
      if (!v || !std::isfinite(*v)) parse_fail("invalid pixel coordinate", line_no);
      return *v;
    };
    auto depth = [&](std::string_view s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      const auto v = to_double(s);
      if (!v || !std::isfinite(*v)) parse_fail("invalid depth", line_no);
      if (*v <= 0.0)
        throw Error(Errc::negative_depth, "depth must be positive (line " + std::to_string(line_no) + ")");
      return v;
    };
    MatchRecord m;
    m.source_pixel = {pixel(fields[0]), pixel(fields[1])};
    m.source_depth = depth(fields[2]);
    m.target_pixel = {pixel(fields[3]), pixel(fields[4])};
    m.target_depth = depth(fields[5]);
    out.push_back(m);
  }
  if (!header_seen) parse_fail("match file is empty", 1);
  return out;
}

std::vector<MatchRecord> read_matches(const std::filesystem::path& path) {
  return parse_matches(read_file(path));
}

std::string format_matches(const std::vector<MatchRecord>& matches) {
  std::string out = "us,vs,ds,ut,vt,dt\n";
  auto depth = [](const std::optional<double>& d) { return d ? format_double(*d, 17) : std::string(); };
  for (const auto& m : matches) {
    out += format_double(m.source_pixel.x(), 17) + ',' + format_double(m.source_pixel.y(), 17) + ',' +
           depth(m.source_depth) + ',' + format_double(m.target_pixel.x(), 17) + ',' +
           format_double(m.target_pixel.y(), 17) + ',' + depth(m.target_depth) + '\n';
  }
  return out;
}

CameraIntrinsics parse_intrinsics(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, std::string("intrinsics JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::parse_error, "intrinsics JSON must be an object");
  auto get = [&](const char* key) {
    if (!j.contains(key)) throw Error(Errc::missing_key, std::string("intrinsics lack '") + key + "'");
    const json& v = j.at(key);
    if (!v.is_number()) throw Error(Errc::parse_error, std::string("intrinsics '") + key + "' is not a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(Errc::parse_error, std::string("intrinsics '") + key + "' is not finite");
    return d;
  };
  CameraIntrinsics k{get("fx"), get("fy"), get("cx"), get("cy")};
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(Errc::nonpositive_focal, "focal lengths must be positive");
  return k;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  return parse_intrinsics(read_file(path));
}

std::string format_intrinsics(const CameraIntrinsics& k) {
  return "{\"fx\": " + format_double(k.fx, 17) + ", \"fy\": " + format_double(k.fy, 17) +
         ", \"cx\": " + format_double(k.cx, 17) + ", \"cy\": " + format_double(k.cy, 17) + "}\n";
}

std::string format_report(const PipelineReport& r) {
  auto finite = [](const auto& m) { return m.allFinite(); };
  if (!std::isfinite(r.scale) || !std::isfinite(r.rms) || !finite(r.covariance) || !finite(r.information))
    throw Error(Errc::invalid_argument, "report contains non-finite values");

  std::string out = "{\n";
  out += std::string("  \"scale_detected\": ") + (r.scale_detected ? "true" : "false") + ",\n";
  out += "  \"scale\": " + format_double(r.scale, 17) + ",\n";
  out += "  \"relative_pose\": ";
  append_rigid(out, r.relative_pose, "  ");
  out += ",\n  \"icp_transform\": ";
  append_rigid(out, r.icp_transform, "  ");
  out += ",\n  \"final_transform\": {\n    \"scale\": " + format_double(r.final_transform.scale(), 17) +
         ",\n    \"rotation\": ";
  append_rotation(out, r.final_transform.rotation());
  out += ",\n    \"translation\": ";
  append_matrix(out, r.final_transform.translation().data(), 3);
  out += "\n  },\n";
  out += "  \"rms\": " + format_double(r.rms, 17) + ",\n";
  out += "  \"iterations\": " + std::to_string(r.iterations) + ",\n";
  out += "  \"covariance\": ";
  append_matrix6(out, r.covariance);
  out += ",\n  \"information\": ";
  append_matrix6(out, r.information);
  out += "\n}\n";
  return out;
}

void write_report(const PipelineReport& report, const std::filesystem::path& path) {
  write_file(path, format_report(report));
}

PipelineReport parse_report(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, std::string("report JSON: ") + e.what());
  }
  PipelineReport r;
  try {
    r.scale_detected = json_field(j, "scale_detected").get<bool>();
    r.scale = json_field(j, "scale").get<double>();
    r.relative_pose = json_rigid(j, "relative_pose");
    r.icp_transform = json_rigid(j, "icp_transform");
    const json& fin = json_field(j, "final_transform");
    r.final_transform = Sim3d(json_field(fin, "scale").get<double>(),
                              json_rotation(json_field(fin, "rotation"), "rotation"),
                              json_vector<3>(json_field(fin, "translation"), "translation"));
    r.rms = json_field(j, "rms").get<double>();
    r.iterations = json_field(j, "iterations").get<int>();
    r.covariance = json_matrix6(json_field(j, "covariance"), "covariance");
    r.information = json_matrix6(json_field(j, "information"), "information");
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("report JSON: ") + e.what());
  }
  return r;
}

PipelineReport read_report(const std::filesystem::path& path) { return parse_report(read_file(path)); }

}  // namespace pcr
