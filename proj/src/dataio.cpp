#include "rlab/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "bytes.hpp"
#include "rlab/error.hpp"
#include "rlab/rng.hpp"

namespace rlab {

using detail::Reader;

IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4, "IDX magic");
  if (magic[0] != 0 || magic[1] != 0) throw ParseError("bad IDX magic", 0);
  IdxHeader h;
  h.type_code = magic[2];
  if (h.type_code != kIdxUnsignedByte && h.type_code != kIdxDouble) {
    throw ParseError("unsupported IDX type code", 2);
  }
  const std::uint8_t rank = magic[3];
  if (rank == 0 || rank > 4) throw ParseError("unsupported IDX rank", 3);
  for (std::uint8_t i = 0; i < rank; ++i) h.dims.push_back(r.be32("IDX dims"));
  return h;
}

namespace {

std::size_t header_bytes(const IdxHeader& h) { return 4 + 4 * h.dims.size(); }

// Product of dims with overflow detection against the payload size.
std::uint64_t checked_product(std::span<const std::uint32_t> dims, std::size_t at) {
  std::uint64_t n = 1;
  for (std::uint32_t d : dims) {
    if (d != 0 && n > (std::uint64_t{1} << 40) / d) throw ParseError("IDX dims overflow", at);
    n *= d;
  }
  return n;
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::optional<std::size_t> limit, std::size_t num_classes) {
  const IdxHeader ih = parse_idx_header(images);
  const IdxHeader lh = parse_idx_header(labels);
  if (lh.type_code != kIdxUnsignedByte || lh.dims.size() != 1) {
    throw ParseError("label file must be rank-1 unsigned bytes", 2);
  }
  std::size_t dim = 0;
  if (ih.type_code == kIdxUnsignedByte) {
    if (ih.dims.size() != 3) throw ParseError("image file must be rank 3", 3);
    dim = checked_product(std::span(ih.dims).subspan(1), 8);
  } else {
    if (ih.dims.size() != 2) throw ParseError("f64 image file must be rank 2", 3);
    dim = ih.dims[1];
  }
  const std::uint64_t count = ih.dims[0];
  if (dim == 0) throw ParseError("zero-sized images", 8);
  if (lh.dims[0] != count) throw ParseError("image and label counts differ", 4);
  const std::size_t elem = ih.type_code == kIdxUnsignedByte ? 1 : 8;
  const std::uint64_t payload = checked_product(ih.dims, 4) * elem;
  const std::size_t ihead = header_bytes(ih);
  if (images.size() - ihead < payload) throw ParseError("truncated image payload", images.size());
  if (images.size() - ihead > payload) throw ParseError("trailing bytes after image payload", ihead + payload);
  const std::size_t lhead = header_bytes(lh);
  if (labels.size() - lhead != count) throw ParseError("label payload length mismatch", labels.size());

  const std::size_t n = limit ? std::min<std::size_t>(*limit, count) : count;
  Dataset data;
  data.num_classes = num_classes;
  data.examples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Example& ex = data.examples[k];
    const std::size_t label_at = lhead + k;
    ex.label = labels[label_at];
    if (ex.label >= num_classes) throw ParseError("label out of range", label_at);
    ex.input.resize(dim);
    if (elem == 1) {
      const std::uint8_t* p = images.data() + ihead + k * dim;
      for (std::size_t i = 0; i < dim; ++i) ex.input[i] = p[i] / 255.0;
    } else {
      Reader r(images.subspan(ihead + k * dim * 8, dim * 8));
      for (std::size_t i = 0; i < dim; ++i) {
        const std::size_t at = ihead + (k * dim + i) * 8;
        const double v = std::bit_cast<double>(r.be64("f64 pixel"));
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("pixel value outside [0,1]", at);
        ex.input[i] = v;
      }
    }
  }
  return data;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit, std::size_t num_classes) {
  return parse_idx(detail::read_file(images), detail::read_file(labels), limit, num_classes);
}

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, std::optional<std::size_t> limit) {
  if (bytes.empty()) throw ParseError("empty CIFAR-10 file", 0);
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw ParseError("file length is not a multiple of 3073", bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  const std::size_t n = limit ? std::min(*limit, count) : count;
  Dataset data;
  data.num_classes = 10;
  data.examples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t at = k * kCifarRecordBytes;
    Cifar10Record rec{bytes[at], bytes.subspan(at + 1, kCifarRecordBytes - 1)};
    if (rec.label >= 10) throw ParseError("CIFAR-10 label out of range", at);
    Example& ex = data.examples[k];
    ex.label = rec.label;
    ex.input.resize(rec.pixels.size());
    for (std::size_t i = 0; i < rec.pixels.size(); ++i) ex.input[i] = rec.pixels[i] / 255.0;
  }
  return data;
}

Dataset load_cifar10(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  return parse_cifar10(detail::read_file(path), limit);
}

std::vector<TextPair> parse_text_pairs(std::string_view text) {
  std::vector<TextPair> pairs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError("missing tab in text pair", line_no);
    std::string_view benign = line.substr(0, tab);
    std::string_view adversarial = line.substr(tab + 1);
    if (benign.empty() || adversarial.empty()) throw ParseError("empty field in text pair", line_no);
    if (adversarial.find('\t') != std::string_view::npos) throw ParseError("extra tab in text pair", line_no);
    pairs.push_back({std::string(benign), std::string(adversarial)});
  }
  return pairs;
}

std::vector<TextPair> load_text_pairs(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  return parse_text_pairs(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> serialize_idx_images(const Dataset& data) {
  std::vector<std::uint8_t> out = {0, 0, kIdxDouble, 2};
  detail::put_be32(out, static_cast<std::uint32_t>(data.size()));
  detail::put_be32(out, static_cast<std::uint32_t>(data.dim()));
  out.reserve(out.size() + data.size() * data.dim() * 8);
  for (const Example& ex : data.examples) {
    for (double v : ex.input) detail::put_be64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const Dataset& data) {
  std::vector<std::uint8_t> out = {0, 0, kIdxUnsignedByte, 1};
  detail::put_be32(out, static_cast<std::uint32_t>(data.size()));
  for (const Example& ex : data.examples) out.push_back(static_cast<std::uint8_t>(ex.label));
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  data.validate();
  detail::write_file(images, serialize_idx_images(data));
  detail::write_file(labels, serialize_idx_labels(data));
}

// Synthetic digits ------------------------------------------------------

namespace {

struct Pt {
  double x, y;
};

using Stroke = std::vector<Pt>;

Stroke line(Pt a, Pt b) { return {a, b}; }

Stroke quad(Pt a, Pt c, Pt b, int steps = 8) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const double u = 1.0 - t;
    s.push_back({u * u * a.x + 2 * u * t * c.x + t * t * b.x, u * u * a.y + 2 * u * t * c.y + t * t * b.y});
  }
  return s;
}

Stroke ellipse(Pt c, double rx, double ry, double from = 0.0, double to = 2.0 * std::numbers::pi,
               int steps = 16) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double a = from + (to - from) * i / steps;
    s.push_back({c.x + rx * std::cos(a), c.y + ry * std::sin(a)});
  }
  return s;
}

// Glyphs in a unit box, x to the right and y downwards.
std::vector<Stroke> glyph(std::size_t digit) {
  constexpr double pi = std::numbers::pi;
  switch (digit) {
    case 0:
      return {ellipse({0.5, 0.5}, 0.28, 0.4)};
    case 1:
      return {line({0.52, 0.1}, {0.5, 0.9}), line({0.36, 0.26}, {0.52, 0.1})};
    case 2:
      return {quad({0.24, 0.3}, {0.5, -0.05}, {0.74, 0.32}), quad({0.74, 0.32}, {0.6, 0.6}, {0.24, 0.9}),
              line({0.24, 0.9}, {0.78, 0.88})};
    case 3:
      return {quad({0.26, 0.14}, {0.86, 0.12}, {0.44, 0.48}), quad({0.44, 0.48}, {0.95, 0.7}, {0.24, 0.88})};
    case 4:
      return {line({0.64, 0.9}, {0.64, 0.1}), line({0.64, 0.1}, {0.2, 0.64}), line({0.2, 0.64}, {0.82, 0.64})};
    case 5:
      return {line({0.76, 0.1}, {0.32, 0.1}), line({0.32, 0.1}, {0.28, 0.46}),
              quad({0.28, 0.46}, {0.95, 0.4}, {0.28, 0.9})};
    case 6:
      return {quad({0.66, 0.1}, {0.28, 0.3}, {0.3, 0.66}), ellipse({0.5, 0.68}, 0.21, 0.22)};
    case 7:
      return {line({0.2, 0.1}, {0.8, 0.1}), line({0.8, 0.1}, {0.42, 0.9})};
    case 8:
      return {ellipse({0.5, 0.29}, 0.18, 0.19), ellipse({0.5, 0.7}, 0.22, 0.21)};
    case 9:
      return {ellipse({0.48, 0.32}, 0.2, 0.21), quad({0.68, 0.32}, {0.68, 0.6}, {0.58, 0.9})};
    default:
      return {ellipse({0.5, 0.5}, 0.3, 0.3, 0.0, pi)};
  }
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

std::vector<double> render_digit(std::size_t digit, Rng& rng) {
  constexpr int kSide = 28;
  std::vector<Stroke> strokes = glyph(digit);
  const double jitter = 0.025;
  for (Stroke& s : strokes) {
    for (Pt& p : s) {
      p.x += jitter * rng.normal();
      p.y += jitter * rng.normal();
    }
  }
  const double size = rng.uniform(17.0, 21.0);
  const double angle = rng.uniform(-0.22, 0.22);
  const double shear = rng.uniform(-0.25, 0.25);
  const double aspect = rng.uniform(0.8, 1.1);
  const double cx = 14.0 + rng.uniform(-1.5, 1.5);
  const double cy = 14.0 + rng.uniform(-1.5, 1.5);
  const double half_width = rng.uniform(0.9, 1.5);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (Stroke& s : strokes) {
    for (Pt& p : s) {
      double x = (p.x - 0.5) * size * aspect;
      double y = (p.y - 0.5) * size;
      x += shear * y;
      p = {cx + ca * x - sa * y, cy + sa * x + ca * y};
    }
  }
  std::vector<double> img(kSide * kSide, 0.0);
  for (int r = 0; r < kSide; ++r) {
    for (int c = 0; c < kSide; ++c) {
      const Pt p{c + 0.5, r + 0.5};
      double d = 1e9;
      for (const Stroke& s : strokes) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, segment_distance(p, s[i], s[i + 1]));
      }
      const double v = std::clamp(half_width - d + 0.5, 0.0, 1.0);
      img[r * kSide + c] = std::round(v * 255.0) / 255.0;
    }
  }
  return img;
}

}  // namespace

Dataset synth_digits(std::size_t n, std::uint64_t seed) {
  Dataset data;
  data.num_classes = 10;
  data.examples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(seed, k));
    data.examples[k].label = k % 10;
    data.examples[k].input = render_digit(k % 10, rng);
  }
  return data;
}

Dataset mini_digits() { return synth_digits(kMiniDigitsCount, kMiniDigitsSeed); }

Dataset synth_blobs(std::size_t n, std::uint64_t seed) {
  Dataset data;
  data.num_classes = 2;
  Rng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t label = k % 2;
    const double cx = label == 0 ? 0.3 : 0.7;
    const double cy = label == 0 ? 0.35 : 0.65;
    Example ex;
    ex.label = label;
    ex.input = {std::clamp(cx + 0.06 * rng.normal(), cx - 0.18, cx + 0.18),
                std::clamp(cy + 0.06 * rng.normal(), cy - 0.18, cy + 0.18)};
    data.examples.push_back(std::move(ex));
  }
  return data;
}

// Reports ---------------------------------------------------------------

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw ValidationError("report row has " + std::to_string(row.size()) + " cells, expected " +
                          std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  std::string s = buf;
  // Keep reals distinguishable from integers on re-parse.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const Cell& c) {
  if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (auto d = std::get_if<double>(&c)) return format_real(*d);
  return csv_field(std::get<std::string>(c));
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (auto i = std::get_if<std::int64_t>(&c)) return *i;
  if (auto d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return format_real(*d);
    return std::stod(format_real(*d));
  }
  return std::get<std::string>(c);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Cell parse_cell(const std::string& s) {
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ec == std::errc() && p == s.data() + s.size() && !s.empty()) return i;
  if (s == "nan" || s == "inf" || s == "-inf") return std::stod(s);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (!s.empty() && end == s.c_str() + s.size()) return d;
  return s;
}

}  // namespace

std::string render_report(const Report& report, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    nlohmann::ordered_json j;
    j["experiment"] = report.experiment;
    j["notes"] = report.notes;
    j["columns"] = report.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : report.rows) {
      nlohmann::ordered_json obj;
      for (std::size_t c = 0; c < row.size(); ++c) obj[report.columns[c]] = cell_json(row[c]);
      rows.push_back(std::move(obj));
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
  }
  std::string out = "# experiment: " + report.experiment + "\n";
  for (const auto& note : report.notes) out += "# " + note + "\n";
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    if (c) out += ',';
    out += csv_field(report.columns[c]);
  }
  out += '\n';
  for (const auto& row : report.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += cell_text(row[c]);
    }
    out += '\n';
  }
  return out;
}

void write_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write report to " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

Report parse_csv_report(std::string_view text) {
  Report report;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.starts_with("# ")) {
      if (have_header) throw ParseError("comment after header", line_no);
      std::string body = line.substr(2);
      if (body.starts_with("experiment: ") && report.experiment.empty()) {
        report.experiment = body.substr(12);
      } else {
        report.notes.push_back(std::move(body));
      }
      continue;
    }
    auto fields = split_csv_line(line);
    if (!have_header) {
      report.columns = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != report.columns.size()) throw ParseError("wrong number of CSV fields", line_no);
    std::vector<Cell> row;
    for (const auto& f : fields) row.push_back(parse_cell(f));
    report.rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("missing CSV header", line_no);
  return report;
}

}  // namespace rlab
