#include "astereo/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace astereo::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return in;
}

// Next whitespace-delimited token of a netpbm/PFM header, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

long parse_long(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw FormatError("");
    return v;
  } catch (const std::exception&) {
    throw FormatError("malformed header field '" + s + "' in " + path.string());
  }
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v & 0xff0000u) >> 8) | ((v & 0xff000000u) >> 24);
}

void put_f32_le(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  if constexpr (std::endian::native == std::endian::big) u = byteswap32(u);
  out.write(reinterpret_cast<const char*>(&u), 4);
}

float get_f32(std::istream& in, bool little) {
  std::uint32_t u = 0;
  in.read(reinterpret_cast<char*>(&u), 4);
  const bool native_little = std::endian::native == std::endian::little;
  if (little != native_little) u = byteswap32(u);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

std::uint8_t to_u8(double v, double lo, double hi) {
  const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

}  // namespace

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_pfm(const fs::path& path, const Gridd& image) {
  auto out = open_out(path);
  out << "Pf\n" << image.cols() << ' ' << image.rows() << "\n-1.0\n";
  for (Eigen::Index y = image.rows() - 1; y >= 0; --y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) put_f32_le(out, static_cast<float>(image(y, x)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Gridd read_pfm(const fs::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in);
  int channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    throw FormatError("not a PFM file: " + path.string());
  }
  const long w = parse_long(header_token(in), path);
  const long h = parse_long(header_token(in), path);
  const std::string scale_tok = header_token(in);
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw FormatError("malformed PFM scale in " + path.string());
  }
  if (w <= 0 || h <= 0 || scale == 0) throw FormatError("invalid PFM header in " + path.string());
  const bool little = scale < 0;
  Gridd img(h, w);
  for (long y = h - 1; y >= 0; --y) {
    for (long x = 0; x < w; ++x) {
      img(y, x) = get_f32(in, little);
      for (int c = 1; c < channels; ++c) get_f32(in, little);
    }
  }
  if (!in) throw FormatError("truncated PFM data in " + path.string());
  return img;
}

void write_pgm8(const fs::path& path, const Gridd& image, double lo, double hi) {
  auto out = open_out(path);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < image.size(); ++i) out.put(static_cast<char>(to_u8(image(i), lo, hi)));
}

void write_pgm8_auto(const fs::path& path, const Gridd& image) {
  write_pgm8(path, image, image.minCoeff(), image.maxCoeff());
}

void write_pgm16(const fs::path& path, const Grid<std::uint16_t>& image) {
  auto out = open_out(path);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    out.put(static_cast<char>(image(i) >> 8));
    out.put(static_cast<char>(image(i) & 0xff));
  }
}

void write_mask_pgm(const fs::path& path, const Gridd& mask) {
  auto out = open_out(path);
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n1\n";
  for (Eigen::Index i = 0; i < mask.size(); ++i) out.put(mask(i) != 0 ? 1 : 0);
}

void write_ppm8(const fs::path& path, const Gridd& r, const Gridd& g, const Gridd& b) {
  require_same_shape(r, g, "write_ppm8");
  require_same_shape(r, b, "write_ppm8");
  auto out = open_out(path);
  out << "P6\n" << r.cols() << ' ' << r.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    out.put(static_cast<char>(to_u8(r(i), 0, 1)));
    out.put(static_cast<char>(to_u8(g(i), 0, 1)));
    out.put(static_cast<char>(to_u8(b(i), 0, 1)));
  }
}

void write_colormap_ppm(const fs::path& path, const Gridd& image, double lo, double hi) {
  // piecewise-linear blue -> cyan -> yellow -> red
  static constexpr std::array<std::array<double, 3>, 4> stops{{{0.0, 0.0, 0.6}, {0.0, 0.8, 1.0}, {1.0, 0.9, 0.0}, {0.8, 0.0, 0.0}}};
  Gridd r(image.rows(), image.cols()), g(image.rows(), image.cols()), b(image.rows(), image.cols());
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    double t = hi > lo ? (image(i) - lo) / (hi - lo) : 0.0;
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 3.0;
    const int k = std::min(2, static_cast<int>(t));
    const double a = t - k;
    r(i) = (1 - a) * stops[k][0] + a * stops[k + 1][0];
    g(i) = (1 - a) * stops[k][1] + a * stops[k + 1][1];
    b(i) = (1 - a) * stops[k][2] + a * stops[k + 1][2];
  }
  write_ppm8(path, r, g, b);
}

NetpbmImage read_netpbm(const fs::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in);
  int channels = 0;
  bool ascii = false;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else if (magic == "P2") {
    channels = 1, ascii = true;
  } else if (magic == "P3") {
    channels = 3, ascii = true;
  } else {
    throw FormatError("unsupported image format (expected PGM/PPM): " + path.string());
  }
  const long w = parse_long(header_token(in), path);
  const long h = parse_long(header_token(in), path);
  const long maxval = parse_long(header_token(in), path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw FormatError("invalid netpbm header in " + path.string());
  NetpbmImage img;
  img.channels.assign(static_cast<std::size_t>(channels), Gridd(h, w));
  const double inv = 1.0 / static_cast<double>(maxval);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        long v = 0;
        if (ascii) {
          v = parse_long(header_token(in), path);
        } else if (maxval < 256) {
          v = static_cast<unsigned char>(in.get());
        } else {
          const int hi = in.get();
          const int lo = in.get();
          v = (hi << 8) | lo;
        }
        img.channels[static_cast<std::size_t>(c)](y, x) = static_cast<double>(v) * inv;
      }
    }
  }
  if (!in) throw FormatError("truncated image data in " + path.string());
  return img;
}

void write_doe(const fs::path& path, const DOEProfile<double>& doe) {
  auto out = open_out(path);
  out.precision(17);
  out << "ASTEREO-DOE 1\n"
      << "N " << doe.size() << '\n'
      << "pitch_u " << doe.pitch() << '\n'
      << "lambda " << doe.wavelength() << '\n'
      << "eta " << doe.eta() << '\n'
      << "levels " << doe.levels() << '\n'
      << "min " << doe.heights().minCoeff() << '\n'
      << "max " << doe.heights().maxCoeff() << '\n';
  for (Eigen::Index i = 0; i < doe.heights().size(); ++i) put_f32_le(out, static_cast<float>(doe.heights()(i)));
  if (!out) throw IoError("write failed: " + path.string());
}

DOEProfile<double> read_doe(const fs::path& path) {
  auto in = open_in(path);
  std::array<std::string, 8> lines;
  for (auto& l : lines) {
    if (!std::getline(in, l)) throw FormatError("truncated DOE header in " + path.string());
  }
  if (lines[0] != "ASTEREO-DOE 1") throw FormatError("bad DOE magic in " + path.string());
  auto field = [&](int i, const char* key) {
    std::istringstream ss(lines[static_cast<std::size_t>(i)]);
    std::string k;
    double v;
    if (!(ss >> k >> v) || k != key) throw FormatError(std::string("DOE header: expected '") + key + "' in " + path.string());
    return v;
  };
  const auto n = static_cast<Eigen::Index>(field(1, "N"));
  const double pitch = field(2, "pitch_u");
  const double lambda = field(3, "lambda");
  const double eta = field(4, "eta");
  const int levels = static_cast<int>(field(5, "levels"));
  field(6, "min");
  field(7, "max");
  if (n < 2) throw FormatError("DOE header: N must be >= 2");
  Gridd h(n, n);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = get_f32(in, true);
  if (!in) throw FormatError("truncated DOE data in " + path.string());
  return DOEProfile<double>(std::move(h), eta, levels, pitch, lambda);
}

void write_doe_levels_pgm16(const fs::path& path, const DOEProfile<double>& doe) {
  const auto q = quantize_heights(doe);
  const double step = doe.max_height() / doe.levels();
  const double unit = 65535.0 / static_cast<double>(doe.levels() - 1);
  Grid<std::uint16_t> img(q.size(), q.size());
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const long k = std::lround(q.heights()(i) / step);
    img(i) = static_cast<std::uint16_t>(std::lround(static_cast<double>(k) * unit));
  }
  write_pgm16(path, img);
}

}  // namespace astereo::io
