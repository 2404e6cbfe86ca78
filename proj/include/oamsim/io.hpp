#pragma once

// Artifact output: deterministic CSV (comma, '.' decimal, header row, LF),
// JSON summaries, a flat little-endian binary container for fields and
// screens, and lossy PNG intensity/phase maps for inspection.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "oamsim/field.hpp"
#include "oamsim/turbulence.hpp"

namespace oamsim {

// Shortest round-trip decimal representation, identical on every platform.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
    columns_ = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw std::invalid_argument("csv: cell count does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
};

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << body;
}

// ---------------------------------------------------------------------------
// Binary container: magic "OAMS", version, kind (0 complex, 1 real), n,
// pitch, wavelength, aux (r0 for screens); payload little-endian f64.

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint32_t get_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

inline double get_f64(std::ifstream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

inline void write_container(const std::string& path, std::uint32_t kind, int n,
                            double pitch, double wavelength, double aux,
                            const double* payload, std::size_t count) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("container: cannot open " + path);
  out.write("OAMS", 4);
  put_u32(out, 1);
  put_u32(out, kind);
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, 0);
  put_f64(out, pitch);
  put_f64(out, wavelength);
  put_f64(out, aux);
  out.write(reinterpret_cast<const char*>(payload), 8 * count);
  if (!out) throw std::runtime_error("container: write failed for " + path);
}

struct ContainerHeader {
  std::uint32_t kind = 0;
  int n = 0;
  double pitch = 0, wavelength = 0, aux = 0;
};

inline ContainerHeader read_container_header(std::ifstream& in,
                                             const std::string& path) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "OAMS", 4) != 0)
    throw std::runtime_error("container: bad magic in " + path);
  const std::uint32_t version = get_u32(in);
  if (version != 1)
    throw std::runtime_error("container: unsupported version in " + path);
  ContainerHeader h;
  h.kind = get_u32(in);
  h.n = static_cast<int>(get_u32(in));
  get_u32(in);
  h.pitch = get_f64(in);
  h.wavelength = get_f64(in);
  h.aux = get_f64(in);
  return h;
}

}  // namespace detail

inline void save_field(const ComplexField& f, const std::string& path) {
  const GridSpec& g = f.grid();
  detail::write_container(
      path, 0, g.n, g.pitch, g.wavelength, 0.0,
      reinterpret_cast<const double*>(f.samples().data()),
      2 * f.samples().size());
}

inline ComplexField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("container: cannot open " + path);
  const auto h = detail::read_container_header(in, path);
  if (h.kind != 0) throw std::runtime_error("container: not a field: " + path);
  GridSpec g;
  g.n = h.n;
  g.pitch = h.pitch;
  g.wavelength = h.wavelength;
  g.validate();
  ComplexField f(g);
  in.read(reinterpret_cast<char*>(f.samples().data()),
          16 * static_cast<std::streamsize>(f.samples().size()));
  if (!in) throw std::runtime_error("container: truncated field in " + path);
  return f;
}

inline void save_screen(const PhaseScreen& s, const std::string& path) {
  detail::write_container(path, 1, s.grid.n, s.grid.pitch, s.grid.wavelength,
                          s.r0, s.phase.data(), s.phase.size());
}

inline PhaseScreen load_screen(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("container: cannot open " + path);
  const auto h = detail::read_container_header(in, path);
  if (h.kind != 1) throw std::runtime_error("container: not a screen: " + path);
  PhaseScreen s;
  s.grid.n = h.n;
  s.grid.pitch = h.pitch;
  s.grid.wavelength = h.wavelength;
  s.grid.validate();
  s.r0 = h.aux;
  s.phase.resize(static_cast<std::size_t>(h.n) * h.n);
  in.read(reinterpret_cast<char*>(s.phase.data()),
          8 * static_cast<std::streamsize>(s.phase.size()));
  if (!in) throw std::runtime_error("container: truncated screen in " + path);
  return s;
}

// ---------------------------------------------------------------------------
// PNG inspection maps (8-bit grayscale)

namespace detail {

inline void write_png_gray(const std::string& path, int n,
                           const std::vector<unsigned char>& pixels) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("png: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: write failed for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, n, n, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < n; ++r)
    png_write_row(png, const_cast<png_bytep>(&pixels[static_cast<std::size_t>(r) * n]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace detail

// |f|^2 scaled to the frame maximum.
inline void save_intensity_png(const ComplexField& f, const std::string& path) {
  const int n = f.grid().n;
  double peak = 0.0;
  for (const cplx& v : f.samples()) peak = std::max(peak, std::norm(v));
  std::vector<unsigned char> px(static_cast<std::size_t>(n) * n, 0);
  if (peak > 0.0)
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = static_cast<unsigned char>(
          255.0 * std::norm(f.samples()[i]) / peak + 0.5);
  detail::write_png_gray(path, n, px);
}

// arg(f) mapped from [-pi, pi] onto [0, 255].
inline void save_phase_png(const ComplexField& f, const std::string& path) {
  const int n = f.grid().n;
  std::vector<unsigned char> px(static_cast<std::size_t>(n) * n, 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double ph = std::arg(f.samples()[i]);
    px[i] = static_cast<unsigned char>(255.0 * (ph + M_PI) / (2.0 * M_PI));
  }
  detail::write_png_gray(path, n, px);
}

inline void save_screen_png(const PhaseScreen& s, const std::string& path) {
  const int n = s.grid.n;
  double lo = s.phase[0], hi = s.phase[0];
  for (double v : s.phase) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<unsigned char> px(static_cast<std::size_t>(n) * n, 0);
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<unsigned char>(255.0 * (s.phase[i] - lo) / span);
  detail::write_png_gray(path, n, px);
}

}  // namespace oamsim
