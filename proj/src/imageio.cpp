#include "sconv/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "sconv/errors.hpp"

namespace sconv {

namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// ---------------------------------------------------------------- PPM (P6)

int ppm_token(std::istream& in) {
  // Skips whitespace and '#' comments, then parses one decimal token.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw InputError("ppm: corrupt header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  if (c == EOF) throw InputError("ppm: corrupt header");
  return value;
}

Frame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("ppm: cannot open " + path.string());
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') {
    throw InputError("ppm: not a P6 file: " + path.string());
  }
  const int w = ppm_token(in);
  const int h = ppm_token(in);
  const int maxval = ppm_token(in);
  if (w < 1 || h < 1) throw InputError("ppm: bad dimensions in " + path.string());
  if (maxval != 255) throw InputError("ppm: unsupported maxval (must be 255): " + path.string());

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw InputError("ppm: truncated pixel data in " + path.string());
  }
  Frame f(w, h);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.at(0, y, x) = dequantize8(raw[i++]);
      f.at(1, y, x) = dequantize8(raw[i++]);
      f.at(2, y, x) = dequantize8(raw[i++]);
    }
  }
  return f;
}

void write_ppm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("ppm: cannot write " + path.string());
  out << "P6\n" << frame.width() << " " << frame.height() << "\n255\n";
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(frame.width()) * frame.height() * 3);
  std::size_t i = 0;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      raw[i++] = quantize8(frame.at(0, y, x));
      raw[i++] = quantize8(frame.at(1, y, x));
      raw[i++] = quantize8(frame.at(2, y, x));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw InputError("ppm: short write to " + path.string());
}

// ------------------------------------------------------------------- PNG

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

void png_open_read(PngReadCloser& ctx, const std::filesystem::path& path) {
  ctx.fp = std::fopen(path.string().c_str(), "rb");
  if (!ctx.fp) throw InputError("png: cannot open " + path.string());
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw InputError("png: allocation failure");
}

Frame read_png_frame(const std::filesystem::path& path) {
  PngReadCloser ctx;
  png_open_read(ctx, path);
  if (setjmp(png_jmpbuf(ctx.png))) throw InputError("png: corrupt file " + path.string());
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));

  // Normalize to 8-bit RGB.
  png_set_strip_16(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_set_palette_to_rgb(ctx.png);
  png_set_expand_gray_1_2_4_to_8(ctx.png);
  png_set_gray_to_rgb(ctx.png);
  png_read_update_info(ctx.png, ctx.info);
  if (png_get_rowbytes(ctx.png, ctx.info) != static_cast<std::size_t>(w) * 3) {
    throw InputError("png: unexpected row layout in " + path.string());
  }

  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  Frame f(w, h);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.at(0, y, x) = dequantize8(raw[i++]);
      f.at(1, y, x) = dequantize8(raw[i++]);
      f.at(2, y, x) = dequantize8(raw[i++]);
    }
  }
  return f;
}

void write_png_frame(const Frame& frame, const std::filesystem::path& path) {
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.string().c_str(), "wb");
  if (!ctx.fp) throw InputError("png: cannot write " + path.string());
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw InputError("png: allocation failure");
  if (setjmp(png_jmpbuf(ctx.png))) throw InputError("png: write failure for " + path.string());

  const int w = frame.width(), h = frame.height();
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);

  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    std::size_t i = 0;
    for (int x = 0; x < w; ++x) {
      row[i++] = quantize8(frame.at(0, y, x));
      row[i++] = quantize8(frame.at(1, y, x));
      row[i++] = quantize8(frame.at(2, y, x));
    }
    png_write_row(ctx.png, row.data());
  }
  png_write_end(ctx.png, nullptr);
}

// ------------------------------------------------------------------- PFM

float swap_endian(float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) |
         ((bits & 0x00ff0000u) >> 8) | ((bits & 0xff000000u) >> 24);
  return std::bit_cast<float>(bits);
}

DisparityMap read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("pfm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw InputError("pfm: bad magic (grayscale 'Pf' expected): " + path.string());
  int w = 0, h = 0;
  float scale = 0.0f;
  in >> w >> h >> scale;
  if (!in || w < 1 || h < 1 || scale == 0.0f) throw InputError("pfm: corrupt header in " + path.string());
  in.get();  // single whitespace after the header

  std::vector<float> raw(static_cast<std::size_t>(w) * h);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size() * sizeof(float)))) {
    throw InputError("pfm: truncated data in " + path.string());
  }
  const bool file_little = scale < 0.0f;
  const bool host_little = (std::endian::native == std::endian::little);
  if (file_little != host_little) {
    for (auto& v : raw) v = swap_endian(v);
  }

  // PFM rows are stored bottom-up.
  PlaneF values(h, w);
  for (int y = 0; y < h; ++y) {
    const float* src = raw.data() + static_cast<std::size_t>(h - 1 - y) * w;
    for (int x = 0; x < w; ++x) values(y, x) = src[x];
  }
  if (!values.isFinite().all()) throw InputError("pfm: non-finite values in " + path.string());
  return DisparityMap::from_plane(std::move(values));
}

void write_pfm(const DisparityMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("pfm: cannot write " + path.string());
  out << "Pf\n" << map.width() << " " << map.height() << "\n-1.0\n";
  std::vector<float> raw(static_cast<std::size_t>(map.width()) * map.height());
  for (int y = 0; y < map.height(); ++y) {
    float* dst = raw.data() + static_cast<std::size_t>(map.height() - 1 - y) * map.width();
    for (int x = 0; x < map.width(); ++x) dst[x] = map.values(y, x);
  }
  if (std::endian::native != std::endian::little) {
    for (auto& v : raw) v = swap_endian(v);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw InputError("pfm: short write to " + path.string());
}

// ------------------------------------------------------- 16-bit gray PNG

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".scale.txt";
  return p;
}

DisparityMap read_png16_disparity(const std::filesystem::path& path) {
  std::ifstream sc(sidecar_path(path));
  if (!sc) throw InputError("disparity png: missing sidecar " + sidecar_path(path).string());
  float scale = 0.0f;
  sc >> scale;
  if (!sc || !(scale > 0.0f)) {
    throw InputError("disparity png: bad scale in " + sidecar_path(path).string());
  }

  PngReadCloser ctx;
  png_open_read(ctx, path);
  if (setjmp(png_jmpbuf(ctx.png))) throw InputError("png: corrupt file " + path.string());
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);
  if (png_get_color_type(ctx.png, ctx.info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(ctx.png, ctx.info) != 16) {
    throw InputError("disparity png: expected 16-bit grayscale: " + path.string());
  }
  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  png_set_swap(ctx.png);  // PNG stores big-endian samples
  png_read_update_info(ctx.png, ctx.info);

  std::vector<std::uint16_t> raw(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    rows[static_cast<std::size_t>(y)] =
        reinterpret_cast<png_bytep>(raw.data() + static_cast<std::size_t>(y) * w);
  }
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  PlaneF values(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      values(y, x) = static_cast<float>(raw[static_cast<std::size_t>(y) * w + x]) * scale;
    }
  }
  return DisparityMap::from_plane(std::move(values));
}

void write_png16_disparity(const DisparityMap& map, const std::filesystem::path& path,
                           float scale) {
  if (!(scale > 0.0f)) throw ConfigError("disparity png: scale must be > 0");
  PngWriteCloser ctx;
  ctx.fp = std::fopen(path.string().c_str(), "wb");
  if (!ctx.fp) throw InputError("png: cannot write " + path.string());
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw InputError("png: allocation failure");
  if (setjmp(png_jmpbuf(ctx.png))) throw InputError("png: write failure for " + path.string());

  const int w = map.width(), h = map.height();
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  png_set_swap(ctx.png);

  std::vector<std::uint16_t> row(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float q = std::round(map.values(y, x) / scale);
      row[static_cast<std::size_t>(x)] =
          static_cast<std::uint16_t>(std::clamp(q, 0.0f, 65535.0f));
    }
    png_write_row(ctx.png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(ctx.png, nullptr);

  std::ofstream sc(sidecar_path(path));
  if (!sc) throw InputError("disparity png: cannot write sidecar for " + path.string());
  sc.precision(17);
  sc << scale << "\n";
}

}  // namespace

Frame read_frame(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") return read_ppm(path);
  if (ext == ".png") return read_png_frame(path);
  throw InputError("read_frame: unsupported format " + path.string());
}

void write_frame(const Frame& frame, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") return write_ppm(frame, path);
  if (ext == ".png") return write_png_frame(frame, path);
  throw InputError("write_frame: unsupported format " + path.string());
}

DisparityMap read_disparity(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png16_disparity(path);
  throw InputError("read_disparity: unsupported format " + path.string());
}

void write_disparity(const DisparityMap& map, const std::filesystem::path& path, float png_scale) {
  const std::string ext = lower_ext(path);
  if (ext == ".pfm") return write_pfm(map, path);
  if (ext == ".png") return write_png16_disparity(map, path, png_scale);
  throw InputError("write_disparity: unsupported format " + path.string());
}

void write_mask(const PlaneB& bits, const std::filesystem::path& path) {
  Frame f(static_cast<int>(bits.cols()), static_cast<int>(bits.rows()));
  for (int c = 0; c < 3; ++c) f.ch[c] = bits.cast<float>();
  write_frame(f, path);
}

PlaneB read_mask(const std::filesystem::path& path) {
  Frame f = read_frame(path);
  return f.ch[0] > 0.5f;
}

std::vector<std::filesystem::path> list_frame_sequence(const std::filesystem::path& dir,
                                                       const char* extension_hint) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("frame sequence: not a directory: " + dir.string());
  }
  std::map<int, std::filesystem::path> indexed;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = entry.path().stem().string();
    const std::string ext = lower_ext(entry.path());
    if (extension_hint != nullptr && ext != extension_hint) continue;
    if (extension_hint == nullptr && ext != ".png" && ext != ".ppm" && ext != ".pfm") continue;
    if (stem.size() != 6 || !std::all_of(stem.begin(), stem.end(),
                                         [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    indexed.emplace(std::stoi(stem), entry.path());
  }
  std::vector<std::filesystem::path> out;
  out.reserve(indexed.size());
  int expect = 0;
  for (const auto& [idx, p] : indexed) {
    if (idx != expect) {
      throw InputError("frame sequence: missing index " + std::to_string(expect) + " in " +
                       dir.string());
    }
    ++expect;
    out.push_back(p);
  }
  return out;
}

}  // namespace sconv
