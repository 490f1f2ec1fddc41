#include "advlab/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "advlab/errors.hpp"

namespace advlab {

namespace {

void put_be32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& data) {
  put_be32(out, static_cast<uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
            static_cast<uInt>(body.size())));
  put_be32(out, crc);
}

// 5x7 glyphs for tick labels; rows are 5-bit masks, MSB = leftmost pixel.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kGlyphs[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  for (const auto& g : kGlyphs)
    if (g.ch == c) return &g;
  return nullptr;
}

struct Canvas {
  int w, h;
  std::vector<uint8_t> rgb;

  Canvas(int width, int height)
      : w(width), h(height),
        rgb(static_cast<size_t>(width) * height * 3, 255) {}

  void set(int x, int y, const std::array<uint8_t, 3>& c) {
    if (x < 0 || x >= w || y < 0 || y >= h) return;
    size_t o = (static_cast<size_t>(y) * w + x) * 3;
    rgb[o] = c[0];
    rgb[o + 1] = c[1];
    rgb[o + 2] = c[2];
  }

  void line(int x0, int y0, int x1, int y1, const std::array<uint8_t, 3>& c) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, const std::array<uint8_t, 3>& c) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) set(x + dx, y + dy, c);
  }

  void text(int x, int y, const std::string& s,
            const std::array<uint8_t, 3>& c) {
    for (char ch : s) {
      if (const Glyph* g = find_glyph(ch)) {
        for (int r = 0; r < 7; ++r)
          for (int b = 0; b < 5; ++b)
            if (g->rows[r] & (1 << (4 - b))) set(x + b, y + r, c);
      }
      x += 6;
    }
  }
};

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return {buf};
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path,
                   const std::vector<uint8_t>& rgb, int width, int height) {
  std::string raw;
  raw.reserve(static_cast<size_t>(height) * (1 + 3 * width));
  for (int y = 0; y < height; ++y) {
    raw.push_back('\0');  // filter: none
    raw.append(reinterpret_cast<const char*>(rgb.data() +
                                             static_cast<size_t>(y) * width * 3),
               static_cast<size_t>(width) * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string deflated(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(deflated.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error("png deflate failed");
  deflated.resize(bound);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, static_cast<uint32_t>(width));
  put_be32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(png, "IHDR", ihdr);
  put_chunk(png, "IDAT", deflated);
  put_chunk(png, "IEND", "");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write plot: " + path.string());
  out.write(png.data(), static_cast<std::streamsize>(png.size()));
}

void render_line_chart(const std::filesystem::path& path,
                       const std::vector<ChartSeries>& series, double y_min,
                       double y_max, int width, int height) {
  Canvas canvas(width, height);
  const std::array<uint8_t, 3> black{0, 0, 0};
  const std::array<uint8_t, 3> grey{210, 210, 210};
  int left = 48, right = width - 16, top = 16, bottom = height - 36;

  double x_min = 0.0, x_max = 1.0;
  bool first = true;
  for (const auto& s : series)
    for (double x : s.xs) {
      if (first) {
        x_min = x_max = x;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
    }
  if (x_max == x_min) x_max = x_min + 1.0;

  auto px = [&](double x) {
    return left + static_cast<int>((x - x_min) / (x_max - x_min) * (right - left));
  };
  auto py = [&](double y) {
    return bottom - static_cast<int>((y - y_min) / (y_max - y_min) * (bottom - top));
  };

  for (int i = 0; i <= 5; ++i) {
    double yv = y_min + (y_max - y_min) * i / 5.0;
    canvas.line(left, py(yv), right, py(yv), grey);
    canvas.text(6, py(yv) - 3, fmt_num(yv), black);
  }
  canvas.line(left, top, left, bottom, black);
  canvas.line(left, bottom, right, bottom, black);

  std::vector<double> xticks;
  for (const auto& s : series)
    for (double x : s.xs)
      if (std::find(xticks.begin(), xticks.end(), x) == xticks.end())
        xticks.push_back(x);
  std::sort(xticks.begin(), xticks.end());
  for (double x : xticks) {
    canvas.line(px(x), bottom, px(x), bottom + 4, black);
    canvas.text(px(x) - 6, bottom + 8, fmt_num(x), black);
  }

  int legend_y = top + 4;
  for (const auto& s : series) {
    for (size_t i = 0; i + 1 < s.xs.size(); ++i)
      canvas.line(px(s.xs[i]), py(s.ys[i]), px(s.xs[i + 1]), py(s.ys[i + 1]),
                  s.color);
    for (size_t i = 0; i < s.xs.size(); ++i)
      canvas.dot(px(s.xs[i]), py(s.ys[i]), s.color);
    // legend swatch column on the right margin
    for (int dy = 0; dy < 6; ++dy)
      for (int dx = 0; dx < 14; ++dx)
        canvas.set(right - 20 + dx, legend_y + dy, s.color);
    legend_y += 10;
  }

  write_png_rgb(path, canvas.rgb, width, height);
}

}  // namespace advlab
