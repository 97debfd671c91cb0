/******************************************************************************
 * Copyright 2026 The orbit-splat Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#include "osplat/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace osplat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

template <class T>
void save_png(const ImageT<T>& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0)
    throw ValidationError("save_png: empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("save_png: cannot open " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: libpng error writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(std::size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(double(img.at(y, x, c)), 0.0, 1.0);
        row[std::size_t(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(255.0 * v));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

template <class T>
ImageT<T> load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("load_png: cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw IoError("load_png: not a PNG file: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: libpng error reading " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize everything to 8-bit RGB.
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  ImageT<T> img(w, h);
  std::vector<unsigned char> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = T(row[std::size_t(x) * 3 + c]) / T(255);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {
constexpr char kRawMagic[8] = {'O', 'S', 'I', 'M', 'G', 'F', '1', '\n'};

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}
}  // namespace

template <class T>
void save_raw(const ImageT<T>& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_raw: cannot open " + path);
  os.write(kRawMagic, 8);
  put_u32(os, std::uint32_t(img.width));
  put_u32(os, std::uint32_t(img.height));
  put_u32(os, 3);
  for (const T v : img.data) {
    const float f = float(v);
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!os) throw IoError("save_raw: write failed for " + path);
}

template <class T>
ImageT<T> load_raw(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_raw: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kRawMagic, 8) != 0)
    throw IoError("load_raw: bad magic in " + path);
  const int w = int(get_u32(is));
  const int h = int(get_u32(is));
  const int c = int(get_u32(is));
  if (c != 3) throw IoError("load_raw: expected 3 channels, got " + std::to_string(c));
  ImageT<T> img(w, h);
  for (auto& v : img.data) {
    float f;
    is.read(reinterpret_cast<char*>(&f), 4);
    v = T(f);
  }
  if (!is) throw IoError("load_raw: truncated file " + path);
  return img;
}

template void save_png<float>(const ImageT<float>&, const std::string&);
template void save_png<double>(const ImageT<double>&, const std::string&);
template ImageT<float> load_png<float>(const std::string&);
template ImageT<double> load_png<double>(const std::string&);
template void save_raw<float>(const ImageT<float>&, const std::string&);
template void save_raw<double>(const ImageT<double>&, const std::string&);
template ImageT<float> load_raw<float>(const std::string&);
template ImageT<double> load_raw<double>(const std::string&);

}  // namespace osplat
