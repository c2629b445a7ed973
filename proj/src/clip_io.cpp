// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/clip_io.hpp"

#include <cstring>
#include <fstream>

#include "bfmd/errors.hpp"

namespace bfmd {

namespace {

constexpr char kMagic[8] = {'B', 'F', 'M', 'D', 'C', 'L', 'I', 'P'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_clip(const std::string& path, const ClipTensor& clip) {
  const std::size_t expected = static_cast<std::size_t>(clip.frames) * clip.height *
                               clip.width * clip.channels;
  if (clip.pixels.size() != expected)
    throw InvalidParameter("write_clip: pixel buffer size does not match dims");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_clip: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, clip.frames);
  put_u32(os, clip.height);
  put_u32(os, clip.width);
  put_u32(os, clip.channels);
  os.write(reinterpret_cast<const char*>(clip.pixels.data()),
           static_cast<std::streamsize>(clip.pixels.size()));
  if (!os) throw IoError("write_clip: short write to " + path);
}

ClipTensor read_clip(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_clip: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("read_clip: bad magic in " + path);
  ClipTensor clip;
  clip.frames = get_u32(is);
  clip.height = get_u32(is);
  clip.width = get_u32(is);
  clip.channels = get_u32(is);
  const std::size_t n = static_cast<std::size_t>(clip.frames) * clip.height *
                        clip.width * clip.channels;
  clip.pixels.resize(n);
  is.read(reinterpret_cast<char*>(clip.pixels.data()),
          static_cast<std::streamsize>(n));
  if (!is) throw IoError("read_clip: truncated pixel data in " + path);
  return clip;
}

}  // namespace bfmd
