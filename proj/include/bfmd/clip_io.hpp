// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Raw pixel clip container: magic "BFMDCLIP", four little-endian u32 dims
// (T, H, W, C), then row-major u8 pixels.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bfmd {

struct ClipTensor {
  std::uint32_t frames = 0;   // T
  std::uint32_t height = 0;   // H
  std::uint32_t width = 0;    // W
  std::uint32_t channels = 0; // C
  std::vector<std::uint8_t> pixels;  // T*H*W*C, row-major

  std::size_t index(std::uint32_t t, std::uint32_t y, std::uint32_t x,
                    std::uint32_t c) const {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * channels + c;
  }
  std::uint8_t& at(std::uint32_t t, std::uint32_t y, std::uint32_t x,
                   std::uint32_t c) {
    return pixels[index(t, y, x, c)];
  }
  std::uint8_t at(std::uint32_t t, std::uint32_t y, std::uint32_t x,
                  std::uint32_t c) const {
    return pixels[index(t, y, x, c)];
  }
};

void write_clip(const std::string& path, const ClipTensor& clip);
ClipTensor read_clip(const std::string& path);

}  // namespace bfmd
