#pragma once

#include <string>

#include "ctmar/projector.hpp"

namespace ctmar {

// Binary containers: magic line ("SINO1\n" | "MASK1\n" | "IMG1\n"), one JSON
// header line {dims, layout "angle-major", unit, geom (hash), pitch_mm}, then
// the raw payload: little-endian float32 (sinogram/image) or 0/1 bytes
// (mask), row-major. Round-trips are bit-exact.

void write_sinogram(const std::string& path, const Sinogram& sino);
Sinogram read_sinogram(const std::string& path, const ScanGeometry* expect_geom = nullptr);

void write_mask(const std::string& path, const SinogramMask& mask, const ScanGeometry& geom);
SinogramMask read_mask(const std::string& path, const ScanGeometry* expect_geom = nullptr);

void write_image(const std::string& path, const Image& img);
Image read_image(const std::string& path);

// image-domain binary mask reuses the MASK1 container with a pixel pitch
void write_image_mask(const std::string& path, const GridB& mask, double pixel_pitch_mm);
GridB read_image_mask(const std::string& path, double* pixel_pitch_mm = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Windowed 8-bit grayscale render; format picked by extension (.png or .pgm).
// Values clamp to [lo, hi] and map linearly with round-half-up.
void render_gray(const std::string& path, const GridF& values, double window_lo, double window_hi);

}  // namespace ctmar
