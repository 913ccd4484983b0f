#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "astereo/grid.hpp"
#include "astereo/wavefield.hpp"

namespace astereo::io {

namespace fs = std::filesystem;

/// Single-channel PFM ("Pf"), little-endian, scale -1.0, rows stored bottom to top.
void write_pfm(const fs::path& path, const Gridd& image);
/// Reads "Pf" (gray) or "PF" (color; first channel kept) with either endianness.
Gridd read_pfm(const fs::path& path);

/// 8-bit binary PGM with values mapped linearly from [lo, hi] to [0, 255] and clamped.
void write_pgm8(const fs::path& path, const Gridd& image, double lo, double hi);
/// 8-bit PGM scaled to the grid's own [min, max].
void write_pgm8_auto(const fs::path& path, const Gridd& image);
/// 16-bit binary PGM (big-endian samples, maxval 65535).
void write_pgm16(const fs::path& path, const Grid<std::uint16_t>& image);
/// Binary mask as PGM with maxval 1 (nonzero -> 1).
void write_mask_pgm(const fs::path& path, const Gridd& mask);
/// Color-mapped 8-bit PPM preview over [lo, hi].
void write_colormap_ppm(const fs::path& path, const Gridd& image, double lo, double hi);

/// Netpbm image (P2/P3/P5/P6, 8 or 16 bit) normalized to [0, 1], one grid per channel.
struct NetpbmImage {
  std::vector<Gridd> channels;
};
NetpbmImage read_netpbm(const fs::path& path);
void write_ppm8(const fs::path& path, const Gridd& r, const Gridd& g, const Gridd& b);

/**
 * DOE height map: 8 text header lines
 *   ASTEREO-DOE 1 / N <n> / pitch_u <m> / lambda <m> / eta <x> / levels <k> / min <m> / max <m>
 * followed by N*N little-endian float32 heights in meters, row-major.
 */
void write_doe(const fs::path& path, const DOEProfile<double>& doe);
DOEProfile<double> read_doe(const fs::path& path);
/// 16-bit preview of the quantized level index of every sample.
void write_doe_levels_pgm16(const fs::path& path, const DOEProfile<double>& doe);

void ensure_parent(const fs::path& path);

}  // namespace astereo::io
