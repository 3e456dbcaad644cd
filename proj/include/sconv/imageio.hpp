#pragma once

#include <filesystem>
#include <vector>

#include "sconv/image.hpp"

namespace sconv {

/// Reads an 8-bit RGB frame; format is chosen by extension (.png or .ppm).
/// PPM must be binary P6 with maxval 255. Channel values become v/255.
Frame read_frame(const std::filesystem::path& path);

/// Writes an 8-bit RGB frame (round(v*255)); format by extension.
void write_frame(const Frame& frame, const std::filesystem::path& path);

/// Reads a disparity field. ".pfm" is grayscale PFM ('Pf'), scale sign gives
/// endianness, rows stored bottom-up. ".png" is 16-bit grayscale with a
/// "<path>.scale.txt" sidecar holding the factor S; values are raw * S.
DisparityMap read_disparity(const std::filesystem::path& path);

/// Writes disparity. PFM output is little-endian (scale -1). 16-bit PNG
/// output quantizes to round(v / S) and records S in the sidecar.
void write_disparity(const DisparityMap& map, const std::filesystem::path& path,
                     float png_scale = 1.0f / 64.0f);

/// Occlusion/edge masks ride on the frame formats as black/white images.
void write_mask(const PlaneB& bits, const std::filesystem::path& path);
PlaneB read_mask(const std::filesystem::path& path);

/// Indices 0..n-1 present as zero-padded frame files in `dir`; throws
/// InputError when the sequence has gaps.
std::vector<std::filesystem::path> list_frame_sequence(const std::filesystem::path& dir,
                                                       const char* extension_hint = nullptr);

}  // namespace sconv
