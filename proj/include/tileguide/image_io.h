#ifndef TILEGUIDE_IMAGE_IO_H
#define TILEGUIDE_IMAGE_IO_H

#include <string>

#include "tileguide/executor.h"

namespace tileguide {

// By extension: .pgm (8-bit gray, x y), .ppm (8-bit RGB, x y c) with samples
// scaled to [0, 1], or .f64 (uint32 rank, uint32 extents, little-endian
// doubles, first dimension fastest).
buffer read_image(const std::string& path);
void write_image(const std::string& path, const buffer& b);

}  // namespace tileguide

#endif  // TILEGUIDE_IMAGE_IO_H
