#ifndef FUZZYSEG_IO_HPP
#define FUZZYSEG_IO_HPP

#include "fuzzyseg/field.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fuzzyseg {

/// Contents of an FF1 container: H x W x C float32 values, pixel-major then channel.
///
/// On disk the container is the ASCII header `FF1 <H> <W> <C>\n` followed by
/// H*W*C little-endian IEEE-754 binary32 values.
struct RawField {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  std::vector<float> values;
};

void write_field(const std::filesystem::path& path, const RawField& field);
RawField read_field(const std::filesystem::path& path);

/// Float64 sibling of FF1 (`FD1 <H> <W> <C>\n` + little-endian binary64), used for checkpoints.
struct RawField64 {
  Index height = 0;
  Index width = 0;
  Index channels = 0;
  std::vector<double> values;
};

void write_field64(const std::filesystem::path& path, const RawField64& field);
RawField64 read_field64(const std::filesystem::path& path);

template <typename Scalar>
RawField to_raw(const ScalarImage<Scalar>& img) {
  RawField raw{img.height(), img.width(), 1, std::vector<float>(static_cast<std::size_t>(img.size()))};
  for (Index j = 0; j < img.size(); ++j) raw.values[static_cast<std::size_t>(j)] = static_cast<float>(img[j]);
  return raw;
}

template <typename Scalar>
RawField to_raw(const MembershipField<Scalar>& f) {
  RawField raw{f.height(), f.width(), f.classes(), {}};
  raw.values.reserve(static_cast<std::size_t>(f.pixels() * f.classes()));
  for (Index j = 0; j < f.pixels(); ++j)
    for (Index k = 0; k < f.classes(); ++k) raw.values.push_back(static_cast<float>(f(j, k)));
  return raw;
}

ScalarImage<double> image_from_raw(const RawField& raw, Spacing spacing = {});
MembershipField<double> membership_from_raw(const RawField& raw);

/// Binary PGM (P5). Values wider than 8 bits are stored big-endian with maxval 65535.
struct GrayImage {
  Index height = 0;
  Index width = 0;
  int maxval = 255;
  std::vector<std::uint16_t> values;
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Labels are stored as raw class indices. `classes` <= 0 infers max label + 1.
LabelMap read_labels_pgm(const std::filesystem::path& path, int classes = 0);
void write_labels_pgm(const std::filesystem::path& path, const LabelMap& labels);
ScalarImage<double> read_image_pgm(const std::filesystem::path& path);

/// Loads an intensity image from FF1 (C must be 1) or PGM, chosen by extension.
ScalarImage<double> read_image(const std::filesystem::path& path);

struct RgbImage {
  Index height = 0;
  Index width = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel
};

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

/// Grayscale rendering of `image` with bone (label 1) tinted green and lesion (label 2) tinted red.
RgbImage render_overlay(const ScalarImage<double>& image, const LabelMap& labels);

}  // namespace fuzzyseg

#endif  // FUZZYSEG_IO_HPP
