#include "fuzzyseg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace fuzzyseg {

namespace {

// Upper bound on stored values; keeps H*W*C*8 well inside size_t.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path.string());
}

std::uint64_t parse_dimension(const std::string& bytes, std::size_t& pos, char terminator) {
  const std::size_t start = pos;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') ++pos;
  if (pos == start || pos >= bytes.size() || bytes[pos] != terminator) throw io_error("malformed header");
  if (pos - start > 18) throw io_error("dimension overflow");
  std::uint64_t value = 0;
  std::from_chars(bytes.data() + start, bytes.data() + pos, value);
  ++pos;
  return value;
}

template <typename Word, typename Value>
void append_le(std::string& out, Value v) {
  const Word bits = std::bit_cast<Word>(v);
  for (std::size_t b = 0; b < sizeof(Word); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

template <typename Word, typename Value>
Value load_le(const char* p) {
  Word bits = 0;
  for (std::size_t b = 0; b < sizeof(Word); ++b)
    bits |= static_cast<Word>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<Value>(bits);
}

template <typename Word, typename Value, typename Raw>
void write_container(const std::filesystem::path& path, const char* magic, const Raw& field) {
  const auto n = static_cast<std::size_t>(field.height * field.width * field.channels);
  if (field.values.size() != n) throw usage_error("field payload does not match its dimensions");
  std::string bytes = std::string(magic) + " " + std::to_string(field.height) + " " + std::to_string(field.width) +
                      " " + std::to_string(field.channels) + "\n";
  bytes.reserve(bytes.size() + n * sizeof(Word));
  for (Value v : field.values) append_le<Word>(bytes, v);
  dump(path, bytes);
}

template <typename Word, typename Value, typename Raw>
Raw read_container(const std::filesystem::path& path, const char* magic) {
  const std::string bytes = slurp(path);
  const std::string prefix = std::string(magic) + " ";
  if (bytes.compare(0, prefix.size(), prefix) != 0) throw io_error("bad magic in " + path.string());
  std::size_t pos = prefix.size();
  const std::uint64_t h = parse_dimension(bytes, pos, ' ');
  const std::uint64_t w = parse_dimension(bytes, pos, ' ');
  const std::uint64_t c = parse_dimension(bytes, pos, '\n');
  if ((w != 0 && h > kMaxElements / w) || (c != 0 && h * w > kMaxElements / c)) throw io_error("dimension overflow");
  const std::uint64_t n = h * w * c;
  if (bytes.size() - pos != n * sizeof(Word)) throw io_error("truncated payload in " + path.string());
  Raw raw;
  raw.height = static_cast<Index>(h);
  raw.width = static_cast<Index>(w);
  raw.channels = static_cast<Index>(c);
  raw.values.resize(static_cast<std::size_t>(n));
  const char* p = bytes.data() + pos;
  for (std::size_t i = 0; i < raw.values.size(); ++i, p += sizeof(Word)) raw.values[i] = load_le<Word, Value>(p);
  return raw;
}

// Reads the next whitespace-delimited token of a netpbm header, skipping comments.
std::string next_token(const std::string& bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw io_error("truncated netpbm header");
  return bytes.substr(start, pos - start);
}

long parse_header_int(const std::string& token) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value < 0) throw io_error("malformed netpbm header");
  return value;
}

}  // namespace

void write_field(const std::filesystem::path& path, const RawField& field) {
  write_container<std::uint32_t, float>(path, "FF1", field);
}

RawField read_field(const std::filesystem::path& path) {
  return read_container<std::uint32_t, float, RawField>(path, "FF1");
}

void write_field64(const std::filesystem::path& path, const RawField64& field) {
  write_container<std::uint64_t, double>(path, "FD1", field);
}

RawField64 read_field64(const std::filesystem::path& path) {
  return read_container<std::uint64_t, double, RawField64>(path, "FD1");
}

ScalarImage<double> image_from_raw(const RawField& raw, Spacing spacing) {
  if (raw.channels != 1) throw usage_error("expected a single-channel field");
  PlaneArray<double> pixels(raw.height, raw.width);
  for (Index j = 0; j < pixels.size(); ++j) pixels.data()[j] = raw.values[static_cast<std::size_t>(j)];
  return ScalarImage<double>(std::move(pixels), spacing);
}

MembershipField<double> membership_from_raw(const RawField& raw) {
  ChannelArray<double> v(raw.height * raw.width, raw.channels);
  std::size_t i = 0;
  for (Index j = 0; j < v.rows(); ++j)
    for (Index k = 0; k < v.cols(); ++k) v(j, k) = raw.values[i++];
  return MembershipField<double>(raw.height, raw.width, std::move(v));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw io_error("bad magic in " + path.string());
  GrayImage img;
  img.width = parse_header_int(next_token(bytes, pos));
  img.height = parse_header_int(next_token(bytes, pos));
  img.maxval = static_cast<int>(parse_header_int(next_token(bytes, pos)));
  if (img.maxval < 1 || img.maxval > 65535) throw io_error("unsupported PGM maxval");
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = static_cast<std::size_t>(img.width * img.height);
  const std::size_t bpp = img.maxval > 255 ? 2 : 1;
  if (pos > bytes.size() || bytes.size() - pos < n * bpp) throw io_error("truncated payload in " + path.string());
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + i * bpp]);
    img.values[i] = bpp == 2 ? static_cast<std::uint16_t>((hi << 8) | static_cast<unsigned char>(bytes[pos + i * 2 + 1]))
                             : hi;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.values.size() != static_cast<std::size_t>(image.height * image.width))
    throw usage_error("PGM payload does not match its dimensions");
  std::string bytes = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n" +
                      std::to_string(image.maxval) + "\n";
  const bool wide = image.maxval > 255;
  for (std::uint16_t v : image.values) {
    if (wide) bytes.push_back(static_cast<char>(v >> 8));
    bytes.push_back(static_cast<char>(v & 0xFF));
  }
  dump(path, bytes);
}

LabelMap read_labels_pgm(const std::filesystem::path& path, int classes) {
  const GrayImage img = read_pgm(path);
  LabelArray labels(img.height, img.width);
  int top = 0;
  for (Index j = 0; j < labels.size(); ++j) {
    labels.data()[j] = img.values[static_cast<std::size_t>(j)];
    top = std::max(top, labels.data()[j]);
  }
  return LabelMap(std::move(labels), classes > 0 ? classes : top + 1);
}

void write_labels_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  GrayImage img{labels.height(), labels.width(), labels.classes() - 1 > 255 ? 65535 : 255, {}};
  img.values.reserve(static_cast<std::size_t>(labels.size()));
  for (Index j = 0; j < labels.size(); ++j) img.values.push_back(static_cast<std::uint16_t>(labels[j]));
  write_pgm(path, img);
}

ScalarImage<double> read_image_pgm(const std::filesystem::path& path) {
  const GrayImage img = read_pgm(path);
  PlaneArray<double> pixels(img.height, img.width);
  for (Index j = 0; j < pixels.size(); ++j) pixels.data()[j] = img.values[static_cast<std::size_t>(j)];
  return ScalarImage<double>(std::move(pixels));
}

ScalarImage<double> read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return read_image_pgm(path);
  return image_from_raw(read_field(path));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  if (image.rgb.size() != static_cast<std::size_t>(image.height * image.width * 3))
    throw usage_error("PPM payload does not match its dimensions");
  std::string bytes = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  dump(path, bytes);
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw io_error("bad magic in " + path.string());
  RgbImage img;
  img.width = parse_header_int(next_token(bytes, pos));
  img.height = parse_header_int(next_token(bytes, pos));
  if (parse_header_int(next_token(bytes, pos)) != 255) throw io_error("unsupported PPM maxval");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width * img.height * 3);
  if (pos > bytes.size() || bytes.size() - pos < n) throw io_error("truncated payload in " + path.string());
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

RgbImage render_overlay(const ScalarImage<double>& image, const LabelMap& labels) {
  if (image.height() != labels.height() || image.width() != labels.width())
    throw usage_error("overlay image and labels differ in shape");
  const double lo = image.size() ? image.pixels().minCoeff() : 0.0;
  const double hi = image.size() ? image.pixels().maxCoeff() : 0.0;
  const double range = hi > lo ? hi - lo : 1.0;
  RgbImage out{image.height(), image.width(), std::vector<std::uint8_t>(static_cast<std::size_t>(image.size() * 3))};
  for (Index j = 0; j < image.size(); ++j) {
    const double gray = std::round(255.0 * (image[j] - lo) / range);
    std::uint8_t rgb[3] = {static_cast<std::uint8_t>(gray), static_cast<std::uint8_t>(gray),
                           static_cast<std::uint8_t>(gray)};
    const int tint = labels[j] == 1 ? 1 : labels[j] == 2 ? 0 : -1;  // green for bone, red for lesion
    if (tint >= 0) {
      const auto dim = static_cast<std::uint8_t>(std::round(0.4 * gray));
      rgb[0] = rgb[1] = rgb[2] = dim;
      rgb[tint] = static_cast<std::uint8_t>(std::round(153.0 + 0.4 * gray));
    }
    std::copy(rgb, rgb + 3, out.rgb.begin() + j * 3);
  }
  return out;
}

}  // namespace fuzzyseg
