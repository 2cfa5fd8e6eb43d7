#include "latentaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "latentaug/error.hpp"

namespace latentaug {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t offset, const std::string& what) {
  throw ParseError(path.string() + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::string& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

ImageBuffer read_image(const std::filesystem::path& path) {
  const std::string blob = read_file_bytes(path);
  if (blob.size() < 2) parse_fail(path, 0, "not a Netpbm file");
  std::int64_t channels = 0;
  if (blob[0] == 'P' && blob[1] == '5') channels = 1;
  else if (blob[0] == 'P' && blob[1] == '6') channels = 3;
  else parse_fail(path, 0, "unsupported magic '" + blob.substr(0, 2) + "' (want P5 or P6)");

  std::size_t pos = 2;
  auto next_token = [&]() -> std::int64_t {
    // skip whitespace and '#' comments
    while (pos < blob.size()) {
      const char c = blob[pos];
      if (c == '#') {
        while (pos < blob.size() && blob[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    std::int64_t value = 0;
    bool any = false;
    while (pos < blob.size() && blob[pos] >= '0' && blob[pos] <= '9') {
      value = value * 10 + (blob[pos] - '0');
      any = true;
      ++pos;
    }
    if (!any) parse_fail(path, start, "expected an integer in the header");
    return value;
  };

  const std::int64_t width = next_token();
  const std::int64_t height = next_token();
  const std::size_t maxval_at = pos;
  const std::int64_t maxval = next_token();
  if (width <= 0 || height <= 0) parse_fail(path, 2, "non-positive image dimensions");
  if (maxval != 255) parse_fail(path, maxval_at, "maxval must be 255");
  if (pos >= blob.size()) parse_fail(path, pos, "missing whitespace after maxval");
  ++pos;  // single whitespace byte separating header from raster

  const std::size_t count = static_cast<std::size_t>(width * height * channels);
  if (blob.size() - pos < count) parse_fail(path, pos, "raster truncated");
  if (blob.size() - pos > count) parse_fail(path, pos + count, "trailing bytes after raster");

  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    img.pixels[i] = static_cast<unsigned char>(blob[pos + i]) / 255.0;
  }
  return img;
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw DimensionError("write_image: channels must be 1 or 3");
  }
  const std::size_t count = static_cast<std::size_t>(image.width * image.height * image.channels);
  if (image.pixels.size() != count || image.width <= 0 || image.height <= 0) {
    throw DimensionError("write_image: pixel count does not match geometry");
  }
  std::string blob = image.channels == 1 ? "P5\n" : "P6\n";
  blob += std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  for (double v : image.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("write_image: pixel outside [0,1]");
    blob.push_back(static_cast<char>(static_cast<unsigned char>(std::llround(v * 255.0))));
  }
  write_file_bytes(path, blob);
}

Tensor to_planar_tensor(const ImageBuffer& image) {
  const std::int64_t n = image.width * image.height * image.channels;
  Tensor::Array data(n);
  for (std::int64_t c = 0; c < image.channels; ++c) {
    for (std::int64_t y = 0; y < image.height; ++y) {
      for (std::int64_t x = 0; x < image.width; ++x) {
        data[(c * image.height + y) * image.width + x] = image.at(y, x, c);
      }
    }
  }
  return Tensor({n}, std::move(data));
}

ImageBuffer from_planar(const ImageGeom& geom, const Tensor& row) {
  if (row.size() != geom.pixels()) {
    throw DimensionError("from_planar: tensor size " + std::to_string(row.size()) +
                         " does not match geometry (" + std::to_string(geom.pixels()) + " pixels)");
  }
  ImageBuffer img;
  img.width = geom.width;
  img.height = geom.height;
  img.channels = geom.channels;
  img.pixels.resize(static_cast<std::size_t>(geom.pixels()));
  for (std::int64_t c = 0; c < geom.channels; ++c) {
    for (std::int64_t y = 0; y < geom.height; ++y) {
      for (std::int64_t x = 0; x < geom.width; ++x) {
        img.at(y, x, c) = row[(c * geom.height + y) * geom.width + x];
      }
    }
  }
  return img;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  throw ContractError("unknown split");
}

std::string to_string(Provenance p) {
  return p == Provenance::real ? "real" : "synthetic";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw ParseError("unknown split '" + s + "'");
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "real") return Provenance::real;
  if (s == "synthetic") return Provenance::synthetic;
  throw ParseError("unknown provenance '" + s + "'");
}

int DatasetManifest::num_classes() const {
  int max_label = -1;
  for (const auto& row : rows) max_label = std::max(max_label, row.label);
  return max_label + 1;
}

std::vector<const ManifestRow*> DatasetManifest::select(std::optional<Split> split,
                                                        std::optional<int> label,
                                                        std::optional<Provenance> provenance) const {
  std::vector<const ManifestRow*> out;
  for (const auto& row : rows) {
    if (split && row.split != *split) continue;
    if (label && row.label != *label) continue;
    if (provenance && row.provenance != *provenance) continue;
    out.push_back(&row);
  }
  return out;
}

namespace {
constexpr const char* kManifestHeader = "image_id,path,label,split,provenance";
}

DatasetManifest load_manifest(const std::filesystem::path& csv_path, bool check_paths) {
  const std::string blob = read_file_bytes(csv_path);
  DatasetManifest manifest;
  manifest.root = csv_path.parent_path();

  std::istringstream in(blob);
  std::string line;
  if (!std::getline(in, line)) parse_fail(csv_path, 0, "empty manifest");
  if (line != kManifestHeader) parse_fail(csv_path, 0, "bad header, expected '" + std::string(kManifestHeader) + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 5) {
      throw ParseError(csv_path.string() + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(fields.size()) + " fields, expected 5");
    }
    ManifestRow row;
    row.image_id = fields[0];
    row.path = fields[1];
    try {
      row.label = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw ParseError(csv_path.string() + ": line " + std::to_string(lineno) + " has a non-integer label");
    }
    row.split = split_from_string(fields[3]);
    row.provenance = provenance_from_string(fields[4]);
    manifest.rows.push_back(std::move(row));
  }
  validate_manifest(manifest);
  if (check_paths) {
    for (const auto& row : manifest.rows) {
      if (!std::filesystem::exists(manifest.root / row.path)) {
        throw DataError("manifest references missing file '" + row.path + "'");
      }
    }
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv_path) {
  std::string blob = std::string(kManifestHeader) + "\n";
  for (const auto& row : manifest.rows) {
    blob += row.image_id + "," + row.path + "," + std::to_string(row.label) + "," +
            to_string(row.split) + "," + to_string(row.provenance) + "\n";
  }
  write_file_bytes(csv_path, blob);
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> ids;
  for (const auto& row : manifest.rows) {
    if (!ids.insert(row.image_id).second) {
      throw DataError("duplicate image_id '" + row.image_id + "'");
    }
    if (row.label < 0) throw DataError("negative label for image '" + row.image_id + "'");
    if (row.provenance == Provenance::synthetic &&
        (row.split == Split::val || row.split == Split::test)) {
      throw DataError("synthetic image '" + row.image_id + "' assigned to an evaluation split");
    }
  }
}

void stratified_split(DatasetManifest& manifest, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("stratified_split: test_fraction must be in (0,1)");
  }
  std::map<int, std::vector<ManifestRow*>> real_by_class;
  for (auto& row : manifest.rows) {
    if (row.provenance == Provenance::real) {
      real_by_class[row.label].push_back(&row);
    } else {
      row.split = Split::train;  // synthetic rows are never eligible for evaluation
    }
  }
  RngStream rng(seed, "split");
  for (auto& [label, rows] : real_by_class) {
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    if (n < 2) {
      throw InsufficientDataError("stratified_split: class " + std::to_string(label) +
                                  " has fewer than 2 real images");
    }
    std::int64_t test_count = std::llround(test_fraction * static_cast<double>(n));
    test_count = std::clamp<std::int64_t>(test_count, 1, n - 1);
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    RngStream class_rng = rng.stream(std::to_string(label));
    class_rng.shuffle(order);
    for (std::int64_t i = 0; i < n; ++i) {
      rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]->split =
          i < test_count ? Split::test : Split::train;
    }
  }
  validate_manifest(manifest);
}

void carve_validation(DatasetManifest& manifest, double val_fraction, std::uint64_t seed) {
  if (val_fraction <= 0.0) return;
  if (val_fraction >= 1.0) throw DomainError("carve_validation: val_fraction must be in (0,1)");
  std::map<int, std::vector<ManifestRow*>> train_real;
  for (auto& row : manifest.rows) {
    if (row.provenance == Provenance::real && row.split == Split::train) {
      train_real[row.label].push_back(&row);
    }
  }
  RngStream rng(seed, "split/val");
  for (auto& [label, rows] : train_real) {
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    if (n < 2) {
      throw InsufficientDataError("carve_validation: class " + std::to_string(label) +
                                  " has fewer than 2 real train images");
    }
    std::int64_t val_count = std::llround(val_fraction * static_cast<double>(n));
    val_count = std::clamp<std::int64_t>(val_count, 1, n - 1);
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    RngStream class_rng = rng.stream(std::to_string(label));
    class_rng.shuffle(order);
    for (std::int64_t i = 0; i < val_count; ++i) {
      rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]->split = Split::val;
    }
  }
  validate_manifest(manifest);
}

std::uint64_t split_hash(const DatasetManifest& manifest, Split split) {
  std::uint64_t h = 0;
  for (const auto& row : manifest.rows) {
    if (row.split != split) continue;
    const std::string line = row.image_id + "," + row.path + "," + std::to_string(row.label) + "," +
                             to_string(row.provenance);
    h ^= detail::mix64(detail::fnv1a(line));  // order-independent combine
  }
  return h;
}

namespace {

// Grating: 0.5 + amp * sin(2*pi*f*(x cos t + y sin t)/size).
std::vector<double> grating(std::int64_t size, double orientation_deg, double frequency) {
  std::vector<double> p(static_cast<std::size_t>(size * size));
  const double theta = orientation_deg * std::numbers::pi / 180.0;
  const double cx = std::cos(theta);
  const double sy = std::sin(theta);
  constexpr double amp = 0.35;
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double r = cx * static_cast<double>(x) + sy * static_cast<double>(y);
      p[static_cast<std::size_t>(y * size + x)] =
          0.5 + amp * std::sin(2.0 * std::numbers::pi * frequency * r / static_cast<double>(size));
    }
  }
  return p;
}

// Per-image spread of the class signal, scaled by the overlap factor so the
// zero-overlap/zero-noise dataset stays exactly constant per class.
constexpr double kOrientationJitterDeg = 40.0;
constexpr double kFrequencyJitter = 0.30;

std::string zero_pad(std::int64_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

DatasetManifest generate_toy_dataset(const ToySpec& spec, const std::filesystem::path& root) {
  const std::size_t num_classes = spec.counts.size();
  if (num_classes == 0) throw ContractError("generate_toy_dataset: no classes");
  for (auto c : spec.counts) {
    if (c <= 0) throw ContractError("generate_toy_dataset: per-class counts must be positive");
  }
  if (spec.image_size < 2) throw ContractError("generate_toy_dataset: image size too small");
  if (spec.noise_sigma < 0) throw DomainError("generate_toy_dataset: noise level must be >= 0");

  std::vector<double> orientations = spec.orientations_deg;
  std::vector<double> frequencies = spec.frequencies;
  if (orientations.empty()) {
    for (std::size_t k = 0; k < num_classes; ++k) orientations.push_back(60.0 * static_cast<double>(k));
  }
  if (frequencies.empty()) {
    for (std::size_t k = 0; k < num_classes; ++k) frequencies.push_back(3.0 * static_cast<double>(k + 1));
  }
  if (orientations.size() != num_classes || frequencies.size() != num_classes) {
    throw ContractError("generate_toy_dataset: class-signal parameter count does not match classes");
  }

  // Per-class confusability: the majority class stays a clean template, the
  // class with the second-largest count gets the full overlap-driven spread
  // and blend (most confusable), remaining classes half of it.
  std::vector<std::size_t> by_count(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) by_count[k] = k;
  std::stable_sort(by_count.begin(), by_count.end(),
                   [&](std::size_t a, std::size_t b) { return spec.counts[a] > spec.counts[b]; });
  const std::size_t majority = by_count[0];
  std::vector<double> confusability(num_classes, 0.25);
  confusability[majority] = 0.0;
  if (num_classes > 1) confusability[by_count[1]] = 1.0;

  const std::vector<double> majority_pattern =
      grating(spec.image_size, orientations[majority], frequencies[majority]);

  std::filesystem::create_directories(root);
  DatasetManifest manifest;
  manifest.root = root;
  RngStream toy_rng(spec.seed, "toy");

  const std::int64_t size = spec.image_size;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto class_dir = root / "images" / std::to_string(k);
    std::filesystem::create_directories(class_dir);
    for (std::int64_t i = 0; i < spec.counts[k]; ++i) {
      RngStream img_rng = toy_rng.stream(std::to_string(k) + "/" + std::to_string(i));
      const double spread = confusability[k] * spec.overlap;
      const double orientation = orientations[k] + spread * kOrientationJitterDeg * img_rng.uniform(-1.0, 1.0);
      const double frequency = frequencies[k] * (1.0 + spread * kFrequencyJitter * img_rng.uniform(-1.0, 1.0));
      const double blend = spread * img_rng.uniform();
      const std::vector<double> pattern = grating(size, orientation, frequency);
      ImageBuffer img;
      img.width = size;
      img.height = size;
      img.channels = 1;
      img.pixels.resize(static_cast<std::size_t>(size * size));
      for (std::size_t p = 0; p < img.pixels.size(); ++p) {
        double v = (1.0 - blend) * pattern[p] + blend * majority_pattern[p];
        if (spec.noise_sigma > 0) v += spec.noise_sigma * img_rng.normal();
        img.pixels[p] = std::clamp(v, 0.0, 1.0);
      }
      const std::string id = "c" + std::to_string(k) + "_" + zero_pad(i, 4);
      const std::string rel = "images/" + std::to_string(k) + "/" + id + ".pgm";
      write_image(root / rel, img);
      manifest.rows.push_back(ManifestRow{id, rel, static_cast<int>(k), Split::unassigned, Provenance::real});
    }
  }
  save_manifest(manifest, root / "manifest.csv");
  return manifest;
}

Tensor load_rows_matrix(const DatasetManifest& manifest, const std::vector<const ManifestRow*>& rows,
                        const ImageGeom& geom) {
  if (rows.empty()) throw InsufficientDataError("load_rows_matrix: no rows selected");
  Tensor::Array data(static_cast<std::int64_t>(rows.size()) * geom.pixels());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ImageBuffer img = read_image(manifest.root / rows[i]->path);
    if (img.geom() != geom) {
      throw DimensionError("image '" + rows[i]->image_id + "' does not match the expected geometry");
    }
    const Tensor flat = to_planar_tensor(img);
    data.segment(static_cast<std::int64_t>(i) * geom.pixels(), geom.pixels()) = flat.array();
  }
  return Tensor({static_cast<std::int64_t>(rows.size()), geom.pixels()}, std::move(data));
}

}  // namespace latentaug
