#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentaug/rng.hpp"
#include "latentaug/tensor.hpp"

namespace latentaug {

struct ImageGeom {
  std::int64_t width = 32;
  std::int64_t height = 32;
  std::int64_t channels = 1;
  std::int64_t pixels() const { return width * height * channels; }
  bool operator==(const ImageGeom&) const = default;
};

// In-memory image; pixels are reals in [0,1], row-major, channel-interleaved
// (the on-disk Netpbm order).
struct ImageBuffer {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 1;
  std::vector<double> pixels;

  double at(std::int64_t row, std::int64_t col, std::int64_t ch = 0) const {
    return pixels[static_cast<std::size_t>((row * width + col) * channels + ch)];
  }
  double& at(std::int64_t row, std::int64_t col, std::int64_t ch = 0) {
    return pixels[static_cast<std::size_t>((row * width + col) * channels + ch)];
  }
  ImageGeom geom() const { return ImageGeom{width, height, channels}; }
};

// Binary Netpbm: P5 (grayscale) and P6 (RGB), maxval 255. Bytes map to
// b/255 on read; reals map to round(v*255) on write, so write(read(f))
// reproduces f byte for byte.
ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& image);

// Channel-planar flattening used by the models: index = (c*h + y)*w + x.
Tensor to_planar_tensor(const ImageBuffer& image);
ImageBuffer from_planar(const ImageGeom& geom, const Tensor& row);

enum class Split { train, val, test, unassigned };
enum class Provenance { real, synthetic };

std::string to_string(Split s);
std::string to_string(Provenance p);
Split split_from_string(const std::string& s);
Provenance provenance_from_string(const std::string& s);

struct ManifestRow {
  std::string image_id;
  std::string path;  // relative to the manifest's root
  int label = 0;
  Split split = Split::unassigned;
  Provenance provenance = Provenance::real;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestRow> rows;

  int num_classes() const;
  std::vector<const ManifestRow*> select(std::optional<Split> split = std::nullopt,
                                         std::optional<int> label = std::nullopt,
                                         std::optional<Provenance> provenance = std::nullopt) const;
};

// CSV with header `image_id,path,label,split,provenance`, UTF-8, LF endings.
DatasetManifest load_manifest(const std::filesystem::path& csv_path, bool check_paths = true);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv_path);

// Unique ids, labels >= 0, and the leakage guard: synthetic rows may only be
// train or unassigned, never val/test.
void validate_manifest(const DatasetManifest& manifest);

// Assigns train/test per class over real rows: test count is
// round(fraction * class_count), at least 1 and at most count-1, chosen by a
// seeded shuffle. Synthetic rows always stay in train.
void stratified_split(DatasetManifest& manifest, double test_fraction, std::uint64_t seed);

// Moves a stratified fraction of each class's real train rows to val.
void carve_validation(DatasetManifest& manifest, double val_fraction, std::uint64_t seed);

// Order-independent hash of the rows currently assigned to `split`.
std::uint64_t split_hash(const DatasetManifest& manifest, Split split);

// Deterministic imbalanced toy dataset: class k is an oriented sinusoidal
// grating; minority-class images are blended toward the majority pattern by a
// per-image random fraction scaled by `overlap`, with the middle class
// blended hardest so it is the most confusable one.
struct ToySpec {
  std::vector<std::int64_t> counts{65, 91, 165};
  std::int64_t image_size = 32;
  std::vector<double> orientations_deg;  // default: class k at k*60 degrees
  std::vector<double> frequencies;       // default: class k at 3*(k+1) cycles
  double noise_sigma = 0.08;
  double overlap = 0.55;
  std::uint64_t seed = 42;
};

DatasetManifest generate_toy_dataset(const ToySpec& spec, const std::filesystem::path& root);

// Loads the given rows as an N x pixels matrix (planar layout, row order
// preserved). All images must share `geom`.
Tensor load_rows_matrix(const DatasetManifest& manifest, const std::vector<const ManifestRow*>& rows,
                        const ImageGeom& geom);

}  // namespace latentaug
