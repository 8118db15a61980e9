#include "logitforge/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "logitforge/error.hpp"
#include "logitforge/rng.hpp"

namespace logitforge {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t offset,
                   const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw Error(ErrorCode::kTruncatedFile, path.string() + ": header cut short");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.put(static_cast<char>((v >> shift) & 0xff));
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.class_count = class_count;
  return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = slurp(images);
  const auto lab = slurp(labels);
  if (be32(img, 0, images) != kImageMagic) throw Error(ErrorCode::kBadMagic, images.string() + " is not an IDX image file");
  if (be32(lab, 0, labels) != kLabelMagic) throw Error(ErrorCode::kBadMagic, labels.string() + " is not an IDX label file");

  const std::size_t count = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  const std::size_t label_count = be32(lab, 4, labels);
  if (count != label_count) {
    throw Error(ErrorCode::kCountMismatch, std::to_string(count) + " images but " +
                                               std::to_string(label_count) + " labels");
  }
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim) throw Error(ErrorCode::kTruncatedFile, images.string() + ": pixel data cut short");
  if (lab.size() < 8 + count) throw Error(ErrorCode::kTruncatedFile, labels.string() + ": label data cut short");

  Dataset out;
  out.features = Matrix(count, dim);
  auto px = out.features.values();
  for (std::size_t i = 0; i < count * dim; ++i) px[i] = static_cast<double>(img[16 + i]) / 255.0;
  out.labels.resize(count);
  int top = -1;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels[i] = lab[8 + i];
    top = std::max(top, out.labels[i]);
  }
  out.class_count = top + 1;
  return out;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (rows * cols != data.features.cols()) throw Error(ErrorCode::kDimensionMismatch, "image shape");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw Error(ErrorCode::kIo, "cannot write IDX output");
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  put_be32(img, static_cast<std::uint32_t>(rows));
  put_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : data.features.values()) {
    img.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

Dataset gen_synthetic(int class_count, std::size_t per_class, std::size_t dim, double spread,
                      std::uint64_t seed) {
  if (class_count < 2) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs C >= 2");
  if (per_class < 1) throw Error(ErrorCode::kInvalidArgument, "synthetic data needs per_class >= 1");
  if (dim < static_cast<std::size_t>(class_count)) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic data needs D >= C for distinct simplex centers");
  }
  if (spread < 0.0) throw Error(ErrorCode::kInvalidArgument, "spread must be non-negative");
  const auto classes = static_cast<std::size_t>(class_count);
  Dataset out;
  out.class_count = class_count;
  out.features = Matrix(classes * per_class, dim);
  out.labels.resize(classes * per_class);
  Rng rng(derive_seed(seed, "synthetic"));
  for (std::size_t s = 0; s < per_class; ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t i = s * classes + c;
      out.labels[i] = static_cast<int>(c);
      auto row = out.features.row(i);
      for (std::size_t j = 0; j < dim; ++j) {
        const double center = j == c ? 1.0 : 0.0;
        const double v = spread == 0.0 ? center : center + spread * standard_normal(rng);
        row[j] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.features.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.put(',');
      out.write(buf, res.ptr - buf);
    }
    out.put('\n');
  }
}

Dataset read_dataset_csv(std::istream& in) {
  Dataset out;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  int top = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    int label = 0;
    auto res = std::from_chars(p, end, label);
    if (res.ec != std::errc()) throw Error(ErrorCode::kInvalidArgument, "dataset CSV: bad label");
    p = res.ptr;
    std::size_t fields = 0;
    while (p < end) {
      if (*p != ',') throw Error(ErrorCode::kInvalidArgument, "dataset CSV: expected ','");
      double v = 0.0;
      res = std::from_chars(p + 1, end, v);
      if (res.ec != std::errc()) throw Error(ErrorCode::kInvalidArgument, "dataset CSV: bad feature");
      values.push_back(v);
      p = res.ptr;
      ++fields;
    }
    if (out.labels.empty()) dim = fields;
    if (fields != dim) throw Error(ErrorCode::kDimensionMismatch, "dataset CSV: ragged rows");
    out.labels.push_back(label);
    top = std::max(top, label);
  }
  out.features = Matrix(out.labels.size(), dim, std::move(values));
  out.class_count = top + 1;
  return out;
}

}  // namespace logitforge
