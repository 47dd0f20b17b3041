#ifndef SIMSIAM_DATASET_HPP
#define SIMSIAM_DATASET_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simsiam/rng.hpp"
#include "simsiam/tensor.hpp"

namespace simsiam {

template <typename Scalar>
struct Sample {
  long id = 0;
  Tensor<Scalar> payload;  // image C,H,W in [0,1], or feature vector
  int label = -1;          // -1 when unlabeled

  bool is_image() const { return payload.rank() == 3; }
};

template <typename Scalar>
struct Dataset {
  std::vector<Sample<Scalar>> train;
  std::vector<Sample<Scalar>> val;
  int num_classes = 0;
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary format: records of 3073 bytes, 1 label byte (0..9) then
// 3072 pixel bytes in planar R,G,B order, each plane 32x32 row-major.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr Index kCifarPixels = 3072;

template <typename Scalar>
std::vector<Sample<Scalar>> parse_cifar10(const std::uint8_t* bytes, std::size_t size,
                                          long id_offset = 0) {
  if (size % kCifarRecordBytes != 0)
    throw std::invalid_argument("parse_cifar10: stream of " + std::to_string(size) +
                                " bytes is not a multiple of the 3073-byte record (truncated "
                                "record)");
  const std::size_t n = size / kCifarRecordBytes;
  std::vector<Sample<Scalar>> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes + r * kCifarRecordBytes;
    if (rec[0] > 9)
      throw std::invalid_argument("parse_cifar10: label byte " + std::to_string(int(rec[0])) +
                                  " > 9 in record " + std::to_string(r));
    Sample<Scalar> s;
    s.id = id_offset + static_cast<long>(r);
    s.label = rec[0];
    s.payload = Tensor<Scalar>({3, 32, 32});
    for (Index i = 0; i < kCifarPixels; ++i)
      s.payload.flat()[i] = static_cast<Scalar>(rec[1 + i]) / Scalar(255);
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Scalar>
std::vector<Sample<Scalar>> parse_cifar10(const std::vector<std::uint8_t>& bytes,
                                          long id_offset = 0) {
  return parse_cifar10<Scalar>(bytes.data(), bytes.size(), id_offset);
}

// Inverse of parse_cifar10 for valid samples (pixels on the 1/255 grid).
template <typename Scalar>
std::vector<std::uint8_t> serialize_cifar10(const std::vector<Sample<Scalar>>& samples) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * kCifarRecordBytes);
  for (const auto& s : samples) {
    if (s.payload.shape() != Shape{3, 32, 32})
      throw ShapeError("serialize_cifar10: payload must be 3x32x32, got " +
                       shape_str(s.payload.shape()));
    if (s.label < 0 || s.label > 9)
      throw std::invalid_argument("serialize_cifar10: label " + std::to_string(s.label) +
                                  " outside 0..9");
    out.push_back(static_cast<std::uint8_t>(s.label));
    for (Index i = 0; i < kCifarPixels; ++i) {
      const long v = std::lround(static_cast<double>(s.payload.flat()[i]) * 255.0);
      out.push_back(static_cast<std::uint8_t>(std::min(255L, std::max(0L, v))));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Loads data_batch_1..5.bin (train) and test_batch.bin (val) from the usual
// cifar-10-batches-bin layout, truncated to the requested subset sizes.
template <typename Scalar>
Dataset<Scalar> load_cifar10(const std::string& root, long train_subset, long val_subset) {
  namespace fs = std::filesystem;
  Dataset<Scalar> ds;
  ds.num_classes = 10;
  for (int b = 1; b <= 5 && static_cast<long>(ds.train.size()) < train_subset; ++b) {
    const fs::path p = fs::path(root) / ("data_batch_" + std::to_string(b) + ".bin");
    auto recs = parse_cifar10<Scalar>(read_file_bytes(p.string()),
                                      static_cast<long>(ds.train.size()));
    for (auto& s : recs) {
      if (static_cast<long>(ds.train.size()) >= train_subset) break;
      ds.train.push_back(std::move(s));
    }
  }
  if (static_cast<long>(ds.train.size()) < train_subset)
    throw std::runtime_error("load_cifar10: only " + std::to_string(ds.train.size()) +
                             " of the requested " + std::to_string(train_subset) +
                             " train records under " + root);
  const fs::path tp = fs::path(root) / "test_batch.bin";
  auto test = parse_cifar10<Scalar>(read_file_bytes(tp.string()));
  for (auto& s : test) {
    if (static_cast<long>(ds.val.size()) >= val_subset) break;
    s.id = static_cast<long>(ds.val.size());
    ds.val.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic vector clusters: one Gaussian blob per class, means drawn from
// N(0, separation^2 I), unit within-class noise. Desk-scale stand-in for an
// image corpus; class margin is directly controllable.
// ---------------------------------------------------------------------------

template <typename Scalar>
Dataset<Scalar> make_synthetic(int num_classes, Index dim, int samples_per_class,
                               double separation, std::uint64_t seed, int val_per_class = 0) {
  if (num_classes < 1 || dim < 1 || samples_per_class < 1)
    throw std::invalid_argument("make_synthetic: counts must be positive");
  if (separation < 0) throw std::invalid_argument("make_synthetic: separation must be >= 0");

  std::vector<Tensor<double>> means;
  {
    SplitRng rng(seed, {rng_path::dataset, 0});
    for (int c = 0; c < num_classes; ++c) {
      Tensor<double> m({dim});
      for (Index i = 0; i < dim; ++i) m.flat()[i] = separation * rng.normal();
      means.push_back(std::move(m));
    }
  }
  auto draw_split = [&](std::uint64_t tag, int per_class, std::vector<Sample<Scalar>>& out) {
    long id = 0;
    for (int c = 0; c < num_classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        SplitRng rng(seed, {rng_path::dataset, tag, static_cast<std::uint64_t>(c),
                            static_cast<std::uint64_t>(i)});
        Sample<Scalar> s;
        s.id = id++;
        s.label = c;
        s.payload = Tensor<Scalar>({dim});
        for (Index j = 0; j < dim; ++j)
          s.payload.flat()[j] = static_cast<Scalar>(means[static_cast<std::size_t>(c)].flat()[j] +
                                                    rng.normal());
        out.push_back(std::move(s));
      }
    }
  };
  Dataset<Scalar> ds;
  ds.num_classes = num_classes;
  draw_split(1, samples_per_class, ds.train);
  draw_split(2, val_per_class, ds.val);
  return ds;
}

// Feature matrix + labels of a sample list (rows in list order).
template <typename Scalar>
Tensor<Scalar> stack_payloads(const std::vector<Sample<Scalar>>& samples) {
  if (samples.empty()) throw std::invalid_argument("stack_payloads: empty sample list");
  const Index per = samples.front().payload.numel();
  Shape shape;
  if (samples.front().payload.rank() == 1) {
    shape = {static_cast<Index>(samples.size()), per};
  } else {
    shape.push_back(static_cast<Index>(samples.size()));
    for (Index d : samples.front().payload.shape()) shape.push_back(d);
  }
  Tensor<Scalar> out(shape);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].payload.numel() != per)
      throw ShapeError("stack_payloads: inconsistent payload shapes");
    out.flat().segment(static_cast<Index>(i) * per, per) = samples[i].payload.flat();
  }
  return out;
}

template <typename Scalar>
std::vector<int> labels_of(const std::vector<Sample<Scalar>>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset snapshot: versioned JSON with per-sample id/label/data.
// Doubles serialize with round-trip precision, so save/load is bit-exact at
// f64. Layout documented in docs/formats.md.
// ---------------------------------------------------------------------------

inline constexpr int kSyntheticSnapshotVersion = 1;

template <typename Scalar>
void save_synthetic(const Dataset<Scalar>& ds, const std::string& path) {
  nlohmann::json j;
  j["format"] = "simsiam-synthetic";
  j["version"] = kSyntheticSnapshotVersion;
  j["num_classes"] = ds.num_classes;
  auto dump_split = [](const std::vector<Sample<Scalar>>& split) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : split)
      arr.push_back({{"id", s.id},
                     {"label", s.label},
                     {"data", std::vector<double>(s.payload.data(),
                                                  s.payload.data() + s.payload.numel())}});
    return arr;
  };
  j["train"] = dump_split(ds.train);
  j["val"] = dump_split(ds.val);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_synthetic: cannot open " + path);
  out << j.dump() << "\n";
}

template <typename Scalar>
Dataset<Scalar> load_synthetic(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_synthetic: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "simsiam-synthetic")
    throw std::invalid_argument("load_synthetic: not a synthetic dataset snapshot");
  if (j.at("version").get<int>() != kSyntheticSnapshotVersion)
    throw std::invalid_argument("load_synthetic: unsupported version");
  Dataset<Scalar> ds;
  ds.num_classes = j.at("num_classes").get<int>();
  auto read_split = [](const nlohmann::json& arr, std::vector<Sample<Scalar>>& out) {
    for (const auto& e : arr) {
      Sample<Scalar> s;
      s.id = e.at("id").get<long>();
      s.label = e.at("label").get<int>();
      const auto data = e.at("data").get<std::vector<double>>();
      s.payload = Tensor<Scalar>({static_cast<Index>(data.size())});
      for (std::size_t i = 0; i < data.size(); ++i)
        s.payload.flat()[static_cast<Index>(i)] = static_cast<Scalar>(data[i]);
      out.push_back(std::move(s));
    }
  };
  read_split(j.at("train"), ds.train);
  read_split(j.at("val"), ds.val);
  return ds;
}

}  // namespace simsiam

#endif  // SIMSIAM_DATASET_HPP
