// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#include "aep/harness/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "aep/errors.hpp"

namespace aep::harness {
namespace fs = std::filesystem;

void DatasetSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument(name + ": needs at least two classes");
  if (train == 0 || val == 0 || test == 0) {
    throw std::invalid_argument(name + ": split sizes must be positive");
  }
  if (!(subsample > 0.0 && subsample <= 1.0)) {
    throw std::invalid_argument(name + ": subsample fraction must be in (0, 1]");
  }
}

namespace {

const std::vector<DatasetSpec>& builtin_specs() {
  static const std::vector<DatasetSpec> specs = {
      {"cifar10", 10, 3, 45000, 5000, 10000, true, 0.1, DatasetSource::kBuiltin,
       "cifar-10-batches-bin"},
      {"cifar100", 100, 3, 45000, 5000, 10000, true, 0.1, DatasetSource::kBuiltin,
       "cifar-100-binary"},
      {"eurosat", 10, 3, 17500, 4000, 5500, false, 0.1, DatasetSource::kLocalDirectory,
       "eurosat"},
      {"fmnist", 10, 1, 51000, 9000, 10000, true, 0.1, DatasetSource::kBuiltin, "fmnist"},
      {"gtsrb", 43, 3, 33209, 6000, 12630, false, 0.1, DatasetSource::kLocalDirectory, "gtsrb"},
      {"tinyimagenet", 200, 3, 85000, 15000, 10000, true, 0.1, DatasetSource::kLocalDirectory,
       "tinyimagenet"},
      // Sizes are replaced by the requested sample count at load time.
      {"synthetic-blobs", 2, 3, 200, 50, 50, true, 1.0, DatasetSource::kSynthetic, ""},
  };
  return specs;
}

// Decoded sample: C x H x W values in [0, 1].
struct Image {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> data;
};

// A labeled collection whose pixels are decoded on demand.
struct Pool {
  std::vector<std::size_t> labels;
  std::function<Image(std::size_t)> load;
};

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("missing data file {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fixed-size records: `label_bytes` header bytes (label at `label_offset`)
// followed by a 3x32x32 plane-major image.
struct RecordFile {
  std::vector<unsigned char> bytes;
  std::size_t label_bytes = 1;
  std::size_t label_offset = 0;
};

constexpr std::size_t kCifarPixels = 3 * 32 * 32;

Pool cifar_pool(const std::vector<fs::path>& files, std::size_t label_bytes,
                std::size_t label_offset, std::size_t num_classes) {
  auto data = std::make_shared<std::vector<unsigned char>>();
  const std::size_t record = label_bytes + kCifarPixels;
  Pool pool;
  for (const auto& f : files) {
    const auto raw = read_file(f);
    if (raw.empty() || raw.size() % record != 0) {
      throw FormatError(fmt::format("{}: size {} is not a multiple of the {}-byte record",
                                    f.string(), raw.size(), record));
    }
    const std::size_t base = data->size() / record;
    data->insert(data->end(), raw.begin(), raw.end());
    for (std::size_t r = 0; r < raw.size() / record; ++r) {
      const auto label = static_cast<unsigned char>(raw[r * record + label_offset]);
      if (label >= num_classes) {
        throw FormatError(fmt::format("{}: record {} has label {}", f.string(), base + r, label));
      }
      pool.labels.push_back(label);
    }
  }
  pool.load = [data, record, label_bytes](std::size_t i) {
    Image img{3, 32, 32, std::vector<double>(kCifarPixels)};
    const unsigned char* p = data->data() + i * record + label_bytes;
    for (std::size_t k = 0; k < kCifarPixels; ++k) img.data[k] = p[k] / 255.0;
    return img;
  };
  return pool;
}

std::uint32_t be32(const std::vector<char>& b, std::size_t off) {
  return (std::uint32_t(static_cast<unsigned char>(b[off])) << 24) |
         (std::uint32_t(static_cast<unsigned char>(b[off + 1])) << 16) |
         (std::uint32_t(static_cast<unsigned char>(b[off + 2])) << 8) |
         std::uint32_t(static_cast<unsigned char>(b[off + 3]));
}

Pool idx_pool(const fs::path& images_path, const fs::path& labels_path, std::size_t num_classes) {
  auto images = std::make_shared<std::vector<char>>(read_file(images_path));
  const auto labels = read_file(labels_path);
  if (images->size() < 16 || be32(*images, 0) != 0x803) {
    throw FormatError(images_path.string() + ": not an IDX image file");
  }
  if (labels.size() < 8 || be32(labels, 0) != 0x801) {
    throw FormatError(labels_path.string() + ": not an IDX label file");
  }
  const std::size_t n = be32(*images, 4), h = be32(*images, 8), w = be32(*images, 12);
  if (be32(labels, 4) != n || images->size() != 16 + n * h * w || labels.size() != 8 + n) {
    throw FormatError(images_path.string() + ": image and label counts disagree");
  }
  Pool pool;
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<unsigned char>(labels[8 + i]);
    if (l >= num_classes) throw FormatError(labels_path.string() + ": label out of range");
    pool.labels.push_back(l);
  }
  pool.load = [images, h, w](std::size_t i) {
    Image img{1, h, w, std::vector<double>(h * w)};
    const char* p = images->data() + 16 + i * h * w;
    for (std::size_t k = 0; k < h * w; ++k) img.data[k] = static_cast<unsigned char>(p[k]) / 255.0;
    return img;
  };
  return pool;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".bmp" ||
         ext == ".tif" || ext == ".tiff";
}

// root/<class>/<image>; classes in lexicographic order unless `classes` is given.
Pool directory_pool(const fs::path& root, std::vector<std::string>& classes,
                    std::size_t num_classes) {
  if (!fs::is_directory(root)) throw NotFoundError("missing image directory " + root.string());
  if (classes.empty()) {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) classes.push_back(e.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
  }
  if (classes.size() != num_classes) {
    throw FormatError(fmt::format("{}: expected {} class folders, found {}", root.string(),
                                  num_classes, classes.size()));
  }
  auto files = std::make_shared<std::vector<fs::path>>();
  Pool pool;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const fs::path dir = root / classes[c];
    if (!fs::is_directory(dir)) throw NotFoundError("missing class folder " + dir.string());
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && is_image_file(e.path())) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    for (auto& f : found) {
      files->push_back(std::move(f));
      pool.labels.push_back(c);
    }
  }
  pool.load = [files](std::size_t i) {
    const cv::Mat m = cv::imread((*files)[i].string(), cv::IMREAD_COLOR);
    if (m.empty() || m.type() != CV_8UC3) {
      throw FormatError("cannot decode image " + (*files)[i].string());
    }
    const auto h = static_cast<std::size_t>(m.rows), w = static_cast<std::size_t>(m.cols);
    Image img{3, h, w, std::vector<double>(3 * h * w)};
    for (std::size_t y = 0; y < h; ++y) {
      const auto* row = m.ptr<cv::Vec3b>(static_cast<int>(y));
      for (std::size_t x = 0; x < w; ++x) {
        // decoded as BGR
        for (std::size_t ch = 0; ch < 3; ++ch) img.data[(ch * h + y) * w + x] = row[x][2 - ch] / 255.0;
      }
    }
    return img;
  };
  return pool;
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> taken) {
  std::vector<bool> used(n, false);
  for (std::size_t i : taken) used[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!used[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> labels_of(const Pool& pool, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pool.labels[i]);
  return out;
}

// Stratified subset of `idx` (indices into pool) with `count` entries.
std::vector<std::size_t> sample_from(const Pool& pool, const std::vector<std::size_t>& idx,
                                     std::size_t num_classes, std::size_t count, Rng& rng) {
  if (count >= idx.size()) return idx;
  const auto labels = labels_of(pool, idx);
  std::vector<std::size_t> out;
  for (std::size_t k : stratified_sample(labels, num_classes, count, rng)) out.push_back(idx[k]);
  return out;
}

Split materialize(const Pool& pool, const std::vector<std::size_t>& idx, std::size_t num_classes,
                  std::size_t size) {
  Split s;
  s.num_classes = num_classes;
  s.images = Tensor(Shape{idx.size(), 3, size, size});
  std::vector<double> plane(size * size);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Image img = pool.load(idx[k]);
    if (img.c != 1 && img.c != 3) throw FormatError("unsupported channel count");
    for (std::size_t ch = 0; ch < img.c; ++ch) {
      const double* src = img.data.data() + ch * img.h * img.w;
      double* dst = s.images.data() + (k * 3 + ch) * size * size;
      if (img.h == size && img.w == size) {
        std::copy(src, src + size * size, dst);
      } else {
        resize_bicubic(src, img.h, img.w, dst, size, size);
      }
    }
    if (img.c == 1) {
      double* base = s.images.data() + k * 3 * size * size;
      std::copy(base, base + size * size, base + size * size);
      std::copy(base, base + size * size, base + 2 * size * size);
    }
    s.labels.push_back(pool.labels[idx[k]]);
  }
  return s;
}

std::size_t scaled(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * fraction)));
}

// Splits `pool` indices into train/val/test of the declared proportions.
struct Carve {
  std::vector<std::size_t> train, val, test;
};

Carve carve_three(const Pool& pool, const DatasetSpec& spec, Rng& rng) {
  const std::size_t n = pool.labels.size();
  std::size_t val = spec.val, test = spec.test;
  if (n != spec.total()) {
    val = static_cast<std::size_t>(std::llround(double(n) * spec.val / spec.total()));
    test = static_cast<std::size_t>(std::llround(double(n) * spec.test / spec.total()));
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Carve c;
  c.test = sample_from(pool, all, spec.num_classes, test, rng);
  const auto rest = complement(n, c.test);
  c.val = sample_from(pool, rest, spec.num_classes, val, rng);
  std::vector<bool> used(n, false);
  for (std::size_t i : c.test) used[i] = true;
  for (std::size_t i : c.val) used[i] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!used[i]) c.train.push_back(i);
  return c;
}

// Train pool carved into train/val; test is a separate pool.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_val(const Pool& pool,
                                                                        const DatasetSpec& spec,
                                                                        Rng& rng) {
  const std::size_t n = pool.labels.size();
  std::size_t val = spec.val;
  if (n != spec.train + spec.val) {
    val = static_cast<std::size_t>(std::llround(double(n) * spec.val / (spec.train + spec.val)));
  }
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto v = sample_from(pool, all, spec.num_classes, val, rng);
  return {complement(n, v), v};
}

std::vector<std::size_t> all_indices(const Pool& pool) {
  std::vector<std::size_t> v(pool.labels.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

DatasetSplits finish(const DatasetSpec& spec, const Pool& train_pool, std::vector<std::size_t> tr,
                     std::vector<std::size_t> va, const Pool& test_pool,
                     std::vector<std::size_t> te, const LoadOptions& opt, Rng& rng) {
  const double f = effective_fraction(spec, opt.subsample);
  if (f < 1.0) {
    tr = sample_from(train_pool, tr, spec.num_classes, scaled(tr.size(), f), rng);
    va = sample_from(train_pool, va, spec.num_classes, scaled(va.size(), f), rng);
    te = sample_from(test_pool, te, spec.num_classes, scaled(te.size(), f), rng);
  }
  DatasetSplits out;
  out.spec = spec;
  out.train = materialize(train_pool, tr, spec.num_classes, opt.image_size);
  out.val = materialize(train_pool, va, spec.num_classes, opt.image_size);
  out.test = materialize(test_pool, te, spec.num_classes, opt.image_size);
  const ChannelStats st = channel_stats(out.train.images);
  out.channel_mean = st.mean;
  out.channel_std = st.stddev;
  if (opt.normalize) {
    normalize_channels(out.train.images, st);
    normalize_channels(out.val.images, st);
    normalize_channels(out.test.images, st);
  }
  return out;
}

// Keys of the cubic convolution kernel with a = -0.5.
double cubic(double x) {
  constexpr double a = -0.5;
  x = std::fabs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

struct Taps {
  std::vector<std::size_t> first;
  std::vector<std::size_t> count;
  std::vector<double> weights;  // ksize per output
  std::size_t ksize = 0;
};

Taps taps(std::size_t in, std::size_t out) {
  const double scale = double(in) / double(out);
  const double fscale = std::max(scale, 1.0);
  const double support = 2.0 * fscale;
  Taps t;
  t.ksize = static_cast<std::size_t>(std::ceil(support)) * 2 + 1;
  t.weights.assign(out * t.ksize, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double center = (double(o) + 0.5) * scale;
    const double ss = 1.0 / fscale;
    // truncation toward zero, then clamp
    auto lo = static_cast<std::ptrdiff_t>(center - support + 0.5);
    lo = std::max<std::ptrdiff_t>(lo, 0);
    auto hi = static_cast<std::ptrdiff_t>(center + support + 0.5);
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(in));
    const auto n = static_cast<std::size_t>(hi - lo);
    double* w = t.weights.data() + o * t.ksize;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      w[k] = cubic((double(k) + double(lo) - center + 0.5) * ss);
      total += w[k];
    }
    if (total != 0.0)
      for (std::size_t k = 0; k < n; ++k) w[k] /= total;
    t.first.push_back(static_cast<std::size_t>(lo));
    t.count.push_back(n);
  }
  return t;
}

}  // namespace

const DatasetSpec& DatasetRegistry::get(std::string_view name) {
  for (const auto& s : builtin_specs())
    if (s.name == name) return s;
  throw NotFoundError(fmt::format("unknown dataset '{}'", name));
}

bool DatasetRegistry::contains(std::string_view name) {
  const auto& s = builtin_specs();
  return std::any_of(s.begin(), s.end(), [&](const DatasetSpec& d) { return d.name == name; });
}

std::vector<std::string> DatasetRegistry::keys() {
  std::vector<std::string> out;
  for (const auto& s : builtin_specs()) out.push_back(s.name);
  return out;
}

double effective_fraction(const DatasetSpec& spec, double subsample) {
  if (subsample < 0.0 || std::isnan(subsample)) {
    throw std::invalid_argument("subsample must be non-negative");
  }
  if (subsample == 0.0) return spec.subsample;
  if (subsample <= 1.0) return subsample;
  if (subsample > double(spec.total())) {
    throw std::invalid_argument(fmt::format("subsample count {} exceeds dataset size {}",
                                            subsample, spec.total()));
  }
  return subsample / double(spec.total());
}

std::vector<std::size_t> stratified_quotas(std::span<const std::size_t> class_counts,
                                           std::size_t count) {
  const std::size_t total = std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
  if (count > total) throw std::invalid_argument("stratified_quotas: count exceeds population");
  std::vector<std::size_t> q(class_counts.size(), 0);
  if (count == 0) return q;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    const double exact = double(class_counts[c]) * double(count) / double(total);
    q[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += q[c];
    rem.emplace_back(exact - double(q[c]), c);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) q[rem[i % rem.size()].second]++;
  // Keep every class present when the budget allows it.
  std::size_t nonempty = 0;
  for (std::size_t n : class_counts) nonempty += n > 0;
  if (count >= nonempty) {
    for (std::size_t c = 0; c < q.size(); ++c) {
      if (q[c] > 0 || class_counts[c] == 0) continue;
      const auto donor = static_cast<std::size_t>(
          std::max_element(q.begin(), q.end()) - q.begin());
      q[donor]--;
      q[c] = 1;
    }
  }
  return q;
}

std::vector<std::size_t> stratified_sample(std::span<const std::size_t> labels,
                                           std::size_t num_classes, std::size_t count, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw std::invalid_argument("label out of range");
    by_class[labels[i]].push_back(i);
  }
  std::vector<std::size_t> counts;
  for (const auto& v : by_class) counts.push_back(v.size());
  const auto q = stratified_quotas(counts, count);
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t c = 0; c < num_classes; ++c) {
    rng.shuffle(by_class[c].begin(), by_class[c].end());
    out.insert(out.end(), by_class[c].begin(), by_class[c].begin() + q[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void resize_bicubic(const double* src, std::size_t h, std::size_t w, double* dst, std::size_t oh,
                    std::size_t ow) {
  if (h == 0 || w == 0 || oh == 0 || ow == 0) throw std::invalid_argument("empty resize");
  const Taps th = taps(w, ow);
  std::vector<double> mid(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const double* wt = th.weights.data() + x * th.ksize;
      const double* row = src + y * w + th.first[x];
      double acc = 0.0;
      for (std::size_t k = 0; k < th.count[x]; ++k) acc += row[k] * wt[k];
      mid[y * ow + x] = acc;
    }
  }
  const Taps tv = taps(h, oh);
  for (std::size_t y = 0; y < oh; ++y) {
    const double* wt = tv.weights.data() + y * tv.ksize;
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < tv.count[y]; ++k) acc += mid[(tv.first[y] + k) * ow + x] * wt[k];
      dst[y * ow + x] = acc;
    }
  }
}

Tensor resize_images(const Tensor& images, std::size_t height, std::size_t width) {
  const Shape& s = images.shape();
  Tensor out(Shape{s.n, s.c, height, width});
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    resize_bicubic(images.data() + p * s.plane(), s.h, s.w, out.data() + p * height * width,
                   height, width);
  }
  return out;
}

ChannelStats channel_stats(const Tensor& images) {
  const Shape& s = images.shape();
  ChannelStats st{std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 1.0)};
  if (s.n == 0) return st;
  const double count = double(s.n * s.plane());
  for (std::size_t c = 0; c < s.c; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = images.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const double* p = images.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) sq += (p[i] - mean) * (p[i] - mean);
    }
    const double sd = std::sqrt(sq / count);
    st.mean[c] = mean;
    st.stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
  return st;
}

void normalize_channels(Tensor& images, const ChannelStats& stats) {
  const Shape& s = images.shape();
  if (stats.mean.size() != s.c || stats.stddev.size() != s.c) {
    throw std::invalid_argument("normalize_channels: channel count mismatch");
  }
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      double* p = images.data() + (n * s.c + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] = (p[i] - stats.mean[c]) / stats.stddev[c];
    }
  }
}

DatasetSplits make_blobs(std::size_t num_classes, std::size_t samples, std::size_t channels,
                         std::size_t image_size, std::uint64_t seed) {
  if (num_classes < 2 || channels == 0 || image_size == 0) {
    throw std::invalid_argument("make_blobs: need >= 2 classes and non-empty images");
  }
  if (samples < 3 * num_classes) {
    throw std::invalid_argument("make_blobs: too few samples for three stratified splits");
  }
  Rng rng(seed);
  // Centers at pairwise distance >= 2; samples within radius 0.5 of their
  // center, so any two classes are split by their perpendicular bisector.
  std::vector<std::vector<double>> centers;
  while (centers.size() < num_classes) {
    std::vector<double> c(channels);
    for (double& v : c) v = rng.normal() * 2.0;
    bool ok = true;
    for (const auto& o : centers) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < channels; ++k) d2 += (c[k] - o[k]) * (c[k] - o[k]);
      ok = ok && d2 >= 4.0;
    }
    if (ok) centers.push_back(std::move(c));
  }
  const double half = 0.5 / std::sqrt(double(channels));
  Pool pool;
  auto feats = std::make_shared<std::vector<double>>();
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t label = i % num_classes;
    pool.labels.push_back(label);
    for (std::size_t k = 0; k < channels; ++k) {
      feats->push_back(centers[label][k] + rng.uniform(-half, half));
    }
  }
  pool.load = [feats, channels](std::size_t i) {
    Image img{channels, 1, 1, std::vector<double>(feats->begin() + i * channels,
                                                  feats->begin() + (i + 1) * channels)};
    return img;
  };
  DatasetSpec spec = DatasetRegistry::get("synthetic-blobs");
  spec.num_classes = num_classes;
  spec.channels = channels;
  spec.test = samples / 6;
  spec.val = samples / 6;
  spec.train = samples - spec.val - spec.test;
  const Carve c = carve_three(pool, spec, rng);
  DatasetSplits out;
  out.spec = spec;
  auto render = [&](const std::vector<std::size_t>& idx) {
    Split s;
    s.num_classes = num_classes;
    s.images = Tensor(Shape{idx.size(), channels, image_size, image_size});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double* p = s.images.data() + (k * channels + ch) * image_size * image_size;
        std::fill(p, p + image_size * image_size, (*feats)[idx[k] * channels + ch]);
      }
      s.labels.push_back(pool.labels[idx[k]]);
    }
    return s;
  };
  out.train = render(c.train);
  out.val = render(c.val);
  out.test = render(c.test);
  const ChannelStats st = channel_stats(out.train.images);
  out.channel_mean = st.mean;
  out.channel_std = st.stddev;
  return out;
}

DatasetSplits load_dataset(const DatasetSpec& spec, const LoadOptions& opt) {
  if (opt.image_size == 0) throw std::invalid_argument("image_size must be positive");
  Rng rng(opt.seed ^ 0x5eed0fda7aULL);
  if (spec.source == DatasetSource::kSynthetic) {
    DatasetSplits out = make_blobs(opt.synthetic_classes, opt.synthetic_samples, spec.channels,
                                   opt.image_size, opt.seed);
    if (opt.normalize) {
      const ChannelStats st{out.channel_mean, out.channel_std};
      normalize_channels(out.train.images, st);
      normalize_channels(out.val.images, st);
      normalize_channels(out.test.images, st);
    }
    return out;
  }
  spec.validate();
  const fs::path root = opt.root / spec.subdir;
  if (spec.name == "cifar10") {
    std::vector<fs::path> train_files;
    for (int i = 1; i <= 5; ++i) train_files.push_back(root / fmt::format("data_batch_{}.bin", i));
    const Pool tr = cifar_pool(train_files, 1, 0, spec.num_classes);
    const Pool te = cifar_pool({root / "test_batch.bin"}, 1, 0, spec.num_classes);
    auto [t, v] = carve_val(tr, spec, rng);
    return finish(spec, tr, std::move(t), std::move(v), te, all_indices(te), opt, rng);
  }
  if (spec.name == "cifar100") {
    const Pool tr = cifar_pool({root / "train.bin"}, 2, 1, spec.num_classes);
    const Pool te = cifar_pool({root / "test.bin"}, 2, 1, spec.num_classes);
    auto [t, v] = carve_val(tr, spec, rng);
    return finish(spec, tr, std::move(t), std::move(v), te, all_indices(te), opt, rng);
  }
  if (spec.name == "fmnist") {
    const Pool tr = idx_pool(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
                             spec.num_classes);
    const Pool te = idx_pool(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte",
                             spec.num_classes);
    auto [t, v] = carve_val(tr, spec, rng);
    return finish(spec, tr, std::move(t), std::move(v), te, all_indices(te), opt, rng);
  }
  if (spec.source == DatasetSource::kLocalDirectory) {
    std::vector<std::string> classes;
    if (fs::is_directory(root / "train") && fs::is_directory(root / "test")) {
      const Pool tr = directory_pool(root / "train", classes, spec.num_classes);
      const Pool te = directory_pool(root / "test", classes, spec.num_classes);
      auto [t, v] = carve_val(tr, spec, rng);
      return finish(spec, tr, std::move(t), std::move(v), te, all_indices(te), opt, rng);
    }
    const Pool pool = directory_pool(root, classes, spec.num_classes);
    Carve c = carve_three(pool, spec, rng);
    return finish(spec, pool, std::move(c.train), std::move(c.val), pool, std::move(c.test), opt,
                  rng);
  }
  throw NotFoundError(fmt::format("no loader for dataset '{}'", spec.name));
}

DatasetSplits load_dataset(std::string_view name, const LoadOptions& options) {
  return load_dataset(DatasetRegistry::get(name), options);
}

}  // namespace aep::harness
