#include "brainleaks/encoding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "brainleaks/rng.hpp"

namespace brainleaks {

void StaticImage::require_unit_range(const char* where) const {
  if (!((pixels.array() >= 0.0) && (pixels.array() <= 1.0)).all()) {
    throw DomainError(std::string(where) + ": pixel values outside [0,1]");
  }
}

SpikeTrain rate_encode(const StaticImage& img, Index steps, std::uint64_t seed) {
  img.require_unit_range("rate_encode");
  if (steps < 1) throw DomainError("rate_encode: need at least one step");
  const Index features = img.height() * img.width();
  Rng rng(seed);
  SpikeTrain train(steps, features);
  for (Index t = 0; t < steps; ++t) {
    for (Index y = 0; y < img.height(); ++y) {
      for (Index x = 0; x < img.width(); ++x) {
        const double p = img.pixels(y, x);
        train.data(t, y * img.width() + x) = rng.bernoulli(p) ? 1.0 : 0.0;
      }
    }
  }
  return train;
}

Matrix rate_decode(const SpikeTrain& train, Index height, Index width) {
  if (height * width != train.features()) {
    throw DimensionError("rate_decode: grid does not match feature count");
  }
  Vector mean = train.data.colwise().mean().transpose();
  Matrix img(height, width);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) img(y, x) = mean[y * width + x];
  }
  return img;
}

SpikeTrain bin_events(const EventStream& stream, Index windows, int retain_polarity) {
  if (windows < 1) throw DomainError("bin_events: need at least one window");
  if (stream.events.empty()) throw DomainError("bin_events: empty event stream");
  if (stream.width < 1 || stream.height < 1) throw DomainError("bin_events: sensor extents unset");

  const std::int64_t t_min = stream.events.front().t;
  const std::int64_t t_max = stream.events.back().t;
  const double span = static_cast<double>(t_max - t_min);

  SpikeTrain train(windows, stream.width * stream.height);
  for (const Event& e : stream.events) {
    if (e.polarity != retain_polarity) continue;
    Index w = 0;
    if (span > 0.0) {
      w = static_cast<Index>(static_cast<double>(e.t - t_min) / span * static_cast<double>(windows));
      if (w >= windows) w = windows - 1;  // final window closed on the right
    }
    train.data(w, static_cast<Index>(e.y) * stream.width + e.x) = 1.0;
  }
  return train;
}

SpikeTrain downsample_spike_frames(const SpikeTrain& train, Index height, Index width, Index factor) {
  if (factor < 1) throw DomainError("downsample: factor must be >= 1");
  if (height % factor != 0 || width % factor != 0) {
    throw DimensionError("downsample: extents not divisible by factor");
  }
  if (height * width != train.features()) {
    throw DimensionError("downsample: grid does not match feature count");
  }
  const Index oh = height / factor, ow = width / factor;
  SpikeTrain out(train.steps(), oh * ow);
  const double cells = static_cast<double>(factor * factor);
  for (Index t = 0; t < train.steps(); ++t) {
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (Index dy = 0; dy < factor; ++dy) {
          for (Index dx = 0; dx < factor; ++dx) {
            acc += train.data(t, (oy * factor + dy) * width + ox * factor + dx);
          }
        }
        out.data(t, oy * ow + ox) = (acc / cells >= 0.5) ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw FormatError(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

std::vector<StaticImage> load_mnist_idx(const std::string& images_path,
                                        const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError(images_path + ": cannot open");
  if (read_u32_be(imgs, images_path) != 0x00000803u) {
    throw FormatError(images_path + ": bad IDX image magic");
  }
  const std::uint32_t n = read_u32_be(imgs, images_path);
  const std::uint32_t rows = read_u32_be(imgs, images_path);
  const std::uint32_t cols = read_u32_be(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw FormatError(labels_path + ": cannot open");
  if (read_u32_be(labs, labels_path) != 0x00000801u) {
    throw FormatError(labels_path + ": bad IDX label magic");
  }
  const std::uint32_t nl = read_u32_be(labs, labels_path);
  if (n != nl) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(nl) + " labels");
  }

  std::vector<unsigned char> pix(static_cast<size_t>(n) * rows * cols);
  imgs.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
  if (static_cast<size_t>(imgs.gcount()) != pix.size()) {
    throw FormatError(images_path + ": truncated image data");
  }
  std::vector<unsigned char> lab(n);
  labs.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(lab.size()));
  if (static_cast<size_t>(labs.gcount()) != lab.size()) {
    throw FormatError(labels_path + ": truncated label data");
  }

  std::vector<StaticImage> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    StaticImage img;
    img.label = lab[i];
    img.pixels = Matrix(rows, cols);
    const unsigned char* base = pix.data() + static_cast<size_t>(i) * rows * cols;
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        img.pixels(r, c) = static_cast<double>(base[r * cols + c]) / 255.0;
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

EventStream load_event_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  EventStream stream;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    long long x, y, t, p;
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> x >> c1 >> y >> c2 >> t >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
      if (line_no == 1) continue;  // optional header
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed event line");
    }
    std::string rest;
    if (ls >> rest) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": trailing characters");
    }
    if (x < 0 || y < 0) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": negative coordinates");
    }
    if (p != 1 && p != -1) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": polarity must be -1 or 1");
    }
    stream.events.push_back({static_cast<int>(x), static_cast<int>(y), t, static_cast<int>(p)});
    stream.width = std::max(stream.width, static_cast<Index>(x) + 1);
    stream.height = std::max(stream.height, static_cast<Index>(y) + 1);
  }
  if (stream.events.empty()) throw FormatError(path + ": no events");
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

void save_event_csv(const EventStream& stream, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot write");
  out << "x,y,t,polarity\n";
  for (const Event& e : stream.events) {
    out << e.x << "," << e.y << "," << e.t << "," << e.polarity << "\n";
  }
}

SynthKind synth_kind_from_string(const std::string& name) {
  if (name == "bars") return SynthKind::kBars;
  if (name == "blobs") return SynthKind::kBlobs;
  if (name == "digits") return SynthKind::kDigits;
  throw ConfigError("unknown synthetic geometry kind: " + name);
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kBars: return "bars";
    case SynthKind::kBlobs: return "blobs";
    case SynthKind::kDigits: return "digits";
  }
  return "?";
}

namespace {

// 5x7 dot-matrix glyphs, rendered with per-sample affine jitter and gaussian
// splats so samples within a class vary like sloppy handwriting.
constexpr std::array<const char*, 10> kGlyphs = {
    "01110"
    "10001"
    "10011"
    "10101"
    "11001"
    "10001"
    "01110",
    "00100"
    "01100"
    "00100"
    "00100"
    "00100"
    "00100"
    "01110",
    "01110"
    "10001"
    "00001"
    "00010"
    "00100"
    "01000"
    "11111",
    "11111"
    "00010"
    "00100"
    "00010"
    "00001"
    "10001"
    "01110",
    "00010"
    "00110"
    "01010"
    "10010"
    "11111"
    "00010"
    "00010",
    "11111"
    "10000"
    "11110"
    "00001"
    "00001"
    "10001"
    "01110",
    "00110"
    "01000"
    "10000"
    "11110"
    "10001"
    "10001"
    "01110",
    "11111"
    "00001"
    "00010"
    "00100"
    "01000"
    "01000"
    "01000",
    "01110"
    "10001"
    "10001"
    "01110"
    "10001"
    "10001"
    "01110",
    "01110"
    "10001"
    "10001"
    "01111"
    "00001"
    "00010"
    "01100"};

void splat(Matrix& canvas, double cy, double cx, double sigma, double amplitude) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy)) - r);
  const int y1 = std::min(static_cast<int>(canvas.rows()) - 1, static_cast<int>(std::ceil(cy)) + r);
  const int x0 = std::max(0, static_cast<int>(std::floor(cx)) - r);
  const int x1 = std::min(static_cast<int>(canvas.cols()) - 1, static_cast<int>(std::ceil(cx)) + r);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      const double v = amplitude * std::exp(-d2 * inv);
      canvas(y, x) = std::max(canvas(y, x), v);
    }
  }
}

StaticImage render_digit(int digit, Rng& rng) {
  const Index size = 28;
  StaticImage img;
  img.label = digit;
  img.pixels = Matrix::Zero(size, size);

  const double rot = rng.uniform(-0.14, 0.14);
  const double sx = rng.uniform(0.85, 1.08);
  const double sy = rng.uniform(0.85, 1.08);
  const double shear = rng.uniform(-0.1, 0.1);
  const double dx = rng.uniform(-2.0, 2.0);
  const double dy = rng.uniform(-2.0, 2.0);
  const double sigma = rng.uniform(1.05, 1.35);
  const double amp = rng.uniform(0.85, 1.0);
  const double cr = std::cos(rot), sr = std::sin(rot);

  const char* glyph = kGlyphs[static_cast<size_t>(digit)];
  for (int row = 0; row < 7; ++row) {
    for (int col = 0; col < 5; ++col) {
      if (glyph[row * 5 + col] != '1') continue;
      // Glyph cell -> centered canvas coordinates, cell pitch ~3.1px.
      const double gx = (col - 2.0) * 3.1 * sx;
      const double gy = (row - 3.0) * 3.1 * sy;
      const double tx = gx + shear * gy;
      const double px = 14.0 + cr * tx - sr * gy + dx;
      const double py = 14.0 + sr * tx + cr * gy + dy;
      splat(img.pixels, py, px, sigma, amp);
    }
  }
  // faint sensor noise
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      img.pixels(y, x) = std::min(1.0, img.pixels(y, x) + rng.uniform(0.0, 0.04));
    }
  }
  return img;
}

StaticImage render_bar(int cls, int classes, Rng& rng) {
  const Index size = 12;
  StaticImage img;
  img.label = cls;
  img.pixels = Matrix::Zero(size, size);
  const Index col = 1 + (static_cast<Index>(cls) * (size - 2)) / std::max(1, classes);
  for (Index y = 1; y < size - 1; ++y) {
    img.pixels(y, col) = rng.uniform(0.8, 1.0);
    if (col + 1 < size) img.pixels(y, col + 1) = rng.uniform(0.5, 0.85);
  }
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      img.pixels(y, x) = std::min(1.0, img.pixels(y, x) + rng.uniform(0.0, 0.08));
    }
  }
  return img;
}

StaticImage render_blob(int cls, int classes, Rng& rng) {
  const Index size = 12;
  StaticImage img;
  img.label = cls;
  img.pixels = Matrix::Zero(size, size);
  const double angle = 2.0 * M_PI * cls / std::max(1, classes);
  const double cy = 5.5 + 3.4 * std::sin(angle) + rng.uniform(-0.5, 0.5);
  const double cx = 5.5 + 3.4 * std::cos(angle) + rng.uniform(-0.5, 0.5);
  splat(img.pixels, cy, cx, rng.uniform(1.1, 1.5), rng.uniform(0.85, 1.0));
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      img.pixels(y, x) = std::min(1.0, img.pixels(y, x) + rng.uniform(0.0, 0.08));
    }
  }
  return img;
}

}  // namespace

std::vector<StaticImage> synth_dataset(int classes, int per_class, SynthKind kind,
                                       std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_dataset: need at least 2 classes");
  if (kind == SynthKind::kDigits && classes > 10) {
    throw ConfigError("synth_dataset: digits kind supports at most 10 classes");
  }
  if (per_class < 1) throw ConfigError("synth_dataset: need at least 1 sample per class");
  std::vector<StaticImage> out;
  out.reserve(static_cast<size_t>(classes) * per_class);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(c) * 1000003ULL + i));
      switch (kind) {
        case SynthKind::kBars: out.push_back(render_bar(c, classes, rng)); break;
        case SynthKind::kBlobs: out.push_back(render_blob(c, classes, rng)); break;
        case SynthKind::kDigits: out.push_back(render_digit(c, rng)); break;
      }
    }
  }
  // Interleave classes so contiguous batches stay mixed.
  std::vector<StaticImage> shuffled;
  shuffled.reserve(out.size());
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      shuffled.push_back(std::move(out[static_cast<size_t>(c) * per_class + i]));
    }
  }
  return shuffled;
}

std::vector<LabeledEventStream> synth_event_dataset(int classes, int per_class, Index grid,
                                                    Index windows, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_event_dataset: need at least 2 classes");
  if (grid < 4) throw ConfigError("synth_event_dataset: grid too small");
  std::vector<LabeledEventStream> out;
  out.reserve(static_cast<size_t>(classes) * per_class);
  const std::int64_t window_us = 1000;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(Rng::mix(seed ^ 0xe11e57ULL, static_cast<std::uint64_t>(c) * 1000003ULL + i));
      // Class-specific template on the grid, then Poisson-like +1 events per window.
      StaticImage tmpl;
      tmpl.label = c;
      tmpl.pixels = Matrix::Zero(grid, grid);
      const Index col = 1 + (static_cast<Index>(c) * (grid - 2)) / std::max(1, classes);
      for (Index y = 0; y < grid; ++y) tmpl.pixels(y, col) = 0.9;

      LabeledEventStream ls;
      ls.label = c;
      ls.stream.width = grid;
      ls.stream.height = grid;
      for (Index w = 0; w < windows; ++w) {
        for (Index y = 0; y < grid; ++y) {
          for (Index x = 0; x < grid; ++x) {
            const double p = std::min(1.0, tmpl.pixels(y, x) + 0.03);
            if (rng.bernoulli(p)) {
              const std::int64_t t = w * window_us + static_cast<std::int64_t>(rng.below(window_us));
              ls.stream.events.push_back({static_cast<int>(x), static_cast<int>(y), t, +1});
              // occasional duplicate in the same voxel-window
              if (rng.bernoulli(0.05)) {
                ls.stream.events.push_back({static_cast<int>(x), static_cast<int>(y), t, +1});
              }
            }
            // opposite-polarity chatter, dropped by the binning filter
            if (rng.bernoulli(0.01)) {
              const std::int64_t t = w * window_us + static_cast<std::int64_t>(rng.below(window_us));
              ls.stream.events.push_back({static_cast<int>(x), static_cast<int>(y), t, -1});
            }
          }
        }
      }
      // Anchor the stream so every window is populated relative to [0, T*window].
      ls.stream.events.push_back({0, 0, 0, -1});
      ls.stream.events.push_back({0, 0, windows * window_us - 1, -1});
      std::stable_sort(ls.stream.events.begin(), ls.stream.events.end(),
                       [](const Event& a, const Event& b) { return a.t < b.t; });
      out.push_back(std::move(ls));
    }
  }
  return out;
}

}  // namespace brainleaks
