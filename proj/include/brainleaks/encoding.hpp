#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brainleaks/spike_train.hpp"

namespace brainleaks {

struct StaticImage {
  Matrix pixels;  // [h x w], values in [0,1]
  int label = 0;

  Index height() const { return pixels.rows(); }
  Index width() const { return pixels.cols(); }
  void require_unit_range(const char* where) const;
};

struct Event {
  int x = 0;
  int y = 0;
  std::int64_t t = 0;   // microseconds
  int polarity = +1;    // -1 or +1
};

struct EventStream {
  Index width = 0;
  Index height = 0;
  std::vector<Event> events;  // non-decreasing in t after load
};

// Independent Bernoulli(pixel) spike per pixel per step, flattened row-major.
SpikeTrain rate_encode(const StaticImage& img, Index steps, std::uint64_t seed);

// Time-average a spike train back into [0,1] pixel intensities.
Matrix rate_decode(const SpikeTrain& train, Index height, Index width);

// Split [t_min, t_max] into `windows` equal bins (final bin closed on the
// right); voxel (window, y, x) is 1 iff at least one retained-polarity event
// falls into it.
SpikeTrain bin_events(const EventStream& stream, Index windows, int retain_polarity = +1);

// Spatial 2x2-style reduction of binned frames: average-pool blocks of
// `factor` and threshold at 0.5. Used to bring large sensors to desk scale.
SpikeTrain downsample_spike_frames(const SpikeTrain& train, Index height, Index width, Index factor);

// IDX-format readers (big-endian magic 0x803 images / 0x801 labels).
std::vector<StaticImage> load_mnist_idx(const std::string& images_path,
                                        const std::string& labels_path);

// Lines of "x,y,t,polarity" (optional header); events sorted by t on load.
EventStream load_event_csv(const std::string& path);
void save_event_csv(const EventStream& stream, const std::string& path);

enum class SynthKind { kBars, kBlobs, kDigits };
SynthKind synth_kind_from_string(const std::string& name);
std::string to_string(SynthKind kind);

// Deterministic labeled fixtures: class-distinctive geometry on small grids
// (bars, blobs) or 28x28 procedurally rendered digit glyphs.
std::vector<StaticImage> synth_dataset(int classes, int per_class, SynthKind kind,
                                       std::uint64_t seed);

struct LabeledEventStream {
  EventStream stream;
  int label = 0;
};

// Event-domain fixture: class-patterned streams whose binned form is a noisy
// rate code of the matching synthetic image.
std::vector<LabeledEventStream> synth_event_dataset(int classes, int per_class, Index grid,
                                                    Index windows, std::uint64_t seed);

}  // namespace brainleaks
