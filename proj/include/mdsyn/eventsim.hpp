#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "mdsyn/geometry.hpp"
#include "mdsyn/image.hpp"
#include "mdsyn/kernels.hpp"
#include "mdsyn/random.hpp"

namespace mdsyn::eventsim {

// Floor added before the logarithm so that black pixels stay finite.
inline constexpr double kLogEpsilon = 1e-3;
// Contrast-threshold sampling range.
inline constexpr double kMinContrast = 0.05;
inline constexpr double kMaxContrast = 0.5;

struct EventRecord {
  int x = 0;
  int y = 0;
  double t = 0.0;
  int polarity = 1;  // -1 or +1

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

enum class PolarityMode { Both, PositiveOnly, NegativeOnly };

struct EventSimConfig {
  double contrast = 0.2;
  PolarityMode polarity = PolarityMode::Both;
  double motion_px = 2.0;  // max corner displacement of the synthetic motion
  std::uint64_t seed = 0;

  void validate() const;
};

// Draws C uniformly from [kMinContrast, kMaxContrast).
double sample_contrast(Rng& rng);

// L = log(I + eps) for I in [0, 1].
GridD log_brightness(const ImageF& gray);

// Stateful per-pixel simulator: each pixel keeps a reference log level that
// advances by p * C for every event it fires.
class EventSimulator {
 public:
  EventSimulator(const ImageF& first_frame, double t0, const EventSimConfig& cfg);

  // Feeds the next frame; events are timestamped by linear interpolation of
  // the crossing level between the previous and the new frame time.
  std::vector<EventRecord> feed(const ImageF& frame, double t1);

  const GridD& reference() const noexcept { return reference_; }

 private:
  EventSimConfig cfg_;
  GridD reference_;
  GridD last_log_;
  double last_t_;
};

// Events between two frames taken at t = 0 and t = 1. Throws SizeMismatch.
// Output is ordered by timestamp, then row, then column.
std::vector<EventRecord> simulate_events(const ImageF& frame0, const ImageF& frame1,
                                         const EventSimConfig& cfg);

struct MotionPair {
  ImageF frame0;
  ImageF frame1;
  Homography motion;  // maps frame0 pixels to frame1 pixels
};

// frame0 is the luma of `image`; frame1 is frame0 warped by a random
// homography whose corners move by at most cfg.motion_px.
MotionPair synthesize_motion_pair(const ImageU8& image, const EventSimConfig& cfg);

// Random homography with each image corner displaced by at most `max_px`.
Homography sample_corner_motion(int width, int height, double max_px, Rng& rng);

// Signed per-pixel event counts plus the rendering parameters.
struct EventFrame {
  Image<int> counts;
  int baseline = 128;
  double gain = 32.0;

  // baseline + gain * count, clamped to [0, 255].
  ImageU8 to_image() const;
};

EventFrame accumulate_events(const std::vector<EventRecord>& events, int width, int height,
                             double gain = 32.0);
ImageU8 render_event_frame(const std::vector<EventRecord>& events, int width, int height,
                           double gain = 32.0);

// `x,y,t,p` per line.
void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events);

// Complete event modality for one source image. The contrast is drawn per image
// from the stream keyed by (seed, key), so the output depends only on those.
struct GeneratedEventImage {
  ImageU8 frame;
  double contrast = 0.0;
  std::size_t event_count = 0;
};
GeneratedEventImage generate_event_image(const ImageU8& image, std::uint64_t seed, std::string_view key,
                                         double motion_px = 2.0);

}  // namespace mdsyn::eventsim
