#include "mdsyn/eventsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mdsyn::eventsim {

void EventSimConfig::validate() const {
  if (!(contrast > 0.0) || !std::isfinite(contrast)) {
    throw Error(ErrorCode::InvalidArgument, "contrast threshold must be positive");
  }
  if (!(motion_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "motion magnitude must be >= 0");
}

double sample_contrast(Rng& rng) { return uniform(rng, kMinContrast, kMaxContrast); }

GridD log_brightness(const ImageF& gray) { return kernels::log_intensity(gray, kLogEpsilon); }

EventSimulator::EventSimulator(const ImageF& first_frame, double t0, const EventSimConfig& cfg)
    : cfg_(cfg), reference_(log_brightness(first_frame)), last_log_(reference_), last_t_(t0) {
  cfg_.validate();
  if (first_frame.channels() != 1) throw Error(ErrorCode::InvalidArgument, "event simulation expects grayscale");
}

std::vector<EventRecord> EventSimulator::feed(const ImageF& frame, double t1) {
  if (frame.width() != reference_.width() || frame.height() != reference_.height() || frame.channels() != 1) {
    throw Error(ErrorCode::SizeMismatch, "frame size differs from the simulator state");
  }
  const GridD level = log_brightness(frame);
  const GridD start_ref = reference_;
  const Image<int> counts = kernels::event_counts(reference_, level, cfg_.contrast);

  std::vector<EventRecord> events;
  const double dt = t1 - last_t_;
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const int n = counts(x, y);
      if (n == 0) continue;
      const int p = n > 0 ? 1 : -1;
      if ((p > 0 && cfg_.polarity == PolarityMode::NegativeOnly) ||
          (p < 0 && cfg_.polarity == PolarityMode::PositiveOnly)) {
        continue;
      }
      const double from = last_log_(x, y);
      const double span = level(x, y) - from;
      for (int k = 1; k <= std::abs(n); ++k) {
        const double crossing = start_ref(x, y) + p * k * cfg_.contrast;
        double frac = std::abs(span) > 1e-15 ? (crossing - from) / span : 1.0;
        frac = std::clamp(frac, 0.0, 1.0);
        events.push_back({x, y, last_t_ + frac * dt, p});
      }
    }
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
  last_log_ = level;
  last_t_ = t1;
  return events;
}

std::vector<EventRecord> simulate_events(const ImageF& frame0, const ImageF& frame1, const EventSimConfig& cfg) {
  if (!frame0.same_shape(frame1)) throw Error(ErrorCode::SizeMismatch, "event frames differ in shape");
  EventSimulator sim(frame0, 0.0, cfg);
  return sim.feed(frame1, 1.0);
}

Homography sample_corner_motion(int width, int height, double max_px, Rng& rng) {
  if (max_px == 0.0) return Homography::identity();
  const std::array<Vec2, 4> src = image_corners(width, height);
  std::array<Vec2, 4> dst;
  for (int i = 0; i < 4; ++i) {
    const double r = max_px * std::sqrt(uniform01(rng));
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    dst[i] = src[i] + Vec2(r * std::cos(theta), r * std::sin(theta));
  }
  return homography_from_4_points(src, dst);
}

MotionPair synthesize_motion_pair(const ImageU8& image, const EventSimConfig& cfg) {
  cfg.validate();
  MotionPair pair;
  pair.frame0 = to_gray(image);
  Rng rng = derive_rng(cfg.seed, "motion");
  pair.motion = sample_corner_motion(image.width(), image.height(), cfg.motion_px, rng);
  if (pair.motion == Homography::identity()) {
    pair.frame1 = pair.frame0;
  } else {
    pair.frame1 = kernels::warp_bilinear(pair.frame0, pair.motion.inverse().affine_scaled(), image.width(),
                                         image.height());
  }
  return pair;
}

ImageU8 EventFrame::to_image() const {
  ImageU8 out(counts.width(), counts.height(), 1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double v = baseline + gain * counts.data()[i];
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
  }
  return out;
}

EventFrame accumulate_events(const std::vector<EventRecord>& events, int width, int height, double gain) {
  EventFrame frame{Image<int>(width, height, 1, 0), 128, gain};
  for (const EventRecord& e : events) {
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      throw Error(ErrorCode::BoundsError, "event outside the frame");
    }
    frame.counts(e.x, e.y) += e.polarity;
  }
  return frame;
}

ImageU8 render_event_frame(const std::vector<EventRecord>& events, int width, int height, double gain) {
  return accumulate_events(events, width, height, gain).to_image();
}

void write_events_csv(std::ostream& out, const std::vector<EventRecord>& events) {
  char buf[64];
  for (const EventRecord& e : events) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%d\n", e.x, e.y, e.t, e.polarity);
    out << buf;
  }
}

GeneratedEventImage generate_event_image(const ImageU8& image, std::uint64_t seed, std::string_view key,
                                         double motion_px) {
  Rng rng = derive_rng(seed, key);
  EventSimConfig cfg;
  cfg.contrast = sample_contrast(rng);
  cfg.motion_px = motion_px;
  cfg.seed = rng();
  const MotionPair pair = synthesize_motion_pair(image, cfg);
  const std::vector<EventRecord> events = simulate_events(pair.frame0, pair.frame1, cfg);
  return {render_event_frame(events, image.width(), image.height()), cfg.contrast, events.size()};
}

}  // namespace mdsyn::eventsim
