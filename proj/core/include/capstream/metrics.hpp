#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "capstream/detector.hpp"
#include "capstream/signal_model.hpp"

namespace capstream {

/// Closed sample interval [start, end].
struct Interval {
  SampleIndex start = 0;
  SampleIndex end = 0;

  SampleIndex length() const noexcept { return end >= start ? end - start + 1 : 0; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

SampleIndex overlap(const Interval& a, const Interval& b) noexcept;
double iou(const Interval& a, const Interval& b) noexcept;
bool contains(const Interval& outer, const Interval& inner) noexcept;

std::vector<Interval> frame_intervals(const std::vector<GestureFrame>& frames);
std::vector<Interval> event_intervals(const std::vector<GestureEvent>& events);

struct EventMatch {
  std::size_t event = 0;                // index into truth
  std::optional<std::size_t> frame;     // index into frames, when detected
  SampleIndex overlap = 0;
  double iou = 0;
  bool contained = false;               // frame covers the whole event
};

/// One-to-one greedy matching: pairs sorted by overlap (largest first) are
/// accepted while both the event and the frame are still free.
std::vector<EventMatch> match_events(const std::vector<Interval>& frames, const std::vector<Interval>& truth);

struct DetectionReport {
  std::size_t total_events = 0;
  std::size_t detected_events = 0;
  double detection_rate = 0;
  std::vector<EventMatch> matches;  // one per truth event, in truth order
};

struct ExtractionReport {
  std::size_t total_detected = 0;
  std::size_t correctly_framed = 0;
  std::size_t contained = 0;       // correct through containment
  std::size_t iou_only = 0;        // correct through IoU without containment
  double extraction_rate = 0;
  double iou_min = 0.8;
  double mean_iou = 0;
  double min_iou = 0;
  std::vector<double> ious;        // per matched event
};

/// Throws invalid-parameter when truth events are unsorted or overlapping.
DetectionReport detection_rate(const std::vector<Interval>& frames, const std::vector<Interval>& truth);
DetectionReport detection_rate(const std::vector<GestureFrame>& frames, const std::vector<GestureEvent>& truth);

/// iou_min must lie in (0, 1].
ExtractionReport extraction_rate(const std::vector<Interval>& frames, const std::vector<Interval>& truth,
                                 double iou_min = 0.8);
ExtractionReport extraction_rate(const std::vector<GestureFrame>& frames, const std::vector<GestureEvent>& truth,
                                 double iou_min = 0.8);

}  // namespace capstream
