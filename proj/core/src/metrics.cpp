#include "capstream/metrics.hpp"

#include <algorithm>
#include <tuple>

#include "capstream/error.hpp"

namespace capstream {

SampleIndex overlap(const Interval& a, const Interval& b) noexcept {
  const SampleIndex lo = std::max(a.start, b.start);
  const SampleIndex hi = std::min(a.end, b.end);
  return hi >= lo ? hi - lo + 1 : 0;
}

double iou(const Interval& a, const Interval& b) noexcept {
  const SampleIndex inter = overlap(a, b);
  const SampleIndex uni = a.length() + b.length() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

bool contains(const Interval& outer, const Interval& inner) noexcept {
  return outer.start <= inner.start && inner.end <= outer.end;
}

std::vector<Interval> frame_intervals(const std::vector<GestureFrame>& frames) {
  std::vector<Interval> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.start, f.end});
  return out;
}

std::vector<Interval> event_intervals(const std::vector<GestureEvent>& events) {
  std::vector<Interval> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back({e.true_start, e.true_end});
  return out;
}

namespace {

void check_truth(const std::vector<Interval>& truth) {
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i].start <= truth[i].end, Errc::InvalidParameter, "truth event with start after end");
    if (i > 0) require(truth[i - 1].end < truth[i].start, Errc::InvalidParameter, "truth events must be sorted and disjoint");
  }
}

}  // namespace

std::vector<EventMatch> match_events(const std::vector<Interval>& frames, const std::vector<Interval>& truth) {
  check_truth(truth);
  struct Pair {
    SampleIndex ov;
    std::size_t event;
    Interval frame;
    std::size_t frame_idx;
  };
  std::vector<Pair> pairs;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    // Events are sorted, so only a contiguous range can intersect.
    auto it = std::lower_bound(truth.begin(), truth.end(), frames[f].start,
                               [](const Interval& e, SampleIndex s) { return e.end < s; });
    for (; it != truth.end() && it->start <= frames[f].end; ++it) {
      const SampleIndex ov = overlap(frames[f], *it);
      if (ov > 0) pairs.push_back({ov, static_cast<std::size_t>(it - truth.begin()), frames[f], f});
    }
  }
  // Ties resolve on interval content, not list position.
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.ov, a.event, a.frame.start, a.frame.end) < std::tie(a.ov, b.event, b.frame.start, b.frame.end);
  });

  std::vector<EventMatch> matches(truth.size());
  for (std::size_t e = 0; e < truth.size(); ++e) matches[e].event = e;
  std::vector<bool> frame_used(frames.size(), false);
  for (const auto& p : pairs) {
    if (matches[p.event].frame || frame_used[p.frame_idx]) continue;
    frame_used[p.frame_idx] = true;
    auto& m = matches[p.event];
    m.frame = p.frame_idx;
    m.overlap = p.ov;
    m.iou = iou(p.frame, truth[p.event]);
    m.contained = contains(p.frame, truth[p.event]);
  }
  return matches;
}

DetectionReport detection_rate(const std::vector<Interval>& frames, const std::vector<Interval>& truth) {
  DetectionReport r;
  r.matches = match_events(frames, truth);
  r.total_events = truth.size();
  for (const auto& m : r.matches) r.detected_events += m.frame ? 1 : 0;
  r.detection_rate = r.total_events ? static_cast<double>(r.detected_events) / static_cast<double>(r.total_events) : 0.0;
  return r;
}

DetectionReport detection_rate(const std::vector<GestureFrame>& frames, const std::vector<GestureEvent>& truth) {
  return detection_rate(frame_intervals(frames), event_intervals(truth));
}

ExtractionReport extraction_rate(const std::vector<Interval>& frames, const std::vector<Interval>& truth,
                                 double iou_min) {
  require(iou_min > 0.0 && iou_min <= 1.0, Errc::InvalidParameter, "iou_min must lie in (0, 1]");
  ExtractionReport r;
  r.iou_min = iou_min;
  r.min_iou = 1.0;
  for (const auto& m : match_events(frames, truth)) {
    if (!m.frame) continue;
    ++r.total_detected;
    r.ious.push_back(m.iou);
    r.mean_iou += m.iou;
    r.min_iou = std::min(r.min_iou, m.iou);
    if (m.contained) {
      ++r.contained;
      ++r.correctly_framed;
    } else if (m.iou >= iou_min) {
      ++r.iou_only;
      ++r.correctly_framed;
    }
  }
  if (r.total_detected) {
    r.mean_iou /= static_cast<double>(r.total_detected);
    r.extraction_rate = static_cast<double>(r.correctly_framed) / static_cast<double>(r.total_detected);
  } else {
    r.min_iou = 0.0;
  }
  return r;
}

ExtractionReport extraction_rate(const std::vector<GestureFrame>& frames, const std::vector<GestureEvent>& truth,
                                 double iou_min) {
  return extraction_rate(frame_intervals(frames), event_intervals(truth), iou_min);
}

}  // namespace capstream
