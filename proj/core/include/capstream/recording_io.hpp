#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "capstream/config.hpp"
#include "capstream/signal_model.hpp"

namespace capstream {

// Recording files are CSV with header `index,s1,s2,s3,s4`. Labels live in a
// sidecar `<stem>.labels.csv` with header `class_id,true_start,true_end`.
// Single recordings may carry a `<stem>.manifest`; dataset directories carry
// `manifest.txt` next to rec_NNNN.csv files.

std::string format_double(double v);

void write_stream_csv(const std::filesystem::path& path, const RawStream& stream);
RawStream read_stream_csv(const std::filesystem::path& path, double sampling_rate);

void write_labels_csv(const std::filesystem::path& path, const std::vector<GestureEvent>& events);
std::vector<GestureEvent> read_labels_csv(const std::filesystem::path& path);

std::filesystem::path labels_path_for(const std::filesystem::path& recording);
std::filesystem::path manifest_path_for(const std::filesystem::path& recording);

KeyValueConfig make_manifest(std::uint64_t seed, const PhysicsParams& params);
PhysicsParams physics_from_config(const KeyValueConfig& cfg, PhysicsParams base = {});

/// Writes the recording, its labels sidecar, and (when given) its manifest.
void write_recording(const std::filesystem::path& path, const LabeledRecording& rec,
                     const KeyValueConfig* manifest = nullptr);

/// Reads a recording; labels are optional (empty when no sidecar exists).
/// The sampling rate comes from the sidecar manifest when present, else `fallback_rate`.
LabeledRecording read_recording(const std::filesystem::path& path, double fallback_rate = 76.5);

/// Sampling rate recorded next to a recording, if any.
double sampling_rate_for(const std::filesystem::path& recording, double fallback_rate);

void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledRecording>& recs,
                   const KeyValueConfig& manifest);
std::vector<LabeledRecording> read_dataset(const std::filesystem::path& dir);

}  // namespace capstream
