#include "capstream/protocol.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "capstream/error.hpp"
#include "capstream/signal_model.hpp"

namespace capstream {

std::string_view map_class_to_command(int class_id) {
  switch (class_id) {
    case 1: return "Next page";
    case 2: return "Previous page";
    case 3: return "Scroll up";
    case 4: return "Scroll down";
    case 5: return "Previous 2 pages";
    case 6: return "Next 2 pages";
    case 7: return "Off";
    case 8: return "On";
    case 9: return "Volume down";
    case 10: return "Volume up";
    default: fail(Errc::Protocol, "no command for class " + std::to_string(class_id));
  }
}

CommandMessage make_message(std::int64_t timestamp, std::size_t frame_index, int class_id, double probability) {
  CommandMessage m;
  m.timestamp = timestamp;
  m.frame_index = frame_index;
  m.class_id = class_id;
  m.command = std::string(map_class_to_command(class_id));
  m.label = std::string(gesture_label(class_id));
  m.probability = probability;
  return m;
}

void validate_message(const CommandMessage& msg) {
  const std::string_view command = map_class_to_command(msg.class_id);
  if (msg.label != gesture_label(msg.class_id)) fail(Errc::Protocol, "label does not match class " + std::to_string(msg.class_id));
  if (msg.command != command) fail(Errc::Protocol, "command does not match class " + std::to_string(msg.class_id));
  if (msg.timestamp < 0) fail(Errc::Protocol, "negative timestamp");
  if (msg.frame_index < 1) fail(Errc::Protocol, "frame_index must be >= 1");
  if (!(msg.probability >= 0.0 && msg.probability <= 1.0)) fail(Errc::Protocol, "probability outside [0,1]");
}

std::string serialize_message(const CommandMessage& msg) {
  nlohmann::ordered_json j;
  j["timestamp"] = msg.timestamp;
  j["frame_index"] = msg.frame_index;
  j["class_id"] = msg.class_id;
  j["label"] = msg.label;
  j["probability"] = msg.probability;
  j["command"] = msg.command;
  return j.dump();
}

CommandMessage parse_message(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::Protocol, std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) fail(Errc::Protocol, "message is not a JSON object");
  static constexpr const char* kFields[] = {"timestamp", "frame_index", "class_id", "label", "probability", "command"};
  if (j.size() != std::size(kFields)) fail(Errc::Protocol, "message must have exactly six fields");
  for (const char* f : kFields) {
    if (!j.contains(f)) fail(Errc::Protocol, std::string("missing field: ") + f);
  }
  if (!j["timestamp"].is_number_integer() || !j["frame_index"].is_number_unsigned() ||
      !j["class_id"].is_number_integer() || !j["label"].is_string() || !j["probability"].is_number() ||
      !j["command"].is_string()) {
    fail(Errc::Protocol, "message field has the wrong type");
  }
  CommandMessage m;
  m.timestamp = j["timestamp"].get<std::int64_t>();
  m.frame_index = j["frame_index"].get<std::size_t>();
  m.class_id = j["class_id"].get<int>();
  m.label = j["label"].get<std::string>();
  m.probability = j["probability"].get<double>();
  m.command = j["command"].get<std::string>();
  validate_message(m);
  return m;
}

}  // namespace capstream
