#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace capstream {

/// UI command bound to a gesture class (1..10). Throws a protocol error otherwise.
std::string_view map_class_to_command(int class_id);

/// One classification result on the wire.
struct CommandMessage {
  std::int64_t timestamp = 0;  // ms since stream start
  std::size_t frame_index = 0;
  int class_id = 1;
  std::string label;
  double probability = 0;
  std::string command;

  friend bool operator==(const CommandMessage&, const CommandMessage&) = default;
};

/// Builds a message with the label and command taken from the class table.
CommandMessage make_message(std::int64_t timestamp, std::size_t frame_index, int class_id, double probability);

/// Checks field ranges and that (class_id, label, command) is a table triple.
void validate_message(const CommandMessage& msg);

/// Single-line JSON object without the trailing newline.
std::string serialize_message(const CommandMessage& msg);

/// Parses and validates one line; throws a protocol error on any defect.
CommandMessage parse_message(std::string_view line);

}  // namespace capstream
