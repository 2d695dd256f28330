#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace staircase {

// Incremental server-sent-events parser. Feed raw bytes as they arrive;
// completed event data payloads come back in order. Field handling follows
// the SSE framing rules: lines end in \n (an optional \r is stripped),
// a blank line dispatches the event, multiple data lines are joined with
// \n, one space after "data:" is dropped, comment lines (":") and non-data
// fields (event:, id:, retry:) are ignored.
class SseParser {
 public:
  // Appends completed payloads to `events`.
  void feed(std::string_view bytes, std::vector<std::string>& events);

  // True when the stream ended cleanly between events; false when a partial
  // line or an undispatched data payload was pending.
  bool at_event_boundary() const;

 private:
  void take_line(std::string_view line, std::vector<std::string>& events);

  std::string buffer_;
  std::string data_;
  bool has_data_ = false;
};

}  // namespace staircase
