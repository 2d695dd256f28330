#include "staircase/sse.hpp"

namespace staircase {

void SseParser::feed(std::string_view bytes, std::vector<std::string>& events) {
  buffer_.append(bytes);
  std::size_t start = 0;
  for (;;) {
    std::size_t nl = buffer_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(buffer_.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    take_line(line, events);
    start = nl + 1;
  }
  buffer_.erase(0, start);
}

void SseParser::take_line(std::string_view line,
                          std::vector<std::string>& events) {
  if (line.empty()) {
    if (has_data_) {
      events.push_back(std::move(data_));
      data_.clear();
      has_data_ = false;
    }
    return;
  }
  if (line.front() == ':') return;  // comment

  std::string_view field = line;
  std::string_view value;
  std::size_t colon = line.find(':');
  if (colon != std::string_view::npos) {
    field = line.substr(0, colon);
    value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  }
  if (field == "data") {
    if (has_data_) data_ += '\n';
    data_.append(value);
    has_data_ = true;
  }
  // event:, id:, retry: and unknown fields are ignored
}

bool SseParser::at_event_boundary() const {
  return buffer_.empty() && !has_data_;
}

}  // namespace staircase
