#pragma once

// Local chat-completion endpoint for client tests. Each request consumes the
// next scripted reply; once the script runs out every request succeeds.

#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

namespace xdd::testing {

struct StubReply {
  StubReply(int status_ = 200, std::string content_ = "stub commentary", std::string raw_body_ = {})
      : status(status_), content(std::move(content_)), raw_body(std::move(raw_body_)) {}

  int status;
  std::string content;   // ignored unless status is 2xx
  std::string raw_body;  // sent verbatim when non-empty
};

struct RecordedRequest {
  std::string path;
  std::string authorization;
  std::string body;
};

class StubLlm {
 public:
  explicit StubLlm(std::vector<StubReply> script = {});
  ~StubLlm();
  StubLlm(const StubLlm&) = delete;
  StubLlm& operator=(const StubLlm&) = delete;

  std::string endpoint() const;
  std::vector<RecordedRequest> requests() const;

  /// Fails requests whose prompt contains `needle` with `status`, always.
  void fail_when_prompt_contains(std::string needle, int status);

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  std::vector<StubReply> script_;
  std::size_t next_ = 0;
  std::vector<RecordedRequest> requests_;
  std::string fail_needle_;
  int fail_status_ = 500;
};

}  // namespace xdd::testing
