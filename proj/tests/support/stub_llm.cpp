#include "stub_llm.hpp"

#include "json.hpp"

namespace xdd::testing {

StubLlm::StubLlm(std::vector<StubReply> script) : script_(std::move(script)) {
  server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    StubReply reply;
    {
      std::lock_guard lock(mu_);
      requests_.push_back({req.path, req.get_header_value("Authorization"), req.body});
      if (!fail_needle_.empty() && req.body.find(fail_needle_) != std::string::npos) {
        reply.status = fail_status_;
      } else if (next_ < script_.size()) {
        reply = script_[next_++];
      }
    }
    res.status = reply.status;
    if (!reply.raw_body.empty()) {
      res.set_content(reply.raw_body, "application/json");
    } else if (reply.status >= 200 && reply.status < 300) {
      const nlohmann::json body = {
          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply.content}}}}}}};
      res.set_content(body.dump(), "application/json");
    } else {
      res.set_content(R"({"error": "scripted failure"})", "application/json");
    }
  });
  port_ = server_.bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

StubLlm::~StubLlm() {
  server_.stop();
  thread_.join();
}

std::string StubLlm::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<RecordedRequest> StubLlm::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

void StubLlm::fail_when_prompt_contains(std::string needle, int status) {
  std::lock_guard lock(mu_);
  fail_needle_ = std::move(needle);
  fail_status_ = status;
}

}  // namespace xdd::testing
