#pragma once

// HTTP client for an out-of-process reasoning backend.
//
//   POST {endpoint}/v1/respond
//   {"instruction": str, "observation": [[[[11 ints] x2] x8] x8], "context": str,
//    "feedback": [{"category", "detail"}] | null, "round": int}
//   -> {"response": {"kind": "plan"|"ids"|"count", "value": ...}, "rationale": str}

#include <httplib.h>

#include <cstdlib>
#include <optional>
#include <string>

#include "cimr/backends.hpp"
#include "cimr/serialization.hpp"

namespace cimr {

inline constexpr double kDefaultRemoteTimeoutSeconds = 30.0;
inline constexpr const char* kBackendUrlEnv = "CIMR_BACKEND_URL";

struct RemoteEndpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // "" or "/prefix"
};

inline RemoteEndpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  RemoteEndpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) e.base_path = url.substr(path_start);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

/// --backend-url wins over the environment variable.
inline std::optional<std::string> resolve_backend_url(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return flag;
  if (const char* env = std::getenv(kBackendUrlEnv); env && *env) return std::string(env);
  return std::nullopt;
}

inline json make_request(const ScenarioView& view, const FeedbackSignal* feedback, int round) {
  return json{{"instruction", view.instruction},
              {"observation", observation_to_json(view.observation)},
              {"context", view.context_text},
              {"feedback", feedback ? feedback_to_json(*feedback) : json(nullptr)},
              {"round", round}};
}

/// Parses a reply body; any structural problem is BackendError(BadReply).
inline Response parse_reply(const std::string& body, GoalKind expected) {
  Response r;
  try {
    const json j = json::parse(body);
    r = response_from_json(j.at("response"), j.value("rationale", std::string()));
  } catch (const json::exception& e) {
    throw BackendError(BackendErrc::BadReply, e.what());
  }
  if (answer_kind(r) != expected) {
    throw BackendError(BackendErrc::BadReply, "reply kind does not match the task");
  }
  return r;
}

/// Stateless between calls: every request opens its own connection, so
/// independent episodes can call concurrently.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string url, double timeout_s = kDefaultRemoteTimeoutSeconds)
      : endpoint_(split_endpoint(url)), url_(std::move(url)), timeout_s_(timeout_s) {}

  Response generate_initial(const ScenarioView& view, const FusedFeatures&, Rng&) override {
    return post(view, make_request(view, nullptr, 1));
  }

  Response refine_response(const ScenarioView& view, const Response&, const FeedbackSignal& feedback,
                           const FeatureSeq&, int round, Rng&) override {
    return post(view, make_request(view, &feedback, round));
  }

 private:
  Response post(const ScenarioView& view, const json& request) const {
    httplib::Client client(endpoint_.scheme_host_port);
    if (!client.is_valid()) throw BackendError(BackendErrc::Unreachable, "invalid URL " + url_);
    const auto secs = static_cast<time_t>(timeout_s_);
    const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const auto res = client.Post(endpoint_.base_path + "/v1/respond", request.dump(), "application/json");
    if (!res) {
      throw BackendError(BackendErrc::Unreachable,
                         url_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendError(BackendErrc::BadReply, "HTTP status " + std::to_string(res->status));
    }
    return parse_reply(res->body, view.kind);
  }

  RemoteEndpoint endpoint_;
  std::string url_;
  double timeout_s_;
};

class RemoteBackendFactory final : public BackendFactory {
 public:
  explicit RemoteBackendFactory(std::string url, double timeout_s = kDefaultRemoteTimeoutSeconds)
      : url_(std::move(url)), timeout_s_(timeout_s) {}

  // Only the URL reaches the session; the scenario's ground truth does not.
  std::unique_ptr<Backend> open(const Scenario&) const override {
    return std::make_unique<RemoteBackend>(url_, timeout_s_);
  }

 private:
  std::string url_;
  double timeout_s_;
};

}  // namespace cimr
