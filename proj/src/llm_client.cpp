#include "lamarl/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace lamarl {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw LlmConfigError("endpoint URL must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json arr = json::array();
  for (const ChatMessage& m : messages) {
    arr.push_back({{"role", m.role}, {"content", m.content}});
  }
  return arr;
}

}  // namespace

HttpLlmClient::HttpLlmClient(Options options) : options_(std::move(options)) {
  if (options_.url.empty()) {
    throw LlmConfigError("LLM endpoint URL is not configured");
  }
  if (options_.api_key.empty()) {
    throw LlmConfigError("LLM API key is not configured");
  }
  parse_url(options_.url);  // validate eagerly
}

HttpLlmClient HttpLlmClient::from_env(
    const std::string& model, std::function<void(const std::string&)> log) {
  Options opt;
  const char* url = std::getenv("LAMARL_LLM_URL");
  const char* key = std::getenv("LAMARL_LLM_KEY");
  if (!url || !*url) {
    throw LlmConfigError("LAMARL_LLM_URL is not set");
  }
  if (!key || !*key) {
    throw LlmConfigError("LAMARL_LLM_KEY is not set");
  }
  opt.url = url;
  opt.api_key = key;
  opt.model = model;
  opt.log = std::move(log);
  return HttpLlmClient(std::move(opt));
}

std::string HttpLlmClient::complete(const std::vector<ChatMessage>& messages,
                                    const CompletionParams& params) {
  const ParsedUrl url = parse_url(options_.url);

  json body;
  body["model"] = options_.model;
  body["messages"] = messages_to_json(messages);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  const std::string payload = body.dump();

  const auto log = [&](const std::string& line) {
    if (options_.log) options_.log(line);
  };

  std::string last_failure;
  bool timed_out = false;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay =
          options_.backoff_initial_s * std::pow(2.0, attempt - 1);
      log("retrying in " + std::to_string(delay) + "s (attempt " +
          std::to_string(attempt + 1) + ")");
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }

    httplib::Client cli(url.origin);
    cli.set_connection_timeout(options_.timeout_s);
    cli.set_read_timeout(options_.timeout_s);
    httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};
    auto res = cli.Post(url.path, headers, payload, "application/json");

    if (!res) {
      const auto err = res.error();
      timed_out = err == httplib::Error::ConnectionTimeout ||
                  err == httplib::Error::Read || err == httplib::Error::Write;
      last_failure = "transport error: " + httplib::to_string(err);
      log("POST " + options_.url + " failed: " + last_failure);
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      log("POST " + options_.url + " -> " + std::to_string(res->status));
      throw LlmAuthError("authentication rejected (HTTP " +
                         std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      timed_out = false;
      last_failure = "HTTP " + std::to_string(res->status);
      log("POST " + options_.url + " -> " + last_failure + " (retriable)");
      continue;
    }
    if (res->status != 200) {
      throw LlmTransportError("unexpected HTTP status " +
                              std::to_string(res->status) + ": " + res->body);
    }

    log("POST " + options_.url + " -> 200");
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& ex) {
      throw LlmMalformedReplyError(std::string("server reply is not JSON: ") +
                                   ex.what());
    }
    try {
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const json::exception&) {
      throw LlmMalformedReplyError(
          "server reply lacks choices[0].message.content: " + res->body);
    }
  }

  if (timed_out) {
    throw LlmTimeoutError("request timed out after " +
                          std::to_string(options_.max_retries + 1) +
                          " attempts: " + last_failure);
  }
  throw LlmTransportError("request failed after " +
                          std::to_string(options_.max_retries + 1) +
                          " attempts: " + last_failure);
}

StubLlmClient StubLlmClient::from_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  StubLlmClient stub;
  if (!fs::is_directory(dir)) {
    throw LlmConfigError("stub fixture directory not found: " + dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());  // <tag>.0.json before <tag>.1.json
  for (const fs::path& p : files) {
    std::string tag = p.stem().string();
    // Strip a trailing sequence number: "policy_function.0" -> "policy_function".
    const auto dot = tag.rfind('.');
    if (dot != std::string::npos &&
        tag.find_first_not_of("0123456789", dot + 1) == std::string::npos) {
      tag = tag.substr(0, dot);
    }
    std::ifstream in(p, std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    stub.add_response(tag, std::move(text));
  }
  if (stub.scripts_.empty()) {
    throw LlmConfigError("stub fixture directory is empty: " + dir);
  }
  return stub;
}

void StubLlmClient::add_response(const std::string& tag, std::string text) {
  scripts_[tag].push_back(std::move(text));
}

std::string StubLlmClient::complete(const std::vector<ChatMessage>&,
                                    const CompletionParams& params) {
  const auto it = scripts_.find(params.step_tag);
  if (it == scripts_.end()) {
    throw LlmConfigError("stub has no fixture for step '" + params.step_tag + "'");
  }
  std::size_t& cursor = cursor_[params.step_tag];
  const std::vector<std::string>& script = it->second;
  const std::string& text =
      script[cursor < script.size() ? cursor : script.size() - 1];
  ++cursor;
  return text;
}

std::size_t StubLlmClient::calls(const std::string& tag) const {
  const auto it = cursor_.find(tag);
  return it == cursor_.end() ? 0 : it->second;
}

void TranscriptLog::append(const std::string& model_id, const std::string& step,
                           const std::vector<ChatMessage>& messages,
                           const std::string& response) {
  std::lock_guard<std::mutex> lock(mutex_);
  json j;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char ts[32];
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  j["time"] = ts;
  j["model"] = model_id;
  j["step"] = step;
  j["messages"] = messages_to_json(messages);
  j["response"] = response;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append transcript: " + path_);
  out << j.dump() << "\n";
}

}  // namespace lamarl
