#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "lamarl/region.hpp"  // Error

namespace lamarl {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct CompletionParams {
  double temperature = 0.0;
  int max_tokens = 4096;
  // Pipeline step label. Stub clients key their fixtures on it; transcripts
  // record it. Never sent over the wire.
  std::string step_tag;
};

// Client-side failures, kept distinct so callers can react differently.
class LlmConfigError : public Error {  // missing endpoint/credential
  using Error::Error;
 public:
  explicit LlmConfigError(const std::string& m) : Error(m) {}
};
class LlmAuthError : public Error {
 public:
  explicit LlmAuthError(const std::string& m) : Error(m) {}
};
class LlmTimeoutError : public Error {
 public:
  explicit LlmTimeoutError(const std::string& m) : Error(m) {}
};
class LlmTransportError : public Error {  // retriable transport problem
 public:
  explicit LlmTransportError(const std::string& m) : Error(m) {}
};
class LlmMalformedReplyError : public Error {
 public:
  explicit LlmMalformedReplyError(const std::string& m) : Error(m) {}
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const CompletionParams& params) = 0;
  virtual std::string model_id() const = 0;
};

// Chat-completion HTTP client. POSTs
//   {model, messages:[{role,content}], temperature, max_tokens}
// and returns choices[0].message.content. Transient failures (connect/read
// errors, 429, 5xx) are retried with exponential backoff.
class HttpLlmClient : public LlmClient {
 public:
  struct Options {
    std::string url;      // e.g. http://host:port/v1/chat/completions
    std::string api_key;  // sent as a bearer token
    std::string model = "gpt-4o";
    int max_retries = 3;
    double backoff_initial_s = 0.5;
    int timeout_s = 120;
    std::function<void(const std::string&)> log;  // one line per attempt
  };

  explicit HttpLlmClient(Options options);

  // Reads LAMARL_LLM_URL and LAMARL_LLM_KEY; throws LlmConfigError before any
  // network activity when either is missing.
  static HttpLlmClient from_env(const std::string& model,
                                std::function<void(const std::string&)> log = {});

  std::string complete(const std::vector<ChatMessage>& messages,
                       const CompletionParams& params) override;
  std::string model_id() const override { return options_.model; }

 private:
  Options options_;
};

// Deterministic scripted client. Responses are keyed by step tag and consumed
// in order; the last response for a tag repeats once the script is exhausted.
class StubLlmClient : public LlmClient {
 public:
  StubLlmClient() = default;

  // Loads fixture files named <tag>.json / <tag>.txt, or sequenced
  // <tag>.<n>.json for scripted multi-trial runs.
  static StubLlmClient from_directory(const std::string& dir);

  void add_response(const std::string& tag, std::string text);

  std::string complete(const std::vector<ChatMessage>& messages,
                       const CompletionParams& params) override;
  std::string model_id() const override { return "stub"; }

  std::size_t calls(const std::string& tag) const;

 private:
  std::map<std::string, std::vector<std::string>> scripts_;
  std::map<std::string, std::size_t> cursor_;
};

// Append-only JSONL transcript: timestamp, model id, step, messages, reply.
class TranscriptLog {
 public:
  explicit TranscriptLog(std::string path) : path_(std::move(path)) {}

  void append(const std::string& model_id, const std::string& step,
              const std::vector<ChatMessage>& messages,
              const std::string& response);

 private:
  std::string path_;
  std::mutex mutex_;
};

}  // namespace lamarl
