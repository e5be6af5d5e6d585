#pragma once

// Vision-chat client: sends one image plus one prompt per request to a
// chat-completions style endpoint and appends the raw answers to a
// predictions file.
//
// Request body:
//   {"model": <model_name>,
//    "messages": [{"role": "user", "content": [
//        {"type": "text", "text": <prompt>},
//        {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}]}
// Response: the answer is read from choices[0].message.content.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "illusory/dataset.hpp"
#include "illusory/image_io.hpp"
#include "illusory/pipeline.hpp"
#include "illusory/prompts.hpp"

namespace illusory {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080/v1";
  std::string model_name = "gpt-4o";
  std::string auth_token_env = "ILLUSORY_API_TOKEN";
  int max_concurrent = 4;
  int retry_limit = 3;
  double timeout_s = 60.0;
  double backoff_initial_s = 1.0;  // doubled after each retryable failure
};

inline void validate_endpoint(const EndpointConfig& cfg) {
  if (cfg.max_concurrent < 1) throw Error(ErrorCode::FormatError, "max_concurrent must be >= 1");
  if (cfg.retry_limit < 0) throw Error(ErrorCode::FormatError, "retry_limit must be >= 0");
  if (!(cfg.timeout_s > 0.0)) throw Error(ErrorCode::FormatError, "timeout must be > 0");
  if (cfg.auth_token_env.empty()) {
    throw Error(ErrorCode::FormatError, "auth_token_env must name an environment variable");
  }
}

/// Reads the bearer token from the configured environment variable.
inline std::string resolve_token(const EndpointConfig& cfg) {
  const char* v = std::getenv(cfg.auth_token_env.c_str());
  if (!v || !*v) {
    throw Error(ErrorCode::AuthError,
                "environment variable " + cfg.auth_token_env + " is not set");
  }
  return v;
}

struct QueryResult {
  std::string sample_id;
  std::optional<std::string> raw_text;
  std::optional<std::string> failure_reason;
  double latency_s = 0.0;
  int attempt_count = 0;

  bool ok() const noexcept { return raw_text.has_value(); }
};

inline std::string base64_encode(std::span<const std::uint8_t> in) {
  static constexpr char table[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8) | in[i + 2];
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += table[v & 63];
  }
  if (i + 1 == in.size()) {
    const std::uint32_t v = in[i] << 16;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const std::uint32_t v = (in[i] << 16) | (in[i + 1] << 8);
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += table[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string build_request_body(const std::string& model, const std::string& prompt,
                                      const ImageBuffer& image) {
  const std::string url = "data:image/png;base64," + base64_encode(encode_png(image));
  const nlohmann::json body = {
      {"model", model},
      {"messages",
       {{{"role", "user"},
         {"content",
          {{{"type", "text"}, {"text", prompt}},
           {{"type", "image_url"}, {"image_url", {{"url", url}}}}}}}}}};
  return body.dump();
}

namespace detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash
};

inline ParsedUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::FormatError, "base_url must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!p.path.empty() && p.path.back() == '/') p.path.pop_back();
  return p;
}

enum class Outcome { Ok, Retry, Fail };

struct Attempt {
  Outcome outcome;
  std::string text;       // answer when Ok, reason otherwise
  double retry_after_s = 0.0;
};

inline Attempt classify_response(const httplib::Result& res) {
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write ||
        err == httplib::Error::ConnectionTimeout) {
      return {Outcome::Retry, "Timeout"};
    }
    return {Outcome::Retry, "ConnectionError: " + httplib::to_string(err)};
  }
  const int status = res->status;
  if (status == 401 || status == 403) return {Outcome::Fail, "AuthError"};
  if (status == 429) {
    double after = 0.0;
    if (res->has_header("Retry-After")) {
      after = std::atof(res->get_header_value("Retry-After").c_str());
    }
    return {Outcome::Retry, "RateLimited", after};
  }
  if (status >= 500) return {Outcome::Retry, "ServerError " + std::to_string(status)};
  if (status != 200) return {Outcome::Fail, "HttpError " + std::to_string(status)};

  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return {Outcome::Ok, content.get<std::string>()};
    // Some endpoints return content parts; concatenate the text ones.
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
    }
    return {Outcome::Ok, text};
  } catch (const nlohmann::json::exception&) {
    return {Outcome::Fail, "MalformedResponse"};
  }
}

}  // namespace detail

/// One HTTP connection to an endpoint. Not thread-safe; use one per worker.
class VisionChatClient {
 public:
  VisionChatClient(EndpointConfig cfg, std::string token)
      : cfg_(std::move(cfg)), token_(std::move(token)), url_(detail::split_base_url(cfg_.base_url)),
        http_(url_.origin) {
    validate_endpoint(cfg_);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - secs) * 1e6);
    http_.set_connection_timeout(secs, usecs);
    http_.set_read_timeout(secs, usecs);
    http_.set_write_timeout(secs, usecs);
    http_.set_bearer_token_auth(token_);
  }

  /// Retries Timeout, RateLimited, connection and 5xx failures with exponential
  /// backoff, up to retry_limit extra attempts.
  QueryResult query(const std::string& sample_id, const ImageBuffer& image,
                    const std::string& prompt) {
    const auto start = std::chrono::steady_clock::now();
    const std::string body = build_request_body(cfg_.model_name, prompt, image);
    QueryResult r;
    r.sample_id = sample_id;
    double backoff = cfg_.backoff_initial_s;
    for (int attempt = 0;; ++attempt) {
      r.attempt_count = attempt + 1;
      const auto res = http_.Post(url_.path + "/chat/completions", body, "application/json");
      const detail::Attempt a = detail::classify_response(res);
      if (a.outcome == detail::Outcome::Ok) {
        r.raw_text = a.text;
        break;
      }
      if (a.outcome == detail::Outcome::Fail || attempt >= cfg_.retry_limit) {
        r.failure_reason = a.text;
        break;
      }
      const double wait = std::min(60.0, std::max(backoff, a.retry_after_s));
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      backoff *= 2.0;
    }
    r.latency_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

 private:
  EndpointConfig cfg_;
  std::string token_;
  detail::ParsedUrl url_;
  httplib::Client http_;
};

inline QueryResult query_image(const EndpointConfig& cfg, const ImageBuffer& image,
                               const std::string& prompt, const std::string& sample_id = {}) {
  VisionChatClient client(cfg, resolve_token(cfg));
  return client.query(sample_id, image, prompt);
}

struct EvaluationOptions {
  std::filesystem::path root;                       // image paths are relative to this
  std::optional<std::filesystem::path> prefiltered_root;  // reused when the file exists there
  FilterConfig filter;
  bool replicate_to_rgb = false;  // send filtered images as 3 identical channels
};

struct EvaluationSummary {
  std::size_t total = 0;
  std::size_t already_done = 0;
  std::size_t new_requests = 0;
  std::size_t succeeded = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (sample id, reason)
};

/// Image exactly as it is sent for `variant`: revealed on the fly for the
/// filtered variant unless the record (or a pre-filtered copy) already is.
inline ImageBuffer prepare_image(const SampleRecord& rec, Variant variant,
                                 const EvaluationOptions& opt) {
  if (variant == Variant::Filtered && opt.prefiltered_root) {
    const auto pre = *opt.prefiltered_root / rec.image_path;
    if (std::filesystem::exists(pre)) {
      ImageBuffer img = read_image(pre);
      return opt.replicate_to_rgb && img.channels() == 1 ? replicate_to_rgb(img) : img;
    }
  }
  ImageBuffer img = read_image(opt.root / rec.image_path);
  if (variant == Variant::Filtered && rec.variant != Variant::Filtered) {
    if (img.channels() == 1) img = replicate_to_rgb(img);
    img = reveal(img, opt.filter);
  }
  if (opt.replicate_to_rgb && img.channels() == 1) img = replicate_to_rgb(img);
  return img;
}

/// Queries every manifest sample not yet in `output_path` and appends one
/// prediction line per success. Lines are written by a single writer in sample
/// id order within a run; failed samples are left out so a rerun retries them.
inline EvaluationSummary run_evaluation(const Manifest& manifest, Variant variant,
                                        const EndpointConfig& cfg,
                                        const std::filesystem::path& output_path,
                                        const EvaluationOptions& opt = {}) {
  validate_endpoint(cfg);
  EvaluationSummary summary;
  summary.total = manifest.size();

  std::set<std::string> done;
  if (std::filesystem::exists(output_path)) {
    for (const auto& p : load_predictions(output_path)) done.insert(p.sample_id);
    // Drop a torn last line left by an interrupted run before appending.
    const auto bytes = read_file_bytes(output_path);
    if (!bytes.empty() && bytes.back() != '\n') {
      std::size_t keep = bytes.size();
      while (keep > 0 && bytes[keep - 1] != '\n') --keep;
      std::filesystem::resize_file(output_path, keep);
    }
  }
  std::vector<const SampleRecord*> pending;
  for (const auto& r : manifest.records) {
    if (done.contains(r.id)) {
      ++summary.already_done;
    } else {
      pending.push_back(&r);
    }
  }
  std::sort(pending.begin(), pending.end(),
            [](const SampleRecord* a, const SampleRecord* b) { return a->id < b->id; });

  if (output_path.has_parent_path()) std::filesystem::create_directories(output_path.parent_path());
  std::ofstream out(output_path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + output_path.string());
  if (pending.empty()) return summary;

  const std::string token = resolve_token(cfg);
  const LabelSet* labels = manifest.labels ? &*manifest.labels : nullptr;
  const std::string prompt = build_prompt(manifest.kind, variant, labels);

  std::vector<std::optional<QueryResult>> results(pending.size());
  std::size_t next_to_write = 0;
  std::mutex writer;
  std::atomic<std::size_t> next_index{0};
  std::atomic<std::size_t> requests{0};

  auto finish = [&](std::size_t i, QueryResult r) {
    std::lock_guard lock(writer);
    results[i] = std::move(r);
    while (next_to_write < results.size() && results[next_to_write]) {
      const QueryResult& done_r = *results[next_to_write];
      if (done_r.ok()) {
        out << serialize_prediction({done_r.sample_id, *done_r.raw_text}) << '\n';
        out.flush();
        ++summary.succeeded;
      } else {
        summary.failures.emplace_back(done_r.sample_id, *done_r.failure_reason);
      }
      ++next_to_write;
    }
  };

  auto worker = [&] {
    std::optional<VisionChatClient> client;
    for (std::size_t i = next_index++; i < pending.size(); i = next_index++) {
      const SampleRecord& rec = *pending[i];
      QueryResult r;
      r.sample_id = rec.id;
      try {
        const ImageBuffer img = prepare_image(rec, variant, opt);
        if (!client) client.emplace(cfg, token);
        r = client->query(rec.id, img, prompt);
        requests += static_cast<std::size_t>(r.attempt_count);
      } catch (const std::exception& e) {
        r.failure_reason = e.what();
      }
      finish(i, std::move(r));
    }
  };

  const int workers = std::min<int>(cfg.max_concurrent, static_cast<int>(pending.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  summary.new_requests = requests.load();
  return summary;
}

}  // namespace illusory
