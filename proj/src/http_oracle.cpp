#include "qfool/http_oracle.hpp"

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

namespace qfool {

std::string Base64Encode(const unsigned char* data, std::size_t size) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    const std::uint32_t b0 = data[i];
    const std::uint32_t b1 = i + 1 < size ? data[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < size ? data[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out.push_back(kAlphabet[(triple >> 18) & 0x3F]);
    out.push_back(kAlphabet[(triple >> 12) & 0x3F]);
    out.push_back(i + 1 < size ? kAlphabet[(triple >> 6) & 0x3F] : '=');
    out.push_back(i + 2 < size ? kAlphabet[triple & 0x3F] : '=');
  }
  return out;
}

// Fixed set of clients handed out one per in-flight request.
class HttpOracle::Pool {
 public:
  Pool(const std::string& origin, const HttpOracleOptions& options) {
    const auto timeout = std::chrono::duration<double>(options.timeout_seconds);
    const auto sec = static_cast<time_t>(options.timeout_seconds);
    const auto usec = static_cast<time_t>((timeout.count() - static_cast<double>(sec)) * 1e6);
    for (int i = 0; i < std::max(1, options.pool_size); ++i) {
      auto client = std::make_unique<httplib::Client>(origin);
      if (!client->is_valid()) throw ContractViolation("unsupported oracle URL: " + origin);
      client->set_connection_timeout(sec, usec);
      client->set_read_timeout(sec, usec);
      client->set_write_timeout(sec, usec);
      client->set_keep_alive(true);
      free_.push_back(client.get());
      clients_.push_back(std::move(client));
    }
  }

  httplib::Client* Acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !free_.empty(); });
    auto* client = free_.back();
    free_.pop_back();
    return client;
  }

  void Release(httplib::Client* client) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      free_.push_back(client);
    }
    cv_.notify_one();
  }

 private:
  std::vector<std::unique_ptr<httplib::Client>> clients_;
  std::vector<httplib::Client*> free_;
  std::mutex mu_;
  std::condition_variable cv_;
};

namespace {

// Splits "http://host:port/path" into origin and path.
std::pair<std::string, std::string> SplitUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ContractViolation("oracle URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpOracle::HttpOracle(const std::string& url, std::size_t dimension, HttpOracleOptions options)
    : url_(url), dimension_(dimension), options_(options) {
  if (dimension_ == 0) throw ContractViolation("HTTP oracle needs a positive dimension");
  if (options_.max_attempts < 1) throw ContractViolation("max_attempts must be at least 1");
  auto [origin, path] = SplitUrl(url);
  path_ = std::move(path);
  pool_ = std::make_unique<Pool>(origin, options_);
}

HttpOracle::~HttpOracle() = default;

std::string HttpOracle::EncodeRequest(const Point& point, bool base64_payload) {
  const Shape& s = point.shape();
  nlohmann::json body = {{"shape", {s.height, s.width, s.channels}}};
  const auto& v = point.values();
  if (base64_payload) {
    std::vector<unsigned char> bytes(point.dim() * sizeof(float));
    for (std::size_t i = 0; i < point.dim(); ++i) {
      const float f = static_cast<float>(v[static_cast<Eigen::Index>(i)]);
      std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
    }
    body["encoding"] = "base64-f32le";
    body["data"] = Base64Encode(bytes.data(), bytes.size());
  } else {
    std::vector<float> values(point.dim());
    for (std::size_t i = 0; i < point.dim(); ++i) {
      values[i] = static_cast<float>(v[static_cast<Eigen::Index>(i)]);
    }
    body["values"] = values;
  }
  return body.dump();
}

Label HttpOracle::DecodeResponse(const std::string& body) {
  const auto json = nlohmann::json::parse(body, nullptr, false);
  if (json.is_discarded() || !json.is_object()) throw TransportError("reply is not a JSON object");
  const auto it = json.find("label");
  if (it == json.end() || !it->is_number_integer()) {
    throw TransportError("reply has no integer \"label\"");
  }
  return {it->get<int>()};
}

Label HttpOracle::ClassifyOne(const Point& point) const {
  const std::string request = EncodeRequest(point, options_.base64_payload);
  std::string last_error;
  int backoff = options_.backoff_millis;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    auto* client = pool_->Acquire();
    auto result = client->Post(path_, request, "application/json");
    pool_->Release(client);
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
    } else if (result->status >= 200 && result->status < 300) {
      return DecodeResponse(result->body);
    } else if (result->status >= 400 && result->status < 500) {
      throw TransportError(url_ + " rejected the query with HTTP " +
                           std::to_string(result->status));
    } else {
      last_error = "HTTP " + std::to_string(result->status);
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw TransportError(url_ + ": " + last_error + " after " +
                       std::to_string(options_.max_attempts) + " attempts");
}

}  // namespace qfool
