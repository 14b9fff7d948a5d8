#ifndef QFOOL_HTTP_ORACLE_HPP
#define QFOOL_HTTP_ORACLE_HPP

#include <memory>
#include <string>

#include "qfool/oracle.hpp"

namespace qfool {

struct HttpOracleOptions {
  double timeout_seconds = 10.0;
  int max_attempts = 3;        // per query, including the first
  int backoff_millis = 100;    // doubled after every failed attempt
  int pool_size = 4;
  // Send {"shape", "encoding": "base64-f32le", "data"} instead of a JSON
  // array of values.
  bool base64_payload = false;
};

// Remote model behind an HTTP endpoint.
//
// Request:  POST {"shape":[h,w,c],"values":[...]}
// Response: 200 {"label": <int>}
//
// Transport failures, non-2xx statuses and malformed replies all raise
// TransportError once the attempts are used up; a label is never guessed.
class HttpOracle : public DecisionOracle {
 public:
  HttpOracle(const std::string& url, std::size_t dimension, HttpOracleOptions options = {});
  ~HttpOracle() override;

  std::size_t dimension() const override { return dimension_; }
  const std::string& url() const { return url_; }

  static std::string EncodeRequest(const Point& point, bool base64_payload);
  // Throws TransportError when the body is not a {"label": int} object.
  static Label DecodeResponse(const std::string& body);

 protected:
  Label ClassifyOne(const Point& point) const override;

 private:
  class Pool;

  std::string url_;
  std::size_t dimension_;
  HttpOracleOptions options_;
  std::string path_;
  std::unique_ptr<Pool> pool_;
};

std::string Base64Encode(const unsigned char* data, std::size_t size);

}  // namespace qfool

#endif  // QFOOL_HTTP_ORACLE_HPP
