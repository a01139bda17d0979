#pragma once

#include <map>
#include <string>

#include "r3rec/io.hpp"

namespace r3rec {

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_ms = 200;  // doubled per attempt, with jitter
};

/// POSTs `body` as JSON and parses the JSON reply. Transport errors, 429 and
/// 5xx are retried; other 4xx responses fail immediately with Error. After
/// the last attempt throws RetryExhausted.
Json post_json(const std::string& url, const Json& body, const std::map<std::string, std::string>& headers,
               double timeout_s, const RetryPolicy& retry);

}  // namespace r3rec
