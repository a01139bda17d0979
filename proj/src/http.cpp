#include "r3rec/http.hpp"

#include <chrono>
#include <random>
#include <thread>

#include "httplib.h"
#include "r3rec/common.hpp"

namespace r3rec {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidInput("endpoint URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

void sleep_backoff(int base_ms, int attempt) {
    thread_local std::minstd_rand jitter(std::random_device{}());
    const double scale = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(jitter);
    const auto ms = static_cast<long>(base_ms * (1L << std::min(attempt, 10)) * scale);
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

}  // namespace

Json post_json(const std::string& url, const Json& body, const std::map<std::string, std::string>& headers,
               double timeout_s, const RetryPolicy& retry) {
    const auto target = parse_url(url);
    httplib::Client client(target.origin);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    const int attempts = std::max(1, retry.max_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) sleep_backoff(retry.backoff_ms, attempt - 1);
        auto res = client.Post(target.path, hdrs, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw Error("POST " + url + " failed with HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
        }
        try {
            return Json::parse(res->body);
        } catch (const Json::exception& e) {
            last_error = std::string("invalid JSON reply: ") + e.what();
        }
    }
    throw RetryExhausted("POST " + url + " gave up after " + std::to_string(attempts) + " attempt(s): " + last_error);
}

}  // namespace r3rec
