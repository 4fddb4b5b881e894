// Kept in its own translation unit: the HTTP stack header is large and only
// this file needs it.
#include "t1/gateway.hpp"

#include <httplib.h>

#include <cmath>

namespace t1::gateway {
namespace {

// "http://host:port/v1" -> {"http://host:port", "/v1"}. The HTTP client
// wants scheme://host:port alone; any path in the base URL becomes a prefix
// of every request path.
std::pair<std::string, std::string> split_origin(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

class HttpTransport : public Transport {
public:
    HttpResponse post(const std::string& base_url, const std::string& path,
                      const std::string& json_body,
                      const std::map<std::string, std::string>& headers,
                      double timeout_s) override {
        auto [origin, prefix] = split_origin(base_url);
        httplib::Client client(origin);
        client.set_follow_location(true);
        auto seconds = static_cast<time_t>(timeout_s);
        auto micros = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
        client.set_connection_timeout(seconds, micros);
        client.set_read_timeout(seconds, micros);
        client.set_write_timeout(seconds, micros);

        httplib::Headers hl;
        for (const auto& [k, v] : headers) {
            if (k != "Content-Type") hl.emplace(k, v);
        }
        auto result = client.Post(prefix + path, hl, json_body, "application/json");
        if (!result) {
            return HttpResponse{0, httplib::to_string(result.error())};
        }
        return HttpResponse{result->status, result->body};
    }
};

} // namespace

std::unique_ptr<Transport> make_http_transport() {
    return std::make_unique<HttpTransport>();
}

} // namespace t1::gateway
