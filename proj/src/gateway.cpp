#include "t1/gateway.hpp"

#include "t1/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace t1::gateway {
namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool retryable(int status) {
    return status == 0 || status == 429 || (status >= 500 && status < 600);
}

std::string body_excerpt(const std::string& body) {
    constexpr size_t kMax = 300;
    if (body.size() <= kMax) return body;
    return body.substr(0, kMax) + "...";
}

json build_chat_request(const BackendProfile& profile, const prompts::RenderedPrompt& prompt,
                        const SamplingParams& params) {
    json messages = json::array();
    if (prompt.system) {
        messages.push_back({{"role", "system"}, {"content", *prompt.system}});
    }
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    json body = {
        {"model", profile.model_id},
        {"messages", std::move(messages)},
        {"temperature", params.temperature},
        {"max_tokens", params.max_tokens},
        {"n", params.n_samples},
    };
    if (params.seed) body["seed"] = *params.seed;
    if (params.logprobs_requested) body["logprobs"] = true;
    return body;
}

std::vector<Completion> parse_chat_response(const BackendProfile& profile,
                                            const std::string& body, int expected_n) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError("backend '" + profile.name + "' returned non-JSON body: " +
                           body_excerpt(body));
    }
    if (!doc.contains("choices") || !doc["choices"].is_array()) {
        throw BackendError("backend '" + profile.name + "' response has no choices array: " +
                           body_excerpt(body));
    }
    const auto& choices = doc["choices"];
    if (static_cast<int>(choices.size()) != expected_n) {
        throw BackendError("backend '" + profile.name + "' returned " +
                           std::to_string(choices.size()) + " choices, expected " +
                           std::to_string(expected_n));
    }
    std::vector<Completion> out;
    out.reserve(choices.size());
    try {
        for (const auto& choice : choices) {
            Completion c;
            c.text = choice.at("message").at("content").get<std::string>();
            if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
                choice["logprobs"].contains("content") &&
                choice["logprobs"]["content"].is_array()) {
                std::vector<TokenLogprob> tokens;
                for (const auto& t : choice["logprobs"]["content"]) {
                    tokens.push_back({t.at("token").get<std::string>(),
                                      t.at("logprob").get<double>()});
                }
                c.token_logprobs = std::move(tokens);
            }
            out.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw BackendError("backend '" + profile.name + "' choice missing message content: " +
                           std::string(e.what()));
    }
    return out;
}

} // namespace

void validate(const BackendProfile& profile) {
    if (profile.name.empty()) throw ConfigError("backend profile needs a name");
    if (profile.base_url.empty()) {
        throw ConfigError("backend profile '" + profile.name + "' needs a base_url");
    }
    if (profile.model_id.empty()) {
        throw ConfigError("backend profile '" + profile.name + "' needs a model_id");
    }
    if (profile.max_parallel < 1) {
        throw ConfigError("backend profile '" + profile.name + "': max_parallel must be >= 1");
    }
    if (profile.timeout_s <= 0) {
        throw ConfigError("backend profile '" + profile.name + "': timeout_s must be positive");
    }
    if (profile.retry.max_attempts < 1) {
        throw ConfigError("backend profile '" + profile.name + "': max_attempts must be >= 1");
    }
    if (profile.retry.backoff_base_s < 0) {
        throw ConfigError("backend profile '" + profile.name + "': negative backoff");
    }
}

void validate(const SamplingParams& params) {
    if (params.temperature < 0) throw ConfigError("temperature must be >= 0");
    if (params.n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (params.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw EnvironmentError("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string cache_key(const BackendProfile& profile, const prompts::RenderedPrompt& prompt,
                      const SamplingParams& params, int sample_block_index) {
    json key = {
        {"model_id", profile.model_id},
        {"system", prompt.system ? json(*prompt.system) : json(nullptr)},
        {"user", prompt.user},
        {"temperature", params.temperature},
        {"max_tokens", params.max_tokens},
        {"n_samples", params.n_samples},
        {"seed", params.seed ? json(*params.seed) : json(nullptr)},
        {"logprobs", params.logprobs_requested},
        {"block", sample_block_index},
    };
    return sha256_hex(key.dump());
}

// ---------------------------------------------------------------------------
// ResponseCache
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    std::string raw = read_file(path);
    try {
        json record = json::parse(raw);
        return record.at("response_body").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError("cache record " + path.string() +
                          " is corrupt (delete it to re-fetch): " + e.what());
    }
}

void ResponseCache::store(const std::string& key, const std::string& request_body,
                          const std::string& response_body) {
    auto path = path_for(key);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return;  // append-only
    std::filesystem::create_directories(path.parent_path());
    json parsed_request = json::parse(request_body, nullptr, /*allow_exceptions=*/false);
    json record = {
        {"key", key},
        {"request", parsed_request.is_discarded() ? json(request_body)
                                                  : std::move(parsed_request)},
        {"response_body", response_body},
    };
    // Unique temp name per writer, atomic publish via rename.
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary);
        out << record.dump(2) << '\n';
        if (!out) {
            std::filesystem::remove(tmp, ec);
            throw EnvironmentError("cannot write cache record " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) std::filesystem::remove(tmp, ec);
}

// ---------------------------------------------------------------------------
// LlmClient
// ---------------------------------------------------------------------------

struct LlmClient::ProfileGate {
    std::mutex mutex;
    std::condition_variable cv;
    int in_flight = 0;
    int limit = 1;
};

LlmClient::LlmClient(std::unique_ptr<Transport> transport,
                     std::optional<std::filesystem::path> cache_root)
    : transport_(std::move(transport)) {
    if (!transport_) throw ConfigError("LlmClient needs a transport");
    if (cache_root) cache_.emplace(*cache_root);
}

LlmClient::~LlmClient() = default;

LlmClient::ProfileGate& LlmClient::gate_for(const std::string& profile_name, int max_parallel) {
    std::lock_guard lock(mutex_);
    auto& slot = gates_[profile_name];
    if (!slot) {
        slot = std::make_unique<ProfileGate>();
        slot->limit = max_parallel;
    }
    return *slot;
}

std::string LlmClient::transact(const BackendProfile& profile, const std::string& path,
                                const std::string& json_body) {
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (!profile.api_key_env.empty()) {
        if (const char* key = std::getenv(profile.api_key_env.c_str())) {
            headers["Authorization"] = std::string("Bearer ") + key;
        }
    }

    auto& gate = gate_for(profile.name, profile.max_parallel);
    std::unique_lock gate_lock(gate.mutex);
    gate.cv.wait(gate_lock, [&] { return gate.in_flight < gate.limit; });
    ++gate.in_flight;
    gate_lock.unlock();

    HttpResponse last;
    try {
        for (int attempt = 1; attempt <= profile.retry.max_attempts; ++attempt) {
            {
                std::lock_guard lock(mutex_);
                ++stats_.network_calls;
            }
            last = transport_->post(profile.base_url, path, json_body, headers,
                                    profile.timeout_s);
            if (last.status == 200 || !retryable(last.status)) break;
            if (attempt < profile.retry.max_attempts) {
                double delay = profile.retry.backoff_base_s * std::pow(2.0, attempt - 1);
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
        }
    } catch (...) {
        gate_lock.lock();
        --gate.in_flight;
        gate.cv.notify_one();
        throw;
    }
    gate_lock.lock();
    --gate.in_flight;
    gate.cv.notify_one();
    gate_lock.unlock();

    if (last.status != 200) {
        std::string detail = "HTTP " + std::to_string(last.status) + ": " +
                             body_excerpt(last.body);
        if (last.status == 0) detail = "transport failure: " + body_excerpt(last.body);
        if (retryable(last.status)) {
            throw BackendError("backend '" + profile.name + "' failed after " +
                               std::to_string(profile.retry.max_attempts) +
                               " attempt(s); last " + detail);
        }
        throw ProtocolError("backend '" + profile.name + "' rejected request; " + detail);
    }
    return last.body;
}

std::vector<Completion> LlmClient::complete(const BackendProfile& profile,
                                            const prompts::PromptTemplate& tmpl,
                                            const std::map<std::string, std::string>& bindings,
                                            const SamplingParams& params) {
    return complete(profile, prompts::render(tmpl, bindings), params);
}

std::vector<Completion> LlmClient::complete(const BackendProfile& profile,
                                            const prompts::RenderedPrompt& prompt,
                                            const SamplingParams& params) {
    validate(profile);
    validate(params);
    const json request = build_chat_request(profile, prompt, params);
    const std::string request_body = request.dump();
    const std::string key = cache_key(profile, prompt, params, /*sample_block_index=*/0);

    std::string body;
    if (cache_) {
        if (auto hit = cache_->lookup(key)) {
            std::lock_guard lock(mutex_);
            ++stats_.cache_hits;
            return parse_chat_response(profile, *hit, params.n_samples);
        }
        std::lock_guard lock(mutex_);
        ++stats_.cache_misses;
    }
    try {
        body = transact(profile, "/chat/completions", request_body);
    } catch (const ProtocolError& e) {
        // Non-retryable HTTP statuses are backend failures for completions.
        throw BackendError(e.what());
    }
    auto completions = parse_chat_response(profile, body, params.n_samples);
    if (cache_) cache_->store(key, request_body, body);
    return completions;
}

std::string LlmClient::cached_post(const BackendProfile& profile, const std::string& path,
                                   const std::string& json_body) {
    validate(profile);
    const std::string key = sha256_hex(json({{"model_id", profile.model_id},
                                             {"path", path},
                                             {"body", json_body}})
                                           .dump());
    if (cache_) {
        if (auto hit = cache_->lookup(key)) {
            std::lock_guard lock(mutex_);
            ++stats_.cache_hits;
            return *hit;
        }
        std::lock_guard lock(mutex_);
        ++stats_.cache_misses;
    }
    std::string body = transact(profile, path, json_body);
    if (cache_) cache_->store(key, json_body, body);
    return body;
}

ClientStats LlmClient::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

} // namespace t1::gateway
