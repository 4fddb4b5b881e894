#pragma once

#include "t1/prompts.hpp"

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace t1::gateway {

struct RetryPolicy {
    int max_attempts = 3;
    double backoff_base_s = 0.5;  // attempt i sleeps base * 2^(i-1)
};

/// One backend endpoint plus the client-side discipline for talking to it.
/// API keys come from the environment variable named here, never from
/// configuration files.
struct BackendProfile {
    std::string name;
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string model_id;
    std::string api_key_env;
    int max_parallel = 4;
    double timeout_s = 60.0;
    RetryPolicy retry;
};

void validate(const BackendProfile& profile);

struct SamplingParams {
    double temperature = 0.8;
    int n_samples = 1;
    int max_tokens = 2048;
    std::optional<std::uint64_t> seed;
    bool logprobs_requested = false;
};

void validate(const SamplingParams& params);

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
};

struct Completion {
    std::string text;
    std::optional<std::vector<TokenLogprob>> token_logprobs;
};

/// Seam between verifier/scorer modules and the backend: produce n
/// completions for template bindings. The harness binds it to
/// LlmClient::complete with the stage's template; tests script it.
using CompletionFn = std::function<std::vector<Completion>(
    const std::map<std::string, std::string>& bindings, int n)>;

/// Raw HTTP seam. Production uses HttpTransport; tests script it.
struct HttpResponse {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// POSTs a JSON body; headers carry content-type and authorization.
    /// Transport-level failure (connect/timeout) is reported as status 0 with
    /// the reason in body.
    virtual HttpResponse post(const std::string& base_url, const std::string& path,
                              const std::string& json_body,
                              const std::map<std::string, std::string>& headers,
                              double timeout_s) = 0;
};

/// TLS-capable transport over the standard HTTP stack.
std::unique_ptr<Transport> make_http_transport();

/// Content-addressed response store: one JSON record per key under
/// <root>/<2-hex-prefix>/<digest>.json holding the request metadata and the
/// raw response body. Append-only; writers never overwrite an existing
/// record.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);

    std::optional<std::string> lookup(const std::string& key) const;

    /// Stores atomically (temp file + rename). A concurrent writer of the
    /// same key wins harmlessly; the record content is identical by
    /// construction.
    void store(const std::string& key, const std::string& request_body,
               const std::string& response_body);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path_for(const std::string& key) const;

private:
    std::filesystem::path root_;
};

/// SHA-256 hex digest; the cache key function.
std::string sha256_hex(std::string_view bytes);

/// Digest over everything that shapes a completion: model, rendered prompt,
/// sampling knobs and the block index for n-sample batches. Stable across
/// runs and platforms.
std::string cache_key(const BackendProfile& profile, const prompts::RenderedPrompt& prompt,
                      const SamplingParams& params, int sample_block_index);

struct ClientStats {
    long long network_calls = 0;
    long long cache_hits = 0;
    long long cache_misses = 0;
};

/// Chat-completion client: cache-first, bounded concurrency per profile,
/// exponential-backoff retries on transport errors, 429 and 5xx.
class LlmClient {
public:
    /// cache_root empty -> caching disabled.
    LlmClient(std::unique_ptr<Transport> transport,
              std::optional<std::filesystem::path> cache_root);
    ~LlmClient();

    /// Renders the template and returns exactly params.n_samples completions.
    std::vector<Completion> complete(const BackendProfile& profile,
                                     const prompts::PromptTemplate& tmpl,
                                     const std::map<std::string, std::string>& bindings,
                                     const SamplingParams& params);

    std::vector<Completion> complete(const BackendProfile& profile,
                                     const prompts::RenderedPrompt& prompt,
                                     const SamplingParams& params);

    /// Cache-first POST of an arbitrary JSON body to an arbitrary path on the
    /// profile's endpoint (used by scorers speaking non-chat protocols).
    /// Success requires HTTP 200; 429/5xx retry; other statuses raise
    /// ProtocolError.
    std::string cached_post(const BackendProfile& profile, const std::string& path,
                            const std::string& json_body);

    ClientStats stats() const;

private:
    struct ProfileGate;

    std::string transact(const BackendProfile& profile, const std::string& path,
                         const std::string& json_body);
    ProfileGate& gate_for(const std::string& profile_name, int max_parallel);

    std::unique_ptr<Transport> transport_;
    std::optional<ResponseCache> cache_;
    mutable std::mutex mutex_;  // guards stats_ and gates_
    ClientStats stats_;
    std::map<std::string, std::unique_ptr<ProfileGate>> gates_;
};

} // namespace t1::gateway
