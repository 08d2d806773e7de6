#pragma once

// HTTP clients for probe and judge backends.
//
// Probe wire protocol:  POST <path>  {"prompt": str, "choices": ["Yes","No","Unknown"]}
//   -> 200 {"logprobs": {"Yes": z, "No": z, "Unknown": z}, "top_tokens": [5 strings]}
// Judge wire protocol:  POST <path>  {"prompt": str}
//   -> 200 {"completion": str}
//
// Connection failures and 5xx responses are retried with exponential backoff
// and surface as TransportError once the budget is exhausted. A 200 with a
// payload that does not match the schema is a ProtocolError and is not
// retried here; the caller decides. In-flight requests are bounded.

#include <cstdint>
#include <memory>
#include <string>

#include "kgu/belief.hpp"

namespace kgu {

struct RemoteOptions {
    std::string url;  // e.g. http://127.0.0.1:8080/v1/probe
    double temperature = 1.0;
    int max_in_flight = 4;
    int max_retries = 3;
    int retry_base_ms = 100;
    int timeout_sec = 30;
};

struct ParsedUrl {
    std::string scheme, host, path;
    int port;
};
ParsedUrl parse_http_url(const std::string& url);  // ConfigError on malformed/non-http

class RemoteProbeClient final : public BeliefOracle {
public:
    RemoteProbeClient(RemoteOptions options, PromptTemplate tpl);
    ~RemoteProbeClient() override;

    // Renders the prompt, posts it, temperature-scales the logprobs into an
    // answer distribution (p_other = 0), and checks the top-5 tokens for Yes
    // (case-insensitive, trimmed).
    ProbeResult probe(const LabelTriple& query) const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class RemoteJudgeClient {
public:
    explicit RemoteJudgeClient(RemoteOptions options);
    ~RemoteJudgeClient();

    // One completion round-trip; ProtocolError if "completion" is missing.
    std::string complete(const std::string& prompt) const;

    // `samples` rounds, each parsed for a final score; returns the median
    // (lower middle for even counts). samples >= 1.
    int judge(const std::string& prompt, int samples) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace kgu
