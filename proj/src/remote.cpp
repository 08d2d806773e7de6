#include "kgu/remote.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgu/calibration.hpp"
#include "kgu/error.hpp"
#include "kgu/judge.hpp"
#include "kgu/util.hpp"

namespace kgu {

ParsedUrl parse_http_url(const std::string& url) {
    const std::string scheme_sep = "://";
    auto sep = url.find(scheme_sep);
    if (sep == std::string::npos) throw ConfigError("endpoint url missing scheme: " + url);
    ParsedUrl out;
    out.scheme = url.substr(0, sep);
    if (out.scheme != "http") throw ConfigError("only http endpoints are supported: " + url);
    std::string rest = url.substr(sep + scheme_sep.size());
    auto slash = rest.find('/');
    std::string hostport = (slash == std::string::npos) ? rest : rest.substr(0, slash);
    out.path = (slash == std::string::npos) ? "/" : rest.substr(slash);
    auto colon = hostport.find(':');
    if (colon == std::string::npos) {
        out.host = hostport;
        out.port = 80;
    } else {
        out.host = hostport.substr(0, colon);
        try {
            out.port = std::stoi(hostport.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad port in endpoint url: " + url);
        }
    }
    if (out.host.empty()) throw ConfigError("endpoint url missing host: " + url);
    return out;
}

namespace {

// Counting semaphore caps concurrent requests; plain condvar keeps the
// dependency surface at zero and works on every platform we build for.
class InFlightGate {
public:
    explicit InFlightGate(int limit) : limit_(std::max(limit, 1)) {}
    void acquire() {
        std::unique_lock lk(m_);
        cv_.wait(lk, [&] { return active_ < limit_; });
        ++active_;
    }
    void release() {
        {
            std::lock_guard lk(m_);
            --active_;
        }
        cv_.notify_one();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    int limit_;
    int active_ = 0;
};

struct GateGuard {
    InFlightGate& gate;
    explicit GateGuard(InFlightGate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
};

struct Transport {
    RemoteOptions options;
    ParsedUrl url;
    mutable InFlightGate gate;

    explicit Transport(RemoteOptions opts)
        : options(std::move(opts)), url(parse_http_url(options.url)), gate(options.max_in_flight) {}

    // Retries connection failures and 5xx with exponential backoff.
    nlohmann::json post_json(const nlohmann::json& body) const {
        GateGuard guard(gate);
        std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(options.retry_base_ms << (attempt - 1));
                std::this_thread::sleep_for(delay);
            }
            httplib::Client client(url.host, url.port);
            client.set_connection_timeout(options.timeout_sec, 0);
            client.set_read_timeout(options.timeout_sec, 0);
            auto res = client.Post(url.path, payload, "application/json");
            if (!res) {
                last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status >= 500) {
                last_error = "server returned " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw TransportError("endpoint " + options.url + " returned " + std::to_string(res->status));
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError("endpoint " + options.url + " sent unparseable JSON: " + e.what());
            }
        }
        throw TransportError("endpoint " + options.url + " unreachable after " +
                             std::to_string(options.max_retries + 1) + " attempts: " + last_error);
    }
};

}  // namespace

// --- probe client -----------------------------------------------------------

struct RemoteProbeClient::Impl {
    Transport transport;
    PromptTemplate tpl;
    Impl(RemoteOptions opts, PromptTemplate t) : transport(std::move(opts)), tpl(std::move(t)) {}
};

RemoteProbeClient::RemoteProbeClient(RemoteOptions options, PromptTemplate tpl)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(tpl))) {
    if (impl_->transport.options.temperature <= 0.0)
        throw ConfigError("probe temperature must be positive");
}

RemoteProbeClient::~RemoteProbeClient() = default;

ProbeResult RemoteProbeClient::probe(const LabelTriple& query) const {
    nlohmann::json body = {{"prompt", render_probe_prompt(impl_->tpl, query)},
                           {"choices", {"Yes", "No", "Unknown"}}};
    nlohmann::json res = impl_->transport.post_json(body);

    double zy, zn, zu;
    std::vector<std::string> top_tokens;
    try {
        const auto& lp = res.at("logprobs");
        zy = lp.at("Yes").get<double>();
        zn = lp.at("No").get<double>();
        zu = lp.at("Unknown").get<double>();
        top_tokens = res.at("top_tokens").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError("probe endpoint payload malformed: " + std::string(e.what()));
    }
    if (top_tokens.size() != 5)
        throw ProtocolError("probe endpoint returned " + std::to_string(top_tokens.size()) +
                            " top tokens, expected 5");

    double t = impl_->transport.options.temperature;
    auto p = softmax3(zy / t, zn / t, zu / t);
    bool yes_top5 = std::any_of(top_tokens.begin(), top_tokens.end(), [](const std::string& tok) {
        return to_lower(trim(tok)) == "yes";
    });
    return make_probe_result({p[0], p[1], p[2], 0.0}, yes_top5);
}

// --- judge client -----------------------------------------------------------

struct RemoteJudgeClient::Impl {
    Transport transport;
    explicit Impl(RemoteOptions opts) : transport(std::move(opts)) {}
};

RemoteJudgeClient::RemoteJudgeClient(RemoteOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

RemoteJudgeClient::~RemoteJudgeClient() = default;

std::string RemoteJudgeClient::complete(const std::string& prompt) const {
    nlohmann::json res = impl_->transport.post_json({{"prompt", prompt}});
    if (!res.contains("completion") || !res["completion"].is_string())
        throw ProtocolError("judge endpoint payload missing string 'completion'");
    return res["completion"].get<std::string>();
}

int RemoteJudgeClient::judge(const std::string& prompt, int samples) const {
    if (samples < 1) throw DomainError("judge samples must be >= 1");
    std::vector<int> scores;
    scores.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) scores.push_back(parse_judge_response(complete(prompt)));
    std::sort(scores.begin(), scores.end());
    return scores[(scores.size() - 1) / 2];
}

}  // namespace kgu
