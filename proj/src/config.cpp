#include "kgu/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "kgu/calibration.hpp"
#include "kgu/error.hpp"
#include "kgu/io.hpp"
#include "kgu/util.hpp"

namespace kgu {

namespace {

double parse_real(std::string_view key, std::string_view value) {
    std::string buf(value);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size() || buf.empty())
        throw ConfigError("config key " + std::string(key) + ": not a number: " + buf);
    return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw ConfigError("config key " + std::string(key) +
                          ": not a non-negative integer: " + std::string(value));
    return v;
}

int parse_int(std::string_view key, std::string_view value) {
    int v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size())
        throw ConfigError("config key " + std::string(key) +
                          ": not an integer: " + std::string(value));
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    std::string v = to_lower(std::string(value));
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config key " + std::string(key) + ": not a boolean: " + std::string(value));
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
    std::filesystem::path p{std::string(value)};
    if (p.is_absolute() || base.empty()) return p;
    return base / p;
}

void require_file(std::string_view key, const std::filesystem::path& p) {
    if (!std::filesystem::exists(p))
        throw ConfigError("config key " + std::string(key) + ": file not found: " + p.string());
}

}  // namespace

std::string_view to_string(JudgeBackend b) {
    return b == JudgeBackend::Rule ? "rule" : "remote";
}

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
    RunConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string line(trim(raw));
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = to_lower(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = to_lower(trim(line.substr(0, eq)));
        std::string value(trim(std::string_view(line).substr(eq + 1)));
        std::string qualified = section + "." + key;

        if (section == "paths") {
            if (key == "reference_graph") cfg.reference_graph = resolve(base_dir, value);
            else if (key == "belief_model") cfg.belief_model = resolve(base_dir, value);
            else if (key == "probe_endpoint") cfg.probe_endpoint = value;
            else if (key == "output_dir") cfg.output_dir = resolve(base_dir, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "extraction") {
            if (key == "k") cfg.extraction.k = parse_int(qualified, value);
            else if (key == "u_star") cfg.extraction.u_star = parse_real(qualified, value);
            else if (key == "candidate_cap")
                cfg.extraction.candidate_cap = static_cast<std::size_t>(parse_u64(qualified, value));
            else if (key == "workers") cfg.extraction.workers = parse_int(qualified, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "rubric") {
            if (key == "path") cfg.rubric_path = value.empty() ? std::filesystem::path{}
                                                               : resolve(base_dir, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "forget") {
            if (key == "n") cfg.forget_n = static_cast<std::size_t>(parse_u64(qualified, value));
            else if (key == "bound") cfg.forget_bound = parse_real(qualified, value);
            else if (key == "seed") cfg.seed = parse_u64(qualified, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "operators") {
            if (key == "pipeline") cfg.operator_pipeline = value;
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "loc") {
            if (key == "multiplier")
                cfg.loc_multiplier = static_cast<std::size_t>(parse_u64(qualified, value));
            else if (key == "other_consistent")
                cfg.loc_other_consistent = parse_bool(qualified, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "judge") {
            if (key == "backend") {
                std::string v = to_lower(value);
                if (v == "rule") cfg.judge_backend = JudgeBackend::Rule;
                else if (v == "remote") cfg.judge_backend = JudgeBackend::Remote;
                else throw ConfigError("config key judge.backend: expected rule or remote, got " + value);
            } else if (key == "samples") cfg.judge_samples = parse_int(qualified, value);
            else if (key == "endpoint_url") cfg.judge_endpoint = value;
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "eval") {
            if (key == "gamma") cfg.gamma = parse_real(qualified, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "remote") {
            if (key == "temperature") cfg.remote.temperature = parse_real(qualified, value);
            else if (key == "max_in_flight") cfg.remote.max_in_flight = parse_int(qualified, value);
            else if (key == "max_retries") cfg.remote.max_retries = parse_int(qualified, value);
            else if (key == "retry_base_ms") cfg.remote.retry_base_ms = parse_int(qualified, value);
            else if (key == "timeout_sec") cfg.remote.timeout_sec = parse_int(qualified, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "calibration") {
            if (key == "logits") cfg.calibration_logits = value.empty() ? std::filesystem::path{}
                                                                        : resolve(base_dir, value);
            else throw ConfigError("unknown config key: " + qualified);
        } else if (section == "template") {
            if (key == "validation")
                cfg.template_validation = value.empty() ? std::filesystem::path{}
                                                        : resolve(base_dir, value);
            else if (key == "name") cfg.template_name = to_lower(value);
            else throw ConfigError("unknown config key: " + qualified);
        } else {
            throw ConfigError("unknown config section: [" + section + "]");
        }
    }
    cfg.operators = parse_operator_pipeline(cfg.operator_pipeline);
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("config file not found: " + path.string());
    RunConfig cfg = parse(read_file(path), path.parent_path());
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (reference_graph.empty()) throw ConfigError("paths.reference_graph is required");
    require_file("paths.reference_graph", reference_graph);

    bool have_model = !belief_model.empty();
    bool have_endpoint = !probe_endpoint.empty();
    if (have_model == have_endpoint)
        throw ConfigError("exactly one of paths.belief_model and paths.probe_endpoint is required");
    if (have_model) require_file("paths.belief_model", belief_model);
    if (have_endpoint) parse_http_url(probe_endpoint);

    if (output_dir.empty()) throw ConfigError("paths.output_dir is required");

    try {
        extraction.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("extraction: ") + e.what());
    }

    if (!rubric_path.empty()) require_file("rubric.path", rubric_path);

    if (forget_n < 1) throw ConfigError("forget.n: the forget set cannot be empty");
    if (!(forget_bound > 0.0 && forget_bound <= kLog2Of3 + 1e-12))
        throw ConfigError("forget.bound must lie in (0, log2 3]");

    if (operators.empty()) throw ConfigError("operators.pipeline must name at least one operator");

    if (loc_multiplier < 1) throw ConfigError("loc.multiplier must be at least 1");
    if (judge_samples < 1) throw ConfigError("judge.samples must be at least 1");
    if (judge_backend == JudgeBackend::Remote) {
        if (judge_endpoint.empty())
            throw ConfigError("judge.endpoint_url is required for the remote judge backend");
        parse_http_url(judge_endpoint);
    }
    if (!(gamma >= 0.0 && gamma <= 5.0)) throw ConfigError("eval.gamma must lie in [0, 5]");

    if (!(remote.temperature > 0.0)) throw ConfigError("remote.temperature must be positive");
    if (remote.max_in_flight < 1) throw ConfigError("remote.max_in_flight must be at least 1");
    if (remote.max_retries < 0) throw ConfigError("remote.max_retries cannot be negative");
    if (remote.retry_base_ms < 0) throw ConfigError("remote.retry_base_ms cannot be negative");
    if (remote.timeout_sec < 1) throw ConfigError("remote.timeout_sec must be at least 1");

    if (!calibration_logits.empty()) require_file("calibration.logits", calibration_logits);
    if (!template_validation.empty()) require_file("template.validation", template_validation);
    if (template_name != "qwen" && template_name != "llama")
        throw ConfigError("template.name must be qwen or llama");
}

nlohmann::json RunConfig::to_json() const {
    std::vector<std::string> ops;
    for (const UnlearnOperatorSpec& op : operators) ops.push_back(format_operator(op));
    return nlohmann::json{
        {"paths",
         {{"reference_graph", reference_graph.string()},
          {"belief_model", belief_model.string()},
          {"probe_endpoint", probe_endpoint},
          {"output_dir", output_dir.string()}}},
        // workers is an execution knob, not a semantic one: results are
        // schedule-independent, so it must not invalidate completed stages.
        {"extraction",
         {{"k", extraction.k},
          {"u_star", extraction.u_star},
          {"candidate_cap", extraction.candidate_cap}}},
        {"rubric", {{"path", rubric_path.string()}}},
        {"forget", {{"n", forget_n}, {"bound", forget_bound}, {"seed", seed}}},
        {"operators", ops},
        {"loc", {{"multiplier", loc_multiplier}, {"other_consistent", loc_other_consistent}}},
        {"judge",
         {{"backend", to_string(judge_backend)},
          {"samples", judge_samples},
          {"endpoint_url", judge_endpoint}}},
        {"eval", {{"gamma", gamma}}},
        {"remote",
         {{"temperature", remote.temperature},
          {"max_in_flight", remote.max_in_flight},
          {"max_retries", remote.max_retries},
          {"retry_base_ms", remote.retry_base_ms},
          {"timeout_sec", remote.timeout_sec}}},
        {"calibration", {{"logits", calibration_logits.string()}}},
        {"template",
         {{"validation", template_validation.string()}, {"name", template_name}}}};
}

}  // namespace kgu
