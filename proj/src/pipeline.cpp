#include "kgu/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "kgu/belief.hpp"
#include "kgu/calibration.hpp"
#include "kgu/error.hpp"
#include "kgu/extract.hpp"
#include "kgu/io.hpp"
#include "kgu/judge.hpp"
#include "kgu/metrics.hpp"
#include "kgu/ref_graph.hpp"
#include "kgu/sha256.hpp"
#include "kgu/unlearn.hpp"
#include "kgu/util.hpp"
#include "kgu/version.hpp"

namespace kgu {

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 10> kStageNames = {{
    {Stage::Ingest, "ingest"},
    {Stage::ValidateTemplate, "validate-template"},
    {Stage::Calibrate, "calibrate"},
    {Stage::SampleTargets, "sample-targets"},
    {Stage::ExtractPre, "extract-pre"},
    {Stage::Simulate, "simulate"},
    {Stage::ExtractPost, "extract-post"},
    {Stage::Judge, "judge"},
    {Stage::Evaluate, "evaluate"},
    {Stage::Report, "report"},
}};

std::vector<std::string> non_empty_lines(std::string_view text) {
    std::vector<std::string> out;
    for (std::string_view line : split(text, '\n'))
        if (!trim(line).empty()) out.emplace_back(line);
    return out;
}

nlohmann::json triple_json(const LabelTriple& t) {
    return {{"subject", t.subject}, {"relation", t.relation}, {"object", t.object}};
}

LabelTriple triple_from_json(const nlohmann::json& j) {
    return {j.at("subject").get<std::string>(), j.at("relation").get<std::string>(),
            j.at("object").get<std::string>()};
}

std::vector<LabelTriple> load_targets_file(const std::filesystem::path& path) {
    std::vector<LabelTriple> out;
    std::size_t line_no = 0;
    for (const std::string& line : non_empty_lines(read_file(path))) {
        ++line_no;
        try {
            out.push_back(triple_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("targets.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SupportingSubgraph> load_subgraphs_file(const std::filesystem::path& path) {
    std::vector<SupportingSubgraph> out;
    std::size_t line_no = 0;
    for (const std::string& line : non_empty_lines(read_file(path))) {
        ++line_no;
        try {
            out.push_back(SupportingSubgraph::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.filename().string() + " line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return out;
}

ReferenceGraph load_run_graph(const std::filesystem::path& run_dir) {
    return ReferenceGraph::parse_triples(read_file(run_dir / "graph.tsv"));
}

std::unique_ptr<BeliefOracle> make_base_oracle(const RunConfig& cfg) {
    if (!cfg.belief_model.empty())
        return std::make_unique<SyntheticBeliefModel>(SyntheticBeliefModel::load(cfg.belief_model));
    RemoteOptions opt = cfg.remote;
    opt.url = cfg.probe_endpoint;
    PromptTemplate tpl =
        cfg.template_name == "llama" ? llama_probe_template() : qwen_probe_template();
    return std::make_unique<RemoteProbeClient>(opt, tpl);
}

ForgetSet forget_from_labels(const ReferenceGraph& ref, const std::vector<LabelTriple>& labels,
                             double bound) {
    ForgetSet fs;
    fs.bound = bound;
    for (const LabelTriple& lt : labels)
        fs.targets.push_back({ref.entity(lt.subject), ref.relation(lt.relation),
                              ref.entity(lt.object)});
    std::sort(fs.targets.begin(), fs.targets.end());
    return fs;
}

RubricConfig load_rubric(const RunConfig& cfg) {
    return cfg.rubric_path.empty() ? RubricConfig::defaults() : RubricConfig::load(cfg.rubric_path);
}

std::vector<LabeledExample> parse_validation_tsv(std::string_view text) {
    std::vector<LabeledExample> out;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string_view> fields = split(line, '\t');
        if (fields.size() != 4)
            throw ParseError("validation set line " + std::to_string(line_no) +
                             ": expected subject<TAB>relation<TAB>object<TAB>label");
        std::string label = to_lower(trim(fields[3]));
        LabeledExample ex;
        ex.triple = {std::string(trim(fields[0])), std::string(trim(fields[1])),
                     std::string(trim(fields[2]))};
        if (label == "positive" || label == "1") ex.positive = true;
        else if (label == "negative" || label == "0") ex.positive = false;
        else
            throw ParseError("validation set line " + std::to_string(line_no) +
                             ": label must be positive or negative, got " + std::string(fields[3]));
        out.push_back(std::move(ex));
    }
    return out;
}

double parse_csv_real(std::string_view field, std::size_t line_no) {
    std::string buf(field);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size())
        throw ParseError("logits line " + std::to_string(line_no) + ": not a number: " + buf);
    return v;
}

std::vector<LogitRecord> parse_logits_csv(std::string_view text) {
    std::vector<LogitRecord> out;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line_no == 1 && to_lower(line).rfind("z_yes", 0) == 0) continue;  // header
        std::vector<std::string_view> fields = split(line, ',');
        if (fields.size() != 4)
            throw ParseError("logits line " + std::to_string(line_no) +
                             ": expected z_yes,z_no,z_unknown,label");
        LogitRecord rec{};
        rec.z_yes = parse_csv_real(trim(fields[0]), line_no);
        rec.z_no = parse_csv_real(trim(fields[1]), line_no);
        rec.z_unknown = parse_csv_real(trim(fields[2]), line_no);
        std::string label = to_lower(trim(fields[3]));
        if (label == "positive" || label == "1") rec.positive = true;
        else if (label == "negative" || label == "0") rec.positive = false;
        else
            throw ParseError("logits line " + std::to_string(line_no) +
                             ": label must be positive or negative, got " + std::string(fields[3]));
        out.push_back(rec);
    }
    return out;
}

// item_id,rater_id,score where item_id indexes the judged stream: items
// [0, N) are the pre verdicts in target order, [N, 2N) the post verdicts.
std::map<std::size_t, std::vector<double>> parse_human_ratings(std::string_view text,
                                                               std::size_t n_items) {
    std::map<std::size_t, std::vector<double>> out;
    std::size_t line_no = 0;
    for (std::string_view raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (to_lower(line) == "item_id,rater_id,score") continue;
        std::vector<std::string_view> fields = split(line, ',');
        if (fields.size() != 3)
            throw ParseError("human ratings line " + std::to_string(line_no) +
                             ": expected item_id,rater_id,score");
        std::size_t item = 0;
        int score = -1;
        try {
            item = static_cast<std::size_t>(std::stoull(std::string(trim(fields[0]))));
            score = std::stoi(std::string(trim(fields[2])));
        } catch (const std::exception&) {
            throw ParseError("human ratings line " + std::to_string(line_no) +
                             ": malformed item_id or score");
        }
        if (item >= n_items)
            throw ParseError("human ratings line " + std::to_string(line_no) + ": item_id " +
                             std::to_string(item) + " exceeds the judged item count " +
                             std::to_string(n_items));
        if (score < 0 || score > 5)
            throw ParseError("human ratings line " + std::to_string(line_no) +
                             ": score must lie in 0..5");
        out[item].push_back(static_cast<double>(score));
    }
    return out;
}

}  // namespace

std::string_view to_string(Stage s) {
    for (auto [stage, name] : kStageNames)
        if (stage == s) return name;
    return "unknown";
}

Stage stage_from_string(std::string_view name) {
    for (auto [stage, text] : kStageNames)
        if (text == name) return stage;
    throw ConfigError("unknown stage: " + std::string(name));
}

std::vector<Stage> stage_dependencies(Stage s) {
    switch (s) {
        case Stage::Ingest:
        case Stage::ValidateTemplate:
        case Stage::Calibrate: return {};
        case Stage::SampleTargets: return {Stage::Ingest};
        case Stage::ExtractPre: return {Stage::SampleTargets, Stage::Ingest};
        case Stage::Simulate: return {Stage::SampleTargets, Stage::Ingest};
        case Stage::ExtractPost: return {Stage::Simulate, Stage::SampleTargets, Stage::Ingest};
        case Stage::Judge: return {Stage::ExtractPre, Stage::ExtractPost};
        case Stage::Evaluate:
            return {Stage::ExtractPre, Stage::ExtractPost, Stage::Simulate, Stage::Judge,
                    Stage::SampleTargets};
        case Stage::Report: return {Stage::Evaluate};
    }
    return {};
}

std::vector<std::string> stage_artifacts(Stage s) {
    switch (s) {
        case Stage::Ingest: return {"graph.tsv"};
        case Stage::ValidateTemplate: return {"template_report.json"};
        case Stage::Calibrate: return {"calibration.json", "calibration_bins.csv"};
        case Stage::SampleTargets: return {"targets.jsonl"};
        case Stage::ExtractPre: return {"subgraphs_pre.jsonl"};
        case Stage::Simulate: return {"belief_post.json"};
        case Stage::ExtractPost: return {"subgraphs_post.jsonl"};
        case Stage::Judge: return {"verdicts.jsonl"};
        case Stage::Evaluate: return {"evaluation.json", "loc_records.jsonl"};
        case Stage::Report:
            return {"report.json", "report.csv", "confusion.csv", "histogram.csv", "summary.txt"};
    }
    return {};
}

nlohmann::json ManifestEntry::to_json() const {
    nlohmann::json j{{"kind", kind},
                     {"config_sha256", config_sha256},
                     {"tool_version", tool_version}};
    if (kind == "stage") {
        j["stage"] = stage;
        j["artifacts"] = artifacts;
    } else {
        j["config"] = config;
    }
    return j;
}

ManifestEntry ManifestEntry::from_json(const nlohmann::json& j) {
    ManifestEntry e;
    e.kind = j.at("kind").get<std::string>();
    e.config_sha256 = j.at("config_sha256").get<std::string>();
    e.tool_version = j.at("tool_version").get<std::string>();
    if (e.kind == "stage") {
        e.stage = j.at("stage").get<std::string>();
        e.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    } else if (e.kind == "config") {
        e.config = j.at("config");
    } else {
        throw ParseError("manifest entry kind must be config or stage, got " + e.kind);
    }
    return e;
}

RunManifest RunManifest::load(const std::filesystem::path& run_dir) {
    RunManifest m;
    std::filesystem::path path = run_dir / "manifest.jsonl";
    if (!std::filesystem::exists(path)) return m;
    std::size_t line_no = 0;
    for (const std::string& line : non_empty_lines(read_file(path))) {
        ++line_no;
        try {
            m.entries.push_back(ManifestEntry::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("manifest.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        m.lines.push_back(line);
    }
    return m;
}

void RunManifest::append(const std::filesystem::path& run_dir, const ManifestEntry& entry) {
    lines.push_back(entry.to_json().dump());
    entries.push_back(entry);
    std::string content;
    for (const std::string& line : lines) {
        content += line;
        content += '\n';
    }
    atomic_write_file(run_dir / "manifest.jsonl", content);
}

const ManifestEntry* RunManifest::last_stage(std::string_view stage) const {
    const ManifestEntry* found = nullptr;
    for (const ManifestEntry& e : entries)
        if (e.kind == "stage" && e.stage == stage) found = &e;
    return found;
}

RunLock::RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".lock") {
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (!f)
        throw DependencyError("run directory is locked: " + path_.string() +
                              " exists; remove it if no other process owns this run");
    std::fclose(f);
}

RunLock::~RunLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

PipelineRunner::PipelineRunner(RunConfig config)
    : config_(std::move(config)), run_dir_(config_.output_dir) {
    snapshot_ = config_.to_json();
    snapshot_["paths"].erase("output_dir");
    nlohmann::json inputs;
    auto hash_input = [&](const char* name, const std::filesystem::path& path) {
        if (!path.empty()) inputs[name] = sha256_hex(read_file(path));
    };
    hash_input("reference_graph", config_.reference_graph);
    hash_input("belief_model", config_.belief_model);
    hash_input("rubric", config_.rubric_path);
    hash_input("calibration_logits", config_.calibration_logits);
    hash_input("template_validation", config_.template_validation);
    snapshot_["inputs"] = std::move(inputs);
    config_sha256_ = sha256_hex(snapshot_.dump());
}

void PipelineRunner::set_human_ratings(std::filesystem::path csv) {
    human_ratings_ = std::move(csv);
}

namespace {

// Empty when complete; otherwise says what is wrong, for the dependency error.
std::string incomplete_reason(const RunManifest& manifest, Stage stage,
                              const std::filesystem::path& run_dir,
                              const std::string& config_sha256) {
    std::string name{to_string(stage)};
    const ManifestEntry* entry = manifest.last_stage(name);
    if (!entry) return "stage " + name + " has not run";
    if (entry->config_sha256 != config_sha256)
        return "stage " + name + " ran under a different configuration";
    if (entry->tool_version != kToolVersion)
        return "stage " + name + " ran under tool version " + entry->tool_version;
    for (const std::string& artifact : stage_artifacts(stage))
        if (!entry->artifacts.count(artifact))
            return "stage " + name + " did not record artifact " + artifact;
    for (const auto& [artifact, digest] : entry->artifacts) {
        std::filesystem::path path = run_dir / artifact;
        if (!std::filesystem::exists(path))
            return "artifact " + artifact + " of stage " + name + " is missing";
        if (sha256_hex(read_file(path)) != digest)
            return "artifact " + artifact + " of stage " + name +
                   " is stale: content hash changed";
    }
    return "";
}

}  // namespace

bool PipelineRunner::stage_complete(const RunManifest& manifest, Stage stage) const {
    return incomplete_reason(manifest, stage, run_dir_, config_sha256_).empty();
}

void PipelineRunner::verify_dependencies(const RunManifest& manifest, Stage stage) const {
    std::vector<Stage> queue = stage_dependencies(stage);
    std::set<Stage> seen;
    for (std::size_t i = 0; i < queue.size(); ++i) {
        Stage dep = queue[i];
        if (!seen.insert(dep).second) continue;
        std::string reason = incomplete_reason(manifest, dep, run_dir_, config_sha256_);
        if (!reason.empty())
            throw DependencyError(std::string(to_string(stage)) + " requires " +
                                  std::string(to_string(dep)) + ": " + reason);
        for (Stage d : stage_dependencies(dep)) queue.push_back(d);
    }
}

void PipelineRunner::record_stage(RunManifest& manifest, Stage stage,
                                  const std::map<std::string, std::string>& artifacts) {
    const ManifestEntry* last_config = nullptr;
    for (const ManifestEntry& e : manifest.entries)
        if (e.kind == "config") last_config = &e;
    if (!last_config || last_config->config_sha256 != config_sha256_) {
        ManifestEntry ce;
        ce.kind = "config";
        ce.config_sha256 = config_sha256_;
        ce.tool_version = std::string(kToolVersion);
        ce.config = snapshot_;
        manifest.append(run_dir_, ce);
    }
    ManifestEntry se;
    se.kind = "stage";
    se.stage = std::string(to_string(stage));
    se.config_sha256 = config_sha256_;
    se.tool_version = std::string(kToolVersion);
    se.artifacts = artifacts;
    manifest.append(run_dir_, se);
}

std::string PipelineRunner::write_artifact(const std::string& name,
                                           std::string_view content) const {
    atomic_write_file(run_dir_ / name, content);
    return sha256_hex(content);
}

bool PipelineRunner::run_stage(Stage stage, bool force) {
    std::filesystem::create_directories(run_dir_);
    RunLock lock(run_dir_);
    RunManifest manifest = RunManifest::load(run_dir_);
    verify_dependencies(manifest, stage);
    if (!force && stage_complete(manifest, stage)) return false;

    std::map<std::string, std::string> artifacts;
    switch (stage) {
        case Stage::Ingest: artifacts = stage_ingest(); break;
        case Stage::ValidateTemplate: artifacts = stage_validate_template(); break;
        case Stage::Calibrate: artifacts = stage_calibrate(); break;
        case Stage::SampleTargets: artifacts = stage_sample_targets(); break;
        case Stage::ExtractPre: artifacts = stage_extract(false); break;
        case Stage::Simulate: artifacts = stage_simulate(); break;
        case Stage::ExtractPost: artifacts = stage_extract(true); break;
        case Stage::Judge: artifacts = stage_judge(); break;
        case Stage::Evaluate: artifacts = stage_evaluate(); break;
        case Stage::Report: artifacts = stage_report(); break;
    }
    record_stage(manifest, stage, artifacts);
    return true;
}

std::map<std::string, std::string> PipelineRunner::stage_ingest() {
    ReferenceGraph ref = ReferenceGraph::parse_triples(read_file(config_.reference_graph));
    return {{"graph.tsv", write_artifact("graph.tsv", ref.serialize())}};
}

std::map<std::string, std::string> PipelineRunner::stage_validate_template() {
    if (config_.template_validation.empty())
        throw ConfigError("template.validation must name a labeled TSV for validate-template");
    std::unique_ptr<BeliefOracle> oracle = make_base_oracle(config_);
    PromptTemplate tpl =
        config_.template_name == "llama" ? llama_probe_template() : qwen_probe_template();
    std::vector<LabeledExample> examples =
        parse_validation_tsv(read_file(config_.template_validation));
    TemplateValidationReport report = validate_template(*oracle, tpl, examples);
    return {{"template_report.json",
             write_artifact("template_report.json", report.to_json().dump(2) + "\n")}};
}

std::map<std::string, std::string> PipelineRunner::stage_calibrate() {
    if (config_.calibration_logits.empty())
        throw ConfigError("calibration.logits must name a logits CSV for calibrate");
    std::vector<LogitRecord> records = parse_logits_csv(read_file(config_.calibration_logits));
    CalibrationReport report = fit_temperature(records);
    std::ostringstream bins;
    report.write_bins_csv(bins);
    return {{"calibration.json",
             write_artifact("calibration.json", report.to_json().dump(2) + "\n")},
            {"calibration_bins.csv", write_artifact("calibration_bins.csv", bins.str())}};
}

std::map<std::string, std::string> PipelineRunner::stage_sample_targets() {
    ReferenceGraph ref = load_run_graph(run_dir_);
    std::unique_ptr<BeliefOracle> oracle = make_base_oracle(config_);
    ForgetSet fs =
        sample_forget_set(*oracle, ref, config_.forget_n, config_.forget_bound, config_.seed);
    std::string out;
    for (const LabelTriple& lt : fs.labels(ref)) out += triple_json(lt).dump() + "\n";
    return {{"targets.jsonl", write_artifact("targets.jsonl", out)}};
}

std::map<std::string, std::string> PipelineRunner::stage_extract(bool post) {
    ReferenceGraph ref = load_run_graph(run_dir_);
    std::unique_ptr<BeliefOracle> oracle;
    if (post)
        oracle = std::make_unique<SyntheticBeliefModel>(
            SyntheticBeliefModel::load(run_dir_ / "belief_post.json"));
    else
        oracle = make_base_oracle(config_);
    std::string out;
    for (const LabelTriple& lt : load_targets_file(run_dir_ / "targets.jsonl")) {
        Triple t{ref.entity(lt.subject), ref.relation(lt.relation), ref.entity(lt.object)};
        SupportingSubgraph sg = extract(*oracle, ref, t, config_.extraction);
        out += sg.to_json().dump() + "\n";
    }
    std::string name = post ? "subgraphs_post.jsonl" : "subgraphs_pre.jsonl";
    return {{name, write_artifact(name, out)}};
}

std::map<std::string, std::string> PipelineRunner::stage_simulate() {
    if (config_.belief_model.empty())
        throw ConfigError("simulate requires a synthetic belief model, not a probe endpoint");
    SyntheticBeliefModel base = SyntheticBeliefModel::load(config_.belief_model);
    ReferenceGraph ref = load_run_graph(run_dir_);
    ForgetSet fs = forget_from_labels(ref, load_targets_file(run_dir_ / "targets.jsonl"),
                                      config_.forget_bound);
    SyntheticBeliefModel post = apply_pipeline(base, config_.operators, fs, ref);
    return {{"belief_post.json",
             write_artifact("belief_post.json", post.to_json().dump(2) + "\n")}};
}

std::map<std::string, std::string> PipelineRunner::stage_judge() {
    std::vector<LabelTriple> targets = load_targets_file(run_dir_ / "targets.jsonl");
    std::vector<SupportingSubgraph> pre = load_subgraphs_file(run_dir_ / "subgraphs_pre.jsonl");
    std::vector<SupportingSubgraph> post = load_subgraphs_file(run_dir_ / "subgraphs_post.jsonl");
    if (pre.size() != targets.size() || post.size() != targets.size())
        throw DependencyError("subgraph artifacts do not cover the target list");

    std::vector<double> judged;  // pre scores for all targets, then post scores
    std::vector<nlohmann::json> pre_verdicts(targets.size()), post_verdicts(targets.size());
    if (config_.judge_backend == JudgeBackend::Rule) {
        RubricConfig rubric = load_rubric(config_);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            JudgeVerdict vp = rule_judge(pre[i], targets[i], rubric);
            JudgeVerdict vo = rule_judge(post[i], targets[i], rubric);
            pre_verdicts[i] = vp.to_json();
            post_verdicts[i] = vo.to_json();
        }
    } else {
        RemoteOptions opt = config_.remote;
        opt.url = config_.judge_endpoint;
        RemoteJudgeClient client(opt);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            int sp = client.judge(render_judge_prompt(pre[i], targets[i]), config_.judge_samples);
            int so = client.judge(render_judge_prompt(post[i], targets[i]), config_.judge_samples);
            pre_verdicts[i] = {{"score", sp}, {"backend", "remote"}};
            post_verdicts[i] = {{"score", so}, {"backend", "remote"}};
        }
    }
    std::string out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        nlohmann::json line{{"target", triple_json(targets[i])},
                            {"pre", pre_verdicts[i]},
                            {"post", post_verdicts[i]}};
        out += line.dump() + "\n";
    }
    for (const nlohmann::json& v : pre_verdicts)
        judged.push_back(v.at("score").get<double>());
    for (const nlohmann::json& v : post_verdicts)
        judged.push_back(v.at("score").get<double>());

    std::map<std::string, std::string> artifacts{
        {"verdicts.jsonl", write_artifact("verdicts.jsonl", out)}};

    if (human_ratings_) {
        auto ratings = parse_human_ratings(read_file(*human_ratings_), judged.size());
        if (ratings.empty()) throw DomainError("human ratings file holds no usable rows");
        std::vector<std::size_t> ids;
        std::vector<std::vector<double>> a, b;
        for (const auto& [item, samples] : ratings) {
            ids.push_back(item);
            a.push_back({judged[item]});
            b.push_back(samples);
        }
        AgreementReport rep = agreement(a, b);
        nlohmann::json j{{"item_ids", ids}, {"agreement", rep.to_json()}};
        artifacts["agreement.json"] = write_artifact("agreement.json", j.dump(2) + "\n");
    }
    return artifacts;
}

std::map<std::string, std::string> PipelineRunner::stage_evaluate() {
    ReferenceGraph ref = load_run_graph(run_dir_);
    std::unique_ptr<BeliefOracle> base = make_base_oracle(config_);
    SyntheticBeliefModel post_model = SyntheticBeliefModel::load(run_dir_ / "belief_post.json");
    std::vector<LabelTriple> targets = load_targets_file(run_dir_ / "targets.jsonl");
    std::vector<SupportingSubgraph> pre_sgs = load_subgraphs_file(run_dir_ / "subgraphs_pre.jsonl");
    std::vector<SupportingSubgraph> post_sgs =
        load_subgraphs_file(run_dir_ / "subgraphs_post.jsonl");
    if (pre_sgs.size() != targets.size() || post_sgs.size() != targets.size())
        throw DependencyError("subgraph artifacts do not cover the target list");

    std::vector<std::pair<int, int>> scores;
    std::size_t line_no = 0;
    for (const std::string& line : non_empty_lines(read_file(run_dir_ / "verdicts.jsonl"))) {
        ++line_no;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            scores.emplace_back(j.at("pre").at("score").get<int>(),
                                j.at("post").at("score").get<int>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("verdicts.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (scores.size() != targets.size())
        throw DependencyError("verdict artifact does not cover the target list");

    RubricConfig rubric = load_rubric(config_);
    std::vector<TargetEvaluation> evals;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        TargetEvaluation e;
        e.target = targets[i];
        e.pre_score = scores[i].first;
        e.post_score = scores[i].second;
        e.pre_subgraph = pre_sgs[i];
        e.post_subgraph = post_sgs[i];
        e.pre_instance = base->probe(targets[i]);
        e.post_instance = post_model.probe(targets[i]);
        evals.push_back(std::move(e));
    }

    std::set<LabelTriple> exclusion;
    for (const SupportingSubgraph& sg : pre_sgs)
        for (const ConfidenceEdge& edge : sg.edges) exclusion.insert(edge.triple);
    ForgetSet fs = forget_from_labels(ref, targets, config_.forget_bound);
    std::uint64_t loc_seed = fnv1a64_u64(config_.seed, fnv1a64("loc-neighbors"));
    std::vector<std::string> sampling_warnings;
    std::vector<Triple> plan = sample_loc_neighbors(ref, fs, config_.loc_multiplier, exclusion,
                                                    loc_seed, &sampling_warnings);

    std::vector<LocRecord> records;
    std::string loc_lines;
    for (const Triple& t : plan) {
        LabelTriple lt{ref.entity_label(t.subject), ref.relation_label(t.relation),
                       ref.entity_label(t.object)};
        LocRecord rec;
        rec.triple = lt;
        rec.pre_label = base->probe(lt).argmax_choice;
        rec.post_label = post_model.probe(lt).argmax_choice;
        records.push_back(rec);
        nlohmann::json j = triple_json(lt);
        j["pre"] = to_string(rec.pre_label);
        j["post"] = to_string(rec.post_label);
        loc_lines += j.dump() + "\n";
    }

    EvalReport report = evaluate(evals, records, rubric, config_.extraction.u_star, config_.gamma,
                                 config_.loc_other_consistent);
    report.warnings.insert(report.warnings.end(), sampling_warnings.begin(),
                           sampling_warnings.end());
    return {{"evaluation.json",
             write_artifact("evaluation.json", report.to_json().dump(2) + "\n")},
            {"loc_records.jsonl", write_artifact("loc_records.jsonl", loc_lines)}};
}

std::map<std::string, std::string> PipelineRunner::stage_report() {
    nlohmann::json eval_json;
    try {
        eval_json = nlohmann::json::parse(read_file(run_dir_ / "evaluation.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("evaluation.json: ") + e.what());
    }
    EvalReport report = EvalReport::from_json(eval_json);

    nlohmann::json report_json{{"tool_version", kToolVersion},
                               {"config", snapshot_},
                               {"evaluation", eval_json}};

    std::ostringstream summary;
    summary << kToolName << ' ' << kToolVersion << " evaluation summary\n";
    summary << "targets: " << report.targets.size() << "\n";
    summary << "UES(inst)=" << fmt_fixed(report.ues_instance, 4)
            << ", UES(ours)=" << fmt_fixed(report.ues_subgraph, 4)
            << ", gap=" << fmt_fixed(report.ues_instance - report.ues_subgraph, 4) << "\n";
    summary << "recall=" << fmt_fixed(report.recall, 4) << "\n";
    summary << "loc=" << fmt_fixed(report.loc, 4)
            << (report.loc_other_consistent ? " (Other->Other counted consistent)\n"
                                            : " (Other->Other counted inconsistent)\n");
    summary << "gamma<=" << fmt_fixed(report.gamma.gamma, 2) << ": " << report.gamma.passed
            << " passed, " << report.gamma.failed << " failed\n";
    for (const std::string& w : report.warnings) summary << "warning: " << w << "\n";

    return {{"report.json", write_artifact("report.json", report_json.dump(2) + "\n")},
            {"report.csv", write_artifact("report.csv", report.targets_csv())},
            {"confusion.csv", write_artifact("confusion.csv", report.confusion_csv())},
            {"histogram.csv", write_artifact("histogram.csv", report.histogram_csv())},
            {"summary.txt", write_artifact("summary.txt", summary.str())}};
}

}  // namespace kgu
