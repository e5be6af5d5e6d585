// illusory: filter images, generate synthetic illusions, query a vision chat
// endpoint and score predictions.
//
// Every relative path is resolved against --root. Settings come from built-in
// defaults, then the --config file (sections "filter", "endpoint", "synth"),
// then flags. The merged settings are written to effective_config.json in each
// output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "illusory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace illusory;

namespace {

struct Globals {
  std::string config_path;
  std::string root = ".";
  int jobs = default_jobs();
  json config = json::object();

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(root) / path;
  }

  const json& section(const char* name) const {
    static const json empty = json::object();
    return config.contains(name) ? config.at(name) : empty;
  }
};

template <typename T>
void take(const json& section, const char* key, T& field) {
  if (section.contains(key)) field = section.at(key).get<T>();
}

template <typename T>
void take(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

void load_config(Globals& g) {
  if (g.config_path.empty()) return;
  const auto bytes = read_file_bytes(g.resolve(g.config_path));
  try {
    g.config = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, g.config_path + ": " + e.what());
  }
  if (!g.config.is_object()) throw Error(ErrorCode::ParseError, g.config_path + ": not an object");
}

struct FilterFlags {
  std::optional<int> gaussian, box_kw, box_kh, median;

  void add(CLI::App* cmd) {
    cmd->add_option("--gaussian-ksize", gaussian, "Gaussian kernel size (odd)");
    cmd->add_option("--box-kw", box_kw, "Box filter width");
    cmd->add_option("--box-kh", box_kh, "Box filter height");
    cmd->add_option("--median-ksize", median, "Median kernel size (odd, >= 3)");
  }

  FilterConfig merge(const Globals& g) const {
    FilterConfig cfg;
    const json& s = g.section("filter");
    take(s, "gaussian_ksize", cfg.gaussian_ksize);
    take(s, "box_kw", cfg.box_kw);
    take(s, "box_kh", cfg.box_kh);
    take(s, "median_ksize", cfg.median_ksize);
    take(gaussian, cfg.gaussian_ksize);
    take(box_kw, cfg.box_kw);
    take(box_kh, cfg.box_kh);
    take(median, cfg.median_ksize);
    validate_config(cfg);
    return cfg;
  }
};

json to_json(const FilterConfig& c) {
  return {{"gaussian_ksize", c.gaussian_ksize},
          {"box_kw", c.box_kw},
          {"box_kh", c.box_kh},
          {"median_ksize", c.median_ksize}};
}

json to_json(const EndpointConfig& c) {
  return {{"base_url", c.base_url},         {"model_name", c.model_name},
          {"auth_token_env", c.auth_token_env}, {"max_concurrent", c.max_concurrent},
          {"retry_limit", c.retry_limit},   {"timeout_s", c.timeout_s},
          {"backoff_initial_s", c.backoff_initial_s}};
}

json to_json(const synth::SynthSpec& s) {
  return {{"class_count", s.class_count},   {"image_size", s.image_size},
          {"alpha", s.alpha},               {"carrier_scale", s.carrier_scale},
          {"seed", s.seed},                 {"no_illusion_fraction", s.no_illusion_fraction}};
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

void write_effective_config(const fs::path& dir, json cfg) {
  write_text(dir / "effective_config.json", cfg.dump(2) + "\n");
}

bool looks_like_manifest(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".jsonl" || ext == ".json";
}

// ---- filter -----------------------------------------------------------------

struct FilterArgs {
  std::string input;
  std::string out;
  FilterFlags flags;
};

ImageBuffer reveal_any(const ImageBuffer& img, const FilterConfig& cfg) {
  return reveal(img.channels() == 1 ? replicate_to_rgb(img) : img, cfg);
}

int cmd_filter(const Globals& g, const FilterArgs& a) {
  const FilterConfig cfg = a.flags.merge(g);
  const fs::path input = g.resolve(a.input);
  const fs::path out = g.resolve(a.out);
  json effective = {{"command", "filter"}, {"input", a.input}, {"out", a.out},
                    {"filter", to_json(cfg)}};

  if (!looks_like_manifest(input)) {
    // Single image: --out is a file when it has an extension, else a directory.
    const bool out_is_file = out.has_extension();
    const fs::path target = out_is_file ? out : out / input.filename().replace_extension(".png");
    try {
      write_image(target, reveal_any(read_image(input), cfg));
    } catch (const std::exception& e) {
      std::cerr << input.string() << ": " << e.what() << "\n";
      std::cout << "0 ok, 1 failed\n";
      return 1;
    }
    write_effective_config(target.parent_path(), effective);
    std::cout << "1 ok, 0 failed\n";
    return 0;
  }

  const Manifest in = load_manifest(input);
  const fs::path base = input.parent_path();
  const int n = static_cast<int>(in.records.size());
  std::vector<std::string> errors(n);
  parallel_for(n, g.jobs, [&](int i) {
    const SampleRecord& r = in.records[i];
    try {
      write_image(out / r.image_path, reveal_any(read_image(base / r.image_path), cfg));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  Manifest filtered;
  filtered.kind = in.kind;
  filtered.labels = in.labels;
  int failed = 0;
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      ++failed;
      std::cerr << in.records[i].image_path << ": " << errors[i] << "\n";
      continue;
    }
    SampleRecord r = in.records[i];
    r.variant = Variant::Filtered;
    filtered.records.push_back(std::move(r));
  }
  fs::create_directories(out);
  save_manifest(out / "manifest.jsonl", filtered);
  write_effective_config(out, effective);
  std::cout << (n - failed) << " ok, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest;
  std::string predictions;
  std::string kind;
  std::string out = "report";
  bool per_class = false;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const Manifest m = load_manifest(g.resolve(a.manifest));
  const TaskKind kind = a.kind.empty() ? m.kind : parse_kind(a.kind);
  const auto lines = load_predictions(g.resolve(a.predictions));
  const MetricsReport rep = evaluate(m, lines, kind);

  const fs::path out = g.resolve(a.out);
  const json j = report_to_json(rep);
  std::string table = render_table({{fs::path(a.predictions).stem().string(), j}});
  if (a.per_class) table += "\n" + render_per_class(j);
  write_text(out / "report.json", canonical_report(rep));
  write_text(out / "report.txt", table);
  write_effective_config(out, {{"command", "evaluate"},
                               {"manifest", a.manifest},
                               {"predictions", a.predictions},
                               {"kind", to_string(kind)},
                               {"out", a.out}});
  std::cout << table;
  return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string out = "synth";
  std::optional<int> n, classes, size;
  std::optional<double> alpha, carrier_scale, no_illusion_fraction, threshold;
  std::optional<std::uint64_t> seed;
  bool study = false;
  FilterFlags flags;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  synth::SynthSpec spec;
  int n = 200;
  double threshold = synth::kDefaultThreshold;
  const json& s = g.section("synth");
  take(s, "n", n);
  take(s, "class_count", spec.class_count);
  take(s, "image_size", spec.image_size);
  take(s, "alpha", spec.alpha);
  take(s, "carrier_scale", spec.carrier_scale);
  take(s, "seed", spec.seed);
  take(s, "no_illusion_fraction", spec.no_illusion_fraction);
  take(s, "threshold", threshold);
  take(a.n, n);
  take(a.classes, spec.class_count);
  take(a.size, spec.image_size);
  take(a.alpha, spec.alpha);
  take(a.carrier_scale, spec.carrier_scale);
  take(a.seed, spec.seed);
  take(a.no_illusion_fraction, spec.no_illusion_fraction);
  take(a.threshold, threshold);
  synth::validate_spec(spec);
  const FilterConfig cfg = a.flags.merge(g);

  const fs::path out = g.resolve(a.out);
  const Manifest m = synth::generate_set(spec, n, out, g.jobs);
  std::cout << m.size() << " images written to " << out.string() << "\n";

  json effective = {{"command", "synth"}, {"out", a.out}, {"n", n},
                    {"synth", to_json(spec)}, {"study", a.study}};
  if (a.study) {
    effective["threshold"] = threshold;
    effective["filter"] = to_json(cfg);
    const auto r = synth::run_study(spec, n, cfg, threshold, g.jobs);
    const json j = {{"samples", r.samples},
                    {"alpha", spec.alpha},
                    {"threshold", threshold},
                    {"unfiltered_correct", r.unfiltered_correct},
                    {"filtered_correct", r.filtered_correct},
                    {"unfiltered_accuracy", detail::report_round(r.unfiltered_accuracy())},
                    {"filtered_accuracy", detail::report_round(r.filtered_accuracy())}};
    write_text(out / "study.json", j.dump(2) + "\n");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s  %8s  %20s  %18s\n%-8s  %8.3f  %20.2f  %18.2f\n",
                  "Samples", "Alpha", "Unfiltered accuracy", "Filtered accuracy",
                  std::to_string(r.samples).c_str(), spec.alpha, r.unfiltered_accuracy(),
                  r.filtered_accuracy());
    write_text(out / "study.txt", buf);
    std::cout << buf;
  }
  write_effective_config(out, effective);
  return 0;
}

// ---- query ------------------------------------------------------------------

struct QueryArgs {
  std::string manifest;
  std::string variant = "illusion";
  std::string out = "predictions.jsonl";
  std::string prefiltered_root;
  bool replicate_rgb = false;
  std::optional<std::string> base_url, model, token_env;
  std::optional<int> max_concurrent, retry_limit;
  std::optional<double> timeout, backoff;
  FilterFlags flags;
};

int cmd_query(const Globals& g, const QueryArgs& a) {
  EndpointConfig ep;
  const json& s = g.section("endpoint");
  take(s, "base_url", ep.base_url);
  take(s, "model_name", ep.model_name);
  take(s, "auth_token_env", ep.auth_token_env);
  take(s, "max_concurrent", ep.max_concurrent);
  take(s, "retry_limit", ep.retry_limit);
  take(s, "timeout_s", ep.timeout_s);
  take(s, "backoff_initial_s", ep.backoff_initial_s);
  take(a.base_url, ep.base_url);
  take(a.model, ep.model_name);
  take(a.token_env, ep.auth_token_env);
  take(a.max_concurrent, ep.max_concurrent);
  take(a.retry_limit, ep.retry_limit);
  take(a.timeout, ep.timeout_s);
  take(a.backoff, ep.backoff_initial_s);
  validate_endpoint(ep);
  resolve_token(ep);  // fail before touching any file or the network

  const fs::path manifest_path = g.resolve(a.manifest);
  const Manifest m = load_manifest(manifest_path);
  const Variant variant = parse_variant(a.variant);
  EvaluationOptions opt;
  opt.root = manifest_path.parent_path();
  if (!a.prefiltered_root.empty()) opt.prefiltered_root = g.resolve(a.prefiltered_root);
  opt.filter = a.flags.merge(g);
  opt.replicate_to_rgb = a.replicate_rgb;

  const fs::path out = g.resolve(a.out);
  const auto summary = run_evaluation(m, variant, ep, out, opt);
  write_effective_config(out.parent_path(),
                         {{"command", "query"},
                          {"manifest", a.manifest},
                          {"variant", a.variant},
                          {"out", a.out},
                          {"prefiltered_root", a.prefiltered_root},
                          {"replicate_rgb", a.replicate_rgb},
                          {"endpoint", to_json(ep)},
                          {"filter", to_json(opt.filter)}});
  for (const auto& [id, reason] : summary.failures) std::cerr << id << ": " << reason << "\n";
  std::cout << summary.total << " samples, " << summary.already_done << " already done, "
            << summary.new_requests << " new requests, " << summary.succeeded << " succeeded, "
            << summary.failures.size() << " failed\n";
  return summary.failures.empty() ? 0 : 1;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> reports;
  bool per_class = false;
};

int cmd_report(const Globals& g, const ReportArgs& a) {
  std::vector<std::pair<std::string, json>> rows;
  for (const auto& r : a.reports) {
    const auto bytes = read_file_bytes(g.resolve(r));
    json j;
    try {
      j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, r + ": " + e.what());
    }
    const fs::path p(r);
    const std::string name = p.has_parent_path() ? p.parent_path().filename().string() : p.stem().string();
    rows.emplace_back(name, std::move(j));
  }
  std::cout << render_table(rows);
  if (a.per_class) {
    for (const auto& [name, j] : rows) {
      if (j.contains("per_class")) std::cout << "\n" << name << "\n" << render_per_class(j);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-pass illusion filter, synthetic illusions and VQA scoring"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "JSON config with filter/endpoint/synth sections");
  app.add_option("--root", g.root, "Base directory for relative paths");
  app.add_option("--jobs", g.jobs, "Worker threads for filter and synth")
      ->check(CLI::PositiveNumber);

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Apply the reveal filter to an image or manifest");
  filter->add_option("input", fa.input, "Image file or manifest.jsonl")->required();
  filter->add_option("--out", fa.out, "Output file or directory")->required();
  fa.flags.add(filter);

  EvaluateArgs ea;
  auto* eval = app.add_subcommand("evaluate", "Score a predictions file against a manifest");
  eval->add_option("--manifest", ea.manifest)->required();
  eval->add_option("--predictions", ea.predictions)->required();
  eval->add_option("--kind", ea.kind, "classification or char (default: manifest kind)");
  eval->add_option("--out", ea.out, "Report directory");
  eval->add_flag("--per-class", ea.per_class);

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic illusion set");
  syn->add_option("--out", sa.out, "Output directory");
  syn->add_option("--n", sa.n, "Number of samples");
  syn->add_option("--classes", sa.classes, "Number of glyph classes (<= 10)");
  syn->add_option("--size", sa.size, "Image side in pixels");
  syn->add_option("--alpha", sa.alpha, "Concept weight in the blend");
  syn->add_option("--carrier-scale", sa.carrier_scale, "Carrier noise lattice spacing");
  syn->add_option("--seed", sa.seed);
  syn->add_option("--no-illusion-fraction", sa.no_illusion_fraction);
  syn->add_option("--threshold", sa.threshold, "Oracle correlation threshold");
  syn->add_flag("--study", sa.study, "Also score the oracle on raw and filtered images");
  sa.flags.add(syn);

  QueryArgs qa;
  auto* query = app.add_subcommand("query", "Ask a vision chat endpoint about every sample");
  query->add_option("--manifest", qa.manifest)->required();
  query->add_option("--variant", qa.variant, "raw, illusion or filtered");
  query->add_option("--out", qa.out, "Predictions file (appended, resumable)");
  query->add_option("--prefiltered-root", qa.prefiltered_root);
  query->add_flag("--replicate-rgb", qa.replicate_rgb);
  query->add_option("--base-url", qa.base_url);
  query->add_option("--model", qa.model);
  query->add_option("--token-env", qa.token_env, "Environment variable holding the API token");
  query->add_option("--max-concurrent", qa.max_concurrent);
  query->add_option("--retry-limit", qa.retry_limit);
  query->add_option("--timeout", qa.timeout, "Seconds per request");
  query->add_option("--backoff", qa.backoff, "Initial retry delay in seconds");
  qa.flags.add(query);

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Render report.json files as a table");
  report->add_option("reports", ra.reports)->required();
  report->add_flag("--per-class", ra.per_class);

  CLI11_PARSE(app, argc, argv);

  try {
    load_config(g);
    if (*filter) return cmd_filter(g, fa);
    if (*eval) return cmd_evaluate(g, ea);
    if (*syn) return cmd_synth(g, sa);
    if (*query) return cmd_query(g, qa);
    if (*report) return cmd_report(g, ra);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
